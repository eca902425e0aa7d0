import numpy as np
import pytest

from qsh import _kernels_py, kernels
from qsh.tensor_algebra import commutator, matmul, project_symmetric_traceless, reaction_term
from qsh.params import Coefficients

needs_compiled = pytest.mark.skipif(not kernels.compiled_available(), reason="compiled kernels not built")


def _fields(rng, d, n=257):
    Q = project_symmetric_traceless(rng.standard_normal((d, d, n)))
    A = project_symmetric_traceless(rng.standard_normal((d, d, n)))
    N = project_symmetric_traceless(rng.standard_normal((d, d, n)))
    Om = rng.standard_normal((d, d, n))
    Om = 0.5 * (Om - np.swapaxes(Om, 0, 1))
    gQ = rng.standard_normal((d, d, d, n))
    v = rng.standard_normal((d, n))
    return Q, A, N, Om, gQ, v


@pytest.fixture(autouse=True)
def _restore_backend():
    name = kernels.BACKEND
    yield
    kernels.use_backend(name)


@pytest.mark.parametrize("d", [2, 3])
def test_python_kernels_match_tensor_algebra(rng, d):
    Q, A, N, Om, gQ, v = _fields(rng, d)
    kernels.use_backend("python")
    assert np.allclose(kernels.commutator(Om, Q), commutator(Om, Q), atol=1e-14)
    k = Coefficients(a=-0.3, b=0.7, c=1.3, dim=d)
    assert np.allclose(kernels.reaction(Q, k.a, k.b, k.c), reaction_term(Q, k), atol=1e-13)
    # elastic stress -L grad Q (.) grad Q, summed over tensor indices
    ref = -2.0 * np.einsum("abi...,abj...->ij...", gQ, gQ)
    assert np.allclose(kernels.elastic_stress(gQ, 2.0), ref, atol=1e-13)
    # advection v . grad F
    assert np.allclose(kernels.advect(v, gQ), np.einsum("abk...,k...->ab...", gQ, v), atol=1e-13)


@pytest.mark.parametrize("d", [2, 3])
def test_viscous_stress_formula(rng, d):
    Q, A, N, _, _, _ = _fields(rng, d)
    b1, b5, b6, mu2, mu1 = 0.3, 0.7, -0.2, 0.5, 1.1
    kernels.use_backend("python")
    out = kernels.viscous_stress(Q, A, N, b1, b5, b6, mu2, mu1)
    QA = matmul(Q, A)
    AQ = matmul(A, Q)
    ref = (
        b1 * Q * np.einsum("ij...,ij...->...", Q, A)
        + b5 * AQ
        + b6 * QA
        + 0.5 * mu2 * N
        + mu1 * (matmul(Q, N) - matmul(N, Q))
    )
    assert np.allclose(out, ref, atol=1e-13)


@needs_compiled
@pytest.mark.parametrize("d", [2, 3])
def test_backends_agree(rng, d):
    Q, A, N, Om, gQ, v = _fields(rng, d, n=1000)
    results = {}
    for name in ("python", "cython"):
        kernels.use_backend(name)
        results[name] = (
            kernels.commutator(Om, Q),
            kernels.reaction(Q, -0.3, 0.7, 1.3),
            kernels.viscous_stress(Q, A, N, 0.3, 0.7, -0.2, 0.5, 1.1),
            kernels.elastic_stress(gQ, 1.5),
            kernels.advect(v, gQ),
        )
    for a, b in zip(results["python"], results["cython"]):
        assert np.allclose(a, b, rtol=1e-14, atol=1e-14)


@needs_compiled
@pytest.mark.parametrize("d", [2, 3])
def test_backends_agree_radial(d):
    m, R = 200, 2.0
    h = R / m
    rf = np.arange(m + 1) * h
    rc = 0.5 * (rf[1:] + rf[:-1])
    wf = rf ** (d - 1)
    wc = (rf[1:] ** d - rf[:-1] ** d) / (d * h)
    f = np.exp(-rc) * rc**2
    out = []
    for name in ("python", "cython"):
        kernels.use_backend(name)
        out.append(kernels.radial_laplacian(f, rc, wc, wf, h, d, -f[-1]))
    assert np.allclose(out[0], out[1], rtol=1e-13, atol=1e-13)


def test_radial_laplacian_exact_on_r_squared():
    # r^{1-d}(r^{d-1} f')' - 2d f/r^2 vanishes for f = r^2 in every dimension
    for d in (2, 3):
        m, h = 64, 1.0 / 64
        rf = np.arange(m + 1) * h
        rc = 0.5 * (rf[1:] + rf[:-1])
        wc = (rf[1:] ** d - rf[:-1] ** d) / (d * h)
        f = rc**2
        ghost = ((m + 0.5) * h) ** 2
        out = _kernels_py.radial_laplacian(f, rc, wc, rf ** (d - 1), h, d, ghost)
        assert np.abs(out).max() <= 1e-9


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.use_backend("fortran")
