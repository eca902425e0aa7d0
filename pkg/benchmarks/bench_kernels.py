"""Time the compiled and numpy kernel backends on a 128^2 (or 32^3) field.

Usage: python benchmarks/bench_kernels.py [--dim 2] [--n 128] [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from qsh import kernels
from qsh.params import Coefficients
from qsh.spectral import Grid
from qsh.dynamics import SimState, Stepper
from qsh.io import random_smooth


def _inputs(d, npts, rng):
    def sym(shape):
        M = rng.standard_normal(shape)
        M = 0.5 * (M + np.swapaxes(M, 0, 1))
        M -= np.eye(d).reshape((d, d) + (1,) * (M.ndim - 2)) * np.einsum("ii...->...", M) / d
        return M

    return {
        "Q": sym((d, d, npts)),
        "A": sym((d, d, npts)),
        "N": sym((d, d, npts)),
        "gQ": rng.standard_normal((d, d, d, npts)),
        "v": rng.standard_normal((d, npts)),
    }


def _cases(x):
    return {
        "commutator": lambda: kernels.commutator(x["Q"], x["N"]),
        "reaction": lambda: kernels.reaction(x["Q"], -0.5, 1.0, 1.0),
        "viscous_stress": lambda: kernels.viscous_stress(x["Q"], x["A"], x["N"], 0.1, 0.2, 0.3, 0.4, 1.0),
        "elastic_stress": lambda: kernels.elastic_stress(x["gQ"], 1.0),
        "advect": lambda: kernels.advect(x["v"], x["gQ"]),
    }


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--repeat", type=int, default=20)
    args = p.parse_args(argv)

    if not kernels.compiled_available():
        print("compiled backend not built; only the numpy backend is available")
        return 1
    d = args.dim
    grid = Grid(d, args.n)
    x = _inputs(d, grid.npoints, np.random.default_rng(0))
    state = random_smooth(grid, seed=0, amplitude=0.1)
    coeffs = Coefficients(b=0.5, mu2=0.2, mu2_tilde=-0.2, beta1=0.1, beta5=0.1, beta6=0.1, dim=d)

    rows = []
    for name in list(_cases(x)) + ["rk4 step"]:
        times = {}
        for backend in ("python", "cython"):
            kernels.use_backend(backend)
            if name == "rk4 step":
                stepper = Stepper(SimState(grid, 0.0, state.v, state.Q, state.W), coeffs)
                fn = lambda: stepper.step(1e-4)  # noqa: E731
            else:
                fn = _cases(x)[name]
            times[backend] = _best(fn, args.repeat)
        rows.append((name, times["python"], times["cython"]))

    print(f"grid {d}d n={args.n} ({grid.npoints} points), best of {args.repeat}")
    print(f"{'kernel':<16}{'numpy ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, tp, tc in rows:
        print(f"{name:<16}{tp * 1e3:>12.3f}{tc * 1e3:>12.3f}{tp / tc:>10.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
