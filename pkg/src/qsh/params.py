"""Model coefficients, regime validation and material presets."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

# Equality tolerance for the algebraic viscosity relations.
RELATION_TOL = 1e-12

# Extreme value of tr(Q^3)/|Q|^3 over traceless symmetric 3x3 Q (uniaxial).
TRQ3_MAX = 1.0 / math.sqrt(6.0)


class Regime(str, enum.Enum):
    ENERGY_DECAY = "EnergyDecay"
    SMALL_DATA = "SmallData"
    UNCONSTRAINED = "Unconstrained"

    @classmethod
    def parse(cls, value: "str | Regime") -> "Regime":
        if isinstance(value, Regime):
            return value
        key = str(value).strip().lower().replace("_", "")
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown regime {value!r}")


@dataclass(frozen=True)
class Coefficients:
    """Non-dimensional material and viscosity coefficients.

    ``mu2`` enters the viscous stress and ``mu2_tilde`` the molecular field;
    they are independent inputs and are never tied implicitly.
    """

    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    L: float = 1.0
    J: float = 0.1
    mu1: float = 1.0
    mu2: float = 0.0
    mu2_tilde: float = 0.0
    beta1: float = 0.0
    beta4: float = 10.0
    beta5: float = 0.0
    beta6: float = 0.0
    dim: int = 2

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        for f in fields(self):
            if f.name == "dim":
                continue
            value = getattr(self, f.name)
            if not math.isfinite(float(value)):
                raise ValueError(f"coefficient {f.name} is not finite: {value!r}")
            object.__setattr__(self, f.name, float(value))

    def replace(self, **changes) -> "Coefficients":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: list[tuple[str, str]] = field(default_factory=list)
    mu1_bar: float = float("nan")
    warnings: list[str] = field(default_factory=list)

    def format(self) -> str:
        lines = [f"ok = {str(self.ok).lower()}"]
        lines.append(f"mu1_bar = {self.mu1_bar!r}")
        for name, message in self.violations:
            lines.append(f"violation [{name}]: {message}")
        for message in self.warnings:
            lines.append(f"warning: {message}")
        return "\n".join(lines)


def _close(x: float, y: float) -> bool:
    return abs(x - y) <= RELATION_TOL * (1.0 + abs(x) + abs(y))


def validate(coeffs: Coefficients, regime: "Regime | str" = Regime.ENERGY_DECAY) -> ValidationReport:
    """Report every violated hypothesis of the selected regime.

    Never raises for physics violations; running outside a regime is a
    legitimate experiment.
    """
    regime = Regime.parse(regime)
    k = coeffs
    violations: list[tuple[str, str]] = []
    warnings: list[str] = []

    if not k.J > 0:
        violations.append(("J>0", f"inertial density J={k.J} must be positive"))
    if not k.L > 0:
        violations.append(("L>0", f"elastic coefficient L={k.L} must be positive"))

    mu1_bar = validate_coercivity(k) if k.c > 0 else float("nan")

    if regime is Regime.ENERGY_DECAY:
        if k.beta1 < 0:
            violations.append(("beta1>=0", f"beta1={k.beta1} must be non-negative"))
        if not k.beta4 > 0:
            violations.append(("beta4>0", f"beta4={k.beta4} must be positive"))
        if k.mu1 < 0:
            violations.append(("mu1>=0", f"mu1={k.mu1} must be non-negative"))
        if not k.c > 0:
            violations.append(("c>0", f"c={k.c} must be positive for a bounded bulk energy"))
        if not _close(k.beta6 - k.beta5, k.mu2):
            violations.append(
                ("parodi", f"beta6-beta5=mu2 fails: {k.beta6 - k.beta5!r} != {k.mu2!r}")
            )
        if not _close(k.beta5 + k.beta6, 0.0):
            violations.append(("corotational", f"beta5+beta6=0 fails: sum is {k.beta5 + k.beta6!r}"))
        both_zero = _close(k.mu2, 0.0) and _close(k.mu2_tilde, 0.0)
        if not (both_zero or _close(k.mu2_tilde, -k.mu2)):
            violations.append(
                (
                    "mu2cond",
                    f"need mu2_tilde=mu2=0 or mu2_tilde=-mu2, got mu2_tilde={k.mu2_tilde!r}, mu2={k.mu2!r}",
                )
            )
        bound = abs(k.mu2_tilde) + abs(k.mu2) + abs(k.beta5) + abs(k.beta6)
        if bound > 0 and not k.beta4 > bound:
            warnings.append(
                f"beta4={k.beta4} does not exceed the crude absorption bound {bound}; "
                "energy decay relies on the runtime monotonicity check"
            )
        if (k.dim == 3 or k.a < 0) and k.c > 0 and not k.mu1 > mu1_bar:
            warnings.append(
                f"bulk energy can be negative and mu1={k.mu1} <= mu1_bar={mu1_bar}; "
                "L2 control of Q is not guaranteed"
            )
    elif regime is Regime.SMALL_DATA:
        if not k.beta1 > 0:
            violations.append(("beta1>0", f"beta1={k.beta1} must be positive"))
        if not k.mu1 > 0:
            violations.append(("mu1>0", f"mu1={k.mu1} must be positive"))
        if not k.a > 0:
            violations.append(("a>0", f"a={k.a} must be positive"))
        if not k.beta4 > 0:
            violations.append(("beta4>0", f"beta4={k.beta4} must be positive"))
        if k.c > 0 and not k.mu1 > mu1_bar:
            violations.append(("mu1>mu1_bar", f"mu1={k.mu1} must exceed mu1_bar={mu1_bar}"))
        if k.J >= k.mu1:
            warnings.append(f"J={k.J} >= mu1={k.mu1}; the L2 estimate for Q assumes J < mu1")
        warnings.append("J0, beta4 threshold and epsilon0 are not computed; smallness is checked empirically")

    return ValidationReport(ok=not violations, violations=violations, mu1_bar=mu1_bar, warnings=warnings)


def _min_quartic(p2: float, p3: float, p4: float) -> float:
    """Minimum over rho >= 0 of p2*rho^2 + p3*rho^3 + p4*rho^4 (p4 > 0)."""
    # stationary points: rho * (2 p2 + 3 p3 rho + 4 p4 rho^2) = 0
    candidates = [0.0]
    for root in np.roots([4.0 * p4, 3.0 * p3, 2.0 * p2]):
        if abs(root.imag) < 1e-12 and root.real > 0:
            candidates.append(float(root.real))
    return min(p2 * r**2 + p3 * r**3 + p4 * r**4 for r in candidates)


def validate_coercivity(coeffs: Coefficients, tol: float = 1e-6) -> float:
    """Smallest mu1_bar >= 0 with mu1_bar*|Q|^2 + 4*psi_B(Q) >= 0 for all Q.

    For fixed |Q| = rho the only shape-dependent term is tr(Q^3), bounded by
    rho^3/sqrt(6) in d=3 and identically zero in d=2, so feasibility of a
    candidate reduces to non-negativity of a quartic in rho; the candidate
    is then bisected.
    """
    k = coeffs
    if not k.c > 0:
        raise ValueError(f"coercivity threshold needs c > 0, got c={k.c}")
    tau = TRQ3_MAX if k.dim == 3 else 0.0
    p3 = -4.0 * abs(k.b) * tau / 3.0
    p4 = k.c

    def feasible(mu: float) -> bool:
        return _min_quartic(mu + 2.0 * k.a, p3, p4) >= -1e-14

    if feasible(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while not feasible(hi):
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


# Ratios to mu1 for MBBA.
MBBA_RATIOS = {"mu2": -1.92, "beta1": 0.17, "beta4": 0.7, "beta5": 0.7, "beta6": -0.79}


MBBA_WARNINGS = (
    "a, b, c, L, J are defaults (1, 1, 1, 1, 0.1), not MBBA material values",
    "mu2_tilde set to -mu2",
)


def preset_mbba(mu1: float, dim: int = 2) -> Coefficients:
    """MBBA viscosity ratios scaled by ``mu1``.

    Bulk and elastic values are placeholders, see ``MBBA_WARNINGS``.
    """
    if not mu1 > 0:
        raise ValueError(f"mu1 must be positive, got {mu1}")
    scaled = {name: ratio * mu1 for name, ratio in MBBA_RATIOS.items()}
    return Coefficients(
        a=1.0,
        b=1.0,
        c=1.0,
        L=1.0,
        J=0.1,
        mu1=mu1,
        mu2_tilde=-scaled["mu2"],
        dim=dim,
        **scaled,
    )
