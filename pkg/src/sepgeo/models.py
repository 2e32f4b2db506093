"""Jump-rate models and initial conditions for the exclusion processes.

Three nearest-neighbour exclusion dynamics are supported:

* ``tasep``  - right jumps at rate 1;
* ``asep``   - right rate p, left rate q = 1 - p with p in (1/2, 1];
* ``asepsc`` - speed-changed rates depending on the two next-nearest sites,
  parametrized by (beta, E) so that the two-parameter Gibbs measure with
  nearest-neighbour interaction beta is stationary.

Particles are labeled right to left: X_{n+1}(t) < X_n(t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

RIGHT = "right"
LEFT = "left"

KIND_TASEP = "tasep"
KIND_ASEP = "asep"
KIND_ASEPSC = "asepsc"
_KINDS = (KIND_TASEP, KIND_ASEP, KIND_ASEPSC)


@dataclass(frozen=True)
class RateModel:
    """Jump rates of one model; the single source of rates for every module.

    ``atab``/``gtab`` give the right/left attempt rate of a particle as a
    function of the two *witness* sites of its 4-site window: for a right jump
    from site j the witnesses are (eta(j-1), eta(j+2)), for a left jump into
    site j they are the same pair of the window (j-1, j, j+1, j+2).  Table
    index is ``2*eta(j-1) + eta(j+2)``.  For tasep/asep the tables are
    constant, which makes the rates window-independent.
    """

    kind: str
    p: float = 1.0
    q: float = 0.0
    beta: float = 0.0
    E: float = math.inf
    alpha: tuple = ()  # (alpha2, alpha3, alpha4) for asepsc
    gamma: tuple = ()  # (gamma2, gamma3, gamma4)
    atab: np.ndarray = field(default=None, repr=False)
    gtab: np.ndarray = field(default=None, repr=False)

    @property
    def rmax_right(self) -> float:
        return float(self.atab.max())

    @property
    def rmax_left(self) -> float:
        return float(self.gtab.max())

    @property
    def rstar(self) -> float:
        """Uniformization bound on a particle's total attempt rate."""
        return self.rmax_right + self.rmax_left

    @property
    def has_left_jumps(self) -> bool:
        return self.rmax_left > 0.0

    def kernel_args(self):
        return self.atab, self.gtab, self.rmax_right, self.rstar


def _check_finite(name, value):
    if value is None or not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")


def build_rate_model(kind: str, p: float | None = None,
                     beta: float | None = None, E: float | None = None) -> RateModel:
    """Validate parameters and populate the rate tables for one model."""
    if kind not in _KINDS:
        raise ValueError(f"unknown model kind {kind!r}")

    if kind == KIND_TASEP:
        atab = np.full(4, 1.0)
        gtab = np.zeros(4)
        return RateModel(kind=kind, p=1.0, q=0.0, atab=atab, gtab=gtab)

    if kind == KIND_ASEP:
        if p is None or math.isnan(p):
            raise ValueError("asep requires p")
        if not 0.5 < p <= 1.0:
            raise ValueError(f"asep requires p in (1/2, 1], got {p}")
        q = 1.0 - p
        atab = np.full(4, float(p))
        gtab = np.full(4, q)
        return RateModel(kind=kind, p=float(p), q=q, atab=atab, gtab=gtab)

    # asepsc
    _check_finite("beta", beta)
    if E is None or math.isnan(E) or E < 0:
        raise ValueError(f"asepsc requires E in [0, inf], got {E}")
    ebm = math.exp(-beta)
    eEm = 0.0 if math.isinf(E) else math.exp(-E)
    alpha = (1.0, 0.5 * (1.0 + ebm), ebm)
    gamma = (ebm * eEm, 0.5 * (1.0 + ebm) * eEm, eEm)
    if min(alpha) < 0 or min(gamma) < 0:
        raise ValueError("negative rates")
    a2, a3, a4 = alpha
    g2, g3, g4 = gamma
    # witness-index tables: idx = 2*eta(j-1) + eta(j+2)
    atab = np.array([a3, a2, a4, a3])
    gtab = np.array([g3, g2, g4, g3])
    model = RateModel(kind=kind, beta=float(beta), E=float(E),
                      alpha=alpha, gamma=gamma, atab=atab, gtab=gtab)
    _validate_asepsc_constraints(model)
    return model


def _validate_asepsc_constraints(model: RateModel, rtol: float = 1e-12) -> None:
    """Detailed-balance-type constraints tying the rates to (beta, E)."""
    a2, a3, a4 = model.alpha
    g2, g3, g4 = model.gamma
    eb = math.exp(model.beta)
    eEm = 0.0 if math.isinf(model.E) else math.exp(-model.E)

    def close(x, y):
        return abs(x - y) <= rtol * max(1.0, abs(x), abs(y))

    checks = (
        (a2, eb * a4),
        (a2 + a4, 2.0 * a3),
        (g2, a2 * math.exp(-model.beta) * eEm),
        (g3, a3 * eEm),
        (g4, a4 * eb * eEm),
    )
    for got, want in checks:
        if not close(got, want):
            raise ValueError(f"asepsc rate constraint violated: {got} != {want}")


@dataclass(frozen=True)
class Neighborhood4:
    """Occupancies (eta(j-1), eta(j), eta(j+1), eta(j+2)) of a jump window."""

    bits: tuple

    def __post_init__(self):
        if len(self.bits) != 4 or any(b not in (0, 1) for b in self.bits):
            raise ValueError("window must be 4 occupancy bits")


def local_rate(model: RateModel, window: Neighborhood4, direction: str) -> float:
    """Rate of the jump described by the window, in the given direction.

    A right jump moves the particle at j to j+1 (needs eta(j)=1, eta(j+1)=0);
    a left jump moves the particle at j+1 to j (needs eta(j+1)=1, eta(j)=0).
    """
    w0, w1, w2, w3 = window.bits
    idx = 2 * w0 + w3
    if direction == RIGHT:
        if not (w1 == 1 and w2 == 0):
            raise ValueError("right jump needs eta(j)=1, eta(j+1)=0")
        return float(model.atab[idx])
    if direction == LEFT:
        if not (w1 == 0 and w2 == 1):
            raise ValueError("left jump needs eta(j)=0, eta(j+1)=1")
        return float(model.gtab[idx])
    raise ValueError(f"direction must be {RIGHT!r} or {LEFT!r}")


@dataclass(frozen=True)
class InitialCondition:
    """Labeled particle positions at time zero, strictly decreasing in label."""

    kind: str
    labels: np.ndarray
    positions: np.ndarray
    rho: float | None = None

    def __post_init__(self):
        if len(self.labels) == 0:
            raise ValueError("empty label range")
        if np.any(np.diff(self.positions) >= 0):
            raise ValueError("positions must be strictly decreasing in label")

    def position_of(self, label: int) -> int:
        i = int(label) - int(self.labels[0])
        return int(self.positions[i])


def _floor_snap(x: float) -> int:
    """floor(x) robust to the quotient landing a hair under an integer."""
    k = math.floor(x)
    if (k + 1) - x < 1e-9 * max(1.0, abs(x)):
        k += 1
    return k


def initial_condition(kind: str, rho: float | None = None,
                      labels=None, positions=None) -> InitialCondition:
    """Build flat, step, or explicit initial data on a contiguous label range."""
    if labels is None:
        raise ValueError("label range required")
    labels = np.asarray(list(labels), dtype=np.int64)
    if labels.size == 0:
        raise ValueError("empty label range")
    if np.any(np.diff(labels) != 1):
        raise ValueError("labels must be contiguous ascending")

    if kind == "flat":
        if rho is None or not 0.0 < rho < 1.0:
            raise ValueError(f"flat initial condition needs rho in (0,1), got {rho}")
        pos = np.array([-_floor_snap(n / rho) for n in labels], dtype=np.int64)
        return InitialCondition("flat", labels, pos, rho=rho)
    if kind == "step":
        if labels[0] < 0:
            raise ValueError("step initial condition has particles only for n >= 0")
        pos = -labels.astype(np.int64)
        return InitialCondition("step", labels, pos, rho=rho)
    if kind == "explicit":
        pos = np.asarray(positions, dtype=np.int64)
        if pos.shape != labels.shape:
            raise ValueError("positions must match label range")
        return InitialCondition("explicit", labels, pos, rho=rho)
    raise ValueError(f"unknown initial condition kind {kind!r}")
