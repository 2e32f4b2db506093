"""Reference distributions via Fredholm determinants.

* Airy function Ai and Ai' to ~1e-13 absolute on [-15, 30]: Maclaurin series
  accumulated in extended precision on the middle range, Poincare asymptotics
  outside, with the crossovers placed where the branches agree to 1e-13.
* Nystrom discretization of integral operators on [0, inf) using
  Gauss-Legendre nodes on [0,1] pushed through a rational (default) or
  exponential change of variables.
* F_GOE(s) = det(I - K) with kernel Ai(x+y+s) on L^2(0, inf).
* Joint density f(t, m) of (argmax location, max value) of the Airy2 process
  minus a parabola, and its location marginal; the perturbation enters as a
  rank-one update of the GOE kernel.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

SQRT_PI = math.sqrt(math.pi)
CBRT2 = 2.0 ** (1.0 / 3.0)
CBRT4 = 4.0 ** (1.0 / 3.0)

# extended-precision series constants: the cancellation between the two
# sub-series amplifies any rounding of Ai(0), Ai'(0) by exp((2/3)x^{3/2})
_AI0 = np.longdouble("0.35502805388781723926006318600418317639797917419917724058")
_AIP0 = np.longdouble("-0.25881940379280679840518356018920396347909113835493458221")

_SERIES_HI = 5.75  # positive crossover to the decaying asymptotic branch
_SERIES_LO = -8.0  # negative crossover to the oscillatory branch

# Poincare coefficients u_k (Ai) and v_k (Ai'); enough terms for |zeta| >= 9.6
_N_ASY = 24
_UK = np.empty(_N_ASY)
_VK = np.empty(_N_ASY)
_UK[0] = 1.0
_VK[0] = 1.0
for _k in range(_N_ASY - 1):
    _UK[_k + 1] = _UK[_k] * (6 * _k + 1) * (6 * _k + 5) / (72.0 * (_k + 1))
    _VK[_k + 1] = _UK[_k + 1] * (6 * _k + 7) / (1 - 6 * (_k + 1))


def _airy_series(x: np.ndarray):
    """Maclaurin series for Ai, Ai' on the middle range.

    Accumulated in extended precision with compensated summation so the
    cancellation between the two sub-series (both of size exp((2/3)x^{3/2}))
    leaves ~1e-13 absolute accuracy up to the positive crossover.
    """
    xl = x.astype(np.longdouble)
    safe = np.where(xl != 0, xl, 1.0)
    x3 = xl * xl * xl
    sums = [np.ones_like(xl), xl.copy(), np.zeros_like(xl), np.ones_like(xl)]
    comps = [np.zeros_like(xl) for _ in range(4)]

    def add(slot, term):
        y = term - comps[slot]
        t = sums[slot] + y
        comps[slot] = (t - sums[slot]) - y
        sums[slot] = t

    tf = np.ones_like(xl)
    tg = xl.copy()
    for k in range(1, 140):
        tf = tf * x3 / ((3 * k - 1) * (3 * k))
        tg = tg * x3 / ((3 * k) * (3 * k + 1))
        add(0, tf)
        add(1, tg)
        add(2, tf * (3 * k) / safe)
        add(3, tg * (3 * k + 1) / safe)
        if k > 8 and float(np.max(np.abs(tf) + np.abs(tg))) < 1e-30:
            break
    f, g, fp, gp = sums
    fp = np.where(xl != 0, fp, np.longdouble(0.0))
    ai = _AI0 * f + _AIP0 * g
    aip = _AI0 * fp + _AIP0 * gp
    return ai.astype(np.float64), aip.astype(np.float64)


def _asy_alt(zeta: np.ndarray, coeffs: np.ndarray):
    """sum_k (-1)^k coeffs[k] zeta^-k with optimal truncation."""
    out = np.ones_like(zeta)
    term = np.ones_like(zeta)
    prev = np.full_like(zeta, np.inf)
    active = np.ones(zeta.shape, dtype=bool)
    sign = 1.0
    for k in range(1, len(coeffs)):
        term = term * (coeffs[k] / coeffs[k - 1]) / zeta
        sign = -sign
        mag = np.abs(term)
        active &= mag < prev
        out = out + np.where(active, sign * term, 0.0)
        prev = np.where(active, mag, prev)
        if not active.any():
            break
    return out


def _pair_sums(xi: np.ndarray, coeffs: np.ndarray):
    """(sum_k (-1)^k c_{2k} xi^-2k, sum_k (-1)^k c_{2k+1} xi^-2k-1)."""
    even = np.zeros_like(xi)
    odd = np.zeros_like(xi)
    xi2 = xi * xi
    term = np.ones_like(xi)
    for k in range(0, len(coeffs) - 1, 2):
        s = -1.0 if (k // 2) % 2 else 1.0
        even = even + s * term * coeffs[k]
        odd = odd + s * term * coeffs[k + 1] / xi
        term = term / xi2
    return even, odd


def airy(x):
    """(Ai(x), Ai'(x)), vectorized, absolute error ~1e-13 on [-15, 30]."""
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    ai = np.empty_like(x)
    aip = np.empty_like(x)

    mid = (x > _SERIES_LO) & (x < _SERIES_HI)
    if mid.any():
        ai[mid], aip[mid] = _airy_series(x[mid])

    hi = x >= _SERIES_HI
    if hi.any():
        z = x[hi]
        zeta = (2.0 / 3.0) * z ** 1.5
        pre = np.exp(-zeta) / (2.0 * SQRT_PI)
        ai[hi] = pre / z ** 0.25 * _asy_alt(zeta, _UK)
        aip[hi] = -pre * z ** 0.25 * _asy_alt(zeta, _VK)

    lo = x <= _SERIES_LO
    if lo.any():
        w = -x[lo]
        xi = (2.0 / 3.0) * w ** 1.5
        ue, uo = _pair_sums(xi, _UK)
        ve, vo = _pair_sums(xi, _VK)
        cosx = np.cos(xi - 0.25 * math.pi)
        sinx = np.sin(xi - 0.25 * math.pi)
        ai[lo] = (cosx * ue + sinx * uo) / (SQRT_PI * w ** 0.25)
        aip[lo] = (sinx * ve - cosx * vo) * w ** 0.25 / SQRT_PI

    if scalar:
        return float(ai[0]), float(aip[0])
    return ai, aip


def airy_scaled(x):
    """(Ai, Ai') times exp((2/3) x^{3/2}) for x > 0, plain values for x <= 0."""
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    ais = np.empty_like(x)
    aips = np.empty_like(x)

    pos_mid = (x > 0) & (x < _SERIES_HI)
    if pos_mid.any():
        a, ap = _airy_series(x[pos_mid])
        scale = np.exp((2.0 / 3.0) * x[pos_mid] ** 1.5)
        ais[pos_mid] = a * scale
        aips[pos_mid] = ap * scale

    hi = x >= _SERIES_HI
    if hi.any():
        z = x[hi]
        zeta = (2.0 / 3.0) * z ** 1.5
        pre = 1.0 / (2.0 * SQRT_PI)
        ais[hi] = pre / z ** 0.25 * _asy_alt(zeta, _UK)
        aips[hi] = -pre * z ** 0.25 * _asy_alt(zeta, _VK)

    rest = x <= 0
    if rest.any():
        ais[rest], aips[rest] = airy(x[rest])

    if scalar:
        return float(ais[0]), float(aips[0])
    return ais, aips


def psi(t: float, m: float, x):
    """2 e^{x t} [t Ai(x+m+t^2) + Ai'(x+m+t^2)], computed without overflow."""
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    z = x + m + t * t
    out = np.empty_like(x)

    pos = z > 0
    if pos.any():
        ais, aips = airy_scaled(z[pos])
        expo = x[pos] * t - (2.0 / 3.0) * z[pos] ** 1.5
        out[pos] = 2.0 * np.exp(expo) * (t * ais + aips)
    if (~pos).any():
        ai, aip = airy(z[~pos])
        out[~pos] = 2.0 * np.exp(x[~pos] * t) * (t * ai + aip)
    if scalar:
        return float(out[0])
    return out


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Legendre rule on [0,1] mapped to [0, inf)."""

    order: int
    mapping: str
    u: np.ndarray
    w: np.ndarray
    x: np.ndarray
    jac: np.ndarray

    @staticmethod
    def make(order: int, mapping: str = "rational") -> "QuadratureRule":
        nodes, weights = np.polynomial.legendre.leggauss(order)
        u = 0.5 * (nodes + 1.0)
        w = 0.5 * weights
        if mapping == "rational":
            x = u / (1.0 - u)
            jac = 1.0 / (1.0 - u) ** 2
        elif mapping == "exp":
            x = -np.log1p(-u)
            jac = 1.0 / (1.0 - u)
        else:
            raise ValueError(f"unknown mapping {mapping!r}")
        return QuadratureRule(order=order, mapping=mapping, u=u, w=w, x=x, jac=jac)

    @property
    def half_weights(self) -> np.ndarray:
        return np.sqrt(self.w * self.jac)


def fredholm_det(kernel, rule: QuadratureRule) -> float:
    """det(I - K) for an integral operator on [0, inf) by the Nystrom method."""
    X, Y = np.meshgrid(rule.x, rule.x, indexing="ij")
    K = np.asarray(kernel(X, Y), dtype=np.float64)
    if not np.all(np.isfinite(K)):
        raise FloatingPointError("kernel produced non-finite values")
    wh = rule.half_weights
    Kt = wh[:, None] * K * wh[None, :]
    return float(np.linalg.det(np.eye(rule.order) - Kt))


_DEFAULT_ORDER = 96
_rule_cache: dict = {}


def _rule(order: int = _DEFAULT_ORDER, mapping: str = "rational") -> QuadratureRule:
    key = (order, mapping)
    if key not in _rule_cache:
        _rule_cache[key] = QuadratureRule.make(order, mapping)
    return _rule_cache[key]


def _goe_matrix(s: float, rule: QuadratureRule) -> np.ndarray:
    """I - K~ for the kernel Ai(x+y+s)."""
    z = rule.x[:, None] + rule.x[None, :] + s
    K, _ = airy(z.ravel())
    K = K.reshape(z.shape)
    wh = rule.half_weights
    return np.eye(rule.order) - wh[:, None] * K * wh[None, :]


def goe_cdf(s: float, order: int = _DEFAULT_ORDER, mapping: str = "rational") -> float:
    """Tracy-Widom GOE distribution function."""
    if not math.isfinite(s):
        raise ValueError("s must be finite")
    rule = _rule(order, mapping)
    return float(np.linalg.det(_goe_matrix(s, rule)))


def goe_pdf(s: float, order: int = _DEFAULT_ORDER, h: float = 1e-3) -> float:
    """GOE density by central difference of the distribution function."""
    return (goe_cdf(s + h, order) - goe_cdf(s - h, order)) / (2.0 * h)


def goe_table(s_grid, order: int = _DEFAULT_ORDER):
    """(F_GOE, f_GOE) on a grid; density by central differences on the grid."""
    s_grid = np.asarray(s_grid, dtype=np.float64)
    F = np.array([goe_cdf(s, order) for s in s_grid])
    f = np.gradient(F, s_grid)
    return F, f


def goe_moments(order: int = _DEFAULT_ORDER, s_lo: float = -10.0,
                s_hi: float = 8.0, ds: float = 0.005) -> dict:
    """Mean/variance/skewness/kurtosis of F_GOE by quadrature of the density."""
    s = np.arange(s_lo, s_hi + 0.5 * ds, ds)
    F, f = goe_table(s, order)
    mass = np.trapezoid(f, s)
    mean = np.trapezoid(s * f, s) / mass
    var = np.trapezoid((s - mean) ** 2 * f, s) / mass
    m3 = np.trapezoid((s - mean) ** 3 * f, s) / mass
    m4 = np.trapezoid((s - mean) ** 4 * f, s) / mass
    return {"mass": float(mass), "mean": float(mean), "var": float(var),
            "skew": float(m3 / var ** 1.5), "kurt": float(m4 / var ** 2)}


def argmax_joint_density(t: float, m: float, order: int = _DEFAULT_ORDER,
                         method: str = "rank-one") -> float:
    """Joint density f(t, m) of the argmax location and max of Airy2 - u^2.

    f = det(I - B_{4^{1/3} m} + Psi_{t,m}) - F_GOE(4^{1/3} m) with the
    rank-one kernel Psi_{t,m}(x,y) = 2^{1/3} psi_{t,m}(2^{1/3}x)
    psi_{-t,m}(2^{1/3}y).
    """
    if not (math.isfinite(t) and math.isfinite(m)):
        raise ValueError("t and m must be finite")
    rule = _rule(order)
    IB = _goe_matrix(CBRT4 * m, rule)
    det_IB = float(np.linalg.det(IB))
    wh = rule.half_weights
    a = wh * CBRT2 * psi(t, m, CBRT2 * rule.x)
    b = wh * psi(-t, m, CBRT2 * rule.x)
    if method == "rank-one":
        sol = np.linalg.solve(IB, a)
        det_full = det_IB * (1.0 + b @ sol)
    elif method == "direct":
        det_full = float(np.linalg.det(IB + np.outer(a, b)))
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(det_full - det_IB)


@dataclass(frozen=True)
class ArgmaxDensityGrid:
    """Tabulated joint density of (argmax, max) and the argmax marginal."""

    t: np.ndarray
    m: np.ndarray
    f: np.ndarray          # (nt, nm) joint density
    f_uhat: np.ndarray     # location marginal on t
    cdf_uhat: np.ndarray
    mass: float

    def moments(self) -> dict:
        t, f = self.t, np.clip(self.f_uhat, 0.0, None)
        mass = np.trapezoid(f, t)
        mean = np.trapezoid(t * f, t) / mass
        var = np.trapezoid((t - mean) ** 2 * f, t) / mass
        m3 = np.trapezoid((t - mean) ** 3 * f, t) / mass
        m4 = np.trapezoid((t - mean) ** 4 * f, t) / mass
        return {"mass": float(mass), "mean": float(mean), "var": float(var),
                "skew": float(m3 / var ** 1.5), "kurt": float(m4 / var ** 2)}

    def max_marginal(self) -> np.ndarray:
        """density of the maximum: integral of f over t."""
        return np.trapezoid(self.f, self.t, axis=0)


def build_argmax_grid(t_lo: float = -4.0, t_hi: float = 4.0, dt: float = 0.02,
                      m_lo: float = -4.5, m_hi: float = 3.5, dm: float = 0.02,
                      order: int = _DEFAULT_ORDER,
                      normalization_tol: float = 1e-3) -> ArgmaxDensityGrid:
    """Evaluate f(t, m) on the default grids and integrate the marginal.

    For each m the GOE matrix is factorized once and all t values are
    obtained through the rank-one identity with batched solves.
    """
    from scipy.linalg import lu_factor, lu_solve

    t_grid = np.arange(t_lo, t_hi + 0.5 * dt, dt)
    m_grid = np.arange(m_lo, m_hi + 0.5 * dm, dm)
    rule = _rule(order)
    wh = rule.half_weights
    xs = CBRT2 * rule.x
    f = np.empty((t_grid.size, m_grid.size))

    for jm, m in enumerate(m_grid):
        IB = _goe_matrix(CBRT4 * m, rule)
        det_IB = float(np.linalg.det(IB))
        lu = lu_factor(IB)
        A = np.empty((rule.order, t_grid.size))
        B = np.empty((rule.order, t_grid.size))
        for it, t in enumerate(t_grid):
            A[:, it] = wh * CBRT2 * psi(t, m, xs)
            B[:, it] = wh * psi(-t, m, xs)
        sol = lu_solve(lu, A)
        f[:, jm] = det_IB * np.einsum("ij,ij->j", B, sol)

    f_uhat = np.trapezoid(f, m_grid, axis=1)
    mass = float(np.trapezoid(f_uhat, t_grid))
    if abs(mass - 1.0) > max(normalization_tol, 1e-3):
        raise ValueError(f"grid too narrow: density mass {mass} (deficit > 1e-3)")
    cdf = np.concatenate([[0.0], np.cumsum(
        0.5 * (f_uhat[1:] + f_uhat[:-1]) * np.diff(t_grid))])
    cdf /= cdf[-1]
    return ArgmaxDensityGrid(t=t_grid, m=m_grid, f=f, f_uhat=f_uhat,
                             cdf_uhat=cdf, mass=mass)


def write_goe_table(path, s_grid, order: int = _DEFAULT_ORDER) -> dict:
    """CSV (s, F_GOE, f_GOE) plus a JSON sidecar with the moments."""
    s_grid = np.asarray(s_grid, dtype=np.float64)
    F, fdens = goe_table(s_grid, order)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("s,F_GOE,f_GOE\n")
        for row in zip(s_grid, F, fdens):
            fh.write("%.10g,%.12g,%.12g\n" % row)
    moments = goe_moments(order, float(s_grid[0]), float(s_grid[-1]),
                          float(s_grid[1] - s_grid[0]))
    sidecar = str(path) + ".moments.json"
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(moments, fh, indent=1)
    return moments


def write_argmax_table(path, grid: ArgmaxDensityGrid) -> dict:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,f_uhat,F_uhat\n")
        for row in zip(grid.t, grid.f_uhat, grid.cdf_uhat):
            fh.write("%.10g,%.12g,%.12g\n" % row)
    moments = grid.moments()
    sidecar = str(path) + ".moments.json"
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(moments, fh, indent=1)
    return moments


def read_cdf_table(path):
    """(x, F) columns of a reference table written by this module."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    names = data.dtype.names
    cdf_cols = [n for n in names[1:] if n.startswith("F")]
    if not cdf_cols:
        raise ValueError(f"no CDF column in {path}")
    x = np.asarray(data[names[0]], dtype=np.float64)
    F = np.asarray(data[cdf_cols[0]], dtype=np.float64)
    return x, F
