"""Moment statistics, empirical densities, KS distances, power-law fits.

Moments use population (1/n) normalization to match expectation-based
definitions; skewness and kurtosis are the standardized third and fourth
central moments (kurtosis non-excess).  Standard errors come from the delta
method on the asymptotic covariance of sample central moments, which needs
central moments up to order eight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MomentStats:
    n: int
    mean: float
    var: float
    skew: float | None
    kurt: float | None
    se_mean: float
    se_var: float
    se_skew: float | None
    se_kurt: float | None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.var < 0:
            raise ValueError("variance must be nonnegative")
        if self.skew is not None and self.kurt is not None:
            if self.kurt < self.skew ** 2 + 1.0 - 1e-9:
                raise ValueError("moment inequality kurt >= skew^2 + 1 violated")

    def as_dict(self) -> dict:
        return {"n": self.n, "mean": self.mean, "var": self.var,
                "skew": self.skew, "kurt": self.kurt,
                "se_mean": self.se_mean, "se_var": self.se_var,
                "se_skew": self.se_skew, "se_kurt": self.se_kurt}


def _stats_from_central(n: int, mu: float, m: np.ndarray) -> MomentStats:
    """MomentStats from count, mean, and central moments m[2..8] (m[0]=1)."""
    m2, m3, m4 = m[2], m[3], m[4]
    se_mean = float(np.sqrt(m2 / n)) if n > 0 else 0.0
    var_m2 = max(m[4] - m2 ** 2, 0.0)
    se_var = float(np.sqrt(var_m2 / n))
    if m2 <= 0:
        return MomentStats(n=n, mean=mu, var=m2, skew=None, kurt=None,
                           se_mean=se_mean, se_var=se_var,
                           se_skew=None, se_kurt=None)
    skew = m3 / m2 ** 1.5
    kurt = m4 / m2 ** 2
    # asymptotic covariances of sample central moments (m1 = 0)
    c22 = m[4] - m2 ** 2
    c23 = m[5] - 4.0 * m2 * m3
    c33 = m[6] - m3 ** 2 + 9.0 * m2 ** 3 - 6.0 * m2 * m4
    c24 = m[6] - m2 * m4 - 4.0 * m3 ** 2
    c34 = m[7] - 5.0 * m3 * m4 + 12.0 * m2 ** 2 * m3 - 3.0 * m2 * m[5]
    c44 = m[8] - m4 ** 2 + 16.0 * m2 * m3 ** 2 - 8.0 * m3 * m[5]
    # delta method: g1 = m3 m2^{-3/2}, g2 = m4 m2^{-2}
    d1_2 = -1.5 * m3 * m2 ** -2.5
    d1_3 = m2 ** -1.5
    v_skew = (d1_2 ** 2 * c22 + 2.0 * d1_2 * d1_3 * c23 + d1_3 ** 2 * c33) / n
    d2_2 = -2.0 * m4 * m2 ** -3
    d2_4 = m2 ** -2
    v_kurt = (d2_2 ** 2 * c22 + 2.0 * d2_2 * d2_4 * c24 + d2_4 ** 2 * c44) / n
    return MomentStats(n=n, mean=mu, var=m2, skew=float(skew), kurt=float(kurt),
                       se_mean=se_mean, se_var=se_var,
                       se_skew=float(np.sqrt(max(v_skew, 0.0))),
                       se_kurt=float(np.sqrt(max(v_kurt, 0.0))))


def moments(samples) -> MomentStats:
    """Population-normalized moment statistics of a sample."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ValueError("samples must be a nonempty 1-d array")
    n = x.size
    mu = float(x.mean())
    d = x - mu
    m = np.empty(9)
    m[0], m[1] = 1.0, 0.0
    for k in range(2, 9):
        m[k] = float(np.mean(d ** k))
    return _stats_from_central(n, mu, m)


class MomentAccumulator:
    """Streaming power sums around a fixed shift, merged deterministically.

    Partial accumulators with the same shift merge by plain addition, so the
    combined result is independent of how the sample was chunked as long as
    merges happen in a fixed order.
    """

    __slots__ = ("shift", "n", "sums")

    def __init__(self, shift: float = 0.0):
        self.shift = float(shift)
        self.n = 0
        self.sums = np.zeros(8)

    def add(self, samples) -> "MomentAccumulator":
        x = np.asarray(samples, dtype=np.float64) - self.shift
        self.n += x.size
        p = x.copy()
        for k in range(8):
            self.sums[k] += p.sum()
            if k < 7:
                p = p * x
        return self

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if other.shift != self.shift:
            raise ValueError("accumulators must share the shift")
        self.n += other.n
        self.sums += other.sums
        return self

    def finalize(self) -> MomentStats:
        if self.n < 1:
            raise ValueError("empty accumulator")
        n = self.n
        a = self.sums / n  # raw moments of (x - shift)
        mu_s = a[0]
        # binomial transform to central moments up to order 8
        raw = np.concatenate([[1.0], a])
        m = np.zeros(9)
        m[0] = 1.0
        from math import comb

        for k in range(2, 9):
            s = 0.0
            for j in range(k + 1):
                s += comb(k, j) * raw[j] * (-mu_s) ** (k - j)
            m[k] = s
        return _stats_from_central(n, mu_s + self.shift, m)


def empirical_density(samples, bins=None):
    """Normalized histogram table (midpoint, density).

    Integer-valued samples are forced onto unit bins; otherwise the bin width
    defaults to Freedman-Diaconis.  ``bins`` may give an explicit count.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 100:
        raise ValueError("need at least 100 samples for a density table")
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        raise ValueError("constant sample has no density table")
    integral = np.all(x == np.round(x))
    if integral and bins is None:
        edges = np.arange(np.floor(lo) - 0.5, np.ceil(hi) + 1.5)
    elif bins is not None:
        edges = np.linspace(lo, hi, int(bins) + 1)
    else:
        iqr = float(np.subtract(*np.percentile(x, [75, 25])))
        width = 2.0 * iqr * x.size ** (-1.0 / 3.0)
        if width <= 0:
            width = (hi - lo) / max(int(np.sqrt(x.size)), 1)
        nbins = max(int(np.ceil((hi - lo) / width)), 1)
        edges = np.linspace(lo, hi, nbins + 1)
    counts, edges = np.histogram(x, bins=edges)
    widths = np.diff(edges)
    density = counts / (x.size * widths)
    mids = 0.5 * (edges[1:] + edges[:-1])
    return mids, density


def convergence_rate(ts, ds):
    """Least-squares slope/intercept of log d against log t, plus RMS residual."""
    ts = np.asarray(ts, dtype=np.float64)
    ds = np.asarray(ds, dtype=np.float64)
    if ts.size < 3:
        raise ValueError("need at least 3 points")
    if np.any(ds <= 0) or np.any(ts <= 0):
        raise ValueError("power-law fit needs positive values")
    lt, ld = np.log(ts), np.log(ds)
    A = np.vstack([lt, np.ones_like(lt)]).T
    (slope, intercept), res, _, _ = np.linalg.lstsq(A, ld, rcond=None)
    fitted = A @ np.array([slope, intercept])
    rms = float(np.sqrt(np.mean((ld - fitted) ** 2)))
    return float(slope), float(intercept), rms


def ks_distance(samples, ref_x, ref_F, boundary_tol: float = 5e-3) -> float:
    """sup_x |F_emp(x) - F_ref(x)| with both one-sided jumps at sample points.

    The reference CDF table must cover the sample range; samples beyond the
    table are tolerated only where the reference has effectively saturated
    (within ``boundary_tol`` of 0 or 1).
    """
    x = np.sort(np.asarray(samples, dtype=np.float64))
    ref_x = np.asarray(ref_x, dtype=np.float64)
    ref_F = np.asarray(ref_F, dtype=np.float64)
    if np.any(np.diff(ref_F) < -1e-12):
        raise ValueError("reference CDF must be monotone")
    if x[0] < ref_x[0] and ref_F[0] > boundary_tol:
        raise ValueError("reference table does not cover the sample range (low)")
    if x[-1] > ref_x[-1] and ref_F[-1] < 1.0 - boundary_tol:
        raise ValueError("reference table does not cover the sample range (high)")
    F = np.interp(x, ref_x, ref_F, left=ref_F[0], right=ref_F[-1])
    n = x.size
    upper = np.arange(1, n + 1) / n - F
    lower = F - np.arange(0, n) / n
    return float(max(upper.max(), lower.max(), 0.0))
