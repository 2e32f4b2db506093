import math

import numpy as np
import pytest

from sepgeo import refdist as rd


def _airy_series_oracle(x, nterms=200):
    """Independent Maclaurin oracle in float128, no branch logic."""
    from math import gamma

    c1 = 3.0 ** (-2.0 / 3.0) / gamma(2.0 / 3.0)
    c2 = 3.0 ** (-1.0 / 3.0) / gamma(1.0 / 3.0)
    xl = np.longdouble(x)
    f = fp = np.longdouble(0)
    g = gp = np.longdouble(0)
    tf = np.longdouble(1)
    tg = xl
    f, g = tf, tg
    gp = np.longdouble(1)
    for k in range(1, nterms):
        tf = tf * xl ** 3 / ((3 * k - 1) * (3 * k))
        tg = tg * xl ** 3 / ((3 * k) * (3 * k + 1))
        f += tf
        g += tg
        if xl != 0:
            fp += tf * (3 * k) / xl
            gp += tg * (3 * k + 1) / xl
    return float(c1 * f - c2 * g), float(c1 * fp - c2 * gp)


def test_airy_at_zero_closed_forms():
    ai0, aip0 = rd.airy(0.0)
    from math import gamma

    assert ai0 == pytest.approx(3 ** (-2 / 3) / gamma(2 / 3), abs=1e-15)
    assert aip0 == pytest.approx(-(3 ** (-1 / 3)) / gamma(1 / 3), abs=1e-15)
    assert ai0 == pytest.approx(0.35502805389, abs=1e-11)
    assert aip0 == pytest.approx(-0.25881940380, abs=1e-11)


def test_airy_against_series_oracle():
    for x in (-5.0, -2.2, -0.7, 0.0, 1.0, 2.5, 4.0):
        ai, aip = rd.airy(x)
        oa, op = _airy_series_oracle(x)
        assert ai == pytest.approx(oa, abs=2e-14)
        assert aip == pytest.approx(op, abs=2e-14)
    assert rd.airy(1.0)[0] == pytest.approx(0.13529241631, abs=1e-11)


def test_airy_against_scipy_wide_range():
    from scipy import special

    x = np.linspace(-15.0, 30.0, 3001)
    ai, aip = rd.airy(x)
    ra, rp, _, _ = special.airy(x)
    assert np.max(np.abs(ai - ra)) < 1e-12
    assert np.max(np.abs(aip - rp)) < 1e-12


def test_airy_branches_agree_at_crossovers():
    """Series and asymptotic branches evaluated at the same point."""
    for x0 in (rd._SERIES_HI, rd._SERIES_LO):
        series = rd._airy_series(np.array([x0]))
        public = rd.airy(x0)  # asymptotic branch at both crossovers
        assert series[0][0] == pytest.approx(public[0], abs=1e-13)
        assert series[1][0] == pytest.approx(public[1], abs=1e-13)


def test_airy_ode_residual():
    """|Ai''(x) - x Ai(x)| < 1e-9 with a 5-point stencil."""
    # h balances the h^4 stencil truncation (Ai^(6) ~ 2e2 at x=-10) against
    # the 1/h^2 amplification of the ~9e-15 pointwise function error
    x = np.linspace(-10.0, 10.0, 501)
    h = 4e-3
    vals = [rd.airy(x + k * h)[0] for k in (-2, -1, 0, 1, 2)]
    second = (-vals[0] + 16 * vals[1] - 30 * vals[2] + 16 * vals[3] - vals[4]) / (12 * h * h)
    resid = np.abs(second - x * vals[2])
    assert resid.max() < 1e-9


def test_airy_scaled_matches_scipy():
    from scipy import special

    x = np.linspace(0.01, 150.0, 1501)
    ais, aips = rd.airy_scaled(x)
    ref = special.airye(x)
    # absolute error on O(0.1) scaled values; limited by the series branch
    # near the crossover where the exp scaling amplifies ~4e-14 to ~4e-10
    assert np.max(np.abs(ais - ref[0])) < 1e-9
    assert np.max(np.abs(aips - ref[1])) < 1e-9


def test_psi_special_cases():
    x = np.linspace(0.0, 5.0, 11)
    ai, aip = rd.airy(x + 0.3)
    assert np.allclose(rd.psi(0.0, 0.3, x), 2.0 * aip, atol=1e-13)
    ai1, aip1 = rd.airy(0.7 + 1.0)
    assert rd.psi(1.0, 0.7, 0.0) == pytest.approx(2 * (ai1 + aip1), abs=1e-13)
    assert rd.psi(1.0, 0.0, 0.0) == pytest.approx(-0.04771005, abs=1e-8)


def test_psi_no_overflow_at_extreme_nodes():
    rule = rd._rule(96)
    vals = rd.psi(4.0, -4.5, rd.CBRT2 * rule.x)
    assert np.all(np.isfinite(vals))


def test_quadrature_rule_invariants():
    for mapping in ("rational", "exp"):
        rule = rd.QuadratureRule.make(64, mapping)
        assert np.all(rule.w > 0)
        assert rule.w.sum() == pytest.approx(1.0, abs=1e-14)
        assert np.all(np.diff(rule.u) > 0)
        assert np.all(np.diff(rule.x) > 0)
    with pytest.raises(ValueError):
        rd.QuadratureRule.make(16, "bogus")


def test_fredholm_det_zero_and_rank_one_kernels():
    rule = rd._rule(64)
    assert rd.fredholm_det(lambda X, Y: 0.0 * X, rule) == pytest.approx(1.0, abs=1e-14)
    for c in (0.0, 1.0, 2.0):
        det = rd.fredholm_det(lambda X, Y, c=c: c * np.exp(-X - Y), rule)
        assert det == pytest.approx(1.0 - c / 2.0, abs=1e-10)


def test_fredholm_det_exp_mapping_agrees():
    rho = rd.QuadratureRule.make(80, "rational")
    ex = rd.QuadratureRule.make(80, "exp")
    k = lambda X, Y: np.exp(-(X + Y + 1.0) ** 2 / 4.0)
    assert rd.fredholm_det(k, rho) == pytest.approx(rd.fredholm_det(k, ex), abs=1e-9)


def test_fredholm_rejects_nonfinite_kernel():
    rule = rd._rule(32)
    with pytest.raises(FloatingPointError):
        rd.fredholm_det(lambda X, Y: X / (Y - Y), rule)


def test_goe_cdf_upper_tail_and_monotone():
    assert rd.goe_cdf(6.0, 64) == pytest.approx(1.0, abs=1e-5)
    assert rd.goe_cdf(8.0, 64) == pytest.approx(1.0, abs=1e-8)
    s = np.linspace(-6.5, 4.0, 150)
    F = np.array([rd.goe_cdf(v, 48) for v in s])
    assert np.all(np.diff(F) > -1e-12)
    assert np.all((F > -1e-10) & (F < 1 + 1e-10))


def test_goe_pdf_positive_near_mode():
    assert rd.goe_pdf(-1.0, 64) > 0.2


def test_argmax_density_symmetry_and_rank_one_identity():
    for (t, m) in ((0.5, 0.0), (1.25, -0.8), (2.0, 1.0)):
        f_plus = rd.argmax_joint_density(t, m, order=48)
        f_minus = rd.argmax_joint_density(-t, m, order=48)
        f_direct = rd.argmax_joint_density(t, m, order=48, method="direct")
        assert f_plus == pytest.approx(f_minus, abs=1e-12)
        assert f_plus == pytest.approx(f_direct, abs=1e-10)


def test_argmax_density_vanishes_below_left_tail():
    assert abs(rd.argmax_joint_density(0.5, -6.0, order=48)) < 1e-8


def test_argmax_grid_coarse_consistency():
    grid = rd.build_argmax_grid(dt=0.1, dm=0.1, order=48)
    assert grid.mass == pytest.approx(1.0, abs=1e-3)
    # symmetric marginal and CDF endpoints
    assert np.max(np.abs(grid.f_uhat - grid.f_uhat[::-1])) < 1e-6
    assert grid.cdf_uhat[0] == 0.0
    assert grid.cdf_uhat[-1] == pytest.approx(1.0, abs=1e-12)
    mom = grid.moments()
    assert mom["mean"] == pytest.approx(0.0, abs=1e-6)
    assert 0.2 < mom["var"] < 0.3
    # marginal over t matches the density of the maximum
    fm = grid.max_marginal()
    c = 4.0 ** (1.0 / 3.0)
    for i in range(0, grid.m.size, 16):
        ref = c * rd.goe_pdf(c * grid.m[i], order=48)
        assert fm[i] == pytest.approx(ref, abs=1e-3)


def test_grid_too_narrow_raises():
    with pytest.raises(ValueError):
        rd.build_argmax_grid(t_lo=-1.0, t_hi=1.0, dt=0.1, m_lo=-1.0, m_hi=1.0,
                             dm=0.1, order=48)


def test_goe_table_roundtrip(tmp_path):
    s = np.arange(-4.0, 2.0 + 1e-9, 0.25)
    path = tmp_path / "goe.csv"
    rd.write_goe_table(path, s, order=48)
    x, F = rd.read_cdf_table(path)
    assert np.allclose(x, s)
    assert abs(F[-1] - rd.goe_cdf(2.0, 48)) < 1e-9
