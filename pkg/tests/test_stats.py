import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sepgeo.stats import (
    MomentAccumulator,
    convergence_rate,
    empirical_density,
    ks_distance,
    moments,
)


def test_moments_two_point():
    s = moments([-1.0, 1.0])
    assert s.mean == 0.0
    assert s.var == 1.0
    assert s.skew == 0.0
    assert s.kurt == 1.0


def test_moments_one_to_five():
    s = moments([1, 2, 3, 4, 5])
    assert s.mean == 3.0
    assert s.var == 2.0
    assert s.skew == pytest.approx(0.0, abs=1e-14)
    assert s.kurt == pytest.approx(1.7, abs=1e-14)


def test_moments_gaussian_kurtosis():
    rng = np.random.default_rng(42)
    x = rng.standard_normal(1_000_000)
    s = moments(x)
    assert s.kurt == pytest.approx(3.0, abs=0.02)
    # delta-method standard errors near the Gaussian asymptotics
    assert s.se_skew == pytest.approx(np.sqrt(6 / x.size), rel=0.2)
    assert s.se_kurt == pytest.approx(np.sqrt(24 / x.size), rel=0.2)


def test_moments_degenerate_sample_marks_undefined():
    s = moments([2.0, 2.0, 2.0])
    assert s.var == 0.0
    assert s.skew is None and s.kurt is None


@given(st.lists(st.floats(-50, 50), min_size=3, max_size=60),
       st.floats(0.1, 5.0), st.floats(-10.0, 10.0))
@settings(max_examples=60, deadline=None)
def test_moments_affine_equivariance(xs, a, b):
    xs = np.asarray(xs)
    base = moments(xs)
    mapped = moments(a * xs + b)
    assert mapped.mean == pytest.approx(a * base.mean + b, rel=1e-9, abs=1e-9)
    assert mapped.var == pytest.approx(a * a * base.var, rel=1e-9, abs=1e-9)
    if base.skew is not None and mapped.skew is not None:
        assert mapped.skew == pytest.approx(base.skew, rel=1e-6, abs=1e-6)
        assert mapped.kurt == pytest.approx(base.kurt, rel=1e-6, abs=1e-6)


def test_moments_permutation_invariance():
    rng = np.random.default_rng(0)
    x = rng.exponential(size=500)
    a = moments(x)
    b = moments(x[::-1])
    assert a.mean == b.mean and a.var == pytest.approx(b.var, rel=1e-13)
    assert a.skew == pytest.approx(b.skew, rel=1e-12)


def test_accumulator_matches_direct():
    rng = np.random.default_rng(7)
    x = rng.gamma(2.0, size=10_000) - 1.0
    acc = MomentAccumulator(shift=float(x[0]))
    for i in range(0, x.size, 997):
        acc.add(x[i:i + 997])
    s1 = acc.finalize()
    s2 = moments(x)
    for k, v in s1.as_dict().items():
        ref = s2.as_dict()[k]
        if v is None:
            assert ref is None
        else:
            assert v == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_accumulator_merge_order_deterministic():
    rng = np.random.default_rng(3)
    x = rng.normal(size=4096)
    parts = [MomentAccumulator(shift=1.0).add(x[i::4]) for i in range(4)]
    merged = parts[0]
    for p in parts[1:]:
        merged.merge(p)
    again = [MomentAccumulator(shift=1.0).add(x[i::4]) for i in range(4)]
    merged2 = again[0]
    for p in again[1:]:
        merged2.merge(p)
    assert merged.finalize().as_dict() == merged2.finalize().as_dict()
    with pytest.raises(ValueError):
        MomentAccumulator(shift=0.0).merge(MomentAccumulator(shift=1.0))


def test_empirical_density_uniform():
    rng = np.random.default_rng(11)
    x = rng.random(1_000_000)
    mids, dens = empirical_density(x, bins=20)
    assert np.all(np.abs(dens - 1.0) < 0.02)
    widths = np.diff(mids).mean()
    assert np.sum(dens) * widths == pytest.approx(1.0, rel=1e-6)


def test_empirical_density_integer_unit_bins():
    x = np.array([0] * 200 + [1] * 100)
    mids, dens = empirical_density(x)
    assert np.allclose(mids, [0.0, 1.0])
    assert np.allclose(dens, [2 / 3, 1 / 3])


def test_empirical_density_normalizes():
    rng = np.random.default_rng(2)
    x = rng.normal(size=5000)
    mids, dens = empirical_density(x)
    width = mids[1] - mids[0]
    assert dens.sum() * width == pytest.approx(1.0, abs=1e-12)


def test_empirical_density_errors():
    with pytest.raises(ValueError):
        empirical_density(np.ones(50))
    with pytest.raises(ValueError):
        empirical_density(np.ones(200))


def test_convergence_rate_exact_power_law():
    t = np.array([100.0, 200.0, 400.0, 800.0])
    slope, intercept, resid = convergence_rate(t, 4.0 * t ** (-2.0 / 3.0))
    assert slope == pytest.approx(-2.0 / 3.0, abs=1e-12)
    assert intercept == pytest.approx(np.log(4.0), abs=1e-12)
    assert resid < 1e-12
    slope, _, _ = convergence_rate(t, np.full(4, 2.5))
    assert slope == pytest.approx(0.0, abs=1e-12)


def test_convergence_rate_recovers_noisy_slopes():
    rng = np.random.default_rng(5)
    t = np.geomspace(100, 5000, 8)
    for target in (-1.0 / 3.0, -2.0 / 3.0):
        d = 3.0 * t ** target * (1.0 + 0.2 * rng.standard_normal(8))
        slope, _, _ = convergence_rate(t, d)
        assert abs(slope - target) < 0.1


def test_convergence_rate_errors():
    with pytest.raises(ValueError):
        convergence_rate([1, 2], [1, 2])
    with pytest.raises(ValueError):
        convergence_rate([1, 2, 3], [1.0, -1.0, 2.0])


def test_ks_single_sample_left_endpoint():
    grid = np.linspace(0, 1, 101)
    assert ks_distance([0.0], grid, grid) == pytest.approx(1.0)


def test_ks_uniform_quantiles():
    n = 100
    samples = (np.arange(n) + 0.5) / n
    grid = np.linspace(0, 1, 100001)
    assert ks_distance(samples, grid, grid) == pytest.approx(0.5 / n, abs=1e-6)


def test_ks_self_samples_kolmogorov_bound():
    rng = np.random.default_rng(21)
    n = 100_000
    x = rng.random(n)
    grid = np.linspace(0, 1, 200001)
    d = ks_distance(x, grid, grid)
    assert d < 1.63 / np.sqrt(n)


def test_ks_range_errors():
    grid = np.linspace(0, 1, 11)
    F = np.linspace(0.2, 0.8, 11)
    with pytest.raises(ValueError):
        ks_distance([-1.0, 0.5], grid, F)
    with pytest.raises(ValueError):
        ks_distance([0.5, 2.0], grid, F)
    with pytest.raises(ValueError):
        ks_distance([0.5], grid, F[::-1])
