import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from preintegrate import lowdisc, walshlab
from preintegrate.walshlab import DyadicStepFunction

resolutions = st.lists(st.integers(0, 3), min_size=1, max_size=3).map(tuple)


def random_f(res, seed):
    return DyadicStepFunction.random(res, np.random.default_rng(seed))


def test_constant_function():
    f = DyadicStepFunction((2, 1), np.full((4, 2), 3.0))
    assert walshlab.walsh_coefficient(f, (0, 0)) == pytest.approx(3.0)
    assert abs(walshlab.walsh_coefficient(f, (1, 1))) == 0
    assert walshlab.predicted_variance(f, lowdisc.generate_sobol(4, 2)) == 0


def test_half_indicator():
    f = DyadicStepFunction((1,), [1.0, 0.0])
    assert walshlab.walsh_coefficient(f, (0,)) == pytest.approx(0.5)
    assert walshlab.walsh_coefficient(f, (1,)) == pytest.approx(0.5)
    assert walshlab.walsh_coefficient(f, (2,)) == 0
    assert walshlab.walsh_coefficients(f).tolist() == [0.5, 0.5]


@settings(max_examples=30, deadline=None)
@given(res=resolutions, seed=st.integers(0, 10_000))
def test_fast_coefficients_match_reference(res, seed):
    f = random_f(res, seed)
    fast = walshlab.walsh_coefficients(f)
    for k in itertools.product(*[range(2**r) for r in res]):
        ref = walshlab.walsh_coefficient(f, k)
        assert abs(ref.imag) < 1e-12
        assert fast[k] == pytest.approx(ref.real, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(res=resolutions, seed=st.integers(0, 10_000))
def test_parseval_and_group_sum(res, seed):
    f = random_f(res, seed)
    assert np.sum(walshlab.walsh_coefficients(f) ** 2) == pytest.approx(np.mean(f.values**2), rel=1e-12)
    sig = walshlab.group_variances(f)
    assert sig.flat[0] == pytest.approx(f.mean() ** 2, abs=1e-12)
    assert sig.sum() - sig.flat[0] == pytest.approx(f.variance(), abs=1e-12)


def test_gain_single_point_is_one():
    ps = lowdisc.scrambled_sobol(0, 3, seed=1)
    for ell in [(1, 0, 0), (0, 2, 1), (3, 3, 3)]:
        assert walshlab.gain_coefficient(ps, ell) == pytest.approx(1.0)
    f = random_f((2, 1, 1), 4)
    assert walshlab.predicted_variance(f, ps) == pytest.approx(f.variance())


def test_gain_zero_index_rejected():
    with pytest.raises(ValueError):
        walshlab.gain_coefficient(lowdisc.generate_sobol(3, 2), (0, 0))


@pytest.mark.parametrize("m,d", [(4, 2), (5, 3), (6, 2)])
def test_bucket_equals_pairs(m, d):
    ps = lowdisc.scrambled_sobol(m, d, seed=m)
    for ell in itertools.product(range(4), repeat=d):
        if any(ell):
            a = walshlab.gain_coefficient(ps, ell, "bucket")
            b = walshlab.gain_coefficient(ps, ell, "pairs")
            assert a == pytest.approx(b, abs=1e-12)
            assert a >= -1e-12


def test_gains_vanish_for_0m2_net():
    ps = lowdisc.generate_sobol(4, 2)
    for ell in itertools.product(range(5), repeat=2):
        if any(ell) and sum(ell) <= 4:
            assert walshlab.gain_coefficient(ps, ell) == 0


def test_iid_gain_mean_is_one():
    rng = np.random.default_rng(7)
    vals = []
    for _ in range(500):
        ps = lowdisc.PointSet(rng.random((64, 2)), lowdisc.NetParams(6, 6, 2))
        vals.append(walshlab.gain_coefficient(ps, (2, 1)))
    vals = np.array(vals)
    assert abs(vals.mean() - 1) < 3 * vals.std(ddof=1) / np.sqrt(vals.size)


def test_preintegrate_indicator():
    f = DyadicStepFunction((1, 1), [[1.0, 1.0], [0.0, 0.0]])
    g = walshlab.coordinate_preintegrate_dyadic(f, 0)
    assert g.resolution == (0, 1)
    assert np.all(g.values == 0.5)


def test_preintegration_walsh_rule():
    f = random_f((2, 2), 3)
    for axis in (0, 1):
        g = walshlab.pad_resolution(walshlab.coordinate_preintegrate_dyadic(f, axis), f.resolution)
        for k in itertools.product(range(4), range(4)):
            want = walshlab.walsh_coefficient(f, k) if k[axis] == 0 else 0.0
            assert walshlab.walsh_coefficient(g, k) == pytest.approx(want, abs=1e-12)


def test_preintegration_idempotent():
    f = random_f((2, 3), 5)
    g = walshlab.coordinate_preintegrate_dyadic(f, 1)
    gg = walshlab.coordinate_preintegrate_dyadic(g, 1)
    assert np.array_equal(g.values, gg.values)
    with pytest.raises(ValueError):
        walshlab.coordinate_preintegrate_dyadic(f, 2)


def test_resolution_caps():
    with pytest.raises(ValueError):
        DyadicStepFunction((7, 6), np.zeros((128, 64)))
    with pytest.raises(ValueError):
        DyadicStepFunction((1, 1, 1, 1, 1), np.zeros((2,) * 5))


def test_indicator_has_zero_scramble_variance():
    f = DyadicStepFunction((1,), [1.0, 0.0])
    for m in (1, 3):
        _, var, _ = walshlab.empirical_scramble_variance(f, lowdisc.generate_sobol(m, 1), 100, 0)
        assert var == 0


def test_low_resolution_exact_on_net():
    f = random_f((2, 2), 8)
    base = lowdisc.generate_sobol(4, 2)
    assert walshlab.predicted_variance(f, base) == 0
    _, var, _ = walshlab.empirical_scramble_variance(f, base, 100, 3)
    assert var <= 1e-24


def test_empirical_matches_prediction():
    f = random_f((3, 2), 21)
    base = lowdisc.generate_sobol(4, 2)
    pred = walshlab.predicted_variance(f, base)
    _, var, se = walshlab.empirical_scramble_variance(f, base, 3000, 1)
    assert pred > 0
    assert abs(var - pred) < 3 * se


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32), axis=st.integers(0, 1), m=st.integers(2, 6))
def test_preintegration_never_increases_predicted_variance(seed, axis, m):
    f = random_f((3, 3), seed)
    ps = lowdisc.generate_sobol(m, 2)
    g = walshlab.coordinate_preintegrate_dyadic(f, axis)
    assert walshlab.predicted_variance(g, ps) <= walshlab.predicted_variance(f, ps)


def test_breakdown_sums_to_prediction():
    f = random_f((2, 3), 2)
    ps = lowdisc.generate_sobol(3, 2)
    rows = walshlab.variance_breakdown(f, ps)
    assert sum(r[3] for r in rows) == pytest.approx(walshlab.predicted_variance(f, ps), abs=1e-12)


def test_empirical_needs_reps():
    with pytest.raises(ValueError):
        walshlab.empirical_scramble_variance(lambda x: x[:, 0], lowdisc.generate_sobol(2, 1), 50, 0)
