import numpy as np
import pytest

from clubconv.errors import InvalidInputError
from clubconv.logt import cross_sectional_variance, logt_regression, transition_paths
from clubconv.synth import CommonTrend, GenParams, gen_panel, planted_clubs, shocks


def test_zero_noise_equal_limits():
    p = gen_panel(GenParams(n=4, t=30, sigma=0.0, delta=1.5))
    np.testing.assert_array_equal(p.values, np.tile(p.values[0], (4, 1)))
    np.testing.assert_array_equal(transition_paths(p), np.ones((4, 30)))


def test_zero_noise_distinct_limits():
    p = gen_panel(GenParams(n=2, t=30, sigma=0.0, delta=(1.0, 2.0)))
    h = transition_paths(p)
    np.testing.assert_allclose(h[0], 2 / 3, rtol=1e-15)
    np.testing.assert_allclose(h[1], 4 / 3, rtol=1e-15)
    big_h = cross_sectional_variance(h)
    np.testing.assert_allclose(big_h, big_h[0], rtol=1e-13)


def test_closed_form_values():
    gp = GenParams(n=3, t=12, delta=(1.0, 1.2, 0.9), sigma=(0.1, 0.0, 0.3), alpha=0.7, seed=99,
                   mu=CommonTrend("geometric", 0.01, 50.0))
    p = gen_panel(gp)
    t = np.arange(1, 13, dtype=float)
    tt = np.maximum(t, 2)
    mu = 50.0 * 1.01 ** (t - 1)
    for i, (d, s) in enumerate(zip(gp.delta, gp.sigma)):
        expect = (d + s * shocks(99, i, 12) / (np.log(tt) * tt**0.7)) * mu
        np.testing.assert_allclose(p.values[i], expect, rtol=1e-15)


def test_bitwise_regeneration_and_stream_independence():
    a = gen_panel(GenParams(n=5, t=40, seed=7))
    b = gen_panel(GenParams(n=5, t=40, seed=7))
    assert a == b
    # entity streams do not depend on how many entities are generated
    c = gen_panel(GenParams(n=3, t=40, seed=7))
    np.testing.assert_array_equal(c.values, a.values[:3])
    assert gen_panel(GenParams(n=5, t=40, seed=8)) != a


def test_labels_and_periods():
    p = gen_panel(GenParams(n=12, t=5))
    assert p.entities[0] == "E00" and p.entities[-1] == "E11"
    assert p.periods == ("1", "2", "3", "4", "5")
    q = gen_panel(GenParams(n=2, t=5, labels=("a", "b")))
    assert q.entities == ("a", "b")


def test_nonpositive_values_rejected():
    with pytest.raises(InvalidInputError, match="larger delta or smaller sigma"):
        gen_panel(GenParams(n=10, t=50, delta=0.01, sigma=5.0, seed=1))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n": 0, "t": 10},
        {"n": 2, "t": 2},
        {"n": 2, "t": 10, "sigma": -1.0},
        {"n": 2, "t": 10, "delta": (1.0, 2.0, 3.0)},
        {"n": 2, "t": 10, "mu": CommonTrend("linear", -10.0, 5.0)},
        {"n": 2, "t": 10, "seed": -1},
        {"n": 2, "t": 10, "labels": ("a",)},
    ],
)
def test_invalid_params(kwargs):
    with pytest.raises(InvalidInputError):
        gen_panel(GenParams(**kwargs))


def test_unknown_trend_kind():
    with pytest.raises(InvalidInputError):
        CommonTrend("cubic")


def test_alpha_half_recovers_slope_one():
    b = [logt_regression(gen_panel(GenParams(n=10, t=101, alpha=0.5, sigma=0.1, seed=s))).b_hat for s in range(40)]
    assert np.mean(b) == pytest.approx(1.0, abs=0.15)


def test_planted_clubs_layout():
    gp, clubs = planted_clubs((2, 3), separation=0.25, base=1.0, t=20)
    assert clubs == [("E0", "E1"), ("E2", "E3", "E4")]
    assert gp.delta == (1.25, 1.25, 1.0, 1.0, 1.0)
    assert gp.n == 5
