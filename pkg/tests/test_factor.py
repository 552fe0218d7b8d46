import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clubconv.errors import DegenerateError, InvalidInputError
from clubconv.factor import (
    club_trend_analysis,
    differentials,
    fit_factor,
    partial_corr,
    residual_panel,
)
from clubconv.panel import Panel
from clubconv.stats import eigen_sym, eigenportfolio, pearson_corr, portfolio_weights


def make_panel(rows) -> Panel:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    return Panel(tuple(f"E{i}" for i in range(len(rows))), tuple(str(t) for t in range(rows.shape[1])), rows)


def trend(t=101, seed=0):
    rng = np.random.default_rng(seed)
    return 100 + np.cumsum(rng.normal(0.5, 1.0, size=t))


# ------------------------------------------------------------ fit_factor


def test_exact_affine_relation():
    g = trend()
    fit = fit_factor(make_panel([2 * g + 3, g]), g)
    np.testing.assert_allclose(fit.alpha, [3.0, 0.0], atol=1e-9)
    np.testing.assert_allclose(fit.beta, [2.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(fit.residuals, 0.0, atol=1e-9)
    np.testing.assert_allclose(fit.r2, 1.0, atol=1e-12)


def test_normal_equations_oracle():
    g = trend(seed=1)
    rng = np.random.default_rng(2)
    y = rng.normal(size=(4, g.size)) * 5 + 50
    fit = fit_factor(make_panel(y), g)
    x = np.column_stack([np.ones_like(g), g])
    for i in range(4):
        coef = np.linalg.solve(x.T @ x, x.T @ y[i])
        assert fit.alpha[i] == pytest.approx(coef[0], rel=1e-9, abs=1e-9)
        assert fit.beta[i] == pytest.approx(coef[1], rel=1e-9, abs=1e-12)
    assert np.all(np.abs(fit.beta) < 0.2)


@settings(max_examples=120, deadline=None, derandomize=True)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 8), t=st.integers(5, 150))
def test_residual_orthogonality(seed, n, t):
    rng = np.random.default_rng(seed)
    g = 100 + np.cumsum(rng.normal(size=t))
    if np.std(g) < 1e-6:
        return
    y = rng.normal(size=(n, 1)) * g + rng.normal(size=(n, t)) * rng.uniform(0.1, 10)
    fit = fit_factor(make_panel(y), g)
    e = fit.residuals
    scale_sum = np.abs(y).sum(axis=1)
    scale_dot = np.abs(y) @ np.abs(g)
    assert np.all(np.abs(e.sum(axis=1)) <= 1e-8 * scale_sum)
    assert np.all(np.abs(e @ g) <= 1e-8 * scale_dot)


def test_constant_factor_rejected():
    with pytest.raises(DegenerateError, match="constant"):
        fit_factor(make_panel([[1, 2, 3, 4]]), np.full(4, 7.0))
    with pytest.raises(InvalidInputError, match="length"):
        fit_factor(make_panel([[1, 2, 3, 4]]), np.arange(3.0))


# ------------------------------------------------------------ partial correlation


def test_independent_residuals_are_weakly_correlated():
    g = trend(seed=3)
    rng = np.random.default_rng(4)
    n = 12
    y = rng.uniform(0.5, 2, size=(n, 1)) * g + rng.normal(size=(n, g.size))
    p = partial_corr(make_panel(y), g)
    assert p.kind == "partial"
    off = p.values[~np.eye(n, dtype=bool)]
    assert np.mean(np.abs(off) < 3 / np.sqrt(g.size)) >= 0.95


def test_shared_residual_noise():
    g = trend(seed=5)
    rng = np.random.default_rng(6)
    shared = rng.normal(size=g.size)
    y = np.vstack([1.2 * g + shared, 0.8 * g + shared, g + rng.normal(size=g.size)])
    p = partial_corr(make_panel(y), g)
    assert p.values[0, 1] > 0.999


def test_exact_fit_is_degenerate():
    g = trend(seed=7)
    with pytest.raises(DegenerateError, match="'E1'.*perfectly explained"):
        partial_corr(make_panel([g + np.sin(np.arange(g.size)), 0.5 * g]), g)


def test_partial_corr_is_corr_of_residuals():
    g = trend(seed=8)
    rng = np.random.default_rng(9)
    p = make_panel(g + rng.normal(size=(5, g.size)))
    direct = pearson_corr(residual_panel(p, g), kind="partial")
    assert np.array_equal(partial_corr(p, g).values, direct.values)


# ------------------------------------------------------------ differentials


def test_identical_series_have_zero_differentials():
    g = trend()
    d = differentials(make_panel([g, g, g]), g)
    assert np.array_equal(d.values, np.zeros((3, g.size)))


def test_two_series_uniform_vector():
    rng = np.random.default_rng(10)
    y = rng.random((2, 20)) + 1
    g = eigenportfolio(np.array([1, 1]) / np.sqrt(2), y)
    d = differentials(make_panel(y), g)
    np.testing.assert_allclose(d.values[0], (y[0] - y[1]) / 2, atol=1e-15)
    np.testing.assert_allclose(d.values[0], -d.values[1], atol=1e-15)


def test_exact_construction():
    g = trend()
    rng = np.random.default_rng(11)
    y = g + rng.normal(size=(3, g.size))
    d = differentials(make_panel(y), g)
    assert np.array_equal(d.values, y - g)
    assert d.as_panel().entities == ("E0", "E1", "E2")


@settings(max_examples=120, deadline=None, derandomize=True)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 10))
def test_weighted_deviations_cancel(seed, n):
    rng = np.random.default_rng(seed)
    y = 100 + np.cumsum(rng.normal(size=(n, 60)), axis=1) * rng.uniform(0.1, 5, size=(n, 1))
    p = make_panel(y)
    v1 = eigen_sym(pearson_corr(p)).v1
    d = differentials(p, eigenportfolio(v1, p))
    np.testing.assert_allclose(portfolio_weights(v1) @ d.values, 0.0, atol=1e-9)


# ------------------------------------------------------------ club trends


def test_identical_member_paths():
    rng = np.random.default_rng(12)
    path = rng.normal(size=50)
    y = np.vstack([path + 100, path + 100, rng.normal(size=50) + 100])
    d = differentials(make_panel(y), np.full(50, 100.0) + rng.normal(size=50) * 0)
    (club,) = club_trend_analysis(d, [("E0", "E1")])
    assert club.eigen.contribution[0] == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(club.trend, path, atol=1e-12)


def test_two_member_club_closed_form():
    rng = np.random.default_rng(13)
    y = 100 + rng.normal(size=(3, 80)).cumsum(axis=1)
    p = make_panel(y)
    d = differentials(p, y.mean(axis=0))
    (club,) = club_trend_analysis(d, [("E2", "E0")])
    rho = club.corr.values[0, 1]
    np.testing.assert_allclose(club.eigen.eigenvalues, sorted([1 + rho, 1 - rho], reverse=True), atol=1e-12)
    assert club.corr.kind == "differential"
    assert club.members == ("E2", "E0")


def test_singleton_club_uses_own_path():
    rng = np.random.default_rng(14)
    y = 100 + rng.normal(size=(3, 30))
    d = differentials(make_panel(y), y.mean(axis=0))
    out = club_trend_analysis(d, [("E1",), ("E0", "E2")])
    assert out[0].eigen is None and out[0].corr is None
    assert np.array_equal(out[0].trend, d.values[1])
    assert out[1].eigen is not None


def test_factor_fit_csv():
    g = trend()
    fit = fit_factor(make_panel([2 * g + 3]), g)
    lines = fit.to_csv().splitlines()
    assert lines[0] == "entity,alpha,beta,r2"
    assert lines[1].startswith("E0,")
