"""Phillips-Sul log t convergence test and club clustering.

Series are rescaled by the cross-sectional mean (relative transition paths
h_i(t)); their cross-sectional dispersion H_t is regressed as

    ln(H_1 / H_t) - 2 ln(ln t) = c + b ln t + u_t,   t = [rT], ..., T

and convergence is rejected when the one-sided t statistic of b falls below
the critical value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateError, InvalidInputError
from .hp import HpParams, hp_panel
from .panel import Panel, require_positive

# dispersion of h at rounding level: h = 1 +- a few ulp gives H ~ 1e-31
DEGENERATE_H = 1e-28


@dataclass(frozen=True)
class LogTParams:
    r: float = 0.3
    critical_t: float = -1.65
    sieve_c: float = 0.0
    se_mode: str = "hac"

    def __post_init__(self) -> None:
        if not 0 < self.r < 1:
            raise InvalidInputError(f"trim fraction r must lie in (0, 1), got {self.r}")
        if self.se_mode not in ("hac", "ols"):
            raise InvalidInputError(f"se_mode must be 'hac' or 'ols', got {self.se_mode!r}")


@dataclass(frozen=True)
class LogTResult:
    c_hat: float
    b_hat: float
    t_stat: float
    se_mode: str
    sample_start: int
    n_obs: int
    hac_lag: int | None
    se_ols: float
    se_hac: float

    @property
    def t_ols(self) -> float:
        return self.b_hat / self.se_ols

    @property
    def t_hac(self) -> float:
        return self.b_hat / self.se_hac

    def converges(self, critical_t: float = -1.65) -> bool:
        return self.t_stat > critical_t

    def to_json(self) -> dict:
        return {
            "c_hat": self.c_hat,
            "b_hat": self.b_hat,
            "t_stat": self.t_stat,
            "se_mode": self.se_mode,
            "sample_start": self.sample_start,
            "n_obs": self.n_obs,
            "hac_lag": self.hac_lag,
            "t_stat_ols": self.t_ols,
            "t_stat_hac": self.t_hac,
        }


@dataclass(frozen=True)
class ClubSet:
    """Convergence clubs in formation order plus entities that fit no club.

    ``per_club_results[k]`` is ``None`` for a singleton club or a club whose
    members are numerically identical (zero dispersion): both are trivially
    convergent and the regression is undefined for them.
    """

    clubs: tuple[tuple[str, ...], ...]
    divergent: tuple[str, ...]
    per_club_results: tuple[LogTResult | None, ...]
    full_panel_result: LogTResult | None
    ranking: tuple[str, ...] = field(default=())

    def as_sets(self) -> set[frozenset[str]]:
        return {frozenset(c) for c in self.clubs}

    def to_json(self) -> dict:
        return {
            "full_panel": None if self.full_panel_result is None else self.full_panel_result.to_json(),
            "full_panel_degenerate": self.full_panel_result is None,
            "clubs": [
                {
                    "members": list(members),
                    "degenerate": res is None,
                    "result": None if res is None else res.to_json(),
                }
                for members, res in zip(self.clubs, self.per_club_results)
            ],
            "divergent": list(self.divergent),
            "ranking": list(self.ranking),
        }


def _values(panel: Panel | np.ndarray) -> np.ndarray:
    return panel.values if isinstance(panel, Panel) else np.asarray(panel, dtype=float)


def transition_paths(panel: Panel | np.ndarray) -> np.ndarray:
    """h_i(t) = y_i(t) / cross-sectional mean at t."""
    y = _values(panel)
    mean = y.mean(axis=0)
    if np.any(mean <= 0):
        t = int(np.flatnonzero(mean <= 0)[0])
        raise DegenerateError(f"cross-sectional mean is not positive at period index {t}")
    return y / mean


def cross_sectional_variance(h: np.ndarray) -> np.ndarray:
    """H_t = mean over entities of (h_i(t) - 1)^2."""
    h = np.asarray(h, dtype=float)
    return np.mean((h - 1.0) ** 2, axis=0)


def hac_bandwidth(n_obs: int) -> int:
    return int(math.floor(4.0 * (n_obs / 100.0) ** (2.0 / 9.0)))


def newey_west_se(x: np.ndarray, resid: np.ndarray, lag: int) -> np.ndarray:
    """Newey-West (Bartlett kernel) standard errors of OLS coefficients.

    No small-sample scaling: with ``lag == 0`` this is White's HC0 estimator.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(resid, dtype=float)
    xu = x * u[:, None]
    meat = xu.T @ xu
    for j in range(1, lag + 1):
        w = 1.0 - j / (lag + 1.0)
        gamma = xu[j:].T @ xu[:-j]
        meat += w * (gamma + gamma.T)
    bread = np.linalg.inv(x.T @ x)
    cov = bread @ meat @ bread
    return np.sqrt(np.diag(cov))


def logt_regression(panel: Panel | np.ndarray, params: LogTParams = LogTParams()) -> LogTResult:
    """Run the log t regression on the whole panel.

    Raises DegenerateError when H_t vanishes somewhere in the sample (the
    members already coincide, so the test is vacuous).
    """
    y = _values(panel)
    n_periods = y.shape[1]
    if n_periods < 10:
        raise InvalidInputError(f"log t regression needs T >= 10, got {n_periods}")
    if np.any(y <= 0):
        raise InvalidInputError("log t regression needs strictly positive series")
    start = int(math.floor(params.r * n_periods))
    if start < 2:
        raise InvalidInputError(f"sample start [rT] = {start} is below 2; increase r")
    n_obs = n_periods - start + 1
    if n_obs < 3:
        raise InvalidInputError(f"regression sample has only {n_obs} observations")

    big_h = cross_sectional_variance(transition_paths(y))
    sample = big_h[start - 1 :]
    if big_h[0] <= DEGENERATE_H or np.any(sample <= DEGENERATE_H):
        raise DegenerateError("degenerate panel: exact convergence (zero cross-sectional dispersion)")

    t = np.arange(start, n_periods + 1, dtype=float)
    log_t = np.log(t)
    dep = np.log(big_h[0] / sample) - 2.0 * np.log(log_t)
    x = np.column_stack([np.ones_like(log_t), log_t])
    coef, *_ = np.linalg.lstsq(x, dep, rcond=None)
    resid = dep - x @ coef

    xc = log_t - log_t.mean()
    s2 = (resid @ resid) / (n_obs - 2)
    se_ols = math.sqrt(s2 / (xc @ xc))
    lag = hac_bandwidth(n_obs)
    se_hac = float(newey_west_se(x, resid, lag)[1])
    se = se_hac if params.se_mode == "hac" else se_ols
    if not se > 0:
        raise DegenerateError("log t regression fits exactly; the t statistic is undefined")
    return LogTResult(
        c_hat=float(coef[0]),
        b_hat=float(coef[1]),
        t_stat=float(coef[1] / se),
        se_mode=params.se_mode,
        sample_start=start,
        n_obs=n_obs,
        hac_lag=lag if params.se_mode == "hac" else None,
        se_ols=se_ols,
        se_hac=se_hac,
    )


class _Tester:
    """Memoised log t statistic for subsets of panel rows."""

    def __init__(self, y: np.ndarray, params: LogTParams) -> None:
        self.y = y
        self.params = params
        self._cache: dict[frozenset[int], tuple[float, LogTResult | None]] = {}

    def __call__(self, rows: Sequence[int]) -> tuple[float, LogTResult | None]:
        key = frozenset(rows)
        if key not in self._cache:
            if len(key) < 2:
                self._cache[key] = (math.inf, None)
            else:
                try:
                    res = logt_regression(self.y[sorted(key)], self.params)
                    self._cache[key] = (res.t_stat, res)
                except DegenerateError:
                    self._cache[key] = (math.inf, None)
        return self._cache[key]


def _find_core(pool: list[int], test: _Tester, crit: float) -> list[int] | None:
    for start in range(len(pool) - 1):
        top = pool[start:]
        t2, _ = test(top[:2])
        if not t2 > crit:
            continue
        best_k, best_t = 2, t2
        for k in range(3, len(top) + 1):
            tk, _ = test(top[:k])
            if tk > crit and tk > best_t:
                best_k, best_t = k, tk
        return top[:best_k]
    return None


def _sieve(core: list[int], pool: list[int], test: _Tester, params: LogTParams) -> list[int]:
    members = set(core)
    scores = {}
    for cand in pool:
        if cand in members:
            continue
        tk, _ = test(core + [cand])
        if tk > params.sieve_c:
            scores[cand] = tk
    while True:
        club = [i for i in pool if i in members or i in scores]
        t_club, _ = test(club)
        if t_club > params.critical_t or not scores:
            return club
        # the joint club fails: shed the weakest added member and retest
        weakest = min(scores, key=lambda i: (scores[i], -pool.index(i)))
        del scores[weakest]


def club_cluster(
    panel: Panel,
    params: LogTParams = LogTParams(),
    hp: HpParams | None = HpParams(),
) -> ClubSet:
    """Core-and-sieve club formation.

    Series are HP-filtered (unless ``hp`` is None) and ranked by their last
    filtered value. At each round the whole remaining group is tested first;
    if it does not converge a core is grown from the highest-ranked entities,
    every other remaining entity that keeps ``t > sieve_c`` when added alone
    to the core joins the club, and the rest go to the next round.
    """
    require_positive(panel)
    work = hp_panel(panel, hp) if hp is not None else panel
    if np.any(work.values <= 0):
        raise InvalidInputError("HP-filtered trend is not strictly positive; the log t test needs positive series")
    last = work.values[:, -1]
    ranking = sorted(range(work.n), key=lambda i: (-last[i], i))
    test = _Tester(work.values, params)
    crit = params.critical_t

    _, full = test(ranking)
    clubs: list[list[int]] = []
    results: list[LogTResult | None] = []
    divergent: list[int] = []
    pool = list(ranking)
    while pool:
        t_pool, res_pool = test(pool)
        if len(pool) == 1 or t_pool > crit:
            clubs.append(pool)
            results.append(res_pool)
            break
        core = _find_core(pool, test, crit)
        if core is None:
            divergent = pool
            break
        club = _sieve(core, pool, test, params)
        clubs.append(club)
        results.append(test(club)[1])
        taken = set(club)
        pool = [i for i in pool if i not in taken]

    names = work.entities
    return ClubSet(
        clubs=tuple(tuple(names[i] for i in c) for c in clubs),
        divergent=tuple(names[i] for i in divergent),
        per_club_results=tuple(results),
        full_panel_result=full,
        ranking=tuple(names[i] for i in ranking),
    )
