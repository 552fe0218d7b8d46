"""Single-factor regressions on a collective trend, residual correlation, differentials."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateError, InvalidInputError
from .panel import Panel
from .stats import CorrMatrix, EigenSystem, eigen_sym, eigenportfolio, pearson_corr

DEGENERATE_RESIDUAL = 1e-12


@dataclass(frozen=True, eq=False)
class FactorFit:
    entities: tuple[str, ...]
    alpha: np.ndarray
    beta: np.ndarray
    residuals: np.ndarray
    r2: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["entity", "alpha", "beta", "r2"])
        for row in zip(self.entities, self.alpha, self.beta, self.r2):
            writer.writerow([row[0], *(repr(float(x)) for x in row[1:])])
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class DifferentialPaths:
    """D_i(t) = y_i(t) - G(t), one row per entity."""

    entities: tuple[str, ...]
    periods: tuple[str, ...]
    values: np.ndarray

    def as_panel(self) -> Panel:
        return Panel(self.entities, self.periods, self.values)


@dataclass(frozen=True, eq=False)
class ClubTrend:
    members: tuple[str, ...]
    corr: CorrMatrix | None
    eigen: EigenSystem | None
    trend: np.ndarray


def _trend(panel: Panel, g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float).ravel()
    if g.size != panel.t:
        raise InvalidInputError(f"trend has length {g.size}, panel has {panel.t} periods")
    return g


def fit_factor(panel: Panel, g: np.ndarray) -> FactorFit:
    """OLS of every entity's series on (1, G)."""
    g = _trend(panel, g)
    gc = g - g.mean()
    sgg = gc @ gc
    if np.sqrt(sgg / g.size) <= max(1e-12 * abs(g.mean()), 1e-300):
        raise DegenerateError("the factor series is constant")
    y = panel.values
    ybar = y.mean(axis=1)
    yc = y - ybar[:, None]
    beta = (yc @ gc) / sgg
    alpha = ybar - beta * g.mean()
    resid = yc - np.outer(beta, gc)
    sst = np.einsum("ij,ij->i", yc, yc)
    sse = np.einsum("ij,ij->i", resid, resid)
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(sst > 0, 1.0 - sse / sst, 1.0)
    return FactorFit(panel.entities, alpha, beta, resid, r2)


def residual_panel(panel: Panel, g: np.ndarray, fit: FactorFit | None = None) -> Panel:
    fit = fit if fit is not None else fit_factor(panel, g)
    msq = np.mean(panel.values**2, axis=1)
    var = np.var(fit.residuals, axis=1)
    bad = np.flatnonzero(var < DEGENERATE_RESIDUAL * msq)
    if bad.size:
        raise DegenerateError(
            f"series {panel.entities[bad[0]]!r} is perfectly explained by the factor"
        )
    return panel.with_values(fit.residuals)


def partial_corr(panel: Panel, g: np.ndarray) -> CorrMatrix:
    """Correlation of the residuals left after regressing each series on G."""
    return pearson_corr(residual_panel(panel, g), kind="partial")


def differentials(panel: Panel, g: np.ndarray) -> DifferentialPaths:
    g = _trend(panel, g)
    return DifferentialPaths(panel.entities, panel.periods, panel.values - g[None, :])


def club_trend_analysis(d: DifferentialPaths, clubs: Sequence[Sequence[str]]) -> list[ClubTrend]:
    """Per-club correlation, eigen-structure and eigenportfolio of member D-paths.

    Singleton clubs carry no correlation structure; their trend is the
    member's own path.
    """
    index = {e: i for i, e in enumerate(d.entities)}
    out = []
    for members in clubs:
        members = tuple(members)
        rows = d.values[[index[m] for m in members]]
        if len(members) < 2:
            out.append(ClubTrend(members, None, None, rows[0].copy()))
            continue
        corr = pearson_corr(rows, labels=members, kind="differential")
        es = eigen_sym(corr)
        out.append(ClubTrend(members, corr, es, eigenportfolio(es.v1, rows)))
    return out
