"""Hodrick-Prescott trend extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solveh_banded

from .errors import InvalidInputError
from .panel import Panel

MONTHLY_LAMBDA = 14400.0


@dataclass(frozen=True)
class HpParams:
    lam: float = MONTHLY_LAMBDA

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise InvalidInputError(f"HP lambda must be finite and >= 0, got {self.lam!r}")


def _second_difference(y: np.ndarray) -> np.ndarray:
    return y[2:] - 2.0 * y[1:-1] + y[:-2]


def _second_difference_adjoint(w: np.ndarray) -> np.ndarray:
    out = np.zeros(w.size + 2)
    out[:-2] += w
    out[1:-1] -= 2.0 * w
    out[2:] += w
    return out


def hp_trend(series: np.ndarray, params: HpParams | float = MONTHLY_LAMBDA) -> np.ndarray:
    """Trend tau minimising ||y - tau||^2 + lam * ||D tau||^2, D the second difference.

    The normal equations (I + lam D'D) tau = y are solved through the
    equivalent form tau = y - D' (D D' + I/lam)^{-1} D y. D D' is a constant
    pentadiagonal band, so this is a single banded Cholesky solve; unlike the
    direct form it stays well conditioned as lam grows, and its limit is the
    least-squares straight line.
    """
    lam = params.lam if isinstance(params, HpParams) else HpParams(float(params)).lam
    y = np.asarray(series, dtype=float)
    if y.ndim != 1:
        raise InvalidInputError(f"expected a 1-D series, got shape {y.shape}")
    if y.size < 3:
        raise InvalidInputError(f"HP filter needs at least 3 observations, got {y.size}")
    if lam == 0.0:
        return y.copy()
    m = y.size - 2
    bands = np.zeros((3, m))
    bands[0, 2:] = 1.0
    bands[1, 1:] = -4.0
    bands[2] = 6.0 + 1.0 / lam
    w = solveh_banded(bands, _second_difference(y), check_finite=False)
    return y - _second_difference_adjoint(w)


def hp_panel(panel: Panel, params: HpParams | float = MONTHLY_LAMBDA) -> Panel:
    return panel.with_values(np.vstack([hp_trend(row, params) for row in panel.values]))
