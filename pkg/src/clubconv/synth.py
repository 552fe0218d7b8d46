"""Seeded panels from the nonlinear time-varying factor model.

y_i(t) = delta_i(t) * mu(t), with delta_i(t) = delta_i + sigma_i xi_i(t) / (L(t) t^alpha)
and L(t) = ln t. The decay factor is evaluated at max(t, 2) because
ln 1 = 0 would make it singular at the first period.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .panel import Panel


@dataclass(frozen=True)
class CommonTrend:
    kind: str = "linear"
    a: float = 1.0
    b: float = 100.0

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "geometric"):
            raise InvalidInputError(f"unknown common trend {self.kind!r}")

    def __call__(self, t: np.ndarray) -> np.ndarray:
        """linear: b + a t.  geometric: b (1 + a)^(t - 1)."""
        if self.kind == "linear":
            return self.b + self.a * t
        return self.b * (1.0 + self.a) ** (t - 1.0)


@dataclass(frozen=True)
class GenParams:
    n: int
    t: int
    delta: Sequence[float] | float = 1.0
    alpha: float = 0.5
    sigma: Sequence[float] | float = 0.1
    mu: CommonTrend = field(default_factory=CommonTrend)
    seed: int = 0
    labels: Sequence[str] | None = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise InvalidInputError("n must be >= 1")
        if self.t < 3:
            raise InvalidInputError("t must be >= 3")
        if np.any(np.asarray(self.sigma, dtype=float) < 0):
            raise InvalidInputError("sigma must be >= 0")
        for name in ("delta", "sigma"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim > 1 or (arr.ndim == 1 and arr.size != self.n):
                raise InvalidInputError(f"{name} must be a scalar or have n={self.n} entries")
        if not 0 <= self.seed < 2**64:
            raise InvalidInputError("seed must be an unsigned 64-bit integer")
        mu = self.mu(np.arange(1, self.t + 1, dtype=float))
        if np.any(mu <= 0):
            raise InvalidInputError("common trend must be strictly positive on 1..T")

    def entity_labels(self) -> tuple[str, ...]:
        if self.labels is not None:
            if len(self.labels) != self.n:
                raise InvalidInputError("labels must have n entries")
            return tuple(self.labels)
        width = len(str(self.n - 1))
        return tuple(f"E{i:0{width}d}" for i in range(self.n))


def shocks(seed: int, entity: int, t: int) -> np.ndarray:
    """Standard-normal xi_i(1..T) from a Philox stream keyed by (seed, entity)."""
    key = (int(seed) & (2**64 - 1)) | (int(entity) << 64)
    return np.random.Generator(np.random.Philox(key=key)).standard_normal(t)


def gen_panel(params: GenParams) -> Panel:
    t = np.arange(1, params.t + 1, dtype=float)
    tt = np.maximum(t, 2.0)
    decay = 1.0 / (np.log(tt) * tt**params.alpha)
    delta = np.broadcast_to(np.asarray(params.delta, dtype=float), (params.n,))
    sigma = np.broadcast_to(np.asarray(params.sigma, dtype=float), (params.n,))
    xi = np.vstack([shocks(params.seed, i, params.t) for i in range(params.n)])
    delta_t = delta[:, None] + sigma[:, None] * xi * decay[None, :]
    y = delta_t * params.mu(t)[None, :]
    if np.any(y <= 0):
        i, k = np.argwhere(y <= 0)[0]
        raise InvalidInputError(
            f"generated value for entity {i} at t={k + 1} is not positive; "
            "use larger delta or smaller sigma"
        )
    periods = tuple(str(k) for k in range(1, params.t + 1))
    return Panel(params.entity_labels(), periods, y)


def planted_clubs(
    sizes: Sequence[int],
    separation: float = 0.2,
    base: float = 1.0,
    **kwargs,
) -> tuple[GenParams, list[tuple[str, ...]]]:
    """Parameters for a panel whose clubs converge to distinct limits.

    Club k has limit ``base + k * separation``; clubs are listed from the
    highest limit down. Extra keyword arguments go to :class:`GenParams`.
    """
    n = int(sum(sizes))
    width = len(str(n - 1))
    labels = [f"E{i:0{width}d}" for i in range(n)]
    delta = []
    clubs = []
    pos = 0
    for k, size in enumerate(sizes):
        level = base + (len(sizes) - 1 - k) * separation
        delta += [level] * size
        clubs.append(tuple(labels[pos : pos + size]))
        pos += size
    return GenParams(n=n, delta=tuple(delta), labels=tuple(labels), **kwargs), clubs
