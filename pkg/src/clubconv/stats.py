"""Correlation matrices and their eigen-structure.

Covers Pearson correlation of panel rows, a cyclic Jacobi eigen-solver with a
deterministic sign/order convention, variance-share (absorption) ratios, the
market-mode split of a correlation matrix, and eigenportfolio weighting.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numba as nb
import numpy as np

from .errors import DegenerateError, InvalidInputError
from .panel import Panel

KINDS = (
    "raw",
    "partial",
    "differential",
    "affinity",
    "residual_component",
    "market_component",
)
_UNIT_DIAGONAL = ("raw", "partial", "differential", "affinity")

SYM_TOL = 1e-12
JACOBI_REL_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True, eq=False)
class CorrMatrix:
    labels: tuple[str, ...]
    values: np.ndarray
    kind: str = "raw"

    def __post_init__(self) -> None:
        labels = tuple(str(x) for x in self.labels)
        values = np.array(self.values, dtype=float)
        n = len(labels)
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown matrix kind {self.kind!r}")
        if values.shape != (n, n):
            raise InvalidInputError(f"matrix shape {values.shape} does not match {n} labels")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("matrix has non-finite entries")
        asym = np.max(np.abs(values - values.T)) if n else 0.0
        if asym > SYM_TOL:
            raise InvalidInputError(f"matrix is not symmetric (max asymmetry {asym:.3g})")
        values = 0.5 * (values + values.T)
        if self.kind in _UNIT_DIAGONAL:
            if np.max(np.abs(np.diag(values) - 1.0), initial=0.0) > SYM_TOL:
                raise InvalidInputError(f"{self.kind} matrix must have a unit diagonal")
            lo = 0.0 if self.kind == "affinity" else -1.0
            if values.min(initial=lo) < lo - SYM_TOL or values.max(initial=1.0) > 1.0 + SYM_TOL:
                raise InvalidInputError(f"{self.kind} matrix entries must lie in [{lo:g}, 1]")
            values = np.clip(values, lo, 1.0)
            np.fill_diagonal(values, 1.0)
        values.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return len(self.labels)

    def reorder(self, order: Sequence[int]) -> "CorrMatrix":
        idx = np.asarray(order, dtype=int)
        return CorrMatrix(
            tuple(self.labels[i] for i in idx), self.values[np.ix_(idx, idx)], self.kind
        )

    def to_json(self) -> dict:
        return {
            "labels": list(self.labels),
            "values": self.values.tolist(),
            "kind": self.kind,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["", *self.labels])
        for label, row in zip(self.labels, self.values):
            writer.writerow([label, *(repr(float(x)) for x in row)])
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Descending eigenvalues with column-aligned unit eigenvectors.

    ``contribution[i]`` is the share of total variance carried by eigenvalue i
    and ``cumulative[i]`` the share carried by the first i+1 of them (the
    absorption ratio).
    """

    labels: tuple[str, ...]
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    contribution: np.ndarray
    cumulative: np.ndarray
    sweeps: int = 0

    @property
    def v1(self) -> np.ndarray:
        return self.eigenvectors[:, 0]

    def to_json(self) -> dict:
        return {
            "labels": list(self.labels),
            "eigenvalues": self.eigenvalues.tolist(),
            "eigenvectors": self.eigenvectors.T.tolist(),
            "contribution": self.contribution.tolist(),
            "cumulative": self.cumulative.tolist(),
        }

    def to_csv(self) -> str:
        """Table layout: one row per entity with eigenvector loadings, then
        eigenvalue, contribution and cumulative rows."""
        n = len(self.eigenvalues)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["", *(f"v{i + 1}" for i in range(n))])
        for label, row in zip(self.labels, self.eigenvectors):
            writer.writerow([label, *(repr(float(x)) for x in row)])
        writer.writerow(["lambda", *(repr(float(x)) for x in self.eigenvalues)])
        writer.writerow(["contribution", *(repr(float(x)) for x in self.contribution)])
        writer.writerow(["cumulative", *(repr(float(x)) for x in self.cumulative)])
        return buf.getvalue()


def _as_matrix(panel: Panel | np.ndarray) -> np.ndarray:
    if isinstance(panel, Panel):
        return panel.values
    values = np.asarray(panel, dtype=float)
    if values.ndim != 2:
        raise InvalidInputError(f"expected a 2-D array, got shape {values.shape}")
    return values


def pearson_corr(
    panel: Panel | np.ndarray,
    labels: Sequence[str] | None = None,
    kind: str = "raw",
) -> CorrMatrix:
    """Pearson correlation between panel rows, using population (1/T) moments."""
    y = _as_matrix(panel)
    if labels is None:
        labels = panel.entities if isinstance(panel, Panel) else tuple(str(i) for i in range(len(y)))
    mean = y.mean(axis=1, keepdims=True)
    dev = y - mean
    sd = np.sqrt(np.mean(dev * dev, axis=1))
    floor = np.maximum(1e-12 * np.abs(mean[:, 0]), 1e-300)
    flat = np.flatnonzero(sd <= floor)
    if flat.size:
        raise DegenerateError(
            f"series {labels[flat[0]]!r} is constant; its correlation is undefined"
        )
    z = dev / sd[:, None]
    c = (z @ z.T) / y.shape[1]
    c = 0.5 * (c + c.T)
    np.fill_diagonal(c, 1.0)
    return CorrMatrix(tuple(labels), np.clip(c, -1.0, 1.0), kind)


@nb.njit(cache=True)
def _jacobi(a_in, rel_tol, max_sweeps):
    n = a_in.shape[0]
    a = a_in.copy()
    v = np.eye(n)
    off0 = 0.0
    for p in range(n):
        for q in range(n):
            if p != q:
                off0 += a[p, q] * a[p, q]
    off0 = np.sqrt(off0)
    sweeps = 0
    if off0 == 0.0:
        return np.diag(a).copy(), v, sweeps
    while sweeps < max_sweeps:
        off = 0.0
        for p in range(n):
            for q in range(n):
                if p != q:
                    off += a[p, q] * a[p, q]
        if np.sqrt(off) < rel_tol * off0:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                h = a[q, q] - a[p, p]
                if abs(h) + 100.0 * abs(apq) == abs(h):
                    t = apq / h
                else:
                    theta = 0.5 * h / apq
                    t = 1.0 / (abs(theta) + np.sqrt(1.0 + theta * theta))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                tau = s / (1.0 + c)
                h = t * apq
                a[p, p] -= h
                a[q, q] += h
                a[p, q] = 0.0
                a[q, p] = 0.0
                for r in range(n):
                    if r != p and r != q:
                        arp = a[r, p]
                        arq = a[r, q]
                        a[r, p] = arp - s * (arq + tau * arp)
                        a[p, r] = a[r, p]
                        a[r, q] = arq + s * (arp - tau * arq)
                        a[q, r] = a[r, q]
                for r in range(n):
                    vrp = v[r, p]
                    vrq = v[r, q]
                    v[r, p] = vrp - s * (vrq + tau * vrp)
                    v[r, q] = vrq + s * (vrp - tau * vrq)
    return np.diag(a).copy(), v, sweeps


def orient(vec: np.ndarray) -> np.ndarray:
    """Flip ``vec`` so its components sum to a nonnegative value.

    When the sum is numerically zero the largest-magnitude component is made
    positive instead.
    """
    total = vec.sum()
    if abs(total) < 1e-12:
        if vec[np.argmax(np.abs(vec))] < 0:
            return -vec
        return vec
    return -vec if total < 0 else vec


def _descending_order(lam: np.ndarray, vecs: np.ndarray) -> list[int]:
    order = sorted(range(len(lam)), key=lambda i: -lam[i])
    scale = max(1.0, float(np.max(np.abs(lam))))
    tol = 1e-12 * scale
    out: list[int] = []
    i = 0
    while i < len(order):
        j = i + 1
        while j < len(order) and lam[order[i]] - lam[order[j]] <= tol:
            j += 1
        group = order[i:j]
        # equal eigenvalues: lexicographically largest eigenvector first
        group.sort(key=lambda k: tuple(-vecs[:, k]))
        out.extend(group)
        i = j
    return out


def contribution_ratios(eigenvalues: Sequence[float], n: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-eigenvalue variance share and its running (absorption) total."""
    lam = np.asarray(eigenvalues, dtype=float)
    if n is not None and n != lam.size:
        raise InvalidInputError(f"got {lam.size} eigenvalues for N={n}")
    running = np.cumsum(lam)
    total = running[-1] if lam.size else 0.0
    if not total > 0:
        raise InvalidInputError("eigenvalues must have a positive sum")
    return lam / total, running / total


def eigen_sym(c: CorrMatrix | np.ndarray, labels: Sequence[str] | None = None) -> EigenSystem:
    """Full eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations."""
    if isinstance(c, CorrMatrix):
        a = c.values
        labels = c.labels
    else:
        a = np.asarray(c, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
        asym = np.max(np.abs(a - a.T), initial=0.0)
        if asym > SYM_TOL * max(1.0, float(np.max(np.abs(a), initial=0.0))):
            raise InvalidInputError(f"matrix is not symmetric (max asymmetry {asym:.3g})")
        a = 0.5 * (a + a.T)
        if labels is None:
            labels = tuple(str(i) for i in range(a.shape[0]))
    lam, vecs, sweeps = _jacobi(np.ascontiguousarray(a), JACOBI_REL_TOL, JACOBI_MAX_SWEEPS)
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    for k in range(vecs.shape[1]):
        vecs[:, k] = orient(vecs[:, k])
    order = _descending_order(lam, vecs)
    lam = lam[order]
    vecs = np.ascontiguousarray(vecs[:, order])
    trace = float(np.trace(a))
    if trace > 0:
        phi, cum = contribution_ratios(lam)
    else:
        phi = np.full(lam.shape, np.nan)
        cum = np.full(lam.shape, np.nan)
    return EigenSystem(tuple(labels), lam, vecs, phi, cum, int(sweeps))


def decompose_market(c: CorrMatrix, es: EigenSystem | None = None) -> tuple[CorrMatrix, CorrMatrix]:
    """Split ``c`` into its leading rank-one mode and the remaining modes."""
    if es is None:
        es = eigen_sym(c)
    v = es.eigenvectors
    lam = es.eigenvalues
    market = lam[0] * np.outer(v[:, 0], v[:, 0])
    rest = (v[:, 1:] * lam[1:]) @ v[:, 1:].T
    return (
        CorrMatrix(c.labels, 0.5 * (market + market.T), "market_component"),
        CorrMatrix(c.labels, 0.5 * (rest + rest.T), "residual_component"),
    )


def portfolio_weights(v1: np.ndarray) -> np.ndarray:
    v1 = np.asarray(v1, dtype=float)
    norm = np.linalg.norm(v1)
    if abs(norm - 1.0) > 1e-9:
        raise InvalidInputError(f"leading eigenvector must be unit-norm, got norm {norm:.12g}")
    u = v1 * v1
    return u / u.sum()


def eigenportfolio(v1: np.ndarray, panel: Panel | np.ndarray) -> np.ndarray:
    """Collective trend G(t): panel rows weighted by the squared loadings of ``v1``."""
    y = _as_matrix(panel)
    v1 = np.asarray(v1, dtype=float).ravel()
    if v1.size != y.shape[0]:
        raise InvalidInputError(f"eigenvector has {v1.size} components for {y.shape[0]} series")
    return portfolio_weights(v1) @ y
