"""Box clustering: seriation by simulated annealing, block cutting, consensus.

A matrix is reordered to minimise Q = sum_ij |i - j| C_ij, which pulls large
entries toward the diagonal. The reordered matrix is cut into contiguous
blocks, and the whole procedure is repeated from independent random starts to
build a co-assignment (affinity) matrix that is itself clustered once more.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numba as nb
import numpy as np

from .errors import InvalidInputError
from .stats import CorrMatrix

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

TIE_TOL = 1e-12


@dataclass(frozen=True)
class AnnealSchedule:
    restarts: int = 1000
    moves_per_level: int = 100
    cooling: float = 0.95
    t0_accept: float = 0.8
    stop_rel_temp: float = 1e-6
    seed: int = 0

    def __post_init__(self) -> None:
        if self.restarts < 1:
            raise InvalidInputError("restarts must be >= 1")
        if self.moves_per_level < 1:
            raise InvalidInputError("moves_per_level must be >= 1")
        if not 0 < self.cooling < 1:
            raise InvalidInputError("cooling must lie in (0, 1)")
        if not 0 < self.t0_accept < 1:
            raise InvalidInputError("t0_accept must lie in (0, 1)")
        if not 0 < self.stop_rel_temp < 1:
            raise InvalidInputError("stop_rel_temp must lie in (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise InvalidInputError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class Partition:
    """Disjoint groups of labels, each contiguous under ``order``."""

    groups: tuple[tuple[str, ...], ...]
    order: tuple[str, ...] = field(default=())

    def as_sets(self) -> set[frozenset[str]]:
        return {frozenset(g) for g in self.groups}

    def labels_of(self, labels: Sequence[str]) -> np.ndarray:
        """Group index of each label in ``labels``."""
        where = {x: k for k, g in enumerate(self.groups) for x in g}
        return np.array([where[x] for x in labels], dtype=np.int64)

    def to_json(self) -> dict:
        return {"groups": [list(g) for g in self.groups], "order": list(self.order)}


def restart_seed(seed: int, restart_index: int) -> np.uint64:
    """64-bit seed for one restart, drawn from a Philox stream keyed by (seed, restart)."""
    key = (int(seed) & (2**64 - 1)) | ((int(restart_index) & (2**64 - 1)) << 64)
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.integers(0, 2**64, dtype=np.uint64, endpoint=False)


# ---------------------------------------------------------------- kernels


@nb.njit(cache=True, error_model="numpy")
def _next_u64(state):
    state[0] += _GOLDEN
    z = state[0]
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@nb.njit(cache=True, error_model="numpy")
def _uniform(state):
    return float(_next_u64(state) >> _S11) * _INV53


@nb.njit(cache=True, error_model="numpy")
def _randint(state, n):
    k = int(_uniform(state) * n)
    return k if k < n else n - 1


@nb.njit(cache=True, error_model="numpy")
def _cost(c, perm):
    # Summed by distance d, each term paired with its mirror image
    # (i, i+d) <-> (n-1-i-d, n-1-i). Reversing perm swaps the members of
    # every pair, and IEEE addition is commutative, so Q(perm) equals
    # Q(reversed perm) bit for bit.
    n = perm.size
    q = 0.0
    for d in range(1, n):
        m = n - d
        s = 0.0
        for i in range(m // 2):
            s += c[perm[i], perm[i + d]] + c[perm[m - 1 - i], perm[m - 1 - i + d]]
        if m % 2 == 1:
            h = m // 2
            s += c[perm[h], perm[h + d]]
        q += d * s
    return 2.0 * q


# The annealer works on m = C reordered by the current permutation, so that
# position k of the ordering is row/column k of m and every delta reads
# contiguous rows; m is permuted along with the ordering on accepted moves.


@nb.njit(cache=True, error_model="numpy")
def _swap_delta(m, a, b):
    """Change in Q when positions a < b trade places."""
    ra = m[a]
    rb = m[b]
    d = 0.0
    for k in range(m.shape[0]):
        d += (abs(a - k) - abs(b - k)) * (rb[k] - ra[k])
    # the loop included k == a and k == b; take those terms back out
    d -= (b - a) * ((ra[a] - rb[a]) + (rb[b] - ra[b]))
    return 2.0 * d


@nb.njit(cache=True, error_model="numpy")
def _reverse_delta(m, a, b):
    """Change in Q when the segment a..b (a < b) is reversed."""
    n = m.shape[0]
    d = 0.0
    for i in range(a, b + 1):
        r = m[i]
        left = 0.0
        for j in range(a):
            left += r[j]
        right = 0.0
        for j in range(b + 1, n):
            right += r[j]
        d += (a + b - 2 * i) * (left - right)
    return 2.0 * d


@nb.njit(cache=True, error_model="numpy")
def _propose(state, n):
    # one draw: bit 0 picks the move, bits 1-31 and 32-63 the two positions
    z = _next_u64(state)
    kind = np.int64(z & np.uint64(1))
    i = np.int64(((z >> np.uint64(32)) * np.uint64(n)) >> np.uint64(32))
    j = np.int64((((z >> np.uint64(1)) & np.uint64(0x7FFFFFFF)) * np.uint64(n - 1)) >> np.uint64(31))
    if j >= i:
        j += 1
    if i > j:
        i, j = j, i
    return kind, i, j


@nb.njit(cache=True, error_model="numpy")
def _delta(m, kind, a, b):
    if kind == 0:
        return _swap_delta(m, a, b)
    return _reverse_delta(m, a, b)


@nb.njit(cache=True, error_model="numpy")
def _apply(perm, m, kind, a, b):
    n = m.shape[0]
    if kind == 0:
        tmp = perm[a]
        perm[a] = perm[b]
        perm[b] = tmp
        for k in range(n):
            tmp = m[a, k]
            m[a, k] = m[b, k]
            m[b, k] = tmp
        for k in range(n):
            tmp = m[k, a]
            m[k, a] = m[k, b]
            m[k, b] = tmp
        return
    i = a
    j = b
    while i < j:
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp
        for k in range(n):
            tmp = m[i, k]
            m[i, k] = m[j, k]
            m[j, k] = tmp
        i += 1
        j -= 1
    for k in range(n):
        i = a
        j = b
        while i < j:
            tmp = m[k, i]
            m[k, i] = m[k, j]
            m[k, j] = tmp
            i += 1
            j -= 1


@nb.njit(cache=True, error_model="numpy")
def _canonical(perm):
    if perm.size > 1 and perm[0] > perm[-1]:
        return perm[::-1].copy()
    return perm.copy()


# exp(-40) < 2^-53: an uphill move this steep can never pass the Metropolis
# test against a 53-bit uniform, so it is rejected without drawing one
_STEEP = 40.0


@nb.njit(cache=True, error_model="numpy")
def _anneal(c, seed, moves_per_level, cooling, t0_accept, stop_rel_temp):
    n = c.shape[0]
    state = np.empty(1, dtype=np.uint64)
    state[0] = seed
    perm = np.arange(n)
    for i in range(n - 1, 0, -1):
        j = _randint(state, i + 1)
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp
    if n < 3:
        return _canonical(perm)

    m = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            m[i, j] = c[perm[i], perm[j]]

    total = 0.0
    for _ in range(100):
        kind, a, b = _propose(state, n)
        total += abs(_delta(m, kind, a, b))
    t0 = (total / 100.0) / np.log(1.0 / t0_accept)
    if not t0 > 0.0:
        return _canonical(perm)

    q = _cost(c, perm)
    best = perm.copy()
    best_q = q
    temp = t0
    n_moves = moves_per_level * n
    while temp >= stop_rel_temp * t0:
        steep = _STEEP * temp
        changed = 0
        for _ in range(n_moves):
            kind, a, b = _propose(state, n)
            dq = _delta(m, kind, a, b)
            if dq <= 0.0 or (dq < steep and _uniform(state) < np.exp(-dq / temp)):
                _apply(perm, m, kind, a, b)
                q += dq
                if dq != 0.0:
                    changed += 1
                if q < best_q:
                    best_q = q
                    best[:] = perm
        if changed == 0:
            break
        temp *= cooling
    return _canonical(best)


@nb.njit(cache=True, error_model="numpy")
def _anneal_many(c, seeds, moves_per_level, cooling, t0_accept, stop_rel_temp):
    out = np.empty((seeds.size, c.shape[0]), dtype=np.int64)
    for k in range(seeds.size):
        out[k] = _anneal(c, seeds[k], moves_per_level, cooling, t0_accept, stop_rel_temp)
    return out


@nb.njit(cache=True, error_model="numpy")
def _segment(c, perm, tie_tol):
    """Block labels (by position) of the best contiguous segmentation."""
    n = perm.size
    m = np.empty((n, n))
    off_sum = 0.0
    for i in range(n):
        for j in range(n):
            m[i, j] = c[perm[i], perm[j]]
            if i != j:
                off_sum += m[i, j]
    mean_off = off_sum / (n * (n - 1)) if n > 1 else 0.0
    # s[i, j] = sum of centred off-diagonal entries in rows < i, cols < j
    s = np.zeros((n + 1, n + 1))
    scale = 0.0
    for i in range(n):
        for j in range(n):
            v = 0.0 if i == j else m[i, j] - mean_off
            scale += abs(v)
            s[i + 1, j + 1] = s[i, j + 1] + s[i + 1, j] - s[i, j] + v
    tol = tie_tol * max(scale, 1.0)

    best = np.full(n + 1, -np.inf)
    blocks = np.zeros(n + 1, dtype=np.int64)
    start = np.zeros(n + 1, dtype=np.int64)
    best[0] = 0.0
    for j in range(1, n + 1):
        for i in range(j):
            w = s[j, j] - s[i, j] - s[j, i] + s[i, i]
            cand = best[i] + w
            nb_ = blocks[i] + 1
            if cand > best[j] + tol or (cand >= best[j] - tol and nb_ < blocks[j]) or best[j] == -np.inf:
                best[j] = cand
                blocks[j] = nb_
                start[j] = i
    labels = np.empty(n, dtype=np.int64)
    j = n
    k = blocks[n] - 1
    while j > 0:
        i = start[j]
        for p in range(i, j):
            labels[p] = k
        k -= 1
        j = i
    return labels


@nb.njit(cache=True, error_model="numpy")
def _coassign(c, perms, tie_tol):
    n = c.shape[0]
    counts = np.zeros((n, n), dtype=np.int64)
    for r in range(perms.shape[0]):
        perm = perms[r]
        pos_labels = _segment(c, perm, tie_tol)
        lab = np.empty(n, dtype=np.int64)
        for p in range(n):
            lab[perm[p]] = pos_labels[p]
        for i in range(n):
            for j in range(n):
                if lab[i] == lab[j]:
                    counts[i, j] += 1
    return counts


# ---------------------------------------------------------------- public API


def _matrix(c: CorrMatrix | np.ndarray) -> np.ndarray:
    a = c.values if isinstance(c, CorrMatrix) else np.asarray(c, dtype=float)
    return np.ascontiguousarray(a, dtype=float)


def _check_perm(perm: Sequence[int], n: int) -> np.ndarray:
    p = np.asarray(perm)
    if p.shape != (n,) or not np.issubdtype(p.dtype, np.integer):
        raise InvalidInputError(f"permutation must be {n} integers")
    if not np.array_equal(np.sort(p), np.arange(n)):
        raise InvalidInputError("not a permutation of 0..N-1")
    return np.ascontiguousarray(p, dtype=np.int64)


def seriation_cost(c: CorrMatrix | np.ndarray, perm: Sequence[int]) -> float:
    """Q = sum over ordered pairs of |i - j| * C[perm[i], perm[j]] (0-based perm)."""
    a = _matrix(c)
    return float(_cost(a, _check_perm(perm, a.shape[0])))


def _seeds(schedule: AnnealSchedule, indices: Sequence[int]) -> np.ndarray:
    return np.array([restart_seed(schedule.seed, k) for k in indices], dtype=np.uint64)


def _run(a: np.ndarray, schedule: AnnealSchedule, indices: Sequence[int]) -> np.ndarray:
    return _anneal_many(
        a,
        _seeds(schedule, indices),
        schedule.moves_per_level,
        schedule.cooling,
        schedule.t0_accept,
        schedule.stop_rel_temp,
    )


def anneal_order(c: CorrMatrix | np.ndarray, schedule: AnnealSchedule, restart_index: int) -> np.ndarray:
    """Lowest-cost ordering seen in one annealing run.

    Moves are random pair swaps and random segment reversals in equal
    proportion. The start temperature makes an average random move accepted
    with probability ``t0_accept``; the run stops at ``stop_rel_temp`` times
    that temperature or after a full level in which no accepted move changed
    the cost. The result is oriented so that its first element is smaller
    than its last (Q is reversal invariant).
    """
    a = _matrix(c)
    if a.shape[0] < 2:
        raise InvalidInputError("annealing needs at least 2 items")
    return _run(a, schedule, [restart_index])[0]


def anneal_orders(c: CorrMatrix | np.ndarray, schedule: AnnealSchedule, restart_indices: Sequence[int]) -> np.ndarray:
    """``anneal_order`` for several restarts at once, one row per restart."""
    a = _matrix(c)
    if a.shape[0] < 2:
        raise InvalidInputError("annealing needs at least 2 items")
    return _run(a, schedule, list(restart_indices))


def greedy_partition(c: CorrMatrix, perm: Sequence[int]) -> Partition:
    """Cut the matrix reordered by ``perm`` into contiguous blocks.

    The cut maximises sum over blocks of sum_{i != j in block} (C_ij - cbar),
    cbar being the mean off-diagonal entry, found exactly by dynamic
    programming. Near-ties go to the segmentation with fewer blocks.
    """
    a = _matrix(c)
    p = _check_perm(perm, a.shape[0])
    pos_labels = _segment(a, p, TIE_TOL)
    order = tuple(c.labels[i] for i in p)
    groups: list[tuple[str, ...]] = []
    for k in range(int(pos_labels.max()) + 1):
        groups.append(tuple(order[i] for i in np.flatnonzero(pos_labels == k)))
    return Partition(tuple(groups), order)


def affinity_matrix(c: CorrMatrix, schedule: AnnealSchedule) -> CorrMatrix:
    """Fraction of restarts 1..n in which each pair lands in the same block."""
    a = _matrix(c)
    perms = _run(a, schedule, range(1, schedule.restarts + 1))
    counts = _coassign(a, perms, TIE_TOL)
    return CorrMatrix(c.labels, counts / schedule.restarts, "affinity")


def consensus_cluster(c: CorrMatrix, schedule: AnnealSchedule) -> tuple[CorrMatrix, Partition]:
    """Affinity matrix over ``schedule.restarts`` runs and its own partition.

    The consensus pass anneals the affinity matrix once, using restart index 0,
    which the affinity runs (1..n) never use.
    """
    if c.n < 2:
        raise InvalidInputError("clustering needs at least 2 items")
    affinity = affinity_matrix(c, schedule)
    order = anneal_order(affinity, schedule, 0)
    return affinity, greedy_partition(affinity, order)


def best_of(c: CorrMatrix | np.ndarray, schedule: AnnealSchedule) -> tuple[np.ndarray, float]:
    """Lowest-Q ordering over restarts 1..n."""
    a = _matrix(c)
    perms = _run(a, schedule, range(1, schedule.restarts + 1))
    costs = np.array([_cost(a, p) for p in perms])
    k = int(np.argmin(costs))
    return perms[k], float(costs[k])

