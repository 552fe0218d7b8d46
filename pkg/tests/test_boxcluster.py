import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clubconv import boxcluster as bc
from clubconv.boxcluster import (
    AnnealSchedule,
    Partition,
    affinity_matrix,
    anneal_order,
    anneal_orders,
    best_of,
    consensus_cluster,
    greedy_partition,
    restart_seed,
    seriation_cost,
)
from clubconv.errors import InvalidInputError
from clubconv.stats import CorrMatrix
from oracles import best_segmentation, brute_force_min_q, seriation_q

FAST = AnnealSchedule(restarts=50, moves_per_level=20, cooling=0.9)


def random_corr(rng, n):
    x = rng.normal(size=(n, n + 3))
    c = np.corrcoef(x)
    return CorrMatrix(tuple(f"x{i}" for i in range(n)), (c + c.T) / 2)


def planted(rng, sizes, within=0.9, across=0.1, sigma=0.05):
    n = sum(sizes)
    labels = np.repeat(np.arange(len(sizes)), sizes)
    c = np.where(labels[:, None] == labels[None, :], within, across)
    noise = rng.normal(0, sigma, size=(n, n))
    c = c + (noise + noise.T) / 2
    np.fill_diagonal(c, 1.0)
    c = np.clip(c, -1, 1)
    perm = rng.permutation(n)
    names = [f"x{i}" for i in range(n)]
    cm = CorrMatrix(tuple(names[i] for i in perm), c[np.ix_(perm, perm)])
    truth = {frozenset(names[i] for i in np.flatnonzero(labels == k)) for k in range(len(sizes))}
    return cm, truth


# ------------------------------------------------------------ cost


def test_cost_two_items():
    c = CorrMatrix(("a", "b"), [[1, 0.5], [0.5, 1]])
    assert seriation_cost(c, [0, 1]) == 1.0
    assert seriation_cost(c, [1, 0]) == 1.0


def test_cost_identity_is_zero():
    c = CorrMatrix(tuple("abcde"), np.eye(5))
    for p in itertools.permutations(range(5)):
        assert seriation_cost(c, p) == 0.0


def test_cost_matches_direct_sum():
    rng = np.random.default_rng(0)
    c = random_corr(rng, 7)
    for _ in range(20):
        p = rng.permutation(7)
        assert seriation_cost(c, p) == pytest.approx(seriation_q(c.values, p), abs=1e-12)


def test_cost_rejects_non_permutations():
    c = CorrMatrix(tuple("abc"), np.eye(3))
    for bad in ([0, 1], [0, 1, 1], [0, 1, 3], [0.0, 1.0, 2.0]):
        with pytest.raises(InvalidInputError):
            seriation_cost(c, bad)


@settings(max_examples=150, deadline=None, derandomize=True)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 12))
def test_cost_reversal_invariance(seed, n):
    rng = np.random.default_rng(seed)
    c = random_corr(rng, n)
    p = rng.permutation(n)
    assert seriation_cost(c, p) == seriation_cost(c, p[::-1])


def test_move_deltas_match_recomputed_cost():
    rng = np.random.default_rng(1)
    for n in range(3, 11):
        for _ in range(30):
            c = random_corr(rng, n).values
            perm = rng.permutation(n)
            m = np.ascontiguousarray(c[np.ix_(perm, perm)])
            a, b = sorted(rng.choice(n, 2, replace=False))
            for kind in (0, 1):
                p2, m2 = perm.copy(), m.copy()
                d = bc._delta(m, kind, a, b)
                bc._apply(p2, m2, kind, a, b)
                assert seriation_q(c, p2) - seriation_q(c, perm) == pytest.approx(d, abs=1e-12)
                np.testing.assert_array_equal(m2, c[np.ix_(p2, p2)])


# ------------------------------------------------------------ annealing


def test_two_items():
    c = CorrMatrix(("a", "b"), [[1, 0.3], [0.3, 1]])
    p = anneal_order(c, AnnealSchedule(), 5)
    assert sorted(p) == [0, 1]
    assert seriation_cost(c, p) == pytest.approx(0.6)


def test_deterministic_per_restart():
    rng = np.random.default_rng(2)
    c = random_corr(rng, 9)
    s = AnnealSchedule(seed=42)
    a, b = anneal_order(c, s, 7), anneal_order(c, s, 7)
    assert np.array_equal(a, b)
    assert a[0] < a[-1]
    many = anneal_orders(c, s, [3, 7, 11])
    assert np.array_equal(many[1], a)


def test_restart_seeds_are_distinct():
    seeds = {int(restart_seed(0, k)) for k in range(2000)}
    assert len(seeds) == 2000
    assert int(restart_seed(1, 0)) != int(restart_seed(0, 0))


def test_single_runs_reach_global_minimum():
    rng = np.random.default_rng(3)
    hits = 0
    for _ in range(20):
        c = random_corr(rng, int(rng.integers(4, 8)))
        target = brute_force_min_q(c.values)
        q = seriation_cost(c, anneal_order(c, AnnealSchedule(seed=int(rng.integers(2**63))), 1))
        assert q >= target - 1e-9
        hits += abs(q - target) <= 1e-9 * max(1.0, abs(target))
    assert hits >= 18


def test_best_of_reaches_minimum():
    rng = np.random.default_rng(4)
    for _ in range(5):
        c = random_corr(rng, 6)
        perm, q = best_of(c, AnnealSchedule(restarts=20))
        assert q == pytest.approx(brute_force_min_q(c.values), abs=1e-9)
        assert q == pytest.approx(seriation_cost(c, perm), abs=1e-12)


# ------------------------------------------------------------ partition


def test_perfect_two_blocks():
    c = np.full((6, 6), 0.1)
    c[:3, :3] = 0.9
    c[3:, 3:] = 0.9
    np.fill_diagonal(c, 1.0)
    cm = CorrMatrix(tuple("abcdef"), c)
    part = greedy_partition(cm, range(6))
    assert part.groups == (("a", "b", "c"), ("d", "e", "f"))
    assert part.order == tuple("abcdef")


def test_uniform_off_diagonal_is_one_block():
    c = np.full((5, 5), 0.4)
    np.fill_diagonal(c, 1.0)
    part = greedy_partition(CorrMatrix(tuple("abcde"), c), [4, 2, 0, 1, 3])
    assert part.groups == (("e", "c", "a", "b", "d"),)


def test_two_items_single_block():
    part = greedy_partition(CorrMatrix(("a", "b"), [[1, -0.7], [-0.7, 1]]), [0, 1])
    assert part.groups == (("a", "b"),)


def test_partition_matches_enumeration_oracle():
    rng = np.random.default_rng(5)
    for _ in range(60):
        n = int(rng.integers(2, 9))
        c = random_corr(rng, n)
        perm = rng.permutation(n)
        part = greedy_partition(c, perm)
        expect = [tuple(c.labels[i] for i in block) for block in best_segmentation(c.values, perm)]
        assert list(part.groups) == expect


def test_partition_invariants():
    rng = np.random.default_rng(6)
    c = random_corr(rng, 9)
    perm = rng.permutation(9)
    part = greedy_partition(c, perm)
    flat = [x for g in part.groups for x in g]
    assert flat == list(part.order)  # contiguous, disjoint, covering
    assert sorted(flat) == sorted(c.labels)


# ------------------------------------------------------------ consensus


def test_affinity_matrix_properties():
    rng = np.random.default_rng(7)
    c = random_corr(rng, 8)
    a = affinity_matrix(c, FAST)
    assert a.kind == "affinity"
    assert np.array_equal(np.diag(a.values), np.ones(8))
    assert np.array_equal(a.values, a.values.T)
    assert a.values.min() >= 0 and a.values.max() <= 1
    # counts are multiples of 1/n
    np.testing.assert_allclose(a.values * FAST.restarts, np.round(a.values * FAST.restarts), atol=1e-9)


def test_affinity_is_order_independent():
    rng = np.random.default_rng(8)
    c = random_corr(rng, 7)
    a = affinity_matrix(c, FAST).values
    perms = anneal_orders(c, FAST, range(FAST.restarts, 0, -1))
    counts = np.zeros((7, 7))
    for p in perms:
        lab = greedy_partition(c, p).labels_of(c.labels)
        counts += lab[:, None] == lab[None, :]
    np.testing.assert_array_equal(counts / FAST.restarts, a)


def test_deterministic_partitions_give_binary_affinity():
    c = np.full((6, 6), 0.0)
    c[:2, :2] = c[2:4, 2:4] = c[4:, 4:] = 0.95
    np.fill_diagonal(c, 1.0)
    cm = CorrMatrix(tuple("abcdef"), c)
    a, part = consensus_cluster(cm, FAST)
    assert set(np.unique(a.values)) <= {0.0, 1.0}
    assert part.as_sets() == {frozenset("ab"), frozenset("cd"), frozenset("ef")}


def test_planted_blocks_recovered():
    rng = np.random.default_rng(9)
    for _ in range(10):
        cm, truth = planted(rng, (4, 4))
        _, part = consensus_cluster(cm, FAST)
        assert part.as_sets() == truth


def test_consensus_needs_two_items():
    with pytest.raises(InvalidInputError):
        consensus_cluster(CorrMatrix(("a",), [[1.0]]), FAST)


def test_schedule_validation():
    for kwargs in ({"restarts": 0}, {"cooling": 1.0}, {"t0_accept": 0.0}, {"seed": -1}, {"moves_per_level": 0}):
        with pytest.raises(InvalidInputError):
            AnnealSchedule(**kwargs)


def test_partition_json_and_labels():
    part = Partition((("a", "c"), ("b",)), ("a", "c", "b"))
    assert part.to_json() == {"groups": [["a", "c"], ["b"]], "order": ["a", "c", "b"]}
    assert list(part.labels_of(["a", "b", "c"])) == [0, 1, 0]
