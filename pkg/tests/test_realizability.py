import time

import numpy as np
import pytest

from embedlab import (
    InvalidParameterError,
    build_pair_digraph,
    certify,
    complete_ordering,
    embed_from_ordering,
    evaluate_accuracy,
    generate_uniform_quadruplets,
    generate_uniform_triplets,
    monte_carlo_acyclicity,
    verify_witness_cycle,
)
from embedlab._rng import derive_seed

from conftest import make_instance
from oracles import ordering_search_satisfiable


def _pairs(ordering):
    return [tuple(row) for row in np.asarray(ordering).tolist()]


class TestPairDigraph:
    def test_single_triplet_edge(self):
        g = build_pair_digraph(make_instance(3, [[0, 1, 2]]))
        assert g.num_edges == 1
        assert g.pair(int(g.tails[0])) == (0, 1)
        assert g.pair(int(g.heads[0])) == (0, 2)

    def test_contradiction_is_a_two_cycle(self, tiny_contradiction):
        g = build_pair_digraph(tiny_contradiction)
        assert g.num_edges == 2
        assert g.pair(int(g.tails[0])) == g.pair(int(g.heads[1]))
        assert g.pair(int(g.heads[0])) == g.pair(int(g.tails[1]))

    def test_triplet_edges_share_an_item(self):
        inst = generate_uniform_triplets(12, 200, seed=0)
        g = build_pair_digraph(inst)
        for e in range(g.num_edges):
            tail = set(g.pair(int(g.tails[e])))
            head = set(g.pair(int(g.heads[e])))
            assert len(tail & head) == 1

    def test_quadruplet_edge(self):
        g = build_pair_digraph(make_instance(4, [[0, 1, 2, 3]], quadruplet=True))
        assert g.pair(int(g.tails[0])) == (0, 1)
        assert g.pair(int(g.heads[0])) == (2, 3)

    def test_one_edge_per_constraint_in_order(self):
        inst = generate_uniform_triplets(8, 50, seed=4)
        g = build_pair_digraph(inst)
        assert g.num_edges == inst.m


class TestCertify:
    def test_direct_contradiction(self, tiny_contradiction):
        cert = certify(tiny_contradiction)
        assert not cert.realizable
        assert cert.status == "Unrealizable"
        assert len(cert.witness_cycle) == 2
        assert verify_witness_cycle(tiny_contradiction, cert.witness_cycle)

    def test_chain_is_realizable_with_expected_ranks(self):
        inst = make_instance(3, [[0, 1, 2], [1, 2, 0]])
        cert = certify(inst)
        assert cert.realizable
        ranks = {p: i for i, p in enumerate(_pairs(cert.ordering))}
        assert ranks[(1, 2)] < ranks[(0, 1)] < ranks[(0, 2)]

    def test_ordering_consistent_with_every_edge(self):
        inst = generate_uniform_triplets(30, 60, seed=9)
        cert = certify(inst)
        if not cert.realizable:
            pytest.skip("random draw happened to be cyclic")
        ranks = {p: i for i, p in enumerate(_pairs(cert.ordering))}
        for a, j, k in inst.constraints:
            tail = tuple(sorted((a, j)))
            head = tuple(sorted((a, k)))
            assert ranks[tail] < ranks[head]

    def test_matches_ordering_search_oracle_tiny(self):
        rng = np.random.default_rng(123)
        checked_unreal = 0
        for trial in range(400):
            n = int(rng.integers(3, 6))
            m = int(rng.integers(1, 5))
            inst = generate_uniform_triplets(n, m, derive_seed(77, trial))
            cert = certify(inst)
            assert cert.realizable == ordering_search_satisfiable(inst)
            if cert.realizable:
                emb = embed_from_ordering(n, complete_ordering(n, cert.ordering))
                assert evaluate_accuracy(emb, inst) == 1.0
            else:
                checked_unreal += 1
                assert verify_witness_cycle(inst, cert.witness_cycle)
        assert checked_unreal > 0

    def test_quadruplet_certify_matches_oracle(self):
        rng = np.random.default_rng(5)
        seen = {True: 0, False: 0}
        for trial in range(300):
            n = int(rng.integers(4, 7))
            m = int(rng.integers(1, 5))
            inst = generate_uniform_quadruplets(n, m, derive_seed(88, trial))
            cert = certify(inst)
            assert cert.realizable == ordering_search_satisfiable(inst)
            seen[cert.realizable] += 1
            if not cert.realizable:
                assert verify_witness_cycle(inst, cert.witness_cycle)
        assert seen[True] and seen[False]

    def test_witness_refuses_garbage(self, tiny_contradiction):
        assert not verify_witness_cycle(tiny_contradiction, [])
        assert not verify_witness_cycle(tiny_contradiction, [0, 0])


class TestCompleteOrdering:
    def test_appends_absent_pairs_lexicographically(self):
        inst = make_instance(4, [[0, 1, 2]])
        cert = certify(inst)
        full = _pairs(complete_ordering(4, cert.ordering))
        assert len(full) == 6
        active = _pairs(cert.ordering)
        assert full[: len(active)] == active
        assert full[len(active) :] == sorted(set(full) - set(active))

    def test_rejects_duplicate_pairs(self):
        with pytest.raises(InvalidParameterError):
            complete_ordering(4, [(0, 1), (1, 0)])


class TestEmbedFromOrdering:
    def test_two_points_unit_distance(self):
        emb = embed_from_ordering(2, [(0, 1)])
        dist = np.linalg.norm(emb.coords[0] - emb.coords[1])
        assert abs(dist - 1.0) <= 1e-9

    def test_three_point_order(self):
        emb = embed_from_ordering(3, [(1, 2), (0, 1), (0, 2)])
        c = emb.coords

        def d(i, j):
            return np.linalg.norm(c[i] - c[j])

        assert d(1, 2) < d(0, 1) < d(0, 2)

    def test_end_to_end_accuracy_is_exactly_one(self):
        inst = generate_uniform_triplets(4, 3, seed=15)
        cert = certify(inst)
        assert cert.realizable
        emb = embed_from_ordering(4, complete_ordering(4, cert.ordering))
        assert evaluate_accuracy(emb, inst) == 1.0

    def test_distances_strictly_increase_along_ordering(self):
        n = 12
        rng = np.random.default_rng(3)
        iu, ju = np.triu_indices(n, k=1)
        perm = rng.permutation(iu.shape[0])
        ordering = np.column_stack([iu[perm], ju[perm]])
        emb = embed_from_ordering(n, ordering)
        d2 = ((emb.coords[ordering[:, 0]] - emb.coords[ordering[:, 1]]) ** 2).sum(axis=1)
        assert np.all(np.diff(d2) >= 1e-9)

    def test_constructive_completeness_midsize(self):
        # every realizable certificate embeds with accuracy exactly 1
        for trial in range(8):
            n = 30 + 2 * trial
            inst = generate_uniform_triplets(n, n, derive_seed(101, trial))
            cert = certify(inst)
            if not cert.realizable:
                continue
            emb = embed_from_ordering(n, complete_ordering(n, cert.ordering))
            assert evaluate_accuracy(emb, inst) == 1.0

    def test_partial_ordering_rejected(self):
        with pytest.raises(InvalidParameterError):
            embed_from_ordering(4, [(0, 1), (0, 2)])
        with pytest.raises(InvalidParameterError):
            embed_from_ordering(3, [(0, 1), (0, 2), (0, 1)])
        with pytest.raises(InvalidParameterError):
            embed_from_ordering(3, [(0, 1), (0, 2), (1, 1)])


class TestMonteCarloAcyclicity:
    def test_zero_lambda_always_acyclic(self):
        est = monte_carlo_acyclicity(10, 0.0, trials=20, seed=0)
        assert est.fraction == 1.0
        assert est.ci_high >= est.fraction >= est.ci_low

    def test_sparse_triplet_regime(self):
        n = 100
        est = monte_carlo_acyclicity(n, 0.1 * n**-1.5, trials=50, seed=1)
        assert est.fraction >= 0.9

    def test_midscale_realizable_fraction(self):
        n = 500
        est = monte_carlo_acyclicity(n, 0.2 * n**-1.5, trials=200, seed=2)
        assert est.fraction >= 0.95

    def test_worker_independence_is_seed_derived(self):
        a = monte_carlo_acyclicity(30, 1e-4, trials=30, seed=5)
        b = monte_carlo_acyclicity(30, 1e-4, trials=30, seed=5)
        assert a == b

    def test_worker_count_does_not_change_estimate(self):
        serial = monte_carlo_acyclicity(30, 1e-4, trials=24, seed=6)
        pooled = monte_carlo_acyclicity(30, 1e-4, trials=24, seed=6, workers=4)
        assert serial == pooled


from hypothesis import given, settings
from hypothesis import strategies as st


@st.composite
def small_random_instances(draw):
    quad = draw(st.booleans())
    n = draw(st.integers(min_value=4, max_value=9))
    m = draw(st.integers(min_value=1, max_value=8))
    seed = draw(st.integers(min_value=0, max_value=2**32))
    gen = generate_uniform_quadruplets if quad else generate_uniform_triplets
    return gen(n, m, seed)


@given(small_random_instances())
@settings(max_examples=80, deadline=None)
def test_certificate_soundness_property(inst):
    cert = certify(inst)
    if cert.realizable:
        ranks = {tuple(p): i for i, p in enumerate(np.asarray(cert.ordering).tolist())}
        for row in inst.constraints:
            if inst.is_quadruplet:
                tail = tuple(sorted((row[0], row[1])))
                head = tuple(sorted((row[2], row[3])))
            else:
                tail = tuple(sorted((row[0], row[1])))
                head = tuple(sorted((row[0], row[2])))
            assert ranks[tail] < ranks[head]
    else:
        assert verify_witness_cycle(inst, cert.witness_cycle)


def test_certify_large_instance_under_a_minute():
    inst = generate_uniform_triplets(2000, 10**6, seed=0)
    t0 = time.perf_counter()
    cert = certify(inst)
    elapsed = time.perf_counter() - t0
    assert elapsed < 60
    assert cert.realizable in (True, False)
    if not cert.realizable:
        assert verify_witness_cycle(inst, cert.witness_cycle)
