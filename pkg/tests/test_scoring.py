"""TransE kernels and the parallel batch scorer."""

import numpy as np
import pytest

from kghop.errors import DimensionError
from kghop.kgstore import EntitySet
from kghop.scoring import (
    _block_scores,
    _block_topk,
    _matrix_topk,
    _score_block_matrix,
    embedding_aggregation,
    score_candidates_topk,
    score_candidates_topk_many,
    transe_score,
)
from kghop.topk import NEG_INF, ScoredEntity

from helpers import make_store, ref_brute_force_scores, ref_topk, ref_transe


class TestEmbeddingAggregation:
    def test_additive_identity(self):
        assert embedding_aggregation([0.0, 0.0], [1.0, 2.0]).tolist() == [1.0, 2.0]

    def test_elementwise_sum(self):
        assert embedding_aggregation([1.0, 1.0], [2.0, -1.0]).tolist() == [3.0, 0.0]

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            embedding_aggregation([1.0], [1.0, 2.0])


class TestTranseScore:
    def test_zero_distance_returns_gamma_exactly(self):
        v = np.array([0.25, -1.5, 3.0])
        assert transe_score(v, v.copy(), gamma=1.0) == 1.0
        assert transe_score(v, v.copy(), gamma=-2.5) == -2.5

    def test_direct_arithmetic(self):
        assert transe_score([1.0, 2.0], [0.0, 0.0], gamma=1.0) == 1.0 - 3.0

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            transe_score([1.0], [1.0, 2.0])

    def test_monotone_in_l1_distance(self):
        rng = np.random.default_rng(0)
        comp = rng.normal(0, 1, 6)
        cands = rng.normal(0, 1, (50, 6))
        scores = [transe_score(comp, c) for c in cands]
        l1 = [float(np.abs(comp - c).sum()) for c in cands]
        assert int(np.argmax(scores)) == int(np.argmin(l1))

    @pytest.mark.parametrize("dim", [1, 8, 768])
    def test_against_references(self, dim):
        # fsum is exactly rounded; ascending accumulation drifts from it
        # by ~sqrt(dim)*eps*|partial sums|, so the fsum check scales with dim
        # while the ascending-loop check is exact.
        fsum_tol = 1e-12 if dim <= 8 else 6e-12
        rng = np.random.default_rng(dim)
        for _ in range(50):
            a = rng.normal(0, 1, dim)
            b = rng.normal(0, 1, dim)
            got = transe_score(a, b, 1.0)
            assert got == pytest.approx(ref_transe(a, b, 1.0), abs=fsum_tol)
            total = 0.0
            for x, y in zip(a.tolist(), b.tolist()):
                total += abs(x - y)
            assert got == 1.0 - total

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        a, b = rng.normal(0, 1, 8), rng.normal(0, 1, 8)
        assert transe_score(a, b, 2.0) == transe_score(b, a, 2.0)

    def test_triangle_inequality_of_distance(self):
        rng = np.random.default_rng(6)
        gamma = 1.0
        for _ in range(100):
            a, b, c = rng.normal(0, 1, (3, 8))
            d_ac = gamma - transe_score(a, c, gamma)
            d_ab = gamma - transe_score(a, b, gamma)
            d_bc = gamma - transe_score(b, c, gamma)
            assert d_ac <= d_ab + d_bc + 1e-9


class TestBlockKernel:
    @pytest.mark.parametrize("dim", [1, 3, 8, 17])
    def test_bit_identical_to_scalar_kernel(self, dim):
        rng = np.random.default_rng(dim)
        n = 64
        block = rng.normal(0, 1, (n, dim))
        comp = rng.normal(0, 1, dim)
        emb_t = np.ascontiguousarray(block.T)
        found = np.ones(n, dtype=bool)
        batch = _block_scores(emb_t, found, comp, gamma=0.25)
        for i in range(n):
            assert batch[i] == transe_score(comp, block[i], gamma=0.25)

    def test_missing_rows_get_neg_inf(self):
        emb_t = np.zeros((2, 3))
        found = np.array([True, False, True])
        scores = _block_scores(emb_t, found, np.zeros(2), gamma=1.0)
        assert scores.tolist() == [1.0, NEG_INF, 1.0]

    def test_block_topk_matches_reference(self):
        rng = np.random.default_rng(7)
        ids = np.sort(rng.choice(10_000, size=500, replace=False)).astype(np.uint64)
        scores = rng.normal(0, 1, 500)
        scores[rng.choice(500, 30, replace=False)] = NEG_INF
        sel = _block_topk(ids, scores, 20)
        expected = ref_topk(list(zip(ids.tolist(), scores.tolist())), 20)
        assert sel.sorted_items() == expected

    def test_block_topk_breaks_boundary_ties_by_id(self):
        # five candidates tied exactly at the k-th score: the two
        # smallest ids of the tie must win the remaining slots
        ids = np.array([10, 20, 30, 40, 50, 60, 70], dtype=np.uint64)
        scores = np.array([9.0, 5.0, 5.0, 5.0, 5.0, 5.0, 1.0])
        sel = _block_topk(ids, scores, 3)
        assert sel.sorted_items() == [
            ScoredEntity(10, 9.0),
            ScoredEntity(20, 5.0),
            ScoredEntity(30, 5.0),
        ]

    def test_block_topk_all_tied_at_neg_inf(self):
        ids = np.array([3, 5, 9], dtype=np.uint64)
        scores = np.array([NEG_INF] * 3)
        sel = _block_topk(ids, scores, 2)
        assert [it.entity for it in sel.sorted_items()] == [3, 5]


def scored_ids(result):
    return [(it.entity, it.score) for it in result]


class TestScoreCandidatesTopK:
    def planted_store(self, dim=4):
        rng = np.random.default_rng(11)
        embs = {i: rng.normal(0, 1, dim) for i in range(20)}
        rel = rng.normal(0, 1, (1, dim))
        composite = embs[0] + rel[0]
        embs[7] = composite.copy()  # exact match
        store = make_store(dim, 1, [(0, 0, i) for i in range(1, 20)], embs, rel)
        return store, composite

    def test_planted_exact_match_ranks_first_with_gamma(self):
        store, composite = self.planted_store()
        cands = EntitySet(ids=np.arange(1, 20, dtype=np.uint64))
        result = score_candidates_topk(composite, cands, store, k=5, gamma=1.0)
        assert result[0] == ScoredEntity(7, 1.0)

    def test_worker_counts_agree_and_match_brute_force(self):
        rng = np.random.default_rng(12)
        dim = 8
        embs = {i: rng.normal(0, 1, dim) for i in range(1000)}
        rel = rng.normal(0, 1, (1, dim))
        store = make_store(dim, 1, [], embs, rel)
        composite = embs[3] + rel[0]
        cands = EntitySet(ids=np.arange(1000, dtype=np.uint64))
        expected = ref_topk(
            ref_brute_force_scores(store, composite, range(1000)), 50
        )
        results = {
            w: score_candidates_topk(composite, cands, store, 50, workers=w)
            for w in (1, 4, 8)
        }
        assert results[1] == results[4] == results[8]
        assert scored_ids(results[1]) == scored_ids(expected)

    def test_missing_embedding_scores_neg_inf_and_ranks_last(self):
        store = make_store(
            2, 1, [], {1: [0.0, 0.0], 2: [1.0, 1.0]}, [[0.0, 0.0]]
        )
        cands = EntitySet(ids=np.array([1, 2, 3], dtype=np.uint64))
        result = score_candidates_topk(np.zeros(2), cands, store, k=3)
        assert result[-1] == ScoredEntity(3, NEG_INF)
        assert [it.entity for it in result] == [1, 2, 3]

    def test_gamma_shift_never_changes_ranking(self):
        rng = np.random.default_rng(13)
        embs = {i: rng.normal(0, 1, 4) for i in range(300)}
        store = make_store(4, 1, [], embs, [[0.0] * 4])
        composite = rng.normal(0, 1, 4)
        cands = EntitySet(ids=np.arange(300, dtype=np.uint64))
        a = score_candidates_topk(composite, cands, store, 20, gamma=1.0)
        b = score_candidates_topk(composite, cands, store, 20, gamma=-7.25)
        assert [it.entity for it in a] == [it.entity for it in b]

    def test_locked_merge_equals_tree(self):
        rng = np.random.default_rng(14)
        embs = {i: rng.normal(0, 1, 4) for i in range(500)}
        store = make_store(4, 1, [], embs, [[0.0] * 4])
        composite = rng.normal(0, 1, 4)
        cands = EntitySet(ids=np.arange(500, dtype=np.uint64))
        tree = score_candidates_topk(composite, cands, store, 25, workers=6, merge="tree")
        locked = score_candidates_topk(composite, cands, store, 25, workers=6, merge="locked")
        assert tree == locked

    def test_eval_count_recorded(self):
        store = make_store(2, 1, [], {i: [0.0, 0.0] for i in range(10)}, [[0.0, 0.0]])
        stats = {}
        cands = EntitySet(ids=np.arange(10, dtype=np.uint64))
        score_candidates_topk(np.zeros(2), cands, store, 3, workers=2, stats=stats)
        assert stats["score_evals"] == 10


class TestMatrixBatchPath:
    def test_matrix_kernel_bit_identical_to_scalar(self):
        rng = np.random.default_rng(40)
        block = rng.normal(0, 1, (30, 8))
        comps = rng.normal(0, 1, (5, 8))
        emb_t = np.ascontiguousarray(block.T)
        found = np.ones(30, dtype=bool)
        scores = _score_block_matrix(emb_t, found, comps, gamma=1.5)
        for q in range(5):
            for i in range(30):
                assert scores[q, i] == transe_score(comps[q], block[i], gamma=1.5)

    def test_matrix_topk_matches_per_row_reference(self):
        rng = np.random.default_rng(41)
        ids = np.sort(rng.choice(5000, 200, replace=False)).astype(np.uint64)
        scores = rng.normal(0, 1, (7, 200))
        ids_mat, scores_mat = _matrix_topk(ids, scores, 9)
        for q in range(7):
            expected = ref_topk(list(zip(ids.tolist(), scores[q].tolist())), 9)
            got = [ScoredEntity(e, s) for e, s in
                   zip(ids_mat[q].tolist(), scores_mat[q].tolist())]
            assert got == expected

    def test_matrix_topk_boundary_ties_resolved_by_id(self):
        ids = np.array([10, 20, 30, 40, 50], dtype=np.uint64)
        scores = np.array([
            [9.0, 5.0, 5.0, 5.0, 1.0],   # tie straddles the k boundary
            [5.0, 5.0, 5.0, 5.0, 5.0],   # everything tied
        ])
        ids_mat, scores_mat = _matrix_topk(ids, scores, 2)
        assert ids_mat[0].tolist() == [10, 20]
        assert ids_mat[1].tolist() == [10, 20]
        assert scores_mat[1].tolist() == [5.0, 5.0]

    def test_many_equals_single_composite_path(self):
        rng = np.random.default_rng(42)
        embs = {i: rng.normal(0, 1, 4) for i in range(400)}
        store = make_store(4, 1, [], embs, [[0.0] * 4])
        cands = EntitySet(ids=np.arange(400, dtype=np.uint64))
        comps = [rng.normal(0, 1, 4) for _ in range(6)]
        for workers in (1, 3, 8):
            for merge in ("tree", "locked"):
                batched = score_candidates_topk_many(
                    comps, cands, store, 12, workers=workers, merge=merge
                )
                for comp, got in zip(comps, batched):
                    single = score_candidates_topk(comp, cands, store, 12)
                    assert got == single

    def test_many_with_none_composites(self):
        store = make_store(2, 1, [], {i: [float(i), 0.0] for i in range(5)}, [[0.0, 0.0]])
        cands = EntitySet(ids=np.arange(5, dtype=np.uint64))
        got = score_candidates_topk_many(
            [None, np.zeros(2), None], cands, store, 2, workers=2
        )
        assert got[0] is None and got[2] is None
        assert [it.entity for it in got[1]] == [0, 1]

    def test_many_all_none(self):
        store = make_store(2, 1, [], {0: [0.0, 0.0]}, [[0.0, 0.0]])
        cands = EntitySet(ids=np.arange(1, dtype=np.uint64))
        assert score_candidates_topk_many([None, None], cands, store, 2) == [None, None]

    def test_more_workers_than_candidates(self):
        store = make_store(2, 1, [], {i: [float(i), 0.0] for i in range(3)}, [[0.0, 0.0]])
        cands = EntitySet(ids=np.arange(3, dtype=np.uint64))
        got = score_candidates_topk_many(
            [np.zeros(2)], cands, store, 5, workers=8, merge="tree"
        )
        assert [it.entity for it in got[0]] == [0, 1, 2]
