"""Unit tests for diversity promotion, referent selection, and mixup."""

import csv
import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from indzsl.errors import (
    DataError,
    DegenerateSpanError,
    ParameterError,
    ValidationError,
    ZeroVectorError,
)
from indzsl.semantics import (
    build_referent_index,
    cdp_refine,
    cosine_similarity,
    mixup_referents,
    normalize_rows,
    semantic_matrix,
    similarity_report,
    write_similarity_csv,
    write_similarity_summary,
)


def dominated_matrix(n_classes, dim, shared_weight, seed):
    """Class vectors = w * shared_direction + (1 - w) * unit noise, normalized."""
    rng = np.random.default_rng(seed)
    shared = rng.standard_normal(dim)
    shared /= np.linalg.norm(shared)
    noise = rng.standard_normal((n_classes, dim))
    noise /= np.linalg.norm(noise, axis=1, keepdims=True)
    raw = shared_weight * shared + (1.0 - shared_weight) * noise
    return semantic_matrix([f"c{i:03d}" for i in range(n_classes)], raw)


def svd_oracle_refined(vectors, n_remove=1):
    """Reference refinement through numpy's full SVD of the C x d matrix."""
    _, s, vt = np.linalg.svd(vectors, full_matrices=False)
    rank = int(np.sum(s > s[0] * max(vectors.shape) * np.finfo(np.float64).eps))
    kept = vt[n_remove:rank]
    refined = vectors @ kept.T @ kept
    norms = np.linalg.norm(refined, axis=1)
    return refined / np.where(norms > 1e-12, norms, 1.0)[:, None]


class TestSemanticMatrix:
    def test_rows_are_normalized_on_construction(self):
        sem = semantic_matrix(["a", "b"], np.array([[3.0, 0.0], [0.0, 0.5]]))
        np.testing.assert_allclose(np.linalg.norm(sem.vectors, axis=1), 1.0)

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValidationError):
            semantic_matrix(["a", "a"], np.eye(2))

    def test_zero_row_rejected(self):
        with pytest.raises(ZeroVectorError):
            semantic_matrix(["a", "b"], np.array([[1.0, 0.0], [0.0, 0.0]]))


class TestCdpRefine:
    def test_projector_algebra(self):
        sem = dominated_matrix(10, 24, 0.9, seed=0)
        proj, refined = cdp_refine(sem)
        p = proj.projection_matrix
        assert np.abs(p @ p - p).sum(axis=1).max() < 1e-9  # matrix infinity norm
        assert np.abs(p - p.T).max() < 1e-9
        assert np.abs(p @ proj.removed_component).max() < 1e-9
        assert np.abs(refined.refined @ proj.removed_component).max() < 1e-9

    def test_rank_one_matrix_is_degenerate(self):
        v = np.ones(8) / np.sqrt(8)
        sem = semantic_matrix(["a", "b", "c"], np.tile(v, (3, 1)))
        with pytest.raises(DegenerateSpanError):
            cdp_refine(sem)

    def test_single_class_is_degenerate(self):
        sem = semantic_matrix(["a"], np.array([[1.0, 0.0]]))
        with pytest.raises(DegenerateSpanError):
            cdp_refine(sem)

    def test_matches_full_svd_oracle(self):
        # the spec's 8-classes-in-16-dims planted-direction fixture
        sem = dominated_matrix(8, 16, 0.95, seed=1)
        _, refined = cdp_refine(sem)
        oracle = svd_oracle_refined(sem.vectors)
        # projector is basis-independent, so refined rows agree up to rounding
        np.testing.assert_allclose(refined.refined, oracle, atol=1e-9)

    def test_diversity_decreases_on_dominated_fixture(self):
        for seed in range(5):
            sem = dominated_matrix(8, 16, 0.95, seed=seed)
            before = similarity_report(sem.vectors).mean_offdiag_abs
            _, refined = cdp_refine(sem)
            after = similarity_report(refined.refined).mean_offdiag_abs
            assert after < before

    def test_high_dim_dominated_fixture_becomes_nearly_orthogonal(self):
        sem = dominated_matrix(50, 512, 0.95, seed=2)
        _, refined = cdp_refine(sem)
        after = similarity_report(refined.refined).mean_offdiag_abs
        assert after < 0.05

    def test_refined_rows_unit_length(self):
        sem = dominated_matrix(6, 12, 0.85, seed=3)
        _, refined = cdp_refine(sem)
        np.testing.assert_allclose(np.linalg.norm(refined.refined, axis=1), 1.0,
                                   atol=1e-9)

    def test_n_remove_two_drops_two_components(self):
        sem = dominated_matrix(8, 16, 0.9, seed=4)
        proj, refined = cdp_refine(sem, n_remove=2)
        assert proj.removed_components.shape[0] == 2
        for comp in proj.removed_components:
            assert np.abs(refined.refined @ comp).max() < 1e-9

    @settings(max_examples=20, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_projection_is_idempotent_on_arbitrary_vectors(self, seed):
        rng = np.random.default_rng(seed)
        sem = dominated_matrix(6, 10, 0.85, seed=seed)
        proj, _ = cdp_refine(sem)
        z = rng.standard_normal(10)
        once = proj.projection_matrix @ z
        twice = proj.projection_matrix @ once
        assert np.linalg.norm(twice - once) < 1e-9


class TestCosineSimilarity:
    def test_self_similarity_is_one(self):
        v = np.array([0.3, -1.2, 4.0])
        assert cosine_similarity(v, v) == pytest.approx(1.0)

    def test_orthogonal_vectors(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0)

    def test_analytic_value(self):
        assert cosine_similarity([1.0, 1.0], [1.0, 0.0]) == pytest.approx(
            np.sqrt(2) / 2
        )

    def test_zero_vector_rejected(self):
        with pytest.raises(ZeroVectorError):
            cosine_similarity([0.0, 0.0], [1.0, 0.0])


class TestReferentIndex:
    def test_identical_vector_ranks_first_with_similarity_one(self):
        vecs = np.eye(4)[:3]
        sem = semantic_matrix(["t", "s1", "s2"],
                              np.vstack([vecs[0], vecs[0], vecs[1]]))
        index = build_referent_index(sem, ["t"], ["s1", "s2"], k=1,
                                     exclude_self=False)
        (top_id, top_sim), = index.referents["t"]
        assert top_id == "s1"
        assert top_sim == pytest.approx(1.0)

    def test_full_k_returns_every_other_seen_class_sorted(self):
        rng = np.random.default_rng(8)
        ids = [f"c{i}" for i in range(6)]
        sem = semantic_matrix(ids, rng.standard_normal((6, 12)))
        index = build_referent_index(sem, ["c0"], ids, k=5)
        ranked = index.classes("c0")
        assert set(ranked) == set(ids) - {"c0"}
        sims = [s for _, s in index.referents["c0"]]
        assert sims == sorted(sims, reverse=True)

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(9)
        ids = [f"c{i:02d}" for i in range(10)]
        sem = semantic_matrix(ids, rng.standard_normal((10, 8)))
        index = build_referent_index(sem, ids, ids, k=3)
        for target in ids:
            scored = sorted(
                ((-cosine_similarity(sem.vector(target), sem.vector(c)), c)
                 for c in ids if c != target),
            )
            expected = [c for _, c in scored[:3]]
            assert list(index.classes(target)) == expected

    def test_duplicate_vectors_tie_break_by_ascending_id(self):
        v = np.array([1.0, 0.0, 0.0])
        w = np.array([0.0, 1.0, 0.0])
        sem = semantic_matrix(["t", "b", "a", "z"], np.vstack([v, v, v, w]))
        index = build_referent_index(sem, ["t"], ["b", "a", "z"], k=2)
        assert list(index.classes("t")) == ["a", "b"]

    def test_k_exceeding_eligible_raises(self):
        sem = semantic_matrix(["a", "b"], np.eye(2))
        with pytest.raises(ParameterError):
            build_referent_index(sem, ["a"], ["a", "b"], k=2)  # self excluded

    def test_invariant_to_positive_rescaling(self):
        rng = np.random.default_rng(10)
        ids = [f"c{i}" for i in range(7)]
        sem = semantic_matrix(ids, rng.standard_normal((7, 9)))
        base = replace(sem, refined=sem.vectors.copy())
        scales = rng.uniform(0.1, 10.0, size=(7, 1))
        scaled = replace(sem, refined=sem.vectors * scales)
        i1 = build_referent_index(base, ids, ids, k=3)
        i2 = build_referent_index(scaled, ids, ids, k=3)
        for t in ids:
            assert i1.classes(t) == i2.classes(t)


class TestMixup:
    def _index(self, ranked):
        sem = semantic_matrix(
            [c for c in ranked] + ["t"],
            np.eye(len(ranked) + 1)[: len(ranked) + 1],
        )
        return build_referent_index(sem, ["t"], list(ranked), k=len(ranked))

    def test_identical_samples_return_same_vector(self):
        rng = np.random.default_rng(0)
        v = np.array([2.0, -1.0, 0.5])
        sem = semantic_matrix(["t", "r1", "r2"], np.eye(3))
        index = build_referent_index(sem, ["t"], ["r1", "r2"], k=2)
        out = mixup_referents(index, {"r1": [v], "r2": [v]}, "t", rng)
        np.testing.assert_allclose(out, v)

    def test_two_class_weights_are_080_020(self):
        rng = np.random.default_rng(0)
        sem = semantic_matrix(["t", "r1", "r2"], np.eye(3))
        index = build_referent_index(sem, ["t"], ["r1", "r2"], k=2)
        out = mixup_referents(
            index, {"r1": [np.array([1.0, 0.0])], "r2": [np.array([0.0, 1.0])]},
            "t", rng,
        )
        np.testing.assert_allclose(out, [0.8, 0.2])

    def test_k_one_returns_raw_top1_sample(self):
        rng = np.random.default_rng(0)
        sem = semantic_matrix(["t", "r1"], np.eye(2))
        index = build_referent_index(sem, ["t"], ["r1"], k=1)
        u = np.array([5.0, 6.0])
        np.testing.assert_array_equal(mixup_referents(index, {"r1": [u]}, "t", rng), u)

    def test_empty_pool_names_class(self):
        rng = np.random.default_rng(0)
        sem = semantic_matrix(["t", "r1", "r2"], np.eye(3))
        index = build_referent_index(sem, ["t"], ["r1", "r2"], k=2)
        with pytest.raises(DataError, match="r2"):
            mixup_referents(index, {"r1": [np.ones(2)], "r2": []}, "t", rng)

    def test_output_in_convex_hull_of_drawn_samples(self):
        rng = np.random.default_rng(1)
        sem = semantic_matrix(["t", "r1", "r2"], np.eye(3))
        index = build_referent_index(sem, ["t"], ["r1", "r2"], k=2)
        a, b = np.array([1.0, -3.0]), np.array([2.0, 5.0])
        out = mixup_referents(index, {"r1": [a], "r2": [b]}, "t", rng)
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        assert np.all(out >= lo - 1e-12) and np.all(out <= hi + 1e-12)


class TestSimilarityReport:
    def test_orthonormal_rows_have_zero_offdiag(self):
        rep = similarity_report(np.eye(4))
        assert rep.mean_offdiag_abs == pytest.approx(0.0, abs=1e-12)

    def test_equal_rows_have_unit_offdiag(self):
        rep = similarity_report(np.tile([1.0, 1.0, 0.0], (3, 1)))
        assert rep.mean_offdiag_abs == pytest.approx(1.0)

    def test_matches_pairwise_cosine_oracle(self):
        rng = np.random.default_rng(12)
        vecs = rng.standard_normal((5, 7))
        rep = similarity_report(vecs)
        for i in range(5):
            for j in range(5):
                assert rep.matrix[i, j] == pytest.approx(
                    cosine_similarity(vecs[i], vecs[j]), abs=1e-12
                )

    def test_diagonal_is_one(self):
        rng = np.random.default_rng(13)
        rep = similarity_report(rng.standard_normal((6, 5)))
        np.testing.assert_allclose(np.diag(rep.matrix), 1.0, atol=1e-9)

    def test_csv_and_summary_emission(self, tmp_path):
        rng = np.random.default_rng(14)
        vecs = normalize_rows(rng.standard_normal((3, 4)))
        rep = similarity_report(vecs, ["x", "y", "z"])
        csv_path = tmp_path / "sim.csv"
        write_similarity_csv(rep, csv_path)
        with open(csv_path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["x", "y", "z"]
        parsed = np.array([[float(v) for v in row] for row in rows[1:]])
        np.testing.assert_array_equal(parsed, rep.matrix)

        summary_path = tmp_path / "summary.json"
        payload = write_similarity_summary(rep, rep, summary_path)
        assert json.load(open(summary_path)) == payload
        assert payload["mean_offdiag_before"] == rep.mean_offdiag_abs
