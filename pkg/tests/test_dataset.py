"""Unit tests for file formats, split handling, and the synthetic generator."""

import numpy as np
import pytest

from indzsl.dataset import (
    FLAG_TEST,
    FLAG_TRAIN,
    DatasetSplits,
    Partition,
    SyntheticSpec,
    generate_synthetic,
    import_csv,
    load_dataset,
    normalize_splits,
    read_feature_file,
    read_semantics_file,
    samples_by_class,
    save_dataset,
    write_feature_file,
    write_semantics_file,
    write_split_file,
)
from indzsl.errors import LoadError, ValidationError


def toy_files(tmp_path, n_classes=3, dim=4, per_class=5, seed=0):
    rng = np.random.default_rng(seed)
    ids = tuple(f"k{i}" for i in range(n_classes))
    n = n_classes * per_class
    feats = rng.standard_normal((n, dim)).astype(np.float32).astype(np.float64)
    labels = np.repeat(np.arange(n_classes), per_class)
    flags = np.tile([FLAG_TRAIN] * 3 + [FLAG_TEST] * 2, n_classes)
    fpath, spath, ppath = (tmp_path / x for x in ("f.bin", "s.bin", "p.txt"))
    write_feature_file(fpath, ids, feats, labels, flags)
    write_semantics_file(spath, ids, rng.standard_normal((n_classes, dim)))
    write_split_file(ppath, ids[:2], ids[2:])
    return ids, feats, labels, flags, fpath, spath, ppath


class TestFeatureFile:
    def test_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        ids = ("a", "b")
        feats = rng.standard_normal((6, 3)).astype(np.float32).astype(np.float64)
        labels = np.array([0, 0, 0, 1, 1, 1])
        flags = np.array([0, 1, 0, 1, 0, 1], dtype=np.uint8)
        path = tmp_path / "x.bin"
        write_feature_file(path, ids, feats, labels, flags)
        rids, rfeats, rlabels, rflags = read_feature_file(path)
        assert rids == ids
        assert rfeats.tobytes() == feats.tobytes()
        np.testing.assert_array_equal(rlabels, labels)
        np.testing.assert_array_equal(rflags, flags)

    def test_truncated_file_reports_offset(self, tmp_path):
        ids, feats, labels, flags, fpath, *_ = toy_files(tmp_path)
        data = fpath.read_bytes()
        fpath.write_bytes(data[:-8])
        with pytest.raises(LoadError, match="offset"):
            read_feature_file(fpath)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 64)
        with pytest.raises(LoadError, match="magic"):
            read_feature_file(path)

    def test_unknown_version_rejected(self, tmp_path):
        ids, feats, labels, flags, fpath, *_ = toy_files(tmp_path)
        data = bytearray(fpath.read_bytes())
        data[8] = 99
        fpath.write_bytes(bytes(data))
        with pytest.raises(LoadError, match="version"):
            read_feature_file(fpath)


class TestSemanticsFile:
    def test_rows_normalized_on_load(self, tmp_path):
        path = tmp_path / "s.bin"
        write_semantics_file(path, ("a", "b"), np.array([[2.0, 0.0], [0.0, 5.0]]))
        sem = read_semantics_file(path)
        np.testing.assert_allclose(np.linalg.norm(sem.vectors, axis=1), 1.0,
                                   atol=1e-12)


class TestLoadDataset:
    def test_well_formed_toy_has_expected_counts(self, tmp_path):
        ids, feats, labels, flags, fpath, spath, ppath = toy_files(tmp_path)
        splits, semantics = load_dataset(fpath, spath, ppath)
        assert splits.seen_class_ids == ids[:2]
        assert splits.unseen_class_ids == ids[2:]
        assert len(splits.seen_train) == 6   # 3 train flags x 2 seen classes
        assert len(splits.seen_test) == 4
        assert len(splits.unseen_test) == 5
        assert semantics.dim == splits.feature_dim

    def test_split_file_with_unknown_class_rejected(self, tmp_path):
        ids, feats, labels, flags, fpath, spath, ppath = toy_files(tmp_path)
        ppath.write_text("k0\tseen\nk1\tseen\nk2\tunseen\nghost\tunseen\n")
        with pytest.raises(LoadError, match="ghost"):
            load_dataset(fpath, spath, ppath)

    def test_split_file_missing_class_rejected(self, tmp_path):
        ids, feats, labels, flags, fpath, spath, ppath = toy_files(tmp_path)
        ppath.write_text("k0\tseen\nk1\tseen\n")
        with pytest.raises(LoadError, match="k2"):
            load_dataset(fpath, spath, ppath)

    def test_semantics_dimension_mismatch_rejected(self, tmp_path):
        ids, feats, labels, flags, fpath, spath, ppath = toy_files(tmp_path)
        write_semantics_file(spath, ids, np.random.default_rng(0).standard_normal((3, 7)))
        with pytest.raises(LoadError, match="dim"):
            load_dataset(fpath, spath, ppath)

    def test_generated_dataset_round_trips_bit_exactly(self, tmp_path):
        splits, semantics, _ = generate_synthetic(SyntheticSpec(seed=3))
        paths = [tmp_path / x for x in ("f.bin", "s.bin", "p.txt")]
        save_dataset(splits, semantics, *paths)
        loaded, _ = load_dataset(*paths)
        for name in ("seen_train", "seen_test", "unseen_test"):
            a, b = getattr(splits, name), getattr(loaded, name)
            assert a.features.tobytes() == b.features.tobytes()
            np.testing.assert_array_equal(a.labels, b.labels)

    def test_normalize_features_flag(self, tmp_path):
        ids, feats, labels, flags, fpath, spath, ppath = toy_files(tmp_path)
        splits, _ = load_dataset(fpath, spath, ppath, normalize_features=True)
        np.testing.assert_allclose(
            np.linalg.norm(splits.seen_train.features, axis=1), 1.0, atol=1e-12
        )


class TestSplitsValidation:
    def test_overlapping_seen_unseen_rejected(self):
        part = Partition(features=np.zeros((1, 2)), labels=np.zeros(1, dtype=np.int64))
        with pytest.raises(ValidationError, match="overlap"):
            DatasetSplits(class_ids=("a", "b"), seen_class_ids=("a", "b"),
                          unseen_class_ids=("b",), seen_train=part,
                          seen_test=part, unseen_test=part)

    def test_labels_outside_class_set_rejected(self):
        seen = Partition(features=np.zeros((1, 2)), labels=np.array([1]))
        unseen = Partition(features=np.zeros((1, 2)), labels=np.array([1]))
        with pytest.raises(ValidationError, match="outside"):
            DatasetSplits(class_ids=("a", "b"), seen_class_ids=("a",),
                          unseen_class_ids=("b",), seen_train=seen,
                          seen_test=seen, unseen_test=unseen)


class TestImportCsv:
    def test_basic_rows(self, tmp_path):
        path = tmp_path / "in.csv"
        path.write_text("dog,1.0,2.0\ncat,3.0,4.0\ndog,5.0,6.0\n")
        ids, feats, labels, flags = import_csv(path)
        assert ids == ("dog", "cat")
        np.testing.assert_array_equal(labels, [0, 1, 0])
        np.testing.assert_allclose(feats, [[1, 2], [3, 4], [5, 6]])
        assert set(flags) == {FLAG_TRAIN}

    def test_optional_split_column(self, tmp_path):
        path = tmp_path / "in.csv"
        path.write_text("dog,train,1.0,2.0\ndog,test,3.0,4.0\n")
        _, feats, _, flags = import_csv(path)
        np.testing.assert_array_equal(flags, [FLAG_TRAIN, FLAG_TEST])
        assert feats.shape == (2, 2)

    def test_inconsistent_dims_rejected(self, tmp_path):
        path = tmp_path / "in.csv"
        path.write_text("a,1.0,2.0\nb,3.0\n")
        with pytest.raises(LoadError, match="dims"):
            import_csv(path)

    def test_non_numeric_value_reports_line(self, tmp_path):
        path = tmp_path / "in.csv"
        path.write_text("a,1.0,2.0\nb,oops,4.0\n")
        with pytest.raises(LoadError, match=":2"):
            import_csv(path)


class TestGenerateSynthetic:
    def test_sigma_zero_collapses_samples_to_means(self):
        splits, _, oracle = generate_synthetic(SyntheticSpec(sigma=0.0, seed=5))
        pools = samples_by_class(splits, splits.seen_train)
        for i, cid in enumerate(splits.seen_class_ids):
            mean32 = oracle.means[i].astype(np.float32).astype(np.float64)
            np.testing.assert_array_equal(pools[cid], np.tile(mean32, (100, 1)))

    def test_strength_one_without_noise_gives_identical_semantics(self):
        _, semantics, _ = generate_synthetic(
            SyntheticSpec(shared_strength=1.0, semantic_noise=0.0, seed=6)
        )
        first = semantics.vectors[0]
        np.testing.assert_allclose(semantics.vectors, np.tile(first, (10, 1)),
                                   atol=1e-12)

    def test_default_spec_nearest_mean_accuracy_is_high(self):
        # well-separated unit-sphere means at sigma = 0.1
        _, _, oracle = generate_synthetic(SyntheticSpec(seed=7))
        assert oracle.nearest_mean_unseen_acc >= 0.99

    def test_nearest_mean_oracle_matches_independent_recomputation(self):
        splits, _, oracle = generate_synthetic(SyntheticSpec(seed=8))
        rows = [splits.class_ids.index(c) for c in splits.unseen_class_ids]
        correct, total = {}, {}
        for x, lab in zip(splits.unseen_test.features, splits.unseen_test.labels):
            best = min(rows, key=lambda r: float(np.sum((x - oracle.means[r]) ** 2)))
            total[lab] = total.get(lab, 0) + 1
            correct[lab] = correct.get(lab, 0) + (best == lab)
        acc = np.mean([correct[r] / total[r] for r in total])
        assert acc == pytest.approx(oracle.nearest_mean_unseen_acc, abs=1e-12)

    def test_deterministic_for_fixed_seed(self):
        a = generate_synthetic(SyntheticSpec(seed=9))
        b = generate_synthetic(SyntheticSpec(seed=9))
        assert a[0].seen_train.features.tobytes() == b[0].seen_train.features.tobytes()
        assert a[1].vectors.tobytes() == b[1].vectors.tobytes()
        assert a[2].unseen_train.features.tobytes() == b[2].unseen_train.features.tobytes()

    def test_oracle_holds_out_real_unseen_train_separate_from_test(self):
        splits, _, oracle = generate_synthetic(SyntheticSpec(seed=10))
        assert len(oracle.unseen_train) == len(splits.unseen_test)
        assert oracle.unseen_train.features.tobytes() != splits.unseen_test.features.tobytes()

    def test_mean_rank_confines_means_to_subspace(self):
        spec = SyntheticSpec(seed=11, mean_rank=5, min_separation=0.8)
        _, _, oracle = generate_synthetic(spec)
        s = np.linalg.svd(oracle.means, compute_uv=False)
        assert (s > 1e-9).sum() == 5
        for i in range(10):
            for j in range(i + 1, 10):
                assert np.linalg.norm(oracle.means[i] - oracle.means[j]) >= 0.8
        # shared direction is orthogonal to the mean subspace
        assert np.abs(oracle.means @ oracle.shared_direction).max() < 1e-9

    def test_invalid_specs_rejected(self):
        with pytest.raises(ValidationError):
            SyntheticSpec(n_classes=5, n_seen=3, n_unseen=3)
        with pytest.raises(ValidationError):
            SyntheticSpec(sigma=-0.1)
        with pytest.raises(ValidationError):
            SyntheticSpec(shared_strength=1.5)

    def test_normalize_splits_unit_rows(self):
        splits, _, _ = generate_synthetic(SyntheticSpec(seed=12))
        normed = normalize_splits(splits)
        for part in (normed.seen_train, normed.seen_test, normed.unseen_test):
            np.testing.assert_allclose(np.linalg.norm(part.features, axis=1), 1.0,
                                       atol=1e-12)
