"""Feature-file ingestion, split management, and a synthetic data generator.

On-disk formats (all little-endian, byte layouts documented in the README):

* feature file  -- magic ``IZSLFEAT``: header, class-id table, float32
  feature block, label block (uint32 class index per sample + uint8
  train/test flag per sample).
* semantics file -- magic ``IZSLSEMA``: header, class-id table, float32
  class-vector block.  Vectors are L2-normalized on load.
* split file -- plain text, one ``class_id<TAB>{seen|unseen}`` line per class.

Features are stored in 32-bit precision and cast to float64 on load; the
synthetic generator quantizes its output to float32 so write-then-read
round-trips are bit-exact.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np

from .errors import LoadError, ValidationError
from .semantics import ClassSemanticMatrix, normalize_rows, semantic_matrix

FEATURE_MAGIC = b"IZSLFEAT"
SEMANTICS_MAGIC = b"IZSLSEMA"
FORMAT_VERSION = 1

FLAG_TRAIN = 0
FLAG_TEST = 1


@dataclass(frozen=True)
class Partition:
    """One labelled feature set; labels index into DatasetSplits.class_ids."""

    features: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return self.features.shape[0]


@dataclass(frozen=True)
class DatasetSplits:
    """Seen/unseen class partition with train/test visual-feature sets."""

    class_ids: tuple
    seen_class_ids: tuple
    unseen_class_ids: tuple
    seen_train: Partition
    seen_test: Partition
    unseen_test: Partition

    def __post_init__(self):
        seen = set(self.seen_class_ids)
        unseen = set(self.unseen_class_ids)
        if seen & unseen:
            raise ValidationError(f"seen/unseen overlap: {sorted(seen & unseen)}")
        if seen | unseen != set(self.class_ids):
            raise ValidationError("seen and unseen sets must cover all class ids")
        dim = self.seen_train.features.shape[1]
        for name, part in (("seen_train", self.seen_train),
                           ("seen_test", self.seen_test),
                           ("unseen_test", self.unseen_test)):
            if part.features.shape[1] != dim:
                raise ValidationError(f"{name}: feature dim {part.features.shape[1]} != {dim}")
            if part.features.shape[0] != part.labels.shape[0]:
                raise ValidationError(f"{name}: {part.features.shape[0]} rows, "
                                      f"{part.labels.shape[0]} labels")
        for name, part, allowed in (("seen_train", self.seen_train, seen),
                                    ("seen_test", self.seen_test, seen),
                                    ("unseen_test", self.unseen_test, unseen)):
            ids = {self.class_ids[i] for i in part.labels}
            if not ids <= allowed:
                raise ValidationError(f"{name} contains labels outside its class set")

    @property
    def feature_dim(self):
        return self.seen_train.features.shape[1]

    def label_ids(self, partition: Partition):
        return [self.class_ids[i] for i in partition.labels]


def samples_by_class(splits: DatasetSplits, partition: Partition):
    """Map class id -> (n_c, d) array of that class's samples in a partition."""
    out = {}
    for idx in np.unique(partition.labels):
        out[splits.class_ids[idx]] = partition.features[partition.labels == idx]
    return out


def normalize_splits(splits: DatasetSplits) -> DatasetSplits:
    """Copy of the splits with every feature row L2-normalized."""
    def norm(part):
        return Partition(features=normalize_rows(part.features), labels=part.labels)

    return DatasetSplits(
        class_ids=splits.class_ids,
        seen_class_ids=splits.seen_class_ids,
        unseen_class_ids=splits.unseen_class_ids,
        seen_train=norm(splits.seen_train),
        seen_test=norm(splits.seen_test),
        unseen_test=norm(splits.unseen_test),
    )


# ---------------------------------------------------------------------------
# binary containers


def _open_read(path, mode="rb", **kwargs):
    try:
        return open(path, mode, **kwargs)
    except OSError as exc:
        raise LoadError(f"{path}: {exc.strerror or exc}")


def _read_exact(fh, n, path, what):
    data = fh.read(n)
    if len(data) != n:
        raise LoadError(f"{path}: truncated {what} at offset {fh.tell() - len(data)}")
    return data


def _read_header(fh, path, magic):
    got = _read_exact(fh, 8, path, "magic")
    if got != magic:
        raise LoadError(f"{path}: bad magic {got!r}, expected {magic!r}")
    (version,) = struct.unpack("<I", _read_exact(fh, 4, path, "version"))
    if version != FORMAT_VERSION:
        raise LoadError(f"{path}: unsupported version {version}")


def _read_class_table(fh, n_classes, path):
    ids = []
    for _ in range(n_classes):
        (length,) = struct.unpack("<H", _read_exact(fh, 2, path, "class table"))
        ids.append(_read_exact(fh, length, path, "class table").decode("utf-8"))
    if len(set(ids)) != n_classes:
        raise LoadError(f"{path}: duplicate class ids in table")
    return tuple(ids)


def _write_class_table(fh, class_ids):
    for cid in class_ids:
        raw = str(cid).encode("utf-8")
        fh.write(struct.pack("<H", len(raw)))
        fh.write(raw)


def write_feature_file(path, class_ids, features, labels, flags):
    """Write a feature container; features are stored as float32."""
    features = np.ascontiguousarray(features, dtype=np.float32)
    labels = np.ascontiguousarray(labels, dtype=np.uint32)
    flags = np.ascontiguousarray(flags, dtype=np.uint8)
    n, d = features.shape
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<IIII", FORMAT_VERSION, d, n, len(class_ids)))
        _write_class_table(fh, class_ids)
        fh.write(features.tobytes())
        fh.write(labels.tobytes())
        fh.write(flags.tobytes())


def read_feature_file(path):
    """Read a feature container; returns (class_ids, features f64, labels, flags)."""
    with _open_read(path) as fh:
        _read_header(fh, path, FEATURE_MAGIC)
        d, n, n_classes = struct.unpack("<III", _read_exact(fh, 12, path, "header"))
        class_ids = _read_class_table(fh, n_classes, path)
        feat = np.frombuffer(
            _read_exact(fh, 4 * n * d, path, "feature block"), dtype="<f4"
        ).reshape(n, d).astype(np.float64)
        labels = np.frombuffer(
            _read_exact(fh, 4 * n, path, "label block"), dtype="<u4"
        ).astype(np.int64)
        flags = np.frombuffer(
            _read_exact(fh, n, path, "flag block"), dtype=np.uint8
        ).copy()
    if labels.size and labels.max() >= n_classes:
        raise LoadError(f"{path}: label index {labels.max()} outside class table")
    return class_ids, feat, labels, flags


def write_semantics_file(path, class_ids, vectors):
    vectors = np.ascontiguousarray(vectors, dtype=np.float32)
    c, d = vectors.shape
    if c != len(class_ids):
        raise ValidationError(f"{len(class_ids)} class ids but {c} vector rows")
    with open(path, "wb") as fh:
        fh.write(SEMANTICS_MAGIC)
        fh.write(struct.pack("<III", FORMAT_VERSION, d, c))
        _write_class_table(fh, class_ids)
        fh.write(vectors.tobytes())


def read_semantics_file(path):
    """Read class semantic vectors; rows are re-normalized to unit length."""
    with _open_read(path) as fh:
        _read_header(fh, path, SEMANTICS_MAGIC)
        d, c = struct.unpack("<II", _read_exact(fh, 8, path, "header"))
        class_ids = _read_class_table(fh, c, path)
        vectors = np.frombuffer(
            _read_exact(fh, 4 * c * d, path, "vector block"), dtype="<f4"
        ).reshape(c, d).astype(np.float64)
    return semantic_matrix(class_ids, vectors)


def write_split_file(path, seen_ids, unseen_ids):
    with open(path, "w") as fh:
        for cid in seen_ids:
            fh.write(f"{cid}\tseen\n")
        for cid in unseen_ids:
            fh.write(f"{cid}\tunseen\n")


def read_split_file(path):
    """Parse class_id<TAB>{seen|unseen} lines; '#' starts a comment."""
    roles = {}
    with _open_read(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or parts[1] not in ("seen", "unseen"):
                raise LoadError(f"{path}:{lineno}: expected 'class_id<TAB>seen|unseen'")
            if parts[0] in roles:
                raise LoadError(f"{path}:{lineno}: duplicate class id {parts[0]!r}")
            roles[parts[0]] = parts[1]
    return roles


def load_dataset(feature_path, semantics_path, split_path, normalize_features=False):
    """Load and cross-validate the three dataset files.

    Returns (DatasetSplits, ClassSemanticMatrix) with features as float64.
    Seen-class samples are routed to train/test by their per-sample flag;
    unseen-class samples always land in unseen_test.
    """
    class_ids, features, labels, flags = read_feature_file(feature_path)
    semantics = read_semantics_file(semantics_path)
    roles = read_split_file(split_path)

    if set(semantics.class_ids) != set(class_ids):
        raise LoadError(
            f"{semantics_path}: class ids differ from feature file {feature_path}"
        )
    unknown = set(roles) - set(class_ids)
    if unknown:
        raise LoadError(f"{split_path}: unknown class ids {sorted(unknown)}")
    missing = set(class_ids) - set(roles)
    if missing:
        raise LoadError(f"{split_path}: no role for class ids {sorted(missing)}")
    if semantics.dim != features.shape[1]:
        raise LoadError(
            f"{semantics_path}: dim {semantics.dim} != feature dim {features.shape[1]}"
        )

    if normalize_features:
        features = normalize_rows(features)

    seen_ids = tuple(c for c in class_ids if roles[c] == "seen")
    unseen_ids = tuple(c for c in class_ids if roles[c] == "unseen")
    is_seen = np.array([roles[class_ids[i]] == "seen" for i in labels])
    is_test = flags == FLAG_TEST

    def part(mask):
        return Partition(features=features[mask], labels=labels[mask])

    splits = DatasetSplits(
        class_ids=class_ids,
        seen_class_ids=seen_ids,
        unseen_class_ids=unseen_ids,
        seen_train=part(is_seen & ~is_test),
        seen_test=part(is_seen & is_test),
        unseen_test=part(~is_seen),
    )
    return splits, semantics


def save_dataset(splits: DatasetSplits, semantics: ClassSemanticMatrix,
                 feature_path, semantics_path, split_path):
    """Write a DatasetSplits + semantics back out as the three files."""
    parts = [
        (splits.seen_train, FLAG_TRAIN),
        (splits.seen_test, FLAG_TEST),
        (splits.unseen_test, FLAG_TEST),
    ]
    features = np.vstack([p.features for p, _ in parts])
    labels = np.concatenate([p.labels for p, _ in parts])
    flags = np.concatenate([np.full(len(p), f, dtype=np.uint8) for p, f in parts])
    write_feature_file(feature_path, splits.class_ids, features, labels, flags)
    write_semantics_file(semantics_path, semantics.class_ids, semantics.vectors)
    write_split_file(split_path, splits.seen_class_ids, splits.unseen_class_ids)


def import_csv(csv_path):
    """Read the CSV interchange format: class_id[,train|test],v1,...,vd.

    The split column is optional and defaults to 'train'.  Returns
    (class_ids, features, labels, flags) ready for write_feature_file.
    """
    ids, rows, flags = [], [], []
    order = []
    with _open_read(csv_path, "r", newline="") as fh:
        for lineno, record in enumerate(csv.reader(fh), start=1):
            if not record:
                continue
            cid = record[0].strip()
            rest = record[1:]
            flag = FLAG_TRAIN
            if rest and rest[0].strip() in ("train", "test"):
                flag = FLAG_TEST if rest[0].strip() == "test" else FLAG_TRAIN
                rest = rest[1:]
            try:
                vec = [float(v) for v in rest]
            except ValueError as exc:
                raise LoadError(f"{csv_path}:{lineno}: non-numeric feature value ({exc})")
            if not vec:
                raise LoadError(f"{csv_path}:{lineno}: row has no feature values")
            if cid not in order:
                order.append(cid)
            ids.append(cid)
            rows.append(vec)
            flags.append(flag)
    if not rows:
        raise LoadError(f"{csv_path}: no data rows")
    dims = {len(r) for r in rows}
    if len(dims) != 1:
        raise LoadError(f"{csv_path}: inconsistent feature dims {sorted(dims)}")
    class_ids = tuple(order)
    index = {c: i for i, c in enumerate(class_ids)}
    labels = np.array([index[c] for c in ids], dtype=np.int64)
    features = np.array(rows, dtype=np.float64)
    return class_ids, features, labels, np.array(flags, dtype=np.uint8)


# ---------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a verifiable Gaussian-cluster dataset.

    Class means sit on the unit sphere; samples are mean + N(0, sigma^2).
    Class semantic vectors mix a shared direction (weight shared_strength)
    with the class mean, plus noise, so CDP has a dominant component to
    remove while semantics still track the visual clusters.

    mean_rank > 0 confines class means to a random subspace of that rank
    (with the shared direction orthogonal to it), which keeps unseen
    semantics inside the span of the seen ones; min_separation rejects mean
    draws closer than that distance to an earlier class.  Both default off.
    """

    n_classes: int = 10
    n_seen: int = 6
    n_unseen: int = 4
    feature_dim: int = 32
    samples_per_class: int = 100
    sigma: float = 0.1
    semantic_noise: float = 0.05
    shared_strength: float = 0.8
    seed: int = 7
    mean_rank: int = 0
    min_separation: float = 0.0

    def __post_init__(self):
        if self.n_seen + self.n_unseen != self.n_classes:
            raise ValidationError(
                f"split sizes {self.n_seen}+{self.n_unseen} != {self.n_classes} classes"
            )
        if min(self.n_seen, self.n_unseen) < 1:
            raise ValidationError("need at least one seen and one unseen class")
        if self.feature_dim < 2 or self.samples_per_class < 1:
            raise ValidationError("feature_dim >= 2 and samples_per_class >= 1 required")
        if self.sigma < 0 or self.semantic_noise < 0 or self.min_separation < 0:
            raise ValidationError("scales must be non-negative")
        if not 0.0 <= self.shared_strength <= 1.0:
            raise ValidationError("shared_strength must lie in [0, 1]")
        if self.mean_rank < 0 or self.mean_rank > self.feature_dim:
            raise ValidationError("mean_rank must lie in [0, feature_dim]")


@dataclass(frozen=True)
class SyntheticOracle:
    """Generation-time ground truth for ceiling and sanity checks.

    unseen_train holds real held-out unseen samples that never enter
    DatasetSplits; they exist only so tests can train a ceiling classifier.
    """

    class_ids: tuple
    means: np.ndarray
    shared_direction: np.ndarray
    unseen_train: Partition
    nearest_mean_unseen_acc: float


def _quantize(a):
    # mimic the on-disk float32 representation so file round-trips are bit-exact
    return a.astype(np.float32).astype(np.float64)


def _draw_means(rng, spec: SyntheticSpec):
    """Unit-sphere class means, optionally rank-limited and separation-checked."""
    c, d = spec.n_classes, spec.feature_dim
    basis = None
    if spec.mean_rank:
        basis, _ = np.linalg.qr(rng.standard_normal((d, spec.mean_rank)))
    means = np.zeros((c, d))
    for i in range(c):
        for _ in range(1000):
            m = basis @ rng.standard_normal(spec.mean_rank) if basis is not None \
                else rng.standard_normal(d)
            m /= np.linalg.norm(m)
            if all(np.linalg.norm(m - means[j]) >= spec.min_separation
                   for j in range(i)):
                means[i] = m
                break
        else:
            raise ValidationError(
                f"could not place class mean {i} at min_separation "
                f"{spec.min_separation} (rank {spec.mean_rank})"
            )
    return means, basis


def generate_synthetic(spec: SyntheticSpec):
    """Deterministically generate (DatasetSplits, ClassSemanticMatrix, SyntheticOracle).

    Each class gets 2 * samples_per_class draws: seen classes split them into
    train/test halves; unseen classes into test plus an oracle-only held-out
    train half.
    """
    rng = np.random.default_rng(spec.seed)
    c, d, spc = spec.n_classes, spec.feature_dim, spec.samples_per_class
    class_ids = tuple(f"class{i:03d}" for i in range(c))
    seen_ids = class_ids[: spec.n_seen]
    unseen_ids = class_ids[spec.n_seen:]

    means, basis = _draw_means(rng, spec)
    shared = rng.standard_normal(d)
    if basis is not None:
        # keep the removable component clear of the class-mean subspace
        shared -= basis @ (basis.T @ shared)
    shared /= np.linalg.norm(shared)
    sem_noise = rng.standard_normal((c, d))

    raw_sem = (
        spec.shared_strength * shared
        + (1.0 - spec.shared_strength) * means
        + spec.semantic_noise * sem_noise
    )
    semantics = semantic_matrix(class_ids, raw_sem)

    per_class = {}
    for i in range(c):
        draws = means[i] + spec.sigma * rng.standard_normal((2 * spc, d))
        per_class[class_ids[i]] = _quantize(draws)

    def stack(ids, lo, hi):
        feats = np.vstack([per_class[cid][lo:hi] for cid in ids])
        labels = np.concatenate(
            [np.full(hi - lo, class_ids.index(cid), dtype=np.int64) for cid in ids]
        )
        return Partition(features=feats, labels=labels)

    splits = DatasetSplits(
        class_ids=class_ids,
        seen_class_ids=seen_ids,
        unseen_class_ids=unseen_ids,
        seen_train=stack(seen_ids, 0, spc),
        seen_test=stack(seen_ids, spc, 2 * spc),
        unseen_test=stack(unseen_ids, 0, spc),
    )
    oracle = SyntheticOracle(
        class_ids=class_ids,
        means=means,
        shared_direction=shared,
        unseen_train=stack(unseen_ids, spc, 2 * spc),
        nearest_mean_unseen_acc=_nearest_mean_accuracy(
            splits.unseen_test, means, class_ids, unseen_ids
        ),
    )
    return splits, semantics, oracle


def _nearest_mean_accuracy(partition: Partition, means, class_ids, candidate_ids):
    """Per-class accuracy of a nearest-class-mean rule over candidate classes."""
    cand_rows = [class_ids.index(cid) for cid in candidate_ids]
    cand_means = means[cand_rows]
    d2 = ((partition.features[:, None, :] - cand_means[None, :, :]) ** 2).sum(axis=2)
    pred = np.asarray(cand_rows)[np.argmin(d2, axis=1)]
    accs = []
    for row in np.unique(partition.labels):
        mask = partition.labels == row
        accs.append(float(np.mean(pred[mask] == row)))
    return float(np.mean(accs))
