"""Class-semantic machinery: diversity promotion, referent selection, mixup.

Class semantic vectors arrive as unit-norm rows of a (C, d) matrix.  The
dominant shared direction of that matrix is removed by projecting onto the
remaining singular directions, which makes the rows nearly orthogonal while
preserving their relative geometry.  Refined vectors then drive cosine-based
referent ranking and sample mixup.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DataError,
    DegenerateSpanError,
    ParameterError,
    ValidationError,
    ZeroVectorError,
)
from .nnkernel import as_matrix, symmetric_eigen

NORM_TOL = 1e-9
COLLAPSE_TOL = 1e-12


@dataclass
class ClassSemanticMatrix:
    """Per-class embedding vectors, raw (unit rows) and optionally refined."""

    class_ids: tuple
    vectors: np.ndarray
    refined: np.ndarray | None = None

    def __post_init__(self):
        self.class_ids = tuple(str(c) for c in self.class_ids)
        if len(set(self.class_ids)) != len(self.class_ids):
            raise ValidationError("duplicate class ids in semantic matrix")
        self.vectors = as_matrix(self.vectors, "semantic vectors")
        if self.vectors.shape[0] != len(self.class_ids):
            raise ValidationError(
                f"{len(self.class_ids)} class ids but {self.vectors.shape[0]} vector rows"
            )
        norms = np.linalg.norm(self.vectors, axis=1)
        if np.any(np.abs(norms - 1.0) > NORM_TOL):
            raise ValidationError("raw semantic vectors must be L2-normalized")
        self._row_of = {c: i for i, c in enumerate(self.class_ids)}

    @property
    def dim(self):
        return self.vectors.shape[1]

    def row(self, class_id):
        return self._row_of[str(class_id)]

    def vector(self, class_id, refined=True):
        """A single class vector; refined when available unless refined=False."""
        mat = self.refined if (refined and self.refined is not None) else self.vectors
        return mat[self.row(class_id)]

    def active_matrix(self, refined=True):
        return self.refined if (refined and self.refined is not None) else self.vectors


def normalize_rows(vectors):
    """Unit-normalize rows, raising on any (near-)zero row."""
    vectors = as_matrix(vectors, "vectors")
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms < COLLAPSE_TOL):
        raise ZeroVectorError("cannot normalize a zero row")
    return vectors / norms[:, None]


def semantic_matrix(class_ids, vectors):
    """Build a ClassSemanticMatrix, normalizing raw rows on the way in."""
    return ClassSemanticMatrix(class_ids=tuple(class_ids), vectors=normalize_rows(vectors))


@dataclass
class CdpProjector:
    """Projection that removes the dominant shared direction(s).

    projection_matrix is symmetric and idempotent; removed_components holds the
    dropped orthonormal directions (first row is the major component e1).
    """

    removed_components: np.ndarray
    projection_matrix: np.ndarray
    retained_rank: int

    @property
    def removed_component(self):
        return self.removed_components[0]


def _singular_directions(z):
    """Feature-space singular directions of the stacked class vectors.

    Eigendecomposes whichever Gram matrix is smaller (Z Z^T at C x C, or
    Z^T Z at d x d) and maps eigenvectors back to feature space, so the
    Jacobi solver never sees a matrix larger than min(C, d).
    Returns (squared singular values descending, directions as columns).
    """
    n_classes, dim = z.shape
    if n_classes <= dim:
        eigvals, eigvecs = symmetric_eigen(z @ z.T)
        positive = eigvals > 0
        scale = np.sqrt(np.where(positive, eigvals, 1.0))
        directions = (z.T @ eigvecs) / scale
        directions[:, ~positive] = 0.0
    else:
        eigvals, directions = symmetric_eigen(z.T @ z)
    for j in range(directions.shape[1]):
        col = directions[:, j]
        k = int(np.argmax(np.abs(col)))
        if col[k] < 0.0:
            directions[:, j] = -col
    return eigvals, directions


def cdp_refine(semantics: ClassSemanticMatrix, n_remove=1, renormalize=True):
    """Remove the top singular direction(s) of the class-semantic span.

    The n_remove leading singular directions are dropped and the remaining
    in-span directions form the projector P; refined rows are P applied to
    the raw rows, re-normalized to unit length unless a row collapses to
    near zero.

    Returns (CdpProjector, ClassSemanticMatrix with `refined` filled in).
    Raises DegenerateSpanError when the span has rank < n_remove + 1.
    """
    z = semantics.vectors
    n_classes, dim = z.shape
    if n_classes < 2:
        raise DegenerateSpanError("need at least 2 classes to promote diversity")
    if n_remove < 1:
        raise ParameterError(f"n_remove must be >= 1, got {n_remove}")

    eigvals, eigvecs = _singular_directions(z)
    # numerical rank of Z from the squared singular values
    tol = eigvals[0] * max(n_classes, dim) * np.finfo(np.float64).eps
    rank = int(np.sum(eigvals > tol))
    if rank < n_remove + 1:
        raise DegenerateSpanError(
            f"semantic span has rank {rank}; cannot remove {n_remove} component(s)"
        )

    removed = eigvecs[:, :n_remove].T.copy()
    kept = eigvecs[:, n_remove:rank]
    projection = kept @ kept.T

    refined = z @ projection.T
    if renormalize:
        norms = np.linalg.norm(refined, axis=1)
        safe = norms > COLLAPSE_TOL
        refined[safe] /= norms[safe, None]

    projector = CdpProjector(
        removed_components=removed,
        projection_matrix=projection,
        retained_rank=rank - n_remove,
    )
    return projector, replace(semantics, refined=refined)


def cosine_similarity(a, b):
    """Cosine of the angle between two nonzero vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na < COLLAPSE_TOL or nb < COLLAPSE_TOL:
        raise ZeroVectorError("cosine similarity is undefined for zero vectors")
    return float(a @ b / (na * nb))


@dataclass(frozen=True)
class ReferentIndex:
    """Per target class: the k most similar seen classes, ranked.

    referents maps target class id to a tuple of (seen class id, similarity)
    pairs sorted by descending similarity, ties broken by ascending class id.
    """

    referents: dict
    k: int

    def classes(self, target_id):
        return tuple(c for c, _ in self.referents[str(target_id)])


def build_referent_index(semantics, target_ids, seen_ids, k, exclude_self=True):
    """Rank the top-k seen classes for each target by refined-vector cosine.

    A seen target never ranks itself when exclude_self is set (the default).
    k must not exceed the number of eligible seen classes for any target.
    """
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    seen_ids = [str(c) for c in seen_ids]
    unit = normalize_rows(semantics.active_matrix())
    seen_unit = unit[[semantics.row(c) for c in seen_ids]]
    referents = {}
    for target in (str(t) for t in target_ids):
        # row-wise reduction (not BLAS gemv): duplicated vectors must yield
        # bit-identical similarities so id tie-breaking is well defined
        sims = (seen_unit * unit[semantics.row(target)]).sum(axis=1)
        scored = [
            (float(s), c)
            for s, c in zip(sims, seen_ids)
            if not (exclude_self and c == target)
        ]
        if k > len(scored):
            raise ParameterError(
                f"k={k} exceeds {len(scored)} eligible seen classes for target {target!r}"
            )
        scored.sort(key=lambda sc: (-sc[0], sc[1]))
        referents[target] = tuple((c, s) for s, c in scored[:k])
    return ReferentIndex(referents=referents, k=k)


def mixup_referents(index: ReferentIndex, samples_by_class, target_id, rng,
                    top1_weight=0.8):
    """Fuse one top-1 referent sample with one from another referent class.

    Returns top1_weight * (random top-1 sample) + (1 - top1_weight) * (random
    sample of one uniformly chosen other referent class).  With k = 1 the raw
    top-1 sample is returned.  Draw order: top-1 sample index, other-class
    rank, other sample index.
    """
    ranked = index.classes(target_id)

    def pool(class_id):
        samples = samples_by_class.get(class_id)
        if samples is None or len(samples) == 0:
            raise DataError(f"no samples available for referent class {class_id!r}")
        return np.asarray(samples, dtype=np.float64)

    top1 = pool(ranked[0])
    x_top1 = top1[rng.integers(len(top1))]
    if len(ranked) == 1:
        return x_top1.copy()
    other_class = ranked[1 + rng.integers(len(ranked) - 1)]
    other = pool(other_class)
    x_other = other[rng.integers(len(other))]
    return top1_weight * x_top1 + (1.0 - top1_weight) * x_other


@dataclass(frozen=True)
class SimilarityReport:
    """Full pairwise cosine matrix plus its mean off-diagonal |cos|."""

    class_ids: tuple
    matrix: np.ndarray
    mean_offdiag_abs: float


def similarity_report(vectors, class_ids=None):
    """Pairwise cosine matrix of the rows of `vectors` (C >= 2)."""
    vectors = as_matrix(vectors, "vectors")
    n = vectors.shape[0]
    if n < 2:
        raise ValidationError("similarity report needs at least 2 classes")
    if class_ids is None:
        class_ids = tuple(str(i) for i in range(n))
    unit = normalize_rows(vectors)
    matrix = unit @ unit.T
    off = ~np.eye(n, dtype=bool)
    return SimilarityReport(
        class_ids=tuple(str(c) for c in class_ids),
        matrix=matrix,
        mean_offdiag_abs=float(np.abs(matrix[off]).mean()),
    )


def write_similarity_csv(report: SimilarityReport, path):
    """C x C cosine matrix as CSV with a header row of class ids."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(report.class_ids)
        for row in report.matrix:
            writer.writerow([repr(float(v)) for v in row])


def write_similarity_summary(before: SimilarityReport, after: SimilarityReport, path):
    payload = {
        "mean_offdiag_before": before.mean_offdiag_abs,
        "mean_offdiag_after": after.mean_offdiag_abs,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return payload
