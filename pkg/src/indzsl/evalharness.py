"""Softmax classifier training and CZSL/GZSL metric computation.

The conventional setting trains on synthesized unseen features only and
scores top-1 accuracy over the unseen label space; the generalized setting
trains on real seen-train features plus synthesized unseen features and
scores per-class accuracy separately on seen and unseen test sets, reported
with their harmonic mean.  Per-class accuracies are averaged over classes,
never over samples, so class imbalance does not move the metric.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dataset import DatasetSplits
from .errors import ConfigError, DataError, EvaluationError, ValidationError
from .ivae import SynthesizedSet
from .nnkernel import AdamState, adam_step, as_matrix

MODES = ("czsl", "gzsl")


@dataclass(frozen=True)
class ClassifierConfig:
    learning_rate: float = 1e-3
    epochs: int = 50
    batch_size: int = 128
    seed: int = 0
    balance_classes: bool = False


@dataclass
class Classifier:
    """Linear softmax classifier over an explicit class-id ordering."""

    class_ids: tuple
    weight: np.ndarray
    bias: np.ndarray
    mode: str = "czsl"

    def logits(self, features):
        features = as_matrix(features, "features")
        return features @ self.weight.T + self.bias

    def predict(self, features):
        """Predicted class ids, one per row."""
        rows = np.argmax(self.logits(features), axis=1)
        return [self.class_ids[r] for r in rows]


def _softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def train_classifier(features, label_ids, class_ids, config: ClassifierConfig,
                     mode="czsl") -> Classifier:
    """Multinomial logistic regression trained by Adam on cross-entropy.

    Deterministic for a fixed config.seed.  Raises DataError if any class in
    class_ids has zero training samples.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    features = as_matrix(features, "features")
    class_ids = tuple(str(c) for c in class_ids)
    index = {c: i for i, c in enumerate(class_ids)}
    try:
        labels = np.array([index[str(c)] for c in label_ids], dtype=np.int64)
    except KeyError as exc:
        raise DataError(f"label {exc.args[0]!r} not among classifier classes")
    counts = np.bincount(labels, minlength=len(class_ids))
    empty = [class_ids[i] for i in np.flatnonzero(counts == 0)]
    if empty:
        raise DataError(f"classes with zero training samples: {empty}")

    rng = np.random.default_rng(config.seed)
    n, d = features.shape
    k = len(class_ids)
    bound = 1.0 / np.sqrt(d)
    weight = rng.uniform(-bound, bound, size=(k, d))
    bias = np.zeros(k)
    params = {"weight": weight, "bias": bias}
    adam = AdamState(learning_rate=config.learning_rate)

    sample_weight = np.ones(n)
    if config.balance_classes:
        sample_weight = (n / (k * counts))[labels]

    for _ in range(config.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            x, y, w = features[idx], labels[idx], sample_weight[idx]
            probs = _softmax(x @ weight.T + bias)
            probs[np.arange(len(idx)), y] -= 1.0
            probs *= w[:, None] / len(idx)
            grads = {"weight": probs.T @ x, "bias": probs.sum(axis=0)}
            adam_step(adam, params, grads)
    return Classifier(class_ids=class_ids, weight=weight, bias=bias, mode=mode)


def per_class_top1(classifier: Classifier, features, label_ids):
    """Accuracy per class, then the unweighted mean over classes present.

    Returns (per_class dict, mean).  Raises EvaluationError for labels
    outside the classifier's class set.
    """
    label_ids = [str(c) for c in label_ids]
    known = set(classifier.class_ids)
    outside = sorted(set(label_ids) - known)
    if outside:
        raise EvaluationError(f"labels outside classifier class set: {outside}")
    preds = classifier.predict(features)
    correct, totals = {}, {}
    for pred, true in zip(preds, label_ids):
        totals[true] = totals.get(true, 0) + 1
        correct[true] = correct.get(true, 0) + (pred == true)
    per_class = {c: correct[c] / totals[c] for c in sorted(totals)}
    mean = float(np.mean(list(per_class.values())))
    return per_class, mean


def harmonic_mean(u, s):
    """H = 2*S*U / (S + U); zero by convention when both are zero."""
    if u < 0 or s < 0:
        raise ValidationError("accuracies must be non-negative")
    if u + s == 0:
        return 0.0
    return float(2.0 * s * u / (s + u))


@dataclass(frozen=True)
class EvalReport:
    """Metrics of one evaluation: CZSL acc, or GZSL U/S/H, plus breakdowns."""

    mode: str
    metrics: dict
    per_class: dict
    counts: dict
    synthesized_per_class: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        for v in self.metrics.values():
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"accuracy {v} outside [0, 1]")

    def to_json_dict(self):
        d = {
            "mode": self.mode,
            "metrics": dict(self.metrics),
            "per_class": dict(self.per_class),
            "counts": dict(self.counts),
        }
        if self.synthesized_per_class is not None:
            d["synthesized_per_class"] = self.synthesized_per_class
        return d

    @classmethod
    def from_json_dict(cls, d):
        return cls(
            mode=d["mode"],
            metrics=dict(d["metrics"]),
            per_class=dict(d["per_class"]),
            counts=dict(d["counts"]),
            synthesized_per_class=d.get("synthesized_per_class"),
        )

    def tsv_row(self, seed, config_hash):
        """mode, acc|U, S, H, seed, config hash — raw fractions."""
        if self.mode == "czsl":
            cells = [self.mode, repr(self.metrics["acc"]), "", ""]
        else:
            cells = [self.mode, repr(self.metrics["u"]), repr(self.metrics["s"]),
                     repr(self.metrics["h"])]
        return "\t".join(cells + [str(seed), config_hash])


def write_report(path, reports):
    """Serialize one report or a mode-keyed collection as deterministic JSON."""
    if isinstance(reports, EvalReport):
        reports = {reports.mode: reports}
    payload = {mode: rep.to_json_dict() for mode, rep in sorted(reports.items())}
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_report(path):
    with open(path) as fh:
        payload = json.load(fh)
    return {mode: EvalReport.from_json_dict(d) for mode, d in payload.items()}


def assemble_training_set(splits: DatasetSplits, synth: SynthesizedSet, mode,
                          normalize=False):
    """(features, label_ids, class_ids) for classifier training in a mode.

    czsl: synthesized unseen features only, unseen label space.
    gzsl: real seen-train features + synthesized unseen, joint label space.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    syn_feats, syn_labels = synth.stacked()
    if mode == "czsl":
        features, labels = syn_feats, syn_labels
        class_ids = tuple(sorted(splits.unseen_class_ids))
    else:
        features = np.vstack([splits.seen_train.features, syn_feats])
        labels = splits.label_ids(splits.seen_train) + syn_labels
        class_ids = tuple(sorted(splits.class_ids))
    if normalize:
        from .semantics import normalize_rows

        features = normalize_rows(features)
    return features, labels, class_ids


def evaluate(classifier: Classifier, splits: DatasetSplits, mode,
             synthesized: SynthesizedSet | None = None,
             normalize=False) -> EvalReport:
    """Score a trained classifier on the real test partitions.

    CZSL restricts the label space to unseen classes and reports their mean
    per-class accuracy; GZSL scores unseen and seen test sets over the joint
    label space and adds the harmonic mean.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    if classifier.mode != mode:
        raise ConfigError(
            f"classifier was trained for {classifier.mode!r}, not {mode!r}"
        )
    expected = set(splits.unseen_class_ids) if mode == "czsl" else set(splits.class_ids)
    if set(classifier.class_ids) != expected:
        raise ConfigError("classifier class set does not match the evaluation mode")

    def prep(features):
        if normalize:
            from .semantics import normalize_rows

            return normalize_rows(features)
        return features

    unseen_feats = prep(splits.unseen_test.features)
    unseen_labels = splits.label_ids(splits.unseen_test)
    counts = {}
    for cid in unseen_labels:
        counts[cid] = counts.get(cid, 0) + 1

    if mode == "czsl":
        per_class, acc = per_class_top1(classifier, unseen_feats, unseen_labels)
        metrics = {"acc": acc}
    else:
        seen_feats = prep(splits.seen_test.features)
        seen_labels = splits.label_ids(splits.seen_test)
        for cid in seen_labels:
            counts[cid] = counts.get(cid, 0) + 1
        per_unseen, u = per_class_top1(classifier, unseen_feats, unseen_labels)
        per_seen, s = per_class_top1(classifier, seen_feats, seen_labels)
        per_class = {**per_unseen, **per_seen}
        metrics = {"u": u, "s": s, "h": harmonic_mean(u, s)}

    return EvalReport(
        mode=mode,
        metrics=metrics,
        per_class=per_class,
        counts=counts,
        synthesized_per_class=None if synthesized is None else synthesized.n_syn,
    )
