"""Command-line pipeline: semantics refinement, runs, and hyper-parameter sweeps.

Configuration precedence is built-in defaults < profile < config file <
command-line flags.  The config file is a flat ``key = value`` text format
(a TOML-compatible subset: quoted or bare strings, ints, floats, booleans,
``#`` comments).  Every effective parameter is echoed into the run manifest
so a run can be reproduced from the manifest alone.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, fields, replace

from . import __version__
from .dataset import (
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    normalize_splits,
    samples_by_class,
    write_semantics_file,
)
from .errors import ConfigError, IndzslError
from .evalharness import (
    ClassifierConfig,
    assemble_training_set,
    evaluate,
    train_classifier,
    write_report,
)
from .ivae import (
    TrainingConfig,
    save_checkpoint,
    synthesize,
    train,
    write_loss_history,
    write_synthesized,
)
from .semantics import (
    build_referent_index,
    cdp_refine,
    similarity_report,
    write_similarity_csv,
    write_similarity_summary,
)

THREADS_ENV = "INDZSL_THREADS"

# per-dataset presets; toy additionally shrinks the problem to desk scale
PROFILES = {
    "cub": {"boost_weight": 0.1, "top_k": 2, "n_syn": 1600, "feature_dim": 512},
    "sun": {"boost_weight": 0.001, "top_k": 2, "n_syn": 800, "feature_dim": 512},
    "awa2": {"boost_weight": 0.1, "top_k": 2, "n_syn": 5000, "feature_dim": 512},
    "toy": {
        "boost_weight": 0.5,
        "top_k": 2,
        "n_syn": 200,
        "feature_dim": 32,
        "latent_dim": 32,
        "hidden1": 64,
        "hidden2": 128,
        "epochs": 30,
        "learning_rate": 1e-3,
        "clf_epochs": 30,
        "syn_semantic_noise": 0.005,
        "syn_mean_rank": 5,
        "syn_min_separation": 0.8,
        "seed": 7,
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Every knob of a pipeline run; all fields have defaults."""

    profile: str = "toy"
    mode: str = "both"
    outdir: str = "runs/out"
    seed: int = 0
    # dataset files; when features is unset the synthetic generator is used
    features: str = ""
    semantics: str = ""
    splits: str = ""
    # synthetic generator
    syn_classes: int = 10
    syn_seen: int = 6
    syn_samples_per_class: int = 100
    syn_sigma: float = 0.1
    syn_semantic_noise: float = 0.05
    syn_shared_strength: float = 0.8
    syn_mean_rank: int = 0
    syn_min_separation: float = 0.0
    # semantics refinement
    n_remove: int = 1
    # IVAE training
    feature_dim: int = 512
    latent_dim: int = 512
    hidden1: int = 1024
    hidden2: int = 2048
    boost_weight: float = 0.1
    temperature: float = 0.07
    top_k: int = 2
    learning_rate: float = 1e-4
    batch_size: int = 64
    epochs: int = 100
    normalize_features: bool = False
    boost_candidates: str = "all_seen"
    # synthesis and classifier
    n_syn: int = 1600
    clf_learning_rate: float = 1e-3
    clf_epochs: int = 50
    clf_batch_size: int = 128
    clf_balance: bool = False

    def __post_init__(self):
        if self.mode not in ("czsl", "gzsl", "both"):
            raise ConfigError(f"mode must be czsl, gzsl or both, not {self.mode!r}")
        if self.profile not in PROFILES:
            raise ConfigError(f"unknown profile {self.profile!r}")

    def modes(self):
        return ("czsl", "gzsl") if self.mode == "both" else (self.mode,)

    def training_config(self, feature_dim=None):
        return TrainingConfig(
            feature_dim=feature_dim or self.feature_dim,
            latent_dim=self.latent_dim,
            hidden_dims=(self.hidden1, self.hidden2),
            boost_weight=self.boost_weight,
            temperature=self.temperature,
            top_k=self.top_k,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seed=self.seed,
            normalize_features=self.normalize_features,
            boost_candidates=self.boost_candidates,
        )

    def classifier_config(self):
        return ClassifierConfig(
            learning_rate=self.clf_learning_rate,
            epochs=self.clf_epochs,
            batch_size=self.clf_batch_size,
            seed=self.seed,
            balance_classes=self.clf_balance,
        )

    def synthetic_spec(self):
        return SyntheticSpec(
            n_classes=self.syn_classes,
            n_seen=self.syn_seen,
            n_unseen=self.syn_classes - self.syn_seen,
            feature_dim=self.feature_dim,
            samples_per_class=self.syn_samples_per_class,
            sigma=self.syn_sigma,
            semantic_noise=self.syn_semantic_noise,
            shared_strength=self.syn_shared_strength,
            seed=self.seed,
            mean_rank=self.syn_mean_rank,
            min_separation=self.syn_min_separation,
        )

    def config_hash(self):
        """Short digest of every semantic field (location and seed excluded)."""
        payload = asdict(self)
        payload.pop("outdir")
        payload.pop("seed")
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(raw, lineno, path):
    raw = raw.strip()
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1]
    if raw.startswith("'") and raw.endswith("'") and len(raw) >= 2:
        return raw[1:-1]
    if raw in ("true", "false"):
        return raw == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    if raw and all(ch not in raw for ch in "[]{}"):
        return raw
    raise ConfigError(f"{path}:{lineno}: cannot parse value {raw!r}")


def parse_config_file(path):
    """Flat key = value config; returns a dict of RunConfig field overrides."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, raw = line.partition("=")
            if not eq:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key = key.strip().replace("-", "_")
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _parse_value(raw, lineno, path)
    return values


def build_config(flag_values, config_path=None):
    """Merge defaults < profile < config file < flags into a RunConfig."""
    file_values = parse_config_file(config_path) if config_path else {}
    profile = flag_values.get("profile") or file_values.get("profile") or "toy"
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")
    merged = {"profile": profile}
    merged.update(PROFILES[profile])
    merged.update(file_values)
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    merged["profile"] = profile
    try:
        return RunConfig(**merged)
    except TypeError as exc:
        raise ConfigError(f"bad configuration: {exc}")


def worker_threads():
    raw = os.environ.get(THREADS_ENV, "")
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    return max(1, n)


# ---------------------------------------------------------------------------
# pipeline stages


class _Stages:
    """Stage runner that records wall-clock timings and names failures."""

    def __init__(self):
        self.timings = {}

    def run(self, name, fn):
        start = time.perf_counter()
        try:
            result = fn()
        except (IndzslError, OSError) as exc:
            raise IndzslError(f"stage {name!r} failed: {exc}") from exc
        self.timings[name] = time.perf_counter() - start
        return result


def _acquire_data(config: RunConfig):
    """Load the three dataset files, or generate the synthetic dataset."""
    if config.features:
        if not (config.semantics and config.splits):
            raise ConfigError("--features requires --semantics and --splits")
        splits, semantics = load_dataset(
            config.features, config.semantics, config.splits,
            normalize_features=config.normalize_features,
        )
        return splits, semantics, None
    splits, semantics, oracle = generate_synthetic(config.synthetic_spec())
    if config.normalize_features:
        splits = normalize_splits(splits)
    return splits, semantics, oracle


def _write_manifest(outdir, config: RunConfig, timings, artifacts):
    manifest = {
        "artifacts": sorted(artifacts),
        "config": asdict(config),
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "timings_sec": {k: round(v, 6) for k, v in timings.items()},
        "version": f"indzsl {__version__}",
    }
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def cmd_refine_semantics(config: RunConfig):
    """Write before/after similarity reports and the refined semantic matrix."""
    os.makedirs(config.outdir, exist_ok=True)
    stages = _Stages()

    def load_semantics():
        if config.semantics and not config.features:
            from .dataset import read_semantics_file

            return read_semantics_file(config.semantics)
        return _acquire_data(config)[1]

    semantics = stages.run("load", load_semantics)
    projector, refined = stages.run(
        "refine", lambda: cdp_refine(semantics, n_remove=config.n_remove)
    )

    def emit():
        before = similarity_report(refined.vectors, refined.class_ids)
        after = similarity_report(refined.refined, refined.class_ids)
        paths = {
            "similarity_before.csv": lambda p: write_similarity_csv(before, p),
            "similarity_after.csv": lambda p: write_similarity_csv(after, p),
        }
        for name, writer in paths.items():
            writer(os.path.join(config.outdir, name))
        write_similarity_summary(
            before, after, os.path.join(config.outdir, "similarity_summary.json")
        )
        write_semantics_file(
            os.path.join(config.outdir, "refined_semantics.bin"),
            refined.class_ids, refined.refined,
        )
        return before, after

    before, after = stages.run("emit", emit)
    artifacts = ["similarity_before.csv", "similarity_after.csv",
                 "similarity_summary.json", "refined_semantics.bin", "manifest.json"]
    _write_manifest(config.outdir, config, stages.timings, artifacts)
    print(f"mean off-diagonal |cos|: {before.mean_offdiag_abs:.6f} -> "
          f"{after.mean_offdiag_abs:.6f}")
    return {"before": before, "after": after, "projector": projector}


def cmd_run(config: RunConfig):
    """Full pipeline: refine -> index -> train -> synthesize -> classify -> evaluate."""
    os.makedirs(config.outdir, exist_ok=True)
    stages = _Stages()
    threads = worker_threads()

    splits, semantics, _ = stages.run("load", lambda: _acquire_data(config))
    projector_and_refined = stages.run(
        "refine", lambda: cdp_refine(semantics, n_remove=config.n_remove)
    )
    semantics = projector_and_refined[1]

    def emit_similarity():
        before = similarity_report(semantics.vectors, semantics.class_ids)
        after = similarity_report(semantics.refined, semantics.class_ids)
        write_similarity_csv(before, os.path.join(config.outdir, "similarity_before.csv"))
        write_similarity_csv(after, os.path.join(config.outdir, "similarity_after.csv"))
        write_similarity_summary(
            before, after, os.path.join(config.outdir, "similarity_summary.json")
        )

    stages.run("similarity", emit_similarity)

    index = stages.run(
        "index",
        lambda: build_referent_index(
            semantics, semantics.class_ids, splits.seen_class_ids, config.top_k
        ),
    )

    train_cfg = config.training_config(feature_dim=splits.feature_dim)
    params, history = stages.run(
        "train", lambda: train(splits, semantics, index, train_cfg)
    )

    def persist_training():
        write_loss_history(os.path.join(config.outdir, "losses.csv"), history)
        save_checkpoint(os.path.join(config.outdir, "checkpoint.bin"), params,
                        train_cfg)

    stages.run("checkpoint", persist_training)

    seen_pools = samples_by_class(splits, splits.seen_train)
    synth = stages.run(
        "synthesize",
        lambda: synthesize(params, splits.unseen_class_ids, index, semantics,
                           seen_pools, config.n_syn, config.seed, threads=threads),
    )
    stages.run(
        "persist-synthesized",
        lambda: write_synthesized(os.path.join(config.outdir, "synthesized.bin"),
                                  synth),
    )

    def classify_and_evaluate():
        reports = {}
        for mode in config.modes():
            feats, labels, class_ids = assemble_training_set(
                splits, synth, mode, normalize=config.normalize_features
            )
            clf = train_classifier(feats, labels, class_ids,
                                   config.classifier_config(), mode=mode)
            reports[mode] = evaluate(clf, splits, mode, synthesized=synth,
                                     normalize=config.normalize_features)
        return reports

    reports = stages.run("evaluate", classify_and_evaluate)
    stages.run(
        "report",
        lambda: write_report(os.path.join(config.outdir, "report.json"), reports),
    )

    artifacts = ["manifest.json", "checkpoint.bin", "synthesized.bin", "report.json",
                 "losses.csv", "similarity_before.csv", "similarity_after.csv",
                 "similarity_summary.json"]
    _write_manifest(config.outdir, config, stages.timings, artifacts)

    for mode, rep in sorted(reports.items()):
        if mode == "czsl":
            print(f"czsl acc {100 * rep.metrics['acc']:.1f}")
        else:
            print(f"gzsl U {100 * rep.metrics['u']:.1f} S {100 * rep.metrics['s']:.1f} "
                  f"H {100 * rep.metrics['h']:.1f}")
    return reports


def _grid_points(config: RunConfig, lambdas, top_ks, n_syns):
    lam_values = lambdas if lambdas else [config.boost_weight]
    k_values = top_ks if top_ks else [config.top_k]
    n_values = n_syns if n_syns else [config.n_syn]
    points = []
    for lam in lam_values:
        for k in k_values:
            for n in n_values:
                points.append({"boost_weight": lam, "top_k": k, "n_syn": n})
    return points


def cmd_sweep(config: RunConfig, lambdas=None, top_ks=None, n_syns=None):
    """One pipeline run per grid point; failures are recorded and skipped."""
    points = _grid_points(config, lambdas, top_ks, n_syns)
    if not points:
        raise ConfigError("sweep grid is empty")
    os.makedirs(config.outdir, exist_ok=True)

    runs = []
    for i, point in enumerate(points):
        tag = "_".join(f"{k}={v}" for k, v in sorted(point.items()))
        sub = replace(config, outdir=os.path.join(config.outdir, f"run{i:03d}_{tag}"),
                      **point)
        runs.append((f"run{i:03d}_{tag}", sub))

    def one(run):
        name, sub = run
        try:
            reports = cmd_run(sub)
            return name, sub, reports, None
        except Exception as exc:  # keep sweeping past individual failures
            return name, sub, None, str(exc)

    threads = worker_threads()
    if threads > 1 and len(runs) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, runs))
    else:
        results = [one(run) for run in runs]

    lines = ["run\tmode\tacc_or_u\ts\th\tseed\tconfig_hash"]
    for name, sub, reports, error in results:
        if error is not None:
            lines.append(f"{name}\terror\t{error}\t\t\t{sub.seed}\t{sub.config_hash()}")
            continue
        for mode, rep in sorted(reports.items()):
            lines.append(f"{name}\t{rep.tsv_row(sub.seed, sub.config_hash())}")
    table = "\n".join(lines) + "\n"
    with open(os.path.join(config.outdir, "sweep.tsv"), "w") as fh:
        fh.write(table)
    print(table, end="")
    return results


# ---------------------------------------------------------------------------
# argument parsing


def _float_list(raw):
    return [float(v) for v in raw.split(",") if v.strip()]


def _int_list(raw):
    return [int(v) for v in raw.split(",") if v.strip()]


def _add_common_flags(p):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--profile", choices=sorted(PROFILES))
    p.add_argument("--seed", type=int)
    p.add_argument("--lambda", dest="boost_weight", type=float,
                   help="weight of the boosting loss")
    p.add_argument("--top-k", dest="top_k", type=int)
    p.add_argument("--n-syn", dest="n_syn", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", dest="learning_rate", type=float)
    p.add_argument("--latent-dim", dest="latent_dim", type=int)
    p.add_argument("--normalize-features", dest="normalize_features",
                   action="store_const", const=True)
    p.add_argument("--outdir")
    p.add_argument("--mode", choices=["czsl", "gzsl", "both"])
    p.add_argument("--features", help="feature file (omit to use synthetic data)")
    p.add_argument("--semantics", help="semantics file")
    p.add_argument("--splits", help="split file")


def make_parser():
    parser = argparse.ArgumentParser(
        prog="indzsl",
        description="Inductive-VAE zero-shot learning pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_refine = sub.add_parser("refine-semantics",
                              help="emit similarity reports and refined semantics")
    _add_common_flags(p_refine)

    p_run = sub.add_parser("run", help="full train/synthesize/evaluate pipeline")
    _add_common_flags(p_run)

    p_sweep = sub.add_parser("sweep", help="grid of pipeline runs")
    _add_common_flags(p_sweep)
    p_sweep.add_argument("--sweep-lambda", type=_float_list,
                         help="comma-separated boosting-loss weights")
    p_sweep.add_argument("--sweep-top-k", type=_int_list,
                         help="comma-separated referent counts")
    p_sweep.add_argument("--sweep-n-syn", type=_int_list,
                         help="comma-separated synthesized-sample counts")
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    flag_values = {
        k: v for k, v in vars(args).items()
        if k in _FIELD_TYPES and v is not None
    }
    try:
        config = build_config(flag_values, config_path=args.config)
        if args.command == "refine-semantics":
            cmd_refine_semantics(config)
        elif args.command == "run":
            cmd_run(config)
        else:
            cmd_sweep(config, lambdas=args.sweep_lambda, top_ks=args.sweep_top_k,
                      n_syns=args.sweep_n_syn)
    except IndzslError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
