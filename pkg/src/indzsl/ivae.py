"""Inductive variational autoencoder: model, losses, training, synthesis.

The encoder maps a referent sample concatenated with the target class's
refined semantic vector to a latent Gaussian (mu, log-variance); the decoder
maps a reparameterized latent draw concatenated with the same semantic vector
back to feature space, where it is penalized against samples of the *target*
class rather than its own input.  A temperature-scaled cosine cross-entropy
term additionally pulls decoded features toward the target class semantics
and away from the other seen classes.

Gradients are computed analytically for this fixed graph (see nnkernel) and
are exercised against finite differences in the test suite.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .dataset import DatasetSplits, samples_by_class
from .errors import (
    DataError,
    NumericError,
    ParameterError,
    ShapeError,
    TrainingError,
    ValidationError,
    ZeroVectorError,
)
from .nnkernel import (
    AdamState,
    DenseLayer,
    adam_step,
    as_matrix,
    init_dense,
    mlp_backward,
    mlp_forward,
)
from .semantics import ClassSemanticMatrix, ReferentIndex, mixup_referents

CHECKPOINT_MAGIC = b"IZSLCKPT"
CHECKPOINT_VERSION = 1

_ZERO_TOL = 1e-12


@dataclass(frozen=True)
class TrainingConfig:
    """Hyper-parameters of IVAE training.

    boost_weight is the total-loss weight on the cosine cross-entropy term;
    temperature scales the cosine logits.  boost_candidates picks the
    normalization set of that term: every seen class ("all_seen", default)
    or only the classes present in the current batch ("batch").
    """

    feature_dim: int = 512
    latent_dim: int = 512
    hidden_dims: tuple = (1024, 2048)
    boost_weight: float = 0.1
    temperature: float = 0.07
    top_k: int = 2
    learning_rate: float = 1e-4
    batch_size: int = 64
    epochs: int = 100
    seed: int = 0
    normalize_features: bool = False
    boost_candidates: str = "all_seen"

    def __post_init__(self):
        if self.boost_weight < 0:
            raise ValidationError("boost_weight must be >= 0")
        if self.temperature <= 0:
            raise ValidationError("temperature must be > 0")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValidationError("batch_size >= 1 and epochs >= 0 required")
        if self.feature_dim < 1 or self.latent_dim < 1:
            raise ValidationError("feature_dim and latent_dim must be >= 1")
        if self.top_k < 1:
            raise ValidationError("top_k must be >= 1")
        if len(self.hidden_dims) != 2 or min(self.hidden_dims) < 1:
            raise ValidationError("hidden_dims must be two positive widths")
        if self.boost_candidates not in ("all_seen", "batch"):
            raise ValidationError("boost_candidates must be 'all_seen' or 'batch'")
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))

    def to_dict(self):
        d = asdict(self)
        d["hidden_dims"] = list(self.hidden_dims)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["hidden_dims"] = tuple(d.get("hidden_dims", (1024, 2048)))
        return cls(**d)


@dataclass
class IvaeParameters:
    """Weights of the inductive encoder (trunk + two heads) and decoder."""

    encoder_trunk: list
    mu_head: DenseLayer
    logvar_head: DenseLayer
    decoder: list
    feature_dim: int
    latent_dim: int

    def __post_init__(self):
        d, latent = self.feature_dim, self.latent_dim
        if self.encoder_trunk[0].in_dim != 2 * d:
            raise ShapeError("encoder trunk must take concat(x, z) of width 2*d")
        if self.mu_head.out_dim != latent or self.logvar_head.out_dim != latent:
            raise ShapeError("encoder heads must emit latent_dim values")
        if self.decoder[0].in_dim != latent + d or self.decoder[-1].out_dim != d:
            raise ShapeError("decoder must map latent_dim + d back to d")

    def named_parameters(self):
        """Deterministically ordered name -> array view of every tensor."""
        out = {}
        for i, layer in enumerate(self.encoder_trunk):
            out[f"ie.trunk{i}.weight"] = layer.weight
            out[f"ie.trunk{i}.bias"] = layer.bias
        out["ie.mu.weight"] = self.mu_head.weight
        out["ie.mu.bias"] = self.mu_head.bias
        out["ie.logvar.weight"] = self.logvar_head.weight
        out["ie.logvar.bias"] = self.logvar_head.bias
        for i, layer in enumerate(self.decoder):
            out[f"id.layer{i}.weight"] = layer.weight
            out[f"id.layer{i}.bias"] = layer.bias
        return out


def init_ivae(config: TrainingConfig, rng) -> IvaeParameters:
    """Seed-controlled uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization."""
    d, latent = config.feature_dim, config.latent_dim
    h1, h2 = config.hidden_dims
    trunk = [
        init_dense(rng, h1, 2 * d, "relu"),
        init_dense(rng, h2, h1, "relu"),
    ]
    mu_head = init_dense(rng, latent, h2, "identity")
    logvar_head = init_dense(rng, latent, h2, "identity")
    decoder = [
        init_dense(rng, h1, latent + d, "relu"),
        init_dense(rng, h2, h1, "relu"),
        init_dense(rng, d, h2, "identity"),
    ]
    return IvaeParameters(
        encoder_trunk=trunk,
        mu_head=mu_head,
        logvar_head=logvar_head,
        decoder=decoder,
        feature_dim=d,
        latent_dim=latent,
    )


@dataclass(frozen=True)
class LatentCode:
    """Encoder output batch: o = exp(log_var / 2) * eps + mu."""

    mu: np.ndarray
    log_var: np.ndarray
    eps: np.ndarray
    o: np.ndarray


def _concat(a, b):
    return np.concatenate([as_matrix(a, "features"), as_matrix(b, "semantics")], axis=1)


def encode(params: IvaeParameters, x_refer, z_target, rng=None, eps=None) -> LatentCode:
    """Encode referent samples conditioned on target semantics.

    eps overrides the reparameterization noise (useful for deterministic
    decoding via eps = 0); otherwise it is drawn standard-normal from rng.
    """
    enc_in = _concat(x_refer, z_target)
    h, _ = mlp_forward(params.encoder_trunk, enc_in)
    mu, _ = mlp_forward([params.mu_head], h)
    log_var, _ = mlp_forward([params.logvar_head], h)
    if eps is None:
        if rng is None:
            raise ParameterError("encode needs either rng or explicit eps")
        eps = rng.standard_normal(mu.shape)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != mu.shape:
        raise ShapeError(f"eps shape {eps.shape} != latent shape {mu.shape}")
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(log_var))):
        raise NumericError("encoder produced non-finite activations")
    o = np.exp(log_var / 2.0) * eps + mu
    return LatentCode(mu=mu, log_var=log_var, eps=eps, o=o)


def decode(params: IvaeParameters, o, z_target) -> np.ndarray:
    """Deterministic decoder output of dimension d."""
    x_hat, _ = mlp_forward(params.decoder, _concat(o, z_target))
    if not np.all(np.isfinite(x_hat)):
        raise NumericError("decoder produced non-finite output")
    return x_hat


# ---------------------------------------------------------------------------
# losses


def kl_loss(mu, log_var):
    """KL(N(mu, exp(log_var)) || N(0, 1)), summed over dims, averaged over batch."""
    mu = as_matrix(mu, "mu")
    log_var = as_matrix(log_var, "log_var")
    per_sample = 0.5 * np.sum(mu**2 + np.exp(log_var) - 1.0 - log_var, axis=1)
    return float(per_sample.mean())


def target_recon_loss(x_hat, x_target):
    """Mean squared error averaged over batch and dimensions."""
    x_hat = as_matrix(x_hat, "x_hat")
    x_target = as_matrix(x_target, "x_target")
    if x_hat.shape != x_target.shape:
        raise ShapeError(f"shape mismatch {x_hat.shape} vs {x_target.shape}")
    return float(np.mean((x_hat - x_target) ** 2))


def _boost_terms(x_hat, candidates, target_rows, temperature):
    x_hat = as_matrix(x_hat, "x_hat")
    candidates = as_matrix(candidates, "candidate semantics")
    target_rows = np.asarray(target_rows, dtype=np.int64)
    x_norm = np.linalg.norm(x_hat, axis=1, keepdims=True)
    if np.any(x_norm < _ZERO_TOL):
        raise ZeroVectorError("boost loss undefined for zero synthesized features")
    c_norm = np.linalg.norm(candidates, axis=1, keepdims=True)
    if np.any(c_norm < _ZERO_TOL):
        raise ZeroVectorError("boost loss undefined for zero candidate semantics")
    x_unit = x_hat / x_norm
    c_unit = candidates / c_norm
    sims = x_unit @ c_unit.T
    logits = sims / temperature
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1)) + logits.max(axis=1)
    losses = log_z - logits[np.arange(len(logits)), target_rows]
    return x_unit, c_unit, x_norm, sims, logits, log_z, losses, target_rows


def boost_loss(x_hat, candidates, target_rows, temperature=0.07):
    """Temperature-scaled cosine cross-entropy toward the target semantics.

    For each row of x_hat: -log softmax(cos(x_hat, candidates) / temperature)
    at that row's target candidate, averaged over the batch.  target_rows
    indexes each sample's class within `candidates`.
    """
    if temperature <= 0:
        raise ParameterError("temperature must be > 0")
    *_, losses, _ = _boost_terms(x_hat, candidates, target_rows, temperature)
    return float(losses.mean())


def _boost_loss_and_grad(x_hat, candidates, target_rows, temperature):
    """(mean loss, d mean-loss / d x_hat)."""
    x_unit, c_unit, x_norm, sims, logits, log_z, losses, rows = _boost_terms(
        x_hat, candidates, target_rows, temperature
    )
    n, _ = x_unit.shape
    probs = np.exp(logits - log_z[:, None])
    coef = probs.copy()
    coef[np.arange(n), rows] -= 1.0
    coef /= temperature
    # d cos(x, c_j)/dx = (c_unit_j - cos * x_unit) / ||x||
    dx = (coef @ c_unit - (coef * sims).sum(axis=1, keepdims=True) * x_unit) / x_norm
    return float(losses.mean()), dx / n


@dataclass(frozen=True)
class LossBreakdown:
    """Scalar loss components of one step or one epoch (positive penalties)."""

    kl: float
    target_recon: float
    boost: float
    total: float


def total_loss(kl, target_recon, boost, boost_weight):
    """Total objective: KL + target reconstruction + boost_weight * boost."""
    return float(kl + target_recon + boost_weight * boost)


def make_breakdown(kl, target_recon, boost, boost_weight):
    return LossBreakdown(
        kl=float(kl),
        target_recon=float(target_recon),
        boost=float(boost),
        total=total_loss(kl, target_recon, boost, boost_weight),
    )


# ---------------------------------------------------------------------------
# joint forward/backward over the full objective


def loss_and_grads(params: IvaeParameters, x_refer, z_target, x_target, eps,
                   candidates, target_rows, temperature, boost_weight):
    """Forward the full objective and return (LossBreakdown, gradient dict).

    eps is the frozen reparameterization noise for this batch, so the loss is
    a deterministic function of the parameters; gradients are exact for it.
    """
    x_refer = as_matrix(x_refer, "x_refer")
    z_target = as_matrix(z_target, "z_target")
    x_target = as_matrix(x_target, "x_target")
    eps = np.asarray(eps, dtype=np.float64)
    n = x_refer.shape[0]

    enc_in = _concat(x_refer, z_target)
    h, trunk_tape = mlp_forward(params.encoder_trunk, enc_in)
    mu, mu_tape = mlp_forward([params.mu_head], h)
    log_var, lv_tape = mlp_forward([params.logvar_head], h)
    std = np.exp(log_var / 2.0)
    o = std * eps + mu
    dec_in = np.concatenate([o, z_target], axis=1)
    x_hat, dec_tape = mlp_forward(params.decoder, dec_in)

    kl = kl_loss(mu, log_var)
    recon = target_recon_loss(x_hat, x_target)
    boost, d_xhat_boost = _boost_loss_and_grad(x_hat, candidates, target_rows, temperature)
    breakdown = make_breakdown(kl, recon, boost, boost_weight)

    d_xhat = 2.0 * (x_hat - x_target) / x_hat.size
    d_xhat += boost_weight * d_xhat_boost

    d_decin, dec_grads = mlp_backward(params.decoder, dec_tape, d_xhat)
    d_o = d_decin[:, : params.latent_dim]
    d_mu = d_o + mu / n
    d_logvar = d_o * eps * std * 0.5 + 0.5 * (np.exp(log_var) - 1.0) / n
    d_h_mu, mu_grads = mlp_backward([params.mu_head], mu_tape, d_mu)
    d_h_lv, lv_grads = mlp_backward([params.logvar_head], lv_tape, d_logvar)
    _, trunk_grads = mlp_backward(params.encoder_trunk, trunk_tape, d_h_mu + d_h_lv)

    grads = {}
    for i, (dw, db) in enumerate(trunk_grads):
        grads[f"ie.trunk{i}.weight"] = dw
        grads[f"ie.trunk{i}.bias"] = db
    grads["ie.mu.weight"], grads["ie.mu.bias"] = mu_grads[0]
    grads["ie.logvar.weight"], grads["ie.logvar.bias"] = lv_grads[0]
    for i, (dw, db) in enumerate(dec_grads):
        grads[f"id.layer{i}.weight"] = dw
        grads[f"id.layer{i}.bias"] = db
    return breakdown, grads


# ---------------------------------------------------------------------------
# training


def train(splits: DatasetSplits, semantics: ClassSemanticMatrix,
          index: ReferentIndex, config: TrainingConfig):
    """Train the IVAE on seen classes; returns (parameters, per-epoch history).

    Each epoch walks the seen classes in id order; for every class its
    training pool is shuffled and consumed in minibatches.  Every target
    sample is paired with an independently drawn mixup referent.  The run is
    bit-deterministic for a fixed seed.
    """
    if semantics.refined is None:
        raise TrainingError("train requires refined semantics (run cdp_refine first)")
    rng = np.random.default_rng(config.seed)
    params = init_ivae(config, rng)
    adam = AdamState(learning_rate=config.learning_rate)
    named = params.named_parameters()

    pools = samples_by_class(splits, splits.seen_train)
    seen = sorted(splits.seen_class_ids)
    for cid in seen:
        if cid not in pools:
            raise DataError(f"seen class {cid!r} has no training samples")
    cand_all = np.vstack([semantics.vector(c) for c in seen])
    row_of = {c: i for i, c in enumerate(seen)}

    history = []
    for epoch in range(config.epochs):
        sums = np.zeros(3)
        totals = 0.0
        steps = 0
        for target in seen:
            pool = pools[target]
            perm = rng.permutation(len(pool))
            z_vec = semantics.vector(target)
            for start in range(0, len(pool), config.batch_size):
                idx = perm[start : start + config.batch_size]
                x_target = pool[idx]
                x_refer = np.stack(
                    [mixup_referents(index, pools, target, rng) for _ in range(len(idx))]
                )
                z_target = np.tile(z_vec, (len(idx), 1))
                eps = rng.standard_normal((len(idx), config.latent_dim))
                if config.boost_candidates == "batch":
                    candidates = z_vec[None, :]
                    target_rows = np.zeros(len(idx), dtype=np.int64)
                else:
                    candidates = cand_all
                    target_rows = np.full(len(idx), row_of[target], dtype=np.int64)
                breakdown, grads = loss_and_grads(
                    params, x_refer, z_target, x_target, eps,
                    candidates, target_rows, config.temperature, config.boost_weight,
                )
                if not np.isfinite(breakdown.total):
                    raise TrainingError(
                        f"training diverged at epoch {epoch}, class {target!r}, "
                        f"batch starting at {start}"
                    )
                adam_step(adam, named, grads)
                sums += (breakdown.kl, breakdown.target_recon, breakdown.boost)
                totals += breakdown.total
                steps += 1
        history.append(
            LossBreakdown(
                kl=sums[0] / steps,
                target_recon=sums[1] / steps,
                boost=sums[2] / steps,
                total=totals / steps,
            )
        )
    return params, history


def write_loss_history(path, history):
    with open(path, "w") as fh:
        fh.write("epoch,kl,recon,boost,total\n")
        for i, h in enumerate(history):
            fh.write(f"{i},{h.kl!r},{h.target_recon!r},{h.boost!r},{h.total!r}\n")


# ---------------------------------------------------------------------------
# synthesis


@dataclass(frozen=True)
class SynthesizedSet:
    """Per unseen class: (n_syn, d) synthesized features plus provenance."""

    features: dict
    referents: dict
    n_syn: int
    seed: int

    def class_ids(self):
        return tuple(self.features.keys())

    def stacked(self):
        """(features, label_ids) with classes concatenated in id order."""
        ids = sorted(self.features)
        labels = [c for c in ids for _ in range(len(self.features[c]))]
        feats = np.vstack([self.features[c] for c in ids]) if ids else np.zeros((0, 0))
        return feats, labels


def _class_seed(seed, class_id):
    import zlib

    return int(seed) ^ zlib.crc32(str(class_id).encode("utf-8"))


def _synthesize_one(params, semantics, index, pools, class_id, n_syn, seed, latent_dim):
    rng = np.random.default_rng(_class_seed(seed, class_id))
    d = params.feature_dim
    if n_syn == 0:
        return np.zeros((0, d))
    x_refer = np.stack(
        [mixup_referents(index, pools, class_id, rng) for _ in range(n_syn)]
    )
    z_target = np.tile(semantics.vector(class_id), (n_syn, 1))
    eps = rng.standard_normal((n_syn, latent_dim))
    code = encode(params, x_refer, z_target, eps=eps)
    x_hat = decode(params, code.o, z_target)
    if not np.all(np.isfinite(x_hat)):
        raise NumericError(f"synthesis produced non-finite features for {class_id!r}")
    return x_hat


def synthesize(params: IvaeParameters, unseen_ids, index: ReferentIndex,
               semantics: ClassSemanticMatrix, seen_pools, n_syn, seed,
               threads=None) -> SynthesizedSet:
    """Synthesize n_syn features per unseen class from referent seen samples.

    Every class uses an rng seeded by seed XOR crc32(class_id), so results
    are identical no matter how classes are sharded across threads.
    """
    if n_syn < 0:
        raise ParameterError("n_syn must be >= 0")
    if semantics.refined is None:
        raise ParameterError("synthesize requires refined semantics")
    unseen_ids = [str(c) for c in unseen_ids]
    for cid in unseen_ids:
        if cid not in semantics.class_ids:
            raise ParameterError(f"unseen class {cid!r} missing from semantics")
        if cid not in index.referents:
            raise ParameterError(f"unseen class {cid!r} missing from referent index")

    def job(cid):
        return _synthesize_one(
            params, semantics, index, seen_pools, cid, n_syn, seed, params.latent_dim
        )

    if threads and threads > 1 and len(unseen_ids) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            results = dict(zip(unseen_ids, pool.map(job, unseen_ids)))
    else:
        results = {cid: job(cid) for cid in unseen_ids}

    features = {cid: results[cid] for cid in unseen_ids}
    referents = {cid: index.classes(cid) for cid in unseen_ids}
    return SynthesizedSet(features=features, referents=referents, n_syn=n_syn, seed=seed)


def write_synthesized(path, synth: SynthesizedSet):
    """Binary container for a SynthesizedSet; features stored as float32."""
    with open(path, "wb") as fh:
        fh.write(b"IZSLSYNT")
        fh.write(struct.pack("<IqII", CHECKPOINT_VERSION, synth.seed, synth.n_syn,
                             len(synth.features)))
        for cid in synth.features:
            raw = cid.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            refs = synth.referents[cid]
            fh.write(struct.pack("<H", len(refs)))
            for ref in refs:
                rraw = ref.encode("utf-8")
                fh.write(struct.pack("<H", len(rraw)))
                fh.write(rraw)
            feats = np.ascontiguousarray(synth.features[cid], dtype=np.float32)
            fh.write(struct.pack("<II", feats.shape[0], feats.shape[1]))
            fh.write(feats.tobytes())


def read_synthesized(path) -> SynthesizedSet:
    from .dataset import _open_read, _read_exact  # shared low-level readers

    with _open_read(path) as fh:
        magic = _read_exact(fh, 8, path, "magic")
        if magic != b"IZSLSYNT":
            raise ValidationError(f"{path}: bad magic {magic!r}")
        version, seed, n_syn, n_classes = struct.unpack(
            "<IqII", _read_exact(fh, 20, path, "header")
        )
        if version != CHECKPOINT_VERSION:
            raise ValidationError(f"{path}: unsupported version {version}")
        features, referents = {}, {}
        for _ in range(n_classes):
            (ln,) = struct.unpack("<H", _read_exact(fh, 2, path, "class id"))
            cid = _read_exact(fh, ln, path, "class id").decode("utf-8")
            (n_ref,) = struct.unpack("<H", _read_exact(fh, 2, path, "referents"))
            refs = []
            for _ in range(n_ref):
                (rl,) = struct.unpack("<H", _read_exact(fh, 2, path, "referents"))
                refs.append(_read_exact(fh, rl, path, "referents").decode("utf-8"))
            rows, cols = struct.unpack("<II", _read_exact(fh, 8, path, "feature shape"))
            feats = np.frombuffer(
                _read_exact(fh, 4 * rows * cols, path, "feature block"), dtype="<f4"
            ).reshape(rows, cols).astype(np.float64)
            features[cid] = feats
            referents[cid] = tuple(refs)
    return SynthesizedSet(features=features, referents=referents, n_syn=n_syn, seed=seed)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path, params: IvaeParameters, config: TrainingConfig):
    """Versioned binary checkpoint: canonical config JSON + float64 tensors."""
    blob = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":")).encode()
    named = params.named_parameters()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(named)))
        for name, tensor in named.items():
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", tensor.ndim))
            fh.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
            fh.write(np.ascontiguousarray(tensor, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Read a checkpoint back to (IvaeParameters, TrainingConfig)."""
    from .dataset import _open_read, _read_exact

    with _open_read(path) as fh:
        magic = _read_exact(fh, 8, path, "magic")
        if magic != CHECKPOINT_MAGIC:
            raise ValidationError(f"{path}: bad magic {magic!r}")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, path, "version"))
        if version != CHECKPOINT_VERSION:
            raise ValidationError(f"{path}: unsupported checkpoint version {version}")
        (blob_len,) = struct.unpack("<I", _read_exact(fh, 4, path, "config"))
        config = TrainingConfig.from_dict(
            json.loads(_read_exact(fh, blob_len, path, "config").decode("utf-8"))
        )
        (n_tensors,) = struct.unpack("<I", _read_exact(fh, 4, path, "tensor count"))
        tensors = {}
        for _ in range(n_tensors):
            (ln,) = struct.unpack("<H", _read_exact(fh, 2, path, "tensor name"))
            name = _read_exact(fh, ln, path, "tensor name").decode("utf-8")
            (ndim,) = struct.unpack("<B", _read_exact(fh, 1, path, "tensor rank"))
            shape = struct.unpack(f"<{ndim}I", _read_exact(fh, 4 * ndim, path, "shape"))
            count = int(np.prod(shape)) if ndim else 1
            tensors[name] = np.frombuffer(
                _read_exact(fh, 8 * count, path, "tensor data"), dtype="<f8"
            ).reshape(shape).copy()

    params = init_ivae(config, np.random.default_rng(0))
    named = params.named_parameters()
    if set(named) != set(tensors):
        raise ValidationError(f"{path}: tensor names do not match the architecture")
    for name, arr in named.items():
        if arr.shape != tensors[name].shape:
            raise ValidationError(f"{path}: tensor {name!r} has shape {tensors[name].shape}, "
                                  f"expected {arr.shape}")
        arr[...] = tensors[name]
    return params, config
