"""Dense numerical kernel: layers, reverse-mode gradients, Adam, Jacobi eigen.

Everything here works on plain float64 numpy arrays in row-major order.
Matrices are 2-D, batches are stacked along axis 0.  All public operations
are deterministic given their inputs; random initialization takes an
explicit Generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError, ValidationError

ACTIVATIONS = ("identity", "relu")


def as_matrix(x, name="matrix"):
    """Coerce to a C-contiguous float64 2-D array, rejecting non-finite data."""
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"{name}: expected 2-D array, got ndim={a.ndim}")
    require_finite(a, name)
    return a


def require_finite(a, name="array"):
    if not np.all(np.isfinite(a)):
        raise NumericError(f"{name}: contains non-finite values")
    return a


@dataclass
class DenseLayer:
    """Fully connected layer: y = activation(x @ weight.T + bias).

    weight has shape (out, in); bias has shape (out,).
    """

    weight: np.ndarray
    bias: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        self.weight = np.ascontiguousarray(self.weight, dtype=np.float64)
        self.bias = np.ascontiguousarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.ndim != 1:
            raise ShapeError("DenseLayer: weight must be 2-D, bias 1-D")
        if self.weight.shape[0] != self.bias.shape[0]:
            raise ShapeError(
                f"DenseLayer: weight out-dim {self.weight.shape[0]} != "
                f"bias dim {self.bias.shape[0]}"
            )
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self):
        return self.weight.shape[1]

    @property
    def out_dim(self):
        return self.weight.shape[0]


def init_dense(rng, out_dim, in_dim, activation="identity"):
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization for weight and bias."""
    bound = 1.0 / np.sqrt(in_dim)
    weight = rng.uniform(-bound, bound, size=(out_dim, in_dim))
    bias = rng.uniform(-bound, bound, size=out_dim)
    return DenseLayer(weight=weight, bias=bias, activation=activation)


def _apply_activation(pre, activation):
    if activation == "relu":
        return np.maximum(pre, 0.0)
    return pre


def _activation_grad(pre, activation):
    if activation == "relu":
        return (pre > 0.0).astype(np.float64)
    return np.ones_like(pre)


def dense_forward(layer: DenseLayer, x) -> np.ndarray:
    """Forward pass of a single layer on a (batch, in_dim) input."""
    x = as_matrix(x, "input")
    if x.shape[1] != layer.in_dim:
        raise ShapeError(
            f"dense_forward: input dim {x.shape[1]} != layer in-dim {layer.in_dim}"
        )
    pre = x @ layer.weight.T + layer.bias
    return _apply_activation(pre, layer.activation)


@dataclass
class LayerRecord:
    """Forward intermediates of one layer, enough for an exact backward pass."""

    x: np.ndarray
    pre: np.ndarray


@dataclass
class GradTape:
    """Per-layer intermediates of one MLP forward pass."""

    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)


def mlp_forward(layers, x):
    """Run an MLP, returning the output and a tape for mlp_backward."""
    tape = GradTape()
    out = as_matrix(x, "input")
    for layer in layers:
        if out.shape[1] != layer.in_dim:
            raise ShapeError(
                f"mlp_forward: got {out.shape[1]} features, layer expects {layer.in_dim}"
            )
        pre = out @ layer.weight.T + layer.bias
        tape.records.append(LayerRecord(x=out, pre=pre))
        out = _apply_activation(pre, layer.activation)
    return out, tape


def mlp_backward(layers, tape: GradTape, grad_out):
    """Backpropagate grad_out through the taped forward pass.

    Returns (grad_input, grads) where grads[i] = (dweight, dbias) for layer i.
    Gradients are exact for the recorded forward pass and deterministic.
    """
    if len(tape) != len(layers):
        raise ValidationError(
            f"mlp_backward: tape has {len(tape)} records for {len(layers)} layers"
        )
    grads = [None] * len(layers)
    g = np.asarray(grad_out, dtype=np.float64)
    for i in range(len(layers) - 1, -1, -1):
        layer, rec = layers[i], tape.records[i]
        if g.shape != rec.pre.shape:
            raise ValidationError(
                f"mlp_backward: gradient shape {g.shape} does not match "
                f"layer {i} output {rec.pre.shape}"
            )
        dpre = g * _activation_grad(rec.pre, layer.activation)
        grads[i] = (dpre.T @ rec.x, dpre.sum(axis=0))
        g = dpre @ layer.weight
    return g, grads


@dataclass
class AdamState:
    """Adam accumulators keyed by parameter name; step counter starts at 0."""

    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: dict, grads: dict) -> dict:
    """One bias-corrected Adam update, in place on the parameter arrays.

    params and grads map names to arrays of identical shape.  A non-finite
    gradient raises NumericError naming the offending parameter.
    """
    state.step_count += 1
    t = state.step_count
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(
                f"adam_step: gradient shape {g.shape} != parameter {name} shape {p.shape}"
            )
        if not np.all(np.isfinite(g)):
            raise NumericError(f"adam_step: non-finite gradient for parameter {name!r}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


def symmetric_eigen(a, symmetry_tol=1e-10, off_tol=1e-12, max_sweeps=100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors) with eigenvalues sorted descending and
    eigenvectors as columns.  Each eigenvector's sign is fixed so its largest-
    magnitude entry is positive, making downstream projections reproducible.

    Sweeps stop when the largest off-diagonal magnitude falls below off_tol
    or after max_sweeps full cycles.
    """
    a = as_matrix(a, "matrix")
    n = a.shape[0]
    if a.shape[1] != n:
        raise ShapeError(f"symmetric_eigen: matrix is {a.shape}, not square")
    if n == 0:
        raise ShapeError("symmetric_eigen: empty matrix")
    if np.max(np.abs(a - a.T)) > symmetry_tol:
        raise ValidationError("symmetric_eigen: input is not symmetric within 1e-10")

    a = (a + a.T) / 2.0
    vecs = np.eye(n)
    for _ in range(max_sweeps):
        off = np.abs(a - np.diag(np.diag(a))).max() if n > 1 else 0.0
        if off < off_tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app, aqq = a[p, p], a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                # smaller-magnitude root of t^2 + 2t*theta - 1 = 0
                if abs(theta) > 1e150:
                    t = 1.0 / (2.0 * theta)
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    if theta == 0.0:
                        t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0

                vec_p = vecs[:, p].copy()
                vec_q = vecs[:, q].copy()
                vecs[:, p] = c * vec_p - s * vec_q
                vecs[:, q] = s * vec_p + c * vec_q

    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vecs = vecs[:, order]
    for j in range(n):
        k = int(np.argmax(np.abs(vecs[:, j])))
        if vecs[k, j] < 0.0:
            vecs[:, j] = -vecs[:, j]
    return values, vecs
