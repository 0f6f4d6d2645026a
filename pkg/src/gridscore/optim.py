"""Sparse categorical cross-entropy and the Adam / Nadam / AdaMax optimizers."""

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, ValidationError

PROB_FLOOR = 1e-12
OPTIMIZERS = ("adam", "nadam", "adamax")


def _check_labels(labels, n_rows, n_classes):
    labels = np.asarray(labels)
    if labels.shape != (n_rows,):
        raise ShapeError(f"expected {n_rows} labels, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        if not np.all(np.mod(labels, 1) == 0):
            raise ValidationError("labels must be integers")
        labels = labels.astype(np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValidationError(f"labels must lie in 0..{n_classes - 1}")
    return labels


def per_sample_nll(probs, labels):
    probs = np.asarray(probs, dtype=np.float64)
    labels = _check_labels(labels, probs.shape[0], probs.shape[1])
    picked = probs[np.arange(len(labels)), labels]
    return -np.log(np.maximum(picked, PROB_FLOOR))


def scce_loss(probs, labels):
    """Mean negative log-likelihood of integer ``labels`` under softmax ``probs``.

    Returns ``(loss, grad_logits)`` where ``grad_logits = (probs - onehot) / B``
    is the gradient of the loss through the softmax with respect to its logits.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2:
        raise ShapeError(f"probs must be B x K, got shape {probs.shape}")
    labels = _check_labels(labels, probs.shape[0], probs.shape[1])
    if not np.allclose(probs.sum(axis=1), 1.0, rtol=0, atol=1e-9):
        raise ValidationError("each row of probs must sum to 1")
    b = probs.shape[0]
    loss = float(per_sample_nll(probs, labels).mean())
    grad = probs.copy()
    grad[np.arange(b), labels] -= 1.0
    return loss, grad / b


@dataclass
class OptimizerState:
    """Hyperparameters plus per-parameter moments, keyed by parameter name.

    ``v`` holds the second moment for Adam/Nadam and the infinity norm ``u``
    for AdaMax.
    """

    kind: str = "adam"
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kind = self.kind.lower()
        if self.kind not in OPTIMIZERS:
            raise ValidationError(f"unknown optimizer {self.kind!r}; choose from {OPTIMIZERS}")
        if self.lr <= 0:
            raise ValidationError("learning rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValidationError("beta1 and beta2 must lie in [0, 1)")


def optimizer_step(state, params, grads):
    """Apply one update to every array in ``params`` (modified in place).

    ``params`` and ``grads`` map names to arrays of matching shape.  The step
    counter advances once per call, not once per parameter.
    """
    if set(params) != set(grads):
        raise ShapeError(f"parameter names {sorted(params)} differ from gradient names {sorted(grads)}")
    for name, p in params.items():
        if np.shape(grads[name]) != p.shape:
            raise ShapeError(f"{name}: gradient shape {np.shape(grads[name])} != parameter shape {p.shape}")
        if name in state.m and state.m[name].shape != p.shape:
            raise ShapeError(f"{name}: optimizer moments have shape {state.m[name].shape}, parameter {p.shape}")

    state.t += 1
    t = state.t
    b1, b2, lr, eps = state.beta1, state.beta2, state.lr, state.eps
    corr1 = 1.0 - b1 ** t
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= b1
        m += (1.0 - b1) * g
        if state.kind == "adamax":
            np.maximum(b2 * v, np.abs(g), out=v)
            p -= (lr / corr1) * m / (v + eps)
            continue
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / corr1
        denom = np.sqrt(v / (1.0 - b2 ** t)) + eps
        if state.kind == "adam":
            p -= lr * m_hat / denom
        else:
            p -= lr * (b1 * m_hat + (1.0 - b1) * g / corr1) / denom
    return params, state
