"""Linear-softmax classifier, optionally with one tanh hidden layer.

The forward pass caches everything backpropagation needs. Two backward
entry points exist: cross-entropy against one-hot labels (closed form
through the softmax) and an arbitrary gradient with respect to the softmax
output (chained through the softmax Jacobian), which is how the batch
objectives reach the parameters.

Classifiers are immutable; ``sgd_step`` returns a new one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import LOG_CLAMP
from .rng import Xoshiro256pp


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Classifier:
    """Parameters of the classifier; w2/b2 are None for the linear variant."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray | None = None
    b2: np.ndarray | None = None

    def __post_init__(self):
        if (self.w2 is None) != (self.b2 is None):
            raise ValueError("w2 and b2 must be given together")
        if self.w1.shape[1] != self.b1.shape[0]:
            raise ValueError("w1 and b1 disagree on layer width")
        if self.w2 is not None:
            if self.w1.shape[1] != self.w2.shape[0] or self.w2.shape[1] != self.b2.shape[0]:
                raise ValueError("hidden and output layer shapes disagree")
        for p in (self.w1, self.b1, self.w2, self.b2):
            if p is not None and not np.isfinite(p).all():
                raise ValueError("classifier parameters must be finite")

    @property
    def in_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def n_classes(self) -> int:
        return self.b1.shape[0] if self.w2 is None else self.b2.shape[0]


@dataclass(frozen=True)
class ForwardTrace:
    x: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    hidden_act: np.ndarray | None = None


@dataclass(frozen=True)
class Gradients:
    """Parameter gradients, mirroring the Classifier field layout."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray | None = None
    b2: np.ndarray | None = None


def init_classifier(
    in_dim: int, n_classes: int, rng: Xoshiro256pp, hidden: int | None = None
) -> Classifier:
    """Seeded init: weights uniform in [-0.5, 0.5] / sqrt(fan_in), zero biases.

    Weights are drawn row-major, first layer first, so the parameter values
    depend only on the rng state and the shape.
    """

    def uniform_matrix(rows, cols):
        scale = 1.0 / math.sqrt(rows)
        m = np.empty((rows, cols))
        for i in range(rows):
            for j in range(cols):
                m[i, j] = (rng.next_float() - 0.5) * scale
        return m

    if hidden is None:
        return Classifier(
            w1=_frozen(uniform_matrix(in_dim, n_classes)),
            b1=_frozen(np.zeros(n_classes)),
        )
    return Classifier(
        w1=_frozen(uniform_matrix(in_dim, hidden)),
        b1=_frozen(np.zeros(hidden)),
        w2=_frozen(uniform_matrix(hidden, n_classes)),
        b2=_frozen(np.zeros(n_classes)),
    )


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row softmax with the max-subtraction trick for stability."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward(c: Classifier, x) -> ForwardTrace:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != c.in_dim:
        raise ValueError(f"expected input of shape (batch, {c.in_dim}), got {x.shape}")
    if c.w2 is None:
        logits = x @ c.w1 + c.b1
        hidden_act = None
    else:
        hidden_act = np.tanh(x @ c.w1 + c.b1)
        logits = hidden_act @ c.w2 + c.b2
    return ForwardTrace(x=x, logits=logits, probs=softmax_rows(logits), hidden_act=hidden_act)


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean negative log-likelihood of one-hot labels, clamped log."""
    b = probs.shape[0]
    picked = (labels * np.log(np.maximum(probs, LOG_CLAMP))).sum()
    return -float(picked) / b


def _grads_from_dlogits(c: Classifier, t: ForwardTrace, dlogits: np.ndarray) -> Gradients:
    if c.w2 is None:
        return Gradients(w1=t.x.T @ dlogits, b1=dlogits.sum(axis=0))
    dw2 = t.hidden_act.T @ dlogits
    db2 = dlogits.sum(axis=0)
    dhidden = dlogits @ c.w2.T
    dpre = dhidden * (1.0 - t.hidden_act * t.hidden_act)
    return Gradients(w1=t.x.T @ dpre, b1=dpre.sum(axis=0), w2=dw2, b2=db2)


def backward_ce(c: Classifier, t: ForwardTrace, labels) -> Gradients:
    """Gradients of the mean cross-entropy; dL/dlogits = (probs - labels) / B."""
    y = np.asarray(labels, dtype=float)
    if y.shape != t.probs.shape:
        raise ValueError(f"labels shape {y.shape} != probs shape {t.probs.shape}")
    dlogits = (t.probs - y) / y.shape[0]
    return _grads_from_dlogits(c, t, dlogits)


def backward_objective(c: Classifier, t: ForwardTrace, g_a) -> Gradients:
    """Chain a gradient w.r.t. the softmax output through to the parameters.

    The softmax Jacobian contracts to
    dL/dz_ik = p_ik * (g_ik - sum_j g_ij p_ij); row-constant g therefore
    produces zero logit gradients.
    """
    g = np.asarray(g_a, dtype=float)
    if g.shape != t.probs.shape:
        raise ValueError(f"gradient shape {g.shape} != probs shape {t.probs.shape}")
    inner = (g * t.probs).sum(axis=1, keepdims=True)
    dlogits = t.probs * (g - inner)
    return _grads_from_dlogits(c, t, dlogits)


def combine_grads(a: Gradients, b: Gradients, weight: float) -> Gradients:
    """a + weight * b, fieldwise."""
    if (a.w2 is None) != (b.w2 is None):
        raise ValueError("gradients come from different architectures")
    if a.w2 is None:
        return Gradients(w1=a.w1 + weight * b.w1, b1=a.b1 + weight * b.b1)
    return Gradients(
        w1=a.w1 + weight * b.w1,
        b1=a.b1 + weight * b.b1,
        w2=a.w2 + weight * b.w2,
        b2=a.b2 + weight * b.b2,
    )


def sgd_step(c: Classifier, g: Gradients, lr: float) -> Classifier:
    """One plain gradient step, p <- p - lr * g; returns a new Classifier."""
    if lr < 0.0:
        raise ValueError("lr must be non-negative")
    if (c.w2 is None) != (g.w2 is None):
        raise ValueError("gradient does not match the classifier architecture")
    if lr == 0.0:
        return c
    if c.w2 is None:
        return Classifier(w1=_frozen(c.w1 - lr * g.w1), b1=_frozen(c.b1 - lr * g.b1))
    return Classifier(
        w1=_frozen(c.w1 - lr * g.w1),
        b1=_frozen(c.b1 - lr * g.b1),
        w2=_frozen(c.w2 - lr * g.w2),
        b2=_frozen(c.b2 - lr * g.b2),
    )


def with_class_prototypes(c: Classifier, prototypes: dict[int, np.ndarray]) -> Classifier:
    """Point selected output heads at prototype feature vectors.

    Head j becomes the nearest-mean discriminant of its prototype p: weight
    column p, bias -||p||^2 / 2 (for the hidden variant, p is first mapped
    through the current hidden layer). Used to give never-labelled classes
    an initial say in the predictions.
    """
    if c.w2 is None:
        w1 = c.w1.copy()
        b1 = c.b1.copy()
        for j, proto in prototypes.items():
            p = np.asarray(proto, dtype=float)
            w1[:, j] = p
            b1[j] = -0.5 * float(p @ p)
        return Classifier(w1=_frozen(w1), b1=_frozen(b1))
    w2 = c.w2.copy()
    b2 = c.b2.copy()
    for j, proto in prototypes.items():
        p = np.asarray(proto, dtype=float)
        h = np.tanh(p @ c.w1 + c.b1)
        w2[:, j] = h
        b2[j] = -0.5 * float(h @ h)
    return Classifier(w1=c.w1, b1=c.b1, w2=_frozen(w2), b2=_frozen(b2))
