"""Batch objectives over the prediction matrix: value plus analytic gradient.

Every objective is phrased as a loss to minimise, so maximisation targets
(Frobenius norm, nuclear norm) carry the minus sign inside. The gradient is
taken with respect to the raw matrix entries, without re-projecting onto the
row simplex: downstream the matrix is a softmax output and the simplex
constraint is enforced by the softmax Jacobian, so the chain rule needs the
unconstrained derivative here.

Objectives:

* entmin   - mean row entropy (minimise directly)
* bfm      - negative Frobenius norm / B (batch Frobenius-norm maximisation)
* bnm      - negative nuclear norm / B (batch nuclear-norm maximisation)
* balance  - negative entropy of the batch-mean prediction; minimising it
             pushes the average prediction toward uniform
"""

from __future__ import annotations

import enum
import math
from typing import Callable, NamedTuple

import numpy as np

from .linalg import LOG_CLAMP, entropy, frobenius_norm, thin_svd


class ObjectiveKind(enum.Enum):
    NONE = "none"
    ENTMIN = "entmin"
    BFM = "bfm"
    BNM = "bnm"
    BALANCE = "balance"

    @classmethod
    def parse(cls, text: str) -> "ObjectiveKind":
        try:
            return cls(text.strip().lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown objective {text!r} (expected one of: {names})") from None


class ObjectiveEval(NamedTuple):
    value: float
    grad: np.ndarray


def eval_none(a) -> ObjectiveEval:
    """Absent objective: zero loss, zero gradient."""
    m = np.asarray(a, dtype=float)
    return ObjectiveEval(0.0, np.zeros_like(m))


def eval_entmin(a) -> ObjectiveEval:
    """Mean row entropy; gradient -(log(a) + 1) / B with the clamped log."""
    m = np.asarray(a, dtype=float)
    b = m.shape[0]
    grad = -(np.log(np.maximum(m, LOG_CLAMP)) + 1.0) / b
    return ObjectiveEval(entropy(m), grad)


def eval_bfm(a) -> ObjectiveEval:
    """Negative Frobenius norm over batch size; gradient -a / (B * ||a||_F)."""
    m = np.asarray(a, dtype=float)
    b = m.shape[0]
    f = frobenius_norm(m)
    if f == 0.0:
        raise ValueError("Frobenius objective is undefined on an all-zero matrix")
    return ObjectiveEval(-f / b, -m / (b * f))


def eval_bnm(a) -> ObjectiveEval:
    """Negative nuclear norm over batch size; gradient -(u @ v.T) / B.

    u @ v.T is the exact gradient whenever the singular values are distinct
    and positive; at degenerate spectra it is one valid subgradient (the one
    induced by the factors the Jacobi iteration happened to return).
    """
    m = np.asarray(a, dtype=float)
    b = m.shape[0]
    factors = thin_svd(m)
    value = -math.fsum(factors.sigma) / b
    return ObjectiveEval(value, -(factors.u @ factors.v.T) / b)


def eval_balance(a) -> ObjectiveEval:
    """Negative entropy of the column means; uniform marginals minimise it."""
    m = np.asarray(a, dtype=float)
    b = m.shape[0]
    col_mean = m.mean(axis=0)
    logs = np.log(np.maximum(col_mean, LOG_CLAMP))
    value = math.fsum((col_mean * logs).flat)
    grad = np.tile((logs + 1.0) / b, (b, 1))
    return ObjectiveEval(value, grad)


# Dispatch table; looked up at call time so tests can swap implementations.
OBJECTIVE_FNS: dict[ObjectiveKind, Callable[[np.ndarray], ObjectiveEval]] = {
    ObjectiveKind.NONE: eval_none,
    ObjectiveKind.ENTMIN: eval_entmin,
    ObjectiveKind.BFM: eval_bfm,
    ObjectiveKind.BNM: eval_bnm,
    ObjectiveKind.BALANCE: eval_balance,
}


def evaluate(kind: ObjectiveKind, a) -> ObjectiveEval:
    return OBJECTIVE_FNS[kind](a)


def spectrum_gap(a) -> float:
    """Smallest of (consecutive singular-value differences, sigma_min).

    The nuclear-norm gradient is unique only where this is positive; the
    finite-difference harness filters its inputs with it.
    """
    sigma = thin_svd(a).sigma
    gap = sigma[-1]
    for hi, lo in zip(sigma, sigma[1:]):
        gap = min(gap, hi - lo)
    return float(gap)


def fd_check(kind: ObjectiveKind, a, step: float = 1e-6) -> float:
    """Max relative error between the analytic gradient and central differences.

    Each entry is perturbed by +-step in isolation (rows are not re-normalised;
    see the module docstring). Error is |g_an - g_fd| / max(1, |g_an|), maxed
    over entries.
    """
    if not 1e-9 < step < 1e-3:
        raise ValueError("step must lie in (1e-9, 1e-3)")
    m = np.array(a, dtype=float)  # private copy, entries are perturbed in place
    fn = OBJECTIVE_FNS[kind]
    analytic = fn(m).grad
    worst = 0.0
    for i in range(m.shape[0]):
        for j in range(m.shape[1]):
            saved = m[i, j]
            m[i, j] = saved + step
            up = fn(m).value
            m[i, j] = saved - step
            down = fn(m).value
            m[i, j] = saved
            g_fd = (up - down) / (2.0 * step)
            err = abs(analytic[i, j] - g_fd) / max(1.0, abs(analytic[i, j]))
            worst = max(worst, err)
    return worst


def equal_entropy_diversity_demo() -> tuple[np.ndarray, np.ndarray]:
    """Two four-sample two-class matrices with equal entropy and Frobenius
    norm but different nuclear norms.

    The first matrix repeats one confident row four times (rank one); the
    second flips the last row to the other class. Both hold the same entry
    multiset, so every entrywise functional agrees exactly, yet the flipped
    matrix spans two directions and has the strictly larger nuclear norm.
    """
    same = np.array([[0.9, 0.1]] * 4)
    diverse = np.array([[0.9, 0.1]] * 3 + [[0.1, 0.9]])
    if entropy(same) != entropy(diverse):
        raise AssertionError("entropy should match exactly on equal entry multisets")
    if frobenius_norm(same) != frobenius_norm(diverse):
        raise AssertionError("Frobenius norm should match exactly on equal entry multisets")
    nuc_same = math.fsum(thin_svd(same).sigma)
    nuc_diverse = math.fsum(thin_svd(diverse).sigma)
    if not nuc_diverse > nuc_same:
        raise AssertionError("the diverse matrix must have the larger nuclear norm")
    return same, diverse
