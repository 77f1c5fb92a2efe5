"""Dense-matrix functionals for batch prediction matrices.

A batch output matrix holds one softmax response per row: B rows (samples),
C columns (categories), every row summing to one. Three functionals of that
matrix drive everything else here:

* ``entropy``         mean Shannon entropy of the rows (discriminability, low = sharp)
* ``frobenius_norm``  entrywise L2 norm, at most sqrt(B) for row-stochastic input
* ``nuclear_norm``    sum of singular values, at most sqrt(min(B, C) * B)

The nuclear norm needs the singular values, computed by ``thin_svd`` with a
one-sided Jacobi iteration. Jacobi is slower than blocked LAPACK kernels but
is simple, dependency-free, deterministic, and very accurate on the tiny
matrices (C rarely above a few dozen) this package works with.

All functions are pure; returned factor matrices are marked read-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ROW_SUM_TOL = 1e-9
LOG_CLAMP = 1e-12


class SvdConvergenceError(RuntimeError):
    """Jacobi sweep limit exceeded; input is pathological or there is a bug."""


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array and reject non-finite entries."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"{name} must be 2-D with at least one row and column")
    if not np.isfinite(m).all():
        raise ValueError(f"{name} contains NaN or Inf")
    return m


def check_batch_output(a, row_sum_tol: float = ROW_SUM_TOL) -> np.ndarray:
    """Validate a batch output matrix: entries in [0, 1], rows summing to 1."""
    m = as_matrix(a, "batch output")
    if (m < 0.0).any() or (m > 1.0).any():
        raise ValueError("batch output entries must lie in [0, 1]")
    row_err = np.abs(m.sum(axis=1) - 1.0)
    if (row_err > row_sum_tol).any():
        i = int(np.argmax(row_err))
        raise ValueError(f"row {i} sums to {m[i].sum()!r}, not 1 within {row_sum_tol}")
    return m


def entropy(a) -> float:
    """Mean row entropy, natural log, with the 0*log(0) = 0 convention.

    Arguments inside the logarithm are clamped to LOG_CLAMP so numerically
    zero softmax outputs cannot produce -inf. Terms are accumulated with
    exactly rounded summation, making the value independent of entry order
    (matrices with equal entry multisets get bit-equal entropies).
    """
    m = np.asarray(a, dtype=float)
    terms = m * np.log(np.maximum(m, LOG_CLAMP))
    return -math.fsum(terms.flat) / m.shape[0] + 0.0  # + 0.0 normalises -0.0


def frobenius_norm(a) -> float:
    """Entrywise L2 norm, exactly rounded summation of squares."""
    m = np.asarray(a, dtype=float)
    return math.sqrt(math.fsum((m * m).flat))


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD a = u @ diag(sigma) @ v.T with d = min(rows, cols) triplets.

    sigma is sorted descending and non-negative; u (rows x d) and
    v (cols x d) have orthonormal columns.
    """

    u: np.ndarray
    sigma: tuple[float, ...]
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * np.asarray(self.sigma)) @ self.v.T


# One-sided Jacobi tuning. A column pair is left alone when the cosine of the
# angle between the columns is already below JACOBI_TOL; a sweep touching no
# pair means convergence. 60 sweeps is far beyond what matrices with up to a
# few dozen columns need, so hitting the cap signals a bug.
#
# Columns whose norm falls below NULL_REL times the largest column norm are
# frozen as numerical nulls: after an exact cancellation the surviving
# direction is rounding residue correlated with the big columns, so rotating
# against it can never satisfy a relative cosine test. Freezing costs at most
# NULL_REL * sigma_max per dropped value, far inside every stated tolerance.
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 60
NULL_REL = 1e-13


def thin_svd(a, max_sweeps: int = JACOBI_MAX_SWEEPS) -> SvdFactors:
    """Thin SVD by one-sided Jacobi rotations.

    The iteration runs on the orientation with rows >= cols (transposing and
    swapping u/v otherwise) and orthogonalises the columns of a working copy
    in place; accumulated rotations form v, normalised columns form u.
    Deterministic: fixed cyclic pair order, no randomness.

    Raises SvdConvergenceError when max_sweeps is exceeded.
    """
    m = as_matrix(a)
    if m.shape[0] >= m.shape[1]:
        u, sigma, v = _jacobi_tall(m, max_sweeps)
    else:
        v, sigma, u = _jacobi_tall(m.T, max_sweeps)
    u.flags.writeable = False
    v.flags.writeable = False
    return SvdFactors(u=u, sigma=tuple(float(s) for s in sigma), v=v)


def _jacobi_tall(a: np.ndarray, max_sweeps: int):
    """Jacobi kernel for rows >= cols; returns (u, sigma desc, v).

    Works on the transposed copy so that every matrix column is a contiguous
    row. The column Gram matrix is recomputed once per sweep and updated
    incrementally after each rotation; the sweep that applies no rotation has
    therefore judged convergence on fresh values.
    """
    rows, cols = a.shape
    bt = np.array(a.T, order="C")  # owned copy: the sweeps rotate it in place
    vt = np.eye(cols)

    if cols > 1:
        for _ in range(max_sweeps):
            g = (bt @ bt.T).tolist()
            null2 = NULL_REL * NULL_REL * max(g[j][j] for j in range(cols))
            rotated = False
            for p in range(cols - 1):
                gp = g[p]
                for q in range(p + 1, cols):
                    gamma = gp[q]
                    alpha = gp[p] if gp[p] > 0.0 else 0.0
                    beta = g[q][q] if g[q][q] > 0.0 else 0.0
                    if alpha <= null2 or beta <= null2:
                        continue
                    if abs(gamma) <= JACOBI_TOL * math.sqrt(alpha * beta):
                        continue
                    rotated = True
                    # Rotation zeroing the (p, q) Gram entry; the tangent
                    # formula picks the smaller zeroing angle, which is what
                    # makes the cyclic sweep converge.
                    zeta = (beta - alpha) / (2.0 * gamma)
                    t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                    c = 1.0 / math.sqrt(1.0 + t * t)
                    s = c * t
                    new_bp = c * bt[p] - s * bt[q]
                    bt[q] = s * bt[p] + c * bt[q]
                    bt[p] = new_bp
                    new_vp = c * vt[p] - s * vt[q]
                    vt[q] = s * vt[p] + c * vt[q]
                    vt[p] = new_vp
                    gq = g[q]
                    new_gp = [c * x - s * y for x, y in zip(gp, gq)]
                    new_gq = [s * x + c * y for x, y in zip(gp, gq)]
                    new_gp[p] = alpha - t * gamma
                    new_gq[q] = beta + t * gamma
                    new_gp[q] = 0.0
                    new_gq[p] = 0.0
                    g[p] = gp = new_gp
                    g[q] = new_gq
                    for k, row in enumerate(g):
                        if k != p and k != q:
                            row[p] = new_gp[k]
                            row[q] = new_gq[k]
            if not rotated:
                break
        else:
            raise SvdConvergenceError(
                f"one-sided Jacobi did not converge in {max_sweeps} sweeps "
                f"on a {rows}x{cols} matrix"
            )

    norms = np.sqrt(np.einsum("ij,ij->i", bt, bt))
    order = np.argsort(-norms, kind="stable")
    sigma = norms[order]
    cut = NULL_REL * float(norms.max())
    u = np.empty((rows, cols))
    null_cols = []
    for j_new, j_old in enumerate(order):
        if sigma[j_new] > cut:
            u[:, j_new] = bt[j_old] / sigma[j_new]
        else:
            sigma[j_new] = 0.0
            null_cols.append(j_new)
    if null_cols:
        _complete_basis(u, null_cols)
    return u, sigma, vt[order].T.copy()


def _complete_basis(u: np.ndarray, null_cols: list[int]) -> None:
    """Fill zero-sigma columns of u with an orthonormal completion.

    For each missing column, the canonical basis vector with the largest
    residual after projecting out the columns already placed is kept; a
    second projection pass scrubs the rounding left by the first.
    Deterministic, and the residual norm is at least 1/sqrt(rows).
    """
    rows = u.shape[0]
    filled = [j for j in range(u.shape[1]) if j not in null_cols]
    for j in null_cols:
        best, best_norm = None, -1.0
        for k in range(rows):
            cand = np.zeros(rows)
            cand[k] = 1.0
            for jj in filled:
                cand -= (u[:, jj] @ cand) * u[:, jj]
            norm = math.sqrt(float(cand @ cand))
            if norm > best_norm:
                best, best_norm = cand, norm
        best /= best_norm
        for jj in filled:
            best -= (u[:, jj] @ best) * u[:, jj]
        u[:, j] = best / math.sqrt(float(best @ best))
        filled.append(j)


def nuclear_norm(a) -> float:
    """Sum of singular values (trace norm)."""
    return math.fsum(thin_svd(a).sigma)


def numeric_rank(factors: SvdFactors, tol_ratio: float = 0.1) -> int:
    """Count singular values above tol_ratio times the largest one.

    For one-hot batch matrices the singular values are the square roots of
    the per-category multiplicities, so any tol_ratio below the smallest
    multiplicity ratio recovers the number of categories present.
    """
    if not 0.0 < tol_ratio < 1.0:
        raise ValueError("tol_ratio must lie in (0, 1)")
    if not factors.sigma or factors.sigma[0] == 0.0:
        return 0
    cut = tol_ratio * factors.sigma[0]
    return sum(1 for s in factors.sigma if s > cut)
