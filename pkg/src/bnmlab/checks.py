"""Self-check suites: norm bounds, SVD health, and gradient verification.

Seven suites cover the load-bearing numerical facts:

1. fnorm_bound      row-stochastic B x C matrices have ||A||_F <= sqrt(B)
2. norm_sandwich    nuclear / sqrt(D) <= frobenius <= nuclear <= sqrt(D) * frobenius
3. nuclear_bound    nuclear norm <= sqrt(D * B), D = min(B, C)
4. svd_factors      thin SVD reconstructs its input with orthonormal factors
5. onehot_rank      numeric rank of one-hot matrices counts the categories hit
6. monotonic_optima entropy and Frobenius norm move oppositely and share optima
7. gradient_fd      analytic objective gradients match central differences

The closed-form Gram-eigenvalue oracles used to cross-check singular values
live here too; they never touch the Jacobi code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .linalg import entropy, frobenius_norm, numeric_rank, thin_svd
from .objectives import ObjectiveKind, fd_check, spectrum_gap

BOUND_TOL = 1e-9
FACTOR_TOL = 1e-10
FD_TOL = 1e-4
POPULATION_SIZE = 10_000
FD_POPULATION_PER_KIND = 1_000


# ---------------------------------------------------------------------------
# Closed-form singular-value oracles (characteristic polynomials of A^T A)
# ---------------------------------------------------------------------------

def symmetric_eigenvalues_2(g: np.ndarray) -> tuple[float, float]:
    """Eigenvalues of a symmetric 2x2 matrix, descending, via the quadratic."""
    a, b, c = float(g[0, 0]), float(g[0, 1]), float(g[1, 1])
    mean = 0.5 * (a + c)
    disc = math.hypot(0.5 * (a - c), b)
    return mean + disc, mean - disc


def symmetric_eigenvalues_3(g: np.ndarray) -> tuple[float, float, float]:
    """Eigenvalues of a symmetric 3x3 matrix, descending, trigonometric form."""
    g = np.asarray(g, dtype=float)
    p1 = g[0, 1] ** 2 + g[0, 2] ** 2 + g[1, 2] ** 2
    if p1 == 0.0:
        d = sorted((float(g[0, 0]), float(g[1, 1]), float(g[2, 2])), reverse=True)
        return d[0], d[1], d[2]
    q = float(np.trace(g)) / 3.0
    p2 = (g[0, 0] - q) ** 2 + (g[1, 1] - q) ** 2 + (g[2, 2] - q) ** 2 + 2.0 * p1
    p = math.sqrt(p2 / 6.0)
    m = (g - q * np.eye(3)) / p
    det_m = (
        m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
        - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
        + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0])
    )
    r = min(1.0, max(-1.0, det_m / 2.0))
    phi = math.acos(r) / 3.0
    hi = q + 2.0 * p * math.cos(phi)
    lo = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    return hi, 3.0 * q - hi - lo, lo


def oracle_singular_values(a) -> tuple[float, ...]:
    """Singular values from the closed-form eigenvalues of the smaller Gram
    matrix; defined for matrices whose smaller dimension is at most 3."""
    m = np.asarray(a, dtype=float)
    g = m.T @ m if m.shape[1] <= m.shape[0] else m @ m.T
    d = g.shape[0]
    if d == 1:
        eigs: tuple[float, ...] = (float(g[0, 0]),)
    elif d == 2:
        eigs = symmetric_eigenvalues_2(g)
    elif d == 3:
        eigs = symmetric_eigenvalues_3(g)
    else:
        raise ValueError("oracle only covers matrices with min(rows, cols) <= 3")
    return tuple(math.sqrt(max(e, 0.0)) for e in eigs)


# ---------------------------------------------------------------------------
# Populations
# ---------------------------------------------------------------------------

def random_batch_outputs(
    seed: int, count: int = POPULATION_SIZE, max_dim: int = 8
) -> list[np.ndarray]:
    """Seeded row-stochastic matrices, B and C uniform in 1..max_dim; rows are
    Dirichlet(1, ..., 1) via normalised exponentials."""
    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(count):
        b = int(rng.integers(1, max_dim + 1))
        c = int(rng.integers(1, max_dim + 1))
        e = rng.exponential(size=(b, c))
        mats.append(e / e.sum(axis=1, keepdims=True))
    return mats


def random_one_hot(seed: int, count: int = 500, max_dim: int = 8) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(count):
        b = int(rng.integers(1, max_dim + 1))
        c = int(rng.integers(1, max_dim + 1))
        labels = rng.integers(0, c, size=b)
        m = np.zeros((b, c))
        m[np.arange(b), labels] = 1.0
        mats.append(m)
    return mats


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str


def _counterexample(m: np.ndarray, msg: str) -> str:
    return f"{msg}; counterexample:\n{np.array2string(m, precision=17)}"


def suite_fnorm_bound(mats) -> CheckResult:
    name = "fnorm_bound"
    for m in mats:
        cap = math.sqrt(m.shape[0])
        if frobenius_norm(m) > cap + BOUND_TOL:
            return CheckResult(name, False, _counterexample(m, "||A||_F exceeds sqrt(B)"))
    return CheckResult(name, True, f"{len(mats)} matrices")


def suite_norm_sandwich(mats) -> CheckResult:
    name = "norm_sandwich"
    for m in mats:
        d = min(m.shape)
        fro = frobenius_norm(m)
        nuc = math.fsum(thin_svd(m).sigma)
        if not (
            nuc / math.sqrt(d) <= fro + BOUND_TOL
            and fro <= nuc + BOUND_TOL
            and nuc <= math.sqrt(d) * fro + BOUND_TOL
        ):
            return CheckResult(name, False, _counterexample(m, "norm sandwich violated"))
    return CheckResult(name, True, f"{len(mats)} matrices")


def suite_nuclear_bound(mats) -> CheckResult:
    name = "nuclear_bound"
    for m in mats:
        cap = math.sqrt(min(m.shape) * m.shape[0])
        if math.fsum(thin_svd(m).sigma) > cap + BOUND_TOL:
            return CheckResult(name, False, _counterexample(m, "nuclear norm exceeds sqrt(D*B)"))
    return CheckResult(name, True, f"{len(mats)} matrices")


def suite_svd_factors(mats) -> CheckResult:
    name = "svd_factors"
    for m in mats:
        f = thin_svd(m)
        sig = np.asarray(f.sigma)
        if (sig < 0.0).any() or (np.diff(sig) > 0.0).any():
            return CheckResult(name, False, _counterexample(m, "sigma not sorted descending"))
        err = frobenius_norm(f.reconstruct() - m)
        cap = 1e-12 if sig[0] == 0.0 else FACTOR_TOL * sig[0]
        if err > cap:
            return CheckResult(name, False, _counterexample(m, f"reconstruction error {err:g}"))
        d = sig.size
        if (
            np.abs(f.u.T @ f.u - np.eye(d)).max() > FACTOR_TOL
            or np.abs(f.v.T @ f.v - np.eye(d)).max() > FACTOR_TOL
        ):
            return CheckResult(name, False, _counterexample(m, "factors not orthonormal"))
    return CheckResult(name, True, f"{len(mats)} matrices")


def suite_onehot_rank(seed: int) -> CheckResult:
    name = "onehot_rank"
    for m in random_one_hot(seed):
        expected = int((m.sum(axis=0) > 0).sum())
        f = thin_svd(m)
        # Singular values of a one-hot matrix are sqrt(category counts), so
        # any ratio below sqrt(1/B) separates present from absent categories.
        for tol in (0.05, 0.1, 0.3):
            got = numeric_rank(f, tol)
            if got != expected:
                return CheckResult(
                    name, False, _counterexample(m, f"rank {got} != {expected} at tol {tol}")
                )
    return CheckResult(name, True, "500 one-hot matrices x 3 tolerances")


def suite_monotonic_optima(seed: int) -> CheckResult:
    name = "monotonic_optima"
    xs = [0.5 + 0.01 * k for k in range(51)]
    hs = [entropy([[x, 1.0 - x]]) for x in xs]
    fs = [frobenius_norm([[x, 1.0 - x]]) for x in xs]
    for k in range(len(xs) - 1):
        if not (hs[k + 1] < hs[k] and fs[k + 1] > fs[k]):
            return CheckResult(
                name, False, f"monotonicity broken between x={xs[k]} and x={xs[k + 1]}"
            )
    for m in random_one_hot(seed, count=200):
        if entropy(m) != 0.0 or abs(frobenius_norm(m) - math.sqrt(m.shape[0])) > BOUND_TOL:
            return CheckResult(name, False, _counterexample(m, "one-hot optimum not attained"))
    rng = np.random.default_rng(seed + 1)
    for _ in range(200):
        b = int(rng.integers(1, 9))
        c = int(rng.integers(2, 9))
        m = _softmax_rows(rng.normal(size=(b, c)))
        if not (entropy(m) > 0.0 and frobenius_norm(m) < math.sqrt(b)):
            return CheckResult(name, False, _counterexample(m, "interior matrix at the optimum"))
    return CheckResult(name, True, "51-point grid + 400 optimum probes")


def _fd_input(rng: np.random.Generator, kind: ObjectiveKind) -> np.ndarray:
    while True:
        b = int(rng.integers(2, 6))
        c = int(rng.integers(2, 5))
        m = _softmax_rows(2.0 * rng.normal(size=(b, c)))
        if kind is not ObjectiveKind.BNM or spectrum_gap(m) >= 1e-3:
            return m


def suite_gradient_fd(seed: int, per_kind: int = FD_POPULATION_PER_KIND) -> CheckResult:
    name = "gradient_fd"
    kinds = (ObjectiveKind.ENTMIN, ObjectiveKind.BFM, ObjectiveKind.BNM, ObjectiveKind.BALANCE)
    for offset, kind in enumerate(kinds):
        rng = np.random.default_rng(seed + offset)
        for _ in range(per_kind):
            m = _fd_input(rng, kind)
            err = fd_check(kind, m)
            if err > FD_TOL:
                return CheckResult(
                    name,
                    False,
                    _counterexample(m, f"fd_check error {err:g} for {kind.value}"),
                )
    return CheckResult(name, True, f"{per_kind} inputs per objective")


def run_all_checks(
    seed: int = 1,
    population: int = POPULATION_SIZE,
    fd_per_kind: int = FD_POPULATION_PER_KIND,
    progress: Callable[[CheckResult], None] | None = None,
) -> list[CheckResult]:
    """Run the seven suites in order; progress is called after each one."""
    mats = random_batch_outputs(seed, population)
    results = []
    for res in (
        suite_fnorm_bound(mats),
        suite_norm_sandwich(mats),
        suite_nuclear_bound(mats),
        suite_svd_factors(mats),
        suite_onehot_rank(seed),
        suite_monotonic_optima(seed),
        suite_gradient_fd(seed, fd_per_kind),
    ):
        results.append(res)
        if progress is not None:
            progress(res)
    return results
