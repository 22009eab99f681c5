"""Dense linear-algebra kernels sized for a few hundred unknowns.

Row-vector convention throughout: ``solve_linear(a, b)`` returns x with
``x @ a = b``, matching the fixed-point equations the analytic layer solves.
The matrix carrier is a plain float64 ndarray.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, ModelValidationError, NonErgodicError, SingularMatrixError
from .model import ShsModel, assemble_blocks, departure_rates, validate

DenseMatrix = np.ndarray

# Pivot magnitudes below PIVOT_RTOL * ||A||_inf are treated as singular.
PIVOT_RTOL = 1e-13
# Target residual for solves, relative to 1 + ||b||_inf.
SOLVE_RTOL = 1e-10


def lu_factor(a: DenseMatrix, pivot_rtol: float = PIVOT_RTOL) -> tuple[np.ndarray, np.ndarray]:
    """LU with partial pivoting; returns packed LU and the pivot permutation.

    Raises ``SingularMatrixError`` carrying the elimination step at which
    the best available pivot fell below ``pivot_rtol * ||A||_inf``.
    """
    lu = np.array(a, dtype=float)
    m, n = lu.shape
    if m != n:
        raise ValueError(f"matrix must be square, got {lu.shape}")
    if not np.all(np.isfinite(lu)):
        raise ValueError("matrix entries must be finite")
    norm = np.abs(lu).sum(axis=1).max() if n else 0.0
    threshold = pivot_rtol * max(norm, 1e-300)
    perm = np.arange(n)
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) < threshold:
            raise SingularMatrixError(pivot_index=k, pivot_magnitude=abs(lu[p, k]))
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        if k < n - 1:
            lu[k + 1:, k] /= lu[k, k]
            lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return lu, perm


def _lu_solve(lu: np.ndarray, perm: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    y = rhs[perm].astype(float)
    n = lu.shape[0]
    for k in range(1, n):
        y[k] -= lu[k, :k] @ y[:k]
    for k in range(n - 1, -1, -1):
        y[k] = (y[k] - lu[k, k + 1:] @ y[k + 1:]) / lu[k, k]
    return y


def solve_linear(
    a: DenseMatrix,
    b: np.ndarray,
    pivot_rtol: float = PIVOT_RTOL,
    refine_steps: int = 2,
) -> np.ndarray:
    """Solve x @ a = b by LU with partial pivoting plus iterative refinement."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if b.ndim != 1 or b.shape[0] != a.shape[0]:
        raise ValueError(f"right-hand side has shape {b.shape}, expected ({a.shape[0]},)")
    # Row-vector system: factor the transpose once, refine against x @ a.
    lu, perm = lu_factor(a.T, pivot_rtol=pivot_rtol)
    x = _lu_solve(lu, perm, b)
    tol = SOLVE_RTOL * (1.0 + np.abs(b).max(initial=0.0))
    for _ in range(refine_steps):
        r = b - x @ a
        if np.abs(r).max(initial=0.0) <= tol:
            break
        x = x + _lu_solve(lu, perm, r)
    return x


def generator_matrix(model: ShsModel) -> np.ndarray:
    """Infinitesimal generator of the discrete chain (self-loops cancel)."""
    q = model.num_states
    gen = np.zeros((q, q))
    for tr in model.transitions:
        gen[tr.source, tr.target] += tr.rate
    gen[np.arange(q), np.arange(q)] -= departure_rates(model)
    return gen


def stationary_distribution(model: ShsModel, positivity_floor: float = 1e-12) -> np.ndarray:
    """Stationary probabilities of the discrete chain.

    Solves global balance with one equation replaced by normalization and
    certifies ergodicity by strict positivity of the result; a
    rank-deficient balance system or a component at or below
    ``positivity_floor`` raises ``NonErgodicError`` naming the state.
    """
    violations = validate(model)
    if violations:
        raise ModelValidationError(violations)
    nq = model.num_states
    if nq == 1:
        return np.ones(1)
    a = generator_matrix(model)
    a[:, nq - 1] = 1.0
    rhs = np.zeros(nq)
    rhs[nq - 1] = 1.0
    try:
        pi = solve_linear(a, rhs)
    except SingularMatrixError as exc:
        raise NonErgodicError(exc.pivot_index, "balance system is rank deficient") from exc
    small = int(np.argmin(pi))
    if pi[small] <= positivity_floor:
        raise NonErgodicError(small, f"stationary probability {pi[small]:.3e} is not positive")
    return pi


def perron_root(
    m: DenseMatrix,
    max_iter: int = 3000,
    quotient_rtol: float = 1e-12,
    window: int = 10,
    residual_rtol: float = 1e-10,
) -> tuple[float, np.ndarray]:
    """Dominant non-negative eigenpair of an entrywise non-negative matrix.

    Power iteration from the all-ones vector, accepted once the Rayleigh
    quotient changes by less than ``quotient_rtol`` (relative) over
    ``window`` consecutive iterations and the eigen-residual meets
    ``residual_rtol``.  Matrices of this shape are frequently defective (the
    dominant eigenvalue is real but non-simple), in which case the quotient
    converges only algebraically and can never meet the tolerance; after
    ``max_iter`` iterations a dense eigendecomposition supplies the exact
    pair instead.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got {m.shape}")
    if np.any(m < 0.0):
        raise ValueError("matrix must be entrywise non-negative")
    n = m.shape[0]
    scale = max(np.abs(m).max(initial=0.0), 1e-300)

    x = np.ones(n) / np.sqrt(n)
    quotient = 0.0
    stable = 0
    for _ in range(max_iter):
        y = m @ x
        norm_y = np.linalg.norm(y)
        if norm_y == 0.0:
            # x is in the kernel; 0 is the dominant eigenvalue of a
            # non-negative matrix only when reached from a positive vector.
            return 0.0, x
        new_quotient = float(x @ y)
        if abs(new_quotient - quotient) <= quotient_rtol * max(abs(new_quotient), 1e-300):
            stable += 1
        else:
            stable = 0
        quotient = new_quotient
        x = y / norm_y
        if stable >= window:
            residual = np.abs(m @ x - quotient * x).max()
            if residual <= residual_rtol * scale and quotient >= 0.0:
                return quotient, np.abs(x)
            break

    # Defective or oscillatory dominant eigenvalue: fall back to a dense
    # eigendecomposition and pick the (real) spectral radius.
    values, vectors = np.linalg.eig(m)
    best = int(np.argmax(values.real))
    r = float(values.real[best])
    u = vectors[:, best].real
    u = u * np.sign(u[int(np.argmax(np.abs(u)))] or 1.0)
    u = np.where(np.abs(u) < 1e-12 * max(np.abs(u).max(), 1e-300), 0.0, u)
    residual = np.abs(m @ u - r * u).max()
    if residual > residual_rtol * scale * max(np.abs(u).max(), 1e-300) or np.any(u < 0.0):
        raise ConvergenceError(
            f"dominant eigenpair residual {residual:.3e} exceeds tolerance",
            last_iterate=x,
        )
    return max(r, 0.0), u


def spectral_abscissa(model: ShsModel) -> float:
    """Largest real part among the eigenvalues of R - D.

    Shifts by ``sigma = 1 + max departure rate`` so that ``sigma*I + R - D``
    is entrywise non-negative, finds its dominant real eigenvalue r, and
    returns ``r - sigma``.  Negative exactly when stationary age moments
    exist.
    """
    violations = validate(model)
    if violations:
        raise ModelValidationError(violations)
    d, D, R, _ = assemble_blocks(model)
    sigma = 1.0 + d.max()
    shifted = sigma * np.eye(D.shape[0]) + R - D
    r, _ = perron_root(shifted)
    return r - sigma
