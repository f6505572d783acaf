"""Sparse recovery for ``Phi x = y``: OMP and basis pursuit.

Basis pursuit minimizes ``||W x||_1`` over the affine set ``{x : Phi x = y}``
by projected gradient descent.  Feasible directions are projected onto
``ker(Phi)`` with an orthonormal basis ``Z`` taken from the QR factorization
of ``Phi.T``; step sizes come from backtracking (Armijo) line search.  The
l1 objective is replaced by the smooth convex surrogate

    f_eps(x) = sum_i w_i * sqrt(x_i**2 + eps**2)

and ``eps`` is decreased geometrically over a few stages down to its final
value, each stage warm-started from the previous one.
"""

from dataclasses import dataclass, field

import warnings

import numpy as np
import scipy.linalg as sla

from .errors import InvalidInputError, SolverError

__all__ = [
    "SolverResult",
    "BpParams",
    "NullSpaceBasis",
    "omp",
    "column_weights",
    "null_space_basis",
    "feasible_start",
    "backtracking_line_search",
    "smoothed_l1",
    "bp",
]

RANK_RTOL = 1e-10
MIN_STEP = 1e-16


@dataclass
class SolverResult:
    """Output of :func:`omp` or :func:`bp`.

    ``objective_trace`` holds the residual norm after each OMP iteration,
    or the smoothed objective after each BP iteration.
    """

    x: np.ndarray
    residual_norm: float
    iterations: int
    support_size: int
    objective_trace: list = field(default_factory=list)
    converged: bool = False
    reason: str = ""
    support: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BpParams:
    """Basis pursuit settings.

    ``smoothing_eps`` is relative: the final smoothing is
    ``smoothing_eps * (1 + max|x0|)`` with ``x0`` the feasible start.  The
    first of ``stages`` continuation stages uses ``eps_start`` on the same
    scale; ``stages=1`` runs a single stage at the final smoothing.
    ``max_iters`` bounds the total over all stages.  ``crossover`` enables
    the final simplex pivots described in :func:`bp`, at most
    ``max_pivots`` of them (``None`` means ``4 K``); each pivot refactors
    a ``K x K`` matrix, so they are skipped when ``K > crossover_max_k``.  ``grad_tol=None``
    means ``1e-6 * sum(w)``.
    """

    alpha: float = 0.001
    beta: float = 0.75
    smoothing_eps: float = 1e-8
    max_iters: int = 5000
    grad_tol: float = None
    rel_obj_tol: float = 1e-9
    stages: int = 8
    eps_start: float = 1e-1
    crossover: bool = True
    crossover_max_k: int = 256
    max_pivots: int = None

    def __post_init__(self):
        if not 0 < self.alpha < 0.5:
            raise InvalidInputError(f"alpha must lie in (0, 1/2), got {self.alpha}")
        if not 0 < self.beta < 1:
            raise InvalidInputError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.smoothing_eps > 0:
            raise InvalidInputError("smoothing_eps must be positive")
        if self.max_iters < 0 or self.stages < 1:
            raise InvalidInputError("max_iters must be >= 0 and stages >= 1")
        if self.eps_start < self.smoothing_eps:
            raise InvalidInputError("eps_start must be >= smoothing_eps")


@dataclass(frozen=True)
class NullSpaceBasis:
    """Complete QR factorization of ``Phi.T`` split into range and kernel.

    ``Z`` (``N x (N-K)``) spans ``ker(Phi)``; ``Y`` (``N x K``) spans the row
    space, and ``R`` (``K x K``) satisfies ``Phi.T = Y @ R``.
    """

    Z: np.ndarray
    Y: np.ndarray
    R: np.ndarray

    @classmethod
    def from_qr(cls, Q, R):
        K = R.shape[0]
        return cls(Z=np.ascontiguousarray(Q[:, K:]), Y=np.ascontiguousarray(Q[:, :K]), R=R[:K, :K])

    def project(self, v):
        """``Z (Z^T v)``, the orthogonal projection of ``v`` onto ``ker(Phi)``."""
        return self.Z @ (self.Z.T @ v)


def _check_system(Phi, y):
    Phi = np.asarray(Phi, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if Phi.ndim != 2:
        raise InvalidInputError("Phi must be a 2D array")
    if y.shape != (Phi.shape[0],):
        raise InvalidInputError(f"y has shape {y.shape}, expected ({Phi.shape[0]},)")
    if not (np.all(np.isfinite(Phi)) and np.all(np.isfinite(y))):
        raise InvalidInputError("non-finite entries in Phi or y")
    return Phi, y


def column_weights(Phi):
    """2-norm of each column of ``Phi``."""
    Phi = np.asarray(Phi, dtype=np.float64)
    w = np.linalg.norm(Phi, axis=0)
    zero = np.flatnonzero(w == 0)
    if zero.size:
        raise InvalidInputError(f"zero column(s) in Phi: {zero[:10].tolist()}")
    return w


def null_space_basis(Phi):
    """Kernel basis from the QR factorization of ``Phi.T``.

    Raises :class:`SolverError` when ``Phi`` is not of full row rank.
    """
    Phi = np.asarray(Phi, dtype=np.float64)
    K, N = Phi.shape
    if K > N:
        raise InvalidInputError(f"Phi has more rows than columns ({K} x {N})")
    Q, R = sla.qr(Phi.T, mode="full")
    R = R[:K, :K]
    d = np.abs(np.diag(R))
    limit = RANK_RTOL * max(np.linalg.norm(Phi, 2), 1.0)
    if d.size and d.min() <= limit:
        raise SolverError(
            "Phi is rank deficient", {"min_abs_R_diag": float(d.min()), "limit": float(limit)}
        )
    return NullSpaceBasis.from_qr(Q, R)


def feasible_start(Phi, y, basis=None):
    """Minimum-norm solution ``Phi.T (Phi Phi.T)^-1 y`` via the QR factors."""
    Phi, y = _check_system(Phi, y)
    if basis is None:
        basis = null_space_basis(Phi)
    # Phi = R.T Y.T, so x = Y R^-T y
    return basis.Y @ sla.solve_triangular(basis.R, y, trans="T", lower=False)


def backtracking_line_search(f, grad_at_x, x, dx, alpha, beta, fx=None):
    """Largest ``t`` in ``{1, beta, beta**2, ...}`` meeting the Armijo condition.

    Returns ``0.0`` if ``t`` falls below ``1e-16`` without the condition
    being met, which callers treat as stagnation.
    """
    if fx is None:
        fx = f(x)
    slope = float(np.dot(grad_at_x, dx))
    t = 1.0
    while f(x + t * dx) >= fx + alpha * t * slope:
        t *= beta
        if t < MIN_STEP:
            return 0.0
    return t


def smoothed_l1(w, eps):
    """Objective and gradient callables for ``sum w_i sqrt(x_i^2 + eps^2)``."""
    eps2 = eps * eps

    def f(x):
        return float(np.dot(w, np.sqrt(x * x + eps2)))

    def grad(x):
        return w * x / np.sqrt(x * x + eps2)

    return f, grad


def omp(Phi, y, eps=1e-6):
    """Orthogonal matching pursuit.

    Each iteration picks the column ``j`` outside the support minimizing
    ``||z_j phi_j - r||_2`` with ``z_j = phi_j^T r / ||phi_j||^2`` (ties go to
    the smallest ``j``), then re-solves least squares on the grown support.
    The least-squares problems are solved through a QR factorization of the
    support columns that is extended by one column per iteration.

    Stops once ``||r||_2 <= eps`` or the support has ``K`` columns.
    """
    Phi, y = _check_system(Phi, y)
    if eps < 0:
        raise InvalidInputError("eps must be >= 0")
    K, N = Phi.shape
    col_norm2 = np.einsum("ij,ij->j", Phi, Phi)
    if np.any(col_norm2 == 0):
        raise InvalidInputError("Phi has a zero column")

    Qs = np.empty((K, min(K, N)))
    Rs = np.zeros((min(K, N), min(K, N)))
    support = []
    in_support = np.zeros(N, dtype=bool)
    r = y.copy()
    rnorm = float(np.linalg.norm(r))
    trace = []
    k = 0
    while rnorm > eps and k < min(K, N):
        corr = Phi.T @ r
        errors = rnorm * rnorm - corr * corr / col_norm2
        errors[in_support] = np.inf
        j0 = int(np.argmin(errors))

        # extend the QR factors with column j0 (Gram-Schmidt, reorthogonalized once)
        a = Phi[:, j0]
        Qk = Qs[:, :k]
        h = Qk.T @ a
        v = a - Qk @ h
        h2 = Qk.T @ v
        v -= Qk @ h2
        h += h2
        vnorm = float(np.linalg.norm(v))
        if vnorm <= RANK_RTOL * np.sqrt(col_norm2[j0]):
            raise SolverError(
                "support columns are numerically dependent",
                {"iteration": k + 1, "column": j0, "support": list(support)},
            )
        Qs[:, k] = v / vnorm
        Rs[:k, k] = h
        Rs[k, k] = vnorm
        support.append(j0)
        in_support[j0] = True
        k += 1

        q = Qs[:, k - 1]
        r = r - q * float(q @ r)
        new_norm = float(np.linalg.norm(r))
        if not new_norm < rnorm:
            raise SolverError(
                "residual failed to decrease",
                {"iteration": k, "column": j0, "residual": new_norm, "previous": rnorm},
            )
        rnorm = new_norm
        trace.append(rnorm)

    x = np.zeros(N)
    if k:
        coef = sla.solve_triangular(Rs[:k, :k], Qs[:, :k].T @ y, lower=False)
        x[support] = coef
    residual = float(np.linalg.norm(y - Phi @ x))
    converged = residual <= eps or rnorm <= eps
    reason = "residual below eps" if converged else "support reached K"
    return SolverResult(
        x=x,
        residual_norm=residual,
        iterations=k,
        support_size=int(np.count_nonzero(x)),
        objective_trace=trace,
        converged=converged,
        reason=reason,
        support=support,
    )


def _initial_basis(Phi, x, w, K):
    """``K`` linearly independent columns, preferring large ``w |x|``."""
    order = np.argsort(-(w * np.abs(x)), kind="stable")
    S = np.sort(order[:K])
    d = np.abs(np.diag(sla.qr(Phi[:, S], mode="r", check_finite=False)[0]))
    if d.size and d.min() > RANK_RTOL * d.max():
        return S
    # greedy pass along the ranking, keeping columns that add rank
    Q = np.zeros((Phi.shape[0], 0))
    chosen = []
    for j in order:
        v = Phi[:, j] - Q @ (Q.T @ Phi[:, j])
        v -= Q @ (Q.T @ v)
        nv = np.linalg.norm(v)
        if nv > 1e-8 * np.linalg.norm(Phi[:, j]):
            Q = np.column_stack([Q, v / nv])
            chosen.append(j)
            if len(chosen) == K:
                return np.sort(np.array(chosen))
    return None


def _crossover(Phi, y, x, w, max_pivots, opt_tol=1e-9):
    """Move from a near-optimal point to an optimal vertex by simplex pivots.

    Basis pursuit is the linear program ``min w^T (u + v)`` subject to
    ``Phi (u - v) = y`` and ``u, v >= 0``.  A basis is a set ``S`` of ``K``
    columns with signs; its vertex solves ``Phi_S x_S = y``, and it is
    optimal when the multipliers ``lam`` from ``Phi_S^T lam = sign_S w_S``
    satisfy ``|Phi^T lam| <= w``.  Pivots use the most violated column,
    switching to the lowest index after a degenerate step to rule out
    cycling.

    Returns ``(x, pivots, optimal)`` or ``None`` when no starting basis
    exists.
    """
    K, N = Phi.shape
    S = _initial_basis(Phi, x, w, K)
    if S is None:
        return None
    S = list(S)
    sigma = None
    xs = None
    bland = False
    pivots = 0
    optimal = False
    while True:
        lu = sla.lu_factor(Phi[:, S], check_finite=False)
        xb = sla.lu_solve(lu, y, check_finite=False)
        if sigma is None:
            sigma = np.where(xb < 0, -1.0, 1.0)
        # keep the vertex exact when rounding allows, otherwise trust the update
        if np.all(sigma * xb >= -1e-9 * max(1.0, np.abs(xb).max())):
            xs = np.maximum(sigma * xb, 0.0)
        lam = sla.lu_solve(lu, sigma * w[S], trans=1, check_finite=False)
        corr = Phi.T @ lam
        viol = np.abs(corr) - w
        viol[S] = -np.inf
        cand = np.flatnonzero(viol > opt_tol * w)
        if cand.size == 0:
            optimal = True
            break
        if pivots >= max_pivots:
            break
        j = int(cand[0]) if bland else int(cand[np.argmax(viol[cand] / w[cand])])
        s = 1.0 if corr[j] > 0 else -1.0
        # magnitudes of the basic variables fall at rate dz per unit of the entering one
        dz = sigma * sla.lu_solve(lu, s * Phi[:, j], check_finite=False)
        pos = np.flatnonzero(dz > 1e-12 * max(1.0, np.abs(dz).max()))
        if pos.size == 0:
            # unbounded direction; impossible with positive weights
            break
        ratios = xs[pos] / dz[pos]
        theta = ratios.min()
        ties = pos[ratios <= theta * (1 + 1e-12) + 1e-300]
        r = int(ties[np.argmin(np.asarray(S)[ties])]) if bland else int(ties[0])
        xs = np.maximum(xs - theta * dz, 0.0)
        bland = theta <= 1e-14 * max(1.0, xs.max())
        S[r] = j
        xs[r] = theta
        sigma[r] = s
        pivots += 1
    out = np.zeros(N)
    out[S] = sigma * xs
    return out, pivots, optimal


def bp(Phi, y, weights=None, params=None, basis=None, callback=None):
    """Basis pursuit: minimize ``||W x||_1`` subject to ``Phi x = y``.

    Parameters
    ----------
    Phi : ndarray, shape (K, N)
        Full row rank sensing matrix.
    y : ndarray, shape (K,)
        Measurements.
    weights : ndarray, shape (N,), optional
        Diagonal of ``W``; defaults to :func:`column_weights` of ``Phi``.
    params : BpParams, optional
    basis : NullSpaceBasis, optional
        Precomputed factorization of ``Phi.T``, shared between calls.
    callback : callable, optional
        Called as ``callback(x)`` with the start point and after every
        gradient step.

    Returns
    -------
    SolverResult
        ``objective_trace`` holds the smoothed objective at the start of
        each stage and after every iteration, each value taken at the
        ``eps`` of its stage.

    Notes
    -----
    The iteration is ``x <- x + t * dx`` with ``dx = -Z (Z^T grad f(x))``
    and ``t`` from :func:`backtracking_line_search`; every iterate stays
    on ``Phi x = y`` up to rounding.  A stage ends when
    ``||Z^T grad f|| <= grad_tol``, the relative decrease of one step is
    at most ``rel_obj_tol``, or the line search stagnates; the whole run
    is capped at ``max_iters`` steps.

    Gradient steps on the smoothed objective approach the minimizer
    slowly once ``eps`` is small.  With ``params.crossover`` the final
    iterate seeds a basis of its ``K`` largest weighted entries and
    simplex pivots move it to an optimal vertex of the underlying linear
    program; the vertex replaces the iterate when it is feasible and its
    weighted l1 norm is no larger.  ``diagnostics["crossover_optimal"]``
    records whether the optimality certificate held.
    """
    Phi, y = _check_system(Phi, y)
    params = params or BpParams()
    K, N = Phi.shape
    w = column_weights(Phi) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (N,) or np.any(w <= 0):
        raise InvalidInputError("weights must be a positive vector of length N")
    if basis is None:
        basis = null_space_basis(Phi)
    grad_tol = 1e-6 * float(w.sum()) if params.grad_tol is None else params.grad_tol

    x = feasible_start(Phi, y, basis)
    if callback is not None:
        callback(x)
    ynorm = float(np.linalg.norm(y))
    scale = 1.0 + float(np.max(np.abs(x))) if N else 1.0
    eps_final = params.smoothing_eps * scale
    diagnostics = {"eps_final": eps_final, "smoothing_bound": eps_final * float(w.sum())}

    if K == N or basis.Z.shape[1] == 0:
        f, _ = smoothed_l1(w, eps_final)
        return SolverResult(
            x=x,
            residual_norm=float(np.linalg.norm(y - Phi @ x)),
            iterations=0,
            support_size=int(np.count_nonzero(x)),
            objective_trace=[f(x)],
            converged=True,
            reason="unique feasible point",
            diagnostics=diagnostics,
        )

    if params.stages == 1:
        schedule = [eps_final]
    else:
        schedule = list(np.geomspace(params.eps_start * scale, eps_final, params.stages))

    Z = basis.Z
    trace = []
    iterations = 0
    reason = "max_iters"
    converged = False
    for stage, eps in enumerate(schedule):
        last = stage == len(schedule) - 1
        f, grad = smoothed_l1(w, eps)
        fx = f(x)
        # lowering eps lowers f at a fixed x, so the trace stays monotone
        trace.append(fx)
        stage_reason = "max_iters"
        while iterations < params.max_iters:
            g = grad(x)
            zg = Z.T @ g
            if np.linalg.norm(zg) <= grad_tol:
                stage_reason = "projected gradient below grad_tol"
                break
            dx = -(Z @ zg)
            t = backtracking_line_search(f, g, x, dx, params.alpha, params.beta, fx=fx)
            if t == 0.0:
                stage_reason = "line search stagnated"
                break
            x = x + t * dx
            if callback is not None:
                callback(x)
            f_new = f(x)
            iterations += 1
            decrease = (fx - f_new) / max(abs(fx), np.finfo(float).tiny)
            fx = f_new
            trace.append(fx)
            if decrease <= params.rel_obj_tol:
                stage_reason = "relative decrease below rel_obj_tol"
                break
        if last or iterations >= params.max_iters:
            reason = stage_reason
            converged = stage_reason != "max_iters"
            if not last:
                diagnostics["stopped_at_stage"] = stage
            break

    if params.crossover and K < N and K <= params.crossover_max_k:
        max_pivots = 4 * K if params.max_pivots is None else params.max_pivots
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            try:
                found = _crossover(Phi, y, x, w, max_pivots)
            except (ValueError, np.linalg.LinAlgError):
                found = None
        diagnostics["crossover_accepted"] = False
        if found is not None:
            cand, pivots, optimal = found
            diagnostics["crossover_pivots"] = pivots
            diagnostics["crossover_optimal"] = optimal
            feasible = np.linalg.norm(Phi @ cand - y) <= 1e-9 * (1.0 + ynorm)
            if feasible and np.dot(w, np.abs(cand)) <= np.dot(w, np.abs(x)):
                x = cand
                diagnostics["crossover_accepted"] = True
                converged = converged or optimal
                if optimal:
                    reason = "optimal vertex"

    diagnostics["objective"] = float(np.dot(w, np.abs(x)))
    return SolverResult(
        x=x,
        residual_norm=float(np.linalg.norm(y - Phi @ x)),
        iterations=iterations,
        support_size=int(np.count_nonzero(x)),
        objective_trace=trace,
        converged=converged,
        reason=reason,
        diagnostics=diagnostics,
    )
