"""Weighted sparse self-expression solver.

Finds a sparse coefficient matrix C with zero diagonal and a sparse error
matrix E such that Y ~ YC + E + (dense noise), by alternating minimization
of the augmented Lagrangian of

    min ||C||_1 + lambda_e ||W (*) E||_1 + (lambda_z / 2) ||Y - YA - E||_F^2
    s.t. A = C - diag(C)   (and, in affine mode, a sum-to-one constraint)

where (*) is the entrywise product and W is a non-negative per-entry weight
mask: weight 1 means no prior knowledge about the entry, a small weight
means the entry is suspected to be corrupted and E may absorb it cheaply.

One iteration updates, in order: the auxiliary matrix A (a ridge-type
linear system), C (soft thresholding of A plus its running multiplier,
diagonal removed), E (weighted soft thresholding of the residual Y - YA),
and the Lagrange multipliers. The quadratic penalty rho grows geometrically
by a factor mu each iteration. All iterates start at zero. Iteration stops
once every tracked residual drops below ``epsilon`` (the sum-to-one gap is
only tracked in affine mode) or ``max_iters`` is reached.

The A-step system ``(lambda_z Y^T Y + rho I [+ rho 11^T]) A = RHS`` has an
N x N matrix but rank-D structure; the default path inverts it through the
matrix-inversion identity on a D x D core (plus a rank-one correction in
affine mode), costing O(D^2 N + D^3) per factorization instead of O(N^3).
A dense Cholesky path is kept for cross-validation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from threadpoolctl import threadpool_limits


class DegenerateDataError(ValueError):
    """Data admits no automatic regularization-weight choice."""


class LinearSolveError(RuntimeError):
    """The A-step linear system could not be solved accurately."""


# Relative residual allowed on the A-step linear system.
LINEAR_SYSTEM_TOL = 1e-8


@dataclass
class SolverConfig:
    """Parameters of the alternating solver.

    ``alpha_e``/``alpha_z`` scale the two data-derived regularization
    weights; ``rho0`` and ``mu`` set the penalty schedule rho_k =
    rho0 * mu^k; ``epsilon`` is the stopping tolerance on the
    infinity-norm residuals. ``method`` selects the A-step linear
    solver: "woodbury" (structured, default) or "dense" (Cholesky on
    the full N x N system).
    """

    alpha_e: float = 5.0
    alpha_z: float = 50.0
    rho0: float = 10.0
    mu: float = 1.05
    epsilon: float = 1e-3
    max_iters: int = 200
    affine: bool = False
    method: str = "woodbury"

    def __post_init__(self):
        if self.alpha_e <= 0 or self.alpha_z <= 0:
            raise ValueError("alpha_e and alpha_z must be positive")
        if self.rho0 <= 0:
            raise ValueError("rho0 must be positive")
        if self.mu < 1.0:
            raise ValueError("mu must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.method not in ("woodbury", "dense"):
            raise ValueError(f"unknown linear solve method {self.method!r}")


@dataclass
class Lambdas:
    """Regularization weights and the data statistics they derive from."""

    lambda_e: float
    lambda_z: float
    mu_e: float
    mu_z: float


@dataclass
class Residuals:
    """Infinity-norm (max absolute entry) residuals of one iteration."""

    affine_gap: float  # ||A 1 - 1||_inf
    coupling_gap: float  # ||A - C||_inf
    a_change: float  # ||A_new - A_old||_inf
    e_change: float  # ||E_new - E_old||_inf

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.affine_gap, self.coupling_gap, self.a_change, self.e_change)


@dataclass
class SolverDiagnostics:
    iterations: int
    converged: bool
    residuals: Residuals
    rho: float
    seconds: float = 0.0
    history: list[tuple] = field(default_factory=list)

    HISTORY_COLUMNS = ("iter", "affine_gap", "coupling_gap", "a_change", "e_change", "rho")

    def history_rows(self) -> list[tuple]:
        """Per-iteration (iter, four residuals, rho) rows for CSV export."""
        return list(self.history)


@dataclass
class SolverResult:
    C: np.ndarray
    E: np.ndarray
    A: np.ndarray
    lambdas: Lambdas
    diagnostics: SolverDiagnostics


def compute_lambdas(Y: np.ndarray, alpha_e: float = 5.0, alpha_z: float = 50.0) -> Lambdas:
    """Derive the regularization weights from the data.

    mu_e is the min over columns i of the max over j != i of ||y_j||_1;
    mu_z is the same min-max over |y_i^T y_j|. The weights are
    lambda_e = alpha_e / mu_e and lambda_z = alpha_z / mu_z.

    Raises :class:`DegenerateDataError` when either statistic vanishes
    (all-zero or pairwise-orthogonal columns); callers must then supply
    explicit lambdas.
    """
    Y = np.asarray(Y, dtype=float)
    n = Y.shape[1]
    if n < 2:
        raise ValueError("need at least two columns to derive lambdas")

    col_l1 = np.abs(Y).sum(axis=0)
    order = np.argsort(col_l1)
    # max over j != i equals the overall max except at the argmax column,
    # where it is the runner-up; the min over i is therefore the runner-up.
    mu_e = float(col_l1[order[-2]])

    gram = np.abs(Y.T @ Y)
    np.fill_diagonal(gram, -np.inf)
    mu_z = float(gram.max(axis=1).min())

    if mu_e == 0.0 or mu_z == 0.0:
        raise DegenerateDataError(
            "data-derived weights vanish (mu_e=%g, mu_z=%g); pass lambdas explicitly"
            % (mu_e, mu_z)
        )
    return Lambdas(alpha_e / mu_e, alpha_z / mu_z, mu_e, mu_z)


def shrink(x: np.ndarray | float, eps: np.ndarray | float):
    """Soft thresholding: move x toward zero by eps, clipping at zero.

    ``eps`` may be a scalar or an array broadcastable against ``x``
    (per-entry thresholds). The boundary |x| == eps maps to 0.
    """
    return np.sign(x) * np.maximum(np.abs(x) - eps, 0.0)


def normalize_columns(Y: np.ndarray) -> np.ndarray:
    """Scale each column to unit Euclidean norm (zero columns untouched).

    Standard conditioning for self-expression pipelines: cluster labels
    are invariant to per-column scaling of the input, while the l1
    trade-offs inside the solver become uniform across columns.
    """
    Y = np.asarray(Y, dtype=float)
    norms = np.linalg.norm(Y, axis=0, keepdims=True)
    return Y / np.where(norms == 0, 1.0, norms)


class _GramSystemSolver:
    """Solves (lambda_z Y^T Y + rho I [+ rho 11^T]) X = B for fixed Y.

    The Woodbury path never forms the N x N matrix: it factors the D x D
    core ``I/lambda_z + Y Y^T / rho`` and, in affine mode, applies a
    rank-one (Sherman-Morrison) correction for the rho 11^T term.
    """

    def __init__(self, Y, lambda_z, affine, method):
        self.Y = Y
        self.lambda_z = lambda_z
        self.affine = affine
        self.method = method
        self.n = Y.shape[1]
        if method == "woodbury":
            self._outer = Y @ Y.T
        else:
            self._gram = lambda_z * (Y.T @ Y)

    def factor(self, rho: float):
        try:
            if self.method == "woodbury":
                core = np.eye(self.Y.shape[0]) / self.lambda_z + self._outer / rho
                self._core_cho = cho_factor(core)
            else:
                full = self._gram + rho * np.eye(self.n)
                if self.affine:
                    full += rho
                self._full_cho = cho_factor(full)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - rho > 0 keeps SPD
            raise LinearSolveError(f"factorization failed at rho={rho}") from exc
        self._rho = rho

    def solve(self, B: np.ndarray) -> np.ndarray:
        if self.method == "dense":
            return cho_solve(self._full_cho, B)
        X = self._plain_solve(B)
        if self.affine:
            w = self._plain_solve(np.ones((self.n, 1)))
            scale = self._rho / (1.0 + self._rho * float(w.sum()))
            X = X - w @ (scale * (w.T @ B))  # symmetric M, so 1^T M^-1 B = w^T B
        return X

    def _plain_solve(self, B):
        rho = self._rho
        return (B - self.Y.T @ cho_solve(self._core_cho, self.Y @ B) / rho) / rho


def update_A(
    Y: np.ndarray,
    E: np.ndarray,
    C: np.ndarray,
    delta: np.ndarray,
    Delta: np.ndarray,
    rho: float,
    lambdas: Lambdas,
    affine: bool = False,
    method: str = "woodbury",
) -> np.ndarray:
    """Solve the A-step linear system once, standalone.

    Convenience wrapper around the iteration-internal path; ``solve``
    reuses cached factors instead of rebuilding them per call.
    """
    solver = _GramSystemSolver(Y, lambdas.lambda_z, affine, method)
    solver.factor(rho)
    rhs = _a_step_rhs(Y, E, C, delta, Delta, rho, lambdas, affine)
    A = solver.solve(rhs)
    _check_a_step(Y, A, rhs, rho, lambdas, affine)
    return A


def _a_step_rhs(Y, E, C, delta, Delta, rho, lambdas, affine):
    rhs = lambdas.lambda_z * (Y.T @ (Y - E)) + rho * C - Delta
    if affine:
        rhs += rho - np.outer(np.ones(Y.shape[1]), delta)
    return rhs


def _check_a_step(Y, A, rhs, rho, lambdas, affine, gram=None):
    """Assert the computed A satisfies its linear system to 1e-8 relative."""
    if gram is None:
        gram = Y.T @ Y
    lhs = lambdas.lambda_z * (gram @ A) + rho * A
    if affine:
        lhs += rho * A.sum(axis=0)
    num = np.linalg.norm(lhs - rhs)
    den = max(np.linalg.norm(rhs), np.finfo(float).tiny)
    if num > LINEAR_SYSTEM_TOL * den:
        raise LinearSolveError(
            f"A-step relative residual {num / den:.3e} exceeds {LINEAR_SYSTEM_TOL:.0e}"
        )


def update_C(A: np.ndarray, Delta: np.ndarray, rho: float) -> np.ndarray:
    """Soft-threshold A + Delta/rho at 1/rho and zero the diagonal exactly."""
    J = shrink(A + Delta / rho, 1.0 / rho)
    np.fill_diagonal(J, 0.0)
    return J


def update_E(
    Y: np.ndarray,
    A: np.ndarray,
    lambdas: Lambdas,
    weights: np.ndarray | None = None,
) -> np.ndarray:
    """Soft-threshold the residual Y - YA entrywise.

    With no weights the threshold is the uniform lambda_e / lambda_z;
    a weight mask scales it per entry, so down-weighted (suspicious)
    entries let E absorb their residual almost freely.
    """
    thresh = lambdas.lambda_e / lambdas.lambda_z
    if weights is not None:
        thresh = thresh * weights
    return shrink(Y - Y @ A, thresh)


def update_multipliers(
    delta: np.ndarray,
    Delta: np.ndarray,
    A: np.ndarray,
    C: np.ndarray,
    rho: float,
    affine: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient-ascent step on the multipliers; delta only moves in affine mode."""
    if affine:
        delta = delta + rho * (A.sum(axis=1) - 1.0)
    return delta, Delta + rho * (A - C)


def _max_abs(x: np.ndarray) -> float:
    return float(np.abs(x).max()) if x.size else 0.0


def solve(
    Y: np.ndarray,
    weights: np.ndarray | None = None,
    config: SolverConfig | None = None,
    lambdas: Lambdas | None = None,
) -> SolverResult:
    """Run the alternating solver to convergence or ``max_iters``.

    Returns the final C (zero diagonal), E, A and diagnostics; hitting
    the iteration cap is reported via ``diagnostics.converged``, not an
    exception. ``lambdas`` overrides the data-derived weights (required
    for degenerate data).
    """
    config = config or SolverConfig()
    Y = np.asarray(Y, dtype=float)
    if not np.all(np.isfinite(Y)):
        raise ValueError("data matrix contains non-finite entries")
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != Y.shape:
            raise ValueError("weight mask shape must match the data matrix")
        if np.any(weights < 0):
            raise ValueError("weight mask entries must be non-negative")
    if lambdas is None:
        lambdas = compute_lambdas(Y, config.alpha_e, config.alpha_z)

    n = Y.shape[1]
    A = np.zeros((n, n))
    C = np.zeros((n, n))
    E = np.zeros(Y.shape)
    delta = np.zeros(n)
    Delta = np.zeros((n, n))
    rho = config.rho0

    gram = Y.T @ Y
    system = _GramSystemSolver(Y, lambdas.lambda_z, config.affine, config.method)

    start = time.perf_counter()
    history = []
    converged = False
    iteration = 0
    # Threaded BLAS kernels lose badly at this matrix scale; parallelism
    # belongs at the trial level.
    with threadpool_limits(limits=1, user_api="blas"):
        for iteration in range(1, config.max_iters + 1):
            system.factor(rho)
            rhs = _a_step_rhs(Y, E, C, delta, Delta, rho, lambdas, config.affine)
            A_next = system.solve(rhs)
            _check_a_step(Y, A_next, rhs, rho, lambdas, config.affine, gram=gram)

            C_next = update_C(A_next, Delta, rho)
            E_next = update_E(Y, A_next, lambdas, weights)
            delta, Delta = update_multipliers(
                delta, Delta, A_next, C_next, rho, config.affine
            )

            res = Residuals(
                affine_gap=_max_abs(A_next.sum(axis=1) - 1.0),
                coupling_gap=_max_abs(A_next - C_next),
                a_change=_max_abs(A_next - A),
                e_change=_max_abs(E_next - E),
            )
            history.append((iteration,) + res.as_tuple() + (rho,))

            A, C, E = A_next, C_next, E_next
            rho *= config.mu

            checked = res.as_tuple() if config.affine else res.as_tuple()[1:]
            if max(checked) < config.epsilon:
                converged = True
                break

    diagnostics = SolverDiagnostics(
        iterations=iteration,
        converged=converged,
        residuals=res,
        rho=rho,
        seconds=time.perf_counter() - start,
        history=history,
    )
    return SolverResult(C=C, E=E, A=A, lambdas=lambdas, diagnostics=diagnostics)
