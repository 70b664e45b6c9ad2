"""Sparse-recovery solvers: IMAT (iterative thresholding with an adaptive or
exponentially decaying threshold), IHT, and LASSO by cyclic coordinate descent.

All solvers map a design matrix and label vector to a coefficient estimate.
They are deterministic: the same inputs always produce the same output. Missing
design entries are expected to arrive as exact zeros (the raw-data path); no
reweighting is applied.
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DivergenceError, InvalidInputError, NumericalError

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITERS = 200
DEFAULT_REL_TOL = 1e-6
DEFAULT_MAX_SWEEPS = 1000
DEFAULT_KKT_TOL = 1e-6


@dataclass(frozen=True)
class AdaptiveThreshold:
    """Threshold proportional to the mean magnitude of the previous iterate."""

    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise InvalidInputError(f"adaptive threshold factor c={self.c} must be > 0")


@dataclass(frozen=True)
class ExponentialThreshold:
    """Threshold decaying as t0 * exp(-alpha_decay * k) with the iteration k."""

    t0: float
    alpha_decay: float

    def __post_init__(self):
        if not self.t0 > 0:
            raise InvalidInputError(f"t0={self.t0} must be > 0")
        if not self.alpha_decay > 0:
            raise InvalidInputError(f"alpha_decay={self.alpha_decay} must be > 0")


@dataclass(frozen=True)
class ImatConfig:
    """IMAT hyperparameters.

    ``step`` is the gradient relaxation factor; it controls convergence speed
    and must lie in (0, 2 / sigma_max(X)^2). ``None`` selects the safe default
    1 / sigma_max(X)^2 at solve time.
    """

    threshold: "AdaptiveThreshold | ExponentialThreshold"
    step: float | None = None
    max_iters: int = DEFAULT_MAX_ITERS
    rel_tol: float = DEFAULT_REL_TOL

    def __post_init__(self):
        if self.step is not None and not self.step > 0:
            raise InvalidInputError(f"step={self.step} must be > 0")
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be >= 1")
        if not self.rel_tol > 0:
            raise InvalidInputError("rel_tol must be > 0")


@dataclass(frozen=True)
class IhtConfig:
    """IHT hyperparameters: target sparsity and gradient step size."""

    sparsity: int
    step: float | None = None
    max_iters: int = DEFAULT_MAX_ITERS
    rel_tol: float = DEFAULT_REL_TOL

    def __post_init__(self):
        if self.sparsity < 1:
            raise InvalidInputError(f"sparsity={self.sparsity} must be >= 1")
        if self.step is not None and not self.step > 0:
            raise InvalidInputError(f"step={self.step} must be > 0")
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be >= 1")
        if not self.rel_tol > 0:
            raise InvalidInputError("rel_tol must be > 0")


@dataclass(frozen=True)
class LassoConfig:
    """LASSO hyperparameters for the objective ||X b - y||_2^2 + penalty * ||b||_1."""

    penalty: float
    max_sweeps: int = DEFAULT_MAX_SWEEPS
    kkt_tol: float = DEFAULT_KKT_TOL

    def __post_init__(self):
        if self.penalty < 0:
            raise InvalidInputError(f"penalty={self.penalty} must be >= 0")
        if self.max_sweeps < 1:
            raise InvalidInputError("max_sweeps must be >= 1")
        if not self.kkt_tol > 0:
            raise InvalidInputError("kkt_tol must be > 0")


@dataclass(frozen=True)
class RecoveryResult:
    """Outcome of a solve: estimate, iterations spent, and convergence flag.

    ``final_threshold`` is the last hard threshold used (IMAT only, else 0).
    """

    beta_hat: np.ndarray
    iterations_used: int
    converged: bool
    final_threshold: float = 0.0


def hard_threshold(v, t):
    """Zero all entries of ``v`` with magnitude strictly below ``t``.

    Entries with |v_i| >= t are kept unchanged (equality kept).
    """
    if t < 0:
        raise InvalidInputError(f"threshold t={t} must be >= 0")
    v = np.asarray(v, dtype=np.float64)
    return np.where(np.abs(v) >= t, v, 0.0)


def adaptive_threshold(beta_k, c):
    """Threshold c * mean(|beta_k|) over all entries.

    The magnitude mean is used rather than the raw mean: a raw average can
    vanish by sign cancellation, which would disable thresholding entirely.
    """
    if not c > 0:
        raise InvalidInputError(f"c={c} must be > 0")
    beta_k = np.asarray(beta_k, dtype=np.float64)
    return float(c * np.mean(np.abs(beta_k)))


def _check_dims(x, y):
    x = linalg.as_matrix(x, "x")
    y = linalg.as_vector(y, "y")
    if x.shape[0] != y.size:
        raise InvalidInputError(f"x has {x.shape[0]} rows but y has length {y.size}")
    return x, y


def _top_gram_eigenvalue(gram, iters=100):
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Deterministic (fixed start vector); used only as a fallback estimate of
    sigma_max(X)^2 when the caller did not supply one.
    """
    n = gram.shape[0]
    v = np.full(n, 1.0 / np.sqrt(n))
    lam = 0.0
    for _ in range(iters):
        w = gram @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        lam = float(v @ (gram @ v))
    return lam


def _resolve_step(step, sigma_max_sq, who):
    """Default step 1 / sigma_max^2; enforce the (0, 2 / sigma_max^2) safety bound."""
    if sigma_max_sq <= 0.0:
        # Zero design: any positive step is formally safe.
        return step if step is not None else 1.0
    bound = 2.0 / sigma_max_sq
    if step is None:
        return 1.0 / sigma_max_sq
    if not 0.0 < step < bound:
        raise InvalidInputError(
            f"{who} step {step} outside the convergence-safe interval (0, {bound:.6g})"
        )
    return step


def imat_recover(x, y, cfg, sigma_max_sq=None, gram=None, xty=None):
    """Recover a sparse coefficient vector by iterative adaptive thresholding.

    Iterates beta_{k+1} = H_T(beta_k + step * X^T (y - X beta_k)) from beta_0
    = 0, where H_T is the hard threshold at level T. In adaptive mode the
    level is c * mean(|beta_k|) (computed from the pre-step iterate), so the
    first gradient step passes untouched; in exponential mode it is
    t0 * exp(-alpha_decay * (k+1)).

    Parameters
    ----------
    x : ndarray, m-by-n design matrix
    y : ndarray, length-m labels
    cfg : ImatConfig
    sigma_max_sq : float, optional
        Precomputed sigma_max(x)^2. Saves a spectral estimate when solving
        repeatedly on the same design; when omitted a deterministic power
        iteration supplies it.
    gram, xty : ndarray, optional
        Precomputed x.T @ x and x.T @ y for repeated solves on one design.

    Returns
    -------
    RecoveryResult
    """
    x, y = _check_dims(x, y)
    n = x.shape[1]
    if gram is None:
        gram = x.T @ x
    if xty is None:
        xty = x.T @ y
    if sigma_max_sq is None:
        sigma_max_sq = _top_gram_eigenvalue(gram)
    step = _resolve_step(cfg.step, sigma_max_sq, "IMAT")

    beta = np.zeros(n)
    threshold = 0.0
    converged = False
    iterations = 0
    for k in range(cfg.max_iters):
        if isinstance(cfg.threshold, AdaptiveThreshold):
            threshold = adaptive_threshold(beta, cfg.threshold.c)
        else:
            threshold = cfg.threshold.t0 * float(
                np.exp(-cfg.threshold.alpha_decay * (k + 1))
            )
        candidate = beta + step * (xty - gram @ beta)
        beta_next = hard_threshold(candidate, threshold)
        iterations = k + 1
        diff = np.linalg.norm(beta_next - beta)
        scale = max(1.0, np.linalg.norm(beta))
        # Norm overflow counts as divergence even while entries are finite.
        if not (np.all(np.isfinite(beta_next)) and np.isfinite(diff)):
            raise DivergenceError(
                f"IMAT iterate became non-finite at iteration {iterations}",
                iteration=iterations,
            )
        if diff <= cfg.rel_tol * scale:
            beta = beta_next
            converged = True
            break
        beta = beta_next
    return RecoveryResult(
        beta_hat=beta,
        iterations_used=iterations,
        converged=converged,
        final_threshold=threshold,
    )


def _keep_largest(v, s):
    """Keep the s largest-magnitude entries of v, ties broken by lowest index."""
    # Stable sort on -|v|: equal magnitudes keep ascending index order.
    order = np.argsort(-np.abs(v), kind="stable")
    out = np.zeros_like(v)
    keep = order[:s]
    out[keep] = v[keep]
    return out


def iht_recover(x, y, cfg, sigma_max_sq=None, gram=None, xty=None):
    """Iterative hard thresholding with a known sparsity level.

    Same gradient iteration as IMAT, but thresholding keeps the ``cfg.sparsity``
    largest-magnitude components of each iterate instead of cutting at a level.
    Optional keywords mirror imat_recover.

    Returns
    -------
    RecoveryResult with at most ``cfg.sparsity`` nonzeros in ``beta_hat``.
    """
    x, y = _check_dims(x, y)
    n = x.shape[1]
    if cfg.sparsity > n:
        raise InvalidInputError(f"sparsity {cfg.sparsity} exceeds signal length {n}")
    if gram is None:
        gram = x.T @ x
    if xty is None:
        xty = x.T @ y
    if sigma_max_sq is None:
        sigma_max_sq = _top_gram_eigenvalue(gram)
    step = _resolve_step(cfg.step, sigma_max_sq, "IHT")

    beta = np.zeros(n)
    converged = False
    iterations = 0
    for k in range(cfg.max_iters):
        candidate = beta + step * (xty - gram @ beta)
        beta_next = _keep_largest(candidate, cfg.sparsity)
        iterations = k + 1
        diff = np.linalg.norm(beta_next - beta)
        scale = max(1.0, np.linalg.norm(beta))
        if not (np.all(np.isfinite(beta_next)) and np.isfinite(diff)):
            raise DivergenceError(
                f"IHT iterate became non-finite at iteration {iterations}",
                iteration=iterations,
            )
        if diff <= cfg.rel_tol * scale:
            beta = beta_next
            converged = True
            break
        beta = beta_next
    return RecoveryResult(
        beta_hat=beta, iterations_used=iterations, converged=converged
    )


def _soft(z, gamma):
    return np.sign(z) * max(abs(z) - gamma, 0.0)


def lasso_solve(x, y, cfg):
    """LASSO via cyclic coordinate descent on ||X b - y||_2^2 + penalty * ||b||_1.

    Each coordinate update is the exact scalar minimizer (soft threshold at
    penalty / 2). Sweeps continue until the KKT residual drops below
    ``cfg.kkt_tol``:

        |2 X_j^T (X b - y) + penalty * sign(b_j)| <= kkt_tol   for b_j != 0
        |2 X_j^T (X b - y)| <= penalty + kkt_tol               for b_j == 0

    Columns with zero norm are skipped and their coefficient forced to zero.
    The objective is checked to be nonincreasing after every sweep.
    """
    x, y = _check_dims(x, y)
    n = x.shape[1]
    lam = cfg.penalty
    col_sq = np.einsum("ij,ij->j", x, x)
    active = col_sq > 0.0

    beta = np.zeros(n)
    residual = y.copy()  # y - x @ beta
    objective = float(residual @ residual)
    converged = False
    sweeps = 0
    for sweep in range(cfg.max_sweeps):
        for j in range(n):
            if not active[j]:
                continue
            old = beta[j]
            col = x[:, j]
            rho = col @ residual + col_sq[j] * old
            new = _soft(rho, lam / 2.0) / col_sq[j]
            if new != old:
                residual += col * (old - new)
                beta[j] = new
        sweeps = sweep + 1

        new_objective = float(residual @ residual) + lam * float(np.sum(np.abs(beta)))
        if new_objective > objective + 1e-9 * max(1.0, abs(objective)):
            raise NumericalError(
                f"LASSO objective increased on sweep {sweeps}: "
                f"{objective:.12g} -> {new_objective:.12g}",
                residual=new_objective - objective,
            )
        objective = new_objective

        # KKT residual on the full gradient 2 X^T (X b - y) = -2 X^T residual.
        grad = -2.0 * (x.T @ residual)
        nonzero = beta != 0.0
        stationarity = np.abs(grad + lam * np.sign(beta))
        subgradient = np.abs(grad)
        ok_nonzero = np.all(stationarity[nonzero & active] <= cfg.kkt_tol)
        ok_zero = np.all(subgradient[~nonzero & active] <= lam + cfg.kkt_tol)
        if ok_nonzero and ok_zero:
            converged = True
            break
    return RecoveryResult(beta_hat=beta, iterations_used=sweeps, converged=converged)
