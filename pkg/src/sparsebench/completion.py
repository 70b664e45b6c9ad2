"""Low-rank matrix completion by iterative singular-value soft thresholding
(soft-impute), used as an optional pre-processing phase before sparse recovery.

Each iteration restores the observed entries, takes an SVD, and shrinks the
singular values by the nuclear-norm weight. The objective

    ||P_observed(Z - X)||_F^2 + shrinkage * ||Z||_*

is recorded per iteration and is guaranteed nonincreasing.
"""

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import InvalidInputError, NumericalError

DEFAULT_MAX_ITERS = 100
DEFAULT_REL_TOL = 1e-5


@dataclass(frozen=True)
class CompletionConfig:
    """Soft-impute hyperparameters.

    ``shrinkage`` is the amount subtracted from every singular value per
    iteration (the nuclear-norm weight). When ``overwrite_observed`` is set,
    the final estimate has the observed entries copied back verbatim instead
    of keeping the shrunken values (off by default: downstream regression uses
    the completed matrix as-is).
    """

    shrinkage: float
    max_iters: int = DEFAULT_MAX_ITERS
    rel_tol: float = DEFAULT_REL_TOL
    overwrite_observed: bool = False

    def __post_init__(self):
        if self.shrinkage < 0:
            raise InvalidInputError(f"shrinkage={self.shrinkage} must be >= 0")
        if self.max_iters < 1:
            raise InvalidInputError("max_iters must be >= 1")
        if not self.rel_tol > 0:
            raise InvalidInputError("rel_tol must be > 0")


@dataclass(frozen=True)
class CompletionResult:
    completed: np.ndarray
    iterations_used: int
    objective_trace: np.ndarray = field(repr=False)


def shrink_singular(s, lam):
    """Soft-threshold singular values: max(s_i - lam, 0)."""
    if lam < 0:
        raise InvalidInputError(f"lam={lam} must be >= 0")
    s = np.asarray(s, dtype=np.float64)
    return np.maximum(s - lam, 0.0)


def _objective(z, observed, mask, shrinkage, nuclear):
    diff = (z - observed) * mask
    return float(np.sum(diff * diff)) + shrinkage * float(nuclear)


def soft_impute(masked, cfg):
    """Complete a partially observed matrix.

    Starts from the observed matrix (zeros at missing positions). Each
    iteration fills the missing positions from the previous estimate, then
    shrinks the spectrum by ``cfg.shrinkage``. Stops when the iterate change
    ||Z_new - Z||_F falls below rel_tol * max(1, ||Z||_F) or at max_iters.

    Raises:
        InvalidInputError: no observed entries.
        NumericalError: non-finite iterate or objective increase.
    """
    mask = masked.mask
    observed = masked.observed
    if not np.any(mask == 1.0):
        raise InvalidInputError("mask has no observed entries")

    missing = 1.0 - mask
    z = observed.copy()
    trace = []
    iterations = 0
    for k in range(cfg.max_iters):
        filled = z * missing + observed * mask
        if cfg.shrinkage == 0.0:
            # Zero shrinkage leaves the spectrum unchanged; skip the SVD
            # round-trip so the fixed point is exact.
            z_next = filled
            nuclear = 0.0
        else:
            factors = linalg.svd(filled)
            shrunk = shrink_singular(factors.singular_values, cfg.shrinkage)
            z_next = (factors.u * shrunk) @ factors.v.T
            nuclear = np.sum(shrunk)
        iterations = k + 1
        if not np.all(np.isfinite(z_next)):
            raise NumericalError(
                f"soft-impute iterate became non-finite at iteration {iterations}"
            )

        obj = _objective(z_next, observed, mask, cfg.shrinkage, nuclear)
        if trace and obj > trace[-1] + 1e-9 * max(1.0, abs(trace[-1])):
            raise NumericalError(
                f"soft-impute objective increased at iteration {iterations}: "
                f"{trace[-1]:.12g} -> {obj:.12g}",
                residual=obj - trace[-1],
            )
        trace.append(obj)

        if np.linalg.norm(z_next - z) <= cfg.rel_tol * max(1.0, np.linalg.norm(z)):
            z = z_next
            break
        z = z_next

    completed = observed * mask + z * missing if cfg.overwrite_observed else z
    return CompletionResult(
        completed=completed,
        iterations_used=iterations,
        objective_trace=np.asarray(trace),
    )
