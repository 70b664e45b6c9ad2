"""Dense real linear-algebra kernels used throughout the toolkit.

Matrices are plain 2-d float64 numpy arrays (row-major). All kernels are pure
functions: they never mutate their inputs and hold no global state, so values
may be shared freely across threads.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericalError, RankDeficiencyError

# Default numerical tolerances. Callers may override per call where a kernel
# exposes the corresponding keyword.
ORTHONORMALITY_TOL = 1e-10
RECONSTRUCTION_TOL = 1e-8
RANK_TOL = 1e-12


def as_matrix(a, name="matrix"):
    """Coerce ``a`` to a finite 2-d float64 array, validating shape and content."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-d, got ndim={a.ndim}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidInputError(f"{name} must have positive dimensions, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return a


def as_vector(v, name="vector"):
    """Coerce ``v`` to a finite 1-d float64 array."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise InvalidInputError(f"{name} must be 1-d, got ndim={v.ndim}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return v


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``A = U @ diag(s) @ V.T``.

    ``u`` is m-by-k and ``v`` is n-by-k with orthonormal columns,
    k = min(m, n), and ``singular_values`` is nonnegative and sorted
    nonincreasing (sign conventions are absorbed into ``u``).
    """

    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray

    def reconstruct(self):
        return (self.u * self.singular_values) @ self.v.T


def svd(a) -> SvdFactors:
    """Thin singular value decomposition of a dense real matrix.

    Raises:
        InvalidInputError: non-finite or non-2-d input.
        NumericalError: the underlying iteration failed to converge; the
            error carries the Frobenius norm of the input as ``residual``.
    """
    a = as_matrix(a)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"SVD did not converge for {a.shape} input: {exc}",
            residual=float(np.linalg.norm(a)),
        ) from exc
    factors = SvdFactors(u=u, singular_values=s, v=vt.T)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(s)) and np.all(np.isfinite(vt))):
        raise NumericalError("SVD produced non-finite factors")
    return factors


def orthonormalize(a, rank_tol=RANK_TOL):
    """Orthonormal basis for the column span of ``a`` via QR.

    Requires rows >= cols and numerically independent columns. The returned
    Q has the R diagonal sign folded in, so the result is unique given the
    input (deterministic across runs).

    Raises:
        RankDeficiencyError: some R diagonal fell below rank_tol * ||a||_F.
    """
    a = as_matrix(a)
    m, n = a.shape
    if m < n:
        raise InvalidInputError(f"need rows >= cols to orthonormalize, got {a.shape}")
    q, r = np.linalg.qr(a)
    diag = np.diagonal(r)
    threshold = rank_tol * max(np.linalg.norm(a), np.finfo(np.float64).tiny)
    if np.any(np.abs(diag) < threshold):
        raise RankDeficiencyError(
            f"rank-deficient input: min |R_ii| = {np.min(np.abs(diag)):.3e} "
            f"below {threshold:.3e}",
            residual=float(np.min(np.abs(diag))),
        )
    # Fold signs so that R's diagonal is positive; keeps output canonical.
    signs = np.sign(diag)
    return q * signs


def spectral_norm(a) -> float:
    """Largest singular value of ``a``."""
    a = as_matrix(a)
    try:
        s = np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"SVD did not converge for {a.shape} input: {exc}",
            residual=float(np.linalg.norm(a)),
        ) from exc
    return float(s[0])
