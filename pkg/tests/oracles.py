"""Independent oracles used to pin expected values in the tests.

These deliberately avoid the library code paths they check: the eigenvalue
oracle is a hand-rolled cyclic Jacobi sweep (no numpy.linalg factorizations),
the spectral-norm oracle is plain power iteration, and the best-subset oracle
enumerates every support.
"""

from itertools import combinations

import numpy as np


def jacobi_eigenvalues(a, sweeps=100, tol=1e-14):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Returns the eigenvalues sorted nonincreasing. Uses only elementary
    rotations, independently of any LAPACK eigen/SVD routine.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    for _ in range(sweeps):
        off = np.sqrt(np.sum(a**2) - np.sum(np.diagonal(a) ** 2))
        if off <= tol * max(1.0, np.linalg.norm(np.diagonal(a))):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
    return np.sort(np.diagonal(a))[::-1]


def singular_values_via_gram(a):
    """Singular values of ``a`` as square roots of eigenvalues of A^T A."""
    a = np.asarray(a, dtype=np.float64)
    gram = a.T @ a
    eigs = jacobi_eigenvalues(gram)
    return np.sqrt(np.clip(eigs, 0.0, None))


def power_iteration_norm(a, iters=2000, seed=123):
    """Largest singular value by power iteration on A^T A."""
    a = np.asarray(a, dtype=np.float64)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(a.shape[1])
    v /= np.linalg.norm(v)
    for _ in range(iters):
        w = a.T @ (a @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
    return float(np.linalg.norm(a @ v))


def best_subset_support(x, y, s):
    """Exhaustive best s-subset least squares; returns the winning support set."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    best, best_res = None, np.inf
    for support in combinations(range(x.shape[1]), s):
        cols = x[:, support]
        coef, *_ = np.linalg.lstsq(cols, y, rcond=None)
        res = np.linalg.norm(y - cols @ coef)
        if res < best_res:
            best_res = res
            best = frozenset(support)
    return best


def lasso_orthonormal_solution(x, y, penalty):
    """Closed-form LASSO solution for a design with orthonormal columns.

    Minimizes ||X b - y||^2 + penalty * ||b||_1, whose coordinates decouple to
    b_j = soft(x_j^T y, penalty / 2).
    """
    z = x.T @ y
    return np.sign(z) * np.maximum(np.abs(z) - penalty / 2.0, 0.0)
