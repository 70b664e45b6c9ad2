"""Synthetic dataset generation: low-rank design, sparse coefficients,
Gaussian noise, and a Bernoulli observation mask.

RNG contract
------------
All randomness comes from numpy's PCG64 bit generator (``np.random.default_rng``),
seeded directly with a 64-bit integer. Normal draws use numpy's ziggurat
``standard_normal``, uniforms use ``random``, and support subsets use
``Generator.choice`` without replacement. A master seed is split into
consecutive sub-seeds ``seed + 0 .. seed + 5`` consumed in the fixed order
U, V, singular values, beta, noise, mask, so regenerating with the same seed
reproduces a bit-identical dataset. The generator name is exported as
``RNG_NAME`` and recorded in run metadata.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import InvalidInputError

RNG_NAME = "numpy-PCG64 (ziggurat normals)"

# Offsets of the per-component sub-seeds relative to the master seed.
SUBSEED_U = 0
SUBSEED_V = 1
SUBSEED_SIGMA = 2
SUBSEED_BETA = 3
SUBSEED_NOISE = 4
SUBSEED_MASK = 5


@dataclass(frozen=True)
class SparseSignal:
    """Coefficient vector with exactly ``sparsity`` nonzero entries."""

    values: np.ndarray
    sparsity: int

    def __post_init__(self):
        values = linalg.as_vector(self.values, "values")
        object.__setattr__(self, "values", values)
        if not 0 <= self.sparsity <= values.size:
            raise InvalidInputError(
                f"sparsity {self.sparsity} outside [0, {values.size}]"
            )
        nnz = int(np.count_nonzero(values))
        if nnz != self.sparsity:
            raise InvalidInputError(
                f"values have {nnz} nonzeros but sparsity={self.sparsity}"
            )

    @property
    def support(self):
        """Indices of the nonzero entries."""
        return np.flatnonzero(self.values)


@dataclass(frozen=True)
class MaskedMatrix:
    """Entrywise-masked matrix: ``observed = full ⊙ mask`` with a 0/1 mask."""

    observed: np.ndarray
    mask: np.ndarray
    keep_probability: float

    def __post_init__(self):
        observed = linalg.as_matrix(self.observed, "observed")
        mask = linalg.as_matrix(self.mask, "mask")
        object.__setattr__(self, "observed", observed)
        object.__setattr__(self, "mask", mask)
        if observed.shape != mask.shape:
            raise InvalidInputError(
                f"observed {observed.shape} and mask {mask.shape} shapes differ"
            )
        if not np.all((mask == 0.0) | (mask == 1.0)):
            raise InvalidInputError("mask entries must be 0 or 1")
        if np.any(observed[mask == 0.0] != 0.0):
            raise InvalidInputError("observed must be zero wherever mask is zero")
        if not 0.0 <= self.keep_probability <= 1.0:
            raise InvalidInputError(
                f"keep_probability {self.keep_probability} outside [0, 1]"
            )


@dataclass(frozen=True)
class Dataset:
    """A full synthetic regression problem.

    ``labels`` are generated from the unmasked ``oracle`` matrix; masking is
    an observation defect on the design only.
    """

    masked: MaskedMatrix
    oracle: np.ndarray
    beta_true: SparseSignal
    labels: np.ndarray
    noise_sigma: float
    seed: int


def gen_low_rank(m, n, r, seed):
    """Random m-by-n matrix of exact rank ``r``.

    Built as U @ diag(sigma) @ V.T where U and V are orthonormalized Gaussian
    blocks and sigma holds the magnitudes of r standard-normal draws
    (singular values must be nonnegative).
    """
    if not 1 <= r <= min(m, n):
        raise InvalidInputError(f"rank {r} outside [1, {min(m, n)}] for {m}x{n}")
    u = linalg.orthonormalize(
        np.random.default_rng(seed + SUBSEED_U).standard_normal((m, r))
    )
    v = linalg.orthonormalize(
        np.random.default_rng(seed + SUBSEED_V).standard_normal((n, r))
    )
    sigma = np.abs(np.random.default_rng(seed + SUBSEED_SIGMA).standard_normal(r))
    return (u * sigma) @ v.T


def gen_sparse_beta(n, s, seed):
    """Sparse coefficient vector: s Gaussian entries on a uniform random support."""
    if not 1 <= s <= n:
        raise InvalidInputError(f"sparsity {s} outside [1, {n}]")
    rng = np.random.default_rng(seed)
    support = rng.choice(n, size=s, replace=False)
    values = np.zeros(n)
    values[support] = rng.standard_normal(s)
    return SparseSignal(values=values, sparsity=s)


def apply_mask(x, alpha, seed):
    """Zero each entry of ``x`` independently with probability 1 - alpha.

    ``alpha`` is the KEEP probability: alpha = 0.5 means half the entries
    are missing on average.
    """
    x = linalg.as_matrix(x, "x")
    if not 0.0 <= alpha <= 1.0:
        raise InvalidInputError(f"alpha {alpha} outside [0, 1]")
    rng = np.random.default_rng(seed)
    mask = (rng.random(x.shape) < alpha).astype(np.float64)
    return MaskedMatrix(observed=x * mask, mask=mask, keep_probability=float(alpha))


def gen_dataset(m, n, r, s, alpha, noise_sigma=0.1, seed=0):
    """Generate a complete problem instance.

    Composes the low-rank design, the sparse coefficients, labels
    y = oracle @ beta + noise with noise ~ N(0, noise_sigma^2), and the
    Bernoulli mask, with sub-seeds derived from ``seed`` (see module docstring).
    """
    if noise_sigma < 0:
        raise InvalidInputError(f"noise_sigma {noise_sigma} must be >= 0")
    oracle = gen_low_rank(m, n, r, seed)
    beta = gen_sparse_beta(n, s, seed + SUBSEED_BETA)
    noise = np.random.default_rng(seed + SUBSEED_NOISE).standard_normal(m) * noise_sigma
    labels = oracle @ beta.values + noise
    masked = apply_mask(oracle, alpha, seed + SUBSEED_MASK)
    return Dataset(
        masked=masked,
        oracle=oracle,
        beta_true=beta,
        labels=labels,
        noise_sigma=float(noise_sigma),
        seed=int(seed),
    )


def save_dataset(ds, path):
    """Write a dataset to ``path`` as an uncompressed .npz archive.

    Keys: observed, mask, keep_probability, oracle, beta, sparsity, labels,
    noise_sigma, seed. Arrays are float64; scalars are 0-d arrays. The format
    round-trips exactly (see load_dataset).
    """
    np.savez(
        path,
        observed=ds.masked.observed,
        mask=ds.masked.mask,
        keep_probability=np.float64(ds.masked.keep_probability),
        oracle=ds.oracle,
        beta=ds.beta_true.values,
        sparsity=np.int64(ds.beta_true.sparsity),
        labels=ds.labels,
        noise_sigma=np.float64(ds.noise_sigma),
        seed=np.int64(ds.seed),
    )


def load_dataset(path):
    """Read a dataset written by save_dataset."""
    with np.load(path) as data:
        masked = MaskedMatrix(
            observed=data["observed"],
            mask=data["mask"],
            keep_probability=float(data["keep_probability"]),
        )
        return Dataset(
            masked=masked,
            oracle=data["oracle"],
            beta_true=SparseSignal(values=data["beta"], sparsity=int(data["sparsity"])),
            labels=data["labels"],
            noise_sigma=float(data["noise_sigma"]),
            seed=int(data["seed"]),
        )
