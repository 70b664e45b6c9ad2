"""Sparse-recovery toolkit and benchmark harness for linear models whose
design matrix has Bernoulli-missing entries.

Provides three recovery methods (IMAT with adaptive or exponential
thresholding, IHT, and LASSO coordinate descent), soft-impute low-rank
completion, synthetic data generation, and a reproducible sweep/benchmark
runner with CSV output.
"""

__version__ = "0.1.0"

from .datagen import Dataset, MaskedMatrix, SparseSignal, gen_dataset
from .errors import (
    ConfigError,
    DivergenceError,
    InvalidInputError,
    NumericalError,
    RankDeficiencyError,
)
from .solvers import (
    AdaptiveThreshold,
    ExponentialThreshold,
    IhtConfig,
    ImatConfig,
    LassoConfig,
    RecoveryResult,
    iht_recover,
    imat_recover,
    lasso_solve,
)
from .completion import CompletionConfig, CompletionResult, soft_impute
from .experiment import (
    DatasetParams,
    SplitDataset,
    SweepRecord,
    SweepSpec,
    default_grids,
    rmse,
    run_sweep,
    split,
    time_training,
)
