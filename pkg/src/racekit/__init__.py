"""racekit: differentially private RACE sketches for streaming kernel sums."""

from .errors import (
    CsvError,
    DimensionMismatchError,
    DoubleReleaseError,
    FrozenSketchError,
    IncompatibleSketchError,
    InsufficientRowsError,
    InvalidParameterError,
    MalformedHeaderError,
    NonFiniteValueError,
    OptimizerDivergenceError,
    RaceError,
    RaggedRowError,
    SketchFormatError,
    TruncationError,
    VersionMismatchError,
    ZeroVectorError,
)
from .estimation import (
    QueryEstimate,
    error_bound,
    f_tilde,
    optimal_rows,
    query_many,
    query_mean,
    query_median_of_means,
)
from .io import Dataset, Transform, apply_transform, load_csv, scale, stream_csv, write_csv
from .lsh import (
    HashKind,
    LshFamily,
    asymmetric_pair_transform,
    collision_probability,
    hash_batch,
    hash_point,
    kernel_values,
    new_family,
    rebucket_allowance,
)
from .ml import (
    Classifier,
    RegressionModel,
    anomaly_score,
    classify,
    find_mode,
    fit_regression,
    is_anomaly,
    load_classifier,
    load_regression,
    save_classifier,
    save_regression,
    surrogate_loss,
    train_classifier,
)
from .optimize import OptimizerConfig, minimize_derivative_free
from .privacy import (
    PrivacyBudget,
    laplace_inverse_cdf,
    laplace_noise_matrix,
    laplace_sample,
    privatize,
)
from .sketch import RaceSketch, build, deserialize, load, merge, save, serialize

__version__ = "0.1.0"
