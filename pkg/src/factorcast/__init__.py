"""Factor-model regressions and LSTM forecasting for monthly sector returns."""

from .data_ingest import (
    AlignedDataset,
    MonthlyPanel,
    align_panels,
    merge_panels,
    normalize_factor_names,
    parse_panel_csv,
    serialize_panel,
)
from .errors import (
    AlignmentError,
    DivergenceError,
    FactorcastError,
    InputDataError,
    MissingColumnError,
    NumericError,
    ParseError,
    RankDeficientError,
)
from .factor_models import (
    ComparisonTable,
    FactorRegression,
    ModelSpec,
    build_design,
    compare_models,
    fit_factor_model,
    format_equation,
    model_spec,
)
from .lstm import (
    LstmParams,
    LstmState,
    TrainConfig,
    TrainHistory,
    WindowedDataset,
    bptt_gradients,
    cell_forward,
    evaluate,
    forward_sequence,
    make_windows,
    split_7_3,
    train,
)
from .preprocess import CleanReport, clean_panel, flag_outliers, lagrange_fill_point
from .regression import (
    DesignMatrix,
    Metrics,
    RegressionFit,
    f_sf,
    make_design,
    ols_fit,
    predict,
    prediction_metrics,
    significance_stars,
    student_t_cdf,
)

__version__ = "0.1.0"
