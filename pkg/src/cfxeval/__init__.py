"""Counterfactual evaluation of item-based recommendation explanations."""

from .analysis import (
    COMPARISONS,
    DIMENSIONS,
    SCORE_KINDS,
    AnalysisReport,
    RatingRow,
    RatingTable,
    TTestCell,
    betainc_regularized,
    build_report,
    load_ratings_csv,
    ols_fit_eval,
    paired_ttest_upper,
    pearson,
    spearman,
    student_t_cdf,
)
from .baselines import genre_jacc, item_sim
from .config import PipelineConfig, config_hash, parse_config
from .counterfactual import (
    FULL_RETRAIN,
    WARM_START,
    CfResult,
    CounterfactualContext,
    Explanation,
    build_context,
    cf_finetune,
    cf_qualitative,
    cf_retrain,
    cf_score,
    score_context,
    validate_explanation,
)
from .dataset import (
    InteractionDataset,
    Interaction,
    SyntheticHistory,
    load_movielens,
    materialize,
    popularity_threshold,
    remove_interactions,
    sample_history,
)
from .errors import CfxError, ConfigError, DataError, NumericalError, ParseError
from .explain import (
    CandidateSet,
    SelectionTriple,
    enumerate_candidates,
    select_baseline_items,
    select_triple,
)
from .mf import (
    FactorModel,
    TrainConfig,
    fold_in_user,
    load_checkpoint,
    normalize_scores,
    predict,
    rank,
    save_checkpoint,
    train,
)
from .pipeline import PipelineResult, ScoreRow, run_generate, score_candidates

__version__ = "0.1.0"
