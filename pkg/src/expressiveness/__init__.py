"""Multimodal prediction of rated expressiveness.

The package measures how expressive people are from what they say and how
they move, then tests how well those signals predict human ratings:

- ``reliability``: inter-rater agreement (intraclass correlation) for the
  rating instrument.
- ``latent``: a Bayesian one-factor model that distills four rated
  questions into a single expressiveness score per person.
- ``visual`` / ``linguistic``: feature extraction from face-tracking
  output and interview transcripts.
- ``models``: elastic net, support vector regression, and a small neural
  network, each trained from scratch on standardized features.
- ``evaluation``: group-aware nested cross-validation, bootstrap modality
  comparisons, and coefficient reports.
- ``synth``: synthetic datasets with known ground truth for end-to-end
  checks.
- ``cli``: a config-driven command-line interface over all of the above.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .core import (
    Dataset,
    FeatureTable,
    GroupAssignment,
    LabelVector,
    RatingMatrix,
    TraitTable,
    load_dataset,
    load_feature_table,
    load_groups,
    load_labels,
    load_traits,
    merge_feature_tables,
    quartile_bins,
    save_dataset,
    save_feature_table,
    save_groups,
    save_labels,
    save_traits,
    zscore,
)
from .errors import (
    ConfigError,
    DegenerateConfigurationError,
    DegenerateInputError,
    DegenerateLabelsWarning,
    DegenerateRatingsError,
    DimensionMismatchError,
    DivergedError,
    EmptyInputError,
    EmptyTokenListError,
    EmptyTranscriptError,
    ExpressivenessError,
    InvalidPatternError,
    LengthMismatchError,
    MissingColumnError,
    MissingParticipantError,
    MixedFeatureSetsError,
    NonFiniteValueError,
    NotConvergedWarning,
    OutOfRangeError,
    ParseError,
    SingularCovarianceError,
    TooFewGroupsError,
    TooShortError,
    UnpairedRecordsError,
    ZeroVarianceError,
)
from .evaluation import (
    ComparisonResult,
    EvaluationRecord,
    FeatureCoefficient,
    FoldAssignment,
    Metrics,
    bootstrap_compare,
    coefficient_summary,
    default_grid,
    elastic_net_grid,
    load_records,
    make_folds,
    metrics,
    mlp_grid,
    nested_cv,
    save_records,
    summarize_records,
    svr_grid,
)
from .latent import (
    CfaConfig,
    CfaPosterior,
    FitIndices,
    external_validity,
    factor_scores,
    fit_cfa,
    fit_indices,
    sample_covariance,
    split_rhat,
)
from .linguistic import (
    DEMO_LEXICON,
    EXTERNAL_DIMENSIONS,
    Lexicon,
    Transcript,
    category_percentages,
    linguistic_feature_table,
    linguistic_signals,
    load_external_dimensions,
    load_lexicon,
    load_transcripts,
    save_lexicon,
    tokenize,
)
from .models import (
    ElasticNetParams,
    MlpParams,
    SvrParams,
    TrainedModel,
    fit_elastic_net,
    fit_mlp,
    fit_svr,
    load_model,
    model_from_json,
    model_to_json,
    predict,
    save_model,
)
from .reliability import (
    IccEstimate,
    icc_average_raters,
    interpret_icc,
    load_ratings,
    mean_across_raters,
    pool_rating_matrices,
    rating_matrices,
)
from .synth import (
    FeatureSpec,
    SynthConfig,
    SynthData,
    generate_synthetic,
    save_synthetic,
)
from .visual import (
    VISUAL_SIGNAL_NAMES,
    FrameTrack,
    IntervalTrack,
    align_landmarks,
    downsample,
    drop_untracked,
    kinematics,
    parse_track,
    reference_face,
    visual_feature_table,
    visual_signals,
)
