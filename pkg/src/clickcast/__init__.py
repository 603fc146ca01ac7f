"""Hourly news-click prediction: click-log parsing, feature extraction,
tree and ensemble learners, target transforms, and evaluation."""

from .records import (
    ArticleContent,
    Dataset,
    KeyphraseEntry,
    LinkHourEntry,
    SocialMetadata,
    load_content,
    load_dataset,
    load_keyphrases,
    parse_dataset,
    parse_dataset_tsv,
    parse_entry,
    write_dataset,
    write_dataset_tsv,
)
from .errors import ConfigError, DataError, ParseError
from .features import (
    FEATURE_GROUPS,
    FeatureField,
    FeatureSchema,
    FeatureVector,
    assemble_vector,
    build_schema,
    count_named_entities,
    filter_keyphrases,
    keyphrase_counts,
    stylometric_features,
    time_features,
)
from .enrichment import (
    EnrichmentCache,
    EnrichmentRecord,
    ProviderConfig,
    enrich_dataset,
    make_social_provider,
    make_title_provider,
)
from .linear import LinearModel, LinearRegressor, fit_linear
from .trees import (
    InternalNode,
    LeafNode,
    M5Params,
    M5PRegressor,
    REPTreeParams,
    REPTreeRegressor,
    TreeNode,
    best_split,
    fit_m5p,
    fit_reptree,
    predict_model,
    reptree_stages,
    sdr,
)
from .ensembles import (
    AdditiveModel,
    AdditiveRegressor,
    BaggedModel,
    BaggingRegressor,
    LearnerSpec,
    bootstrap_indices,
    build_estimator,
    combined_regressor,
    derived_seed,
    fit_additive,
    fit_bagging,
    fit_combined,
    fit_learner,
    learner_spec_of,
    predict_additive,
    predict_bagged,
    predict_learner,
    stage_subsample_indices,
)
from .evaluation import (
    MAX_CLICK_PREDICTION,
    EvalReport,
    OutlierPolicy,
    TargetScale,
    clip_outliers,
    compute_metrics,
    forward_target,
    inverse_target,
    inverse_target_flagged,
    kfold_split,
)
from .model_io import (
    MODEL_FORMAT,
    MODEL_VERSION,
    atomic_write_text,
    decode_model,
    encode_model,
    load_model,
    load_model_document,
    save_model,
)
from .pipeline import (
    ABLATION_LADDER,
    EnrichmentData,
    PipelineConfig,
    TrainedPipeline,
    assemble_matrix,
    cross_validate,
    default_learner_spec,
    fold_seed,
    gather_enrichment,
    load_config,
    load_pipeline,
    parse_config,
    predict_pipeline,
    run_ablation,
    save_pipeline,
    train_pipeline,
)
from .synth import SynthBundle, SynthParams, synth_bundle, synth_generate, write_bundle

__version__ = "0.1.0"

__all__ = [
    "ABLATION_LADDER",
    "AdditiveModel",
    "AdditiveRegressor",
    "ArticleContent",
    "BaggedModel",
    "BaggingRegressor",
    "ConfigError",
    "DataError",
    "Dataset",
    "EnrichmentCache",
    "EnrichmentData",
    "EnrichmentRecord",
    "EvalReport",
    "FEATURE_GROUPS",
    "FeatureField",
    "FeatureSchema",
    "FeatureVector",
    "InternalNode",
    "KeyphraseEntry",
    "LeafNode",
    "LearnerSpec",
    "LinearModel",
    "LinearRegressor",
    "LinkHourEntry",
    "M5PRegressor",
    "M5Params",
    "MAX_CLICK_PREDICTION",
    "MODEL_FORMAT",
    "MODEL_VERSION",
    "OutlierPolicy",
    "ParseError",
    "PipelineConfig",
    "ProviderConfig",
    "REPTreeParams",
    "REPTreeRegressor",
    "SocialMetadata",
    "SynthBundle",
    "SynthParams",
    "TargetScale",
    "TrainedPipeline",
    "TreeNode",
    "assemble_matrix",
    "assemble_vector",
    "atomic_write_text",
    "best_split",
    "bootstrap_indices",
    "build_estimator",
    "build_schema",
    "clip_outliers",
    "combined_regressor",
    "compute_metrics",
    "count_named_entities",
    "cross_validate",
    "decode_model",
    "default_learner_spec",
    "derived_seed",
    "encode_model",
    "enrich_dataset",
    "filter_keyphrases",
    "fit_additive",
    "fit_bagging",
    "fit_combined",
    "fit_learner",
    "fit_linear",
    "fit_m5p",
    "fit_reptree",
    "fold_seed",
    "forward_target",
    "gather_enrichment",
    "inverse_target",
    "inverse_target_flagged",
    "keyphrase_counts",
    "kfold_split",
    "learner_spec_of",
    "load_config",
    "load_content",
    "load_dataset",
    "load_keyphrases",
    "load_model",
    "load_model_document",
    "load_pipeline",
    "make_social_provider",
    "make_title_provider",
    "parse_config",
    "parse_dataset",
    "parse_dataset_tsv",
    "parse_entry",
    "predict_additive",
    "predict_bagged",
    "predict_learner",
    "predict_model",
    "predict_pipeline",
    "reptree_stages",
    "run_ablation",
    "save_model",
    "save_pipeline",
    "sdr",
    "stage_subsample_indices",
    "stylometric_features",
    "synth_bundle",
    "synth_generate",
    "time_features",
    "train_pipeline",
    "write_bundle",
    "write_dataset",
    "write_dataset_tsv",
]
