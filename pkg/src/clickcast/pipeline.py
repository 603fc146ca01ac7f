"""End-to-end training, prediction, cross-validation, and ablation.

A :class:`PipelineConfig` names everything a run needs: active feature
groups, keyphrase/content side files, enrichment providers, the learner
recipe, the target scale, the outlier policy, fold count, and one master
seed.  Training freezes a :class:`~.features.FeatureSchema` from the data,
maps clicks into model space, fits the learner, and captures the training
maximum click count for clipping.  All reported metrics are computed back
in click space.

Cross-validation assembles the feature matrix once over the full dataset
(mirroring the run-once enrichment protocol) and trains each fold's model
on the complement rows with a per-fold seed substream, so a fold is
exactly reproducible as a standalone train/predict run on the same split.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

import numpy as np
import yaml

from .enrichment import (
    EnrichmentCache,
    EnrichmentRecord,
    ProviderConfig,
    enrich_dataset,
    make_social_provider,
    make_title_provider,
)
from .ensembles import LearnerSpec, TrainedModel, fit_learner, predict_learner
from .errors import ConfigError, DataError, ParseError
from .evaluation import (
    EvalReport,
    OutlierPolicy,
    TargetScale,
    clip_outliers,
    compute_metrics,
    forward_target,
    inverse_target_flagged,
    kfold_split,
)
from .features import (
    FEATURE_GROUPS,
    FeatureField,
    FeatureSchema,
    assemble_vector,
    build_schema,
    filter_keyphrases,
)
from .model_io import (
    atomic_write_text,
    decode_model,
    encode_model,
)
from .records import ArticleContent, Dataset, LinkHourEntry, load_content, load_keyphrases

__all__ = [
    "ABLATION_LADDER",
    "PIPELINE_FORMAT",
    "PIPELINE_VERSION",
    "EnrichmentData",
    "PipelineConfig",
    "TrainedPipeline",
    "assemble_matrix",
    "cross_validate",
    "default_learner_spec",
    "fold_seed",
    "gather_enrichment",
    "load_config",
    "load_pipeline",
    "parse_config",
    "predict_pipeline",
    "run_ablation",
    "save_pipeline",
    "train_pipeline",
]

logger = logging.getLogger(__name__)

PIPELINE_FORMAT = "clickcast-pipeline"
PIPELINE_VERSION = 1

# Feature-group ladder reported by ablation runs, cumulative left to right.
ABLATION_LADDER: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("Base", ("base",)),
    ("Base+F1", ("base", "f1")),
    ("Base+F1+F2", ("base", "f1", "f2")),
    ("Base+F1+F2+F3", ("base", "f1", "f2", "f3")),
    ("Base+F1+F2+F3+F4", ("base", "f1", "f2", "f3", "f4")),
    ("All", FEATURE_GROUPS),
)


def default_learner_spec() -> LearnerSpec:
    """The winning stack: additive regression over bagged model trees."""
    return LearnerSpec(
        kind="additive",
        params={"iterations": 10, "shrinkage": 1.0, "subsample_fraction": 0.5},
        base=LearnerSpec(
            kind="bagging",
            params={"rounds": 10},
            base=LearnerSpec(kind="m5p"),
        ),
    )


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one run needs, addressable from the config file."""

    feature_groups: tuple[str, ...] = FEATURE_GROUPS
    keyphrases_path: Optional[str] = None
    content_path: Optional[str] = None
    title_hits_provider: Optional[ProviderConfig] = None
    social_provider: Optional[ProviderConfig] = None
    cache_dir: Optional[str] = None
    learner: LearnerSpec = field(default_factory=default_learner_spec)
    scale: TargetScale = field(default_factory=TargetScale)
    outlier_policy: OutlierPolicy = field(default_factory=OutlierPolicy)
    cv_folds: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        unknown = set(self.feature_groups) - set(FEATURE_GROUPS)
        if unknown:
            raise ConfigError(f"unknown feature groups: {sorted(unknown)}")
        if not self.feature_groups:
            raise ConfigError("at least one feature group must be active")
        if self.cv_folds < 2:
            raise ConfigError("cv_folds must be >= 2")

    def to_config(self) -> dict:
        out: dict = {
            "feature_groups": list(self.feature_groups),
            "learner": self.learner.to_config(),
            "target_scale": self.scale.kind,
            "outlier_policy": self.outlier_policy.kind,
            "cv_folds": self.cv_folds,
            "seed": self.seed,
        }
        if self.keyphrases_path:
            out["keyphrases_path"] = self.keyphrases_path
        if self.content_path:
            out["content_path"] = self.content_path
        return out


_TOP_LEVEL_KEYS = frozenset(
    {
        "feature_groups",
        "keyphrases_path",
        "content_path",
        "enrichment",
        "learner",
        "target_scale",
        "outlier_policy",
        "cv_folds",
        "seed",
    }
)
_ENRICHMENT_KEYS = frozenset({"title_hits", "social", "cache_dir"})
_PROVIDER_KEYS = frozenset(
    {
        "mode",
        "fixture_path",
        "endpoint_url",
        "timeout_seconds",
        "max_concurrent_requests",
        "retry_count",
    }
)


def _resolve(path: Optional[str], base_dir: Optional[str]) -> Optional[str]:
    if path is None or base_dir is None or os.path.isabs(path):
        return path
    return os.path.join(base_dir, path)


def _parse_provider(obj: Any, where: str, base_dir: Optional[str]) -> ProviderConfig:
    if not isinstance(obj, Mapping):
        raise ConfigError(f"{where} must be a mapping")
    unknown = set(obj) - _PROVIDER_KEYS
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")
    data = dict(obj)
    if "fixture_path" in data:
        data["fixture_path"] = _resolve(data["fixture_path"], base_dir)
    return ProviderConfig(**data)


def parse_config(obj: Mapping[str, Any], base_dir: Optional[str] = None) -> PipelineConfig:
    """Build a PipelineConfig from a parsed config mapping.

    Relative paths are resolved against ``base_dir`` (normally the config
    file's directory).  Unknown keys anywhere are errors.
    """
    if not isinstance(obj, Mapping):
        raise ConfigError("config must be a mapping")
    unknown = set(obj) - _TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    kwargs: dict[str, Any] = {}
    if "feature_groups" in obj:
        groups = obj["feature_groups"]
        if isinstance(groups, str) or not isinstance(groups, Sequence):
            raise ConfigError("feature_groups must be a list of group names")
        kwargs["feature_groups"] = tuple(str(g) for g in groups)
    for key in ("keyphrases_path", "content_path"):
        if obj.get(key) is not None:
            kwargs[key] = _resolve(str(obj[key]), base_dir)
    if "enrichment" in obj:
        block = obj["enrichment"]
        if not isinstance(block, Mapping):
            raise ConfigError("enrichment must be a mapping")
        unknown = set(block) - _ENRICHMENT_KEYS
        if unknown:
            raise ConfigError(
                f"unknown key(s) in enrichment: {', '.join(sorted(unknown))}"
            )
        if block.get("title_hits") is not None:
            kwargs["title_hits_provider"] = _parse_provider(
                block["title_hits"], "enrichment.title_hits", base_dir
            )
        if block.get("social") is not None:
            kwargs["social_provider"] = _parse_provider(
                block["social"], "enrichment.social", base_dir
            )
        if block.get("cache_dir") is not None:
            kwargs["cache_dir"] = _resolve(str(block["cache_dir"]), base_dir)
    if "learner" in obj:
        kwargs["learner"] = LearnerSpec.from_config(obj["learner"])
    if "target_scale" in obj:
        kwargs["scale"] = TargetScale(str(obj["target_scale"]))
    if "outlier_policy" in obj:
        kwargs["outlier_policy"] = OutlierPolicy(str(obj["outlier_policy"]))
    for key in ("cv_folds", "seed"):
        if key in obj:
            value = obj[key]
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{key} must be an integer")
            kwargs[key] = value
    return PipelineConfig(**kwargs)


def load_config(path) -> PipelineConfig:
    """Load a YAML config file."""
    with open(path, "r", encoding="utf-8") as handle:
        try:
            obj = yaml.safe_load(handle)
        except yaml.YAMLError as exc:
            raise ParseError(f"{path}: invalid config: {exc}") from exc
    if obj is None:
        obj = {}
    if not isinstance(obj, Mapping):
        raise ConfigError(f"{path}: config must be a mapping")
    return parse_config(obj, base_dir=os.path.dirname(os.path.abspath(path)))


# -- enrichment ----------------------------------------------------------------

@dataclass(frozen=True)
class EnrichmentData:
    """Fetched enrichment plus the article-content sidecar, keyed by news id."""

    records: Mapping[int, EnrichmentRecord] = field(default_factory=dict)
    content: Mapping[int, ArticleContent] = field(default_factory=dict)

    @classmethod
    def empty(cls) -> "EnrichmentData":
        return cls()


def gather_enrichment(dataset: Dataset, config: PipelineConfig) -> EnrichmentData:
    """Fetch title hits and social counters for a dataset, per the config.

    Providers that are not configured simply contribute nothing; features
    depending on them assemble as masked zeros.
    """
    content = load_content(config.content_path) if config.content_path else {}
    title_provider = (
        make_title_provider(config.title_hits_provider)
        if config.title_hits_provider
        else None
    )
    social_provider = (
        make_social_provider(config.social_provider) if config.social_provider else None
    )
    if title_provider is None and social_provider is None:
        return EnrichmentData(records={}, content=content)
    cache = EnrichmentCache(config.cache_dir) if config.cache_dir else None
    max_concurrent = max(
        cfg.max_concurrent_requests
        for cfg in (config.title_hits_provider, config.social_provider)
        if cfg is not None
    )
    records = enrich_dataset(
        dataset,
        title_provider=title_provider,
        social_provider=social_provider,
        cache=cache,
        content=content,
        max_concurrent=max_concurrent,
    )
    return EnrichmentData(records=records, content=content)


# -- matrix assembly -----------------------------------------------------------

def _first_seen_of(entries: Sequence[LinkHourEntry]) -> dict[int, Any]:
    seen: dict[int, Any] = {}
    for entry in entries:
        current = seen.get(entry.news_id)
        if current is None or entry.timestamp < current:
            seen[entry.news_id] = entry.timestamp
    return seen


def assemble_matrix(
    entries: Sequence[LinkHourEntry],
    schema: FeatureSchema,
    enrichment: EnrichmentData,
    first_seen: Mapping[int, Any],
    unseen_nominal: str = "error",
) -> np.ndarray:
    """Stack assemble_vector over entries into an (n, width) float matrix."""
    rows = np.zeros((len(entries), schema.width), dtype=np.float64)
    for i, entry in enumerate(entries):
        record = enrichment.records.get(entry.news_id)
        vector = assemble_vector(
            entry,
            content=enrichment.content.get(entry.news_id),
            social=record.social if record else None,
            title_hits=record.title_hits if record else None,
            schema=schema,
            first_seen=first_seen.get(entry.news_id),
            unseen_nominal=unseen_nominal,
        )
        rows[i] = vector.values
    return rows


def _load_phrases(config: PipelineConfig) -> tuple[str, ...]:
    if "f3" not in config.feature_groups or not config.keyphrases_path:
        return ()
    entries = filter_keyphrases(load_keyphrases(config.keyphrases_path))
    return tuple(e.phrase for e in entries)


# -- trained pipeline ----------------------------------------------------------

@dataclass(frozen=True)
class TrainedPipeline:
    """A frozen schema, a trained model, and the reporting-space plumbing."""

    schema: FeatureSchema
    model: TrainedModel
    scale: TargetScale
    policy: OutlierPolicy
    learner: LearnerSpec
    stats: Mapping[str, Any] = field(default_factory=dict)

    def predict(self, entries, enrichment: Optional[EnrichmentData] = None, **kw):
        return predict_pipeline(self, entries, enrichment, **kw)

    def save(self, path) -> None:
        save_pipeline(self, path)

    @classmethod
    def load(cls, path) -> "TrainedPipeline":
        return load_pipeline(path)


def fold_seed(master_seed: int, fold_index: int) -> int:
    """The learner seed used for one cross-validation fold."""
    return int(np.random.SeedSequence([master_seed, fold_index]).generate_state(1)[0])


def train_pipeline(
    dataset: Dataset,
    enrichment: Optional[EnrichmentData],
    config: PipelineConfig,
    *,
    schema: Optional[FeatureSchema] = None,
    train_indices: Optional[Sequence[int]] = None,
    seed_override: Optional[int] = None,
) -> TrainedPipeline:
    """Freeze a schema, transform targets, fit the learner, capture the max.

    ``schema``/``train_indices``/``seed_override`` exist so a cross-
    validation fold can be reproduced as a standalone run: they default to
    the whole dataset and the config seed.
    """
    if len(dataset) == 0:
        raise DataError("cannot train on an empty dataset")
    enrichment = enrichment if enrichment is not None else EnrichmentData.empty()
    if schema is None:
        schema = build_schema(dataset, config.feature_groups, _load_phrases(config))
    if train_indices is None:
        indices = np.arange(len(dataset), dtype=np.intp)
    else:
        indices = np.asarray(sorted(int(i) for i in train_indices), dtype=np.intp)
        if indices.size == 0:
            raise DataError("cannot train on an empty index set")
        if indices[0] < 0 or indices[-1] >= len(dataset):
            raise DataError("train index out of range")
    entries = [dataset[int(i)] for i in indices]
    X = assemble_matrix(entries, schema, enrichment, dataset.first_seen, "error")
    clicks = np.array([e.clicks for e in entries], dtype=np.float64)
    y = forward_target(clicks, config.scale)
    seed = config.seed if seed_override is None else seed_override
    model = fit_learner(config.learner, X, y, seed=seed)
    train_max = int(clicks.max())
    stats = {
        "n_rows": int(len(entries)),
        "n_features": int(schema.width),
        "train_max_clicks": train_max,
    }
    return TrainedPipeline(
        schema=schema,
        model=model,
        scale=config.scale,
        policy=config.outlier_policy.with_max(train_max),
        learner=config.learner,
        stats=stats,
    )


def predict_pipeline(
    pipeline: TrainedPipeline,
    entries: Union[Dataset, Sequence[LinkHourEntry]],
    enrichment: Optional[EnrichmentData] = None,
    *,
    first_seen: Optional[Mapping[int, Any]] = None,
) -> np.ndarray:
    """Assemble, predict, back-transform, clip; returns click-space reals.

    Missing enrichment and unseen nominal categories are never errors at
    prediction time — they assemble as masked zeros.  ``first_seen``
    overrides the publication-origin map (a Dataset supplies its own).
    """
    enrichment = enrichment if enrichment is not None else EnrichmentData.empty()
    entry_list = list(entries)
    if not entry_list:
        return np.zeros(0, dtype=np.float64)
    if first_seen is None:
        first_seen = (
            entries.first_seen
            if isinstance(entries, Dataset)
            else _first_seen_of(entry_list)
        )
    X = assemble_matrix(entry_list, pipeline.schema, enrichment, first_seen, "zero")
    raw = np.asarray(predict_learner(pipeline.model, X), dtype=np.float64)
    clicks, overflowed = inverse_target_flagged(raw, pipeline.scale)
    count = int(np.count_nonzero(overflowed))
    if count:
        logger.warning(
            "%d prediction(s) exceeded the click ceiling and were clamped", count
        )
    return clip_outliers(clicks, pipeline.policy)


def cross_validate(
    dataset: Dataset,
    enrichment: Optional[EnrichmentData],
    config: PipelineConfig,
) -> EvalReport:
    """K-fold cross-validation; one report over all rows, in click space.

    The schema and feature matrix come from the full dataset (enrichment
    runs once); each fold trains on the complement with its own seed
    substream and its own captured training maximum.
    """
    n = len(dataset)
    if n == 0:
        raise DataError("cannot cross-validate an empty dataset")
    enrichment = enrichment if enrichment is not None else EnrichmentData.empty()
    folds = kfold_split(n, config.cv_folds, config.seed)
    schema = build_schema(dataset, config.feature_groups, _load_phrases(config))
    entries = list(dataset)
    X = assemble_matrix(entries, schema, enrichment, dataset.first_seen, "error")
    clicks = np.array([e.clicks for e in entries], dtype=np.float64)
    y = forward_target(clicks, config.scale)
    preds = np.empty(n, dtype=np.float64)
    every = np.arange(n, dtype=np.intp)
    for index, fold in enumerate(folds):
        train_idx = np.setdiff1d(every, fold)
        model = fit_learner(
            config.learner, X[train_idx], y[train_idx], seed=fold_seed(config.seed, index)
        )
        raw = np.asarray(predict_learner(model, X[fold]), dtype=np.float64)
        fold_clicks, _ = inverse_target_flagged(raw, config.scale)
        policy = config.outlier_policy.with_max(int(clicks[train_idx].max()))
        preds[fold] = clip_outliers(fold_clicks, policy)
    return compute_metrics(preds, clicks, config_echo=config.to_config())


def run_ablation(
    dataset: Dataset,
    enrichment: Optional[EnrichmentData],
    config: PipelineConfig,
) -> list[tuple[str, EvalReport]]:
    """Cross-validate the cumulative feature-group ladder; returns ordered rows."""
    out = []
    for label, groups in ABLATION_LADDER:
        variant = dataclasses.replace(config, feature_groups=groups)
        out.append((label, cross_validate(dataset, enrichment, variant)))
    return out


# -- serialization ---------------------------------------------------------------

def _encode_schema(schema: FeatureSchema) -> dict:
    return {
        "groups": sorted(schema.groups),
        "keyphrases": list(schema.keyphrases),
        "fields": [
            {
                "name": f.name,
                "group": f.group,
                "kind": f.kind,
                "categories": list(f.categories),
            }
            for f in schema.fields
        ],
    }


def _decode_schema(obj: Any) -> FeatureSchema:
    if not isinstance(obj, dict):
        raise DataError("schema record must be an object")
    for key in ("groups", "keyphrases", "fields"):
        if not isinstance(obj.get(key), list):
            raise DataError(f"schema record needs a {key!r} list")
    fields = []
    for raw in obj["fields"]:
        if not isinstance(raw, dict):
            raise DataError("schema fields must be objects")
        try:
            fields.append(
                FeatureField(
                    name=str(raw["name"]),
                    group=str(raw["group"]),
                    kind=str(raw["kind"]),
                    categories=tuple(str(c) for c in raw.get("categories", ())),
                )
            )
        except KeyError as exc:
            raise DataError(f"schema field missing {exc.args[0]!r}") from exc
    return FeatureSchema(
        fields=tuple(fields),
        groups=frozenset(str(g) for g in obj["groups"]),
        keyphrases=tuple(str(p) for p in obj["keyphrases"]),
    )


def save_pipeline(pipeline: TrainedPipeline, path) -> None:
    """Write schema + model + scale + policy as one versioned document."""
    document = {
        "format": PIPELINE_FORMAT,
        "version": PIPELINE_VERSION,
        "schema": _encode_schema(pipeline.schema),
        "target_scale": pipeline.scale.kind,
        "outlier_policy": {
            "kind": pipeline.policy.kind,
            "train_max_clicks": pipeline.policy.train_max_clicks,
        },
        "learner": pipeline.learner.to_config(),
        "stats": dict(pipeline.stats),
        "model": encode_model(pipeline.model),
    }
    atomic_write_text(path, json.dumps(document, indent=1, allow_nan=False) + "\n")


def load_pipeline(path) -> TrainedPipeline:
    """Load a pipeline document written by :func:`save_pipeline`."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not a valid pipeline file: {exc}") from exc
    if not isinstance(document, dict):
        raise DataError(f"{path}: pipeline document must be an object")
    if document.get("format") != PIPELINE_FORMAT:
        raise DataError(f"{path}: not a {PIPELINE_FORMAT} document")
    if document.get("version") != PIPELINE_VERSION:
        raise DataError(f"{path}: unsupported version {document.get('version')!r}")
    policy_obj = document.get("outlier_policy")
    if not isinstance(policy_obj, dict) or "kind" not in policy_obj:
        raise DataError(f"{path}: missing outlier_policy record")
    max_clicks = policy_obj.get("train_max_clicks")
    if max_clicks is not None:
        max_clicks = int(max_clicks)
    stats = document.get("stats") or {}
    if not isinstance(stats, dict):
        raise DataError(f"{path}: stats must be an object")
    if "learner" not in document or "model" not in document:
        raise DataError(f"{path}: missing learner or model record")
    return TrainedPipeline(
        schema=_decode_schema(document.get("schema")),
        model=decode_model(document["model"]),
        scale=TargetScale(str(document.get("target_scale"))),
        policy=OutlierPolicy(kind=str(policy_obj["kind"]), train_max_clicks=max_clicks),
        learner=LearnerSpec.from_config(document["learner"]),
        stats=stats,
    )
