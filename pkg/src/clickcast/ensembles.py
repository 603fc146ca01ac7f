"""Bagging and additive-regression meta-learners over any base learner.

A base learner is named by a :class:`LearnerSpec` — a small recursive
description (kind, parameters, optional nested base) that can be written in
a config file and echoed into serialized models.  The meta-learners draw
their randomness from per-round / per-stage substreams derived from one
master seed, so results are reproducible and independent of scheduling:

* bagging, round ``r``: bootstrap indices from ``default_rng([seed, r])``;
* additive regression, stage ``i``: subsample from ``default_rng([seed, i])``;
* a stochastic base learner inside round/stage ``j`` is seeded with the
  first output of ``SeedSequence([seed, j, 1])``.

The additive model keeps the training-target mean as its starting point
and sums shrunken stage predictions on top; residuals are updated on all
rows each stage even when stages fit only a subsample.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping, Optional, Union

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .errors import ConfigError
from .linear import LinearModel, LinearRegressor, fit_linear
from .trees import (
    InternalNode,
    LeafNode,
    M5Params,
    M5PRegressor,
    REPTreeParams,
    REPTreeRegressor,
    TreeNode,
    fit_m5p,
    fit_reptree,
    predict_model,
)

__all__ = [
    "AdditiveModel",
    "AdditiveRegressor",
    "BaggedModel",
    "BaggingRegressor",
    "LearnerSpec",
    "TrainedModel",
    "bootstrap_indices",
    "build_estimator",
    "combined_regressor",
    "derived_seed",
    "fit_bagging",
    "fit_combined",
    "fit_additive",
    "fit_learner",
    "learner_spec_of",
    "predict_additive",
    "predict_bagged",
    "predict_learner",
    "stage_subsample_indices",
]

LEARNER_KINDS = ("linear", "reptree", "m5p", "bagging", "additive")
_META_KINDS = frozenset({"bagging", "additive"})

_ALLOWED_PARAMS = {
    "linear": frozenset({"ridge_epsilon"}),
    "m5p": frozenset(
        {
            "min_leaf_instances",
            "sd_stop_fraction",
            "smoothing_constant",
            "use_smoothing",
            "prune",
            "attribute_elimination",
        }
    ),
    "reptree": frozenset({"min_leaf_instances", "max_depth", "prune_fraction", "seed"}),
    "bagging": frozenset({"rounds", "seed", "identity_resample"}),
    "additive": frozenset({"iterations", "shrinkage", "subsample_fraction", "seed"}),
}


@dataclass(frozen=True)
class LearnerSpec:
    """A recipe for a learner: its kind, parameters, and nested base."""

    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)
    base: Optional["LearnerSpec"] = None

    def __post_init__(self) -> None:
        if self.kind not in LEARNER_KINDS:
            raise ConfigError(
                f"unknown learner kind {self.kind!r}; expected one of {', '.join(LEARNER_KINDS)}"
            )
        unknown = set(self.params) - _ALLOWED_PARAMS[self.kind]
        if unknown:
            raise ConfigError(
                f"unknown parameter(s) for {self.kind!r} learner: {', '.join(sorted(unknown))}"
            )
        if self.kind in _META_KINDS and self.base is None:
            raise ConfigError(f"{self.kind!r} learner requires a nested base learner")
        if self.kind not in _META_KINDS and self.base is not None:
            raise ConfigError(f"{self.kind!r} learner does not take a base learner")

    @classmethod
    def from_config(cls, obj: Mapping[str, Any]) -> "LearnerSpec":
        """Parse a nested config block: {"kind": ..., <params>, "base": {...}}."""
        if not isinstance(obj, Mapping):
            raise ConfigError("learner block must be a mapping")
        data = dict(obj)
        kind = data.pop("kind", None)
        if not isinstance(kind, str):
            raise ConfigError("learner block requires a 'kind' string")
        base_obj = data.pop("base", None)
        base = cls.from_config(base_obj) if base_obj is not None else None
        return cls(kind=kind, params=data, base=base)

    def to_config(self) -> dict:
        out: dict = {"kind": self.kind}
        out.update(self.params)
        if self.base is not None:
            out["base"] = self.base.to_config()
        return out


@dataclass(frozen=True)
class BaggedModel:
    """Bootstrap-aggregated ensemble; prediction is the member mean."""

    members: tuple
    rounds: int
    seed: int

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if len(self.members) != self.rounds:
            raise ValueError("member count must equal rounds")


@dataclass(frozen=True)
class AdditiveModel:
    """Stagewise additive expansion around the training-target mean."""

    initial_prediction: float
    stages: tuple  # of (model, shrinkage) pairs
    subsample_fraction: float
    seed: int

    def __post_init__(self) -> None:
        if not 0.0 < self.subsample_fraction <= 1.0:
            raise ValueError("subsample_fraction must lie in (0, 1]")
        rates = {beta for _, beta in self.stages}
        if len(rates) > 1:
            raise ValueError("all stages must share one shrinkage rate")


TrainedModel = Union[LinearModel, LeafNode, InternalNode, BaggedModel, AdditiveModel]


# -- seeding ------------------------------------------------------------------

def bootstrap_indices(n: int, seed: int, round_index: int) -> np.ndarray:
    """The with-replacement sample of row indices for one bagging round."""
    if n < 1:
        raise ValueError("need at least one row")
    return np.random.default_rng([seed, round_index]).integers(0, n, size=n)


def stage_subsample_indices(
    n: int, fraction: float, seed: int, stage_index: int
) -> np.ndarray:
    """The without-replacement subsample for one additive stage.

    A full fraction keeps the natural row order so the stage degenerates to
    a plain fit on all rows; fractional draws come from the stage's
    substream.  The ceiling is taken with a small guard so that exact
    products such as 0.1 * 30 do not round up twice.
    """
    if n < 1:
        raise ValueError("need at least one row")
    if not 0.0 < fraction <= 1.0:
        raise ValueError("subsample fraction must lie in (0, 1]")
    if fraction == 1.0:
        return np.arange(n, dtype=np.intp)
    count = max(1, math.ceil(fraction * n - 1e-9))
    return np.random.default_rng([seed, stage_index]).choice(n, size=count, replace=False)


def derived_seed(seed: int, index: int) -> int:
    """Deterministic seed for a stochastic member inside round/stage `index`."""
    return int(np.random.SeedSequence([seed, index, 1]).generate_state(1)[0])


# -- fitting ------------------------------------------------------------------

def fit_learner(
    spec: LearnerSpec, X, y, seed: Optional[int] = None
) -> TrainedModel:
    """Fit any learner named by a spec; ``seed`` overrides its own seed.

    The override is what meta-learners use to hand substream seeds to
    stochastic members; deterministic learners ignore it.
    """
    params = dict(spec.params)
    if spec.kind == "linear":
        return fit_linear(X, y, **params)
    if spec.kind == "m5p":
        return fit_m5p(X, y, M5Params(**params))
    if spec.kind == "reptree":
        if seed is not None:
            params["seed"] = seed
        return fit_reptree(X, y, REPTreeParams(**params))
    if seed is not None:
        params["seed"] = seed
    if spec.kind == "bagging":
        return fit_bagging(spec.base, X, y, **params)
    return fit_additive(spec.base, X, y, **params)


def fit_bagging(
    base: LearnerSpec,
    X,
    y,
    rounds: int = 10,
    seed: int = 0,
    identity_resample: bool = False,
) -> BaggedModel:
    """Train ``rounds`` copies of the base learner on bootstrap samples.

    ``identity_resample`` replaces every bootstrap draw with the full
    training set in order — a debugging mode in which a single round must
    reproduce the base learner exactly.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, d) and y must be (n,)")
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    n = X.shape[0]
    members = []
    for r in range(rounds):
        if identity_resample:
            idx = np.arange(n, dtype=np.intp)
        else:
            idx = bootstrap_indices(n, seed, r)
        members.append(fit_learner(base, X[idx], y[idx], seed=derived_seed(seed, r)))
    return BaggedModel(members=tuple(members), rounds=rounds, seed=seed)


def fit_additive(
    base: LearnerSpec,
    X,
    y,
    iterations: int = 10,
    shrinkage: float = 1.0,
    subsample_fraction: float = 0.5,
    seed: int = 0,
) -> AdditiveModel:
    """Stagewise least-squares fitting of the base learner to residuals.

    Each stage fits on a without-replacement subsample of the current
    residuals, then the shrunken stage prediction is subtracted from the
    residuals of ALL rows, so the final prediction telescopes to
    initial + sum of shrinkage * stage(x).  ``iterations=0`` is allowed as
    a degenerate debugging configuration (predicts the mean).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, d) and y must be (n,)")
    if X.shape[0] < 1:
        raise ValueError("need at least one row")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if not 0.0 < shrinkage <= 1.0:
        raise ValueError("shrinkage must lie in (0, 1]")
    if not 0.0 < subsample_fraction <= 1.0:
        raise ValueError("subsample_fraction must lie in (0, 1]")
    n = X.shape[0]
    initial = float(y.mean())
    residual = y - initial
    stages = []
    for i in range(iterations):
        idx = stage_subsample_indices(n, subsample_fraction, seed, i)
        stage = fit_learner(base, X[idx], residual[idx], seed=derived_seed(seed, i))
        residual = residual - shrinkage * np.asarray(
            predict_learner(stage, X), dtype=np.float64
        )
        stages.append((stage, shrinkage))
    return AdditiveModel(
        initial_prediction=initial,
        stages=tuple(stages),
        subsample_fraction=subsample_fraction,
        seed=seed,
    )


def fit_combined(
    X,
    y,
    m5_params: M5Params = M5Params(),
    bag_rounds: int = 10,
    ar_iterations: int = 10,
    shrinkage: float = 1.0,
    subsample_fraction: float = 0.5,
    seed: int = 0,
    identity_resample: bool = False,
) -> AdditiveModel:
    """The winning stack: additive regression over bagged model trees."""
    bagged = LearnerSpec(
        kind="bagging",
        params={"rounds": bag_rounds, "identity_resample": identity_resample},
        base=LearnerSpec(kind="m5p", params=asdict(m5_params)),
    )
    return fit_additive(
        bagged,
        X,
        y,
        iterations=ar_iterations,
        shrinkage=shrinkage,
        subsample_fraction=subsample_fraction,
        seed=seed,
    )


# -- prediction ---------------------------------------------------------------

def predict_learner(model: TrainedModel, X):
    """Predict with any trained model (vector -> float, matrix -> array)."""
    if isinstance(model, BaggedModel):
        return predict_bagged(model, X)
    if isinstance(model, AdditiveModel):
        return predict_additive(model, X)
    return predict_model(model, X)


def predict_bagged(model: BaggedModel, X):
    """Arithmetic mean of the member predictions."""
    preds = [np.asarray(predict_learner(m, X), dtype=np.float64) for m in model.members]
    out = np.mean(np.stack(preds, axis=0), axis=0)
    return float(out) if out.ndim == 0 else out


def predict_additive(model: AdditiveModel, X):
    """initial prediction + sum of shrinkage-weighted stage predictions."""
    out = None
    for stage, beta in model.stages:
        contribution = beta * np.asarray(predict_learner(stage, X), dtype=np.float64)
        out = contribution if out is None else out + contribution
    if out is None:
        X = np.asarray(X, dtype=np.float64)
        shape = () if X.ndim == 1 else (X.shape[0],)
        out = np.zeros(shape)
    out = out + model.initial_prediction
    return float(out) if np.ndim(out) == 0 else out


# -- estimator adapters --------------------------------------------------------

def learner_spec_of(estimator) -> LearnerSpec:
    """Describe an (unfitted) estimator as a LearnerSpec."""
    if isinstance(estimator, LinearRegressor):
        return LearnerSpec(
            kind="linear", params={"ridge_epsilon": estimator.ridge_epsilon}
        )
    if isinstance(estimator, M5PRegressor):
        return LearnerSpec(kind="m5p", params=estimator.get_params())
    if isinstance(estimator, REPTreeRegressor):
        return LearnerSpec(kind="reptree", params=estimator.get_params())
    if isinstance(estimator, BaggingRegressor):
        return LearnerSpec(
            kind="bagging",
            params={
                "rounds": estimator.rounds,
                "seed": estimator.seed,
                "identity_resample": estimator.identity_resample,
            },
            base=learner_spec_of(estimator._base()),
        )
    if isinstance(estimator, AdditiveRegressor):
        return LearnerSpec(
            kind="additive",
            params={
                "iterations": estimator.iterations,
                "shrinkage": estimator.shrinkage,
                "subsample_fraction": estimator.subsample_fraction,
                "seed": estimator.seed,
            },
            base=learner_spec_of(estimator._base()),
        )
    raise ConfigError(f"no learner kind for {type(estimator).__name__}")


def build_estimator(spec: LearnerSpec):
    """Materialise a LearnerSpec as an unfitted estimator."""
    params = dict(spec.params)
    if spec.kind == "linear":
        return LinearRegressor(**params)
    if spec.kind == "m5p":
        return M5PRegressor(**params)
    if spec.kind == "reptree":
        return REPTreeRegressor(**params)
    if spec.kind == "bagging":
        return BaggingRegressor(base_estimator=build_estimator(spec.base), **params)
    return AdditiveRegressor(base_estimator=build_estimator(spec.base), **params)


class BaggingRegressor(RegressorMixin, BaseEstimator):
    """Estimator wrapper around :func:`fit_bagging`."""

    def __init__(
        self,
        base_estimator=None,
        rounds: int = 10,
        seed: int = 0,
        identity_resample: bool = False,
    ):
        self.base_estimator = base_estimator
        self.rounds = rounds
        self.seed = seed
        self.identity_resample = identity_resample

    def _base(self):
        return self.base_estimator if self.base_estimator is not None else M5PRegressor()

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True, dtype=np.float64)
        self.model_ = fit_bagging(
            learner_spec_of(self._base()),
            X,
            y,
            rounds=self.rounds,
            seed=self.seed,
            identity_resample=self.identity_resample,
        )
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        return predict_bagged(self.model_, X)


class AdditiveRegressor(RegressorMixin, BaseEstimator):
    """Estimator wrapper around :func:`fit_additive`."""

    def __init__(
        self,
        base_estimator=None,
        iterations: int = 10,
        shrinkage: float = 1.0,
        subsample_fraction: float = 0.5,
        seed: int = 0,
    ):
        self.base_estimator = base_estimator
        self.iterations = iterations
        self.shrinkage = shrinkage
        self.subsample_fraction = subsample_fraction
        self.seed = seed

    def _base(self):
        return self.base_estimator if self.base_estimator is not None else M5PRegressor()

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True, dtype=np.float64)
        self.model_ = fit_additive(
            learner_spec_of(self._base()),
            X,
            y,
            iterations=self.iterations,
            shrinkage=self.shrinkage,
            subsample_fraction=self.subsample_fraction,
            seed=self.seed,
        )
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        return predict_additive(self.model_, X)


def combined_regressor(
    m5_params: Optional[M5Params] = None,
    bag_rounds: int = 10,
    ar_iterations: int = 10,
    shrinkage: float = 1.0,
    subsample_fraction: float = 0.5,
    seed: int = 0,
) -> AdditiveRegressor:
    """Unfitted estimator for the winning additive-over-bagged-trees stack."""
    m5 = M5PRegressor(**asdict(m5_params or M5Params()))
    return AdditiveRegressor(
        base_estimator=BaggingRegressor(base_estimator=m5, rounds=bag_rounds, seed=seed),
        iterations=ar_iterations,
        shrinkage=shrinkage,
        subsample_fraction=subsample_fraction,
        seed=seed,
    )
