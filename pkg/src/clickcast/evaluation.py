"""Target-scale transforms, outlier clipping, error metrics, and fold splits.

Click counts live on a heavy right tail, so models may train against a
logarithmic view of the target; all reported metrics are computed back in
plain click space.  Error metrics are the absolute error and the relative
error (absolute error over the true count), both summed and averaged —
deliberately NOT any variant normalised by a baseline predictor's error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import ConfigError, DataError

__all__ = [
    "MAX_CLICK_PREDICTION",
    "OUTLIER_POLICY_KINDS",
    "TARGET_SCALE_KINDS",
    "EvalReport",
    "OutlierPolicy",
    "TargetScale",
    "clip_outliers",
    "compute_metrics",
    "forward_target",
    "inverse_target",
    "inverse_target_flagged",
    "kfold_split",
]

# Ceiling for back-transformed predictions: a model-space output whose
# click-space value would exceed this (or overflow outright) is clamped
# here and flagged.
MAX_CLICK_PREDICTION = 1e300

TARGET_SCALE_KINDS = ("identity", "log10", "ln")
OUTLIER_POLICY_KINDS = ("none", "all_to_one", "negative_to_one_positive_to_max")


@dataclass(frozen=True)
class TargetScale:
    """How raw click counts are mapped into model space."""

    kind: str = "log10"

    def __post_init__(self) -> None:
        if self.kind not in TARGET_SCALE_KINDS:
            raise ConfigError(
                f"unknown target scale {self.kind!r}; expected one of {', '.join(TARGET_SCALE_KINDS)}"
            )

    def forward(self, y):
        return forward_target(y, self)

    def inverse(self, p):
        return inverse_target(p, self)


def _as_scale(scale: Union[TargetScale, str]) -> TargetScale:
    return scale if isinstance(scale, TargetScale) else TargetScale(scale)


def forward_target(y, scale: Union[TargetScale, str] = TargetScale()):
    """Map clicks (>= 1) into model space; scalar in, scalar out."""
    kind = _as_scale(scale).kind
    arr = np.asarray(y, dtype=np.float64)
    if np.any(arr < 1.0):
        raise DataError("target transform requires every click count >= 1")
    if kind == "identity":
        out = arr.copy()
    elif kind == "log10":
        out = np.log10(arr)
    else:
        out = np.log(arr)
    return float(out) if out.ndim == 0 else out


def inverse_target_flagged(p, scale: Union[TargetScale, str] = TargetScale()):
    """Map model-space values back to clicks.

    Returns (values, overflow flags); values that would exceed
    MAX_CLICK_PREDICTION (or overflow the float range) are clamped there
    and flagged.  No rounding and no outlier clipping happen here.
    """
    kind = _as_scale(scale).kind
    arr = np.asarray(p, dtype=np.float64)
    with np.errstate(over="ignore"):
        if kind == "identity":
            out = arr.copy()
        elif kind == "log10":
            out = np.power(10.0, arr)
        else:
            out = np.exp(arr)
    overflowed = ~np.isfinite(out) | (out > MAX_CLICK_PREDICTION)
    out = np.where(overflowed, MAX_CLICK_PREDICTION, out)
    if out.ndim == 0:
        return float(out), bool(overflowed)
    return out, overflowed


def inverse_target(p, scale: Union[TargetScale, str] = TargetScale()):
    """Back-transform to clicks, clamping overflow (see flagged variant)."""
    out, _ = inverse_target_flagged(p, scale)
    return out


@dataclass(frozen=True)
class OutlierPolicy:
    """What to do with predictions outside [1, training maximum clicks].

    ``train_max_clicks`` is captured when a pipeline is trained; a policy
    other than "none" cannot clip until it is set.
    """

    kind: str = "all_to_one"
    train_max_clicks: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in OUTLIER_POLICY_KINDS:
            raise ConfigError(
                f"unknown outlier policy {self.kind!r}; expected one of {', '.join(OUTLIER_POLICY_KINDS)}"
            )
        if self.train_max_clicks is not None and self.train_max_clicks < 1:
            raise ValueError("train_max_clicks must be >= 1")

    def with_max(self, train_max_clicks: int) -> "OutlierPolicy":
        return OutlierPolicy(kind=self.kind, train_max_clicks=train_max_clicks)


def clip_outliers(pred, policy: OutlierPolicy):
    """Apply the outlier rule; scalar in, scalar out.

    A prediction is an outlier iff it is below 1 or above the training
    maximum.  "all_to_one" sends every outlier to 1;
    "negative_to_one_positive_to_max" sends low ones to 1 and high ones to
    the training maximum; "none" passes everything through.
    """
    arr = np.asarray(pred, dtype=np.float64)
    if policy.kind == "none":
        out = arr.copy()
        return float(out) if out.ndim == 0 else out
    if policy.train_max_clicks is None:
        raise DataError(
            f"outlier policy {policy.kind!r} needs train_max_clicks captured at fit time"
        )
    maximum = float(policy.train_max_clicks)
    low = arr < 1.0
    high = arr > maximum
    if policy.kind == "all_to_one":
        out = np.where(low | high, 1.0, arr)
    else:
        out = np.where(low, 1.0, np.where(high, maximum, arr))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EvalReport:
    """Per-row and aggregate errors, in click space.

    The aggregates satisfy cae = sum(ae), cre = sum(re), mae = cae/n,
    mre = cre/n by construction.
    """

    n: int
    ae: np.ndarray
    re: np.ndarray
    cae: float
    cre: float
    mae: float
    mre: float
    config_echo: Optional[dict] = None

    def machine_lines(self) -> list[str]:
        return [
            f"mae={self.mae!r}",
            f"mre={self.mre!r}",
            f"cae={self.cae!r}",
            f"cre={self.cre!r}",
            f"n={self.n}",
        ]

    def human_lines(self) -> list[str]:
        return [
            f"rows evaluated:            {self.n}",
            f"mean absolute error:       {self.mae:.4f} clicks",
            f"mean relative error:       {100.0 * self.mre:.2f}%",
            f"cumulative absolute error: {self.cae:.4f}",
            f"cumulative relative error: {self.cre:.4f}",
        ]


def compute_metrics(preds, truths, config_echo: Optional[dict] = None) -> EvalReport:
    """Absolute/relative errors per row plus their sums and means."""
    p = np.asarray(preds, dtype=np.float64)
    t = np.asarray(truths, dtype=np.float64)
    if p.ndim != 1 or t.ndim != 1:
        raise DataError("predictions and truths must be 1-D")
    if p.shape[0] != t.shape[0]:
        raise DataError(
            f"length mismatch: {p.shape[0]} predictions vs {t.shape[0]} truths"
        )
    if p.shape[0] < 1:
        raise DataError("need at least one row to evaluate")
    if np.any(t < 1.0):
        raise DataError("every true click count must be >= 1")
    ae = np.abs(p - t)
    re = ae / t
    n = int(p.shape[0])
    cae = float(np.sum(ae))
    cre = float(np.sum(re))
    return EvalReport(
        n=n,
        ae=ae,
        re=re,
        cae=cae,
        cre=cre,
        mae=cae / n,
        mre=cre / n,
        config_echo=config_echo,
    )


def kfold_split(n: int, k: int, seed: int = 0) -> list[np.ndarray]:
    """Shuffle 0..n-1 with the seed, cut into k nearly equal folds.

    The first n mod k folds get the extra row.  Folds partition the index
    set; there is no stratification.
    """
    if k < 2:
        raise DataError("cross-validation needs at least 2 folds")
    if k > n:
        raise DataError(f"cannot split {n} rows into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    return list(np.array_split(perm, k))
