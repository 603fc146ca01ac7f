"""Regression trees grown by standard-deviation reduction.

Two learners share one split engine:

* a model tree (M5 family): linear models in the leaves, pruning by a
  parameter-penalised error estimate, and optional smoothing that blends a
  leaf's model with the models along its path — the blend of linear models
  is itself linear, so smoothing is folded into the leaf coefficients at
  fit time and the finished tree needs no extra state to predict;
* a fast constant-leaf tree with reduced-error pruning against a held-out
  subset and back-fitting of leaf means on the combined data.

Split quality for a candidate threshold is the drop in population standard
deviation: sd(y) - |L|/n * sd(y_L) - |R|/n * sd(y_R).  Thresholds sit at
midpoints between consecutive distinct sorted values; rows with value <=
threshold go left.  Ties prefer the lowest feature index, then the lowest
threshold.  Attributes are sorted once at the root and the sorted index
permutations are filtered down the tree instead of re-sorting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .linear import DEFAULT_RIDGE_EPSILON, LinearModel, fit_linear

__all__ = [
    "InternalNode",
    "LeafNode",
    "M5Params",
    "M5PRegressor",
    "REPTreeParams",
    "REPTreeRegressor",
    "TreeNode",
    "best_split",
    "fit_m5p",
    "fit_reptree",
    "predict_model",
    "reptree_stages",
    "sdr",
]

# Penalty factor applied in place of (n+v)/(n-v) when a model has at least
# as many parameters as the node has rows.
_OVERPARAM_PENALTY = 1e6


@dataclass
class LeafNode:
    """A leaf: a linear model (model trees) or a constant (plain trees)."""

    model: Union[LinearModel, float]
    n_training: int
    training_sd: float

    @property
    def is_leaf(self) -> bool:
        return True


@dataclass
class InternalNode:
    """A binary split; ``model`` is kept on model-tree nodes for smoothing."""

    feature: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"
    n_training: int
    model: Optional[LinearModel] = None

    @property
    def is_leaf(self) -> bool:
        return False


TreeNode = Union[LeafNode, InternalNode]


@dataclass(frozen=True)
class M5Params:
    min_leaf_instances: int = 4
    sd_stop_fraction: float = 0.05
    smoothing_constant: float = 15.0
    use_smoothing: bool = True
    prune: bool = True
    attribute_elimination: bool = False

    def __post_init__(self) -> None:
        if self.min_leaf_instances < 1:
            raise ValueError("min_leaf_instances must be >= 1")
        if not 0.0 < self.sd_stop_fraction < 1.0:
            raise ValueError("sd_stop_fraction must lie strictly between 0 and 1")
        if self.smoothing_constant < 0:
            raise ValueError("smoothing_constant must be >= 0")


@dataclass(frozen=True)
class REPTreeParams:
    min_leaf_instances: int = 2
    max_depth: Optional[int] = None
    prune_fraction: float = 1.0 / 3.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.min_leaf_instances < 1:
            raise ValueError("min_leaf_instances must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if not 0.0 < self.prune_fraction < 1.0:
            raise ValueError("prune_fraction must lie strictly between 0 and 1")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


# -- split scoring ------------------------------------------------------------

def sdr(y, left_indices, right_indices) -> float:
    """Standard-deviation reduction of one partition of y (population sd)."""
    y = np.asarray(y, dtype=np.float64)
    left = np.asarray(left_indices, dtype=np.intp)
    right = np.asarray(right_indices, dtype=np.intp)
    if left.size == 0 or right.size == 0:
        raise ValueError("both sides of a split must be non-empty")
    if left.size + right.size != y.size:
        raise ValueError("split must partition all targets")
    n = y.size
    return float(
        np.std(y)
        - left.size / n * np.std(y[left])
        - right.size / n * np.std(y[right])
    )


def _best_split_sorted(
    V: np.ndarray, Yv: np.ndarray, min_leaf: int
) -> Optional[tuple[int, int, float, float]]:
    """Scan pre-sorted values for the best threshold.

    ``V`` and ``Yv`` are (d, m): row f holds the node's values of feature f
    in ascending order and the targets in that same order.  Returns
    (row, left_size - 1, threshold, score) for the best positive-score
    split, or None.  First occurrence wins the argmax, which realises the
    lowest-feature-then-lowest-threshold tie break.
    """
    d, m = V.shape
    if m < 2 * min_leaf or m < 2:
        return None
    if (Yv[0] == Yv[0, 0]).all():
        return None
    sizes = np.arange(1, m)
    left_n = sizes.astype(np.float64)
    right_n = (m - sizes).astype(np.float64)
    # Center the targets by the node mean before the running-sum scan.
    # Variances are translation-invariant, and without this the one-pass
    # Q/k - (S/k)^2 form cancels catastrophically whenever the node mean
    # dwarfs the node spread.
    Yv = Yv - Yv.mean(axis=1, keepdims=True)
    S_full = np.cumsum(Yv, axis=1)
    Q_full = np.cumsum(Yv * Yv, axis=1)
    S, Q = S_full[:, :-1], Q_full[:, :-1]
    tot_s, tot_q = S_full[:, -1:], Q_full[:, -1:]
    var_all = np.maximum(tot_q / m - (tot_s / m) ** 2, 0.0)
    mean_l = S / left_n
    var_l = np.maximum(Q / left_n - mean_l * mean_l, 0.0)
    mean_r = (tot_s - S) / right_n
    var_r = np.maximum((tot_q - Q) / right_n - mean_r * mean_r, 0.0)
    # A constant side has true variance 0, but the cancellation above leaves
    # noise around eps whose square root is large enough to matter.  Running
    # min == running max detects those sides exactly.
    const_l = (
        np.minimum.accumulate(Yv, axis=1)[:, :-1]
        == np.maximum.accumulate(Yv, axis=1)[:, :-1]
    )
    rev = Yv[:, ::-1]
    const_r = (
        np.minimum.accumulate(rev, axis=1) == np.maximum.accumulate(rev, axis=1)
    )[:, ::-1][:, 1:]
    var_l = np.where(const_l, 0.0, var_l)
    var_r = np.where(const_r, 0.0, var_r)
    score = (
        np.sqrt(var_all)
        - (left_n / m) * np.sqrt(var_l)
        - (right_n / m) * np.sqrt(var_r)
    )
    valid = (sizes >= min_leaf) & (sizes <= m - min_leaf) & (V[:, 1:] != V[:, :-1])
    if not valid.any():
        return None
    score = np.where(valid, score, -np.inf)
    raw_best = float(score.flat[np.argmax(score)])
    if not raw_best > 0.0:
        return None
    # The scan's rounding differs per feature row (each accumulates y in its
    # own order), so candidates that are exact ties -- the same rows split
    # off through different features -- come out microscopically apart and
    # the argmax can land on the wrong one.  Rescore every candidate near
    # the top with an order-independent two-pass computation and take the
    # first strict maximum, which restores the lowest-feature,
    # lowest-threshold tie break.
    sd_all = float(np.std(np.sort(Yv[0])))
    window = 1e-6 * max(raw_best, sd_all)
    near = np.flatnonzero(score.ravel() >= raw_best - window)[:64]
    best = -np.inf
    flat = -1
    for index in near:
        row, pos = divmod(int(index), m - 1)
        left = np.sort(Yv[row, : pos + 1])
        right = np.sort(Yv[row, pos + 1 :])
        exact = (
            sd_all
            - left.size / m * float(np.std(left))
            - right.size / m * float(np.std(right))
        )
        if exact > best:
            best = exact
            flat = int(index)
    if not best > 0.0:
        return None
    row, pos = divmod(flat, m - 1)
    threshold = (float(V[row, pos]) + float(V[row, pos + 1])) / 2.0
    return row, pos, threshold, float(best)


def best_split(
    X,
    y,
    candidate_features: Optional[Sequence[int]] = None,
    min_leaf_instances: int = 1,
) -> Optional[tuple[int, float, float]]:
    """Best (feature, threshold, sdr) over midpoint thresholds, or None.

    Only splits leaving at least ``min_leaf_instances`` rows on each side
    are legal, and the winner must have a strictly positive reduction.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, d) and y must be (n,)")
    if min_leaf_instances < 1:
        raise ValueError("min_leaf_instances must be >= 1")
    n, d = X.shape
    cand = sorted(range(d)) if candidate_features is None else sorted(candidate_features)
    if any(f < 0 or f >= d for f in cand):
        raise ValueError("candidate feature index out of range")
    if not cand or n < 2 * min_leaf_instances:
        return None
    cols = X[:, cand]
    orders = np.argsort(cols, axis=0, kind="stable")
    V = np.take_along_axis(cols, orders, axis=0).T
    Yv = y[orders.T]
    found = _best_split_sorted(np.ascontiguousarray(V), np.ascontiguousarray(Yv), min_leaf_instances)
    if found is None:
        return None
    row, _, threshold, score = found
    return cand[row], threshold, score


def _filter_orders(orders: np.ndarray, member: np.ndarray) -> np.ndarray:
    """Keep only member rows in every per-feature permutation (stable)."""
    keep = member[orders]
    return orders[keep].reshape(orders.shape[0], -1)


def _population_sd(values: np.ndarray) -> float:
    return float(np.std(values))


# -- model tree (M5 family) ---------------------------------------------------

@dataclass
class _GrowNode:
    ids: np.ndarray
    sd: float
    feature: int = -1
    threshold: float = 0.0
    left: Optional["_GrowNode"] = None
    right: Optional["_GrowNode"] = None
    subtree_feats: frozenset = field(default_factory=frozenset)

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _grow_m5(
    X: np.ndarray,
    y: np.ndarray,
    orders: np.ndarray,
    params: M5Params,
    root_sd: float,
) -> _GrowNode:
    ids = orders[0]
    node_sd = _population_sd(y[ids])
    node = _GrowNode(ids=ids.copy(), sd=node_sd)
    if ids.size < 2 * params.min_leaf_instances:
        return node
    if node_sd < params.sd_stop_fraction * root_sd:
        return node
    cols = np.arange(X.shape[1])[:, None]
    V = X.T[cols, orders]
    Yv = y[orders]
    found = _best_split_sorted(V, Yv, params.min_leaf_instances)
    if found is None:
        return node
    feature, _, threshold, _ = found
    member_left = np.zeros(X.shape[0], dtype=bool)
    member_left[ids[X[ids, feature] <= threshold]] = True
    member_right = np.zeros(X.shape[0], dtype=bool)
    member_right[ids[X[ids, feature] > threshold]] = True
    node.feature = feature
    node.threshold = threshold
    node.left = _grow_m5(X, y, _filter_orders(orders, member_left), params, root_sd)
    node.right = _grow_m5(X, y, _filter_orders(orders, member_right), params, root_sd)
    node.subtree_feats = (
        frozenset({feature}) | node.left.subtree_feats | node.right.subtree_feats
    )
    return node


def _penalty(n: int, v: int) -> float:
    if n > v:
        return (n + v) / (n - v)
    return _OVERPARAM_PENALTY


def _fit_node_model(
    X: np.ndarray,
    y: np.ndarray,
    ids: np.ndarray,
    feats: Sequence[int],
    width: int,
    eliminate: bool,
) -> tuple[LinearModel, int, float]:
    """Fit the node's linear model restricted to the given features.

    Constant columns on the node's rows are dropped up front.  Returns the
    model expanded to the full feature width, its parameter count, and its
    raw mean absolute residual on the node's rows.
    """
    rows = X[ids]
    targets = y[ids]
    usable = [f for f in sorted(feats) if (rows[:, f] != rows[0, f]).any()]

    def fit_on(subset: list[int]) -> tuple[LinearModel, float]:
        local = fit_linear(rows[:, subset], targets, DEFAULT_RIDGE_EPSILON)
        residual = targets - (rows[:, subset] @ local.coefficients + local.intercept)
        return local, float(np.abs(residual).mean())

    local, raw = fit_on(usable)
    if eliminate and usable:
        n = ids.size
        adjusted = raw * _penalty(n, len(usable) + 1)
        improved = True
        while improved and usable:
            improved = False
            best_drop = None
            for pos in range(len(usable)):
                trial = usable[:pos] + usable[pos + 1 :]
                trial_model, trial_raw = fit_on(trial)
                trial_adjusted = trial_raw * _penalty(n, len(trial) + 1)
                if trial_adjusted <= adjusted and (
                    best_drop is None or trial_adjusted < best_drop[3]
                ):
                    best_drop = (pos, trial_model, trial_raw, trial_adjusted)
            if best_drop is not None:
                pos, local, raw, adjusted = best_drop
                usable = usable[:pos] + usable[pos + 1 :]
                improved = True
    coefficients = np.zeros(width, dtype=np.float64)
    coefficients[usable] = local.coefficients
    model = LinearModel(
        coefficients=coefficients,
        intercept=local.intercept,
        ridge_epsilon=local.ridge_epsilon,
    )
    return model, len(usable) + 1, raw


def _predict_raw(node: TreeNode, X: np.ndarray, ids: np.ndarray) -> np.ndarray:
    """Predict without smoothing for the given row ids."""
    if ids.size == 0:
        return np.zeros(0, dtype=np.float64)
    if node.is_leaf:
        if isinstance(node.model, LinearModel):
            return np.asarray(node.model.predict(X[ids]), dtype=np.float64)
        return np.full(ids.size, float(node.model))
    go_left = X[ids, node.feature] <= node.threshold
    out = np.empty(ids.size, dtype=np.float64)
    out[go_left] = _predict_raw(node.left, X, ids[go_left])
    out[~go_left] = _predict_raw(node.right, X, ids[~go_left])
    return out


def _finalize_m5(
    gnode: _GrowNode,
    X: np.ndarray,
    y: np.ndarray,
    params: M5Params,
    path_feats: frozenset,
) -> tuple[TreeNode, int]:
    """Fit node models bottom-up, pruning as we return.  Yields (node, v)."""
    ids = gnode.ids
    feats = path_feats | gnode.subtree_feats
    model, v_model, raw_model = _fit_node_model(
        X, y, ids, feats, X.shape[1], params.attribute_elimination
    )
    if gnode.is_leaf:
        return LeafNode(model=model, n_training=ids.size, training_sd=gnode.sd), v_model
    child_path = path_feats | {gnode.feature}
    left, v_left = _finalize_m5(gnode.left, X, y, params, child_path)
    right, v_right = _finalize_m5(gnode.right, X, y, params, child_path)
    node = InternalNode(
        feature=gnode.feature,
        threshold=gnode.threshold,
        left=left,
        right=right,
        n_training=ids.size,
        model=model,
    )
    v_subtree = v_left + v_right + 1
    if params.prune:
        raw_subtree = float(np.abs(y[ids] - _predict_raw(node, X, ids)).mean())
        n = ids.size
        if raw_model * _penalty(n, v_model) <= raw_subtree * _penalty(n, v_subtree):
            return (
                LeafNode(model=model, n_training=n, training_sd=gnode.sd),
                v_model,
            )
    return node, v_subtree


def _blend_down_path(
    leaf_model: LinearModel, blends: tuple, k: float
) -> LinearModel:
    """Fold p' = (n_child * p_child + k * p_node) / (n_child + k) up the path.

    ``blends`` holds (ancestor model, n_training of the path child below
    it), root first.  Every model is full feature width, so the blend is a
    plain affine combination of coefficient vectors.
    """
    coefficients = leaf_model.coefficients.copy()
    intercept = float(leaf_model.intercept)
    for node_model, n_child in reversed(blends):
        coefficients = (n_child * coefficients + k * node_model.coefficients) / (
            n_child + k
        )
        intercept = (n_child * intercept + k * node_model.intercept) / (n_child + k)
    return LinearModel(
        coefficients=coefficients,
        intercept=intercept,
        ridge_epsilon=leaf_model.ridge_epsilon,
    )


def _bake_smoothing(node: TreeNode, k: float, blends: tuple) -> TreeNode:
    """Rewrite leaf models as their path-smoothed equivalents."""
    if node.is_leaf:
        return LeafNode(
            model=_blend_down_path(node.model, blends, k),
            n_training=node.n_training,
            training_sd=node.training_sd,
        )
    return InternalNode(
        feature=node.feature,
        threshold=node.threshold,
        left=_bake_smoothing(node.left, k, blends + ((node.model, node.left.n_training),)),
        right=_bake_smoothing(
            node.right, k, blends + ((node.model, node.right.n_training),)
        ),
        n_training=node.n_training,
        model=None,
    )


def _strip_internal_models(node: TreeNode) -> TreeNode:
    if node.is_leaf:
        return node
    return InternalNode(
        feature=node.feature,
        threshold=node.threshold,
        left=_strip_internal_models(node.left),
        right=_strip_internal_models(node.right),
        n_training=node.n_training,
        model=None,
    )


def fit_m5p(X, y, params: M5Params = M5Params()) -> TreeNode:
    """Grow, model, prune, and (optionally) smooth a model tree.

    Internal-node models exist only transiently, for pruning and for the
    smoothing blend; the returned tree carries models on leaves alone.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, d) and y must be (n,)")
    if X.shape[0] < 1:
        raise ValueError("need at least one row")
    root_sd = _population_sd(y)
    orders = np.argsort(X, axis=0, kind="stable").T
    grown = _grow_m5(X, y, np.ascontiguousarray(orders), params, root_sd)
    root, _ = _finalize_m5(grown, X, y, params, frozenset())
    if params.use_smoothing and params.smoothing_constant > 0:
        return _bake_smoothing(root, params.smoothing_constant, ())
    return _strip_internal_models(root)


def predict_model(model, X):
    """Predict with a LinearModel or a TreeNode.

    Accepts a single feature vector or a matrix; returns a float or an
    array accordingly.
    """
    if isinstance(model, LinearModel):
        return model.predict(X)
    if not isinstance(model, (LeafNode, InternalNode)):
        raise TypeError(f"cannot predict with {type(model).__name__}")
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2:
        raise ValueError("X must be a vector or a matrix")
    width = _tree_width(model)
    if width is not None and X.shape[1] != width:
        raise ValueError(f"expected {width} features, got {X.shape[1]}")
    if width is None:
        top = _max_split_feature(model)
        if top is not None and X.shape[1] <= top:
            raise ValueError(
                f"tree splits on feature {top} but X has {X.shape[1]} columns"
            )
    out = _predict_raw(model, X, np.arange(X.shape[0]))
    return float(out[0]) if single else out


def _tree_width(node: TreeNode) -> Optional[int]:
    """The feature width a tree expects, if any of its parts pin one down."""
    if node.is_leaf:
        if isinstance(node.model, LinearModel):
            return node.model.coefficients.shape[0]
        return None
    if node.model is not None:
        return node.model.coefficients.shape[0]
    for child in (node.left, node.right):
        width = _tree_width(child)
        if width is not None:
            return width
    return None


def _max_split_feature(node: TreeNode) -> Optional[int]:
    """Highest feature index any split tests; None for a bare leaf."""
    if node.is_leaf:
        return None
    best = node.feature
    for child in (node.left, node.right):
        sub = _max_split_feature(child)
        if sub is not None and sub > best:
            best = sub
    return best


# -- constant-leaf tree with reduced-error pruning ----------------------------

def _grow_rep(
    X: np.ndarray,
    y: np.ndarray,
    orders: np.ndarray,
    params: REPTreeParams,
    depth: int,
) -> TreeNode:
    ids = orders[0]
    mean = float(y[ids].mean())
    leaf = LeafNode(
        model=mean, n_training=ids.size, training_sd=_population_sd(y[ids])
    )
    if ids.size < 2 * params.min_leaf_instances:
        return leaf
    if params.max_depth is not None and depth >= params.max_depth:
        return leaf
    cols = np.arange(X.shape[1])[:, None]
    V = X.T[cols, orders]
    Yv = y[orders]
    found = _best_split_sorted(V, Yv, params.min_leaf_instances)
    if found is None:
        return leaf
    feature, _, threshold, _ = found
    member_left = np.zeros(X.shape[0], dtype=bool)
    member_left[ids[X[ids, feature] <= threshold]] = True
    member_right = np.zeros(X.shape[0], dtype=bool)
    member_right[ids[X[ids, feature] > threshold]] = True
    return InternalNode(
        feature=feature,
        threshold=threshold,
        left=_grow_rep(X, y, _filter_orders(orders, member_left), params, depth + 1),
        right=_grow_rep(X, y, _filter_orders(orders, member_right), params, depth + 1),
        n_training=ids.size,
        model=None,
    )


def _rep_prune(
    node: TreeNode, X: np.ndarray, y: np.ndarray, prune_ids: np.ndarray
) -> tuple[TreeNode, float]:
    """Reduced-error pruning; returns (tree, squared error on prune rows).

    A subtree collapses to a leaf (predicting its grow-set mean) whenever
    that does not increase squared error on the prune rows reaching it.
    Nodes with no prune rows collapse, there being no evidence they help.
    """
    if node.is_leaf:
        if prune_ids.size == 0:
            return node, 0.0
        residual = y[prune_ids] - float(node.model)
        return node, float(residual @ residual)
    mean = _subtree_grow_mean(node)
    if prune_ids.size == 0:
        sse_leaf = 0.0
    else:
        residual = y[prune_ids] - mean
        sse_leaf = float(residual @ residual)
    go_left = X[prune_ids, node.feature] <= node.threshold
    left, sse_left = _rep_prune(node.left, X, y, prune_ids[go_left])
    right, sse_right = _rep_prune(node.right, X, y, prune_ids[~go_left])
    sse_subtree = sse_left + sse_right
    if sse_leaf <= sse_subtree:
        collapsed = LeafNode(
            model=mean, n_training=node.n_training, training_sd=_subtree_sd(node)
        )
        return collapsed, sse_leaf
    return (
        InternalNode(
            feature=node.feature,
            threshold=node.threshold,
            left=left,
            right=right,
            n_training=node.n_training,
            model=None,
        ),
        sse_subtree,
    )


def _subtree_grow_mean(node: TreeNode) -> float:
    """Grow-set mean at a node, reassembled from its leaves' means."""
    if node.is_leaf:
        return float(node.model)
    total = node.left.n_training + node.right.n_training
    return (
        node.left.n_training * _subtree_grow_mean(node.left)
        + node.right.n_training * _subtree_grow_mean(node.right)
    ) / total


def _subtree_sd(node: TreeNode) -> float:
    if node.is_leaf:
        return node.training_sd
    # Combine child moments; only informational on collapsed nodes.
    n_l, n_r = node.left.n_training, node.right.n_training
    m_l, m_r = _subtree_grow_mean(node.left), _subtree_grow_mean(node.right)
    sd_l, sd_r = _subtree_sd(node.left), _subtree_sd(node.right)
    n = n_l + n_r
    mean = (n_l * m_l + n_r * m_r) / n
    var = (
        n_l * (sd_l**2 + (m_l - mean) ** 2) + n_r * (sd_r**2 + (m_r - mean) ** 2)
    ) / n
    return float(np.sqrt(max(var, 0.0)))


def _rep_backfit(
    node: TreeNode, X: np.ndarray, y: np.ndarray, ids: np.ndarray
) -> TreeNode:
    """Recompute leaf means (and counts) on the combined grow+prune rows."""
    if node.is_leaf:
        if ids.size == 0:
            return node
        return LeafNode(
            model=float(y[ids].mean()),
            n_training=ids.size,
            training_sd=_population_sd(y[ids]),
        )
    go_left = X[ids, node.feature] <= node.threshold
    return InternalNode(
        feature=node.feature,
        threshold=node.threshold,
        left=_rep_backfit(node.left, X, y, ids[go_left]),
        right=_rep_backfit(node.right, X, y, ids[~go_left]),
        n_training=ids.size,
        model=None,
    )


def reptree_stages(
    X, y, params: REPTreeParams = REPTreeParams()
) -> tuple[TreeNode, TreeNode, TreeNode, np.ndarray]:
    """Fit a reduced-error-pruned tree, exposing each stage.

    Returns (grown tree, pruned tree, back-fitted tree, prune row ids).
    The grown and pruned trees carry grow-set leaf means, so pruning can be
    audited externally: the pruned tree never has higher squared error on
    the prune rows than the grown tree.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, d) and y must be (n,)")
    n = X.shape[0]
    if n < 1:
        raise ValueError("need at least one row")
    if n < 2:
        leaf = LeafNode(model=float(y.mean()), n_training=n, training_sd=0.0)
        return leaf, leaf, leaf, np.zeros(0, dtype=np.intp)
    rng = np.random.default_rng(params.seed)
    perm = rng.permutation(n)
    n_prune = int(np.floor(params.prune_fraction * n))
    prune_ids = np.sort(perm[:n_prune])
    grow_ids = np.sort(perm[n_prune:])
    orders = np.argsort(X[grow_ids], axis=0, kind="stable").T
    orders = np.ascontiguousarray(grow_ids[orders])
    grown = _grow_rep(X, y, orders, params, depth=0)
    pruned, _ = _rep_prune(grown, X, y, prune_ids)
    final = _rep_backfit(pruned, X, y, np.arange(n, dtype=np.intp))
    return grown, pruned, final, prune_ids


def fit_reptree(X, y, params: REPTreeParams = REPTreeParams()) -> TreeNode:
    """Fit the constant-leaf tree (grow, prune, back-fit); returns its root."""
    _, _, final, _ = reptree_stages(X, y, params)
    return final


# -- estimators ---------------------------------------------------------------

class M5PRegressor(RegressorMixin, BaseEstimator):
    """Model-tree estimator (linear leaves, pruning, optional smoothing)."""

    def __init__(
        self,
        min_leaf_instances: int = 4,
        sd_stop_fraction: float = 0.05,
        smoothing_constant: float = 15.0,
        use_smoothing: bool = True,
        prune: bool = True,
        attribute_elimination: bool = False,
    ):
        self.min_leaf_instances = min_leaf_instances
        self.sd_stop_fraction = sd_stop_fraction
        self.smoothing_constant = smoothing_constant
        self.use_smoothing = use_smoothing
        self.prune = prune
        self.attribute_elimination = attribute_elimination

    def _params(self) -> M5Params:
        return M5Params(
            min_leaf_instances=self.min_leaf_instances,
            sd_stop_fraction=self.sd_stop_fraction,
            smoothing_constant=self.smoothing_constant,
            use_smoothing=self.use_smoothing,
            prune=self.prune,
            attribute_elimination=self.attribute_elimination,
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True, dtype=np.float64)
        self.tree_ = fit_m5p(X, y, self._params())
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "tree_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        return predict_model(self.tree_, X)


class REPTreeRegressor(RegressorMixin, BaseEstimator):
    """Constant-leaf tree with reduced-error pruning and back-fitting.

    After ``fit`` the held-out squared errors of the grown and the pruned
    tree are available as ``prune_sse_before_`` and ``prune_sse_after_``.
    """

    def __init__(
        self,
        min_leaf_instances: int = 2,
        max_depth: Optional[int] = None,
        prune_fraction: float = 1.0 / 3.0,
        seed: int = 0,
    ):
        self.min_leaf_instances = min_leaf_instances
        self.max_depth = max_depth
        self.prune_fraction = prune_fraction
        self.seed = seed

    def _params(self) -> REPTreeParams:
        return REPTreeParams(
            min_leaf_instances=self.min_leaf_instances,
            max_depth=self.max_depth,
            prune_fraction=self.prune_fraction,
            seed=self.seed,
        )

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True, dtype=np.float64)
        grown, pruned, final, prune_ids = reptree_stages(X, y, self._params())
        self.tree_ = final
        self.prune_indices_ = prune_ids
        if prune_ids.size:
            before = y[prune_ids] - predict_model(grown, X[prune_ids])
            after = y[prune_ids] - predict_model(pruned, X[prune_ids])
            self.prune_sse_before_ = float(before @ before)
            self.prune_sse_after_ = float(after @ after)
        else:
            self.prune_sse_before_ = 0.0
            self.prune_sse_after_ = 0.0
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "tree_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} features, got {X.shape[1]}"
            )
        return predict_model(self.tree_, X)
