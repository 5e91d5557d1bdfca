"""Classical baselines: polynomial-kernel SVM (one-vs-rest, SMO) and a
random forest with Gini splits.

Both are deterministic given their seeds, so cross-validated runs are
reproducible end to end.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyData, SingleClass, TooFewRows

FEATURE_FAMILY_WIDTHS = {"glcm": 4, "colorfulness": 1, "tamura": 2, "face": 2}


@dataclass
class SvmConfig:
    kernel_degree: int = 3
    c: float = 1.0
    gamma: float | None = None  # None -> 1 / feature_dim
    coef0: float = 0.0
    tol: float = 1e-3
    max_passes: int = 200


@dataclass
class RfConfig:
    n_estimators: int = 600
    max_depth: int = 12
    min_samples_split: int = 2
    seed: int = 0

    @staticmethod
    def max_features(n_features: int) -> int:
        # the log2 rule
        return max(1, int(np.floor(np.log2(n_features))))


def standardize(x: np.ndarray):
    """Column z-scores; near-constant columns are centered only.
    Returns (x_scaled, mean, std) with std set to 1 where degenerate."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < 2:
        raise TooFewRows("need at least 2 rows")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return (x - mean) / std, mean, std


def apply_standardize(x: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    return (np.asarray(x, dtype=np.float64) - mean) / std


# ---------------------------------------------------------------------------
# SVM
# ---------------------------------------------------------------------------

def _poly_kernel(a: np.ndarray, b: np.ndarray, gamma: float,
                 coef0: float, degree: int) -> np.ndarray:
    return (gamma * (a @ b.T) + coef0) ** degree


@dataclass
class _BinarySvm:
    support_x: np.ndarray
    support_alpha_y: np.ndarray  # alpha_i * y_i for the support vectors
    bias: float
    alphas: np.ndarray  # all multipliers, kept for KKT inspection


@dataclass
class SvmModel:
    classes: np.ndarray
    cfg: SvmConfig
    gamma: float
    n_features: int
    binaries: list[_BinarySvm] = field(default_factory=list)


def _smo_binary(k: np.ndarray, y: np.ndarray, c: float, tol: float,
                max_passes: int, rng: np.random.Generator):
    """Simplified SMO on a precomputed kernel matrix; returns (alphas, bias)."""
    n = len(y)
    alphas = np.zeros(n)
    b = 0.0
    # f[i] = sum_m alpha_m y_m K(m, i); kept incrementally as alphas change
    f = np.zeros(n)
    passes = 0
    while passes < max_passes:
        changed = 0
        for i in range(n):
            e_i = float(f[i] + b - y[i])
            if (y[i] * e_i < -tol and alphas[i] < c) or \
                    (y[i] * e_i > tol and alphas[i] > 0):
                j = int(rng.integers(n - 1))
                if j >= i:
                    j += 1
                e_j = float(f[j] + b - y[j])
                a_i_old, a_j_old = alphas[i], alphas[j]
                if y[i] != y[j]:
                    lo = max(0.0, a_j_old - a_i_old)
                    hi = min(c, c + a_j_old - a_i_old)
                else:
                    lo = max(0.0, a_i_old + a_j_old - c)
                    hi = min(c, a_i_old + a_j_old)
                if hi - lo < 1e-12:
                    continue
                eta = 2.0 * k[i, j] - k[i, i] - k[j, j]
                if eta >= 0:
                    continue
                a_j = a_j_old - y[j] * (e_i - e_j) / eta
                a_j = min(hi, max(lo, a_j))
                if abs(a_j - a_j_old) < 1e-5:
                    continue
                a_i = a_i_old + y[i] * y[j] * (a_j_old - a_j)
                b1 = b - e_i - y[i] * (a_i - a_i_old) * k[i, i] \
                    - y[j] * (a_j - a_j_old) * k[i, j]
                b2 = b - e_j - y[i] * (a_i - a_i_old) * k[i, j] \
                    - y[j] * (a_j - a_j_old) * k[j, j]
                if 0 < a_i < c:
                    b = b1
                elif 0 < a_j < c:
                    b = b2
                else:
                    b = (b1 + b2) / 2.0
                f += y[i] * (a_i - a_i_old) * k[i] + y[j] * (a_j - a_j_old) * k[j]
                alphas[i], alphas[j] = a_i, a_j
                changed += 1
        passes = passes + 1 if changed == 0 else 0
    return alphas, b


def svm_train(x: np.ndarray, y: np.ndarray, cfg: SvmConfig | None = None,
              seed: int = 0) -> SvmModel:
    """One-vs-rest multiclass SVM with a degree-3 polynomial kernel."""
    cfg = cfg or SvmConfig()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    classes = np.unique(y)
    if len(classes) < 2:
        raise SingleClass("need at least 2 classes")
    gamma = cfg.gamma if cfg.gamma is not None else 1.0 / x.shape[1]
    k = _poly_kernel(x, x, gamma, cfg.coef0, cfg.kernel_degree)
    model = SvmModel(classes=classes, cfg=cfg, gamma=gamma, n_features=x.shape[1])
    for ci, cls in enumerate(classes):
        y_bin = np.where(y == cls, 1.0, -1.0)
        rng = np.random.default_rng([seed, ci])
        alphas, bias = _smo_binary(k, y_bin, cfg.c, cfg.tol, cfg.max_passes, rng)
        sv = alphas > 1e-8
        model.binaries.append(_BinarySvm(
            support_x=x[sv].copy(),
            support_alpha_y=(alphas * y_bin)[sv].copy(),
            bias=bias,
            alphas=alphas.copy(),
        ))
    return model


def svm_decision_values(model: SvmModel, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.n_features:
        raise DimensionMismatch(f"expected {model.n_features} features, got {x.shape[1]}")
    out = np.zeros((x.shape[0], len(model.binaries)))
    for ci, bsvm in enumerate(model.binaries):
        if len(bsvm.support_x) == 0:
            out[:, ci] = bsvm.bias
            continue
        k = _poly_kernel(x, bsvm.support_x, model.gamma,
                         model.cfg.coef0, model.cfg.kernel_degree)
        out[:, ci] = k @ bsvm.support_alpha_y + bsvm.bias
    return out


def svm_predict(model: SvmModel, x: np.ndarray) -> np.ndarray:
    """Argmax over the one-vs-rest decision values; ties to the lowest class."""
    values = svm_decision_values(model, x)
    return model.classes[values.argmax(axis=1)]


# ---------------------------------------------------------------------------
# random forest
# ---------------------------------------------------------------------------

@dataclass
class _TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "_TreeNode | None" = None
    right: "_TreeNode | None" = None
    prediction: int = -1
    depth: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return 1.0 - float((p ** 2).sum())


def _majority(y: np.ndarray, n_classes: int) -> int:
    # ties resolve to the lowest class index via argmax
    return int(np.bincount(y, minlength=n_classes).argmax())


def _best_split(x: np.ndarray, y: np.ndarray, feature_ids: np.ndarray,
                n_classes: int):
    """Best (feature, threshold) by Gini over the candidate columns, using
    cumulative class counts along each sorted column."""
    n = len(y)
    best = None
    best_impurity = np.inf
    for f in feature_ids:
        order = np.argsort(x[:, f], kind="stable")
        xs = x[order, f]
        ys = y[order]
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), ys] = 1.0
        left_counts = onehot.cumsum(axis=0)
        total = left_counts[-1]
        distinct = np.flatnonzero(xs[1:] > xs[:-1])  # split after position i
        for i in distinct:
            lc = left_counts[i]
            rc = total - lc
            n_l, n_r = i + 1, n - i - 1
            imp = (n_l * _gini(lc) + n_r * _gini(rc)) / n
            if imp < best_impurity - 1e-15:
                best_impurity = imp
                best = (int(f), float((xs[i] + xs[i + 1]) / 2.0))
    return best


def _grow_tree(x: np.ndarray, y: np.ndarray, depth: int, cfg: RfConfig,
               n_classes: int, max_feats: int, rng: np.random.Generator) -> _TreeNode:
    node = _TreeNode(depth=depth, prediction=_majority(y, n_classes))
    if depth >= cfg.max_depth or len(y) < cfg.min_samples_split \
            or len(np.unique(y)) == 1:
        return node
    feature_ids = rng.choice(x.shape[1], size=max_feats, replace=False)
    split = _best_split(x, y, feature_ids, n_classes)
    if split is None:
        return node
    f, thr = split
    mask = x[:, f] <= thr
    node.feature, node.threshold = f, thr
    node.left = _grow_tree(x[mask], y[mask], depth + 1, cfg, n_classes,
                           max_feats, rng)
    node.right = _grow_tree(x[~mask], y[~mask], depth + 1, cfg, n_classes,
                            max_feats, rng)
    return node


@dataclass
class RfModel:
    trees: list[_TreeNode]
    n_classes: int
    n_features: int
    cfg: RfConfig


def rf_train(x: np.ndarray, y: np.ndarray, cfg: RfConfig | None = None) -> RfModel:
    """Bagged CART forest; bootstrap of size n per tree, Gini splits over
    max(1, floor(log2 d)) random candidate columns per node."""
    cfg = cfg or RfConfig()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise EmptyData("no training rows")
    n_classes = int(y.max()) + 1
    max_feats = min(x.shape[1], RfConfig.max_features(x.shape[1]))
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.n_estimators)
    trees = []
    n = len(y)
    for ss in seeds:
        rng = np.random.default_rng(ss)
        boot = rng.integers(0, n, size=n)
        trees.append(_grow_tree(x[boot], y[boot], 0, cfg, n_classes,
                                max_feats, rng))
    return RfModel(trees=trees, n_classes=n_classes, n_features=x.shape[1], cfg=cfg)


def _tree_predict(node: _TreeNode, row: np.ndarray) -> int:
    while not node.is_leaf:
        node = node.left if row[node.feature] <= node.threshold else node.right
    return node.prediction


def rf_predict(model: RfModel, x: np.ndarray) -> np.ndarray:
    """Majority vote across trees; ties to the lowest class index."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.n_features:
        raise DimensionMismatch(f"expected {model.n_features} features, got {x.shape[1]}")
    out = np.empty(x.shape[0], dtype=np.int64)
    for i, row in enumerate(x):
        votes = np.zeros(model.n_classes, dtype=np.int64)
        for tree in model.trees:
            votes[_tree_predict(tree, row)] += 1
        out[i] = int(votes.argmax())
    return out


def tree_depth(node: _TreeNode) -> int:
    if node.is_leaf:
        return node.depth
    return max(tree_depth(node.left), tree_depth(node.right))
