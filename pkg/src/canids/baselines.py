"""Reference classifiers: exact KNN, a Gini decision tree, and a small MLP.

All three consume the same prepared 16-wide feature rows as the CNN. Label
ties resolve toward the attack class throughout, matching the classifier's
0.5-probability rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nncore import Dense, Network, ReLU, Softmax

MLP_HIDDEN = (68, 68)


class EmptyTrainingSet(ValueError):
    """Fit requires at least one training row."""


class KTooLarge(ValueError):
    """k exceeds the number of stored training rows."""


# ---------------------------------------------------------------------------
# K-nearest neighbors
# ---------------------------------------------------------------------------


@dataclass
class KnnModel:
    x: np.ndarray
    y: np.ndarray


def knn_fit(train_x: np.ndarray, train_y: np.ndarray) -> KnnModel:
    train_x = np.asarray(train_x, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.uint8)
    if len(train_x) == 0:
        raise EmptyTrainingSet("KNN needs at least one training row")
    if len(train_x) != len(train_y):
        raise ValueError("features and labels differ in length")
    return KnnModel(train_x.copy(), train_y.copy())


def knn_predict(
    model: KnnModel, queries: np.ndarray, k: int, chunk: int = 256
) -> tuple[np.ndarray, np.ndarray]:
    """Exact k-nearest vote by Euclidean distance.

    Distance ties break toward the lower training index (stable sort); vote
    ties predict attack. Returns hard labels and the attack-vote fraction.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if not 1 <= k <= len(model.x):
        raise KTooLarge(f"k={k} with {len(model.x)} training rows")
    labels = np.empty(len(queries), dtype=np.uint8)
    votes = np.empty(len(queries))
    for start in range(0, len(queries), chunk):
        block = queries[start : start + chunk]
        d2 = ((block[:, None, :] - model.x[None, :, :]) ** 2).sum(axis=2)
        nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
        frac = model.y[nearest].mean(axis=1)
        votes[start : start + chunk] = frac
        labels[start : start + chunk] = (frac >= 0.5).astype(np.uint8)
    return labels, votes


# ---------------------------------------------------------------------------
# Decision tree (CART, Gini impurity)
# ---------------------------------------------------------------------------


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    label: int = 0
    counts: tuple[int, int] = (0, 0)

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _gini(pos: np.ndarray, total: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        p = np.where(total > 0, pos / np.maximum(total, 1), 0.0)
    return 2 * p * (1 - p)


def _best_split(x: np.ndarray, y: np.ndarray, min_leaf: int) -> tuple[int, float, float] | None:
    """Lowest weighted-Gini split over midpoints of consecutive unique values."""
    n = len(y)
    best = None
    for feature in range(x.shape[1]):
        order = np.argsort(x[:, feature], kind="stable")
        values = x[order, feature]
        labels = y[order].astype(np.float64)
        pos_left = np.cumsum(labels)[:-1]
        count_left = np.arange(1, n)
        pos_right = labels.sum() - pos_left
        count_right = n - count_left
        # splits are only valid between distinct neighboring values
        distinct = values[1:] != values[:-1]
        valid = distinct & (count_left >= min_leaf) & (count_right >= min_leaf)
        if not valid.any():
            continue
        weighted = (
            count_left * _gini(pos_left, count_left)
            + count_right * _gini(pos_right, count_right)
        ) / n
        weighted = np.where(valid, weighted, np.inf)
        i = int(np.argmin(weighted))
        if best is None or weighted[i] < best[2]:
            threshold = (values[i] + values[i + 1]) / 2
            best = (feature, threshold, float(weighted[i]))
    return best


def _leaf(y: np.ndarray) -> TreeNode:
    pos = int(y.sum())
    neg = len(y) - pos
    return TreeNode(label=1 if pos >= neg else 0, counts=(neg, pos))


def tree_fit(
    train_x: np.ndarray, train_y: np.ndarray, max_depth: int = 10, min_leaf: int = 1
) -> TreeNode:
    """Greedy binary CART minimizing weighted Gini impurity.

    Stops on purity, depth, or the minimum-leaf constraint; leaves predict
    the majority class with ties going to attack.
    """
    x = np.asarray(train_x, dtype=np.float64)
    y = np.asarray(train_y, dtype=np.uint8)
    if len(x) == 0:
        raise EmptyTrainingSet("decision tree needs at least one training row")

    def grow(idx: np.ndarray, depth: int) -> TreeNode:
        ys = y[idx]
        if depth >= max_depth or len(idx) < 2 * min_leaf or len(np.unique(ys)) == 1:
            return _leaf(ys)
        split = _best_split(x[idx], ys, min_leaf)
        if split is None:
            return _leaf(ys)
        feature, threshold, _ = split
        mask = x[idx, feature] <= threshold
        node = _leaf(ys)
        node.feature = feature
        node.threshold = threshold
        node.left = grow(idx[mask], depth + 1)
        node.right = grow(idx[~mask], depth + 1)
        return node

    return grow(np.arange(len(y)), 0)


def tree_predict(tree: TreeNode, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hard labels plus the attack fraction of each query's leaf."""
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    labels = np.empty(len(queries), dtype=np.uint8)
    scores = np.empty(len(queries))
    for i, row in enumerate(queries):
        node = tree
        while not node.is_leaf:
            node = node.left if row[node.feature] <= node.threshold else node.right
        labels[i] = node.label
        neg, pos = node.counts
        scores[i] = pos / (neg + pos) if neg + pos else 0.5
    return labels, scores


def tree_depth(tree: TreeNode) -> int:
    if tree.is_leaf:
        return 0
    return 1 + max(tree_depth(tree.left), tree_depth(tree.right))


# ---------------------------------------------------------------------------
# MLP (16 -> 68 -> 68 -> 2), trained with the shared loop
# ---------------------------------------------------------------------------


def build_mlp(seed: int = 0, input_width: int = 16) -> Network:
    rng = np.random.default_rng(seed)
    return Network(
        [
            Dense(input_width, MLP_HIDDEN[0], rng),
            ReLU(),
            Dense(MLP_HIDDEN[0], MLP_HIDDEN[1], rng),
            ReLU(),
            Dense(MLP_HIDDEN[1], 2, rng),
            Softmax(),
        ]
    )
