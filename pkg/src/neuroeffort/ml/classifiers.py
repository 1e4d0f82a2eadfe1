"""Binary classifiers implemented from first principles on numpy.

Five families behind one train/predict interface: ridge-penalized logistic
regression, linear discriminant analysis with a pooled regularized
covariance, k-nearest neighbors, a Gini decision tree, and a bootstrap
random forest. Every tie rule is fixed and documented so results are
bit-reproducible across runs and thread counts.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

__all__ = [
    "ClassifierFamily",
    "ClassifierSpec",
    "DEFAULT_PARAMS",
    "LogisticRegressionModel",
    "LdaModel",
    "KnnModel",
    "DecisionTreeModel",
    "RandomForestModel",
    "train",
]


class ClassifierFamily(Enum):
    LOGISTIC_REGRESSION = "lr"
    LDA = "lda"
    KNN = "knn"
    DECISION_TREE = "dt"
    RANDOM_FOREST = "rf"

    @classmethod
    def coerce(cls, value: "ClassifierFamily | str") -> "ClassifierFamily":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown classifier family {value!r}; expected one of "
                f"{[m.value for m in cls]}"
            ) from None


DEFAULT_PARAMS: dict[ClassifierFamily, dict[str, float | int]] = {
    ClassifierFamily.LOGISTIC_REGRESSION: {
        "ridge_lambda": 1.0,
        "tol": 1e-6,
        "max_iter": 1000,
    },
    ClassifierFamily.LDA: {"shrinkage": 1e-6},
    ClassifierFamily.KNN: {"k": 5},
    ClassifierFamily.DECISION_TREE: {"max_depth": 8, "min_leaf": 2},
    ClassifierFamily.RANDOM_FOREST: {
        "n_trees": 100,
        "max_depth": 8,
        "min_leaf": 2,
    },
}


@dataclass(frozen=True)
class ClassifierSpec:
    """A classifier family plus its resolved hyperparameters."""

    family: ClassifierFamily
    params: dict[str, float | int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        family = ClassifierFamily.coerce(self.family)
        defaults = DEFAULT_PARAMS[family]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ValueError(
                f"unknown hyperparameters for {family.value}: {sorted(unknown)}"
            )
        merged = {**defaults, **self.params}
        if family is ClassifierFamily.KNN and merged["k"] < 1:
            raise ValueError("k must be >= 1")
        if family is ClassifierFamily.RANDOM_FOREST and merged["n_trees"] < 1:
            raise ValueError("n_trees must be >= 1")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "params", merged)

    def to_dict(self) -> dict:
        return {"family": self.family.value, "params": dict(self.params)}

    def __hash__(self) -> int:
        return hash((self.family, tuple(sorted(self.params.items()))))


def _check_training_inputs(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
        raise ValueError(f"incompatible shapes X {X.shape}, y {y.shape}")
    if not np.isfinite(X).all():
        raise ValueError("training features contain non-finite values")
    classes = np.unique(y)
    if not np.isin(classes, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    if classes.size < 2:
        raise ValueError("training labels contain a single class")
    return X, y


def _seed_list(seed: int | Sequence[int]) -> list[int]:
    if isinstance(seed, (int, np.integer)):
        return [int(seed)]
    return [int(s) for s in seed]


@dataclass(frozen=True)
class LogisticRegressionModel:
    """Ridge-penalized logistic regression, decision rule score >= 0 -> 1."""

    weights: np.ndarray
    bias: float

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, params: dict) -> "LogisticRegressionModel":
        X, y = _check_training_inputs(X, y)
        z = 2.0 * y - 1.0
        lam = float(params["ridge_lambda"])

        def objective(wb: np.ndarray) -> tuple[float, np.ndarray]:
            w, b = wb[:-1], wb[-1]
            scores = X @ w + b
            margins = z * scores
            loss = np.logaddexp(0.0, -margins).sum() + 0.5 * lam * (w @ w)
            # d/d(score) of log(1+exp(-margin)) is -z*sigmoid(-margin)
            s = -z * expit(-margins)
            grad = np.concatenate([X.T @ s + lam * w, [s.sum()]])
            return loss, grad

        result = minimize(
            objective,
            np.zeros(X.shape[1] + 1),
            method="L-BFGS-B",
            jac=True,
            options={"gtol": float(params["tol"]), "maxiter": int(params["max_iter"])},
        )
        w = np.array(result.x[:-1])
        w.setflags(write=False)
        return cls(weights=w, bias=float(result.x[-1]))

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.weights + self.bias

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.decision_scores(X) >= 0.0).astype(int)


@dataclass(frozen=True)
class LdaModel:
    """Pooled-covariance linear discriminant; score tie -> class 1."""

    weights: np.ndarray
    bias: float

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, params: dict) -> "LdaModel":
        X, y = _check_training_inputs(X, y)
        n, d = X.shape
        shrinkage = float(params["shrinkage"])
        mu = [X[y == c].mean(axis=0) for c in (0, 1)]
        pooled = np.zeros((d, d))
        for c in (0, 1):
            centered = X[y == c] - mu[c]
            pooled += centered.T @ centered
        pooled /= n - 2
        pooled[np.diag_indices_from(pooled)] += shrinkage
        # discriminant c: x.w_c - 0.5 mu_c.w_c + log prior_c; keep the difference
        w_c = [np.linalg.solve(pooled, mu[c]) for c in (0, 1)]
        priors = [float(np.mean(y == c)) for c in (0, 1)]
        w = w_c[1] - w_c[0]
        bias = (
            0.5 * (mu[0] @ w_c[0] - mu[1] @ w_c[1])
            + np.log(priors[1])
            - np.log(priors[0])
        )
        w = np.array(w)
        w.setflags(write=False)
        return cls(weights=w, bias=float(bias))

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.weights + self.bias

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.decision_scores(X) >= 0.0).astype(int)


@dataclass(frozen=True, eq=False)
class KnnModel:
    """Euclidean k-nearest neighbors; vote tie -> class of nearest neighbor."""

    train_x: np.ndarray
    train_y: np.ndarray
    k: int

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, params: dict) -> "KnnModel":
        X, y = _check_training_inputs(X, y)
        X = X.copy()
        y = y.copy()
        X.setflags(write=False)
        y.setflags(write=False)
        return cls(train_x=X, train_y=y, k=int(params["k"]))

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        k = min(self.k, self.train_y.size)
        out = np.empty(X.shape[0], dtype=int)
        for i, row in enumerate(X):
            dist = np.sum((self.train_x - row) ** 2, axis=1)
            order = np.argsort(dist, kind="stable")[:k]
            votes = self.train_y[order]
            ones = int(votes.sum())
            if 2 * ones == k:
                out[i] = int(votes[0])
            else:
                out[i] = int(2 * ones > k)
        return out


@dataclass(frozen=True)
class _TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "_TreeNode | None" = None
    right: "_TreeNode | None" = None
    prediction: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.prediction >= 0


def _leaf(y: np.ndarray) -> _TreeNode:
    # majority class; exact tie -> class 1, matching the forest vote rule
    return _TreeNode(prediction=int(2 * y.sum() >= y.size))


def _best_split(
    X: np.ndarray, y: np.ndarray, feature_indices: np.ndarray, min_leaf: int
) -> tuple[int, float] | None:
    """Lowest weighted Gini impurity over midpoint thresholds.

    Ties break to the earliest feature in ``feature_indices`` and then the
    lowest threshold, so the search is fully deterministic.
    """
    m = y.size
    best_impurity = np.inf
    best: tuple[int, float] | None = None
    sizes_left = np.arange(1, m, dtype=float)
    sizes_right = m - sizes_left
    for j in feature_indices:
        order = np.argsort(X[:, j], kind="stable")
        values = X[order, j]
        valid = values[1:] > values[:-1]
        if not valid.any():
            continue
        ones_left = np.cumsum(y[order])[:-1].astype(float)
        ones_right = float(y.sum()) - ones_left
        p_left = ones_left / sizes_left
        p_right = ones_right / sizes_right
        gini_left = 2.0 * p_left * (1.0 - p_left)
        gini_right = 2.0 * p_right * (1.0 - p_right)
        weighted = (sizes_left * gini_left + sizes_right * gini_right) / m
        weighted[~valid] = np.inf
        weighted[sizes_left < min_leaf] = np.inf
        weighted[sizes_right < min_leaf] = np.inf
        i = int(np.argmin(weighted))
        if weighted[i] < best_impurity:
            best_impurity = weighted[i]
            best = (int(j), float(0.5 * (values[i] + values[i + 1])))
    return best


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    depth: int,
    max_depth: int,
    min_leaf: int,
    mtry: int | None,
    rng: np.random.Generator | None,
) -> _TreeNode:
    if depth >= max_depth or y.size < 2 * min_leaf or y.min() == y.max():
        return _leaf(y)
    d = X.shape[1]
    if mtry is not None and mtry < d:
        assert rng is not None
        feature_indices = np.sort(rng.choice(d, size=mtry, replace=False))
    else:
        feature_indices = np.arange(d)
    split = _best_split(X, y, feature_indices, min_leaf)
    if split is None:
        return _leaf(y)
    j, threshold = split
    go_left = X[:, j] <= threshold
    left = _grow_tree(X[go_left], y[go_left], depth + 1, max_depth, min_leaf, mtry, rng)
    right = _grow_tree(X[~go_left], y[~go_left], depth + 1, max_depth, min_leaf, mtry, rng)
    return _TreeNode(feature=j, threshold=threshold, left=left, right=right)


def _predict_tree(node: _TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0], dtype=int)
    for i, row in enumerate(X):
        cur = node
        while not cur.is_leaf:
            cur = cur.left if row[cur.feature] <= cur.threshold else cur.right
        out[i] = cur.prediction
    return out


@dataclass(frozen=True)
class DecisionTreeModel:
    """Greedy Gini tree; samples with value <= threshold go left."""

    root: _TreeNode

    @classmethod
    def fit(cls, X: np.ndarray, y: np.ndarray, params: dict) -> "DecisionTreeModel":
        X, y = _check_training_inputs(X, y)
        root = _grow_tree(
            X,
            y,
            depth=0,
            max_depth=int(params["max_depth"]),
            min_leaf=int(params["min_leaf"]),
            mtry=None,
            rng=None,
        )
        return cls(root=root)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return _predict_tree(self.root, np.asarray(X, dtype=float))


@dataclass(frozen=True)
class RandomForestModel:
    """Bootstrap-bagged Gini trees with ceil(sqrt(d)) features per split.

    Tree t draws its bootstrap sample and split-time feature subsets from
    np.random.default_rng([*seed, t]), so the forest is reproducible for a
    fixed seed regardless of how many worker threads trained it. The
    majority vote breaks exact ties toward class 1.
    """

    trees: tuple[_TreeNode, ...]

    @classmethod
    def fit(
        cls,
        X: np.ndarray,
        y: np.ndarray,
        params: dict,
        seed: int | Sequence[int] = 0,
        jobs: int = 1,
    ) -> "RandomForestModel":
        X, y = _check_training_inputs(X, y)
        n, d = X.shape
        n_trees = int(params["n_trees"])
        max_depth = int(params["max_depth"])
        min_leaf = int(params["min_leaf"])
        mtry = int(np.ceil(np.sqrt(d)))
        base = _seed_list(seed)

        def build(tree_index: int) -> _TreeNode:
            rng = np.random.default_rng(base + [tree_index])
            boot = rng.integers(0, n, size=n)
            return _grow_tree(X[boot], y[boot], 0, max_depth, min_leaf, mtry, rng)

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                trees = tuple(pool.map(build, range(n_trees)))
        else:
            trees = tuple(build(t) for t in range(n_trees))
        return cls(trees=trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        ones = np.zeros(X.shape[0], dtype=int)
        for tree in self.trees:
            ones += _predict_tree(tree, X)
        return (2 * ones >= len(self.trees)).astype(int)


ClassifierModel = (
    LogisticRegressionModel | LdaModel | KnnModel | DecisionTreeModel | RandomForestModel
)


def train(
    spec: ClassifierSpec,
    X: np.ndarray,
    y: np.ndarray,
    seed: int | Sequence[int] = 0,
    jobs: int = 1,
) -> ClassifierModel:
    """Fit the family named by ``spec`` on standardized features."""
    family = spec.family
    if family is ClassifierFamily.LOGISTIC_REGRESSION:
        return LogisticRegressionModel.fit(X, y, spec.params)
    if family is ClassifierFamily.LDA:
        return LdaModel.fit(X, y, spec.params)
    if family is ClassifierFamily.KNN:
        return KnnModel.fit(X, y, spec.params)
    if family is ClassifierFamily.DECISION_TREE:
        return DecisionTreeModel.fit(X, y, spec.params)
    if family is ClassifierFamily.RANDOM_FOREST:
        return RandomForestModel.fit(X, y, spec.params, seed=seed, jobs=jobs)
    raise ValueError(f"unhandled classifier family {family}")
