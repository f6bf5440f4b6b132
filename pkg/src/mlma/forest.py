"""Bagged regression forest.

Bagging, per-tree seeding and prediction averaging are implemented here so
that bootstrap draws are reproducible from a single seed and per-tree
predictions stay inspectable; the base learner is sklearn's regression
tree.  Each tree sees a bootstrap resample (with replacement, same size as
the training set) and samples ``mtry`` candidate features per split.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from sklearn.tree import DecisionTreeRegressor


@dataclass(frozen=True)
class ForestConfig:
    """Hyperparameters mirroring classic regression-forest defaults.

    ``mtry=None`` resolves to max(1, p // 3) at fit time.
    """

    n_trees: int = 500
    mtry: int | None = None
    min_node_size: int = 5
    max_depth: int | None = None
    rng_seed: int = 0
    bootstrap: bool = True

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.mtry is not None and self.mtry < 1:
            raise ValueError("mtry must be >= 1")
        if self.min_node_size < 1:
            raise ValueError("min_node_size must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")

    def resolve_mtry(self, n_features: int) -> int:
        if self.mtry is None:
            return max(1, n_features // 3)
        if self.mtry > n_features:
            raise ValueError(f"mtry {self.mtry} exceeds feature count {n_features}")
        return self.mtry


class RegressionForest:
    """Mean-of-trees regression forest with seed-reproducible bagging."""

    def __init__(self, config: ForestConfig):
        self.config = config
        self.trees_: list[DecisionTreeRegressor] = []
        self.bootstrap_indices_: list[np.ndarray] = []
        self.n_features_: int | None = None

    def fit(self, X, y, n_jobs: int = 1) -> "RegressionForest":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or len(X) == 0:
            raise ValueError("training set must be a non-empty 2-d array")
        if len(X) != len(y):
            raise ValueError(f"row mismatch: {len(X)} features vs {len(y)} targets")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("training data must be finite")
        n, p = X.shape
        mtry = self.config.resolve_mtry(p)
        self.n_features_ = p

        # Seeds and bootstrap draws are generated sequentially up front so
        # thread scheduling cannot affect the fitted model.
        draws = []
        for i in range(self.config.n_trees):
            g = np.random.Generator(np.random.PCG64(np.random.SeedSequence((self.config.rng_seed, i))))
            idx = g.integers(0, n, size=n) if self.config.bootstrap else np.arange(n)
            tree_seed = int(g.integers(0, 2**31 - 1))
            draws.append((idx, tree_seed))

        def fit_one(draw):
            idx, tree_seed = draw
            tree = DecisionTreeRegressor(
                max_features=mtry,
                min_samples_leaf=self.config.min_node_size,
                max_depth=self.config.max_depth,
                random_state=tree_seed,
            )
            tree.fit(X[idx], y[idx])
            return tree

        if n_jobs == 1 or self.config.n_trees == 1:
            trees = [fit_one(d) for d in draws]
        else:
            workers = n_jobs if n_jobs > 0 else None
            with ThreadPoolExecutor(max_workers=workers) as ex:
                trees = list(ex.map(fit_one, draws))
        self.trees_ = trees
        self.bootstrap_indices_ = [d[0] for d in draws]
        return self

    def _check_fitted(self, X: np.ndarray) -> np.ndarray:
        if not self.trees_:
            raise ValueError("forest is not fitted")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_:
            raise ValueError(f"expected (n, {self.n_features_}) features, got {X.shape}")
        return X

    def predict_per_tree(self, X) -> np.ndarray:
        """(n_trees, n_rows) matrix of individual tree predictions."""
        X = self._check_fitted(X)
        return np.stack([t.predict(X) for t in self.trees_])

    def predict(self, X) -> np.ndarray:
        """Arithmetic mean of the trees' predictions."""
        return self.predict_per_tree(X).mean(axis=0)
