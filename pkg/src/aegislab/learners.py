"""Natively implemented learners: CART trees, bagged forests, logistic
regression and a small MLP.

All models consume float64 matrices, expose ``predict_proba``, and
serialize to plain JSON so trained detectors can be stored with run
artifacts. Gradient-based models factor their loss/gradient computation
into module-level functions so the analytic gradients can be checked
against finite differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import TrainingError

MODEL_FORMAT_VERSION = 1


def _check_xy(X, y, n_classes: int = 2) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise TrainingError("X must be (n, d) and y (n,) with matching n")
    if X.shape[0] == 0:
        raise TrainingError("cannot fit on an empty dataset")
    if not np.isfinite(X).all():
        raise TrainingError("X contains non-finite values")
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise TrainingError(f"labels must lie in [0, {n_classes})")
    return X, y


# ---------------------------------------------------------------------------
# Decision tree
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 20
    min_samples_leaf: int = 2


def _best_split_for_feature(
    values: np.ndarray, y: np.ndarray, min_leaf: int
) -> tuple[float, float] | None:
    """Lowest weighted child Gini for one feature, or None if unsplittable.

    Candidate thresholds are midpoints between distinct consecutive sorted
    values; ties on impurity resolve to the lowest threshold.
    """
    order = np.argsort(values, kind="stable")
    sv = values[order]
    sy = y[order]
    n = sv.shape[0]
    boundaries = np.flatnonzero(sv[1:] != sv[:-1])
    if boundaries.size == 0:
        return None
    n_left = boundaries + 1
    valid = (n_left >= min_leaf) & (n - n_left >= min_leaf)
    if not valid.any():
        return None
    b = boundaries[valid]
    n_l = (b + 1).astype(np.float64)
    n_r = n - n_l
    pos_l = np.cumsum(sy)[b].astype(np.float64)
    pos_r = float(sy.sum()) - pos_l
    p_l = pos_l / n_l
    p_r = pos_r / n_r
    gini_l = 2.0 * p_l * (1.0 - p_l)
    gini_r = 2.0 * p_r * (1.0 - p_r)
    weighted = (n_l * gini_l + n_r * gini_r) / n
    k = int(np.argmin(weighted))  # first minimum: lowest threshold wins ties
    threshold = 0.5 * (sv[b[k]] + sv[b[k] + 1])
    return float(weighted[k]), threshold


class DecisionTree:
    """Binary CART tree with Gini impurity and midpoint thresholds.

    Nodes are stored in flat parallel arrays so prediction can route all
    rows level by level without Python-level recursion.
    """

    def __init__(self, config: TreeConfig | None = None):
        self.config = config or TreeConfig()
        self._feature: np.ndarray | None = None
        self._threshold: np.ndarray | None = None
        self._left: np.ndarray | None = None
        self._right: np.ndarray | None = None
        self._proba: np.ndarray | None = None

    def fit(
        self,
        X,
        y,
        mtry: int | None = None,
        rng: np.random.Generator | None = None,
    ) -> "DecisionTree":
        """Grow the tree; ``mtry`` draws that many candidate features per node.

        The rng is consumed in preorder node order, so a fixed generator
        state yields a fixed tree.
        """
        X, y = _check_xy(X, y)
        n, d = X.shape
        if mtry is not None and not (1 <= mtry <= d):
            raise TrainingError(f"mtry must be in [1, {d}]")
        cfg = self.config
        feature: list[int] = []
        threshold: list[float] = []
        left: list[int] = []
        right: list[int] = []
        proba: list[float] = []

        def new_node(idx: np.ndarray) -> int:
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            proba.append(float(y[idx].mean()))
            return len(feature) - 1

        root_idx = np.arange(n)
        stack: list[tuple[int, int, np.ndarray]] = [(new_node(root_idx), 0, root_idx)]
        while stack:
            node, depth, idx = stack.pop()
            ny = y[idx]
            pos = int(ny.sum())
            if (
                depth >= cfg.max_depth
                or idx.size < 2 * cfg.min_samples_leaf
                or pos == 0
                or pos == idx.size
            ):
                continue
            if mtry is None:
                candidates = np.arange(d)
            else:
                candidates = np.sort(rng.choice(d, size=mtry, replace=False))
            parent_gini = 2.0 * (pos / idx.size) * (1.0 - pos / idx.size)
            best: tuple[float, int, float] | None = None  # (child impurity, feat, thr)
            for f in candidates:
                found = _best_split_for_feature(X[idx, f], ny, cfg.min_samples_leaf)
                if found is None:
                    continue
                impurity, thr = found
                # strict < keeps the lowest feature index on exact ties
                if best is None or impurity < best[0]:
                    best = (impurity, int(f), thr)
            if best is None or parent_gini - best[0] <= 0.0:
                continue
            _, f, thr = best
            go_left = X[idx, f] <= thr
            left_idx, right_idx = idx[go_left], idx[~go_left]
            feature[node] = f
            threshold[node] = thr
            left[node] = new_node(left_idx)
            right[node] = new_node(right_idx)
            # push right first so the left child is grown first (preorder)
            stack.append((right[node], depth + 1, right_idx))
            stack.append((left[node], depth + 1, left_idx))

        self._feature = np.array(feature, dtype=np.int64)
        self._threshold = np.array(threshold, dtype=np.float64)
        self._left = np.array(left, dtype=np.int64)
        self._right = np.array(right, dtype=np.int64)
        self._proba = np.array(proba, dtype=np.float64)
        return self

    @property
    def n_nodes(self) -> int:
        return 0 if self._feature is None else self._feature.shape[0]

    def predict_proba(self, X) -> np.ndarray:
        """Probability of class 1 for each row."""
        if self._feature is None:
            raise TrainingError("tree is not fitted")
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self._feature[node]
            active = np.flatnonzero(feat >= 0)
            if active.size == 0:
                break
            cur = node[active]
            go_left = X[active, feat[active]] <= self._threshold[cur]
            node[active] = np.where(go_left, self._left[cur], self._right[cur])
        return self._proba[node]

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "config": {"max_depth": self.config.max_depth,
                       "min_samples_leaf": self.config.min_samples_leaf},
            "feature": self._feature.tolist(),
            "threshold": self._threshold.tolist(),
            "left": self._left.tolist(),
            "right": self._right.tolist(),
            "proba": self._proba.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        tree = cls(TreeConfig(**d["config"]))
        tree._feature = np.array(d["feature"], dtype=np.int64)
        tree._threshold = np.array(d["threshold"], dtype=np.float64)
        tree._left = np.array(d["left"], dtype=np.int64)
        tree._right = np.array(d["right"], dtype=np.int64)
        tree._proba = np.array(d["proba"], dtype=np.float64)
        return tree


# ---------------------------------------------------------------------------
# Random forest
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 20
    min_samples_leaf: int = 2
    mtry: int | None = None  # None: floor(sqrt(n_features)) at fit time
    bootstrap: bool = True
    seed: int = 0
    n_jobs: int = 1


def _fit_forest_tree(X: np.ndarray, y: np.ndarray, cfg: ForestConfig,
                     mtry: int, tree_idx: int) -> DecisionTree:
    # One substream per tree: bootstrap draw first, then per-node mtry draws.
    rng = np.random.default_rng([cfg.seed, tree_idx])
    if cfg.bootstrap:
        boot = rng.integers(0, X.shape[0], size=X.shape[0])
        X, y = X[boot], y[boot]
    tree = DecisionTree(TreeConfig(cfg.max_depth, cfg.min_samples_leaf))
    return tree.fit(X, y, mtry=mtry, rng=rng)


class RandomForest:
    """Bagged CART trees with per-node feature subsampling.

    Each tree draws its bootstrap and feature subsets from an independent
    substream keyed by (seed, tree index), so fitting trees in parallel
    gives the same forest as fitting them serially.
    """

    def __init__(self, config: ForestConfig | None = None):
        self.config = config or ForestConfig()
        self.trees: list[DecisionTree] = []
        self.mtry_: int | None = None

    def fit(self, X, y) -> "RandomForest":
        X, y = _check_xy(X, y)
        cfg = self.config
        if cfg.n_trees < 1:
            raise TrainingError("n_trees must be >= 1")
        self.mtry_ = cfg.mtry if cfg.mtry is not None else max(1, int(math.isqrt(X.shape[1])))
        if not (1 <= self.mtry_ <= X.shape[1]):
            raise TrainingError(f"mtry must be in [1, {X.shape[1]}]")
        indices = range(cfg.n_trees)
        if cfg.n_jobs != 1:
            from joblib import Parallel, delayed
            self.trees = Parallel(n_jobs=cfg.n_jobs)(
                delayed(_fit_forest_tree)(X, y, cfg, self.mtry_, i) for i in indices
            )
        else:
            self.trees = [_fit_forest_tree(X, y, cfg, self.mtry_, i) for i in indices]
        return self

    def predict_proba(self, X) -> np.ndarray:
        """Mean class-1 probability over trees, accumulated in tree order."""
        if not self.trees:
            raise TrainingError("forest is not fitted")
        X = np.asarray(X, dtype=np.float64)
        total = np.zeros(X.shape[0], dtype=np.float64)
        for tree in self.trees:
            total += tree.predict_proba(X)
        return total / len(self.trees)

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int64)

    def to_dict(self) -> dict:
        # n_jobs is an execution knob, not model identity; keep it out so
        # the saved artifact is byte-identical across worker counts.
        return {
            "config": {"n_trees": self.config.n_trees,
                       "max_depth": self.config.max_depth,
                       "min_samples_leaf": self.config.min_samples_leaf,
                       "mtry": self.config.mtry,
                       "bootstrap": self.config.bootstrap,
                       "seed": self.config.seed},
            "mtry_": self.mtry_,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForest":
        forest = cls(ForestConfig(**d["config"]))
        forest.mtry_ = d["mtry_"]
        forest.trees = [DecisionTree.from_dict(t) for t in d["trees"]]
        return forest


# ---------------------------------------------------------------------------
# Logistic regression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogisticConfig:
    learning_rate: float = 0.1
    max_iter: int = 1000
    l2: float = 1e-4
    tol: float = 1e-6  # convergence: max-norm of the full gradient


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss_and_grad(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float = 0.0
) -> tuple[float, np.ndarray, float]:
    """Mean cross-entropy of sigmoid(Xw + b) against y, with its gradient.

    A positive l2 adds the ridge penalty (l2/2)*||w||^2; the bias is not
    penalized.
    """
    z = X @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    residual = _sigmoid(z) - y
    grad_w = X.T @ residual / X.shape[0]
    grad_b = float(residual.mean())
    if l2 > 0.0:
        loss += 0.5 * l2 * float(w @ w)
        grad_w = grad_w + l2 * w
    return loss, grad_w, grad_b


class LogisticRegression:
    """Full-batch gradient descent from zero-initialized weights."""

    def __init__(self, config: LogisticConfig | None = None):
        self.config = config or LogisticConfig()
        self.weights: np.ndarray | None = None
        self.bias: float = 0.0
        self.n_iter_: int = 0
        self.converged_: bool = False

    def fit(self, X, y) -> "LogisticRegression":
        X, y = _check_xy(X, y)
        cfg = self.config
        w = np.zeros(X.shape[1], dtype=np.float64)
        b = 0.0
        yf = y.astype(np.float64)
        self.converged_ = False
        for it in range(1, cfg.max_iter + 1):
            loss, grad_w, grad_b = logistic_loss_and_grad(w, b, X, yf, l2=cfg.l2)
            if not np.isfinite(loss):
                raise TrainingError(f"logistic loss diverged at iteration {it}")
            if max(float(np.abs(grad_w).max()), abs(grad_b)) < cfg.tol:
                self.converged_ = True
                self.n_iter_ = it - 1
                break
            w -= cfg.learning_rate * grad_w
            b -= cfg.learning_rate * grad_b
        else:
            self.n_iter_ = cfg.max_iter
        self.weights = w
        self.bias = b
        return self

    def predict_proba(self, X) -> np.ndarray:
        if self.weights is None:
            raise TrainingError("model is not fitted")
        X = np.asarray(X, dtype=np.float64)
        return _sigmoid(X @ self.weights + self.bias)

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "config": {"learning_rate": self.config.learning_rate,
                       "max_iter": self.config.max_iter,
                       "l2": self.config.l2,
                       "tol": self.config.tol},
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "n_iter": self.n_iter_,
            "converged": self.converged_,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LogisticRegression":
        model = cls(LogisticConfig(**d["config"]))
        model.weights = np.array(d["weights"], dtype=np.float64)
        model.bias = float(d["bias"])
        model.n_iter_ = d["n_iter"]
        model.converged_ = d["converged"]
        return model


# ---------------------------------------------------------------------------
# Multilayer perceptron
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MLPConfig:
    hidden: tuple[int, ...] = (64, 32)
    n_classes: int = 2
    batch_size: int = 128
    learning_rate: float = 0.01
    momentum: float = 0.9
    epochs: int = 50
    l2: float = 0.0
    seed: int = 0


@dataclass
class TrainingCurves:
    """Per-epoch loss/accuracy, on train and (optionally) validation data."""

    train_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"train_loss": self.train_loss, "train_accuracy": self.train_accuracy,
                "val_loss": self.val_loss, "val_accuracy": self.val_accuracy}


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def mlp_loss_and_grads(
    weights: list[np.ndarray],
    biases: list[np.ndarray],
    X: np.ndarray,
    y: np.ndarray,
    l2: float = 0.0,
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean cross-entropy of the ReLU/softmax network, with all gradients.

    Layer l computes z_l = a_{l-1} W_l + b_l; hidden activations are ReLU
    and the final layer feeds a softmax.  A positive l2 adds the ridge
    penalty (l2/2)*sum(W**2) over weight matrices; biases stay unpenalized.
    """
    n = X.shape[0]
    activations = [X]
    pre: list[np.ndarray] = []
    a = X
    for l, (W, b) in enumerate(zip(weights, biases)):
        z = a @ W + b
        pre.append(z)
        a = np.maximum(z, 0.0) if l < len(weights) - 1 else z
        activations.append(a)
    logp = _log_softmax(pre[-1])
    loss = float(-logp[np.arange(n), y].mean())
    if l2 > 0.0:
        loss += 0.5 * l2 * sum(float(np.sum(W * W)) for W in weights)

    delta = np.exp(logp)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grad_w: list[np.ndarray] = [np.empty(0)] * len(weights)
    grad_b: list[np.ndarray] = [np.empty(0)] * len(weights)
    for l in range(len(weights) - 1, -1, -1):
        grad_w[l] = activations[l].T @ delta
        if l2 > 0.0:
            grad_w[l] = grad_w[l] + l2 * weights[l]
        grad_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ weights[l].T) * (pre[l - 1] > 0.0)
    return loss, grad_w, grad_b


class MLP:
    """ReLU network with a softmax head, trained by momentum SGD.

    He-initialized weights and epoch shuffles come from one generator
    seeded by the config, so a config fixes the whole training run.
    """

    def __init__(self, config: MLPConfig | None = None):
        self.config = config or MLPConfig()
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        self.curves = TrainingCurves()

    def _init_params(self, n_features: int, rng: np.random.Generator) -> None:
        sizes = (n_features, *self.config.hidden, self.config.n_classes)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            scale = math.sqrt(2.0 / fan_in)
            self.weights.append(rng.standard_normal((fan_in, fan_out)) * scale)
            self.biases.append(np.zeros(fan_out, dtype=np.float64))

    def _epoch_metrics(self, X: np.ndarray, y: np.ndarray) -> tuple[float, float]:
        logp = _log_softmax(self._forward(X))
        loss = float(-logp[np.arange(X.shape[0]), y].mean())
        acc = float((logp.argmax(axis=1) == y).mean())
        return loss, acc

    def fit(self, X, y, X_val=None, y_val=None) -> "MLP":
        cfg = self.config
        X, y = _check_xy(X, y, n_classes=cfg.n_classes)
        if (X_val is None) != (y_val is None):
            raise TrainingError("provide both X_val and y_val or neither")
        if X_val is not None:
            X_val, y_val = _check_xy(X_val, y_val, n_classes=cfg.n_classes)
        rng = np.random.default_rng(cfg.seed)
        self._init_params(X.shape[1], rng)
        velocity_w = [np.zeros_like(W) for W in self.weights]
        velocity_b = [np.zeros_like(b) for b in self.biases]
        self.curves = TrainingCurves()

        for epoch in range(1, cfg.epochs + 1):
            perm = rng.permutation(X.shape[0])
            for start in range(0, X.shape[0], cfg.batch_size):
                batch = perm[start:start + cfg.batch_size]
                loss, grad_w, grad_b = mlp_loss_and_grads(
                    self.weights, self.biases, X[batch], y[batch], l2=cfg.l2
                )
                if not np.isfinite(loss):
                    raise TrainingError(f"mlp loss diverged at epoch {epoch}")
                for l in range(len(self.weights)):
                    velocity_w[l] = cfg.momentum * velocity_w[l] - cfg.learning_rate * grad_w[l]
                    velocity_b[l] = cfg.momentum * velocity_b[l] - cfg.learning_rate * grad_b[l]
                    self.weights[l] += velocity_w[l]
                    self.biases[l] += velocity_b[l]
            train_loss, train_acc = self._epoch_metrics(X, y)
            if not np.isfinite(train_loss):
                raise TrainingError(f"mlp loss diverged at epoch {epoch}")
            self.curves.train_loss.append(train_loss)
            self.curves.train_accuracy.append(train_acc)
            if X_val is not None:
                val_loss, val_acc = self._epoch_metrics(X_val, y_val)
                self.curves.val_loss.append(val_loss)
                self.curves.val_accuracy.append(val_acc)
        return self

    def _forward(self, X: np.ndarray) -> np.ndarray:
        a = X
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ W + b
            a = np.maximum(z, 0.0) if l < len(self.weights) - 1 else z
        return a

    def predict_proba(self, X) -> np.ndarray:
        """Softmax class probabilities, shape (n, n_classes); rows sum to 1."""
        if not self.weights:
            raise TrainingError("model is not fitted")
        X = np.asarray(X, dtype=np.float64)
        return np.exp(_log_softmax(self._forward(X)))

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)

    def binary_scores(self, X) -> np.ndarray:
        """Class-1 probability; only valid for two-class configs."""
        if self.config.n_classes != 2:
            raise TrainingError("binary_scores requires a two-class model")
        return self.predict_proba(X)[:, 1]

    def to_dict(self) -> dict:
        return {
            "config": {"hidden": list(self.config.hidden),
                       "n_classes": self.config.n_classes,
                       "batch_size": self.config.batch_size,
                       "learning_rate": self.config.learning_rate,
                       "momentum": self.config.momentum,
                       "epochs": self.config.epochs,
                       "l2": self.config.l2,
                       "seed": self.config.seed},
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "curves": self.curves.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MLP":
        cfg = dict(d["config"])
        cfg["hidden"] = tuple(cfg["hidden"])
        model = cls(MLPConfig(**cfg))
        model.weights = [np.array(W, dtype=np.float64) for W in d["weights"]]
        model.biases = [np.array(b, dtype=np.float64) for b in d["biases"]]
        curves = d.get("curves", {})
        model.curves = TrainingCurves(**curves)
        return model


# ---------------------------------------------------------------------------
# Model serialization
# ---------------------------------------------------------------------------

_MODEL_KINDS = {
    "decision_tree": DecisionTree,
    "random_forest": RandomForest,
    "logistic": LogisticRegression,
    "mlp": MLP,
}


def model_kind(model) -> str:
    for kind, cls in _MODEL_KINDS.items():
        if isinstance(model, cls):
            return kind
    raise TrainingError(f"unknown model type {type(model).__name__}")


def save_model(model, path: str | Path) -> None:
    """Write a fitted model as JSON with a format version and kind tag."""
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": model_kind(model),
        "model": model.to_dict(),
    }
    Path(path).write_text(json.dumps(payload) + "\n")


def load_model(path: str | Path):
    try:
        payload = json.loads(Path(path).read_text())
    except OSError as exc:
        raise TrainingError(f"cannot read model {path}: {exc}") from exc
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise TrainingError(f"unsupported model format version {payload.get('format_version')}")
    kind = payload.get("kind")
    if kind not in _MODEL_KINDS:
        raise TrainingError(f"unknown model kind {kind!r}")
    return _MODEL_KINDS[kind].from_dict(payload["model"])
