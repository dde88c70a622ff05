"""Small learners that accept per-record weights (or refuse them)."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .errors import ConfigError, FitError, SchemaError, UnsupportedCombinationError

KINDS = ("linreg", "polyreg", "logreg", "knn")
LOSSES = ("squared", "absolute", "zero_one")

RIDGE = 1e-8


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "linreg"
    degree: int = 1
    k: int = 5
    loss: str | None = None
    learning_rate: float = 0.1
    iterations: int = 500

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        if self.degree < 1:
            raise ConfigError("polynomial degree must be >= 1")
        if self.k < 1:
            raise ConfigError("knn k must be >= 1")
        if self.loss is None:
            object.__setattr__(self, "loss", "zero_one" if self.is_classifier else "absolute")
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss!r}")

    @property
    def is_classifier(self) -> bool:
        return self.kind in ("logreg", "knn")

    @classmethod
    def parse(cls, text: str, loss: str | None = None) -> "ModelSpec":
        """Parse ``linreg``, ``polyreg:D``, ``logreg`` or ``knn:K``."""
        name, _, arg = text.strip().partition(":")
        try:
            if name == "polyreg":
                return cls("polyreg", degree=int(arg or 2), loss=loss)
            if name == "knn":
                return cls("knn", k=int(arg or 5), loss=loss)
        except ValueError:
            raise ConfigError(f"bad model argument in {text!r}") from None
        if arg:
            raise ConfigError(f"model {name!r} takes no argument")
        return cls(name, loss=loss)

    def __str__(self):
        if self.kind == "polyreg":
            return f"polyreg:{self.degree}"
        if self.kind == "knn":
            return f"knn:{self.k}"
        return self.kind


@dataclass
class TrainedModel:
    spec: ModelSpec
    n_features: int
    coef: np.ndarray | None = None
    classes: tuple = ()
    # knn keeps the training set
    X: np.ndarray | None = None
    y: np.ndarray | None = None
    terms: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {"model": str(self.spec), "n_features": self.n_features}
        if self.coef is not None:
            d["coef"] = [float(c) for c in self.coef]
            d["terms"] = [list(t) for t in self.terms] + [[]]
        if self.classes:
            d["classes"] = list(self.classes)
        return d


def poly_terms(d: int, degree: int) -> list:
    terms = []
    for deg in range(1, degree + 1):
        terms.extend(combinations_with_replacement(range(d), deg))
    return terms


def design_matrix(X: np.ndarray, terms) -> np.ndarray:
    """Monomial columns for ``terms`` followed by an intercept column."""
    cols = [np.prod(X[:, list(t)], axis=1) for t in terms]
    cols.append(np.ones(X.shape[0]))
    return np.column_stack(cols)


def _check_weights(weights, n):
    if weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise SchemaError(f"expected {n} weights, got shape {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ConfigError("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise ConfigError("weights must have a positive sum")
    return w / total


def _weighted_lstsq(A, y, w):
    Aw = A * w[:, None]
    normal = A.T @ Aw + RIDGE * np.eye(A.shape[1])
    try:
        coef = np.linalg.solve(normal, Aw.T @ y)
    except np.linalg.LinAlgError as exc:
        raise FitError(f"normal equations are singular: {exc}") from None
    if not np.all(np.isfinite(coef)):
        raise FitError("least-squares solution is not finite")
    return coef


def _sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def fit(spec: ModelSpec, X, y, weights=None) -> TrainedModel:
    """Fit ``spec`` on feature matrix ``X`` and labels ``y``.

    Weights are rescaled to sum to one, so multiplying them by a constant
    does not change the fit.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, d = X.shape
    if n < 1:
        raise FitError("cannot fit on zero records")
    if len(y) != n:
        raise SchemaError(f"{n} feature rows but {len(y)} labels")

    if spec.kind in ("linreg", "polyreg"):
        w = _check_weights(weights, n)
        terms = poly_terms(d, spec.degree if spec.kind == "polyreg" else 1)
        coef = _weighted_lstsq(design_matrix(X, terms), np.asarray(y, dtype=float), w)
        return TrainedModel(spec, d, coef=coef, terms=terms)

    classes = tuple(sorted(set(y)))
    if spec.kind == "knn":
        if weights is not None:
            w = np.asarray(weights, dtype=float)
            if w.size and not np.allclose(w, w[0], rtol=0, atol=0):
                raise UnsupportedCombinationError("knn cannot train on weighted records")
        return TrainedModel(spec, d, classes=classes, X=X.copy(), y=np.asarray(y, dtype=object))

    if len(classes) > 2:
        raise ConfigError(f"logreg needs binary labels, got {len(classes)} classes")
    w = _check_weights(weights, n)
    target = np.array([classes.index(v) for v in y], dtype=float)
    if len(classes) == 1:
        target[:] = 0.0
    # z-score with the weighted moments so weights and replication agree
    mu = w @ X
    sd = np.sqrt(w @ (X - mu) ** 2)
    sd[sd == 0] = 1.0
    A = np.column_stack([(X - mu) / sd, np.ones(n)])
    beta = np.zeros(d + 1)
    for _ in range(spec.iterations):
        grad = A.T @ (w * (_sigmoid(A @ beta) - target))
        beta -= spec.learning_rate * grad
    coef = np.append(beta[:d] / sd, beta[d] - np.sum(beta[:d] * mu / sd))
    return TrainedModel(spec, d, coef=coef, classes=classes, terms=poly_terms(d, 1))


def _check_arity(model, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None] if model.n_features == 1 else X[None, :]
    if X.shape[1] != model.n_features:
        raise SchemaError(f"model expects {model.n_features} features, got {X.shape[1]}")
    return X


def decision_function(model: TrainedModel, X) -> np.ndarray:
    X = _check_arity(model, X)
    return design_matrix(X, model.terms) @ model.coef


def predict_proba(model: TrainedModel, X) -> np.ndarray:
    """Probability of the second class for a logistic model."""
    if model.spec.kind != "logreg":
        raise ConfigError("predict_proba needs a logreg model")
    if len(model.classes) == 1:
        return np.zeros(_check_arity(model, X).shape[0])
    return _sigmoid(decision_function(model, X))


def predict(model: TrainedModel, X) -> np.ndarray:
    kind = model.spec.kind
    if kind in ("linreg", "polyreg"):
        return decision_function(model, X)
    if kind == "logreg":
        p = predict_proba(model, X)
        out = np.empty(len(p), dtype=object)
        out[:] = [model.classes[-1] if pi >= 0.5 else model.classes[0] for pi in p]
        return out
    return _knn_predict(model, _check_arity(model, X))


def _knn_predict(model, X):
    k = min(model.spec.k, len(model.y))
    out = np.empty(len(X), dtype=object)
    for r, x in enumerate(X):
        dist = np.sum((model.X - x) ** 2, axis=1)
        nearest = np.argsort(dist, kind="stable")[:k]
        votes = {}
        for lab in model.y[nearest]:
            votes[lab] = votes.get(lab, 0) + 1
        best = max(votes.values())
        out[r] = min(c for c, v in votes.items() if v == best)
    return out
