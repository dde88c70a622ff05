"""Metrics, generalization error, unknown-unknowns impact and 2-stage LR baselines."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .dataset import IntegratedSample, deduplicate
from .errors import ConfigError, EmptyInputError, SchemaError
from .models import ModelSpec, TrainedModel, fit, predict, predict_proba

WEIGHT_MIN, WEIGHT_MAX = 1e-6, 1e6
PROB_EPS = 1e-12


def _paired(predictions, labels):
    p = np.asarray(predictions)
    y = np.asarray(labels)
    if p.shape != y.shape:
        raise SchemaError(f"{p.shape[0] if p.ndim else 0} predictions vs {y.shape[0] if y.ndim else 0} labels")
    if p.size == 0:
        raise EmptyInputError("metrics need at least one pair")
    return p, y


def mae(predictions, labels) -> float:
    p, y = _paired(predictions, labels)
    return float(np.mean(np.abs(y.astype(float) - p.astype(float))))


def accuracy(predictions, labels) -> float:
    p, y = _paired(predictions, labels)
    return float(np.mean(p == y))


def pointwise_loss(predictions, labels, loss: str) -> np.ndarray:
    p, y = np.asarray(predictions), np.asarray(labels)
    if loss == "zero_one":
        return (p != y).astype(float)
    r = y.astype(float) - p.astype(float)
    if loss == "squared":
        return r * r
    if loss == "absolute":
        return np.abs(r)
    raise ConfigError(f"unknown loss {loss!r}")


@dataclass
class EvaluationReport:
    method: str
    train_score: float
    test_score: float
    train_loss: float
    test_loss: float
    g_e: float
    delta: float
    n_s: int
    n_t: int
    n_u: int
    seed: int | None = None
    # residual of  g_e = (n_u/n_t) delta + (1/n_t - 1/n_s) sum_S L ; exact only when S is a subset of T
    identity_residual: float = 0.0
    s_subset_of_t: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _score(model, X, y):
    pred = predict(model, X)
    return accuracy(pred, y) if model.spec.is_classifier else mae(pred, y)


def generalization_report(
    model: TrainedModel,
    train: IntegratedSample,
    test: IntegratedSample,
    loss: str | None = None,
    method: str = "",
    seed: int | None = None,
    dedup_train: bool = True,
) -> EvaluationReport:
    """Train/test scores, G_e, the unknown-unknowns impact and their sizes.

    ``train`` is the set the model was fitted on; with ``dedup_train`` its
    duplicates are dropped before averaging (and ``n_s`` is the distinct
    count). ``U`` holds the records of ``test`` whose key never occurs in
    ``train``; its mean loss is ``delta`` (0 when ``U`` is empty).

    Always holds:  g_e = (n_u/n_t) delta + (1/n_t) sum_{T-U} L - (1/n_s) sum_S L.
    When T-U and S coincide as multisets the middle and last terms fold into
    (1/n_t - 1/n_s) sum_S L; ``identity_residual`` reports that form.
    """
    if not test.records:
        raise EmptyInputError("test sample is empty")
    if not train.records:
        raise EmptyInputError("training sample is empty")
    loss = loss or model.spec.loss
    S = deduplicate(train) if dedup_train else train
    n_s, n_t = len(S), len(test)

    X_s, y_s = S.feature_matrix(), S.labels()
    X_t, y_t = test.feature_matrix(), test.labels()
    pred_s, pred_t = predict(model, X_s), predict(model, X_t)
    L_s = pointwise_loss(pred_s, y_s, loss)
    L_t = pointwise_loss(pred_t, y_t, loss)

    s_keys = set(S.keys())
    in_u = np.array([k not in s_keys for k in test.keys()], dtype=bool)
    n_u = int(in_u.sum())
    delta = float(L_t[in_u].mean()) if n_u else 0.0

    sum_s, sum_t = float(L_s.sum()), float(L_t.sum())
    g_e = sum_t / n_t - sum_s / n_s

    general = (n_u / n_t) * delta + float(L_t[~in_u].sum()) / n_t - sum_s / n_s
    assert abs(g_e - general) <= 1e-9 * max(1.0, abs(sum_t) / n_t, abs(sum_s) / n_s), (
        "generalization error decomposition failed"
    )
    folded = (n_u / n_t) * delta + (1.0 / n_t - 1.0 / n_s) * sum_s

    overlap = sorted(k for k, u in zip(test.keys(), in_u) if not u)
    subset = overlap == sorted(S.keys())

    score = accuracy if model.spec.is_classifier else mae
    return EvaluationReport(
        method=method,
        train_score=score(pred_s, y_s),
        test_score=score(pred_t, y_t),
        train_loss=sum_s / n_s,
        test_loss=sum_t / n_t,
        g_e=g_e,
        delta=delta,
        n_s=n_s,
        n_t=n_t,
        n_u=n_u,
        seed=seed,
        identity_residual=g_e - folded,
        s_subset_of_t=subset,
    )


# ------------------------------------------------------------- 2-stage LR


def scale_factors(prob_in_s, n_s: int, n_t: int, mode: str = "two_stage_lr"):
    """Turn membership probabilities into importance weights.

    ``two_stage_lr``: ``(n_s/n_t) * (1/f - 1)``; ``ssb``: ``1/f`` normalized to
    sum 1. Weights are clipped to ``[1e-6, 1e6]``. Returns ``(weights, flagged)``
    where ``flagged`` marks degenerate probabilities or clipping.
    """
    f = np.asarray(prob_in_s, dtype=float)
    flagged = bool(np.any((f <= 0.0) | (f >= 1.0)))
    f = np.clip(f, PROB_EPS, 1.0)
    if mode == "two_stage_lr":
        raw = (n_s / n_t) * (1.0 / f - 1.0)
    elif mode == "ssb":
        raw = 1.0 / f
    else:
        raise ConfigError(f"unknown baseline mode {mode!r}")
    w = np.clip(raw, WEIGHT_MIN, WEIGHT_MAX)
    flagged = flagged or bool(np.any(w != raw))
    if mode == "ssb":
        w = w / w.sum()
    return w, flagged


def _unique_rows(X):
    seen = set()
    keep = []
    for i, row in enumerate(X):
        key = tuple(row.tolist())
        if key not in seen:
            seen.add(key)
            keep.append(i)
    return X[keep]


def membership_model(X_s, X_t, spec: ModelSpec | None = None) -> TrainedModel:
    spec = spec or ModelSpec("logreg")
    X = np.vstack([X_s, X_t])
    y = ["S"] * len(X_s) + ["T"] * len(X_t)
    return fit(spec, X, y)


def two_stage_lr_weights(X_s, X_t, mode: str = "two_stage_lr", spec: ModelSpec | None = None):
    """Importance weights for the training rows from an S-vs-T logistic model.

    Needs the (unlabeled) test features, so this is a comparison baseline only.
    Test rows are de-duplicated first, which makes the weights independent of
    repeated test rows. Returns ``(weights, flagged)``.
    """
    X_s = np.asarray(X_s, dtype=float)
    X_t = _unique_rows(np.asarray(X_t, dtype=float))
    if len(X_s) == 0 or len(X_t) == 0:
        raise EmptyInputError("2-stage LR needs both training and test features")
    model = membership_model(X_s, X_t, spec)
    # classes are sorted ("S", "T"); predict_proba gives P(T)
    prob_s = 1.0 - predict_proba(model, X_s)
    return scale_factors(prob_s, len(X_s), len(X_t), mode)
