"""The method matrix: train one model per correction strategy and evaluate it."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bucketize import BucketizeConfig
from .correct import KdeConfig, SmoteConfig, apply_correction, estimate_buckets
from .dataset import IntegratedSample, canonical_number, deduplicate
from .errors import UnsupportedCombinationError
from .evaluate import EvaluationReport, generalization_report, two_stage_lr_weights
from .models import ModelSpec, fit
from .simulate import SimulationConfig, simulate

ORIGINAL = "Original"
IDEAL = "Ideal"
WEIGHT = "WeightByUnk"
SYN_KDE = "SynUnk(KDE)"
SYN_SMOTE = "SynUnk(SMOTE)"
TWO_STAGE = "2-Stage LR"
TWO_STAGE_SSB = "2-Stage LR (SSB)"

CORE_METHODS = (ORIGINAL, IDEAL, WEIGHT, SYN_KDE, SYN_SMOTE)
BASELINES = (TWO_STAGE, TWO_STAGE_SSB)
METHODS = CORE_METHODS + BASELINES

REPORT_COLUMNS = (
    "seed", "method", "status", "train_score", "test_score", "train_loss",
    "test_loss", "g_e", "delta", "n_s", "n_t", "n_u",
)


@dataclass(frozen=True)
class MethodSettings:
    model: ModelSpec = field(default_factory=ModelSpec)
    bucketize: BucketizeConfig = field(default_factory=BucketizeConfig)
    kde: KdeConfig = field(default_factory=KdeConfig)
    smote: SmoteConfig = field(default_factory=SmoteConfig)

    def reseeded(self, seed: int) -> "MethodSettings":
        return replace(self, kde=replace(self.kde, seed=seed), smote=replace(self.smote, seed=seed))


@dataclass
class MethodResult:
    seed: int
    method: str
    status: str
    report: EvaluationReport | None = None

    def row(self) -> list:
        r = self.report
        if r is None:
            nums = [math.nan] * 6 + [""] * 3
        else:
            nums = [r.train_score, r.test_score, r.train_loss, r.test_loss, r.g_e, r.delta,
                    r.n_s, r.n_t, r.n_u]
        cells = []
        for v in nums:
            if isinstance(v, float):
                cells.append(canonical_number(v) if not math.isnan(v) else "nan")
            else:
                cells.append(str(v))
        return [str(self.seed), self.method, self.status, *cells]


def _fit_and_report(settings, train, test, weights, method, seed, dedup_train):
    model = fit(settings.model, train.feature_matrix(), train.labels(), weights)
    return generalization_report(model, train, test, method=method, seed=seed,
                                 dedup_train=dedup_train)


def evaluate_training_set(method, train, test, settings, weights=None, seed=0,
                          dedup_train=True) -> MethodResult:
    """Fit on an already prepared training set and evaluate on ``test``."""
    try:
        rep = _fit_and_report(settings, train, test, weights, method, seed, dedup_train)
    except UnsupportedCombinationError:
        return MethodResult(seed, method, "unsupported")
    return MethodResult(seed, method, "ok", rep)


def run_method(method: str, S: IntegratedSample, T: IntegratedSample,
               settings: MethodSettings, seed: int = 0, bucket_sets=None) -> MethodResult:
    """Train with one correction strategy on the integrated sample ``S``.

    Only the Ideal and 2-Stage LR methods look at ``T`` before evaluation.
    """
    weights, dedup = None, True
    if method == ORIGINAL:
        train = deduplicate(S)
    elif method == IDEAL:
        train = T
    elif method in (WEIGHT, SYN_KDE, SYN_SMOTE):
        mode = {WEIGHT: "weight", SYN_KDE: "kde", SYN_SMOTE: "smote"}[method]
        out = apply_correction(S, mode, settings.bucketize, settings.kde, settings.smote,
                               bucket_sets=bucket_sets)
        train, weights, dedup = out.sample(S.schema), out.weights, False
    elif method in BASELINES:
        train = deduplicate(S)
        mode = "two_stage_lr" if method == TWO_STAGE else "ssb"
        weights, _ = two_stage_lr_weights(train.feature_matrix(), T.feature_matrix(), mode)
    else:
        raise ValueError(f"unknown method {method!r}")
    return evaluate_training_set(method, train, T, settings, weights, seed, dedup)


def run_matrix(S, T, settings: MethodSettings, seed: int, methods=METHODS) -> list:
    needs_buckets = any(m in (WEIGHT, SYN_KDE, SYN_SMOTE) for m in methods)
    bucket_sets = None
    if needs_buckets:
        bucket_sets = [bs for _, bs in estimate_buckets(S, settings.bucketize)]
    return [run_method(m, S, T, settings, seed, bucket_sets) for m in methods]


def _one_repeat(args):
    base, sim, settings, seed, methods = args
    S, T = simulate(base, replace(sim, seed=seed))
    return run_matrix(S, T, settings.reseeded(seed), seed, methods)


def end_to_end(base: IntegratedSample, sim: SimulationConfig, settings: MethodSettings,
               repeats: int = 1, methods=METHODS, workers: int = 1) -> list:
    """Run the method matrix for seeds ``sim.seed .. sim.seed + repeats - 1``."""
    jobs = [(base, sim, settings, sim.seed + r, methods) for r in range(repeats)]
    if workers > 1 and repeats > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_seed = list(pool.map(_one_repeat, jobs))
    else:
        per_seed = [_one_repeat(j) for j in jobs]
    return [res for block in per_seed for res in block]


def report_table(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for res in results:
        w.writerow(res.row())
    return buf.getvalue()


def summarize(results) -> dict:
    """Per-method means of test score and |G_e| over the ok rows."""
    out = {}
    for m in dict.fromkeys(r.method for r in results):
        reps = [r.report for r in results if r.method == m and r.report is not None]
        if reps:
            out[m] = {
                "runs": len(reps),
                "test_score": float(np.mean([r.test_score for r in reps])),
                "abs_g_e": float(np.mean([abs(r.g_e) for r in reps])),
            }
    return out
