"""End-to-end acceptance checks; each test prints one PASS/FAIL line."""
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, example, given, settings, strategies as st

from unklearn.bucketize import BucketizeConfig, dynamic_buckets
from unklearn.cli import main
from unklearn.correct import (
    KdeConfig, SmoteConfig, bucket_weights, estimate_buckets, kde_synthesize,
    smote_synthesize, weight_by_unknown_count,
)
from unklearn.dataset import FrequencyProfile, Record, deduplicate, sample_from_arrays
from unklearn.evaluate import generalization_report, scale_factors, two_stage_lr_weights
from unklearn.models import ModelSpec, fit
from unklearn.pipeline import ORIGINAL, SYN_KDE, MethodSettings, end_to_end
from unklearn.simulate import BiasModel, SimulationConfig
from unklearn.species import chao92, raw_coverage

from conftest import make_sample

pytestmark = pytest.mark.acceptance


@pytest.fixture
def verdict(capsys):
    def report(number, title, ok, detail=""):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {title}  {detail}")
        assert ok, f"criterion {number} failed: {detail}"
    return report


def test_chao92_monte_carlo(verdict):
    D, n = 1000, 5000
    estimates, times = [], []
    for seed in range(50):
        draws = np.random.default_rng(seed).integers(0, D, size=n)
        start = time.perf_counter()
        est = chao92(FrequencyProfile.from_counts(np.bincount(draws)))
        times.append(time.perf_counter() - start)
        estimates.append(est.d_chao92)
    mean = float(np.mean(estimates))
    ok = abs(mean - D) <= 0.1 * D and np.mean(times) < 5.0
    verdict(1, "Chao92 Monte-Carlo", ok,
            f"mean D_hat={mean:.1f} (target 1000 +/- 100), mean runtime {np.mean(times) * 1e3:.2f} ms")


def _triple(rng, kind):
    n_t = int(rng.integers(8, 60))
    d = int(rng.integers(1, 4))
    X = rng.normal(size=(n_t, d)) * rng.uniform(0.5, 5)
    if kind in ("logreg", "knn"):
        y = np.where(X[:, 0] + rng.normal(size=n_t) > 0, "a", "b").astype(object)
        y[:2] = ["a", "b"]
        T = sample_from_arrays(X, y, classification=True)
    else:
        T = sample_from_arrays(X, X @ rng.normal(size=d) + rng.normal(size=n_t) * 3)
    T = deduplicate(T)
    n_s = int(rng.integers(2, len(T) + 1))
    picks = rng.choice(len(T), size=n_s, replace=False)
    S = T.replace_records(T.records[i] for i in sorted(picks))
    spec = {
        "linreg": ModelSpec("linreg", loss=str(rng.choice(["absolute", "squared"]))),
        "polyreg": ModelSpec("polyreg", degree=int(rng.integers(2, 4)), loss="squared"),
        "logreg": ModelSpec("logreg"),
        "knn": ModelSpec("knn", k=int(rng.integers(1, 4))),
    }[kind]
    return S, T, spec


def test_decomposition_identity(verdict):
    rng = np.random.default_rng(2)
    kinds = ("linreg", "polyreg", "logreg", "knn")
    worst = 0.0
    for case in range(100):
        S, T, spec = _triple(rng, kinds[case % 4])
        if spec.is_classifier and len(set(S.labels())) < 2:
            S = S.replace_records(S.records + tuple(r for r in T.records[:2] if r not in S.records))
        model = fit(spec, S.feature_matrix(), S.labels())
        rep = generalization_report(model, S, T)
        assert rep.s_subset_of_t
        worst = max(worst, abs(rep.identity_residual))
    verdict(2, "generalization-error decomposition", worst < 1e-9,
            f"max |residual| over 100 S-subset-of-T triples = {worst:.2e}")


def test_toy_regression_ordering(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 10, 1000)
    y = 2.0 * x + 1.0 + rng.normal(0, 1, 1000)
    base = sample_from_arrays(x[:, None], y)
    sim = SimulationConfig(sources=10, source_size=60, seed=0,
                           bias=BiasModel("threshold", "x1", cutoff=5.0, ratio=0.0))
    results = end_to_end(base, sim, MethodSettings(model=ModelSpec("linreg")), repeats=20,
                         methods=(ORIGINAL, SYN_KDE))
    by_seed = {}
    for r in results:
        by_seed.setdefault(r.seed, {})[r.method] = r.report
    better_mae = sum(v[SYN_KDE].test_score < v[ORIGINAL].test_score for v in by_seed.values())
    better_ge = sum(abs(v[SYN_KDE].g_e) < abs(v[ORIGINAL].g_e) for v in by_seed.values())
    elapsed = time.perf_counter() - start
    ok = better_mae >= 16 and better_ge >= 16 and elapsed < 30
    verdict(3, "toy regression SynUnk(KDE) vs Original", ok,
            f"lower MAE {better_mae}/20, smaller |G_e| {better_ge}/20 (need 16/20), {elapsed:.1f} s")


# small alphabets give the duplicate-heavy samples that integration produces
values = st.integers(1, 15).flatmap(lambda k: st.lists(st.integers(0, k), min_size=1, max_size=40))
thetas = st.floats(0.01, 1.0)
SETTINGS = settings(max_examples=1000, deadline=None, database=None, derandomize=True,
                    suppress_health_check=list(HealthCheck))


@SETTINGS
@given(values, thetas)
def _coverage_property(vals, theta):
    buckets = dynamic_buckets(make_sample(vals), 0, theta).buckets
    for b in buckets[:-1]:
        assert raw_coverage(b.profile) >= theta


@SETTINGS
@given(values, thetas)
def _partition_property(vals, theta):
    buckets = dynamic_buckets(make_sample(vals), 0, theta).buckets
    joined = [r.features[0] for b in buckets for r in b.records]
    assert joined == sorted(float(v) for v in vals)


@SETTINGS
@given(values, thetas, thetas)
@example([0, 1, 1, 1, 1, 2, 2], 0.75, 0.76)
def _monotone_property(vals, t1, t2):
    lo, hi = sorted((t1, t2))
    s = make_sample(vals)
    assert len(dynamic_buckets(s, 0, lo).buckets) >= len(dynamic_buckets(s, 0, hi).buckets)


def test_bucket_invariants(verdict):
    outcome = {}
    for name, prop in (("coverage", _coverage_property), ("partition", _partition_property),
                       ("monotone-in-theta", _monotone_property)):
        try:
            prop()
            outcome[name] = "ok"
        except AssertionError as exc:
            outcome[name] = f"falsified ({str(exc).splitlines()[0][:80]})"
    ok = all(v == "ok" for v in outcome.values())
    verdict(4, "bucket invariants (1000 examples each)", ok,
            ", ".join(f"{k}: {v}" for k, v in outcome.items()))


def _knn_pairs(data, d, k):
    """Reference neighbour lists over z-scored features (label excluded)."""
    f = data[:, :d]
    sd = f.std(axis=0)
    sd[sd == 0] = 1
    z = (f - f.mean(axis=0)) / sd
    dist = ((z[:, None, :] - z[None, :, :]) ** 2).sum(-1)
    np.fill_diagonal(dist, np.inf)
    return np.argsort(dist, axis=1, kind="stable")[:, :k]


def _on_some_segment(u, data, nbrs):
    best = np.inf
    for i in range(len(data)):
        a = data[i]
        for j in nbrs[i]:
            b = data[j]
            span = b - a
            denom = span @ span
            if denom == 0:
                continue
            g = float((u - a) @ span / denom)
            resid = np.linalg.norm(u - (a + g * span))
            scale = max(np.linalg.norm(a), np.linalg.norm(b), 1.0)
            lo, hi = np.minimum(a, b), np.maximum(a, b)
            tol = 1e-9 * scale
            if np.all(u >= lo - tol) and np.all(u <= hi + tol) and resid <= tol:
                return 0.0
            best = min(best, resid / scale)
    return best


def test_smote_geometry(verdict):
    rng = np.random.default_rng(5)
    total, misses = 0, 0
    bucket = 0
    while total < 10_000:
        m, d, k = int(rng.integers(3, 25)), int(rng.integers(1, 4)), int(rng.integers(1, 6))
        k = min(k, m - 1)
        X = rng.normal(size=(m, d)) * rng.uniform(0.1, 100)
        y = X.sum(axis=1) + rng.normal(size=m)
        recs = [Record(tuple(map(float, row)), float(t)) for row, t in zip(X, y)]
        data = np.column_stack([X, y])
        nbrs = _knn_pairs(data, d, k)
        l = min(500, 10_000 - total)
        for r in smote_synthesize(recs, l, SmoteConfig(k=k, seed=bucket)):
            u = np.array(r.features + (r.label,))
            if _on_some_segment(u, data, nbrs) != 0.0:
                misses += 1
        total += l
        bucket += 1
    verdict(5, "SMOTE segment geometry", misses == 0,
            f"{total} synthetic records over {bucket} buckets, {misses} off-segment")


def test_kde_sanity(verdict):
    rng = np.random.default_rng(6)
    x = rng.normal(3.0, 2.0, 100)
    recs = [Record((float(v),), 0.0) for v in x]
    synth = kde_synthesize(recs, 1000, KdeConfig(seed=1))
    xs = np.array([r.features[0] for r in synth])
    # a KDE draw has variance (m-1)/m s^2 + h^2 around the sample mean
    h = 1.06 * x.std(ddof=1) * 100 ** -0.2
    se = np.sqrt(x.var() + h ** 2) / np.sqrt(len(xs))
    z = abs(xs.mean() - x.mean()) / se
    exact = kde_synthesize(recs, 1000, KdeConfig(bandwidth=0.0, seed=1))
    existing = set(recs)
    copies_only = all(r in existing for r in exact)
    verdict(6, "KDE mean and zero-bandwidth", z < 3 and copies_only,
            f"|mean diff| = {z:.2f} SE (need < 3); bandwidth 0 reuses points only: {copies_only}")


def test_weighting(verdict):
    w, _ = bucket_weights([150, 400, 50])
    example = w == [150 / 600, 400 / 600, 50 / 600]
    rng = np.random.default_rng(8)
    sums_ok, order_ok = True, True
    for _ in range(50):
        vals = rng.integers(0, 40, size=int(rng.integers(20, 200)))
        bs = estimate_buckets(make_sample(vals), BucketizeConfig(float(rng.uniform(0.2, 0.9))))
        out = weight_by_unknown_count([b for _, b in bs])
        u = np.array([b.unknown_count for _, s in bs for b in s])
        bw = np.array(out.bucket_weights)
        sums_ok &= abs(bw.sum() - 1) <= 1e-9
        if not out.uniform_fallback:
            order_ok &= bool(np.array_equal(np.sign(u[:, None] - u[None, :]),
                                            np.sign(bw[:, None] - bw[None, :])))
    verdict(7, "unknown-count weighting", example and sums_ok and order_ok,
            f"150/400/50 exact: {example}; sums to 1: {sums_ok}; ordering preserved: {order_ok}")


def test_weighted_fit_equivalence(verdict):
    rng = np.random.default_rng(9)
    worst = 0.0
    kinds = ("linreg", "polyreg", "logreg")
    for case in range(100):
        kind = kinds[case % 3]
        n, d = int(rng.integers(6, 40)), int(rng.integers(1, 4))
        X = rng.normal(size=(n, d)) * 3
        if kind == "logreg":
            y = np.where(X[:, 0] + rng.normal(size=n) > 0, "p", "q").astype(object)
            y[:2] = ["p", "q"]
        else:
            y = X @ rng.normal(size=d) + rng.normal(size=n)
        w = rng.integers(1, 5, size=n)
        spec = ModelSpec(kind, degree=2) if kind == "polyreg" else ModelSpec(kind)
        a = fit(spec, X, y, w.astype(float)).coef
        b = fit(spec, np.repeat(X, w, axis=0), np.repeat(y, w)).coef
        worst = max(worst, float(np.max(np.abs(a - b))))
    verdict(8, "integer weights vs replication", worst < 1e-6,
            f"max coefficient gap over 100 cases = {worst:.2e}")


def test_two_stage_baseline(verdict):
    ones, _ = scale_factors(np.full(50, 0.5), 50, 50)
    uninformative = bool(np.all(ones == 1.0))
    corrs = []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        X_t = rng.normal(size=(2000, 2))
        incl = 1 / (1 + np.exp(-(1.5 * X_t[:, 0] - 0.5)))
        keep = rng.random(2000) < incl
        w, _ = two_stage_lr_weights(X_t[keep], X_t)
        corrs.append(float(np.corrcoef(w, 1 / incl[keep])[0, 1]))
    ok = uninformative and min(corrs) > 0
    verdict(9, "2-Stage LR sanity", ok,
            f"uniform f -> ones: {uninformative}; corr(w, 1/pi) per seed = "
            + ", ".join(f"{c:.3f}" for c in corrs))


def test_end2end_determinism(verdict, tmp_path):
    rng = np.random.default_rng(10)
    x = rng.uniform(0, 10, 400)
    z = rng.normal(size=400)
    y = 1.5 * x - z + rng.normal(size=400)
    base = tmp_path / "base.csv"
    rows = zip(x.tolist(), z.tolist(), y.tolist())
    base.write_text("x,z,y\n" + "".join(f"{a!r},{b!r},{c!r}\n" for a, b, c in rows))
    argv = ["end2end", "--input", str(base), "--label-col", "y", "--seed", "4", "--repeats", "3",
            "--sources", "6", "--source-size", "50", "--bias", "logistic", "--bias-col", "x"]
    codes = [main(argv + ["--out-dir", str(tmp_path / tag)]) for tag in ("a", "b")]
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
               for f in ("report.csv", "manifest.json"))
    verdict(10, "end2end byte-identical reruns", codes == [0, 0] and same,
            f"exit codes {codes}; artifacts identical: {same}")
