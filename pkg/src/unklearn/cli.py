"""Command line driver: simulate, estimate, correct, evaluate, end2end.

Settings come from built-in defaults, then an optional INI config file
(``--config``; keys in a ``[unklearn]`` section, named like the long flags),
then explicit flags.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bucketize import BucketizeConfig, validate_theta
from .correct import KdeConfig, SmoteConfig, apply_correction, estimate_buckets
from .dataset import ColumnSpec, deduplicate, load_csv, load_table, parse_number, write_csv
from .errors import ConfigError, SchemaError, UnkError
from .evaluate import two_stage_lr_weights
from .models import ModelSpec
from .pipeline import (
    BASELINES, CORE_METHODS, IDEAL, METHODS, ORIGINAL, MethodSettings, end_to_end,
    evaluate_training_set, report_table, run_method, summarize,
)
from .simulate import BiasModel, SimulationConfig, simulate

log = logging.getLogger("unklearn")

DEFAULTS = {
    "categorical": "",
    "features": "",
    "theta": 0.5,
    "axis": "correlation",
    "mode": "kde",
    "model": "linreg",
    "loss": None,
    "k": 5,
    "bandwidth": "silverman",
    "seed": 0,
    "repeats": 1,
    "workers": 1,
    "sources": 10,
    "source_size": 50,
    "bias": "uniform",
    "bias_col": None,
    "bias_strength": 1.0,
    "cutoff": 0.0,
    "ratio": 0.0,
    "test_fraction": 0.3,
    "subset_of_test": False,
    "no_baselines": False,
    "method": None,
    "test": None,
    "test_features": None,
    "label_col": None,
    "input": None,
    "out_dir": ".",
}

_INT_KEYS = {"k", "seed", "repeats", "workers", "sources", "source_size"}
_FLOAT_KEYS = {"theta", "bias_strength", "cutoff", "ratio", "test_fraction"}
_BOOL_KEYS = {"subset_of_test", "no_baselines"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with a [unklearn] section")
    common.add_argument("--input", help="input CSV")
    common.add_argument("--label-col", dest="label_col")
    common.add_argument("--categorical", help="comma-separated categorical columns")
    common.add_argument("--features", help="comma-separated feature columns (default: all)")
    common.add_argument("--seed", type=int)
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("-v", "--verbose", action="store_true")

    bucket = argparse.ArgumentParser(add_help=False)
    bucket.add_argument("--theta", type=float, help="minimum bucket coverage in (0, 1]")
    bucket.add_argument("--axis", help="correlation | variance | entropy | feature name")

    synth = argparse.ArgumentParser(add_help=False)
    synth.add_argument("--mode", choices=("weight", "kde", "smote"))
    synth.add_argument("--k", type=int, help="SMOTE neighbour count")
    synth.add_argument("--bandwidth", help="'silverman' or a fixed bandwidth")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--model", help="linreg | polyreg:D | logreg | knn:K")
    model.add_argument("--loss", choices=("squared", "absolute", "zero_one"))

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--sources", type=int)
    sim.add_argument("--source-size", dest="source_size", type=int)
    sim.add_argument("--bias", choices=("uniform", "logistic", "threshold"))
    sim.add_argument("--bias-col", dest="bias_col")
    sim.add_argument("--bias-strength", dest="bias_strength", type=float)
    sim.add_argument("--cutoff", type=float)
    sim.add_argument("--ratio", type=float)
    sim.add_argument("--test-fraction", dest="test_fraction", type=float)
    sim.add_argument("--subset-of-test", dest="subset_of_test", action="store_const", const=True)

    p = argparse.ArgumentParser(prog="unklearn", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common, sim], help="draw biased sources and a test split")
    sub.add_parser("estimate", parents=[common, bucket], help="per-bucket unknown counts as JSON")
    sub.add_parser("correct", parents=[common, bucket, synth], help="write a corrected CSV")
    ev = sub.add_parser("evaluate", parents=[common, model], help="train and evaluate one method")
    ev.add_argument("--test", help="test CSV")
    ev.add_argument("--method", help="report label; Ideal trains on the test set")
    ev.add_argument("--test-features", dest="test_features",
                    help="unlabeled test features, required by the 2-Stage LR baselines")
    e2e = sub.add_parser("end2end", parents=[common, bucket, synth, model, sim],
                         help="simulate and run the full method matrix over seeds")
    e2e.add_argument("--repeats", type=int)
    e2e.add_argument("--workers", type=int)
    e2e.add_argument("--no-baselines", dest="no_baselines", action="store_const", const=True)
    for sp in sub.choices.values():
        sp.set_defaults(**{k: None for k in DEFAULTS})
    return p


def _read_config_file(path) -> dict:
    cp = configparser.ConfigParser()
    if not cp.read(path, encoding="utf-8"):
        raise ConfigError(f"cannot read config file {path}")
    section = cp["unklearn"] if cp.has_section("unklearn") else cp.defaults()
    out = {}
    for key, raw in section.items():
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            if key in _INT_KEYS:
                out[key] = int(raw)
            elif key in _FLOAT_KEYS:
                out[key] = float(raw)
            elif key in _BOOL_KEYS:
                out[key] = raw.strip().lower() in ("1", "true", "yes", "on")
            else:
                out[key] = raw
        except ValueError:
            raise ConfigError(f"config key {key!r}: bad value {raw!r}") from None
    return out


def resolve_options(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS)
    if args.config:
        opts.update(_read_config_file(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    opts["command"] = args.command
    return opts


def _split(text) -> list:
    return [t.strip() for t in (text or "").split(",") if t.strip()]


def _column_spec(opts) -> ColumnSpec:
    if not opts["label_col"]:
        raise ConfigError("--label-col is required")
    feats = _split(opts["features"])
    return ColumnSpec(opts["label_col"], frozenset(_split(opts["categorical"])),
                      tuple(feats) if feats else None)


def _bandwidth(text):
    if text == "silverman":
        return text
    try:
        vals = [parse_number(t) for t in str(text).split(",")]
    except ValueError:
        raise ConfigError(f"bad bandwidth {text!r}") from None
    return vals[0] if len(vals) == 1 else tuple(vals)


def _require_file(opts, key, flag):
    if not opts[key]:
        raise ConfigError(f"{flag} is required")
    if not Path(opts[key]).is_file():
        raise ConfigError(f"{flag}: no such file {opts[key]}")
    return Path(opts[key])


def _axis(opts):
    axis = opts["axis"]
    return axis if axis in ("correlation", "variance", "entropy") else ("name", axis)


def validate(opts) -> dict:
    """Check every setting and path; nothing is read or written here."""
    cmd = opts["command"]
    v = {"spec": _column_spec(opts), "seed": int(opts["seed"])}
    v["input"] = _require_file(opts, "input", "--input")
    if cmd in ("estimate", "correct", "end2end"):
        validate_theta(opts["theta"])
        v["axis"] = _axis(opts)
    if cmd in ("correct", "end2end"):
        v["kde"] = KdeConfig(_bandwidth(opts["bandwidth"]), v["seed"])
        v["smote"] = SmoteConfig(int(opts["k"]), v["seed"])
    if cmd in ("evaluate", "end2end"):
        v["model"] = ModelSpec.parse(opts["model"], opts["loss"])
    if cmd in ("simulate", "end2end"):
        bias = BiasModel(opts["bias"], opts["bias_col"], float(opts["bias_strength"]),
                         float(opts["cutoff"]), float(opts["ratio"]))
        v["sim"] = SimulationConfig(int(opts["sources"]), int(opts["source_size"]), bias,
                                    float(opts["test_fraction"]), v["seed"],
                                    bool(opts["subset_of_test"]))
    if cmd == "evaluate":
        v["test"] = _require_file(opts, "test", "--test")
        method = opts["method"]
        if method in BASELINES:
            v["test_features"] = _require_file(opts, "test_features", "--test-features")
        elif opts["test_features"]:
            raise ConfigError("--test-features is only accepted by the 2-Stage LR baselines")
        if method is not None and method not in METHODS and not method.startswith("SynUnk"):
            raise ConfigError(f"unknown method {method!r}")
    if cmd == "end2end":
        if int(opts["repeats"]) < 1:
            raise ConfigError("--repeats must be >= 1")
        if int(opts["workers"]) < 1:
            raise ConfigError("--workers must be >= 1")
    return v


def _bucketize_config(opts, v, schema) -> BucketizeConfig:
    axis = v["axis"]
    if isinstance(axis, tuple):
        idx = schema.column_index(axis[1])
        if idx < 0:
            raise ConfigError("the label column cannot be the bucketization axis")
        axis = idx
    return BucketizeConfig(float(opts["theta"]), axis)


class Artifacts:
    """Tracks written files so a failed run can remove them."""

    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.created_dir = not self.dir.exists()
        self.paths = []

    def path(self, name) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        p = self.dir / name
        self.paths.append(p)
        return p

    def write_text(self, name, text):
        self.path(name).write_text(text, encoding="utf-8")

    def write_json(self, name, obj):
        self.write_text(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def cleanup(self):
        for p in self.paths:
            p.unlink(missing_ok=True)
        if self.created_dir and self.dir.exists() and not any(self.dir.iterdir()):
            self.dir.rmdir()


def _settings(opts, v, schema) -> MethodSettings:
    return MethodSettings(v["model"], _bucketize_config(opts, v, schema), v["kde"], v["smote"])


def cmd_simulate(opts, v, art):
    base = load_csv(v["input"], v["spec"])
    S, T = simulate(base, v["sim"])
    write_csv(S, art.path("S.csv"))
    write_csv(T, art.path("T.csv"))
    art.write_json("manifest.json", {
        "command": "simulate",
        "seed": v["seed"],
        "config": v["sim"].to_dict(),
        "sizes": {"base": len(base), "n_s": len(S), "n_s_distinct": len(deduplicate(S)),
                  "n_t": len(T)},
    })


def _estimate_payload(sample, cfg):
    names = sample.schema.feature_names
    parts = []
    for cls, bs in estimate_buckets(sample, cfg):
        d = bs.to_dict(axis_name=names[bs.axis])
        d["class"] = cls
        parts.append(d)
    return {"n_s": len(sample), "theta": cfg.theta, "partitions": parts}


def cmd_estimate(opts, v, art):
    sample = load_csv(v["input"], v["spec"])
    art.write_json("buckets.json", _estimate_payload(sample, _bucketize_config(opts, v, sample.schema)))


def cmd_correct(opts, v, art):
    sample = load_csv(v["input"], v["spec"])
    cfg = _bucketize_config(opts, v, sample.schema)
    out = apply_correction(sample, opts["mode"], cfg, v["kde"], v["smote"])
    corrected = out.sample(sample.schema)
    if out.mode == "weight":
        write_csv(corrected, art.path("corrected.csv"), weights=out.weights)
    else:
        write_csv(corrected, art.path("corrected.csv"), synthetic=out.synthetic)
    log.info("wrote %d records (%d synthetic)", len(corrected), out.n_synthetic)


def _load_test_features(path, schema):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        rows = [r for r in reader if r]
    names = [schema.feature_names[i] for i in schema.numeric_indices]
    missing = [n for n in names if n not in header]
    if missing:
        raise SchemaError(f"{path}: missing feature columns {missing}")
    cols = [header.index(n) for n in names]
    try:
        return np.array([[parse_number(r[c]) for c in cols] for r in rows], dtype=float)
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from None


def cmd_evaluate(opts, v, art):
    train, extras = load_table(v["input"], v["spec"])
    test = load_csv(v["test"], v["spec"])
    if train.schema != test.schema:
        raise SchemaError("training and test CSVs have different schemas")
    method = opts["method"]
    settings = MethodSettings(model=v["model"])
    corrected = bool(extras)
    if method is None:
        method = "WeightByUnk" if "weight" in extras else "SynUnk" if corrected else ORIGINAL
    if method == IDEAL:
        res = run_method(IDEAL, train, test, settings, v["seed"])
    elif method in BASELINES:
        base = deduplicate(train)
        X_t = _load_test_features(v["test_features"], train.schema)
        mode = "two_stage_lr" if method == BASELINES[0] else "ssb"
        w, _ = two_stage_lr_weights(base.feature_matrix(), X_t, mode)
        res = evaluate_training_set(method, base, test, settings, w, v["seed"], True)
    elif corrected:
        res = evaluate_training_set(method, train, test, settings, extras.get("weight"), v["seed"], False)
    else:
        res = run_method(ORIGINAL, train, test, settings, v["seed"])
        res.method = method
        if res.report is not None:
            res.report.method = method
    if res.report is None:
        raise ConfigError(f"{method}: model {v['model']} cannot train on weighted records")
    art.write_json("report.json", _report_json(res.report))


def _report_json(rep) -> dict:
    d = rep.to_dict()
    return {k: d[k] for k in ("method", "train_score", "test_score", "train_loss", "test_loss",
                              "g_e", "delta", "n_s", "n_t", "n_u", "seed")}


def cmd_end2end(opts, v, art):
    base = load_csv(v["input"], v["spec"])
    settings = _settings(opts, v, base.schema)
    methods = CORE_METHODS if opts["no_baselines"] else METHODS
    results = end_to_end(base, v["sim"], settings, int(opts["repeats"]), methods,
                         int(opts["workers"]))
    art.write_text("report.csv", report_table(results))
    art.write_json("manifest.json", {
        "command": "end2end",
        "seed": v["seed"],
        "repeats": int(opts["repeats"]),
        "methods": list(methods),
        "model": str(settings.model),
        "theta": settings.bucketize.theta,
        "simulation": v["sim"].to_dict(),
        "kde": {"bandwidth": settings.kde.bandwidth},
        "smote": {"k": settings.smote.k},
        "summary": summarize(results),
    })


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "correct": cmd_correct,
    "evaluate": cmd_evaluate,
    "end2end": cmd_end2end,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    art = None
    try:
        opts = resolve_options(args)
        v = validate(opts)
        art = Artifacts(opts["out_dir"])
        COMMANDS[opts["command"]](opts, v, art)
    except UnkError as exc:
        if art is not None:
            art.cleanup()
        print(json.dumps(exc.to_dict(), sort_keys=True), file=sys.stderr)
        return 2 if isinstance(exc, (ConfigError, SchemaError)) else 1
    except Exception as exc:  # noqa: BLE001 - any failure must still leave no partial artifacts
        if art is not None:
            art.cleanup()
        print(json.dumps({"error": "internal_error", "message": f"{type(exc).__name__}: {exc}"}),
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
