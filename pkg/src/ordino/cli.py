"""Command-line entry point: ``ordino {synth,profile,train,compare,make-data}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ordino import __version__
from ordino.analysis import bonferroni_compare, profile, summary_stats, tally
from ordino.data import (SplitSpec, Standardizer, load_dataset, make_low_ud_dataset,
                         sample_uniform_simplex, split, write_csv)
from ordino.errors import ConfigurationError, OrdinoError, ParameterError
from ordino.links import RHO_KINDS, TAU_KINDS, LikelihoodSpec
from ordino.model import load_checkpoint, save_checkpoint
from ordino.training import LAMBDA_GRID, METRICS, R_GRID, TrainConfig, TrialReport, fit

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("ordino")

EXIT_OK, EXIT_ARGS, EXIT_RUNTIME = 0, 2, 3
MODELS = {"sl": "SL", "vsl": "VSL", "mix": "MAUL", "cl": "CL", "pocl": "POCL", "povsl": "POVSL"}
MANIFEST = "manifest.json"

# built-in defaults for options that may also come from a config file
TRAIN_DEFAULTS = {
    "model": "sl",
    "rho": "exp",
    "tau": "square",
    "r_grid": list(R_GRID),
    "lambda_grid": None,
    "delta": 0.05,
    "n_tra": 50,
    "n_val": 100,
    "trials": 10,
    "seed": 0,
    "epochs": 300,
    "batch_size": 16,
    "metric": "nll",
    "joint": False,
}


class UsageError(Exception):
    """Bad command-line arguments (exit code 2)."""


# --- output helpers ---------------------------------------------------------

def _dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_manifest(out: Path, command: str, config_path, resolved: dict, seeds, outputs) -> None:
    """Run manifest; the only file carrying a timestamp."""
    doc = {
        "command": command,
        "config_path": None if config_path is None else str(config_path),
        "resolved": resolved,
        "seeds": list(seeds),
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "outputs": sorted(outputs),
    }
    _write_atomic(out / MANIFEST, _dumps(doc))


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _threads(arg) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("ORDINO_THREADS")
    if env is None:
        return 1
    try:
        n = int(env)
    except ValueError:
        raise UsageError(f"ORDINO_THREADS must be an integer, got {env!r}") from None
    if n < 1:
        raise UsageError("ORDINO_THREADS must be positive")
    return n


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _lambda_grid(text: str):
    low = text.strip().lower()
    if low == "none":
        return "none"
    if low == "default":
        return list(LAMBDA_GRID)
    return _float_list(text)


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


# --- synth ------------------------------------------------------------------

def _write_profile(out: Path, prof, extra: dict) -> None:
    doc = {"manifest": MANIFEST, **extra, **prof.to_dict()}
    _write_atomic(out / "profile.json", _dumps(doc))
    _write_atomic(out / "histogram.tsv", prof.histogram_tsv())


def cmd_synth(args) -> int:
    if args.k < 3:
        raise UsageError("--k must be at least 3")
    out = Path(args.out)
    _write_manifest(out, "synth", None, {"k": args.k, "n": args.n, "seed": args.seed},
                    [args.seed], ["profile.json", "histogram.tsv"])
    P = sample_uniform_simplex(args.k, args.n, args.seed)
    prof = profile(P)
    _write_profile(out, prof, {"source": "uniform_simplex", "k": args.k, "seed": args.seed})
    print(f"K={args.k} n={args.n} UR={prof.ur:.4f} MHD={prof.mhd:.4f}")
    return EXIT_OK


# --- profile ----------------------------------------------------------------

def cmd_profile(args) -> int:
    dataset = load_dataset(args.dataset)
    model, doc = load_checkpoint(args.checkpoint)
    if model.spec.K != dataset.K:
        raise ConfigurationError(
            f"checkpoint was trained with K={model.spec.K} but the dataset has K={dataset.K}")
    if model.net.sizes[0] != dataset.d:
        raise ConfigurationError(
            f"checkpoint expects {model.net.sizes[0]} features, dataset has {dataset.d}")
    idx = np.arange(dataset.n)
    if args.points == "test":
        if "test_idx" not in doc:
            raise ConfigurationError("checkpoint has no stored test indices; use --points all")
        idx = np.asarray(doc["test_idx"], dtype=int)
        if idx.size and idx.max() >= dataset.n:
            raise ConfigurationError("checkpoint test indices exceed the dataset size")
    X = dataset.features[idx]
    if "standardizer" in doc:
        X = Standardizer.from_dict(doc["standardizer"]).transform(X)
    out = Path(args.out)
    _write_manifest(out, "profile", None,
                    {"dataset": str(args.dataset), "checkpoint": str(args.checkpoint),
                     "points": args.points}, [], ["profile.json", "histogram.tsv"])
    P = model.predict_proba(X)
    prof = profile(P / P.sum(axis=1, keepdims=True))
    _write_profile(out, prof, {"source": "checkpoint", "dataset": dataset.name,
                               "model": model.spec.to_dict(), "points": args.points})
    print(f"{dataset.name}: n={prof.n} UR={prof.ur:.4f} MHD={prof.mhd:.4f}")
    return EXIT_OK


# --- train ------------------------------------------------------------------

def _load_config_file(path) -> dict:
    text = Path(path).read_text()
    try:
        doc = tomllib.loads(text) if str(path).endswith(".toml") else json.loads(text)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot parse config {path}: {exc}") from None
    flat = {k: v for k, v in doc.items() if k != "train"}
    flat.update(doc.get("train", {}))
    unknown = set(flat) - set(TRAIN_DEFAULTS) - {"dataset"}
    if unknown:
        raise UsageError(f"unknown config keys in {path}: {sorted(unknown)}")
    return flat


def resolve_train_options(args) -> dict:
    """Flag > config file > built-in default."""
    from_file = _load_config_file(args.config) if args.config else {}
    opts = {}
    for key, default in TRAIN_DEFAULTS.items():
        flag = getattr(args, key, None)
        opts[key] = flag if flag is not None else from_file.get(key, default)
    if opts["lambda_grid"] == "none":
        opts["lambda_grid"] = None
    opts["dataset"] = args.dataset or from_file.get("dataset")
    if opts["dataset"] is None:
        raise UsageError("--dataset is required (flag or config file)")
    if opts["model"] not in MODELS:
        raise UsageError(f"unknown model {opts['model']!r}; choose from {sorted(MODELS)}")
    if opts["rho"] not in RHO_KINDS or opts["tau"] not in TAU_KINDS:
        raise UsageError("invalid --rho/--tau")
    return opts


def _run_trial(job):
    dataset, spec, cfg, trial, split_spec, model_name = job
    splits = split(dataset.n, split_spec)
    result = fit(dataset, splits, spec, cfg, trial=trial, model_name=model_name)
    return result, splits


def cmd_train(args) -> int:
    opts = resolve_train_options(args)
    dataset = load_dataset(opts["dataset"])
    try:
        spec = LikelihoodSpec(MODELS[opts["model"]], dataset.K, rho=opts["rho"], tau=opts["tau"])
    except (ParameterError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    seeds = [opts["seed"] + t for t in range(opts["trials"])]
    configs = [
        TrainConfig(epochs=opts["epochs"], batch_size=opts["batch_size"], metric=opts["metric"],
                    seed=s, r_grid=tuple(opts["r_grid"]),
                    lambda_grid=None if opts["lambda_grid"] is None else tuple(opts["lambda_grid"]),
                    delta=opts["delta"], joint=opts["joint"])
        for s in seeds
    ]
    # split sizes are checked before anything is written
    for s in seeds[:1]:
        split(dataset.n, SplitSpec(opts["n_tra"], opts["n_val"], s))

    out = Path(args.out)
    names = [f"trial_{t:03d}.json" for t in range(len(seeds))]
    outputs = ([f"trials/{n}" for n in names] + [f"checkpoints/{n}" for n in names]
               + ["summary.json", "summary.csv"])
    resolved = {**opts, "dataset": str(opts["dataset"]), "link": spec.link}
    _write_manifest(out, "train", args.config, resolved, seeds, outputs)

    jobs = [(dataset, spec, cfg, t, SplitSpec(opts["n_tra"], opts["n_val"], s), opts["model"])
            for t, (s, cfg) in enumerate(zip(seeds, configs))]
    threads = _threads(args.threads)
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_trial, jobs))
    else:
        results = [_run_trial(job) for job in jobs]

    reports = []
    for name, (res, (tr, va, te)) in zip(names, results):
        reports.append(res.report)
        _write_atomic(out / "trials" / name, _dumps({"manifest": MANIFEST, **res.report.to_dict()}))
        ckpt = out / "checkpoints" / name
        ckpt.parent.mkdir(parents=True, exist_ok=True)
        save_checkpoint(res.model, ckpt, manifest=MANIFEST, standardizer=res.standardizer.to_dict(),
                        train_idx=tr.tolist(), val_idx=va.tolist(), test_idx=te.tolist(),
                        dataset=dataset.name)
        log.info("trial %d: test nll=%.4f mze=%.4f", res.report.trial, res.report.test.nll,
                 res.report.test.mze)

    summary = {key: summary_stats([r.test.get(key) for r in reports]) for key in METRICS}
    summary["test_mdh"] = summary_stats([r.test_mdh for r in reports])
    summary["test_ur"] = summary_stats([r.test_ur for r in reports])
    if spec.link == "MAUL":
        summary["selected_r"] = summary_stats([r.selected_r for r in reports])
    _write_atomic(out / "summary.json", _dumps({"manifest": MANIFEST, "dataset": dataset.name,
                                                "model": opts["model"], "metrics": summary}))
    rows = [[k, v["mean"], v["q25"], v["median"], v["q75"], v["n"]] for k, v in summary.items()]
    _write_atomic(out / "summary.csv", _csv_text(["metric", "mean", "q25", "median", "q75", "n"], rows))
    print(f"{dataset.name} {opts['model']}: median test NLL {summary['nll']['median']:.4f} "
          f"over {len(reports)} trials")
    return EXIT_OK


# --- compare ----------------------------------------------------------------

def _load_reports(run_dir: Path) -> dict:
    files = sorted((run_dir / "trials").glob("trial_*.json"))
    if not files:
        raise ConfigurationError(f"no trial reports under {run_dir / 'trials'}")
    reports = {}
    for f in files:
        rep = TrialReport.from_dict(json.loads(f.read_text()))
        reports[(rep.dataset, rep.trial)] = rep
    return reports


def cmd_compare(args) -> int:
    reps_a = {}
    reps_b = {}
    for d in args.a:
        reps_a.update(_load_reports(Path(d)))
    for d in args.b:
        reps_b.update(_load_reports(Path(d)))
    if set(reps_a) != set(reps_b):
        missing = sorted(set(reps_a) ^ set(reps_b))
        raise ConfigurationError(f"unpaired trials (dataset, trial): {missing[:5]}")
    datasets = sorted({k[0] for k in reps_a})
    metrics = args.metrics.split(",")
    for m in metrics:
        if m not in METRICS:
            raise UsageError(f"unknown metric {m!r}")
    m_count = args.m if args.m is not None else len(datasets)

    out = Path(args.out)
    _write_manifest(out, "compare", None,
                    {"a": args.a, "b": args.b, "alpha": args.alpha, "m": m_count, "metrics": metrics},
                    [], ["comparisons.csv", "tally.csv"])
    rows, verdicts = [], {m: [] for m in metrics}
    for ds in datasets:
        keys = sorted(k for k in reps_a if k[0] == ds)
        for metric in metrics:
            ea = [reps_a[k].test.get(metric) for k in keys]
            eb = [reps_b[k].test.get(metric) for k in keys]
            v = bonferroni_compare(ea, eb, m=m_count, alpha=args.alpha)
            verdicts[metric].append(v)
            rows.append([ds, metric, len(keys), v.mean_a, v.mean_b, v.pvalue,
                         int(v.significant), v.winner or ""])
    _write_atomic(out / "comparisons.csv",
                  _csv_text(["dataset", "metric", "n_trials", "mean_a", "mean_b", "pvalue",
                             "significant", "winner"], rows))
    tally_rows = [[metric, *tally(verdicts[metric])] for metric in metrics]
    _write_atomic(out / "tally.csv", _csv_text(["metric", "a_wins", "b_wins"], tally_rows))
    for metric, a, b in tally_rows:
        print(f"{metric}: {a} A wins, {b} B wins")
    return EXIT_OK


# --- make-data --------------------------------------------------------------

def cmd_make_data(args) -> int:
    if args.k < 3:
        raise UsageError("--k must be at least 3")
    ds, _ = make_low_ud_dataset(args.n, args.d, args.k, seed=args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(ds, out)
    print(f"wrote {ds.n} rows (d={ds.d}, K={ds.K}) to {out}")
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ordino", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="profile uniform samples on the simplex")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--n", type=_positive_int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("profile", help="profile the CPD estimates of a trained model")
    s.add_argument("--dataset", required=True)
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--points", choices=("test", "all"), default="test")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_profile)

    s = sub.add_parser("train", help="train and evaluate a model over repeated trials")
    s.add_argument("--config")
    s.add_argument("--dataset")
    s.add_argument("--model", choices=sorted(MODELS))
    s.add_argument("--rho", choices=RHO_KINDS)
    s.add_argument("--tau", choices=TAU_KINDS)
    s.add_argument("--r-grid", dest="r_grid", type=_float_list)
    s.add_argument("--lambda-grid", dest="lambda_grid", type=_lambda_grid,
                   help="comma-separated values, 'default' or 'none'")
    s.add_argument("--delta", type=float)
    s.add_argument("--n-tra", dest="n_tra", type=_positive_int)
    s.add_argument("--n-val", dest="n_val", type=_positive_int)
    s.add_argument("--trials", type=_positive_int)
    s.add_argument("--seed", type=int)
    s.add_argument("--epochs", type=_positive_int)
    s.add_argument("--batch-size", dest="batch_size", type=_positive_int)
    s.add_argument("--metric", choices=METRICS)
    s.add_argument("--joint", action="store_const", const=True,
                   help="sweep (r, lambda) jointly instead of r first")
    s.add_argument("--threads", type=_positive_int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("compare", help="Mann-Whitney/Bonferroni comparison of two run sets")
    s.add_argument("--a", nargs="+", required=True, help="run directories of method A")
    s.add_argument("--b", nargs="+", required=True, help="run directories of method B")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--m", type=_positive_int, help="Bonferroni count (default: number of datasets)")
    s.add_argument("--metrics", default=",".join(METRICS))
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("make-data", help="write a synthetic low-deviation ordinal dataset")
    s.add_argument("--n", type=_positive_int, default=1000)
    s.add_argument("--d", type=_positive_int, default=8)
    s.add_argument("--k", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_make_data)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigurationError, ParameterError, FileNotFoundError) as exc:
        print(f"ordino {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except (OrdinoError, ValueError, RuntimeError, OSError) as exc:
        print(f"ordino {args.command}: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
