"""``pbda`` command line.

Every command takes an optional ``--config`` JSON file; command-line flags
override its values and the merged configuration is echoed in the JSON
output.  Exit codes: 0 success, 1 usage or configuration error, 2 numerical
failure, 3 verification failure.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import SPEC_VERSION
from .benchmark import BenchmarkConfig, run_moons_benchmark
from .bounds import BOUNDS, evaluate
from .data import MoonsConfig, gen_moons, read_svmlight, write_svmlight
from .gibbs import empirical_terms
from .models import KernelSpec, load_model, save_model
from .optimize import NumericalError, Settings, make_trainer, train_multi_pbda
from .validation import GridSpec, grid_search, make_fold_plan, reverse_cv_risk
from .verify import run_suite

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_USAGE)


# -- configuration ---------------------------------------------------------------

TRAIN_KEYS = {
    "algo": None, "source": None, "target": None, "sources": None, "v": None,
    "A": 0.0, "C": 1.0, "kernel": "primal", "gamma": None, "out": None,
    "tol": 1e-6, "max_iter": 2000, "convex": True, "unequal_sizes": False,
}

DEFAULTS = {
    "gen-moons": {"n_per_class": 150, "rotation_degrees": 30.0, "noise_sd": 0.05, "seed": 0,
                  "test_per_class": 500, "out_dir": "."},
    "train": TRAIN_KEYS,
    "predict": {"model": None, "data": None, "out": None},
    "bound": {"name": None, "ingredients": {}, "model": None, "source": None, "target": None},
    "reverse-cv": {**{k: TRAIN_KEYS[k] for k in ("algo", "source", "target", "A", "C", "kernel", "gamma",
                                                 "tol", "max_iter", "convex", "unequal_sizes")},
                   "k": 5, "seed": 0},
    "grid-search": {**{k: TRAIN_KEYS[k] for k in ("algo", "source", "target", "tol", "max_iter", "convex",
                                                  "unequal_sizes")},
                    "grid": None, "criterion": "rcv", "k": 5, "seed": 0, "out": None},
    "verify": {"suite": None, "seed": 0, "trials": None},
    "moons-benchmark": {**BenchmarkConfig().to_dict(), "out": None},
}

CRITERION_ALIASES = {"cv": "cv", "rcv": "rcv", "mean": "mean_cv_rcv", "mean_cv_rcv": "mean_cv_rcv"}


def _load_config(path):
    if path is None:
        return {}
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(d, dict):
        raise UsageError("config must be a JSON object")
    return d


def effective_config(command, args):
    """Defaults, then the config file, then explicit flags; unknown keys are rejected."""
    defaults = DEFAULTS[command]
    file_cfg = _load_config(getattr(args, "config", None))
    unknown = set(file_cfg) - set(defaults)
    if unknown:
        raise UsageError(f"unknown config keys for {command}: {sorted(unknown)}")
    cfg = {**defaults, **file_cfg}
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _require(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) in (None, "")]
    if missing:
        raise UsageError(f"missing required setting(s): {', '.join(missing)}")


def _kernel(cfg):
    kind = cfg.get("kernel") or "primal"
    if kind == "primal":
        if cfg.get("gamma") is not None:
            raise UsageError("gamma needs --kernel rbf")
        return None
    try:
        return KernelSpec(kind, cfg.get("gamma"))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _settings(cfg):
    return Settings(float(cfg["tol"]), int(cfg["max_iter"]), bool(cfg["convex"]), bool(cfg["unequal_sizes"]))


def _emit(payload, cfg, command):
    out = {"spec_version": SPEC_VERSION, "command": command, "config": cfg, **payload}
    print(json.dumps(out, indent=2, default=_json_default))
    return out


def _json_default(obj):
    if isinstance(obj, KernelSpec):
        return obj.to_dict()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _read(path):
    try:
        return read_svmlight(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def _target(cfg, dim):
    if cfg.get("target") in (None, ""):
        return None
    T = _read(cfg["target"])
    if T.dim < dim:  # sparse files may omit trailing zero features
        T = read_svmlight(cfg["target"], n_features=dim)
    return T.unlabeled()


def _source_and_target(cfg):
    S = _read(cfg["source"])
    T = _target(cfg, S.dim)
    if T is not None and T.dim > S.dim:
        S = read_svmlight(cfg["source"], n_features=T.dim)
    return S, T


# -- commands ------------------------------------------------------------------


def cmd_gen_moons(cfg):
    base = dict(noise_sd=float(cfg["noise_sd"]))
    s_seed, t_seed, e_seed = (int(c.generate_state(1)[0]) for c in np.random.SeedSequence(int(cfg["seed"])).spawn(3))
    n, angle = int(cfg["n_per_class"]), float(cfg["rotation_degrees"])
    parts = {
        "source": gen_moons(MoonsConfig(n, 0.0, seed=s_seed, **base)),
        "target": gen_moons(MoonsConfig(n, angle, seed=t_seed, **base)),
        "test": gen_moons(MoonsConfig(int(cfg["test_per_class"]), angle, seed=e_seed, **base)),
    }
    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, sample in parts.items():
        path = out_dir / f"{name}.svm"
        write_svmlight(sample, path)
        files[name] = {"path": str(path), "count": len(sample)}
    _emit({"files": files, "seeds": {"source": s_seed, "target": t_seed, "test": e_seed}, "angle": angle},
          cfg, "gen-moons")
    return EXIT_OK


def cmd_train(cfg):
    _require(cfg, "algo", "out")
    algo = cfg["algo"]
    settings = _settings(cfg)
    kernel = _kernel(cfg)
    if algo == "pbda-multi":
        _require(cfg, "sources", "target")
        if kernel is not None:
            raise UsageError("pbda-multi is primal only")
        paths = cfg["sources"] if isinstance(cfg["sources"], list) else str(cfg["sources"]).split(",")
        sources = [_read(p) for p in paths]
        dim = max(S.dim for S in sources)
        sources = [read_svmlight(p, n_features=dim) for p in paths]
        T = _target(cfg, dim)
        v = cfg["v"] if cfg["v"] is not None else [1.0 / len(sources)] * len(sources)
        if isinstance(v, str):
            v = [float(x) for x in v.split(",")]
        model = train_multi_pbda(sources, v, T, float(cfg["A"]), float(cfg["C"]), settings)
        S = sources[0]
    elif algo in ("pbgd3", "pbda"):
        _require(cfg, "source")
        S, T = _source_and_target(cfg)
        if algo == "pbda" and T is None:
            raise UsageError("pbda needs --target")
        model = make_trainer(algo, float(cfg["A"]), float(cfg["C"]), kernel, settings)(S, T)
    else:
        raise UsageError(f"unknown algorithm {algo!r}")
    save_model(model, cfg["out"])
    summary = dict(model.info)
    summary.update(empirical_terms(model, S, T))
    _emit({"model": str(cfg["out"]), "summary": summary}, cfg, "train")
    return EXIT_OK


def cmd_predict(cfg):
    _require(cfg, "model", "data")
    model = load_model(cfg["model"])
    data = _read(cfg["data"])
    dim = model.dim if hasattr(model, "dim") else model.anchors.shape[1]
    if data.dim < dim:
        data = read_svmlight(cfg["data"], n_features=dim)
    pred = model.predict(data.X)
    lines = "".join("+1\n" if p > 0 else "-1\n" for p in pred)
    if cfg.get("out"):
        Path(cfg["out"]).write_text(lines)
    else:
        sys.stdout.write(lines)
    error = float(np.mean(pred != data.y))
    report = {"spec_version": SPEC_VERSION, "command": "predict", "config": cfg, "n": len(data), "error": error}
    stream = sys.stdout if cfg.get("out") else sys.stderr
    stream.write(json.dumps(report, indent=2) + "\n")
    return EXIT_OK


def cmd_bound(cfg):
    _require(cfg, "name")
    name = cfg["name"]
    if name not in BOUNDS:
        raise UsageError(f"unknown bound {name!r}; choose from {sorted(BOUNDS)}")
    ingredients = dict(cfg.get("ingredients") or {})
    if cfg.get("model"):
        _require(cfg, "source")
        model = load_model(cfg["model"])
        S, T = _source_and_target(cfg)
        terms = empirical_terms(model, S, T)
        derived = {"kl_div": terms["kl"], "m": terms["m"]}
        if name.startswith("dis_") or name.startswith("multi_dis"):
            if T is None:
                raise UsageError(f"{name} needs --target")
            derived["emp_dis"] = terms["empirical_dis"]
        else:
            derived["emp_risk"] = terms["empirical_risk"]
            if name.startswith("da_"):
                if T is None:
                    raise UsageError(f"{name} needs --target")
                derived["emp_dis"] = terms["empirical_dis"]
        if name in ("dis_unequal",):
            derived["m_prime"] = terms["m_prime"]
        if name == "da_mcallester":
            derived.pop("m")
            derived.update(m1=terms["m"], m2=min(terms["m"], terms["m_prime"]), m_prime=terms["m_prime"])
        ingredients = {**derived, **ingredients}
    try:
        report = evaluate(name, **ingredients)
    except TypeError as exc:
        raise UsageError(f"bad ingredients for {name}: {exc}") from None
    _emit({"report": report.to_dict()}, cfg, "bound")
    return EXIT_OK


def cmd_reverse_cv(cfg):
    _require(cfg, "algo", "source", "target")
    S, T = _source_and_target(cfg)
    trainer = make_trainer(cfg["algo"], float(cfg["A"]), float(cfg["C"]), _kernel(cfg), _settings(cfg))
    plan = make_fold_plan(len(S), int(cfg["k"]), int(cfg["seed"]), m_target=len(T))
    risk = reverse_cv_risk(trainer, S, T, plan)
    _emit({"reverse_cv_risk": risk}, cfg, "reverse-cv")
    return EXIT_OK


def cmd_grid_search(cfg):
    _require(cfg, "algo", "source")
    criterion = CRITERION_ALIASES.get(cfg["criterion"])
    if criterion is None:
        raise UsageError(f"criterion must be one of {sorted(CRITERION_ALIASES)}")
    S, T = _source_and_target(cfg)
    if T is None and criterion != "cv":
        raise UsageError(f"criterion {criterion} needs --target")
    grid_cfg = cfg["grid"]
    if isinstance(grid_cfg, str):
        grid_cfg = _load_config(grid_cfg)
    try:
        grid = GridSpec() if grid_cfg is None else GridSpec.from_dict(grid_cfg)
    except (KeyError, ValueError) as exc:
        raise UsageError(f"bad grid: {exc}") from None
    settings = _settings(cfg)
    plan = make_fold_plan(len(S), int(cfg["k"]), int(cfg["seed"]), m_target=None if T is None else len(T))
    algo = cfg["algo"]
    result = grid_search(lambda A, C, kernel: make_trainer(algo, A, C, kernel, settings), S, T, grid, plan, criterion)
    tsv = result.table.to_tsv()
    if cfg.get("out"):
        Path(cfg["out"]).write_text(tsv)
    best = dict(result.best)
    best["kernel"] = None if best["kernel"] is None else best["kernel"].to_dict()
    failed = sum(r["failed"] for r in result.table.rows)
    _emit({"best": best, "cells": len(result.table), "failed_cells": failed,
           "score_table": str(cfg["out"]) if cfg.get("out") else tsv}, cfg, "grid-search")
    return EXIT_OK


def cmd_verify(cfg):
    _require(cfg, "suite")
    try:
        report = run_suite(cfg["suite"], int(cfg["seed"]), None if cfg["trials"] is None else int(cfg["trials"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit({"report": report.to_dict()}, cfg, "verify")
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_moons_benchmark(cfg):
    bench = {k: v for k, v in cfg.items() if k != "out"}
    try:
        config = BenchmarkConfig.from_dict(bench)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None

    def progress(run):
        sys.stderr.write(
            f"angle {run['angle']:g} repeat {run['repeat']}: pbgd3 {run['pbgd3']['test_error']:.3f} "
            f"pbda {run['pbda']['test_error']:.3f} ({run['seconds']:.0f}s)\n"
        )

    report = run_moons_benchmark(config, progress)
    if cfg.get("out"):
        Path(cfg["out"]).write_text(json.dumps({"spec_version": SPEC_VERSION, **report}, indent=2))
    _emit({"table": report["table"]}, cfg, "moons-benchmark")
    return EXIT_OK


COMMANDS = {
    "gen-moons": cmd_gen_moons,
    "train": cmd_train,
    "predict": cmd_predict,
    "bound": cmd_bound,
    "reverse-cv": cmd_reverse_cv,
    "grid-search": cmd_grid_search,
    "verify": cmd_verify,
    "moons-benchmark": cmd_moons_benchmark,
}


# -- argument parsing --------------------------------------------------------------


def _ingredient(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        raise argparse.ArgumentTypeError(f"value of {key} must be a number or JSON") from None


def _floats(text):
    return [float(x) for x in text.split(",")]


def build_parser():
    p = _Parser(prog="pbda", description="PAC-Bayesian domain adaptation toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, help_text):
        c = sub.add_parser(name, help=help_text)
        c.add_argument("--config", help="JSON file with settings; flags override it")
        return c

    def training_flags(c, hyper=True):
        c.add_argument("--algo", choices=["pbgd3", "pbda", "pbda-multi"])
        c.add_argument("--source")
        c.add_argument("--target")
        if hyper:
            c.add_argument("--A", type=float)
            c.add_argument("--C", type=float)
            c.add_argument("--kernel", choices=["primal", "linear", "rbf"])
            c.add_argument("--gamma", type=float)
        c.add_argument("--tol", type=float)
        c.add_argument("--max-iter", dest="max_iter", type=int)
        c.add_argument("--nonconvex", dest="convex", action="store_const", const=False,
                       help="use the non-convex probit loss for the source risk")
        c.add_argument("--unequal-sizes", dest="unequal_sizes", action="store_const", const=True,
                       help="allow |S| != |T| by averaging the disagreement sums")

    c = command("gen-moons", "write source/target/test moons samples in svmlight format")
    c.add_argument("--n-per-class", dest="n_per_class", type=int)
    c.add_argument("--angle", dest="rotation_degrees", type=float)
    c.add_argument("--noise-sd", dest="noise_sd", type=float)
    c.add_argument("--seed", type=int)
    c.add_argument("--test-per-class", dest="test_per_class", type=int)
    c.add_argument("--out-dir", dest="out_dir")

    c = command("train", "train a model and write it as JSON")
    training_flags(c)
    c.add_argument("--sources", help="comma-separated source files (pbda-multi)")
    c.add_argument("--v", help="comma-separated source weights (pbda-multi)")
    c.add_argument("--out")

    c = command("predict", "predict labels for an svmlight file")
    c.add_argument("--model")
    c.add_argument("--data")
    c.add_argument("--out")

    c = command("bound", "evaluate a PAC-Bayes bound")
    c.add_argument("--report-config", dest="config", help="JSON with name and ingredients (alias of --config)")
    c.add_argument("--name", choices=sorted(BOUNDS))
    c.add_argument("--set", dest="ingredient_pairs", action="append", type=_ingredient, metavar="NAME=VALUE",
                   help="ingredient value, e.g. --set delta=0.05 (repeatable)")
    c.add_argument("--model", help="model JSON to derive empirical ingredients from")
    c.add_argument("--source")
    c.add_argument("--target")

    c = command("reverse-cv", "reverse cross-validation risk for one hyperparameter tuple")
    training_flags(c)
    c.add_argument("--k", type=int)
    c.add_argument("--seed", type=int)

    c = command("grid-search", "score a hyperparameter grid")
    training_flags(c, hyper=False)
    c.add_argument("--grid-config", dest="grid", help="JSON file with A_values, C_values, kernel_values")
    c.add_argument("--criterion", choices=sorted(CRITERION_ALIASES))
    c.add_argument("--k", type=int)
    c.add_argument("--seed", type=int)
    c.add_argument("--out", help="write the TSV score table here")

    c = command("verify", "run a self-verification suite")
    c.add_argument("--suite", choices=["finite-vote", "mc-gaussian", "gradients", "bounds-consistency"])
    c.add_argument("--seed", type=int)
    c.add_argument("--trials", type=int)

    c = command("moons-benchmark", "rotated-moons benchmark, PBGD3 (CV) against PBDA (reverse CV)")
    c.add_argument("--angles", type=_floats)
    c.add_argument("--repeats", type=int)
    c.add_argument("--gammas", type=_floats)
    c.add_argument("--grid-size", dest="grid_size", type=int)
    c.add_argument("--seed", type=int)
    c.add_argument("--out", help="write the full per-run report here")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = effective_config(args.command, args)
        if args.command == "bound" and args.ingredient_pairs:
            cfg["ingredients"] = {**(cfg.get("ingredients") or {}), **dict(args.ingredient_pairs)}
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        sys.stderr.write(f"pbda {args.command}: {exc}\n")
        return EXIT_USAGE
    except NumericalError as exc:
        sys.stderr.write(f"pbda {args.command}: numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"pbda {args.command}: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
