"""Experiment runner.

Verbs
-----
run       repeated fits of one configuration, per-run and aggregate reports
sweep     the same over a (theta, eta) grid, long-format CSV for heatmaps
generate  write a 3DBall dataset (views, labels, manifest) to a directory
evaluate  score an externally produced partition against labels

A run is described by a JSON config; any key can be overridden by flags::

    {
      "dataset": {"generator": "3dball", "seed": 0},      # or {"manifest": "data/manifest.json"}
      "standardize": false,
      "method": "mvlrecm",                                 # or "ecm"
      "n_clusters": 3,                                     # defaults to the number of label classes
      "params": {"alpha": 2, "delta": 20, "theta": 10, "eta": 10},
      "repeats": 5,
      "base_seed": 0,
      "output": "results",
      "export": {"masses": false, "decisions": false},
      "jobs": 1
    }
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from itertools import product
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import MvlrecmParams, ecm_average, fit
from .datagen import BallSpec, DatasetError, describe, generate_3dball, load_manifest, standardize, write_dataset
from .metrics import METRIC_NAMES, evaluate
from .powerset import format_subset, parse_subset

log = logging.getLogger("mvlrecm")

DEFAULT_THETA_GRID = (1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4)
DEFAULT_ETA_GRID = (1e-1, 1.0, 1e1, 1e2, 1e3, 1e4, 1e5)

DEFAULT_CONFIG = {
    "dataset": {"generator": "3dball", "seed": 0},
    "standardize": False,
    "method": "mvlrecm",
    "n_clusters": None,
    "params": {k: v for k, v in MvlrecmParams().to_dict().items() if k != "seed"},
    "repeats": 1,
    "base_seed": 0,
    "output": "results",
    "export": {"masses": False, "decisions": False},
    "jobs": 1,
}

METHODS = ("mvlrecm", "ecm")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        path = Path(path)
        try:
            user = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"{path}: config file not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        if "manifest" in user.get("dataset", {}):
            # relative manifest paths are relative to the config file
            m = Path(user["dataset"]["manifest"])
            if not m.is_absolute():
                user["dataset"]["manifest"] = str(path.parent / m)
            cfg["dataset"] = {}
        cfg = _merge(cfg, user)
    if overrides:
        if "manifest" in overrides.get("dataset", {}):
            cfg["dataset"] = {}
        cfg = _merge(cfg, overrides)
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    if cfg["method"] not in METHODS:
        raise ConfigError(f"unknown method {cfg['method']!r}; choose from {', '.join(METHODS)}")
    if int(cfg["repeats"]) < 1:
        raise ConfigError("repeats must be >= 1")
    if int(cfg["jobs"]) < 1:
        raise ConfigError("jobs must be >= 1")
    ds = cfg["dataset"]
    if "manifest" not in ds and ds.get("generator") != "3dball":
        raise ConfigError("dataset needs either 'manifest' or 'generator': '3dball'")
    unknown = set(cfg["params"]) - set(MvlrecmParams().to_dict())
    if unknown:
        raise ConfigError(f"unknown parameters: {', '.join(sorted(unknown))}")
    try:
        params_from(cfg, 0)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid parameters: {exc}") from None


def params_from(cfg: dict, seed: int) -> MvlrecmParams:
    p = {k: v for k, v in cfg["params"].items() if k != "seed"}
    return MvlrecmParams(seed=seed, **p)


def load_dataset(cfg: dict):
    ds = cfg["dataset"]
    if "manifest" in ds:
        data = load_manifest(ds["manifest"])
    else:
        spec_kw = {k: v for k, v in ds.items() if k not in ("generator",)}
        data = generate_3dball(BallSpec.from_dict(spec_kw))
    if cfg.get("standardize"):
        data = standardize(data)
    return data


def _n_clusters(cfg, data) -> int:
    if cfg["n_clusters"] is not None:
        return int(cfg["n_clusters"])
    if data.labels is None:
        raise ConfigError("n_clusters is required when the dataset has no labels")
    return int(np.unique(data.labels).size)


# ---------------------------------------------------------------------------
# one fit


def _fit_once(cfg: dict, data, n_clusters: int, seed: int):
    params = params_from(cfg, seed)
    if cfg["method"] == "ecm":
        return ecm_average(data, n_clusters, params)
    return fit(data, n_clusters, params)[1]


def _run_task(task):
    cfg, data, n_clusters, seed = task
    part = _fit_once(cfg, data, n_clusters, seed)
    row = {"seed": seed, "iterations": part.iterations, "converged": part.converged}
    if data.labels is not None:
        row.update(evaluate(data.labels, part.decision, n_clusters).to_dict())
    return row, part


def _map(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def aggregate(rows: list) -> dict:
    """Mean and population standard deviation of each metric over runs."""
    out = {}
    for name in METRIC_NAMES:
        vals = np.array([r[name] for r in rows if name in r], dtype=float)
        if vals.size:
            out[name] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return out


# ---------------------------------------------------------------------------
# writers


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows_csv(path: Path, rows: list, columns: list) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    path.write_text(buf.getvalue())


def write_masses(path: Path, unified_mass: np.ndarray) -> None:
    F = unified_mass.shape[1]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([format_subset(j) for j in range(F)])
    for row in unified_mass:
        w.writerow([repr(float(x)) for x in row])
    path.write_text(buf.getvalue())


def write_decisions(path: Path, decision) -> None:
    path.write_text("".join(format_subset(int(j)) + "\n" for j in decision))


def read_decisions(path: Path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"{path}: file not found")
    out = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        s = line.strip().strip('"')
        if not s:
            continue
        try:
            out.append(parse_subset(s))
        except ValueError:
            raise DatasetError(f"{path}:{lineno}: cannot parse subset {line!r}") from None
    return np.array(out, dtype=np.int64)


def read_labels(path: Path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"{path}: file not found")
    out = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        s = line.strip()
        if not s:
            continue
        try:
            out.append(int(float(s)))
        except ValueError:
            raise DatasetError(f"{path}:{lineno}: non-numeric label {s!r}") from None
    return np.array(out, dtype=np.int64)


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


# ---------------------------------------------------------------------------
# verbs


RUN_COLUMNS = ["run", "seed", "iterations", "converged", *METRIC_NAMES]


def run(cfg: dict) -> dict:
    """Execute ``repeats`` fits and write the reports; returns the aggregate report."""
    data = load_dataset(cfg)
    C = _n_clusters(cfg, data)
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    seeds = [int(cfg["base_seed"]) + r for r in range(int(cfg["repeats"]))]
    results = _map(_run_task, [(cfg, data, C, s) for s in seeds], int(cfg["jobs"]))

    rows = []
    for r, (row, part) in enumerate(results):
        rows.append({"run": r, **row})
        if cfg["export"].get("masses"):
            write_masses(out / f"masses_run{r:03d}.csv", part.unified_mass)
        if cfg["export"].get("decisions"):
            write_decisions(out / f"decisions_run{r:03d}.csv", part.decision)
    write_rows_csv(out / "runs.csv", rows, RUN_COLUMNS)
    report = {
        "version": __version__,
        "config": cfg,
        "dataset": describe(data),
        "n_clusters": C,
        "runs": len(rows),
        "aggregate": aggregate(rows),
    }
    _dump_json(out / "report.json", report)
    return report


def sweep(cfg: dict, theta_grid=DEFAULT_THETA_GRID, eta_grid=DEFAULT_ETA_GRID) -> list:
    """Repeat :func:`run`'s fits over every (theta, eta) pair.

    Writes ``sweep.csv`` with columns theta, eta, metric, mean, std and a
    ``sweep_report.json`` holding the resolved config and grids.
    """
    theta_grid, eta_grid = list(theta_grid), list(eta_grid)
    if not theta_grid or not eta_grid:
        raise ConfigError("sweep grids must be non-empty")
    data = load_dataset(cfg)
    C = _n_clusters(cfg, data)
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    seeds = [int(cfg["base_seed"]) + r for r in range(int(cfg["repeats"]))]
    cells = list(product(theta_grid, eta_grid))
    tasks = []
    for theta, eta in cells:
        cell_cfg = _merge(cfg, {"params": {"theta": float(theta), "eta": float(eta)}})
        tasks.extend((cell_cfg, data, C, s) for s in seeds)
    results = _map(_run_task, tasks, int(cfg["jobs"]))

    long_rows = []
    for c, (theta, eta) in enumerate(cells):
        rows = [row for row, _ in results[c * len(seeds) : (c + 1) * len(seeds)]]
        for metric, stats in aggregate(rows).items():
            long_rows.append({"theta": float(theta), "eta": float(eta), "metric": metric, **stats})
    write_rows_csv(out / "sweep.csv", long_rows, ["theta", "eta", "metric", "mean", "std"])
    _dump_json(
        out / "sweep_report.json",
        {
            "version": __version__,
            "config": cfg,
            "dataset": describe(data),
            "theta_grid": [float(t) for t in theta_grid],
            "eta_grid": [float(e) for e in eta_grid],
        },
    )
    return long_rows


# ---------------------------------------------------------------------------
# argument parsing


def _floats(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_run_args(p: argparse.ArgumentParser) -> None:
    d = MvlrecmParams()
    p.add_argument("--config", type=Path, help="JSON run configuration")
    p.add_argument("--manifest", type=Path, help="dataset manifest (overrides the config's dataset)")
    p.add_argument("--data-seed", type=int, help="seed of the 3DBall generator")
    p.add_argument("--method", choices=METHODS, help="clustering method (default mvlrecm)")
    p.add_argument("--n-clusters", type=int, help="number of singleton clusters (default: label classes)")
    p.add_argument("--standardize", action="store_true", default=None, help="z-score every view first")
    p.add_argument("--alpha", type=float, help=f"cardinality penalty exponent (default {d.alpha})")
    p.add_argument("--delta", type=float, help=f"noise-cluster distance (default {d.delta})")
    p.add_argument("--theta", type=float, help=f"low-rank coupling weight (default {d.theta})")
    p.add_argument("--eta", type=float, help=f"view-weight entropy coefficient (default {d.eta})")
    p.add_argument("--rho", type=float, help="nuclear-norm weight (default 2**(-C/2))")
    p.add_argument("--max-iter", type=int, help=f"iteration cap (default {d.max_iter})")
    p.add_argument("--tol", type=float, help=f"stop when |dJ| falls below this (default {d.tol})")
    p.add_argument("--repeats", type=int, help="independent fits, seeds base_seed..base_seed+repeats-1 (default 1)")
    p.add_argument("--seed", type=int, dest="base_seed", help="base seed (default 0)")
    p.add_argument("-o", "--output", help="output directory (default results)")
    p.add_argument("--export-masses", action="store_true", default=None, help="write unified masses per run")
    p.add_argument("--export-decisions", action="store_true", default=None, help="write decisions per run")
    p.add_argument("-j", "--jobs", type=int, help="worker processes (default 1)")


def _overrides(args) -> dict:
    o: dict = {}
    if args.manifest is not None:
        o["dataset"] = {"manifest": str(args.manifest)}
    elif args.data_seed is not None:
        o["dataset"] = {"seed": args.data_seed}
    for key in ("method", "n_clusters", "standardize", "repeats", "base_seed", "output", "jobs"):
        v = getattr(args, key)
        if v is not None:
            o[key] = v
    params = {k: getattr(args, k) for k in ("alpha", "delta", "theta", "eta", "rho", "max_iter", "tol")}
    params = {k: v for k, v in params.items() if v is not None}
    if params:
        o["params"] = params
    export = {}
    if args.export_masses:
        export["masses"] = True
    if args.export_decisions:
        export["decisions"] = True
    if export:
        o["export"] = export
    return o


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvlrecm", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="repeated fits with aggregate metrics")
    _add_run_args(p_run)

    p_sweep = sub.add_parser("sweep", help="grid over theta and eta")
    _add_run_args(p_sweep)
    p_sweep.add_argument("--theta-grid", type=_floats, default=list(DEFAULT_THETA_GRID))
    p_sweep.add_argument("--eta-grid", type=_floats, default=list(DEFAULT_ETA_GRID))

    p_gen = sub.add_parser("generate", help="write a 3DBall dataset to files")
    p_gen.add_argument("-o", "--output", required=True, type=Path)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--spec", type=Path, help="JSON overrides of the default 3DBall geometry")

    p_eval = sub.add_parser("evaluate", help="score a partition file against labels")
    p_eval.add_argument("--truth", required=True, type=Path, help="one 1-based label per line")
    p_eval.add_argument("--solution", required=True, type=Path, help="one subset per line, e.g. {1,3}, or a label")
    p_eval.add_argument("--n-clusters", type=int)
    p_eval.add_argument("-o", "--output", type=Path, help="write the JSON report here instead of stdout")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.command == "run":
            report = run(load_config(args.config, _overrides(args)))
            print(json.dumps(report["aggregate"], indent=2))
        elif args.command == "sweep":
            cfg = load_config(args.config, _overrides(args))
            rows = sweep(cfg, args.theta_grid, args.eta_grid)
            print(f"wrote {len(rows)} rows to {Path(cfg['output']) / 'sweep.csv'}")
        elif args.command == "generate":
            overrides = json.loads(args.spec.read_text()) if args.spec else {}
            spec = BallSpec.from_dict({**overrides, "seed": args.seed})
            path = write_dataset(generate_3dball(spec), args.output, name="3dball")
            print(path)
        elif args.command == "evaluate":
            truth, sol = read_labels(args.truth), read_decisions(args.solution)
            if truth.shape != sol.shape:
                raise DatasetError(f"{args.truth} has {truth.size} rows but {args.solution} has {sol.size}")
            text = json.dumps(evaluate(truth, sol, args.n_clusters).to_dict(), indent=2) + "\n"
            if args.output:
                args.output.write_text(text)
            else:
                sys.stdout.write(text)
    except (ConfigError, DatasetError, ValueError, OSError) as exc:
        print(f"mvlrecm: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
