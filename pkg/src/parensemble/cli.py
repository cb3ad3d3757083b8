"""Command-line driver: ``run``, ``synth`` and ``report``.

Exit codes: 0 success, 2 configuration/usage error, 3 data error,
4 runtime error, 5 serial/parallel equivalence violation.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import dataio, kernels
from .classifiers import DTree, HyperParams, Knn, RForest, Svm
from .classifiers.params import KNN_METRICS, SVM_KERNELS
from .ensemble import combine
from .executor import BACKENDS, ONE_PER_GROUP, STRATEGIES, TaskFailed, plan_tasks, run_parallel, run_serial
from .metrics import BenchmarkReport, build_report, render_text
from .synth import generate_synthetic

log = logging.getLogger("parensemble")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4
EXIT_EQUIVALENCE = 5

MODES = ("serial", "parallel", "both")

DEFAULT_GRIDS = {
    "knn": {"k": "1..20"},
    "svm": {"kernel": "sigmoid,poly,linear"},
    "dtree": {"leaf": "10,15,20,30,35,40"},
    "rforest": {"trees": "64,66"},
}
GRID_KEYS = {
    "knn": {"k", "metric"},
    "svm": {"kernel", "c", "degree", "gamma", "coef0"},
    "dtree": {"leaf", "depth"},
    "rforest": {"trees"},
}
DEFAULT_GROUPS = {"knn": 5}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    data: str
    label: str
    algo: str
    grid: dict = field(default_factory=dict)
    workers: Optional[int] = None
    groups: Optional[int] = None
    strategy: str = "striped"
    mode: str = "both"
    train_fraction: float = 0.7
    seed: int = 0
    svm_sample: int = 10_000
    select_features: Optional[str] = None
    drop: tuple = ()
    bins: int = 10
    corr_threshold: float = 0.9
    positive_class: int = 1
    pool: str = "thread"
    warm_pool: bool = False
    out: str = "results"

    def hyperparams(self) -> list[HyperParams]:
        return build_grid(self.algo, self.grid, seed=self.seed, svm_sample=self.svm_sample)

    def n_groups(self) -> int:
        if self.groups is not None:
            return self.groups
        return DEFAULT_GROUPS.get(self.algo, len(self.hyperparams()))


# ---------------------------------------------------------------- grid parsing


def _int_list(text: str) -> list[int]:
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                lo, hi = (int(v) for v in part.split(".."))
                if hi < lo:
                    raise ConfigError(f"empty range {part!r}")
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise ConfigError(f"malformed integer list {text!r}") from None
    if not out:
        raise ConfigError(f"empty list {text!r}")
    return out


def _name_list(text: str, allowed: Sequence[str]) -> list[str]:
    names = [p.strip() for p in str(text).split(",") if p.strip()]
    bad = [n for n in names if n not in allowed]
    if bad or not names:
        raise ConfigError(f"expected names from {list(allowed)}, got {text!r}")
    return names


def _float(text, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {text!r}") from None


def build_grid(algo: str, spec: dict, seed: int = 0, svm_sample: int = 10_000) -> list[HyperParams]:
    if algo not in DEFAULT_GRIDS:
        raise ConfigError(f"unknown algorithm {algo!r}")
    unknown = set(spec) - GRID_KEYS[algo]
    if unknown:
        raise ConfigError(f"grid keys {sorted(unknown)} do not apply to {algo}")
    merged = dict(spec) if spec else dict(DEFAULT_GRIDS[algo])
    try:
        if algo == "knn":
            ks = _int_list(merged.get("k", DEFAULT_GRIDS["knn"]["k"]))
            metrics = _name_list(merged.get("metric", "euclidean"), KNN_METRICS)
            return [Knn(k, m) for m in metrics for k in ks]
        if algo == "svm":
            kernels_ = _name_list(merged.get("kernel", DEFAULT_GRIDS["svm"]["kernel"]), SVM_KERNELS)
            extra = {}
            for key in ("c", "gamma", "coef0"):
                if key in merged:
                    extra[key] = _float(merged[key], key)
            if "degree" in merged:
                extra["degree"] = _int_list(merged["degree"])[0]
            return [Svm(k, max_train=svm_sample, seed=seed, **extra) for k in kernels_]
        if algo == "dtree":
            leaves = _int_list(merged["leaf"]) if "leaf" in merged else None
            depths = _int_list(merged["depth"]) if "depth" in merged else None
            if leaves and depths:
                return [DTree(l, d) for l in leaves for d in depths]
            if depths:
                return [DTree(1, d) for d in depths]
            return [DTree(l) for l in leaves]
        sizes = _int_list(merged.get("trees", DEFAULT_GRIDS["rforest"]["trees"]))
        out, first = [], 0
        for n in sizes:
            out.append(RForest(n, seed, first))
            first += n
        return out
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def parse_grid_args(items: Sequence[str]) -> dict:
    spec = {}
    for item in items:
        for part in item.split(";"):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                raise ConfigError(f"grid entries look like key=values, got {part!r}")
            key, val = part.split("=", 1)
            spec[key.strip()] = val.strip()
    return spec


# ---------------------------------------------------------------- config


_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}
_FILE_ONLY_ALIASES = {"trees"}


def parse_config(args: argparse.Namespace, config_file: Optional[str] = None) -> ExperimentConfig:
    """Defaults < config file < command-line flags."""
    values: dict = {}
    if config_file:
        try:
            raw = json.loads(Path(config_file).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {config_file}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(raw) - _FIELDS - _FILE_ONLY_ALIASES
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(raw)
        if isinstance(values.get("drop"), (list, str)):
            d = values["drop"]
            values["drop"] = tuple(d.split(",") if isinstance(d, str) else d)
        if "trees" in values:
            values.setdefault("grid", {})
            values["grid"] = dict(values["grid"], trees=str(values.pop("trees")))
        if isinstance(values.get("grid"), dict):
            values["grid"] = {k: ",".join(map(str, v)) if isinstance(v, list) else str(v)
                              for k, v in values["grid"].items()}

    flags = {k: v for k, v in vars(args).items() if k in _FIELDS and v is not None}
    grid_flags = parse_grid_args(getattr(args, "grid_items", None) or [])
    trees = getattr(args, "trees", None)
    if trees is not None:
        grid_flags["trees"] = trees
    if grid_flags:
        flags["grid"] = dict(values.get("grid", {}), **grid_flags)
    flags.pop("grid_items", None)
    if getattr(args, "warm_pool", False):
        flags["warm_pool"] = True
    values.update(flags)

    for key in ("data", "label", "algo"):
        if not values.get(key):
            raise ConfigError(f"missing required setting --{key}")
    try:
        cfg = ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    if cfg.algo not in DEFAULT_GRIDS:
        raise ConfigError(f"--algo must be one of {sorted(DEFAULT_GRIDS)}")
    if not 0.0 < cfg.train_fraction < 1.0:
        raise ConfigError("--train-fraction must be strictly between 0 and 1")
    if cfg.mode not in MODES:
        raise ConfigError(f"--mode must be one of {MODES}")
    if cfg.strategy not in STRATEGIES:
        raise ConfigError(f"--strategy must be one of {STRATEGIES}")
    if cfg.pool not in BACKENDS:
        raise ConfigError(f"--pool must be one of {BACKENDS}")
    if cfg.workers is not None and cfg.workers < 1:
        raise ConfigError("--workers must be >= 1")
    if cfg.groups is not None and cfg.groups < 1:
        raise ConfigError("--groups must be >= 1")
    if cfg.seed < 0:
        raise ConfigError("--seed must be >= 0")
    if cfg.svm_sample < 2:
        raise ConfigError("--svm-sample must be >= 2")
    if cfg.bins < 2:
        raise ConfigError("--bins must be >= 2")
    if not 0.0 < cfg.corr_threshold <= 1.0:
        raise ConfigError("--corr-threshold must be in (0, 1]")
    if cfg.label in cfg.drop:
        raise ConfigError("--drop cannot remove the label column")
    if "trees" in cfg.grid and cfg.algo != "rforest":
        raise ConfigError("--trees only applies to --algo rforest")
    if cfg.mode == "serial" and (cfg.workers is not None or cfg.warm_pool):
        raise ConfigError("--workers/--warm-pool make no sense with --mode serial")
    if cfg.strategy == ONE_PER_GROUP and cfg.groups is not None:
        raise ConfigError("--groups conflicts with --strategy one_per_group")
    selection(cfg)
    cfg.hyperparams()


def selection(cfg: ExperimentConfig) -> Optional[tuple[str, int]]:
    if not cfg.select_features or cfg.select_features == "none":
        return None
    method, _, k = cfg.select_features.partition(":")
    methods = {"chi2": dataio.CHI_SQUARED, "chi_squared": dataio.CHI_SQUARED,
               "anova": dataio.ANOVA_F, "anova_f": dataio.ANOVA_F}
    if method not in methods or not k.isdigit() or int(k) < 1:
        raise ConfigError("--select-features expects METHOD:K with METHOD in chi2|anova and K >= 1")
    return methods[method], int(k)


# ---------------------------------------------------------------- pipeline


def prepare_data(cfg: ExperimentConfig):
    table = dataio.load_csv(cfg.data, cfg.label)
    if cfg.drop:
        table = table.without(cfg.drop)
    data = dataio.preprocess(table, cfg.label)
    data = dataio.prune_correlated(data, cfg.corr_threshold)
    sel = selection(cfg)
    if sel is not None:
        method, k = sel
        data = dataio.select_features(data, dataio.score_features(data, method, cfg.bins), k)
    train, test = dataio.train_test_split(data, cfg.train_fraction, cfg.seed)
    return data, train, test


def _write_plotdata(out: Path, report: BenchmarkReport) -> None:
    t = report.timing
    with (out / "plotdata_time.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "wall_seconds", "n_workers"])
        if t.serial_seconds is not None:
            w.writerow(["serial", f"{t.serial_seconds:.6f}", 1])
        if t.parallel_seconds is not None:
            w.writerow(["parallel", f"{t.parallel_seconds:.6f}", report.n_workers])
    ens = {"serial": report.serial, "parallel": report.parallel}
    with (out / "plotdata_accuracy.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "config_id", "config", "accuracy"])
        for mode in ("serial", "parallel"):
            for c in report.configs:
                m = getattr(c, mode)
                if m is not None:
                    w.writerow([mode, c.config_id, c.label, f"{m.accuracy:.6f}"])
            if ens[mode] is not None:
                w.writerow([mode, "", "ensemble", f"{ens[mode].ensemble.accuracy:.6f}"])
    with (out / "plotdata_benchmark.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "source", "precision", "recall", "f1"])
        for mode in ("serial", "parallel"):
            s = ens[mode]
            if s is None:
                continue
            best = max((c for c in report.configs if getattr(c, mode) is not None),
                       key=lambda c: getattr(c, mode).accuracy)
            for source, m in ((f"best single ({best.label})", getattr(best, mode)), ("ensemble", s.ensemble)):
                w.writerow([mode, source, f"{m.precision:.6f}", f"{m.recall:.6f}", f"{m.f1:.6f}"])


def run_experiment(cfg: ExperimentConfig) -> int:
    try:
        data, train, test = prepare_data(cfg)
    except (OSError, dataio.DataError, KeyError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    if cfg.positive_class >= data.n_classes:
        log.error("positive class %d does not exist (%d classes)", cfg.positive_class, data.n_classes)
        return EXIT_CONFIG

    grid = cfg.hyperparams()
    plan = plan_tasks(grid, cfg.n_groups(), cfg.strategy)
    kernels.warmup()
    log.info("%s: %d configs in %d groups, %d train / %d test rows, %d features, kernels=%s",
             cfg.algo, len(grid), len(plan.groups), train.n_rows, test.n_rows, train.n_features,
             kernels.backend_name())

    serial = parallel = None
    try:
        if cfg.mode in ("serial", "both"):
            serial = run_serial(plan, train, test)
            log.info("serial run: %.3f s", serial.wall_seconds)
        if cfg.mode in ("parallel", "both"):
            parallel = run_parallel(plan, train, test, cfg.workers, backend=cfg.pool, warm_pool=cfg.warm_pool)
            log.info("parallel run (%d workers): %.3f s", parallel.n_workers, parallel.wall_seconds)
    except (TaskFailed, RuntimeError, ValueError) as exc:
        log.error("run failed: %s", exc)
        return EXIT_RUNTIME

    # ensembling happens outside both timed regions
    ens_s = combine(serial.results, data.n_classes) if serial else None
    ens_p = combine(parallel.results, data.n_classes) if parallel else None
    fingerprint = {
        "data": Path(cfg.data).name,
        "label": cfg.label,
        "n_rows": data.n_rows,
        "n_train": train.n_rows,
        "n_test": test.n_rows,
        "n_features": data.n_features,
        "n_classes": data.n_classes,
        "feature_names": list(data.feature_names),
        "seed": cfg.seed,
        "train_fraction": cfg.train_fraction,
    }
    report = build_report(
        serial, parallel, ens_s, ens_p, test.labels,
        algorithm=cfg.algo, n_classes=data.n_classes, config_labels=[p.label for p in grid],
        positive_class=cfg.positive_class, strategy=cfg.strategy, kernel_backend=kernels.backend_name(),
        dataset=fingerprint,
    )
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    text = render_text(report)
    (out / "report.txt").write_text(text, encoding="utf-8")
    _write_plotdata(out, report)
    sys.stdout.write(text)
    if report.equivalence.violated:
        log.error("serial and parallel predictions differ: %s", report.equivalence)
        return EXIT_EQUIVALENCE
    return EXIT_OK


# ---------------------------------------------------------------- argparse


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="parensemble", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train the grid serially and/or in parallel and write a report")
    run.add_argument("--config", help="JSON file with settings (flags override it)")
    run.add_argument("--data")
    run.add_argument("--label")
    run.add_argument("--algo", choices=sorted(DEFAULT_GRIDS))
    run.add_argument("--grid", dest="grid_items", action="append", metavar="KEY=VALUES",
                     help="e.g. k=1..20, kernel=poly,linear, leaf=10,15, depth=5,7 (repeatable)")
    run.add_argument("--trees", help="forest slice sizes, e.g. 64,66")
    run.add_argument("--workers", type=int)
    run.add_argument("--groups", type=int, help="task groups for the striped plan (knn default 5)")
    run.add_argument("--strategy", type=lambda s: s.replace("-", "_"))
    run.add_argument("--mode")
    run.add_argument("--train-fraction", dest="train_fraction", type=float)
    run.add_argument("--seed", type=int)
    run.add_argument("--svm-sample", dest="svm_sample", type=int)
    run.add_argument("--select-features", dest="select_features", metavar="METHOD:K")
    run.add_argument("--drop", type=lambda s: tuple(c.strip() for c in s.split(",") if c.strip()),
                     help="comma-separated columns to discard before preprocessing")
    run.add_argument("--bins", type=int)
    run.add_argument("--corr-threshold", dest="corr_threshold", type=float)
    run.add_argument("--positive-class", dest="positive_class", type=int)
    run.add_argument("--pool", help="worker backend: thread (default) or process")
    run.add_argument("--warm-pool", dest="warm_pool", action="store_true", default=None,
                     help="create workers before the timed region")
    run.add_argument("--out")

    syn = sub.add_parser("synth", help="write a Gaussian-blob CSV")
    syn.add_argument("--out", required=True)
    syn.add_argument("--rows", type=int, default=1000)
    syn.add_argument("--features", type=int, default=8)
    syn.add_argument("--classes", type=int, default=2)
    syn.add_argument("--separation", type=float, default=1.0)
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--label", default="label")

    rep = sub.add_parser("report", help="render a stored report.json as a text table")
    rep.add_argument("path")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.command == "synth":
        try:
            path = generate_synthetic(args.out, args.rows, args.features, args.classes, args.separation,
                                      args.seed, args.label)
        except ValueError as exc:
            log.error("%s", exc)
            return EXIT_CONFIG
        log.info("wrote %s", path)
        return EXIT_OK

    if args.command == "report":
        try:
            report = BenchmarkReport.from_json(Path(args.path).read_text(encoding="utf-8"))
        except (OSError, ValueError, KeyError) as exc:
            log.error("cannot read report: %s", exc)
            return EXIT_DATA
        sys.stdout.write(render_text(report))
        return EXIT_OK

    try:
        cfg = parse_config(args, args.config)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        log.error("%s", exc)
        return EXIT_CONFIG
    return run_experiment(cfg)


if __name__ == "__main__":
    sys.exit(main())
