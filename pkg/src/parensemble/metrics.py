"""Classification metrics and the serial-vs-parallel benchmark report.

Report documents carry ``schema_version``; see docs/report_schema.md.
Everything wall-clock lives under the ``timing`` key so two runs of the same
config can be compared with that key removed.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

SCHEMA_VERSION = 1


class DegenerateMetricWarning(UserWarning):
    """A metric hit 0/0 and was reported as 0."""


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray  # [true, predicted]

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def n_samples(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other):
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)


def confusion(true, pred, n_classes: int) -> ConfusionMatrix:
    t = np.asarray(true, dtype=np.int64)
    p = np.asarray(pred, dtype=np.int64)
    if len(t) != len(p) or len(t) == 0:
        raise ValueError("true and pred must have the same nonzero length")
    for name, v in (("true", t), ("pred", p)):
        if v.min() < 0 or v.max() >= n_classes:
            raise ValueError(f"{name} holds a class id outside 0..{n_classes - 1}")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class MetricSet:
    accuracy: float
    precision: float
    recall: float
    f1: float
    positive_class: int
    average: str = "binary"


def _ratio(num: int, den: int, what: str) -> float:
    if den == 0:
        warnings.warn(f"{what} is 0/0; reporting 0", DegenerateMetricWarning, stacklevel=3)
        return 0.0
    return num / den


def _f1(p: float, r: float) -> float:
    if p + r == 0:
        warnings.warn("f1 is 0/0; reporting 0", DegenerateMetricWarning, stacklevel=3)
        return 0.0
    return 2 * p * r / (p + r)


def _binary(c: np.ndarray, pos: int) -> tuple[float, float, float]:
    tp = int(c[pos, pos])
    fp = int(c[:, pos].sum()) - tp
    fn = int(c[pos, :].sum()) - tp
    p = _ratio(tp, tp + fp, f"precision (class {pos})")
    r = _ratio(tp, tp + fn, f"recall (class {pos})")
    return p, r, _f1(p, r)


def metric_set(cm: ConfusionMatrix, positive_class: int = 1) -> MetricSet:
    """Binary metrics for ``positive_class``; macro averages when there are more than two classes."""
    c = cm.counts
    acc = _ratio(int(np.trace(c)), int(c.sum()), "accuracy")
    if cm.n_classes == 2:
        p, r, f = _binary(c, positive_class)
        return MetricSet(acc, p, r, f, positive_class, "binary")
    per = [_binary(c, k) for k in range(cm.n_classes)]
    p, r, f = (float(np.mean([x[i] for x in per])) for i in range(3))
    return MetricSet(acc, p, r, f, positive_class, "macro")


def evaluate(true, pred, n_classes: int, positive_class: int = 1) -> MetricSet:
    return metric_set(confusion(true, pred, n_classes), positive_class)


# ---------------------------------------------------------------- report


@dataclass(frozen=True)
class ConfigRow:
    config_id: int
    label: str
    serial: Optional[MetricSet]
    parallel: Optional[MetricSet]
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class ModeSummary:
    best_single_accuracy: float
    worst_single_accuracy: float
    ensemble: MetricSet
    n_voters: int


@dataclass(frozen=True)
class Equivalence:
    checked: bool
    configs_identical: bool
    ensemble_identical: bool
    mismatched_config_ids: tuple[int, ...] = ()

    @property
    def violated(self) -> bool:
        return self.checked and not (self.configs_identical and self.ensemble_identical)


@dataclass(frozen=True)
class TaskTiming:
    config_id: int
    mode: str
    fit_seconds: float
    predict_seconds: float


@dataclass(frozen=True)
class Timing:
    serial_seconds: Optional[float]
    parallel_seconds: Optional[float]
    speedup: Optional[float]
    tasks: tuple[TaskTiming, ...] = ()


@dataclass(frozen=True)
class BenchmarkReport:
    algorithm: str
    n_workers: int
    strategy: str
    kernel_backend: str
    dataset: dict
    configs: tuple[ConfigRow, ...]
    serial: Optional[ModeSummary]
    parallel: Optional[ModeSummary]
    equivalence: Equivalence
    timing: Timing
    schema_version: int = SCHEMA_VERSION

    @property
    def speedup(self) -> Optional[float]:
        return self.timing.speedup

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "BenchmarkReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {d.get('schema_version')!r}")
        ms = lambda m: None if m is None else MetricSet(**m)
        summ = lambda s: None if s is None else ModeSummary(
            s["best_single_accuracy"], s["worst_single_accuracy"], ms(s["ensemble"]), s["n_voters"])
        t = d["timing"]
        e = d["equivalence"]
        return cls(
            algorithm=d["algorithm"],
            n_workers=d["n_workers"],
            strategy=d["strategy"],
            kernel_backend=d["kernel_backend"],
            dataset=dict(d["dataset"]),
            configs=tuple(ConfigRow(c["config_id"], c["label"], ms(c["serial"]), ms(c["parallel"]),
                                    tuple(c["warnings"])) for c in d["configs"]),
            serial=summ(d["serial"]),
            parallel=summ(d["parallel"]),
            equivalence=Equivalence(e["checked"], e["configs_identical"], e["ensemble_identical"],
                                    tuple(e["mismatched_config_ids"])),
            timing=Timing(t["serial_seconds"], t["parallel_seconds"], t["speedup"],
                          tuple(TaskTiming(**x) for x in t["tasks"])),
            schema_version=d["schema_version"],
        )

    @classmethod
    def from_json(cls, text: str) -> "BenchmarkReport":
        return cls.from_dict(json.loads(text))


def emit(report: BenchmarkReport) -> str:
    return report.to_json()


def parse(text: str) -> BenchmarkReport:
    return BenchmarkReport.from_json(text)


def speedup(serial_seconds: Optional[float], parallel_seconds: Optional[float]) -> Optional[float]:
    if serial_seconds is None or parallel_seconds is None or parallel_seconds <= 0:
        return None
    return serial_seconds / parallel_seconds


def _summary(outcome, ens, labels, n_classes, pos) -> Optional[ModeSummary]:
    if outcome is None:
        return None
    accs = [evaluate(labels, r.predictions, n_classes, pos).accuracy for r in outcome.results]
    return ModeSummary(max(accs), min(accs), evaluate(labels, ens.predictions, n_classes, pos), ens.n_voters)


def build_report(serial, parallel, ensemble_serial, ensemble_parallel, test_labels, *,
                 algorithm: str, n_classes: int, config_labels: Sequence[str],
                 positive_class: int = 1, strategy: str = "striped", kernel_backend: str = "",
                 dataset: Optional[dict] = None) -> BenchmarkReport:
    """Assemble metrics for both modes and check they predicted identically.

    Either outcome may be None for a single-mode run.
    """
    outcomes = [o for o in (serial, parallel) if o is not None]
    if not outcomes:
        raise ValueError("need at least one run outcome")
    labels = np.asarray(test_labels, dtype=np.int64)
    ids = [r.config_id for r in outcomes[0].results]
    if len(config_labels) != len(ids):
        raise ValueError("config_labels does not match the plan")
    for o in outcomes:
        if [r.config_id for r in o.results] != ids:
            raise ValueError("serial and parallel outcomes cover different plans")
        for r in o.results:
            if len(r.predictions) != len(labels):
                raise ValueError(f"config {r.config_id} predictions do not match the test set")

    mismatched: list[int] = []
    checked = serial is not None and parallel is not None
    if checked:
        for a, b in zip(serial.results, parallel.results):
            if not np.array_equal(a.predictions, b.predictions):
                mismatched.append(a.config_id)
    ens_same = (not checked) or ensemble_serial == ensemble_parallel
    equivalence = Equivalence(checked, not mismatched, bool(ens_same), tuple(mismatched))

    rows = []
    for i, cid in enumerate(ids):
        per_mode = {}
        notes: list[str] = []
        for o in outcomes:
            r = o.results[i]
            per_mode[o.mode] = evaluate(labels, r.predictions, n_classes, positive_class)
            notes.extend(w for w in r.warnings if w not in notes)
        rows.append(ConfigRow(cid, config_labels[i], per_mode.get("serial"), per_mode.get("parallel"), tuple(notes)))

    tasks = tuple(TaskTiming(r.config_id, o.mode, r.fit_seconds, r.predict_seconds)
                  for o in outcomes for r in o.results)
    s_sec = serial.wall_seconds if serial is not None else None
    p_sec = parallel.wall_seconds if parallel is not None else None
    return BenchmarkReport(
        algorithm=algorithm,
        n_workers=parallel.n_workers if parallel is not None else 1,
        strategy=strategy,
        kernel_backend=kernel_backend,
        dataset=dict(dataset or {}),
        configs=tuple(rows),
        serial=_summary(serial, ensemble_serial, labels, n_classes, positive_class),
        parallel=_summary(parallel, ensemble_parallel, labels, n_classes, positive_class),
        equivalence=equivalence,
        timing=Timing(s_sec, p_sec, speedup(s_sec, p_sec), tasks),
    )


def without_timing(report_dict: dict) -> dict:
    return {k: v for k, v in report_dict.items() if k != "timing"}


# ---------------------------------------------------------------- text


def _pct(m: Optional[MetricSet], attr: str) -> str:
    return "-" if m is None else f"{100 * getattr(m, attr):.2f}"


def _secs(v: Optional[float]) -> str:
    return "-" if v is None else f"{v:.3f}"


def render_text(report: BenchmarkReport) -> str:
    ds = report.dataset
    lines = [
        f"algorithm: {report.algorithm}   workers: {report.n_workers}   strategy: {report.strategy}"
        f"   kernels: {report.kernel_backend}",
        "dataset: " + "  ".join(f"{k}={ds[k]}" for k in sorted(ds)),
        "",
    ]
    header = ("id", "config", "acc(serial)", "acc(parallel)", "precision", "recall", "f1")
    table = [header]
    for c in report.configs:
        m = c.serial or c.parallel
        table.append((str(c.config_id), c.label, _pct(c.serial, "accuracy"), _pct(c.parallel, "accuracy"),
                      _pct(m, "precision"), _pct(m, "recall"), _pct(m, "f1")))
    es = report.serial.ensemble if report.serial else None
    ep = report.parallel.ensemble if report.parallel else None
    em = es or ep
    table.append(("", "ensemble", _pct(es, "accuracy"), _pct(ep, "accuracy"),
                  _pct(em, "precision"), _pct(em, "recall"), _pct(em, "f1")))
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    for j, r in enumerate(table):
        lines.append("  ".join(cell.ljust(w) if i < 2 else cell.rjust(w) for i, (cell, w) in enumerate(zip(r, widths))))
        if j == 0 or j == len(table) - 2:
            lines.append("  ".join("-" * w for w in widths))
    lines.append("")
    for name, s in (("serial", report.serial), ("parallel", report.parallel)):
        if s is not None:
            lines.append(f"{name:<9} best single {100 * s.best_single_accuracy:.2f}%   worst single "
                         f"{100 * s.worst_single_accuracy:.2f}%   ensemble {100 * s.ensemble.accuracy:.2f}% "
                         f"({s.n_voters} voters)")
    t = report.timing
    lines.append(f"time (s)  serial {_secs(t.serial_seconds)}   parallel {_secs(t.parallel_seconds)}   "
                 f"speedup {'-' if t.speedup is None else f'{t.speedup:.3f}'}")
    eq = report.equivalence
    if not eq.checked:
        lines.append("equivalence: not checked (single mode)")
    elif eq.violated:
        lines.append(f"!!! EQUIVALENCE VIOLATION: configs {list(eq.mismatched_config_ids)} "
                     f"ensemble_identical={eq.ensemble_identical}")
    else:
        lines.append("equivalence: serial and parallel predictions identical")
    for c in report.configs:
        for w in c.warnings:
            lines.append(f"warning [{c.config_id}]: {w}")
    return "\n".join(lines) + "\n"
