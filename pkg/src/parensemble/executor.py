"""Plan a hyperparameter grid into task groups and run it serially or on a worker pool.

Each task group is one unit of work for one worker (the analogue of one
child process). Workers push ConfigResults into a queue in whatever order
they finish; the coordinator drains it after every worker has joined and
sorts by config_id.
"""
from __future__ import annotations

import multiprocessing
import os
import queue
import threading
import time
from concurrent.futures import FIRST_EXCEPTION, Executor, ProcessPoolExecutor, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .classifiers import HyperParams, RForestModel, SvmModel, fit, predict
from .dataio import Dataset

STRIPED = "striped"
ONE_PER_GROUP = "one_per_group"
STRATEGIES = (STRIPED, ONE_PER_GROUP)

BACKENDS = ("thread", "process")


class TaskFailed(RuntimeError):
    def __init__(self, config_id: int, cause: BaseException):
        super().__init__(f"config {config_id} failed: {cause!r}")
        self.config_id = config_id
        self.cause = cause

    def __reduce__(self):
        return (TaskFailed, (self.config_id, self.cause))


class CollectionError(RuntimeError):
    """The result channel lost or duplicated a config."""


def now_monotonic() -> float:
    return time.perf_counter()


@dataclass(frozen=True)
class TaskSpec:
    config_id: int
    params: HyperParams


@dataclass(frozen=True)
class TaskPlan:
    groups: tuple[tuple[TaskSpec, ...], ...]
    strategy: str

    def __post_init__(self):
        ids = sorted(t.config_id for g in self.groups for t in g)
        if ids != list(range(len(ids))):
            raise ValueError("config ids must be unique and dense from 0")

    @property
    def tasks(self) -> tuple[TaskSpec, ...]:
        return tuple(sorted((t for g in self.groups for t in g), key=lambda t: t.config_id))

    @property
    def config_ids(self) -> tuple[int, ...]:
        return tuple(t.config_id for t in self.tasks)

    def __len__(self) -> int:
        return sum(len(g) for g in self.groups)


@dataclass(frozen=True)
class ConfigResult:
    config_id: int
    predictions: np.ndarray
    fit_seconds: float
    predict_seconds: float
    warnings: tuple[str, ...] = ()
    votes: Optional[np.ndarray] = None  # per-class tree tallies, forests only


@dataclass(frozen=True)
class RunOutcome:
    results: tuple[ConfigResult, ...]
    wall_seconds: float
    mode: str
    n_workers: int

    def predictions(self) -> dict[int, np.ndarray]:
        return {r.config_id: r.predictions for r in self.results}


def plan_tasks(grid: Sequence[HyperParams], n_groups: int = 1, strategy: str = STRIPED) -> TaskPlan:
    """Group the grid; striped puts configs i, i+G, i+2G, ... into group i."""
    if not grid:
        raise ValueError("grid is empty")
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    specs = [TaskSpec(i, p) for i, p in enumerate(grid)]
    if strategy == ONE_PER_GROUP:
        return TaskPlan(tuple((s,) for s in specs), strategy)
    if n_groups < 1:
        raise ValueError("n_groups must be >= 1")
    g = min(n_groups, len(specs))
    return TaskPlan(tuple(tuple(specs[i::g]) for i in range(g)), strategy)


def default_workers(n_groups: int) -> int:
    return max(1, min(os.cpu_count() or 1, n_groups))


def execute_task(spec: TaskSpec, train: Dataset, test: Dataset) -> ConfigResult:
    t0 = now_monotonic()
    model = fit(spec.params, train)
    t1 = now_monotonic()
    votes = None
    if isinstance(model, RForestModel):
        votes = model.vote_counts(test.features)
        pred = np.argmax(votes, axis=1)
    else:
        pred = predict(model, test.features)
    t2 = now_monotonic()
    notes = []
    if isinstance(model, SvmModel) and not model.converged:
        notes.append(f"svm {spec.params.kernel}: iteration cap {spec.params.max_iter} reached")
    return ConfigResult(spec.config_id, np.asarray(pred, dtype=np.int64), t1 - t0, t2 - t1, tuple(notes), votes)


def _run_group(group, train, test, channel, abort, startup_cost=0.0, delays=None):
    if startup_cost:
        time.sleep(startup_cost)
    for spec in group:
        if abort.is_set():
            return
        if delays and spec.config_id in delays:
            time.sleep(delays[spec.config_id])
        try:
            result = execute_task(spec, train, test)
        except Exception as exc:
            raise TaskFailed(spec.config_id, exc) from exc
        channel.put(result)


def _collect(plan: TaskPlan, received: Sequence[ConfigResult], n_test: int) -> tuple[ConfigResult, ...]:
    by_id: dict[int, ConfigResult] = {}
    for r in received:
        if r.config_id in by_id:
            raise CollectionError(f"config {r.config_id} reported twice")
        if len(r.predictions) != n_test:
            raise CollectionError(f"config {r.config_id} returned {len(r.predictions)} predictions for {n_test} rows")
        by_id[r.config_id] = r
    missing = set(plan.config_ids) - set(by_id)
    if missing:
        raise CollectionError(f"no result for configs {sorted(missing)}")
    extra = set(by_id) - set(plan.config_ids)
    if extra:
        raise CollectionError(f"unplanned configs {sorted(extra)}")
    return tuple(by_id[i] for i in sorted(by_id))


def run_serial(plan: TaskPlan, train: Dataset, test: Dataset) -> RunOutcome:
    """Every task in stripe order on the calling thread."""
    if len(plan) == 0:
        raise ValueError("plan is empty")
    out = []
    t0 = now_monotonic()
    for group in plan.groups:
        for spec in group:
            try:
                out.append(execute_task(spec, train, test))
            except Exception as exc:
                raise TaskFailed(spec.config_id, exc) from exc
    wall = now_monotonic() - t0
    return RunOutcome(_collect(plan, out, test.n_rows), wall, "serial", 1)


@dataclass
class _Pool:
    executor: Executor
    channel: object
    abort: object
    manager: object = field(default=None)

    def close(self):
        self.executor.shutdown(wait=True, cancel_futures=True)
        if self.manager is not None:
            self.manager.shutdown()


def _make_pool(backend: str, n_workers: int) -> _Pool:
    if backend == "thread":
        return _Pool(ThreadPoolExecutor(n_workers, thread_name_prefix="parensemble"), queue.Queue(), threading.Event())
    if backend == "process":
        manager = multiprocessing.Manager()
        return _Pool(ProcessPoolExecutor(n_workers), manager.Queue(), manager.Event(), manager)
    raise ValueError(f"backend must be one of {BACKENDS}")


def _drain(channel) -> list:
    out = []
    while True:
        try:
            out.append(channel.get_nowait())
        except queue.Empty:
            return out


def run_parallel(plan: TaskPlan, train: Dataset, test: Dataset, n_workers: Optional[int] = None, *,
                 backend: str = "thread", warm_pool: bool = False, startup_cost: float = 0.0,
                 delays: Optional[Mapping[int, float]] = None) -> RunOutcome:
    """One worker per task group, at most ``n_workers`` at a time.

    The timed region starts before the pool is created unless ``warm_pool``
    is set, and ends once every worker has joined. ``startup_cost`` adds a
    fixed sleep at the start of each group (simulated spawn cost); ``delays``
    maps config_id to an extra sleep before that task, for shuffling
    completion order in tests.
    """
    if len(plan) == 0:
        raise ValueError("plan is empty")
    if n_workers is None:
        n_workers = default_workers(len(plan.groups))
    if n_workers < 1:
        raise ValueError("n_workers must be >= 1")

    pool = None
    if warm_pool:
        pool = _make_pool(backend, n_workers)
        wait([pool.executor.submit(time.sleep, 0) for _ in range(n_workers)])
    t0 = now_monotonic()
    if pool is None:
        pool = _make_pool(backend, n_workers)
    try:
        futures = [
            pool.executor.submit(_run_group, g, train, test, pool.channel, pool.abort, startup_cost, delays)
            for g in plan.groups
        ]
        done, _ = wait(futures, return_when=FIRST_EXCEPTION)
        failure = next((f.exception() for f in futures if f in done and f.exception() is not None), None)
        if failure is not None:
            pool.abort.set()
            for f in futures:
                f.cancel()
        wait(futures)
        received = _drain(pool.channel)
        pool.executor.shutdown(wait=True)
        wall = now_monotonic() - t0
    finally:
        pool.close()
    if failure is not None:
        if isinstance(failure, TaskFailed):
            raise failure
        raise RuntimeError(f"worker crashed: {failure!r}") from failure
    return RunOutcome(_collect(plan, received, test.n_rows), wall, "parallel", n_workers)
