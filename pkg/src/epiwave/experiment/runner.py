"""Run models over scenarios and seeds, and write CSV reports."""
from __future__ import annotations

import csv
import logging
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..baselines import BaselineConfig, ha_forecasts, make_baseline
from ..model import ModelConfig, SabGnn, load_model, predict_counts, prepare, save_model, train
from ..wmn import SnapshotSeries, fit_stats, read_series, top_symptoms
from . import metrics
from .config import ABLATION_MODELS, ExperimentConfig
from .split import split_anchors

log = logging.getLogger(__name__)

RESULT_HEADER = ["model", "scenario_d1", "scenario_d2", "seed", "mae", "rmse", "seconds"]
SUMMARY_HEADER = ["model", "scenario_d1", "scenario_d2", "mae", "rmse", "mae_std", "rmse_std", "seeds", "seconds"]
SERIES_HEADER = ["anchor", "day", "district", "predicted", "actual"]
SWEEP_HEADER = ["parameter", "value"] + RESULT_HEADER
ABLATION_HEADER = ["model", "scenario_d1", "scenario_d2", "mae", "rmse", "rmse_change_vs_full"]


def num(x) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class RunSpec:
    model: str
    d1: int
    d2: int
    seed: int
    sweep: tuple = ()  # (parameter, value) when part of a sweep

    @property
    def tag(self) -> str:
        base = f"{self.model}_{self.d1}_{self.d2}_seed{self.seed}"
        return f"{self.sweep[0]}={self.sweep[1]}_{base}" if self.sweep else base


@dataclass
class RunOutcome:
    spec: RunSpec
    mae: float = float("nan")
    rmse: float = float("nan")
    seconds: float = 0.0
    anchors: np.ndarray = None
    predicted: np.ndarray = None  # (B, D2, n)
    actual: np.ndarray = None
    relative: np.ndarray = None
    history: list = field(default_factory=list)
    error: str | None = None


def is_trainable(model: str) -> bool:
    return not model.startswith("ha_")


def build_model(name: str, cfg: ModelConfig, n: int, k: int):
    if name.startswith("sabgnn"):
        variant = name.split("_", 1)[1] if "_" in name else "full"
        return SabGnn(cfg.replace(variant=variant), n, k)
    kind, features = name.split("_", 1)
    return make_baseline(BaselineConfig(kind, features), cfg, n, k)


class Context:
    """Per-process cache of splits and prepared data keyed by scenario and feature settings."""

    def __init__(self, series: SnapshotSeries, exp: ExperimentConfig):
        self.series = series
        self.exp = exp
        self._cache = {}

    def split(self, d1, d2):
        key = ("split", d1, d2)
        if key not in self._cache:
            self._cache[key] = split_anchors(len(self.series), d1, d2, self.exp.ratios, self.exp.validation_block)
        return self._cache[key]

    def data(self, d1, d2, k, adjacency_norm):
        key = ("data", d1, d2, k, adjacency_norm)
        if key not in self._cache:
            days = self.split(d1, d2).training_days(d1, d2)
            stats = fit_stats(self.series, days)
            idx = top_symptoms(self.series, days, k)
            self._cache[key] = prepare(self.series, stats, idx, adjacency_norm)
        return self._cache[key]


def _targets(cases, anchors, d2):
    return np.stack([cases[t + 1:t + d2 + 1] for t in anchors])


def execute(ctx: Context, spec: RunSpec, mode: str = "train") -> RunOutcome:
    """Train (or load) one model for one scenario and seed and score it on the test windows."""
    exp = ctx.exp
    out = RunOutcome(spec)
    start = time.perf_counter()
    try:
        split = ctx.split(spec.d1, spec.d2)
        anchors = np.asarray(split.test, dtype=np.int64)
        cases = ctx.series.cases
        if not is_trainable(spec.model):
            pred = ha_forecasts(spec.model, cases, anchors, spec.d1, spec.d2, exp.ha_window)
        else:
            overrides = dict([spec.sweep]) if spec.sweep else {}
            cfg = exp.model_config(spec.d1, spec.d2, spec.seed, **overrides)
            path = exp.out / "models" / f"{spec.tag}.json"
            if mode == "evaluate":
                params, cfg, stats, symptoms, _ = load_model(path)
                idx = [ctx.series.symptoms.index(s) for s in symptoms]
                data = prepare(ctx.series, stats, idx, cfg.adjacency_norm)
                model = build_model(spec.model, cfg, ctx.series.n, len(idx))
            else:
                data = ctx.data(spec.d1, spec.d2, cfg.k, cfg.adjacency_norm)
                model = build_model(spec.model, cfg, ctx.series.n, cfg.k)
                result = train(model, data, split.train, split.validation)
                params = result.params
                out.history = result.log
                if exp.save_models:
                    path.parent.mkdir(parents=True, exist_ok=True)
                    save_model(path, params, model.cfg, data.stats, [ctx.series.symptoms[i] for i in data.symptom_idx],
                               {"model": spec.model, "best_epoch": result.best_epoch,
                                "test_start": split.test_start})
            pred = predict_counts(model, params, data, anchors)
        actual = _targets(cases, anchors, spec.d2)
        out.anchors, out.predicted, out.actual = anchors, pred, actual
        out.mae = metrics.mae(pred, actual)
        out.rmse = metrics.rmse(pred, actual)
        out.relative = metrics.relative_error(pred, actual)
    except Exception as e:  # recorded; sibling runs continue
        out.error = f"{type(e).__name__}: {e}"
        log.error("run %s failed: %s", spec.tag, out.error)
        log.debug("%s", traceback.format_exc())
    out.seconds = time.perf_counter() - start
    return out


_worker_ctx: Context | None = None


def _init_worker(series, exp):
    global _worker_ctx
    _worker_ctx = Context(series, exp)


def _run_in_worker(spec, mode):
    return execute(_worker_ctx, spec, mode)


def run_specs(series: SnapshotSeries, exp: ExperimentConfig, specs, mode="train") -> list[RunOutcome]:
    """Execute every spec, in parallel worker processes when ``exp.workers`` > 1.

    Outcomes come back in spec order regardless of completion order.
    """
    if exp.workers == 1 or len(specs) <= 1:
        ctx = Context(series, exp)
        return [execute(ctx, s, mode) for s in specs]
    with ProcessPoolExecutor(exp.workers, initializer=_init_worker, initargs=(series, exp)) as pool:
        futures = [pool.submit(_run_in_worker, s, mode) for s in specs]
        return [f.result() for f in futures]


# --- reports -----------------------------------------------------------------

def _write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _seconds(o: RunOutcome, exp) -> str:
    return num(o.seconds) if exp.timing else "0"


def summarize(outcomes) -> list[list]:
    """Mean (and std) of per-seed metrics for each model and scenario, in first-seen order."""
    groups = {}
    for o in outcomes:
        if o.error is None:
            groups.setdefault((o.spec.model, o.spec.d1, o.spec.d2), []).append(o)
    rows = []
    for (model, d1, d2), runs in groups.items():
        m = np.array([r.mae for r in runs])
        r = np.array([r.rmse for r in runs])
        rows.append([model, d1, d2, float(m.mean()), float(r.mean()), float(m.std()), float(r.std()),
                     " ".join(str(x.spec.seed) for x in runs), float(sum(x.seconds for x in runs))])
    return rows


def write_reports(outcomes, exp: ExperimentConfig, out_dir: Path, series: SnapshotSeries) -> dict:
    out_dir = Path(out_dir)
    ok = [o for o in outcomes if o.error is None]
    plain = [o for o in ok if not o.spec.sweep]
    _write_csv(out_dir / "results.csv", RESULT_HEADER,
               [[o.spec.model, o.spec.d1, o.spec.d2, o.spec.seed, num(o.mae), num(o.rmse), _seconds(o, exp)]
                for o in plain])
    summary = summarize(plain)
    _write_csv(out_dir / "summary.csv", SUMMARY_HEADER,
               [[m, d1, d2, num(a), num(b), num(c), num(d), s, num(t) if exp.timing else "0"]
                for m, d1, d2, a, b, c, d, s, t in summary])
    rel_rows = []
    for o in ok:
        rows = []
        for b, anchor in enumerate(o.anchors):
            for j in range(o.spec.d2):
                for i, name in enumerate(series.districts):
                    rows.append([int(anchor), int(anchor) + j + 1, name, num(o.predicted[b, j, i]),
                                 num(o.actual[b, j, i])])
        _write_csv(out_dir / "series" / f"{o.spec.tag}.csv", SERIES_HEADER, rows)
        for i, name in enumerate(series.districts):
            v = o.relative[i]
            rel_rows.append([o.spec.model, o.spec.d1, o.spec.d2, o.spec.seed, "|".join(map(str, o.spec.sweep)),
                             name, "NA" if np.isnan(v) else num(v)])
        if o.history:
            _write_csv(out_dir / "logs" / f"{o.spec.tag}.csv", ["epoch", "train_loss", "val_loss"],
                       [[h["epoch"], num(h["train_loss"]), num(h["val_loss"])] for h in o.history])
    _write_csv(out_dir / "relative_error.csv",
               ["model", "scenario_d1", "scenario_d2", "seed", "sweep", "district", "relative_error"], rel_rows)
    sweep = [o for o in ok if o.spec.sweep]
    if sweep:
        _write_csv(out_dir / "sweep.csv", SWEEP_HEADER,
                   [[o.spec.sweep[0], o.spec.sweep[1], o.spec.model, o.spec.d1, o.spec.d2, o.spec.seed,
                     num(o.mae), num(o.rmse), _seconds(o, exp)] for o in sweep])
    failed = [o for o in outcomes if o.error is not None]
    if failed:
        _write_csv(out_dir / "failures.csv", ["model", "scenario_d1", "scenario_d2", "seed", "sweep", "error"],
                   [[o.spec.model, o.spec.d1, o.spec.d2, o.spec.seed, "|".join(map(str, o.spec.sweep)), o.error]
                    for o in failed])
    slow = [o for o in ok if o.seconds > exp.time_budget]
    for o in slow:
        log.warning("run %s took %.0f s, over the %.0f s budget", o.spec.tag, o.seconds, exp.time_budget)
    if slow:
        (out_dir / "warnings.txt").write_text(
            "".join(f"{o.spec.tag} took {o.seconds:.1f} s (budget {exp.time_budget:.0f} s)\n" for o in slow))
    return {"summary": summary, "failed": failed, "slow": slow}


def write_ablation(summary_rows, out_dir: Path):
    full = {(d1, d2): rmse for m, d1, d2, _, rmse, *_ in summary_rows if m == "sabgnn"}
    rows = []
    for m, d1, d2, mae, rmse, *_ in summary_rows:
        if m not in ABLATION_MODELS:
            continue
        ref = full.get((d1, d2))
        change = "NA" if ref is None or ref == 0 else num((rmse - ref) / ref)
        rows.append([m, d1, d2, num(mae), num(rmse), change])
    _write_csv(Path(out_dir) / "ablation.csv", ABLATION_HEADER, rows)


def plan(exp: ExperimentConfig, command: str) -> list[RunSpec]:
    if command == "ablate":
        models = list(ABLATION_MODELS)
    elif command == "sweep":
        models = [m for m in exp.models if is_trainable(m)]
    else:
        models = list(exp.models)
    specs = []
    for d1, d2 in exp.scenarios:
        if command == "sweep":
            for param, values in exp.sweep.items():
                for v in values:
                    specs += [RunSpec(m, d1, d2, s, (param, v)) for m in models for s in exp.seeds]
        else:
            specs += [RunSpec(m, d1, d2, s) for m in models for s in exp.seeds]
    return specs


@dataclass
class RunReport:
    outcomes: list
    summary: list
    failed: list
    out_dir: Path

    @property
    def ok(self) -> bool:
        return not self.failed


def run(exp: ExperimentConfig, command: str = "train", series: SnapshotSeries | None = None) -> RunReport:
    """Run one CLI command (train, evaluate, ablate or sweep) and write its reports under ``out/<command>``."""
    if command not in ("train", "evaluate", "ablate", "sweep"):
        raise ValueError(f"unknown command {command!r}")
    if command == "sweep" and not exp.sweep:
        raise ValueError("sweep needs a [sweep] table in the config")
    series = read_series(exp.data) if series is None else series
    for d1, d2 in exp.scenarios:
        split_anchors(len(series), d1, d2, exp.ratios, exp.validation_block)  # fail early on infeasible scenarios
    specs = plan(exp, command)
    mode = "evaluate" if command == "evaluate" else "train"
    outcomes = run_specs(series, exp, specs, mode)
    out_dir = exp.out / command
    info = write_reports(outcomes, exp, out_dir, series)
    if command == "ablate":
        write_ablation(info["summary"], out_dir)
    return RunReport(outcomes, info["summary"], info["failed"], out_dir)
