"""Batch experiments comparing the filter against the plain empirical CPT."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .bayesnet import (
    DEFAULT_D_EXACT,
    BayesNet,
    Dataset,
    config_probs,
    config_probs_mc,
    cpt_l2,
    make_dag,
    min_config_prob,
    random_net,
    sample,
    to_table,
    tv_exact,
    tv_surrogate,
)
from .contamination import (
    HUBER,
    REPLACEMENT,
    CptShift,
    HuberSource,
    NoiseModel,
    corrupt_huber,
    corrupt_replacement,
)
from .engine import EngineConfig, FilterStack, empirical_cpt, learn
from .errors import FormatError
from .io import adversary_from_dict, fmt_float

CSV_COLUMNS = ("method", "eps", "trial", "tv", "cpt_l2", "iters", "converged", "clean_rej", "corrupt_rej")
METRICS = ("tv", "cpt_l2", "iters", "clean_rej", "corrupt_rej")


@dataclass
class ExperimentSpec:
    d: int
    topology: str = "chain"
    fan_in: int = 1
    c: float = 0.3
    eps_grid: list = field(default_factory=lambda: [0.05])
    trials: int = 1
    n: int = 200_000
    methods: list = field(default_factory=lambda: ["filter", "mle"])
    noise_kind: str = HUBER
    adversary: dict = field(default_factory=lambda: {"type": "cpt_shift", "node": 2, "config": "1", "delta": 0.4})
    seed: int = 0
    d_exact: int = DEFAULT_D_EXACT
    n_eval: int = 100_000
    learner_eps_floor: float = 0.01
    engine: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if any(not 0 <= e < 0.25 for e in self.eps_grid):
            raise ValueError("eps grid must lie in [0, 1/4)")
        if set(self.methods) - {"filter", "mle"}:
            raise ValueError(f"unknown methods {set(self.methods) - {'filter', 'mle'}}")

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentSpec":
        try:
            return cls(**obj)
        except TypeError as exc:
            raise FormatError(f"bad experiment spec: {exc}") from exc

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def trial_seed(master: int, eps_index: int, trial: int) -> int:
    """Stable per-trial seed derived from the master seed."""
    return int(np.random.SeedSequence([master, eps_index, trial]).generate_state(1)[0])


def build_model(spec: ExperimentSpec) -> BayesNet:
    seeds = np.random.SeedSequence([spec.seed, 7919]).generate_state(2)
    dag = make_dag(spec.topology, spec.d, spec.fan_in, seed=int(seeds[0]))
    return random_net(dag, spec.c, seed=int(seeds[1]))


def resolve_adversary(obj: dict, net: BayesNet):
    """Adversary from a spec dict.

    cpt_shift may name its target by 1-based node and config bits. Such a
    shift moves the entry away from 1/2 unless ``"direction": "signed"``
    asks for delta to be applied as given, so any |delta| <= 1/2 stays
    inside [0, 1].
    """
    if obj.get("type") == "cpt_shift" and "node" in obj:
        i = int(obj["node"]) - 1
        a = net.table.parse_assignment(i, str(obj.get("config", "")))
        k = net.table.index(i, a)
        delta = float(obj["delta"])
        if obj.get("direction", "away") == "away":
            delta = abs(delta) if net.cpt[k] <= 0.5 else -abs(delta)
        return CptShift((k,), delta)
    return adversary_from_dict(obj)


@dataclass
class Metrics:
    tv: float
    cpt_l2: float
    iters: int
    converged: bool
    clean_rej: float
    corrupt_rej: float


def evaluate(truth: BayesNet, learned: BayesNet, c: float, stack: Optional[FilterStack] = None,
             held_out: Optional[Dataset] = None, d_exact: int = DEFAULT_D_EXACT,
             probs=None) -> dict:
    """Error metrics of a learned net, plus rejection rates on labeled data."""
    if truth.d <= d_exact:
        probs = config_probs(truth, d_exact) if probs is None else probs
        tv = tv_exact(to_table(truth, d_exact), to_table(learned, d_exact))
    else:
        probs = config_probs_mc(truth, seed=0) if probs is None else probs
        tv = tv_surrogate(truth, learned, c, probs_p=probs)
    out = {"tv": tv, "cpt_l2": cpt_l2(truth, learned, probs_p=probs, d_exact=d_exact),
           "clean_rej": 0.0, "corrupt_rej": float("nan")}
    if held_out is not None and held_out.labels is not None:
        rej = stack.rejects(held_out.x, truth.table) if stack is not None and len(stack) else np.zeros(len(held_out), bool)
        bad = held_out.labels
        out["clean_rej"] = float(rej[~bad].mean()) if (~bad).any() else float("nan")
        out["corrupt_rej"] = float(rej[bad].mean()) if bad.any() else float("nan")
    return out


def _engine_config(spec: ExperimentSpec, eps: float, seed: int) -> EngineConfig:
    opts = dict(spec.engine)
    opts.setdefault("n_cap", spec.n)
    return EngineConfig(eps=max(eps, spec.learner_eps_floor), seed=seed, **opts)


def run_trial(spec: ExperimentSpec, net: BayesNet, eps_index: int, trial: int) -> list:
    eps = spec.eps_grid[eps_index]
    seed = trial_seed(spec.seed, eps_index, trial)
    ss = np.random.SeedSequence(seed).generate_state(4)
    adversary = resolve_adversary(spec.adversary, net)
    model = NoiseModel(spec.noise_kind, eps, adversary)
    if net.d <= spec.d_exact:
        probs = config_probs(net, spec.d_exact)
    else:
        probs = config_probs_mc(net, spec.n_eval, seed=int(ss[0]))

    if spec.noise_kind == HUBER:
        held_out = corrupt_huber(net, spec.n_eval, model, seed=int(ss[0]))
        data = corrupt_huber(net, spec.n, model, seed=int(ss[1])).x
    else:
        clean = sample(net, spec.n, seed=int(ss[1]))
        corrupted = corrupt_replacement(clean, eps, adversary, seed=int(ss[0]), net=net)
        held_out, data = corrupted, corrupted.x

    rows = []
    for method in spec.methods:
        try:
            if method == "mle":
                q, _ = empirical_cpt(data, net.table)
                learned = net.with_cpt(np.clip(q, 1e-6, 1 - 1e-6))
                stack, iters, converged = None, 0, True
            else:
                cfg = _engine_config(spec, eps, int(ss[2]))
                if spec.noise_kind == HUBER:
                    report = learn(HuberSource(net, model, seed=int(ss[3])), cfg, net.dag)
                else:
                    report = learn(data, cfg, net.dag, in_place=True)
                learned, stack = report.final_net, report.stack
                iters, converged = len(report.iterations), report.converged
            m = evaluate(net, learned, spec.c, stack, held_out, spec.d_exact, probs)
            rows.append({"method": method, "eps": eps, "trial": trial, **m,
                         "iters": iters, "converged": converged})
        except Exception as exc:  # noqa: BLE001 - failures become marked rows
            rows.append({"method": method, "eps": eps, "trial": trial, "tv": float("nan"),
                         "cpt_l2": float("nan"), "iters": -1, "converged": False,
                         "clean_rej": float("nan"), "corrupt_rej": float("nan"),
                         "error": f"{type(exc).__name__}: {exc}"})
    return rows


def _run_one(args):
    spec, net, ei, t = args
    return run_trial(spec, net, ei, t)


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> tuple:
    """Run every (eps, trial) cell; returns (rows, summary)."""
    net = build_model(spec)
    tasks = [(spec, net, ei, t) for ei in range(len(spec.eps_grid)) for t in range(spec.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            chunks = list(pool.map(_run_one, tasks))
    else:
        chunks = [_run_one(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (spec.methods.index(r["method"]), r["eps"], r["trial"]))
    return rows, summarize(rows, spec, net)


def summarize(rows, spec: ExperimentSpec, net: BayesNet) -> dict:
    cells = {}
    for r in rows:
        cells.setdefault((r["method"], r["eps"]), []).append(r)
    summary = []
    for (method, eps), rs in cells.items():
        entry = {"method": method, "eps": eps, "trials": len(rs),
                 "failed": sum(1 for r in rs if "error" in r),
                 "converged": sum(1 for r in rs if r["converged"])}
        for key in METRICS:
            vals = np.array([r[key] for r in rs], dtype=float)
            vals = vals[np.isfinite(vals)]
            if vals.size:
                q1, med, q3 = np.percentile(vals, [25, 50, 75])
                entry[key] = {"median": med, "iqr": q3 - q1}
            else:
                entry[key] = {"median": None, "iqr": None}
        summary.append(entry)
    return {
        "spec": spec.__dict__,
        "min_config_prob": min_config_prob(net, d_exact=spec.d_exact) if net.d <= spec.d_exact else None,
        "cells": summary,
        "errors": [r["error"] for r in rows if "error" in r],
    }


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return fmt_float(v) if math.isfinite(v) else "nan"
    return str(v)


def write_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_cell(r[c]) for c in CSV_COLUMNS])
