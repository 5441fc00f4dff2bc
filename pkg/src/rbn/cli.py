"""Command-line entry point: ``rbn <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .bayesnet import (
    DEFAULT_D_EXACT,
    make_dag,
    min_config_prob,
    random_net,
    sample,
)
from .contamination import HUBER, corrupt_huber, corrupt_replacement
from .engine import ArraySource, EngineConfig, empirical_cpt, learn
from .errors import RbnError
from .experiments import ExperimentSpec, evaluate, run_experiment, write_csv
from .verify import run_all


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_gen_model(args):
    if not 0 <= args.c <= 0.5:
        raise RbnError("c must lie in [0, 0.5]")
    dag = make_dag(args.topology, args.d, args.fan_in, seed=args.seed)
    # Separate stream for the CPT so the topology does not shift it.
    cpt_seed = int(np.random.SeedSequence([args.seed, 1]).generate_state(1)[0])
    net = random_net(dag, args.c, seed=cpt_seed)
    _emit(io.dumps(io.model_to_dict(net)) + "\n", args.out)
    if args.d <= args.d_exact:
        print(f"min_config_prob {io.fmt_float(min_config_prob(net, d_exact=args.d_exact))}",
              file=sys.stderr)


def cmd_sample(args):
    net = io.load_model(args.model)
    _emit(io.dataset_to_text(sample(net, args.n, seed=args.seed)), args.out)


def cmd_corrupt(args):
    noise = io.load_noise(args.noise)
    if args.eps is not None:
        noise = type(noise)(noise.kind, args.eps, noise.adversary)
    net = io.load_model(args.model) if args.model else None
    if noise.kind == HUBER:
        if net is None or args.n is None:
            raise RbnError("huber_additive corruption needs --model and --n")
        data = corrupt_huber(net, args.n, noise, seed=args.seed)
    else:
        if not args.data:
            raise RbnError("tv_replacement corruption needs --data")
        clean = io.load_dataset(args.data)
        data = corrupt_replacement(clean, noise.eps, noise.adversary, seed=args.seed, net=net)
    _emit(io.dataset_to_text(data), args.out)


def cmd_learn(args):
    structure = io.load_model(args.model)
    # The learner only ever sees the samples, never the labels.
    xs = io.load_dataset(args.data).unlabeled().x
    if args.method == "mle":
        q, unseen = empirical_cpt(xs, structure.table)
        net = structure.with_cpt(np.clip(q, 1e-6, 1 - 1e-6))
        report = {"method": "mle", "unseen_configs": int(unseen.sum()), "samples": len(xs)}
    else:
        cfg = io.load_config(args.config) if args.config else EngineConfig(eps=args.eps)
        if args.eps is not None:
            cfg.eps = args.eps
        cfg.seed = args.seed
        if args.mode == "fresh":
            rep = learn(ArraySource(xs), cfg, structure.dag)
        else:
            rep = learn(xs, cfg, structure.dag, in_place=True)
        net = rep.final_net
        report = {
            "method": "filter", "mode": args.mode, "converged": rep.converged,
            "total_samples_drawn": rep.total_samples_drawn, "warnings": rep.warnings,
            "config": cfg.to_dict(), "iterations": [d.to_dict() for d in rep.iterations],
            "filters": io.stack_to_list(rep.stack),
        }
        for w in rep.warnings:
            logging.warning(w)
    _emit(io.dumps(io.model_to_dict(net)) + "\n", args.out)
    if args.report:
        Path(args.report).write_text(io.dumps(report) + "\n")


def cmd_eval(args):
    truth = io.load_model(args.model)
    learned = io.load_model(args.learned)
    stack = None
    if args.report:
        stack = io.stack_from_list(json.loads(Path(args.report).read_text()).get("filters", []))
    held_out = io.load_dataset(args.data) if args.data else None
    metrics = evaluate(truth, learned, args.c, stack, held_out, args.d_exact)
    _emit(io.dumps(metrics) + "\n", args.out)


def cmd_experiment(args):
    spec = ExperimentSpec.load(args.config)
    if args.seed is not None:
        spec.seed = args.seed
    if args.d_exact is not None:
        spec.d_exact = args.d_exact
    rows, summary = run_experiment(spec, jobs=args.jobs)
    prefix = Path(args.out)
    write_csv(rows, prefix.with_suffix(".csv"))
    prefix.with_suffix(".json").write_text(io.dumps(summary) + "\n")
    for e in summary["errors"]:
        logging.warning("trial failed: %s", e)


def cmd_verify(args):
    results = run_all(quick=args.quick)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rbn", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-model", help="random c-balanced network")
    g.add_argument("--topology", default="chain", choices=["empty", "chain", "tree", "random_dag"])
    g.add_argument("--fan-in", type=int, default=1)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--c", type=float, default=0.3)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--d-exact", type=int, default=DEFAULT_D_EXACT)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen_model)

    s = sub.add_parser("sample", help="draw clean samples")
    s.add_argument("--model", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sample)

    c = sub.add_parser("corrupt", help="apply a noise model")
    c.add_argument("--noise", required=True, help="noise spec JSON")
    c.add_argument("--model")
    c.add_argument("--data")
    c.add_argument("--n", type=int)
    c.add_argument("--eps", type=float)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(func=cmd_corrupt)

    lr = sub.add_parser("learn", help="estimate the CPT of a known structure")
    lr.add_argument("--model", required=True, help="model file supplying the structure")
    lr.add_argument("--data", required=True)
    lr.add_argument("--method", choices=["filter", "mle"], default="filter")
    lr.add_argument("--mode", choices=["in-place", "fresh"], default="in-place")
    lr.add_argument("--eps", type=float)
    lr.add_argument("--config", help="engine config JSON")
    lr.add_argument("--seed", type=int, default=0)
    lr.add_argument("--report", help="write diagnostics JSON here")
    lr.add_argument("--out")
    lr.set_defaults(func=cmd_learn)

    e = sub.add_parser("eval", help="compare a learned model against the truth")
    e.add_argument("--model", required=True)
    e.add_argument("--learned", required=True)
    e.add_argument("--data", help="labeled dataset for rejection rates")
    e.add_argument("--report", help="learn report holding the filters")
    e.add_argument("--c", type=float, default=0.3)
    e.add_argument("--d-exact", type=int, default=DEFAULT_D_EXACT)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    x = sub.add_parser("experiment", help="eps sweep from a spec file")
    x.add_argument("--config", required=True)
    x.add_argument("--out", required=True, help="output prefix for .csv and .json")
    x.add_argument("--seed", type=int)
    x.add_argument("--d-exact", type=int)
    x.add_argument("--jobs", type=int, default=1)
    x.set_defaults(func=cmd_experiment)

    v = sub.add_parser("verify", help="exhaustive lemma checks")
    v.add_argument("--quick", action="store_true")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "learn" and args.method == "filter" and args.eps is None and not args.config:
        print("rbn learn: --eps or --config is required for the filter method", file=sys.stderr)
        return 2
    try:
        return args.func(args) or 0
    except (RbnError, OSError, ValueError) as exc:
        print(f"rbn {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
