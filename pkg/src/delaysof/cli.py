"""Command line entry point.

Exit codes: 0 success, 2 negative result (not stabilized, unstable,
gradient mismatch, overflow), 1 operational failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench
from .config import RunConfig, load_config, parse_phi
from .exceptions import DelaySOFError, NonfiniteStateError
from .grad import gradient_error
from .model import InitialFunction, dump_system
from .sim import simulate, terminal_norm, write_csv
from .train import sample_initial_functions, synthesize
from .verify import is_stable

log = logging.getLogger("delaysof")

OK, OPERATIONAL, NEGATIVE = 0, 1, 2
GRAD_CHECK_TOL = 1e-4


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out) if args.out else (cfg.out or Path("out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _gain(cfg: RunConfig) -> np.ndarray:
    return cfg.gain if cfg.gain is not None else np.zeros(cfg.system.gain_shape)


def _train_cfg(args, cfg: RunConfig):
    train = cfg.train
    if args.seed is not None:
        train = replace(train, seed=args.seed)
    return train


def cmd_synthesize(args, cfg: RunConfig) -> int:
    out = _out_dir(args, cfg)
    train = _train_cfg(args, cfg)
    sys_ = cfg.system
    report = synthesize(sys_, train)
    _dump(report.to_dict(), out / "report.json")
    _dump({"stages": [{"stage": s.stage, "seconds": s.seconds} for s in report.stages],
           "total_seconds": report.seconds}, out / "timing.json")
    dump_system(out / "gain.json", sys_, report.gain)
    phi = sample_initial_functions(sys_.n, sys_.h, train.J, train.seed, train.sampler)[0]
    for rec in report.stages:
        try:
            traj = simulate(sys_, rec.gain, phi, train.T, train.r)
        except NonfiniteStateError as exc:
            log.warning("stage %d trajectory not exported: %s", rec.stage, exc)
            continue
        write_csv(traj, out / f"stage_{rec.stage:02d}.csv")
    print(json.dumps({"success": report.success, "stage": report.terminated_at_stage,
                      "gain": report.gain.tolist()}))
    return OK if report.success else NEGATIVE


def cmd_verify(args, cfg: RunConfig) -> int:
    margin = cfg.verify.get("margin", cfg.train.verify_margin)
    stable, report = is_stable(cfg.system, _gain(cfg), margin)
    doc = report.to_dict()
    print(json.dumps(doc))
    if args.out:
        _dump(doc, _out_dir(args, cfg) / "verify.json")
    return OK if stable else NEGATIVE


def cmd_simulate(args, cfg: RunConfig) -> int:
    out = _out_dir(args, cfg)
    sys_ = cfg.system
    opts = cfg.simulate
    T = float(opts.get("T", cfg.train.T))
    r = int(opts.get("r", cfg.train.r))
    if "phi" in opts:
        phi = parse_phi(opts["phi"], sys_.h)
    else:
        phi = InitialFunction.constant(np.ones(sys_.n) / np.sqrt(sys_.n), sys_.h)
    try:
        traj = simulate(sys_, _gain(cfg), phi, T, r)
    except NonfiniteStateError as exc:
        print(json.dumps({"overflow_time": exc.time}))
        return NEGATIVE
    write_csv(traj, out / "trajectory.csv")
    print(json.dumps({"T": T, "T_end": traj.T_end, "terminal_norm": terminal_norm(traj, T)}))
    return OK


def cmd_grad_check(args, cfg: RunConfig) -> int:
    opts = cfg.grad_check
    count = int(args.count or opts.get("count", 5))
    T = float(opts.get("T", 2.0))
    r = int(opts.get("r", cfg.train.r))
    eps = float(opts.get("eps", 1e-5))
    rng = np.random.default_rng(args.seed or 0)
    cases = []
    worst = 0.0
    for i in range(count):
        if cfg.system is not None:
            sys_ = cfg.system
        else:
            sys_ = bench.random_system(2, 2, 2, 0.5, int(rng.integers(2**32)))
        K = cfg.gain if cfg.gain is not None else rng.uniform(-1, 1, sys_.gain_shape)
        v = rng.standard_normal(sys_.n)
        phi = InitialFunction.constant(v / np.linalg.norm(v), sys_.h)
        err, res, _ = gradient_error(sys_, K, phi, T, r, eps)
        skipped = res.loss < 1e-3 or res.aborted > 0
        if not skipped:
            worst = max(worst, err)
        cases.append({"case": i, "loss": res.loss, "rel_error": err, "skipped": skipped})
    doc = {"max_rel_error": worst, "tolerance": GRAD_CHECK_TOL, "cases": cases}
    print(json.dumps(doc))
    if args.out:
        _dump(doc, _out_dir(args, cfg) / "grad_check.json")
    return OK if worst < GRAD_CHECK_TOL else NEGATIVE


def cmd_benchmark(args, cfg: RunConfig) -> int:
    out = _out_dir(args, cfg)
    opts = cfg.benchmark
    key = int(args.scenario or opts.get("scenario", 1))
    if key not in bench.SCENARIOS:
        raise DelaySOFError(f"unknown scenario {key}; choose from {sorted(bench.SCENARIOS)}")
    base = bench.SCENARIOS[key]
    count = int(args.count or opts.get("count", base.count))
    sc = bench.Scenario(base.n, base.m, base.p, base.h, count)
    base_seed = args.seed if args.seed is not None else int(opts.get("base_seed", 0))
    summary = bench.run_scenario(sc, cfg.train, base_seed)
    bench.write_json(summary, out / "benchmark.json", timing=False)
    _dump({"mean_seconds": summary.mean_seconds, "median_seconds": summary.median_seconds,
           "seconds": [r.seconds for r in summary.records]}, out / "timing.json")
    bench.write_csv(summary, out / "benchmark.csv")
    print(json.dumps({"scenario": key, "count": count, "frequency": summary.frequency,
                      "mean_stages_successes": summary.mean_stages,
                      "median_seconds": summary.median_seconds}))
    return OK


COMMANDS = {
    "simulate": (cmd_simulate, True),
    "grad-check": (cmd_grad_check, False),
    "synthesize": (cmd_synthesize, True),
    "verify": (cmd_verify, True),
    "benchmark": (cmd_benchmark, False),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="delaysof", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="seed override (u64)")
        p.add_argument("--scenario", type=int, choices=sorted(bench.SCENARIOS))
        p.add_argument("--count", type=int)
        p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    func, needs_system = COMMANDS[args.command]
    try:
        if args.config:
            cfg = load_config(args.config, require_system=needs_system)
        elif needs_system:
            raise DelaySOFError(f"{args.command} requires --config with a 'system' source")
        else:
            cfg = RunConfig()
        level = max(args.verbose, cfg.verbosity)
        logging.basicConfig(level=logging.WARNING - 10 * min(level, 2), format="%(name)s: %(message)s")
        return func(args, cfg)
    except (DelaySOFError, OSError, ValueError) as exc:
        print(f"delaysof {args.command}: {exc}", file=sys.stderr)
        return OPERATIONAL


if __name__ == "__main__":
    sys.exit(main())
