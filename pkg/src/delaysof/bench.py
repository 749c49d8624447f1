"""Random-plant sweeps: success frequency and timing of the gain synthesis."""

from __future__ import annotations

import csv
import json
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import DelaySystem
from .train import TrainConfig, TrainReport, synthesize
from .verify import is_stable


@dataclass(frozen=True)
class Scenario:
    n: int
    m: int
    p: int
    h: float
    count: int = 100

    def __post_init__(self):
        if min(self.n, self.m, self.p, self.count) < 1:
            raise ValueError("dimensions and count must be >= 1")
        if not self.h > 0:
            raise ValueError("delay must be positive")


SCENARIOS = {
    1: Scenario(4, 1, 2, 0.1),
    2: Scenario(4, 2, 1, 0.1),
}


@dataclass(frozen=True)
class BenchmarkRecord:
    seed: int
    openloop_abscissa: float
    success: bool
    stages: int
    seconds: float
    gain: np.ndarray
    final_abscissa: float
    reverified: bool = False

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "seed": self.seed,
            "openloop_abscissa": self.openloop_abscissa,
            "success": self.success,
            "stages": self.stages,
            "gain": self.gain.tolist(),
            "final_abscissa": self.final_abscissa,
            "reverified": self.reverified,
        }
        if timing:
            d["seconds"] = self.seconds
        return d


@dataclass(frozen=True)
class BenchmarkSummary:
    scenario: Scenario
    records: tuple[BenchmarkRecord, ...]
    frequency: float
    mean_seconds: float
    median_seconds: float
    mean_stages: float | None
    extra: dict = field(default_factory=dict)

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "scenario": {"n": self.scenario.n, "m": self.scenario.m, "p": self.scenario.p,
                         "h": self.scenario.h, "count": self.scenario.count},
            "frequency": self.frequency,
            "mean_stages_successes": self.mean_stages,
            "records": [r.to_dict(timing) for r in self.records],
        }
        if timing:
            d["mean_seconds"] = self.mean_seconds
            d["median_seconds"] = self.median_seconds
        return d


def random_system(n: int, m: int, p: int, h: float, seed: int) -> DelaySystem:
    """A, B, C with i.i.d. standard normal entries."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, m))
    C = rng.standard_normal((p, n))
    return DelaySystem(A, B, C, h)


def run_scenario(
    sc: Scenario,
    cfg: TrainConfig = TrainConfig(),
    base_seed: int = 0,
    system_factory: Callable[[int], DelaySystem] | None = None,
    synthesizer: Callable[[DelaySystem, TrainConfig], TrainReport] = synthesize,
) -> BenchmarkSummary:
    """Synthesize a gain for ``sc.count`` plants drawn with seeds base_seed, base_seed+1, ...

    ``system_factory`` replaces the random plant generator and ``synthesizer``
    the learning routine; both are seams for injected cases and alternative
    methods.
    """
    if system_factory is None:
        def system_factory(seed):
            return random_system(sc.n, sc.m, sc.p, sc.h, seed)

    records = []
    for i in range(sc.count):
        seed = base_seed + i
        sys = system_factory(seed)
        _, openloop = is_stable(sys, np.zeros(sys.gain_shape), cfg.verify_margin)
        start = time.perf_counter()
        try:
            report = synthesizer(sys, cfg)
            gain, stages, success = report.gain, report.terminated_at_stage, report.success
        except Exception:  # one broken plant must not sink the sweep
            gain, stages, success = np.zeros(sys.gain_shape), 0, False
        seconds = time.perf_counter() - start
        stable, final = is_stable(sys, gain, cfg.verify_margin)
        records.append(BenchmarkRecord(
            seed=seed,
            openloop_abscissa=openloop.abscissa,
            success=bool(success),
            stages=stages,
            seconds=seconds,
            gain=gain,
            final_abscissa=final.abscissa,
            reverified=bool(stable),
        ))

    times = [r.seconds for r in records]
    won = [r.stages for r in records if r.success]
    return BenchmarkSummary(
        scenario=sc,
        records=tuple(records),
        frequency=len(won) / len(records),
        mean_seconds=statistics.fmean(times),
        median_seconds=statistics.median(times),
        mean_stages=statistics.fmean(won) if won else None,
    )


CSV_HEADER = ["seed", "openloop_abscissa", "success", "stages", "seconds", "final_abscissa"]


def write_csv(summary: BenchmarkSummary, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for r in summary.records:
            w.writerow([r.seed, f"{r.openloop_abscissa:.17g}", int(r.success), r.stages,
                        f"{r.seconds:.6f}", f"{r.final_abscissa:.17g}"])


def write_json(summary: BenchmarkSummary, path, timing: bool = True) -> None:
    with open(path, "w") as fh:
        json.dump(summary.to_dict(timing), fh, indent=2)
        fh.write("\n")
