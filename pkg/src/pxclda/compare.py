"""Density differences, the normalized squared-difference metric, and eta_c calibration."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .fields import ScalarField, check_same_grid, integrate

log = logging.getLogger(__name__)


class MetricUndefinedError(ValueError):
    pass


class FlatScanError(RuntimeError):
    pass


class CalibrationError(RuntimeError):
    """A runner invocation failed mid-scan; ``trace`` holds completed stages."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


def delta_rho(rho_in: ScalarField, rho_out: ScalarField) -> ScalarField:
    """In-cavity minus cavity-free density."""
    grid = check_same_grid(rho_in, rho_out)
    for name, r in (("rho_in", rho_in), ("rho_out", rho_out)):
        if r.values.min() < -1e-12:
            raise ValueError(f"{name} has negative entries")
    return ScalarField(grid, rho_in.values - rho_out.values)


@dataclass(frozen=True)
class DensityPair:
    rho_in: ScalarField
    rho_out: ScalarField

    def __post_init__(self):
        check_same_grid(self.rho_in, self.rho_out)

    @property
    def delta(self) -> ScalarField:
        return delta_rho(self.rho_in, self.rho_out)


def i_metric(a: ScalarField, b: ScalarField) -> float:
    """``int (a - b)^2 / (int a^2 + int b^2)``, in [0, 2].

    0 means identical fields, 1 means no overlap, 2 means ``b = -a``.
    """
    check_same_grid(a, b)
    num = integrate(ScalarField(a.grid, (a.values - b.values) ** 2))
    den = integrate(ScalarField(a.grid, a.values**2)) + integrate(ScalarField(a.grid, b.values**2))
    if den == 0.0:
        raise MetricUndefinedError("I is undefined when both fields vanish identically")
    return num / den


@dataclass
class ScanOptions:
    eta_min: float = 0.0
    eta_max: float = 1.5
    step: float = 0.1
    max_stages: int = 4
    rel_improvement: float = 1e-3
    half_width_steps: int = 5

    def __post_init__(self):
        if not 0 <= self.eta_min < self.eta_max:
            raise ValueError("scan range must satisfy 0 <= eta_min < eta_max")
        if not self.step > 0:
            raise ValueError("scan step must be positive")
        if self.max_stages < 1:
            raise ValueError("need at least one scan stage")


@dataclass
class ScanStage:
    stage: int
    step: float
    etas: list[float]
    values: list[float]

    @property
    def best(self) -> tuple[float, float]:
        i = int(np.argmin(self.values))
        return self.etas[i], self.values[i]


@dataclass
class CalibrationResult:
    scan: list[tuple[float, float]]
    eta_star: float
    i_star: float
    refinement_trace: list[ScanStage] = field(default_factory=list)

    @property
    def final_step(self) -> float:
        return self.refinement_trace[-1].step


def _grid(lo: float, hi: float, step: float) -> list[float]:
    n = int(math.floor((hi - lo) / step + 1e-9))
    return [round(lo + k * step, 12) for k in range(n + 1)]


def _window(center: float, step: float, half: int, lo: float, hi: float) -> list[float]:
    pts = (round(center + k * step, 12) for k in range(-half, half + 1))
    return [p for p in pts if lo - 1e-12 <= p <= hi + 1e-12]


def calibrate_eta(reference: DensityPair | ScalarField,
                  runner: Callable[[float], DensityPair | ScalarField],
                  opts: ScanOptions | None = None,
                  map_fn: Callable = map) -> CalibrationResult:
    """Find the eta_c minimizing I between reference and runner density differences.

    Stage 1 evaluates I on a linear grid over ``[eta_min, eta_max]``. Stage 2
    rescans around the coarse minimum eta0 with step ``0.1 * eta0`` over
    ``eta0 +- 0.5 eta0``. Later stages shrink the step tenfold around the
    current minimum, continuing while the best I improves by more than
    ``rel_improvement`` (relative), up to ``max_stages`` stages in total.

    ``runner(eta)`` returns the solver's DensityPair (or its delta) at that
    eta; results are cached by eta so repeated points cost nothing.
    ``map_fn`` can dispatch one stage's runner calls concurrently; the trace
    is still assembled in eta order.
    """
    opts = opts or ScanOptions()
    ref_delta = reference.delta if isinstance(reference, DensityPair) else reference
    if not np.any(ref_delta.values):
        raise MetricUndefinedError("reference density difference is identically zero")
    cache: dict[float, float] = {}
    stages: list[ScanStage] = []

    def evaluate(etas: Iterable[float]) -> list[float]:
        todo = [e for e in etas if e not in cache]

        def one(eta):
            out = runner(eta)
            delta = out.delta if isinstance(out, DensityPair) else out
            return i_metric(ref_delta, delta)

        try:
            for eta, val in zip(todo, map_fn(one, todo)):
                cache[eta] = val
                log.info("eta_c=%.12g  I=%.12g", eta, val)
        except Exception as exc:
            raise CalibrationError(f"runner failed during calibration: {exc}", stages) from exc
        return [cache[e] for e in etas]

    etas = _grid(opts.eta_min, opts.eta_max, opts.step)
    stages.append(ScanStage(1, opts.step, etas, evaluate(etas)))
    vals = stages[0].values
    if max(vals) - min(vals) < 1e-12:
        raise FlatScanError("reference insensitive to eta_c: I is flat over the coarse scan")

    best_eta, best_i = stages[0].best
    step = 0.1 * best_eta if best_eta > 0 else 0.1 * opts.step
    while len(stages) < opts.max_stages:
        etas = _window(best_eta, step, opts.half_width_steps, opts.eta_min, opts.eta_max)
        stage = ScanStage(len(stages) + 1, step, etas, evaluate(etas))
        stages.append(stage)
        new_eta, new_i = stage.best
        if new_i > best_i:
            new_eta, new_i = best_eta, best_i
        improvement = (best_i - new_i) / best_i if best_i > 0 else 0.0
        best_eta, best_i = new_eta, new_i
        if improvement <= opts.rel_improvement:
            break
        step *= 0.1

    scan = sorted(cache.items())
    i_star = min(v for _, v in scan)
    eta_star = min(e for e, v in scan if v == i_star)
    return CalibrationResult(scan, eta_star, i_star, stages)
