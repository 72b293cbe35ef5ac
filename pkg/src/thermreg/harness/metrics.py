"""Tracking-quality metrics over logged cycles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .loop import CycleRecord

SETTLE_BAND_K = 0.5
SETTLE_RUN = 5
#: Errors below this are numerically converged and excluded from contraction ratios.
CONTRACTION_FLOOR_K = 1e-6


@dataclass(frozen=True)
class CoreMetrics:
    core: int
    n_cycles: int
    peak_overshoot_k: float | None  # max temperature above setpoint before overshoot end
    overshoot_end_cycle: int | None
    post_overshoot_mean_k: float | None
    post_overshoot_rms_k: float | None  # RMS of (T - setpoint) over the same window
    settling_cycle: int | None
    post_settling_rms_k: float | None
    contraction: float | None  # largest |e_n| / |e_{n-1}| after settling


@dataclass(frozen=True)
class RunMetrics:
    cores: tuple[CoreMetrics, ...]

    def core(self, index: int) -> CoreMetrics:
        return next(c for c in self.cores if c.core == index)


def overshoot_end(temps: Sequence[float], setpoint: float) -> int | None:
    """0-based index of the first return to <= setpoint after first reaching it."""
    above = None
    for i, t in enumerate(temps):
        if above is None:
            if t >= setpoint:
                above = i
        elif t <= setpoint:
            return i
    return None


def settling_index(errors: Sequence[float], band: float = SETTLE_BAND_K, run: int = SETTLE_RUN) -> int | None:
    """0-based start of the first window of ``run`` cycles with |e| < band."""
    streak = 0
    for i, e in enumerate(errors):
        streak = streak + 1 if abs(e) < band else 0
        if streak == run:
            return i - run + 1
    return None


def contraction_factor(errors: Sequence[float], *, floor: float = CONTRACTION_FLOOR_K) -> float | None:
    """Largest successive error ratio while the previous error exceeds ``floor``."""
    ratios = [
        abs(e1) / abs(e0)
        for e0, e1 in zip(errors, errors[1:])
        if abs(e0) > floor
    ]
    return max(ratios) if ratios else None


def contraction_after(errors: Sequence[float], threshold: float, *, floor: float = CONTRACTION_FLOOR_K) -> float | None:
    """Contraction factor from the first cycle with |e| < threshold onward."""
    start = next((i for i, e in enumerate(errors) if abs(e) < threshold), None)
    if start is None:
        return None
    return contraction_factor(list(errors[start:]), floor=floor)


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(x * x)))


def core_metrics(records: Sequence[CycleRecord], core: int, *, until_ms: float | None = None) -> CoreMetrics:
    rows = [r for r in records if r.core == core and (until_ms is None or r.time_ms <= until_ms + 1e-9)]
    if not rows:
        raise ValueError(f"no records for core {core}")
    temps = np.array([r.temp_k for r in rows])
    errors = np.array([r.error_k for r in rows])
    setpoint = float(temps[0] + errors[0])
    cycles = [r.cycle for r in rows]

    end = overshoot_end(temps, setpoint)
    peak = mean = rms_os = None
    if end is not None:
        peak = float(np.max(temps[:end]) - setpoint)
        window = temps[end:]
        mean = float(np.mean(window))
        rms_os = _rms(window - setpoint)

    settle = settling_index(errors)
    rms_settle = gamma = None
    if settle is not None:
        rms_settle = _rms(temps[settle:] - setpoint)
        gamma = contraction_factor(list(errors[settle:]))
    return CoreMetrics(
        core=core,
        n_cycles=len(rows),
        peak_overshoot_k=peak,
        overshoot_end_cycle=cycles[end] if end is not None else None,
        post_overshoot_mean_k=mean,
        post_overshoot_rms_k=rms_os,
        settling_cycle=cycles[settle] if settle is not None else None,
        post_settling_rms_k=rms_settle,
        contraction=gamma,
    )


def compute_metrics(records: Sequence[CycleRecord], *, until_ms: dict[int, float] | None = None) -> RunMetrics:
    """Per-core metrics; ``until_ms`` truncates a core's window (e.g. a program that ends early)."""
    if not records:
        raise ValueError("no records")
    cores = sorted({r.core for r in records})
    limits = until_ms or {}
    return RunMetrics(tuple(core_metrics(records, c, until_ms=limits.get(c)) for c in cores))


def program_windows(scenario) -> dict[int, float]:
    """Metric window per core: the program's duration, capped at the run length."""
    run_ms = scenario.n_cycles * scenario.cycle_length * 1000.0
    out = {}
    for j, core in enumerate(scenario.cores):
        dur_ms = core.workload.duration * 1000.0
        if dur_ms < run_ms - 1e-6:
            out[j] = dur_ms
    return out


def format_metrics(metrics: RunMetrics) -> str:
    def fmt(x) -> str:
        if x is None:
            return "n/a"
        if isinstance(x, float):
            return "inf" if math.isinf(x) else f"{x:.6g}"
        return str(x)

    lines = []
    for c in metrics.cores:
        lines.append(f"core {c.core}:")
        lines.append(f"  cycles                 {c.n_cycles}")
        lines.append(f"  peak_overshoot_k       {fmt(c.peak_overshoot_k)}")
        lines.append(f"  overshoot_end_cycle    {fmt(c.overshoot_end_cycle)}")
        lines.append(f"  post_overshoot_mean_k  {fmt(c.post_overshoot_mean_k)}")
        lines.append(f"  post_overshoot_rms_k   {fmt(c.post_overshoot_rms_k)}")
        lines.append(f"  settling_cycle         {fmt(c.settling_cycle)}")
        lines.append(f"  post_settling_rms_k    {fmt(c.post_settling_rms_k)}")
        lines.append(f"  contraction            {fmt(c.contraction)}")
    return "\n".join(lines) + "\n"
