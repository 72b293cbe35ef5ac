"""Synthetic activity-factor traces.

A trace is a contiguous run of segments, each constant, noisy or a linear
ramp.  Noise is a pure function of (seed, segment, sample index), so a trace
can be sampled in any order and always returns the same value.  Noise
samples are spaced NOISE_PERIOD apart, much finer than the integrator
substep; the plant sees the exact average of the trace over each substep.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError, DomainError

#: Spacing of independent noise samples, seconds.
NOISE_PERIOD = 1e-6

IDLE_ALPHA = 0.005
COMPUTE_ALPHA = 0.10
#: Memory-bound fetch: cooler than compute but well above idle; stays below
#: setpoint even at 4.7 GHz with default plant constants.
MEMORY_ALPHA = 0.06


@dataclass(frozen=True)
class Constant:
    level: float


@dataclass(frozen=True)
class Noisy:
    """Uniform noise on [mean - amplitude, mean + amplitude]."""

    mean: float
    amplitude: float


@dataclass(frozen=True)
class Ramp:
    start: float
    end: float


SegmentKind = Union[Constant, Noisy, Ramp]


@dataclass(frozen=True)
class Segment:
    start: float
    kind: SegmentKind


def _bounds(kind: SegmentKind) -> tuple[float, float]:
    if isinstance(kind, Constant):
        return kind.level, kind.level
    if isinstance(kind, Noisy):
        if kind.amplitude < 0.0:
            raise ConfigError("noise amplitude must be >= 0")
        return kind.mean - kind.amplitude, kind.mean + kind.amplitude
    return min(kind.start, kind.end), max(kind.start, kind.end)


@dataclass(frozen=True)
class ActivityTrace:
    segments: tuple[Segment, ...]
    duration: float
    seed: int = 0
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise ConfigError("trace needs at least one segment")
        if self.segments[0].start != 0.0:
            raise ConfigError("first segment must start at t=0")
        starts = [s.start for s in self.segments]
        if any(b <= a for a, b in zip(starts, starts[1:])) or starts[-1] >= self.duration:
            raise ConfigError("segment starts must increase strictly and lie before the duration")
        for seg in self.segments:
            lo, hi = _bounds(seg.kind)
            if lo < 0.0 or hi > 1.0:
                raise ConfigError(f"segment at t={seg.start} can leave [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def segment_end(self, index: int) -> float:
        if index + 1 < len(self.segments):
            return self.segments[index + 1].start
        return self.duration

    def segment_index(self, t: float) -> int:
        idx = 0
        for i, seg in enumerate(self.segments):
            if seg.start <= t:
                idx = i
        return idx


_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix(x: np.ndarray) -> np.ndarray:
    # splitmix64 finaliser
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def uniforms(seed: int, segment: int, samples: np.ndarray) -> np.ndarray:
    """Counter-based uniforms in [0, 1) for the given sample indices."""
    with np.errstate(over="ignore"):
        key = _mix(np.array([seed], dtype=np.uint64) + _GOLDEN * np.uint64(segment + 1))
        x = _mix(key ^ (np.asarray(samples, dtype=np.uint64) * _GOLDEN))
    return (x >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def _sample_index(t: float, start: float) -> int:
    # the tiny epsilon keeps sample boundaries stable against float error in t
    return int(math.floor((t - start) / NOISE_PERIOD + 1e-6))


def activity_at(trace: ActivityTrace, t: float) -> float:
    if not 0.0 <= t <= trace.duration:
        raise DomainError(f"t={t!r} outside trace [0, {trace.duration}]")
    idx = trace.segment_index(t)
    seg = trace.segments[idx]
    kind = seg.kind
    if isinstance(kind, Constant):
        return kind.level
    if isinstance(kind, Ramp):
        frac = (t - seg.start) / (trace.segment_end(idx) - seg.start)
        return kind.start + (kind.end - kind.start) * frac
    u = uniforms(trace.seed, idx, np.array([_sample_index(t, seg.start)]))[0]
    return kind.mean + kind.amplitude * (2.0 * float(u) - 1.0)


@functools.lru_cache(maxsize=64)
def _noise_cumsum(seed: int, segment: int, n_samples: int, mean: float, amplitude: float) -> np.ndarray:
    """cum[k] = sum of the first k sample values of a noisy segment."""
    u = uniforms(seed, segment, np.arange(n_samples))
    cum = np.empty(n_samples + 1)
    cum[0] = 0.0
    np.cumsum(mean + amplitude * (2.0 * u - 1.0), out=cum[1:])
    return cum


def _integral(trace: ActivityTrace, t: np.ndarray, after_end: float) -> np.ndarray:
    """Integral of the activity from 0 to each t (alpha * seconds)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for i, seg in enumerate(trace.segments):
        s0, s1 = seg.start, trace.segment_end(i)
        local = np.clip(t, s0, s1) - s0
        kind = seg.kind
        if isinstance(kind, Constant):
            out += kind.level * local
        elif isinstance(kind, Ramp):
            span = s1 - s0
            out += kind.start * local + 0.5 * (kind.end - kind.start) * local * local / span
        else:
            n_samples = int(math.ceil((s1 - s0) / NOISE_PERIOD - 1e-6))
            cum = _noise_cumsum(trace.seed, i, n_samples, kind.mean, kind.amplitude)
            pos = local / NOISE_PERIOD
            k = np.minimum(np.floor(pos + 1e-6).astype(np.int64), n_samples)
            frac = np.clip(pos - k, 0.0, None)
            nxt = np.minimum(k, n_samples - 1)
            values = kind.mean + kind.amplitude * (2.0 * uniforms(trace.seed, i, nxt) - 1.0)
            out += (cum[k] + np.where(k < n_samples, frac * values, 0.0)) * NOISE_PERIOD
    out += after_end * np.clip(t - trace.duration, 0.0, None)
    return out


PRESETS = ("steady", "volatile", "fetch_then_compute", "phased")


def preset(name: str, seed: int = 0) -> ActivityTrace:
    """Phase structures loosely shaped after four PARSEC programs.

    steady: blackscholes-like constant load for 400 ms.
    volatile: swaptions-like rapidly varying load.
    fetch_then_compute: facesim-like idle data fetch for 250 ms, then compute.
    phased: fluidanimate-like, an idle fetch before 80 ms and a memory-bound
    fetch in 400-500 ms.
    """
    if name == "steady":
        segs = [Segment(0.0, Constant(COMPUTE_ALPHA))]
        duration = 0.4
    elif name == "volatile":
        segs = [Segment(0.0, Noisy(COMPUTE_ALPHA, 0.06))]
        duration = 0.7
    elif name == "fetch_then_compute":
        segs = [Segment(0.0, Constant(IDLE_ALPHA)), Segment(0.25, Noisy(COMPUTE_ALPHA, 0.02))]
        duration = 0.7
    elif name == "phased":
        segs = [
            Segment(0.0, Constant(IDLE_ALPHA)),
            Segment(0.08, Noisy(COMPUTE_ALPHA, 0.05)),
            Segment(0.4, Constant(MEMORY_ALPHA)),
            Segment(0.5, Noisy(COMPUTE_ALPHA, 0.05)),
        ]
        duration = 0.7
    else:
        raise ConfigError(f"unknown workload preset {name!r}; expected one of {', '.join(PRESETS)}")
    return ActivityTrace(tuple(segs), duration, seed, name)


def constant_trace(level: float, duration: float, seed: int = 0) -> ActivityTrace:
    return ActivityTrace((Segment(0.0, Constant(level)),), duration, seed, f"constant:{level:g}")


@dataclass(frozen=True)
class TabulatedTrace:
    """Activity read from a file, linearly interpolated between rows."""

    times: tuple[float, ...]
    alphas: tuple[float, ...]
    name: str = ""

    @property
    def duration(self) -> float:
        return self.times[-1]


def load_trace(path: str | Path) -> TabulatedTrace:
    """Read ``t_seconds,alpha`` rows after a single header line."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read trace {path}: {exc}") from exc
    body = [r for r in rows[1:] if r and any(cell.strip() for cell in r)]
    if len(body) < 2:
        raise ConfigError(f"{path}: need a header and at least two rows")
    try:
        data = np.array([[float(r[0]), float(r[1])] for r in body])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed row ({exc})") from exc
    times, alphas = data[:, 0], data[:, 1]
    if times[0] != 0.0 or np.any(np.diff(times) <= 0.0):
        raise ConfigError(f"{path}: times must start at 0 and increase strictly")
    if np.any(alphas < 0.0) or np.any(alphas > 1.0):
        raise ConfigError(f"{path}: activity values must lie in [0, 1]")
    return TabulatedTrace(tuple(times.tolist()), tuple(alphas.tolist()), path.stem)


def _tab_integral(trace: TabulatedTrace, t: np.ndarray, after_end: float) -> np.ndarray:
    xs = np.array(trace.times)
    ys = np.array(trace.alphas)
    knots = np.concatenate([[0.0], np.cumsum(0.5 * (ys[1:] + ys[:-1]) * np.diff(xs))])
    tc = np.clip(t, 0.0, xs[-1])
    k = np.clip(np.searchsorted(xs, tc, side="right") - 1, 0, len(xs) - 2)
    y_at = np.interp(tc, xs, ys)
    out = knots[k] + 0.5 * (ys[k] + y_at) * (tc - xs[k])
    return out + after_end * np.clip(t - xs[-1], 0.0, None)


Trace = Union[ActivityTrace, TabulatedTrace]


def sample(trace: Trace, t: float) -> float:
    if isinstance(trace, TabulatedTrace):
        if not 0.0 <= t <= trace.duration:
            raise DomainError(f"t={t!r} outside trace [0, {trace.duration}]")
        return float(np.interp(t, trace.times, trace.alphas))
    return activity_at(trace, t)


def mean_activity(trace: Trace, starts, width: float, *, after_end: float = 0.0) -> np.ndarray:
    """Average activity over [s, s + width) for each start s.

    A program that has finished contributes ``after_end`` past its duration.
    """
    starts = np.asarray(starts, dtype=float)
    if not width > 0.0:
        raise DomainError("averaging width must be > 0")
    integ = _tab_integral if isinstance(trace, TabulatedTrace) else _integral
    ends = integ(trace, starts + width, after_end)
    return (ends - integ(trace, starts, after_end)) / width


class ActivitySource:
    """Per-core activity for the integrator: one row of means per substep."""

    def __init__(self, traces: Sequence[Trace], after_end: float = 0.0) -> None:
        self.traces = list(traces)
        self.after_end = after_end

    def __call__(self, starts: np.ndarray, width: float) -> np.ndarray:
        cols = [mean_activity(tr, starts, width, after_end=self.after_end) for tr in self.traces]
        return np.clip(np.column_stack(cols), 0.0, 1.0)
