"""Side-by-side runs of one scenario under different gain modes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..controller import GainMode, parse_mode
from .loop import run_closed_loop
from .metrics import RunMetrics, compute_metrics, program_windows
from .scenario import Scenario


@dataclass(frozen=True)
class ModeResult:
    mode: str
    metrics: RunMetrics


@dataclass(frozen=True)
class Comparison:
    results: tuple[ModeResult, ...]

    def __getitem__(self, mode: str) -> RunMetrics:
        for r in self.results:
            if r.mode == mode:
                return r.metrics
        raise KeyError(mode)

    def table(self, cores: Sequence[int] | None = None) -> str:
        head = f"{'mode':<16}{'core':>5}{'settle':>8}{'overshoot_k':>13}{'settled_rms_k':>15}{'post_os_mean_k':>16}"
        lines = [head]
        for res in self.results:
            for c in res.metrics.cores:
                if cores is not None and c.core not in cores:
                    continue
                lines.append(
                    f"{res.mode:<16}{c.core:>5}{_s(c.settling_cycle):>8}{_s(c.peak_overshoot_k):>13}"
                    f"{_s(c.post_settling_rms_k):>15}{_s(c.post_overshoot_mean_k):>16}"
                )
        return "\n".join(lines) + "\n"


def _s(x) -> str:
    if x is None:
        return "-"
    return f"{x:.4g}" if isinstance(x, float) else str(x)


def compare_modes(scenario: Scenario, modes: Sequence[GainMode | str]) -> Comparison:
    """Run the scenario once per mode; traces and seeds are shared."""
    if len(modes) < 2:
        raise ValueError("compare_modes needs at least two modes")
    results = []
    windows = program_windows(scenario)
    for mode in modes:
        m = parse_mode(mode) if isinstance(mode, str) else mode
        records = run_closed_loop(scenario.replace(mode=m))
        results.append(ModeResult(str(m), compute_metrics(records, until_ms=windows)))
    return Comparison(tuple(results))
