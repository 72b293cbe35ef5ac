"""Closed-loop cycle driver.

Cycle n (numbered from 1) spans [(n-1) L, n L).  The frequency chosen at the
previous boundary is held for the whole cycle; the end-of-cycle temperature
is the plant output, and the error, derivative and gain computed from it
produce the command for cycle n+1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..calibration import assemble_jacobian, finite_diff_coupling
from ..controller import (
    Adaptive,
    ControllerState,
    Fixed,
    PlantMeasurement,
    adaptive_gain,
    control_update,
    dtemp_dfreq,
    error,
    mimo_gain,
    mimo_update,
)
from ..errors import RunawayProximityError, SingularGainError, ThermalRunaway
from ..plant import ThermalState, integrate
from ..workload import ActivitySource
from .scenario import Scenario


@dataclass(frozen=True)
class CycleRecord:
    cycle: int
    time_ms: float  # end of the cycle, when the temperature is sampled
    core: int
    freq_ghz: float  # frequency applied during the cycle
    volts: float
    alpha: float  # mean over the cycle
    p_dyn_w: float  # end of cycle
    p_sta_w: float  # end of cycle
    temp_k: float  # end of cycle
    error_k: float
    gain_ghz_per_k: float  # gain used to compute the next command
    deriv_k_per_ghz: float

    @property
    def p_total_w(self) -> float:
        return self.p_sta_w + self.p_dyn_w


class RunawayAbort(ThermalRunaway):
    """Raised when the plant runs away mid-run; carries the records so far."""

    def __init__(self, cause: ThermalRunaway, records: list[CycleRecord], cycle: int) -> None:
        super().__init__(f"cycle {cycle}: {cause}", core=cause.core)
        self.records = records
        self.cycle = cycle

    def report(self) -> str:
        core = "unknown" if self.core is None else str(self.core)
        return (
            f"thermal runaway during cycle {self.cycle} on core {core}\n"
            f"completed cycles: {self.cycle - 1}\n"
            f"detail: {self.args[0]}\n"
        )


@dataclass
class RunResult:
    records: list[CycleRecord]
    # per-cycle assembled Jacobians, only for centralized runs or when requested
    jacobians: list[np.ndarray]


def _gain_for(mode, deriv: float) -> float:
    if isinstance(mode, Fixed):
        return mode.gain
    return adaptive_gain(deriv)


def simulate(
    scenario: Scenario,
    *,
    coupling_sens: np.ndarray | None = None,
    keep_jacobians: bool = False,
) -> RunResult:
    """Run the closed loop and keep optional diagnostics.

    ``coupling_sens`` is the dT_i/dT_j matrix used to assemble the Jacobian;
    it is estimated from the scenario's plant when needed and not given.
    """
    chip = scenario.chip
    params = chip.params
    n_cores = chip.n_cores
    domain = scenario.freq_domain
    mode = scenario.mode
    scale = mode.derivative_scale if isinstance(mode, Adaptive) else 1.0
    setpoints = scenario.setpoints
    traces = [c.workload for c in scenario.cores]
    need_jac = scenario.centralized or keep_jacobians
    if need_jac and coupling_sens is None:
        coupling_sens = finite_diff_coupling(chip)

    u = np.full(n_cores, domain.project(scenario.initial_freq))
    state = ThermalState.ambient(params)
    records: list[CycleRecord] = []
    jacobians: list[np.ndarray] = []
    cycle_len = scenario.cycle_length

    alphas = ActivitySource(traces)

    for n in range(1, scenario.n_cycles + 1):
        try:
            step = integrate(params, chip.coupling, state, u, alphas, cycle_len)
        except ThermalRunaway as exc:
            raise RunawayAbort(exc, records, n) from exc
        state = step.state
        temps = state.temps
        volts = np.array([p.m * f + p.v0 for p, f in zip(params, u)])
        p_sta = step.final_static
        p_dyn = step.final_dynamic

        errs = np.array([error(setpoints[j], temps[j]) for j in range(n_cores)])
        derivs = np.full(n_cores, math.nan)
        runaway_near = np.zeros(n_cores, dtype=bool)
        for j in range(n_cores):
            meas = PlantMeasurement(
                temp=float(temps[j]),
                p_total=float(p_sta[j] + p_dyn[j]),
                p_static=float(p_sta[j]),
                volts=float(volts[j]),
                freq=float(u[j]),
                dtdp=scenario.dtdp,
            )
            try:
                derivs[j] = dtemp_dfreq(meas, params[j]) * scale
            except RunawayProximityError:
                runaway_near[j] = True

        gains = np.full(n_cores, math.nan)
        new_u = u.copy()
        if need_jac and not np.any(runaway_near):
            jac = assemble_jacobian(derivs, coupling_sens)
            jacobians.append(jac)
        if scenario.centralized and isinstance(mode, Adaptive) and not np.any(runaway_near):
            try:
                gain_mat = mimo_gain(jac)
                gains = np.diag(gain_mat).copy()
                new_u = mimo_update(u, gain_mat, errs, domain)
            except SingularGainError:
                new_u = np.full(n_cores, domain.max)
                gains[:] = math.inf
        else:
            for j in range(n_cores):
                if runaway_near[j]:
                    # leakage loop gain >= 1: back off as far as possible
                    new_u[j] = domain.min
                    continue
                try:
                    gains[j] = _gain_for(mode, derivs[j])
                except SingularGainError:
                    # no usable slope: explore from the top of the range
                    gains[j] = math.inf
                    new_u[j] = domain.max
                    continue
                ctl = ControllerState(float(u[j]), float(errs[j]), float(setpoints[j]), mode, domain)
                new_u[j] = control_update(ctl, gains[j])

        for j in range(n_cores):
            if not scenario.is_controlled(j):
                new_u[j] = u[j]
            records.append(
                CycleRecord(
                    cycle=n,
                    time_ms=n * cycle_len * 1000.0,
                    core=j,
                    freq_ghz=float(u[j]),
                    volts=float(volts[j]),
                    alpha=float(step.mean_alpha[j]),
                    p_dyn_w=float(p_dyn[j]),
                    p_sta_w=float(p_sta[j]),
                    temp_k=float(temps[j]),
                    error_k=float(errs[j]),
                    gain_ghz_per_k=float(gains[j]),
                    deriv_k_per_ghz=float(derivs[j]),
                )
            )
        u = new_u
    return RunResult(records, jacobians)


def run_closed_loop(scenario: Scenario) -> list[CycleRecord]:
    return simulate(scenario).records


def core_records(records: Sequence[CycleRecord], core: int) -> list[CycleRecord]:
    return [r for r in records if r.core == core]
