"""Power and thermal model of a multicore die.

Each core obeys an affine voltage/frequency law, an exponential leakage
(static) power law, a switching (dynamic) power law and a first-order
thermal response around ambient.  Cores exchange heat through a symmetric
matrix of conductance rates.  Frequencies are in GHz, temperatures in K,
powers in W, times in s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .errors import DomainError, ThermalRunaway

LN10 = math.log(10.0)

#: Integration substeps per millisecond of simulated time.
SUBSTEPS_PER_MS = 20

#: Any temperature above this is treated as a runaway.
RUNAWAY_LIMIT_K = 1000.0

# Adjacent pairs share an edge on the 4-core floorplan: (0, 1) and (2, 3).
ADJACENT_RATE = 42.5
DISTANT_RATE = 3.0


@dataclass(frozen=True)
class CoreParams:
    m: float = 0.1  # V/GHz
    v0: float = 0.6  # V
    c_eff: float = 10e-9  # F
    beta: float = 1000.0  # W/V
    gamma: float = 1000.0  # K
    a: float = -1000.0  # 1/s
    b: float = 4286.0  # K/(W s)
    t_amb: float = 318.0  # K

    def __post_init__(self) -> None:
        for name in ("m", "v0", "c_eff", "b", "t_amb"):
            if not getattr(self, name) > 0.0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)!r}")
        # beta = 0 / gamma = 0 are kept reachable as the leakage-free and
        # temperature-independent limits.
        for name in ("beta", "gamma"):
            if not getattr(self, name) >= 0.0:
                raise DomainError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        if not self.a < 0.0:
            raise DomainError(f"a must be < 0, got {self.a!r}")

    @property
    def dtdp(self) -> float:
        """Steady-state temperature rise per watt, -b/a."""
        return -self.b / self.a

    @property
    def time_constant(self) -> float:
        return -1.0 / self.a


@dataclass
class ThermalState:
    temps: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        self.temps = np.array(self.temps, dtype=float)
        if self.temps.ndim != 1:
            raise DomainError("temps must be a vector")
        if not np.all(self.temps > 0.0):
            raise DomainError("temperatures must be > 0 K")

    @classmethod
    def ambient(cls, params: Sequence[CoreParams]) -> "ThermalState":
        return cls(np.array([p.t_amb for p in params]), 0.0)


@dataclass(frozen=True)
class PowerBreakdown:
    p_static: float
    p_dynamic: float

    @property
    def p_total(self) -> float:
        return self.p_static + self.p_dynamic


def check_coupling(coupling: np.ndarray, n_cores: int | None = None) -> np.ndarray:
    c = np.array(coupling, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise DomainError(f"coupling must be square, got shape {c.shape}")
    if n_cores is not None and c.shape[0] != n_cores:
        raise DomainError(f"coupling is {c.shape[0]}x{c.shape[0]} but there are {n_cores} cores")
    if np.any(np.diag(c) != 0.0):
        raise DomainError("coupling diagonal must be zero")
    if np.any(c < 0.0):
        raise DomainError("coupling rates must be >= 0")
    if not np.allclose(c, c.T, rtol=1e-12, atol=0.0):
        raise DomainError("coupling must be symmetric")
    return c


def floorplan_coupling() -> np.ndarray:
    """Default 4-core floorplan: strong coupling within each pair, weak across."""
    c = np.full((4, 4), DISTANT_RATE)
    c[0, 1] = c[1, 0] = c[2, 3] = c[3, 2] = ADJACENT_RATE
    np.fill_diagonal(c, 0.0)
    return c


def no_coupling(n_cores: int) -> np.ndarray:
    return np.zeros((n_cores, n_cores))


@dataclass(frozen=True)
class Chip:
    """Core parameters plus the inter-core coupling, the full open-loop plant."""

    params: tuple[CoreParams, ...]
    coupling: np.ndarray = field(compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple(self.params))
        if not self.params:
            raise DomainError("a chip needs at least one core")
        object.__setattr__(self, "coupling", check_coupling(self.coupling, len(self.params)))

    @property
    def n_cores(self) -> int:
        return len(self.params)

    @classmethod
    def default(cls, n_cores: int = 4) -> "Chip":
        coupling = floorplan_coupling() if n_cores == 4 else no_coupling(n_cores)
        return cls(tuple(CoreParams() for _ in range(n_cores)), coupling)


def voltage_of_frequency(params: CoreParams, freq: float) -> float:
    if freq < 0.0:
        raise DomainError(f"frequency must be >= 0 GHz, got {freq!r}")
    return params.m * freq + params.v0


def dynamic_power(params: CoreParams, alpha: float, freq: float) -> float:
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"activity factor must be in [0, 1], got {alpha!r}")
    volts = voltage_of_frequency(params, freq)
    return alpha * params.c_eff * volts * volts * (freq * 1e9)


def static_power(params: CoreParams, volts: float, temp: float) -> float:
    if not temp > 0.0:
        raise DomainError(f"temperature must be > 0 K, got {temp!r}")
    return volts * params.beta * 10.0 ** (-params.gamma / temp)


def static_power_slope(params: CoreParams, volts: float, temp: float) -> float:
    """d(static power)/dT in W/K."""
    return static_power(params, volts, temp) * LN10 * params.gamma / (temp * temp)


# ---------------------------------------------------------------------------
# vectorised plant used by the integrator and the steady-state solver


class _Arrays:
    __slots__ = ("m", "v0", "c_eff", "beta", "gamma", "a", "b", "t_amb", "lap")

    def __init__(self, params: Sequence[CoreParams], coupling: np.ndarray) -> None:
        for name in ("m", "v0", "c_eff", "beta", "gamma", "a", "b", "t_amb"):
            setattr(self, name, np.array([getattr(p, name) for p in params], dtype=float))
        coupling = check_coupling(coupling, len(params))
        # heat flowing into core j: sum_i c[j,i] (T_i - T_j) == -(lap @ T)[j]
        self.lap = np.diag(coupling.sum(axis=1)) - coupling

    def volts(self, freqs: np.ndarray) -> np.ndarray:
        return self.m * freqs + self.v0

    def p_dyn(self, alphas: np.ndarray, freqs: np.ndarray) -> np.ndarray:
        v = self.volts(freqs)
        return alphas * self.c_eff * v * v * (freqs * 1e9)

    def p_sta(self, volts: np.ndarray, temps: np.ndarray) -> np.ndarray:
        return volts * self.beta * np.power(10.0, -self.gamma / temps)


# Either one activity value per core, or a callable mapping substep start
# times (shape (k,)) and the substep width to per-substep means, shape (k, n).
AlphaSource = Union[Sequence[float], np.ndarray, Callable[[np.ndarray, float], np.ndarray]]


def _check_freqs(n: int, freqs) -> np.ndarray:
    freqs = np.asarray(freqs, dtype=float)
    if freqs.shape != (n,):
        raise DomainError(f"expected {n} frequencies, got shape {freqs.shape}")
    if np.any(freqs < 0.0):
        raise DomainError("frequencies must be >= 0 GHz")
    return freqs


def _check_alphas(alphas: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    alphas = np.asarray(alphas, dtype=float)
    if alphas.shape != shape:
        raise DomainError(f"expected activity factors of shape {shape}, got {alphas.shape}")
    if np.any(alphas < 0.0) or np.any(alphas > 1.0):
        raise DomainError("activity factors must be in [0, 1]")
    return alphas


def _runaway_check(temps: np.ndarray, where: str) -> None:
    bad = ~np.isfinite(temps) | (temps > RUNAWAY_LIMIT_K) | (temps <= 0.0)
    if np.any(bad):
        core = int(np.flatnonzero(bad)[0])
        raise ThermalRunaway(f"thermal runaway on core {core} {where} (T={temps[core]!r})", core=core)


@dataclass
class StepResult:
    state: ThermalState
    mean_power: list[PowerBreakdown]
    # end-of-step values, what an on-chip sensor would read at the boundary
    final_static: np.ndarray
    final_dynamic: np.ndarray
    mean_alpha: np.ndarray


def integrate(
    params: Sequence[CoreParams],
    coupling: np.ndarray,
    state: ThermalState,
    freqs,
    alphas: AlphaSource,
    dt: float,
    *,
    substeps_per_ms: int = SUBSTEPS_PER_MS,
) -> StepResult:
    """Advance the coupled thermal ODE by ``dt`` with classical RK4.

    Activity is constant within each substep; with a callable source it is
    that source's mean over the substep.  Leakage is re-evaluated at each RK
    stage from the stage temperature.
    """
    if not dt > 0.0:
        raise DomainError(f"dt must be > 0, got {dt!r}")
    n = len(params)
    arr = _Arrays(params, coupling)
    freqs = _check_freqs(n, freqs)
    temps = np.array(state.temps, dtype=float)
    if temps.shape != (n,):
        raise DomainError(f"state has {temps.shape[0]} cores, expected {n}")

    n_sub = max(1, int(math.ceil(dt * 1000.0 * substeps_per_ms - 1e-9)))
    h = dt / n_sub
    t0 = state.time
    if callable(alphas):
        table = _check_alphas(alphas(t0 + h * np.arange(n_sub), h), (n_sub, n))
    else:
        table = np.broadcast_to(_check_alphas(alphas, (n,)), (n_sub, n))
    volts = arr.volts(freqs)
    a, b, t_amb, lap = arr.a, arr.b, arr.t_amb, arr.lap
    p_dyn_table = arr.p_dyn(table, freqs)

    sum_sta = np.zeros(n)
    for k in range(n_sub):
        p_dyn = p_dyn_table[k]

        def rhs(temp: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            p_sta = arr.p_sta(volts, temp)
            return a * (temp - t_amb) + b * (p_sta + p_dyn) - lap @ temp, p_sta

        k1, s1 = rhs(temps)
        k2, s2 = rhs(temps + 0.5 * h * k1)
        k3, s3 = rhs(temps + 0.5 * h * k2)
        k4, s4 = rhs(temps + h * k3)
        temps = temps + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _runaway_check(temps, f"at t={t0 + (k + 1) * h:.6g} s")
        sum_sta += (s1 + 2.0 * s2 + 2.0 * s3 + s4) / 6.0

    sum_dyn = p_dyn_table.sum(axis=0)
    sum_alpha = table.sum(axis=0)
    mean_sta = sum_sta / n_sub
    mean_dyn = sum_dyn / n_sub
    power = [PowerBreakdown(float(s), float(d)) for s, d in zip(mean_sta, mean_dyn)]
    return StepResult(
        state=ThermalState(temps, t0 + dt),
        mean_power=power,
        final_static=arr.p_sta(volts, temps),
        final_dynamic=p_dyn,
        mean_alpha=sum_alpha / n_sub,
    )


def step_thermal(
    params: Sequence[CoreParams],
    coupling: np.ndarray,
    state: ThermalState,
    freqs,
    alphas: AlphaSource,
    dt: float,
    *,
    substeps_per_ms: int = SUBSTEPS_PER_MS,
) -> tuple[ThermalState, list[PowerBreakdown]]:
    res = integrate(params, coupling, state, freqs, alphas, dt, substeps_per_ms=substeps_per_ms)
    return res.state, res.mean_power


def steady_state_temperatures(
    params: Sequence[CoreParams],
    coupling: np.ndarray,
    freqs,
    alphas,
    *,
    injected=None,
    rtol: float = 1e-10,
    max_iter: int = 10_000,
    damping: float = 1.0,
) -> np.ndarray:
    """Equilibrium temperatures for constant frequencies and activity.

    Solves ``T = t_amb + K^-1 b (P_dyn + P_sta(T) + injected)`` by damped
    fixed-point iteration from ambient, where K combines each core's decay
    rate with the coupling network.  Starting from below, the iterates rise
    monotonically to the lowest equilibrium; if that lies beyond
    RUNAWAY_LIMIT_K or the cap is hit the chip is in runaway.
    """
    n = len(params)
    arr = _Arrays(params, coupling)
    freqs = _check_freqs(n, freqs)
    alphas = _check_alphas(alphas, (n,))
    extra = np.zeros(n) if injected is None else np.asarray(injected, dtype=float)
    if not 0.0 < damping <= 1.0:
        raise DomainError("damping must be in (0, 1]")

    k_mat = np.diag(-arr.a) + arr.lap
    rise = np.linalg.solve(k_mat, np.diag(arr.b))  # temperature rise per watt
    volts = arr.volts(freqs)
    p_fixed = arr.p_dyn(alphas, freqs) + extra
    temps = arr.t_amb.copy()
    for _ in range(max_iter):
        target = arr.t_amb + rise @ (p_fixed + arr.p_sta(volts, temps))
        new = temps + damping * (target - temps)
        _runaway_check(new, "while solving for equilibrium")
        if np.all(np.abs(new - temps) <= rtol * np.abs(new)):
            return new
        temps = new
    raise ThermalRunaway(f"equilibrium iteration did not converge in {max_iter} iterations")
