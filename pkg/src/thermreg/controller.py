"""Integral controller with a Newton-style adjustable gain.

Each control cycle the command is ``u_n = u_{n-1} + A_n e`` with
``A_n = 1 / (dT/dphi)`` evaluated at the frequency that was just applied.
The frequency derivative of temperature is estimated from on-line
measurements plus one offline constant, the steady-state dT/dP.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DomainError, RunawayProximityError, SingularGainError
from .plant import LN10, CoreParams

#: Derivatives below this (K/GHz) are treated as zero.
DERIVATIVE_FLOOR = 1e-6
#: Jacobians whose condition number exceeds this are refused.
MAX_CONDITION = 1e12

STANDARD_FREQ_SET = (1.0, 1.5, 1.8, 3.4, 3.7, 3.9, 4.0, 4.1, 4.2, 4.4, 4.7)
STANDARD_FREQ_RANGE = (1.0, 4.7)


@dataclass(frozen=True)
class ContinuousRange:
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (0.0 < self.lo <= self.hi and math.isfinite(self.hi)):
            raise DomainError(f"invalid frequency range [{self.lo}, {self.hi}]")

    @property
    def max(self) -> float:
        return self.hi

    @property
    def min(self) -> float:
        return self.lo

    def project(self, raw: float) -> float:
        if math.isnan(raw):
            raise DomainError("cannot project NaN onto the frequency range")
        return min(max(raw, self.lo), self.hi)

    def contains(self, freq: float) -> bool:
        return self.lo <= freq <= self.hi


@dataclass(frozen=True)
class DiscreteSet:
    levels: tuple[float, ...]

    def __post_init__(self) -> None:
        levels = tuple(float(x) for x in self.levels)
        object.__setattr__(self, "levels", levels)
        if not levels:
            raise DomainError("discrete frequency set is empty")
        if not all(math.isfinite(x) for x in levels):
            raise DomainError("discrete frequencies must be finite")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise DomainError("discrete frequency set must be strictly increasing")
        if levels[0] <= 0.0:
            raise DomainError("frequencies must be > 0")

    @property
    def max(self) -> float:
        return self.levels[-1]

    @property
    def min(self) -> float:
        return self.levels[0]

    def project(self, raw: float) -> float:
        """Nearest level; exact ties go to the higher level."""
        if math.isnan(raw):
            raise DomainError("cannot project NaN onto the frequency set")
        levels = self.levels
        i = bisect.bisect_left(levels, raw)
        if i == 0:
            return levels[0]
        if i == len(levels):
            return levels[-1]
        lo, hi = levels[i - 1], levels[i]
        return lo if raw - lo < hi - raw else hi

    def contains(self, freq: float) -> bool:
        return freq in self.levels


FreqDomain = Union[ContinuousRange, DiscreteSet]


@dataclass(frozen=True)
class Adaptive:
    """Gain is the reciprocal of the estimated dT/dphi, optionally mis-scaled."""

    derivative_scale: float = 1.0

    def __str__(self) -> str:
        if self.derivative_scale == 1.0:
            return "adaptive"
        return f"adaptive*{self.derivative_scale:g}"


@dataclass(frozen=True)
class Fixed:
    gain: float  # GHz/K

    def __str__(self) -> str:
        return f"fixed:{self.gain:g}"


GainMode = Union[Adaptive, Fixed]


def parse_mode(text: str) -> GainMode:
    text = text.strip()
    if text == "adaptive":
        return Adaptive()
    if text.startswith("adaptive*"):
        return Adaptive(float(text.split("*", 1)[1]))
    if text.startswith("fixed:"):
        gain = float(text.split(":", 1)[1])
        if not math.isfinite(gain):
            raise ValueError("fixed gain must be finite")
        return Fixed(gain)
    raise ValueError(f"unknown controller mode {text!r} (adaptive | fixed:<ghz_per_k>)")


@dataclass
class ControllerState:
    u_prev: float  # GHz, the frequency applied during the cycle just finished
    e_prev: float  # K, the error measured at its end
    setpoint: float  # K
    mode: GainMode
    freq_domain: FreqDomain


@dataclass(frozen=True)
class PlantMeasurement:
    temp: float  # K
    p_total: float  # W
    p_static: float  # W
    volts: float  # V
    freq: float  # GHz
    dtdp: float  # K/W


def error(setpoint: float, measured_temp: float) -> float:
    return setpoint - measured_temp


def dtemp_dfreq(meas: PlantMeasurement, params: CoreParams, *, published_sign: bool = False) -> float:
    """Closed-form dT/dphi (K/GHz) including the leakage/temperature loop.

    The numerator is the power sensitivity to frequency at fixed temperature;
    the denominator ``1 - dtdp * dPs/dT`` accounts for leakage rising with the
    temperature it causes.  ``published_sign=True`` flips the leakage term,
    matching the form as it was printed, which understates the derivative
    whenever leakage is significant.
    """
    if not meas.freq > 0.0:
        raise DomainError(f"frequency must be > 0, got {meas.freq!r}")
    if not meas.volts > 0.0:
        raise DomainError(f"voltage must be > 0, got {meas.volts!r}")
    if not meas.temp > 0.0:
        raise DomainError(f"temperature must be > 0, got {meas.temp!r}")
    m = params.m
    p_s = meas.p_static
    p_d = meas.p_total - p_s
    numer = meas.dtdp * (m * p_s / meas.volts + p_d * (1.0 / meas.freq + 2.0 * m / meas.volts))
    loop_gain = meas.dtdp * p_s * LN10 * params.gamma / (meas.temp * meas.temp)
    denom = 1.0 + loop_gain if published_sign else 1.0 - loop_gain
    if denom <= 0.0:
        raise RunawayProximityError(
            f"leakage loop gain {loop_gain:.4g} >= 1 at T={meas.temp:.6g} K"
        )
    return numer / denom


def adaptive_gain(deriv: float) -> float:
    if not math.isfinite(deriv) or abs(deriv) < DERIVATIVE_FLOOR:
        raise SingularGainError(f"derivative {deriv!r} K/GHz is too small to invert")
    return 1.0 / deriv


def control_update(state: ControllerState, gain: float) -> float:
    if not math.isfinite(gain):
        raise DomainError(f"gain must be finite, got {gain!r}")
    return state.freq_domain.project(state.u_prev + gain * state.e_prev)


def mimo_gain(jacobian) -> np.ndarray:
    j = np.asarray(jacobian, dtype=float)
    if j.ndim != 2 or j.shape[0] != j.shape[1]:
        raise DomainError(f"Jacobian must be square, got shape {j.shape}")
    if not np.all(np.isfinite(j)):
        raise SingularGainError("Jacobian has non-finite entries")
    cond = np.linalg.cond(j)
    if not cond <= MAX_CONDITION:
        raise SingularGainError(f"Jacobian is singular or ill-conditioned (cond={cond:.3g})")
    # LAPACK getrf/getri: LU with partial pivoting
    return np.linalg.inv(j)


def mimo_update(u_prev: Sequence[float], gain: np.ndarray, e_prev: Sequence[float], domain: FreqDomain) -> np.ndarray:
    """Vector form of the update; each component is projected independently."""
    raw = np.asarray(u_prev, dtype=float) + np.asarray(gain) @ np.asarray(e_prev, dtype=float)
    return np.array([domain.project(float(x)) for x in raw])


def relative_error(approx, exact) -> float:
    """``||approx - exact|| / ||exact||`` in the induced infinity norm."""
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    if approx.shape != exact.shape:
        raise DomainError(f"shape mismatch {approx.shape} vs {exact.shape}")
    denom = np.linalg.norm(exact, ord=np.inf)
    if denom == 0.0:
        raise DomainError("exact matrix has zero norm")
    return float(np.linalg.norm(approx - exact, ord=np.inf) / denom)
