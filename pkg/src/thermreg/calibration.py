"""Offline identification of the constants the controller relies on.

Open-loop sweeps give (power, temperature) pairs per core whose fitted
slope estimates dT/dP.  Perturbing one core's power at a time gives the
inter-core sensitivities dT_i/dT_j, which combine with per-core dT/dphi
into a full Jacobian.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CalibrationError, DomainError, FitError, ThermalRunaway
from .plant import Chip, ThermalState, integrate, steady_state_temperatures

DEFAULT_SWEEP_FREQS = (1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.7)
DEFAULT_SWEEP_ALPHAS = (0.02, 0.05, 0.08, 0.11)


@dataclass(frozen=True)
class SweepSample:
    core: int
    freq: float  # GHz
    alpha: float
    p_total: float  # W
    temp_ss: float  # K


@dataclass(frozen=True)
class AffineFit:
    slope: float  # K/W
    intercept: float  # K
    r_squared: float
    n_samples: int


@dataclass
class SweepResult:
    samples: dict[int, list[SweepSample]]
    # grid points where the plant ran away, as (freq index, alpha index)
    failed: list[tuple[int, int]]


def sweep_open_loop(
    chip: Chip,
    freqs: Sequence[float] = DEFAULT_SWEEP_FREQS,
    alphas: Sequence[float] = DEFAULT_SWEEP_ALPHAS,
    cycle: float = 0.010,
    *,
    stagger: bool = False,
    settle_tol: float = 1e-9,
    max_cycles: int = 20,
) -> SweepResult:
    """Hold each grid point until settled and log end-of-cycle (P, T) per core.

    A grid point is held for whole cycles until the end-of-cycle temperatures
    move by less than ``settle_tol`` K (at most ``max_cycles``); points run
    back to back, each starting from the previous state.  By
    default every core runs the same grid point, so the chip is isothermal and
    the fitted slope is the pure self-heating dT/dP.  With ``stagger`` core j
    is shifted j places along the frequency list; neighbours then run at
    different frequencies and coupling biases the slope low.
    """
    if not freqs or not alphas:
        raise DomainError("sweep grid is empty")
    tau = max(p.time_constant for p in chip.params)
    if cycle < 10.0 * tau:
        raise DomainError(f"cycle {cycle} s is shorter than 10 thermal time constants ({10 * tau} s)")
    n = chip.n_cores
    nf = len(freqs)
    samples: dict[int, list[SweepSample]] = {j: [] for j in range(n)}
    failed = []
    state = ThermalState.ambient(chip.params)
    for ia, alpha in enumerate(alphas):
        for i_f in range(nf):
            f_vec = np.array([freqs[(i_f + (j if stagger else 0)) % nf] for j in range(n)], dtype=float)
            a_vec = np.full(n, float(alpha))
            try:
                for _ in range(max_cycles):
                    res = integrate(chip.params, chip.coupling, state, f_vec, a_vec, cycle)
                    moved = np.max(np.abs(res.state.temps - state.temps))
                    state = res.state
                    if moved < settle_tol:
                        break
            except ThermalRunaway:
                failed.append((i_f, ia))
                state = ThermalState.ambient(chip.params)
                continue
            p_tot = res.final_static + res.final_dynamic
            for j in range(n):
                samples[j].append(
                    SweepSample(j, float(f_vec[j]), float(alpha), float(p_tot[j]), float(state.temps[j]))
                )
    return SweepResult(samples, failed)


def fit_affine(samples: Sequence[SweepSample]) -> AffineFit:
    """Ordinary least squares of temperature on power."""
    if len(samples) < 3:
        raise FitError(f"need at least 3 samples, got {len(samples)}")
    p = np.array([s.p_total for s in samples], dtype=float)
    t = np.array([s.temp_ss for s in samples], dtype=float)
    pc = p - p.mean()
    sxx = float(pc @ pc)
    if not sxx > 1e-12 * max(1.0, float(p @ p)):
        raise FitError("power has no variance; slope is undetermined")
    slope = float(pc @ (t - t.mean())) / sxx
    intercept = float(t.mean() - slope * p.mean())
    resid = t - (intercept + slope * p)
    ss_res = float(resid @ resid)
    tc = t - t.mean()
    ss_tot = float(tc @ tc)
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return AffineFit(slope, intercept, r2, len(samples))


def averaged_slope(fits: Sequence[AffineFit]) -> float:
    return float(np.mean([f.slope for f in fits]))


def finite_diff_coupling(
    chip: Chip,
    delta_p: float = 0.5,
    *,
    freq: float = 3.0,
    alpha: float = 0.1,
) -> np.ndarray:
    """dT_i/dT_j by central differences of injected power, unit diagonal.

    Column j holds every core's steady-state temperature shift when core j's
    power is perturbed by +/- delta_p, divided by core j's own shift.
    """
    if not delta_p > 0.0:
        raise DomainError("delta_p must be > 0")
    n = chip.n_cores
    freqs = np.full(n, freq)
    alphas = np.full(n, alpha)
    sens = np.eye(n)
    for j in range(n):
        bump = np.zeros(n)
        bump[j] = delta_p
        try:
            hi = steady_state_temperatures(chip.params, chip.coupling, freqs, alphas, injected=bump)
            lo = steady_state_temperatures(chip.params, chip.coupling, freqs, alphas, injected=-bump)
        except ThermalRunaway as exc:
            raise CalibrationError(f"runaway while perturbing core {j}: {exc}") from exc
        shift = hi - lo
        if not shift[j] > 0.0:
            raise CalibrationError(f"core {j} did not heat up under its own power perturbation")
        sens[:, j] = shift / shift[j]
        sens[j, j] = 1.0
    return sens


def assemble_jacobian(diag_derivs, coupling_sens) -> np.ndarray:
    """dT_i/dphi_j = (dT_i/dT_j) (dT_j/dphi_j), via the chain rule."""
    d = np.asarray(diag_derivs, dtype=float)
    s = np.asarray(coupling_sens, dtype=float)
    if s.shape != (d.size, d.size):
        raise DomainError(f"sensitivity matrix {s.shape} does not match {d.size} derivatives")
    jac = s * d[np.newaxis, :]
    np.fill_diagonal(jac, d)
    return jac


def dominance_ratio(jac) -> float:
    """min_i |J_ii| / sum_{k != i} |J_ik|; +inf when every row has zero off-diagonal mass."""
    j = np.abs(np.asarray(jac, dtype=float))
    if j.ndim != 2 or j.shape[0] != j.shape[1]:
        raise DomainError("matrix must be square")
    diag = np.diag(j)
    if np.any(diag == 0.0):
        raise DomainError("zero diagonal entry")
    off = j.sum(axis=1) - diag
    with np.errstate(divide="ignore"):
        ratios = np.where(off > 0.0, diag / np.where(off > 0.0, off, 1.0), math.inf)
    return float(ratios.min())


@dataclass
class CalibrationReport:
    fits: list[AffineFit]
    dtdp: float
    coupling_sens: np.ndarray
    coupling_dominance: float
    excluded_points: int

    def to_json(self) -> str:
        doc = {
            "fits": [asdict(f) for f in self.fits],
            "dtdp_k_per_w": self.dtdp,
            "coupling_sensitivity": self.coupling_sens.tolist(),
            "coupling_dominance_ratio": _json_float(self.coupling_dominance),
            "excluded_grid_points": self.excluded_points,
        }
        return json.dumps(doc, indent=2) + "\n"


def _json_float(x: float):
    return "unbounded" if math.isinf(x) else x


def calibrate(chip: Chip, *, delta_p: float = 0.5, cycle: float = 0.010) -> CalibrationReport:
    sweep = sweep_open_loop(chip, cycle=cycle)
    fits = [fit_affine(sweep.samples[j]) for j in range(chip.n_cores)]
    sens = finite_diff_coupling(chip, delta_p)
    return CalibrationReport(fits, averaged_slope(fits), sens, dominance_ratio(sens), len(sweep.failed))


def write_calibration(report: CalibrationReport, path: str | Path) -> Path:
    path = Path(path)
    try:
        path.write_text(report.to_json())
    except OSError as exc:
        raise OSError(f"cannot write calibration report {path}: {exc}") from exc
    return path


def load_calibration(path: str | Path) -> tuple[float, np.ndarray]:
    """Return (dtdp, coupling sensitivity) from a report file."""
    doc = json.loads(Path(path).read_text())
    return float(doc["dtdp_k_per_w"]), np.array(doc["coupling_sensitivity"], dtype=float)
