"""Scenario files: a small ``key = value`` format.

Blank lines and ``#`` comments are ignored.  Recognised keys::

    workloads      comma list, one per core: preset name, constant:<alpha>,
                   or file:<path> (t_seconds,alpha CSV)
    setpoint       K, all cores (default 340)
    coreN.setpoint K, core N only (cores are numbered from 0)
    coreN.workload one core's workload
    m v0 c_eff beta gamma a b t_amb
                   plant constants for every core; coreN.<name> for one core
    coupling       floorplan | none | rows of numbers separated by ';'
    cycle_ms       control cycle length (default 10)
    cycles         number of control cycles (default 70)
    freq_range     lo, hi in GHz (default 1, 4.7)
    freq_set       discrete levels in GHz (default: the 11-level standard set)
    discrete       true | false (default false)
    mode           adaptive | fixed:<GHz per K> | adaptive*<scale>
    controller     distributed | centralized
    controlled     comma list of controlled cores (default all); the rest
                   stay at initial_freq
    initial_freq   GHz, command for the first cycle (default 1)
    dtdp           K/W used by the controller (default 4.286)
    seed           unsigned 64-bit seed for the noisy workload segments
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ..controller import (
    STANDARD_FREQ_RANGE,
    STANDARD_FREQ_SET,
    Adaptive,
    ContinuousRange,
    DiscreteSet,
    FreqDomain,
    GainMode,
    parse_mode,
)
from ..errors import ConfigError, DomainError, ScenarioError
from ..plant import Chip, CoreParams, check_coupling, no_coupling, floorplan_coupling
from ..workload import PRESETS, ActivityTrace, Trace, constant_trace, load_trace, preset

DEFAULT_DTDP = 4.286
DEFAULT_SETPOINT = 340.0
PLANT_KEYS = tuple(f.name for f in dataclasses.fields(CoreParams))
GLOBAL_KEYS = {
    "workloads", "setpoint", "coupling", "cycle_ms", "cycles", "freq_range", "freq_set",
    "discrete", "mode", "controller", "controlled", "initial_freq", "dtdp", "seed", *PLANT_KEYS,
}
CORE_KEYS = {"setpoint", "workload", *PLANT_KEYS}


@dataclass
class CoreSpec:
    params: CoreParams
    workload: Trace
    setpoint: float


@dataclass
class Scenario:
    cores: list[CoreSpec]
    coupling: np.ndarray
    cycle_length: float = 0.010
    n_cycles: int = 70
    freq_domain: FreqDomain = field(default_factory=lambda: ContinuousRange(*STANDARD_FREQ_RANGE))
    mode: GainMode = field(default_factory=Adaptive)
    initial_freq: float = 1.0
    seed: int = 0
    dtdp: float = DEFAULT_DTDP
    centralized: bool = False
    controlled: tuple[int, ...] | None = None
    name: str = ""

    def __post_init__(self) -> None:
        if not self.cores:
            raise ConfigError("scenario has no cores")
        self.coupling = check_coupling(self.coupling, len(self.cores))
        if not self.cycle_length > 0.0:
            raise ConfigError("cycle length must be > 0")
        if self.n_cycles < 0:
            raise ConfigError("cycle count must be >= 0")
        if not self.dtdp > 0.0:
            raise ConfigError("dtdp must be > 0")
        if self.controlled is not None:
            bad = [c for c in self.controlled if not 0 <= c < len(self.cores)]
            if bad:
                raise ConfigError(f"controlled core index out of range: {bad}")

    @property
    def n_cores(self) -> int:
        return len(self.cores)

    @property
    def chip(self) -> Chip:
        return Chip(tuple(c.params for c in self.cores), self.coupling)

    @property
    def setpoints(self) -> np.ndarray:
        return np.array([c.setpoint for c in self.cores])

    def is_controlled(self, core: int) -> bool:
        return self.controlled is None or core in self.controlled

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def with_seed(self, seed: int) -> "Scenario":
        """Same scenario with every synthetic trace re-seeded."""
        cores = [
            dataclasses.replace(c, workload=dataclasses.replace(c.workload, seed=seed))
            if isinstance(c.workload, ActivityTrace)
            else c
            for c in self.cores
        ]
        return dataclasses.replace(self, cores=cores, seed=seed)


def _floats(text: str, line: int) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise ScenarioError(f"expected numbers, got {text!r}", line) from None


def _float(text: str, line: int) -> float:
    vals = _floats(text, line)
    if len(vals) != 1:
        raise ScenarioError(f"expected one number, got {text!r}", line)
    return vals[0]


def _bool(text: str, line: int) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ScenarioError(f"expected true/false, got {text!r}", line)


def _workload(text: str, seed: int, base: Path | None, line: int) -> Trace:
    text = text.strip()
    try:
        if text in PRESETS:
            return preset(text, seed)
        if text.startswith("constant:"):
            level, _, dur = text[len("constant:"):].partition("@")
            duration = float(dur) if dur else 1e6
            return constant_trace(float(level), duration, seed)
        if text.startswith("file:"):
            path = Path(text[len("file:"):].strip())
            if base is not None and not path.is_absolute():
                path = base / path
            return load_trace(path)
    except (ConfigError, ValueError) as exc:
        raise ScenarioError(str(exc), line) from None
    raise ScenarioError(f"unknown workload {text!r}", line)


def parse_scenario(text: str, *, base_dir: str | Path | None = None, name: str = "") -> Scenario:
    base = Path(base_dir) if base_dir is not None else None
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, sep, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ScenarioError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if key.startswith("core") and "." in key:
            head, sub = key.split(".", 1)
            if not head[4:].isdigit() or sub not in CORE_KEYS:
                raise ScenarioError(f"unknown key {key!r}", lineno)
        elif key not in GLOBAL_KEYS:
            raise ScenarioError(f"unknown key {key!r}", lineno)
        if key in entries:
            raise ScenarioError(f"duplicate key {key!r}", lineno)
        entries[key] = (value, lineno)

    def get(key: str) -> tuple[str, int] | None:
        return entries.get(key)

    seed = 0
    if (e := get("seed")) is not None:
        try:
            seed = int(e[0], 0)
        except ValueError:
            raise ScenarioError(f"seed must be an integer, got {e[0]!r}", e[1]) from None
        if not 0 <= seed < 2**64:
            raise ScenarioError("seed must fit in 64 unsigned bits", e[1])

    core_ids = {int(k.split(".")[0][4:]) for k in entries if k.startswith("core") and "." in k}
    if (e := get("workloads")) is not None:
        names = [w.strip() for w in e[0].split(",") if w.strip()]
        n_cores = len(names)
        if n_cores == 0:
            raise ScenarioError("workloads list is empty", e[1])
    else:
        names = []
        n_cores = max(core_ids) + 1 if core_ids else 0
    if n_cores == 0:
        raise ScenarioError("scenario must list 'workloads' or per-core workloads")
    if core_ids and max(core_ids) >= n_cores:
        line = next(v[1] for k, v in entries.items() if k.startswith(f"core{max(core_ids)}."))
        raise ScenarioError(f"core{max(core_ids)} given but there are only {n_cores} cores", line)

    setpoint = DEFAULT_SETPOINT
    if (e := get("setpoint")) is not None:
        setpoint = _float(*e)
    global_plant = {}
    for k in PLANT_KEYS:
        if (e := get(k)) is not None:
            global_plant[k] = (_float(*e), e[1])

    cores = []
    for i in range(n_cores):
        plant = {k: v for k, (v, _) in global_plant.items()}
        lines = {k: ln for k, (_, ln) in global_plant.items()}
        for k in PLANT_KEYS:
            if (e := get(f"core{i}.{k}")) is not None:
                plant[k] = _float(*e)
                lines[k] = e[1]
        try:
            params = CoreParams(**plant)
        except DomainError as exc:
            bad = next((k for k in PLANT_KEYS if str(exc).startswith(f"{k} ")), None)
            raise ScenarioError(str(exc), lines.get(bad)) from None
        if (e := get(f"core{i}.workload")) is not None:
            trace = _workload(e[0], seed, base, e[1])
        elif names:
            trace = _workload(names[i], seed, base, entries["workloads"][1])
        else:
            raise ScenarioError(f"no workload for core{i}")
        sp = setpoint
        if (e := get(f"core{i}.setpoint")) is not None:
            sp = _float(*e)
        if not sp > 0.0:
            raise ScenarioError(f"setpoint must be > 0 K, got {sp}")
        cores.append(CoreSpec(params, trace, sp))

    coupling = floorplan_coupling() if n_cores == 4 else no_coupling(n_cores)
    if (e := get("coupling")) is not None:
        value, line = e
        if value == "floorplan":
            if n_cores != 4:
                raise ScenarioError("the floorplan coupling is defined for 4 cores", line)
            coupling = floorplan_coupling()
        elif value == "none":
            coupling = no_coupling(n_cores)
        else:
            rows = [_floats(r, line) for r in value.split(";") if r.strip()]
            if len(rows) != n_cores or any(len(r) != n_cores for r in rows):
                raise ScenarioError(f"coupling must be {n_cores}x{n_cores}", line)
            coupling = np.array(rows)
        try:
            coupling = check_coupling(coupling, n_cores)
        except DomainError as exc:
            raise ScenarioError(str(exc), line) from None

    kwargs: dict = {}
    if (e := get("cycle_ms")) is not None:
        ms = _float(*e)
        if not ms > 0.0:
            raise ScenarioError("cycle_ms must be > 0", e[1])
        kwargs["cycle_length"] = ms / 1000.0
    if (e := get("cycles")) is not None:
        try:
            kwargs["n_cycles"] = int(e[0])
        except ValueError:
            raise ScenarioError(f"cycles must be an integer, got {e[0]!r}", e[1]) from None
        if kwargs["n_cycles"] < 0:
            raise ScenarioError("cycles must be >= 0", e[1])

    lo, hi = STANDARD_FREQ_RANGE
    if (e := get("freq_range")) is not None:
        vals = _floats(*e)
        if len(vals) != 2:
            raise ScenarioError("freq_range needs two numbers", e[1])
        lo, hi = vals
    levels = STANDARD_FREQ_SET
    if (e := get("freq_set")) is not None:
        levels = tuple(_floats(*e))
    discrete = _bool(*get("discrete")) if get("discrete") is not None else False
    try:
        kwargs["freq_domain"] = DiscreteSet(levels) if discrete else ContinuousRange(lo, hi)
    except DomainError as exc:
        line = (get("freq_set") if discrete else get("freq_range")) or (None, None)
        raise ScenarioError(str(exc), line[1]) from None

    if (e := get("mode")) is not None:
        try:
            kwargs["mode"] = parse_mode(e[0])
        except ValueError as exc:
            raise ScenarioError(str(exc), e[1]) from None
    if (e := get("controller")) is not None:
        if e[0] not in ("distributed", "centralized"):
            raise ScenarioError("controller must be 'distributed' or 'centralized'", e[1])
        kwargs["centralized"] = e[0] == "centralized"
    if (e := get("controlled")) is not None:
        try:
            ids = tuple(int(x) for x in e[0].replace(",", " ").split())
        except ValueError:
            raise ScenarioError("controlled must list core indices", e[1]) from None
        if any(not 0 <= c < n_cores for c in ids):
            raise ScenarioError("controlled core index out of range", e[1])
        kwargs["controlled"] = ids
    if (e := get("initial_freq")) is not None:
        kwargs["initial_freq"] = _float(*e)
        if not kwargs["initial_freq"] > 0.0:
            raise ScenarioError("initial_freq must be > 0", e[1])
    if (e := get("dtdp")) is not None:
        kwargs["dtdp"] = _float(*e)
        if not kwargs["dtdp"] > 0.0:
            raise ScenarioError("dtdp must be > 0", e[1])

    return Scenario(cores=cores, coupling=coupling, seed=seed, name=name, **kwargs)


def shipped_scenarios() -> list[str]:
    files = resources.files("thermreg.scenarios")
    return sorted(p.name[:-4] for p in files.iterdir() if p.name.endswith(".cfg"))


def load_scenario(ref: str | Path) -> Scenario:
    """Load a scenario by file path or by the name of a shipped scenario."""
    path = Path(ref)
    if path.is_file():
        try:
            text = path.read_text()
        except OSError as exc:
            raise OSError(f"cannot read {path}: {exc}") from exc
        return parse_scenario(text, base_dir=path.parent, name=path.stem)
    res = resources.files("thermreg.scenarios").joinpath(f"{ref}.cfg")
    if res.is_file():
        return parse_scenario(res.read_text(), name=str(ref))
    if path.suffix or len(path.parts) > 1:
        raise FileNotFoundError(f"scenario file {str(ref)!r} does not exist")
    raise ConfigError(f"no scenario file or shipped scenario named {str(ref)!r}")
