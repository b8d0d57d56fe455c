"""Plain-text experiment configuration.

Grammar (INI, ``key = value``, ``#`` comments):

    [experiment]            optional
    trajectories = 10000
    seed = 0
    initial_state = XY      # X, Y, or XY (both, sharing noise realizations)

    [bath]                  required
    b = 3.3                 # rms amplitude(s) [rad/us]; comma list for several lines
    tau_c = 25.0            # correlation time(s) [us]; inf = quasi-static line

    [static]                required
    detuning_mhz = -0.5     # published MHz values; converted to rad/us (x 2pi) here
    a0_mhz = -2.16
    iz_probs = 0.5, 0.2, 0.3

    [errors]                optional; absent = ideal pulses
    eps_x = -0.02
    eps_y = -0.02
    n_y = 0.0
    m_x = 0.005
    n_0 = 0.05
    m_0 = 0.05

    [grid]                  one of three forms
    t_min = 0.5             # evenly spaced durations [us]
    t_max = 15.0
    points = 30
    spacing = linear        # or log
    ; times = 1, 2, 5       # or an explicit duration list
    ; cycles = 1:25         # or a period sweep at fixed tau (periodic kinds only)
    ; tau = 0.6

    [sequence.<label>]      one section per curve
    kind = xy4              # cpmg xy4 xy8 pdd sdd cdd udd qdd hahn free
    n_periods = 2           # periodic kinds
    level = 2               # cdd udd qdd
    base = pdd              # cdd seed sequence: pdd or xy4
    repeats = 1             # cdd
    merge = true            # pdd sdd cdd: drop coincident equal-axis pairs

    [scan]                  used by the scan command instead of [grid]/[sequence.*]
    protocols = xy4, udd, qdd
    np_values = 4, 8, 12, 16, 24, 36, 48

Unknown sections or keys are rejected.  Linear-unit keys (b, tau_c, times)
are used as written; only ``*_mhz`` keys are multiplied by 2 pi.
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field

from .evolve import PulseErrors
from .noise import BathComposition, OuParams, StaticFieldModel
from .sequences import PulseSequence, cdd, cpmg_family, hahn, pdd_family, qdd, udd

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


_PERIODIC = {"cpmg": 2, "xy4": 4, "xy8": 8, "pdd": 4, "sdd": 8}  # pulses per period
_LEVELED = ("cdd", "udd", "qdd")
_KINDS = tuple(_PERIODIC) + _LEVELED + ("hahn", "free")


@dataclass(frozen=True)
class SequenceSpec:
    """Recipe for one decoupling protocol, scalable to any total duration."""

    label: str
    kind: str
    n_periods: int = 1
    level: int = 1
    base: str = "pdd"
    repeats: int = 1
    merge: bool = True

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown sequence kind {self.kind!r}")
        if self.n_periods < 1 or self.level < 1 or self.repeats < 1:
            raise ConfigError("n_periods, level and repeats must be >= 1")
        if self.base not in ("pdd", "xy4"):
            raise ConfigError(f"cdd base must be 'pdd' or 'xy4', not {self.base!r}")

    def _tau_build(self, tau: float) -> PulseSequence:
        k = self.kind
        if k == "cpmg":
            return cpmg_family("CPMG", self.n_periods, tau)
        if k in ("xy4", "xy8"):
            return cpmg_family(k.upper(), self.n_periods, tau)
        if k == "pdd":
            return pdd_family("PDD_XY", self.n_periods, tau, merge=self.merge)
        if k == "sdd":
            return pdd_family("SDD_XY", self.n_periods, tau, merge=self.merge)
        if k == "cdd":
            basename = {"pdd": "PDD_XY", "xy4": "XY4"}[self.base]
            return cdd(basename, self.level, tau, n_repeats=self.repeats, merge=self.merge)
        raise ConfigError(f"sequence kind {self.kind!r} has no period structure")

    @property
    def scalable(self) -> bool:
        return self.kind in _PERIODIC or self.kind == "cdd"

    def build(self, total: float) -> PulseSequence:
        """The protocol stretched to the given total duration [us]."""
        if self.kind == "hahn":
            return hahn(total)
        if self.kind == "free":
            return PulseSequence(duration=total, pulses=(), label="free")
        if self.kind == "udd":
            return udd(self.level, total)
        if self.kind == "qdd":
            return qdd(self.level, total)
        return self._tau_build(total / self._tau_build(1.0).duration)

    def build_cycles(self, n_periods: int, tau: float) -> PulseSequence:
        """Period sweep at fixed tau; only periodic kinds support it."""
        if not self.scalable:
            raise ConfigError(f"sequence kind {self.kind!r} cannot sweep cycles")
        if self.kind == "cdd":
            spec = SequenceSpec(self.label, "cdd", 1, self.level, self.base, n_periods, self.merge)
        else:
            spec = SequenceSpec(self.label, self.kind, n_periods, merge=self.merge)
        return spec._tau_build(tau)

    def n_pulses(self) -> int:
        return self.build(1.0).n_pulses


@dataclass(frozen=True)
class TimeGrid:
    """Durations to sample: an explicit list, or a cycle sweep at fixed tau."""

    times: tuple = ()
    cycles: tuple = ()
    tau: float = 0.0

    def points(self, spec: SequenceSpec):
        """(T, sequence) pairs for one protocol."""
        if self.cycles:
            seqs = [spec.build_cycles(n, self.tau) for n in self.cycles]
            return [(s.duration, s) for s in seqs]
        return [(t, spec.build(t)) for t in self.times]


@dataclass(frozen=True)
class ScanSpec:
    """Pulse-budget sweep: protocols evaluated at matching pulse counts."""

    protocols: tuple
    np_values: tuple


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment: sequences, noise, grid, sampling controls."""

    bath: BathComposition
    static: StaticFieldModel
    sequences: tuple = ()
    errors: PulseErrors | None = None
    grid: TimeGrid | None = None
    scan: ScanSpec | None = None
    trajectories: int = 10_000
    seed: int = 0
    initial_state: str = "XY"

    def fingerprint(self) -> str:
        """Stable hash of every resolved input, including overrides."""
        return hashlib.sha256(repr(self).encode()).hexdigest()[:16]


def _floats(text: str) -> tuple:
    try:
        return tuple(float(tok) for tok in text.split(","))
    except ValueError as e:
        raise ConfigError(f"expected a number list, got {text!r}") from e


def _int(text: str, key: str) -> int:
    try:
        return int(text)
    except ValueError as e:
        raise ConfigError(f"{key} must be an integer, got {text!r}") from e


def _bool(text: str, key: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{key} must be a boolean, got {text!r}")


def _take(section, allowed, name):
    extra = set(section) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(extra))}")
    return {k: section[k] for k in section}


def _require(section, keys, name):
    missing = [k for k in keys if k not in section]
    if missing:
        raise ConfigError(f"[{name}] is missing required key(s): {', '.join(missing)}")


def _parse_cycles(text: str) -> tuple:
    text = text.strip()
    if ":" in text:
        lo, hi = text.split(":", 1)
        a, b = _int(lo, "cycles"), _int(hi, "cycles")
        if a < 1 or b < a:
            raise ConfigError(f"cycles range {text!r} must be 1 <= lo <= hi")
        return tuple(range(a, b + 1))
    vals = tuple(_int(tok.strip(), "cycles") for tok in text.split(","))
    if any(v < 1 for v in vals):
        raise ConfigError("cycles must be >= 1")
    return vals


def _parse_grid(raw) -> TimeGrid:
    import numpy as np

    keys = set(raw)
    if "times" in keys:
        if keys - {"times"}:
            raise ConfigError("[grid] times cannot be combined with other keys")
        times = _floats(raw["times"])
        if any(t <= 0 for t in times):
            raise ConfigError("grid times must be positive")
        return TimeGrid(times=times)
    if "cycles" in keys:
        if keys - {"cycles", "tau"}:
            raise ConfigError("[grid] cycles takes only the extra key tau")
        _require(raw, ("tau",), "grid")
        tau = float(raw["tau"])
        if tau <= 0:
            raise ConfigError("grid tau must be positive")
        return TimeGrid(cycles=_parse_cycles(raw["cycles"]), tau=tau)
    _require(raw, ("t_min", "t_max", "points"), "grid")
    spacing = raw.get("spacing", "linear")
    t0, t1 = float(raw["t_min"]), float(raw["t_max"])
    n = _int(raw["points"], "points")
    if not 0 < t0 <= t1 or n < 1:
        raise ConfigError("need 0 < t_min <= t_max and points >= 1")
    if spacing == "linear":
        times = np.linspace(t0, t1, n)
    elif spacing == "log":
        times = np.geomspace(t0, t1, n)
    else:
        raise ConfigError(f"spacing must be linear or log, not {spacing!r}")
    return TimeGrid(times=tuple(float(t) for t in times))


_SEQ_KEYS = ("kind", "n_periods", "level", "base", "repeats", "merge")


def _parse_sequence(label, raw) -> SequenceSpec:
    _require(raw, ("kind",), f"sequence.{label}")
    return SequenceSpec(
        label=label,
        kind=raw["kind"].strip().lower(),
        n_periods=_int(raw.get("n_periods", "1"), "n_periods"),
        level=_int(raw.get("level", "1"), "level"),
        base=raw.get("base", "pdd").strip().lower(),
        repeats=_int(raw.get("repeats", "1"), "repeats"),
        merge=_bool(raw.get("merge", "true"), "merge"),
    )


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate the INI text into an ExperimentConfig."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"config syntax: {e}") from e

    known = {"experiment", "bath", "static", "errors", "grid", "scan"}
    sequences = []
    for name in cp.sections():
        if name.startswith("sequence."):
            label = name[len("sequence."):]
            if not label:
                raise ConfigError("sequence section needs a label: [sequence.<label>]")
            raw = _take(cp[name], _SEQ_KEYS, name)
            sequences.append(_parse_sequence(label, raw))
        elif name not in known:
            raise ConfigError(f"unknown section [{name}]")

    for required in ("bath", "static"):
        if required not in cp:
            raise ConfigError(f"missing required section [{required}]")

    raw = _take(cp["bath"], ("b", "tau_c"), "bath")
    _require(raw, ("b", "tau_c"), "bath")
    amps = _floats(raw["b"])
    taus = _floats(raw["tau_c"])
    if len(amps) != len(taus):
        raise ConfigError("bath b and tau_c lists must have equal length")
    try:
        bath = BathComposition(lines=tuple(OuParams(b=a, tau_c=tc) for a, tc in zip(amps, taus)))
    except ValueError as e:
        raise ConfigError(str(e)) from e

    raw = _take(cp["static"], ("detuning_mhz", "a0_mhz", "iz_probs"), "static")
    _require(raw, ("detuning_mhz", "a0_mhz", "iz_probs"), "static")
    try:
        static = StaticFieldModel(
            detuning=TWO_PI * float(raw["detuning_mhz"]),
            a0=TWO_PI * float(raw["a0_mhz"]),
            iz_probabilities=_floats(raw["iz_probs"]),
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e

    errors = None
    if "errors" in cp:
        keys = ("eps_x", "eps_y", "n_y", "m_x", "n_0", "m_0")
        raw = _take(cp["errors"], keys, "errors")
        try:
            errors = PulseErrors(**{k: float(raw.get(k, "0")) for k in keys})
        except ValueError as e:
            raise ConfigError(str(e)) from e

    trajectories, seed, initial_state = 10_000, 0, "XY"
    if "experiment" in cp:
        raw = _take(cp["experiment"], ("trajectories", "seed", "initial_state"), "experiment")
        trajectories = _int(raw.get("trajectories", "10000"), "trajectories")
        seed = _int(raw.get("seed", "0"), "seed")
        initial_state = raw.get("initial_state", "XY").strip().upper()
        if trajectories < 1:
            raise ConfigError("trajectories must be >= 1")
        if initial_state not in ("X", "Y", "XY"):
            raise ConfigError("initial_state must be X, Y or XY")

    grid = _parse_grid(_take(cp["grid"], ("t_min", "t_max", "points", "spacing", "times", "cycles", "tau"), "grid")) if "grid" in cp else None

    scan = None
    if "scan" in cp:
        raw = _take(cp["scan"], ("protocols", "np_values"), "scan")
        _require(raw, ("protocols", "np_values"), "scan")
        protocols = tuple(tok.strip().lower() for tok in raw["protocols"].split(","))
        for proto in protocols:
            if proto not in ("cpmg", "xy4", "xy8", "pdd", "sdd", "udd", "qdd"):
                raise ConfigError(f"scan cannot sweep protocol {proto!r}")
        np_values = tuple(_int(tok.strip(), "np_values") for tok in raw["np_values"].split(","))
        if any(v < 1 for v in np_values):
            raise ConfigError("np_values must be positive")
        scan = ScanSpec(protocols=protocols, np_values=np_values)

    if grid is not None and grid.cycles:
        for spec in sequences:
            if not spec.scalable:
                raise ConfigError(f"[grid] cycles is incompatible with kind {spec.kind!r}")

    return ExperimentConfig(
        bath=bath,
        static=static,
        sequences=tuple(sequences),
        errors=errors,
        grid=grid,
        scan=scan,
        trajectories=trajectories,
        seed=seed,
        initial_state=initial_state,
    )


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
