"""Pulse-sequence constructors, a small sequence DSL, and filter functions.

Every protocol is lowered to the same :class:`PulseSequence` value: a total
duration plus an ordered list of instantaneous pi pulses labeled X or Y.
Sequences are the single source for both the filter-function analytics and
the Monte Carlo engine, so the constructors here are the only place where
protocol timing is defined.

Normalization: pulses are sorted by time; application order is preserved
among pulses sharing an instant (nested protocols put the inner pulse
first).  With ``merge=True`` a coincident same-axis pair cancels (pi^2 acts
as the identity on the Bloch vector); the physical-pulse engine uses
``merge=False`` sequences so back-to-back pulses are really applied.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Pulse",
    "PulseSequence",
    "FilterFunction",
    "DslError",
    "cpmg_family",
    "pdd_family",
    "cdd",
    "udd",
    "qdd",
    "hahn",
    "parse_dsl",
    "render_dsl",
    "to_json",
    "from_json",
    "filter_function",
]


@dataclass(frozen=True)
class Pulse:
    """One instantaneous pi pulse: time within [0, T] and nominal axis."""

    time: float
    axis: str

    def __post_init__(self):
        if self.axis not in ("X", "Y"):
            raise ValueError("axis must be 'X' or 'Y'")


@dataclass(frozen=True)
class PulseSequence:
    """Ordered pi-pulse sequence over a fixed duration.

    ``label`` carries the protocol name and parameters for reporting; it is
    ignored by equality so round-trips through the DSL compare clean.
    """

    duration: float
    pulses: tuple
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        for p in self.pulses:
            if p.time < 0 or p.time > self.duration:
                raise ValueError(f"pulse at t={p.time} outside [0, {self.duration}]")

    @property
    def n_pulses(self) -> int:
        return len(self.pulses)


@dataclass(frozen=True)
class FilterFunction:
    """Sign function xi(t) of a sequence: +1 at t=0, flipping at each breakpoint.

    Breakpoints are the pulse instants with odd pulse multiplicity, strictly
    inside (0, T); coincident pulse pairs flip twice and leave no breakpoint.
    """

    duration: float
    breakpoints: tuple

    def segments(self):
        """Return (starts, ends, signs) arrays for the constant-sign pieces."""
        edges = np.concatenate(([0.0], np.asarray(self.breakpoints, dtype=float), [self.duration]))
        signs = (-1.0) ** np.arange(len(edges) - 1)
        return edges[:-1], edges[1:], signs

    def xi(self, t):
        """Evaluate xi(t) (+-1 inside [0, T], 0 outside)."""
        t = np.asarray(t, dtype=float)
        bp = np.asarray(self.breakpoints, dtype=float)
        flips = np.searchsorted(bp, t, side="right")
        out = np.where((t < 0) | (t > self.duration), 0.0, (-1.0) ** flips)
        return out if out.ndim else float(out)


def _normalize(duration, pulses, label, merge):
    """Sort by time (stable) and optionally cancel coincident same-axis pairs."""
    ordered = sorted(pulses, key=lambda p: p.time)
    if merge:
        out = []
        i = 0
        while i < len(ordered):
            j = i
            while j < len(ordered) and ordered[j].time == ordered[i].time:
                j += 1
            group = ordered[i:j]
            odd = {ax for ax in ("X", "Y") if sum(p.axis == ax for p in group) % 2}
            # keep the first occurrence per surviving axis, in group order
            for p in group:
                if p.axis in odd:
                    out.append(p)
                    odd.discard(p.axis)
            i = j
        ordered = out
    return PulseSequence(duration=duration, pulses=tuple(ordered), label=label)


def cpmg_family(variant: str, n_periods: int, tau: float) -> PulseSequence:
    """CPMG-timed sequences: pulses at odd multiples of tau.

    CPMG period (4 tau): tau-X-2tau-X-tau.  XY4 period (8 tau) alternates
    axes X,Y,X,Y; XY8 period (16 tau) is XY4 followed by its axis-swapped
    mirror Y,X,Y,X.
    """
    if n_periods < 1 or tau <= 0:
        raise ValueError("need n_periods >= 1 and tau > 0")
    axes = {"CPMG": "XX", "XY4": "XYXY", "XY8": "XYXYYXYX"}[variant.upper()]
    per = 2 * len(axes)  # period in units of tau
    pulses = []
    for k in range(n_periods):
        for i, ax in enumerate(axes):
            pulses.append(Pulse(time=tau * (per * k + 2 * i + 1), axis=ax))
    return _normalize(tau * per * n_periods, pulses, f"{variant.lower()}(n={n_periods}, tau={tau:g})", True)


def pdd_family(variant: str, n_periods: int, tau: float, merge: bool = True) -> PulseSequence:
    """Equidistant-pulse periodic decoupling and its symmetrized version.

    PDD_XY period (4 tau): four delays tau, each ending in a pulse, axes
    X,Y,X,Y.  SDD_XY period (8 tau) appends the time-inverted period; the
    coincident Y-Y pair at the junction cancels under merging.
    """
    if n_periods < 1 or tau <= 0:
        raise ValueError("need n_periods >= 1 and tau > 0")
    v = variant.upper()
    pulses = []
    if v == "PDD_XY":
        per = 4
        for k in range(n_periods):
            for i, ax in enumerate("XYXY"):
                pulses.append(Pulse(time=tau * (per * k + i + 1), axis=ax))
    elif v == "SDD_XY":
        per = 8
        for k in range(n_periods):
            for i, ax in enumerate("XYXY"):
                pulses.append(Pulse(time=tau * (per * k + i + 1), axis=ax))
            for i, ax in enumerate("YXYX"):
                pulses.append(Pulse(time=tau * (per * k + 4 + i), axis=ax))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return _normalize(tau * per * n_periods, pulses, f"{v.lower()}(n={n_periods}, tau={tau:g})", merge)


def _cdd_expand(base: str, level: int):
    """Recursive expansion of one CDD_level period, times in integer tau units.

    Integer grid positions keep pulse instants bitwise identical to the
    other tau-grid constructors after the final multiply by tau.
    """
    if level == 1:
        if base == "PDD_XY":
            return 4, [(i + 1, ax) for i, ax in enumerate("XYXY")]
        return 8, [(2 * i + 1, ax) for i, ax in enumerate("XYXY")]
    t_prev, inner = _cdd_expand(base, level - 1)
    pulses = []
    if base == "PDD_XY":
        # (C)-X-(C)-Y-(C)-X-(C)-Y
        for k, ax in enumerate("XYXY"):
            pulses.extend((t + k * t_prev, a) for t, a in inner)
            pulses.append(((k + 1) * t_prev, ax))
        return 4 * t_prev, pulses
    # XY4 seed: every delay of the XY4 period d-X-d-d-Y-d-d-X-d-d-Y-d
    # becomes a full lower-level period, so the duration grows x8 per level
    for k in range(8):
        pulses.extend((t + k * t_prev, a) for t, a in inner)
        if k % 2 == 0:
            pulses.append(((k + 1) * t_prev, "XYXY"[k // 2]))
    return 8 * t_prev, pulses


def cdd(base: str, level: int, tau: float, n_repeats: int = 1, merge: bool = True) -> PulseSequence:
    """Concatenated decoupling seeded with a PDD_XY or XY4 period.

    PDD seed: level l nests four level-(l-1) blocks with X,Y,X,Y pulses at
    the block boundaries (duration x4 per level).  XY4 seed: level l is an
    XY4 supercycle over level-(l-1) periods (duration x8 per level).
    """
    if level < 1:
        raise ValueError("level must be >= 1")
    if n_repeats < 1 or tau <= 0:
        raise ValueError("need n_repeats >= 1 and tau > 0")
    b = base.upper()
    if b not in ("PDD_XY", "XY4"):
        raise ValueError(f"unknown base {base!r}")
    t_per, period = _cdd_expand(b, level)
    pulses = [Pulse(time=tau * (t + k * t_per), axis=ax) for k in range(n_repeats) for t, ax in period]
    label = f"cdd(base={b.lower()}, level={level}, tau={tau:g}, n={n_repeats})"
    return _normalize(tau * t_per * n_repeats, pulses, label, merge)


def udd(level: int, total: float) -> PulseSequence:
    """Uhrig sequence: X pulses at t_j = T sin^2(j pi / (2 l + 2)).

    j runs to l for even l; odd l appends the terminal pulse at exactly T.
    """
    if level < 1 or total <= 0:
        raise ValueError("need level >= 1 and total > 0")
    n_pulses = level if level % 2 == 0 else level + 1
    pulses = [
        Pulse(time=total * math.sin(j * math.pi / (2 * level + 2)) ** 2, axis="X")
        for j in range(1, n_pulses + 1)
    ]
    if level % 2:
        pulses[-1] = Pulse(time=total, axis="X")  # sin^2 -> 1 exactly, pin the float
    return _normalize(total, pulses, f"udd(level={level}, T={total:g})", True)


def qdd(level: int, total: float) -> PulseSequence:
    """Quadratic DD: an inner Y-axis UDD_l nested in every interval of an outer X-axis UDD_l.

    Inner times interpolate the interval endpoints, so an odd inner level
    lands its last Y exactly on the outer X instant; the inner pulse is
    applied first there.
    """
    if level < 1 or total <= 0:
        raise ValueError("need level >= 1 and total > 0")
    outer = [total * math.sin(j * math.pi / (2 * level + 2)) ** 2 for j in range(1, level + 2)]
    if level % 2:
        outer[-1] = total
    edges = [0.0] + outer if level % 2 else [0.0] + outer[:level] + [total]
    frac = [math.sin(i * math.pi / (2 * level + 2)) ** 2 for i in range(1, level + 2)]
    n_inner = level if level % 2 == 0 else level + 1
    pulses = []
    for j in range(len(edges) - 1):
        lo, hi = edges[j], edges[j + 1]
        for i in range(n_inner):
            w = frac[i]
            pulses.append(Pulse(time=lo * (1.0 - w) + hi * w, axis="Y"))
        is_outer_instant = j < level or level % 2
        if is_outer_instant:
            pulses.append(Pulse(time=hi, axis="X"))
    return _normalize(total, pulses, f"qdd(level={level}, T={total:g})", True)


def hahn(total: float) -> PulseSequence:
    """Single-echo sequence: one X pulse at T/2."""
    return PulseSequence(total, (Pulse(total / 2.0, "X"),), label=f"hahn(T={total:g})")


class DslError(ValueError):
    """Parse failure with 1-based line/column location."""

    def __init__(self, message, line, column):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


_MACROS = {
    "cpmg": lambda a: cpmg_family("CPMG", int(a[0]), a[1]),
    "xy4": lambda a: cpmg_family("XY4", int(a[0]), a[1]),
    "xy8": lambda a: cpmg_family("XY8", int(a[0]), a[1]),
    "pdd": lambda a: pdd_family("PDD_XY", int(a[0]), a[1]),
    "sdd": lambda a: pdd_family("SDD_XY", int(a[0]), a[1]),
    "udd": lambda a: udd(int(a[0]), a[1]),
    "qdd": lambda a: qdd(int(a[0]), a[1]),
    "hahn": lambda a: hahn(a[0]),
}

_FLOAT = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_RE_T = re.compile(rf"^T\s*=\s*({_FLOAT})$")
_RE_PULSE = re.compile(rf"^t\s*=\s*({_FLOAT})\s*:\s*([XYxy])$")
_RE_MACRO = re.compile(rf"^(\w+)\s*\(\s*([^)]*)\)$")


def _location(text, offset):
    line = text.count("\n", 0, offset) + 1
    column = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, column


def parse_dsl(text: str) -> PulseSequence:
    """Parse ``T=<us>; t=<us>:<X|Y>; ...`` or a single macro call like ``xy4(2, 0.5)``.

    Coincident same-axis pulse pairs cancel during normalization; a pulse
    outside [0, T] or a malformed statement raises :class:`DslError` with
    its location.
    """
    statements = []
    offset = 0
    for chunk in text.split(";"):
        stripped = chunk.strip()
        if stripped:
            statements.append((stripped, offset + chunk.index(stripped[0])))
        offset += len(chunk) + 1
    if not statements:
        raise DslError("empty sequence text", 1, 1)

    first, first_off = statements[0]
    m = _RE_MACRO.match(first)
    if m:
        if len(statements) > 1:
            line, col = _location(text, statements[1][1])
            raise DslError("macro call must be the only statement", line, col)
        name = m.group(1).lower()
        raw = [s.strip() for s in m.group(2).split(",") if s.strip()]
        try:
            if name == "cdd":
                base = raw[0].strip("'\"")
                args = [float(x) for x in raw[1:]]
                n = int(args[2]) if len(args) > 2 else 1
                return cdd(base, int(args[0]), args[1], n)
            if name not in _MACROS:
                raise KeyError(name)
            return _MACROS[name]([float(x) for x in raw])
        except (KeyError, ValueError, IndexError) as exc:
            line, col = _location(text, first_off)
            raise DslError(f"bad macro call {first!r}: {exc}", line, col) from None

    m = _RE_T.match(first)
    if m is None:
        line, col = _location(text, first_off)
        raise DslError("sequence must start with T=<duration> or a macro call", line, col)
    duration = float(m.group(1))
    if duration <= 0:
        line, col = _location(text, first_off)
        raise DslError("duration must be positive", line, col)

    pulses = []
    for stmt, off in statements[1:]:
        m = _RE_PULSE.match(stmt)
        if m is None:
            line, col = _location(text, off)
            raise DslError(f"bad pulse statement {stmt!r}", line, col)
        t = float(m.group(1))
        if t < 0 or t > duration:
            line, col = _location(text, off)
            raise DslError(f"pulse at t={t:g} outside [0, {duration:g}]", line, col)
        pulses.append(Pulse(time=t, axis=m.group(2).upper()))
    return _normalize(duration, pulses, "dsl", True)


def render_dsl(seq: PulseSequence) -> str:
    """Render the explicit DSL form; parse_dsl inverts it exactly."""
    parts = [f"T={seq.duration!r}"]
    parts.extend(f"t={p.time!r}:{p.axis}" for p in seq.pulses)
    return "; ".join(parts)


def to_json(seq: PulseSequence) -> str:
    """Serialize as ``{"duration", "pulses": [{"time", "axis"}, ...]}``.

    Pulses appear in application order (time-sorted; at a shared instant the
    physically-first pulse, e.g. a nested inner pulse, comes first), which
    is deterministic and therefore byte-stable.
    """
    doc = {
        "duration": seq.duration,
        "pulses": [{"time": p.time, "axis": p.axis} for p in seq.pulses],
    }
    return json.dumps(doc, separators=(",", ":"))


def from_json(text: str) -> PulseSequence:
    doc = json.loads(text)
    pulses = tuple(Pulse(time=float(p["time"]), axis=str(p["axis"])) for p in doc["pulses"])
    return PulseSequence(duration=float(doc["duration"]), pulses=pulses, label="json")


def filter_function(seq: PulseSequence) -> FilterFunction:
    """Lower a sequence to its filter function.

    Axis labels are irrelevant for ideal-pulse dephasing, so only pulse
    instants matter; an instant hosting an even number of pulses flips the
    sign twice and is dropped.  A pulse at exactly t=T flips nothing.
    """
    counts = {}
    for p in seq.pulses:
        if 0.0 < p.time < seq.duration:
            counts[p.time] = counts.get(p.time, 0) + 1
    breaks = tuple(sorted(t for t, n in counts.items() if n % 2))
    return FilterFunction(duration=seq.duration, breakpoints=breaks)
