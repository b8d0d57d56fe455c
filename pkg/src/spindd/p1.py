"""P1-center line structure: electron spin-1/2 coupled to the nitrogen spin-1.

Diagonalizes the 6x6 substitutional-nitrogen Hamiltonian to get the ESR
transition frequencies and their S_x spectral weights, then assembles the
per-line O-U bath acting on the probed spin.

Units: all couplings and output frequencies in MHz (plain, not angular);
the static field in Gauss.  Bath amplitudes and rates follow the noise
module convention (rad/us and 1/us).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .noise import BathComposition, OuParams

GAMMA_E = 2.8025  # MHz/G, free-electron value

_SPIN_HALF = tuple(
    0.5 * np.array(m, dtype=complex)
    for m in ([[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]])
)
_R2 = 1.0 / math.sqrt(2.0)
_SPIN_ONE = (
    _R2 * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex),
    _R2 * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex),
    np.diag([1.0, 0.0, -1.0]).astype(complex),
)
_ID2 = np.eye(2, dtype=complex)
_ID3 = np.eye(3, dtype=complex)

S_OPS = tuple(np.kron(s, _ID3) for s in _SPIN_HALF)
I_OPS = tuple(np.kron(_ID2, j) for j in _SPIN_ONE)


@dataclass(frozen=True)
class P1Params:
    """Hyperfine, quadrupole and Zeeman constants of one P1 orientation.

    ``axis`` is the Jahn-Teller symmetry axis in the lab frame whose z is
    the static-field direction; only its angle to z affects the spectrum.
    """

    a_z: float = 114.0  # axial hyperfine [MHz]
    a_x: float = 81.3  # transverse hyperfine [MHz]
    quadrupole: float = -4.0  # MHz
    b0: float = 114.0  # Gauss
    gamma_e: float = GAMMA_E  # MHz/G
    axis: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        v = np.asarray(self.axis, dtype=float)
        if v.shape != (3,) or abs(float(v @ v) - 1.0) > 1e-12:
            raise ValueError("axis must be a unit 3-vector")


def type2_axis(azimuth: float = 0.0) -> tuple:
    """Lab-frame symmetry axis of the three off-field <111> orientations.

    With the field along one cube diagonal the other three make
    arccos(1/3) with it; the azimuth picks the transverse direction and
    drops out of the spectrum.
    """
    c = 1.0 / 3.0
    s = math.sqrt(1.0 - c * c)
    return (s * math.cos(azimuth), s * math.sin(azimuth), c)


@dataclass(frozen=True)
class TransitionLine:
    """One ESR transition: frequency [MHz], relative S_x weight, labels."""

    frequency: float
    weight: float
    i_z: int
    kind: int = 0  # 1 = axis along the field, 2 = tilted; 0 = unlabeled


def build_hamiltonian(p: P1Params) -> np.ndarray:
    """6x6 P1 Hamiltonian in MHz for a general symmetry axis.

    H = gamma_e B0 S_z + A_x (S.I) + (A_z - A_x)(S.n)(I.n) + P (I.n)^2,
    which is the usual axial form when n = z.
    """
    n = np.asarray(p.axis, dtype=float)
    s_n = sum(n[k] * S_OPS[k] for k in range(3))
    i_n = sum(n[k] * I_OPS[k] for k in range(3))
    h = p.gamma_e * p.b0 * S_OPS[2]
    h = h + p.a_x * sum(S_OPS[k] @ I_OPS[k] for k in range(3))
    h = h + (p.a_z - p.a_x) * (s_n @ i_n)
    h = h + p.quadrupole * (i_n @ i_n)
    return h


def transition_lines(p: P1Params, floor: float = 0.02) -> list:
    """ESR lines of one P1 orientation, sorted by frequency.

    Transitions are eigenstate pairs with an electron spin flip
    (|<S_z>_i - <S_z>_j| > 1/2; pairs inside one electron manifold are
    nuclear transitions and are excluded).  Weights are |<i|S_x|j>|^2,
    lines below the relative ``floor`` are dropped, and the survivors are
    renormalized to sum to 1.  Coincident frequencies merge into one line.
    The I_z label is the rounded nuclear z projection averaged over the
    pair, which stays near an integer even for a tilted symmetry axis.
    """
    h = build_hamiltonian(p)
    evals, evecs = np.linalg.eigh(h)
    sx = evecs.conj().T @ S_OPS[0] @ evecs
    sz = np.diag(evecs.conj().T @ S_OPS[2] @ evecs).real
    iz = np.diag(evecs.conj().T @ I_OPS[2] @ evecs).real
    raw = []  # (frequency, weight, mean nuclear projection)
    for i in range(6):
        for j in range(i + 1, 6):
            if abs(sz[i] - sz[j]) <= 0.5 or evals[j] - evals[i] <= 0.0:
                continue
            raw.append((evals[j] - evals[i], abs(sx[i, j]) ** 2, 0.5 * (iz[i] + iz[j])))
    raw.sort()
    merged = []
    for f, w, m in raw:
        if merged and f - merged[-1][0] <= 1e-6:
            f0, w0, m0 = merged[-1]
            wt = w0 + w
            merged[-1] = (f0, wt, (w0 * m0 + w * m) / wt if wt > 0.0 else m0)
        else:
            merged.append((f, w, m))
    total = sum(w for _, w, _ in merged)
    kept = [(f, w, m) for f, w, m in merged if w / total >= floor]
    norm = sum(w for _, w, _ in kept)
    return [
        TransitionLine(frequency=float(f), weight=float(w / norm), i_z=int(round(m)))
        for f, w, m in kept
    ]


def p1_spectrum(p: P1Params = P1Params(), floor: float = 0.02, populations=(0.25, 0.75)) -> list:
    """Combined line set of both P1 orientation classes.

    One of the four Jahn-Teller axes lies along the field (kind 1), the
    other three are equivalent tilted ones (kind 2); ``populations`` are
    their occupation fractions and multiply the per-orientation weights.
    """
    out = []
    for kind, axis, pop in ((1, (0.0, 0.0, 1.0), populations[0]), (2, type2_axis(), populations[1])):
        for ln in transition_lines(replace(p, axis=axis), floor=floor):
            out.append(TransitionLine(ln.frequency, pop * ln.weight, ln.i_z, kind))
    return sorted(out, key=lambda ln: ln.frequency)


def bath_from_lines(lines, rates, amplitudes, static_line: float | None = None) -> BathComposition:
    """O-U bath with one line per spectral component.

    rates: correlation decay rate R_k [1/us] per line, or one value for all.
    amplitudes: rms b_k [rad/us] per line, or one total rms split by the
    spectral weights (b_k^2 proportional to weight).  ``static_line`` adds an
    extra frozen component (R = 0) with the given rms.
    """
    lines = list(lines)
    m = len(lines)
    rates = [float(r) for r in (rates if np.ndim(rates) else [rates] * m)]
    if np.ndim(amplitudes):
        amps = [float(a) for a in amplitudes]
    else:
        wsum = sum(ln.weight for ln in lines)
        amps = [float(amplitudes) * math.sqrt(ln.weight / wsum) for ln in lines]
    if len(rates) != m or len(amps) != m:
        raise ValueError("need one rate and one amplitude per line")
    if any(r < 0 for r in rates):
        raise ValueError("rates must be nonnegative")
    parts = [OuParams(b=a, tau_c=(math.inf if r == 0.0 else 1.0 / r)) for a, r in zip(amps, rates)]
    if static_line is not None:
        parts.append(OuParams(b=float(static_line), tau_c=math.inf))
    return BathComposition(lines=tuple(parts))
