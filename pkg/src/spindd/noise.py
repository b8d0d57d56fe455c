"""Ornstein-Uhlenbeck dephasing noise: exact segment sampling and closed forms.

The noise field B(t) acting on the central spin is a stationary Gaussian
Markov process with autocorrelation C(t) = b^2 exp(-|t|/tau_c).  All
dephasing quantities reduce to functionals of (b, R = 1/tau_c).  Working
units are angular: b in rad/us, times in us; published MHz values are
converted with a factor 2*pi at the config boundary, never here.

Sampling is exact per delay segment: conditional on the field value at the
start of a segment of length delta, the pair (field at segment end,
accumulated phase integral) is jointly Gaussian with moments known in
closed form, so there is no time-step bias at any delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "OuParams",
    "StaticFieldModel",
    "StaticSample",
    "BathComposition",
    "NoiseStep",
    "correlation",
    "sample_initial",
    "sample_step",
    "sample_static",
    "compose_baths",
    "fid_analytic",
    "echo_analytic",
    "phase_variance_kernel",
]

# Series switch point for the cancellation-prone kernels below.  At x = 1e-3
# the expm1 form is still good to ~1e-10 relative and the truncated series
# to ~1e-13, so either branch is acceptable at the crossover.
_SERIES_CUT = 1e-3


def phase_variance_kernel(x):
    """f(x) = 2x - 3 + 4 e^{-x} - e^{-2x}, evaluated without cancellation.

    Var(Phi) over a segment of length delta is (b^2/R^2) f(R delta); the
    same kernel gives the exact Hahn-echo exponent W = f(R T / 2) / R^2.
    The four terms cancel to O(x^3), so the direct form loses all digits
    for small x; below the cut a series accurate to x^7 is used.

    Parameters
    ----------
    x : float or ndarray
        Nonnegative argument R*delta.

    Returns
    -------
    float or ndarray
    """
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SERIES_CUT
    xs = np.where(small, x, 0.0)
    series = xs**3 * (2.0 / 3.0 + xs * (-0.5 + xs * (7.0 / 30.0 + xs * (-1.0 / 12.0 + xs * (31.0 / 1260.0)))))
    xl = np.where(small, 1.0, x)
    direct = 2.0 * xl + 4.0 * np.expm1(-xl) - np.expm1(-2.0 * xl)
    out = np.where(small, series, direct)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class OuParams:
    """One O-U noise line: rms amplitude b [rad/us] and correlation time tau_c [us].

    tau_c = inf encodes a quasi-static Gaussian line (R = 0).
    """

    b: float
    tau_c: float

    def __post_init__(self):
        if self.b < 0:
            raise ValueError("b must be nonnegative")
        if not self.tau_c > 0:
            raise ValueError("tau_c must be positive (inf allowed)")

    @property
    def rate(self) -> float:
        """Correlation decay rate R = 1/tau_c [1/us]; 0 for a static line."""
        return 0.0 if math.isinf(self.tau_c) else 1.0 / self.tau_c

    @property
    def t2(self) -> float:
        """Slow-bath Hahn-echo time (12 tau_c / b^2)^(1/3) [us]."""
        return (12.0 * self.tau_c / self.b**2) ** (1.0 / 3.0)


@dataclass(frozen=True)
class StaticFieldModel:
    """Static detuning plus hyperfine shift from the host nitrogen spin.

    The field offset is detuning + a0 * I_z with I_z in {+1, -1, 0} drawn
    once per trajectory with probabilities (p_plus, p_minus, p_zero).
    """

    detuning: float = 0.0  # rad/us
    a0: float = 0.0  # rad/us
    iz_probabilities: tuple = (0.5, 0.2, 0.3)

    def __post_init__(self):
        p = np.asarray(self.iz_probabilities, dtype=float)
        if p.shape != (3,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("iz_probabilities must be 3 nonnegative values summing to 1")


@dataclass(frozen=True)
class StaticSample:
    """Drawn static field offset [rad/us] and the hyperfine projection behind it."""

    field: float
    i_z: int


@dataclass(frozen=True)
class BathComposition:
    """Several independent O-U lines acting additively on the spin phase."""

    lines: tuple

    def __post_init__(self):
        if len(self.lines) == 0:
            raise ValueError("BathComposition requires at least one line")
        for p in self.lines:
            if not isinstance(p, OuParams):
                raise TypeError("lines must be OuParams")


@dataclass(frozen=True)
class NoiseStep:
    """Joint draw over one delay segment: field at segment end and phase integral."""

    b_next: np.ndarray
    phase_increment: np.ndarray


def correlation(p: OuParams, t):
    """Autocorrelation C(t) = b^2 exp(-|t|/tau_c).

    Parameters
    ----------
    p : OuParams
    t : float or ndarray
        Time lag [us]; sign is irrelevant.
    """
    t = np.asarray(t, dtype=float)
    out = p.b**2 * np.exp(-np.abs(t) * p.rate)
    return out if out.ndim else float(out)


def sample_initial(p: OuParams, rng, size=None):
    """Draw B(0) from the stationary distribution N(0, b^2)."""
    return rng.normal(0.0, p.b, size=size)


def step_moments(p: OuParams, delta: float):
    """Exact conditional moments of (B_next, Phi) given B_current over a segment.

    Returns
    -------
    decay : float
        e^{-R delta}; conditional mean of B_next is B_current * decay.
    phase_gain : float
        Conditional mean of Phi is B_current * phase_gain
        (= (1 - e^{-R delta})/R, -> delta as R -> 0).
    var_b, var_phi, cov : float
        Conditional (co)variances.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    r = p.rate
    x = r * delta
    decay = math.exp(-x)
    em = -math.expm1(-x)  # 1 - e^{-x}, no cancellation
    phase_gain = delta if r == 0.0 else em / r
    var_b = p.b**2 * (-math.expm1(-2.0 * x))
    var_phi = p.b**2 * delta**2 * (float(phase_variance_kernel(x)) / x**2 if x > 0 else 0.0)
    cov = 0.0 if x == 0.0 else p.b**2 * delta * em**2 / x
    return decay, phase_gain, var_b, var_phi, cov


def sample_step(p: OuParams, b_current, delta: float, rng) -> NoiseStep:
    """Exact joint draw of (B(t+delta), integral of B over the segment).

    Conditional on ``b_current``, the pair is Gaussian with the moments of
    :func:`step_moments`; the draw uses the 2x2 Cholesky factor, consuming
    exactly two standard normals per trajectory regardless of parameters.

    Parameters
    ----------
    p : OuParams
    b_current : float or ndarray
        Field value(s) at segment start [rad/us].
    delta : float
        Segment length [us], > 0.
    rng : numpy.random.Generator
    """
    b_current = np.asarray(b_current, dtype=float)
    decay, gain, var_b, var_phi, cov = step_moments(p, delta)
    z = rng.standard_normal((2,) + b_current.shape)
    if var_b <= 0.0:
        # static line: field is frozen, phase accumulates deterministically
        return NoiseStep(b_next=b_current + 0.0 * z[0], phase_increment=b_current * delta + 0.0 * z[1])
    l11 = math.sqrt(var_b)
    l21 = cov / l11
    l22 = math.sqrt(max(var_phi - l21**2, 0.0))
    b_next = b_current * decay + l11 * z[0]
    phi = b_current * gain + l21 * z[0] + l22 * z[1]
    return NoiseStep(b_next=b_next, phase_increment=phi)


def sample_static(m: StaticFieldModel, rng, size=None):
    """Draw the static field offset B_dtn + A_0 * I_z.

    Returns a :class:`StaticSample` for scalar draws, or an
    ``(offsets, i_z)`` array pair when ``size`` is given.
    """
    p_plus, p_minus, p_zero = m.iz_probabilities
    iz = rng.choice(np.array([1, -1, 0]), size=size, p=[p_plus, p_minus, p_zero])
    field = m.detuning + m.a0 * iz
    if size is None:
        return StaticSample(field=float(field), i_z=int(iz))
    return field, iz


def compose_baths(c: BathComposition) -> OuParams:
    """Reduce a multi-line bath to the equivalent single line.

    The reduction preserves b_eff^2 = sum b_j^2 and b_eff^2 R_eff =
    sum b_j^2 R_j, which is the pair that fixes the slow-bath decoupled
    decay exponent.  Lines with b = 0 contribute nothing.
    """
    b2 = sum(p.b**2 for p in c.lines)
    b2r = sum(p.b**2 * p.rate for p in c.lines)
    if b2 == 0.0:
        return OuParams(b=0.0, tau_c=math.inf)
    r_eff = b2r / b2
    return OuParams(b=math.sqrt(b2), tau_c=math.inf if r_eff == 0.0 else 1.0 / r_eff)


def fid_analytic(p: OuParams, t):
    """Slow-bath free-induction decay F(T) = exp(-b^2 T^2 / 2).

    Valid for b * tau_c >> 1 where the phase is quasi-static over the decay.
    """
    t = np.asarray(t, dtype=float)
    out = np.exp(-0.5 * p.b**2 * t**2)
    return out if out.ndim else float(out)


def echo_analytic(p: OuParams, t):
    """Slow-bath Hahn-echo decay E(T) = exp(-(T/T_2)^3), T_2 = (12 tau_c/b^2)^(1/3)."""
    t = np.asarray(t, dtype=float)
    out = np.exp(-((t / p.t2) ** 3))
    return out if out.ndim else float(out)
