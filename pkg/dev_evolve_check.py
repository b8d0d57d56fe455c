"""Dev smoke for evolve.py: signs, expansions, sensitivity, MC vs analytic."""
import math
import time

import numpy as np

from spindd.noise import OuParams, StaticFieldModel, BathComposition, echo_analytic
from spindd.sequences import cpmg_family, pdd_family, cdd, udd, qdd, hahn, filter_function
from spindd.analytics import w_general, closed_form
from spindd.evolve import (
    PulseErrors, RunConfig, pulse_unitary, free_phase_unitary, bloch_rotation,
    static_unitary, rotation_generator, generator_derivative,
    static_expansion_check, sensitivity_table, ensemble_fidelity, run_trajectory,
    STANDARD_PROTOCOLS, KNOWN_ERROR_CHANNELS, _static_case,
)

print("=== unitarity / basics ===")
e = PulseErrors.calibrated()
for axis in "XY":
    for iz in (-1, 0, 1):
        u = pulse_unitary(axis, e, iz)
        assert np.linalg.norm(u @ u.conj().T - np.eye(2)) < 1e-14
ux = pulse_unitary("X")
assert np.linalg.norm(ux - np.array([[0, -1j], [-1j, 0]])) < 1e-15, ux  # -i sigma_x
r = bloch_rotation(free_phase_unitary(math.pi / 2))
assert np.linalg.norm(r @ [1, 0, 0] - [0, 1, 0]) < 1e-15
print("ok")

print("=== ideal one-period signs (trace/2 of static_unitary, field=0.37) ===")
for proto in STANDARD_PROTOCOLS + ("CDD3", "CDD3_XY4", "UDD6", "UDD5", "QDD4", "QDD5", "QDD6"):
    seq, field = _static_case(proto, 0.37)
    u = static_unitary(seq, field, None)
    dev = np.linalg.norm(u - np.trace(u) / 2 * np.eye(2))
    print(f"{proto:10s} trace/2 = {np.trace(u)/2:+.6f}  off-identity {dev:.2e}  Np={seq.n_pulses}")

print("=== CPMG static formula S_Y = cos(theta) ===")
phi = 0.43
seq, _ = _static_case("CPMG", phi)
u = static_unitary(seq, phi, e, i_z=1)
theta = -2 * (e.eps_x * math.cos(phi) + 2 * e.n_0 * math.sin(phi))
sy = bloch_rotation(u)[1, 1]
print(f"S_Y single = {sy:.8f}  cos(theta_first_order) = {math.cos(theta):.8f}  diff {abs(sy-math.cos(theta)):.2e}")

print("=== expansion reports ===")
for proto in ("CPMG", "PDD_XY", "XY4", "SDD_XY", "XY8", "UDD4", "UDD6", "UDD3", "UDD5", "QDD2", "QDD4", "QDD3", "QDD5", "CDD2_XY4", "CDD3_XY4", "CDD2", "CDD3"):
    try:
        rep = static_expansion_check(proto)
        ce = f"{rep.coeff_rel_error:.2e}" if rep.coeff_rel_error is not None else "  none  "
        print(f"{proto:10s} order={rep.order} r(lam)={rep.residual:.3e} ratio={rep.ratio:.4f} coeff_err={ce}")
    except ValueError as err:
        print(f"{proto:10s} -> {err}")

print("=== UDD odd: sigma_y generator tail vs total time ===")
for total in (1.0, 0.3, 0.1, 0.03):
    seq = udd(3, total)
    d = generator_derivative(seq, 0.4 / total * total / total, PulseErrors(eps_x=1.0))
    # field scaled so B*T = 0.4 * total -> shrink with T
    d = generator_derivative(seq, 0.4, PulseErrors(eps_x=1.0))
    print(f"T={total:5.2f}  dG = {d}")

print("=== sensitivity table vs expected ===")
tab = sensitivity_table()
for proto in STANDARD_PROTOCOLS:
    comp = tab[proto]
    want = KNOWN_ERROR_CHANNELS[proto]
    mark = "OK " if comp == want else "DIFF"
    print(f"{mark} {proto:10s} computed {comp}")
    if comp != want:
        print(f"     expected {want}")

print("=== merged CDD2 sensitivity for comparison ===")
from spindd.sequences import cdd as _cdd
from spindd.evolve import _ERROR_BASIS, _BASIS_FIELD
seqm = _cdd("PDD_XY", 2, 1.0, merge=True)
dv = {}
for name in _ERROR_BASIS:
    direction = PulseErrors(**{_BASIS_FIELD.get(name, name): 0.5})
    dv[name] = generator_derivative(seqm, 0.3, direction)
for name, d in dv.items():
    print(f"  merged CDD2 d/d{name} = {d}")

print("=== MC vs analytic: Hahn echo ===")
bath = OuParams(b=3.3, tau_c=25.0)
t2 = bath.t2
ts = tuple(np.linspace(0.5, 5.0, 8))
cfg = RunConfig(sequence=hahn, bath=bath, times=ts, n_trajectories=20000, seed=7)
t0 = time.time()
curve = ensemble_fidelity(cfg)
dt = time.time() - t0
for t, sx, err in zip(curve.times, curve.sx, curve.sx_err):
    ana = echo_analytic(bath, t)
    z = (sx - ana) / err if err > 0 else 0.0
    print(f"T={t:5.2f}  MC={sx:+.4f}+-{err:.4f}  exact={ana:+.4f}  z={z:+.2f}")
print(f"[{dt:.2f}s for 8x20k]")

print("=== MC vs analytic: XY4 Nd=16 ideal ===")
nd = 16
def xy4_seq(total):
    return cpmg_family("XY4", nd // 4, total / (2 * nd))
ts = tuple(np.linspace(4.0, 20.0, 5))
cfg = RunConfig(sequence=xy4_seq, bath=bath, times=ts, n_trajectories=20000, seed=11)
t0 = time.time()
curve = ensemble_fidelity(cfg)
dt = time.time() - t0
for t, sx, err, sy in zip(curve.times, curve.sx, curve.sx_err, curve.sy):
    w = w_general(filter_function(xy4_seq(t)), bath).w
    ana = math.exp(-bath.b**2 * w)
    z = (sx - ana) / err if err > 0 else 0.0
    print(f"T={t:5.2f}  MC={sx:+.4f}+-{err:.4f}  exact={ana:+.4f}  z={z:+.2f}  SY={sy:+.4f}")
print(f"[{dt:.2f}s for 5x20k XY4-16]")

print("=== determinism: threads and zero-vs-ideal ===")
cfg = RunConfig(sequence=xy4_seq, bath=bath, times=(6.0, 12.0), n_trajectories=10000, seed=3,
                static=StaticFieldModel(detuning=-2*math.pi*0.5, a0=-2*math.pi*2.16),
                errors=PulseErrors.calibrated())
c1 = ensemble_fidelity(cfg, threads=1)
c4 = ensemble_fidelity(cfg, threads=4)
assert all(np.array_equal(getattr(c1, f), getattr(c4, f)) for f in ("sx", "sx_err", "sy", "sy_err")), "thread mismatch"
cfg0a = RunConfig(sequence=xy4_seq, bath=bath, times=(6.0,), n_trajectories=5000, seed=3, errors=None)
cfg0b = RunConfig(sequence=xy4_seq, bath=bath, times=(6.0,), n_trajectories=5000, seed=3, errors=PulseErrors.ideal())
ca, cb = ensemble_fidelity(cfg0a), ensemble_fidelity(cfg0b)
assert np.array_equal(ca.sx, cb.sx) and np.array_equal(ca.sy, cb.sy), "ideal mismatch"
print("ok (threads bitwise, ideal==zero-errors bitwise)")

print("=== run_trajectory: static refocusing ===")
rng = np.random.default_rng(5)
cfg = RunConfig(sequence=hahn(4.0), bath=OuParams(b=2.0, tau_c=math.inf), initial_state="X",
                n_trajectories=1, seed=0)
for _ in range(3):
    v = run_trajectory(cfg, rng)
    print(f"  echo static bloch = {v}")

print("=== CPMG Np=16 with calibrated errors, quick look ===")
npulse = 16
def cpmg_seq(total):
    return cpmg_family("CPMG", npulse // 2, total / (2 * npulse))
static = StaticFieldModel(detuning=-2*math.pi*0.5, a0=-2*math.pi*2.16)
ts = tuple(np.linspace(1.0, 15.0, 8))
t0 = time.time()
ideal = ensemble_fidelity(RunConfig(sequence=cpmg_seq, bath=bath, static=static, times=ts, n_trajectories=20000, seed=21))
faulty = ensemble_fidelity(RunConfig(sequence=cpmg_seq, bath=bath, static=static, times=ts, n_trajectories=20000, seed=21, errors=PulseErrors.calibrated()))
dt = time.time() - t0
for i, t in enumerate(ts):
    print(f"T={t:5.2f} ideal SX={ideal.sx[i]:+.4f} faulty SX={faulty.sx[i]:+.4f} dSX={abs(ideal.sx[i]-faulty.sx[i]):.4f}  ideal SY={ideal.sy[i]:+.4f} faulty SY={faulty.sy[i]:+.4f} dSY={abs(ideal.sy[i]-faulty.sy[i]):.4f}")
print(f"[{dt:.2f}s for 2x8x20k CPMG-16]")
