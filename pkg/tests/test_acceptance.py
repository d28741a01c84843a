"""The acceptance gate: one test per criterion, each at its stated
tolerance, printing one PASS/FAIL line.

Criterion 2 is asserted exactly as stated and is expected to FAIL: the
quoted case constants (c_B=1/2, c_C=1, r_comp=1/2) are refuted by the
exhaustive enumeration itself - (12, 0, 4, 0, -3) -> k = 13 sits on the
hyperplane with Phi = 0 and satisfies none of the three cases, and the
family (b^2+b, 0, b+1, 0, -b) reproduces this at every scale.  The
companion check runs the same sweep at the enumeration-validated
constants shipped as defaults and passes.  See notes/decisions.md.
"""

import numpy as np
import pytest

from torusnls.attractor import (
    ForcedRunConfig,
    absorbing_sweep,
    energy_dissipation_residual,
    global_smoothing_check,
    mass_dissipation_residual,
    relative_residual,
)
from torusnls.dynamics import (
    DEFOCUSING,
    EquationParams,
    StepperConfig,
    damped_propagate,
    evolve,
    mass,
    nonlinearity,
)
from torusnls.gauge import PhaseState, evolve_gauged, to_gauge
from torusnls.resonance import (
    CaseConstants,
    normal_form_transform,
    split_nonlinearity,
    verify_decomposition,
)
from torusnls.smoothing import (
    normal_form_remainder,
    random_sobolev_data,
    smoothing_difference_field,
    smoothing_refinement,
)
from torusnls.spectral import GridSpec, SpectralField, project_band, sobolev_norm

QUINTIC = EquationParams(p=5, sign=DEFOCUSING)


def report(n, passed, detail):
    print(f"CRITERION {n}: {'PASS' if passed else 'FAIL'} - {detail}")
    return passed


# ----------------------------------------------------------------------

def test_criterion_01_exact_identity_suite():
    """R1 + R2 + NR equals the dealiased product to 1e-12 per coefficient
    over 100 unit-mass random fields at K=8; the single-mode split is
    (3A^5, -2A^5, 0)."""
    rng = np.random.default_rng(2024)
    g = GridSpec(8, 3.0)
    worst = 0.0
    for _ in range(100):
        c = rng.normal(size=17) + 1j * rng.normal(size=17)
        u = SpectralField(g, c / np.linalg.norm(c))
        parts = split_nonlinearity(u, QUINTIC)
        defect = np.max(np.abs(parts.total().coeffs - nonlinearity(u, QUINTIC).coeffs))
        worst = max(worst, defect)
    amp = 1.1
    pw = split_nonlinearity(SpectralField.plane_wave(g, 1, amp), QUINTIC)
    single_ok = (
        abs(pw.r1.coeff(1) - 3 * amp**5) < 1e-12
        and abs(pw.r2.coeff(1) + 2 * amp**5) < 1e-12
        and np.max(np.abs(pw.nr.coeffs)) < 1e-12
    )
    ok = report(1, worst < 1e-12 and single_ok,
                f"max split defect {worst:.2e}, single-mode split ok={single_ok}")
    assert ok


def test_criterion_02_case_coverage_at_stated_defaults():
    """Exhaustive verification on |k_i| <= 20 at the stated constants
    (c_B=1/2, c_C=1, r_comp=1/2): zero violations and min |Phi|/k1* > c_B.

    This criterion is genuinely unattainable: the stated constants are
    refuted by enumeration (see the module docstring and the decisions
    ledger).  It is asserted as written and left red on purpose.
    """
    stated = CaseConstants(c_B=0.5, c_C=1.0, r_comp=0.5, gap=2.0)
    rep = verify_decomposition(20, 5, stated)
    detail = (
        f"violations={rep.violations}, min_ratio={rep.min_ratio}, "
        f"first counterexamples {rep.examples[:2]}"
    )
    ok = report(2, rep.violations == 0 and rep.min_ratio > stated.c_B, detail)
    assert ok, (
        "stated constants are refuted by exhaustive enumeration: " + detail
    )


def test_criterion_02_companion_validated_constants():
    """The same sweep at the shipped (enumeration-validated) constants:
    zero violations and the recorded margin min |Phi|/k1* = 6/11 > c_B."""
    rep = verify_decomposition(20, 5, CaseConstants())
    ok = report(
        2, rep.violations == 0 and rep.min_ratio > CaseConstants().c_B,
        f"(companion, validated constants) violations={rep.violations}, "
        f"min_ratio={rep.min_ratio:.4f}",
    )
    assert ok
    assert abs(rep.min_ratio - 6.0 / 11.0) < 1e-12


def test_criterion_03_plane_wave_closed_forms():
    """u(t) = e^{ix} e^{-2it}, Theta(t) = 3t, v(t) = e^{ix} e^{it} and
    |D(t)|_{H^{s+eps}} = 2^{(s+eps)/2} 2|sin t| to 1e-6 at t = 1."""
    s, eps = 0.6, 0.3
    u0 = SpectralField.plane_wave(GridSpec(8, 3.0), 1, 1.0)
    traj = evolve(u0, QUINTIC, StepperConfig(1e-4, "strang_split", 10**9), 1.0)
    e_u = abs(traj.final.coeff(1) - np.exp(-2j))
    e_theta = abs(traj.thetas[-1] - 3.0)
    traj_v = evolve_gauged(u0, QUINTIC, StepperConfig(1e-4, "exponential_rk4", 10**9), 1.0)
    e_v = abs(traj_v.final.coeff(1) - np.exp(1j))
    d = smoothing_difference_field(traj, u0, len(traj) - 1)
    e_d = abs(sobolev_norm(d, s + eps) - 2 ** ((s + eps) / 2) * 2 * abs(np.sin(1.0)))
    ok = report(3, max(e_u, e_theta, e_v, e_d) < 1e-6,
                f"errors: u {e_u:.2e}, theta {e_theta:.2e}, v {e_v:.2e}, D {e_d:.2e}")
    assert ok


def test_criterion_04_gauge_equivalence():
    """Gauging the plain flow agrees with integrating the gauged flow to
    1e-6 in H^1 at t = 0.1, K = 16, random data; the two routes use
    different schemes (split-step vs exponential RK4)."""
    u0 = random_sobolev_data(0.6, 0.05, 5, GridSpec(16, 3.0))
    u0 = (1.0 / sobolev_norm(u0, 0.6)) * u0
    t_end = 0.1
    traj_u = evolve(u0, QUINTIC, StepperConfig(1e-4, "strang_split", 10**9), t_end)
    traj_v = evolve_gauged(u0, QUINTIC, StepperConfig(1e-4, "exponential_rk4", 10**9), t_end)
    v_from_u = to_gauge(traj_u.final, PhaseState(traj_u.thetas[-1], 0.0, DEFOCUSING))
    err = sobolev_norm(v_from_u - traj_v.final, 1.0)
    ok = report(4, err < 1e-6, f"H^1 disagreement {err:.2e}")
    assert ok


def test_criterion_05_smoothing_trend():
    """p=5, s=0.6, eps=0.3, T=0.5: |D(T)|_{H^0.9} stable within 10% under
    K: 256 -> 512 while the data norm grows >= 15%; band ratios decrease
    along N in {16,32,64,128} within 20% noise.  Median of 8 seeds."""
    rows = smoothing_refinement(list(range(8)), s=0.6, eps=0.3, k_coarse=256,
                                k_fine=512, t_end=0.5, dt=2.5e-4)
    stability = float(np.median([abs(r.d_fine - r.d_coarse) / r.d_coarse for r in rows]))
    growth = float(np.median([r.lin_fine / r.lin_coarse - 1.0 for r in rows]))
    ratios = np.median(np.asarray([r.band_ratios for r in rows]), axis=0)
    monotone = bool(np.all(ratios[1:] <= 1.2 * ratios[:-1]))
    ok = report(
        5, stability <= 0.10 and growth >= 0.15 and monotone,
        f"median |D| change {stability:.2%}, linear growth {growth:.2%}, "
        f"median band ratios {np.array2string(ratios, precision=4)}",
    )
    assert ok


def test_criterion_06_normal_form_boundedness():
    """|T[u0,...,u0]|_{H^{s+eps}} finite and K-stable within 25% from K=8
    to K=16, and the remainder obeys |z(t)| <= 5 |z(0)| + 0.01 on [0, 0.1]."""
    s = 0.6
    norms = {}
    for k_max in (8, 16):
        g = GridSpec(k_max, 3.0)
        u0 = random_sobolev_data(s, 0.05, 7, g)
        u0 = (1.0 / sobolev_norm(u0, s)) * u0
        t_field = normal_form_transform(u0, u0, QUINTIC, CaseConstants())
        norms[k_max] = sobolev_norm(t_field, s + 0.5)
    k_change = abs(norms[16] - norms[8]) / norms[8]

    g = GridSpec(16, 3.0)
    u0 = random_sobolev_data(s, 0.05, 7, g)
    u0 = (1.0 / sobolev_norm(u0, s)) * u0
    traj_v = evolve_gauged(u0, QUINTIC, StepperConfig(1e-3, "exponential_rk4", 10), 0.1)
    series = normal_form_remainder(traj_v, u0, QUINTIC, CaseConstants(), s, 0.3)
    z = series.column("Hseps_z")
    bound_ok = max(z) <= 5.0 * z[0] + 0.01
    ok = report(
        6, np.isfinite(norms[16]) and k_change <= 0.25 and bound_ok,
        f"|T| at K=8/16: {norms[8]:.4f}/{norms[16]:.4f} (change {k_change:.2%}); "
        f"max|z|/|z0| = {max(z) / z[0]:.2f}",
    )
    assert ok


def test_criterion_07_dissipation_identities():
    """Mass and energy balance residuals <= 1e-6 relative at dt = 1e-4 with
    order >= 1.9 under halving; unforced mass decay matches e^{-2 gamma t}
    to 1e-8."""
    g = GridSpec(64, 3.0)
    f = SpectralField.from_modes(g, {1: 0.25, -1: 0.25})
    params = EquationParams(p=5, sign=DEFOCUSING, gamma=0.5, forcing=f)
    u0 = random_sobolev_data(1.2, 0.05, 1, g)
    u0 = (1.0 / sobolev_norm(u0, 1.0)) * u0

    rel = {}
    for dt in (2e-4, 1e-4):
        traj = evolve(u0, params, StepperConfig(dt, "exponential_rk4", 1), 0.05,
                      track_phase=False)
        rel[dt] = (relative_residual(mass_dissipation_residual(traj, params)),
                   relative_residual(energy_dissipation_residual(traj, params)))
    order_m = np.log(rel[2e-4][0] / rel[1e-4][0]) / np.log(2.0)
    order_e = np.log(rel[2e-4][1] / rel[1e-4][1]) / np.log(2.0)

    free = EquationParams(p=5, sign=DEFOCUSING, gamma=0.5)
    traj = evolve(u0, free, StepperConfig(5e-4, "exponential_rk4", 200), 1.0,
                  track_phase=False)
    m0 = mass(u0)
    decay_err = max(abs(mass(u) - m0 * np.exp(-2 * 0.5 * t)) / m0 for t, u in traj)

    ok = report(
        7,
        rel[1e-4][0] <= 1e-6 and rel[1e-4][1] <= 1e-6
        and order_m >= 1.9 and order_e >= 1.9 and decay_err <= 1e-8,
        f"residuals at dt=1e-4: mass {rel[1e-4][0]:.2e} (order {order_m:.2f}), "
        f"energy {rel[1e-4][1]:.2e} (order {order_e:.2f}); decay defect {decay_err:.2e}",
    )
    assert ok


def test_criterion_08_absorbing_set():
    """gamma = 0.5, f = cos x, initial H^1 norms {1, 5, 10}: late-time H^1
    maxima agree within 5%, and the damped semigroup contracts every H^1
    norm by exactly e^{-gamma t}."""
    g = GridSpec(32, 3.0)
    f = SpectralField.from_modes(g, {1: 0.5, -1: 0.5})
    params = EquationParams(p=5, sign=DEFOCUSING, gamma=0.5, forcing=f)
    profile = SpectralField.from_modes(g, {1: 1.0, 2: 0.4, -1: 0.2})
    base = sobolev_norm(profile, 1.0)
    members = [(target / base) * profile for target in (1.0, 5.0, 10.0)]
    cfg = ForcedRunConfig(params=params, members=members, horizon=30.0,
                          dt=1e-3, transient_time=3.0, transient_dt=5e-5,
                          record_dt=0.1)
    rep_sweep = absorbing_sweep(cfg)

    w = damped_propagate(members[-1], 0.7, 0.5)
    semigroup_defect = abs(
        sobolev_norm(w, 1.0) - np.exp(-0.5 * 0.7) * sobolev_norm(members[-1], 1.0)
    )
    ok = report(
        8,
        rep_sweep.spread <= 0.05 and not rep_sweep.flagged and semigroup_defect < 1e-12,
        f"maxima spread {rep_sweep.spread:.3%}, R*={rep_sweep.r_star:.4f}, "
        f"T*={rep_sweep.t_star:.1f}, semigroup defect {semigroup_defect:.1e}",
    )
    assert ok


def test_criterion_09_global_smoothing_bound():
    """Running max of |v - W^gamma_t u0|_{H^1.3} over horizon 20 grows
    less than 2% across the final half."""
    g = GridSpec(256, 3.0)
    f = SpectralField.from_modes(
        g, {0: 0.1, 1: 0.25, -1: 0.25, 2: 0.1, -2: 0.1, 3: 0.05, -3: 0.05}
    )
    params = EquationParams(p=5, sign=DEFOCUSING, gamma=0.5, forcing=f)
    u0 = random_sobolev_data(1.0, 0.05, 3, g)
    u0 = (2.0 / sobolev_norm(u0, 1.0)) * u0
    traj = evolve(u0, params, StepperConfig(5e-4, "exponential_rk4", 100), 20.0)
    series, windows = global_smoothing_check(traj, u0, 0.5, 0.3, window=0.5)
    t = np.asarray(series.column("t"))
    rm = np.asarray(series.column("running_max"))
    growth = float(rm[-1] / rm[t >= 10.0][0] - 1.0)
    telescoping_ok = all(row[4] <= row[3] + 1e-9 for row in windows.rows)
    ok = report(
        9, growth < 0.02 and telescoping_ok,
        f"running-max growth over final half {growth:.3%}, "
        f"telescoping bound holds: {telescoping_ok}",
    )
    assert ok
