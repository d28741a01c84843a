"""Phase-rotation gauge and the gauged evolution equation.

Multiplying every coefficient by the unit scalar

    L(t) = exp(-i * sign * Theta(t)),
    Theta(t) = (p+1)/(4 pi) * int_0^t int |u|^(p-1) dx ds,

removes the multiplicity-weighted resonant part of the nonlinearity:
the gauged field v = L * u solves

    i v_t + v_xx + sign * (R2[v] + NR[v]) = 0,

i.e. the same flow with the closed-form resonant projection subtracted.
The rotation leaves every |v(x)| and hence every norm and every L^q mass
of the field untouched.  Sign pairing (equation sign against the sign in
the exponent) is fixed here once and validated by plane-wave closed
forms in the tests; it is not configurable independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import (
    ConfigurationError,
    EquationParams,
    Etdrk4Stepper,
    StepperConfig,
    Trajectory,
    _check_state,
    phase_integrand,
)
from .spectral import TAU, GridSpec, SpectralField


@dataclass(frozen=True)
class PhaseState:
    """Accumulated gauge phase and its trapezoid bookkeeping.

    theta is the unsigned magnitude Theta(t) >= 0; the equation sign decides
    the direction of rotation.  last_integrand holds the previous
    int |u|^(p-1) dx so each step closes one trapezoid panel.
    """

    theta: float
    last_integrand: float
    sign: int

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError("theta is nondecreasing from zero")


def init_phase(u0: SpectralField, params: EquationParams) -> PhaseState:
    return PhaseState(0.0, phase_integrand(u0, params), params.sign)


def phase_step(
    state: PhaseState, f: SpectralField, params: EquationParams, dt: float
) -> PhaseState:
    """Advance Theta by one trapezoid panel of width dt ending at `f`."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    integrand = phase_integrand(f, params)
    pref = (params.p + 1) / (4.0 * np.pi)
    return PhaseState(
        theta=state.theta + pref * dt * 0.5 * (state.last_integrand + integrand),
        last_integrand=integrand,
        sign=state.sign,
    )


def gauge_factor(theta: float, sign: int) -> complex:
    """The unit scalar multiplying coefficients under to_gauge."""
    return complex(np.exp(-1j * sign * theta))


def to_gauge(f: SpectralField, state: PhaseState) -> SpectralField:
    return SpectralField(f.grid, f.coeffs * gauge_factor(state.theta, state.sign))


def from_gauge(f: SpectralField, state: PhaseState) -> SpectralField:
    return SpectralField(f.grid, f.coeffs * np.conj(gauge_factor(state.theta, state.sign)))


def gauged_nonlinear_term(grid: GridSpec, params: EquationParams):
    """i*sign*(|v|^(p-1)v - resonant projection) on raw coefficients.

    One padded synthesis serves both the product and the integral, so a
    step of the gauged flow costs the same as a step of the plain one.
    """
    m = grid.num_points
    slots = np.arange(-grid.max_mode, grid.max_mode + 1) % m
    dx = TAU / m
    pref = (params.p + 1) / (4.0 * np.pi)
    sgn = 1j * params.sign

    def n_fn(c: np.ndarray) -> np.ndarray:
        spec = np.zeros(m, dtype=np.complex128)
        spec[slots] = c
        u = np.fft.ifft(spec) * m
        w = np.abs(u) ** (params.p - 1)
        nl = (np.fft.fft(w * u) / m)[slots]
        integral = float(np.sum(w) * dx)
        return sgn * (nl - pref * integral * c)

    return n_fn


def gauged_rhs(f: SpectralField, params: EquationParams) -> SpectralField:
    """dv/dt of the gauged flow; the resonant projection is absent by
    construction.  Uses the closed-form subtraction, so any odd p works."""
    n_fn = gauged_nonlinear_term(f.grid, params)
    kk = f.k.astype(np.float64)
    return SpectralField(f.grid, -1j * kk**2 * f.coeffs + n_fn(f.coeffs))


def evolve_gauged(
    u0: SpectralField,
    params: EquationParams,
    stepper: StepperConfig,
    t_end: float,
) -> Trajectory:
    """Integrate the gauged flow directly (conservative runs only).

    Together with `evolve` this gives two independent routes to the same
    physics: gauging the plain trajectory must match this one.
    """
    if not params.conservative:
        raise ConfigurationError("the gauged flow is integrated only for gamma=0, f=0")
    if t_end <= 0:
        raise ConfigurationError(f"t_end must be positive, got {t_end}")

    kk = u0.k.astype(np.float64)
    n_full = int(np.floor(t_end / stepper.dt + 1e-9))
    h_last = t_end - n_full * stepper.dt
    if h_last < 1e-12 * max(1.0, t_end):
        h_last = 0.0
    steps = [stepper.dt] * n_full + ([h_last] if h_last else [])

    n_fn = gauged_nonlinear_term(u0.grid, params)
    maps = {h: Etdrk4Stepper(-1j * kk**2, h, n_fn) for h in set(steps)}

    traj = Trajectory(params=params, scheme="exponential_rk4", dt=stepper.dt)
    c = u0.coeffs.copy()
    traj.times.append(0.0)
    traj.states.append(SpectralField(u0.grid, c.copy()))
    traj.thetas.append(0.0)
    t = 0.0
    for i, h in enumerate(steps):
        c = maps[h].step(c)
        t += h
        _check_state(c, kk, t)
        if (i + 1) % stepper.record_every == 0 or i + 1 == len(steps):
            traj.times.append(t)
            traj.states.append(SpectralField(u0.grid, c.copy()))
            traj.thetas.append(0.0)
    return traj
