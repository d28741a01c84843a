"""Pseudospectral simulation and Fourier-side diagnostics for the
odd-power Schrodinger family on the torus, conservative and forced-damped."""

__version__ = "0.1.0"

from .spectral import (
    GridSpec,
    SpectralField,
    analyze,
    lp_norm,
    modes,
    project_band,
    sobolev_norm,
    synthesize,
)
from .dynamics import (
    DEFOCUSING,
    FOCUSING,
    BlowUpError,
    ConfigurationError,
    EquationParams,
    StepperConfig,
    Trajectory,
    damped_propagate,
    energy,
    evolve,
    free_propagate,
    mass,
    nonlinearity,
)
from .resonance import (
    CaseConstants,
    CaseLabel,
    CostBoundError,
    FrequencyTuple,
    classify,
    high_low_interaction,
    normal_form_transform,
    resonance_function,
    resonant_projection,
    split_nonlinearity,
    verify_decomposition,
)
from .gauge import (
    PhaseState,
    evolve_gauged,
    from_gauge,
    gauged_rhs,
    init_phase,
    phase_step,
    to_gauge,
)
from .smoothing import (
    duhamel_iterate,
    max_smoothing_order,
    random_sobolev_data,
    smoothing_difference,
    tail_slope,
)
from .attractor import (
    absorbing_sweep,
    apply_resolvent,
    energy_dissipation_residual,
    gauge_forcing,
    global_smoothing_check,
    mass_dissipation_residual,
)
