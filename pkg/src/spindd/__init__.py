"""spindd: dynamical-decoupling fidelity of a single spin in O-U dephasing noise.

Exact filter-function analytics, bias-free Monte Carlo with faulty pulses,
and the P1-center bath line structure, behind a small config-driven CLI.
"""

__version__ = "0.1.0"

from .noise import (
    BathComposition,
    OuParams,
    StaticFieldModel,
    compose_baths,
    correlation,
    echo_analytic,
    fid_analytic,
    sample_static,
    sample_step,
)
from .sequences import (
    FilterFunction,
    Pulse,
    PulseSequence,
    cdd,
    cpmg_family,
    filter_function,
    hahn,
    parse_dsl,
    pdd_family,
    qdd,
    render_dsl,
    udd,
)
from .analytics import (
    DecayResult,
    PeriodicQuantities,
    PiecewiseLinear,
    autocorrelation,
    cdd_recursion,
    closed_form,
    w_general,
    w_periodic,
)
from .evolve import (
    FidelityCurve,
    PulseErrors,
    RunConfig,
    ensemble_fidelity,
    pulse_unitary,
    sensitivity_table,
    static_expansion_check,
    static_unitary,
)
from .p1 import (
    P1Params,
    TransitionLine,
    bath_from_lines,
    build_hamiltonian,
    p1_spectrum,
    transition_lines,
)
from .config import ExperimentConfig, load_config, parse_config
from .runner import ResultTable, emit, run_experiment

__all__ = [
    "__version__",
    "BathComposition",
    "OuParams",
    "StaticFieldModel",
    "compose_baths",
    "correlation",
    "echo_analytic",
    "fid_analytic",
    "sample_static",
    "sample_step",
    "FilterFunction",
    "Pulse",
    "PulseSequence",
    "cdd",
    "cpmg_family",
    "filter_function",
    "hahn",
    "parse_dsl",
    "pdd_family",
    "qdd",
    "render_dsl",
    "udd",
    "DecayResult",
    "PeriodicQuantities",
    "PiecewiseLinear",
    "autocorrelation",
    "cdd_recursion",
    "closed_form",
    "w_general",
    "w_periodic",
    "FidelityCurve",
    "PulseErrors",
    "RunConfig",
    "ensemble_fidelity",
    "pulse_unitary",
    "sensitivity_table",
    "static_expansion_check",
    "static_unitary",
    "P1Params",
    "TransitionLine",
    "bath_from_lines",
    "build_hamiltonian",
    "p1_spectrum",
    "transition_lines",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "ResultTable",
    "emit",
    "run_experiment",
]
