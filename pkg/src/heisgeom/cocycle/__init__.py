"""Unitary representations, coboundaries and the averaging inequalities behind the compression bound."""
from .admissible import NonMonotone, admissibility, theta_family
from .averaging import (
    AveragingOperator,
    PreconditionError,
    avg_scalar,
    check_convexity,
    check_lemma31,
    check_lemma42,
    check_lemma43,
    check_lemma44,
    compression_experiment,
    folner_gap,
    p_avg,
)
from .params import ParameterError, ParamSelection, select_parameters, verify_selection
from .reps import (
    Coboundary,
    GridSpec,
    MarginExceeded,
    UnitaryRep,
    cocycle_eval,
    make_discretized_rep,
    make_finite_rep,
)
from .thm71 import (
    H_KINDS,
    adaptive_simpson,
    central_energy,
    central_energy_closed_form,
    check_thm71,
    default_grid,
    generator_energy,
    generator_profiles,
    unit_coboundary,
)

__all__ = [
    "AveragingOperator", "Coboundary", "GridSpec", "H_KINDS", "MarginExceeded", "NonMonotone",
    "ParamSelection", "ParameterError", "PreconditionError", "UnitaryRep", "adaptive_simpson",
    "admissibility", "avg_scalar", "central_energy", "central_energy_closed_form", "check_convexity", "check_lemma31", "check_lemma42", "check_lemma43",
    "check_lemma44", "check_thm71", "cocycle_eval", "compression_experiment", "default_grid", "folner_gap",
    "generator_energy", "generator_profiles", "make_discretized_rep", "make_finite_rep", "p_avg",
    "select_parameters", "theta_family", "unit_coboundary", "verify_selection",
]
