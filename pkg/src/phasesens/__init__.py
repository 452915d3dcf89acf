"""Phase functions and phase-sensitivity diagnostics for asymptotically
periodic dynamical systems."""

__version__ = "0.1.0"

from .dynamics import (FundamentalMatrix, Observable, SystemDef, Trajectory,
                       estimate_period, estimate_rotation_number,
                       integrate_flow, integrate_variational, iterate_map)
from .errors import (FitFailureError, IntegrationError, IterationError,
                     NotPeriodicError, PhasesensError)
from .experiments import (ExperimentConfig, ExperimentReport, PulseStats,
                          run_network_experiment)
from .lyapunov import FTLEField, FTLEResult, ftle, ftle_field
from .models import (ModelCatalogEntry, SegmentSpec, build_reference, catalog,
                     cycle_states, eval_on_cycle, lookup, model_names,
                     v_range)
from .phase import (GridSpec, PhaseField, PhaseValue, fourier_average,
                    fourier_average_discrete, phase_field, phase_many,
                    phase_of)
from .prc import (BoxCountReport, PRCCurve, box_counting_dimension,
                  prc_curve)
from .sensitivity import (SensitivityCurve, SensitivitySample,
                          default_epsilons, geodesic_distance,
                          infinitesimal_coefficient, mdtheta_curve,
                          pair_table, sensitivity_curve,
                          two_point_sensitivity)

__all__ = [
    "__version__",
    "FundamentalMatrix", "Observable", "SystemDef", "Trajectory",
    "estimate_period", "estimate_rotation_number", "integrate_flow",
    "integrate_variational", "iterate_map",
    "FitFailureError", "IntegrationError", "IterationError",
    "NotPeriodicError", "PhasesensError",
    "ModelCatalogEntry", "SegmentSpec", "build_reference", "catalog",
    "cycle_states", "eval_on_cycle", "lookup", "model_names", "v_range",
    "GridSpec", "PhaseField", "PhaseValue", "fourier_average",
    "fourier_average_discrete", "phase_field", "phase_many", "phase_of",
    "SensitivityCurve", "SensitivitySample", "default_epsilons",
    "geodesic_distance", "infinitesimal_coefficient", "mdtheta_curve",
    "pair_table", "sensitivity_curve", "two_point_sensitivity",
    "FTLEField", "FTLEResult", "ftle", "ftle_field",
    "BoxCountReport", "PRCCurve", "box_counting_dimension", "prc_curve",
    "ExperimentConfig", "ExperimentReport", "PulseStats",
    "run_network_experiment",
]
