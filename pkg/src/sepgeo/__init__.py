"""Exclusion-process simulation, backwards quasi-geodesics, KPZ scaling
coefficients, and Fredholm-determinant reference distributions."""

from .backend import BACKEND, USE_NUMBA
from .engine import ClockRecord, EventLog, RunRecord, evolve
from .geodesics import GeodesicTrace, backwards_index_process, endpoint_rescaled
from .models import (
    InitialCondition,
    Neighborhood4,
    RateModel,
    build_rate_model,
    initial_condition,
    local_rate,
)
from .scaling import (
    ScalingCoefficients,
    StationaryChain,
    coefficients,
    exact_stationary_observables,
    rescale_position,
    stationary_chain,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "USE_NUMBA",
    "ClockRecord",
    "EventLog",
    "GeodesicTrace",
    "InitialCondition",
    "Neighborhood4",
    "RateModel",
    "RunRecord",
    "ScalingCoefficients",
    "StationaryChain",
    "backwards_index_process",
    "build_rate_model",
    "coefficients",
    "endpoint_rescaled",
    "evolve",
    "exact_stationary_observables",
    "initial_condition",
    "local_rate",
    "rescale_position",
    "stationary_chain",
]
