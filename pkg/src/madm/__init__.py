"""Exact stationary measure, simulation and identity checks for the
boundary-driven multiparticle asymmetric diffusion model (MADM)."""
from ._accel import NUMBA_ENABLED
from .errors import ConvergenceError, StateSpaceTooLarge
from .model import Event, EventKind, ModelParams
from .qcalc import DEFAULT_POLICY, QParam, TruncationPolicy
from .steady import SteadyStateEvaluator

__all__ = [
    "NUMBA_ENABLED",
    "ConvergenceError",
    "StateSpaceTooLarge",
    "Event",
    "EventKind",
    "ModelParams",
    "DEFAULT_POLICY",
    "QParam",
    "TruncationPolicy",
    "SteadyStateEvaluator",
]

__version__ = "0.1.0"
