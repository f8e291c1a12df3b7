"""POD with interpolation over a persisted snapshot database."""

from .database import SnapshotDatabase, db_load, db_save
from .interpolation import Interpolator, InterpolatorSpec, interpolate_coefficients
from .model import PODBasis, PODIModel, build_basis, modal_coefficients, predict

__all__ = [
    "Interpolator",
    "InterpolatorSpec",
    "PODBasis",
    "PODIModel",
    "SnapshotDatabase",
    "build_basis",
    "db_load",
    "db_save",
    "interpolate_coefficients",
    "modal_coefficients",
    "predict",
]
