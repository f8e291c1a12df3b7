"""POD basis of a snapshot database and interpolation of its modal coefficients."""

from dataclasses import dataclass

import numpy as np

from .. import numerics
from ..activesubspace import normalize
from ..errors import ArgumentError
from .interpolation import Interpolator, InterpolatorSpec


@dataclass(frozen=True)
class PODBasis:
    modes: np.ndarray
    sigma: np.ndarray

    @property
    def rank(self):
        return self.sigma.size

    def to_dict(self):
        return {"rank": self.rank, "sigma": self.sigma.tolist()}


def build_basis(db, rank=None):
    """Left singular vectors of the (uncentered) snapshot matrix."""
    if db.k < 1:
        raise ArgumentError("cannot build a basis from an empty database")
    svd = numerics.svd_truncated(db.snapshots, rank)
    return PODBasis(modes=svd.U, sigma=svd.sigma)


def _snapshot_matrix(db_or_snapshots):
    S = getattr(db_or_snapshots, "snapshots", db_or_snapshots)
    S = np.asarray(S, dtype=float)
    return S[:, None] if S.ndim == 1 else S


def modal_coefficients(db, basis):
    """``U^T S``: column ``j`` holds the coordinates of snapshot ``j``."""
    S = _snapshot_matrix(db)
    if S.shape[0] != basis.modes.shape[0]:
        raise ArgumentError(
            f"snapshots have {S.shape[0]} entries but modes have {basis.modes.shape[0]}"
        )
    return basis.modes.T @ S


def parameter_coordinates(db, mu):
    """Coordinates used for interpolation distances (box-normalized when a box is known)."""
    mu = np.asarray(mu, dtype=float)
    return mu if db.box is None else normalize(mu, db.box)


class PODIModel:
    """Offline-fitted PODI surrogate; calling it predicts a full field.

    Parameters
    ----------
    db : SnapshotDatabase
    rank : int, float, "full" or None
        POD truncation.
    spec : InterpolatorSpec
    """

    def __init__(self, db, rank=None, spec=None):
        self.db = db
        self.spec = spec or InterpolatorSpec()
        self.basis = build_basis(db, rank)
        self.coefficients = modal_coefficients(db, self.basis)
        nodes = parameter_coordinates(db, db.params)
        self._interp = Interpolator(nodes, self.coefficients, self.spec)

    def coefficients_at(self, mu):
        mu = np.asarray(mu, dtype=float).reshape(-1)
        if mu.size != self.db.p:
            raise ArgumentError(f"expected {self.db.p} parameters, got {mu.size}")
        return self._interp(parameter_coordinates(self.db, mu))

    def __call__(self, mu):
        return self.basis.modes @ self.coefficients_at(mu)

    predict = __call__


def predict(db, basis, mu_new, spec):
    """Approximate the field at ``mu_new`` from the database and a given basis."""
    coeffs = modal_coefficients(db, basis)
    nodes = parameter_coordinates(db, db.params)
    x = parameter_coordinates(db, np.asarray(mu_new, dtype=float).reshape(-1))
    return basis.modes @ Interpolator(nodes, coeffs, spec)(x)
