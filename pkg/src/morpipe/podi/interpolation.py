"""Scattered-data interpolators for modal coefficients.

Each interpolator is fitted once on ``k`` nodes of dimension ``p`` carrying
vector values (one column per node) and then queried at new points.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ArgumentError, NumericalError

IDW_COINCIDENCE = 1e-14
RBF_REGULARIZATION = 1e-12
KINDS = ("nearest", "idw", "rbf")
KERNELS = ("gaussian", "thin_plate")


@dataclass(frozen=True)
class InterpolatorSpec:
    kind: str = "rbf"
    power: float = 2.0
    kernel: str = "thin_plate"
    epsilon: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ArgumentError(f"interpolator kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "idw" and not self.power > 0:
            raise ArgumentError("idw power must be positive")
        if self.kind == "rbf":
            if self.kernel not in KERNELS:
                raise ArgumentError(f"rbf kernel must be one of {KERNELS}, got {self.kernel!r}")
            if not self.epsilon > 0:
                raise ArgumentError("rbf shape parameter must be positive")

    @classmethod
    def from_dict(cls, doc):
        if isinstance(doc, str):
            return cls(kind=doc)
        return cls(**doc)

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "idw":
            d["power"] = self.power
        elif self.kind == "rbf":
            d.update(kernel=self.kernel, epsilon=self.epsilon)
        return d


def _distances(x, nodes):
    return np.linalg.norm(nodes - x, axis=1)


def _kernel(r, kernel, eps):
    if kernel == "gaussian":
        return np.exp(-((eps * r) ** 2))
    er = eps * r
    with np.errstate(divide="ignore", invalid="ignore"):
        out = er**2 * np.log(er)
    return np.where(er > 0, out, 0.0)


class Interpolator:
    """Interpolate ``values`` (shape (r, k)) given at ``nodes`` (shape (k, p))."""

    def __init__(self, nodes, values, spec):
        self.nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
        self.values = np.asarray(values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[None, :]
        if self.nodes.shape[0] != self.values.shape[1]:
            raise ArgumentError(
                f"{self.nodes.shape[0]} nodes but {self.values.shape[1]} value columns"
            )
        if self.nodes.shape[0] < 1:
            raise ArgumentError("interpolation needs at least one node")
        self.spec = spec
        if spec.kind == "rbf":
            self._fit_rbf()

    @property
    def dim(self):
        return self.nodes.shape[1]

    def _fit_rbf(self):
        k, p = self.nodes.shape
        spec = self.spec
        R = np.linalg.norm(self.nodes[:, None, :] - self.nodes[None, :, :], axis=-1)
        K = _kernel(R, spec.kernel, spec.epsilon) + RBF_REGULARIZATION * np.eye(k)
        if spec.kernel == "thin_plate":
            P = np.hstack([np.ones((k, 1)), self.nodes])
            q = P.shape[1]
            A = np.block([[K, P], [P.T, np.zeros((q, q))]])
            rhs = np.hstack([self.values, np.zeros((self.values.shape[0], q))]).T
        else:
            A, rhs = K, self.values.T
        try:
            sol = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"RBF interpolation system is singular: {exc}") from None
        resid = np.linalg.norm(A @ sol - rhs)
        if not np.all(np.isfinite(sol)) or resid > 1e-6 * max(1.0, np.linalg.norm(rhs)):
            raise NumericalError("RBF interpolation system could not be solved accurately")
        self._weights = sol[:k].T
        self._poly = sol[k:].T if spec.kernel == "thin_plate" else None

    def __call__(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.dim:
            raise ArgumentError(f"query has dimension {x.size}, nodes have {self.dim}")
        d = _distances(x, self.nodes)
        spec = self.spec
        if spec.kind == "nearest":
            return self.values[:, int(np.argmin(d))].copy()
        if spec.kind == "idw":
            hit = np.flatnonzero(d < IDW_COINCIDENCE)
            if hit.size:
                return self.values[:, hit[0]].copy()
            w = d ** (-spec.power)
            return self.values @ (w / w.sum())
        out = self._weights @ _kernel(d, spec.kernel, spec.epsilon)
        if self._poly is not None:
            out = out + self._poly @ np.concatenate([[1.0], x])
        return out


def interpolate_coefficients(coeffs, params, mu_new, spec):
    """One-shot interpolation of coefficient columns at ``mu_new``."""
    return Interpolator(params, coeffs, spec)(mu_new)
