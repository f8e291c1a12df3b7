"""Active subspaces of a scalar quantity of interest.

Inputs live in the normalized box ``[-1, 1]^m`` with the uniform density.
The uncentered gradient covariance ``C = E[grad f grad f^T]`` is estimated
by Monte Carlo, eigendecomposed, and split into an active block ``W1``
(the leading ``M`` eigenvectors) and an inactive block ``W2``.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import ArgumentError, InputError
from .matrixio import format_matrix

BOX_TOL = 1e-12


@dataclass(frozen=True)
class BoxDomain:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise ArgumentError("lower and upper must be non-empty vectors of equal length")
        if not np.all(lo < hi):
            raise ArgumentError("box requires lower < upper in every dimension")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self):
        return self.lower.size

    @property
    def width(self):
        return self.upper - self.lower

    def contains(self, mu, tol=BOX_TOL):
        mu = np.asarray(mu, dtype=float)
        slack = tol * np.maximum(1.0, np.abs(self.width))
        return bool(np.all(mu >= self.lower - slack) and np.all(mu <= self.upper + slack))

    def to_dict(self):
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["lower"], doc["upper"])


def normalize(mu, box):
    """Affine map of ``mu`` (shape (m,) or (k, m)) from ``box`` onto ``[-1, 1]^m``."""
    mu = np.asarray(mu, dtype=float)
    if mu.shape[-1] != box.dim:
        raise ArgumentError(f"expected {box.dim} parameters, got {mu.shape[-1]}")
    if not box.contains(mu):
        raise ArgumentError("parameter vector lies outside the box")
    return 2.0 * (mu - box.lower) / box.width - 1.0


def denormalize(x, box):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != box.dim:
        raise ArgumentError(f"expected {box.dim} coordinates, got {x.shape[-1]}")
    return box.lower + 0.5 * (x + 1.0) * box.width


def scale_gradient(grad_physical, box):
    """Chain rule: gradient with respect to normalized coordinates."""
    return np.asarray(grad_physical, dtype=float) * (0.5 * box.width)


@dataclass(frozen=True)
class GradientSample:
    mu: np.ndarray
    grad: np.ndarray


def finite_diff_gradient(f, mu, h=1e-6):
    """Central-difference gradient of ``f`` at ``mu`` in ``[-1, 1]^m``.

    Components whose central stencil would leave the box fall back to a
    one-sided difference pointing inward.
    """
    mu = np.asarray(mu, dtype=float)
    grad = np.empty_like(mu)
    for i in range(mu.size):
        e = np.zeros_like(mu)
        e[i] = h
        if mu[i] + h > 1.0 + BOX_TOL:
            grad[i] = (f(mu) - f(mu - e)) / h
        elif mu[i] - h < -1.0 - BOX_TOL:
            grad[i] = (f(mu + e) - f(mu)) / h
        else:
            grad[i] = (f(mu + e) - f(mu - e)) / (2.0 * h)
    return grad


def sample_inputs(m, n_samples=None, seed=0):
    """Uniform samples in ``[-1, 1]^m``; ``n_samples`` defaults to ``1000 * m``."""
    if n_samples is None:
        n_samples = 1000 * m
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size=(n_samples, m))


def _gradient_matrix(samples):
    if isinstance(samples, np.ndarray):
        G = samples
    else:
        samples = list(samples)
        if not samples:
            raise ArgumentError("at least one gradient sample is required")
        G = np.array([np.asarray(s.grad if isinstance(s, GradientSample) else s, dtype=float)
                      for s in samples])
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] == 0:
        raise ArgumentError("at least one gradient sample is required")
    if not np.all(np.isfinite(G)):
        raise InputError("gradient samples contain non-finite entries")
    return G


def estimate_covariance(samples):
    """Monte Carlo estimate ``(1/N) sum_i g_i g_i^T``.

    ``samples`` is a sequence of :class:`GradientSample` (or bare gradient
    vectors), or an ``(N, m)`` array of gradients.
    """
    G = _gradient_matrix(samples)
    C = G.T @ G / G.shape[0]
    return 0.5 * (C + C.T)


@dataclass(frozen=True)
class ASResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    active_dim: int

    @property
    def W1(self):
        return self.eigenvectors[:, : self.active_dim]

    @property
    def W2(self):
        return self.eigenvectors[:, self.active_dim :]

    def to_dict(self):
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "W": self.eigenvectors.tolist(),
            "M": self.active_dim,
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(np.asarray(doc["eigenvalues"], dtype=float),
                   np.asarray(doc["W"], dtype=float), int(doc["M"]))


def identify(C, dim=None):
    """Partition the spectrum of ``C`` into active and inactive subspaces.

    Parameters
    ----------
    C : (m, m) array_like
        Symmetric positive semidefinite covariance.
    dim : int or None
        Active dimension ``M``; ``None`` picks the largest spectral gap
        ``lambda_i - lambda_{i+1}`` (smallest ``M`` on ties).
    """
    eig = numerics.eig_symmetric(C)
    lam = eig.values
    m = lam.size
    if dim is None or dim == "gap":
        if m < 2:
            raise ArgumentError("an active subspace needs at least two parameters")
        dim = int(np.argmax(lam[:-1] - lam[1:])) + 1
    dim = int(dim)
    if not 1 <= dim < m:
        raise ArgumentError(f"active dimension must satisfy 1 <= M < {m}, got {dim}")
    return ASResult(eigenvalues=lam, eigenvectors=eig.vectors, active_dim=dim)


def project(mu, result):
    """Active coordinates ``W1^T mu`` (works row-wise on a (k, m) array)."""
    mu = np.asarray(mu, dtype=float)
    if mu.shape[-1] != result.eigenvectors.shape[0]:
        raise ArgumentError("parameter dimension does not match the active subspace")
    return mu @ result.W1


def inactive(mu, result):
    mu = np.asarray(mu, dtype=float)
    if mu.shape[-1] != result.eigenvectors.shape[0]:
        raise ArgumentError("parameter dimension does not match the active subspace")
    return mu @ result.W2


def lift(mu_active, result, eta=None):
    """Map active (and optionally inactive) coordinates back to ``[-1, 1]^m``.

    Returns
    -------
    mu : ndarray
        ``W1 mu_active + W2 eta``, clipped to the box.
    clipped : bool
        Whether clipping changed the result.
    """
    y = np.atleast_1d(np.asarray(mu_active, dtype=float))
    if y.shape[-1] != result.active_dim:
        raise ArgumentError(f"expected {result.active_dim} active coordinates")
    mu = y @ result.W1.T
    if eta is not None:
        eta = np.atleast_1d(np.asarray(eta, dtype=float))
        if eta.shape[-1] != result.W2.shape[1]:
            raise ArgumentError(f"expected {result.W2.shape[1]} inactive coordinates")
        mu = mu + eta @ result.W2.T
    clipped_mu = np.clip(mu, -1.0, 1.0)
    return clipped_mu, bool(np.any(clipped_mu != mu))


def monomial_exponents(n_vars, degree):
    """Exponent tuples of total degree ``<= degree``, graded then lexicographic."""
    exps = []
    for d in range(degree + 1):
        level = [e for e in itertools.product(range(d + 1), repeat=n_vars) if sum(e) == d]
        exps.extend(sorted(level, reverse=True))
    return exps


def _design(x, exps):
    x = np.atleast_2d(x)
    return np.column_stack([np.prod(x**np.array(e), axis=1) for e in exps])


@dataclass(frozen=True)
class RidgeSurrogate:
    """Polynomial ``g`` of the active variable with ``f(mu) ~= g(W1^T mu)``."""

    active_dim: int
    degree: int
    coefficients: np.ndarray

    @property
    def exponents(self):
        return monomial_exponents(self.active_dim, self.degree)

    def __call__(self, mu_active):
        x = np.asarray(mu_active, dtype=float)
        scalar = x.ndim == 0 or (x.ndim == 1 and self.active_dim > 1)
        x = x.reshape(-1, self.active_dim)
        vals = _design(x, self.exponents) @ self.coefficients
        return float(vals[0]) if scalar else vals

    def to_dict(self):
        return {
            "active_dim": self.active_dim,
            "degree": self.degree,
            "exponents": [list(e) for e in self.exponents],
            "coefficients": self.coefficients.tolist(),
        }


def fit_surrogate(mu_active, values, degree=2):
    """Least-squares polynomial fit of ``values`` against active coordinates."""
    x = np.asarray(mu_active, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(values, dtype=float).reshape(-1)
    if x.shape[0] != y.size:
        raise ArgumentError("need one value per active-coordinate sample")
    M = x.shape[1]
    if M not in (1, 2):
        raise ArgumentError(f"surrogates are supported for 1 or 2 active variables, not {M}")
    exps = monomial_exponents(M, degree)
    if y.size < len(exps):
        raise ArgumentError(
            f"degree-{degree} fit in {M} variables needs {len(exps)} samples, got {y.size}"
        )
    coeff = numerics.lstsq(_design(x, exps), y)
    return RidgeSurrogate(active_dim=M, degree=degree, coefficients=coeff)


def evaluate(surrogate, mu_active):
    return surrogate(mu_active)


def summary_csv(mu_active, values):
    """Sufficient-summary-plot rows ``(mu_M components..., f)`` as CSV text."""
    x = np.asarray(mu_active, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return format_matrix(np.column_stack([x, np.asarray(values, dtype=float)]))


def subspace_angle(A, B):
    """Largest principal angle (radians) between the column spans of A and B."""
    qa, _ = np.linalg.qr(np.asarray(A, dtype=float).reshape(len(A), -1))
    qb, _ = np.linalg.qr(np.asarray(B, dtype=float).reshape(len(B), -1))
    # asin of the residual stays accurate for tiny angles where acos does not
    resid = qb - qa @ (qa.T @ qb)
    return float(np.arcsin(min(1.0, np.linalg.norm(resid, 2))))
