"""Dense linear algebra used throughout the package.

The factorizations are delegated to LAPACK through :mod:`numpy.linalg`;
this module pins down ordering, sign, truncation and tolerance conventions
so that the reduced-order models built on top behave identically whichever
backend numpy links against.

Rank specifications
-------------------
Functions accepting ``rank`` understand:

* ``None``        -- energy criterion with the default threshold ``0.9999``
* ``int r >= 1``  -- exactly ``r`` singular triplets
* ``float tau``   -- energy criterion, ``0 < tau <= 1``
* ``"full"``      -- all ``min(rows, cols)`` triplets
"""

from dataclasses import dataclass
from numbers import Integral, Real

import numpy as np

from .errors import ArgumentError, InputError

DEFAULT_ENERGY = 0.9999
PINV_RTOL = 1e-12
SYMMETRY_RTOL = 1e-12


@dataclass(frozen=True)
class SVDResult:
    """Thin singular value decomposition ``M ~= U @ diag(sigma) @ V.T``."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    @property
    def rank(self):
        return self.sigma.shape[0]

    def reconstruct(self):
        return (self.U * self.sigma) @ self.V.conj().T


@dataclass(frozen=True)
class EigResult:
    """Eigenpairs; ``vectors[:, i]`` belongs to ``values[i]``."""

    values: np.ndarray
    vectors: np.ndarray


def as_matrix(M, name="matrix"):
    """Return ``M`` as a finite 2-D array, raising :class:`InputError` otherwise."""
    A = np.asarray(M)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise InputError(f"{name} must be a non-empty 2-D array, got shape {A.shape}")
    if not np.issubdtype(A.dtype, np.number):
        raise InputError(f"{name} must be numeric")
    if not np.all(np.isfinite(A)):
        raise InputError(f"{name} contains non-finite entries")
    if not np.iscomplexobj(A):
        A = A.astype(float, copy=False)
    return A


def energy_rank(sigma, tau=DEFAULT_ENERGY):
    """Smallest ``r`` with ``sum(sigma[:r]**2) >= tau * sum(sigma**2)``."""
    if not 0.0 < tau <= 1.0:
        raise ArgumentError(f"energy threshold must lie in (0, 1], got {tau}")
    energy = np.cumsum(np.asarray(sigma, dtype=float) ** 2)
    total = energy[-1]
    if total == 0.0:
        return 1
    r = int(np.searchsorted(energy, tau * total, side="left")) + 1
    return min(r, len(energy))


def resolve_rank(sigma, rank):
    """Translate a rank specification into an integer for singular values ``sigma``."""
    kmax = len(sigma)
    if rank is None:
        return energy_rank(sigma)
    if isinstance(rank, str):
        if rank == "full":
            return kmax
        raise ArgumentError(f"unknown rank specification {rank!r}")
    if isinstance(rank, bool):
        raise ArgumentError("rank must be an int, a float threshold, 'full' or None")
    if isinstance(rank, Integral):
        if not 1 <= rank <= kmax:
            raise ArgumentError(f"rank {rank} outside [1, {kmax}]")
        return int(rank)
    if isinstance(rank, Real):
        return energy_rank(sigma, float(rank))
    raise ArgumentError(f"unsupported rank specification {rank!r}")


def _fix_signs(U, V=None):
    # Largest-magnitude entry of each column made real positive.
    idx = np.argmax(np.abs(U), axis=0)
    pivots = U[idx, np.arange(U.shape[1])]
    phase = np.ones_like(pivots)
    nz = pivots != 0
    phase[nz] = np.abs(pivots[nz]) / pivots[nz]
    U = U * phase
    if V is not None:
        V = V * phase.conj()
    return U, V


def svd_truncated(M, rank=None):
    """Truncated thin SVD of ``M``.

    Parameters
    ----------
    M : array_like, shape (n, m)
    rank : int, float, "full" or None
        Rank specification, see the module docstring.

    Returns
    -------
    SVDResult
        ``U`` is ``n x r`` and ``V`` is ``m x r``, both column-orthonormal;
        ``sigma`` is descending.
    """
    A = as_matrix(M)
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    r = resolve_rank(s, rank)
    U, V = _fix_signs(U[:, :r], Vh[:r].conj().T)
    return SVDResult(U=U, sigma=s[:r].copy(), V=V)


def eig_symmetric(C):
    """Eigendecomposition of a real symmetric matrix, eigenvalues descending.

    Raises
    ------
    InputError
        If ``C`` is not square or its asymmetry exceeds ``1e-12`` relative
        to its Frobenius norm.
    """
    A = as_matrix(C)
    if A.shape[0] != A.shape[1]:
        raise InputError(f"matrix must be square, got {A.shape}")
    if np.iscomplexobj(A):
        raise InputError("eig_symmetric expects a real matrix")
    scale = np.linalg.norm(A)
    if np.linalg.norm(A - A.T) > SYMMETRY_RTOL * max(scale, np.finfo(float).tiny):
        raise InputError("matrix is not symmetric within relative tolerance 1e-12")
    w, W = np.linalg.eigh(0.5 * (A + A.T))
    order = np.argsort(w)[::-1]
    W, _ = _fix_signs(W[:, order])
    return EigResult(values=w[order], vectors=W)


def eig_general(A):
    """Eigenpairs of a general square matrix.

    Eigenvalues are ordered by decreasing modulus, then by decreasing
    imaginary part, so that conjugate pairs sit next to each other with the
    positive-frequency member first.  Eigenvectors have unit 2-norm.
    """
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise InputError(f"matrix must be square, got {A.shape}")
    w, W = np.linalg.eig(A)
    order = np.lexsort((-w.imag, -np.round(np.abs(w), 12)))
    w = w[order]
    W = W[:, order]
    W = W / np.linalg.norm(W, axis=0)
    return EigResult(values=w, vectors=W)


def pseudoinverse(M, rtol=PINV_RTOL):
    """Moore-Penrose pseudoinverse through the SVD.

    Singular values below ``rtol * sigma_max`` are treated as zero.
    """
    A = as_matrix(M)
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    cutoff = rtol * (s[0] if s.size else 0.0)
    inv = np.zeros_like(s)
    keep = s > cutoff
    inv[keep] = 1.0 / s[keep]
    return (Vh.conj().T * inv) @ U.conj().T


def lstsq(A, b):
    """Minimum-norm least-squares solution ``pinv(A) @ b``.

    ``b`` may be a vector or a matrix of right-hand sides.
    """
    A = as_matrix(A, "A")
    b = np.asarray(b)
    if b.shape[0] != A.shape[0]:
        raise ArgumentError(f"A has {A.shape[0]} rows but b has length {b.shape[0]}")
    return pseudoinverse(A) @ b
