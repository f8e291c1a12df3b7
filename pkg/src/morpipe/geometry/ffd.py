"""Free-form deformation on an axis-aligned Bernstein lattice.

A point ``p`` is mapped to box coordinates ``(s, t, u) = (p - origin) / lengths``.
Inside the unit cube the deformed position is

    sum_{l,m,n} B_l(s) B_m(t) B_n(u) (P_lmn + dP_lmn)

mapped back to physical space, with ``P_lmn = (l/L, m/M, n/N)`` the
undisplaced control points.  Because Bernstein polynomials reproduce
linear functions, the undisplaced part sums to ``(s, t, u)`` itself, and
the implementation evaluates the equivalent form

    p + lengths * sum_{l,m,n} B_l(s) B_m(t) B_n(u) dP_lmn

which returns ``p`` bit-for-bit when nothing is displaced.
"""

import json
import warnings
from dataclasses import dataclass, field
from math import comb
from pathlib import Path

import numpy as np

from ..errors import ArgumentError, ConfigError
from .stl import TriMesh


def bernstein(i, n, s):
    """Bernstein basis polynomial ``C(n, i) s**i (1 - s)**(n - i)``."""
    if not (0 <= i <= n):
        raise ArgumentError(f"need 0 <= i <= n, got i={i}, n={n}")
    if not (0.0 <= s <= 1.0):
        raise ArgumentError(f"s must lie in [0, 1], got {s}")
    return comb(n, i) * s**i * (1.0 - s) ** (n - i)


def bernstein_basis(n, s):
    """All degree-``n`` Bernstein polynomials at the points ``s``.

    Returns an array of shape ``(len(s), n + 1)``.
    """
    s = np.asarray(s, dtype=float)[:, None]
    i = np.arange(n + 1)
    coeff = np.array([comb(n, k) for k in i], dtype=float)
    return coeff * s**i * (1.0 - s) ** (n - i)


@dataclass
class FFDLattice:
    """Control lattice of a free-form deformation.

    Parameters
    ----------
    origin : (3,) array_like
        Lower corner of the box in physical coordinates.
    lengths : (3,) array_like
        Box edge lengths, all positive.
    dims : (3,) tuple of int
        Control points per axis, each at least 2.
    displacements : ndarray, shape dims + (3,), optional
        Control point displacements in box (reference) coordinates.
    """

    origin: np.ndarray
    lengths: np.ndarray
    dims: tuple
    displacements: np.ndarray = field(default=None)

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float).reshape(3)
        self.lengths = np.asarray(self.lengths, dtype=float).reshape(3)
        self.dims = tuple(int(d) for d in self.dims)
        if len(self.dims) != 3 or min(self.dims) < 2:
            raise ArgumentError(f"dims must be three integers >= 2, got {self.dims}")
        if not np.all(self.lengths > 0):
            raise ArgumentError(f"lengths must be positive, got {self.lengths}")
        if self.displacements is None:
            self.displacements = np.zeros(self.dims + (3,))
        else:
            self.displacements = np.array(self.displacements, dtype=float)
            if self.displacements.shape != self.dims + (3,):
                raise ArgumentError(
                    f"displacement grid shape {self.displacements.shape} "
                    f"does not match dims {self.dims}"
                )

    @property
    def degrees(self):
        return tuple(d - 1 for d in self.dims)

    def to_reference(self, points):
        return (np.asarray(points, dtype=float) - self.origin) / self.lengths

    def to_physical(self, ref):
        return self.origin + np.asarray(ref, dtype=float) * self.lengths

    def control_points(self):
        """Undisplaced control points in box coordinates, shape dims + (3,)."""
        axes = [np.arange(d) / (d - 1) for d in self.dims]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def boundary_displaced(self):
        """True if any control point on a lattice face carries a displacement."""
        moved = np.any(self.displacements != 0, axis=-1)
        inner = moved[1:-1, 1:-1, 1:-1]
        return bool(moved.sum() - inner.sum())

    @classmethod
    def from_dict(cls, doc):
        try:
            dims = tuple(doc["dims"])
            disp = np.zeros(tuple(int(d) for d in dims) + (3,))
            for entry in doc.get("displacements", []):
                if len(entry) != 6:
                    raise ConfigError(
                        f"displacements: entry {entry} must be [l, m, n, dx, dy, dz]"
                    )
                l, m, n = (int(v) for v in entry[:3])
                for idx, d in zip((l, m, n), dims):
                    if not 0 <= idx < d:
                        raise ConfigError(f"displacements: index {entry[:3]} outside dims {dims}")
                disp[l, m, n] = entry[3:]
            return cls(doc["origin"], doc["lengths"], dims, disp)
        except KeyError as exc:
            raise ConfigError(f"lattice: missing field {exc.args[0]!r}") from None
        except ArgumentError as exc:
            raise ConfigError(f"lattice: {exc}") from None

    def to_dict(self):
        entries = [
            [int(l), int(m), int(n), *map(float, self.displacements[l, m, n])]
            for l, m, n in np.argwhere(np.any(self.displacements != 0, axis=-1))
        ]
        return {
            "origin": self.origin.tolist(),
            "lengths": self.lengths.tolist(),
            "dims": list(self.dims),
            "displacements": entries,
        }

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def bernstein_weights(ref, dims):
    """Per-axis Bernstein matrices for reference points ``ref`` of shape (k, 3)."""
    return [bernstein_basis(d - 1, ref[:, a]) for a, d in enumerate(dims)]


def ffd_map(points, lattice):
    """Apply the FFD to one point (shape (3,)) or a cloud (shape (k, 3)).

    Points outside the closed unit box in reference coordinates are
    returned unchanged.
    """
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    out = pts.copy()
    ref = lattice.to_reference(pts)
    inside = np.all((ref >= 0.0) & (ref <= 1.0), axis=1)
    if np.any(inside):
        bs, bt, bu = bernstein_weights(ref[inside], lattice.dims)
        shift = np.einsum("ki,kj,kl,ijlc->kc", bs, bt, bu, lattice.displacements)
        out[inside] = pts[inside] + shift * lattice.lengths
    return out[0] if single else out


def deform_mesh(mesh, lattice):
    """Move every mesh vertex through :func:`ffd_map`; connectivity is kept."""
    if lattice.boundary_displaced():
        warnings.warn(
            "control points on the lattice boundary are displaced; the deformation "
            "may be discontinuous across the box faces",
            stacklevel=2,
        )
    verts = ffd_map(mesh.vertices, lattice) if mesh.n_vertices else mesh.vertices.copy()
    deformed = TriMesh(verts, mesh.triangles.copy())
    deformed.normals = deformed.facet_normals()
    return deformed
