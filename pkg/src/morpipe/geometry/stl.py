"""STL triangulations: reading, writing, and a small mesh container."""

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

from .. import __version__
from ..errors import STLParseError

HEADER_SIZE = 80
RECORD_DTYPE = np.dtype(
    [("normal", "<f4", (3,)), ("vertices", "<f4", (3, 3)), ("attr", "<u2")]
)
assert RECORD_DTYPE.itemsize == 50


@dataclass
class TriMesh:
    """Indexed triangle mesh.

    Attributes
    ----------
    vertices : ndarray, shape (V, 3)
    triangles : ndarray of int, shape (T, 3)
        Indices into ``vertices``.
    normals : ndarray, shape (T, 3), optional
        Facet normals as read from file; ``None`` means recompute on demand.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.triangles.size and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise ValueError("triangle indices out of range")
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=float).reshape(-1, 3)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def facets(self):
        """Vertex coordinates per triangle, shape (T, 3, 3)."""
        return self.vertices[self.triangles]

    def facet_normals(self):
        """Unit facet normals from the right-hand rule (zero for degenerate facets)."""
        return facet_normals(self.facets())


def facet_normals(facets):
    facets = np.asarray(facets, dtype=float)
    n = np.cross(facets[:, 1] - facets[:, 0], facets[:, 2] - facets[:, 0])
    norm = np.linalg.norm(n, axis=1)
    out = np.zeros_like(n)
    ok = norm > 0
    out[ok] = n[ok] / norm[ok, None]
    return out


def from_facets(facets, normals=None):
    """Build a :class:`TriMesh` from a (T, 3, 3) facet array.

    Vertices are merged by exact coordinate equality, in order of first
    appearance.
    """
    facets = np.asarray(facets, dtype=float).reshape(-1, 3, 3)
    index = {}
    vertices = []
    triangles = np.empty((len(facets), 3), dtype=np.int64)
    for t, tri in enumerate(facets):
        for c, p in enumerate(tri):
            key = (float(p[0]), float(p[1]), float(p[2]))
            j = index.get(key)
            if j is None:
                j = index[key] = len(vertices)
                vertices.append(key)
            triangles[t, c] = j
    verts = np.array(vertices, dtype=float).reshape(-1, 3)
    mesh = TriMesh(verts, triangles, normals)
    if len(facets):
        area2 = np.linalg.norm(
            np.cross(facets[:, 1] - facets[:, 0], facets[:, 2] - facets[:, 0]), axis=1
        )
        n_bad = int(np.count_nonzero(area2 == 0))
        if n_bad:
            warnings.warn(f"{n_bad} degenerate triangle(s) with zero area", stacklevel=3)
    return mesh


def _f32(x):
    return np.float32(np.float64(x))


def _parse_ascii(data):
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise STLParseError(f"non-ASCII byte at offset {exc.start}", line=None) from None

    lines = [(i, ln.split()) for i, ln in enumerate(text.splitlines(), start=1)]
    lines = [(i, toks) for i, toks in lines if toks]
    if not lines or lines[0][1][0] != "solid":
        raise STLParseError("expected 'solid'", line=1)

    facets, normals = [], []
    pos = 1

    def take(expected):
        nonlocal pos
        if pos >= len(lines):
            raise STLParseError(f"unexpected end of file, expected {expected!r}",
                                line=lines[-1][0])
        lineno, toks = lines[pos]
        pos += 1
        return lineno, toks

    def floats(lineno, toks):
        if len(toks) != 3:
            raise STLParseError(f"expected 3 coordinates, got {len(toks)}", line=lineno)
        try:
            return [_f32(float(t)) for t in toks]
        except ValueError:
            raise STLParseError(f"malformed number in {' '.join(toks)!r}", line=lineno) from None

    while True:
        lineno, toks = take("facet")
        if toks[0] == "endsolid":
            break
        if toks[:2] != ["facet", "normal"]:
            raise STLParseError(f"expected 'facet normal', got {' '.join(toks)!r}", line=lineno)
        normals.append(floats(lineno, toks[2:]))
        lineno, toks = take("outer loop")
        if toks != ["outer", "loop"]:
            raise STLParseError(f"expected 'outer loop', got {' '.join(toks)!r}", line=lineno)
        tri = []
        for _ in range(3):
            lineno, toks = take("vertex")
            if toks[0] != "vertex":
                raise STLParseError(f"expected 'vertex', got {' '.join(toks)!r}", line=lineno)
            tri.append(floats(lineno, toks[1:]))
        for kw in ("endloop", "endfacet"):
            lineno, toks = take(kw)
            if toks != [kw]:
                raise STLParseError(f"expected {kw!r}, got {' '.join(toks)!r}", line=lineno)
        facets.append(tri)

    facets = np.array(facets, dtype=np.float32).reshape(-1, 3, 3)
    normals = np.array(normals, dtype=np.float32).reshape(-1, 3)
    return facets, normals


def _parse_binary(data):
    if len(data) < HEADER_SIZE + 4:
        raise STLParseError(f"binary STL needs at least 84 bytes, got {len(data)}")
    (count,) = struct.unpack_from("<I", data, HEADER_SIZE)
    available = len(data) - HEADER_SIZE - 4
    if count * RECORD_DTYPE.itemsize > available:
        raise STLParseError(
            f"truncated binary STL: {count} facets declared need "
            f"{count * RECORD_DTYPE.itemsize} bytes, {available} available"
        )
    rec = np.frombuffer(data, dtype=RECORD_DTYPE, count=count, offset=HEADER_SIZE + 4)
    return rec["vertices"].copy(), rec["normal"].copy()


def _binary_size_consistent(data):
    if len(data) < HEADER_SIZE + 4:
        return False
    (count,) = struct.unpack_from("<I", data, HEADER_SIZE)
    return len(data) == HEADER_SIZE + 4 + count * RECORD_DTYPE.itemsize


def read_stl(data):
    """Decode an ASCII or binary STL payload.

    The payload is treated as ASCII when it starts with ``solid`` and
    parses as ASCII; a binary file whose header happens to start with
    ``solid`` is recognized by its length.

    Raises
    ------
    STLParseError
        On truncated binary input or malformed ASCII (with line number).
    """
    data = bytes(data)
    if data.lstrip()[:5] == b"solid":
        try:
            facets, normals = _parse_ascii(data)
        except STLParseError:
            if not _binary_size_consistent(data):
                raise
            facets, normals = _parse_binary(data)
    else:
        facets, normals = _parse_binary(data)
    return from_facets(facets.astype(float), normals.astype(float))


def load_stl(path):
    return read_stl(Path(path).read_bytes())


def _header():
    return f"morpipe {__version__}".encode("ascii").ljust(HEADER_SIZE, b" ")


def write_stl(mesh, format="binary", name="morpipe"):
    """Encode ``mesh`` as STL bytes.

    Normals are always recomputed from the stored (f32-rounded) vertex
    coordinates, so they are unit length or zero for degenerate facets and
    rewriting a file read back from disk reproduces it byte for byte.
    """
    facets = mesh.facets().astype(np.float32).astype(float)
    normals = facet_normals(facets)
    if format == "binary":
        rec = np.zeros(len(facets), dtype=RECORD_DTYPE)
        rec["normal"] = normals
        rec["vertices"] = facets
        return _header() + struct.pack("<I", len(facets)) + rec.tobytes()
    if format == "ascii":
        f32 = facets.astype(np.float32)
        n32 = normals.astype(np.float32)
        out = [f"solid {name}"]
        for tri, nrm in zip(f32, n32):
            out.append(" facet normal {:.9g} {:.9g} {:.9g}".format(*nrm))
            out.append("  outer loop")
            for v in tri:
                out.append("   vertex {:.9g} {:.9g} {:.9g}".format(*v))
            out.append("  endloop")
            out.append(" endfacet")
        out.append(f"endsolid {name}")
        return ("\n".join(out) + "\n").encode("ascii")
    raise ValueError(f"unknown STL format {format!r}")


def save_stl(path, mesh, format="binary"):
    Path(path).write_bytes(write_stl(mesh, format))


def sphere_mesh(n_vertices=1000, radius=1.0, center=(0.0, 0.0, 0.0)):
    """Triangulated sphere with exactly ``n_vertices`` vertices.

    Vertices follow a Fibonacci spiral; the triangulation is their convex
    hull with outward-facing orientation.
    """
    k = np.arange(n_vertices) + 0.5
    polar = np.arccos(1.0 - 2.0 * k / n_vertices)
    azimuth = np.pi * (1.0 + 5.0**0.5) * k
    unit = np.column_stack(
        [np.cos(azimuth) * np.sin(polar), np.sin(azimuth) * np.sin(polar), np.cos(polar)]
    )
    tris = ConvexHull(unit).simplices.copy()
    facets = unit[tris]
    inward = np.einsum("ij,ij->i", facet_normals(facets), facets.mean(axis=1)) < 0
    tris[inward] = tris[inward][:, ::-1]
    verts = np.asarray(center, dtype=float) + radius * unit
    return TriMesh(verts, tris)
