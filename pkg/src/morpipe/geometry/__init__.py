"""STL geometry and free-form deformation."""

from .ffd import FFDLattice, bernstein, bernstein_basis, deform_mesh, ffd_map
from .stl import TriMesh, load_stl, read_stl, save_stl, sphere_mesh, write_stl

__all__ = [
    "FFDLattice",
    "TriMesh",
    "bernstein",
    "bernstein_basis",
    "deform_mesh",
    "ffd_map",
    "load_stl",
    "read_stl",
    "save_stl",
    "sphere_mesh",
    "write_stl",
]
