"""High-order FEM for nonlinear elastodynamics with SDME expansion bases."""

from .basis1d import Basis1D, BasisKind, build_basis
from .material import NeoHookean, lame_from_engineering
from .meshdof import DofMap, Mesh, build_dofmap, gen_box_mesh, gen_cube_mesh
from .quadrature import gauss_rule, gll_rule
from .tensorelem import TensorElement

__version__ = "0.1.0"

__all__ = [
    "Basis1D",
    "BasisKind",
    "build_basis",
    "NeoHookean",
    "lame_from_engineering",
    "Mesh",
    "DofMap",
    "gen_cube_mesh",
    "gen_box_mesh",
    "build_dofmap",
    "gauss_rule",
    "gll_rule",
    "TensorElement",
    "__version__",
]
