"""Legacy ASCII VTK output of high-order displacement fields.

Each element is subdivided into resolution^dim linear cells sampling the
high-order field, which keeps the files loadable by any VTK reader while
still showing the in-element variation.
"""

from __future__ import annotations

import numpy as np

from .femcore import expand_free
from .meshdof import DofMap, Mesh, isoparametric_map
from .tensorelem import TensorElement

__all__ = ["write_vtk"]

_CELL_TYPE = {2: 9, 3: 12}  # VTK_QUAD, VTK_HEXAHEDRON


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def write_vtk(path, mesh: Mesh, element: TensorElement, dmap: DofMap,
              u_free: np.ndarray, resolution: int = 1) -> None:
    """Write the displaced field as an unstructured grid of linear cells."""
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    dim = mesh.dim
    r = resolution
    ticks = np.linspace(-1.0, 1.0, r + 1)
    if dim == 3:
        grid = np.array([(a, b, c) for c in ticks for b in ticks for a in ticks])
    else:
        grid = np.array([(a, b) for b in ticks for a in ticks])
    npts_e = len(grid)

    def pid(e, ijk):
        if dim == 3:
            i, j, k = ijk
            return e * npts_e + (k * (r + 1) + j) * (r + 1) + i
        i, j = ijk
        return e * npts_e + j * (r + 1) + i

    vals, _ = element.shape_eval(grid)
    points, disp, cells = [], [], []
    full = expand_free(dmap, u_free).reshape(dmap.n_modes, dim)
    for e in range(mesh.n_elems):
        x, _, _ = isoparametric_map(mesh, e, grid)
        coeff = full[dmap.gdof[e]] * dmap.gsign[e][:, None]
        points.append(x)
        disp.append(vals @ coeff)
        if dim == 3:
            for k in range(r):
                for j in range(r):
                    for i in range(r):
                        cells.append([
                            pid(e, (i, j, k)), pid(e, (i + 1, j, k)),
                            pid(e, (i + 1, j + 1, k)), pid(e, (i, j + 1, k)),
                            pid(e, (i, j, k + 1)), pid(e, (i + 1, j, k + 1)),
                            pid(e, (i + 1, j + 1, k + 1)), pid(e, (i, j + 1, k + 1)),
                        ])
        else:
            for j in range(r):
                for i in range(r):
                    cells.append([
                        pid(e, (i, j)), pid(e, (i + 1, j)),
                        pid(e, (i + 1, j + 1)), pid(e, (i, j + 1)),
                    ])
    points = np.vstack(points)
    disp = np.vstack(disp)
    if dim == 2:  # pad to 3D vectors as VTK expects
        points = np.column_stack([points, np.zeros(len(points))])
        disp = np.column_stack([disp, np.zeros(len(disp))])

    nc = len(cells)
    ncorner = 2**dim
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write("sdmefem displacement field\n")
        fh.write("ASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {len(points)} float\n")
        for p in points:
            fh.write(" ".join(_fmt(v) for v in p) + "\n")
        fh.write(f"CELLS {nc} {nc * (ncorner + 1)}\n")
        for cell in cells:
            fh.write(f"{ncorner} " + " ".join(str(i) for i in cell) + "\n")
        fh.write(f"CELL_TYPES {nc}\n")
        for _ in cells:
            fh.write(f"{_CELL_TYPE[dim]}\n")
        fh.write(f"POINT_DATA {len(points)}\n")
        fh.write("VECTORS displacement float\n")
        for d in disp:
            fh.write(" ".join(_fmt(v) for v in d) + "\n")
