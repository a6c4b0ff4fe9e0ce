"""Twisted two-hexahedron meshes shared by the continuity checks."""

from itertools import permutations

import numpy as np

from sdmefem.meshdof import Mesh
from sdmefem.tensorelem import VERTEX_BITS


def rotated_two_hex_mesh(perm, signs):
    """[0,1]^3 plus [1,2]x[0,1]^2 with the second hex's local axes rotated
    by the given axis permutation and directions."""
    c1 = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
          (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)]

    def corner2(bits):
        x = [0.0, 0.0, 0.0]
        for d in range(3):
            f = bits[d] if signs[d] > 0 else 1 - bits[d]
            x[perm[d]] = f
        return (x[0] + 1, x[1], x[2])

    c2 = [corner2(b) for b in VERTEX_BITS[3]]
    ids, coords = {}, []
    for v in c1 + c2:
        if v not in ids:
            ids[v] = len(coords)
            coords.append(v)
    elems = [[ids[v] for v in c1], [ids[v] for v in c2]]
    return Mesh(3, np.array(coords, float), np.array(elems), {})


def all_rotations():
    """The 24 orientation-preserving axis maps of a hexahedron."""
    rots = []
    for perm in permutations(range(3)):
        for sx in (1, -1):
            for sy in (1, -1):
                for sz in (1, -1):
                    mat = np.zeros((3, 3))
                    for d, s in enumerate((sx, sy, sz)):
                        mat[perm[d], d] = s
                    if np.linalg.det(mat) > 0:
                        rots.append((perm, (sx, sy, sz)))
    return rots
