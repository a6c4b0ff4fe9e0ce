"""Tensor-product shape functions for quadrilaterals and hexahedra.

Local functions are products of 1D basis functions, ordered
lexicographically in the tensor indices (p, q[, r]). Each function is
classified by the topological entity it is attached to (vertex, edge,
face, element interior), which drives both the boundary/internal split
used by static condensation and the global continuity rules.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis1d import Basis1D
from .quadrature import QuadratureRule

__all__ = ["TensorElement", "VERTEX_BITS", "EDGE_TABLE", "FACE_TABLE"]

# Corner numbering (VTK order) as bit tuples per axis: 0 -> xi=-1, 1 -> xi=+1.
VERTEX_BITS = {
    2: ((0, 0), (1, 0), (1, 1), (0, 1)),
    3: ((0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
        (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)),
}

_VTK_EDGES = {
    2: ((0, 1), (1, 2), (2, 3), (3, 0)),
    3: ((0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7), (7, 4),
        (0, 4), (1, 5), (2, 6), (3, 7)),
}


def _build_edge_table(dim):
    """Per local edge: (axis, fixed bits on the other axes, v0, v1).

    v0/v1 are the local vertices at bit 0/1 of the running axis, i.e. the
    direction of increasing local coordinate.
    """
    bits = VERTEX_BITS[dim]
    table = []
    for va, vb in _VTK_EDGES[dim]:
        diff = [d for d in range(dim) if bits[va][d] != bits[vb][d]]
        assert len(diff) == 1
        axis = diff[0]
        lo, hi = (va, vb) if bits[va][axis] == 0 else (vb, va)
        fixed = tuple(bits[lo][d] for d in range(dim) if d != axis)
        table.append((axis, fixed, lo, hi))
    return tuple(table)


def _build_face_table():
    """Hex faces keyed by (normal axis, side bit): in-plane axes + corners.

    Face id = 2*axis + side. ``corners[(ba, bb)]`` is the local vertex at
    bits (ba, bb) of the in-plane axes (d1 < d2).
    """
    bits = VERTEX_BITS[3]
    table = []
    for axis in range(3):
        d1, d2 = [d for d in range(3) if d != axis]
        for side in (0, 1):
            corners = {}
            for ba in (0, 1):
                for bb in (0, 1):
                    want = [0, 0, 0]
                    want[axis], want[d1], want[d2] = side, ba, bb
                    corners[(ba, bb)] = bits.index(tuple(want))
            table.append((axis, side, d1, d2, corners))
    return tuple(table)


EDGE_TABLE = {2: _build_edge_table(2), 3: _build_edge_table(3)}
FACE_TABLE = _build_face_table()


@dataclass(frozen=True)
class TensorElement:
    """Shape-function set of a quad (dim=2) or hex (dim=3) of order P."""

    dim: int
    basis: Basis1D
    index_map: np.ndarray  # (nfun, dim) tensor indices, lexicographic
    entity_class: tuple  # per-function ("vertex", v) / ("edge", e, m) / ...
    boundary_ids: np.ndarray
    internal_ids: np.ndarray

    @property
    def P(self) -> int:
        return self.basis.P

    @property
    def nfun(self) -> int:
        return len(self.index_map)

    @classmethod
    def create(cls, dim: int, basis: Basis1D) -> "TensorElement":
        if dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {dim}")
        P = basis.P
        shape = (P + 1,) * dim
        index_map = np.array(list(np.ndindex(*shape)), dtype=int)
        entity = []
        bits_list = VERTEX_BITS[dim]
        edge_lookup = {
            (axis, fixed): e for e, (axis, fixed, _, _) in enumerate(EDGE_TABLE[dim])
        }
        face_lookup = {(axis, side): f for f, (axis, side, _, _, _) in enumerate(FACE_TABLE)}
        for idx in index_map:
            internal_axes = tuple(d for d in range(dim) if idx[d] >= 2)
            n_int = len(internal_axes)
            if n_int == dim:
                tag = ("face", 0, tuple(idx)) if dim == 2 else ("body", tuple(idx))
            elif n_int == 0:
                tag = ("vertex", bits_list.index(tuple(idx)))
            elif n_int == 1:
                axis = internal_axes[0]
                fixed = tuple(int(idx[d]) for d in range(dim) if d != axis)
                tag = ("edge", edge_lookup[(axis, fixed)], int(idx[axis]))
            else:  # one vertex-type axis in 3D -> face function
                axis = next(d for d in range(3) if idx[d] < 2)
                f = face_lookup[(axis, int(idx[axis]))]
                m = tuple(int(idx[d]) for d in internal_axes)
                tag = ("face", f, m)
            entity.append(tag)
        internal = np.array([i for i, idx in enumerate(index_map) if np.all(idx >= 2)], dtype=int)
        boundary = np.setdiff1d(np.arange(len(index_map)), internal)
        return cls(dim, basis, index_map, tuple(entity), boundary, internal)

    def classify_dofs(self) -> tuple[np.ndarray, np.ndarray]:
        """(boundary_ids, internal_ids): internal = all tensor indices >= 2."""
        return self.boundary_ids, self.internal_ids

    def shape_eval(self, xi) -> tuple[np.ndarray, np.ndarray]:
        """Values (npts, nfun) and gradients (npts, nfun, dim) at points xi."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        vd, dd = [], []
        for d in range(self.dim):
            v, dv = self.basis.eval(xi[:, d])
            vd.append(v)
            dd.append(dv)
        im = self.index_map
        vals = np.ones((xi.shape[0], self.nfun))
        for d in range(self.dim):
            vals *= vd[d][im[:, d]].T
        grads = np.empty((xi.shape[0], self.nfun, self.dim))
        for g in range(self.dim):
            acc = np.ones((xi.shape[0], self.nfun))
            for d in range(self.dim):
                tab = dd[d] if d == g else vd[d]
                acc *= tab[im[:, d]].T
            grads[:, :, g] = acc
        return vals, grads

    def tabulate(self, rule: QuadratureRule):
        """Tensor quadrature tables: points, weights, values, gradients.

        Points are ordered lexicographically (first axis slowest) to match
        the function ordering; built from the 1D tables by outer products
        so the cost stays O(n^(dim+1)).
        """
        basis = self.basis if rule is self.basis.rule else self.basis.with_rule(rule)
        v, d = basis.values, basis.derivs
        x, w = rule.points, rule.weights
        if self.dim == 2:
            pts = np.array([(a, b) for a in x for b in x])
            wts = np.einsum("a,b->ab", w, w).ravel()
            n = np.einsum("pa,qb->abpq", v, v)
            gx = np.einsum("pa,qb->abpq", d, v)
            gy = np.einsum("pa,qb->abpq", v, d)
            grads = np.stack([gx, gy], axis=-1)
        else:
            pts = np.array([(a, b, c) for a in x for b in x for c in x])
            wts = np.einsum("a,b,c->abc", w, w, w).ravel()
            n = np.einsum("pa,qb,rc->abcpqr", v, v, v)
            gx = np.einsum("pa,qb,rc->abcpqr", d, v, v)
            gy = np.einsum("pa,qb,rc->abcpqr", v, d, v)
            gz = np.einsum("pa,qb,rc->abcpqr", v, v, d)
            grads = np.stack([gx, gy, gz], axis=-1)
        nq = rule.n**self.dim
        return pts, wts, n.reshape(nq, self.nfun), grads.reshape(nq, self.nfun, self.dim)
