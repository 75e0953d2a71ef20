"""Finite element spaces on structured quadrilateral meshes.

SpaceH1: piecewise-bilinear H1-conforming scalar space (one dof per node),
used componentwise for the tangential displacements.

SpaceH2: Bogner-Fox-Schmit bicubic Hermite C1-conforming scalar space with
four dofs per node (value, d/dy1, d/dy2, d2/dy1dy2), used for the
transverse displacement.  Its element tables require every element to be an
axis-aligned rectangle; operations that only need dof bookkeeping (masks,
constraints) work on any mesh.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .geometry import MeshError
from .quadrature import gauss_1d, gauss_2d

DEFAULT_QUAD = 4  # tensor Gauss points per direction for all area integrals


@dataclass
class ScalarField:
    """Closed-form scalar field on the midsurface with optional derivatives.

    Each attribute is a vectorized callable of (y1, y2) or None.
    """

    value: object
    d1: object = None
    d2: object = None
    d11: object = None
    d12: object = None
    d22: object = None

    @staticmethod
    def constant(c):
        return ScalarField(
            value=lambda x, y: c + 0.0 * np.asarray(x),
            d1=lambda x, y: 0.0 * np.asarray(x),
            d2=lambda x, y: 0.0 * np.asarray(x),
            d11=lambda x, y: 0.0 * np.asarray(x),
            d12=lambda x, y: 0.0 * np.asarray(x),
            d22=lambda x, y: 0.0 * np.asarray(x),
        )


@dataclass
class QuadTables:
    """Pointwise evaluation operators at element-major quadrature points."""

    points: np.ndarray     # (Q, 2) physical coordinates
    weights: np.ndarray    # (Q,) physical weights
    ops: dict              # name -> sparse (Q, ndof) operator


def _bilinear_ref(xi, eta):
    """Q1 reference shape values and reference gradients, shape (4, nq)."""
    N = np.stack([(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta])
    dNdxi = np.stack([-(1 - eta), (1 - eta), eta, -eta])
    dNdeta = np.stack([-(1 - xi), -xi, xi, (1 - xi)])
    return N, dNdxi, dNdeta


class SpaceH1:
    """Scalar piecewise-bilinear space; ndof == number of mesh nodes."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.ndof = mesh.n_nodes
        self._tables = {}
        self._forms = {}

    def tables(self, n=DEFAULT_QUAD):
        if n in self._tables:
            return self._tables[n]
        mesh = self.mesh
        xi, eta, wref = gauss_2d(n)
        nq = xi.size
        N, dNdxi, dNdeta = _bilinear_ref(xi, eta)
        p = mesh.nodes[mesh.elements]            # (E, 4, 2)
        x_xi = np.einsum("eak,aq->eqk", p, dNdxi)    # (E, nq, 2)
        x_eta = np.einsum("eak,aq->eqk", p, dNdeta)
        det = x_xi[..., 0] * x_eta[..., 1] - x_xi[..., 1] * x_eta[..., 0]
        if np.any(det <= 0):
            raise MeshError("non-positive jacobian in H1 tables")
        # d/dx = ( y_eta * d/dxi - y_xi * d/deta) / det
        # d/dy = (-x_eta * d/dxi + x_xi * d/deta) / det
        E = mesh.n_elements
        val = np.broadcast_to(N.T, (E, nq, 4)).copy()
        d1 = (x_eta[..., 1][:, :, None] * dNdxi.T[None] - x_xi[..., 1][:, :, None] * dNdeta.T[None]) / det[:, :, None]
        d2 = (-x_eta[..., 0][:, :, None] * dNdxi.T[None] + x_xi[..., 0][:, :, None] * dNdeta.T[None]) / det[:, :, None]
        pts = np.einsum("eak,aq->eqk", p, N).reshape(E * nq, 2)
        weights = (wref[None, :] * det).ravel()
        rows = np.repeat(np.arange(E * nq), 4)
        cols = np.repeat(mesh.elements, nq, axis=0).ravel()

        def mat(a):
            return sp.csr_matrix((a.reshape(E * nq, 4).ravel(), (rows, cols)),
                                 shape=(E * nq, self.ndof))

        t = QuadTables(pts, weights, {"v": mat(val), "d1": mat(d1), "d2": mat(d2)})
        self._tables[n] = t
        return t

    def forms(self, n=DEFAULT_QUAD):
        """Mass and stiffness matrices (sparse CSR)."""
        if n in self._forms:
            return self._forms[n]
        t = self.tables(n)
        W = sp.diags(t.weights)
        M = (t.ops["v"].T @ W @ t.ops["v"]).tocsr()
        K = (t.ops["d1"].T @ W @ t.ops["d1"] + t.ops["d2"].T @ W @ t.ops["d2"]).tocsr()
        self._forms[n] = (M, K)
        return M, K

    def interpolate(self, f):
        fun = f.value if isinstance(f, ScalarField) else f
        x, y = self.mesh.nodes[:, 0], self.mesh.nodes[:, 1]
        return np.asarray(fun(x, y), dtype=float) + np.zeros(self.ndof)


def _hermite_1d(s, order):
    """Unit-interval cubic Hermite basis derivatives, shape (2, 2, nq).

    Index [corner, type] with type 0 = value dof, type 1 = derivative dof
    (unit scale).  order is the derivative order 0..2.
    """
    s = np.asarray(s, dtype=float)
    if order == 0:
        v0 = 1 - 3 * s**2 + 2 * s**3
        d0 = s - 2 * s**2 + s**3
        v1 = 3 * s**2 - 2 * s**3
        d1 = -(s**2) + s**3
    elif order == 1:
        v0 = -6 * s + 6 * s**2
        d0 = 1 - 4 * s + 3 * s**2
        v1 = 6 * s - 6 * s**2
        d1 = -2 * s + 3 * s**2
    elif order == 2:
        v0 = -6 + 12 * s
        d0 = -4 + 6 * s
        v1 = 6 - 12 * s
        d1 = -2 + 6 * s
    else:
        raise ValueError("order must be 0, 1, or 2")
    return np.array([[v0, d0], [v1, d1]])


# local dof layout: L = 4 * a + k for corner a in 0..3, k in
# (value, d/dx, d/dy, d2/dxdy); corner reference coords:
_CORNERS = ((0, 0), (1, 0), (1, 1), (0, 1))
_TYPES = ((0, 0), (1, 0), (0, 1), (1, 1))  # (x-type, y-type) per k


class SpaceH2:
    """Bogner-Fox-Schmit bicubic Hermite space; ndof == 4 * n_nodes.

    Dof 4*node+k stores (value, d1, d2, d12) of the function at the node.
    """

    def __init__(self, mesh):
        self.mesh = mesh
        self.ndof = 4 * mesh.n_nodes
        self._tables = {}
        self._forms = {}
        self._edge_tables = {}

    def _rectangles(self):
        r = self.mesh.element_rectangles()
        if r is None:
            raise MeshError("SpaceH2 element tables need axis-aligned rectangular elements")
        return r

    def element_dofs(self):
        """(E, 16) global dof ids in local ordering."""
        el = self.mesh.elements
        dofs = np.empty((el.shape[0], 16), dtype=int)
        for a in range(4):
            for k in range(4):
                dofs[:, 4 * a + k] = 4 * el[:, a] + k
        return dofs

    def tables(self, n=DEFAULT_QUAD):
        if n in self._tables:
            return self._tables[n]
        x0, y0, hx, hy = self._rectangles()
        mesh = self.mesh
        E = mesh.n_elements
        xi, eta, wref = gauss_2d(n)
        nq = xi.size
        Bx = [_hermite_1d(xi, o) for o in range(3)]   # each (2, 2, nq)
        By = [_hermite_1d(eta, o) for o in range(3)]

        # reference product for local dof L and derivative orders (p, q)
        def ref(p, q):
            out = np.empty((16, nq))
            for a, (ca, cb) in enumerate(_CORNERS):
                for k, (tx, ty) in enumerate(_TYPES):
                    out[4 * a + k] = Bx[p][ca, tx] * By[q][cb, ty]
            return out

        # physical scaling: dof type contributes hx^tx hy^ty, derivative
        # order contributes hx^-p hy^-q
        tx_arr = np.array([_TYPES[k][0] for a in range(4) for k in range(4)], dtype=float)
        ty_arr = np.array([_TYPES[k][1] for a in range(4) for k in range(4)], dtype=float)

        dofs = self.element_dofs()
        rows = np.repeat(np.arange(E * nq), 16)
        cols = np.repeat(dofs, nq, axis=0).ravel()

        def mat(p, q):
            R = ref(p, q)  # (16, nq)
            scale = hx[:, None] ** (tx_arr[None, :] - p) * hy[:, None] ** (ty_arr[None, :] - q)
            data = scale[:, None, :] * R.T[None, :, :]  # (E, nq, 16)
            return sp.csr_matrix((data.ravel(), (rows, cols)), shape=(E * nq, self.ndof))

        px = x0[:, None] + hx[:, None] * xi[None, :]
        py = y0[:, None] + hy[:, None] * eta[None, :]
        pts = np.stack([px.ravel(), py.ravel()], axis=1)
        weights = (wref[None, :] * (hx * hy)[:, None]).ravel()
        ops = {"v": mat(0, 0), "d1": mat(1, 0), "d2": mat(0, 1),
               "d11": mat(2, 0), "d22": mat(0, 2), "d12": mat(1, 1)}
        t = QuadTables(pts, weights, ops)
        self._tables[n] = t
        return t

    def forms(self, n=DEFAULT_QUAD):
        """Mass, gradient-stiffness, and Hessian-seminorm matrices.

        The Hessian form integrates (d11)^2 + (d22)^2 + 2 (d12)^2, matching
        the Frobenius norm of the symmetric second-derivative matrix.
        """
        if n in self._forms:
            return self._forms[n]
        t = self.tables(n)
        W = sp.diags(t.weights)
        o = t.ops
        M = (o["v"].T @ W @ o["v"]).tocsr()
        K = (o["d1"].T @ W @ o["d1"] + o["d2"].T @ W @ o["d2"]).tocsr()
        H = (o["d11"].T @ W @ o["d11"] + o["d22"].T @ W @ o["d22"]
             + 2.0 * (o["d12"].T @ W @ o["d12"])).tocsr()
        self._forms[n] = (M, K, H)
        return M, K, H

    def interpolate(self, f):
        """Nodal Hermite interpolation of a ScalarField with derivatives."""
        if not isinstance(f, ScalarField) or f.d1 is None or f.d2 is None or f.d12 is None:
            raise ValueError("SpaceH2 interpolation needs value, d1, d2, d12")
        x, y = self.mesh.nodes[:, 0], self.mesh.nodes[:, 1]
        out = np.empty(self.ndof)
        z = np.zeros_like(x)
        out[0::4] = np.asarray(f.value(x, y), dtype=float) + z
        out[1::4] = np.asarray(f.d1(x, y), dtype=float) + z
        out[2::4] = np.asarray(f.d2(x, y), dtype=float) + z
        out[3::4] = np.asarray(f.d12(x, y), dtype=float) + z
        return out

    def from_nodal_data(self, value, d1, d2, d12):
        out = np.empty(self.ndof)
        out[0::4], out[1::4], out[2::4], out[3::4] = value, d1, d2, d12
        return out

    def edge_tables(self, n=DEFAULT_QUAD):
        """Boundary-edge quadrature tables for trace integrals.

        Returns (points (Qb,2), weights (Qb,), normals (Qb,2), ops dict of
        sparse (Qb, ndof)), traversing mesh.boundary_edges in order.
        """
        if n in self._edge_tables:
            return self._edge_tables[n]
        x0, y0, hx, hy = self._rectangles()
        mesh = self.mesh
        s, w1 = gauss_1d(n)
        dofs = self.element_dofs()
        # map edge-local parameter to reference coords per local edge id
        param = {
            0: (s, np.zeros_like(s)),
            1: (np.ones_like(s), s),
            2: (1 - s, np.ones_like(s)),
            3: (np.zeros_like(s), 1 - s),
        }
        rows_pts, rows_w, rows_nrm = [], [], []
        data = {k: [] for k in ("v", "d1", "d2", "d11", "d22", "d12")}
        rows, cols = [], []
        tx_arr = np.array([_TYPES[k][0] for a in range(4) for k in range(4)], dtype=float)
        ty_arr = np.array([_TYPES[k][1] for a in range(4) for k in range(4)], dtype=float)
        for ei, edge in enumerate(mesh.boundary_edges):
            e = edge.element
            xi, eta = param[edge.local_edge]
            Bx = [_hermite_1d(xi, o) for o in range(3)]
            By = [_hermite_1d(eta, o) for o in range(3)]

            def ref(p, q):
                out = np.empty((16, s.size))
                for a, (ca, cb) in enumerate(_CORNERS):
                    for k, (tx, ty) in enumerate(_TYPES):
                        out[4 * a + k] = Bx[p][ca, tx] * By[q][cb, ty]
                return out

            for name, (p, q) in (("v", (0, 0)), ("d1", (1, 0)), ("d2", (0, 1)),
                                 ("d11", (2, 0)), ("d22", (0, 2)), ("d12", (1, 1))):
                scale = hx[e] ** (tx_arr - p) * hy[e] ** (ty_arr - q)
                data[name].append((scale[:, None] * ref(p, q)).T)  # (nq, 16)
            rows_pts.append(np.stack([x0[e] + hx[e] * xi, y0[e] + hy[e] * eta], axis=1))
            rows_w.append(w1 * edge.length)
            rows_nrm.append(np.broadcast_to(edge.normal, (s.size, 2)))
            base = ei * s.size
            rows.append(np.repeat(base + np.arange(s.size), 16))
            cols.append(np.tile(dofs[e], s.size))
        Qb = len(mesh.boundary_edges) * s.size
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        ops = {}
        for name in data:
            vals = np.concatenate([d.ravel() for d in data[name]])
            ops[name] = sp.csr_matrix((vals, (rows, cols)), shape=(Qb, self.ndof))
        out = (np.vstack(rows_pts), np.concatenate(rows_w), np.vstack(rows_nrm), ops)
        self._edge_tables[n] = out
        return out


@dataclass
class DisplacementField:
    """Discrete plate displacement: tangential (u1, u2) in SpaceH1 and
    transverse u3 in SpaceH2, with optional closed-form originals."""

    h1: SpaceH1
    h2: SpaceH2
    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    closed_form: dict = field(default=None)

    @staticmethod
    def zero(h1, h2):
        return DisplacementField(h1, h2, np.zeros(h1.ndof), np.zeros(h1.ndof),
                                 np.zeros(h2.ndof))

    def copy(self):
        return DisplacementField(self.h1, self.h2, self.u1.copy(), self.u2.copy(),
                                 self.u3.copy(), self.closed_form)

    def norms(self, n=DEFAULT_QUAD):
        """(sum of squared H1 norms of u1, u2; squared H2 norm of u3)."""
        M, K = self.h1.forms(n)
        A = M + K
        h1sq = float(self.u1 @ (A @ self.u1) + self.u2 @ (A @ self.u2))
        M2, K2, H2 = self.h2.forms(n)
        h2sq = float(self.u3 @ ((M2 + K2 + H2) @ self.u3))
        return h1sq, h2sq


def interpolate_displacement(h1, h2, f1, f2, f3, keep_closed_form=True):
    """Interpolate three ScalarFields into a DisplacementField."""
    u = DisplacementField(h1, h2, h1.interpolate(f1), h1.interpolate(f2),
                          h2.interpolate(f3))
    if keep_closed_form:
        u.closed_form = {"u1": f1, "u2": f2, "u3": f3}
    return u
