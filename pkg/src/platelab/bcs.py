"""Boundary condition regimes and constraint bookkeeping.

Constraints are homogeneous and are imposed by dof elimination: each
regime produces boolean masks over the H1 dofs (per tangential component)
and the H2 dofs, and optimization / eigenvalue problems are restricted to
the complementary free dofs.
"""

from dataclasses import dataclass, field

import numpy as np

from .geometry import tag_directional
from .spaces import DisplacementField

H1_REGIMES = ("full_clamp", "transverse_clamp", "transverse_h10",
              "tangential_clamp", "partial_tangential", "directional", "custom")
V3_MODES = ("h20", "h10", "pin_affine", "pin_constant", "none")


@dataclass(frozen=True)
class BoundaryConditionSet:
    """Declarative description of a constraint regime.

    regime: which parts of the boundary clamp which components;
    v3: normalization of the transverse space when the regime itself does
        not constrain it ("h20", "h10", "pin_affine", "pin_constant", "none");
    tags: boundary tags for partial_tangential;
    direction: plane vector e for the directional regime;
    v3_clamp_tags: edges on which u3 and all its Hermite derivative dofs
        are clamped (partial transverse clamping, e.g. one edge only);
    pin_rigid: additionally pin three tangential dofs killing the plane
        rigid motions (used for subspaces with trivial rigid intersection);
    custom_*: explicit node / dof id lists for the custom regime.
    """

    regime: str = "custom"
    v3: str = "none"
    tags: tuple = ()
    direction: tuple = None
    v3_clamp_tags: tuple = ()
    pin_rigid: bool = False
    custom_u1_nodes: tuple = ()
    custom_u2_nodes: tuple = ()
    custom_u3_dofs: tuple = ()

    def __post_init__(self):
        if self.regime not in H1_REGIMES:
            raise ValueError("unknown regime %r" % (self.regime,))
        if self.v3 not in V3_MODES:
            raise ValueError("unknown v3 normalization %r" % (self.v3,))
        if self.regime == "partial_tangential" and not self.tags:
            raise ValueError("partial_tangential needs boundary tags")
        if self.regime == "directional" and self.direction is None:
            raise ValueError("directional regime needs a direction vector")


@dataclass
class Constraints:
    """Boolean constrained-dof masks and free-dof packing helpers."""

    h1: object
    h2: object
    m1: np.ndarray
    m2: np.ndarray
    m3: np.ndarray
    description: dict = field(default_factory=dict)

    @property
    def free1(self):
        return np.flatnonzero(~self.m1)

    @property
    def free2(self):
        return np.flatnonzero(~self.m2)

    @property
    def free3(self):
        return np.flatnonzero(~self.m3)

    @property
    def n_free(self):
        return self.free1.size + self.free2.size + self.free3.size

    def pack(self, u):
        return np.concatenate([u.u1[self.free1], u.u2[self.free2], u.u3[self.free3]])

    def unpack(self, z):
        n1, n2 = self.free1.size, self.free2.size
        u = DisplacementField.zero(self.h1, self.h2)
        u.u1[self.free1] = z[:n1]
        u.u2[self.free2] = z[n1:n1 + n2]
        u.u3[self.free3] = z[n1 + n2:]
        return u

    def project(self, u):
        """Zero the constrained dofs of a field in place and return it."""
        u.u1[self.m1] = 0.0
        u.u2[self.m2] = 0.0
        u.u3[self.m3] = 0.0
        return u


def _h2_dofs_on_nodes(nodes, kinds=(0, 1, 2, 3)):
    return np.concatenate([4 * np.asarray(nodes, dtype=int) + k for k in kinds]) \
        if len(nodes) else np.array([], dtype=int)


def _pin_affine_dofs(mesh):
    """Three constraints killing the affine transverse functions: value at
    two nodes with distinct y2, plus one first-derivative dof."""
    n0 = mesh.node_id(0, 0)
    n1 = mesh.node_id(0, mesh.n2)
    if abs(mesh.nodes[n1, 1] - mesh.nodes[n0, 1]) <= 1e-14:
        raise ValueError("degenerate pin_affine node pair")
    return np.array([4 * n0 + 0, 4 * n1 + 0, 4 * n0 + 1], dtype=int)


def _rigid_pin_dofs(mesh):
    """Three tangential point constraints with trivial rigid intersection:
    u1 and u2 at one node, u1 at a second node with different y2."""
    n0 = mesh.node_id(0, 0)
    n1 = mesh.node_id(0, mesh.n2)
    return np.array([n0, n1], dtype=int), np.array([n0], dtype=int)


def apply_bcs(mesh, h1, h2, bcs):
    """Translate a BoundaryConditionSet into dof masks."""
    m1 = np.zeros(h1.ndof, dtype=bool)
    m2 = np.zeros(h1.ndof, dtype=bool)
    m3 = np.zeros(h2.ndof, dtype=bool)
    info = {"regime": bcs.regime, "v3": bcs.v3}

    regime = bcs.regime
    all_boundary = mesh.boundary_node_ids()

    if regime == "full_clamp":
        m1[all_boundary] = True
        m2[all_boundary] = True
        m3[_h2_dofs_on_nodes(all_boundary)] = True
    elif regime == "transverse_clamp":
        m3[_h2_dofs_on_nodes(all_boundary)] = True
    elif regime == "transverse_h10":
        m3[_h2_dofs_on_nodes(all_boundary, kinds=(0,))] = True
    elif regime == "tangential_clamp":
        m1[all_boundary] = True
        m2[all_boundary] = True
    elif regime == "partial_tangential":
        nodes = mesh.boundary_node_ids(tags=bcs.tags)
        if nodes.size == 0:
            raise ValueError("no boundary edges carry tags %r" % (bcs.tags,))
        m1[nodes] = True
        m2[nodes] = True
        info["tangential_nodes"] = int(nodes.size)
    elif regime == "directional":
        edges = tag_directional(mesh, np.asarray(bcs.direction, dtype=float))
        nodes = sorted({n for e in edges for n in e.nodes})
        m1[list(nodes)] = True
        m2[list(nodes)] = True
        info["directional_edges"] = len(edges)
    elif regime == "custom":
        m1[list(bcs.custom_u1_nodes)] = True
        m2[list(bcs.custom_u2_nodes)] = True
        m3[list(bcs.custom_u3_dofs)] = True

    if bcs.v3_clamp_tags:
        nodes = mesh.boundary_node_ids(tags=bcs.v3_clamp_tags)
        if nodes.size == 0:
            raise ValueError("no boundary edges carry tags %r" % (bcs.v3_clamp_tags,))
        m3[_h2_dofs_on_nodes(nodes)] = True

    if regime in ("tangential_clamp", "partial_tangential", "directional", "custom"):
        if bcs.v3 == "h20":
            m3[_h2_dofs_on_nodes(all_boundary)] = True
        elif bcs.v3 == "h10":
            m3[_h2_dofs_on_nodes(all_boundary, kinds=(0,))] = True
        elif bcs.v3 == "pin_affine":
            m3[_pin_affine_dofs(mesh)] = True
        elif bcs.v3 == "pin_constant":
            m3[4 * mesh.node_id(0, 0)] = True

    if bcs.pin_rigid:
        u1_nodes, u2_nodes = _rigid_pin_dofs(mesh)
        m1[u1_nodes] = True
        m2[u2_nodes] = True

    return Constraints(h1, h2, m1, m2, m3, info)
