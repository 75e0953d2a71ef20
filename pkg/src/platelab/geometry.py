"""Planar domains and structured quadrilateral meshes.

Domains are flat plate midsurfaces: rectangle-like regions bounded by two
graphs over an interval, convex polygons, and general polygons.  All meshes
are structured grids of quadrilaterals obtained by mapping a reference
square; refining (n1, n2) -> (2*n1, 2*n2) keeps every coarse node.
"""

from dataclasses import dataclass, field

import numpy as np


class DomainError(ValueError):
    """Raised when a domain description violates its validity conditions."""


class MeshError(ValueError):
    """Raised when a mesh cannot be built or fails an invariant."""


NORMAL_ALIGNMENT_TOL = 1e-8  # relative threshold for directional edge tagging


@dataclass(frozen=True)
class PlanarDomain:
    """A bounded planar midsurface domain.

    kind is one of:
      "rectangle_like": {y : a < y1 < b, f(y1) < y2 < g(y1)} for Lipschitz
          graphs f < g given as callables on [a, b];
      "convex_polygon": counterclockwise vertex list with convex corners;
      "general_polygon": counterclockwise simple polygon.
    """

    kind: str
    a: float = 0.0
    b: float = 1.0
    f: object = None
    g: object = None
    vertices: object = None

    def __post_init__(self):
        if self.kind == "rectangle_like":
            if not (self.b > self.a):
                raise DomainError("rectangle_like needs b > a")
            if self.f is None or self.g is None:
                raise DomainError("rectangle_like needs graph callables f, g")
        elif self.kind in ("convex_polygon", "general_polygon"):
            v = np.asarray(self.vertices, dtype=float)
            if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
                raise DomainError("polygon needs at least 3 planar vertices")
            area2 = _signed_area2(v)
            if area2 <= 0:
                raise DomainError("polygon vertices must be counterclockwise")
            if self.kind == "convex_polygon":
                n = v.shape[0]
                for i in range(n):
                    p, q, r = v[i], v[(i + 1) % n], v[(i + 2) % n]
                    s, t = q - p, r - q
                    if s[0] * t[1] - s[1] * t[0] < -1e-12 * np.abs(area2):
                        raise DomainError("polygon is not convex at vertex %d" % ((i + 1) % n))
            object.__setattr__(self, "vertices", v)
        else:
            raise DomainError("unknown domain kind: %r" % (self.kind,))

    def diameter(self):
        if self.kind == "rectangle_like":
            xs = np.linspace(self.a, self.b, 65)
            lo = np.min([self.f(x) for x in xs])
            hi = np.max([self.g(x) for x in xs])
            return float(np.hypot(self.b - self.a, hi - lo))
        v = self.vertices
        d = np.linalg.norm(v[:, None, :] - v[None, :, :], axis=-1)
        return float(d.max())


def rectangle(a=0.0, b=1.0, c=0.0, d=1.0):
    """Axis-aligned rectangle (a, b) x (c, d) as a rectangle_like domain."""
    if not (b > a and d > c):
        raise DomainError("rectangle needs b > a and d > c")
    return PlanarDomain("rectangle_like", a=a, b=b,
                        f=(lambda x: c + 0.0 * np.asarray(x)),
                        g=(lambda x: d + 0.0 * np.asarray(x)))


def unit_square():
    return rectangle(0.0, 1.0, 0.0, 1.0)


def _signed_area2(v):
    x, y = v[:, 0], v[:, 1]
    return float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass
class BoundaryEdge:
    """One boundary edge segment: node pair, owner element, outward normal."""

    nodes: tuple
    element: int
    local_edge: int
    tags: tuple
    normal: np.ndarray
    length: float


@dataclass
class Mesh:
    """Structured quadrilateral mesh.

    nodes: (N, 2) coordinates; elements: (E, 4) counterclockwise node ids
    with local corners ((0,0), (1,0), (1,1), (0,1)) of the reference square;
    boundary_edges: BoundaryEdge list traversing the boundary; shape (n1, n2)
    of the underlying grid.
    """

    domain: PlanarDomain
    n1: int
    n2: int
    nodes: np.ndarray
    elements: np.ndarray
    boundary_edges: list
    tag_names: tuple = ()
    _edge_lookup: dict = field(default_factory=dict, repr=False)

    def node_id(self, i, j):
        return i * (self.n2 + 1) + j

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_elements(self):
        return self.elements.shape[0]

    def boundary_node_ids(self, tags=None):
        """Node ids lying on boundary edges carrying any of the given tags."""
        ids = set()
        for e in self.boundary_edges:
            if tags is None or any(t in e.tags for t in tags):
                ids.update(e.nodes)
        return np.array(sorted(ids), dtype=int)

    def edges_with_tag(self, tag):
        return [e for e in self.boundary_edges if tag in e.tags]

    def element_rectangles(self, tol=1e-12):
        """Per-element (x0, y0, hx, hy) if all elements are axis-aligned
        rectangles, else None."""
        p = self.nodes[self.elements]  # (E, 4, 2)
        x0, y0 = p[:, 0, 0], p[:, 0, 1]
        hx = p[:, 1, 0] - x0
        hy = p[:, 3, 1] - y0
        scale = max(np.abs(hx).max(), np.abs(hy).max())
        ok = (np.abs(p[:, 1, 1] - y0).max() <= tol * scale
              and np.abs(p[:, 3, 0] - x0).max() <= tol * scale
              and np.abs(p[:, 2, 0] - x0 - hx).max() <= tol * scale
              and np.abs(p[:, 2, 1] - y0 - hy).max() <= tol * scale
              and hx.min() > 0 and hy.min() > 0)
        if not ok:
            return None
        return x0, y0, hx, hy

    def interior_distance(self, pts):
        """Distance from points (Q, 2) to the nearest boundary edge segment."""
        pts = np.asarray(pts, dtype=float)
        d = np.full(pts.shape[0], np.inf)
        for e in self.boundary_edges:
            a = self.nodes[e.nodes[0]]
            b = self.nodes[e.nodes[1]]
            ab = b - a
            t = np.clip(((pts - a) @ ab) / (ab @ ab), 0.0, 1.0)
            proj = a + t[:, None] * ab
            d = np.minimum(d, np.linalg.norm(pts - proj, axis=1))
        return d


def _grid_points_rectangle_like(dom, n1, n2):
    xs = np.linspace(dom.a, dom.b, n1 + 1)
    fx = np.array([float(dom.f(x)) for x in xs])
    gx = np.array([float(dom.g(x)) for x in xs])
    # validity check at nodes and midpoints
    xm = 0.5 * (xs[:-1] + xs[1:])
    for x in np.concatenate([xs, xm]):
        lo, hi = float(dom.f(x)), float(dom.g(x))
        if not hi > lo:
            raise DomainError("graphs violate f < g at y1 = %.6g" % x)
    t = np.linspace(0.0, 1.0, n2 + 1)
    pts = np.empty(((n1 + 1) * (n2 + 1), 2))
    for i in range(n1 + 1):
        rows = slice(i * (n2 + 1), (i + 1) * (n2 + 1))
        pts[rows, 0] = xs[i]
        pts[rows, 1] = fx[i] + t * (gx[i] - fx[i])
    return pts


def _polyline_arclength_sampler(points):
    """Return a callable mapping arclength fraction in [0,1] to a point on
    the closed polyline given by points (not repeating the first point)."""
    pts = np.vstack([points, points[:1]])
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]

    def at(frac):
        s = np.clip(frac, 0.0, 1.0) * total
        k = np.searchsorted(cum, s, side="right") - 1
        k = np.clip(k, 0, len(seg) - 1)
        local = (s - cum[k]) / seg[k]
        return pts[k] + local[:, None] * (pts[k + 1] - pts[k])

    return at


def _grid_points_polygon(dom, n1, n2):
    """Coons-patch (transfinite) interpolation of the polygon boundary.

    The closed boundary polyline is split at arclength fractions 0, 1/4,
    1/2, 3/4 into four chains used as bottom, right, top, left curves.
    """
    at = _polyline_arclength_sampler(dom.vertices)
    u = np.linspace(0.0, 1.0, n1 + 1)
    v = np.linspace(0.0, 1.0, n2 + 1)
    bottom = at(0.25 * u)
    right = at(0.25 + 0.25 * v)
    top = at(0.75 - 0.25 * u)  # parametrized left-to-right
    left = at(1.0 - 0.25 * v)  # parametrized bottom-to-top
    p00, p10 = bottom[0], bottom[-1]
    p01, p11 = top[0], top[-1]
    uu, vv = np.meshgrid(u, v, indexing="ij")
    pts = ((1 - vv)[..., None] * bottom[:, None, :]
           + vv[..., None] * top[:, None, :]
           + (1 - uu)[..., None] * left[None, :, :]
           + uu[..., None] * right[None, :, :]
           - ((1 - uu) * (1 - vv))[..., None] * p00
           - (uu * (1 - vv))[..., None] * p10
           - (uu * vv)[..., None] * p11
           - ((1 - uu) * vv)[..., None] * p01)
    return pts.reshape(-1, 2)


def build_mesh(domain, n1, n2):
    """Build the structured quadrilateral mesh with n1 x n2 elements."""
    if n1 < 1 or n2 < 1:
        raise MeshError("mesh needs n1, n2 >= 1")
    if domain.kind == "rectangle_like":
        nodes = _grid_points_rectangle_like(domain, n1, n2)
    else:
        nodes = _grid_points_polygon(domain, n1, n2)

    def nid(i, j):
        return i * (n2 + 1) + j

    elements = np.empty((n1 * n2, 4), dtype=int)
    k = 0
    for i in range(n1):
        for j in range(n2):
            elements[k] = (nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1))
            k += 1

    # orientation / degeneracy check via corner cross products
    p = nodes[elements]
    v = p - np.roll(p, 1, axis=1)
    cross = v[:, :, 0] * np.roll(v, -1, axis=1)[:, :, 1] - v[:, :, 1] * np.roll(v, -1, axis=1)[:, :, 0]
    if np.any(cross <= 0):
        raise MeshError("mesh has a degenerate or inverted element")

    boundary = []
    # local edges of an element: (0,1) eta=0, (1,2) xi=1, (2,3) eta=1, (3,0) xi=0
    def add_edge(i, j, i2, j2, elem, local, tags):
        n0, n1_ = nid(i, j), nid(i2, j2)
        a, b = nodes[n0], nodes[n1_]
        t = b - a
        L = float(np.hypot(*t))
        if L <= 0:
            raise MeshError("zero-length boundary edge")
        normal = np.array([t[1], -t[0]]) / L
        boundary.append(BoundaryEdge((n0, n1_), elem, local, tuple(tags), normal, L))

    if domain.kind == "rectangle_like":
        bottom_tags, top_tags = ("gamma_f", "bottom"), ("gamma_g", "top")
        left_tags, right_tags = ("lateral", "left"), ("lateral", "right")
        tag_names = ("gamma_f", "gamma_g", "lateral", "bottom", "top", "left", "right")
    else:
        bottom_tags, top_tags = ("boundary", "bottom"), ("boundary", "top")
        left_tags, right_tags = ("boundary", "left"), ("boundary", "right")
        tag_names = ("boundary", "bottom", "top", "left", "right")

    def elem_id(i, j):
        return i * n2 + j

    for i in range(n1):  # bottom, left to right (ccw)
        add_edge(i, 0, i + 1, 0, elem_id(i, 0), 0, bottom_tags)
    for j in range(n2):  # right, upward
        add_edge(n1, j, n1, j + 1, elem_id(n1 - 1, j), 1, right_tags)
    for i in range(n1 - 1, -1, -1):  # top, right to left
        add_edge(i + 1, n2, i, n2, elem_id(i, n2 - 1), 2, top_tags)
    for j in range(n2 - 1, -1, -1):  # left, downward
        add_edge(0, j + 1, 0, j, elem_id(0, j), 3, left_tags)

    mesh = Mesh(domain, n1, n2, nodes, elements, boundary, tag_names)
    for e in mesh.boundary_edges:
        mesh._edge_lookup[frozenset(e.nodes)] = e
    return mesh


def tag_directional(mesh, e, tol=NORMAL_ALIGNMENT_TOL):
    """Mark boundary edges whose outward normal is not orthogonal to e.

    Adds the tag "directional" to every boundary edge with
    |normal . e| > tol * |e| and returns their list.  This is the clamped
    part gamma_0 used by direction-constrained regimes.
    """
    e = np.asarray(e, dtype=float)
    norm_e = np.linalg.norm(e)
    if norm_e <= 0:
        raise ValueError("direction vector must be nonzero")
    tagged = []
    for edge in mesh.boundary_edges:
        if abs(float(edge.normal @ e)) > tol * norm_e:
            if "directional" not in edge.tags:
                edge.tags = edge.tags + ("directional",)
            tagged.append(edge)
        elif "directional" in edge.tags:
            edge.tags = tuple(t for t in edge.tags if t != "directional")
    if "directional" not in mesh.tag_names:
        mesh.tag_names = mesh.tag_names + ("directional",)
    return tagged
