import numpy as np
import pytest

from platelab.geometry import (DomainError, MeshError, PlanarDomain,
                               build_mesh, rectangle, tag_directional,
                               unit_square)


def test_rectangle_domain_validation():
    with pytest.raises(DomainError):
        rectangle(1.0, 0.0)
    with pytest.raises(DomainError):
        PlanarDomain("rectangle_like", a=0.0, b=1.0)  # missing graphs
    with pytest.raises(DomainError):
        PlanarDomain("mystery")


def test_polygon_validation():
    # clockwise ordering rejected
    with pytest.raises(DomainError):
        PlanarDomain("convex_polygon", vertices=[[0, 0], [0, 1], [1, 0]])
    # non-convex corner rejected for convex_polygon
    with pytest.raises(DomainError):
        PlanarDomain("convex_polygon",
                     vertices=[[0, 0], [2, 0], [2, 2], [1, 0.5], [0, 2]])
    # but accepted as a general polygon
    dom = PlanarDomain("general_polygon",
                       vertices=[[0, 0], [2, 0], [2, 2], [1, 0.5], [0, 2]])
    assert dom.kind == "general_polygon"


def test_unit_square_mesh_counts():
    mesh = build_mesh(unit_square(), 4, 3)
    assert mesh.n_nodes == 5 * 4
    assert mesh.n_elements == 12
    assert len(mesh.boundary_edges) == 2 * (4 + 3)
    # total area through element rectangles
    x0, y0, hx, hy = mesh.element_rectangles()
    assert abs((hx * hy).sum() - 1.0) < 1e-14


def test_boundary_tags_and_nodes():
    mesh = build_mesh(unit_square(), 4, 4)
    bottom = mesh.boundary_node_ids(tags=("bottom",))
    assert bottom.size == 5
    assert np.allclose(mesh.nodes[bottom, 1], 0.0)
    graphs = mesh.boundary_node_ids(tags=("gamma_f", "gamma_g"))
    assert graphs.size == 10
    assert mesh.boundary_node_ids().size == 16


def test_boundary_normals_outward():
    mesh = build_mesh(unit_square(), 3, 3)
    for e in mesh.boundary_edges:
        mid = 0.5 * (mesh.nodes[e.nodes[0]] + mesh.nodes[e.nodes[1]])
        outside = mid + 1e-3 * e.normal
        assert not ((0 < outside[0] < 1) and (0 < outside[1] < 1))
        assert abs(np.linalg.norm(e.normal) - 1.0) < 1e-12


def test_boundary_edge_lengths_sum_to_perimeter():
    mesh = build_mesh(rectangle(0.0, 2.0, 0.0, 1.0), 6, 5)
    total = sum(e.length for e in mesh.boundary_edges)
    assert abs(total - 6.0) < 1e-12


def test_rectangle_like_curved_graphs():
    dom = PlanarDomain("rectangle_like", a=0.0, b=1.0,
                       f=lambda x: 0.1 * np.sin(np.pi * x),
                       g=lambda x: 1.0 + 0.1 * x)
    mesh = build_mesh(dom, 8, 8)
    assert mesh.element_rectangles() is None
    y = mesh.nodes[:, 1]
    x = mesh.nodes[:, 0]
    assert np.all(y >= 0.1 * np.sin(np.pi * x) - 1e-12)
    assert np.all(y <= 1.0 + 0.1 * x + 1e-12)


def test_directional_tagging():
    mesh = build_mesh(unit_square(), 4, 4)
    e = np.array([1.0, 0.0])
    edges = tag_directional(mesh, e)
    # edges whose normal is not perpendicular to e: left and right
    assert len(edges) == 8
    for edge in edges:
        assert abs(edge.normal @ e) > 0.9


def test_interior_distance():
    mesh = build_mesh(unit_square(), 8, 8)
    d = mesh.interior_distance(np.array([[0.5, 0.5], [0.1, 0.5], [0.0, 0.3]]))
    assert abs(d[0] - 0.5) < 1e-12
    assert abs(d[1] - 0.1) < 1e-12
    assert abs(d[2]) < 1e-12


def test_degenerate_mesh_rejected():
    with pytest.raises((MeshError, DomainError, ValueError)):
        dom = PlanarDomain("rectangle_like", a=0.0, b=1.0,
                           f=lambda x: 1.0 + 0.0 * np.asarray(x),
                           g=lambda x: 0.0 * np.asarray(x))
        build_mesh(dom, 4, 4)
