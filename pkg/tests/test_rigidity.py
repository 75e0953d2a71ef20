import numpy as np
import pytest

from platelab.bcs import BoundaryConditionSet, apply_bcs
from platelab.energy import MaterialParams
from platelab.geometry import PlanarDomain, build_mesh, unit_square
from platelab.rigidity import (affine_kernel, gradient_kernel,
                               hessian_constant, korn_constant,
                               linear_strain_kernel, nonlinear_flex_search,
                               rigidity_verdict, subspace_angles_metric)
from platelab.spaces import SpaceH1, SpaceH2


def unconstrained(mesh, h1, h2):
    return apply_bcs(mesh, h1, h2, BoundaryConditionSet(regime="custom"))


def test_rigid_body_kernel_dimension_and_span(square8):
    mesh, h1, h2 = square8
    con = unconstrained(mesh, h1, h2)
    rep = linear_strain_kernel(h1, con)
    assert rep.dim == 3
    # exact rigid motions as global dof vectors (u1, u2 stacked)
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    n = h1.ndof
    R = np.zeros((2 * n, 3))
    R[:n, 0] = 1.0
    R[n:, 1] = 1.0
    R[:n, 2], R[n:, 2] = y, -x
    from scipy.sparse import block_diag
    M, K = h1.forms()
    A = block_diag([M + K, M + K]).tocsr()
    ang = subspace_angles_metric(rep.basis, R, A)
    assert np.max(ang) < 1e-6


def test_tangential_clamp_kills_linear_kernel(square8):
    mesh, h1, h2 = square8
    con = apply_bcs(mesh, h1, h2,
                    BoundaryConditionSet(regime="tangential_clamp"))
    assert linear_strain_kernel(h1, con).dim == 0


def test_partial_tangential_kills_linear_kernel(square8):
    mesh, h1, h2 = square8
    con = apply_bcs(mesh, h1, h2, BoundaryConditionSet(
        regime="partial_tangential", tags=("bottom",)))
    assert linear_strain_kernel(h1, con).dim == 0


def test_affine_kernel_dimensions(square8):
    mesh, h1, h2 = square8
    assert affine_kernel(h2, unconstrained(mesh, h1, h2)).dim == 3
    con = apply_bcs(mesh, h1, h2,
                    BoundaryConditionSet(regime="transverse_h10"))
    assert affine_kernel(h2, con).dim == 0
    con = apply_bcs(mesh, h1, h2, BoundaryConditionSet(
        regime="tangential_clamp", v3="pin_affine"))
    assert affine_kernel(h2, con).dim == 0
    con = apply_bcs(mesh, h1, h2, BoundaryConditionSet(
        regime="tangential_clamp", v3="pin_constant"))
    assert affine_kernel(h2, con).dim == 2


def test_gradient_kernel(square8):
    mesh, h1, h2 = square8
    # unconstrained: constants survive the gradient seminorm
    assert gradient_kernel(h2, unconstrained(mesh, h1, h2)).dim == 1
    con = apply_bcs(mesh, h1, h2, BoundaryConditionSet(
        regime="tangential_clamp", v3="pin_constant"))
    assert gradient_kernel(h2, con).dim == 0


def test_korn_constant_finite_and_stable():
    vals = {}
    for nn in (8, 16):
        mesh = build_mesh(unit_square(), nn, nn)
        h1, h2 = SpaceH1(mesh), SpaceH2(mesh)
        con = apply_bcs(mesh, h1, h2,
                        BoundaryConditionSet(regime="tangential_clamp"))
        rep = korn_constant(h1, con)
        assert rep.kernel_dim == 0 and rep.constant > 0
        vals[nn] = rep.constant
    assert abs(vals[16] - vals[8]) < 0.1 * vals[16]


def test_korn_constant_rejection_unconstrained(square8):
    mesh, h1, h2 = square8
    rep = korn_constant(h1, unconstrained(mesh, h1, h2))
    assert rep.kernel_dim > 0 and rep.constant == float("inf")


def test_hessian_constant(square8):
    mesh, h1, h2 = square8
    con = apply_bcs(mesh, h1, h2, BoundaryConditionSet(regime="full_clamp"))
    rep = hessian_constant(h2, con)
    assert rep.kernel_dim == 0 and 0 < rep.constant < 10
    rep = hessian_constant(h2, unconstrained(mesh, h1, h2))
    assert rep.constant == float("inf")


def test_korn_inequality_random_fields(square8):
    mesh, h1, h2 = square8
    con = apply_bcs(mesh, h1, h2,
                    BoundaryConditionSet(regime="tangential_clamp"))
    C1 = korn_constant(h1, con).constant
    from platelab.rigidity import h1_vector_norm_form, symgrad_form
    A = symgrad_form(h1)
    M = h1_vector_norm_form(h1)
    free = np.concatenate([con.free1, con.free2 + h1.ndof])
    rng = np.random.default_rng(5)
    for _ in range(20):
        z = np.zeros(2 * h1.ndof)
        z[free] = rng.standard_normal(free.size)
        assert z @ (M @ z) <= C1 * (z @ (A @ z)) * (1 + 1e-10)


def test_flex_search_finds_single_edge_witness(square8, params_thin):
    mesh, h1, h2 = square8
    con = apply_bcs(mesh, h1, h2, BoundaryConditionSet(
        regime="partial_tangential", tags=("left",), v3="none",
        v3_clamp_tags=("left",)))
    res = nonlinear_flex_search(h1, h2, con, params_thin, restarts=4, seed=0)
    assert res.found
    assert res.residual < 1e-8
    assert res.witness is not None
    # witness is a genuine discrete field of unit norm
    h1sq, h2sq = res.witness.norms()
    assert abs(h1sq + h2sq - 1.0) < 1e-8


def test_flex_search_no_witness_when_rigid(square8, params_thin):
    mesh, h1, h2 = square8
    con = apply_bcs(mesh, h1, h2, BoundaryConditionSet(
        regime="tangential_clamp", v3="pin_affine"))
    res = nonlinear_flex_search(h1, h2, con, params_thin, restarts=3,
                                iters=150, seed=1)
    assert not res.found
    assert res.residual > 1e-8


def test_verdict_rigid_regimes(square8, params_thin):
    mesh, h1, h2 = square8
    con = apply_bcs(mesh, h1, h2, BoundaryConditionSet(
        regime="tangential_clamp", v3="pin_affine"))
    rep = rigidity_verdict(h1, h2, con, params_thin)
    assert rep.verdict == "rigid"
    assert rep.mechanism == "full_tangential_clamp"

    con = apply_bcs(mesh, h1, h2, BoundaryConditionSet(
        regime="partial_tangential", tags=("gamma_f", "gamma_g"),
        v3="pin_affine"))
    rep = rigidity_verdict(h1, h2, con, params_thin)
    assert rep.verdict == "rigid"
    assert rep.mechanism == "graph_boundary_clamp"

    con = apply_bcs(mesh, h1, h2, BoundaryConditionSet(
        regime="directional", direction=(1.0, 0.0), v3="pin_affine"))
    rep = rigidity_verdict(h1, h2, con, params_thin)
    assert rep.verdict == "rigid"
    assert rep.mechanism == "directional_clamp"

    con = apply_bcs(mesh, h1, h2, BoundaryConditionSet(
        regime="transverse_h10", pin_rigid=True))
    rep = rigidity_verdict(h1, h2, con, params_thin)
    assert rep.verdict == "rigid"
    assert rep.mechanism == "convex_transverse_zero"


def test_verdict_nonrigid_single_edge(square8, params_thin):
    mesh, h1, h2 = square8
    con = apply_bcs(mesh, h1, h2, BoundaryConditionSet(
        regime="partial_tangential", tags=("left",), v3="none",
        v3_clamp_tags=("left",)))
    rep = rigidity_verdict(h1, h2, con, params_thin,
                           flex_kwargs={"restarts": 4, "seed": 0})
    assert rep.verdict == "nonrigid"
    assert rep.mechanism == "flex_witness"
    assert rep.flex is not None and rep.flex.found


def test_verdict_nonconvex_domain_not_rigid_by_convexity(params_thin):
    # domain with a boundary dent: transverse clamp alone must not trigger
    # the convex sufficient condition
    dom = PlanarDomain("general_polygon",
                       vertices=[[0, 0], [1, 0], [1, 1], [0.5, 0.9], [0, 1]])
    mesh = build_mesh(dom, 6, 6)
    h1, h2 = SpaceH1(mesh), SpaceH2(mesh)
    con = apply_bcs(mesh, h1, h2,
                    BoundaryConditionSet(regime="transverse_clamp"))
    rep = rigidity_verdict(h1, h2, con, params_thin,
                           flex_kwargs={"restarts": 1, "iters": 30})
    assert rep.mechanism != "convex_transverse_zero"
