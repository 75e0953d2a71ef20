"""Acceptance suite: one criterion per test, one printed PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines inline.
"""

import numpy as np
import pytest

from platelab.analysis import (blowup_family, bracket_identity_check,
                               clamped_bracket_identity, convex_weight,
                               counterexample_field, monge_ampere_residual,
                               weighted_hessian_identity)
from platelab.bcs import BoundaryConditionSet, apply_bcs
from platelab.energy import (MaterialParams, ReducedLoads, closed_form_strains,
                             energy_gradient, total_energy)
from platelab.geometry import build_mesh, unit_square
from platelab.optimize import MinimizeOptions, minimize_energy
from platelab.rigidity import (affine_kernel, h1_vector_norm_form,
                               hessian_constant, korn_constant,
                               linear_strain_kernel, nonlinear_flex_search,
                               subspace_angles_metric, symgrad_form)
from platelab.spaces import ScalarField, SpaceH1, SpaceH2, interpolate_displacement


def report(num, name, ok, detail=""):
    tag = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"\nACCEPTANCE {num:02d} {name}: {tag}{suffix}")
    return ok


def spaces(nn):
    mesh = build_mesh(unit_square(), nn, nn)
    return mesh, SpaceH1(mesh), SpaceH2(mesh)


def single_edge_regime():
    return BoundaryConditionSet(regime="partial_tangential", tags=("left",),
                                v3="none", v3_clamp_tags=("left",))


SQUARE_PROFILE = (lambda x: x**2, lambda x: 2 * x, lambda x: 2.0 + 0 * x)


# ---------------------------------------------------------------------------


def test_criterion_01_gradient_consistency():
    mesh, h1, h2 = spaces(8)
    con = apply_bcs(mesh, h1, h2, BoundaryConditionSet(regime="custom"))
    params = MaterialParams(lam=1.0, mu=1.0, eps=1.0)
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(20):
        c = rng.standard_normal(8)

        def poly(a0, a1, a2):
            return lambda x, y: a0 + a1 * x + a2 * y

        loads = ReducedLoads(p1=poly(*c[:3]), p2=poly(*c[3:6]),
                             p3=poly(c[6], c[7], c[0]),
                             q1=poly(c[1], c[2], c[3]))
        z = 0.1 * rng.standard_normal(con.n_free)

        def J(zz):
            return total_energy(con.unpack(zz), params, loads).total

        g = energy_gradient(con.unpack(z), params, loads, con)
        idx = rng.choice(con.n_free, size=25, replace=False)
        h = 1e-2
        for i in idx:
            def Ji(t):
                zz = z.copy()
                zz[i] += t
                return J(zz)

            # the energy is a quartic polynomial in the dofs, so the
            # fourth-order stencil is exact and a large step only reduces
            # roundoff noise
            fd = (8 * (Ji(h) - Ji(-h)) - (Ji(2 * h) - Ji(-2 * h))) / (12 * h)
            rel = abs(fd - g[i]) / max(abs(fd), 1e-8)
            worst = max(worst, rel)
    ok = worst < 1e-6
    assert report(1, "gradient matches central differences", ok,
                  f"worst relative error {worst:.2e}")


def test_criterion_02_rigid_body_kernel():
    mesh, h1, h2 = spaces(8)
    con = apply_bcs(mesh, h1, h2, BoundaryConditionSet(regime="custom"))
    rep = linear_strain_kernel(h1, con)
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    n = h1.ndof
    R = np.zeros((2 * n, 3))
    R[:n, 0] = 1.0
    R[n:, 1] = 1.0
    R[:n, 2], R[n:, 2] = y, -x
    from scipy.sparse import block_diag

    M, K = h1.forms()
    angles = subspace_angles_metric(rep.basis, R,
                                    block_diag([M + K, M + K]).tocsr())
    con_t = apply_bcs(mesh, h1, h2,
                      BoundaryConditionSet(regime="tangential_clamp"))
    dim_clamped = linear_strain_kernel(h1, con_t).dim
    ok = rep.dim == 3 and np.max(angles) < 1e-6 and dim_clamped == 0
    assert report(2, "rigid-motion kernel dimensions and span", ok,
                  f"dim {rep.dim}, angle {np.max(angles):.2e}, "
                  f"clamped dim {dim_clamped}")


def test_criterion_03_affine_kernel():
    mesh, h1, h2 = spaces(8)
    d_free = affine_kernel(h2, apply_bcs(mesh, h1, h2,
                                         BoundaryConditionSet(regime="custom"))).dim
    d_h10 = affine_kernel(h2, apply_bcs(mesh, h1, h2,
                                        BoundaryConditionSet(regime="transverse_h10"))).dim
    d_pin = affine_kernel(h2, apply_bcs(mesh, h1, h2, BoundaryConditionSet(
        regime="tangential_clamp", v3="pin_affine"))).dim
    ok = (d_free, d_h10, d_pin) == (3, 0, 0)
    assert report(3, "affine kernel dimensions", ok,
                  f"unconstrained {d_free}, boundary-zero {d_h10}, pinned {d_pin}")


def test_criterion_04_constants_exist_and_stable():
    regimes = [
        ("edge+transverse-zero", BoundaryConditionSet(
            regime="partial_tangential", tags=("bottom",), v3="h10")),
        ("tangential-clamp", BoundaryConditionSet(
            regime="tangential_clamp", v3="pin_affine")),
        ("graph-edges", BoundaryConditionSet(
            regime="partial_tangential", tags=("gamma_f", "gamma_g"),
            v3="pin_affine")),
        ("directional", BoundaryConditionSet(
            regime="directional", direction=(1.0, 0.0), v3="pin_affine")),
    ]
    ok = True
    details = []
    cons16 = {}
    for name, bcs in regimes:
        vals = {}
        for nn in (16, 32):
            mesh = build_mesh(unit_square(), nn, nn)
            h1, h2 = SpaceH1(mesh), SpaceH2(mesh)
            con = apply_bcs(mesh, h1, h2, bcs)
            c1 = korn_constant(h1, con).constant
            c2 = hessian_constant(h2, con).constant
            vals[nn] = (c1, c2)
            if nn == 16:
                cons16[name] = (mesh, h1, h2, con, c1, c2)
        finite = all(np.isfinite(v) and v > 0 for pair in vals.values()
                     for v in pair)
        d1 = abs(vals[32][0] - vals[16][0]) / vals[32][0]
        d2 = abs(vals[32][1] - vals[16][1]) / vals[32][1]
        ok = ok and finite and d1 < 0.10 and d2 < 0.10
        details.append(f"{name} drift {max(d1, d2):.1%}")

    # direct inequality check on 100 random constrained fields per regime
    rng = np.random.default_rng(104)
    for name, (mesh, h1, h2, con, C1, C2) in cons16.items():
        A = symgrad_form(h1)
        Mv = h1_vector_norm_form(h1)
        ft = np.concatenate([con.free1, con.free2 + h1.ndof])
        M2, K2, H = h2.forms()
        N3 = (M2 + K2 + H).tocsr()
        for _ in range(100):
            z = np.zeros(2 * h1.ndof)
            z[ft] = rng.standard_normal(ft.size)
            if z @ (Mv @ z) > C1 * (z @ (A @ z)) * (1 + 1e-10):
                ok = False
            w = np.zeros(h2.ndof)
            w[con.free3] = rng.standard_normal(con.free3.size)
            if w @ (N3 @ w) > C2 * (w @ (H @ w)) * (1 + 1e-10):
                ok = False
    assert report(4, "norm-equivalence constants finite and mesh-stable", ok,
                  "; ".join(details))


def test_criterion_05_counterexample():
    # closed-form residual
    mesh, h1, h2 = spaces(16)
    u = counterexample_field(h1, h2, *SQUARE_PROFILE)
    t = h1.tables(4)
    E, F = closed_form_strains(u.closed_form, t.points)
    closed = float(np.max(np.abs(E)))

    # discrete interpolant residual rate from 16x16 to 64x64
    res = {}
    for nn in (16, 64):
        m, s1, s2 = spaces(nn)
        ud = counterexample_field(s1, s2, *SQUARE_PROFILE)
        ud.closed_form = None
        res[nn], _ = monge_ampere_residual(ud)
    ratio = res[16] / res[64]

    # flex witness on the single-edge regime
    mesh8, h18, h28 = spaces(8)
    con = apply_bcs(mesh8, h18, h28, single_edge_regime())
    flex = nonlinear_flex_search(h18, h28, con,
                                 MaterialParams(1.0, 1.0, 0.1),
                                 restarts=4, seed=0)
    ok = closed < 1e-12 and ratio >= 12.0 and flex.found \
        and flex.residual < 1e-8
    assert report(5, "zero-strain counterexample and flex witness", ok,
                  f"closed-form {closed:.1e}, rate ratio {ratio:.1f}, "
                  f"flex residual {flex.residual:.1e}")


def test_criterion_06_blowup_family():
    mesh, h1, h2 = spaces(16)
    params = MaterialParams(lam=1.0, mu=1.0, eps=0.1)
    w = counterexample_field(h1, h2, *SQUARE_PROFILE)
    fam = blowup_family(w, params)
    eps = params.eps
    exact = -(eps**3 / 6.0) * (params.c1 + 4 * params.mu) * 4.0
    coeff_ok = abs(fam.leading_coefficient - exact) < 0.02 * abs(exact)

    con = apply_bcs(mesh, h1, h2, single_edge_regime())
    res = minimize_energy(h1, h2, con, params, fam.load,
                          MinimizeOptions(max_iterations=2000,
                                          divergence_ceiling=3.0),
                          start=con.project(w.copy()))
    ok = coeff_ok and res.suspected_unbounded
    assert report(6, "unbounded-below load family", ok,
                  f"leading coefficient {fam.leading_coefficient:.4e} vs "
                  f"{exact:.4e}, unbounded flag {res.suspected_unbounded}")


def test_criterion_07_existence_behavior():
    mesh, h1, h2 = spaces(8)
    con = apply_bcs(mesh, h1, h2, BoundaryConditionSet(
        regime="tangential_clamp", v3="pin_affine"))
    params = MaterialParams(lam=1.0, mu=1.0, eps=0.1)
    loads = ReducedLoads(p3=0.01)
    res = minimize_energy(h1, h2, con, params, loads,
                          MinimizeOptions(max_iterations=2000, restarts=4,
                                          gradient_tolerance=1e-9, seed=7))
    runs = res.runs
    all_conv = all(r["converged"] and r["grad_norm"] < 1e-8 for r in runs)
    bounded = all(np.isfinite(r["max_transverse_h2"])
                  and not r["suspected_unbounded"] for r in runs)
    finals = [r["final_energy"] for r in runs]
    spread = max(finals) - min(finals)
    ok = (len(runs) == 5 and all_conv and bounded
          and max(finals) <= 0.0 and spread < 1e-8)
    assert report(7, "restarts converge to one bounded minimizer", ok,
                  f"runs {len(runs)}, spread {spread:.1e}, "
                  f"max final {max(finals):.3e}")


def test_criterion_08_weighted_hessian_identity():
    import sympy as sym

    x, y = sym.symbols("x y")
    expr = sym.sin(sym.pi * x) ** 2 * sym.sin(sym.pi * y) ** 2

    def make(e):
        fn = sym.lambdify((x, y), e, "numpy")
        return lambda a, b: np.asarray(fn(a, b), dtype=float) + 0.0 * np.asarray(a)

    f = ScalarField(value=make(expr), d1=make(sym.diff(expr, x)),
                    d2=make(sym.diff(expr, y)),
                    d11=make(sym.diff(expr, x, x)),
                    d12=make(sym.diff(expr, x, y)),
                    d22=make(sym.diff(expr, y, y)))
    rel = {}
    for nn in (32, 64):
        mesh = build_mesh(unit_square(), nn, nn)
        h2 = SpaceH2(mesh)
        lhs, rhs = weighted_hessian_identity(h2, h2.interpolate(f))
        rel[nn] = abs(lhs - rhs) / abs(lhs)
    ok = rel[64] < 0.02 and rel[32] / rel[64] >= 3.0
    assert report(8, "weighted Hessian-determinant identity", ok,
                  f"relative residual {rel[64]:.2e} at 64, "
                  f"decrease x{rel[32] / rel[64]:.0f}")


def test_criterion_09_bracket_identities():
    mesh, h1, h2 = spaces(16)

    def poly(expr_text):
        from platelab.expressions import compile_scalar_field

        return h2.interpolate(compile_scalar_field(expr_text))

    res1 = max(
        bracket_identity_check(h2, poly("y1^2"), poly("y2^2"), poly("1")),
        bracket_identity_check(h2, poly("y1^2 - y2^2"), poly("y1*y2"),
                               poly("y1 + 2*y2")),
        bracket_identity_check(h2, poly("y1^3*y2"), poly("y2^3"),
                               poly("y1^2*y2^2")),
    )
    f = poly("y1*(1-y1)*y2*(1-y2)*(y1+2*y2)")
    g = poly("y1*(1-y1)*y2*(1-y2)*(1+2*y1-y2)")
    rm, rp, sign = clamped_bracket_identity(h2, f, g)
    ok = res1 < 1e-10 and rm < 1e-8 and sign == "minus"
    assert report(9, "bracket integration identities", ok,
                  f"triple residual {res1:.1e}, clamped residual {rm:.1e}, "
                  f"sign {sign}")


def test_criterion_10_convex_weight():
    mesh = build_mesh(unit_square(), 64, 64)
    cw = convex_weight(mesh, margin=0.05)
    idx = np.argmin(np.linalg.norm(mesh.nodes - 0.5, axis=1))
    center = float(cw.f_nodal[idx])
    center_ok = abs(center - 0.0737) < 0.002
    interior = mesh.interior_distance(mesh.nodes) > 1e-9
    positive_ok = bool(np.all(cw.f_nodal[interior] > 0))
    eig_ok = cw.min_hessian_eigenvalue > 0.0
    ok = center_ok and positive_ok and eig_ok
    report(10, "log-lifted weight positivity", ok,
           f"center {center:.4f}, f>0 {positive_ok}, "
           f"min Hessian eigenvalue {cw.min_hessian_eigenvalue:.3f}")
    assert center_ok and positive_ok
    # The corner behavior of the source problem makes the lifted weight's
    # Hessian indefinite near right-angle corners at this margin; the
    # assertion states the criterion as specified and fails there.
    assert eig_ok, (
        "Hessian of the lifted weight is indefinite near the corners: "
        f"min eigenvalue {cw.min_hessian_eigenvalue:.3f} at margin 0.05")


def test_criterion_11_compatibility_sampling():
    mesh, h1, h2 = spaces(16)
    rng = np.random.default_rng(111)

    # ten zero-strain fields built from one-variable profiles
    det_worst = 0.0
    premise_ok = True
    for k in range(10):
        a, b = rng.uniform(0.5, 2.0, size=2)
        prof = (lambda x, a=a, b=b: a * x**2 + b * x**3,
                lambda x, a=a, b=b: 2 * a * x + 3 * b * x**2,
                lambda x, a=a, b=b: 2 * a + 6 * b * x)
        u = counterexample_field(h1, h2, *prof)
        strain_rms, det_rms = monge_ampere_residual(u)
        premise_ok = premise_ok and strain_rms < 1e-8
        det_worst = max(det_worst, det_rms)
    forward_ok = premise_ok and det_worst < 1e-6

    # ten curved fields: a large Hessian determinant forces strain
    strain_min = np.inf
    for k in range(10):
        a, b, c = rng.uniform(0.6, 1.5, size=3)
        b *= 0.3
        fields = ScalarField(
            value=lambda x, y, a=a, b=b, c=c: 0.5 * a * x**2 + b * x * y
            + 0.5 * c * y**2,
            d1=lambda x, y, a=a, b=b, c=c: a * x + b * y,
            d2=lambda x, y, a=a, b=b, c=c: b * x + c * y,
            d11=lambda x, y, a=a, b=b, c=c: a + 0 * x,
            d12=lambda x, y, a=a, b=b, c=c: b + 0 * x,
            d22=lambda x, y, a=a, b=b, c=c: c + 0 * x,
        )
        zero = ScalarField(value=lambda x, y: 0 * x, d1=lambda x, y: 0 * x,
                           d2=lambda x, y: 0 * x)
        u = interpolate_displacement(h1, h2, zero, zero, fields)
        strain_rms, det_rms = monge_ampere_residual(u)
        assert det_rms > 0.1  # sampling construction guarantees this
        strain_min = min(strain_min, strain_rms)
    reverse_ok = strain_min > 1e-3
    ok = forward_ok and reverse_ok
    assert report(11, "strain-determinant compatibility sampling", ok,
                  f"zero-strain det {det_worst:.1e}, "
                  f"curved-field strain >= {strain_min:.2e}")
