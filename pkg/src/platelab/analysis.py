"""Constructive identities and special fields of the plate model.

Contains the developability compatibility check (zero membrane strain
forces a vanishing Hessian determinant of the transverse displacement),
the weighted Hessian-determinant identity for clamped fields, the bracket
and trilinear integration-by-parts identities, the log-Poisson convex
weight on convex domains, the cumulative-integral zero-strain field
builder, and the scaled blow-up family demonstrating unbounded energy on
nonrigid regimes.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .energy import (QuadratureField, ReducedLoads, closed_form_strains,
                     elasticity_norm_sq)
from .geometry import DomainError
from .quadrature import gauss_1d
from .spaces import (DEFAULT_QUAD, DisplacementField, ScalarField, SpaceH1,
                     SpaceH2, interpolate_displacement)


# ---------------------------------------------------------------------------
# developability compatibility


def monge_ampere_residual(u, n=DEFAULT_QUAD):
    """Root-mean-square membrane strain and transverse Hessian determinant.

    Returns (strain_rms, det_rms) with strain_rms the RMS of the full
    strain tensor (off-diagonal counted twice) and det_rms the RMS of
    det(Hess u3) over the domain.  Fields carrying closed forms are
    sampled at the full quadrature points; purely discrete fields are
    sampled at element centers, where the strain of a nodal interpolant
    superconverges by one order.
    """
    if u.closed_form is not None:
        t = u.h1.tables(n)
        pts, w = t.points, t.weights
        E, F = closed_form_strains(u.closed_form, pts)
        e11, e22, e12 = E.T
        det = F[:, 0] * F[:, 1] - F[:, 2] ** 2
    else:
        t1, t3 = u.h1.tables(1), u.h2.tables(1)
        pts, w = t1.points, t1.weights
        s1, s2 = t3.ops["d1"] @ u.u3, t3.ops["d2"] @ u.u3
        e11 = t1.ops["d1"] @ u.u1 + 0.5 * s1 * s1
        e22 = t1.ops["d2"] @ u.u2 + 0.5 * s2 * s2
        e12 = 0.5 * (t1.ops["d2"] @ u.u1 + t1.ops["d1"] @ u.u2) + 0.5 * s1 * s2
        det = ((t3.ops["d11"] @ u.u3) * (t3.ops["d22"] @ u.u3)
               - (t3.ops["d12"] @ u.u3) ** 2)
    area = float(w.sum())
    strain_rms = float(np.sqrt(w @ (e11**2 + e22**2 + 2 * e12**2) / area))
    det_rms = float(np.sqrt(w @ det**2 / area))
    return strain_rms, det_rms


# ---------------------------------------------------------------------------
# bracket and trilinear forms


@dataclass
class BracketForms:
    bracket: np.ndarray        # [u,v] at the area quadrature points
    trilinear_volume: float    # (u,v,w) over the domain
    trilinear_boundary: float  # (u,v,w) over the boundary


def _h2_samples(h2, coeffs, n):
    t = h2.tables(n)
    return {k: t.ops[k] @ coeffs for k in ("v", "d1", "d2", "d11", "d22", "d12")}


def bracket_field(h2, u, v, n=DEFAULT_QUAD):
    """[u,v] = d11(u) d22(v) + d22(u) d11(v) - 2 d12(u) d12(v) samples."""
    a, b = _h2_samples(h2, u, n), _h2_samples(h2, v, n)
    return a["d11"] * b["d22"] + a["d22"] * b["d11"] - 2 * a["d12"] * b["d12"]


def trilinear_volume(h2, u, v, w, n=DEFAULT_QUAD):
    """Integral of d11(u) d2(v) d2(w) + d22(u) d1(v) d1(w)
    - d12(u) (d1(v) d2(w) + d2(v) d1(w))."""
    a, b, c = (_h2_samples(h2, z, n) for z in (u, v, w))
    wt = h2.tables(n).weights
    integrand = (a["d11"] * b["d2"] * c["d2"] + a["d22"] * b["d1"] * c["d1"]
                 - a["d12"] * (b["d1"] * c["d2"] + b["d2"] * c["d1"]))
    return float(wt @ integrand)


def trilinear_boundary(h2, u, v, w, n=DEFAULT_QUAD):
    """Boundary integral of ((d11 u d2 v - d12 u d1 v) nu2
    + (d22 u d1 v - d12 u d2 v) nu1) w."""
    pts, wt, nrm, ops = h2.edge_tables(n)
    a = {k: ops[k] @ u for k in ("d11", "d22", "d12")}
    b = {k: ops[k] @ v for k in ("d1", "d2")}
    c = ops["v"] @ w
    integrand = ((a["d11"] * b["d2"] - a["d12"] * b["d1"]) * c * nrm[:, 1]
                 + (a["d22"] * b["d1"] - a["d12"] * b["d2"]) * c * nrm[:, 0])
    return float(wt @ integrand)


def bracket_forms(h2, u, v, w, n=DEFAULT_QUAD):
    return BracketForms(bracket_field(h2, u, v, n),
                        trilinear_volume(h2, u, v, w, n),
                        trilinear_boundary(h2, u, v, w, n))


def bracket_identity_check(h2, u, v, w, n=DEFAULT_QUAD):
    """Residual of  integral([u,v] w) = (u,v,w)_boundary - (u,v,w)_volume."""
    forms = bracket_forms(h2, u, v, w, n)
    wt = h2.tables(n).weights
    lhs = float(wt @ (forms.bracket * (h2.tables(n).ops["v"] @ w)))
    return abs(lhs - forms.trilinear_boundary + forms.trilinear_volume)


def clamped_bracket_identity(h2, f, g, n=DEFAULT_QUAD):
    """Specialized identity for fields with vanishing boundary values.

    For f, g zero on the boundary all trace terms drop and the volume
    identity collapses to  integral([f,f] g) = -(g,f,f)_volume.  Returns
    (residual_minus, residual_plus, sign), with sign the empirically
    smaller-residual variant (recorded because the two candidate signs
    differ between the identity's derivation and its bare statement).
    """
    wt = h2.tables(n).weights
    lhs = float(wt @ (bracket_field(h2, f, f, n) * (h2.tables(n).ops["v"] @ g)))
    vol = trilinear_volume(h2, g, f, f, n)
    res_minus = abs(lhs + vol)
    res_plus = abs(lhs - vol)
    scale = max(abs(lhs), abs(vol), 1.0)
    sign = "minus" if res_minus <= res_plus else "plus"
    return res_minus / scale, res_plus / scale, sign


# ---------------------------------------------------------------------------
# weighted Hessian-determinant identity


def _boundary_dof_ids(h2, types=(0, 1, 2, 3)):
    nodes = h2.mesh.boundary_node_ids()
    return np.concatenate([4 * nodes + k for k in types])


def weighted_hessian_identity(h2, f, n=3, clamp_tol=1e-10):
    """(lhs, rhs) of  integral(|grad f|^2) = -integral(|y|^2 det Hess f).

    Valid for fields vanishing on the boundary together with their
    derivatives; all boundary dofs of f must be zero within clamp_tol
    relative to the largest dof magnitude.  The identity is exact for
    clamped piecewise-bicubic fields, so a fully exact quadrature rule
    returns roundoff only; the default 3-point rule leaves a small
    discretization residual that converges under refinement and keeps the
    two sides independently informative.
    """
    scale = max(float(np.abs(f).max()), 1e-300)
    bidx = _boundary_dof_ids(h2)
    worst = float(np.abs(f[bidx]).max())
    if worst > clamp_tol * scale:
        raise ValueError(
            f"field is not clamped: boundary dof magnitude {worst:.3e} "
            f"exceeds {clamp_tol:.1e} of the dof scale")
    t = h2.tables(n)
    wt = t.weights
    g1, g2 = t.ops["d1"] @ f, t.ops["d2"] @ f
    lhs = float(wt @ (g1**2 + g2**2))
    det = (t.ops["d11"] @ f) * (t.ops["d22"] @ f) - (t.ops["d12"] @ f) ** 2
    y = t.points
    rhs = -float(wt @ ((y[:, 0] ** 2 + y[:, 1] ** 2) * det))
    return lhs, rhs


# ---------------------------------------------------------------------------
# convex log-Poisson weight


@dataclass
class ConvexWeight:
    f: np.ndarray                    # Poisson solution lifted to SpaceH2
    w: np.ndarray                    # -log(1 + f) lifted to SpaceH2
    f_nodal: np.ndarray              # Poisson solution at mesh nodes
    min_hessian_eigenvalue: float    # over tested interior quad points
    interior_points: int


def _grid_axes(mesh):
    n1, n2 = mesh.n1, mesh.n2
    X = mesh.nodes[:, 0].reshape(n1 + 1, n2 + 1)
    Y = mesh.nodes[:, 1].reshape(n1 + 1, n2 + 1)
    if (np.ptp(X, axis=1).max() > 1e-12 * max(1.0, np.abs(X).max())
            or np.ptp(Y, axis=0).max() > 1e-12 * max(1.0, np.abs(Y).max())):
        raise DomainError("convex weight lift needs an axis-aligned grid")
    return X[:, 0], Y[0, :]


def _central_diff(F, coords, axis):
    """Second-order interior / one-sided boundary differences along axis."""
    F = np.moveaxis(F, axis, 0)
    c = coords
    out = np.empty_like(F)
    out[1:-1] = (F[2:] - F[:-2]) / (c[2:] - c[:-2])[:, None]
    out[0] = (F[1] - F[0]) / (c[1] - c[0])
    out[-1] = (F[-1] - F[-2]) / (c[-1] - c[-2])
    return np.moveaxis(out, 0, axis)


def convex_weight(mesh, n=DEFAULT_QUAD, margin=0.05, eig_floor=0.0):
    """Poisson solution f of -lap f = 1 (zero boundary values) and the
    convex weight w = -log(1 + f), both lifted into SpaceH2.

    The Poisson problem is solved with bilinear elements and a sparse
    direct factorization; the derivative dofs of the lift are recovered
    with central differences on the structured grid.  The minimum
    eigenvalue of Hess w is reported over quadrature points at distance
    greater than margin * diameter from the boundary, where the recovered
    derivatives are reliable.
    """
    from .rigidity import _domain_is_convex

    if not _domain_is_convex(mesh):
        raise DomainError("convex weight requires a convex domain")
    h1, h2 = SpaceH1(mesh), SpaceH2(mesh)
    M, K = h1.forms(n)
    rhs = M @ np.ones(h1.ndof)
    bnodes = mesh.boundary_node_ids()
    free = np.setdiff1d(np.arange(h1.ndof), bnodes)
    Kff = K.tocsr()[free][:, free]
    f = np.zeros(h1.ndof)
    f[free] = spla.spsolve(Kff.tocsc(), rhs[free])
    if np.any(f[free] <= 0.0):
        raise ValueError("Poisson solution not positive at interior nodes")

    xs, ys = _grid_axes(mesh)
    Fg = f.reshape(xs.size, ys.size)
    d1 = _central_diff(Fg, xs, 0)
    d2 = _central_diff(Fg, ys, 1)
    d12 = _central_diff(d1, ys, 1)
    f_h2 = h2.from_nodal_data(Fg.ravel(), d1.ravel(), d2.ravel(), d12.ravel())

    opf = 1.0 + Fg
    w_val = -np.log(opf)
    w_d1 = -d1 / opf
    w_d2 = -d2 / opf
    w_d12 = -d12 / opf + d1 * d2 / opf**2
    w_h2 = h2.from_nodal_data(w_val.ravel(), w_d1.ravel(), w_d2.ravel(),
                              w_d12.ravel())

    t = h2.tables(n)
    inside = mesh.interior_distance(t.points) > margin * mesh.domain.diameter()
    a = (t.ops["d11"] @ w_h2)[inside]
    c = (t.ops["d22"] @ w_h2)[inside]
    b = (t.ops["d12"] @ w_h2)[inside]
    lam_min = 0.5 * ((a + c) - np.sqrt((a - c) ** 2 + 4 * b**2))
    return ConvexWeight(f_h2, w_h2, f, float(lam_min.min()), int(inside.sum()))


# ---------------------------------------------------------------------------
# cumulative-integral zero-strain field


def counterexample_field(h1, h2, f1, d1f1, d11f1, n_gauss=24, tol=1e-12):
    """Zero-membrane-strain displacement from a one-variable profile.

    Given f with f(0) = f'(0) = 0, builds u3(y) = f(y1), u2 = 0 and
    u1(y) = -1/2 * integral_0^{y1} f'(t)^2 dt, whose membrane strain
    vanishes identically.  The cumulative integral is evaluated with
    one-dimensional Gauss quadrature per sample point (exact for
    polynomial profiles within the rule's degree).  The returned field is
    nodally interpolated and keeps its closed forms.
    """
    if abs(float(f1(0.0))) > tol or abs(float(d1f1(0.0))) > tol:
        raise ValueError("profile must satisfy f(0) = f'(0) = 0")
    s_ref, w_ref = gauss_1d(n_gauss)

    def cumulative(y1, y2):
        y1 = np.asarray(y1, dtype=float)
        flat = np.atleast_1d(y1).ravel()
        nodes = flat[:, None] * s_ref[None, :]
        vals = d1f1(nodes) ** 2
        out = -0.5 * flat * (vals @ w_ref)
        return out.reshape(np.shape(y1)) if np.ndim(y1) else float(out[0])

    u1 = ScalarField(
        value=cumulative,
        d1=lambda x, y: -0.5 * d1f1(np.asarray(x, dtype=float)) ** 2,
        d2=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
        d11=lambda x, y: -(d1f1(np.asarray(x, dtype=float))
                           * d11f1(np.asarray(x, dtype=float))),
        d12=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
        d22=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
    )
    u2 = ScalarField.constant(0.0)
    u3 = ScalarField(
        value=lambda x, y: f1(np.asarray(x, dtype=float)) + 0.0 * np.asarray(y),
        d1=lambda x, y: d1f1(np.asarray(x, dtype=float)) + 0.0 * np.asarray(y),
        d2=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
        d11=lambda x, y: d11f1(np.asarray(x, dtype=float)) + 0.0 * np.asarray(y),
        d12=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
        d22=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
    )
    return interpolate_displacement(h1, h2, u1, u2, u3)


# ---------------------------------------------------------------------------
# blow-up family


@dataclass
class BlowupFamily:
    witness: DisplacementField
    load: ReducedLoads
    samples: list                  # (t, J(w_t)) pairs
    quadratic_fit: np.ndarray      # polyfit coefficients, degree 2 in t
    leading_coefficient: float     # fitted t^2 coefficient
    fit_residual: float            # relative fit residual
    strain_residual: float         # RMS membrane strain of the witness
    bending_norm_sq: float         # elasticity norm of the bending strain


def _witness_scalars(w, params, n):
    """(|E|^2_metric, |F|^2_metric, integral(w1^2 + w2^2), integral(w3^2))."""
    mesh = w.h1.mesh
    t = w.h1.tables(n)
    wt, pts = t.weights, t.points
    if w.closed_form is not None:
        E, F = closed_form_strains(w.closed_form, pts)
        x, y = pts[:, 0], pts[:, 1]
        z = np.zeros(x.size)
        w1 = np.asarray(w.closed_form["u1"].value(x, y), dtype=float) + z
        w2 = np.asarray(w.closed_form["u2"].value(x, y), dtype=float) + z
        w3 = np.asarray(w.closed_form["u3"].value(x, y), dtype=float) + z
    else:
        from .energy import bending_strain, membrane_strain

        E = membrane_strain(w, n).values
        F = bending_strain(w, n).values
        w1 = t.ops["v"] @ w.u1
        w2 = t.ops["v"] @ w.u2
        w3 = w.h2.tables(n).ops["v"] @ w.u3
    e_sq = elasticity_norm_sq(QuadratureField(E, wt, pts), params)
    f_sq = elasticity_norm_sq(QuadratureField(F, wt, pts), params)
    tang_sq = float(wt @ (w1**2 + w2**2))
    trans_sq = float(wt @ w3**2)
    return e_sq, f_sq, tang_sq, trans_sq


def blowup_family(w, params, t_samples=(1.0, 2.0, 4.0, 8.0), tol=1e-8,
                  n=DEFAULT_QUAD):
    """Load and scaled family (t^2 w1, t^2 w2, t w3) with energy
    unbounded below along increasing t.

    The tangential load p_a = c * w_a uses twice the break-even constant,
    making the t^2 coefficient of J(w_t) equal to minus the bending term;
    when the witness has no tangential part, p3 = -w3 forces a negative
    linear term instead.  Requires a nonzero witness with RMS membrane
    strain below tol.
    """
    strain_rms, _ = monge_ampere_residual(w, n)
    if strain_rms >= tol:
        raise ValueError(
            f"witness strain RMS {strain_rms:.3e} is above tolerance {tol:.1e}")
    e_sq, f_sq, tang_sq, trans_sq = _witness_scalars(w, params, n)
    if tang_sq + trans_sq <= 0.0:
        raise ValueError("witness must be nonzero")

    bend = (params.eps**3 / 6.0) * f_sq
    if tang_sq > 0.0:
        c = 2.0 * bend / tang_sq if f_sq > 0.0 else 1.0
        if w.closed_form is None:
            raise ValueError("discrete witnesses need closed-form components "
                             "to synthesize the load")
        g1, g2 = w.closed_form["u1"].value, w.closed_form["u2"].value
        load = ReducedLoads(p1=lambda x, y, g=g1: c * np.asarray(g(x, y), dtype=float),
                            p2=lambda x, y, g=g2: c * np.asarray(g(x, y), dtype=float))

        # J(w_t) = t^4 (eps/2)|E|^2 + t^2 bend - t^2 c |w_a|^2
        def J(t):
            return (t**4 * 0.5 * params.eps * e_sq + t**2 * bend
                    - t**2 * c * tang_sq)
    else:
        g3 = w.closed_form["u3"].value if w.closed_form is not None else None
        if g3 is None:
            raise ValueError("discrete witnesses need closed-form components "
                             "to synthesize the load")
        load = ReducedLoads(p3=lambda x, y, g=g3: -np.asarray(g(x, y), dtype=float))

        # linear coefficient +|w3|^2: the energy decreases without bound
        # along t -> -inf (equivalently along the witness with flipped
        # transverse sign)
        def J(t):
            return (t**4 * 0.5 * params.eps * e_sq + t**2 * bend
                    + t * trans_sq)

    samples = [(float(t), float(J(t))) for t in t_samples]
    ts = np.array([s[0] for s in samples])
    js = np.array([s[1] for s in samples])
    coeffs = np.polyfit(ts, js, 2)
    fit = np.polyval(coeffs, ts)
    denom = max(float(np.abs(js).max()), 1e-300)
    fit_res = float(np.abs(fit - js).max() / denom)
    return BlowupFamily(w, load, samples, coeffs, float(coeffs[0]), fit_res,
                        strain_rms, f_sq)
