"""Nonlinear plate energy: strains, elasticity norm, loads, and gradient.

The stored energy of a displacement u = (u1, u2, u3) is

    J(u) = (eps/2) |E(u)|_am^2 + (eps^3/6) |F(u)|_am^2 - L(u)

with the nonlinear membrane strain
    E_ab(u) = (d_a u_b + d_b u_a + d_a u3 d_b u3) / 2,
the bending strain F_ab(u) = d_ab u3, the plane-stress elasticity norm
    |s|_am^2 = int_omega [ c1 (tr s)^2 + 4 mu s:s ],
    c1 = 4 lam mu / (lam + 2 mu),
and the work functional
    L(u) = int_omega (p_i u_i - q_a d_a u3).

All area integrals use one fixed tensor Gauss rule (DEFAULT_QUAD points per
direction), which integrates every polynomial integrand of the discrete
spaces exactly, including the quartic transverse coupling.
"""

from dataclasses import dataclass

import numpy as np

from .quadrature import gauss_1d
from .spaces import DEFAULT_QUAD, ScalarField


@dataclass(frozen=True)
class MaterialParams:
    """Lame parameters and half-thickness; validated for admissibility."""

    lam: float
    mu: float
    eps: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not self.lam > -2.0 / 3.0 * self.mu:
            raise ValueError("lam must exceed -2/3 mu")
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    @property
    def c1(self):
        return 4.0 * self.lam * self.mu / (self.lam + 2.0 * self.mu)


def _as_field(f):
    if f is None:
        return None
    if isinstance(f, ScalarField):
        return f
    if np.isscalar(f):
        return ScalarField.constant(float(f))
    return ScalarField(value=f)


@dataclass
class ReducedLoads:
    """Midsurface load densities p = (p1, p2, p3) and couples q = (q1, q2)."""

    p1: object = None
    p2: object = None
    p3: object = None
    q1: object = None
    q2: object = None

    def __post_init__(self):
        for name in ("p1", "p2", "p3", "q1", "q2"):
            setattr(self, name, _as_field(getattr(self, name)))

    def at(self, pts):
        x, y = pts[:, 0], pts[:, 1]
        out = {}
        for name in ("p1", "p2", "p3", "q1", "q2"):
            f = getattr(self, name)
            out[name] = (np.zeros(x.size) if f is None
                         else np.asarray(f.value(x, y), dtype=float) + np.zeros(x.size))
        return out

    def is_zero(self):
        return all(getattr(self, n) is None for n in ("p1", "p2", "p3", "q1", "q2"))


@dataclass
class VolumetricLoads:
    """Through-thickness body forces f_i(y1, y2, x3) on omega x (-eps, eps)
    and face tractions g_i(y1, y2) on the top (x3 = eps) and bottom
    (x3 = -eps) faces.  x3_degree declares the polynomial degree of the
    f_i in x3 so the transverse quadrature is exact."""

    f1: object = None
    f2: object = None
    f3: object = None
    g_top: dict = None
    g_bottom: dict = None
    x3_degree: int = 3


def reduce_loads(vol, params, q_integrand="f"):
    """Collapse volumetric loads to midsurface densities.

    p_i(y)  = int_{-eps}^{eps} f_i(y, x3) dx3 + g_i^top(y) + g_i^bottom(y)
    q_a(y)  = int_{-eps}^{eps} x3 * f_a(y, x3) dx3
              + eps * (g_a^top(y) - g_a^bottom(y))

    q_integrand selects which in-plane density appears inside the couple
    integral: "f" (default) uses the body force f_a; "g" substitutes the
    face-traction interpolant g_a(y) := (g_a^top + g_a^bottom)/2 treated as
    constant in x3 (an alternative reading of the same reduction), in which
    case the x3-odd weight makes the integral vanish and only the face
    difference term survives.
    """
    if q_integrand not in ("f", "g"):
        raise ValueError("q_integrand must be 'f' or 'g'")
    eps = params.eps
    ng = max(1, (vol.x3_degree + 3) // 2)
    x3, w3 = gauss_1d(ng, -eps, eps)
    gt = vol.g_top or {}
    gb = vol.g_bottom or {}

    def face(d, key, x, y):
        f = d.get(key)
        return 0.0 if f is None else np.asarray(f(x, y), dtype=float)

    def make_p(fi, key):
        def val(x, y):
            out = np.zeros_like(np.asarray(x, dtype=float))
            if fi is not None:
                for xk, wk in zip(x3, w3):
                    out = out + wk * np.asarray(fi(x, y, xk), dtype=float)
            out = out + face(gt, key, x, y) + face(gb, key, x, y)
            return out
        return ScalarField(value=val)

    def make_q(fa, key):
        def val(x, y):
            out = np.zeros_like(np.asarray(x, dtype=float))
            if q_integrand == "f" and fa is not None:
                for xk, wk in zip(x3, w3):
                    out = out + wk * xk * np.asarray(fa(x, y, xk), dtype=float)
            out = out + eps * (face(gt, key, x, y) - face(gb, key, x, y))
            return out
        return ScalarField(value=val)

    return ReducedLoads(p1=make_p(vol.f1, "g1"), p2=make_p(vol.f2, "g2"),
                        p3=make_p(vol.f3, "g3"),
                        q1=make_q(vol.f1, "g1"), q2=make_q(vol.f2, "g2"))


@dataclass
class QuadratureField:
    """Componentwise symmetric 2x2 tensor samples at quadrature points."""

    values: np.ndarray   # (Q, 3): (s11, s22, s12)
    weights: np.ndarray  # (Q,)
    points: np.ndarray   # (Q, 2)


def membrane_strain(u, n=DEFAULT_QUAD):
    """Nonlinear membrane strain E(u) at the quadrature points."""
    t1 = u.h1.tables(n)
    t3 = u.h2.tables(n)
    g1 = t1.ops["d1"] @ u.u1
    g2 = t1.ops["d2"] @ u.u2
    c12 = t1.ops["d2"] @ u.u1 + t1.ops["d1"] @ u.u2
    s1 = t3.ops["d1"] @ u.u3
    s2 = t3.ops["d2"] @ u.u3
    vals = np.stack([g1 + 0.5 * s1 * s1,
                     g2 + 0.5 * s2 * s2,
                     0.5 * c12 + 0.5 * s1 * s2], axis=1)
    return QuadratureField(vals, t3.weights, t3.points)


def bending_strain(u, n=DEFAULT_QUAD):
    """Bending strain F(u) = Hess(u3) at the quadrature points."""
    t3 = u.h2.tables(n)
    vals = np.stack([t3.ops["d11"] @ u.u3,
                     t3.ops["d22"] @ u.u3,
                     t3.ops["d12"] @ u.u3], axis=1)
    return QuadratureField(vals, t3.weights, t3.points)


def elasticity_norm_sq(fieldq, params):
    """Integral of the plane-stress elasticity quadratic form of a tensor."""
    s11, s22, s12 = fieldq.values.T
    dens = params.c1 * (s11 + s22) ** 2 + 4.0 * params.mu * (s11**2 + s22**2 + 2.0 * s12**2)
    return float(fieldq.weights @ dens)


def load_work(u, loads, n=DEFAULT_QUAD):
    """L(u) = int (p_i u_i - q_a d_a u3)."""
    if loads is None or loads.is_zero():
        return 0.0
    t1 = u.h1.tables(n)
    t3 = u.h2.tables(n)
    L = loads.at(t1.points)
    w = t1.weights
    out = w @ (L["p1"] * (t1.ops["v"] @ u.u1) + L["p2"] * (t1.ops["v"] @ u.u2))
    out += t3.weights @ (L["p3"] * (t3.ops["v"] @ u.u3)
                         - L["q1"] * (t3.ops["d1"] @ u.u3)
                         - L["q2"] * (t3.ops["d2"] @ u.u3))
    return float(out)


@dataclass
class EnergyBreakdown:
    membrane: float
    bending: float
    load_work: float

    @property
    def total(self):
        return self.membrane + self.bending - self.load_work


def total_energy(u, params, loads=None, n=DEFAULT_QUAD):
    mem = 0.5 * params.eps * elasticity_norm_sq(membrane_strain(u, n), params)
    ben = (params.eps**3 / 6.0) * elasticity_norm_sq(bending_strain(u, n), params)
    return EnergyBreakdown(mem, ben, load_work(u, loads, n))


def _stress(vals, params):
    """Derivative of the elasticity density wrt (s11, s22, s12)."""
    s11, s22, s12 = vals.T
    tr = s11 + s22
    g11 = 2.0 * params.c1 * tr + 8.0 * params.mu * s11
    g22 = 2.0 * params.c1 * tr + 8.0 * params.mu * s22
    g12 = 16.0 * params.mu * s12
    return g11, g22, g12


def energy_gradient(u, params, loads, constraints, n=DEFAULT_QUAD):
    """Gradient of J wrt the free dofs, packed as constraints.pack order."""
    t1 = u.h1.tables(n)
    t3 = u.h2.tables(n)
    w = t1.weights
    E = membrane_strain(u, n)
    F = bending_strain(u, n)
    G11, G22, G12 = _stress(E.values, params)
    B11, B22, B12 = _stress(F.values, params)
    s1 = t3.ops["d1"] @ u.u3
    s2 = t3.ops["d2"] @ u.u3

    ce = 0.5 * params.eps
    cb = params.eps**3 / 6.0
    g_u1 = ce * (t1.ops["d1"].T @ (w * G11) + t1.ops["d2"].T @ (w * 0.5 * G12))
    g_u2 = ce * (t1.ops["d2"].T @ (w * G22) + t1.ops["d1"].T @ (w * 0.5 * G12))
    g_u3 = ce * (t3.ops["d1"].T @ (w * (G11 * s1 + 0.5 * G12 * s2))
                 + t3.ops["d2"].T @ (w * (G22 * s2 + 0.5 * G12 * s1)))
    g_u3 += cb * (t3.ops["d11"].T @ (w * B11) + t3.ops["d22"].T @ (w * B22)
                  + t3.ops["d12"].T @ (w * B12))

    if loads is not None and not loads.is_zero():
        L = loads.at(t1.points)
        g_u1 -= t1.ops["v"].T @ (w * L["p1"])
        g_u2 -= t1.ops["v"].T @ (w * L["p2"])
        g_u3 -= t3.ops["v"].T @ (w * L["p3"])
        g_u3 += t3.ops["d1"].T @ (w * L["q1"]) + t3.ops["d2"].T @ (w * L["q2"])

    c = constraints
    return np.concatenate([g_u1[c.free1], g_u2[c.free2], g_u3[c.free3]])


def closed_form_strains(fields, pts):
    """Membrane and bending strain samples of closed-form fields.

    fields is a dict with ScalarFields "u1", "u2", "u3" carrying first
    (and for u3 second) derivatives.  Returns (E, F) value arrays (Q, 3).
    """
    x, y = pts[:, 0], pts[:, 1]
    f1, f2, f3 = fields["u1"], fields["u2"], fields["u3"]
    z = np.zeros(x.size)
    d1u1 = np.asarray(f1.d1(x, y), dtype=float) + z
    d2u1 = np.asarray(f1.d2(x, y), dtype=float) + z
    d1u2 = np.asarray(f2.d1(x, y), dtype=float) + z
    d2u2 = np.asarray(f2.d2(x, y), dtype=float) + z
    s1 = np.asarray(f3.d1(x, y), dtype=float) + z
    s2 = np.asarray(f3.d2(x, y), dtype=float) + z
    E = np.stack([d1u1 + 0.5 * s1 * s1,
                  d2u2 + 0.5 * s2 * s2,
                  0.5 * (d2u1 + d1u2) + 0.5 * s1 * s2], axis=1)
    F = np.stack([np.asarray(f3.d11(x, y), dtype=float) + z,
                  np.asarray(f3.d22(x, y), dtype=float) + z,
                  np.asarray(f3.d12(x, y), dtype=float) + z], axis=1)
    return E, F


def closed_form_energy(mesh, fields, params, loads=None, n=DEFAULT_QUAD):
    """Energy of closed-form fields integrated on the mesh quadrature."""
    from .spaces import SpaceH1

    t = SpaceH1(mesh).tables(n)
    E, F = closed_form_strains(fields, t.points)
    w = t.weights
    mem = 0.5 * params.eps * elasticity_norm_sq(QuadratureField(E, w, t.points), params)
    ben = (params.eps**3 / 6.0) * elasticity_norm_sq(QuadratureField(F, w, t.points), params)
    lw = 0.0
    if loads is not None and not loads.is_zero():
        L = loads.at(t.points)
        x, y = t.points[:, 0], t.points[:, 1]
        z = np.zeros(x.size)
        u1 = np.asarray(fields["u1"].value(x, y), dtype=float) + z
        u2 = np.asarray(fields["u2"].value(x, y), dtype=float) + z
        u3 = np.asarray(fields["u3"].value(x, y), dtype=float) + z
        s1 = np.asarray(fields["u3"].d1(x, y), dtype=float) + z
        s2 = np.asarray(fields["u3"].d2(x, y), dtype=float) + z
        lw = float(w @ (L["p1"] * u1 + L["p2"] * u2 + L["p3"] * u3
                        - L["q1"] * s1 - L["q2"] * s2))
    return EnergyBreakdown(mem, ben, lw)
