"""Rigidity decisions: strain kernels, Korn-type constants, flex search.

A constraint regime is "rigid" when the only displacement with vanishing
nonlinear membrane strain is zero.  This module decides rigidity three
ways: by checking sufficient hypotheses on the constraint masks, by
generalized eigenvalue computations (kernels and stability constants), and
by a direct numerical search for a flex (a unit-norm displacement whose
membrane strain vanishes).

Flex-search strain measure.  The discrete spaces never contain an exact
nonzero zero-strain field: the transverse gradient product (d_a u3)(d_b u3)
is a higher-degree polynomial than any attainable tangential strain, so
even interpolants of exact continuum flexes keep an O(h) strain residual
that no optimizer can remove.  The search therefore measures the membrane
strain after projecting it elementwise onto the polynomial range of the
tangential strain operator (span{1, y2} for the 11 component, span{1, y1}
for 22, span{1, y1, y2} for 12), in the same weighted elasticity norm.
The tangential part is reproduced exactly by this projection, so spurious
reduced-integration (hourglass) fields are still fully penalized, while
genuine flex families become representable to solver precision.  For fully
tangentially clamped regimes the projection preserves element means, which
forces any projected-zero-strain field to be zero; rigid regimes therefore
admit no witness at tolerance.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .quadrature import gauss_2d
from .spaces import DEFAULT_QUAD, DisplacementField
from .geometry import MeshError

KERNEL_RTOL = 1e-8   # eigenvalue below this fraction of lambda_max is kernel
FLEX_TOL = 1e-8      # projected strain residual of a unit-norm witness

_DENSE_LIMIT = 1500


def _eigen_smallest(A, M, k=6):
    """Smallest eigenpairs and lambda_max of A x = lam M x (both psd/pd)."""
    n = A.shape[0]
    if n == 0:
        return np.array([]), np.zeros((0, 0)), 0.0
    k = min(k, n - 1) if n > 1 else 1
    if n <= _DENSE_LIMIT:
        w, v = sla.eigh(A.toarray(), M.toarray())
        return w[:k], v[:, :k], float(w[-1])
    scale = (A.diagonal().sum() / max(M.diagonal().sum(), 1e-300))
    sigma = -1e-6 * scale - 1e-300
    w, v = spla.eigsh(A, k=k, M=M, sigma=sigma)
    order = np.argsort(w)
    w, v = w[order], v[:, order]
    wmax = spla.eigsh(A, k=1, M=M, which="LM", tol=1e-6,
                      maxiter=10000, return_eigenvectors=False)
    return w, v, float(wmax[0])


def _submatrix(A, idx):
    return A.tocsr()[idx][:, idx]


def symgrad_form(h1, n=DEFAULT_QUAD):
    """Quadratic form sum_ab |d_a u_b + d_b u_a|^2 on stacked (u1, u2)."""
    t = h1.tables(n)
    W = sp.diags(t.weights)
    D1, D2 = t.ops["d1"], t.ops["d2"]
    Z = sp.csr_matrix(D1.shape)
    B11 = sp.hstack([D1, Z]).tocsr()
    B22 = sp.hstack([Z, D2]).tocsr()
    B12 = sp.hstack([D2, D1]).tocsr()
    return (4.0 * (B11.T @ W @ B11) + 4.0 * (B22.T @ W @ B22)
            + 2.0 * (B12.T @ W @ B12)).tocsr()


def h1_vector_norm_form(h1, n=DEFAULT_QUAD):
    M, K = h1.forms(n)
    return sp.block_diag([M + K, M + K]).tocsr()


@dataclass
class KernelReport:
    dim: int
    eigenvalues: np.ndarray
    lambda_max: float
    basis: np.ndarray          # (n_free, dim) kernel eigenvectors
    free: np.ndarray           # free dof indices the basis refers to


def linear_strain_kernel(h1, constraints, n=DEFAULT_QUAD, k=6, tol=KERNEL_RTOL):
    """Kernel of the linearized (symmetric-gradient) strain on V_H."""
    A = symgrad_form(h1, n)
    M = h1_vector_norm_form(h1, n)
    free = np.concatenate([constraints.free1, constraints.free2 + h1.ndof])
    w, v, wmax = _eigen_smallest(_submatrix(A, free), _submatrix(M, free), k)
    dim = int(np.sum(w < tol * wmax))
    if dim == k and k < free.size - 1:
        return linear_strain_kernel(h1, constraints, n, min(2 * k, free.size - 1), tol)
    return KernelReport(dim, w, wmax, v[:, :dim], free)


def _h2_kernel(h2, constraints, A_full, n=DEFAULT_QUAD, k=6, tol=KERNEL_RTOL):
    M2, K2, H2 = h2.forms(n)
    M = (M2 + K2 + H2).tocsr()
    free = constraints.free3
    w, v, wmax = _eigen_smallest(_submatrix(A_full, free), _submatrix(M, free), k)
    dim = int(np.sum(w < tol * wmax))
    if dim == k and k < free.size - 1:
        return _h2_kernel(h2, constraints, A_full, n, min(2 * k, free.size - 1), tol)
    return KernelReport(dim, w, wmax, v[:, :dim], free)


def affine_kernel(h2, constraints, n=DEFAULT_QUAD, k=6, tol=KERNEL_RTOL):
    """Kernel of the Hessian seminorm on V3 (the affine directions)."""
    _, _, H = h2.forms(n)
    return _h2_kernel(h2, constraints, H, n, k, tol)


def gradient_kernel(h2, constraints, n=DEFAULT_QUAD, k=6, tol=KERNEL_RTOL):
    """Kernel of the gradient seminorm on V3 (the constant directions)."""
    _, K, _ = h2.forms(n)
    return _h2_kernel(h2, constraints, K, n, k, tol)


@dataclass
class ConstantReport:
    constant: float            # C with |u|_norm^2 <= C |strain|^2, or inf
    smallest_eigenvalue: float
    kernel_dim: int
    lambda_max: float


def korn_constant(h1, constraints, n=DEFAULT_QUAD, tol=KERNEL_RTOL):
    """C1 with sum |u_a|_H1^2 <= C1 sum |d_a u_b + d_b u_a|^2 on V_H."""
    A = symgrad_form(h1, n)
    M = h1_vector_norm_form(h1, n)
    free = np.concatenate([constraints.free1, constraints.free2 + h1.ndof])
    w, _, wmax = _eigen_smallest(_submatrix(A, free), _submatrix(M, free), k=6)
    dim = int(np.sum(w < tol * wmax))
    c = float("inf") if dim > 0 else 1.0 / float(w[0])
    return ConstantReport(c, float(w[0]), dim, wmax)


def hessian_constant(h2, constraints, n=DEFAULT_QUAD, tol=KERNEL_RTOL):
    """C2 with |u3|_H2^2 <= C2 |Hess u3|^2 on V3."""
    M2, K2, H = h2.forms(n)
    M = (M2 + K2 + H).tocsr()
    free = constraints.free3
    w, _, wmax = _eigen_smallest(_submatrix(H, free), _submatrix(M, free), k=6)
    dim = int(np.sum(w < tol * wmax))
    c = float("inf") if dim > 0 else 1.0 / float(w[0])
    return ConstantReport(c, float(w[0]), dim, wmax)


def subspace_angles_metric(U, V, M):
    """Principal angles between span(U) and span(V) in the M inner product."""
    MU, MV = M @ U, M @ V
    A = sla.cholesky(U.T @ MU)
    B = sla.cholesky(V.T @ MV)
    C = sla.solve_triangular(A, U.T @ MV, trans="T")
    C = sla.solve_triangular(B, C.T, trans="T").T
    s = np.clip(sla.svdvals(C), -1.0, 1.0)
    return np.arccos(s)


# ---------------------------------------------------------------------------
# nonlinear flex search


def _projection_blocks(n=DEFAULT_QUAD):
    """Reference-square projectors onto the tangential-strain ranges.

    Returns per-component (nq, nq) matrices acting on quadrature samples.
    """
    xi, eta, w = gauss_2d(n)
    one = np.ones_like(xi)
    bases = {
        0: np.stack([one, eta], axis=1),          # range of d1(Q1)
        1: np.stack([one, xi], axis=1),           # range of d2(Q1)
        2: np.stack([one, xi, eta], axis=1),      # range of the 12 pairing
    }
    out = {}
    for c, Phi in bases.items():
        G = Phi.T @ (w[:, None] * Phi)
        out[c] = Phi @ np.linalg.solve(G, Phi.T * w[None, :])
    return out


def _apply_projection(vals, P, n_elements, nq):
    """Apply a per-element projector to (Q,) samples (element-major)."""
    return (vals.reshape(n_elements, nq) @ P.T).ravel()


@dataclass
class FlexSearchResult:
    found: bool
    residual: float            # projected strain norm of the unit witness
    raw_residual: float        # unprojected strain norm of the same field
    witness: object            # DisplacementField or None
    restarts: int
    history: list = field(default_factory=list)


def _metric_cholesky(params):
    c1, mu = params.c1, params.mu
    G = np.array([[c1 + 4 * mu, c1, 0.0],
                  [c1, c1 + 4 * mu, 0.0],
                  [0.0, 0.0, 8 * mu]])
    return np.linalg.cholesky(G)


def nonlinear_flex_search(h1, h2, constraints, params, restarts=8, iters=400,
                          seed=0, tol=FLEX_TOL, reg=1e-12, n=DEFAULT_QUAD):
    """Search for a unit-norm displacement with vanishing projected strain.

    For a fixed transverse field the projected membrane strain is affine in
    the tangential dofs, so the tangential part is eliminated exactly by a
    prefactored least-squares solve (variable projection).  The reduced
    objective is a homogeneous quartic in the transverse dofs; dividing by
    the squared H2 norm makes it scale invariant, and it is driven to zero
    by a quasi-Newton descent.  Each restart starts from a fresh seeded
    random transverse field; the best witness over all restarts is kept.
    """
    mesh = h1.mesh
    t1 = h1.tables(n)
    t3 = h2.tables(n)
    E, nq = mesh.n_elements, t3.weights.size // mesh.n_elements
    P = _projection_blocks(n)
    L = _metric_cholesky(params)
    w = t1.weights
    sw = np.sqrt(w)
    free1, free2, free3 = constraints.free1, constraints.free2, constraints.free3
    nh = free1.size + free2.size
    if free3.size == 0:
        return FlexSearchResult(False, np.inf, np.inf, None, 0)

    D1h = t1.ops["d1"].toarray()[:, free1]
    D2h = t1.ops["d2"].toarray()[:, free2]
    D1h2 = t1.ops["d2"].toarray()[:, free1]
    D2h1 = t1.ops["d1"].toarray()[:, free2]
    D13 = t3.ops["d1"].toarray()[:, free3]
    D23 = t3.ops["d2"].toarray()[:, free3]

    M2, K2, H2f = h2.forms(n)
    norm3 = _submatrix((M2 + K2 + H2f).tocsr(), free3).toarray()
    M1, K1 = h1.forms(n)
    norm1 = _submatrix((M1 + K1).tocsr(), free1).toarray()
    norm2 = _submatrix((M1 + K1).tocsr(), free2).toarray()

    def proj(comp, vals):
        return _apply_projection(vals, P[comp], E, nq)

    # y = L^T e turns the elasticity metric into a Euclidean one:
    # e.G e = |L^T e|^2 with rows (L00 e11 + L10 e22, L11 e22, L22 e12)
    def metric_rows(e11, e22, e12):
        return ((L[0, 0] * e11 + L[1, 0] * e22) * sw,
                L[1, 1] * e22 * sw,
                L[2, 2] * e12 * sw)

    # tangential strain columns are already in the projection ranges
    A11 = np.hstack([D1h, np.zeros_like(D2h1)])
    A22 = np.hstack([np.zeros_like(D1h), D2h1])
    A12 = np.hstack([0.5 * D1h2, 0.5 * D2h])

    def strain_components(uh, u3f):
        s1, s2 = D13 @ u3f, D23 @ u3f
        e11 = D1h @ uh[:free1.size] + 0.5 * s1 * s1
        e22 = D2h1 @ uh[free1.size:] + 0.5 * s2 * s2
        e12 = 0.5 * (D1h2 @ uh[:free1.size] + D2h @ uh[free1.size:]) + 0.5 * s1 * s2
        return e11, e22, e12

    def measure(uh, u3f, projected=True):
        e11, e22, e12 = strain_components(uh, u3f)
        if projected:
            e11, e22, e12 = proj(0, e11), proj(1, e22), proj(2, e12)
        y1, y2, y3 = metric_rows(e11, e22, e12)
        return float(np.sqrt(y1 @ y1 + y2 @ y2 + y3 @ y3))

    from .optimize import lbfgs

    # weighted rows of the fixed tangential-strain block, prefactored
    Xh = np.vstack([(L[0, 0] * A11 + L[1, 0] * A22) * sw[:, None],
                    L[1, 1] * A22 * sw[:, None],
                    L[2, 2] * A12 * sw[:, None]])
    Gh = Xh.T @ Xh
    Gh += reg * max(np.trace(Gh) / max(nh, 1), 1e-300) * np.eye(nh)
    Gh_fac = sla.cho_factor(Gh) if nh else None

    def projT(comp, vals):
        # adjoint of the componentwise projector on quadrature samples
        return (vals.reshape(E, nq) @ P[comp]).ravel()

    def envelope(v):
        """Optimal tangential part, residual rows, and squared residual."""
        s1, s2 = D13 @ v, D23 @ v
        q11 = proj(0, 0.5 * s1 * s1)
        q22 = proj(1, 0.5 * s2 * s2)
        q12 = proj(2, 0.5 * s1 * s2)
        y1, y2, y3 = metric_rows(q11, q22, q12)
        b = np.concatenate([y1, y2, y3])
        uh = sla.cho_solve(Gh_fac, -(Xh.T @ b)) if nh else np.zeros(0)
        r = (Xh @ uh + b) if nh else b
        return uh, s1, s2, r, float(r @ r)

    def fun_grad(v):
        uh, s1, s2, r, rho = envelope(v)
        Q = sw.size
        r1, r2, r3 = r[:Q], r[Q:2 * Q], r[2 * Q:]
        # chain rule back through the metric rows and the projectors
        gq11 = 2.0 * L[0, 0] * sw * r1
        gq22 = 2.0 * (L[1, 0] * r1 + L[1, 1] * r2) * sw
        gq12 = 2.0 * L[2, 2] * sw * r3
        ge11 = projT(0, gq11)
        ge22 = projT(1, gq22)
        ge12 = projT(2, gq12)
        grho = (D13.T @ (ge11 * s1 + 0.5 * ge12 * s2)
                + D23.T @ (ge22 * s2 + 0.5 * ge12 * s1))
        n2 = float(v @ (norm3 @ v))
        f = rho / n2**2
        g = grho / n2**2 - (4.0 * rho / n2**3) * (norm3 @ v)
        return f, g

    def _proj_cols(comp, cols):
        return (cols.reshape(E, nq, -1).transpose(0, 2, 1)
                @ P[comp].T).transpose(0, 2, 1).reshape(E * nq, -1)

    def gn_polish(v, steps=40):
        """Gauss-Newton refinement of the reduced residual near a zero.

        The tangential block is eliminated by projecting the transverse
        Jacobian off its range.  The residual is homogeneous in the
        transverse dofs, so the unconstrained step collapses onto the
        radial rescaling direction, which the unit-sphere normalization
        cancels; restricting the step to the sphere tangent space removes
        that degeneracy and restores the local rate on zero-residual
        problems.
        """
        for _ in range(steps):
            uh, s1, s2, r_vec, rho = envelope(v)
            if rho < 1e-28:
                break
            C11 = _proj_cols(0, s1[:, None] * D13)
            C22 = _proj_cols(1, s2[:, None] * D23)
            C12 = _proj_cols(2, 0.5 * (s1[:, None] * D23 + s2[:, None] * D13))
            J = np.vstack([(L[0, 0] * C11 + L[1, 0] * C22) * sw[:, None],
                           L[1, 1] * C22 * sw[:, None],
                           L[2, 2] * C12 * sw[:, None]])
            if nh:
                J = J - Xh @ sla.cho_solve(Gh_fac, Xh.T @ J)
            m = norm3 @ v
            mv = float(m @ v)
            J = J - np.outer(J @ v, m) / mv
            d = np.linalg.lstsq(J, -r_vec, rcond=None)[0]
            d = d - v * float(m @ d) / mv
            improved = False
            t = 1.0
            for _ in range(8):
                vn = v + t * d
                vn = vn / np.sqrt(vn @ (norm3 @ vn))
                rho_n = envelope(vn)[4]
                if rho_n < rho:
                    v, improved = vn, True
                    break
                t *= 0.5
            if not improved:
                break
        return v

    best = (np.inf, np.inf, None)
    history = []
    for r in range(restarts):
        rsub = np.random.default_rng(seed + 1000 * r)
        v0 = rsub.standard_normal(free3.size)
        v0 /= np.sqrt(v0 @ (norm3 @ v0))
        v, f, _, _, _ = lbfgs(fun_grad, v0, max_iter=iters, gtol=0.0,
                              memory=30)
        v = gn_polish(v)
        u3f = v / np.sqrt(v @ (norm3 @ v))
        uh = envelope(u3f)[0]
        # rescale the flex curve (t^2 uh, t u3) to combined unit norm
        a = float(uh[:free1.size] @ (norm1 @ uh[:free1.size])
                  + uh[free1.size:] @ (norm2 @ uh[free1.size:]))
        b = float(u3f @ (norm3 @ u3f))
        # positive root of a*t^4 + b*t^2 = 1, written cancellation-free
        t2 = 2.0 / (b + np.sqrt(b * b + 4.0 * a))
        uh_s, u3_s = uh * t2, u3f * np.sqrt(t2)
        res_unit = measure(uh_s, u3_s)
        raw_unit = measure(uh_s, u3_s, projected=False)
        history.append({"restart": r, "residual": res_unit, "raw": raw_unit})
        if res_unit < best[0]:
            u = DisplacementField.zero(h1, h2)
            u.u1[free1] = uh_s[:free1.size]
            u.u2[free2] = uh_s[free1.size:]
            u.u3[free3] = u3_s
            best = (res_unit, raw_unit, u)
        if best[0] < tol:
            break
    found = bool(best[0] < tol)
    return FlexSearchResult(found, best[0], best[1], best[2], len(history), history)


# ---------------------------------------------------------------------------
# verdict


@dataclass
class RigidityReport:
    verdict: str               # "rigid", "nonrigid", "undetermined"
    mechanism: str             # which sufficient condition or search decided
    details: dict
    flex: object = None


def _domain_is_convex(mesh, samples=33):
    dom = mesh.domain
    if dom.kind == "convex_polygon":
        return True
    if dom.kind == "general_polygon":
        return False
    xs = np.linspace(dom.a, dom.b, samples)
    f = np.array([float(dom.f(x)) for x in xs])
    g = np.array([float(dom.g(x)) for x in xs])
    scale = max(1.0, np.abs(f).max(), np.abs(g).max())
    f_convex = np.all(f[1:-1] <= 0.5 * (f[:-2] + f[2:]) + 1e-10 * scale)
    g_concave = np.all(g[1:-1] >= 0.5 * (g[:-2] + g[2:]) - 1e-10 * scale)
    return bool(f_convex and g_concave)


def _nodes_clamped(constraints, nodes):
    return bool(np.all(constraints.m1[nodes]) and np.all(constraints.m2[nodes]))


def _transverse_constants_trivial(h2, constraints):
    """True when V3 contains no nonzero constant function."""
    try:
        return gradient_kernel(h2, constraints).dim == 0
    except MeshError:
        # non-rectangular elements: decide from the constraint description
        d = constraints.description
        return d.get("v3") in ("h20", "h10", "pin_affine", "pin_constant") \
            or bool(np.any(constraints.m3))


def rigidity_verdict(h1, h2, constraints, params, flex_kwargs=None,
                     run_flex_cross_check=False):
    """Decide rigidity of a constraint regime.

    Sufficient conditions are tried in order: full tangential clamping,
    clamping of both graph parts of a rectangle-like boundary, directional
    clamping, and transverse clamping on a convex domain with trivial
    linearized-strain kernel.  If none applies, the numerical flex search
    decides between "nonrigid" (witness found) and "undetermined".
    """
    mesh = h1.mesh
    details = dict(constraints.description)
    boundary_nodes = mesh.boundary_node_ids()

    no_constants = _transverse_constants_trivial(h2, constraints)
    details["transverse_constants_trivial"] = no_constants

    if _nodes_clamped(constraints, boundary_nodes) and no_constants:
        return RigidityReport("rigid", "full_tangential_clamp", details)

    if mesh.domain.kind == "rectangle_like" and no_constants:
        graph_nodes = mesh.boundary_node_ids(tags=("gamma_f", "gamma_g"))
        if graph_nodes.size and _nodes_clamped(constraints, graph_nodes):
            return RigidityReport("rigid", "graph_boundary_clamp", details)

    if constraints.description.get("regime") == "directional" and no_constants:
        return RigidityReport("rigid", "directional_clamp", details)

    transverse_zero = bool(np.all(constraints.m3[0::4][boundary_nodes]))
    if transverse_zero and _domain_is_convex(mesh):
        lk = linear_strain_kernel(h1, constraints)
        details["linear_strain_kernel_dim"] = lk.dim
        if lk.dim == 0:
            return RigidityReport("rigid", "convex_transverse_zero", details)

    try:
        flex = nonlinear_flex_search(h1, h2, constraints, params,
                                     **(flex_kwargs or {}))
    except MeshError as exc:
        details["flex_search_error"] = str(exc)
        return RigidityReport("undetermined", "flex_search_unavailable", details)
    details["flex_residual"] = flex.residual
    if flex.found:
        return RigidityReport("nonrigid", "flex_witness", details, flex)
    return RigidityReport("undetermined", "flex_search_exhausted", details, flex)
