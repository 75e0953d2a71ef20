"""Energy minimization: limited-memory quasi-Newton with Armijo search.

The plate energy is smooth (polynomial in the dofs), so a limited-memory
BFGS iteration with a backtracking line search enforcing the sufficient
decrease condition is used throughout.  The energy Hessian is never
assembled.  A per-iterate trace records the quantities used by the
boundedness diagnostics of minimizing sequences, and an excursion ceiling
on the transverse norm flags runs that keep descending while the iterates
leave every bounded set ("suspected unbounded"): on a fixed mesh the
discrete energy is coercive, so true divergence cannot occur and potential
continuum blow-up manifests as a large excursion along a flex direction.
"""

from dataclasses import dataclass, field

import numpy as np

from .energy import (bending_strain, energy_gradient, membrane_strain,
                     total_energy)
from .rigidity import hessian_constant, korn_constant
from .spaces import DEFAULT_QUAD


def lbfgs(fun_grad, x0, max_iter=500, gtol=1e-8, memory=20, c1=1e-4,
          backtrack=0.5, max_ls=50, callback=None, h0=None):
    """Two-loop recursion L-BFGS with Armijo backtracking.

    fun_grad(x) -> (f, g).  Curvature pairs with non-positive inner product
    are skipped so the implicit metric stays positive definite.  callback
    may return True to stop early.  h0 is an optional callable applying an
    initial inverse-Hessian approximation (a preconditioner); when given it
    replaces the usual scalar gamma scaling.  Returns (x, f, g, n_iter,
    status) with status in {"converged", "max_iter", "line_search_failed",
    "callback"}.
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = fun_grad(x)
    S, Y, R = [], [], []
    for it in range(max_iter):
        gnorm = float(np.linalg.norm(g))
        if callback is not None and callback(it, x, f, g):
            return x, f, g, it, "callback"
        if gnorm < gtol:
            return x, f, g, it, "converged"
        # two-loop recursion
        q = -g.copy()
        alphas = []
        for s, y, rho in zip(reversed(S), reversed(Y), reversed(R)):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * y
        if h0 is not None:
            q = h0(q)
        elif S:
            q *= (S[-1] @ Y[-1]) / (Y[-1] @ Y[-1])
        for (s, y, rho), a in zip(zip(S, Y, R), reversed(alphas)):
            b = rho * (y @ q)
            q += (a - b) * s
        d = q
        slope = float(g @ d)
        if slope >= 0:
            d = -g
            slope = -gnorm**2
        t = 1.0
        ok = False
        for _ in range(max_ls):
            xn = x + t * d
            fn, gn = fun_grad(xn)
            if fn <= f + c1 * t * slope:
                ok = True
                break
            t *= backtrack
        if not ok:
            return x, f, g, it, "line_search_failed"
        s, y = xn - x, gn - g
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            S.append(s)
            Y.append(y)
            R.append(1.0 / sy)
            if len(S) > memory:
                S.pop(0), Y.pop(0), R.pop(0)
        x, f, g = xn, fn, gn
    return x, f, g, max_iter, "max_iter"


@dataclass
class MinimizeOptions:
    max_iterations: int = 1000
    gradient_tolerance: float = 1e-8
    memory: int = 30
    restarts: int = 0
    restart_amplitude: float = 1e-2
    seed: int = 0
    divergence_ceiling: float = None   # None: 1e6 * (1 + initial H2 norm)
    armijo_c1: float = 1e-4
    backtrack: float = 0.5
    compute_constants: bool = False
    precondition: bool = True
    n_quad: int = DEFAULT_QUAD


@dataclass
class MinimizeTrace:
    """Per accepted iterate: energy, gradient norm, and the norms used by
    the minimizing-sequence diagnostics."""

    energy: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    tangential_h1: list = field(default_factory=list)   # sqrt(sum |u_a|_H1^2)
    transverse_h2: list = field(default_factory=list)   # |u3|_H2
    grad_l4: list = field(default_factory=list)         # |(d_a u3)|_L4
    membrane_residual: list = field(default_factory=list)  # |2 E(u)|_L2
    hessian_norm: list = field(default_factory=list)    # |Hess u3|_L2
    energy_bound_holds: list = field(default_factory=list)
    hessian_ratio_holds: list = field(default_factory=list)
    A: float = None
    B: float = None

    def as_rows(self):
        keys = ("energy", "grad_norm", "tangential_h1", "transverse_h2",
                "grad_l4", "membrane_residual", "hessian_norm",
                "energy_bound_holds", "hessian_ratio_holds")
        cols = [getattr(self, k) for k in keys]
        return keys, list(zip(*cols))


@dataclass
class MinimizeResult:
    field: object
    trace: MinimizeTrace
    converged: bool
    suspected_unbounded: bool
    status: str
    final_energy: float
    restart_energies: list
    runs: list = field(default_factory=list)   # per-start summaries


def quadratic_preconditioner(h1, h2, constraints, params, n=DEFAULT_QUAD,
                             shift=1e-8):
    """Inverse of the quadratic part of the energy on the free dofs.

    Assembles the Hessian of J at u = 0 (linearized membrane elasticity on
    the tangential components, bending elasticity on the transverse one),
    adds a small relative multiple of the full norm forms so the matrix
    stays positive definite when the regime leaves rigid or affine modes
    free, and returns a sparse-LU solve callable for use as the initial
    inverse Hessian of the descent.
    """
    import scipy.sparse as sp
    from scipy.sparse.linalg import splu

    con = constraints
    c1m, mu, eps = params.c1, params.mu, params.eps

    t1 = h1.tables(n)
    W = sp.diags(t1.weights)
    D1, D2 = t1.ops["d1"], t1.ops["d2"]
    A11 = (c1m + 4 * mu) * (D1.T @ W @ D1) + 2 * mu * (D2.T @ W @ D2)
    A22 = (c1m + 4 * mu) * (D2.T @ W @ D2) + 2 * mu * (D1.T @ W @ D1)
    A12 = c1m * (D1.T @ W @ D2) + 2 * mu * (D2.T @ W @ D1)
    St = sp.bmat([[A11, A12], [A12.T, A22]]).tocsr()

    t3 = h2.tables(n)
    W3 = sp.diags(t3.weights)
    H11, H22, H12 = t3.ops["d11"], t3.ops["d22"], t3.ops["d12"]
    tr_op = H11 + H22
    Sb = (c1m * (tr_op.T @ W3 @ tr_op)
          + 4 * mu * (H11.T @ W3 @ H11 + H22.T @ W3 @ H22
                      + 2 * (H12.T @ W3 @ H12))).tocsr()

    M1, K1 = h1.forms(n)
    N1 = (M1 + K1).tocsr()
    M2, K2, H2f = h2.forms(n)
    N3 = (M2 + K2 + H2f).tocsr()

    ft = np.concatenate([con.free1, con.free2 + h1.ndof])
    f3 = con.free3

    def sub(A, idx):
        return A[idx][:, idx]

    At = eps * sub(St, ft) + shift * eps * sub(sp.block_diag([N1, N1]).tocsr(), ft)
    A3 = (eps**3 / 3.0) * sub(Sb, f3) + shift * (eps**3 / 3.0) * sub(N3, f3)
    P = sp.block_diag([At, A3]).tocsc()
    lu = splu(P)
    return lu.solve


def _load_norms(loads, h1, n):
    t = h1.tables(n)
    L = loads.at(t.points) if loads is not None else None
    if L is None:
        return 0.0, 0.0
    w = t.weights
    p_t = float(w @ (L["p1"]**2 + L["p2"]**2))
    p_3 = float(w @ (L["p3"]**2))
    return p_t, p_3


def diagnostic_constants(h1, h2, constraints, params, loads, n=DEFAULT_QUAD):
    """The load-dependent bound constants of the coercivity estimate:

    A = (4 C1 / (mu eps)) |p_t|^2 + (3 C2 / (4 mu eps^3)) (|p3|^2 + |p_t|^2)
    B = sqrt(2 C1) |p_t|

    where |p_t|^2 is the squared L2 norm of the tangential load pair.
    Returns (A, B) or (None, None) when either constant is infinite.
    """
    k1 = korn_constant(h1, constraints, n)
    k2 = hessian_constant(h2, constraints, n)
    if not np.isfinite(k1.constant) or not np.isfinite(k2.constant):
        return None, None
    p_t, p_3 = _load_norms(loads, h1, n)
    mu, eps = params.mu, params.eps
    A = (4.0 * k1.constant / (mu * eps)) * p_t \
        + (3.0 * k2.constant / (4.0 * mu * eps**3)) * (p_3 + p_t)
    B = np.sqrt(2.0 * k1.constant) * np.sqrt(p_t)
    return A, B


def _trace_row(u, params, trace, J, gnorm, n):
    h1sq, h2sq = u.norms(n)
    t3 = u.h2.tables(n)
    w = t3.weights
    s1 = t3.ops["d1"] @ u.u3
    s2 = t3.ops["d2"] @ u.u3
    l4 = float(w @ (s1**4 + s2**4)) ** 0.25
    E = membrane_strain(u, n)
    e11, e22, e12 = E.values.T
    mem = float(np.sqrt(w @ ((2 * e11)**2 + (2 * e22)**2 + 2 * (2 * e12)**2)))
    F = bending_strain(u, n)
    f11, f22, f12 = F.values.T
    hess = float(np.sqrt(w @ (f11**2 + f22**2 + 2 * f12**2)))
    trace.energy.append(J)
    trace.grad_norm.append(gnorm)
    trace.tangential_h1.append(float(np.sqrt(h1sq)))
    trace.transverse_h2.append(float(np.sqrt(h2sq)))
    trace.grad_l4.append(l4)
    trace.membrane_residual.append(mem)
    trace.hessian_norm.append(hess)
    if trace.A is not None:
        mu, eps = params.mu, params.eps
        lhs = (mu * eps / 16.0) * mem**2 + (mu * eps**3 / 3.0) * hess**2
        trace.energy_bound_holds.append(bool(lhs <= trace.A + trace.B * l4**2 + 1e-12))
        a3 = np.sqrt(3.0 * trace.A / (mu * eps**3))
        b3 = np.sqrt(3.0 * trace.B / (mu * eps**3)) if trace.B > 0 else 0.0
        trace.hessian_ratio_holds.append(bool(hess <= a3 + 2.0 * b3 * l4 + 1e-12))
    else:
        trace.energy_bound_holds.append(None)
        trace.hessian_ratio_holds.append(None)
    return float(np.sqrt(h2sq))


def minimize_energy(h1, h2, constraints, params, loads=None, options=None,
                    start=None):
    """Minimize the plate energy over the free dofs of a constraint regime.

    Runs one descent from `start` (zero by default) plus options.restarts
    seeded random restarts, and returns the best run.  A run stops with
    suspected_unbounded when the transverse H2 norm crosses the divergence
    ceiling while the energy is still decreasing.
    """
    opt = options or MinimizeOptions()
    n = opt.n_quad
    con = constraints

    def fun_grad(z):
        u = con.unpack(z)
        J = total_energy(u, params, loads, n).total
        g = energy_gradient(u, params, loads, con, n)
        return J, g

    A = B = None
    if opt.compute_constants and loads is not None:
        A, B = diagnostic_constants(h1, h2, con, params, loads, n)

    h0 = None
    if opt.precondition and con.n_free:
        h0 = quadratic_preconditioner(h1, h2, con, params, n)

    starts = []
    z0 = con.pack(start) if start is not None else np.zeros(con.n_free)
    starts.append(z0)
    for r in range(opt.restarts):
        rng = np.random.default_rng(opt.seed + 7919 * (r + 1))
        starts.append(z0 + opt.restart_amplitude * rng.standard_normal(con.n_free))

    best = None
    restart_energies = []
    run_summaries = []
    for z_start in starts:
        trace = MinimizeTrace(A=A, B=B)
        u_start = con.unpack(z_start)
        _, h2sq0 = u_start.norms(n)
        ceiling = opt.divergence_ceiling
        if ceiling is None:
            ceiling = 1e6 * (1.0 + np.sqrt(h2sq0))
        state = {"unbounded": False, "prevJ": np.inf}

        def cb(it, z, f, g):
            u = con.unpack(z)
            h2norm = _trace_row(u, params, trace, float(f),
                                float(np.linalg.norm(g)), n)
            decreasing = f < state["prevJ"] - 0.0
            state["prevJ"] = f
            if h2norm > ceiling and decreasing:
                state["unbounded"] = True
                return True
            return False

        z, f, g, its, status = lbfgs(
            fun_grad, z_start, max_iter=opt.max_iterations,
            gtol=opt.gradient_tolerance, memory=opt.memory,
            c1=opt.armijo_c1, backtrack=opt.backtrack, callback=cb, h0=h0)
        if status != "callback":
            # record the final accepted iterate too
            u = con.unpack(z)
            _trace_row(u, params, trace, float(f), float(np.linalg.norm(g)), n)
        result = MinimizeResult(con.unpack(z), trace,
                                status == "converged",
                                state["unbounded"], status, float(f), [])
        restart_energies.append(float(f))
        run_summaries.append({"status": status,
                              "converged": status == "converged",
                              "suspected_unbounded": state["unbounded"],
                              "final_energy": float(f),
                              "grad_norm": float(np.linalg.norm(g)),
                              "max_transverse_h2": max(trace.transverse_h2,
                                                       default=0.0),
                              "max_tangential_h1": max(trace.tangential_h1,
                                                       default=0.0)})
        if best is None or state["unbounded"] or (not best.suspected_unbounded
                                                  and f < best.final_energy):
            if best is None or not best.suspected_unbounded:
                best = result
    best.restart_energies = restart_energies
    best.runs = run_summaries
    return best


def minimizing_sequence_diagnostics(trace):
    """Boundedness verdict for a recorded descent trace.

    Returns a dict with the maximal norms, whether the energy decreased
    monotonically, whether the tangential and transverse norms grew
    together over the last quarter of the run (coupled growth is the
    signature of a flex-driven escape), and a fitted coupling ratio of the
    tangential norm against the membrane residual and transverse growth.
    """
    E = np.asarray(trace.energy, dtype=float)
    th = np.asarray(trace.tangential_h1, dtype=float)
    tv = np.asarray(trace.transverse_h2, dtype=float)
    if E.size == 0:
        return {"iterates": 0}
    q = max(1, E.size // 4)
    tail_th, tail_tv = th[-q:], tv[-q:]
    coupled = bool(tail_th[-1] > tail_th[0] and tail_tv[-1] > tail_tv[0]) if q > 1 else False
    denom = np.maximum(tv, 1e-150)**2
    ratio = float(np.nanmax(th / denom)) if np.any(tv > 0) else float("nan")
    return {
        "iterates": int(E.size),
        "energy_monotone": bool(np.all(np.diff(E) <= 1e-12)),
        "max_tangential_h1": float(th.max()),
        "max_transverse_h2": float(tv.max()),
        "final_energy": float(E[-1]),
        "coupled_growth": coupled,
        "tangential_vs_transverse_sq": ratio,
    }
