"""Damped Newton solver for the Monge-Ampere Dirichlet problem.

The unknowns are the values of ``u`` at the solve nodes; every other node
carries the boundary data.  The pointwise equation is

    det h(u) = g,    g = f / density(omega^2),

with ``h(u)`` the Hermitian matrix of i del delbar u in the unitary coframe.
``h`` is linear in ``u`` once the frame is fixed, so the maps u -> a, b, c
(the entries of h) are assembled as sparse matrices and the Newton matrix
``c A + a C - 2 Re(conj(b) B)`` is exact.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .calculus import frame_kernels, omega_square_density
from .errors import ConvergenceError, DomainError
from .grid import DIM, MeasureField, ScalarField, dilate, erode
from .psh import eigen_min, hermitian_field
from .structure import AlmostComplexStructure, HermitianForm, unitary_coframe_arrays
from . import forms

#: Lower bound enforced on the smallest eigenvalue of h(u) by the line search.
EPS_PSH = 1e-6
#: Above this many unknowns the linear systems go to algebraic multigrid.
DIRECT_LIMIT = 30000


@dataclass
class DirichletResult:
    u: ScalarField
    residual: float
    boundary_error: float
    newton_steps: int
    converged: bool = True
    history: list = field(default_factory=list)
    min_eigenvalue: float = float("nan")
    seconds: float = 0.0
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"residual": self.residual, "boundary_error": self.boundary_error,
                "newton_steps": self.newton_steps, "converged": self.converged,
                "history": list(self.history), "min_eigenvalue": self.min_eigenvalue,
                "seconds": self.seconds, "params": dict(self.params)}


def _pick(arr: np.ndarray, idx: tuple) -> np.ndarray:
    """Entries of a (possibly compact) grid array at the nodes ``idx``."""
    sub = tuple(i if arr.shape[a] > 1 else np.zeros_like(i) for a, i in enumerate(idx))
    return arr[sub]


def _diff_matrix(shape, axis: int, h: float, rows: np.ndarray, col_pos: np.ndarray):
    """Centered difference along ``axis``: rows at flat ``rows``, columns through ``col_pos``.

    Rows on the two end nodes of the axis are zero, as in ``central_diff``.
    Columns mapped to -1 are dropped.
    """
    n = shape[axis]
    stride = int(np.prod(shape[axis + 1:]))
    k = (rows // stride) % n
    inner = (k > 0) & (k < n - 1)
    r_idx = np.flatnonzero(inner)
    data, ri, ci = [], [], []
    for sgn in (1, -1):
        cols = col_pos[rows[inner] + sgn * stride]
        keep = cols >= 0
        ri.append(r_idx[keep])
        ci.append(cols[keep])
        data.append(np.full(keep.sum(), sgn / (2.0 * h)))
    ncols = int(col_pos.max()) + 1 if col_pos.size else 0
    return sp.csr_matrix((np.concatenate(data), (np.concatenate(ri), np.concatenate(ci))),
                         shape=(len(rows), ncols))


def hermitian_operators(J: AlmostComplexStructure, omega: HermitianForm, rows: np.ndarray,
                        cols: np.ndarray):
    """Sparse A, B, C with (a, b, c) = (A u, B u, C u) at ``rows``, u supported on ``cols``.

    ``rows`` and ``cols`` are flat node indices.  The composition mirrors
    ``ddbar_coeffs`` followed by the frame kernels.
    """
    dom = J.domain
    shape = dom.shape
    N = dom.size
    col_pos = np.full(N, -1, dtype=np.int64)
    col_pos[cols] = np.arange(len(cols))
    row_mask = np.zeros(N, bool)
    row_mask[rows] = True
    mid = np.flatnonzero(dilate(row_mask.reshape(shape), 1).ravel())
    mid_pos = np.full(N, -1, dtype=np.int64)
    mid_pos[mid] = np.arange(len(mid))
    mid_idx = np.unravel_index(mid, shape)
    row_idx = np.unravel_index(rows, shape)

    P01 = J.projectors(1)[(0, 1)]
    P11 = J.projectors(2)[(1, 1)]
    alpha = unitary_coframe_arrays(J.p10(), omega.coeffs)
    K = frame_kernels(alpha)

    G_mid = [_diff_matrix(shape, a, dom.spacing[a], mid, col_pos) for a in range(DIM)]
    G_row = [_diff_matrix(shape, a, dom.spacing[a], rows, mid_pos) for a in range(DIM)]
    # delbar u at the intermediate nodes
    W = []
    for j in range(DIM):
        acc = None
        for a in range(DIM):
            p = _pick(P01[..., j, a], mid_idx)
            if not np.any(p):
                continue
            term = sp.diags(p) @ G_mid[a]
            acc = term if acc is None else acc + term
        W.append(acc if acc is not None else sp.csr_matrix((len(mid), len(cols)), dtype=complex))
    # d of the (0,1)-form, six components
    dW = [None] * 6
    for a, i, o, s in forms.d_table(1):
        term = G_row[a] @ W[i]
        term = term if s > 0 else -term
        dW[o] = term if dW[o] is None else dW[o] + term
    A = B = C = None
    for n in range(6):
        Cn = None
        for o in range(6):
            p = _pick(P11[..., n, o], row_idx)
            if not np.any(p):
                continue
            term = sp.diags(1j * p) @ dW[o]
            Cn = term if Cn is None else Cn + term
        if Cn is None:
            continue
        Rn = sp.csr_matrix(Cn.real)
        ta = sp.diags(_pick(K[..., n, 0, 0].real, row_idx)) @ Rn
        tb = sp.diags(_pick(K[..., n, 0, 1], row_idx)) @ Rn
        tc = sp.diags(_pick(K[..., n, 1, 1].real, row_idx)) @ Rn
        A = ta if A is None else A + ta
        B = tb if B is None else B + tb
        C = tc if C is None else C + tc
    return A.tocsr(), B.tocsr(), C.tocsr()


def _solve_linear(M, rhs, tol: float):
    n = M.shape[0]
    if n <= DIRECT_LIMIT:
        return spla.spsolve(M.tocsc(), rhs)
    import pyamg

    ml = pyamg.smoothed_aggregation_solver(-M, symmetry="nonsymmetric", max_coarse=2000)
    x = ml.solve(-rhs, tol=tol, accel="gmres", maxiter=400)
    return x


def dirichlet_solve(J: AlmostComplexStructure, omega: HermitianForm, omega_mask,
                    phi: ScalarField, f, tol: float | None = None, max_newton: int = 40,
                    eps: float = EPS_PSH, linear_tol: float = 1e-11) -> DirichletResult:
    """Solve det h(u) = f / density(omega^2) in the domain with u = phi outside.

    ``f`` is a MeasureField or a density array (coordinate volume).  Solve
    nodes are the masked nodes at least two nodes away from the box edge.
    The starting point solves the linear problem tr h(u) = 2 sqrt(g) with
    the same boundary data.  Each Newton step is damped by halving until the
    residual norm drops and the smallest eigenvalue of h stays above
    ``min(eps, its current value)``.  The target is floored at (2 eps)^2 so
    degenerate data keep the iterates strictly psh.
    """
    t0 = time.perf_counter()
    dom = J.domain
    dens_f = f.density if isinstance(f, MeasureField) else np.asarray(f, float)
    dens_f = np.broadcast_to(dens_f, dom.shape)
    solve_mask = np.asarray(omega_mask, bool) & erode(np.ones(dom.shape, bool), 2)
    if not solve_mask.any():
        raise DomainError("degenerate domain: no solve nodes")
    if np.any(dens_f[solve_mask] < 0):
        raise DomainError("f must be nonnegative")
    if not np.isfinite(phi.values[~solve_mask]).all():
        raise DomainError("boundary data must be finite")
    rows = np.flatnonzero(solve_mask.ravel())
    idx = np.unravel_index(rows, dom.shape)
    dens_w = np.broadcast_to(omega_square_density(omega), dom.shape)
    g = np.maximum(dens_f[idx] / dens_w[idx], (2.0 * eps) ** 2)
    if tol is None:
        tol = 1e-9 * max(1.0, float(g.max()))

    A, B, C = hermitian_operators(J, omega, rows, rows)

    def entries(u):
        a, b, c, _ = hermitian_field(J, omega, ScalarField(dom, u))
        return a[idx], b[idx], c[idx]

    def resid(u):
        a, b, c = entries(u)
        return a * c - np.abs(b) ** 2 - g, a, b, c

    # starting point: boundary data outside, linear problem inside
    u = np.array(phi.values, dtype=float)
    u[idx] = 0.0
    a0, _, c0 = entries(u)
    L = (A + C).tocsr()
    u[idx] = _solve_linear(L, 2.0 * np.sqrt(g) - (a0 + c0), linear_tol)

    F, a, b, c = resid(u)
    lam = eigen_min(a, b, c)
    history = [float(np.abs(F).max())]
    steps = 0
    converged = history[-1] <= tol
    while not converged and steps < max_newton:
        steps += 1
        Jac = (sp.diags(c) @ A + sp.diags(a) @ C - 2.0 * sp.csr_matrix((sp.diags(b.conj()) @ B).real)).tocsr()
        delta = _solve_linear(Jac, -F, linear_tol)
        norm0 = float(np.linalg.norm(F))
        floor = min(eps, float(lam.min()))
        t = 1.0
        while True:
            trial = u.copy()
            trial[idx] += t * delta
            Ft, at, bt, ct = resid(trial)
            lt = eigen_min(at, bt, ct)
            if np.linalg.norm(Ft) < (1.0 - 1e-4 * t) * norm0 and lt.min() >= floor - 1e-14:
                break
            t *= 0.5
            if t * np.abs(delta).max() < 1e-14:
                raise ConvergenceError(f"solver stalled at residual {history[-1]:.3e}")
        u, F, lam = trial, Ft, lt
        a, b, c = at, bt, ct
        history.append(float(np.abs(F).max()))
        converged = history[-1] <= tol
    out = ScalarField(dom, u)
    bnd = ~solve_mask
    berr = float(np.abs(u[bnd] - phi.values[bnd]).max()) if bnd.any() else 0.0
    return DirichletResult(out, history[-1], berr, steps, converged, history,
                           float(lam.min()), time.perf_counter() - t0,
                           {"tol": tol, "eps": eps, "max_newton": max_newton,
                            "linear_tol": linear_tol, "resolution": dom.resolution[0]})


def manufactured_density(model, domain, fn, pad: int = 1) -> np.ndarray:
    """monge_ampere of ``fn`` at the nodes of ``domain``.

    Evaluated on the same lattice widened by ``pad`` nodes per side, so the
    density is defined up to two nodes from the edge, as the solver needs.
    """
    from .calculus import monge_ampere
    from .grid import build_domain
    from .structure import make_structure

    bbox = [(lo - pad * h, hi + pad * h) for (lo, hi), h in zip(domain.bbox, domain.spacing)]
    big = build_domain(bbox, [n + 2 * pad for n in domain.resolution])
    Jb = make_structure(model, big)
    u = ScalarField(big, fn(*big.mesh()))
    dens = monge_ampere(Jb, u).density
    sl = (slice(pad, -pad),) * DIM
    return np.ascontiguousarray(dens[sl])
