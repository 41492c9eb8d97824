"""Envelopes, extremal functions, capacities and comparison diagnostics."""
from __future__ import annotations

import itertools
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from . import envelope_kernel
from .calculus import ddc_squared, monge_ampere, omega_wedge
from .dirichlet import DirichletResult, dirichlet_solve, manufactured_density  # noqa: F401
from .errors import DomainError, HypothesisError
from .grid import DIM, GridDomain, MeasureField, ScalarField, erode, integrate
from .psh import default_tol, eigen_min, hermitian_field, usc_regularize
from .structure import AlmostComplexStructure, HermitianForm, make_hermitian_form

#: Tie tolerance for the strict inequality defining {u < v}.
TIE_TOL = 1e-12
#: Nodes consumed by the Monge-Ampere stencil on each side.
MA_STENCIL = 3


# ----------------------------------------------------------------------------
# direction set


def _lattice_vectors(norm_sq: int = 9) -> list[tuple[int, ...]]:
    vecs = set()
    bases = {9: [(3, 0, 0, 0), (2, 2, 1, 0)]}[norm_sq]
    for base in bases:
        for perm in set(itertools.permutations(base)):
            for signs in itertools.product((1, -1), repeat=DIM):
                vecs.add(tuple(p * s for p, s in zip(perm, signs)))
    return sorted(vecs, reverse=True)


def _as_c2(v) -> np.ndarray:
    z = np.array([v[0] + 1j * v[1], v[2] + 1j * v[3]])
    return z / np.linalg.norm(z)


def select_directions(m: int = 16) -> np.ndarray:
    """``m`` lattice vectors of length 3 whose complex lines are spread out.

    Candidates are the integer vectors of norm 3; they span 26 distinct
    complex lines for the standard structure.  Lines are picked greedily by
    farthest-point selection in the distance ``1 - |<a, b>|^2``, starting from
    the first coordinate axis; ties go to the lexicographically largest vector.
    """
    reps = []
    for v in _lattice_vectors():
        z = _as_c2(v)
        if all(abs(abs(np.vdot(z, _as_c2(w))) - 1.0) > 1e-9 for w in reps):
            reps.append(v)
    if not 1 <= m <= len(reps):
        raise DomainError(f"direction count must be in 1..{len(reps)}")
    chosen = [reps[0]]
    rest = reps[1:]
    while len(chosen) < m:
        def spread(v):
            z = _as_c2(v)
            return min(1.0 - abs(np.vdot(z, _as_c2(w))) ** 2 for w in chosen)
        scores = [round(spread(v), 12) for v in rest]
        k = int(np.argmax(scores))
        chosen.append(rest.pop(k))
    return np.array(chosen, dtype=np.int64)


def rotated_offsets(J: AlmostComplexStructure, offsets: np.ndarray) -> np.ndarray:
    """J(x) applied to each lattice offset, in index units, compact shape."""
    h = np.array(J.domain.spacing)
    phys = offsets * h                                 # (m, 4)
    rot = np.einsum("...ij,dj->...di", J.J, phys) / h
    snapped = np.round(rot)
    rot = np.where(np.abs(rot - snapped) < 1e-12, snapped, rot)
    return np.ascontiguousarray(rot)


# ----------------------------------------------------------------------------
# envelopes


@dataclass
class EnvelopeResult:
    u: ScalarField
    iterations: int
    final_update: float
    psh_defect: float
    converged: bool
    history: list = field(default_factory=list)
    backend: str = ""
    seconds: float = 0.0


def _colored_nodes(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    parity = sum(np.indices(mask.shape)) % 2
    flat = np.flatnonzero(mask.ravel())
    par = parity.ravel()[flat]
    return flat[par == 0].astype(np.int64), flat[par == 1].astype(np.int64)


def psh_envelope(J: AlmostComplexStructure, obstacle: ScalarField, omega_mask=None,
                 stop_tol: float = 1e-6, max_sweeps: int = 5000, directions: int = 16,
                 backend: str | None = None, hermitian: HermitianForm | None = None,
                 compute_defect: bool = True, offsets: np.ndarray | None = None) -> EnvelopeResult:
    """Largest discretely psh function below ``obstacle`` on the masked region.

    Nodes outside ``omega_mask`` keep the obstacle value (boundary data).
    Each sweep updates the two parity classes in turn, every class from a
    snapshot of the previous state.
    """
    dom = obstacle.domain
    region = dom.interior_mask if omega_mask is None else (np.asarray(omega_mask, bool) & ~dom.boundary_band)
    obst = np.ascontiguousarray(obstacle.values, dtype=float)
    if not np.isfinite(obst).all():
        raise DomainError("obstacle must be bounded")
    if offsets is None:
        offsets = select_directions(directions)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    jofs = rotated_offsets(J, offsets)
    red, black = _colored_nodes(region)
    u = obst.copy()
    history = []
    converged = False
    t0 = time.perf_counter()
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        change = 0.0
        for nodes in (red, black):
            snap = u.copy()
            change = max(change, envelope_kernel.half_sweep(u, snap, obst, nodes, offsets, jofs,
                                                             backend))
        history.append(change)
        if change <= stop_tol:
            converged = True
            break
    out = ScalarField(dom, u)
    defect = float("nan")
    if compute_defect:
        omega = hermitian if hermitian is not None else make_hermitian_form(J)
        a, b, c, valid = hermitian_field(J, omega, out)
        lam = eigen_min(a, b, c)
        m = valid & erode(region, 1)
        defect = float(lam[m].min()) if m.any() else 0.0
    return EnvelopeResult(out, sweeps, history[-1] if history else 0.0, defect, converged,
                          history, backend or envelope_kernel.BACKEND,
                          time.perf_counter() - t0)


def extremal_function(J, E, omega_mask, stop_tol: float = 1e-6, max_sweeps: int = 5000,
                      directions: int = 16, regularize: bool = True, **kw) -> EnvelopeResult:
    """u*_E: envelope with obstacle -1 on E and 0 elsewhere, then usc-regularized."""
    dom = J.domain
    E = np.asarray(E, bool)
    omega_mask = np.asarray(omega_mask, bool)
    if not E.any():
        zero = ScalarField(dom, np.zeros(dom.shape))
        return EnvelopeResult(zero, 0, 0.0, 0.0, True)
    if (E & ~(omega_mask & dom.interior_mask)).any():
        raise DomainError("E must lie inside the interior of the domain")
    obst = ScalarField(dom, np.where(E, -1.0, 0.0))
    res = psh_envelope(J, obst, omega_mask, stop_tol, max_sweeps, directions, **kw)
    if regularize:
        res.u = usc_regularize(res.u, region=erode(omega_mask & dom.interior_mask, 2))
    return res


# ----------------------------------------------------------------------------
# capacities


def capacity_region(omega_mask: np.ndarray) -> np.ndarray:
    """Nodes whose Monge-Ampere stencil stays inside the domain."""
    return erode(np.asarray(omega_mask, bool), MA_STENCIL)


@dataclass
class CapacityEstimate:
    envelope_value: float
    direct_lower_bound: float
    slack: float
    resolution: int
    mask_E: np.ndarray = field(repr=False, default=None)
    mask_omega: np.ndarray = field(repr=False, default=None)
    sweeps: int = 0
    converged: bool = True
    best_candidate: str = ""
    envelope: EnvelopeResult | None = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {"envelope_value": self.envelope_value,
                "direct_lower_bound": self.direct_lower_bound, "slack": self.slack,
                "resolution": self.resolution, "sweeps": self.sweeps,
                "converged": self.converged, "best_candidate": self.best_candidate,
                "volume_element": "coordinate"}


def candidate_family(dom: GridDomain, E: np.ndarray, omega_mask: np.ndarray, size: int = 12):
    """Model psh functions with values in [-1, 0] on the domain.

    Each candidate is either ``max(A (|x - a|^2 - R^2), -1)`` or
    ``max(log(|z - a| / R) / L, -1)`` with ``R`` at least the distance from
    the centre ``a`` to every domain node, so that it is <= 0 there.  Centres
    run over the centroid of E; scales over a fixed geometric ladder.
    """
    X = dom.coordinates()
    pts = X[E]
    a = pts.mean(axis=0)
    R = float(np.sqrt(((X[omega_mask] - a) ** 2).sum(-1)).max())
    dist = np.sqrt(((X - a) ** 2).sum(-1))
    rE = float(np.sqrt(((pts - a) ** 2).sum(-1)).max())
    out = []
    n_quad = max(1, size // 3)
    for k in range(n_quad):
        A = (1.0 / R ** 2) * 2.0 ** (k - n_quad + 1)
        out.append((f"quadratic A={A:.6g}", np.maximum(A * (dist ** 2 - R ** 2), -1.0)))
    n_log = size - n_quad
    for k in range(n_log):
        # -1 level set at radius rho in (0, rE]
        rho = max(rE, dom.h) * (k + 1) / n_log
        L = np.log(R / rho)
        if L <= 0:
            continue
        with np.errstate(divide="ignore"):
            v = np.log(np.maximum(dist, 1e-300) / R) / L
        out.append((f"log rho={rho:.6g}", np.maximum(v, -1.0)))
    return out


def _direct_bound(J, E, omega_mask, integrand, size):
    dom = J.domain
    best, name = 0.0, ""
    region = capacity_region(omega_mask) & E
    for label, vals in candidate_family(dom, E, omega_mask, size):
        m = integrand(ScalarField(dom, vals))
        val = integrate(m, region & m.valid)
        if val > best:
            best, name = val, label
    return best, name


def capacity(J, E, omega_mask, stop_tol: float = 1e-6, max_sweeps: int = 5000,
             directions: int = 16, candidates: int = 12, extremal: EnvelopeResult | None = None,
             **kw) -> CapacityEstimate:
    """cap(E, Omega) as the Monge-Ampere mass of u*_E, with a direct lower bound."""
    dom = J.domain
    E = np.asarray(E, bool)
    omega_mask = np.asarray(omega_mask, bool)
    if not E.any():
        return CapacityEstimate(0.0, 0.0, 0.0, dom.resolution[0], E, omega_mask)
    res = extremal or extremal_function(J, E, omega_mask, stop_tol, max_sweeps, directions, **kw)
    ma = monge_ampere(J, res.u)
    region = capacity_region(omega_mask) & ma.valid
    value = integrate(ma, region)
    direct, name = _direct_bound(J, E, omega_mask, lambda v: monge_ampere(J, v), candidates)
    slack = max(0.0, direct / value - 1.0) if value > 0 else 0.0
    return CapacityEstimate(value, direct, slack, dom.resolution[0], E, omega_mask,
                            res.iterations, res.converged, name, res)


def cap_omega(J, omega: HermitianForm, E, omega_mask, stop_tol: float = 1e-6,
              max_sweeps: int = 5000, directions: int = 16, candidates: int = 12,
              extremal: EnvelopeResult | None = None, **kw) -> CapacityEstimate:
    """cap_omega(E, Omega): mass of i del delbar u*_E ^ omega, with a direct lower bound."""
    dom = J.domain
    E = np.asarray(E, bool)
    omega_mask = np.asarray(omega_mask, bool)
    if not E.any():
        return CapacityEstimate(0.0, 0.0, 0.0, dom.resolution[0], E, omega_mask)
    res = extremal or extremal_function(J, E, omega_mask, stop_tol, max_sweeps, directions, **kw)
    m = omega_wedge(J, res.u, omega)
    region = capacity_region(omega_mask) & m.valid
    value = integrate(m, region)
    direct, name = _direct_bound(J, E, omega_mask, lambda v: omega_wedge(J, v, omega), candidates)
    slack = max(0.0, direct / value - 1.0) if value > 0 else 0.0
    return CapacityEstimate(value, direct, slack, dom.resolution[0], E, omega_mask,
                            res.iterations, res.converged, name, res)


def fattening(dom: GridDomain, E: np.ndarray, r: float) -> np.ndarray:
    """Open r-neighbourhood of the node set E (Euclidean distance)."""
    if r < dom.h:
        raise DomainError("fattening under-resolved: radius below the grid spacing")
    dist = ndimage.distance_transform_edt(~np.asarray(E, bool), sampling=dom.spacing)
    return dist < r


@dataclass
class OuterCapacity:
    radii: list
    values: list
    slope: float
    intercept: float
    limit: float

    def to_dict(self) -> dict:
        return asdict(self)


def outer_capacity(J, E, omega_mask, radii, distance: np.ndarray | None = None,
                   **kw) -> OuterCapacity:
    """Capacities of open r-fattenings of E for decreasing radii.

    ``distance`` replaces the lattice distance transform by a given distance
    field (for sets known in closed form); ``E`` is then unused.  The trend
    is summarized by the fit log cap = intercept + slope * log r;
    a positive slope extrapolates to 0 as r -> 0, otherwise to the last value.
    """
    radii = [float(r) for r in radii]
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise DomainError("radii must be strictly decreasing")
    dom = J.domain
    inner = capacity_region(omega_mask)
    vals = []
    for r in radii:
        if distance is None:
            Er = fattening(dom, E, r)
        else:
            if r < dom.h:
                raise DomainError("fattening under-resolved: radius below the grid spacing")
            Er = np.asarray(distance) < r
        Er = Er & inner & dom.interior_mask
        vals.append(capacity(J, Er, omega_mask, **kw).envelope_value)
    pos = [(np.log(r), np.log(v)) for r, v in zip(radii, vals) if v > 0]
    if len(pos) >= 2:
        x, y = np.array(pos).T
        slope, icpt = np.polyfit(x, y, 1)
    else:
        slope, icpt = 0.0, float("nan")
    limit = 0.0 if slope > 0 else float(vals[-1])
    return OuterCapacity(radii, vals, float(slope), float(icpt), limit)


def mass_fraction(m: MeasureField, near: np.ndarray, region: np.ndarray) -> float:
    """Share of the positive part of ``m`` over ``region`` carried by ``near``."""
    region = np.asarray(region, bool) & m.valid
    pos = np.where(region, np.maximum(m.density, 0.0), 0.0)
    w = m.domain.weights()
    total = float((pos * w).sum())
    if total <= 0:
        return 0.0
    return float((pos * w)[np.asarray(near, bool) & region].sum()) / total


# ----------------------------------------------------------------------------
# comparison principle and convergence in capacity


def boundary_shell(omega_mask: np.ndarray, width: int = MA_STENCIL) -> np.ndarray:
    omega_mask = np.asarray(omega_mask, bool)
    return omega_mask & ~erode(omega_mask, width)


def comparison_check(J, u: ScalarField, v: ScalarField, omega_mask) -> dict:
    """Both sides of the comparison inequality on {u < v}.

    lhs = int_{u<v} (dd^c v)^2, rhs = int_{u<v} (dd^c u)^2; requires u >= v on
    the boundary shell of the domain.
    """
    shell = boundary_shell(omega_mask)
    if (u.values[shell] < v.values[shell] - TIE_TOL).any():
        raise HypothesisError("hypothesis fails: u >= v is violated near the boundary")
    mu = ddc_squared(J, u)
    mv = ddc_squared(J, v)
    region = capacity_region(omega_mask) & mu.valid & mv.valid
    mask = region & (u.values < v.values - TIE_TOL)
    lhs = integrate(mv, mask)
    rhs = integrate(mu, mask)
    total = integrate(mu, region) + integrate(mv, region)
    return {"lhs": lhs, "rhs": rhs, "mask_nodes": int(mask.sum()), "total_mass": total}


def convergence_in_capacity(J, family, u: ScalarField, t: float, K, omega_mask,
                            mono_tol: float = 1e-9, **kw) -> list:
    """cap(K & {|u - u_k| > t}) for a family decreasing to u."""
    prev = None
    for k, uk in enumerate(family):
        if (uk.values < u.values - mono_tol).any():
            raise HypothesisError(f"family member {k} lies below the limit")
        if prev is not None and (uk.values > prev.values + mono_tol).any():
            raise HypothesisError("family is not decreasing")
        prev = uk
    K = np.asarray(K, bool)
    out = []
    for uk in family:
        S = K & (np.abs(uk.values - u.values) > t)
        out.append(capacity(J, S, omega_mask, **kw).envelope_value if S.any() else 0.0)
    return out


def write_report(obj, path) -> None:
    """JSON report with tolerances and resolution embedded."""
    data = obj.to_dict() if hasattr(obj, "to_dict") else dict(obj)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=float)
