"""Plurisubharmonicity tests, smoothing and upper semicontinuous regularization."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .calculus import ddbar_coeffs, frame_kernels
from .errors import HypothesisError
from .grid import DIM, ScalarField, erode
from .structure import AlmostComplexStructure, HermitianForm, unitary_coframe_arrays


@dataclass
class PshReport:
    is_psh: bool
    min_eigenvalue_field: ScalarField
    violating_points: list
    tol: float
    min_eigenvalue: float


def default_tol(u: ScalarField) -> float:
    vals = u.values[np.isfinite(u.values)]
    sup = float(np.abs(vals).max()) if vals.size else 0.0
    return 3.0 * u.domain.h * (1.0 + sup)


def hermitian_field(J: AlmostComplexStructure, omega: HermitianForm, u: ScalarField):
    """Entries (a, b, c) of the matrix [[a, b], [conj b, c]] of i del delbar u
    in the unitary coframe, plus the validity mask."""
    coeffs, valid = ddbar_coeffs(J, u)
    alpha = unitary_coframe_arrays(J.p10(), omega.coeffs)
    K = frame_kernels(alpha)
    a = np.zeros(u.domain.shape)
    c = np.zeros(u.domain.shape)
    b = np.zeros(u.domain.shape, dtype=complex)
    for n in range(6):
        cn = coeffs[..., n].real
        a += cn * K[..., n, 0, 0].real
        c += cn * K[..., n, 1, 1].real
        b += cn * K[..., n, 0, 1]
    return a, b, c, valid


def eigen_min(a, b, c):
    return 0.5 * (a + c) - np.sqrt(0.25 * (a - c) ** 2 + np.abs(b) ** 2)


def is_psh(J, omega, u: ScalarField, tol: float | None = None, region=None) -> PshReport:
    """Positivity of i del delbar u on the interior (or on ``region``)."""
    if tol is None:
        tol = default_tol(u)
    a, b, c, valid = hermitian_field(J, omega, u)
    lam = eigen_min(a, b, c)
    mask = valid & u.domain.interior_mask
    if region is not None:
        mask &= np.asarray(region, bool)
    lam = np.where(mask, lam, np.inf)
    bad = np.argwhere(lam < -tol)
    field = ScalarField.__new__(ScalarField)
    field.domain, field.values = u.domain, np.where(mask, lam, 0.0)
    lmin = float(lam[mask].min()) if mask.any() else 0.0
    return PshReport(len(bad) == 0, field, [tuple(int(i) for i in p) for p in bad], tol, lmin)


def regularize(J, omega, u: ScalarField, eps: float, check: bool = True,
               tol: float | None = None) -> ScalarField:
    """Gaussian mollification at scale ``eps`` plus ``eps * |x|^2``.

    The kernel is a product Gaussian truncated at four widths and normalized
    on the lattice; values beyond the box are the constant extension.
    -inf entries are replaced by the smallest finite value before smoothing.
    """
    if check and not is_psh(J, omega, u, tol).is_psh:
        raise HypothesisError("input not psh")
    vals = u.values
    finite = np.isfinite(vals)
    if not finite.all():
        vals = np.where(finite, vals, vals[finite].min())
    sigma = [eps / h for h in u.domain.spacing]
    sm = ndimage.gaussian_filter(vals, sigma=sigma, mode="nearest", truncate=4.0)
    sq = sum(x * x for x in u.domain.mesh())
    return ScalarField(u.domain, sm + eps * sq)


# ----------------------------------------------------------------------------
# upper semicontinuous regularization


def _shift(a: np.ndarray, axis: int, k: int) -> np.ndarray:
    """a(x + k e_axis) with edge replication."""
    n = a.shape[axis]
    idx = np.clip(np.arange(n) + k, 0, n - 1)
    return np.take(a, idx, axis=axis)


def _neighbor_max(a: np.ndarray) -> np.ndarray:
    """Max over the 80 lattice neighbours (edge nodes reuse replicated values)."""
    out = np.full(a.shape, -np.inf)
    for off in np.ndindex(3, 3, 3, 3):
        o = tuple(k - 1 for k in off)
        if o == (0, 0, 0, 0):
            continue
        s = a
        for ax, k in enumerate(o):
            if k:
                s = _shift(s, ax, k)
        out = np.maximum(out, s)
    return out


def usc_regularize(u: ScalarField, tol: float = 1e-9, max_rounds: int = 20,
                   region=None, min_depth: float | None = None) -> ScalarField:
    """Grid surrogate of the essential upper limit.

    A node is treated as a modification on a null set, and corrected, when it
    is either
      * an isolated spike: above all 80 neighbours and one node thin along
        every axis, it drops to the neighbour maximum; or
      * in a thin dip along some axis: both axis neighbours exceed u and,
        with m1, m2 the means of the axis neighbours at distance one and
        two, the depths d1 = m1 - u > ``min_depth`` and d2 = m2 - u satisfy
        d2 < 1.5 d1 (smooth convex profiles give d2 close to 4 d1, kinks
        2 d1, one-node dips d1); it rises to m1.
    Spikes are corrected before dips are detected.  -inf nodes are kept
    (poles are genuine).  Only nodes of ``region`` (default: all nodes two
    steps from the box faces) change; pass the domain eroded by two so that
    thin rims of a curved domain are not read as dips.  Rounds repeat until
    nothing changes.

    ``min_depth`` defaults to a tenth of the oscillation of the finite
    values: a discrete envelope is rough below that scale, and psh functions
    need not be convex along real lines.
    """
    vals = np.array(u.values, dtype=float)
    if region is None:
        region = erode(np.ones(vals.shape, bool), 2)
    region = np.asarray(region, bool)
    if min_depth is None:
        fin = vals[np.isfinite(vals)]
        min_depth = 0.1 * float(fin.max() - fin.min()) if fin.size else 0.0
    depth = max(tol, min_depth)
    for _ in range(max_rounds):
        old = vals
        with np.errstate(invalid="ignore"):
            nmax = _neighbor_max(vals)
            spike = region & (vals > nmax + tol)
            for ax in range(DIM):
                s1 = vals - 0.5 * (_shift(vals, ax, 1) + _shift(vals, ax, -1))
                s2 = vals - 0.5 * (_shift(vals, ax, 2) + _shift(vals, ax, -2))
                spike &= (s1 > depth) & (s2 < 1.5 * s1)
            # spikes first, so their neighbours are not mistaken for dips
            vals = np.where(spike, nmax, vals)
            raise_to = np.full(vals.shape, -np.inf)
            for ax in range(DIM):
                up, dn = _shift(vals, ax, 1), _shift(vals, ax, -1)
                m1 = 0.5 * (up + dn)
                m2 = 0.5 * (_shift(vals, ax, 2) + _shift(vals, ax, -2))
                d1 = m1 - vals
                d2 = m2 - vals
                two_sided = np.minimum(up, dn) - vals > tol
                dip = region & two_sided & (d1 > depth) & (d2 < 1.5 * d1) & np.isfinite(d1)
                raise_to = np.where(dip, np.maximum(raise_to, m1), raise_to)
        vals = np.where(raise_to > vals, raise_to, vals)
        if np.array_equal(vals, old):
            break
    out = ScalarField.__new__(ScalarField)
    out.domain, out.values = u.domain, vals
    return out


# ----------------------------------------------------------------------------
# disc cross-check


def disc_subaverage_check(J: AlmostComplexStructure, u: ScalarField, n_discs: int = 20,
                          radius: float | None = None, samples: int = 32, seed: int = 0,
                          region=None) -> dict:
    """Compare u at random centres with its mean over small J-circles.

    The circle through ``x`` in direction ``xi`` is ``x + r(cos t xi + sin t J xi)``
    (first-order disc); values are read by multilinear interpolation.
    """
    from scipy.interpolate import RegularGridInterpolator

    dom = u.domain
    r = radius if radius is not None else 2.0 * dom.h
    mask = dom.interior_mask if region is None else (dom.interior_mask & np.asarray(region, bool))
    mask = erode(mask, int(np.ceil(r / min(dom.spacing))) + 1)
    pts = np.argwhere(mask)
    rng = np.random.default_rng(seed)
    interp = RegularGridInterpolator(dom.axes, u.values)
    gaps = []
    if len(pts) == 0:
        return {"min_gap": 0.0, "gaps": []}
    for idx in pts[rng.integers(0, len(pts), n_discs)]:
        x = np.array([dom.axes[a][idx[a]] for a in range(DIM)])
        xi = rng.normal(size=4)
        xi /= np.linalg.norm(xi)
        Jx = J.at(x)
        t = 2 * np.pi * np.arange(samples) / samples
        ring = x + r * (np.cos(t)[:, None] * xi + np.sin(t)[:, None] * (Jx @ xi))
        gaps.append(float(interp(ring).mean() - interp(x[None])[0]))
    return {"min_gap": min(gaps), "gaps": gaps, "radius": r}
