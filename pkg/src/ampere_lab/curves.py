"""Pseudoholomorphic discs and the model curves of the twist family.

A map ``lam`` from the parameter disc (s + i t) is J-holomorphic when
``lam_t = J(lam) lam_s``.  In the complex notation of the standard structure
this reads ``dbar lam = (i/2) (J(lam) - J_st) lam_s``, which the disc solver
iterates with a periodic inverse of dbar.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError
from .structure import AlmostComplexStructure, j_at, standard_j

#: Sup residual below which a disc is accepted.
DISC_TOL = 1e-4


@dataclass
class CurveSample:
    s: np.ndarray
    t: np.ndarray
    points: np.ndarray
    residual: np.ndarray
    iterations: int = 0
    tol: float = DISC_TOL
    history: list = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return float(self.residual.max()) if self.residual.size else 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "t", "x1", "x2", "x3", "x4", "residual"])
            for row in zip(self.s, self.t, *self.points.T, self.residual):
                w.writerow([f"{v:.17g}" for v in row])


def _j_points(J: AlmostComplexStructure, pts: np.ndarray) -> np.ndarray:
    if J.model is not None:
        return j_at(J.model, pts)
    from scipy.interpolate import RegularGridInterpolator

    full = J.full().reshape(J.domain.shape + (16,))
    interp = RegularGridInterpolator(J.domain.axes, full, bounds_error=False, fill_value=None)
    return interp(pts.reshape(-1, 4)).reshape(pts.shape[:-1] + (4, 4))


def _residual(J, lam, lam_s, lam_t) -> np.ndarray:
    Jl = _j_points(J, lam)
    return np.linalg.norm(lam_t - np.einsum("...ij,...j->...i", Jl, lam_s), axis=-1)


def model_curve(J: AlmostComplexStructure, c: complex, m: int = 33) -> CurveSample:
    """The plane {z2 = c}, sampled on the largest centred disc inside the box.

    Derivatives are exact: lam(s, t) = (x0 + R s, y0 + R t, Re c, Im c).
    """
    dom = J.domain
    (a1, b1), (a2, b2), (a3, b3), (a4, b4) = dom.bbox
    c = complex(c)
    if not (a3 <= c.real <= b3 and a4 <= c.imag <= b4):
        raise DomainError("curve outside domain: c lies outside the box")
    x0, y0 = 0.5 * (a1 + b1), 0.5 * (a2 + b2)
    R = 0.5 * min(b1 - a1, b2 - a2)
    g = np.linspace(-1.0, 1.0, m)
    S, T = np.meshgrid(g, g, indexing="ij")
    inside = S ** 2 + T ** 2 <= 1.0
    s, t = S[inside], T[inside]
    lam = np.stack([x0 + R * s, y0 + R * t, np.full_like(s, c.real), np.full_like(s, c.imag)], -1)
    lam_s = np.broadcast_to([R, 0.0, 0.0, 0.0], lam.shape)
    lam_t = np.broadcast_to([0.0, R, 0.0, 0.0], lam.shape)
    return CurveSample(s, t, lam, _residual(J, lam, lam_s, lam_t), 0, 1e-8)


# ----------------------------------------------------------------------------
# discs


def _to_c2(x: np.ndarray) -> np.ndarray:
    return np.stack([x[..., 0] + 1j * x[..., 1], x[..., 2] + 1j * x[..., 3]], -1)


def _to_r4(z: np.ndarray) -> np.ndarray:
    return np.stack([z[..., 0].real, z[..., 0].imag, z[..., 1].real, z[..., 1].imag], -1)


class _Torus:
    """Periodic grid on [-2, 2)^2 holding the unit parameter disc."""

    def __init__(self, m: int):
        self.h = 2.0 / (m - 1)
        self.N = 2 * (m - 1)
        g = -2.0 + self.h * np.arange(self.N)
        self.S, self.T = np.meshgrid(g, g, indexing="ij")
        self.zeta = self.S + 1j * self.T
        self.disc = np.abs(self.zeta) <= 1.0 + 1e-12
        k = 2 * np.pi * np.fft.fftfreq(self.N, d=self.h)
        self.kx, self.ky = np.meshgrid(k, k, indexing="ij")
        self.sym_dbar = 0.5 * (1j * self.kx - self.ky)
        self.centre = (self.N // 2, self.N // 2)

    def dbar_inverse(self, g: np.ndarray):
        """Solution of dbar w = g as (w, w_s, w_t), normalized by w(0) = 0.

        The mean of g is carried by mean * conj(zeta), differentiated
        analytically; the rest is inverted and differentiated spectrally.
        """
        mean = g.mean(axis=(0, 1))
        G = np.fft.fft2(g - mean, axes=(0, 1))
        sym = self.sym_dbar[..., None]
        W = np.where(sym != 0, G / np.where(sym != 0, sym, 1.0), 0.0)
        back = lambda X: np.fft.ifft2(X, axes=(0, 1))
        w = back(W) + mean * self.zeta.conj()[..., None]
        ws = back(1j * self.kx[..., None] * W) + mean
        wt = back(1j * self.ky[..., None] * W) - 1j * mean
        return w - w[self.centre], ws, wt


def jholomorphic_disc(J: AlmostComplexStructure, p, v, r: float, max_iter: int = 200,
                      m: int = 33, tol: float = DISC_TOL) -> CurveSample:
    """J-holomorphic disc through ``p`` tangent to ``v`` with parameter radius ``r``.

    The seed is lam0(zeta) = p + r (s v + t J_st v).  Iterates

        lam = lam0 + T[chi (i/2) (J(lam) - J_st) lam_s],

    where chi is the indicator of the unit disc and T the periodic inverse of
    dbar normalized by T[.](0) = 0.  The correction vanishes at the centre,
    so lam(0) = p throughout.  Derivatives of the periodic part are spectral.
    """
    p = np.asarray(p, float)
    v = np.asarray(v, float)
    if not J.domain.contains(p):
        raise DomainError("disc centre outside the domain")
    nv = np.linalg.norm(v)
    if nv == 0:
        raise DomainError("tangent direction must be nonzero")
    torus = _Torus(m)
    Jst = standard_j()
    seed_s = r * v
    seed_t = r * (Jst @ v)
    seed = p + torus.S[..., None] * seed_s + torus.T[..., None] * seed_t
    chi = torus.disc[..., None]
    history = []

    def assemble(w, ws, wt):
        return seed + _to_r4(w), seed_s + _to_r4(ws), seed_t + _to_r4(wt)

    w = np.zeros(seed.shape[:-1] + (2,), dtype=complex)
    lam, lam_s, lam_t = assemble(w, w, w)
    res = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        try:
            with np.errstate(all="raise"):
                Jl = _j_points(J, lam)
        except (np.linalg.LinAlgError, FloatingPointError):
            raise ConvergenceError("disc iteration diverged: structure degenerate on the disc") from None
        rhs = np.einsum("...ij,...j->...i", Jl - Jst, lam_s)
        g = 0.5j * _to_c2(rhs) * chi
        w_new, ws, wt = torus.dbar_inverse(g)
        step = float(np.abs(w_new - w)[torus.disc].max())
        w = w_new
        lam, lam_s, lam_t = assemble(w, ws, wt)
        if not np.all(np.isfinite(lam)):
            raise ConvergenceError("disc iteration diverged")
        r_field = _residual(J, lam[torus.disc], lam_s[torus.disc], lam_t[torus.disc])
        res = float(r_field.max())
        history.append(res)
        if res <= tol and step <= 1e-12:
            break
        if not np.isfinite(res) or res > 1e6 or (it > 10 and res > 10 * history[0] + 1.0):
            raise ConvergenceError("disc iteration diverged")
    if res > tol:
        raise ConvergenceError("disc iteration diverged")
    s = torus.S[torus.disc]
    t = torus.T[torus.disc]
    return CurveSample(s, t, lam[torus.disc], r_field, it, tol, history)
