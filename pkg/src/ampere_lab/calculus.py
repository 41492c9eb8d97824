"""Bidegree splitting of d, the torsion-corrected wedge product and its relatives.

Every operator works on nodal coefficient arrays and carries a validity mask
that shrinks by one node per centered difference applied.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import forms
from .errors import DomainError
from .grid import DIM, FormField, MeasureField, ScalarField, erode
from .structure import (AlmostComplexStructure, HermitianForm, frame_matrix,
                        unitary_coframe_arrays)


def _scalar(u) -> tuple[np.ndarray, np.ndarray]:
    """Finite values (NEG_INF replaced by 0) and the finiteness mask."""
    vals = u.values if isinstance(u, ScalarField) else np.asarray(u, float)
    ok = np.isfinite(vals)
    return np.where(ok, vals, 0.0), ok


def _d(c: np.ndarray, k: int, dom) -> np.ndarray:
    return forms.exterior_d_coeffs(c, k, dom.spacing)


def _proj(J: AlmostComplexStructure, c: np.ndarray, k: int, bd) -> np.ndarray:
    return J.project(c, k, bd)


# ----------------------------------------------------------------------------
# exterior derivative and its splitting

exterior_d = forms.exterior_d


@dataclass
class SplitDerivative:
    """Bidegree parts of d f; ``parts[(p', q')]`` is a FormField of that bidegree.

    For input bidegree (p, q) the keys are (p+1, q) [del], (p, q+1) [delbar],
    (p+2, q-1) [-theta] and (p-1, q+2) [-thetabar]; parts that cannot exist
    are stored as zero forms.
    """
    source: tuple[int, int]
    parts: dict

    def total(self) -> np.ndarray:
        return sum(p.coeffs for p in self.parts.values())

    def theta(self) -> FormField:
        p, q = self.source
        f = self.parts[(p + 2, q - 1)]
        return FormField(f.domain, f.degree, -f.coeffs, f.bidegree, f.valid)

    def thetabar(self) -> FormField:
        p, q = self.source
        f = self.parts[(p - 1, q + 2)]
        return FormField(f.domain, f.degree, -f.coeffs, f.bidegree, f.valid)


def split_d(J: AlmostComplexStructure, f: FormField) -> SplitDerivative:
    if f.bidegree is None:
        raise DomainError("split_d needs a form of pure bidegree")
    p, q = f.bidegree
    k = f.degree
    df = forms.exterior_d(f)
    parts = {}
    projs = J.projectors(k + 1) if k + 1 <= DIM else {}
    for bd in [(p + 1, q), (p, q + 1), (p + 2, q - 1), (p - 1, q + 2)]:
        if bd in projs:
            c = forms.apply_matrix(projs[bd], df.coeffs)
        else:
            c = np.zeros(df.coeffs.shape, dtype=complex)
        parts[bd] = FormField(f.domain, k + 1, c, bd, df.valid)
    return SplitDerivative((p, q), parts)


def differential(J: AlmostComplexStructure, u) -> dict:
    """du, del u and delbar u as coefficient arrays plus their validity mask."""
    vals, ok = _scalar(u)
    dom = u.domain
    du = _d(vals[..., None], 0, dom)
    return {"d": du, "10": _proj(J, du, 1, (1, 0)), "01": _proj(J, du, 1, (0, 1)),
            "valid": erode(ok, 1)}


def del_form(J, u) -> FormField:
    g = differential(J, u)
    return FormField(u.domain, 1, g["10"], (1, 0), g["valid"])


def delbar_form(J, u) -> FormField:
    g = differential(J, u)
    return FormField(u.domain, 1, g["01"], (0, 1), g["valid"])


def ddbar_coeffs(J: AlmostComplexStructure, u) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of i del delbar u (a real (1,1)-form) and their mask."""
    g = differential(J, u)
    c = 1j * _proj(J, _d(g["01"], 1, u.domain), 2, (1, 1))
    return c, erode(g["valid"], 1)


def i_ddbar(J: AlmostComplexStructure, u: ScalarField) -> FormField:
    c, valid = ddbar_coeffs(J, u)
    return FormField(u.domain, 2, c, (1, 1), valid)


# ----------------------------------------------------------------------------
# wedge products and Monge-Ampere


def _density(c4: np.ndarray) -> np.ndarray:
    return c4[..., 0]


def ma_terms(J: AlmostComplexStructure, u: ScalarField, v: ScalarField,
             variant: bool = False) -> tuple[dict, np.ndarray]:
    """Complex densities of the five terms of the torsion-corrected wedge.

    With ``variant=True`` the fourth term is replaced by its algebraically
    equal alternative ``-thetabar del u ^ theta delbar v``.
    """
    dom = u.domain
    gu = differential(J, u)
    gv = gu if v is u else differential(J, v)
    valid = gu["valid"] & gv["valid"]
    wd = forms.wedge_coeffs
    terms = {}

    # -i del delbar(i del u ^ delbar v) = d Pi^{1,2} d(del u ^ delbar v)
    w = wd(gu["10"], 1, gv["01"], 1)
    terms["ddbar"] = _density(_d(_proj(J, _d(w, 2, dom), 3, (1, 2)), 3, dom))
    del w

    tb_dv = -_proj(J, _d(gv["10"], 1, dom), 2, (0, 2))      # thetabar del v
    t_du = -_proj(J, _d(gu["01"], 1, dom), 2, (2, 0))       # theta delbar u
    terms["del_thetabar"] = _density(_d(wd(gu["10"], 1, tb_dv, 2), 3, dom))
    terms["delbar_theta"] = _density(_d(wd(t_du, 2, gv["01"], 1), 3, dom))
    if variant:
        tb_du = -_proj(J, _d(gu["10"], 1, dom), 2, (0, 2))
        t_dv = -_proj(J, _d(gv["01"], 1, dom), 2, (2, 0))
        terms["theta_thetabar"] = -_density(wd(tb_du, 2, t_dv, 2))
    else:
        tb_du = -_proj(J, _d(gu["10"], 1, dom), 2, (0, 2))
        ttb_du = -_proj(J, _d(tb_du, 2, dom), 3, (2, 1))
        terms["theta_thetabar"] = _density(wd(ttb_du, 3, gv["01"], 1))
    terms["torsion_product"] = -_density(wd(t_du, 2, tb_dv, 2))
    return terms, erode(valid, 2)


def _measure(dom, dens: np.ndarray, valid: np.ndarray) -> MeasureField:
    d = np.where(valid, dens.real, 0.0)
    return MeasureField(dom, d, valid)


def ma_wedge(J, u, v, variant: bool = False) -> MeasureField:
    """(i del delbar u) ^ (i del delbar v) by the five-term formula."""
    terms, valid = ma_terms(J, u, v, variant)
    t = terms
    total = (t["ddbar"] + t["del_thetabar"]) + (t["delbar_theta"] + t["theta_thetabar"]) \
        + t["torsion_product"]
    return _measure(u.domain, total, valid)


def monge_ampere(J, u) -> MeasureField:
    return ma_wedge(J, u, u)


def naive_wedge(J, u, v) -> MeasureField:
    """Pointwise product i del delbar u ^ i del delbar v of discrete (1,1)-forms."""
    cu, vu = ddbar_coeffs(J, u)
    cv, vv = (cu, vu) if v is u else ddbar_coeffs(J, v)
    return _measure(u.domain, _density(forms.wedge_coeffs(cu, 2, cv, 2)), vu & vv)


def torsion_square(J, u) -> MeasureField:
    """density of thetabar del u ^ theta delbar u (nonnegative)."""
    g = differential(J, u)
    dom = u.domain
    tb = -_proj(J, _d(g["10"], 1, dom), 2, (0, 2))
    t = -_proj(J, _d(g["01"], 1, dom), 2, (2, 0))
    return _measure(dom, _density(forms.wedge_coeffs(tb, 2, t, 2)), erode(g["valid"], 1))


def ddc_squared(J, u) -> MeasureField:
    """(dd^c u)^2 = (i del delbar u)^2 + 2 thetabar del u ^ theta delbar u."""
    ma = monge_ampere(J, u)
    ts = torsion_square(J, u)
    return MeasureField(u.domain, ma.density + 2.0 * np.where(ma.valid, ts.density, 0.0), ma.valid)


def grad_square_wedge(J, u: ScalarField, v: ScalarField) -> MeasureField:
    """i del u ^ delbar u ^ i del delbar v via 1/2 (u^2 product) - u (u product)."""
    vals, ok = _scalar(u)
    if not ok.all():
        raise DomainError("grad_square_wedge needs u bounded below")
    shifted = ScalarField(u.domain, vals - vals.min())
    sq = ScalarField(u.domain, shifted.values ** 2)
    a = ma_wedge(J, sq, v)
    b = ma_wedge(J, shifted, v)
    dens = 0.5 * a.density - shifted.values * b.density
    return MeasureField(u.domain, np.where(a.valid, dens, 0.0), a.valid & b.valid)


def pairing_w(J, u, v, w) -> MeasureField:
    """Real part of i del u ^ delbar v ^ i del delbar w."""
    gu = differential(J, u)
    gv = gu if v is u else differential(J, v)
    cw, vw = ddbar_coeffs(J, w)
    a = 1j * forms.wedge_coeffs(gu["10"], 1, gv["01"], 1)
    dens = _density(forms.wedge_coeffs(a, 2, cw, 2))
    return _measure(u.domain, dens, gu["valid"] & gv["valid"] & vw)


def grad_form_density(J, u, omega: HermitianForm) -> MeasureField:
    """density of i del u ^ delbar u ^ omega."""
    g = differential(J, u)
    a = 1j * forms.wedge_coeffs(g["10"], 1, g["01"], 1)
    return _measure(u.domain, _density(forms.wedge_coeffs(a, 2, omega.coeffs, 2)), g["valid"])


def omega_wedge(J, u, omega: HermitianForm) -> MeasureField:
    """density of i del delbar u ^ omega."""
    c, valid = ddbar_coeffs(J, u)
    return _measure(u.domain, _density(forms.wedge_coeffs(c, 2, omega.coeffs, 2)), valid)


def omega_square_density(omega: HermitianForm) -> np.ndarray:
    c = omega.coeffs
    return _density(forms.wedge_coeffs(c, 2, c, 2)).real


# ----------------------------------------------------------------------------
# the torsion constant


def theta_tensor(J: AlmostComplexStructure) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise map eta -> theta(eta) on (0,1)-covectors.

    Returns ``T`` with ``theta(eta) = sum_m eta_m T[..., m, :]`` (2-form
    coefficients) for eta of bidegree (0,1) given in dx coefficients, and the
    validity mask.  theta is tensorial, so it is read off from the constant
    covectors dx^m.
    """
    dom = J.domain
    P01 = np.conj(J.p10())
    cols = []
    for m in range(DIM):
        c = P01[..., :, m]                     # Pi^{0,1} dx^m
        cols.append(-_proj(J, _d(c, 1, dom), 2, (2, 0)))
    T = np.stack(cols, axis=-2)
    valid = erode(np.ones(dom.shape, bool), 1)
    return T, valid


def apply_theta(T: np.ndarray, eta: np.ndarray) -> np.ndarray:
    return np.einsum("...m,...mc->...c", eta, T)


def _herm_eig_max(A: np.ndarray) -> np.ndarray:
    a = A[..., 0, 0].real
    c = A[..., 1, 1].real
    b = A[..., 0, 1]
    return 0.5 * (a + c) + np.sqrt(0.25 * (a - c) ** 2 + np.abs(b) ** 2)


@dataclass
class C0Report:
    value: float
    sampled: float
    directions: int
    field: np.ndarray

    def __float__(self):
        return self.value


def c0_field(J: AlmostComplexStructure, omega: HermitianForm) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pointwise max of density(theta eta ^ conj theta eta) / density(i xi ^ conj xi ^ omega).

    ``xi = conj(eta)`` ranges over (1,0)-covectors.  Both densities are
    Hermitian forms in the frame coefficients, so the maximum is the top
    generalized eigenvalue of a 2x2 pencil.
    """
    T, valid = theta_tensor(J)
    alpha = unitary_coframe_arrays(J.p10(), omega.coeffs)
    abar = alpha.conj()
    th = [apply_theta(T, abar[..., j, :]) for j in range(2)]
    wd = forms.wedge_coeffs
    shape = np.broadcast_shapes(th[0].shape[:-1], alpha.shape[:-2])
    A = np.zeros(shape + (2, 2), dtype=complex)
    B = np.zeros(shape + (2, 2), dtype=complex)
    for j in range(2):
        for k in range(2):
            A[..., j, k] = _density(wd(th[j], 2, th[k].conj(), 2))
            a2 = 1j * wd(alpha[..., j, :], 1, abar[..., k, :], 1)
            B[..., j, k] = _density(wd(a2, 2, np.broadcast_to(omega.coeffs, a2.shape), 2))
    # eta = sum c_j conj(alpha^j), w = conj(c): numerator w^H A w, denominator w^H B^T w
    Bt = np.swapaxes(B, -1, -2)
    L = np.linalg.cholesky(0.5 * (Bt + np.swapaxes(Bt, -1, -2).conj()))
    Li = np.linalg.inv(L)
    C = Li @ A @ np.swapaxes(Li, -1, -2).conj()
    C = 0.5 * (C + np.swapaxes(C, -1, -2).conj())
    ratio = np.maximum(_herm_eig_max(C), 0.0)
    return ratio, valid, alpha


def c0_estimate(J: AlmostComplexStructure, omega: HermitianForm, region=None,
                directions: int = 1000, seed: int = 0) -> C0Report:
    """Sup over the region of the pointwise torsion ratio.

    The exact pointwise maximum is cross-checked by sampling ``directions``
    random (1,0)-covectors at every node of the compact structure array.
    """
    dom = J.domain
    ratio, valid, alpha = c0_field(J, omega)
    full = np.broadcast_to(ratio, dom.shape)
    mask = np.broadcast_to(valid, dom.shape).copy()
    if region is not None:
        mask &= np.asarray(region, bool)
    value = float(full[mask].max()) if mask.any() else 0.0
    # sampled lower bound at the maximizing node and a spread of others
    T, _ = theta_tensor(J)
    rng = np.random.default_rng(seed)
    w = rng.normal(size=(directions, 2)) + 1j * rng.normal(size=(directions, 2))
    idxs = np.argwhere(mask)
    if len(idxs) > 63:
        idxs = idxs[np.linspace(0, len(idxs) - 1, 63).astype(int)]
    if mask.any():
        top = np.unravel_index(np.argmax(np.where(mask, full, -1.0)), dom.shape)
        idxs = np.vstack([np.array(top)[None], idxs])

    def pick(a, idx):
        return a[tuple(i if s > 1 else 0 for i, s in zip(idx, a.shape[:DIM]))]

    best = 0.0
    for idx in idxs:
        a, Tx, om = pick(alpha, idx), pick(T, idx), pick(omega.coeffs, idx)
        xi = w @ a
        te = xi.conj() @ Tx
        num = _density(forms.wedge_coeffs(te, 2, te.conj(), 2)).real
        g2 = 1j * forms.wedge_coeffs(xi, 1, xi.conj(), 1)
        den = _density(forms.wedge_coeffs(g2, 2, np.broadcast_to(om, g2.shape), 2)).real
        best = max(best, float((num / den).max()))
    return C0Report(value, best, directions, full)


def torsion_inequality(J, omega, phi: ScalarField, c0: float, T=None):
    """Pointwise sides of density(theta delbar phi ^ thetabar del phi) <= c0 * density(i del phi ^ delbar phi ^ omega).

    theta is applied tensorially to the discrete delbar phi.
    """
    if T is None:
        T, _ = theta_tensor(J)
    g = differential(J, phi)
    te = apply_theta(T, g["01"])
    lhs = _density(forms.wedge_coeffs(te, 2, te.conj(), 2)).real
    rhs = c0 * grad_form_density(J, phi, omega).density
    return lhs, rhs, g["valid"] & erode(np.ones(phi.domain.shape, bool), 1)


def hermitian_matrix(c2: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Hermitian 2x2 matrix of a real (1,1)-form in a unitary coframe.

    Uses the linearity in the form coefficients so the frame-dependent
    kernel is computed once on the (possibly compact) frame array.
    """
    K = frame_kernels(alpha)
    return np.einsum("...n,...njk->...jk", c2, K)


def frame_kernels(alpha: np.ndarray) -> np.ndarray:
    """K[..., n, j, k] with H = sum_n c_n K_n for 2-form coefficients c."""
    cols = []
    for n in range(6):
        e = np.zeros(6, dtype=complex)
        e[n] = 1.0
        cols.append(frame_matrix(np.broadcast_to(e, alpha.shape[:-2] + (6,)), alpha))
    return np.stack(cols, axis=-3)
