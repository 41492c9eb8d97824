"""Exterior algebra on R^4 in the coordinate basis dx^I, I increasing.

Coefficient arrays carry the component index last; everything before it
broadcasts (grid axes, batches of points).
"""
from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np

from .grid import DIM, FormField, central_diff, erode


@lru_cache(maxsize=None)
def basis(k: int) -> tuple[tuple[int, ...], ...]:
    return tuple(combinations(range(DIM), k))


def n_components(k: int) -> int:
    return comb(DIM, k)


def degree_of(components: int) -> int:
    return {1: 0, 4: 1, 6: 2}.get(components, 0)


def _sort_sign(seq):
    """Sign of the permutation sorting ``seq`` (0 if an index repeats)."""
    if len(set(seq)) < len(seq):
        return 0, None
    s = list(seq)
    sign = 1
    for i in range(len(s)):
        for j in range(len(s) - 1 - i):
            if s[j] > s[j + 1]:
                s[j], s[j + 1] = s[j + 1], s[j]
                sign = -sign
    return sign, tuple(s)


@lru_cache(maxsize=None)
def wedge_table(k: int, l: int):
    """Triples (i, j, out, sign): dx^{I_i} ^ dx^{K_j} = sign dx^{L_out}."""
    out_index = {I: n for n, I in enumerate(basis(k + l))}
    table = []
    for i, I in enumerate(basis(k)):
        for j, K in enumerate(basis(l)):
            sign, L = _sort_sign(I + K)
            if sign:
                table.append((i, j, out_index[L], sign))
    return tuple(table)


@lru_cache(maxsize=None)
def d_table(k: int):
    """Triples (axis, i, out, sign): d(c dx^{I_i}) contains sign * D_axis c dx^{L_out}."""
    out_index = {I: n for n, I in enumerate(basis(k + 1))}
    table = []
    for i, I in enumerate(basis(k)):
        for a in range(DIM):
            sign, L = _sort_sign((a,) + I)
            if sign:
                table.append((a, i, out_index[L], sign))
    return tuple(table)


def wedge_coeffs(a: np.ndarray, k: int, b: np.ndarray, l: int) -> np.ndarray:
    if k + l > DIM:
        shape = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
        return np.zeros(shape + (0,), dtype=np.result_type(a, b))
    shape = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
    out = np.zeros(shape + (n_components(k + l),), dtype=np.result_type(a, b))
    for i, j, o, s in wedge_table(k, l):
        if s > 0:
            out[..., o] += a[..., i] * b[..., j]
        else:
            out[..., o] -= a[..., i] * b[..., j]
    return out


def wedge(a: FormField, b: FormField) -> FormField:
    coeffs = wedge_coeffs(a.coeffs, a.degree, b.coeffs, b.degree)
    bd = None
    if a.bidegree is not None and b.bidegree is not None:
        bd = (a.bidegree[0] + b.bidegree[0], a.bidegree[1] + b.bidegree[1])
    return FormField(a.domain, a.degree + b.degree, coeffs, bd, a.valid & b.valid)


def top_density(f: FormField) -> np.ndarray:
    """Coefficient of dx1^dx2^dx3^dx4 of a 4-form."""
    if f.degree != DIM:
        raise ValueError("density is only defined for 4-forms")
    return f.coeffs[..., 0]


def exterior_d_coeffs(c: np.ndarray, k: int, spacing) -> np.ndarray:
    """Centered-difference exterior derivative of coefficient array ``c``."""
    grid_shape = c.shape[:DIM]
    full = any(grid_shape[a] > 1 for a in range(DIM))
    out_shape = tuple(grid_shape) + (n_components(k + 1),)
    out = np.zeros(out_shape, dtype=np.result_type(c, float))
    if not full:
        return out
    cache = {}
    for a, i, o, s in d_table(k):
        if grid_shape[a] == 1:
            continue
        key = (a, i)
        if key not in cache:
            cache[key] = central_diff(c[..., i], a, spacing[a])
        if s > 0:
            out[..., o] += cache[key]
        else:
            out[..., o] -= cache[key]
    return out


def compound(M: np.ndarray, k: int) -> np.ndarray:
    """k-th compound matrix (all k x k minors) of a batch of 4x4 matrices.

    If covector coefficients transform as ``c -> M c`` then k-form
    coefficients transform as ``compound(M, k) @ c``.
    """
    batch = M.shape[:-2]
    if k == 0:
        return np.ones(batch + (1, 1), dtype=M.dtype)
    if k == 1:
        return M
    B = basis(k)
    C = len(B)
    out = np.empty(batch + (C, C), dtype=M.dtype)
    if k == 2:
        for r, (i0, i1) in enumerate(B):
            for c, (k0, k1) in enumerate(B):
                out[..., r, c] = M[..., i0, k0] * M[..., i1, k1] - M[..., i0, k1] * M[..., i1, k0]
        return out
    for r, I in enumerate(B):
        for c, K in enumerate(B):
            sub = M[..., list(I), :][..., :, list(K)]
            out[..., r, c] = np.linalg.det(sub)
    return out


def apply_matrix(P: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Pointwise ``P @ c`` with broadcasting, skipping identically zero entries."""
    C = P.shape[-1]
    shape = np.broadcast_shapes(P.shape[:-2], c.shape[:-1])
    out = np.zeros(shape + (P.shape[-2],), dtype=np.result_type(P, c))
    for i in range(P.shape[-2]):
        for j in range(C):
            pij = P[..., i, j]
            if not np.any(pij):
                continue
            out[..., i] += pij * c[..., j]
    return out


def bidegree_projectors(P10: np.ndarray, k: int) -> dict:
    """Projectors onto the (p, q) parts of complex k-covectors.

    ``P10`` is the (1,0) projector on covectors; with ``Q = I - P10`` the
    compound of ``P10 + t Q`` is the polynomial ``sum_q t^q Pi^{k-q,q}``,
    whose coefficients are read off by a discrete Fourier transform over the
    (k+1)-th roots of unity.
    """
    eye = np.eye(DIM, dtype=complex)
    Q = eye - P10
    roots = np.exp(2j * np.pi * np.arange(k + 1) / (k + 1))
    values = [compound(P10 + t * Q, k) for t in roots]
    out = {}
    for q in range(k + 1):
        acc = sum(v * (roots[m] ** (-q)) for m, v in enumerate(values)) / (k + 1)
        out[(k - q, q)] = _snap(acc)
    return out


def _snap(a: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    # roots-of-unity sums leave ~1e-17 noise where entries vanish exactly
    re = np.where(np.abs(a.real) < tol, 0.0, a.real)
    im = np.where(np.abs(a.imag) < tol, 0.0, a.imag)
    return re + 1j * im


def constant_form(domain, k: int, vec, bidegree=None) -> FormField:
    c = np.asarray(vec, dtype=complex).reshape((1,) * DIM + (n_components(k),))
    return FormField(domain, k, c, bidegree)


def exterior_d(f: FormField) -> FormField:
    """Exterior derivative by centered differences, defined on the eroded mask."""
    if f.degree >= DIM:
        raise ValueError("exterior derivative of a 4-form is not defined here")
    c = f.coeffs
    if c.shape[:DIM] != f.domain.shape and any(s > 1 for s in c.shape[:DIM]):
        c = np.broadcast_to(c, f.domain.shape + c.shape[-1:])
    out = exterior_d_coeffs(c, f.degree, f.domain.spacing)
    return FormField(f.domain, f.degree + 1, out, None, erode(f.valid, 1))
