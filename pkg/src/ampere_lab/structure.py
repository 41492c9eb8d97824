"""Almost complex structures on the lattice.

Covector coefficients are column vectors in the ``dx`` basis, so ``J`` acts on
them by its transpose and the (1,0) projector is ``(I - i J^T) / 2``.

Model structures are stored in compact broadcast form: a twist structure only
depends on ``(x1, x2)``, so its tensor has shape ``(n1, n2, 1, 1, 4, 4)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import forms
from .errors import StructureError
from .grid import DIM, FormField, GridDomain, central_diff

TOL_ALGEBRA = 1e-10
#: Twist coframes with |rho z1| above this are treated as degenerate.
TWIST_LIMIT = 0.95

_D = np.diag([1j, 1j, -1j, -1j])


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "standard"
    rho_twist: float = 0.0

    def __post_init__(self):
        if self.kind not in ("standard", "twist"):
            raise StructureError(f"unknown model kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "rho_twist": float(self.rho_twist)}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(d.get("kind", "standard"), float(d.get("rho_twist", 0.0)))


def standard_j() -> np.ndarray:
    """J on coordinate vectors with J d/dx1 = d/dx2, J d/dx3 = d/dx4."""
    return np.array([[0.0, -1.0, 0.0, 0.0],
                     [1.0, 0.0, 0.0, 0.0],
                     [0.0, 0.0, 0.0, -1.0],
                     [0.0, 0.0, 1.0, 0.0]])


def twist_coframe(rho: float, x1, x2) -> np.ndarray:
    """Rows alpha1, alpha2 of the twist (1,0) coframe, shape ``(..., 2, 4)``.

    alpha1 = dz1, alpha2 = dz2 + rho * conj(z1) * conj(dz2).
    """
    x1, x2 = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float))
    zb = rho * (x1 - 1j * x2)
    out = np.zeros(x1.shape + (2, 4), dtype=complex)
    out[..., 0, 0] = 1.0
    out[..., 0, 1] = 1j
    out[..., 1, 2] = 1.0 + zb
    out[..., 1, 3] = 1j - 1j * zb
    return out


def j_from_coframe(alpha: np.ndarray) -> np.ndarray:
    """The real J whose +i eigen-covectors are the rows of ``alpha``."""
    A = np.concatenate([alpha, alpha.conj()], axis=-2)
    J = np.linalg.solve(A, _D @ A)
    return J.real.copy()


def j_at(model: ModelSpec, points) -> np.ndarray:
    """Closed-form J at arbitrary points ``(..., 4)``."""
    pts = np.asarray(points, dtype=float)
    if model.kind == "standard" or model.rho_twist == 0.0:
        return np.broadcast_to(standard_j(), pts.shape[:-1] + (4, 4)).copy()
    return j_from_coframe(twist_coframe(model.rho_twist, pts[..., 0], pts[..., 1]))


class AlmostComplexStructure:
    """Per-node tensor J (possibly in compact broadcast form) on a domain."""

    def __init__(self, domain: GridDomain, J: np.ndarray, model: ModelSpec | None = None):
        J = np.asarray(J, dtype=float)
        if J.shape[-2:] != (4, 4) or J.ndim != DIM + 2:
            raise StructureError("J must have shape grid + (4, 4)")
        np.broadcast_shapes(J.shape[:DIM], domain.shape)
        self.domain = domain
        self.J = J
        self.model = model
        self._proj = {}

    @property
    def is_standard(self) -> bool:
        return self.model is not None and (self.model.kind == "standard" or self.model.rho_twist == 0.0)

    def p10(self) -> np.ndarray:
        Jt = np.swapaxes(self.J, -1, -2)
        return (np.eye(4) - 1j * Jt) / 2.0

    def projectors(self, k: int) -> dict:
        if k not in self._proj:
            self._proj[k] = forms.bidegree_projectors(self.p10(), k)
        return self._proj[k]

    def project(self, f_coeffs: np.ndarray, k: int, bidegree) -> np.ndarray:
        return forms.apply_matrix(self.projectors(k)[tuple(bidegree)], f_coeffs)

    def full(self) -> np.ndarray:
        return np.broadcast_to(self.J, self.domain.shape + (4, 4))

    def at(self, point) -> np.ndarray:
        """J at a point: closed form for models, nearest node otherwise."""
        if self.model is not None:
            return j_at(self.model, np.asarray(point, float))
        idx = self.domain.index_of(point)
        idx = tuple(i if s > 1 else 0 for i, s in zip(idx, self.J.shape[:DIM]))
        return self.J[idx]

    def export(self):
        """J as a 16-component scalar field (row-major entries)."""
        from .grid import ScalarField
        return ScalarField(self.domain, np.array(self.full().reshape(self.domain.shape + (16,))))


def make_structure(model: ModelSpec, domain: GridDomain) -> AlmostComplexStructure:
    if model.kind == "standard" or model.rho_twist == 0.0:
        J = standard_j().reshape((1,) * DIM + (4, 4))
        return AlmostComplexStructure(domain, J, model)
    x1 = domain.axes[0].reshape(-1, 1)
    x2 = domain.axes[1].reshape(1, -1)
    if np.max(np.abs(model.rho_twist) * np.hypot(x1, x2)) >= TWIST_LIMIT:
        raise StructureError(
            f"twist coframe degenerates inside the box: need |rho_twist * z1| < {TWIST_LIMIT}")
    J = j_from_coframe(twist_coframe(model.rho_twist, x1, x2))
    return AlmostComplexStructure(domain, J[:, :, None, None], model)


def validate_structure(J) -> dict:
    arr = J.J if isinstance(J, AlmostComplexStructure) else np.asarray(J, float)
    defect = arr @ arr + np.eye(4)
    d = float(np.sqrt((defect ** 2).sum(axis=(-1, -2))).max())
    return {"max_defect": d, "is_valid": bool(d <= TOL_ALGEBRA)}


def bidegree_projector(J: AlmostComplexStructure, x, k: int) -> dict:
    Jx = J.at(x)
    if not validate_structure(Jx)["is_valid"]:
        raise StructureError("J is not an almost complex structure at this point")
    return forms.bidegree_projectors((np.eye(4) - 1j * Jx.T) / 2.0, k)


@dataclass
class NijenhuisField:
    domain: GridDomain
    N: np.ndarray          # (..., 4, 4, 4): N[..., :, a, b] = N(e_a, e_b)
    magnitude: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.magnitude is None:
            self.magnitude = np.sqrt((self.N ** 2).sum(axis=(-1, -2, -3)))


def nijenhuis(J: AlmostComplexStructure) -> NijenhuisField:
    """N(X,Y) = [JX,JY] - [X,Y] - J[JX,Y] - J[X,JY] on coordinate fields."""
    arr = J.J
    h = J.domain.spacing
    dJ = [central_diff(arr, c, h[c]) for c in range(DIM)]   # dJ[c][..., i, a] = d_c J_ia
    dJ = np.stack(dJ, axis=-3)                               # (..., c, i, a)
    # [Je_a, Je_b]_i = sum_c J_ca d_c J_ib - J_cb d_c J_ia
    t = np.einsum("...ca,...cib->...iab", arr, dJ)
    bracket = t - np.swapaxes(t, -1, -2)
    # J[Je_a, e_b] = -J d_b J e_a ;  J[e_a, Je_b] = J d_a J e_b
    dJe = np.einsum("...bia->...iab", dJ)                   # d_b J_ia
    s = np.einsum("...ij,...jab->...iab", arr, dJe)
    N = bracket + s - np.swapaxes(s, -1, -2)
    # restrict the magnitude to nodes where the stencil is inside the box
    N = np.array(N)
    for ax in range(DIM):
        if N.shape[ax] > 1:
            sl = [slice(None)] * N.ndim
            sl[ax] = [0, -1]
            N[tuple(sl)] = 0.0
    return NijenhuisField(J.domain, N)


# ----------------------------------------------------------------------------
# hermitian forms and unitary frames


def _antisym(c2: np.ndarray) -> np.ndarray:
    """Antisymmetric matrix of a 2-form from its 6 coefficients."""
    W = np.zeros(c2.shape[:-1] + (4, 4), dtype=c2.dtype)
    for n, (a, b) in enumerate(forms.basis(2)):
        W[..., a, b] = c2[..., n]
        W[..., b, a] = -c2[..., n]
    return W


def _coeffs2(W: np.ndarray) -> np.ndarray:
    return np.stack([W[..., a, b] for a, b in forms.basis(2)], axis=-1)


def frame_matrix(c2: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Matrix G with beta = i sum G_jk alpha^j ^ conj(alpha^k) for a (1,1)-form beta.

    ``c2`` holds the dx-coefficients of beta, ``alpha`` the (1,0) frame rows.
    """
    A = np.concatenate([alpha, alpha.conj()], axis=-2)
    E = np.linalg.inv(A)
    B = np.swapaxes(E, -1, -2) @ _antisym(c2) @ E
    return -1j * B[..., :2, 2:]


@dataclass
class HermitianForm:
    domain: GridDomain
    omega: FormField
    min_positivity: float = 0.0

    @property
    def coeffs(self) -> np.ndarray:
        return self.omega.coeffs


def _positivity(J: np.ndarray, W: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """min over directions of omega(xi, J xi) / |xi|^2, per node."""
    Jxi = np.einsum("...ij,dj->...di", J, dirs)
    val = np.einsum("di,...ij,...dj->...d", dirs, W, Jxi)
    return val.min(axis=-1)


def sphere_directions(m: int, seed: int = 0) -> np.ndarray:
    v = np.random.default_rng(seed).normal(size=(m, 4))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def make_hermitian_form(J: AlmostComplexStructure, spec: str = "euclidean-compatible") -> HermitianForm:
    """omega(X, Y) = (<JX, Y> - <X, JY>) / 2, projected to bidegree (1,1)."""
    if spec != "euclidean-compatible":
        raise StructureError(f"unknown hermitian form spec {spec!r}")
    arr = J.J
    W = 0.5 * (np.swapaxes(arr, -1, -2) - arr)
    c = J.project(_coeffs2(W).astype(complex), 2, (1, 1))
    c = c.real.astype(complex)
    Wp = _antisym(c.real)
    pos = _positivity(arr, Wp, sphere_directions(60))
    minpos = float(pos.min())
    if not minpos > 0:
        raise StructureError("hermitian form is not positive")
    omega = FormField(J.domain, 2, c, (1, 1))
    return HermitianForm(J.domain, omega, minpos)


def unitary_coframe_arrays(p10: np.ndarray, omega_c2: np.ndarray) -> np.ndarray:
    """(1,0) coframe rows alpha with omega = i sum alpha^j ^ conj(alpha^j).

    Candidates are ``Pi^{1,0} dx^k``; the first frame vector is the one of
    largest norm, the second the largest Gram-Schmidt residual of the rest.
    """
    shape = np.broadcast_shapes(p10.shape[:-2], omega_c2.shape[:-1])
    P = np.broadcast_to(p10, shape + (4, 4))
    cand = np.swapaxes(P, -1, -2)                     # cand[..., k, :] = Pi^{1,0} dx^k
    norms = np.linalg.norm(cand, axis=-1)
    i0 = np.argmax(norms, axis=-1)[..., None, None]
    b1 = np.take_along_axis(cand, i0, axis=-2)[..., 0, :]
    u1 = b1 / np.linalg.norm(b1, axis=-1, keepdims=True)
    proj = np.einsum("...j,...kj->...k", u1.conj(), cand)
    resid = cand - proj[..., None] * u1[..., None, :]
    i1 = np.argmax(np.linalg.norm(resid, axis=-1), axis=-1)[..., None, None]
    b2 = np.take_along_axis(resid, i1, axis=-2)[..., 0, :]
    beta = np.stack([b1, b2], axis=-2)
    G = frame_matrix(np.broadcast_to(omega_c2, shape + (6,)), beta)
    G = 0.5 * (G + np.swapaxes(G, -1, -2).conj())
    try:
        L = np.linalg.cholesky(np.swapaxes(G, -1, -2))
    except np.linalg.LinAlgError:
        raise StructureError("ω not positive") from None
    R = np.swapaxes(L, -1, -2).conj()
    return R @ beta


def unitary_coframe(J: AlmostComplexStructure, omega: HermitianForm, x) -> np.ndarray:
    """Two (1,0) covectors at the point ``x`` (rows of a (2, 4) array)."""
    Jx = J.at(x)
    idx = J.domain.index_of(x)
    c = omega.coeffs
    idx = tuple(i if s > 1 else 0 for i, s in zip(idx, c.shape[:DIM]))
    return unitary_coframe_arrays((np.eye(4) - 1j * Jx.T) / 2.0, c[idx])


def omega_from_frame(alpha: np.ndarray) -> np.ndarray:
    """dx-coefficients of i sum alpha^j ^ conj(alpha^j)."""
    out = 0
    for j in range(2):
        a = alpha[..., j, :]
        out = out + 1j * forms.wedge_coeffs(a, 1, a.conj(), 1)
    return out
