"""Four dimensional lattices, nodal fields, quadrature, norms and field files.

All quantities live on the nodes of a rectangular lattice in R^4.  Indices
are ordered ``(i1, i2, i3, i4)`` with ``x4`` varying fastest, which is also
the order used by every reduction and by the on-disk payload.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, FieldIOError

NEG_INF = -np.inf
DIM = 4
#: Width of the band of nodes whose nested centered second difference leaves the box.
STENCIL_MARGIN = 2
MAGIC = "ACPP1"


class GridDomain:
    """A 4D rectangular lattice with interior and boundary-band masks.

    ``boundary_band`` holds the nodes whose centered second-difference stencil
    leaves the sampled box.  When a defining function ``rho`` is given, the
    interior is ``{rho < 0}`` minus that band; otherwise it is the box minus
    the band.
    """

    def __init__(self, bbox, resolution, rho=None):
        bbox = tuple((float(lo), float(hi)) for lo, hi in bbox)
        resolution = tuple(int(n) for n in resolution)
        if len(bbox) != DIM or len(resolution) != DIM:
            raise DomainError("a domain needs 4 intervals and 4 resolutions")
        if any(n < 5 for n in resolution):
            raise DomainError("insufficient stencil margin: every resolution must be >= 5")
        if any(not hi > lo for lo, hi in bbox):
            raise DomainError("degenerate bounding box")
        self.bbox = bbox
        self.resolution = resolution
        self._rho_source = rho
        self.spacing = tuple((hi - lo) / (n - 1) for (lo, hi), n in zip(bbox, resolution))
        self.axes = tuple(np.linspace(lo, hi, n) for (lo, hi), n in zip(bbox, resolution))

        band = np.zeros(self.shape, dtype=bool)
        m = STENCIL_MARGIN
        for ax in range(DIM):
            sl = [slice(None)] * DIM
            sl[ax] = slice(0, m)
            band[tuple(sl)] = True
            sl[ax] = slice(-m, None)
            band[tuple(sl)] = True
        self.boundary_band = band

        if rho is None:
            self.rho = None
            inside = np.ones(self.shape, dtype=bool)
        else:
            values = rho(*self.mesh()) if callable(rho) else rho
            values = np.broadcast_to(np.asarray(values, dtype=float), self.shape).copy()
            self.rho = values
            inside = values < 0
        self.inside = inside
        self.interior_mask = inside & ~band
        if not self.interior_mask.any():
            raise DomainError("degenerate domain: empty interior")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.resolution

    @property
    def size(self) -> int:
        return int(np.prod(self.resolution))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def h(self) -> float:
        """Largest grid spacing."""
        return max(self.spacing)

    def mesh(self) -> list[np.ndarray]:
        """Coordinate arrays broadcastable to ``shape``."""
        out = []
        for ax, a in enumerate(self.axes):
            s = [1] * DIM
            s[ax] = a.size
            out.append(a.reshape(s))
        return out

    def coordinates(self) -> np.ndarray:
        """Dense array of node coordinates, shape ``shape + (4,)``."""
        return np.stack(np.broadcast_arrays(*self.mesh()), axis=-1)

    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights (cell volume, halved per box face)."""
        w = np.full(self.shape, self.cell_volume)
        for ax in range(DIM):
            sl = [slice(None)] * DIM
            sl[ax] = 0
            w[tuple(sl)] *= 0.5
            sl[ax] = -1
            w[tuple(sl)] *= 0.5
        return w

    def index_of(self, point: Sequence[float]) -> tuple[int, ...]:
        """Nearest node to a point."""
        idx = []
        for a, x, h in zip(self.axes, point, self.spacing):
            i = int(round((x - a[0]) / h))
            idx.append(min(max(i, 0), a.size - 1))
        return tuple(idx)

    def contains(self, point: Sequence[float]) -> bool:
        return all(lo <= x <= hi for (lo, hi), x in zip(self.bbox, point))

    def with_resolution(self, n) -> "GridDomain":
        res = (n,) * DIM if np.isscalar(n) else tuple(n)
        return GridDomain(self.bbox, res, None if self.rho is None else self._rho_source)

    def __repr__(self):
        return f"GridDomain(bbox={self.bbox}, resolution={self.resolution})"


def build_domain(bbox, resolution, rho: Callable | None = None) -> GridDomain:
    """Build a lattice domain; ``rho`` is a closed form ``rho(x1, x2, x3, x4)``."""
    if np.isscalar(resolution):
        resolution = (int(resolution),) * DIM
    return GridDomain(bbox, resolution, rho)


def box(half_width: float, n: int, rho: Callable | None = None) -> GridDomain:
    return build_domain([(-half_width, half_width)] * DIM, n, rho)


def ball_rho(radius: float = 1.0, center=(0.0, 0.0, 0.0, 0.0)) -> Callable:
    def rho(x1, x2, x3, x4):
        return ((x1 - center[0]) ** 2 + (x2 - center[1]) ** 2 + (x3 - center[2]) ** 2
                + (x4 - center[3]) ** 2 - radius ** 2)
    return rho


# ----------------------------------------------------------------------------
# fields


@dataclass(eq=False)
class ScalarField:
    domain: GridDomain
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[:DIM] != self.domain.shape:
            raise DomainError(f"field shape {self.values.shape} != domain shape {self.domain.shape}")
        if np.isnan(self.values).any():
            raise DomainError("scalar field contains NaN")
        if self.values.ndim > DIM:
            return
        bad = self.values[self.domain.boundary_band]
        if not np.isfinite(bad).all():
            raise DomainError("boundary data must be finite")
        if np.isposinf(self.values).any():
            raise DomainError("scalar field contains +inf")

    @classmethod
    def from_function(cls, domain: GridDomain, fn: Callable) -> "ScalarField":
        vals = np.broadcast_to(fn(*domain.mesh()), domain.shape)
        return cls(domain, np.array(vals, dtype=float))

    def __add__(self, other):
        o = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.domain, self.values + o)

    def __sub__(self, other):
        o = other.values if isinstance(other, ScalarField) else other
        return ScalarField(self.domain, self.values - o)

    def __mul__(self, c):
        return ScalarField(self.domain, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.domain, -self.values)


@dataclass(eq=False)
class FormField:
    """Complex k-form, coefficients against the coordinate basis ``dx^I``.

    ``coeffs`` has shape ``grid_shape + (C(4, k),)``; grid axes of size one
    broadcast (constant coefficients along that axis).  ``valid`` marks the
    nodes where the coefficients are defined.
    """

    domain: GridDomain
    degree: int
    coeffs: np.ndarray
    bidegree: tuple[int, int] | None = None
    valid: np.ndarray | None = None

    def __post_init__(self):
        from .forms import n_components
        if not 0 <= self.degree <= DIM:
            raise DomainError("form degree must be in 0..4")
        if self.coeffs.shape[-1] != n_components(self.degree):
            raise DomainError("wrong number of form components")
        if self.bidegree is not None and sum(self.bidegree) != self.degree:
            raise DomainError("bidegree does not add up to the degree")
        if self.valid is None:
            self.valid = np.ones(self.domain.shape, dtype=bool)


@dataclass(eq=False)
class MeasureField:
    """Density of a (2,2)-current against ``dx1 dx2 dx3 dx4``."""

    domain: GridDomain
    density: np.ndarray
    valid: np.ndarray = field(default=None)

    def __post_init__(self):
        self.density = np.broadcast_to(np.asarray(self.density, dtype=float), self.domain.shape)
        if self.valid is None:
            self.valid = np.ones(self.domain.shape, dtype=bool)

    def __add__(self, other):
        return MeasureField(self.domain, self.density + other.density, self.valid & other.valid)

    def __sub__(self, other):
        return MeasureField(self.domain, self.density - other.density, self.valid & other.valid)

    def __mul__(self, c):
        return MeasureField(self.domain, self.density * c, self.valid)

    __rmul__ = __mul__

    def min_density(self, region=None) -> float:
        mask = self.valid if region is None else (self.valid & region)
        return float(self.density[mask].min()) if mask.any() else 0.0


# ----------------------------------------------------------------------------
# stencils and reductions


def central_diff(a: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Centered first difference along a grid axis (0 on the two end nodes).

    ``a`` has the 4 grid axes first; a grid axis of length one is treated as a
    constant direction and differentiates to zero.
    """
    n = a.shape[axis]
    out = np.zeros(a.shape, dtype=np.result_type(a, float))
    if n < 3:
        return out
    hi = [slice(None)] * a.ndim
    lo = [slice(None)] * a.ndim
    mid = [slice(None)] * a.ndim
    hi[axis], lo[axis], mid[axis] = slice(2, None), slice(0, -2), slice(1, -1)
    np.subtract(a[tuple(hi)], a[tuple(lo)], out=out[tuple(mid)])
    out[tuple(mid)] /= 2.0 * h
    return out


def erode(mask: np.ndarray, radius: int = 1) -> np.ndarray:
    """Erosion by the cross of lattice neighbours, ``radius`` times.

    A node survives one step when it and its 2*ndim axis neighbours are in
    the mask (nodes outside the array count as absent).  This is exactly the
    support of one centered difference in every direction, so k steps give
    the l1-ball of radius k that nested first differences reach.
    """
    m = np.asarray(mask, dtype=bool)
    for _ in range(radius):
        out = m.copy()
        for ax in range(m.ndim):
            lo = [slice(None)] * m.ndim
            hi = [slice(None)] * m.ndim
            lo[ax], hi[ax] = slice(0, -1), slice(1, None)
            out[tuple(lo)] &= m[tuple(hi)]
            out[tuple(hi)] &= m[tuple(lo)]
            edge = [slice(None)] * m.ndim
            edge[ax] = [0, -1]
            out[tuple(edge)] = False
        m = out
    return m.copy() if radius == 0 else m


def dilate(mask: np.ndarray, radius: int = 1) -> np.ndarray:
    """Dilation by the cross of lattice neighbours, ``radius`` times."""
    m = np.asarray(mask, dtype=bool)
    for _ in range(radius):
        out = m.copy()
        for ax in range(m.ndim):
            lo = [slice(None)] * m.ndim
            hi = [slice(None)] * m.ndim
            lo[ax], hi[ax] = slice(0, -1), slice(1, None)
            out[tuple(lo)] |= m[tuple(hi)]
            out[tuple(hi)] |= m[tuple(lo)]
        m = out
    return m.copy() if radius == 0 else m


def tree_sum(values: np.ndarray) -> float:
    """Pairwise tree reduction in the given (lexicographic) order.

    The tree shape depends only on the number of terms, so the result is
    reproducible bit for bit.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        return 0.0
    while v.size > 1:
        if v.size % 2:
            v = np.append(v, 0.0)
        v = v[0::2] + v[1::2]
    return float(v[0])


def _check_region(domain: GridDomain, region) -> np.ndarray:
    if region is None:
        return np.ones(domain.shape, dtype=bool)
    region = np.asarray(region, dtype=bool)
    if region.shape != domain.shape:
        raise DomainError(f"mask shape {region.shape} does not match domain {domain.shape}")
    return region


def integrate(m: MeasureField, region=None) -> float:
    """Sum of ``density * quadrature weight`` over ``region``.

    The region must lie inside the measure's validity mask.
    """
    region = _check_region(m.domain, region)
    if (region & ~m.valid).any():
        raise DomainError("integration region exceeds the measure's validity mask")
    w = m.domain.weights()
    return tree_sum((m.density * w)[region])


def norm(u: ScalarField, region=None, kind: str = "L2") -> float:
    """Discrete sup, L1, L2 or W^{1,2} norm over ``region``."""
    dom = u.domain
    region = _check_region(dom, region)
    vals = u.values[region]
    if kind != "L1" and np.isneginf(vals).any():
        raise DomainError("norm undefined on -inf")
    if kind == "sup":
        return float(np.abs(vals).max()) if vals.size else 0.0
    w = dom.weights()[region]
    if kind == "L1":
        return tree_sum(np.abs(vals) * w)
    l2sq = tree_sum(vals * vals * w)
    if kind == "L2":
        return float(np.sqrt(l2sq))
    if kind == "W12":
        if (region & ~erode(np.ones(dom.shape, bool), 1)).any():
            raise DomainError("W12 region touches the box edge (gradient undefined)")
        total = l2sq
        for ax in range(DIM):
            g = central_diff(u.values, ax, dom.spacing[ax])[region]
            total += tree_sum(g * g * w)
        return float(np.sqrt(total))
    raise DomainError(f"unknown norm kind {kind!r}")


# ----------------------------------------------------------------------------
# field files


def _header_for(f) -> dict:
    dom = f.domain
    head = {"magic": MAGIC, "shape": list(dom.shape), "bbox": [list(b) for b in dom.bbox],
            "volume_element": "coordinate"}
    if isinstance(f, ScalarField):
        vals = f.values
        head.update(kind="scalar", bidegree=None,
                    components=1 if vals.ndim == DIM else int(vals.shape[-1]))
    elif isinstance(f, FormField):
        head.update(kind="form", degree=f.degree,
                    bidegree=None if f.bidegree is None else list(f.bidegree),
                    components=int(f.coeffs.shape[-1]))
    elif isinstance(f, MeasureField):
        head.update(kind="measure", bidegree=[2, 2], components=1)
    else:
        raise FieldIOError(f"cannot serialize {type(f).__name__}")
    return head


def save_field(f, path) -> None:
    """Write a field file: one JSON header line, then little-endian float64.

    Multi-component fields are stored component-major, each component in
    lexicographic node order; complex values are interleaved (re, im).
    A measure also gets its validity mask as ``<path>.mask``.
    """
    path = Path(path)
    head = _header_for(f)
    if isinstance(f, ScalarField):
        data = f.values if f.values.ndim == DIM else np.moveaxis(f.values, -1, 0)
        payload = np.ascontiguousarray(data, dtype="<f8")
    elif isinstance(f, FormField):
        c = np.broadcast_to(f.coeffs, f.domain.shape + f.coeffs.shape[-1:])
        c = np.moveaxis(c, -1, 0).astype(np.complex128)
        payload = np.ascontiguousarray(np.stack([c.real, c.imag], axis=-1), dtype="<f8")
    else:
        payload = np.ascontiguousarray(f.density, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write((json.dumps(head) + "\n").encode("utf-8"))
        fh.write(payload.tobytes())
    if isinstance(f, MeasureField):
        save_field(ScalarField(f.domain, f.valid.astype(float)), str(path) + ".mask")


def load_field(path):
    path = Path(path)
    raw = path.read_bytes()
    nl = raw.find(b"\n")
    try:
        head = json.loads(raw[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError, ValueError):
        raise FieldIOError("bad header") from None
    if nl < 0 or not isinstance(head, dict) or head.get("magic") != MAGIC:
        raise FieldIOError("bad header")
    try:
        shape = tuple(int(n) for n in head["shape"])
        bbox = [tuple(b) for b in head["bbox"]]
        kind = head["kind"]
        comps = int(head["components"])
    except (KeyError, TypeError, ValueError):
        raise FieldIOError("bad header: missing keys") from None
    if len(shape) != DIM:
        raise FieldIOError("shape mismatch")
    body = raw[nl + 1:]
    npts = int(np.prod(shape))
    per = 2 if kind == "form" else 1
    expected = npts * comps * per * 8
    if len(body) < expected:
        raise FieldIOError("truncated payload")
    if len(body) > expected:
        raise FieldIOError("shape mismatch: payload longer than header shape")
    data = np.frombuffer(body, dtype="<f8").astype(float)
    dom = GridDomain(bbox, shape)
    if kind == "scalar":
        if comps == 1:
            vals = data.reshape(shape)
        else:
            vals = np.moveaxis(data.reshape((comps,) + shape), 0, -1)
        f = ScalarField.__new__(ScalarField)
        f.domain, f.values = dom, vals
        return f
    if kind == "form":
        arr = data.reshape((comps,) + shape + (2,))
        coeffs = np.moveaxis(arr[..., 0] + 1j * arr[..., 1], 0, -1)
        bd = head.get("bidegree")
        from .forms import degree_of
        return FormField(dom, int(head.get("degree", degree_of(comps))), coeffs,
                         None if bd is None else tuple(bd))
    if kind == "measure":
        valid = None
        mpath = Path(str(path) + ".mask")
        if mpath.exists():
            valid = load_field(mpath).values > 0.5
        return MeasureField(dom, data.reshape(shape), valid)
    raise FieldIOError(f"bad header: unknown kind {kind!r}")
