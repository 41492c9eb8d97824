"""Half sweep of the envelope iteration, compiled or numpy.

The compiled kernel is used when the extension imports; set
``AMPERE_LAB_PURE=1`` to force the numpy version.  Both evaluate, per node
``x`` and direction ``d``::

    avg_d = ((u(x + o_d) + u(x - o_d)) + (u(x + e_d) + u(x - e_d))) / 4

where ``o_d`` is an integer lattice offset and ``e_d = J(x) o_d`` (in index
units) is read by multilinear interpolation, and set
``u(x) = min(obstacle(x), min_d avg_d)``.
"""
from __future__ import annotations

import itertools
import os

import numpy as np

try:
    if os.environ.get("AMPERE_LAB_PURE") == "1":
        raise ImportError
    from ._envelope import half_sweep as _compiled
    BACKEND = "compiled"
except ImportError:
    _compiled = None
    BACKEND = "numpy"

_CORNERS = list(itertools.product((0, 1), repeat=4))


def _interp_numpy(s: np.ndarray, idx: np.ndarray, e: np.ndarray, sign: float) -> np.ndarray:
    n = np.array(s.shape)
    p = idx.astype(float) + sign * e
    p = np.minimum(np.maximum(p, 0.0), (n - 1).astype(float))
    lo = np.floor(p).astype(np.int64)
    top = lo >= n - 1
    lo = np.where(top, n - 1, lo)
    f = np.where(top, 0.0, p - lo)
    active = [bool(np.any(f[:, a] != 0.0)) for a in range(4)]
    acc = np.zeros(len(idx))
    for corner in _CORNERS:
        if any(c and not active[a] for a, c in enumerate(corner)):
            continue          # zero weight at every node
        w = np.ones(len(idx))
        j = lo.copy()
        for a in range(4):
            if not active[a]:
                continue
            if corner[a]:
                w = w * f[:, a]
                j[:, a] = np.minimum(lo[:, a] + 1, n[a] - 1)
            else:
                w = w * (1.0 - f[:, a])
        acc = acc + w * s[j[:, 0], j[:, 1], j[:, 2], j[:, 3]]
    return acc


def half_sweep_numpy(u, snap, obstacle, nodes, offsets, jofs) -> float:
    shape = np.array(u.shape)
    idx = np.stack(np.unravel_index(nodes, u.shape), axis=-1).astype(np.int64)
    jc = np.where(np.array(jofs.shape[:4]) > 1, idx, 0)
    best = obstacle[idx[:, 0], idx[:, 1], idx[:, 2], idx[:, 3]].copy()
    for d in range(offsets.shape[0]):
        o = offsets[d]
        ip = np.clip(idx + o, 0, shape - 1)
        im = np.clip(idx - o, 0, shape - 1)
        va = snap[ip[:, 0], ip[:, 1], ip[:, 2], ip[:, 3]]
        vb = snap[im[:, 0], im[:, 1], im[:, 2], im[:, 3]]
        e = jofs[jc[:, 0], jc[:, 1], jc[:, 2], jc[:, 3], d, :]
        vc = _interp_numpy(snap, idx, e, 1.0)
        vd = _interp_numpy(snap, idx, e, -1.0)
        avg = 0.25 * ((va + vb) + (vc + vd))
        best = np.where(avg < best, avg, best)
    old = snap[idx[:, 0], idx[:, 1], idx[:, 2], idx[:, 3]]
    u[idx[:, 0], idx[:, 1], idx[:, 2], idx[:, 3]] = best
    return float(np.abs(old - best).max()) if len(best) else 0.0


def half_sweep(u, snap, obstacle, nodes, offsets, jofs, backend: str | None = None) -> float:
    """Update ``u`` in place at the flat indices ``nodes``, reading ``snap``."""
    backend = backend or BACKEND
    if backend == "compiled":
        if _compiled is None:
            raise ImportError("compiled envelope kernel is not available")
        return _compiled(u, snap, obstacle, nodes, offsets, jofs)
    return half_sweep_numpy(u, snap, obstacle, nodes, offsets, jofs)
