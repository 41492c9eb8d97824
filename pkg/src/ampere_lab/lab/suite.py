"""Generator grammar for randomized plurisubharmonic test functions.

    member  := seed | softmax_k(seed, seed [, seed])
    seed    := a |x - c|^2 + Re(beta z1 + gamma z1^2) + b
    softmax_k(s_1..s_m) := k log sum_i exp(s_i / k)

with z1 = x1 + i x2 and, per seed,
    a ~ U[0.5, 2],  c ~ U[-1/2, 1/2]^4 * half width of the box (about its centre),
    beta ~ N(0, 1/4) complex,  gamma ~ N(0, 1/16) complex,  b ~ U[-0.2, 0.2];
the number of seeds is uniform on {1, 2, 3} and the smoothing scale ``k`` is
fixed per suite (default 0.1).

Every seed is strictly psh for the standard and twist structures: z1 is
holomorphic for both, so Re(beta z1 + gamma z1^2) is pluriharmonic, and the
quadratic is strictly psh on the twist boxes used here.  The smooth maximum
of psh functions is psh for any almost complex structure.  Members are
closed forms, so the same suite is evaluated on every grid of a refinement
study.  Draws use numpy's default generator in the order listed above.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..grid import GridDomain, ScalarField


@dataclass(frozen=True)
class Seed:
    a: float
    c: tuple
    beta: complex
    gamma: complex
    b: float

    def __call__(self, x1, x2, x3, x4):
        x = (x1, x2, x3, x4)
        z1 = x1 + 1j * x2
        q = sum((xi - ci) ** 2 for xi, ci in zip(x, self.c))
        return self.a * q + np.real(self.beta * z1 + self.gamma * z1 * z1) + self.b

    def describe(self) -> dict:
        return {"a": self.a, "c": list(self.c), "beta": [self.beta.real, self.beta.imag],
                "gamma": [self.gamma.real, self.gamma.imag], "b": self.b}


@dataclass(frozen=True)
class Member:
    seeds: tuple
    kappa: float

    def __call__(self, x1, x2, x3, x4):
        vals = [s(x1, x2, x3, x4) for s in self.seeds]
        if len(vals) == 1:
            return vals[0]
        top = np.maximum.reduce(vals)
        acc = sum(np.exp((v - top) / self.kappa) for v in vals)
        return top + self.kappa * np.log(acc)

    def field(self, dom: GridDomain) -> ScalarField:
        vals = self(*dom.mesh())
        return ScalarField(dom, np.broadcast_to(vals, dom.shape).astype(float))

    def describe(self) -> dict:
        return {"kappa": self.kappa, "seeds": [s.describe() for s in self.seeds]}


def draw_seed(rng: np.random.Generator, centre, half) -> Seed:
    a = float(rng.uniform(0.5, 2.0))
    c = tuple(float(m + h * u) for m, h, u in zip(centre, half, rng.uniform(-0.5, 0.5, 4)))
    beta = complex(*rng.normal(0.0, 0.5, 2))
    gamma = complex(*rng.normal(0.0, 0.25, 2))
    b = float(rng.uniform(-0.2, 0.2))
    return Seed(a, c, beta, gamma, b)


def psh_suite(count: int, seed: int, bbox, kappa: float = 0.1, max_seeds: int = 3) -> list:
    """``count`` members drawn from the grammar with generator ``seed``."""
    rng = np.random.default_rng(seed)
    centre = [0.5 * (lo + hi) for lo, hi in bbox]
    half = [0.5 * (hi - lo) for lo, hi in bbox]
    out = []
    for _ in range(count):
        k = int(rng.integers(1, max_seeds + 1))
        out.append(Member(tuple(draw_seed(rng, centre, half) for _ in range(k)), kappa))
    return out
