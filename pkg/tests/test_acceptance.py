"""Acceptance gate: one test per criterion, each recorded as PASS/FAIL.

Every test records its measured values before asserting, so the terminal
summary lists all fourteen lines even when some fail.
"""
import time

import numpy as np
import pytest

from ampere_lab.calculus import (c0_estimate, ddc_squared, ma_terms, ma_wedge, monge_ampere,
                                 naive_wedge, theta_tensor, torsion_inequality)
from ampere_lab.grid import ball_rho, build_domain, integrate
from ampere_lab.lab import LabConfig, run_experiment
from ampere_lab.potential import capacity_region, extremal_function, mass_fraction
from ampere_lab.structure import make_structure

from conftest import STANDARD, TWIST, field, r2, setting

pytestmark = pytest.mark.acceptance

# classical capacity of the ball of radius 1/2 in the unit ball, radial quadrature
# (tests/oracles/radial.py), frozen before the build
CAPACITY_ORACLE = 20.5422884552238

THETA_TERMS = ("del_thetabar", "delbar_theta", "theta_thetabar", "torsion_product")


def record(acceptance, key, passed, detail):
    acceptance[key] = (bool(passed), detail)
    return passed


def smooth_family(count, seed):
    """Quadratic plus a plane wave plus an exponential, random coefficients."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        A = rng.normal(size=(4, 4))
        A = A + A.T
        k, c = rng.normal(size=4), 0.5 * rng.normal(size=4)
        ph = rng.uniform(0, 2 * np.pi)

        def fn(*x, A=A, k=k, c=c, ph=ph):
            quad = sum(0.5 * A[i, j] * x[i] * x[j] for i in range(4) for j in range(4))
            lin = lambda w: sum(wi * xi for wi, xi in zip(w, x))  # noqa: E731
            return quad + np.sin(lin(k) + ph) + np.exp(lin(c))
        out.append(fn)
    return out


def experiment(tmp_path_factory, name, model, bbox, resolutions, omega=None, params=None):
    kind = {"kind": "standard"} if model == "standard" else {"kind": "twist", "rho_twist": 0.5}
    domain = {"bbox": [[-bbox, bbox]] * 4, "resolutions": resolutions}
    if omega is not None:
        domain["omega"] = {"shape": "ball", "radius": omega}
    cfg = LabConfig.from_dict({"model": kind, "domain": domain, "experiment": name,
                               "params": params or {}, "seed": 0,
                               "output_dir": str(tmp_path_factory.mktemp(name))})
    return run_experiment(name, cfg)


def summary(rep):
    return "; ".join(f"{k} {c.value:.4g} ({c.rule} {c.threshold:.4g})"
                     for k, c in rep.checks.items())


# ---------------------------------------------------------------- calculus


def test_ac01_integrable_reduction(acceptance):
    t0 = time.perf_counter()
    dom, J, _ = setting(STANDARD, 0.4, 17)
    fns = smooth_family(4, 1)
    worst_theta, worst_ddc = 0.0, 0.0
    for a, b in ((0, 1), (2, 3), (1, 1)):
        u, v = field(dom, fns[a]), field(dom, fns[b])
        terms, valid = ma_terms(J, u, v)
        for name in THETA_TERMS:
            worst_theta = max(worst_theta, float(np.abs(terms[name][valid]).max()))
        d2, ma = ddc_squared(J, u), monge_ampere(J, u)
        worst_ddc = max(worst_ddc, float(np.abs(d2.density - ma.density)[ma.valid].max()))
    elapsed = time.perf_counter() - t0
    ok = worst_theta <= 1e-12 and worst_ddc <= 1e-12 and elapsed < 10
    record(acceptance, 1, ok, f"theta terms {worst_theta:.2e}, ddc-ma {worst_ddc:.2e}, "
                              f"{elapsed:.1f}s")
    assert ok


def test_ac02_quadratic_exactness(acceptance):
    dom, J, _ = setting(STANDARD, 0.4, 17)
    ma = monge_ampere(J, field(dom, r2))
    rel = float(np.abs(ma.density[ma.valid] / 8.0 - 1.0).max())
    ok = rel <= 1e-10 and ma.valid.any()
    record(acceptance, 2, ok, f"max relative deviation from 8: {rel:.2e}")
    assert ok


def _aligned_sublattice(half, n, reach, margin=4):
    # same nodes as the full grid near the origin; the operators are local
    h = 2 * half / (n - 1)
    k = min(int(round(reach / h)) + margin, (n - 1) // 2)
    return build_domain([(-k * h, k * h)] * 4, 2 * k + 1)


def test_ac03_wedge_symmetry_and_consistency(acceptance):
    # defects are measured on a fixed cube valid on every grid of [-0.6, 0.6]^4
    t0 = time.perf_counter()
    half, reach, resolutions = 0.6, 0.15, (9, 17, 33)
    fns = smooth_family(40, 3)
    defects = np.zeros((len(resolutions), 20, 2))
    for i, n in enumerate(resolutions):
        dom = _aligned_sublattice(half, n, reach)
        J = make_structure(TWIST, dom)
        region = (np.abs(dom.coordinates()) <= reach + 1e-9).all(-1)
        for k in range(20):
            u, v = field(dom, fns[2 * k]), field(dom, fns[2 * k + 1])
            uv, vu, nv = ma_wedge(J, u, v), ma_wedge(J, v, u), naive_wedge(J, u, v)
            assert (uv.valid & vu.valid & nv.valid)[region].all()
            defects[i, k, 0] = np.abs(uv.density - vu.density)[region].max()
            defects[i, k, 1] = np.abs(uv.density - nv.density)[region].max()
    elapsed = time.perf_counter() - t0
    logh = np.log([2 * half / (n - 1) for n in resolutions])
    slopes = np.array([[np.polyfit(logh, np.log(defects[:, k, j]), 1)[0] for j in (0, 1)]
                       for k in range(20)])
    ok = slopes[:, 0].min() >= 1.8 and slopes[:, 1].min() >= 1.0 and elapsed < 300
    record(acceptance, 3, ok, f"min symmetry slope {slopes[:, 0].min():.3f}, "
                              f"min formula-vs-naive slope {slopes[:, 1].min():.3f}, "
                              f"{elapsed:.1f}s")
    assert ok


def test_ac04_torsion_inequality(acceptance):
    dom, J, om = setting(TWIST, 0.6, 13)
    c0 = c0_estimate(J, om).value
    T, _ = theta_tensor(J)
    worst, violations = -np.inf, 0
    for fn in smooth_family(100, 4):
        lhs, rhs, valid = torsion_inequality(J, om, field(dom, fn), c0, T)
        excess = np.broadcast_to(lhs - rhs, dom.shape)[valid]
        worst = max(worst, float(excess.max()))
        violations += int((excess > 1e-10).sum())
    ok = violations == 0
    record(acceptance, 4, ok, f"c0 {c0:.4g}, violations {violations}, max lhs-rhs {worst:.2e}")
    assert ok


# ---------------------------------------------------------------- extremal functions


@pytest.fixture(scope="module")
def extremal_runs():
    """Extremal function of ball(0.5) in the unit ball on [-1, 1]^4, per (model, n)."""
    out = {}
    for model in (STANDARD, TWIST):
        for n in (17, 33):
            t0 = time.perf_counter()
            dom = build_domain([(-1.0, 1.0)] * 4, n, ball_rho(1.0))
            J = make_structure(model, dom)
            r = np.sqrt((dom.coordinates() ** 2).sum(-1))
            E = (r <= 0.5) & dom.interior_mask
            res = extremal_function(J, E, dom.inside)
            ma = monge_ampere(J, res.u)
            region = capacity_region(dom.inside) & ma.valid
            out[model.kind, n] = dict(dom=dom, r=r, E=E, u=res.u, ma=ma, region=region,
                                      converged=res.converged,
                                      seconds=time.perf_counter() - t0)
    return out


def test_ac05_classical_capacity(acceptance, extremal_runs):
    run = extremal_runs["standard", 33]
    dom, r = run["dom"], run["r"]
    with np.errstate(divide="ignore"):
        exact = np.clip(np.log(r) / np.log(2.0), -1.0, 0.0)
    sup_err = float(np.abs(run["u"].values - exact)[dom.inside].max())
    cap = integrate(run["ma"], run["region"])
    rel = abs(cap / CAPACITY_ORACLE - 1.0)
    ok_sup, ok_cap = sup_err <= 5 * dom.h, rel <= 0.10
    ok = ok_sup and ok_cap and run["seconds"] < 300
    record(acceptance, 5, ok, f"sup error {sup_err:.3f} (5h = {5 * dom.h:.3f}), capacity "
                              f"{cap:.3f} vs {CAPACITY_ORACLE:.3f} ({100 * rel:.1f}% off, "
                              f"limit 10%), {run['seconds']:.1f}s")
    assert ok


def test_ac06_support_lemma(acceptance, extremal_runs):
    fractions = {}
    for (kind, n), run in extremal_runs.items():
        shell = np.abs(run["r"] - 0.5) <= 3 * run["dom"].h
        fractions[kind, n] = mass_fraction(run["ma"], shell, run["region"])
    ok = all(fractions[k, 33] >= 0.9 and fractions[k, 33] >= fractions[k, 17]
             for k in ("standard", "twist"))
    record(acceptance, 6, ok, ", ".join(f"{k} n={n}: {f:.3f}"
                                        for (k, n), f in sorted(fractions.items())))
    assert ok


# ---------------------------------------------------------------- experiments


def test_ac07_cln(acceptance, tmp_path_factory):
    rep = experiment(tmp_path_factory, "cln", "twist", 0.6, [17, 33])
    record(acceptance, 7, rep.passed, summary(rep))
    assert rep.passed


def test_ac08_increasing_convergence(acceptance, tmp_path_factory):
    rep = experiment(tmp_path_factory, "increasing-convergence", "twist", 0.8, [33])
    record(acceptance, 8, rep.passed, summary(rep))
    assert rep.passed


def test_ac09_decreasing_capacity(acceptance, tmp_path_factory):
    reps = [experiment(tmp_path_factory, "decreasing-capacity", m, 1.0, [17], omega=1.0)
            for m in ("standard", "twist")]
    ok = all(r.passed for r in reps)
    record(acceptance, 9, ok, " | ".join(summary(r) for r in reps))
    assert ok


def test_ac10_curve_pluripolarity(acceptance, tmp_path_factory):
    rep = experiment(tmp_path_factory, "curve-pluripolarity", "twist", 0.8, [33], omega=0.8)
    record(acceptance, 10, rep.passed, summary(rep))
    assert rep.passed


def test_ac11_quasicontinuity(acceptance, tmp_path_factory):
    rep = experiment(tmp_path_factory, "quasicontinuity", "twist", 1.0, [17], omega=1.0)
    record(acceptance, 11, rep.passed, summary(rep))
    assert rep.passed


def test_ac12_comparison(acceptance, tmp_path_factory):
    reps = [experiment(tmp_path_factory, "comparison", m, 0.6, [17]) for m in ("standard", "twist")]
    ok = all(r.passed for r in reps)
    record(acceptance, 12, ok, " | ".join(summary(r) for r in reps))
    assert ok


def test_ac13_dirichlet_accuracy(acceptance, tmp_path_factory):
    t0 = time.perf_counter()
    reps = [experiment(tmp_path_factory, "dirichlet-accuracy", m, 0.8, [9, 17, 33], omega=0.6)
            for m in ("standard", "twist")]
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in reps) and elapsed < 600
    record(acceptance, 13, ok, " | ".join(summary(r) for r in reps) + f"; {elapsed:.0f}s")
    assert ok


def test_ac14_determinism(acceptance, tmp_path):
    raw = {"model": {"kind": "twist", "rho_twist": 0.5},
           "domain": {"bbox": [[-0.6, 0.6]] * 4, "resolutions": [9, 13]}, "seed": 5}
    outs = []
    for k in range(2):
        cfg = LabConfig.from_dict(dict(raw, output_dir=str(tmp_path / f"run{k}")))
        rep = run_experiment("cln", cfg)
        outs.append({name: (tmp_path / f"run{k}" / f"{name}.csv").read_bytes()
                     for name in rep.tables})
    ok = bool(outs[0]) and outs[0] == outs[1]
    record(acceptance, 14, ok, f"{len(outs[0])} CSV files compared byte for byte")
    assert ok
