import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ampere_lab.errors import DomainError, HypothesisError
from ampere_lab.grid import MeasureField, ScalarField, ball_rho, erode
from ampere_lab.potential import (boundary_shell, cap_omega, capacity, capacity_region,
                                  comparison_check, convergence_in_capacity, extremal_function,
                                  mass_fraction, outer_capacity, psh_envelope,
                                  select_directions, write_report)

from conftest import STANDARD, TWIST, field, r2, setting


@pytest.fixture(scope="module")
def ball13():
    dom, J, om = setting(TWIST, 1.0, 13, ball_rho(1.0))
    return dom, J, om, dom.inside


def radius(dom, c=(0, 0, 0, 0)):
    return np.sqrt(sum((x - ci) ** 2 for x, ci in zip(dom.mesh(), c)))


def ball_set(dom, mask, r, c=(0, 0, 0, 0)):
    return np.broadcast_to(radius(dom, c) <= r, dom.shape) & capacity_region(mask)


def test_select_directions():
    d = select_directions(16)
    assert d.shape == (16, 4)
    assert tuple(d[0]) == (3, 0, 0, 0)
    assert np.all((d ** 2).sum(1) == 9)
    assert np.array_equal(select_directions(16), d)
    with pytest.raises(DomainError):
        select_directions(0)
    with pytest.raises(DomainError):
        select_directions(27)


def test_envelope_of_psh_obstacle_is_the_obstacle(ball13):
    dom, J, om, mask = ball13
    u = field(dom, r2)
    env = psh_envelope(J, u, mask)
    assert env.converged and np.array_equal(env.u.values, u.values)


def test_envelope_below_obstacle_and_outside_fixed(ball13):
    dom, J, om, mask = ball13
    obst = field(dom, lambda *x: np.abs(x[0]) - np.abs(x[2]))
    env = psh_envelope(J, obst, mask, stop_tol=1e-8)
    assert env.converged
    assert np.all(env.u.values <= obst.values)
    out = ~mask | dom.boundary_band
    assert np.array_equal(env.u.values[out], obst.values[out])
    assert env.u.values[dom.index_of((0, 0, 0, 0))] < obst.values[dom.index_of((0, 0, 0, 0))]


@given(st.floats(0.1, 1.0), st.floats(-0.5, 0.5), st.integers(0, 100))
def test_envelope_is_monotone_in_the_obstacle(a, shift, seed):
    dom, J, _ = setting(STANDARD, 1.0, 9)
    rng = np.random.default_rng(seed)
    f = ScalarField(dom, rng.uniform(-1, 0, dom.shape))
    g = ScalarField(dom, f.values + a * rng.uniform(0, 1, dom.shape) + abs(shift))
    uf = psh_envelope(J, f, compute_defect=False).u.values
    ug = psh_envelope(J, g, compute_defect=False).u.values
    assert np.all(uf <= ug + 1e-12)


def test_sweeps_decrease_monotonically(ball13):
    dom, J, om, mask = ball13
    obst = ScalarField(dom, np.where(ball_set(dom, mask, 0.3), -1.0, 0.0))
    prev = obst.values
    for k in (1, 2, 4, 8):
        cur = psh_envelope(J, obst, mask, max_sweeps=k, compute_defect=False).u.values
        assert np.all(cur <= prev + 1e-15)
        prev = cur


def test_backends_agree(ball13):
    dom, J, om, mask = ball13
    obst = ScalarField(dom, np.where(ball_set(dom, mask, 0.3), -1.0, 0.0))
    a = psh_envelope(J, obst, mask, max_sweeps=20, backend="numpy", compute_defect=False)
    b = psh_envelope(J, obst, mask, max_sweeps=20, compute_defect=False)
    assert np.array_equal(a.u.values, b.u.values)


def test_extremal_function_bounds(ball13):
    dom, J, om, mask = ball13
    E = ball_set(dom, mask, 0.4)
    res = extremal_function(J, E, mask)
    v = res.u.values
    assert res.converged
    assert v.min() >= -1.0 and v.max() <= 0.0
    assert np.all(v[~mask] == 0.0)
    # the usc step lifts one-node-thin tips of E, never its core
    assert np.all(v[erode(E, 1)] == -1.0)
    raw = extremal_function(J, E, mask, regularize=False).u.values
    assert np.all(raw[E] == -1.0) and np.all(v >= raw)


def test_extremal_of_empty_set_is_zero(ball13):
    dom, J, om, mask = ball13
    res = extremal_function(J, np.zeros(dom.shape, bool), mask)
    assert not res.u.values.any()
    assert capacity(J, np.zeros(dom.shape, bool), mask).envelope_value == 0.0


def test_extremal_rejects_set_outside(ball13):
    dom, J, om, mask = ball13
    E = np.zeros(dom.shape, bool)
    E[0, 6, 6, 6] = True
    with pytest.raises(DomainError):
        extremal_function(J, E, mask)


def test_capacity_monotone_in_the_set(ball13):
    dom, J, om, mask = ball13
    caps = [capacity(J, ball_set(dom, mask, r), mask, candidates=4) for r in (0.2, 0.35, 0.5)]
    vals = [c.envelope_value for c in caps]
    assert 0 < vals[0] <= vals[1] <= vals[2]
    for c in caps:
        assert c.direct_lower_bound > 0 and c.slack >= 0
        assert set(c.to_dict()) >= {"envelope_value", "direct_lower_bound", "slack"}


def test_cap_omega_positive_and_monotone(ball13):
    dom, J, om, mask = ball13
    a = cap_omega(J, om, ball_set(dom, mask, 0.2), mask, candidates=4).envelope_value
    b = cap_omega(J, om, ball_set(dom, mask, 0.4), mask, candidates=4).envelope_value
    assert 0 < a <= b


def test_outer_capacity(ball13):
    dom, J, om, mask = ball13
    E = np.zeros(dom.shape, bool)
    E[dom.index_of((0, 0, 0, 0))] = True
    oc = outer_capacity(J, E, mask, [2.5 * dom.h, 1.5 * dom.h], candidates=4)
    assert oc.values[0] >= oc.values[1] > 0
    with pytest.raises(DomainError, match="under-resolved"):
        outer_capacity(J, E, mask, [0.5 * dom.h], candidates=4)
    with pytest.raises(DomainError):
        outer_capacity(J, E, mask, [dom.h, 2 * dom.h])
    # a closed-form distance field gives the same sets as the lattice transform
    dist = np.broadcast_to(radius(dom), dom.shape)
    od = outer_capacity(J, None, mask, [2.5 * dom.h, 1.5 * dom.h], distance=dist, candidates=4)
    assert od.values == pytest.approx(oc.values)
    assert set(od.to_dict()) == {"radii", "values", "slope", "intercept", "limit"}


def test_comparison_check(ball13):
    dom, J, om, mask = ball13
    u = field(dom, r2)
    v = field(dom, lambda *x: 0.5 * r2(*x) + 0.1)
    # {u < v} = {|x|^2 < 0.2} sits inside the shell
    shell = boundary_shell(mask)
    assert np.all(u.values[shell] >= v.values[shell])
    rep = comparison_check(J, u, v, mask)
    assert rep["mask_nodes"] > 0
    assert rep["lhs"] == pytest.approx(rep["rhs"] / 4, rel=0.05)
    assert rep["total_mass"] > 0
    with pytest.raises(HypothesisError, match="boundary"):
        comparison_check(J, v - 1.0, u, mask)


def test_comparison_with_empty_set(ball13):
    dom, J, om, mask = ball13
    u = field(dom, r2)
    rep = comparison_check(J, u + 1.0, u, mask)
    assert rep["mask_nodes"] == 0 and rep["lhs"] == 0.0 and rep["rhs"] == 0.0


def test_convergence_in_capacity_hypotheses(ball13):
    dom, J, om, mask = ball13
    u = field(dom, r2)
    K = capacity_region(mask)
    assert convergence_in_capacity(J, [u, u], u, 0.1, K, mask) == [0.0, 0.0]
    with pytest.raises(HypothesisError, match="below"):
        convergence_in_capacity(J, [u - 0.1], u, 0.05, K, mask)
    with pytest.raises(HypothesisError, match="decreasing"):
        convergence_in_capacity(J, [u + 0.1, u + 0.2], u, 0.05, K, mask)
    caps = convergence_in_capacity(J, [u + 0.3, u + 0.05], u, 0.1, K, mask, candidates=4)
    assert caps[0] > 0 and caps[1] == 0.0


def test_mass_fraction(ball13):
    dom = ball13[0]
    m = MeasureField(dom, np.ones(dom.shape))
    region = dom.interior_mask
    x1 = np.broadcast_to(dom.mesh()[0] < 0, dom.shape)
    assert 0.3 < mass_fraction(m, x1, region) < 0.7
    assert mass_fraction(m, region, region) == pytest.approx(1.0)
    assert mass_fraction(m * -1.0, region, region) == 0.0


def test_write_report(tmp_path):
    p = tmp_path / "r.json"
    write_report({"value": np.float64(1.5)}, p)
    assert '"value": 1.5' in p.read_text()
