import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ampere_lab.errors import HypothesisError
from ampere_lab.grid import ScalarField
from ampere_lab.lab.suite import psh_suite
from ampere_lab.psh import disc_subaverage_check, is_psh, regularize, usc_regularize

from conftest import STANDARD, TWIST, field, r2, setting
from test_calculus import P0, P1, mixed, quartic

# smallest eigenvalue of i ddbar u relative to omega, twist(0.5), symbolic oracle
LMIN_ORACLE = [
    (r2, P1, 2.0),
    (quartic, P1, 2.03),
    (mixed, P1, 2.1370088350813092),
    (mixed, P0, 2.0),
]


def lmin_at(model, half, n, fn, point):
    dom, J, om = setting(model, half, n)
    rep = is_psh(J, om, field(dom, fn))
    return rep.min_eigenvalue_field.values[dom.index_of(point)]


@pytest.mark.parametrize("fn, point, expected", LMIN_ORACLE)
def test_min_eigenvalue_matches_symbolic(fn, point, expected):
    errs = [abs(lmin_at(TWIST, 0.4, n, fn, point) - expected) for n in (17, 33)]
    assert errs[1] < 2e-3 * expected
    assert errs[1] <= errs[0] / 3.0 or errs[1] < 1e-9


@pytest.mark.parametrize("model", [STANDARD, TWIST])
def test_r2_psh_and_negative_not(model):
    dom, J, om = setting(model, 0.4, 9)
    assert is_psh(J, om, field(dom, r2)).is_psh
    rep = is_psh(J, om, field(dom, lambda *x: -r2(*x)))
    assert not rep.is_psh and rep.violating_points
    assert rep.min_eigenvalue == pytest.approx(-2.0, rel=2e-2)


def test_x3_has_zero_levi_form_on_twist():
    # not pluriharmonic in the integrable sense, but its Levi form vanishes
    vals = [abs(lmin_at(TWIST, 0.4, n, lambda *x: x[2], P1)) for n in (17, 33)]
    assert vals[1] < 1e-3 and vals[1] < vals[0] / 3.0


def test_smooth_max_of_psh_is_psh(twist17):
    # a hard max has a kink that the finite-difference Levi form cannot resolve
    dom, J, om = twist17
    u = field(dom, lambda *x: 0.1 * np.logaddexp(r2(*x) / 0.1, (0.5 * x[0] + 0.05) / 0.1))
    assert is_psh(J, om, u).is_psh


def test_region_restricts_the_check(standard17):
    dom, J, om = standard17
    u = field(dom, lambda x1, *_: np.where(x1 > 0, -x1 ** 2, x1 ** 2))
    assert not is_psh(J, om, u).is_psh
    x1 = dom.mesh()[0]
    left = np.broadcast_to(x1 < -0.1, dom.shape)
    assert is_psh(J, om, u, region=left).is_psh


@given(st.integers(0, 10_000))
def test_suite_members_are_psh(seed):
    dom, J, om = setting(TWIST, 0.4, 9)
    for m in psh_suite(3, seed, dom.bbox):
        assert is_psh(J, om, m.field(dom)).is_psh


def test_regularize_keeps_psh_and_converges(twist17):
    dom, J, om = twist17
    u = field(dom, quartic)
    errs = []
    for eps in (0.04, 0.02):
        v = regularize(J, om, u, eps)
        assert is_psh(J, om, v).is_psh
        inner = dom.interior_mask
        errs.append(np.abs(v.values - u.values)[inner].max())
    assert errs[1] < errs[0]


def test_regularize_rejects_non_psh(standard17):
    dom, J, om = standard17
    u = field(dom, lambda *x: -r2(*x))
    with pytest.raises(HypothesisError):
        regularize(J, om, u, 0.05)
    v = regularize(J, om, u, 0.05, check=False)
    assert np.isfinite(v.values).all()


def test_regularize_handles_minus_infinity(standard17):
    dom, J, om = standard17
    vals = field(dom, r2).values.copy()
    vals[8, 8, 8, 8] = -np.inf
    v = regularize(J, om, ScalarField(dom, vals), 0.05, check=False)
    assert np.isfinite(v.values).all()


def test_usc_removes_spike_and_fills_dip(standard17):
    dom, J, om = standard17
    base = field(dom, r2).values
    spiky = base.copy()
    spiky[8, 8, 8, 8] += 1.0
    out = usc_regularize(ScalarField(dom, spiky)).values
    assert out[8, 8, 8, 8] == pytest.approx(4 * dom.h ** 2)  # the diagonal neighbours
    dipped = base.copy()
    dipped[8, 8, 8, 8] -= 1.0
    out = usc_regularize(ScalarField(dom, dipped)).values
    assert out[8, 8, 8, 8] == pytest.approx(base[8, 8, 8, 8], abs=4 * dom.h ** 2)


def test_usc_leaves_smooth_and_kinked_data(standard17):
    dom = standard17[0]
    for fn in (r2, lambda x1, *_: np.maximum(x1, 0.0), quartic):
        u = field(dom, fn)
        assert np.array_equal(usc_regularize(u).values, u.values)


def test_usc_keeps_poles(standard17):
    dom = standard17[0]
    vals = field(dom, r2).values.copy()
    vals[8, 8, 8, 8] = -np.inf
    out = usc_regularize(ScalarField(dom, vals)).values
    assert out[8, 8, 8, 8] == -np.inf
    assert np.array_equal(out[np.isfinite(vals)], vals[np.isfinite(vals)])


@pytest.mark.parametrize("model", [STANDARD, TWIST])
def test_disc_check_sign(model):
    dom, J, _ = setting(model, 0.4, 17)
    up = disc_subaverage_check(J, field(dom, r2), n_discs=10)
    down = disc_subaverage_check(J, field(dom, lambda *x: -r2(*x)), n_discs=10)
    assert up["min_gap"] > 0 and max(down["gaps"]) < 0
