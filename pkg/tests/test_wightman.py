import numpy as np
import pytest

from dsqft import fixtures
from dsqft.errors import ContractError, PreconditionViolation
from dsqft.geometry import GridSpec, random_rotation, unit
from dsqft.kernels import pair_kernel
from dsqft.testfn import make_bump, make_cap
from dsqft.wightman import (Current, In, Loc, Out, ccr_commutator, full_npoint, locality_sample_points,
                            out_npoint, resolve_grid, smatrix_element, truncated_npoint,
                            verify_hermiticity, verify_locality_bracket, verify_rotation_invariance,
                            yang_feldman_check)


@pytest.fixture(scope="module")
def fns6():
    return [make_bump(-0.5, 0.1, 1, unit(6)), make_bump(-0.2, 0.4, 0, [0.3, 0, 0, 0, 0, 1]),
            make_bump(0.0, 0.6, 1, [0, 1, 0, 0, 0, 1])]


def test_two_point_is_scaled_dplus(p6, fns6):
    f, h = fns6[0], fns6[2]
    w = truncated_npoint([Loc(f), Loc(h)], p6)
    ref = p6.two_point_factor * pair_kernel("Dplus", f, h, p6).value
    assert abs(w.value - ref) < 1e-15 * abs(ref)
    assert truncated_npoint([Current(f), Loc(h)], p6).exact


def test_structural_zeros(p6, fns6):
    f, h, g = fns6
    assert truncated_npoint([In(f), In(h), In(g)], p6).value == 0
    r = truncated_npoint([Current(f), Loc(h), Current(g)], p6)
    assert r.exact and r.value == 0


def test_ccr_commutator_factor(p4):
    f = make_bump(-0.4, 0.2, 1, unit(4))
    h = make_cap(-0.1, 0.5, 1.0, [0.3, 0, 0, 1])
    c = ccr_commutator(f, h, p4)
    assert abs(c["commutator"] - 2j * c["bD"]) < 1e-14 * abs(c["commutator"])


@pytest.mark.parametrize("n", [2, 3, 4])
def test_hermiticity(p6, fns6, n):
    f, h, g = fns6
    # matching degrees with an even total, so the value is not a selection-rule zero
    chosen = {2: (f, g), 3: (f, h, g), 4: (f, h, g, h)}[n]
    slots = [Loc(x.scale(1 + 0.5j)) for x in chosen]
    slots[0] = In(slots[0].f)
    r = verify_hermiticity(slots, p6)
    assert r["passed"], r
    assert abs(r["value"]) > 0


def test_rotation_invariance(p6, fns6):
    R = random_rotation(6, seed=4)
    r = verify_rotation_invariance([Loc(f) for f in fns6], R, p6, independent_seed=99)
    assert r["relative"] < 1e-12
    assert r["independent_passed"]


@pytest.mark.parametrize("n,k", [(3, 0), (3, 2), (4, 1)])
def test_yang_feldman(p6, fns6, n, k):
    f, h, g = fns6
    slots = [Loc(f), Loc(h), Loc(g), Loc(h)][:n]
    r = yang_feldman_check(slots, k, p6)
    assert r["passed"] and r["total_difference"] <= 1e-15 * max(abs(r["loc"]), 1e-300)
    with pytest.raises(ContractError):
        yang_feldman_check([In(fns6[0])] + slots[1:], 0, p6)


def test_smatrix_out_cross_path(p5):
    fs = fixtures.functions("tri-bump-d5")
    a = out_npoint(fs, p5)
    b = smatrix_element([], fs, p5)
    c = truncated_npoint([Out(f) for f in fs], p5)
    assert abs(a.value - b.value) <= 1e-10 * abs(a.value)
    assert abs(a.value - c.value) <= a.error + c.error
    assert abs(a.value) > 5 * a.error


def test_out_amplitude_vanishes_in_even_dimension(p6):
    # even d: the tau integral of prod T- vanishes for even total degree, the sphere integral for odd
    fs = [make_bump(-0.6, -0.2, 0, unit(6)), make_bump(-0.1, 0.3, 1, unit(6, 0)),
          make_bump(0.2, 0.7, 1, [1, 1, 0, 0, 0, 0])]
    r = out_npoint(fs, p6)
    ref = abs(truncated_npoint([Loc(f) for f in fs], p6).value)
    assert abs(r.value) <= r.error and abs(r.value) < 1e-6 * ref


def test_full_npoint_four(p6, fns6):
    f, h, g = fns6
    slots = [Loc(f), Loc(h), Loc(g), Loc(h)]
    grid = resolve_grid(None, [f, h, g], p6)
    full = full_npoint(slots, p6, grid)
    t = lambda *ix: truncated_npoint([slots[i] for i in ix], p6, grid).value
    expected = t(0, 1) * t(2, 3) + t(0, 2) * t(1, 3) + t(0, 3) * t(1, 2) + t(0, 1, 2, 3)
    assert abs(t(0, 2) * t(1, 3)) > 0 and abs(t(0, 1, 2, 3)) > 0
    assert abs(full.value - expected) < 1e-14 * abs(expected)


def test_locality_bracket_and_controls(p4):
    e = unit(4)
    f = make_cap(-0.3, -0.02, 1.2, e)
    h = make_cap(0.02, 0.3, 1.2, -e)
    pts = locality_sample_points(4, 200, seed=3)
    r = verify_locality_bracket(f, h, p4, pts)
    assert r["passed"] and r["ccr_passed"]
    assert sum(r["case_counts"].values()) == 200
    t = make_cap(0.4, 0.7, 1.2, e)
    with pytest.raises(PreconditionViolation):
        verify_locality_bracket(f, t, p4, pts)
    neg = verify_locality_bracket(f, t, p4, pts, require_spacelike=False)
    assert neg["max_ratio"] > 10
    assert neg["ccr_passed"]


def test_grid_override_used(p6, fns6):
    slots = [Loc(f) for f in fns6]
    a = truncated_npoint(slots, p6, GridSpec(sphere_points=256, tau_order=12))
    b = truncated_npoint(slots, p6)
    assert abs(a.value - b.value) <= 2 * (a.error + b.error)
