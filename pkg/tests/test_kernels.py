import math

import numpy as np
import pytest
from scipy.integrate import quad

from dsqft.geometry import DeSitterPoint, GridSpec, make_grid, unit
from dsqft.kernels import (KernelKind, SmearedKernel, TruncationWarning, green_identity, inner_product,
                           pair_kernel, smear_plus)
from dsqft.specfun import sphere_area
from dsqft.testfn import Bump, apply_kg, make_bump, make_cap


def test_dplus_closed_form_d4(p4):
    f = make_bump(-0.5, 0.4, 0, unit(4), coef=1.5)
    b = Bump(-0.5, 0.4)
    re = quad(lambda t: b(t) * math.cos(t) ** -3 * math.cos(t), -0.5, 0.4, epsabs=0, epsrel=1e-13)[0]
    im = quad(lambda t: b(t) * math.cos(t) ** -3 * math.sin(t), -0.5, 0.4, epsabs=0, epsrel=1e-13)[0]
    J = 1.5 * complex(re, im)
    for tau in (-1.2, 0.0, 0.9):
        y = DeSitterPoint.make(tau, [0.3, 0.1, 0.0, 1.0])
        expected = J * math.cos(tau) * complex(math.cos(tau), -math.sin(tau)) / sphere_area(4)
        assert abs(smear_plus(p4, f, y) - expected) < 1e-12 * abs(expected)


@pytest.mark.parametrize("dims", ["p4", "p6"])
def test_green_identity(dims, request):
    params = request.getfixturevalue(dims)
    d = params.d
    f = make_bump(-0.4, 0.5, 2, unit(d))
    h = make_bump(-0.1, 0.8, 2, [0.3, 0, 0, 0, 0, 1][-d:] if d == 6 else [0.3, 0, 0, 1])
    r = green_identity(f, h, params)
    assert r["relative_error"] < 1e-6


def test_green_pointwise_inverse(p6):
    f = make_bump(-0.3, 0.4, 1, unit(6))
    k = SmearedKernel(KernelKind.GRET, apply_kg(f, p6), p6)
    for tau, a in ((0.0, unit(6)), (0.2, [0.2, 0, 0, 0.5, 0, 1]), (-0.25, [1, 0, 0, 0, 0, 0.4])):
        y = DeSitterPoint.make(tau, a)
        assert abs(k.at(y) - f.evaluate_point(y)) < 1e-7


def test_retarded_and_advanced_supports(p4):
    f = make_bump(-0.2, 0.3, 1, unit(4))
    gr = SmearedKernel("Gret", f, p4)
    ga = SmearedKernel("Gadv", f, p4)
    a = np.array([[0.1, 0.2, 0.3, 0.9]] * 3)
    assert np.all(gr.evaluate(np.array([0.31, 0.8, 1.4]), a) == 0)
    assert np.all(ga.evaluate(np.array([-0.21, -0.8, -1.4]), a) == 0)
    assert np.all(np.abs(gr.evaluate(np.array([-0.5, 0.0]), a[:2])) > 0)


def test_kernel_relations(p6):
    f = make_bump(-0.4, 0.2, 1, unit(6))
    h = make_cap(-0.1, 0.5, 1.0, [0.1, 0, 0.2, 0, 0, 1])
    gr = pair_kernel("Gret", f, h, p6)
    ga = pair_kernel("Gadv", h, f, p6)
    assert abs(gr.value - ga.value) <= gr.error + ga.error
    D = pair_kernel("Dcomm", f, h, p6)
    gra = pair_kernel("Gret", f, h, p6).value - pair_kernel("Gadv", f, h, p6).value
    assert abs(D.value - gra) <= D.error + gr.error + ga.error
    P = pair_kernel("Dplus", f, h, p6).value
    M = pair_kernel("Dminus", f, h, p6).value
    assert abs(D.value - (-0.5j) * (P - M)) < 1e-15


def test_positivity_complex_combination(p4, rng):
    f = (make_bump(-0.3, 0.3, 0, unit(4), 1 + 1j) + make_bump(0.0, 0.6, 2, [1, 0, 0, 1], -0.5j)
         + make_cap(-0.6, 0.1, 0.8, [0, 1, 0, 0], 0.7))
    v = pair_kernel("Dplus", f.conj(), f, p4)
    assert v.value.real >= -1e-12 * abs(v.value)
    assert abs(v.value.imag) < 1e-12 * abs(v.value)


def test_smeared_against_grid_matches_exact_sphere(p6):
    f = make_bump(-0.3, 0.3, 2, unit(6))
    h = make_bump(-0.2, 0.5, 2, [0.5, 0, 0, 0, 0, 1])
    g = make_grid(GridSpec(sphere_points=2048, extra_breaks=(-0.2, 0.5)), p6)
    K = SmearedKernel("Dplus", f, p6).on(g)
    v, se = g.integrate(K * h.evaluate_grid(g.tau, g.alpha), p6)
    exact = pair_kernel("Dplus", f, h, p6).value
    assert abs(v - exact) < 5 * se + 1e-8 * abs(exact)


def test_spacelike_caps_commute(p4):
    e = unit(4)
    f = make_cap(-0.3, -0.02, 1.2, e)
    h = make_cap(0.02, 0.3, 1.2, -e)
    D = pair_kernel("Dcomm", f, h, p4)
    assert abs(D.value) <= D.error
    t = make_cap(0.4, 0.7, 1.2, e)
    Dt = pair_kernel("Dcomm", f, t, p4)
    assert abs(Dt.value) > 10 * Dt.error


def test_inner_product_symmetric(p4):
    f = make_bump(-0.3, 0.3, 1, unit(4))
    h = make_cap(-0.1, 0.4, 1.0, [0.3, 0, 0, 1])
    assert inner_product(f, h, p4).value == pytest.approx(inner_product(h, f, p4).value, rel=1e-12)


def test_truncation_warning(p4):
    f = make_bump(-0.3, 0.3, 12, unit(4))
    with pytest.warns(TruncationWarning):
        k = SmearedKernel("Dplus", f, p4, s_max=10)
    assert k.at(DeSitterPoint.make(0.0, unit(4))) == 0
