import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crqprime.domains import (
    ball,
    boundary_point,
    perturbed_ball,
    scaling_map,
    shear_map,
    transform,
    unitary_map,
    with_representative,
)
from crqprime.errors import (
    DegenerateDefiningFunction,
    NormalizationObstruction,
    NotDivisible,
    NotPseudoconvex,
)
from crqprime.jets import jet_divide_by_power, jet_from_polynomial
from crqprime.monge_ampere import (
    SIGMA,
    fefferman,
    fefferman_interior,
    fefferman_refine,
    fefferman_step1,
    jz,
    obstruction_at,
    probe_slope,
    required_degree,
)
from crqprime.poly import Polynomial

from conftest import DIRS, mixed_ball, quartic_ball, twisted_ball

z1, z2 = Polynomial.z(0), Polynomial.z(1)
zb1, zb2 = Polynomial.zbar(0), Polynomial.zbar(1)
RHO_BALL = (1 - z1 * zb1 - z2 * zb2).hermitian_part()


def test_sign_calibration():
    assert SIGMA == 1.0
    j = jz(jet_from_polynomial(RHO_BALL, np.array([[0.3, 0.2j]]), 2))
    assert j.value[0] == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("c", [0.5, 2.0, 3.7])
def test_jz_scales_cubically(c):
    rho = quartic_ball().rho
    base = np.array([[0.2 + 0.1j, -0.4j]])
    a = jz(jet_from_polynomial(rho, base, 4)).coeffs
    b = jz(jet_from_polynomial(rho * c, base, 4)).coeffs
    assert np.allclose(b, c ** 3 * a, rtol=1e-13, atol=1e-14)


def test_jz_degree_drops_by_two():
    j = jz(jet_from_polynomial(RHO_BALL, np.array([[0.0, 0.0]]), 6))
    assert j.degree == 4


@pytest.mark.parametrize("c", [0.25, 1.0, 4.0])
def test_step1_normalizes_scaled_ball(c):
    b = ball()
    p = boundary_point(b, DIRS)
    rho = jet_from_polynomial(RHO_BALL * c, p, 6)
    r1 = fefferman_step1(rho)
    ref = jet_from_polynomial(RHO_BALL, p, r1.degree)
    assert np.max(np.abs(r1.coeffs - ref.coeffs)) < 1e-13


def test_step1_first_order():
    d = quartic_ball()
    p = boundary_point(d, DIRS)
    r1 = fefferman_step1(d.jet(p, 6))
    e = jet_divide_by_power(jz(r1) - 1.0, r1, 1)
    assert np.all(np.isfinite(e.coeffs))


def test_ball_is_a_fixed_point():
    b = ball()
    p = boundary_point(b, DIRS)
    res = fefferman(b.jet(p, 9))
    ref = b.jet(p, res.r_jet.degree)
    assert np.max(np.abs(res.r_jet.coeffs - ref.coeffs)) < 1e-12
    assert np.max(np.abs(res.eta_jet.coeffs)) < 1e-10
    assert np.max(np.abs(res.obstruction)) < 1e-12


def test_probe_slopes():
    d = quartic_ball()
    res = fefferman(d.jet(boundary_point(d, DIRS), 9))
    assert np.allclose(res.slopes[0], 4.0, atol=1e-9)
    assert np.allclose(res.slopes[1], 3.0, atol=1e-9)


def test_third_order_is_obstructed():
    d = quartic_ball()
    res = fefferman(d.jet(boundary_point(d, DIRS), 9))
    slope, _ = probe_slope(res.r_jet, 3)
    assert np.max(np.abs(slope)) < 1e-9
    with pytest.raises(NormalizationObstruction):
        fefferman_refine(res.r_jet, 3)


def test_monge_ampere_residual_order_three(perturbed):
    p = boundary_point(perturbed, DIRS)
    r = fefferman(perturbed.jet(p, 9)).r_jet
    _, resid = jet_divide_by_power(jz(r) - 1.0, r, 3, return_residual=True)
    assert resid < 1e-8
    with pytest.raises(NotDivisible):
        # not divisible by one more power in general
        jet_divide_by_power(jz(r) - 1.0, r, 4, tol=1e-8)


def test_stage_residuals_vanish(perturbed):
    res = fefferman(perturbed.jet(boundary_point(perturbed, DIRS), 9))
    assert max(res.stage_residuals) < 1e-10


def test_obstruction_nonzero_off_the_ball():
    d = quartic_ball()
    O = obstruction_at(d, boundary_point(d, DIRS))
    assert np.max(np.abs(O)) > 1e-3


@pytest.mark.parametrize("phi", [shear_map(0.25, 2), shear_map(0.3j, 3),
                                 scaling_map(1.5, 0.8)])
def test_obstruction_vanishes_on_images_of_the_ball(phi):
    d = transform(ball(), phi)
    O = obstruction_at(d, boundary_point(d, DIRS))
    assert np.max(np.abs(O)) < 1e-7


def test_obstruction_independent_of_representative():
    d = twisted_ball()
    factor = (1 + 0.3 * z1 * zb1 + 0.1 * (z2 + zb2)).hermitian_part()
    d2 = with_representative(d, factor)
    p = boundary_point(d, DIRS)
    assert np.allclose(obstruction_at(d, p), obstruction_at(d2, p), atol=1e-8)


def test_obstruction_torus_symmetry():
    d = mixed_ball()
    p = boundary_point(d, DIRS)
    rot = p * np.exp(1j * np.array([0.7, -1.9]))
    assert np.allclose(obstruction_at(d, p), obstruction_at(d, rot), atol=1e-9)


def test_obstruction_unitary_covariance():
    th = 0.6
    U = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    d = quartic_ball()
    d2 = transform(d, unitary_map(U))
    p = boundary_point(d, DIRS)
    assert np.allclose(obstruction_at(d, p), obstruction_at(d2, p @ U.T), atol=1e-8)


def test_obstruction_linear_in_small_perturbation():
    # O(2t) - 2 O(t) is the quadratic remainder: it must shrink like t^2
    p_dirs = DIRS[2:]

    def O(t):
        d = perturbed_ball({(2, 2, 0, 0): -t})
        return obstruction_at(d, boundary_point(d, p_dirs))

    dev = []
    for t in (2e-3, 1e-3):
        dev.append(np.max(np.abs(O(2 * t) - 2 * O(t))))
    assert dev[1] / dev[0] == pytest.approx(0.25, abs=0.02)
    assert np.max(np.abs(O(1e-3))) > 1e-4


def test_interior_formula_matches_boundary_construction(perturbed):
    p = boundary_point(perturbed, DIRS)
    rho = perturbed.jet(p, 9)
    r = fefferman(rho).r_jet
    ri = fefferman_interior(rho)
    n = ri.table.size(2)
    assert np.max(np.abs(r.coeffs[:, :n] - ri.coeffs[:, :n])) < 1e-10


@given(st.floats(0.0, 2 * np.pi), st.floats(0.05, 0.95))
def test_interior_formula_positive_inside(ang, frac):
    d = quartic_ball()
    omega = np.array([[np.cos(ang), np.sin(ang) * 1j]])
    z = boundary_point(d, omega)[0] * frac
    r = fefferman_interior(jet_from_polynomial(d.rho, z[None], 8))
    assert r.value[0] > 0
    assert jz(r).value[0] > 0


@pytest.mark.parametrize("ang", [0.3, 1.0])
def test_interior_remainder_tends_to_obstruction(ang):
    # (J(r) - 1) / r^3 along a ray approaches O at the boundary point
    d = quartic_ball()
    omega = np.array([[np.cos(ang), np.sin(ang) * 1j]])
    p = boundary_point(d, omega)
    O = obstruction_at(d, p)[0]
    errs = []
    for frac in (0.99, 0.999):
        r = fefferman_interior(jet_from_polynomial(d.rho, p * frac, 8))
        errs.append(abs((jz(r).value[0] - 1) / r.value[0] ** 3 - O))
    assert errs[1] < 0.2 * errs[0] + 1e-6
    assert errs[1] < 2e-3


def test_degenerate_base_point():
    rho = jet_from_polynomial(RHO_BALL, np.array([[0.0, 0.0]]), 6)
    with pytest.raises(DegenerateDefiningFunction):
        fefferman_step1(rho)


def test_not_pseudoconvex():
    # rho = 1 - |z1|^2 + |z2|^2 has an indefinite Levi form
    rho_poly = (1 - z1 * zb1 + z2 * zb2).hermitian_part()
    rho = jet_from_polynomial(rho_poly, np.array([[1.0, 0.0]]), 6)
    with pytest.raises(NotPseudoconvex):
        fefferman_step1(rho)


def test_degree_budget():
    assert required_degree("obstruction") == 9
    assert required_degree("q_prime") == 8
