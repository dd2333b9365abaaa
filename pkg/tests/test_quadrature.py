import numpy as np
import pytest

from crqprime.domains import Family, ball, scaling_map, transform, unitary_map
from crqprime.errors import NumericError
from crqprime.poly import Polynomial
from crqprime.quadrature import (
    FIT_BASIS,
    fit_expansion,
    fsum,
    hessian_probe,
    q_bar,
    renorm_volume,
    surface_integral,
    total_q_prime,
    variation_check,
    variation_rhs,
)

from conftest import quartic_ball, twisted_ball

z1, z2 = Polynomial.z(0), Polynomial.z(1)
zb1, zb2 = Polynomial.zbar(0), Polynomial.zbar(1)
FOUR_PI2 = 4 * np.pi ** 2


def test_fsum_is_exact():
    assert fsum([1e16, 1.0, -1e16]) == 1.0


def test_q_bar_of_ball():
    assert q_bar(ball(), 8) == pytest.approx(FOUR_PI2, rel=1e-12)


def test_q_bar_of_scaled_ball_is_invariant():
    d = transform(ball(), scaling_map(1.3, 0.8))
    assert q_bar(d, 8) == pytest.approx(FOUR_PI2, rel=1e-5)


def test_q_bar_unitary_invariance():
    d = quartic_ball()
    U = np.array([[0.6, -0.8j], [-0.8j, 0.6]])
    a = q_bar(d, 8)
    b = q_bar(transform(d, unitary_map(U)), 8)
    assert b == pytest.approx(a, rel=1e-5)


def test_q_bar_below_sphere_value_off_the_ball():
    assert q_bar(quartic_ball(), 6) < FOUR_PI2


def test_total_report_fields():
    rep = total_q_prime(ball(), 4, convergence_grid=6, keep_points=True)
    assert rep.n_points == 4 * 8 * 8
    assert rep.contact_volume == pytest.approx(FOUR_PI2, rel=1e-4)
    assert rep.convergence is not None and rep.convergence < 1e-3
    assert max(abs(x) for x in rep.obstruction_range) < 1e-9
    assert rep.q_prime_range == pytest.approx((1.0, 1.0), abs=1e-9)
    d = rep.to_dict()
    assert "per_point" not in d and d["provenance"]["digest"] == ball().digest()
    assert len(rep.per_point["q_prime"]) == rep.n_points


def test_convergence_check_can_be_disabled():
    rep = total_q_prime(ball(), 4, obstruction=False, convergence_grid=0)
    assert rep.convergence is None and rep.convergence_grid is None


def test_bitwise_reproducible():
    d = twisted_ball()
    assert q_bar(d, 4) == q_bar(d, 4)


def test_surface_integral_rejects_bad_values():
    with pytest.raises(ValueError):
        surface_integral(ball(), np.ones(3), 4)
    with pytest.raises(NumericError):
        surface_integral(ball(), lambda p: np.full(len(p), np.nan), 4)


def test_variation_rhs_vanishes_at_ball():
    sigma = lambda p: np.abs(p[:, 0]) ** 4  # noqa: E731
    assert abs(variation_rhs(ball(), sigma, 4)) < 1e-9


def test_variation_check_reports():
    fam = Family(quartic_ball(), (z1 * zb1 * z2 * zb2).hermitian_part(), 0.05)
    rep = variation_check(fam, 0.04, N=4, levels=2)
    assert len(rep.differences) == 2
    assert np.isfinite(rep.richardson) and np.isfinite(rep.rhs)
    assert rep.to_dict()["grid"] == 4


def test_hessian_zero_for_translation():
    # rho + t Re z1 is a translated, rescaled ball
    sigma = (0.5 * z1 + 0.5 * zb1)
    rep = hessian_probe(sigma, 0.1, N=4)
    assert rep.sign == 0
    assert abs(rep.richardson) < 1e-6


def test_fit_recovers_synthetic_expansion():
    eps = np.geomspace(0.05, 0.002, 12)
    coef = np.array([1.5, -2.0, 0.7, 3.0, -0.4, 0.25])
    A = np.stack([eps ** -2, eps ** -1, np.log(eps), np.ones_like(eps), eps, eps ** 2], 1)
    c, resid, cond = fit_expansion(eps, A @ coef)
    # the eps^1 and eps^2 columns are nearly collinear at small eps
    assert np.allclose(c[:4], coef[:4], rtol=1e-9)
    assert np.allclose(c[4:], coef[4:], rtol=1e-5)
    assert resid < 1e-12 and len(FIT_BASIS) == 6


def test_renorm_ball_log_coefficient():
    fit = renorm_volume(ball(), N=4, n_radial=12)
    q = q_bar(ball(), 4)
    assert fit.log_coeff == pytest.approx(-q, rel=1e-9)
    assert fit.log_coeff_direct == pytest.approx(-q, rel=1e-9)
    assert fit.residual < 1e-10
    assert abs(fit.volume["log_coeff"]) < 1e-6


def test_renorm_rejects_bad_eps():
    with pytest.raises(ValueError):
        renorm_volume(ball(), eps_list=[0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07])
