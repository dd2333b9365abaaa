import numpy as np
import pytest

from crqprime.ambient import (
    ambient_laplacian,
    ambient_metric_at,
    log_abs_z0_sq,
    p_prime_ambient_at,
    p_prime_from_r,
    q_k_from_r,
    q_prime_ambient_at,
)
from crqprime.domains import ball, boundary_point
from crqprime.jets import Jet
from crqprime.monge_ampere import fefferman
from crqprime.poly import Polynomial
from crqprime.pseudoherm import p_prime_at, webster_invariants
from crqprime.selftest import AMBIENT_TO_FORMULA

from conftest import DIRS, quartic_ball

z1, z2 = Polynomial.z(0), Polynomial.z(1)


def fjet(domain, degree=9):
    return fefferman(domain.jet(boundary_point(domain, DIRS), degree))


def test_metric_signature_on_ball():
    amb = ambient_metric_at(fjet(ball()).r_jet)
    ev = np.linalg.eigvalsh(amb.value())
    assert np.all(ev[:, 0] < 0) and np.all(ev[:, 1:] > 0)


def test_inverse_residual(perturbed):
    amb = ambient_metric_at(fjet(perturbed).r_jet)
    assert amb.inverse_residual() < 1e-11


def test_log_z0_is_pluriharmonic():
    base = np.array([[1.0, 0.3, 0.2j]])
    L = log_abs_z0_sq(base, 5)
    assert L.value[0] == pytest.approx(0.0, abs=1e-15)
    assert L.d(0).d(1).max_abs() == 0


def test_laplacian_of_constant_is_zero():
    amb = ambient_metric_at(fjet(quartic_ball()).r_jet)
    one = Jet.constant(1.0, amb.base, amb.degree + 2)
    assert ambient_laplacian(one, amb).max_abs() == 0


def test_ball_q_values():
    r = fjet(ball()).r_jet
    amb = ambient_metric_at(r)
    assert np.allclose(q_k_from_r(r, 2, amb), 2.0, atol=1e-9)
    assert np.max(np.abs(q_k_from_r(r, 1, amb))) < 1e-10


def test_q0_q1_vanish(perturbed):
    r = fjet(perturbed).r_jet
    amb = ambient_metric_at(r)
    assert np.max(np.abs(q_k_from_r(r, 0, amb))) == 0
    assert np.max(np.abs(q_k_from_r(r, 1, amb))) < 1e-8


def test_dual_q_prime(perturbed):
    res = fjet(perturbed)
    frame = webster_invariants(res.r1_jet).Qprime
    ambient = q_prime_ambient_at(perturbed, res.r_jet.base)
    assert np.allclose(ambient / frame, AMBIENT_TO_FORMULA, rtol=1e-6)


@pytest.mark.parametrize("f", [z1, z1 * z2 + 0.5 * z2, 0.3j * z1 ** 2])
def test_dual_p_prime(perturbed, f):
    res = fjet(perturbed)
    a = p_prime_from_r(f, res.r_jet)
    b = p_prime_at(f.hermitian_part(), res.r1_jet)
    assert np.allclose(a, b, rtol=1e-6, atol=1e-8)


def test_p_prime_ambient_kills_constants():
    d = quartic_ball()
    p = boundary_point(d, DIRS)
    v = p_prime_ambient_at(Polynomial.constant(1.0), d, p)
    assert np.max(np.abs(v)) < 1e-12


def test_p_prime_rejects_non_holomorphic():
    res = fjet(ball())
    with pytest.raises(ValueError):
        p_prime_from_r(Polynomial.zbar(0), res.r_jet)
