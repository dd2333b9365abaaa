"""Fast self-checks run by ``crqprime selftest``.

Each check returns the measured error; it passes when the error is below
its tolerance.  The run ends with the library's convention constants.
"""

from __future__ import annotations

import numpy as np

from .ambient import ambient_metric_at, p_prime_from_r, q_k_from_r
from .domains import ball, boundary_point, perturbed_ball, shear_map, transform
from .jets import jet_divide_by_power, jet_from_polynomial
from .monge_ampere import SIGMA, fefferman, jz
from .poly import Polynomial
from .pseudoherm import p_prime_at, webster_invariants

# Q^(2) from the ambient metric equals this multiple of the frame formula for Q'.
AMBIENT_TO_FORMULA = 2.0

_DIRS = np.array([[1.0, 0.0], [0.6, 0.8j], [np.exp(0.7j) * 0.5, 0.75 ** 0.5]])


def _perturbed():
    return perturbed_ball({(2, 2, 0, 0): -0.1, (1, 1, 1, 1): 0.05, (2, 0, 0, 2): 0.03},
                          "selftest")


def check_ball_jz():
    rho = jet_from_polynomial(ball().rho, _DIRS, 4)
    j = jz(rho)
    c = j.coeffs.copy()
    c[:, 0] -= 1
    return float(np.max(np.abs(c)))


def check_ball_fefferman():
    b = ball()
    res = fefferman(b.jet(boundary_point(b, _DIRS), 8))
    diff = res.r_jet.coeffs - b.jet(res.r_jet.base, res.r_jet.degree).coeffs
    return float(max(np.max(np.abs(diff)), np.max(np.abs(res.obstruction))))


def check_divide():
    z1, z2 = Polynomial.z(0), Polynomial.z(1)
    x1 = (z1 + z1.conj()) * 0.5
    x2 = (z2 + z2.conj()) * 0.5
    u = x1 + x2 * x2
    base = np.array([[-0.09, 0.3]])
    g = jet_from_polynomial(u * u * u, base, 6)
    h = jet_divide_by_power(g, jet_from_polynomial(u, base, 6), 3)
    c = h.coeffs.copy()
    c[:, 0] -= 1
    return float(np.max(np.abs(c)))


def check_ball_webster():
    b = ball()
    res = fefferman(b.jet(boundary_point(b, _DIRS), 8))
    w = webster_invariants(res.r1_jet)
    return float(max(np.max(np.abs(w.Scal - w.Scal[0])), np.max(np.abs(w.A11)),
                     np.max(np.abs(w.laplacian_b_Scal))))


def check_image_of_ball():
    d = transform(ball(), shear_map(0.25, 2))
    res = fefferman(d.jet(boundary_point(d, _DIRS), 8))
    return float(np.max(np.abs(res.obstruction)))


def check_dual_q():
    d = _perturbed()
    p = boundary_point(d, _DIRS)
    res = fefferman(d.jet(p, 8))
    q = webster_invariants(res.r1_jet).Qprime
    amb = ambient_metric_at(res.r_jet)
    q2 = q_k_from_r(res.r_jet, 2, amb)
    q1 = q_k_from_r(res.r_jet, 1, amb)
    return float(max(np.max(np.abs(q2 / q - AMBIENT_TO_FORMULA)), np.max(np.abs(q1))))


def check_dual_p():
    d = _perturbed()
    p = boundary_point(d, _DIRS)
    res = fefferman(d.jet(p, 8))
    f = Polynomial.z(0) + Polynomial.z(1) ** 2 * 0.5
    a = p_prime_from_r(f, res.r_jet)
    b = p_prime_at(f.hermitian_part(), res.r1_jet)
    return float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b))))


CHECKS = [
    ("J(1-|z|^2) = 1", check_ball_jz, 1e-12),
    ("ball is a Fefferman fixed point, O = 0", check_ball_fefferman, 1e-9),
    ("u^3 / u^3 = 1", check_divide, 1e-12),
    ("ball: Scal constant, A = 0, Delta_b Scal = 0", check_ball_webster, 1e-9),
    ("sheared ball: O = 0", check_image_of_ball, 1e-7),
    ("ambient Q^(2) = 2 Q', Q^(1) = 0", check_dual_q, 1e-6),
    ("ambient P' = frame P'", check_dual_p, 1e-6),
]


def run_selftest(verbose=False) -> bool:
    ok = True
    for name, fn, tol in CHECKS:
        try:
            err = fn()
            passed = err < tol
        except Exception as exc:  # noqa: BLE001 - report and continue
            err, passed = float("nan"), False
            if verbose:
                print(f"  {name}: raised {type(exc).__name__}: {exc}")
        ok &= passed
        if verbose:
            print(f"{'PASS' if passed else 'FAIL'}  {name}  (error {err:.2e}, tol {tol:.0e})")
    if verbose:
        print("conventions:")
        print(f"  sign of J: {SIGMA:+.0f} (J = +det, fixed by J(1-|z|^2) = 1)")
        print(f"  ambient Q^(2) / frame Q': {AMBIENT_TO_FORMULA:g}")
        print("  Delta_b = -(f_{,1 1bar} + f_{,1bar 1}) / h, sphere Scal = 2, Q'(S^3) = 1")
    return ok
