"""Complex Monge-Ampere operator and Fefferman's approximate defining function.

For a defining function ``u`` of a domain in C^2 (positive inside),

    J(u) = det [[u, u_1, u_2], [u_1bar, u_11bar, u_21bar], [u_2bar, u_12bar, u_22bar]]

and Fefferman's function ``r`` satisfies ``J(r) = 1 + eta * r**3``.  The
restriction of ``eta`` to the boundary is the obstruction function ``O``.

The construction is done in jet arithmetic at boundary points:

1. ``r1 = rho * J(rho)**(-1/3)`` gives ``J(r1) = 1 + O(r1)``;
2. for ``s = 1, 2`` the order-``s`` error ``e = (J(u) - 1) / u**s`` is removed
   by ``u -> u - (e / k) u**(s+1)``, with the scalar ``k`` found by probing
   ``J(u + t u**(s+1))`` at several ``t``;
3. ``eta = (J(r) - 1) / r**3``.

At ``s = 3`` the probe slope vanishes; that is the obstruction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateDefiningFunction,
    NormalizationObstruction,
    NotPseudoconvex,
)
from .jets import Jet, jet_divide_by_power, jet_from_polynomial, jet_pow_real

# Sign constant of J, fixed by J(1 - |z|^2) = 1 (see tests/test_monge_ampere.py).
SIGMA = 1.0

# Order of the Fefferman normalization in C^2 (n + 2 with n = 1).
NORMAL_ORDER = 3

# Minimum Taylor degree of rho for each quantity (before the +1 margin).
DEGREE_BUDGET = {
    "theta": 2,
    "levi": 3,
    "torsion": 4,
    "scal": 5,
    "laplacian_scal": 7,
    "q_prime": 7,
    "p_prime": 7,
    "obstruction": 8,
    "ambient_q_prime": 7,
    "volume": 8,
}
DEGREE_MARGIN = 1

PROBE_TOL = 1e-9


def required_degree(quantity: str, margin: int = DEGREE_MARGIN) -> int:
    return DEGREE_BUDGET[quantity] + margin


def _det3(a):
    return (a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]))


def jz(u: Jet) -> Jet:
    """Monge-Ampere determinant of ``u`` as a jet of degree ``u.degree - 2``."""
    if u.degree < 2:
        raise ValueError("jz needs a jet of degree >= 2")
    if u.ncomplex != 2:
        raise ValueError("jz is implemented for C^2")
    du = [u.d(0), u.d(2)]
    dbu = [u.d(1), u.d(3)]
    # entry (k, j) = d_j dbar_k u
    a = [[u, du[0], du[1]],
         [dbu[0], du[0].d(1), du[1].d(1)],
         [dbu[1], du[0].d(3), du[1].d(3)]]
    out = _det3(a)
    out = out if SIGMA == 1.0 else out.scale(SIGMA)
    return Jet._raw(out.coeffs.copy(), out.degree, out.base, u.real)


def levi_determinant(u: Jet) -> np.ndarray:
    """Value of ``J(u)`` at the base point, shape (B,)."""
    return jz(u.truncate(2)).value


def snap_boundary(rho: Jet) -> Jet:
    """Set the constant term to exactly zero (base point on the boundary)."""
    c = rho.coeffs.copy()
    c[:, 0] = 0
    return Jet._raw(c, rho.degree, rho.base, rho.real)


def _check_boundary_jet(rho: Jet, tol=1e-9):
    scale = max(1.0, rho.max_abs())
    if np.max(np.abs(rho.coeffs[:, 0])) > tol * scale:
        raise DegenerateDefiningFunction("base point is not on the boundary")
    lin = rho.coeffs[:, 1:5]
    if np.any(np.max(np.abs(lin), axis=1) < tol * scale):
        raise DegenerateDefiningFunction("degenerate defining function: d rho = 0 on the boundary")


def fefferman_step1(rho: Jet) -> Jet:
    """First normalization ``r1 = rho * J(rho)**(-1/3)`` (degree ``D - 1``)."""
    if rho.degree < 3:
        raise ValueError("fefferman_step1 needs degree >= 3")
    _check_boundary_jet(rho)
    rho = snap_boundary(rho)
    j = jz(rho)
    if np.any(j.value <= 0):
        raise NotPseudoconvex("J(rho) <= 0: not strictly pseudoconvex at this point")
    return rho.mul_ext(jet_pow_real(j, -1.0 / NORMAL_ORDER))


def _power(u: Jet, k: int) -> Jet:
    out = u
    for _ in range(k - 1):
        out = out.mul_ext(u)
    return out


def _order_error(u: Jet, s: int) -> Jet:
    return jet_divide_by_power(jz(u) - 1.0, u, s)


def probe_slope(u: Jet, s: int, ts=(0.0, 1.0, 0.5)):
    """Slope and affineness residual of ``t -> order-s error of J(u + t u^(s+1))``.

    Returns ``(slope, residual)`` with per-batch arrays.
    """
    us1 = _power(u, s + 1)
    vals = [_order_error(u + us1.scale(t), s).coeffs[:, 0] for t in ts]
    t0, t1, t2 = ts
    slope = (vals[1] - vals[0]) / (t1 - t0)
    resid = vals[2] - (vals[0] + slope * (t2 - t0))
    return slope.real, np.abs(resid)


def fefferman_refine(u: Jet, s: int, return_info=False):
    """Remove the order-``s`` error of ``J(u) - 1``.

    The update is ``u' = u (1 - (e / k) u**s)`` with ``e`` the quotient of
    ``J(u) - 1`` by ``u**s`` and ``k`` the probed slope.  Refuses with
    :class:`NormalizationObstruction` when the slope vanishes.
    """
    s = int(s)
    if s < 1:
        raise ValueError("refinement order must be >= 1")
    e = _order_error(u, s)
    slope, resid = probe_slope(u, s)
    if np.any(np.abs(slope) < PROBE_TOL):
        raise NormalizationObstruction(f"probe slope vanishes at order {s}")
    if np.any(resid > PROBE_TOL * np.abs(slope)):
        raise NormalizationObstruction(f"probe not affine at order {s}")
    out = u - e.scale(1.0 / slope).mul_ext(_power(u, s + 1))
    out = Jet._raw(out.coeffs.copy(), out.degree, out.base, True)
    if return_info:
        return out, {"slope": slope, "affine_residual": resid,
                     "error_before": np.abs(e.coeffs[:, 0])}
    return out


@dataclass
class FeffermanResult:
    """Fefferman defining function jet together with the remainder ``eta``."""

    r_jet: Jet
    eta_jet: Jet
    obstruction: np.ndarray
    stage_residuals: list = field(default_factory=list)
    slopes: list = field(default_factory=list)
    r1_jet: Jet | None = None

    def __post_init__(self):
        self.obstruction = np.asarray(self.obstruction, dtype=float)


def fefferman(rho: Jet) -> FeffermanResult:
    """Full normalization chain ``rho -> r1 -> r2 -> r3`` and ``eta``.

    ``rho`` must be a real jet of a defining function (positive inside) at
    boundary points, of degree >= 8 to reach ``O``.
    """
    if rho.degree < NORMAL_ORDER + 2:
        raise ValueError("fefferman needs degree >= 5")
    r1 = fefferman_step1(rho)
    u = r1
    residuals = []
    slopes = []
    for s in range(1, NORMAL_ORDER):
        u, info = fefferman_refine(u, s, return_info=True)
        slopes.append(info["slope"])
        after = _order_error(u, s).coeffs
        residuals.append(float(np.max(np.abs(after[:, 0]))))
    eta = jet_divide_by_power(jz(u) - 1.0, u, NORMAL_ORDER)
    eta = Jet._raw(eta.coeffs.copy(), eta.degree, eta.base, True)
    return FeffermanResult(u, eta, eta.value, residuals, slopes, r1)


def fefferman_interior(rho: Jet, slopes=(4.0, 3.0)) -> Jet:
    """Division-free normalization valid at any point near the boundary.

    ``r1 = rho J(rho)^(-1/3)`` then ``u -> u (1 - (J(u) - 1) / k)`` for the
    stage slopes ``k``.  Each stage costs two degrees.  Agrees with
    :func:`fefferman` modulo ``O(r^4)``, so the result still solves
    ``J(r) = 1 + O(r^3)``.
    """
    j = jz(rho)
    if np.any(j.value <= 0):
        raise NotPseudoconvex("J(rho) <= 0: not strictly pseudoconvex at this point")
    u = rho * jet_pow_real(j, -1.0 / NORMAL_ORDER)
    for k in slopes:
        u = u * (1.0 - (jz(u) - 1.0).scale(1.0 / k))
    return Jet._raw(u.coeffs.copy(), u.degree, u.base, True)


def fefferman_r_at(rho_poly, points, degree=2, slopes=(4.0, 3.0)) -> Jet:
    """Jet of the global Fefferman function at arbitrary points (interior allowed)."""
    need = degree + 2 * (1 + len(slopes))
    rho = jet_from_polynomial(rho_poly, points, need)
    return fefferman_interior(rho, slopes)


def obstruction_at(domain, p, degree=None) -> np.ndarray:
    """Obstruction ``O`` at boundary point(s) ``p`` of ``domain``."""
    degree = required_degree("obstruction") if degree is None else degree
    rho = domain.jet(p, degree)
    return fefferman(rho).obstruction
