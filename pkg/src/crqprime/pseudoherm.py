"""Pseudohermitian invariants of the boundary of a domain in C^2.

Everything is computed on the level sets of a defining jet ``r`` (positive
inside) with the contact form ``theta = (i/2)(d - dbar) r``, which equals
``i d r`` on tangent vectors.  Vector fields are stored as four component
jets ``(a_1, a_2, b_1, b_2)`` meaning ``sum a_j d/dz_j + b_j d/dzbar_j``.
All fields used are tangent to every level set of ``r``, so derivatives
along them evaluated at a boundary base point only see boundary data.

Frame and structure equations (one complex dimension of CR structure):

* ``Z = c (r_2 d_1 - r_1 d_2)`` spans T^{1,0}; ``c`` is a constant gauge.
* ``T`` is the Reeb field: ``theta(T) = 1`` and ``d theta(T, .) = 0``.
* ``[Z, Zbar] = alpha Z + beta Zbar - i h T`` defines the Levi form ``h``.
* Tanaka-Webster: ``omega(Zbar) = -alpha``, ``omega(Z) = Zh/h + conj(alpha)``,
  ``omega(T)`` is the Z-part of ``[T, Z]``, and the torsion ``A^1_1bar`` is
  minus the Z-part of ``[T, Zbar]``.
* ``R h = d omega(Z, Zbar)``.

``Delta_b f = -(f_{,1 1bar} + f_{,1bar 1}) / h`` is non-negative on the
sphere's spectrum, and

    Q' = Delta_b R / 2 + R^2 / 4 - |A|^2,
    P'f = Delta_b^2 f - Re nabla^1(R nabla_1 f - 2i A_11 nabla^1 f).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDefiningFunction, NotPseudoconvex
from .jets import Jet, jet_from_polynomial


# ---------------------------------------------------------------------------
# vector fields on C^2 acting on jets


def apply_field(V, f: Jet) -> Jet:
    """Derivative of ``f`` along ``V = (a_1, a_2, b_1, b_2)``."""
    out = None
    for k, c in enumerate(V):
        if c is None:
            continue
        var = 2 * (k % 2) + (1 if k >= 2 else 0)
        term = c * f.d(var)
        out = term if out is None else out + term
    return out


def bracket(V, W):
    return [apply_field(V, w) - apply_field(W, v) for v, w in zip(V, W)]


def conj_field(V):
    a1, a2, b1, b2 = V
    return [b1.conj(), b2.conj(), a1.conj(), a2.conj()]


def _value(j: Jet):
    return j.coeffs[:, 0].copy()


@dataclass
class Frame:
    """Frame fields and their decomposition data, all as jets."""

    r: Jet
    r1: Jet
    r2: Jet
    Z: list
    Zb: list
    T: list
    t: tuple
    norm2: Jet  # |Z|^2 = sum |Z^j|^2

    def decompose(self, V):
        """Coefficients ``(c_Z, c_Zbar, c_T)`` of a tangent field ``V``."""
        a1, a2, b1, b2 = V
        cT = (self.r1 * a1 + self.r2 * a2).scale(1j)
        t1, t2 = self.t
        p1, p2 = a1 - cT * t1, a2 - cT * t2
        q1, q2 = b1 - cT * t1.conj(), b2 - cT * t2.conj()
        Z1, Z2 = self.Z[0], self.Z[1]
        cZ = (p1 * Z1.conj() + p2 * Z2.conj()) / self.norm2
        cZb = (q1 * Z1 + q2 * Z2) / self.norm2
        return cZ, cZb, cT


def build_frame(r: Jet, gauge=None) -> Frame:
    """Frame ``Z``, ``T`` adapted to ``theta[r]``.

    ``gauge`` is a per-batch complex constant multiplying ``Z``; by default
    it normalizes the Levi form to ``h = 1`` at the base point.
    """
    if r.degree < 2:
        raise ValueError("frame needs a jet of degree >= 2")
    r1, r2 = r.d(0), r.d(2)
    grad = np.abs(_value(r1)) + np.abs(_value(r2))
    if np.any(grad == 0):
        raise DegenerateDefiningFunction("dr = 0 at base point")
    L = [[r.d(0).d(1), r.d(0).d(3)], [r.d(2).d(1), r.d(2).d(3)]]  # L[j][k] = r_{j kbar}
    r1b, r2b = r1.conj(), r2.conj()
    v1 = L[0][0] * r2b - L[0][1] * r1b
    v2 = L[1][0] * r2b - L[1][1] * r1b
    det = r1 * v2 - r2 * v1
    if np.any(_value(det) == 0):
        raise NotPseudoconvex("Levi form degenerate at base point")
    t1 = (v2 / det).scale(-1j)
    t2 = (v1 / det).scale(1j)
    if gauge is None:
        # h(p) = -sum r_{j kbar} Z^j conj(Z^k) for the unscaled Z
        Zv = np.stack([_value(r2), -_value(r1)], axis=1)
        Lv = np.array([[_value(L[j][k]) for k in range(2)] for j in range(2)])
        h0 = -np.einsum("jkb,bj,bk->b", Lv, Zv, Zv.conj()).real
        if np.any(h0 <= 0):
            raise NotPseudoconvex("Levi form not positive: not strictly pseudoconvex")
        gauge = 1.0 / np.sqrt(h0)
    gauge = np.broadcast_to(np.asarray(gauge, dtype=complex), (r.batch,))
    Z1, Z2 = r2.scale(gauge), (-r1).scale(gauge)
    zero = Z1.scale(0.0)
    Z = [Z1, Z2, zero, zero]
    Zb = conj_field(Z)
    T = [t1, t2, t1.conj(), t2.conj()]
    norm2 = Z1 * Z1.conj() + Z2 * Z2.conj()
    return Frame(r, r1, r2, Z, Zb, T, (t1, t2), norm2)


@dataclass
class Connection:
    """Tanaka-Webster data as jets along the level sets."""

    frame: Frame
    h: Jet
    alpha: Jet
    omega_Z: Jet
    omega_Zb: Jet
    omega_T: Jet
    A: Jet  # A^1_{1bar}
    scal: Jet

    def Zf(self, f):
        return apply_field(self.frame.Z, f)

    def Zbf(self, f):
        return apply_field(self.frame.Zb, f)

    def Tf(self, f):
        return apply_field(self.frame.T, f)

    def hess_11b(self, f):
        """``f_{,1 1bar} = Zbar Z f - omega(Zbar) Z f``."""
        zf = self.Zf(f)
        return self.Zbf(zf) - self.omega_Zb * zf

    def hess_1b1(self, f):
        """``f_{,1bar 1} = Z Zbar f - conj(omega(Zbar)) Zbar f``."""
        zbf = self.Zbf(f)
        return self.Zf(zbf) - self.omega_Zb.conj() * zbf

    def sublaplacian(self, f):
        return -(self.hess_11b(f) + self.hess_1b1(f)) / self.h

    def div_1(self, X):
        """``nabla^1 X_1 = (Zbar X - omega(Zbar) X) / h`` for a (1,0)-covector ``X_1``."""
        return (self.Zbf(X) - self.omega_Zb * X) / self.h


def tanaka_webster(r: Jet, gauge=None) -> Connection:
    fr = build_frame(r, gauge)
    Z, Zb, T = fr.Z, fr.Zb, fr.T
    cZ, cZb, cT = fr.decompose(bracket(Z, Zb))
    h = cT.scale(1j)
    if np.any(_value(h).real <= 0):
        raise NotPseudoconvex("Levi form not positive: not strictly pseudoconvex")
    alpha, beta = cZ, cZb
    omega_Zb = -alpha
    omega_Z = apply_field(Z, h) / h + alpha.conj()
    tz = fr.decompose(bracket(T, Z))
    omega_T = tz[0]
    A = -tz[1].conj()
    num = (apply_field(Z, omega_Zb) - apply_field(Zb, omega_Z)
           - (alpha * omega_Z + beta * omega_Zb + cT * omega_T))
    scal = num / h
    return Connection(fr, h, alpha, omega_Z, omega_Zb, omega_T, A, scal)


# ---------------------------------------------------------------------------
# public data types


@dataclass
class ContactData:
    """Contact data at base points (arrays with a leading batch axis).

    ``theta`` and ``T`` are in real coordinates ``(x1, y1, x2, y2)``;
    ``dtheta`` is the antisymmetric 4x4 matrix of the 2-form; ``theta1`` the
    coefficients of the (1,0)-form in ``(dz1, dz2)``; ``Z1`` the components
    of the frame vector in ``(d/dz1, d/dz2)``.
    """

    theta: np.ndarray
    dtheta: np.ndarray
    theta1: np.ndarray
    Z1: np.ndarray
    T: np.ndarray
    h: np.ndarray


@dataclass
class PseudohermData:
    h11bar: np.ndarray
    Scal: np.ndarray
    A11: np.ndarray
    laplacian_b_Scal: np.ndarray
    normA2: np.ndarray
    Qprime: np.ndarray
    residuals: dict
    connection: Connection | None = None


def _real_basis_dz():
    # dz_j(e) for the real basis e = d/dx1, d/dy1, d/dx2, d/dy2
    B = np.zeros((4, 2), dtype=complex)
    B[0, 0], B[1, 0], B[2, 1], B[3, 1] = 1, 1j, 1, 1j
    return B


def contact_form_at(r_jet: Jet, gauge=None) -> ContactData:
    """Values of ``theta``, ``d theta``, ``theta^1``, ``Z_1``, ``T`` at the base points."""
    fr = build_frame(r_jet.truncate(min(r_jet.degree, 2)), gauge)
    rj = np.stack([_value(fr.r1), _value(fr.r2)], axis=1)
    theta = np.empty((r_jet.batch, 4))
    theta[:, 0::2] = -rj.imag
    theta[:, 1::2] = -rj.real
    r = fr.r
    L = np.array([[_value(r.d(2 * j).d(2 * k + 1)) for k in range(2)] for j in range(2)])
    B = _real_basis_dz()
    # d theta = -i sum L_{jk} dz_j ^ dzbar_k
    M = np.einsum("jkb,aj,ck->bac", L, B, B.conj())
    dtheta = (-1j * (M - np.swapaxes(M, 1, 2))).real
    Zv = np.stack([_value(fr.Z[0]), _value(fr.Z[1])], axis=1)
    tv = np.stack([_value(fr.t[0]), _value(fr.t[1])], axis=1)
    # theta1 = c . dz with c . Z = 1, c . t = 0
    mats = np.stack([Zv, tv], axis=1)
    rhs = np.zeros((r_jet.batch, 2, 1), dtype=complex)
    rhs[:, 0, 0] = 1
    theta1 = np.linalg.solve(mats, rhs)[:, :, 0]
    Treal = np.empty((r_jet.batch, 4))
    Treal[:, 0::2] = tv.real
    Treal[:, 1::2] = tv.imag
    h = -np.einsum("jkb,bj,bk->b", L, Zv, Zv.conj()).real
    return ContactData(theta, dtheta, theta1, Zv, Treal, h)


def webster_invariants(r_jet: Jet, gauge=None, keep_connection=False) -> PseudohermData:
    """Levi form, scalar curvature, torsion, ``Delta_b Scal`` and ``Q'`` at base points.

    ``r_jet`` must be a Fefferman defining function modulo ``O(r^2)``; its
    degree must be at least 6 for ``Delta_b Scal``.
    """
    if r_jet.degree < 6:
        raise ValueError("webster_invariants needs a jet of degree >= 6")
    con = tanaka_webster(r_jet, gauge)
    lap = con.sublaplacian(con.scal)
    scal = _value(con.scal)
    A = _value(con.A)
    h = _value(con.h)
    normA2 = np.abs(A) ** 2
    lap_v = _value(lap)
    q = 0.5 * lap_v.real + 0.25 * scal.real ** 2 - normA2
    # consistency residuals of the structure equations
    f = con.frame.r1 + con.frame.r1.conj()
    comm = con.hess_11b(f) - con.hess_1b1(f) - (con.h * con.Tf(f)).scale(1j)
    reT = con.omega_T.re - con.Tf(con.h) / con.h.scale(2.0)
    residuals = {
        "scal_imag": np.abs(scal.imag),
        "laplacian_imag": np.abs(lap_v.imag),
        "commutator": np.abs(_value(comm)),
        "omega_T_real": np.abs(_value(reT)),
        "h_imag": np.abs(h.imag),
    }
    # A11 = h A^{1bar}_1 with A^{1bar}_1 = conj(A^1_{1bar})
    return PseudohermData(h.real, scal.real, h.real * A.conj(), lap_v.real, normA2, q,
                          residuals, con if keep_connection else None)


def q_prime_at(r_jet: Jet, gauge=None) -> np.ndarray:
    """``Q' = Delta_b Scal / 2 + Scal^2 / 4 - |A|^2`` at the base points."""
    return webster_invariants(r_jet, gauge).Qprime


def p_prime_jet(f: Jet, con: Connection) -> Jet:
    """``P'f`` as a jet (real part taken at the end)."""
    lap2 = con.sublaplacian(con.sublaplacian(f))
    X = con.scal * con.Zf(f) - (con.A.conj() * con.Zbf(f)).scale(2j)
    return lap2 - con.div_1(X).re


def p_prime_at(f_poly, r_jet: Jet, gauge=None) -> np.ndarray:
    """``P'f`` at the base points for a real polynomial ``f``.

    ``f`` should be the real part of a holomorphic polynomial (so that its
    restriction is CR-pluriharmonic); the formula is evaluated regardless.
    """
    if r_jet.degree < 6:
        raise ValueError("p_prime_at needs a jet of degree >= 6")
    con = tanaka_webster(r_jet, gauge)
    fj = jet_from_polynomial(f_poly, r_jet.base, r_jet.degree, real=True)
    return _value(p_prime_jet(fj, con)).real
