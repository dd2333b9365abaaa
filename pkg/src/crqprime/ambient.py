"""Ambient Lorentz-Kahler metric on C* x C^2 and the ambient Q' and P'.

With ``rho_sharp(z0, z) = |z0|^2 r(z)`` for a Fefferman defining function
``r``, the metric ``g_{j kbar} = -d_j d_kbar rho_sharp`` has one negative
and two positive eigenvalues.  Its Laplacian ``Delta = -g^{j kbar} d_j d_kbar``
gives

    Q^(k) = Delta^2 ((-log|z0|^2)^k)   and   P'f = -Delta^2 (f log|z0|^2),

evaluated on ``{1} x M``.  These are computed from jets in the six formal
variables ``(w0, w0bar, w1, w1bar, w2, w2bar)`` around ``(1, p)``.  This is an
independent route to the same curvature quantities as
:mod:`crqprime.pseudoherm`, used to pin down conventions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotInvertible
from .jets import Jet, jet_from_polynomial, jet_lift
from .monge_ampere import fefferman, required_degree


def _mat_mul(A, B):
    n = len(A)
    return [[sum((A[i][k] * B[k][j] for k in range(1, n)), A[i][0] * B[0][j])
             for j in range(n)] for i in range(n)]


@dataclass
class AmbientData:
    """Metric jets at ``(1, p)``.

    ``g_tilde[j][k]`` is ``g_{j kbar}``, ``g_inv[k][j]`` is ``g^{j kbar}``
    (so that ``sum_k g_tilde[j][k] g_inv[k][l] = delta_jl``).
    """

    g_tilde: list
    g_inv: list
    base: np.ndarray

    @property
    def degree(self):
        return self.g_inv[0][0].degree

    def value(self):
        return np.array([[g.coeffs[:, 0] for g in row] for row in self.g_tilde]).transpose(2, 0, 1)

    def inverse_residual(self):
        n = len(self.g_tilde)
        prod = _mat_mul(self.g_tilde, self.g_inv)
        worst = 0.0
        for i in range(n):
            for j in range(n):
                c = prod[i][j].coeffs.copy()
                if i == j:
                    c[:, 0] -= 1
                worst = max(worst, float(np.max(np.abs(c))))
        return worst


def lift_rho_sharp(r_jet: Jet) -> Jet:
    """Jet of ``|z0|^2 r(z)`` at ``(1, base)``."""
    r6 = jet_lift(r_jet, [1.0])
    z0 = Jet.coordinate(0, r6.base, r6.degree)
    z0b = Jet.coordinate(1, r6.base, r6.degree)
    out = (z0 * z0b) * r6
    return Jet._raw(out.coeffs.copy(), out.degree, out.base, True)


def metric_from_potential(rho_sharp: Jet, sign=-1.0):
    n = rho_sharp.ncomplex
    return [[rho_sharp.d(2 * j).d(2 * k + 1).scale(sign) for k in range(n)] for j in range(n)]


def invert_metric(G):
    """Order-by-order inverse ``sum_k (-G0^{-1} N)^k G0^{-1}`` of a jet matrix."""
    n = len(G)
    G0 = np.array([[G[i][j].coeffs[:, 0] for j in range(n)] for i in range(n)]).transpose(2, 0, 1)
    if np.any(np.abs(np.linalg.det(G0)) < 1e-14):
        raise NotInvertible("ambient metric degenerate at base point")
    G0inv = np.linalg.inv(G0)
    proto = G[0][0]
    const = [[Jet.constant(G0inv[:, i, j], proto.base, proto.degree, False)
              for j in range(n)] for i in range(n)]
    N = []
    for i in range(n):
        row = []
        for j in range(n):
            c = G[i][j].coeffs.copy()
            c[:, 0] = 0
            row.append(Jet._raw(c, proto.degree, proto.base, False))
        N.append(row)
    X = _mat_mul(const, N)
    X = [[-x for x in row] for row in X]
    out = const
    term = const
    for _ in range(proto.degree):
        term = _mat_mul(X, term)
        out = [[out[i][j] + term[i][j] for j in range(n)] for i in range(n)]
    return out


def ambient_metric_at(r_jet: Jet, p=None) -> AmbientData:
    """Ambient metric at ``(1, p)`` for a Fefferman jet ``r_jet`` based at ``p``."""
    if p is not None and not np.allclose(np.atleast_2d(p), r_jet.base):
        raise ValueError("r_jet is not based at p")
    rs = lift_rho_sharp(r_jet)
    G = metric_from_potential(rs)
    return AmbientData(G, invert_metric(G), rs.base)


def ambient_laplacian(f: Jet, amb: AmbientData) -> Jet:
    """``-sum g^{j kbar} d_j d_kbar f``; degree drops by two."""
    n = len(amb.g_inv)
    out = None
    for j in range(n):
        fj = f.d(2 * j)
        for k in range(n):
            term = amb.g_inv[k][j] * fj.d(2 * k + 1)
            out = term if out is None else out + term
    return -out


def log_abs_z0_sq(base6: np.ndarray, degree: int) -> Jet:
    """``log|z0|^2`` as the exactly pluriharmonic jet ``log z0 + log z0bar``."""
    z0 = Jet.coordinate(0, base6, degree)
    lz = z0.log()
    out = lz + lz.conj()
    return Jet._raw(out.coeffs.copy(), degree, out.base, True)


def q_k_from_r(r_jet: Jet, k: int = 2, amb: AmbientData | None = None) -> np.ndarray:
    """``Delta^2 ((-log|z0|^2)^k)`` at ``(1, base)``."""
    amb = ambient_metric_at(r_jet) if amb is None else amb
    deg = amb.degree + 2
    L = -log_abs_z0_sq(amb.base, deg)
    f = L ** int(k)
    out = ambient_laplacian(ambient_laplacian(f, amb), amb)
    return out.coeffs[:, 0].real.copy()


def p_prime_from_r(f_holo, r_jet: Jet, amb: AmbientData | None = None) -> np.ndarray:
    """``-Delta^2 ((Re f_holo) log|z0|^2)`` at ``(1, base)``."""
    if not f_holo.is_holomorphic():
        raise ValueError("f_holo must be a holomorphic polynomial")
    amb = ambient_metric_at(r_jet) if amb is None else amb
    deg = amb.degree + 2
    fr = f_holo.hermitian_part()
    fj = jet_lift(jet_from_polynomial(fr, r_jet.base, deg, real=True), [1.0])
    L = log_abs_z0_sq(amb.base, deg)
    out = ambient_laplacian(ambient_laplacian(fj * L, amb), amb)
    return -out.coeffs[:, 0].real.copy()


def _fefferman_jet(domain, p, degree):
    degree = required_degree("ambient_q_prime") if degree is None else degree
    return fefferman(domain.jet(p, degree)).r_jet


def q_prime_ambient_at(domain, p, k: int = 2, degree=None) -> np.ndarray:
    """Ambient ``Q^(k)`` at boundary points ``p`` of ``domain`` (``k = 2`` is Q')."""
    return q_k_from_r(_fefferman_jet(domain, p, degree), k)


def p_prime_ambient_at(f_holo, domain, p, degree=None) -> np.ndarray:
    return p_prime_from_r(f_holo, _fefferman_jet(domain, p, degree))
