"""Boundary and interior integrals built on the pointwise invariants.

* :func:`total_q_prime` integrates ``Q'`` against ``theta ^ d theta`` over a
  Hopf grid of the boundary.
* :func:`variation_check` compares a central difference of the total ``Q'``
  along a family with ``2 * int rho_dot O theta ^ d theta``.
* :func:`hessian_probe` takes second differences at the unit ball.
* :func:`renorm_volume` expands the ``g_+`` volume integrals over
  ``{r > eps}`` in ``eps``.

Sums over grid nodes use ``math.fsum`` (correctly rounded, independent of
order), so reports are bit-reproducible for a fixed configuration.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.special import roots_legendre

from . import __version__
from .domains import (
    BoundaryGrid,
    DomainSpec,
    Family,
    attach_contact_density,
    ball,
    boundary_grid,
    family_at,
    family_direction_integrand,
)
from .errors import NumericError
from .jets import jet_from_polynomial
from .monge_ampere import (
    DEGREE_BUDGET,
    NORMAL_ORDER,
    fefferman,
    fefferman_interior,
    fefferman_step1,
    jz,
    required_degree,
)
from .pseudoherm import contact_form_at, webster_invariants

CHUNK = 512


def fsum(values) -> float:
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


# ---------------------------------------------------------------------------
# pointwise evaluation on a grid


@dataclass
class BoundaryValues:
    points: np.ndarray
    q_prime: np.ndarray
    scal: np.ndarray
    norm_a2: np.ndarray
    laplacian_scal: np.ndarray
    obstruction: np.ndarray | None
    j_rho: np.ndarray  # J(rho) at the points (for rho_dot)
    theta: np.ndarray
    dtheta: np.ndarray


def boundary_values(domain: DomainSpec, points, degree=None, obstruction=True,
                    chunk=CHUNK) -> BoundaryValues:
    """``Q'``, ``Scal``, ``|A|^2``, ``Delta_b Scal``, ``O`` and contact data at boundary points."""
    if degree is None:
        degree = required_degree("obstruction" if obstruction else "q_prime")
    need = DEGREE_BUDGET["obstruction"] if obstruction else DEGREE_BUDGET["q_prime"]
    if degree < need:
        raise ValueError(f"jet degree {degree} below the budget {need}")
    points = np.atleast_2d(points)
    parts = []
    for start in range(0, len(points), chunk):
        p = points[start:start + chunk]
        rho = domain.jet(p, degree)
        if obstruction:
            res = fefferman(rho)
            r1, O = res.r1_jet, res.obstruction
        else:
            r1, O = fefferman_step1(rho), None
        w = webster_invariants(r1)
        c = contact_form_at(r1)
        parts.append((w, O, jz(rho.truncate(2)).value.real, c))
    cat = lambda f: np.concatenate([f(x) for x in parts])  # noqa: E731
    return BoundaryValues(
        points,
        cat(lambda x: x[0].Qprime),
        cat(lambda x: x[0].Scal),
        cat(lambda x: x[0].normA2),
        cat(lambda x: x[0].laplacian_b_Scal),
        cat(lambda x: x[1]) if obstruction else None,
        cat(lambda x: x[2]),
        cat(lambda x: x[3].theta),
        cat(lambda x: x[3].dtheta),
    )


def contact_grid(domain: DomainSpec, N: int, n_xi=None) -> BoundaryGrid:
    """Boundary grid with ``theta ^ d theta`` density attached (first jets only)."""
    grid = boundary_grid(domain, N, n_xi)
    r1 = fefferman_step1(domain.jet(grid.points, 3))
    return attach_contact_density(grid, contact_form_at(r1))


def surface_integral(domain: DomainSpec, field_fn, N: int, grid: BoundaryGrid | None = None):
    """``int_M f theta ^ d theta`` for a per-point evaluator or value array."""
    grid = contact_grid(domain, N) if grid is None else grid
    vals = field_fn(grid.points) if callable(field_fn) else np.asarray(field_fn)
    vals = np.asarray(vals, dtype=float)
    if vals.shape != (grid.size,):
        raise ValueError("field must give one real value per grid node")
    if not np.all(np.isfinite(vals)):
        bad = int(np.argmax(~np.isfinite(vals)))
        raise NumericError(f"non-finite field value at boundary point {grid.points[bad]}")
    return fsum(grid.weights * vals)


def contact_volume(domain: DomainSpec, N: int) -> float:
    return surface_integral(domain, lambda p: np.ones(len(p)), N)


# ---------------------------------------------------------------------------
# total Q'


@dataclass
class InvariantReport:
    total_q_prime: float
    contact_volume: float
    grid: int
    n_points: int
    q_prime_range: tuple
    scal_range: tuple
    norm_a2_range: tuple
    obstruction_range: tuple | None
    convergence: float | None
    convergence_grid: int | None
    provenance: dict = field(default_factory=dict)
    per_point: dict | None = None

    def to_dict(self):
        d = asdict(self)
        d.pop("per_point", None)
        return d


def _range(a):
    return (float(np.min(a)), float(np.max(a))) if a is not None else None


def _total(domain, N, degree, obstruction, n_xi=None):
    grid = boundary_grid(domain, N, n_xi)
    vals = boundary_values(domain, grid.points, degree, obstruction)
    grid.contact_density = _density(grid, vals)
    return grid, vals, fsum(grid.weights * vals.q_prime)


def _density(grid, vals):
    from .domains import contact_volume_density

    return contact_volume_density(vals.theta, vals.dtheta, grid.tangents)


def total_q_prime(domain: DomainSpec, N: int = 8, degree=None, obstruction=True,
                  convergence_grid: int | None = None, keep_points=False) -> InvariantReport:
    """Total ``Q'`` over the boundary with a grid-convergence estimate.

    ``convergence_grid`` defaults to ``2N``; pass ``0`` to skip the check
    (the report then records ``None``, never a silent zero).
    """
    degree = required_degree("obstruction" if obstruction else "q_prime") if degree is None else degree
    grid, vals, total = _total(domain, N, degree, obstruction)
    conv = None
    cg = 2 * N if convergence_grid is None else convergence_grid
    if cg:
        conv = abs(_total(domain, cg, degree, False)[2] - total)
    per = None
    if keep_points:
        per = {"points": grid.points, "q_prime": vals.q_prime, "scal": vals.scal,
               "norm_a2": vals.norm_a2, "obstruction": vals.obstruction,
               "weight": grid.weights}
    return InvariantReport(
        total, fsum(grid.weights), N, grid.size, _range(vals.q_prime), _range(vals.scal),
        _range(vals.norm_a2), _range(vals.obstruction), conv, cg or None,
        {"domain": domain.name, "digest": domain.digest(), "degree": degree,
         "version": __version__},
        per,
    )


def q_bar(domain: DomainSpec, N: int = 8, degree=None, n_xi=None) -> float:
    """Total ``Q'`` only (no obstruction, no convergence check)."""
    degree = required_degree("q_prime") if degree is None else degree
    return _total(domain, N, degree, False, n_xi)[2]


# ---------------------------------------------------------------------------
# first variation


@dataclass
class VariationReport:
    dQdt_fd: float
    rhs: float
    step: float
    richardson: float
    order: float
    relative_error: float
    differences: list
    t0: float = 0.0
    grid: int = 0

    def to_dict(self):
        return asdict(self)


def variation_rhs(domain: DomainSpec, sigma, N: int, degree=None) -> float:
    """``2 int rho_dot O theta ^ d theta`` with ``rho_dot = sigma J(rho)^(-1/3)``.

    ``rho_dot`` is the t-derivative of Fefferman's function on the boundary:
    ``r_t = rho_t J(rho_t)^(-1/3) (1 + O(rho_t))`` and ``rho_t = 0`` there.
    """
    grid = boundary_grid(domain, N)
    vals = boundary_values(domain, grid.points, degree, True)
    grid.contact_density = _density(grid, vals)
    sig = sigma(grid.points).real
    rho_dot = sig * vals.j_rho ** (-1.0 / NORMAL_ORDER)
    return 2.0 * fsum(grid.weights * rho_dot * vals.obstruction)


def variation_check(family: Family, h: float, N: int = 8, t0: float = 0.0,
                    degree=None, levels: int = 3) -> VariationReport:
    """Central differences of the total ``Q'`` at ``h, h/2, ...`` vs the obstruction pairing."""
    if levels < 2:
        raise ValueError("need at least two step levels")
    if abs(t0) + h > family.t_max * (1 + 1e-12):
        raise ValueError("step exceeds the family range")
    at = lambda t: family_at(family, t0 + t) if t0 + t != 0 else family.base  # noqa: E731
    D = []
    for lev in range(levels):
        hh = h / 2 ** lev
        qp = q_bar(at(hh), N, degree)
        qm = q_bar(at(-hh), N, degree)
        D.append((qp - qm) / (2 * hh))
    rich = (4 * D[-1] - D[-2]) / 3
    order = float("nan")
    if levels >= 3:
        a, b = D[-3] - D[-2], D[-2] - D[-1]
        if a != 0 and b != 0:
            order = math.log2(abs(a / b))
    base = at(0.0)
    rhs = variation_rhs(base, lambda p: family_direction_integrand(family, p), N, degree)
    denom = max(abs(rhs), 1e-14)
    return VariationReport(D[0], rhs, h, rich, order, abs(rich - rhs) / denom, D, t0, N)


# ---------------------------------------------------------------------------
# Hessian at the ball


@dataclass
class HessianReport:
    second_difference: float
    richardson: float
    error_estimate: float
    noise_floor: float
    differences: list
    step: float
    grid: int

    @property
    def sign(self):
        if abs(self.richardson) <= self.noise_floor:
            return 0
        return -1 if self.richardson < 0 else 1

    def to_dict(self):
        d = asdict(self)
        d["sign"] = self.sign
        return d


def hessian_probe(sigma, h: float = 0.1, N: int = 8, degree=None, levels: int = 2,
                  base: DomainSpec | None = None) -> HessianReport:
    """Second difference of the total ``Q'`` along ``rho + t sigma`` at the ball.

    The limit is Richardson-extrapolated from ``h`` and ``h/2``; the noise
    floor is ten times the extrapolation error estimate (plus roundoff).
    """
    base = ball() if base is None else base
    fam = Family(base, sigma, h)
    q0 = q_bar(base, N, degree)
    S = []
    for lev in range(levels):
        hh = h / 2 ** lev
        qp = q_bar(family_at(fam, hh), N, degree)
        qm = q_bar(family_at(fam, -hh), N, degree)
        S.append((qp - 2 * q0 + qm) / hh ** 2)
    rich = (4 * S[-1] - S[-2]) / 3 if levels >= 2 else S[-1]
    err = abs(rich - S[-1]) if levels >= 2 else abs(S[-1])
    roundoff = 64 * np.finfo(float).eps * abs(q0) / (h / 2 ** (levels - 1)) ** 2
    return HessianReport(S[0], rich, err, 10 * (err + roundoff), S, h, N)


# ---------------------------------------------------------------------------
# renormalized volume


@dataclass
class RenormFit:
    eps_list: list
    values: list
    coefficients: dict
    log_coeff: float
    const_term: float
    residual: float
    condition: float
    basis: list
    log_coeff_direct: float
    volume: dict | None = None
    provenance: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


FIT_BASIS = ("eps^-2", "eps^-1", "log eps", "1", "eps", "eps^2")


def _fit_matrix(eps):
    eps = np.asarray(eps, dtype=float)
    return np.stack([eps ** -2, eps ** -1, np.log(eps), np.ones_like(eps), eps, eps ** 2], axis=1)


def fit_expansion(eps, values):
    """Least-squares fit of ``values(eps)`` in :data:`FIT_BASIS` (column-scaled)."""
    A = _fit_matrix(eps)
    scale = np.max(np.abs(A), axis=0)
    As = A / scale
    coef, *_ = np.linalg.lstsq(As, values, rcond=None)
    cond = float(np.linalg.cond(As))
    coef = coef / scale
    resid = float(np.max(np.abs(A @ coef - values)) / np.max(np.abs(values)))
    return coef, resid, cond


def interior_integrands(rho_poly, points):
    """``r``, ``4 J(r)`` and ``4 |d log r|^2 J(r)`` at interior points.

    With ``g_+ = -i d dbar log r``: ``det g_+ = J(r) / r^3`` and
    ``|d log r|^2 = q / (r + q)`` where ``q = -dr . H^{-1} . dbar r`` and
    ``H = (r_{j kbar})``; both are smooth up to the boundary after the
    ``r^3`` factor is removed.
    """
    deg = 2 + 2 * NORMAL_ORDER
    rho = jet_from_polynomial(rho_poly, points, deg, real=True)
    r = fefferman_interior(rho)
    rv = r.value
    J = jz(r).value.real
    v = np.stack([r.d(0).coeffs[:, 0], r.d(2).coeffs[:, 0]], axis=1)
    H = np.empty((len(rv), 2, 2), dtype=complex)
    for j in range(2):
        for k in range(2):
            H[:, j, k] = r.d(2 * j).d(2 * k + 1).coeffs[:, 0]
    Hinv_v = np.linalg.solve(H, v[:, :, None])[:, :, 0]
    q = -np.real(np.einsum("bj,bj->b", v.conj(), Hinv_v))
    dlog2 = q / (rv + q)
    ds = None
    return rv, 4 * J, 4 * dlog2 * J, v, ds


def _ray_samples(domain, grid, n_s, s_frac):
    """Chebyshev nodes in ``s`` on ``[s_frac s_b, s_b]`` for every ray."""
    x = np.cos(np.pi * (np.arange(n_s) + 0.5) / n_s)
    lo = s_frac * grid.s
    t = 0.5 * (x + 1)  # (n_s,)
    s = lo[:, None] + (grid.s - lo)[:, None] * t[None, :]
    pts = domain.center + s[..., None] * grid.omega[:, None, :]
    return x, s, pts


def renorm_volume(domain: DomainSpec, eps_list=None, n_radial: int = 16, N: int = 6,
                  r_cap=None, s_frac: float = 0.5, n_cap: int = 24) -> RenormFit:
    """Expansion of ``int_{r > eps} |d log r|^2 dvol`` and ``vol({r > eps})`` in ``eps``.

    Along each ray ``center + s omega`` the integrand times ``r^3`` is smooth;
    in the variable ``r`` it is interpolated on Chebyshev nodes, averaged over
    the boundary grid, and integrated against ``r^-3`` exactly.  The interior
    ``{r > r_cap}`` is integrated with Gauss-Legendre in ``s``.
    """
    if eps_list is None:
        eps_list = np.geomspace(0.05, 0.002, 12)
    eps = np.asarray(eps_list, dtype=float)
    if np.any(np.diff(eps) >= 0) or np.any(eps <= 0):
        raise ValueError("eps_list must be positive and strictly decreasing")
    grid = boundary_grid(domain, N)
    wsph = grid.sphere_weights
    nr = grid.size
    x, s, pts = _ray_samples(domain, grid, n_radial, s_frac)
    flat = pts.reshape(-1, 2)
    rv, fv, fw, grad, _ = interior_integrands(domain.rho, flat)
    rv = rv.reshape(nr, n_radial)
    om = np.repeat(grid.omega, n_radial, axis=0)
    dr_ds = (2 * np.real(np.sum(grad * om, axis=1))).reshape(nr, n_radial)
    if np.any(dr_ds >= 0):
        raise NumericError("r is not monotone along some ray near the boundary")
    if np.any(fv <= 0):
        raise NumericError("volume density not positive at an interior sample")
    jac = (s ** 3) / np.abs(dr_ds)
    Gv = fv.reshape(nr, n_radial) * jac
    Gw = fw.reshape(nr, n_radial) * jac
    # per-ray Chebyshev interpolants in x (s affine in x)
    cr = C.chebfit(x, rv.T, n_radial - 1)  # (n_radial, nr)
    cv = C.chebfit(x, Gv.T, n_radial - 1)
    cw = C.chebfit(x, Gw.T, n_radial - 1)
    r_inner = C.chebval(-1.0, cr)  # r at s = s_frac * s_b
    if r_cap is None:
        r_cap = 0.8 * float(np.min(r_inner))
    if not 0 < r_cap < np.min(r_inner):
        raise NumericError("r_cap outside the sampled radial range")
    # common r nodes on [0, r_cap]
    K = n_radial
    y = np.cos(np.pi * (np.arange(K) + 0.5) / K)
    r_nodes = 0.5 * r_cap * (y + 1)
    xs = _invert_cheb(cr, r_nodes)  # (K, nr)
    Hv = np.array([_wsum(wsph, _chebval_cols(xs[k], cv)) for k in range(K)])
    Hw = np.array([_wsum(wsph, _chebval_cols(xs[k], cw)) for k in range(K)])
    # cap {r > r_cap}: s from 0 to s_cap(omega)
    x_cap = _invert_cheb(cr, np.array([r_cap]))[0]
    s_cap = s_frac * grid.s + (1 - s_frac) * grid.s * 0.5 * (x_cap + 1)
    cap_v, cap_w = _cap_integrals(domain, grid, s_cap, wsph, n_cap)
    out = {}
    for key, Hn, cap in (("weighted", Hw, cap_w), ("volume", Hv, cap_v)):
        coef = _taylor_at_left(C.chebfit(y, Hn, K - 1), 2.0 / r_cap)
        vals = np.array([_integrate_rminus3(coef, e, r_cap) + cap for e in eps])
        c, resid, cond = fit_expansion(eps, vals)
        direct = -coef[2] if len(coef) > 2 else 0.0
        out[key] = {"values": vals, "coef": c, "residual": resid, "cond": cond,
                    "direct_log": float(direct), "cap": float(cap)}
    w = out["weighted"]
    v = out["volume"]
    return RenormFit(
        [float(e) for e in eps], [float(x) for x in w["values"]],
        {name: float(c) for name, c in zip(FIT_BASIS, w["coef"])},
        float(w["coef"][2]), float(w["coef"][3]), w["residual"], w["cond"], list(FIT_BASIS),
        w["direct_log"],
        {"values": [float(x) for x in v["values"]],
         "coefficients": {name: float(c) for name, c in zip(FIT_BASIS, v["coef"])},
         "log_coeff": float(v["coef"][2]), "const_term": float(v["coef"][3]),
         "residual": v["residual"], "log_coeff_direct": v["direct_log"]},
        {"domain": domain.name, "digest": domain.digest(), "grid": N, "n_radial": n_radial,
         "r_cap": float(r_cap), "version": __version__},
    )


def _wsum(w, vals):
    return fsum(w * vals)


def _chebval_cols(xcol, coefs):
    """Evaluate column-wise Chebyshev series ``coefs[:, i]`` at ``xcol[i]``."""
    n = coefs.shape[0]
    b1 = np.zeros_like(xcol)
    b2 = np.zeros_like(xcol)
    for k in range(n - 1, 0, -1):
        b1, b2 = coefs[k] + 2 * xcol * b1 - b2, b1
    return coefs[0] + xcol * b1 - b2


def _invert_cheb(cr, targets, iters=60):
    """Solve ``r(x) = target`` per ray (columns of ``cr``) for each target."""
    dcr = C.chebder(cr)
    out = np.empty((len(targets), cr.shape[1]))
    for i, t in enumerate(targets):
        lo = -np.ones(cr.shape[1])
        hi = np.ones(cr.shape[1])
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            above = _chebval_cols(mid, cr) > t  # r decreases with x
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        xm = 0.5 * (lo + hi)
        for _ in range(3):
            xm = xm - (_chebval_cols(xm, cr) - t) / _chebval_cols(xm, dcr)
        out[i] = xm
    return out


def _taylor_at_left(cheb, scale):
    """Taylor coefficients in ``r`` at ``y = -1`` of a Chebyshev series in ``y = scale r - 1``."""
    out = []
    c = np.array(cheb, dtype=float)
    fact = 1.0
    for k in range(len(c)):
        out.append(C.chebval(-1.0, c) * scale ** k / fact)
        c = C.chebder(c) if len(c) > 1 else np.zeros(1)
        fact *= k + 1
    return np.array(out)


def _integrate_rminus3(coef, eps, rc):
    """``int_eps^rc sum_k coef_k r^(k-3) dr`` exactly."""
    total = 0.0
    for k, c in enumerate(coef):
        p = k - 2
        if p == 0:
            total += c * (math.log(rc) - math.log(eps))
        else:
            total += c * (rc ** p - eps ** p) / p
    return total


def _cap_integrals(domain, grid, s_cap, wsph, n_cap):
    xg, wg = roots_legendre(n_cap)
    t = 0.5 * (xg + 1)
    s = s_cap[:, None] * t[None, :]
    pts = domain.center + s[..., None] * grid.omega[:, None, :]
    rv, fv, fw, _, _ = interior_integrands(domain.rho, pts.reshape(-1, 2))
    if np.any(fv <= 0) or np.any(rv <= 0):
        raise NumericError("interior integrand not positive inside the cap")
    rv = rv.reshape(s.shape)
    dens_v = fv.reshape(s.shape) / rv ** 3 * s ** 3
    dens_w = fw.reshape(s.shape) / rv ** 3 * s ** 3
    ray_v = (dens_v * wg).sum(axis=1) * 0.5 * s_cap
    ray_w = (dens_w * wg).sum(axis=1) * 0.5 * s_cap
    return fsum(wsph * ray_v), fsum(wsph * ray_w)
