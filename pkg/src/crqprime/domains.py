"""Polynomial domains in C^2, boundary sampling, biholomorphic maps, families.

A domain is ``{rho > 0}`` for a real polynomial ``rho`` that is star-shaped
about a centre point.  Boundary points are found along rays
``center + s * omega`` with ``omega`` on the unit sphere S^3, parametrized
by Hopf coordinates ``omega = (cos(eta) e^{i xi1}, sin(eta) e^{i xi2})``.

File formats (YAML, comments allowed, unknown keys rejected)::

    # domain
    n: 1
    name: ball
    center: [0, 0, 0, 0]          # Re z1, Im z1, Re z2, Im z2
    rho:                           # monomials z^a zbar^b, pow = [a1, b1, a2, b2]
      - {pow: [0, 0, 0, 0], re: 1.0}
      - {pow: [1, 1, 0, 0], re: -1.0}
      - {pow: [0, 0, 1, 1], re: -1.0}
    metadata: {}                   # optional, free-form

    # family
    base: <domain mapping>  or  base_file: path
    direction: [<monomials>]       # sigma = d rho_t / dt
    t_max: 0.05

    # map
    kind: unitary | scaling | shear | composition
    matrix: [[[re, im], [re, im]], [[re, im], [re, im]]]   # unitary
    factors: [[re, im], [re, im]]                          # scaling
    c: [re, im]                                            # shear z2 -> z2 + c z1^k
    k: 2
    maps: [<map>, ...]                                     # composition, applied in order

    # direction (hessian probes; base is the unit ball)
    name: quartic
    direction: [<monomials>]
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from scipy.special import roots_legendre

from .errors import DegenerateDefiningFunction, GeometryError, NotPseudoconvex, ParseError
from .jets import jet_from_polynomial
from .monge_ampere import jz, snap_boundary
from .poly import Polynomial


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """A star-shaped polynomial domain ``{rho > 0}`` in C^2."""

    rho: Polynomial
    center: np.ndarray = field(default_factory=lambda: np.zeros(2, complex))
    name: str = "domain"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.rho.ncomplex != 2:
            raise ParseError("only domains in C^2 are supported")
        if not self.rho.is_hermitian():
            raise ParseError("rho is not Hermitian (coefficients must pair exactly)")
        c = np.asarray(self.center, dtype=complex).reshape(2)
        object.__setattr__(self, "center", c)
        if not self.rho(c).real > 0:
            raise GeometryError("rho(center) must be positive")

    def __eq__(self, other):
        return (isinstance(other, DomainSpec) and self.rho == other.rho
                and np.array_equal(self.center, other.center))

    __hash__ = None

    def value(self, z):
        return self.rho(z).real

    def jet(self, p, degree, snap=True):
        """Real jet of ``rho`` at points ``p`` (boundary constant snapped to 0)."""
        j = jet_from_polynomial(self.rho, p, degree, real=True)
        return snap_boundary(j) if snap else j

    def digest(self):
        blob = json.dumps({"rho": self.rho.to_records(),
                           "center": [float(x) for x in _c2r(self.center)]}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_dict(self):
        return {"n": 1, "name": self.name, "center": [float(x) for x in _c2r(self.center)],
                "rho": self.rho.to_records(), "metadata": dict(self.metadata)}


def _c2r(z):
    z = np.asarray(z, dtype=complex)
    return np.stack([z.real, z.imag], axis=-1).reshape(-1)


def _r2c(x, what="point"):
    x = np.asarray(x, dtype=float)
    if x.shape != (4,):
        raise ParseError(f"{what} must have 4 real entries")
    return x[0::2] + 1j * x[1::2]


def _pair(v, what):
    try:
        re, im = v
        return complex(float(re), float(im))
    except (TypeError, ValueError):
        try:
            return complex(float(v))
        except (TypeError, ValueError):
            raise ParseError(f"{what}: expected a number or [re, im]") from None


def _check_keys(d, allowed, what):
    if not isinstance(d, dict):
        raise ParseError(f"{what} must be a mapping")
    unknown = set(d) - set(allowed)
    if unknown:
        raise ParseError(f"unknown {what} fields: {sorted(unknown)}")


def domain_from_dict(d) -> DomainSpec:
    _check_keys(d, {"n", "name", "center", "rho", "metadata"}, "domain")
    if d.get("n", 1) != 1:
        raise ParseError("only n = 1 (domains in C^2) is supported")
    if "rho" not in d:
        raise ParseError("domain without rho")
    rho = Polynomial.from_records(d["rho"], 2)
    if not rho.is_hermitian():
        raise ParseError("rho is not Hermitian (coefficients must pair exactly)")
    center = _r2c(d.get("center", [0, 0, 0, 0]), "center")
    return DomainSpec(rho, center, str(d.get("name", "domain")), dict(d.get("metadata") or {}))


def _load_yaml(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"malformed file {path}: {exc}") from None


def load_domain(path) -> DomainSpec:
    return domain_from_dict(_load_yaml(path))


def dump_domain(domain: DomainSpec) -> str:
    return yaml.safe_dump(domain.to_dict(), sort_keys=False)


def ball(radius=1.0, name="ball") -> DomainSpec:
    z1, z2 = Polynomial.z(0), Polynomial.z(1)
    rho = radius ** 2 - z1 * z1.conj() - z2 * z2.conj()
    return DomainSpec(rho, np.zeros(2, complex), name)


def perturbed_ball(coeffs: dict, name="perturbed") -> DomainSpec:
    """``1 - |z|^2 + sum c_e z^e``, Hermitian part taken."""
    z1, z2 = Polynomial.z(0), Polynomial.z(1)
    extra = Polynomial(coeffs, 2).hermitian_part()
    return DomainSpec(1 - z1 * z1.conj() - z2 * z2.conj() + extra, np.zeros(2, complex), name)


def with_representative(domain: DomainSpec, factor: Polynomial, name=None) -> DomainSpec:
    """Same domain, defining function multiplied by a positive polynomial."""
    rho = (domain.rho * factor).hermitian_part()
    return DomainSpec(rho, domain.center, name or domain.name + "*", dict(domain.metadata))


# ---------------------------------------------------------------------------
# boundary sampling


def hopf_direction(eta, xi1, xi2):
    eta, xi1, xi2 = np.broadcast_arrays(eta, xi1, xi2)
    return np.stack([np.cos(eta) * np.exp(1j * xi1), np.sin(eta) * np.exp(1j * xi2)], axis=-1)


def _hopf_derivatives(eta, xi1, xi2):
    c, s = np.cos(eta), np.sin(eta)
    e1, e2 = np.exp(1j * xi1), np.exp(1j * xi2)
    d_eta = np.stack([-s * e1, c * e2], axis=-1)
    d_xi1 = np.stack([1j * c * e1, 0 * e2], axis=-1)
    d_xi2 = np.stack([0 * e1, 1j * s * e2], axis=-1)
    return d_eta, d_xi1, d_xi2


def _drho(domain, z, v):
    """Real differential ``d rho(z)[v] = 2 Re sum rho_j v_j``."""
    g = np.stack([domain.rho.derivative(0)(z), domain.rho.derivative(2)(z)], axis=-1)
    return 2 * np.real(np.sum(g * v, axis=-1))


def boundary_radius(domain: DomainSpec, omega, s_max=None, nsample=64, tol=1e-14):
    """Smallest ``s > 0`` with ``rho(center + s omega) = 0`` for each direction.

    Raises :class:`GeometryError` when a ray has no root or more than one
    sign change on the sampling grid (not star-shaped).
    """
    omega = np.atleast_2d(np.asarray(omega, dtype=complex))
    c = domain.center
    f = lambda s: domain.value(c + s[:, None] * omega)  # noqa: E731
    if s_max is None:
        s_max = 1.0
        for _ in range(40):
            if np.all(f(np.full(len(omega), s_max)) < 0):
                break
            s_max *= 2
        else:
            raise GeometryError("domain appears unbounded along some ray")
    grid = np.linspace(0.0, s_max, nsample + 1)[1:]
    vals = np.stack([f(np.full(len(omega), s)) for s in grid], axis=1)
    neg = vals < 0
    changes = np.count_nonzero(neg[:, 1:] != neg[:, :-1], axis=1) + neg[:, 0]
    if np.any(changes != 1):
        bad = int(np.argmax(changes != 1))
        raise GeometryError(f"not star-shaped along direction {omega[bad]}")
    first = np.argmax(neg, axis=1)
    hi = grid[first]
    lo = np.where(first > 0, grid[np.maximum(first - 1, 0)], 0.0)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        inside = f(mid) > 0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
        if np.max(hi - lo) < 1e-13 * max(1.0, s_max):
            break
    s = 0.5 * (lo + hi)
    for _ in range(3):
        z = c + s[:, None] * omega
        ds = _drho(domain, z, omega)
        if np.any(ds == 0):
            raise DegenerateDefiningFunction("d rho vanishes along a ray")
        s = s - f(s) / ds
    resid = np.abs(f(s))
    if np.any(resid > 1e3 * tol * max(1.0, domain.rho.degree)):
        raise GeometryError("boundary root polish did not converge")
    return s


def boundary_point(domain: DomainSpec, omega):
    """Boundary point(s) along unit direction(s) ``omega`` (C^2 or R^4 entries)."""
    omega = np.asarray(omega)
    if omega.shape[-1] == 4 and not np.iscomplexobj(omega):
        omega = omega[..., 0::2] + 1j * omega[..., 1::2]
    omega = np.atleast_2d(omega.astype(complex))
    omega = omega / np.linalg.norm(omega, axis=1, keepdims=True)
    s = boundary_radius(domain, omega)
    return domain.center + s[:, None] * omega


@dataclass
class BoundaryGrid:
    """Boundary nodes with quadrature data.

    ``weights`` are parameter-space weights including the Hopf factor
    ``cos(eta) sin(eta)``; multiply by :attr:`contact_density` (set by
    :func:`attach_contact_density`) to integrate against ``theta ^ d theta``.
    """

    points: np.ndarray
    omega: np.ndarray
    s: np.ndarray
    tangents: np.ndarray  # (B, 3, 2) complex: d p / d(eta, xi1, xi2)
    param_weights: np.ndarray  # Gauss-Legendre x trapezoid, no Jacobian
    N: int
    n_xi: int
    contact_density: np.ndarray | None = None

    @property
    def size(self):
        return len(self.points)

    @property
    def sphere_weights(self):
        eta = np.arccos(np.clip(np.abs(self.omega[:, 0]), 0, 1))
        return self.param_weights * np.cos(eta) * np.sin(eta)

    @property
    def weights(self):
        if self.contact_density is None:
            raise ValueError("contact density not attached")
        return self.param_weights * self.contact_density


def boundary_grid(domain: DomainSpec, N: int, n_xi: int | None = None) -> BoundaryGrid:
    """Gauss-Legendre (``N``) x trapezoid (``n_xi``, default ``2N``) Hopf grid."""
    if N < 4:
        raise ValueError("grid resolution must be >= 4")
    n_xi = 2 * N if n_xi is None else int(n_xi)
    x, w = roots_legendre(N)
    eta = (x + 1) * np.pi / 4
    w_eta = w * np.pi / 4
    xi = 2 * np.pi * np.arange(n_xi) / n_xi
    w_xi = 2 * np.pi / n_xi
    E, X1, X2 = np.meshgrid(eta, xi, xi, indexing="ij")
    W = np.broadcast_to(w_eta[:, None, None] * w_xi * w_xi, E.shape)
    E, X1, X2, W = E.ravel(), X1.ravel(), X2.ravel(), W.ravel().copy()
    omega = hopf_direction(E, X1, X2)
    s = boundary_radius(domain, omega)
    pts = domain.center + s[:, None] * omega
    dom = _drho(domain, pts, omega)
    tangents = []
    for dw in _hopf_derivatives(E, X1, X2):
        ds = -s * _drho(domain, pts, dw) / dom
        tangents.append(ds[:, None] * omega + s[:, None] * dw)
    tangents = np.stack(tangents, axis=1)
    return BoundaryGrid(pts, omega, s, tangents, W, N, n_xi)


def _complex_to_real_vec(v):
    out = np.empty(v.shape[:-1] + (4,))
    out[..., 0::2] = v.real
    out[..., 1::2] = v.imag
    return out


def contact_volume_density(theta, dtheta, tangents):
    """``|theta ^ d theta|`` evaluated on three tangent vectors per point."""
    t = _complex_to_real_vec(tangents)  # (B, 3, 4)
    th = np.einsum("bi,bki->bk", theta, t)
    om = np.einsum("bij,bki,blj->bkl", dtheta, t, t)
    val = th[:, 0] * om[:, 1, 2] - th[:, 1] * om[:, 0, 2] + th[:, 2] * om[:, 0, 1]
    return np.abs(val)


def attach_contact_density(grid: BoundaryGrid, contact) -> BoundaryGrid:
    grid.contact_density = contact_volume_density(contact.theta, contact.dtheta, grid.tangents)
    return grid


def levi_precheck(domain: DomainSpec, N: int = 4):
    """Sample ``J(rho)`` on a coarse boundary grid; raise on non-positivity."""
    grid = boundary_grid(domain, N)
    j = jz(domain.jet(grid.points, 2)).value
    worst = int(np.argmin(j))
    if j[worst] <= 0:
        raise NotPseudoconvex(
            f"Levi form not positive at boundary point {grid.points[worst]} (J = {j[worst]:.3e})")
    return float(j[worst])


# ---------------------------------------------------------------------------
# biholomorphic maps


@dataclass(frozen=True, eq=False)
class MapSpec:
    """Polynomial automorphism of C^2 with explicit inverse.

    ``forward`` and ``inverse`` are pairs of holomorphic polynomials;
    ``jacobian`` is ``det Phi'`` as a polynomial (constant for the maps
    provided here).  ``phi = log(det Phi') / 3`` is the Jacobian root used in
    ``r_hat = exp(-2 Re phi) r``.
    """

    kind: str
    params: dict
    forward: tuple
    inverse: tuple
    jacobian: Polynomial

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return np.stack([f(z) for f in self.forward], axis=-1)

    def apply_inverse(self, z):
        z = np.asarray(z, dtype=complex)
        return np.stack([f(z) for f in self.inverse], axis=-1)

    def phi(self, z):
        return np.log(self.jacobian(np.asarray(z, dtype=complex))) / 3

    def inverted(self) -> "MapSpec":
        jac_inv = self.jacobian.compose_holomorphic(list(self.inverse))
        if jac_inv.degree != 0:
            raise ValueError("inverse Jacobian only available for constant Jacobians")
        c = next(iter(jac_inv.terms.values()), 0j)
        return MapSpec(self.kind + "^-1", {"of": self.params}, self.inverse, self.forward,
                       Polynomial.constant(1 / c))

    def to_dict(self):
        return {"kind": self.kind, **self.params}


def _zs():
    return Polynomial.z(0), Polynomial.z(1)


def unitary_map(U) -> MapSpec:
    U = np.asarray(U, dtype=complex)
    if U.shape != (2, 2) or np.max(np.abs(U.conj().T @ U - np.eye(2))) > 1e-12:
        raise ParseError("matrix is not unitary")
    z1, z2 = _zs()
    fwd = (z1 * U[0, 0] + z2 * U[0, 1], z1 * U[1, 0] + z2 * U[1, 1])
    V = U.conj().T
    inv = (z1 * V[0, 0] + z2 * V[0, 1], z1 * V[1, 0] + z2 * V[1, 1])
    params = {"matrix": [[[float(x.real), float(x.imag)] for x in row] for row in U]}
    return MapSpec("unitary", params, fwd, inv, Polynomial.constant(np.linalg.det(U)))


def scaling_map(l1, l2) -> MapSpec:
    l1, l2 = complex(l1), complex(l2)
    if l1 == 0 or l2 == 0:
        raise ParseError("scaling factors must be non-zero")
    z1, z2 = _zs()
    params = {"factors": [[l1.real, l1.imag], [l2.real, l2.imag]]}
    return MapSpec("scaling", params, (z1 * l1, z2 * l2), (z1 * (1 / l1), z2 * (1 / l2)),
                   Polynomial.constant(l1 * l2))


def shear_map(c, k=2) -> MapSpec:
    c = complex(c)
    k = int(k)
    if k < 0:
        raise ParseError("shear power must be non-negative")
    z1, z2 = _zs()
    params = {"c": [c.real, c.imag], "k": k}
    return MapSpec("shear", params, (z1, z2 + (z1 ** k) * c), (z1, z2 - (z1 ** k) * c),
                   Polynomial.constant(1.0))


def compose_maps(maps) -> MapSpec:
    """``maps[-1] o ... o maps[0]`` (first map applied first)."""
    maps = list(maps)
    if not maps:
        raise ParseError("empty composition")
    fwd = list(maps[0].forward)
    inv = list(maps[0].inverse)
    jac = maps[0].jacobian
    for m in maps[1:]:
        jac = jac * m.jacobian.compose_holomorphic(fwd)
        fwd = [f.compose_holomorphic(fwd) for f in m.forward]
        inv = [g.compose_holomorphic(list(m.inverse)) for g in inv]
    params = {"maps": [m.to_dict() for m in maps]}
    return MapSpec("composition", params, tuple(fwd), tuple(inv), jac)


def map_from_dict(d) -> MapSpec:
    if not isinstance(d, dict) or "kind" not in d:
        raise ParseError("map must be a mapping with a 'kind'")
    kind = d["kind"]
    if kind == "unitary":
        _check_keys(d, {"kind", "matrix"}, "unitary map")
        M = np.array([[_pair(x, "matrix entry") for x in row] for row in d["matrix"]])
        return unitary_map(M)
    if kind == "scaling":
        _check_keys(d, {"kind", "factors"}, "scaling map")
        f = d["factors"]
        if len(f) != 2:
            raise ParseError("scaling needs two factors")
        return scaling_map(_pair(f[0], "factor"), _pair(f[1], "factor"))
    if kind == "shear":
        _check_keys(d, {"kind", "c", "k"}, "shear map")
        return shear_map(_pair(d.get("c", 0.0), "c"), d.get("k", 2))
    if kind == "composition":
        _check_keys(d, {"kind", "maps"}, "composition map")
        return compose_maps([map_from_dict(m) for m in d["maps"]])
    raise ParseError(f"unknown map kind {kind!r}")


def load_map(path) -> MapSpec:
    return map_from_dict(_load_yaml(path))


def transform(domain: DomainSpec, phi_map: MapSpec, name=None) -> DomainSpec:
    """Image ``Phi(Omega)`` with ``rho_hat = rho o Phi^{-1}`` (exact composition)."""
    rho = domain.rho.compose_holomorphic(list(phi_map.inverse)).hermitian_part()
    center = phi_map(domain.center[None, :])[0]
    meta = dict(domain.metadata)
    meta.setdefault("transforms", [])
    meta["transforms"] = list(meta["transforms"]) + [phi_map.to_dict()]
    return DomainSpec(rho, center, name or f"{domain.name}@{phi_map.kind}", meta)


# ---------------------------------------------------------------------------
# families


@dataclass(frozen=True, eq=False)
class Family:
    """Linear pencil ``rho_t = rho + t sigma``."""

    base: DomainSpec
    direction: Polynomial
    t_max: float = 0.1

    def __post_init__(self):
        if not self.direction.is_hermitian():
            raise ParseError("family direction is not Hermitian")
        if not self.t_max > 0:
            raise ParseError("t_max must be positive")


def family_at(family: Family, t: float, check=False) -> DomainSpec:
    if abs(t) > family.t_max * (1 + 1e-12):
        raise GeometryError(f"|t| = {abs(t)} exceeds t_max = {family.t_max}")
    if t == 0:
        return family.base
    rho = family.base.rho + family.direction * float(t)
    dom = DomainSpec(rho, family.base.center, f"{family.base.name}+{t:g}", {})
    if check:
        levi_precheck(dom)
    return dom


def family_direction_integrand(family: Family, p) -> np.ndarray:
    """``sigma(p)``: the t-derivative of ``rho_t`` at boundary points."""
    return family.direction(np.atleast_2d(np.asarray(p, dtype=complex))).real


def family_from_dict(d, root=None) -> Family:
    _check_keys(d, {"base", "base_file", "direction", "t_max"}, "family")
    if ("base" in d) == ("base_file" in d):
        raise ParseError("family needs exactly one of base / base_file")
    if "base" in d:
        base = domain_from_dict(d["base"])
    else:
        path = Path(d["base_file"])
        if root is not None and not path.is_absolute():
            path = Path(root) / path
        base = load_domain(path)
    if "direction" not in d:
        raise ParseError("family without direction")
    sigma = Polynomial.from_records(d["direction"], 2)
    if not sigma.is_hermitian():
        raise ParseError("family direction is not Hermitian")
    return Family(base, sigma, float(d.get("t_max", 0.1)))


def load_family(path) -> Family:
    return family_from_dict(_load_yaml(path), Path(path).parent)


def direction_from_dict(d):
    _check_keys(d, {"name", "direction"}, "direction")
    if "direction" not in d:
        raise ParseError("missing direction")
    sigma = Polynomial.from_records(d["direction"], 2)
    if not sigma.is_hermitian():
        raise ParseError("direction is not Hermitian")
    return str(d.get("name", "direction")), sigma


def load_direction(path):
    return direction_from_dict(_load_yaml(path))
