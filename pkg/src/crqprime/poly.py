"""Sparse polynomials in (z_1, zbar_1, ..., z_m, zbar_m).

Exponent tuples are ordered ``(a_1, b_1, a_2, b_2, ...)`` where ``a_j`` is
the power of ``z_j`` and ``b_j`` the power of ``conj(z_j)``.  A polynomial is
real-valued exactly when its coefficient table is Hermitian:
``c[a1,b1,a2,b2] == conj(c[b1,a1,b2,a2])``.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from math import comb

import numpy as np

from .errors import ParseError


def _swap(e):
    out = list(e)
    out[0::2], out[1::2] = e[1::2], e[0::2]
    return tuple(out)


class Polynomial:
    """Immutable sparse polynomial with complex coefficients."""

    __slots__ = ("terms", "ncomplex")

    def __init__(self, terms: Mapping[tuple, complex] | None = None, ncomplex: int = 2):
        self.ncomplex = ncomplex
        clean = {}
        for e, c in (terms or {}).items():
            e = tuple(int(x) for x in e)
            if len(e) != 2 * ncomplex or min(e) < 0:
                raise ParseError(f"bad exponent {e} for {ncomplex} complex variables")
            c = complex(c)
            if c != 0:
                clean[e] = clean.get(e, 0) + c
        self.terms = {e: c for e, c in clean.items() if c != 0}

    # construction ---------------------------------------------------------

    @classmethod
    def constant(cls, c, ncomplex=2):
        return cls({(0,) * (2 * ncomplex): c}, ncomplex)

    @classmethod
    def z(cls, j, ncomplex=2):
        """The holomorphic coordinate ``z_{j+1}`` (0-based ``j``)."""
        e = [0] * (2 * ncomplex)
        e[2 * j] = 1
        return cls({tuple(e): 1.0}, ncomplex)

    @classmethod
    def zbar(cls, j, ncomplex=2):
        e = [0] * (2 * ncomplex)
        e[2 * j + 1] = 1
        return cls({tuple(e): 1.0}, ncomplex)

    @classmethod
    def from_records(cls, records: Iterable[Mapping], ncomplex=2):
        terms = {}
        for rec in records:
            unknown = set(rec) - {"pow", "re", "im"}
            if unknown:
                raise ParseError(f"unknown monomial fields {sorted(unknown)}")
            if "pow" not in rec:
                raise ParseError("monomial record without 'pow'")
            e = tuple(int(x) for x in rec["pow"])
            c = complex(float(rec.get("re", 0.0)), float(rec.get("im", 0.0)))
            if e in terms:
                raise ParseError(f"duplicate monomial {e}")
            terms[e] = c
        return cls(terms, ncomplex)

    def to_records(self):
        return [
            {"pow": list(e), "re": float(c.real), "im": float(c.imag)}
            for e, c in sorted(self.terms.items())
        ]

    # algebra --------------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other, self.ncomplex)
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, 0) + c
        return Polynomial(terms, self.ncomplex)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial({e: -c for e, c in self.terms.items()}, self.ncomplex)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return Polynomial({e: c * other for e, c in self.terms.items()}, self.ncomplex)
        terms = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, 0) + c1 * c2
        return Polynomial(terms, self.ncomplex)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Polynomial.constant(1.0, self.ncomplex)
        for _ in range(int(k)):
            out = out * self
        return out

    def __eq__(self, other):
        return isinstance(other, Polynomial) and self.terms == other.terms

    def __hash__(self):
        return hash(tuple(sorted(self.terms.items(), key=lambda t: t[0])))

    def __repr__(self):
        return f"Polynomial({len(self.terms)} terms, degree {self.degree})"

    @property
    def degree(self):
        return max((sum(e) for e in self.terms), default=0)

    def conj(self):
        return Polynomial({_swap(e): c.conjugate() for e, c in self.terms.items()},
                          self.ncomplex)

    def is_hermitian(self) -> bool:
        """Bit-exact Hermitian pairing of the coefficient table."""
        for e, c in self.terms.items():
            partner = self.terms.get(_swap(e))
            if partner is None or partner != c.conjugate():
                return False
        return True

    def hermitian_part(self):
        """``(p + conj p) / 2``; exactly Hermitian by construction."""
        keys = set(self.terms) | {_swap(e) for e in self.terms}
        terms = {}
        for e in keys:
            a = self.terms.get(e, 0j)
            b = self.terms.get(_swap(e), 0j).conjugate()
            terms[e] = (a + b) / 2
        return Polynomial(terms, self.ncomplex)

    def is_holomorphic(self) -> bool:
        return all(all(x == 0 for x in e[1::2]) for e in self.terms)

    def compose_holomorphic(self, maps):
        """Substitute ``z_j -> maps[j]`` and ``zbar_j -> conj(maps[j])``.

        ``maps`` are holomorphic polynomials in the same variables.
        """
        if len(maps) != self.ncomplex or not all(m.is_holomorphic() for m in maps):
            raise ParseError("composition requires one holomorphic polynomial per variable")
        conj_maps = [m.conj() for m in maps]
        cache = {}

        def power(j, bar, k):
            key = (j, bar, k)
            if key not in cache:
                cache[key] = (conj_maps[j] if bar else maps[j]) ** k
            return cache[key]

        out = Polynomial({}, self.ncomplex)
        for e, c in self.terms.items():
            term = Polynomial.constant(c, self.ncomplex)
            for j in range(self.ncomplex):
                if e[2 * j]:
                    term = term * power(j, False, e[2 * j])
                if e[2 * j + 1]:
                    term = term * power(j, True, e[2 * j + 1])
            out = out + term
        return out

    def lift(self, ncomplex_new: int):
        """Embed into more complex variables, new ones placed first."""
        pad = (0,) * (2 * (ncomplex_new - self.ncomplex))
        return Polynomial({pad + e: c for e, c in self.terms.items()}, ncomplex_new)

    # evaluation -----------------------------------------------------------

    def _arrays(self):
        if not self.terms:
            return np.zeros((0, 2 * self.ncomplex), dtype=np.int64), np.zeros(0, complex)
        exps = np.array(list(self.terms), dtype=np.int64)
        coeffs = np.array(list(self.terms.values()), dtype=complex)
        return exps, coeffs

    def __call__(self, z):
        """Evaluate at points ``z`` of shape ``(..., ncomplex)``."""
        z = np.asarray(z, dtype=complex)
        v = np.empty(z.shape[:-1] + (2 * self.ncomplex,), dtype=complex)
        v[..., 0::2] = z
        v[..., 1::2] = z.conj()
        exps, coeffs = self._arrays()
        mon = np.prod(v[..., None, :] ** exps, axis=-1)
        return mon @ coeffs

    def derivative(self, var: int):
        """Formal partial derivative in variable index ``var`` (0..2m-1)."""
        terms = {}
        for e, c in self.terms.items():
            if e[var]:
                f = list(e)
                f[var] -= 1
                terms[tuple(f)] = terms.get(tuple(f), 0) + c * e[var]
        return Polynomial(terms, self.ncomplex)

    def real_gradient(self, z):
        """Gradient in real coordinates ``(x1, y1, x2, y2, ...)``; real polynomials only."""
        z = np.asarray(z, dtype=complex)
        out = np.empty(z.shape[:-1] + (2 * self.ncomplex,))
        for j in range(self.ncomplex):
            dz = self.derivative(2 * j)(z)
            # d/dx = d/dz + d/dzbar, d/dy = i(d/dz - d/dzbar); for real p these are 2Re, -2Im of d/dz
            out[..., 2 * j] = 2 * dz.real
            out[..., 2 * j + 1] = -2 * dz.imag
        return out

    def taylor_coefficients(self, base, degree: int, table):
        """Exact Taylor re-expansion at ``base`` (shape ``(B, m)``), truncated.

        Returns an array ``(B, len(table))`` of coefficients in the shifted
        variables ``w = z - base`` (and conjugates), ordered by ``table``.
        """
        base = np.atleast_2d(np.asarray(base, dtype=complex))
        nv = 2 * self.ncomplex
        v = np.empty((base.shape[0], nv), dtype=complex)
        v[:, 0::2] = base
        v[:, 1::2] = base.conj()
        out = np.zeros((base.shape[0], table.size(degree)), dtype=complex)
        maxpow = max((max(e) for e in self.terms), default=0)
        pw = v[:, :, None] ** np.arange(maxpow + 1)  # (B, nv, maxpow+1)
        for e, c in self.terms.items():
            # all sub-monomials m <= e with |m| <= degree
            ranges = [range(min(x, degree) + 1) for x in e]
            for m in np.ndindex(*[len(r) for r in ranges]):
                if sum(m) > degree:
                    continue
                k = table.index[m]
                factor = c
                for x, y in zip(e, m):
                    factor *= comb(x, y)
                val = np.full(base.shape[0], factor, dtype=complex)
                for var, (x, y) in enumerate(zip(e, m)):
                    if x > y:
                        val = val * pw[:, var, x - y]
                out[:, k] += val
        return out
