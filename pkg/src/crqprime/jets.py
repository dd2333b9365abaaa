"""Truncated multivariate Taylor expansions ("jets") in (w, wbar) variables.

A :class:`Jet` holds the Taylor coefficients of a function on C^m (m = 2 for
boundary computations, m = 3 for the ambient space C* x C^2) at a base point,
in the formal variables ``(w_1, wbar_1, ..., w_m, wbar_m)`` with
``w = z - base``.  Coefficients are stored densely in graded order with a
leading batch axis, so one Jet object carries the expansions at many base
points at once.  All operations act independently per batch element.

Degree rules: binary operations produce ``min(D1, D2)``; :meth:`Jet.mul_ext`
additionally uses the exact valuation of each factor (a factor vanishing at
the base point lets the product be known to one more order).  Derivatives
lower the degree by one, :func:`jet_divide_by_power` by ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np
from numba import njit, prange

from .errors import JetBaseMismatch, NotDivisible, NotInvertible, DegenerateDefiningFunction

STRUCTURAL_TOL = 1e-11
DIVISIBILITY_TOL = 1e-8


# ---------------------------------------------------------------------------
# monomial tables


def _monomials(nvars, degree):
    out = []
    for d in range(degree + 1):
        block = []
        for combo in combinations_with_replacement(range(nvars), d):
            e = [0] * nvars
            for k in combo:
                e[k] += 1
            block.append(tuple(e))
        block.sort(reverse=True)
        out.extend(block)
    return out


@dataclass(frozen=True, eq=False)
class MonomialTable:
    """Graded monomial table for ``nvars`` formal variables up to ``degree``.

    Tables are nested: the first ``size(d)`` entries are the table of
    degree ``d``.  Multiplication pairs ``(i, j) -> k`` are sorted by ``k``
    with CSR offsets, so any truncation is a prefix.
    """

    nvars: int
    degree: int
    exps: np.ndarray
    degs: np.ndarray
    offsets: np.ndarray  # offsets[d] = number of monomials of degree < d
    index: dict
    conj_perm: np.ndarray
    shift: np.ndarray  # shift[m, k] = index of m + e_k, or -1
    unshift: np.ndarray  # unshift[m, k] = index of m - e_k, or -1
    pair_i: np.ndarray
    pair_j: np.ndarray
    pair_ptr: np.ndarray  # pairs for target k live in pair_ptr[k]:pair_ptr[k+1]

    def size(self, d):
        return int(self.offsets[d + 1])

    def homogeneous(self, d):
        return slice(int(self.offsets[d]), int(self.offsets[d + 1]))


@lru_cache(maxsize=None)
def monomial_table(nvars: int, degree: int) -> MonomialTable:
    exps_list = _monomials(nvars, degree)
    exps = np.array(exps_list, dtype=np.int64)
    degs = exps.sum(axis=1)
    M = len(exps_list)
    offsets = np.zeros(degree + 2, dtype=np.int64)
    for d in range(degree + 1):
        offsets[d + 1] = offsets[d] + np.count_nonzero(degs == d)
    index = {e: i for i, e in enumerate(exps_list)}

    swapped = exps.copy()
    swapped[:, 0::2], swapped[:, 1::2] = exps[:, 1::2], exps[:, 0::2]
    conj_perm = np.array([index[tuple(e)] for e in swapped], dtype=np.int64)

    shift = -np.ones((M, nvars), dtype=np.int64)
    unshift = -np.ones((M, nvars), dtype=np.int64)
    for m, e in enumerate(exps_list):
        for k in range(nvars):
            f = list(e)
            f[k] += 1
            shift[m, k] = index.get(tuple(f), -1)
            if e[k]:
                f[k] -= 2
                unshift[m, k] = index[tuple(f)]

    base = degree + 1
    weights = base ** np.arange(nvars, dtype=np.int64)
    keys = exps @ weights
    order = np.argsort(keys)
    sorted_keys = keys[order]
    I, J, K = [], [], []
    for i in range(M):
        jmax = offsets[degree - degs[i] + 1]
        js = np.arange(jmax)
        kk = keys[i] + keys[:jmax]
        pos = order[np.searchsorted(sorted_keys, kk)]
        I.append(np.full(jmax, i))
        J.append(js)
        K.append(pos)
    I = np.concatenate(I)
    J = np.concatenate(J)
    K = np.concatenate(K)
    srt = np.lexsort((J, I, K))
    I, J, K = I[srt], J[srt], K[srt]
    ptr = np.zeros(M + 1, dtype=np.int64)
    np.add.at(ptr, K + 1, 1)
    ptr = np.cumsum(ptr)
    I = I.astype(np.int64)
    J = J.astype(np.int64)
    for arr in (exps, degs, offsets, conj_perm, shift, unshift, I, J, ptr):
        arr.setflags(write=False)
    return MonomialTable(nvars, degree, exps, degs, offsets, index, conj_perm, shift,
                         unshift, I, J, ptr)


# ---------------------------------------------------------------------------
# numba kernels


@njit(cache=True, inline="always")
def _pairwise(buf, n):
    while n > 1:
        half = n // 2
        for t in range(half):
            buf[t] = buf[2 * t] + buf[2 * t + 1]
        if n % 2:
            buf[half] = buf[n - 1]
            n = half + 1
        else:
            n = half
    if n == 0:
        return 0j
    return buf[0]


@njit(cache=True, parallel=True)
def _mul_kernel(a, b, pi, pj, ptr, mout):
    nb = a.shape[0]
    out = np.empty((nb, mout), dtype=np.complex128)
    maxlen = 0
    for k in range(mout):
        maxlen = max(maxlen, ptr[k + 1] - ptr[k])
    for bb in prange(nb):
        buf = np.empty(maxlen + 1, dtype=np.complex128)
        for k in range(mout):
            n = 0
            for p in range(ptr[k], ptr[k + 1]):
                buf[n] = a[bb, pi[p]] * b[bb, pj[p]]
                n += 1
            out[bb, k] = _pairwise(buf, n)
    return out


# mode: 0 division num/den, 1 real power, 2 exp, 3 log
@njit(cache=True, parallel=True)
def _series_kernel(a, num, mode, alpha, pi, pj, ptr, degs, mout):
    nb = a.shape[0]
    out = np.zeros((nb, mout), dtype=np.complex128)
    maxlen = 0
    for k in range(mout):
        maxlen = max(maxlen, ptr[k + 1] - ptr[k])
    for bb in prange(nb):
        buf = np.empty(maxlen + 1, dtype=np.complex128)
        a0 = a[bb, 0]
        if mode == 0:
            out[bb, 0] = num[bb, 0] / a0
        elif mode == 1:
            out[bb, 0] = np.exp(alpha * np.log(a0))
        elif mode == 2:
            out[bb, 0] = np.exp(a0)
        else:
            out[bb, 0] = np.log(a0)
        for k in range(1, mout):
            d = degs[k]
            n = 0
            for p in range(ptr[k], ptr[k + 1]):
                i = pi[p]
                j = pj[p]
                if j == 0:
                    continue
                if mode == 0:
                    buf[n] = out[bb, i] * a[bb, j]
                elif mode == 1:
                    buf[n] = (alpha * degs[j] - degs[i]) * out[bb, i] * a[bb, j]
                elif mode == 2:
                    buf[n] = degs[j] * a[bb, j] * out[bb, i]
                else:
                    if i == 0:
                        continue
                    buf[n] = degs[i] * out[bb, i] * a[bb, j]
                n += 1
            s = _pairwise(buf, n)
            if mode == 0:
                out[bb, k] = (num[bb, k] - s) / a0
            elif mode == 1:
                out[bb, k] = s / (a0 * d)
            elif mode == 2:
                out[bb, k] = s / d
            else:
                out[bb, k] = (a[bb, k] - s / d) / a0
    return out


@njit(cache=True, parallel=True)
def _divide_linear_kernel(P, lin, pivot, exps, shift, unshift, lo, hi, plo):
    """Exact quotient of homogeneous P (degree d+1) by a linear form.

    ``lo:hi`` indexes degree-d monomials, ``plo`` is the first degree d+1
    index.  Monomials are processed in decreasing power of the pivot
    variable, so every quotient coefficient depends only on ones already
    computed.
    """
    nb = P.shape[0]
    nv = exps.shape[1]
    Q = np.zeros((nb, hi - lo), dtype=np.complex128)
    d = 0
    if hi > lo:
        for k in range(nv):
            d += exps[lo, k]
    for bb in prange(nb):
        kp = pivot[bb]
        cp = lin[bb, kp]
        for power in range(d, -1, -1):
            for m in range(lo, hi):
                if exps[m, kp] != power:
                    continue
                up = shift[m, kp]
                acc = P[bb, up - plo]
                for k in range(nv):
                    if k == kp:
                        continue
                    t = unshift[up, k]
                    if t >= 0:
                        acc -= lin[bb, k] * Q[bb, t - lo]
                Q[bb, m - lo] = acc / cp
    return Q


# ---------------------------------------------------------------------------
# the Jet type


def _as_base(base, ncomplex):
    base = np.asarray(base, dtype=np.complex128)
    if base.ndim == 1:
        base = base[None, :]
    if base.shape[-1] != ncomplex:
        raise ValueError(f"base point must have {ncomplex} complex coordinates")
    return base


class Jet:
    """Truncated Taylor expansion at (a batch of) base points.

    Parameters
    ----------
    coeffs : ndarray, shape (B, M)
        Coefficients in graded monomial order of ``monomial_table(2m, degree)``.
    degree : int
        Truncation total degree.
    base : ndarray, shape (B, m)
        Base points in C^m.
    real : bool
        Whether the jet represents a real-valued function; real jets are
        kept exactly conjugation-symmetric.
    """

    __slots__ = ("coeffs", "degree", "base", "real")
    __array_priority__ = 100

    def __init__(self, coeffs, degree, base, real=False):
        if degree < 0:
            raise ValueError("jet degree must be non-negative")
        coeffs = np.array(coeffs, dtype=np.complex128, copy=True)
        if coeffs.ndim == 1:
            coeffs = coeffs[None, :]
        base = _as_base(base, _ncomplex_for(coeffs.shape[-1], degree))
        if base.shape[0] != coeffs.shape[0]:
            base = np.broadcast_to(base, (coeffs.shape[0], base.shape[1])).copy()
        tab = monomial_table(2 * base.shape[1], degree)
        if coeffs.shape[-1] != tab.size(degree):
            raise ValueError("coefficient count does not match degree")
        if real:
            coeffs = 0.5 * (coeffs + coeffs[:, tab.conj_perm].conj())
        coeffs.setflags(write=False)
        base.setflags(write=False)
        self.coeffs = coeffs
        self.degree = int(degree)
        self.base = base
        self.real = bool(real)

    # -- construction -----------------------------------------------------

    @classmethod
    def _raw(cls, coeffs, degree, base, real):
        obj = object.__new__(cls)
        tab = monomial_table(2 * base.shape[1], degree)
        if real:
            coeffs = 0.5 * (coeffs + coeffs[:, tab.conj_perm].conj())
        coeffs.setflags(write=False)
        obj.coeffs = coeffs
        obj.degree = int(degree)
        obj.base = base
        obj.real = bool(real)
        return obj

    @classmethod
    def constant(cls, value, base, degree, real=None):
        base = _as_base(base, np.asarray(base).shape[-1])
        tab = monomial_table(2 * base.shape[1], degree)
        value = np.broadcast_to(np.asarray(value, dtype=complex), (base.shape[0],))
        c = np.zeros((base.shape[0], tab.size(degree)), dtype=complex)
        c[:, 0] = value
        if real is None:
            real = bool(np.all(value.imag == 0))
        return cls._raw(c, degree, base.copy(), real)

    @classmethod
    def variable(cls, k, base, degree):
        """The formal variable ``w_j`` (k = 2j) or ``wbar_j`` (k = 2j + 1)."""
        base = _as_base(base, np.asarray(base).shape[-1])
        tab = monomial_table(2 * base.shape[1], degree)
        c = np.zeros((base.shape[0], tab.size(degree)), dtype=complex)
        if degree >= 1:
            e = [0] * tab.nvars
            e[k] = 1
            c[:, tab.index[tuple(e)]] = 1
        return cls._raw(c, degree, base.copy(), False)

    @classmethod
    def coordinate(cls, k, base, degree):
        """The coordinate function ``z_j`` or ``conj(z_j)`` (not shifted)."""
        v = cls.variable(k, base, degree)
        b = v.base[:, k // 2]
        return v + (b.conj() if k % 2 else b)

    # -- bookkeeping --------------------------------------------------------

    @property
    def ncomplex(self):
        return self.base.shape[1]

    @property
    def nvars(self):
        return 2 * self.base.shape[1]

    @property
    def batch(self):
        return self.coeffs.shape[0]

    @property
    def table(self):
        return monomial_table(self.nvars, self.degree)

    @property
    def value(self):
        """Value at the base point(s), shape (B,)."""
        v = self.coeffs[:, 0]
        return v.real.copy() if self.real else v.copy()

    def coeff(self, exps):
        return self.coeffs[:, self.table.index[tuple(exps)]]

    def __repr__(self):
        kind = "real " if self.real else ""
        return f"<{kind}Jet C^{self.ncomplex} degree={self.degree} batch={self.batch}>"

    def truncate(self, degree):
        if degree > self.degree:
            raise ValueError("cannot truncate to a higher degree")
        n = monomial_table(self.nvars, degree).size(degree)
        return Jet._raw(self.coeffs[:, :n].copy(), degree, self.base, self.real)

    def pad(self, degree):
        """Zero-extend to a higher nominal degree (used by valuation-aware products)."""
        if degree <= self.degree:
            return self.truncate(degree)
        tab = monomial_table(self.nvars, degree)
        c = np.zeros((self.batch, tab.size(degree)), dtype=complex)
        c[:, : self.coeffs.shape[1]] = self.coeffs
        return Jet._raw(c, degree, self.base, self.real)

    def valuation(self):
        """Lowest total degree carrying a non-zero coefficient (exact test)."""
        tab = self.table
        for d in range(self.degree + 1):
            if np.any(self.coeffs[:, tab.homogeneous(d)] != 0):
                return d
        return self.degree + 1

    def homogeneous_part(self, d):
        tab = self.table
        c = np.zeros_like(self.coeffs)
        s = tab.homogeneous(d)
        c[:, s] = self.coeffs[:, s]
        return Jet._raw(c, self.degree, self.base, self.real)

    def select(self, idx):
        """Sub-batch."""
        idx = np.atleast_1d(np.arange(self.batch)[idx])
        return Jet._raw(self.coeffs[idx].copy(), self.degree, self.base[idx].copy(), self.real)

    def _check(self, other):
        if self.nvars != other.nvars:
            raise JetBaseMismatch("jets live on different spaces")
        if self.base is not other.base and not np.array_equal(self.base, other.base):
            raise JetBaseMismatch("jets have different base points")

    # -- arithmetic -----------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return other
        arr = np.asarray(other, dtype=complex)
        real = bool(np.all(arr.imag == 0))
        return Jet.constant(np.broadcast_to(arr, (self.batch,)), self.base, self.degree, real)

    def __add__(self, other):
        other = self._coerce(other)
        d = min(self.degree, other.degree)
        n = self.table.size(d) if d == self.degree else other.table.size(d)
        c = self.coeffs[:, :n] + other.coeffs[:, :n]
        return Jet._raw(c, d, self.base, self.real and other.real)

    __radd__ = __add__

    def __neg__(self):
        return Jet._raw(-self.coeffs, self.degree, self.base, self.real)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def scale(self, c):
        """Multiply by per-batch scalars ``c`` (shape () or (B,))."""
        c = np.asarray(c, dtype=complex)
        real = self.real and bool(np.all(c.imag == 0))
        cc = c[..., None] if c.ndim else c
        return Jet._raw(self.coeffs * cc, self.degree, self.base, real)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return self.scale(other)
        self._check(other)
        d = min(self.degree, other.degree)
        return self._product(other, d)

    def __rmul__(self, other):
        return self.scale(other)

    def _product(self, other, d):
        tab = monomial_table(self.nvars, d)
        a = self.pad(d).coeffs if d > self.degree else self.coeffs
        b = other.pad(d).coeffs if d > other.degree else other.coeffs
        m = tab.size(d)
        ptr = tab.pair_ptr[: m + 1]
        n = ptr[-1]
        out = _mul_kernel(np.ascontiguousarray(a), np.ascontiguousarray(b),
                          tab.pair_i[:n], tab.pair_j[:n], ptr, m)
        return Jet._raw(out, d, self.base, self.real and other.real)

    def mul_ext(self, other):
        """Product whose degree uses exact valuations: ``min(D1 + v2, D2 + v1)``."""
        if not isinstance(other, Jet):
            return self.scale(other)
        self._check(other)
        d = min(self.degree + other.valuation(), other.degree + self.valuation())
        d = max(d, min(self.degree, other.degree))
        return self._product(other, d)

    def _series(self, mode, alpha=0.0, num=None):
        tab = self.table
        m = tab.size(self.degree)
        ptr = tab.pair_ptr[: m + 1]
        n = ptr[-1]
        numc = num if num is not None else self.coeffs
        return _series_kernel(np.ascontiguousarray(self.coeffs), np.ascontiguousarray(numc),
                              mode, float(alpha), tab.pair_i[:n], tab.pair_j[:n], ptr,
                              tab.degs, m)

    def _check_invertible(self, positive=False):
        c0 = self.coeffs[:, 0]
        if np.any(c0 == 0) or np.any(~np.isfinite(c0)):
            raise NotInvertible("jet not invertible: vanishing constant term at base point")
        if positive and self.real and np.any(c0.real <= 0):
            raise NotInvertible("log/power undefined: non-positive constant term at base point")

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self.scale(1 / np.asarray(other, dtype=complex))
        self._check(other)
        d = min(self.degree, other.degree)
        num, den = self.truncate(d), other.truncate(d)
        den._check_invertible()
        out = den._series(0, num=num.coeffs)
        return Jet._raw(out, d, self.base, self.real and other.real)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, alpha):
        if isinstance(alpha, (int, np.integer)) and alpha >= 0:
            out = Jet.constant(1.0, self.base, self.degree, True)
            out = Jet._raw(out.coeffs.copy(), self.degree, self.base, self.real)
            for _ in range(int(alpha)):
                out = out * self
            return out
        self._check_invertible(positive=True)
        out = self._series(1, alpha=alpha)
        return Jet._raw(out, self.degree, self.base, self.real)

    def exp(self):
        return Jet._raw(self._series(2), self.degree, self.base, self.real)

    def log(self):
        self._check_invertible(positive=True)
        return Jet._raw(self._series(3), self.degree, self.base, self.real)

    def conj(self):
        c = self.coeffs[:, self.table.conj_perm].conj()
        return Jet._raw(c, self.degree, self.base, self.real)

    @property
    def re(self):
        return Jet._raw(0.5 * (self.coeffs + self.coeffs[:, self.table.conj_perm].conj()),
                        self.degree, self.base, True)

    @property
    def im(self):
        return Jet._raw(-0.5j * (self.coeffs - self.coeffs[:, self.table.conj_perm].conj()),
                        self.degree, self.base, True)

    def d(self, var):
        """Formal derivative in variable index ``var``; degree drops by one.

        For ``var = 2j`` this is the Wirtinger derivative d/dz_j, for
        ``var = 2j + 1`` it is d/dzbar_j.
        """
        if self.degree == 0:
            raise ValueError("cannot differentiate a degree-0 jet")
        tab = self.table
        n = tab.size(self.degree - 1)
        src = tab.shift[:n, var]
        fac = tab.exps[src, var]
        c = self.coeffs[:, src] * fac
        return Jet._raw(c, self.degree - 1, self.base, False)

    def evaluate(self, w):
        """Evaluate the truncated polynomial at displacements ``w`` (shape (B, m))."""
        w = np.asarray(w, dtype=complex).reshape(self.batch, self.ncomplex)
        v = np.empty((self.batch, self.nvars), dtype=complex)
        v[:, 0::2] = w
        v[:, 1::2] = w.conj()
        mon = np.prod(v[:, None, :] ** self.table.exps[None], axis=-1)
        out = np.sum(mon * self.coeffs, axis=1)
        return out.real if self.real else out

    def max_abs(self):
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0


def _ncomplex_for(M, degree):
    for nc in (1, 2, 3, 4):
        if monomial_table(2 * nc, degree).size(degree) == M:
            return nc
    raise ValueError("cannot infer number of variables from coefficient count")


# ---------------------------------------------------------------------------
# functional API


def jet_from_polynomial(poly, base_point, degree, real=None):
    """Exact Taylor re-expansion of a :class:`~crqprime.poly.Polynomial` at ``base_point``.

    With ``real=True`` (the default for Hermitian input) the polynomial must
    be exactly Hermitian.
    """
    from .errors import ParseError

    if degree < 0:
        raise ValueError("degree must be non-negative")
    herm = poly.is_hermitian()
    if real is None:
        real = herm
    if real and not herm:
        raise ParseError("polynomial is not Hermitian; cannot build a real jet")
    base = _as_base(base_point, poly.ncomplex)
    tab = monomial_table(2 * poly.ncomplex, degree)
    c = poly.taylor_coefficients(base, degree, tab)
    return Jet._raw(c, degree, base.copy(), real)


def jet_mul(a, b):
    return a * b


def jet_add(a, b):
    return a + b


def jet_scale(a, c):
    return a.scale(c)


def jet_div(a, b):
    return a / b


def jet_pow_real(a, alpha):
    return a ** float(alpha)


def jet_exp(a):
    return a.exp()


def jet_log(a):
    return a.log()


WIRTINGER = {"d1": 0, "d1bar": 1, "d2": 2, "d2bar": 3}


def wirtinger(a, which):
    """``which`` is one of ``'d1', 'd1bar', 'd2', 'd2bar'`` (or a variable index)."""
    var = WIRTINGER[which] if isinstance(which, str) else int(which)
    return a.d(var)


def _substitution_matrix(tab, S):
    """Matrix P with (coeffs @ P) the coefficients after ``v_k -> sum_l S[k,l] v_l``."""
    M = tab.size(tab.degree)
    nv = tab.nvars
    P = np.zeros((M, M), dtype=complex)
    P[0, 0] = 1
    for m in range(1, M):
        e = tab.exps[m]
        k = int(np.argmax(e > 0))
        f = e.copy()
        f[k] -= 1
        parent = tab.index[tuple(f)]
        dprev = tab.homogeneous(int(e.sum()) - 1)
        rows = np.arange(dprev.start, dprev.stop)
        src = P[parent, rows]
        nz = np.nonzero(src)[0]
        for l in range(nv):
            if S[k, l] == 0:
                continue
            tgt = tab.shift[rows[nz], l]
            np.add.at(P[m], tgt, src[nz] * S[k, l])
    return P


def jet_linear_substitute(a, S):
    """Formal substitution ``v = S v'`` in the jet variables (base point unchanged)."""
    S = np.asarray(S, dtype=complex)
    tab = a.table
    P = _substitution_matrix(tab, S)
    return Jet._raw(a.coeffs @ P, a.degree, a.base, False)


def jet_compose_affine(a, A, b=None):
    """Re-expand ``a o T`` with ``T(zhat) = A zhat + b``, complex-linear ``A``.

    The result is based at the pulled-back point ``T^{-1}(base)``.
    """
    A = np.asarray(A, dtype=complex)
    m = a.ncomplex
    if A.shape != (m, m):
        raise ValueError("map matrix has wrong shape")
    if abs(np.linalg.det(A)) < 1e-14:
        raise NotInvertible("affine map is singular")
    b = np.zeros(m, complex) if b is None else np.asarray(b, dtype=complex)
    S = np.zeros((2 * m, 2 * m), dtype=complex)
    S[0::2, 0::2] = A
    S[1::2, 1::2] = A.conj()
    P = _substitution_matrix(a.table, S)
    new_base = np.linalg.solve(A, (a.base - b).T).T
    real = a.real
    return Jet._raw(a.coeffs @ P, a.degree, np.ascontiguousarray(new_base), real)


def jet_compose(a, maps):
    """Compose with a (non-linear) map given by jets.

    ``maps[k]`` is the jet of the displacement ``v_k - v_k(base)`` of the k-th
    old variable as a function of the new ones; all constant terms must vanish.
    """
    tab = a.table
    M = tab.size(a.degree)
    if any(np.any(np.abs(mk.coeffs[:, 0]) > 1e-12 * max(1.0, mk.max_abs())) for mk in maps):
        raise ValueError("composition maps must vanish at the base point")
    # drop rounding-level constants
    maps = [Jet._raw(np.concatenate([np.zeros_like(mk.coeffs[:, :1]), mk.coeffs[:, 1:]], axis=1),
                     mk.degree, mk.base, mk.real) for mk in maps]
    one = Jet.constant(1.0, maps[0].base, maps[0].degree, True)
    powers = [one]
    out = one.scale(a.coeffs[:, 0])
    for m in range(1, M):
        e = tab.exps[m]
        k = int(np.argmax(e > 0))
        f = e.copy()
        f[k] -= 1
        parent = tab.index[tuple(f)]
        powers.append(powers[parent].mul_ext(maps[k]).truncate(min(maps[0].degree, a.degree)))
        out = out + powers[m].scale(a.coeffs[:, m])
    return Jet._raw(out.coeffs, out.degree, out.base, a.real)


def jet_divide_by_power(g, u, s, tol=DIVISIBILITY_TOL, return_residual=False):
    """Solve ``h * u**s = g`` for ``h`` (degree ``g.degree - s``).

    ``u`` must vanish at the base point with non-zero differential.  The
    quotient is built degree by degree: the new homogeneous part of the
    remainder is divided ``s`` times by the linear part of ``u`` with a
    triangular solve ordered by decreasing power of the pivot variable (the
    one carrying the largest linear coefficient).  Raises
    :class:`~crqprime.errors.NotDivisible` when the final residual exceeds
    ``tol`` relative to the size of ``g``.
    """
    g._check(u)
    s = int(s)
    if s < 0:
        raise ValueError("power must be non-negative")
    D = g.degree - s
    if D < 0:
        raise ValueError("jet degree too low for the requested division")
    if u.degree < D + 1:
        raise ValueError("divisor jet has insufficient degree")
    if s == 0:
        return (g, 0.0) if return_residual else g
    if np.max(np.abs(u.coeffs[:, 0])) > 1e-12 * max(1.0, u.max_abs()):
        raise DegenerateDefiningFunction("divisor does not vanish at the base point")
    tab_u = monomial_table(u.nvars, 1)
    lin = u.coeffs[:, 1 : tab_u.size(1)].copy()
    if np.any(np.max(np.abs(lin), axis=1) == 0):
        raise DegenerateDefiningFunction("degenerate defining function: du = 0 at base point")
    pivot = np.argmax(np.abs(lin), axis=1).astype(np.int64)
    tab = monomial_table(g.nvars, g.degree)
    c = u.truncate(D + 1).coeffs.copy()
    c[:, 0] = 0  # exact valuation 1, checked above
    u0 = Jet._raw(c, D + 1, u.base, u.real)
    us = u0
    for _ in range(s - 1):
        us = us.mul_ext(u0)
    us = us.truncate(g.degree) if us.degree >= g.degree else us.pad(g.degree)
    hcoef = np.zeros((g.batch, tab.size(D)), dtype=complex)
    for d in range(D + 1):
        h = Jet._raw(hcoef.copy(), D, g.base, False)
        hu = h.pad(g.degree)._product(us, g.degree) if d > 0 else None
        rem = g.coeffs if hu is None else g.coeffs - hu.coeffs
        P = rem[:, tab.homogeneous(d + s)]
        for q in range(s):
            top = d + s - q
            lo, hi = tab.homogeneous(top - 1).start, tab.homogeneous(top - 1).stop
            plo = tab.homogeneous(top).start
            P = _divide_linear_kernel(np.ascontiguousarray(P), lin, pivot, tab.exps,
                                      tab.shift, tab.unshift, lo, hi, plo)
        hcoef[:, tab.homogeneous(d)] = P
    h = Jet._raw(hcoef, D, g.base, g.real and u.real)
    check = h.pad(g.degree)._product(us, g.degree)
    scale = max(1.0, g.max_abs())
    resid = float(np.max(np.abs(check.coeffs - g.coeffs))) / scale if g.coeffs.size else 0.0
    if resid > tol:
        raise NotDivisible(f"g not divisible by u^{s}: residual {resid:.3e}")
    return (h, resid) if return_residual else h


def jet_lift(a, new_base):
    """Embed a jet into more complex variables placed first.

    ``new_base`` (shape (m_new,) or (B, m_new)) gives the base coordinates of
    the new variables; the jet does not depend on them.
    """
    new_base = np.asarray(new_base, dtype=complex)
    if new_base.ndim == 1:
        new_base = np.broadcast_to(new_base, (a.batch, new_base.shape[0]))
    m_new = new_base.shape[1]
    tab_new = monomial_table(a.nvars + 2 * m_new, a.degree)
    pad = (0,) * (2 * m_new)
    idx = np.array([tab_new.index[pad + tuple(e)] for e in a.table.exps])
    c = np.zeros((a.batch, tab_new.size(a.degree)), dtype=complex)
    c[:, idx] = a.coeffs
    base = np.ascontiguousarray(np.concatenate([new_base, a.base], axis=1))
    return Jet._raw(c, a.degree, base, a.real)
