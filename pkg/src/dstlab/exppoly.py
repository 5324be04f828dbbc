"""Exponential polynomials sum d z^r e^{-a z} and their Laplace transforms.

Poisson means of tree parameters are infinite sums of such terms whose
coefficients grow like 2^l; they only converge after subtracting the
first Taylor terms at z = 0 from every exponential.  :class:`AnchoredExpPoly`
keeps that grouping explicit so evaluation and Laplace transforms stay
free of cancellation.
"""
from __future__ import annotations

import math
from collections import defaultdict
from typing import Iterable

import numpy as np


def _round_rate(a: float) -> float:
    # rates are sums of powers of two; keep dictionary keys canonical
    return float(a)


class ExpPolySeries:
    """Finite sum of d * z^r * exp(-a z) plus an affine part alpha + beta z."""

    __slots__ = ("terms", "alpha", "beta")

    def __init__(self, terms: dict | None = None, alpha: complex = 0.0, beta: complex = 0.0):
        self.terms: dict[tuple[int, float], complex] = {}
        if terms:
            for (r, a), d in terms.items():
                if d != 0:
                    key = (int(r), _round_rate(a))
                    self.terms[key] = self.terms.get(key, 0.0) + d
        self.alpha = alpha
        self.beta = beta

    @classmethod
    def monomial(cls, r: int = 0, a: float = 0.0, d: complex = 1.0) -> "ExpPolySeries":
        return cls({(r, a): d})

    @classmethod
    def poly_exp(cls, coeffs: Iterable, a: float) -> "ExpPolySeries":
        """(c_0 + c_1 z + ...) exp(-a z)."""
        return cls({(r, a): c for r, c in enumerate(coeffs) if c})

    def copy(self) -> "ExpPolySeries":
        out = ExpPolySeries(alpha=self.alpha, beta=self.beta)
        out.terms = dict(self.terms)
        return out

    def __len__(self):
        return len(self.terms)

    # algebra ------------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, ExpPolySeries):
            out = self.copy()
            out.alpha = out.alpha + other
            return out
        out = self.copy()
        for key, d in other.terms.items():
            out.terms[key] = out.terms.get(key, 0.0) + d
        out.alpha = out.alpha + other.alpha
        out.beta = out.beta + other.beta
        return out

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def _as_terms(self) -> dict:
        t = dict(self.terms)
        if self.alpha != 0:
            t[(0, 0.0)] = t.get((0, 0.0), 0.0) + self.alpha
        if self.beta != 0:
            t[(1, 0.0)] = t.get((1, 0.0), 0.0) + self.beta
        return t

    def __mul__(self, other):
        if not isinstance(other, ExpPolySeries):
            out = ExpPolySeries(alpha=self.alpha * other, beta=self.beta * other)
            out.terms = {k: d * other for k, d in self.terms.items()}
            return out
        left, right = self._as_terms(), other._as_terms()
        acc: dict = defaultdict(complex) if _is_complex(left, right) else defaultdict(float)
        for (r1, a1), d1 in left.items():
            for (r2, a2), d2 in right.items():
                acc[(r1 + r2, a1 + a2)] += d1 * d2
        return ExpPolySeries.from_terms(acc)

    __rmul__ = __mul__

    @classmethod
    def from_terms(cls, terms: dict) -> "ExpPolySeries":
        """Build from raw terms, moving a = 0 powers 0 and 1 into the affine part."""
        out = cls()
        for (r, a), d in terms.items():
            if d == 0:
                continue
            if a == 0.0 and r == 0:
                out.alpha = out.alpha + d
            elif a == 0.0 and r == 1:
                out.beta = out.beta + d
            else:
                out.terms[(r, a)] = out.terms.get((r, a), 0.0) + d
        return out

    def derivative(self, k: int = 1) -> "ExpPolySeries":
        cur = self
        for _ in range(k):
            acc: dict = defaultdict(complex) if _is_complex(cur.terms, {}) else defaultdict(float)
            for (r, a), d in cur.terms.items():
                if r:
                    acc[(r - 1, a)] += r * d
                if a:
                    acc[(r, a)] -= a * d
            nxt = ExpPolySeries.from_terms(acc)
            nxt.alpha = nxt.alpha + cur.beta
            cur = nxt
        return cur

    def dilate(self, lam: float) -> "ExpPolySeries":
        """z -> lam * z."""
        out = ExpPolySeries(alpha=self.alpha, beta=self.beta * lam)
        out.terms = {(r, a * lam): d * lam ** r for (r, a), d in self.terms.items()}
        return out

    def times_z(self, power: int = 1) -> "ExpPolySeries":
        return self * ExpPolySeries.monomial(power, 0.0)

    def prune(self, tol: float = 0.0) -> "ExpPolySeries":
        out = self.copy()
        out.terms = {k: d for k, d in self.terms.items() if abs(d) > tol}
        return out

    # evaluation ----------------------------------------------------------
    def _arrays(self):
        if not self.terms:
            return np.zeros(0, int), np.zeros(0), np.zeros(0)
        keys = list(self.terms)
        r = np.array([k[0] for k in keys])
        a = np.array([k[1] for k in keys])
        d = np.array([self.terms[k] for k in keys])
        return r, a, d

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        r, a, d = self._arrays()
        zz = z[..., None]
        val = (d * zz ** r * np.exp(-a * zz)).sum(axis=-1) if len(d) else np.zeros_like(z)
        return val + self.alpha + self.beta * z

    def laplace(self, s):
        """Exact Laplace transform sum d r!/(s+a)^{r+1} (+ alpha/s + beta/s^2)."""
        s = np.asarray(s)
        r, a, d = self._arrays()
        out = np.zeros(s.shape, dtype=complex if (np.iscomplexobj(s) or np.iscomplexobj(d)) else float)
        if len(d):
            fact = np.array([math.factorial(int(k)) for k in r], dtype=float)
            flat_s, flat_out = s.reshape(-1), out.reshape(-1)
            # group by power and chunk over s to keep memory bounded
            for rr in np.unique(r):
                sel = r == rr
                w = d[sel] * fact[sel]
                step = max(1, _CHUNK // int(sel.sum()))
                for i in range(0, flat_s.size, step):
                    base = flat_s[i:i + step, None] + a[sel]
                    flat_out[i:i + step] += (w * (1.0 / base) ** (rr + 1)).sum(axis=-1)
            out = flat_out.reshape(s.shape)
        if self.alpha != 0:
            out = out + self.alpha / s
        if self.beta != 0:
            out = out + self.beta / s ** 2
        return out


_CHUNK = 1 << 20


def _is_complex(*dicts) -> bool:
    return any(isinstance(v, complex) for d in dicts for v in d.values())


def binomial_tail(n: int, x, m0: int):
    """sum_{m >= m0} C(n-1+m, m) (-x)^m, i.e. (1+x)^{-n} minus its first m0 Taylor terms."""
    x = np.asarray(x, dtype=float) if not np.iscomplexobj(x) else np.asarray(x)
    out = np.empty(x.shape, dtype=x.dtype)
    small = np.abs(x) < 0.5
    if np.any(small):
        xs = x[small]
        term = np.full(xs.shape, float(math.comb(n - 1 + m0, m0)), dtype=x.dtype) * (-xs) ** m0
        acc = term.copy()
        m = m0
        while True:
            term = term * (-xs) * (n + m) / (m + 1)
            m += 1
            acc = acc + term
            if np.all(np.abs(term) <= 1e-17 * np.maximum(np.abs(acc), 1e-300)) or m > m0 + 200:
                break
        out[small] = acc
    big = ~small
    if np.any(big):
        xb = x[big]
        val = (1.0 + xb) ** (-n)
        for m in range(m0):
            val = val - math.comb(n - 1 + m, m) * (-xb) ** m
        out[big] = val
    return out


class AnchoredExpPoly:
    """poly(z) + sum c * (z^r e^{-a z} - T_{p-1}[z^r e^{-a z}](z)).

    T_{p-1} is the Taylor polynomial of degree p-1 at z = 0.  With p = 2 and
    poly = f(0) + f'(0) z this is the convergent form of Poisson means whose
    exponential coefficients grow geometrically.
    """

    def __init__(self, terms: dict, order: int, poly: Iterable = (0.0, 0.0)):
        self.terms = {(int(r), float(a)): c for (r, a), c in terms.items() if c != 0}
        self.order = order
        self.poly = list(poly)

    def derivative(self, k: int = 1):
        """Derivative; returns a plain ExpPolySeries once every anchor is used up."""
        cur = self
        for _ in range(k):
            if isinstance(cur, ExpPolySeries):
                cur = cur.derivative(1)
                continue
            plain = ExpPolySeries(cur.terms).derivative(1)
            poly = [i * c for i, c in enumerate(cur.poly)][1:]
            if cur.order <= 1:
                cur = plain + _poly_series(poly)
            else:
                cur = AnchoredExpPoly(plain.terms, cur.order - 1, poly)
        return cur

    def dilate(self, lam: float) -> "AnchoredExpPoly":
        return AnchoredExpPoly(
            {(r, a * lam): c * lam ** r for (r, a), c in self.terms.items()},
            self.order,
            [c * lam ** i for i, c in enumerate(self.poly)],
        )

    def plain_part(self) -> ExpPolySeries:
        """Exponential terms alone (valid for derivatives of order >= p)."""
        return ExpPolySeries(self.terms)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        out = sum(c * z ** i for i, c in enumerate(self.poly)) + np.zeros_like(z)
        for (r, a), c in self.terms.items():
            # z^r e^{-az} minus Taylor terms of degree < order
            m0 = max(0, self.order - r)
            tail = _exp_tail(-a * z, m0)
            out = out + c * z ** r * tail
        return out

    def laplace_times(self, mult: ExpPolySeries, s):
        """Laplace transform of mult(z) * self(z) at s."""
        s = np.asarray(s)
        total = mult.__mul__(_poly_series(self.poly)).laplace(s) if any(self.poly) else np.zeros(s.shape)
        mterms = mult._as_terms()
        for (q, b), dm in mterms.items():
            S = s + b
            for (r, a), c in self.terms.items():
                n = q + r + 1
                m0 = max(0, self.order - r)
                x = a / S
                total = total + dm * c * math.factorial(q + r) / S ** n * binomial_tail(n, x, m0)
        return total

    def laplace(self, s):
        return self.laplace_times(ExpPolySeries.monomial(0, 0.0), s)


def _poly_series(poly) -> ExpPolySeries:
    out = ExpPolySeries()
    for i, c in enumerate(poly):
        if c:
            out = out + ExpPolySeries.monomial(i, 0.0, c)
    return out


def _exp_tail(w, m0: int):
    """e^w minus its Taylor polynomial of degree m0-1, computed stably."""
    w = np.asarray(w, dtype=float)
    if m0 == 0:
        return np.exp(w)
    out = np.empty(w.shape)
    small = np.abs(w) < 1.0
    if np.any(small):
        ws = w[small]
        term = ws ** m0 / math.factorial(m0)
        acc = term.copy()
        m = m0
        for _ in range(40):
            m += 1
            term = term * ws / m
            acc = acc + term
        out[small] = acc
    big = ~small
    if np.any(big):
        wb = w[big]
        val = np.exp(wb)
        for m in range(m0):
            val = val - wb ** m / math.factorial(m)
        out[big] = val
    return out


# ---------------------------------------------------------------------------
# partial fractions of products of shifted powers


def partial_fractions(log_const: float, sign: float, poles: dict[float, int]) -> dict[float, list]:
    """Partial fractions of sign * exp(log_const) / prod_p (s + p)^{m_p}.

    Returns {p: [c_1, ..., c_m]} with c_r the coefficient of (s+p)^{-r}.
    Each pole is handled by a local Taylor expansion of its cofactor in the
    scaled variable v, s = p (v - 1) (s = v - 1 when p = 0 is not allowed);
    ratios p / (p_j - p) stay O(1) for dyadic poles, which keeps the
    expansion well conditioned.
    """
    items = list(poles.items())
    out: dict[float, list] = {}
    for p, m in items:
        others = [(q, mq) for q, mq in items if q != p]
        scale = p if p != 0 else 1.0
        # cofactor prod_q (s+q)^{-mq} with s = -p + scale*v:
        #   (q - p + scale v) = (q - p) (1 + rho v),  rho = scale / (q - p)
        logmag = log_const
        sgn = sign
        rhos, mults = [], []
        for q, mq in others:
            d = q - p
            logmag -= mq * math.log(abs(d))
            if d < 0 and mq % 2:
                sgn = -sgn
            rhos.append(scale / d)
            mults.append(mq)
        rhos = np.array(rhos)
        mults = np.array(mults, dtype=float)
        # log cofactor series: sum_n (-1)^n mq rho^n / n v^n  (from -mq log(1+rho v))
        nterms = m
        logser = np.zeros(nterms)
        for n in range(1, nterms):
            logser[n] = float(np.sum(mults * (-1.0) ** n * rhos ** n / n)) if len(rhos) else 0.0
        ser = _exp_series(logser)
        base = sgn * math.exp(logmag)
        # (s+p)^{-m} = scale^{-m} v^{-m}; coefficient of v^{n-m} -> (s+p)^{n-m} scale^{-n}
        coeffs = [0.0] * m
        for n in range(m):
            r = m - n
            coeffs[r - 1] = base * ser[n] * scale ** (-n)
        out[p] = coeffs
    return out


def _exp_series(logser: np.ndarray) -> np.ndarray:
    """exp of a power series with zero constant term (truncated to the same length)."""
    n = len(logser)
    out = np.zeros(n)
    out[0] = 1.0
    for k in range(1, n):
        out[k] = sum(j * logser[j] * out[k - j] for j in range(1, k + 1)) / k
    return out
