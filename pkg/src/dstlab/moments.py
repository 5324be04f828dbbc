"""Moment recurrences for shape parameters of random (bucket) digital search trees.

A tree on N >= b keys keeps b keys in the root and sends the remaining
m = N - b keys left or right by fair coin flips, so the left subtree
receives k keys with probability C(m, k) / 2^m.  Every additive parameter
handled here satisfies

    X_N = X_k + X*_{m-k} + T(m, k),

with a toll T that depends on the split only.  NPL is the exception: it
carries the node count along and gets its own joint engine.

Two arithmetic modes are supported: ``f64`` (numpy float64) and ``exact``
(``fractions.Fraction``, or :class:`Sym` for log-valued tolls).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

PARAMS = ("ipl", "kpl", "npl", "ppl", "leaves", "dpl", "wpl")
MODES = ("f64", "exact")
F64_NMAX = 2 ** 15
EXACT_NMAX = 256


class UnsupportedParameter(ValueError):
    pass


# ---------------------------------------------------------------------------
# formal symbols for log-valued tolls


class Sym:
    """Polynomial of degree <= 2 with rational coefficients in formal symbols.

    Symbol ``j`` stands for the toll j*(log j)^p of a subtree with j keys, so
    WPL moments can be compared exactly before any logarithm is evaluated.
    """

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms: dict[tuple, Fraction] = {}
        if terms:
            for mono, c in terms.items():
                if c:
                    self.terms[mono] = Fraction(c)

    @classmethod
    def symbol(cls, j: int) -> "Sym":
        return cls({(j,): Fraction(1)})

    @staticmethod
    def _lift(x):
        return x if isinstance(x, Sym) else Sym({(): Fraction(x)})

    def __add__(self, other):
        other = self._lift(other)
        out = dict(self.terms)
        for mono, c in other.terms.items():
            v = out.get(mono, 0) + c
            if v:
                out[mono] = v
            else:
                out.pop(mono, None)
        res = Sym()
        res.terms = out
        return res

    __radd__ = __add__

    def __neg__(self):
        res = Sym()
        res.terms = {m: -c for m, c in self.terms.items()}
        return res

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, Sym):
            other = Fraction(other)
            if not other:
                return Sym()
            res = Sym()
            res.terms = {m: c * other for m, c in self.terms.items()}
            return res
        out: dict[tuple, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                mono = tuple(sorted(m1 + m2))
                out[mono] = out.get(mono, 0) + c1 * c2
        return Sym({m: c for m, c in out.items() if c})

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1 / Fraction(other))

    def __eq__(self, other):
        return self.terms == self._lift(other).terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        return f"Sym({self.terms!r})"

    def evaluate(self, power: int) -> float:
        total = 0.0
        for mono, c in self.terms.items():
            v = float(c)
            for j in mono:
                v *= j * math.log(j) ** power
            total += v
        return total


def to_float(x, power: int = 1) -> float:
    if isinstance(x, Sym):
        return x.evaluate(power)
    return float(x)


# ---------------------------------------------------------------------------
# binomial splitting weights


def binomial_row(n: int, mode: str = "f64"):
    """pi_{n,k} = C(n,k) 2^-n via the ratio recurrence (f64) or exactly."""
    if mode == "exact":
        den = 2 ** n
        return [Fraction(math.comb(n, k), den) for k in range(n + 1)]
    row = np.empty(n + 1)
    # start at the mode to keep the ratio recurrence away from underflow
    c = n // 2
    row[c] = math.exp(math.lgamma(n + 1) - math.lgamma(c + 1) - math.lgamma(n - c + 1) - n * math.log(2.0))
    for k in range(c, n):
        row[k + 1] = row[k] * (n - k) / (k + 1)
    for k in range(c, 0, -1):
        row[k - 1] = row[k] * k / (n - k + 1)
    return row


class _Rows:
    """Binomial rows for m = 0, 1, 2, ... built by Pascal's rule."""

    def __init__(self, mode: str):
        self.mode = mode
        self.m = 0
        self.row = [1] if mode == "exact" else np.ones(1)

    def advance_to(self, m: int):
        while self.m < m:
            if self.mode == "exact":
                r = self.row
                self.row = [1] + [r[i] + r[i + 1] for i in range(len(r) - 1)] + [1]
            else:
                r = self.row
                nxt = np.empty(len(r) + 1)
                nxt[0] = r[0] * 0.5
                nxt[-1] = r[-1] * 0.5
                nxt[1:-1] = 0.5 * (r[:-1] + r[1:])
                self.row = nxt
            self.m += 1
        return self.row


def _exact_avg(ints: list[int], m: int, values) -> Fraction:
    total = 0
    for c, v in zip(ints, values):
        total = total + c * v
    return total / Fraction(2 ** m) if not isinstance(total, Sym) else total * Fraction(1, 2 ** m)


# ---------------------------------------------------------------------------
# parameter definitions


@dataclass(frozen=True)
class SplitModel:
    """Initial values X_0..X_{b-1} (deterministic) and the toll T(m, k)."""

    name: str
    b: int
    initial: tuple
    toll: Callable[[int, str], object]  # returns array over k (f64) or list (exact)
    toll_constant: bool = True  # toll independent of k


def _const_toll(fn_f64, fn_exact):
    def toll(m, mode):
        return fn_exact(m) if mode == "exact" else fn_f64(m)

    return toll


def split_model(param: str, b: int = 1, power: int = 1) -> SplitModel:
    if param not in PARAMS or param == "npl":
        if param == "npl":
            raise UnsupportedParameter("npl uses npl_joint_series")
        raise UnsupportedParameter(f"unknown parameter {param!r}")
    if param != "kpl" and b != 1:
        raise UnsupportedParameter(f"{param} is only defined for b = 1")
    if b < 1:
        raise UnsupportedParameter("bucket capacity must be >= 1")

    if param in ("ipl", "kpl"):
        return SplitModel(param, b, (0,) * b, _const_toll(float, Fraction))

    if param == "leaves":
        return SplitModel(
            param, 1, (0,),
            _const_toll(lambda m: 1.0 if m == 0 else 0.0, lambda m: Fraction(int(m == 0))),
        )

    if param == "wpl":
        def toll(m, mode):
            if mode == "exact":
                return Sym.symbol(m + 1)
            # log(1) = 0, and 0 ** 0 = 1 keeps power = 0 a plain (m+1) toll
            return (m + 1) * math.log(m + 1) ** power
        return SplitModel(param, 1, (0,), toll)

    if param == "dpl":
        def toll(m, mode):
            if mode == "exact":
                return [Fraction(abs(m - 2 * k) ** power) for k in range(m + 1)]
            return np.abs(m - 2.0 * np.arange(m + 1)) ** power
        return SplitModel(param, 1, (0,), toll, toll_constant=False)

    # ppl: a child subtree of exactly one key is a leaf hanging off the root
    def toll(m, mode):
        t = [0] * (m + 1)
        if m >= 1:
            t[1] += m + 1
            t[m - 1] += m + 1
        if mode == "exact":
            return [Fraction(v) for v in t]
        return np.array(t, dtype=float)

    return SplitModel(param, 1, (0,), toll, toll_constant=False)


# ---------------------------------------------------------------------------
# moment series


@dataclass
class MomentSeries:
    param: str
    b: int
    nmax: int
    mode: str
    mu: list | np.ndarray
    var: list | np.ndarray | None = None
    second_moment: list | np.ndarray | None = None
    var_second_moment_path: list | np.ndarray | None = None
    muN: list | np.ndarray | None = None
    varN: list | np.ndarray | None = None
    cov: list | np.ndarray | None = None
    power: int = 1
    extra: dict = field(default_factory=dict)

    def as_float(self, name: str = "mu") -> np.ndarray:
        arr = getattr(self, name)
        if arr is None:
            raise AttributeError(f"{name} not computed")
        if self.mode == "f64":
            return np.asarray(arr, dtype=float)
        return np.array([to_float(x, self.power) for x in arr])


def _check(param, b, nmax, mode):
    if mode not in MODES:
        raise UnsupportedParameter(f"mode must be one of {MODES}")
    cap = EXACT_NMAX if mode == "exact" else F64_NMAX
    if not 0 <= nmax <= cap:
        raise UnsupportedParameter(f"nmax must lie in [0, {cap}] for mode {mode}")


def _dyadic_step(mu, var, t, row, m, want_var):
    """One exact step in integer arithmetic when every input is a dyadic rational.

    Values are scaled to a common denominator 2^E so the inner sums avoid the
    gcd reductions of Fraction arithmetic; returns None for other inputs.
    """
    tvals = [t] * (m + 1) if not isinstance(t, list) else t
    vals = list(mu[: m + 1]) + list(tvals) + (list(var[: m + 1]) if want_var else [])
    if not all(isinstance(x, (int, Fraction)) for x in vals):
        return None
    dens = [Fraction(x).denominator for x in vals]
    if any(d & (d - 1) for d in dens):
        return None
    E = max(d.bit_length() for d in dens) - 1

    def scaled(x):
        x = Fraction(x)
        return x.numerator << (E - x.denominator.bit_length() + 1)

    H = [scaled(x) for x in mu[: m + 1]]
    T = [scaled(x) for x in tvals]
    # mean = num / 2^(E+m)
    num = sum(c * (2 * h + tk) for c, h, tk in zip(row, H, T))
    mean = Fraction(num, 1 << (E + m))
    if not want_var:
        return mean, None
    V = [scaled(x) for x in var[: m + 1]]
    # deviations over 2^(E+m); variance over 2^(2E+3m)
    acc = 0
    for k in range(m + 1):
        d = ((H[k] + H[m - k] + T[k]) << m) - num
        acc += row[k] * ((V[k] << (E + 2 * m + 1)) + d * d)
    return mean, Fraction(acc, 1 << (2 * E + 3 * m))


def _run_split(model: SplitModel, nmax: int, mode: str, want_var: bool, path: str):
    b = model.b
    exact = mode == "exact"
    zero = Fraction(0) if exact else 0.0
    if exact:
        mu = [Fraction(v) for v in model.initial[: nmax + 1]]
    else:
        mu = np.zeros(nmax + 1)
        mu[: min(b, nmax + 1)] = model.initial[: nmax + 1]
    var = [zero] * min(b, nmax + 1) if exact else np.zeros(nmax + 1)
    sm = ([zero] * min(b, nmax + 1)) if exact else np.zeros(nmax + 1)
    if exact:
        for i in range(min(b, nmax + 1)):
            sm[i] = mu[i] * mu[i]
    else:
        sm[: min(b, nmax + 1)] = mu[: min(b, nmax + 1)] ** 2
    rows = _Rows(mode)
    direct = path in ("direct", "both")
    second = path in ("second-moment", "both")

    for N in range(b, nmax + 1):
        m = N - b
        row = rows.advance_to(m)
        t = model.toll(m, mode)
        fast = exact and not second and _dyadic_step(mu, var, t, row, m, want_var)
        if fast:
            mean, v = fast
            mu.append(mean)
            if want_var:
                var.append(v)
        elif exact:
            head = mu[: m + 1]
            tail = head[::-1]
            if model.toll_constant:
                mean = _exact_avg(row, m, [2 * x for x in head]) + t
                tvals = [t] * (m + 1)
            else:
                tvals = t
                mean = _exact_avg(row, m, [2 * x + tk for x, tk in zip(head, tvals)])
            mu.append(mean)
            if want_var:
                if direct:
                    dev = [x + y + tk - mean for x, y, tk in zip(head, tail, tvals)]
                    v = _exact_avg(row, m, [2 * vk + d * d for vk, d in zip(var[: m + 1], dev)])
                    var.append(v)
                if second:
                    terms = []
                    for k in range(m + 1):
                        x, y, tk = head[k], tail[k], tvals[k]
                        terms.append(sm[k] + sm[m - k] + 2 * x * y + tk * tk + 2 * tk * (x + y))
                    sm.append(_exact_avg(row, m, terms))
        else:
            head = mu[: m + 1]
            tail = head[::-1]
            tvals = np.full(m + 1, t) if model.toll_constant else t
            mean = float(row @ (2.0 * head + tvals))
            mu[N] = mean
            if want_var:
                if direct:
                    dev = head + tail + tvals - mean
                    var[N] = float(row @ (2.0 * var[: m + 1] + dev * dev))
                if second:
                    sh = sm[: m + 1]
                    sm[N] = float(row @ (2.0 * sh + 2.0 * head * tail + tvals * tvals + 2.0 * tvals * (head + tail)))
    return mu, (var if direct else None), (sm if second else None)


def mean_series(param: str, b: int = 1, nmax: int = 64, mode: str = "f64", power: int = 1) -> MomentSeries:
    _check(param, b, nmax, mode)
    if param == "npl":
        return npl_joint_series(b, nmax, mode)
    model = split_model(param, b, power)
    mu, _, _ = _run_split(model, nmax, mode, False, "direct")
    return MomentSeries(param, b, nmax, mode, mu, power=power)


def variance_series(param: str, b: int = 1, nmax: int = 64, mode: str = "f64",
                    path: str = "direct", power: int = 1) -> MomentSeries:
    if path not in ("direct", "second-moment", "both"):
        raise UnsupportedParameter(f"unknown variance path {path!r}")
    _check(param, b, nmax, mode)
    if param == "npl":
        return npl_joint_series(b, nmax, mode)
    model = split_model(param, b, power)
    mu, var, sm = _run_split(model, nmax, mode, True, path)
    out = MomentSeries(param, b, nmax, mode, mu, var=var, second_moment=sm, power=power)
    if sm is not None:
        if mode == "exact":
            alt = [s - x * x for s, x in zip(sm, mu)]
        else:
            alt = sm - mu * mu
        out.var_second_moment_path = alt
        if var is None:
            out.var = alt
    return out


# ---------------------------------------------------------------------------
# NPL: node count N_n and node-wise path length X_n jointly


def npl_joint_series(b: int, nmax: int, mode: str = "f64") -> MomentSeries:
    """E N, V N, Cov(N, X), E X, V X for N_{n+b} = N_k + N* + 1, X_{n+b} = X_k + X* + N_k + N*."""
    _check("npl", b, nmax, mode)
    if b < 1:
        raise UnsupportedParameter("bucket capacity must be >= 1")
    exact = mode == "exact"
    if exact:
        zero = Fraction(0)
        muN = [zero] + [Fraction(1)] * (min(b, nmax + 1) - 1)
        muX = [zero] * min(b, nmax + 1)
        vN = [zero] * min(b, nmax + 1)
        vX = list(vN)
        cNX = list(vN)
    else:
        muN = np.zeros(nmax + 1)
        muN[1: min(b, nmax + 1)] = 1.0
        muX = np.zeros(nmax + 1)
        vN = np.zeros(nmax + 1)
        vX = np.zeros(nmax + 1)
        cNX = np.zeros(nmax + 1)
    rows = _Rows(mode)
    for n_tot in range(b, nmax + 1):
        m = n_tot - b
        row = rows.advance_to(m)
        if exact:
            eN = _exact_avg(row, m, [2 * x for x in muN[: m + 1]]) + 1
            eX = _exact_avg(row, m, [2 * (x + y) for x, y in zip(muX[: m + 1], muN[: m + 1])])
            dN, dX, wN, wX, wC = [], [], [], [], []
            for k in range(m + 1):
                j = m - k
                a = muN[k] + muN[j] + 1 - eN
                c = muX[k] + muN[k] + muX[j] + muN[j] - eX
                # Var(X_k + N_k) = VX + VN + 2 Cov
                wX.append(vX[k] + vN[k] + 2 * cNX[k] + vX[j] + vN[j] + 2 * cNX[j] + c * c)
                wN.append(vN[k] + vN[j] + a * a)
                # Cov(N_k, X_k + N_k) = Cov + VN
                wC.append(cNX[k] + vN[k] + cNX[j] + vN[j] + a * c)
            muN.append(eN)
            muX.append(eX)
            vN.append(_exact_avg(row, m, wN))
            vX.append(_exact_avg(row, m, wX))
            cNX.append(_exact_avg(row, m, wC))
        else:
            hN, hX = muN[: m + 1], muX[: m + 1]
            eN = float(row @ (2.0 * hN)) + 1.0
            eX = float(row @ (2.0 * (hX + hN)))
            a = hN + hN[::-1] + 1.0 - eN
            s = hX + hN
            c = s + s[::-1] - eX
            w = vX[: m + 1] + vN[: m + 1] + 2.0 * cNX[: m + 1]
            muN[n_tot], muX[n_tot] = eN, eX
            vN[n_tot] = float(row @ (2.0 * vN[: m + 1] + a * a))
            vX[n_tot] = float(row @ (2.0 * w + c * c))
            cNX[n_tot] = float(row @ (2.0 * (cNX[: m + 1] + vN[: m + 1]) + a * c))
    return MomentSeries("npl", b, nmax, mode, muX, var=vX, muN=muN, varN=vN, cov=cNX)


def correlation(series: MomentSeries, n: int) -> float:
    vN = to_float(series.varN[n])
    vX = to_float(series.var[n])
    if vN <= 0 or vX <= 0:
        return float("nan")
    return to_float(series.cov[n]) / math.sqrt(vN * vX)


# ---------------------------------------------------------------------------
# exact distributions by brute force


@dataclass(frozen=True)
class Pmf:
    """Finite distribution; ``support`` and ``probs`` are parallel tuples."""

    support: tuple
    probs: tuple

    @classmethod
    def from_dict(cls, d: dict) -> "Pmf":
        try:
            keys = sorted(d)
        except TypeError:
            keys = list(d)
        return cls(tuple(keys), tuple(d[k] for k in keys))

    def as_dict(self) -> dict:
        return dict(zip(self.support, self.probs))

    def total(self) -> Fraction:
        return sum(self.probs, Fraction(0))

    def moment(self, r: int = 1):
        acc = Fraction(0)
        for x, p in zip(self.support, self.probs):
            term = p
            for _ in range(r):
                term = term * x
            acc = acc + term
        return acc

    def mean(self):
        return self.moment(1)

    def var(self):
        m = self.mean()
        return self.moment(2) - m * m


PMF_NMAX = 14


def _convolve(p: dict, q: dict, shift) -> dict:
    out: dict = {}
    for x, px in p.items():
        for y, py in q.items():
            key = x + y + shift
            out[key] = out.get(key, 0) + px * py
    return out


def pmf_oracle(param: str, b: int = 1, n: int = 3, power: int = 1) -> Pmf:
    """Exact law of a parameter at size n by convolving subtree laws over every split."""
    if n > PMF_NMAX or n < 0:
        raise UnsupportedParameter(f"pmf oracle supports 0 <= n <= {PMF_NMAX}")
    if param == "npl":
        joint = npl_joint_pmf(b, n)
        out: dict = {}
        for (_, x), p in joint.items():
            out[x] = out.get(x, 0) + p
        return Pmf.from_dict(out)
    model = split_model(param, b, power)
    laws = [{Fraction(v) if not isinstance(v, Sym) else v: Fraction(1)} for v in model.initial]
    if param == "wpl":
        laws = [{Sym(): Fraction(1)}]
    for N in range(b, n + 1):
        m = N - b
        t = model.toll(m, "exact")
        law: dict = {}
        for k in range(m + 1):
            w = Fraction(math.comb(m, k), 2 ** m)
            shift = t if model.toll_constant else t[k]
            for key, p in _convolve(laws[k], laws[m - k], shift).items():
                law[key] = law.get(key, 0) + w * p
        laws.append(law)
    return Pmf.from_dict(laws[n])


def npl_joint_pmf(b: int, n: int) -> dict:
    """Exact joint law {(N_n, X_n): p} of node count and node-wise path length."""
    if n > PMF_NMAX:
        raise UnsupportedParameter(f"pmf oracle supports n <= {PMF_NMAX}")
    laws = [{(0, 0): Fraction(1)}] + [{(1, 0): Fraction(1)} for _ in range(1, b)]
    for N in range(b, n + 1):
        m = N - b
        law: dict = {}
        for k in range(m + 1):
            w = Fraction(math.comb(m, k), 2 ** m)
            for (n1, x1), p1 in laws[k].items():
                for (n2, x2), p2 in laws[m - k].items():
                    key = (n1 + n2 + 1, x1 + x2 + n1 + n2)
                    law[key] = law.get(key, 0) + w * p1 * p2
        laws.append(law)
    return laws[n]


# ---------------------------------------------------------------------------
# IPL helpers


def alternating_coeffs(mu: Iterable) -> list:
    """mu~_n = sum_k C(n,k) (-1)^{n-k} mu_k (Taylor coefficients of the Poisson transform)."""
    mu = list(mu)
    out = []
    for n in range(len(mu)):
        out.append(sum((-1) ** (n - k) * math.comb(n, k) * mu[k] for k in range(n + 1)))
    return out


def ipl_mean_closed_form(n: int, terms: int | None = None) -> float:
    """Q_inf sum_l (2^l/Q_l) ((1-2^-l)^n - 1 + n 2^-l), summed with log1p for accuracy."""
    from .qseries import _qk_list

    qs = _qk_list(200)
    q_inf = qs[-1]
    total = float(n - 1) if n > 0 else 0.0  # l = 0 term
    if terms is None:
        terms = max(60, int(math.log2(max(n, 1))) + 60)
    for ell in range(1, terms):
        x = 2.0 ** -ell
        # (1-x)^n - 1 + n x without cancellation
        e = math.expm1(n * math.log1p(-x)) + n * x
        total += e / (x * qs[min(ell, 199)])
    return q_inf * total


def u_diagnostic(param: str, n: int, b: int = 1, power: int = 1, series: MomentSeries | None = None) -> float:
    """u_n = sum_k pi_{n,k} (mu_k + mu_{n-k} + T(n,k) - mu_{n+b})^2, the split-induced variance."""
    model = split_model(param, b, power)
    if series is None or len(series.mu) < n + b + 1:
        series = mean_series(param, b, n + b, "f64", power)
    mu = series.as_float("mu")
    row = binomial_row(n)
    t = model.toll(n, "f64")
    t = np.full(n + 1, t) if model.toll_constant else t
    d = mu[: n + 1] + mu[: n + 1][::-1] + t - mu[n + b]
    return float(row @ (d * d))


def toll_moment_identity(n: int) -> Fraction:
    """2^-n sum_k C(n,k)(n-2k)^2, which equals n."""
    return Fraction(sum(math.comb(n, k) * (n - 2 * k) ** 2 for k in range(n + 1)), 2 ** n)


def abs_toll_sum(n: int) -> int:
    """sum_k C(n,k)|n-2k| by direct summation."""
    return sum(math.comb(n, k) * abs(n - 2 * k) for k in range(n + 1))


def abs_toll_closed(n: int) -> int:
    if n == 0:
        return 0
    return 2 * math.factorial(n) // (math.factorial(n // 2) * math.factorial((n + 1) // 2 - 1))


# ---------------------------------------------------------------------------
# depth profile


def _poly_add(p, q):
    if len(p) < len(q):
        p, q = q, p
    out = list(p)
    for i, c in enumerate(q):
        out[i] = out[i] + c
    return out


def depth_profile_poly(n: int, mode: str = "exact") -> list:
    """Coefficients of P_n(y) = sum_k C(n,k)(-1)^{k-1} prod_{0<=j<=k-2}(1 - y/2^j)."""
    if mode == "f64" and n > 60:
        raise UnsupportedParameter("alternating sum loses all digits beyond n = 60 in f64; use exact mode")
    if mode == "exact" and n > EXACT_NMAX:
        raise UnsupportedParameter(f"exact mode supports n <= {EXACT_NMAX}")
    one = Fraction(1) if mode == "exact" else 1.0
    coeffs = [0 * one] * (n + 1)
    prod = [one]
    for k in range(1, n + 1):
        if k >= 2:
            j = k - 2
            scale = one / 2 ** j
            nxt = [0 * one] * (len(prod) + 1)
            for i, c in enumerate(prod):
                nxt[i] += c
                nxt[i + 1] -= c * scale
            prod = nxt
        w = math.comb(n, k) * (-1) ** (k - 1)
        for i, c in enumerate(prod):
            coeffs[i] += w * c
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return coeffs


def depth_profile_poly_rec(n: int, mode: str = "exact") -> list:
    """Same polynomial from P_{m+1}(y) = 1 + y 2^{1-m} sum_k C(m,k) P_k(y)."""
    one = Fraction(1) if mode == "exact" else 1.0
    polys = [[0 * one]]
    for m in range(n):
        acc = [0 * one]
        for k in range(m + 1):
            c = math.comb(m, k)
            acc = _poly_add(acc, [c * x for x in polys[k]])
        scale = one * 2 / 2 ** m
        nxt = [one] + [x * scale for x in acc]
        polys.append(nxt)
    out = polys[n]
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    return out


def depth_moments(nmax: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean and variance of the depth of a uniformly chosen node, for n = 0..nmax.

    Uses the first two factorial moments P'(1), P''(1) of the profile
    polynomial, whose recurrences have nonnegative terms only.
    """
    p1 = np.zeros(nmax + 1)  # P_n'(1)
    p2 = np.zeros(nmax + 1)  # P_n''(1)
    size = np.arange(nmax + 1, dtype=float)  # P_n(1) = n
    rows = _Rows("f64")
    for m in range(nmax):
        row = rows.advance_to(m)
        a0 = 2.0 * float(row @ size[: m + 1])
        a1 = 2.0 * float(row @ p1[: m + 1])
        a2 = 2.0 * float(row @ p2[: m + 1])
        # P = 1 + y A(y): P' = A + y A', P'' = 2A' + y A''
        p1[m + 1] = a0 + a1
        p2[m + 1] = 2.0 * a1 + a2
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(size > 0, p1 / np.maximum(size, 1), 0.0)
        second = np.where(size > 0, (p2 + p1) / np.maximum(size, 1), 0.0)
    return mean, second - mean * mean
