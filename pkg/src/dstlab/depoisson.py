"""Poisson transforms, Poisson-Charlier polynomials and the corrected Poissonized variance.

A Poisson transform f~(z) = e^{-z} sum_k a_k z^k/k! is stored through its Taylor
coefficients c_n, i.e. f~(z) = sum_n c_n z^n/n!.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

from .qseries import q_infinity, _qk_list

MODES = ("f64", "exact")
F64_VTILDE_NMAX = 30


class CancellationError(ValueError):
    """Float evaluation requested where alternating cancellation destroys all digits."""


# ---------------------------------------------------------------------------
# Poisson-Charlier polynomials


def tau(j: int, n: int) -> int:
    """tau_j(n) = sum_l C(j,l) (-1)^{j-l} n^{j-l} n!/(n-l)!."""
    if j < 0 or n < 0:
        raise ValueError("j and n must be nonnegative")
    total, falling = 0, 1
    for ell in range(min(j, n) + 1):
        total += math.comb(j, ell) * (-n) ** (j - ell) * falling
        falling *= n - ell
    return total


def tau_by_convolution(j: int, n: int) -> int:
    """n! [z^n] (z-n)^j e^z, by exact polynomial convolution."""
    if j < 0 or n < 0:
        raise ValueError("j and n must be nonnegative")
    poly = [math.comb(j, i) * (-n) ** (j - i) for i in range(j + 1)]
    coeff = sum(Fraction(poly[i], math.factorial(n - i)) for i in range(min(j, n) + 1))
    out = coeff * math.factorial(n)
    assert out.denominator == 1
    return int(out)


def tau_table(jmax: int, ns: Sequence[int]) -> list[list[int]]:
    return [[tau(j, n) for n in ns] for j in range(jmax + 1)]


def charlier_identity_sum(derivs: Callable[[int], object] | Sequence, n: int, J: int):
    """sum_{j<=J} f~^{(j)}(n) tau_j(n)/j!; exact when the derivatives are rational."""
    get = derivs if callable(derivs) else derivs.__getitem__
    total = 0
    for j in range(J + 1):
        d = get(j)
        if isinstance(d, (int, Fraction)):
            total += Fraction(tau(j, n), math.factorial(j)) * d
        else:
            total += d * (tau(j, n) / math.factorial(j))
    return total


def charlier_partial_sums(kind: str, n: int, J: int) -> list[float]:
    """Partial sums for the two worked cases: 'alternating' (f~ = e^{-2z}, limit (-1)^n)
    and 'power2' (f~ = e^z, limit 2^n). Summed exactly, scaled once at the end."""
    if kind == "alternating":
        step, scale = -2, math.exp(-2.0 * n)
    elif kind == "power2":
        step, scale = 1, math.exp(float(n))
    else:
        raise ValueError("kind must be 'alternating' or 'power2'")
    out, total = [], Fraction(0)
    for j in range(J + 1):
        total += Fraction(step ** j * tau(j, n), math.factorial(j))
        out.append(float(total) * scale)
    return out


# ---------------------------------------------------------------------------
# Taylor-coefficient helpers


def poisson_taylor(a: Sequence, n: int) -> list:
    """Ordinary Taylor coefficients c_0..c_n of e^{-z} sum_k a_k z^k/k!."""
    if len(a) < n + 1:
        raise ValueError("need a_0..a_n")
    out = []
    for m in range(n + 1):
        out.append(sum(Fraction((-1) ** (m - k), math.factorial(k) * math.factorial(m - k)) * a[k]
                       for k in range(m + 1)))
    return out


def series_mul(a: Sequence, b: Sequence, n: int) -> list:
    """First n+1 coefficients of the product of two ordinary power series."""
    out = []
    for m in range(n + 1):
        out.append(sum(a[k] * b[m - k] for k in range(m + 1) if k < len(a) and m - k < len(b)))
    return out


@dataclass(frozen=True)
class PoissonSeries:
    """f~(z) = sum_n coeffs[n] z^n/n!."""

    coeffs: tuple
    mode: str = "exact"
    name: str = ""

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode == "f64" and not all(math.isfinite(float(c)) for c in self.coeffs):
            raise ValueError("coefficients must be finite")

    def __len__(self):
        return len(self.coeffs)

    def derivative(self, k: int = 1) -> "PoissonSeries":
        return PoissonSeries(self.coeffs[k:], self.mode, self.name)

    def evaluate(self, z, exact: bool | None = None):
        """Sum over the stored coefficients; rational z with exact mode gives a Fraction."""
        exact = self.mode == "exact" if exact is None else exact
        if exact:
            # one integer sum over the common denominator D * K! * q^K
            z = Fraction(z)
            p, q = z.numerator, z.denominator
            cs = [Fraction(c) for c in self.coeffs]
            if not cs:
                return Fraction(0)
            K = len(cs) - 1
            dens = [c.denominator for c in cs]
            dyadic = all(d & (d - 1) == 0 for d in dens)
            D = max(dens) if dyadic else math.lcm(*dens)
            shift = D.bit_length() - 1
            total, ratio = 0, 1  # ratio = K!/k!
            for k in range(K, -1, -1):
                c = cs[k]
                # long division of huge integers is quadratic; powers of two only need a shift
                scaled = c.numerator << (shift - dens[k].bit_length() + 1) if dyadic \
                    else c.numerator * (D // dens[k])
                total += scaled * ratio * p ** k * q ** (K - k)
                ratio *= k if k else 1
            return Fraction(total, D * math.factorial(K) * q ** K)
        total, term = 0.0, 1.0
        for k, c in enumerate(self.coeffs):
            if k:
                term *= z / k
            total += float(c) * term
        return total

    def to_csv(self) -> str:
        return "n,coefficient\n" + "".join(f"{k},{c}\n" for k, c in enumerate(self.coeffs))


def ipl_mean_series(nmax: int, mode: str = "exact") -> PoissonSeries:
    """Taylor coefficients of the IPL Poisson mean: 0, 0, then (-1)^n Q_{n-2}."""
    coeffs = [0, 0]
    q = Fraction(1)
    for n in range(2, nmax + 1):
        if n > 2:
            q *= 1 - Fraction(1, 2 ** (n - 2))
        coeffs.append((-1) ** n * q)
    if mode == "f64":
        coeffs = [float(c) for c in coeffs]
    return PoissonSeries(tuple(coeffs[: nmax + 1]), mode, "ipl mean")


# ---------------------------------------------------------------------------
# IPL Poisson mean in closed form


def _em1p(w: complex, k: int) -> complex:
    """k-th derivative in z of e^{-w} - 1 + w at w = z/2^l, without the 2^-l factors."""
    if k == 0:
        if abs(w) < 1e-3:
            return w * w / 2 - w ** 3 / 6 + w ** 4 / 24 - w ** 5 / 120
        return cmath.exp(-w) - 1 + w
    if k == 1:
        if abs(w) < 1e-3:
            return w - w * w / 2 + w ** 3 / 6 - w ** 4 / 24
        return 1 - cmath.exp(-w)
    return (-1) ** k * cmath.exp(-w)


def ipl_poisson_mean(z: complex, deriv: int = 0) -> complex:
    """Derivative of order `deriv` of Q_inf sum_l (2^l/Q_l)(e^{-z/2^l} - 1 + z/2^l)."""
    if deriv < 0:
        raise ValueError("deriv must be nonnegative")
    z = complex(z)
    if z == 0:
        if deriv < 2:
            return 0j
        qs = _qk_list(200)
        return complex(q_infinity() * (-1) ** deriv * sum(2.0 ** (ell * (1 - deriv)) / qs[ell]
                                                          for ell in range(200)))
    qs = _qk_list(200)
    # the tail is geometric in 2^-l; run until it falls below double precision
    lmax = int(math.log2(abs(z) + 1.0)) + 64
    total = 0j
    for ell in range(lmax + 1):
        w = z / 2.0 ** ell
        total += 2.0 ** (ell * (1 - deriv)) * _em1p(w, deriv) / qs[min(ell, 199)]
    return q_infinity() * total


def depoissonized_mean(n: int, K: int) -> float:
    """sum_{j<2K} f~_1^{(j)}(n) tau_j(n)/j! for the IPL Poisson mean."""
    if K < 1:
        raise ValueError("K must be >= 1")
    return sum(ipl_poisson_mean(n, j).real * tau(j, n) / math.factorial(j) for j in range(2 * K))


# ---------------------------------------------------------------------------
# corrected Poissonized variance of the internal path length


class _VTildeBuilder:
    """Grows the exact coefficients v~_n of V~ on demand.

    With a_k = mu~_{k+2} = (-1)^k Q_k, the Taylor coefficients of z f~_1''(z)^2 are
    g_n = n sum_k C(n-1,k) a_k a_{n-1-k}; Q_k = N_k / 2^{k(k+1)/2} with integer N_k,
    so each convolution is an integer sum over a common power-of-two denominator.
    """

    def __init__(self):
        self.num = [1]          # N_k = prod_{j<=k} (2^j - 1)
        self.h: list[Fraction] = []
        self.v: list[Fraction] = [Fraction(0)]

    def _grow_num(self, k):
        while len(self.num) <= k:
            j = len(self.num)
            self.num.append(self.num[-1] * ((1 << j) - 1))

    def _h(self, n):
        # sum_k C(n,k) a_k a_{n-k}; every term carries the sign (-1)^n
        self._grow_num(n)
        s = 0
        for k in range(n // 2 + 1):
            term = math.comb(n, k) * self.num[k] * self.num[n - k] << (k * (n - k))
            s += term if 2 * k == n else 2 * term
        return Fraction((-1) ** n * s, 1 << (n * (n + 1) // 2))

    def extend(self, nmax):
        while len(self.h) < nmax:
            self.h.append(self._h(len(self.h)))
        while len(self.v) <= nmax:
            n = len(self.v) - 1
            g = n * self.h[n - 1] if n else 0
            self.v.append(-(1 - Fraction(2) ** (1 - n)) * self.v[n] + g)
        return self.v[: nmax + 1]


_BUILDER = _VTildeBuilder()


def vtilde_coeffs(nmax: int, mode: str = "exact") -> PoissonSeries:
    """Taylor coefficients of V~, from V~ + V~' = 2 V~(z/2) + z f~_1''(z)^2."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if nmax < 1:
        raise ValueError("nmax must be >= 1")
    if mode == "f64" and nmax > F64_VTILDE_NMAX:
        raise CancellationError(
            f"float coefficients beyond n = {F64_VTILDE_NMAX} cannot be summed stably; use exact mode")
    v = _BUILDER.extend(nmax)
    if mode == "f64":
        return PoissonSeries(tuple(float(c) for c in v), mode, "vtilde")
    return PoissonSeries(tuple(v), mode, "vtilde")


def _terms_needed(n: float) -> int:
    # coefficients grow like 2^k, so terms behave like (2n)^k/k!
    return int(2 * math.e * n) + 60


def vtilde_at(n: int, deriv: int = 0) -> Fraction:
    """V~^{(deriv)}(n), summed exactly over rationals."""
    series = vtilde_coeffs(_terms_needed(n) + deriv, "exact").derivative(deriv)
    return series.evaluate(n)


def ipl_mean_at(n: int, deriv: int = 0) -> Fraction:
    """f~_1^{(deriv)}(n), summed exactly from its Taylor coefficients."""
    series = ipl_mean_series(_terms_needed(n) + deriv, "exact").derivative(deriv)
    return series.evaluate(n)


def vz_correction(f2_at_n, f1_at_n, f1prime_at_n, n):
    """f~_2 - f~_1^2 - z f~_1'^2."""
    return f2_at_n - f1_at_n ** 2 - n * f1prime_at_n ** 2


@lru_cache(maxsize=None)
def refined_variance(n: int) -> float:
    """V~(n) - (n/2) V~''(n) - (n^2/2) f~_1''(n)^2, the next-order de-Poissonized variance."""
    v0 = vtilde_at(n)
    v2 = vtilde_at(n, 2)
    f2 = ipl_mean_at(n, 2)
    return float(v0 - Fraction(n, 2) * v2 - Fraction(n * n, 2) * f2 * f2)
