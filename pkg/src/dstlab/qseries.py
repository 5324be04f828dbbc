"""q-products, Γ/ψ on the complex plane, and the closed-form kernels phi and lambda_k.

Notation: Q_k = prod_{1<=j<=k} (1 - 2^-j), Q(z) = prod_{j>=1} (1 - z/2^j),
Q_inf = Q(1), chi_k = 2 k pi i / log 2.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

LOG2 = math.log(2.0)
EULER_GAMMA = 0.57721566490153286061
TRUNC = 1e-18
NEAR_ONE = 1e-4


def chi(k: int) -> complex:
    return 2j * math.pi * k / LOG2


@lru_cache(maxsize=None)
def _qk_list(kmax: int) -> tuple[float, ...]:
    out = [1.0]
    for j in range(1, kmax + 1):
        out.append(out[-1] * (1.0 - 2.0 ** -j))
    return tuple(out)


def q_k(k: int) -> float:
    """Q_k; k=0 is the empty product."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k > 80:
        return q_infinity()
    return _qk_list(max(k, 80))[k]


def q_infinity() -> float:
    return _qk_list(80)[80]


@dataclass(frozen=True)
class QContext:
    kmax: int = 80
    truncation_bound: float = TRUNC
    qk_table: np.ndarray = field(init=False, repr=False)
    q_infinity: float = field(init=False)

    def __post_init__(self):
        table = np.array(_qk_list(self.kmax))
        table.setflags(write=False)
        object.__setattr__(self, "qk_table", table)
        object.__setattr__(self, "q_infinity", float(table[-1]))

    def qk(self, k: int) -> float:
        return float(self.qk_table[min(k, self.kmax)])


def q_of(z: complex) -> complex:
    """prod_{j>=1} (1 - z/2^j), truncated once |z|/2^j falls below TRUNC."""
    z = complex(z)
    if z == 0:
        return 1.0 + 0j
    jmax = max(1, int(math.log2(abs(z) / TRUNC)) + 2)
    prod = 1.0 + 0j
    for j in range(1, jmax + 1):
        prod *= 1.0 - z / 2.0 ** j
    return prod


def q_inverse_series(z: complex, terms: int = 200) -> complex:
    """Sum z^l/(Q_l 2^l), equal to 1/Q(z) for |z| < 2."""
    qs = _qk_list(max(terms, 80))
    total, power = 0j, 1.0 + 0j
    for ell in range(terms):
        total += power / qs[ell]
        power *= z / 2.0
        if abs(power) < 1e-20 * max(1.0, abs(total)):
            break
    return total


def log_q_neg2s(s, b: int = 1):
    """b * log prod_{j>=0} (1 + s/2^j); vectorized over real or complex s."""
    s_arr = np.asarray(s)
    smax = float(np.max(np.abs(s_arr))) if s_arr.size else 0.0
    if smax == 0.0:
        return np.zeros_like(s_arr, dtype=float) if s_arr.ndim else 0.0
    jmax = max(1, int(math.log2(smax / TRUNC)) + 2)
    acc = np.zeros(s_arr.shape, dtype=complex if np.iscomplexobj(s_arr) else float)
    for j in range(jmax + 1):
        acc = acc + np.log1p(s_arr / 2.0 ** j)
    out = b * acc
    return out if s_arr.ndim else out.item()


def q_neg2s(s: complex, b: int = 1) -> complex:
    """prod_{j>=0} (1 + s/2^j)^b, i.e. Q(-2s)^b."""
    if isinstance(s, complex) or np.iscomplexobj(s):
        return np.exp(log_q_neg2s(complex(s), b))
    return float(np.exp(log_q_neg2s(float(s), b)))


def q_coeff(k: int) -> complex:
    """Coefficient of s^{-chi_k} in the large-s expansion of log Q(-2s)."""
    if k == 0:
        return LOG2 / 12.0 + math.pi ** 2 / (6.0 * LOG2)
    # residue of pi s^-w / ((1-2^w) w sin(pi w)) at w = chi_k; sin(pi chi_k) = i sinh(2k pi^2/L)
    return -1.0 / (2.0 * k * math.sinh(2.0 * k * math.pi ** 2 / LOG2))


def logq_asymptotic(s: float, kmax: int = 1) -> float:
    """(log s)^2/(2 log 2) + (log s)/2 + sum_{|k|<=kmax} q_k s^{-chi_k}."""
    if s < 10:
        raise ValueError("expansion is meant for s >= 10")
    ls = math.log(s)
    val = ls * ls / (2.0 * LOG2) + ls / 2.0 + q_coeff(0)
    for k in range(1, kmax + 1):
        # q_{-k} = q_k with k -> -k gives the conjugate term
        val += 2.0 * (q_coeff(k) * cmath.exp(-chi(k) * ls)).real
    return val


def complex_gamma(z: complex) -> complex:
    z = complex(z)
    if z.imag == 0 and z.real <= 0 and z.real == round(z.real):
        raise ValueError(f"Gamma has a pole at {z.real:g}")
    return complex(special.gamma(z))


def digamma(z: complex) -> complex:
    z = complex(z)
    if z.imag == 0 and z.real <= 0 and z.real == round(z.real):
        raise ValueError(f"digamma has a pole at {z.real:g}")
    return complex(special.psi(z))


def _phi_at_one(omega: complex) -> complex:
    # pi (w-1)(w-2) / (2 sin pi w), with the removable points w=1,2 filled in
    n = round(omega.real)
    d = omega - n
    if abs(d) < 1e-7 and n in (1, 2):
        # sin(pi w) = (-1)^n sin(pi d); (w-n)/sin(pi d) -> 1/pi
        other = (omega - 2) if n == 1 else (omega - 1)
        return (-1) ** n * other / 2.0 * (1.0 + (math.pi * d) ** 2 / 6.0)
    return math.pi * (omega - 1) * (omega - 2) / (2.0 * cmath.sin(math.pi * omega))


def phi(omega: complex, x: float) -> complex:
    """Meromorphic continuation of int_0^inf s^{w-1} / ((s+1)(s+x)^2) ds."""
    if x <= 0:
        raise ValueError("x must be positive")
    omega = complex(omega)
    u = 1.0 - x
    if abs(u) < NEAR_ONE:
        # Taylor in (1-x): phi(w;1) * sum_m 2(m+1)(3-w)_m/(m+2)! (1-x)^m
        base = _phi_at_one(omega)
        total, poch = 0j, 1.0 + 0j
        for m in range(5):
            total += 2.0 * (m + 1) * poch / math.factorial(m + 2) * u ** m
            poch *= 3.0 - omega + m
        return base * total
    n = round(omega.real)
    if abs(omega - n) < 1e-7:
        if n == 2:
            return complex((x - math.log(x) - 1.0) / (x - 1.0) ** 2)
        if n == 1:
            return complex(math.log(x) / (x - 1.0) ** 2 + 1.0 / (x * (1.0 - x)))
        raise ValueError("omega sits on a pole of the continuation")
    num = 1.0 + x ** (omega - 2) * ((omega - 2) * x + 1 - omega)
    return math.pi * num / ((x - 1.0) ** 2 * cmath.sin(math.pi * omega))


def lambda_c(t: float, c: complex) -> complex:
    """(1 - t^c (1 + c(1-t))) / (1-t)^2 for any complex exponent c; continuous at t=1."""
    if t <= 0:
        raise ValueError("t must be positive")
    c = complex(c)
    u = 1.0 - t
    if abs(u) < NEAR_ONE:
        # t^c (1 + c u) = sum_m b_m u^m; lambda = -sum_{m>=2} b_m u^{m-2}
        a = [1.0 + 0j]
        for m in range(1, 7):
            a.append(a[-1] * (c - m + 1) / m * -1)
        total = 0j
        for m in range(2, 7):
            total -= (a[m] + c * a[m - 1]) * u ** (m - 2)
        return total
    return (1.0 - t ** c * (1.0 + c * u)) / (u * u)


def lambda_k(t: float, k: int) -> complex:
    """lambda_c at the frequency c = chi_k; equals chi_k (chi_k + 1) / 2 at t = 1."""
    return lambda_c(t, chi(k))
