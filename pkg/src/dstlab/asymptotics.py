"""Laplace-Mellin evaluation of asymptotic constants and Fourier coefficients.

Every constant has the shape (1/log 2) * int_0^inf s^{w-1} F(s) ds where F is
a Laplace transform divided by Q(-2s)^b.  Laplace transforms of Poisson
functions are exact sums over exponential polynomials (see ``exppoly``), so
each constant costs one quadrature in u = log s.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np

from .exppoly import AnchoredExpPoly, ExpPolySeries, partial_fractions
from .qseries import (
    EULER_GAMMA,
    LOG2,
    chi,
    complex_gamma,
    digamma,
    lambda_c,
    log_q_neg2s,
    phi,
    q_infinity,
    q_k,
)

__all__ = [
    "ConstantResult",
    "ExpPolySeries",
    "AnchoredExpPoly",
    "FourierSeries",
    "QuadratureError",
    "quad_0_inf",
    "mellin",
]

Q_INF = q_infinity()
EPS = float(np.finfo(float).eps)
LEVELS = 40  # dyadic poles 2^-l kept for l <= LEVELS


class QuadratureError(RuntimeError):
    def __init__(self, msg: str, partial: float | complex | None = None, est_error: float | None = None):
        super().__init__(msg)
        self.partial = partial
        self.est_error = est_error


@dataclass(frozen=True)
class ConstantResult:
    name: str
    value: float | complex
    est_error: float
    method: str
    reference_value: float | None = None
    b: int | None = None
    extra: dict = field(default_factory=dict, compare=False)

    def as_dict(self) -> dict:
        out = {"name": self.name, "b": self.b, "value": _jsonable(self.value),
               "est_error": self.est_error, "method": self.method}
        if self.reference_value is not None:
            out["reference_value"] = self.reference_value
        return out

    def scaled(self, factor: float, name: str | None = None, **kw) -> "ConstantResult":
        return ConstantResult(name or self.name, self.value * factor, self.est_error * abs(factor),
                              self.method, kw.get("reference_value", self.reference_value), kw.get("b", self.b))


def _jsonable(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    return float(v)


# ---------------------------------------------------------------------------
# quadrature


@lru_cache(maxsize=None)
def _gauss(order: int):
    return np.polynomial.legendre.leggauss(order)


def _panels(g, lo: float, hi: float, h: float, order: int):
    npan = max(1, int(math.ceil((hi - lo) / h)))
    edges = np.linspace(lo, hi, npan + 1)
    x, w = _gauss(order)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    u = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    vals = g(u)
    weights = (half[:, None] * w[None, :]).ravel()
    return np.sum(vals * weights), np.sum(np.abs(vals) * weights)


def _support(g, lo: float, hi: float, cutoff: float = 1e-19):
    grid = np.arange(lo, hi + 0.25, 0.25)
    with np.errstate(all="ignore"):
        vals = np.abs(g(grid))
    finite = np.isfinite(vals)
    if not np.any(finite):
        raise QuadratureError("integrand is not finite anywhere on the scan grid")
    peak = np.max(vals[finite])
    if peak == 0:
        return None
    big = np.where(~finite | (vals > cutoff * peak))[0]
    a, b = grid[big[0]], grid[big[-1]]
    if not np.all(finite[big[0]:big[-1] + 1]):
        raise QuadratureError("integrand is not finite inside its support")
    if big[0] == 0 or big[-1] == len(grid) - 1:
        raise QuadratureError(f"integrand not negligible at the scan edge u in [{lo}, {hi}]")
    return a - 1.0, b + 1.0


def quad_u(g: Callable, *, u_range=(-90.0, 90.0), panel: float = 0.5, order: int = 16,
           rtol: float = 1e-13, max_refine: int = 4):
    """Integrate g(u) du over the real line; g decays at both ends.

    Composite Gauss-Legendre on the numerical support, panel width halved
    until two levels agree.  Returns (value, est_error).
    """
    supp = _support(g, *u_range)
    if supp is None:
        return 0.0, 1e-300
    lo, hi = supp
    prev, _ = _panels(g, lo, hi, panel, order)
    h = panel
    for _ in range(max_refine):
        h /= 2
        cur, mass = _panels(g, lo, hi, h, order)
        diff = abs(cur - prev)
        floor = 1e-15 * max(abs(cur), mass)
        if diff <= max(rtol * abs(cur), floor):
            return cur, max(diff, floor, 1e-300)
        prev = cur
    raise QuadratureError("panel refinement did not converge", partial=cur, est_error=diff)


def quad_0_inf(f: Callable, *, name: str = "integral", theta: float = 0.0,
               method: str = "single-quadrature", **kw) -> ConstantResult:
    """int_0^inf f(s) ds, optionally along the ray s = t e^{i theta} (Cauchy rotation).

    f must accept numpy arrays.  Substitution s = e^u turns algebraic behaviour
    at both ends into exponential decay in u.
    """
    rot = np.exp(1j * theta) if theta else 1.0

    def g(u):
        s = np.exp(u) * rot
        return f(s) * s

    val, err = quad_u(g, **kw)
    if theta == 0.0 and np.iscomplexobj(val) and abs(val.imag) <= 1e-14 * abs(val):
        val = val.real
    val = complex(val) if np.iscomplexobj(val) else float(val)
    return ConstantResult(name, val, float(err), method)


def mellin(F: Callable, omega: complex, *, theta: float = 0.0, log_power: int = 0,
           name: str = "mellin", **kw) -> ConstantResult:
    """int_0^inf s^{omega-1} (log s)^p F(s) ds.

    For omega = 2 + chi_k the integrand oscillates and the result is
    exponentially small; rotating the ray by theta = +-pi/2 removes the
    cancellation (F must be analytic in the sector crossed).
    """
    rot = complex(np.exp(1j * theta))
    logrot = 1j * theta

    def g(u):
        s = np.exp(u) * rot
        out = np.exp(omega * (u + logrot)) * F(s)
        if log_power:
            out = out * (u + logrot) ** log_power
        return out

    val, err = quad_u(g, **kw)
    if theta == 0.0 and complex(omega).imag == 0 and np.iscomplexobj(val):
        val = val.real
    val = complex(val) if np.iscomplexobj(val) else float(val)
    return ConstantResult(name, val, float(err), "single-quadrature")


def _rotation(omega: complex) -> float:
    im = complex(omega).imag
    return 0.0 if im == 0 else math.copysign(math.pi / 2, im)


def inv_q(s, b: int = 1):
    """1/Q(-2s)^b evaluated as exp(-log), safe for large |s|."""
    return np.exp(-log_q_neg2s(s, b))


def inv_q_half(s, b: int = 1):
    """1/Q(-s)^b = 1/Q(-2(s/2))^b."""
    return np.exp(-log_q_neg2s(np.asarray(s) / 2.0, b))


# ---------------------------------------------------------------------------
# Fourier series


@dataclass
class FourierSeries:
    """Coefficients c_k of sum_k c_k e^{2 k pi i t}; c_0 is the mean value."""

    coeffs: dict[int, complex]
    name: str = ""
    base: float = LOG2

    @property
    def mean(self) -> complex:
        return self.coeffs.get(0, 0.0)

    def amplitude(self) -> float:
        """sum_{k != 0} |c_k|, an upper bound for |periodic part|."""
        return float(sum(abs(c) for k, c in self.coeffs.items() if k != 0))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for k, c in self.coeffs.items():
            out = out + c * np.exp(2j * math.pi * k * t)
        return out.real if self.is_real() else out

    def is_real(self, tol: float = 1e-12) -> bool:
        for k, c in self.coeffs.items():
            other = self.coeffs.get(-k)
            if other is None or abs(other - np.conj(c)) > tol * max(1.0, abs(c)):
                return False
        return True

    def periodic(self) -> "FourierSeries":
        return FourierSeries({k: c for k, c in self.coeffs.items() if k != 0}, self.name, self.base)


def fourier_from_mellin(F: Callable, kmax: int, scale: Callable[[complex], complex],
                        name: str = "", omega0: float = 2.0, **kw) -> FourierSeries:
    """c_k = scale(omega0 + chi_k) * int s^{omega0+chi_k-1} F(s) ds, with conjugate symmetry."""
    coeffs = {}
    for k in range(0, kmax + 1):
        w = omega0 + chi(k)
        m = mellin(F, w, theta=_rotation(w), **kw)
        coeffs[k] = complex(scale(w) * m.value)
        if k:
            coeffs[-k] = complex(np.conj(coeffs[k]))
    return FourierSeries(coeffs, name)


# ---------------------------------------------------------------------------
# combinations whose Laplace transforms are exact


class LaplaceCombo:
    """sum of mult_i(z) * anchored_i(z) (anchored_i may be None for plain terms)."""

    def __init__(self, parts: Iterable | None = None):
        self.parts: list[tuple[ExpPolySeries, AnchoredExpPoly | None]] = list(parts or [])

    def add(self, mult: ExpPolySeries, anchored: AnchoredExpPoly | None = None, coef: float = 1.0):
        self.parts.append((mult * coef if coef != 1.0 else mult, anchored))
        return self

    def laplace(self, s):
        s = np.asarray(s)
        total = np.zeros(s.shape, dtype=complex if np.iscomplexobj(s) else float)
        for mult, anch in self.parts:
            total = total + (mult.laplace(s) if anch is None else anch.laplace_times(mult, s))
        return total

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        total = np.zeros(z.shape)
        for mult, anch in self.parts:
            total = total + (mult(z) if anch is None else mult(z) * anch(z))
        return total


def _as_combo(g) -> LaplaceCombo:
    return g if isinstance(g, LaplaceCombo) else LaplaceCombo([(g, None)])


# ---------------------------------------------------------------------------
# Poisson means as anchored exponential polynomials


def _mean_from_terms(terms: Iterable, poly, levels: int = LEVELS) -> AnchoredExpPoly:
    """Sum partial fractions of Laplace terms into sum c z^r e^{-a z}, anchored at order 2.

    ``terms`` yields (log_const, poles) for exp(log_const)/prod (s+p)^m.  The
    pole at 0 only feeds the affine part, which ``poly`` fixes from f(0), f'(0).
    """
    floor = 2.0 ** -levels
    acc: dict[tuple[int, float], float] = {}
    for log_const, poles in terms:
        pf = partial_fractions(log_const, 1.0, poles)
        for p, cs in pf.items():
            if p == 0 or p < floor * 0.999:
                continue
            for r, c in enumerate(cs, start=1):
                key = (r - 1, p)
                acc[key] = acc.get(key, 0.0) + c / math.factorial(r - 1)
    return AnchoredExpPoly(acc, order=2, poly=poly)


def _jmax(levels: int) -> int:
    return levels + 14


def _levels_for(b: int) -> int:
    # dropping poles below 2^-levels leaves an error ~ 16^b 2^-levels in f1''
    return max(LEVELS, 36 + 4 * b)


def bdst_mean_exppoly(b: int = 1, J: int | None = None, levels: int | None = None) -> AnchoredExpPoly:
    """Poisson mean of the key-wise path length of b-DSTs.

    Laplace transform s^-2 sum_j prod_{i<=j} (2^i s + 1)^-b, one partial
    fraction expansion per j.
    """
    if b < 1:
        raise ValueError("b must be >= 1")
    levels = _levels_for(b) if levels is None else levels
    J = _jmax(levels) if J is None else J

    def terms():
        for j in range(J + 1):
            poles = {0.0: 2}
            for i in range(j + 1):
                poles[2.0 ** -i] = b
            yield -b * LOG2 * j * (j + 1) / 2, poles

    fm = _mean_from_terms(terms(), poly=[0.0, 0.0], levels=levels)
    _check_laplace(fm, lambda s: s ** -2 * sum(
        np.prod([(2.0 ** i * s + 1) ** -b for i in range(j + 1)]) for j in range(J + 1)), "b-DST mean")
    return fm


def npl_mean_exppoly(b: int = 2, levels: int | None = None) -> AnchoredExpPoly:
    """Poisson mean of the node count of b-DSTs.

    Laplace transform sum_j 2^j s^-1 (2^j s+1)^-1 prod_{i<j} (2^i s+1)^-b.
    """
    levels = _levels_for(b) if levels is None else levels
    J = _jmax(levels)

    def terms():
        for j in range(J + 1):
            poles = {0.0: 1}
            for i in range(j):
                poles[2.0 ** -i] = b
            poles[2.0 ** -j] = poles.get(2.0 ** -j, 0) + 1
            yield -b * LOG2 * j * (j - 1) / 2, poles

    fm = _mean_from_terms(terms(), poly=[0.0, 1.0], levels=levels)
    _check_laplace(fm, lambda s: sum(
        2.0 ** j / (s * (2.0 ** j * s + 1)) * np.prod([(2.0 ** i * s + 1) ** -b for i in range(j)])
        for j in range(J + 1)), "node-count mean")
    return fm


def ppl_mean_exppoly(levels: int = LEVELS) -> AnchoredExpPoly:
    """Poisson mean of the fringe (peripheral) path length.

    Laplace transform 16 sum_k 4^k / ((2^{k+1}s+1)^3 prod_{i<k} (2^i s+1)).
    """
    J = _jmax(levels)

    def terms():
        for k in range(J + 1):
            poles = {2.0 ** -(k + 1): 3}
            for i in range(k):
                poles[2.0 ** -i] = 1
            yield math.log(16.0) + (2 * k - 3 * (k + 1) - k * (k - 1) / 2) * LOG2, poles

    fm = _mean_from_terms(terms(), poly=[0.0, 0.0], levels=levels)
    _check_laplace(fm, lambda s: 16 * sum(
        4.0 ** k / (2.0 ** (k + 1) * s + 1) ** 3 * np.prod([1 / (2.0 ** i * s + 1) for i in range(k)])
        for k in range(J + 1)), "fringe mean")
    return fm


def leaves_mean_exppoly(levels: int = LEVELS) -> AnchoredExpPoly:
    """Poisson mean of the number of leaves.

    Laplace transform sum_k 4^k / (prod_{i<k} (2^i s+1) (2^k s+1)^2).
    """
    J = _jmax(levels)

    def terms():
        for k in range(J + 1):
            poles = {2.0 ** -k: 2}
            for i in range(k):
                poles[2.0 ** -i] = 1
            yield -(k * (k - 1) / 2) * LOG2, poles

    fm = _mean_from_terms(terms(), poly=[0.0, 1.0], levels=levels)
    _check_laplace(fm, lambda s: sum(
        4.0 ** k / (2.0 ** k * s + 1) ** 2 * np.prod([1 / (2.0 ** i * s + 1) for i in range(k)])
        for k in range(J + 1)), "leaves mean")
    return fm


def ipl_mean_exppoly(levels: int = LEVELS) -> AnchoredExpPoly:
    """Closed form Q_inf sum_l (2^l/Q_l)(e^{-z/2^l} - 1 + z/2^l)."""
    terms = {(0, 2.0 ** -l): Q_INF * 2.0 ** l / q_k(l) for l in range(levels + 1)}
    return AnchoredExpPoly(terms, order=2, poly=[0.0, 0.0])


class PartialFractionError(ArithmeticError):
    pass


def _check_laplace(fm: AnchoredExpPoly, direct: Callable, what: str):
    pts = [0.1, 1.0, 10.0]
    got = np.array([complex(fm.laplace(np.array(s))) for s in pts])
    want = np.array([direct(s) for s in pts])
    # exponential coefficients cancel against each other, so scale by their absolute sum
    bound = np.array([sum(abs(c) * math.factorial(r) / (s + a) ** (r + 1)
                          for (r, a), c in fm.terms.items()) for s in pts])
    resid = float(np.max(np.abs(got - want) / (1e-9 * np.abs(want) + 1e3 * EPS * bound)))
    if not resid < 1.0:
        raise PartialFractionError(f"{what}: partial fractions residual {resid:.3e}")


# ---------------------------------------------------------------------------
# variance drivers g~


def form_g2_coeffs(b: int):
    """Coefficient tables of the derivative-product form of g~ (indices from 2)."""
    C = math.comb
    g = {}
    gp = {}
    for i1 in range(2, b + 1):
        for i2 in range(2, b + 1):
            g[(i1, i2)] = C(b, i1) * C(b, i2) - C(b, i1) * C(b - i1, i2) \
                - (b - i1 + 1) * C(b, i1 - 1) * C(b - i1, i2 - 1)
    for i1 in range(2, b + 2):
        for i2 in range(2, b + 2):
            gp[(i1, i2)] = C(b, i1 - 1) * C(b, i2 - 1) - C(b, i1 - 1) * C(b - i1 + 1, i2 - 1)
    return g, gp


def g_tilde_bucket(fmean: AnchoredExpPoly, b: int) -> ExpPolySeries:
    """g~ for the b-DST variance in product form; only derivatives of order >= 2 enter."""
    g, gp = form_g2_coeffs(b)
    ders = {i: fmean.derivative(i) for i in range(2, b + 2)}
    total = ExpPolySeries()
    for i1 in range(2, b + 2):
        inner = ExpPolySeries()
        for i2 in range(2, b + 2):
            if i1 <= b and i2 <= b and g[(i1, i2)]:
                inner = inner + ders[i2] * float(g[(i1, i2)])
            if gp[(i1, i2)]:
                inner = inner + ders[i2].times_z() * float(gp[(i1, i2)])
        if inner.terms or inner.alpha or inner.beta:
            total = total + ders[i1] * inner
    return total


def g_tilde_bucket_direct(fmean: AnchoredExpPoly, b: int, z) -> np.ndarray:
    """Pointwise g~ from the defining combination (oracle for the product form)."""
    z = np.asarray(z, dtype=float)
    d = [fmean(z)] + [fmean.derivative(k)(z) for k in range(1, b + 2)]
    C = math.comb

    def sq(j):  # (f^2)^{(j)}
        return sum(C(j, i) * d[i] * d[j - i] for i in range(j + 1))

    def dsq(m):  # (f'^2)^{(m)}
        return sum(C(m, i) * d[i + 1] * d[m - i + 1] for i in range(m + 1))

    def zdsq(j):  # (z f'^2)^{(j)}
        return z * dsq(j) + (j * dsq(j - 1) if j else 0.0)

    a = sum(C(b, j) * d[j] for j in range(b + 1))
    a1 = sum(C(b, j) * d[j + 1] for j in range(b + 1))
    return a * a + z * a1 * a1 - sum(C(b, j) * (sq(j) + zdsq(j)) for j in range(b + 1))


def g_tilde_split(fmean: AnchoredExpPoly, h1: ExpPolySeries, h2_plain: ExpPolySeries,
                  h2_with_f: ExpPolySeries | None = None,
                  h2_with_fp: ExpPolySeries | None = None) -> LaplaceCombo:
    """g~ for b = 1 models f + f' = 2 f(z/2) + h1, f2 + f2' = 2 f2(z/2) + 2 f(z/2)^2 + h2.

    h2 = h2_plain + h2_with_f * f(z/2) + h2_with_fp * f'(z/2).  Then
    g~ = z f''^2 + h2 - h1^2 - z h1'^2 - 4 h1 f(z/2) - 2 z h1' f'(z/2).
    """
    f2 = fmean.derivative(2)
    half = fmean.dilate(0.5)
    half_d = fmean.derivative(1).dilate(0.5)
    h1d = h1.derivative(1)
    plain = f2 * f2.times_z() + h2_plain - h1 * h1 - (h1d * h1d).times_z()
    with_f = h1 * -4.0
    if h2_with_f is not None:
        with_f = with_f + h2_with_f
    with_fp = h1d.times_z() * -2.0
    if h2_with_fp is not None:
        with_fp = with_fp + h2_with_fp
    return LaplaceCombo([(plain, None), (with_f, half), (with_fp, half_d)])


def _ep(coeffs: dict) -> ExpPolySeries:
    return ExpPolySeries.from_terms(coeffs)


def ppl_g_tilde(fmean: AnchoredExpPoly | None = None) -> LaplaceCombo:
    """g~ for the fringe path length (built from the fringe mean itself)."""
    fmean = fmean or ppl_mean_exppoly()
    h1 = _ep({(1, 0.5): 2.0, (2, 0.5): 0.5})
    h2_plain = _ep({(2, 1.0): 4.5, (1, 0.5): 4.0, (2, 0.5): 2.5, (3, 0.5): 0.25})
    h2_f = _ep({(2, 0.5): 1.0, (1, 0.5): 4.0})
    h2_fp = _ep({(2, 0.5): 1.0})
    return g_tilde_split(fmean, h1, h2_plain, h2_f, h2_fp)


def ppl_g_tilde_printed(fmean: AnchoredExpPoly | None = None) -> LaplaceCombo:
    """The closed g~ for the fringe path length exactly as usually printed (oracle candidate)."""
    fmean = fmean or ppl_mean_exppoly()
    f2 = fmean.derivative(2)
    plain = f2 * f2.times_z() - _ep({(5, 1.0): 1 / 16, (4, 1.0): 4 / 16, (3, 1.0): 16 / 16,
                                     (2, 1.0): -8 / 16, (1, 1.0): 64 / 16})
    plain = plain + _ep({(3, 0.5): 0.25, (2, 0.5): 2.5, (1, 0.5): 4.0})
    with_f = _ep({(2, 0.5): -1.0, (1, 0.5): -4.0})
    with_fp = _ep({(3, 0.5): 0.5, (2, 0.5): 1.0, (1, 0.5): 4.0})
    return LaplaceCombo([(plain, None), (with_f, fmean.dilate(0.5)),
                         (with_fp, fmean.derivative(1).dilate(0.5))])


def leaves_g_tilde(fmean: AnchoredExpPoly | None = None) -> LaplaceCombo:
    """g~ for the number of leaves: h1 = h2 = e^{-z}."""
    fmean = fmean or leaves_mean_exppoly()
    e = _ep({(0, 1.0): 1.0})
    return g_tilde_split(fmean, e, e)


def ipl_g_tilde() -> ExpPolySeries:
    """z f1''(z)^2 with f1'' = Q_inf sum_l e^{-z/2^l}/(2^l Q_l)."""
    f2 = ExpPolySeries({(0, 2.0 ** -l): Q_INF / (2.0 ** l * q_k(l)) for l in range(LEVELS + 1)})
    return f2 * f2.times_z()


# ---------------------------------------------------------------------------
# constants


def _const_from(F: Callable, name: str, b: int | None = None, reference=None, method="single-quadrature",
                rtol: float = 1e-13):
    res = mellin(F, 2.0, name=name, rtol=rtol)
    return ConstantResult(name, res.value / LOG2, res.est_error / LOG2, method, reference, b)


def variance_constant(g, b: int = 1, boundary: Callable | None = None, name: str = "variance",
                      reference=None, rtol: float = 1e-13) -> ConstantResult:
    """(1/log 2) int s (L[g~](s) + boundary(s)) / Q(-2s)^b ds."""
    combo = _as_combo(g)

    def F(s):
        val = combo.laplace(s)
        if boundary is not None:
            val = val + boundary(s)
        return val * inv_q(s, b)

    return _const_from(F, name, b, reference, rtol=rtol)


def variance_fourier(g, b: int = 1, kmax: int = 3, boundary: Callable | None = None,
                     name: str = "") -> FourierSeries:
    combo = _as_combo(g)

    def F(s):
        val = combo.laplace(s)
        if boundary is not None:
            val = val + boundary(s)
        return val * inv_q(s, b)

    return fourier_from_mellin(F, kmax, lambda w: 1.0 / (LOG2 * complex_gamma(w)), name)


# -- internal path length (b = 1)


def _ckps_terms(tol: float = 1e-14):
    """(weight, x) pairs of the triple sum, truncated when the weight falls below tol."""
    out = []
    j = 0
    while True:
        wj = 2.0 ** (-j * (j + 1) / 2) / q_k(j)
        if wj < tol:
            break
        h = 0
        while True:
            wh = wj / (q_k(h) * 2.0 ** h)
            if wh < tol:
                break
            l = 0
            while True:
                w = wh / (q_k(l) * 2.0 ** l)
                if w < tol:
                    break
                out.append(((-1) ** j * w, j, 2.0 ** (-j - h) + 2.0 ** (-j - l)))
                l += 1
            h += 1
        j += 1
    return out


def ckps_g2(omega: complex = 2.0, tol: float = 1e-14) -> complex:
    """G_2(omega) by the triple sum with the phi kernel."""
    total = 0j
    for w, j, x in _ckps_terms(tol):
        total += w * 2.0 ** (j * (omega - 2)) * phi(omega, x)
    return Q_INF * total


def ckps(tol: float = 1e-14) -> ConstantResult:
    """Variance constant of the internal path length via the triple sum."""
    a = ckps_g2(2.0, tol).real / LOG2
    b = ckps_g2(2.0, tol * 1e-2).real / LOG2
    err = max(abs(a - b), 1e-15)
    return ConstantResult("C_kps", b, err, "triple-sum", 0.2660036454)


def ckps_lambda_sum(c: complex, tol: float = 1e-14) -> complex:
    """Gamma(-1-c) Q_inf sum w lambda_c(x); equals G_2(2+c)/Gamma(2+c) at c = chi_k."""
    total = 0j
    for w, _, x in _ckps_terms(tol):
        total += w * lambda_c(x, c)
    return complex_gamma(-1 - c) * Q_INF * total


def ckps_limit_lambda(eps: float = 1e-3) -> float:
    """The k = 0 limit of the lambda form: Richardson over c = +-i eps, +-2 i eps."""
    def sym(e):
        return 0.5 * (ckps_lambda_sum(1j * e) + ckps_lambda_sum(-1j * e)).real
    return (4 * sym(eps) - sym(2 * eps)) / 3 / LOG2


def ckps_fourier(kmax: int = 10) -> FourierSeries:
    coeffs = {0: complex(ckps().value)}
    for k in range(1, kmax + 1):
        c = ckps_lambda_sum(chi(k)) / LOG2
        coeffs[k] = c
        coeffs[-k] = c.conjugate()
    return FourierSeries(coeffs, "varpi_kps")


def ckps_laplace() -> ConstantResult:
    """Same constant via L[z f1''^2] and one quadrature."""
    r = variance_constant(ipl_g_tilde(), 1, name="C_kps")
    return ConstantResult("C_kps", r.value, r.est_error, "single-quadrature", 0.2660036454, 1)


# -- b-DST key-wise path length

C_H_TABLE = {1: 0.26600, 2: 0.13260, 3: 0.09004, 4: 0.06958, 5: 0.05781}


@lru_cache(maxsize=None)
def _bdst_g(b: int) -> ExpPolySeries:
    return g_tilde_bucket(bdst_mean_exppoly(b), b).prune(0.0)


def c_h(b: int) -> ConstantResult:
    if not 1 <= b <= 6:
        raise ValueError("b must be in 1..6")
    # b-fold dyadic poles leave a rounding floor in L[g~] near s = 0
    rtol = 1e-13 if b <= 3 else (1e-8 if b <= 5 else 1e-6)
    r = variance_constant(_bdst_g(b), b, name="C_h", rtol=rtol)
    return ConstantResult("C_h", r.value, r.est_error, "single-quadrature", C_H_TABLE.get(b), b)


# -- node count of b-DSTs

C10_TABLE = {1: 1.0, 2: 0.57470, 3: 0.40698, 4: 0.31594, 5: 0.25849, 6: 0.21885}


def _g10_F(b: int):
    def F(s):
        return (s + 1.0) ** (b - 1) / s * inv_q(s, b)
    return F


def c10(b: int) -> ConstantResult:
    if not 1 <= b <= 6:
        raise ValueError("b must be in 1..6")
    r = _const_from(_g10_F(b), "c_10", b, C10_TABLE.get(b))
    return r


def p10_fourier(b: int, kmax: int = 3) -> FourierSeries:
    return fourier_from_mellin(_g10_F(b), kmax, lambda w: 1.0 / (LOG2 * complex_gamma(w)), "P_10")


def p01_fourier(b: int, kmax: int = 3) -> tuple[FourierSeries, FourierSeries]:
    """Families multiplying z and log2 z in the Poisson mean of the node-wise path length.

    From the double pole of 2^{2-w} G(w)/(1-2^{2-w})^2:
    z-family c_k = (G'(w) - psi(w) G(w)) / (log2^2 Gamma(w)),
    log2 z-family c_k = b G(w) / (log 2 Gamma(w - 1)),  w = 2 + chi_k.
    """
    F = _g10_F(b)
    c2, c4 = {}, {}
    for k in range(kmax + 1):
        w = 2.0 + chi(k)
        th = _rotation(w)
        G = complex(mellin(F, w, theta=th).value)
        Gd = complex(mellin(F, w, theta=th, log_power=1).value)
        c2[k] = (Gd - digamma(w) * G) / (LOG2 ** 2 * complex_gamma(w))
        c4[k] = b * G / (LOG2 * complex_gamma(w - 1))
        if k:
            c2[-k], c4[-k] = c2[k].conjugate(), c4[k].conjugate()
    return FourierSeries(c2, "P_01[2]"), FourierSeries(c4, "P_01[4]")


def npl_variance_initial(b: int) -> list:
    """Taylor derivatives V~^{(j)}(0), j = 0..b, of the corrected Poissonized node-count variance."""
    from fractions import Fraction

    from .moments import npl_joint_series
    from .depoisson import poisson_taylor, series_mul

    n = b + 2
    s = npl_joint_series(b, n, "exact")
    m1 = [Fraction(x) for x in s.muN]
    m2 = [Fraction(v) + Fraction(m) ** 2 for v, m in zip(s.varN, s.muN)]
    f1 = poisson_taylor(m1, n)          # Taylor coefficients (ordinary) of the Poisson transforms
    f2 = poisson_taylor(m2, n)
    d1 = [(i + 1) * f1[i + 1] for i in range(n)]
    sq = series_mul(f1, f1, n)
    zd = [Fraction(0)] + series_mul(d1, d1, n - 1)
    v = [f2[i] - sq[i] - zd[i] for i in range(n)]
    return [v[j] * math.factorial(j) for j in range(b + 1)]


def npl_boundary_poly(b: int) -> list:
    """Coefficients of B(s) = sum_j C(b,j) sum_{l<j} s^l V~^{(j-1-l)}(0)."""
    vd = npl_variance_initial(b)
    coeffs = [0.0] * max(1, b)
    for j in range(b + 1):
        for l in range(j):
            coeffs[l] += math.comb(b, j) * float(vd[j - 1 - l])
    return coeffs


def npl_boundary_printed(b: int, s):
    """((s+1)^{b-1} - (-1)^b (2b-3+(b-1)s)) / (s+2)^2, the form usually quoted."""
    return ((s + 1) ** (b - 1) - (-1) ** b * (2 * b - 3 + (b - 1) * s)) / (s + 2) ** 2


@lru_cache(maxsize=None)
def _npl_g(b: int) -> ExpPolySeries:
    return g_tilde_bucket(npl_mean_exppoly(b), b).prune(0.0)


def npl_p20_mean(b: int) -> ConstantResult:
    """Mean of the periodic function in V(N_n) ~ n P_20(log2 n)."""
    if b < 2:
        raise ValueError("b must be >= 2")
    coeffs = npl_boundary_poly(b)

    def boundary(s):
        return sum(c * s ** i for i, c in enumerate(coeffs))

    r = variance_constant(_npl_g(b), b, boundary=boundary, name="P_20 mean", rtol=1e-13 if b <= 2 else 1e-8)
    return ConstantResult("P_20 mean", r.value, r.est_error, "single-quadrature", None, b)


# -- fringe path length


def c_w_integral() -> ConstantResult:
    def F(s):
        return 16.0 * inv_q_half(s) / (2 * s + 1) ** 3
    return _const_from(F, "C_w", 1, 1.1030266959)


def _geom_sum(fn, tol=1e-18, start=1, cap=2000):
    total, k = 0.0, start
    while k < cap:
        t = fn(k)
        total += t
        if abs(t) < tol * max(1.0, abs(total)) and k > start + 5:
            break
        k += 1
    return total


def c_w_series() -> ConstantResult:
    s1 = 0.0
    for l in range(0, 200):
        inner = _geom_sum(lambda k: 1.0 / (2.0 ** (l + k) - 1)) - 1.0
        t = (l + 1) * (l - 2) / (q_k(l) * 2.0 ** l) * inner
        s1 += t
        if l > 10 and abs(t) < 1e-18:
            break
    s2 = sum((2 * l - 1) / (q_k(l) * 2.0 ** l) for l in range(200))
    val = s1 + s2 / LOG2
    return ConstantResult("C_w", val, 1e-14, "series", 1.1030266959, 1)


def c_w_identity_sums() -> dict:
    """Both sides of the two reciprocal-series identities used by the series form."""
    lhs1 = sum((l + 1) * (l - 2) / (q_k(l) * 2.0 ** l) for l in range(200))
    # sum_l z^l/Q_l = 1/prod_j (1 - z 2^-j); two z-derivatives at z = 1/2 give the right sides
    c1 = _c1()
    squares = _geom_sum(lambda j: 1 / (2.0 ** j - 1) ** 2)
    rhs1 = (squares + c1 * c1 - 2) / Q_INF
    printed1 = (squares + _geom_sum(lambda j: 1 / (2.0 ** j + 1)) ** 2 - 2) / Q_INF
    lhs2 = sum((2 * l - 1) / (q_k(l) * 2.0 ** l) for l in range(200))
    rhs2 = (2 * c1 - 1) / Q_INF
    return {"quadratic": (lhs1, rhs1), "linear": (lhs2, rhs2), "quadratic_printed": printed1}


def c_w() -> ConstantResult:
    a = c_w_integral()
    s = c_w_series()
    return ConstantResult("C_w", a.value, max(a.est_error, abs(a.value - s.value)),
                          "single-quadrature", 1.1030266959, 1, {"series": s.value})


def ppl_var_mean(printed: bool = False) -> ConstantResult:
    g = ppl_g_tilde_printed() if printed else ppl_g_tilde()
    r = variance_constant(g, 1, name="P_w mean")
    return ConstantResult("P_w mean", r.value, r.est_error, "single-quadrature", None, 1)


# -- leaves



def _c1() -> float:
    return _geom_sum(lambda k: 1.0 / (2.0 ** k - 1))


def c_fs_integral() -> ConstantResult:
    def F(s):
        return inv_q(s) / (s + 1)
    return _const_from(F, "C_fs", 1, 0.3720486812)


def c_fs_series_a() -> float:
    c1 = _c1()
    acc, harm = 0.0, 0.0
    for k in range(1, 300):
        harm += 1.0 / (2.0 ** k - 1)
        t = k / (q_k(k) * 2.0 ** k) * harm
        acc += t
        if t < 1e-19:
            break
    return 1.0 + acc - (1.0 / LOG2 + c1 * c1 - c1) / Q_INF


def c_fs_series_b() -> float:
    c1 = _c1()
    acc = 0.0
    for k in range(1, 40):
        acc += (-1) ** k * k / (q_k(k) * (2.0 ** k - 1) * 2.0 ** (k * (k + 1) / 2))
    return 1.0 + c1 - (1.0 / LOG2 + acc) / Q_INF


def c_fs() -> ConstantResult:
    a = c_fs_integral()
    sa, sb = c_fs_series_a(), c_fs_series_b()
    spread = max(abs(a.value - sa), abs(a.value - sb), abs(sa - sb))
    return ConstantResult("C_fs", a.value, max(a.est_error, spread), "single-quadrature",
                          0.3720486812, 1, {"series_a": sa, "series_b": sb})


def delta_l(l: int) -> float:
    """3 + 2 sum_{j<=l} 1/(2^j-1) + sum_j (-1)^j (3 2^j - 1) 2^{-j(j+1)/2} / ((2^j-1) 2^j Q_j)."""
    head = 3.0 + 2.0 * sum(1.0 / (2.0 ** j - 1) for j in range(1, l + 1))
    tail = 0.0
    for j in range(1, 60):
        t = (-1) ** j * (3 * 2.0 ** j - 1) * 2.0 ** (-j * (j + 1) / 2) / ((2.0 ** j - 1) * 2.0 ** j * q_k(j))
        tail += t
        if abs(t) < 1e-20:
            break
    return head + tail


def leaves_f1dd_closed(levels: int = 60) -> ExpPolySeries:
    """f1'' for the leaves from the delta_l sums (independent of partial fractions)."""
    terms = {}
    for l in range(levels + 1):
        w = 1.0 / (2.0 ** l * q_k(l))
        a = 2.0 ** -l
        terms[(0, a)] = 0.5 * w * (2.0 - delta_l(l))
        terms[(1, a)] = 0.5 * w * 2.0 ** (1 - l)
    return ExpPolySeries(terms)


def leaves_f1d_closed(levels: int = 60) -> AnchoredExpPoly:
    """f^_1' = f1' - 1 + z from the delta_l sums, anchored at order 2."""
    terms = {}
    for l in range(levels + 1):
        a = 2.0 ** -l
        terms[(0, a)] = (delta_l(l) - 4.0) / (2.0 * q_k(l))
        terms[(1, a)] = -1.0 / (2.0 ** l * q_k(l))
    return AnchoredExpPoly(terms, order=2, poly=[0.0, 0.0])


def c_kp_closed() -> ConstantResult:
    """C_kp through the three-integral split with f^_1 = f1 - z + z^2/2.

    The derivatives of f^_1 come from the delta_l sums, not from partial fractions.
    """
    f2 = leaves_f1dd_closed()
    g_main = f2 * f2.times_z()
    A = leaves_f1d_closed().dilate(0.5)
    # f1'(z/2) = f^_1'(z/2) + 1 - z/2; the often-quoted factor f^_1'(z/2) - z drops
    # a term worth int s/((s+1)^3 Q(-2s)) ds
    A = AnchoredExpPoly(A.terms, A.order, [A.poly[0] + 1.0, A.poly[1] - 0.5])
    ze = _ep({(1, 1.0): 1.0})
    e = _ep({(0, 1.0): 1.0})

    def F(s):
        first = 1.0 / ((s + 1) * (s + 2) ** 2)
        second = g_main.laplace(s)
        third = 2.0 * (A.laplace_times(ze, s) - A.laplace_times(e, s) / (s + 1))
        return (first + second + third) * inv_q(s)

    r = _const_from(F, "C_kp", 1, 0.034203)
    return ConstantResult("C_kp", r.value, r.est_error, "single-quadrature", 0.034203, 1, {"route": "closed"})


def c_kp() -> ConstantResult:
    """C_kp from the generic variance driver built on the partial-fraction mean."""
    r = variance_constant(leaves_g_tilde(), 1, name="C_kp", reference=0.034203)
    return ConstantResult("C_kp", r.value, r.est_error, "single-quadrature", 0.034203, 1, {"route": "generic"})


# -- differential path length


def dpl_mean_constant() -> ConstantResult:
    def F(s):
        return s ** -1.5 * (s + 2) ** -0.5 * inv_q(s)
    return _const_from(F, "DPL mean", 1, 1.3390746494)


def dpl_sqrt_candidates() -> dict:
    """Coefficients c of the -c sqrt(n) term: the two candidate forms."""
    return {
        "sqrt2_over": math.sqrt(2) / (math.sqrt(math.pi) * (math.sqrt(2) - 1)),
        "unit_over": 1.0 / (math.sqrt(math.pi) * (math.sqrt(2) - 1)),
    }


def dpl_sqrt_resolution(n: int = 4096, mu=None) -> dict:
    """Pick the sqrt(n) coefficient from (mu_2n - 2 mu_n)/sqrt(2n) -> c (sqrt2 - 1).

    The periodic n P(log2 n) part cancels exactly under doubling.
    """
    if mu is None:
        from .moments import mean_series
        mu = mean_series("dpl", 1, 2 * n).as_float("mu")
    stat = (mu[2 * n] - 2 * mu[n]) / math.sqrt(2 * n)
    cands = dpl_sqrt_candidates()
    pred = {k: c * (math.sqrt(2) - 1) for k, c in cands.items()}
    best = min(pred, key=lambda k: abs(pred[k] - stat))
    return {"n": n, "statistic": stat, "predicted": pred, "selected": best,
            "coefficient": cands[best]}


def dpl_constants(m: int = 1) -> dict:
    if not 1 <= m <= 6:
        raise ValueError("m must be in 1..6")
    if m == 1:
        return {"m": 1, "mean_periodic_mean": dpl_mean_constant(),
                "sqrt_candidates": dpl_sqrt_candidates(), "var_slope": 1.0 - 2.0 / math.pi}
    if m == 2:
        return {"m": 2, "mean": "internal path length mean", "var_coeff": 4.0}
    # E|n-2K|^m ~ a n^{m/2}; mu_n = c n^{m/2} solves c = 2c 2^{-m/2} + a
    toll_mean = 2.0 ** (m / 2) * math.gamma((m + 1) / 2) / math.sqrt(math.pi)
    mean_c = toll_mean / (1.0 - 2.0 ** (1 - m / 2))
    denom = math.sqrt(math.pi) * (1.0 - 2.0 ** (1 - m))
    var_c = 2.0 ** m * (math.gamma(m + 0.5) - math.gamma((m + 1) / 2) ** 2 / math.sqrt(math.pi)) / denom
    return {"m": m, "mean_coeff": mean_c, "mean_coeff_printed": toll_mean / (1.0 - 2.0 ** (1 - m)),
            "mean_exponent": m / 2, "var_coeff": var_c, "var_exponent": m}


# -- depth, internal path length mean, weighted path length


def depth_constants() -> dict:
    c1 = _c1()
    s2 = _geom_sum(lambda k: 2.0 ** k / (2.0 ** k - 1) ** 2)
    return {
        "c1": c1,
        "mean": (EULER_GAMMA - 1) / LOG2 + 0.5 - c1,
        "variance": 1 / 12 + (1 + math.pi ** 2 / 6) / LOG2 ** 2 - s2,
    }


def ipl_mean_constants() -> dict:
    """Constants of the internal path length mean: n-coefficient and O(1) term."""
    c1 = _c1()
    return {"linear": (EULER_GAMMA - 1) / LOG2 + 0.5 - c1,
            "constant": (EULER_GAMMA - 0.5) / LOG2 + 2.5 - c1}


def ipl_mean_fourier(kmax: int = 20) -> tuple[FourierSeries, FourierSeries]:
    c1, c2 = {0: 0j}, {0: 0j}
    for k in range(1, kmax + 1):
        x = chi(k)
        c1[k] = complex_gamma(-1 - x) / LOG2
        c2[k] = -(1 - x / 2) * complex_gamma(-x) / LOG2
        c1[-k], c2[-k] = c1[k].conjugate(), c2[k].conjugate()
    return FourierSeries(c1, "varpi_1"), FourierSeries(c2, "varpi_2")


def wpl_mean_coeff(m: int) -> float:
    if m < 0:
        raise ValueError("m must be >= 0")
    return 1.0 / ((m + 1) * LOG2)
