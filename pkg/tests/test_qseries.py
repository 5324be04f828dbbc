import cmath
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from dstlab import qseries as Q

mp.mp.dps = 40


def test_q_k_small_values():
    assert Q.q_k(0) == 1.0
    assert Q.q_k(1) == 0.5
    assert Q.q_k(2) == 0.375


def test_q_infinity_matches_high_precision_product():
    want = mp.nprod(lambda j: 1 - mp.mpf(2) ** -j, [1, mp.inf])
    assert abs(Q.q_infinity() - float(want)) < 1e-15
    assert 0.28878 < Q.q_infinity() < 0.28879


def test_qcontext_table_invariants():
    ctx = Q.QContext()
    t = ctx.qk_table
    assert t[0] == 1.0
    # strict while 2^-j is above double precision
    assert np.all(np.diff(t[:50]) < 0)
    assert np.all(np.diff(t) <= 0)
    assert abs(t[-1] - ctx.q_infinity) == 0


@pytest.mark.parametrize("J", [3, 5, 8])
def test_euler_identity_truncation_bound(J):
    partial = sum((-1) ** j * 2.0 ** (-j * (j + 1) / 2) / Q.q_k(j) for j in range(J + 1))
    assert abs(partial - Q.q_infinity()) <= 2.0 ** (-J * (J + 1) / 2) / Q.q_infinity()


def test_q_of_examples():
    assert Q.q_of(0) == 1
    assert abs(Q.q_of(1) - Q.q_infinity()) < 1e-15
    assert abs(Q.q_of(0.5) * Q.q_inverse_series(0.5) - 1) < 1e-12


@given(st.complex_numbers(max_magnitude=1.9, allow_nan=False, allow_infinity=False))
def test_reciprocal_identity(z):
    assert abs(Q.q_of(z) * Q.q_inverse_series(z, 1200) - 1) < 1e-10


@given(st.complex_numbers(max_magnitude=50, allow_nan=False, allow_infinity=False))
def test_q_of_against_mpmath(z):
    want = mp.nprod(lambda j: 1 - mp.mpc(z) / mp.mpf(2) ** j, [1, mp.inf])
    assert abs(Q.q_of(z) - complex(want)) <= 1e-12 * max(1.0, abs(complex(want)))


def test_q_neg2s_examples():
    assert Q.q_neg2s(0.0, 3) == 1.0
    direct = math.prod(1 + 2.0 ** -j for j in range(80))
    via_log = math.exp(sum(math.log1p(2.0 ** -j) for j in range(80)))
    assert abs(Q.q_neg2s(1.0) - direct) < 1e-13
    assert abs(direct - via_log) < 1e-13
    assert abs(Q.q_neg2s(1.0) - 4.768462) < 1e-6
    assert abs(Q.q_neg2s(1.0, 2) - Q.q_neg2s(1.0) ** 2) < 1e-12


@given(st.floats(0.0, 1e4), st.integers(1, 6))
def test_q_neg2s_exponent_law(s, b):
    assert math.isclose(Q.log_q_neg2s(s, b), b * Q.log_q_neg2s(s, 1), rel_tol=1e-13, abs_tol=1e-15)


def test_logq_expansion_at_1000():
    s = 1000.0
    direct = float(Q.log_q_neg2s(s))
    assert abs(direct - Q.logq_asymptotic(s)) <= 0.01


def test_q_coefficients():
    assert abs(Q.q_coeff(0) - 2.43090) < 1e-5
    assert abs(Q.q_coeff(0) - (math.log(2) / 12 + math.pi ** 2 / (6 * math.log(2)))) < 1e-15
    assert abs(Q.q_coeff(1)) < 1e-12


def test_logq_oscillation_matches_high_precision():
    # remainder after the smooth terms and the 1/s tail is the k=+-1 oscillation
    q0 = mp.log(2) / 12 + mp.pi ** 2 / (6 * mp.log(2))
    for s in (1000, 1500, 2200):
        sm = mp.mpf(s)
        exact = mp.nsum(lambda j: mp.log(1 + sm / mp.mpf(2) ** j), [0, mp.inf])
        smooth = mp.log(sm) ** 2 / (2 * mp.log(2)) + mp.log(sm) / 2 + q0
        tail = -mp.nsum(lambda m: (-1) ** m * sm ** -m / (m * (1 - mp.mpf(2) ** m)), [1, 40])
        osc = 2 * Q.q_coeff(1) * math.cos(2 * math.pi * math.log2(s))
        assert abs(float(exact - smooth - tail) - osc) < 1e-8 * abs(osc) + 1e-20


def _phi_quad(omega, x):
    f = lambda s: s ** (omega - 1) / ((s + 1) * (s + x) ** 2)
    a, _ = integrate.quad(f, 0, 1, epsabs=1e-14, epsrel=1e-12, limit=200)
    b, _ = integrate.quad(f, 1, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)
    return a + b


def test_phi_examples():
    assert abs(Q.phi(2, 1) - 0.5) < 1e-14
    assert abs(Q.phi(2, 2) - (1 - math.log(2))) < 1e-14
    assert abs(Q.phi(2.5, 0.75) - _phi_quad(2.5, 0.75)) < 1e-8


@given(st.floats(0.05, 2.95), st.floats(0.1, 10.0))
def test_phi_equals_defining_integral(omega, x):
    if abs(omega - round(omega)) < 1e-3:
        omega += 2e-3
    assert abs(Q.phi(omega, x) - _phi_quad(omega, x)) < 1e-8 * max(1.0, abs(_phi_quad(omega, x)))


@pytest.mark.parametrize("omega", [0.7, 1.5, 2.0, 2.3 + 1.5j])
@pytest.mark.parametrize("side", [-1, 1])
def test_phi_branch_switch_continuity(omega, side):
    # Taylor branch just inside the switch radius vs closed form just outside
    x_in, x_out = 1 + side * 0.99e-4, 1 + side * 1.01e-4
    slope = (Q.phi(omega, x_out) - Q.phi(omega, x_in)) / (x_out - x_in)
    assert abs(Q.phi(omega, x_in) + slope * (x_out - x_in) - Q.phi(omega, x_out)) < 1e-6


def test_lambda_examples():
    c = Q.chi(1)
    assert abs(Q.lambda_k(1.0, 1) - c * (c + 1) / 2) < 1e-12
    for t in (0.3, 0.5, 2.0):
        assert Q.lambda_k(t, 0) == 0


@pytest.mark.parametrize("t", [0.5, 0.25, 1.7])
def test_lambda_against_high_precision(t):
    c = mp.mpc(Q.chi(1))
    tm = mp.mpf(t)
    want = (1 - tm ** c * (1 + c * (1 - tm))) / (1 - tm) ** 2
    assert abs(Q.lambda_k(t, 1) - complex(want)) < 1e-12 * abs(complex(want))


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("side", [-1, 1])
def test_lambda_branch_switch_continuity(k, side):
    t_in, t_out = 1 + side * 0.99e-4, 1 + side * 1.01e-4
    c = mp.mpc(Q.chi(k))
    want = (1 - mp.mpf(t_out) ** c * (1 + c * (1 - mp.mpf(t_out)))) / (1 - mp.mpf(t_out)) ** 2
    assert abs(Q.lambda_k(t_out, k) - complex(want)) < 1e-6
    want_in = (1 - mp.mpf(t_in) ** c * (1 + c * (1 - mp.mpf(t_in)))) / (1 - mp.mpf(t_in)) ** 2
    assert abs(Q.lambda_k(t_in, k) - complex(want_in)) < 1e-6


def test_gamma_examples():
    assert abs(Q.complex_gamma(5) - 24) < 1e-12
    assert abs(Q.complex_gamma(0.5) - math.sqrt(math.pi)) < 1e-14
    with pytest.raises(ValueError):
        Q.complex_gamma(-2)
    with pytest.raises(ValueError):
        Q.digamma(0)


@given(st.floats(-3, 5), st.floats(-60, 60))
def test_gamma_digamma_against_mpmath(re, im):
    z = complex(re, im)
    if abs(z - round(re)) < 1e-3 and round(re) <= 0:
        z += 0.01j
    g, want = Q.complex_gamma(z), complex(mp.gamma(mp.mpc(z)))
    assert abs(g - want) <= 1e-12 * abs(want) + 1e-300
    p, wantp = Q.digamma(z), complex(mp.digamma(mp.mpc(z)))
    assert abs(p - wantp) <= 1e-12 * max(1.0, abs(wantp))


def test_gamma_decay_at_first_frequency():
    z = 2 + Q.chi(1)
    t = z.imag
    g = abs(Q.complex_gamma(z))
    assert abs(g - float(abs(mp.gamma(mp.mpc(z))))) < 1e-12 * g
    bound = math.sqrt(2 * math.pi) * t ** 1.5 * math.exp(-math.pi * t / 2)
    assert 0.5 < g / bound < 1.5


def test_chi():
    assert Q.chi(0) == 0
    assert abs(cmath.exp(Q.chi(3) * math.log(2)) - 1) < 1e-12
