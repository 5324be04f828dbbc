import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from dstlab import asymptotics as A
from dstlab import moments as M
from dstlab.exppoly import AnchoredExpPoly, ExpPolySeries
from dstlab.qseries import phi, q_infinity, q_k

N13 = 2 ** 13


@pytest.fixture(scope="module")
def ppl_series():
    s = M.variance_series("ppl", 1, N13)
    return s.as_float("mu"), s.as_float("var")


# ---------------------------------------------------------------------------
# quadrature


def test_quadrature_examples():
    r = A.quad_0_inf(lambda s: np.exp(-s))
    assert abs(r.value - 1) <= 1e-12 and r.est_error > 0
    r = A.quad_0_inf(lambda s: s / ((s + 1) * (s + 2) ** 2))
    assert abs(r.value - phi(2, 2)) <= 1e-12 and abs(r.value - (1 - math.log(2))) <= 1e-12
    r = A.quad_0_inf(lambda s: s ** -0.5 * np.exp(-s))
    assert abs(r.value - math.sqrt(math.pi)) <= 1e-12


def test_quadrature_reports_non_decay():
    with pytest.raises(A.QuadratureError):
        A.quad_0_inf(lambda s: 1.0 / (1.0 + s))


def test_rotated_mellin_matches_real_axis():
    # analytic in the right half plane, so the rotated ray gives the same value
    F = lambda s: 1.0 / (s + 1) ** 4
    w = 2.0 + 0.7j
    a = A.mellin(F, w).value
    b = A.mellin(F, w, theta=math.pi / 2).value
    assert abs(a - b) <= 1e-12


def test_refinement_stays_within_estimate():
    F = lambda s: s / ((s + 1) * (s + 3) ** 2) * A.inv_q(s)
    coarse = A.quad_0_inf(F)
    fine = A.quad_0_inf(F, panel=0.125)
    assert abs(coarse.value - fine.value) <= max(coarse.est_error, 1e-14)


# ---------------------------------------------------------------------------
# exponential polynomials


def _laplace_by_quad(f, s):
    val, _ = integrate.quad(lambda z: math.exp(-s * z) * f(z), 0, np.inf, epsabs=1e-14, epsrel=1e-12,
                            limit=400)
    return val


@pytest.mark.parametrize("s", [0.5, 2.0])
def test_product_laplace_matches_quadrature(s):
    p = ExpPolySeries({(0, 1.0): 1.5, (2, 0.5): -0.25})
    q = ExpPolySeries({(1, 0.25): 2.0, (0, 2.0): 1.0})
    prod = (p * q).times_z()
    want = _laplace_by_quad(lambda z: float(prod(np.array(z))), s)
    assert abs(float(prod.laplace(s)) - want) <= 1e-9 * max(1, abs(want))
    direct = lambda z: float(p(np.array(z)) * q(np.array(z)) * z)
    assert abs(want - _laplace_by_quad(direct, s)) <= 1e-9 * max(1, abs(want))


@given(st.floats(0.0, 30.0))
def test_exppoly_derivative_by_differences(z):
    f = ExpPolySeries({(0, 1.0): 1.0, (3, 0.5): 0.2, (1, 0.125): -1.0})
    h = 1e-4
    fd = (f(np.array(z + h)) - f(np.array(z - h))) / (2 * h) if z > h else None
    if fd is not None:
        assert abs(fd - f.derivative()(np.array(z))) <= 1e-6


def test_anchored_mean_vanishes_at_zero():
    for fm in (A.ipl_mean_exppoly(), A.bdst_mean_exppoly(1), A.bdst_mean_exppoly(2)):
        assert abs(float(fm(np.array(0.0)))) <= 1e-12


def test_bucket_mean_reduces_to_closed_form():
    fm = A.bdst_mean_exppoly(1)
    for l in range(30):
        want = q_infinity() * 2.0 ** l / q_k(l)
        got = fm.terms[(0, 2.0 ** -l)]
        assert abs(got - want) <= 1e-10 * want
    closed = A.ipl_mean_exppoly()
    z = np.array([0.5, 3.0, 40.0, 900.0])
    assert np.allclose(fm(z), closed(z), rtol=1e-10, atol=1e-12)


def test_bucket_mean_growth():
    fm = A.bdst_mean_exppoly(2)
    ratios = [float(fm(np.array(z))) / (z * math.log2(z)) for z in (1e3, 1e4, 1e5, 1e6)]
    assert all(a < b for a, b in zip(ratios, ratios[1:])) and 0.8 < ratios[-1] < 1


@pytest.mark.parametrize("b", range(2, 7))
def test_g2_coefficient_symmetry(b):
    g, gp = A.form_g2_coeffs(b)
    assert all(g[(i, j)] == g[(j, i)] for i, j in g)
    assert all(gp[(i, j)] == gp[(j, i)] for i, j in gp)


@pytest.mark.parametrize("b", [1, 2, 3])
def test_product_form_matches_defining_combination(b):
    fm = A.bdst_mean_exppoly(b)
    z = np.array([0.3, 2.0, 11.0, 60.0])
    prod = A.g_tilde_bucket(fm, b)(z)
    direct = A.g_tilde_bucket_direct(fm, b, z)
    assert np.allclose(prod, direct, rtol=1e-7, atol=1e-10)


# ---------------------------------------------------------------------------
# internal path length


def test_triple_sum_constant():
    r = A.ckps()
    assert abs(r.value - 0.2660036454) <= 1e-8
    assert r.est_error > 0 and r.method == "triple-sum"


def test_triple_sum_first_term():
    w, j, x = A._ckps_terms()[0]
    assert (w, j, x) == (1.0, 0, 2.0)
    assert abs(q_infinity() * w * phi(2.0, x) - q_infinity() * (1 - math.log(2))) <= 1e-15


def test_lambda_route_at_zero_frequency():
    assert abs(A.ckps_limit_lambda() - A.ckps().value) <= 1e-10


def test_triple_sum_and_laplace_routes_agree():
    assert abs(A.ckps_laplace().value - A.ckps().value) <= 1e-10


def test_triple_sum_fourier():
    f = A.ckps_fourier(6)
    assert f.amplitude() <= 1.9e-5
    assert f.is_real()
    mags = [abs(f.coeffs[k]) for k in range(1, 7)]
    assert all(b < a for a, b in zip(mags[1:], mags[2:]))
    # the lambda form agrees with the rotated Mellin integral of the same driver
    alt = A.variance_fourier(A.ipl_g_tilde(), 1, kmax=2)
    for k in (1, 2):
        assert abs(alt.coeffs[k] - f.coeffs[k]) <= 1e-3 * abs(f.coeffs[k])


def test_mean_fourier_series():
    w1, w2 = A.ipl_mean_fourier()
    assert w1.mean == 0 and w2.mean == 0
    assert w1.is_real() and w2.is_real()
    for f in (w1, w2):
        mags = [abs(f.coeffs[k]) for k in range(1, 21)]
        assert all(b < a for a, b in zip(mags[1:], mags[2:]))


@pytest.mark.xfail(strict=True, reason="the first harmonic alone exceeds the quoted bounds")
def test_mean_fourier_amplitudes_literal():
    w1, w2 = A.ipl_mean_fourier()
    assert w1.amplitude() <= 3.4e-8 and w2.amplitude() <= 3.4e-6


def test_mean_fourier_amplitudes_measured():
    mp = pytest.importorskip("mpmath")
    L = mp.log(2)
    chi1 = 2j * mp.pi / L
    w1, w2 = A.ipl_mean_fourier()
    assert abs(w1.amplitude() - 2 * float(abs(mp.gamma(-1 - chi1)) / L)) <= 1e-3 * w1.amplitude()
    assert abs(w2.amplitude() - 2 * float(abs((1 - chi1 / 2) * mp.gamma(-chi1)) / L)) <= 1e-3 * w2.amplitude()
    # the exact mean minus its smooth part follows n * w1(log2 n) over a full period
    c = A.ipl_mean_constants()
    mu = M.mean_series("ipl", 1, 2 ** 14).as_float("mu")
    ns = np.arange(2 ** 13, 2 ** 14, 37)
    resid = np.array([(mu[n] - (n + 1) * math.log2(n) - c["linear"] * n - c["constant"]
                       - float(w2(math.log2(n)))) / n for n in ns])
    pred = np.array([float(w1(math.log2(n))) for n in ns])
    assert np.max(np.abs(resid - pred)) <= 3e-8
    assert np.max(np.abs(resid)) > 1.5e-7


def test_mean_constants_against_recurrence():
    c = A.ipl_mean_constants()
    mu = M.mean_series("ipl", 1, 4096).as_float("mu")
    for n in (1024, 4096):
        approx = (n + 1) * math.log2(n) + c["linear"] * n + c["constant"]
        assert abs(mu[n] - approx) <= 0.01 * math.log2(n)


# ---------------------------------------------------------------------------
# bucket trees


@pytest.mark.parametrize("b", range(1, 6))
def test_bucket_variance_constants(b):
    r = A.c_h(b)
    assert abs(r.value - A.C_H_TABLE[b]) <= 5e-4
    if b == 1:
        assert abs(r.value - A.ckps().value) <= 1e-6


def test_node_count_constants():
    assert abs(A.c10(1).value - 1) <= 1e-8
    for b in range(2, 7):
        assert abs(A.c10(b).value - A.C10_TABLE[b]) <= 1e-4
    with pytest.raises(ValueError):
        A.c10(7)


def test_node_count_fourier_families():
    p10 = A.p10_fourier(2)
    assert p10.is_real() and abs(p10.mean - A.c10(2).value) <= 1e-10
    z_family, log_family = A.p01_fourier(2)
    assert z_family.is_real() and log_family.is_real()
    # the log2 z family is b times the mean family scaled by w - 1
    assert abs(log_family.mean - 2 * A.c10(2).value) <= 1e-10


def test_boundary_polynomial_matches_quoted_form():
    # derived from the exact initial Poissonized variances; the quoted rational form reduces to it
    s = np.array([0.3, 1.0, 4.0, 17.0])
    for b in range(2, 7):
        coeffs = A.npl_boundary_poly(b)
        poly = sum(c * s ** i for i, c in enumerate(coeffs))
        assert np.allclose(poly, A.npl_boundary_printed(b, s), rtol=1e-12, atol=1e-12)


@pytest.fixture(scope="module")
def npl2():
    return M.npl_joint_series(2, N13)


def test_node_count_variance_constant(npl2):
    c = A.npl_p20_mean(2)
    assert c.est_error > 0
    assert abs(npl2.as_float("varN")[N13] / N13 - c.value) <= 5e-3


@pytest.mark.xfail(strict=True, reason="lower-order log terms keep the ratio 16% low at n = 2^13")
def test_node_path_variance_literal_ratio(npl2):
    c = A.npl_p20_mean(2).value
    ratio = npl2.as_float("var")[N13] / (N13 * math.log2(N13) ** 2)
    assert abs(ratio / c - 1) <= 0.1


def test_node_path_variance_second_difference(npl2):
    c = A.npl_p20_mean(2).value
    v = npl2.as_float("var")
    f = lambda n: v[n] / n
    d2 = (f(4096) - 2 * f(2048) + f(1024)) / 2
    assert abs(d2 / c - 1) <= 0.02


# ---------------------------------------------------------------------------
# fringe path length and leaves


def test_fringe_mean_constant(ppl_series):
    r = A.c_w()
    assert abs(r.value - 1.1030266959) <= 1e-7
    assert abs(r.value - r.extra["series"]) <= 1e-6
    assert abs(ppl_series[0][N13] / N13 - r.value) <= 5e-3
    sums = A.c_w_identity_sums()
    for key in ("quadratic", "linear"):
        lhs, rhs = sums[key]
        assert abs(lhs - rhs) <= 1e-12 * abs(lhs)
    assert abs(sums["quadratic_printed"] - sums["quadratic"][0]) > 1


def test_fringe_variance_constant(ppl_series):
    fm = A.ppl_mean_exppoly()
    assert abs(float(A.ppl_g_tilde(fm)(np.array(0.0)))) <= 1e-12
    r = A.ppl_var_mean()
    assert abs(ppl_series[1][N13] / N13 - r.value) <= 5e-3
    # the quoted driver misses the recurrence by a wide margin
    assert abs(A.ppl_var_mean(printed=True).value - r.value) > 1


def test_leaves_constants():
    fs = A.c_fs()
    assert abs(fs.value - 0.3720486812) <= 1e-7
    assert abs(fs.extra["series_a"] - fs.value) <= 1e-6
    assert abs(fs.extra["series_b"] - fs.value) <= 1e-6
    kp, closed = A.c_kp(), A.c_kp_closed()
    assert abs(kp.value - 0.034203) <= 5e-4
    assert abs(kp.value - closed.value) <= 1e-6


def test_delta_limit():
    assert abs(A.delta_l(60) - 4) <= 1e-10
    assert A.delta_l(5) < A.delta_l(6) < 4


def test_leaves_second_derivative_routes_agree():
    z = np.array([0.2, 1.0, 7.0, 50.0])
    pf = A.leaves_mean_exppoly().derivative(2)(z)
    closed = A.leaves_f1dd_closed()(z)
    assert np.allclose(pf, closed, rtol=1e-9, atol=1e-10)


# ---------------------------------------------------------------------------
# differential and weighted path length, depth


def test_differential_constants():
    d1 = A.dpl_constants(1)
    assert abs(d1["mean_periodic_mean"].value - 1.3390746494) <= 1e-7
    assert abs(d1["var_slope"] - 0.363380) <= 1e-6
    assert A.dpl_constants(2)["var_coeff"] == 4
    with pytest.raises(ValueError):
        A.dpl_constants(7)


def test_sqrt_term_selection():
    res = A.dpl_sqrt_resolution(4096)
    assert res["selected"] == "sqrt2_over"
    assert abs(res["statistic"] - res["predicted"]["sqrt2_over"]) <= 0.02


@pytest.mark.parametrize("m", [3, 4])
def test_higher_power_differential_coefficients(m):
    d = A.dpl_constants(m)
    s = M.variance_series("dpl", 1, N13, power=m)
    mu, v = s.as_float("mu"), s.as_float("var")
    n, e = 4096, m / 2
    mean_est = (mu[2 * n] - 2 * mu[n]) / ((2 * n) ** e - 2 * n ** e)
    var_est = (v[2 * n] - 2 * v[n]) / ((2 * n) ** m - 2 * n ** m)
    assert abs(mean_est / d["mean_coeff"] - 1) <= 0.01
    assert abs(var_est / d["var_coeff"] - 1) <= 0.01
    assert abs(mean_est / d["mean_coeff_printed"] - 1) > 0.5


def test_square_differential_variance():
    v = M.variance_series("dpl", 1, N13, power=2).as_float("var")
    assert abs(v[N13] / N13 ** 2 - 4) <= 0.01


def test_weighted_mean_coefficient():
    assert abs(A.wpl_mean_coeff(0) - 1.442695) <= 1e-6
    assert A.wpl_mean_coeff(1) == 1 / (2 * math.log(2))
    mu = M.mean_series("wpl", 1, N13, power=1).as_float("mu")
    assert abs(mu[N13] / (N13 * math.log(N13) ** 2) / A.wpl_mean_coeff(1) - 1) <= 0.15
    with pytest.raises(ValueError):
        A.wpl_mean_coeff(-1)


def test_depth_constants():
    c = A.depth_constants()
    assert abs(c["c1"] - 1.606695152415) <= 1e-11
    assert abs(c["mean"] - ((0.5772156649015329 - 1) / math.log(2) + 0.5 - c["c1"])) <= 1e-14
    mean, var = M.depth_moments(N13)
    n = N13
    assert abs(mean[n] - math.log2(n) - c["mean"]) <= 3 * math.log2(n) / n
    assert abs(var[n] - c["variance"]) <= 0.05


def test_constant_results_are_serialisable():
    d = A.c10(2).as_dict()
    assert d["b"] == 2 and d["reference_value"] == 0.5747 and d["est_error"] > 0
