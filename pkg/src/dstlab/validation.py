"""Executable checks shared by the ``validate`` command and the test suite.

Each check returns a :class:`Check` carrying the measured values, so a report can
show what was compared, not only whether it passed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np

from . import asymptotics as A
from . import depoisson as D
from . import moments as M
from . import montecarlo as MC
from . import registry
from .trees import PROFILE_EXAMPLE, nested_profile

BIG = 2 ** 13
MID = 2 ** 12


@dataclass
class Check:
    suite: str
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    known_limit: bool = False  # documented as unattainable at the stated tolerance

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def as_dict(self) -> dict:
        return {"suite": self.suite, "name": self.name, "status": self.status,
                "known_limit": self.known_limit, "measured": _plain(self.measured)}

    def line(self) -> str:
        tag = " (known limit)" if self.known_limit and not self.passed else ""
        return f"{self.status} {self.name}{tag}"


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


# ---------------------------------------------------------------------------
# shared series, computed once per process


@lru_cache(maxsize=None)
def f64_series(param: str, b: int = 1, nmax: int = BIG, power: int = 1):
    s = M.variance_series(param, b, nmax, "f64", power=power)
    return s.as_float("mu"), s.as_float("var")


@lru_cache(maxsize=None)
def npl_series(b: int = 2, nmax: int = BIG) -> M.MomentSeries:
    return M.npl_joint_series(b, nmax, "f64")


@lru_cache(maxsize=None)
def depth_series(nmax: int = 4 * MID):
    return M.depth_moments(nmax)


# (param, b, power) combinations compared against the exact laws
ORACLE_CASES = (("ipl", 1, 1), ("kpl", 1, 1), ("kpl", 2, 1), ("npl", 2, 1), ("ppl", 1, 1),
                ("leaves", 1, 1), ("dpl", 1, 1), ("wpl", 1, 1))


def oracle_checks(nmax: int = 12) -> list[Check]:
    out = []
    for param, b, power in ORACLE_CASES:
        s = M.variance_series(param, b, nmax, "exact", power=power)
        bad = []
        for n in range(nmax + 1):
            law = M.pmf_oracle(param, b, n, power)
            if s.mu[n] != law.mean() or s.var[n] != law.var():
                bad.append(n)
        out.append(Check("oracle", f"{param} b={b} m={power} exact moments n<={nmax}", not bad,
                         {"mismatched_n": bad}))
    return out


def monte_carlo_checks(n: int = 12, trials: int = 100_000, seed: int = 1) -> list[Check]:
    out = []
    groups = {1: ("ipl", "kpl", "ppl", "leaves", "dpl", "wpl"), 2: ("kpl", "npl")}
    for b, params in groups.items():
        summary = MC.simulate(MC.SimConfig(params, b, n, trials, seed))
        for p in params:
            mu = M.mean_series(p, b, n, "f64").as_float("mu")[n]
            z = (summary.mean(p) - mu) / summary.stderr(p)
            out.append(Check("simulation", f"{p} b={b} n={n} mean within 4 standard errors",
                             abs(z) <= 4, {"simulated": summary.mean(p), "exact": mu, "z": z}))
    return out


# ---------------------------------------------------------------------------
# acceptance criteria


def _all(checks: list[Check]) -> bool:
    return all(c.passed for c in checks)


def criterion_1() -> list[Check]:
    parts = oracle_checks(12) + monte_carlo_checks()
    return [Check("acceptance", "1 oracle equivalence and simulation agreement", _all(parts),
                  {c.name: c.measured for c in parts if not c.passed} or {"checks": len(parts)})]


def criterion_2() -> list[Check]:
    mu, _ = f64_series("ipl", 1, 2000)
    worst = max(abs(M.ipl_mean_closed_form(n) - mu[n]) / mu[n] for n in range(2, 2001))
    exact = M.mean_series("ipl", 1, 40, "exact").mu
    tilde = M.alternating_coeffs(exact)
    q, bad = Fraction(1), []
    for n in range(2, 41):
        if n > 2:
            q *= 1 - Fraction(1, 2 ** (n - 2))
        if tilde[n] != (-1) ** n * q:
            bad.append(n)
    ok = worst <= 1e-10 and not bad
    return [Check("acceptance", "2 closed-form mean and Poisson coefficients", ok,
                  {"max_rel_error": worst, "coefficient_mismatch": bad})]


def criterion_3() -> list[Check]:
    ipl = M.variance_series("ipl", 1, 4, "exact").var[4]
    _, v = f64_series("ipl", 1, BIG)
    ratio = v[1024] / 1024
    kpl = M.variance_series("kpl", 2, 5, "exact").var[5]
    npl = M.npl_joint_series(2, 4, "exact").var[4]
    ok = (ipl == Fraction(31, 64) and abs(ratio - 0.2652) <= 5e-4
          and kpl == Fraction(3, 16) and npl == Fraction(1, 4))
    return [Check("acceptance", "3 figure anchors", ok,
                  {"ipl_var_4": ipl, "ipl_var_over_n_1024": ratio, "kpl_b2_var_5": kpl,
                   "npl_b2_var_4": npl})]


def criterion_4() -> list[Check]:
    c = A.ckps().value
    _, v = f64_series("ipl", 1, BIG)
    amp = A.ckps_fourier(3).amplitude()
    ok = abs(c - 0.2660036454) <= 1e-7 and abs(v[BIG] / BIG - c) <= 2e-3 and amp <= 1.9e-5
    return [Check("acceptance", "4 internal path length variance constant", ok,
                  {"constant": c, "var_over_n": v[BIG] / BIG, "fourier_amplitude": amp})]


def criterion_5() -> list[Check]:
    vals = {b: A.c_h(b).value for b in range(1, 6)}
    dev = {b: abs(vals[b] - A.C_H_TABLE[b]) for b in vals}
    kps = A.ckps().value
    ok = max(dev.values()) <= 5e-4 and abs(vals[1] - kps) <= 1e-6
    return [Check("acceptance", "5 bucket key path variance table", ok,
                  {"values": vals, "max_dev": max(dev.values()), "b1_vs_triple_sum": vals[1] - kps})]


def criterion_6() -> list[Check]:
    vals = {b: A.c10(b).value for b in range(1, 7)}
    dev = max(abs(vals[b] - A.C10_TABLE[b]) for b in vals)
    ratio = float(npl_series().muN[BIG]) / BIG
    ok = dev <= 1e-4 and abs(ratio - 0.57470) <= 5e-3
    return [Check("acceptance", "6 bucket node count table", ok,
                  {"values": vals, "max_dev": dev, "mean_nodes_over_n": ratio})]


def criterion_7() -> list[Check]:
    fs = A.c_fs()
    forms = [fs.value, fs.extra["series_a"], fs.extra["series_b"]]
    spread = max(forms) - min(forms)
    kp = A.c_kp().value
    mu, v = f64_series("leaves")
    ok = (abs(fs.value - 0.3720486812) <= 1e-6 and spread <= 1e-6 and abs(kp - 0.034203) <= 5e-4
          and abs(mu[BIG] / BIG - fs.value) <= 2e-3 and abs(v[BIG] / BIG - kp) <= 2e-3)
    return [Check("acceptance", "7 leaves mean and variance", ok,
                  {"mean_constant": fs.value, "spread": spread, "var_constant": kp,
                   "mean_over_n": mu[BIG] / BIG, "var_over_n": v[BIG] / BIG})]


def criterion_8() -> list[Check]:
    w = A.c_w()
    spread = abs(w.value - w.extra["series"])
    pw = A.ppl_var_mean().value
    mu, v = f64_series("ppl")
    ok = (abs(w.value - 1.1030266959) <= 1e-6 and spread <= 1e-6
          and abs(mu[BIG] / BIG - w.value) <= 5e-3 and abs(v[BIG] / BIG - pw) <= 5e-3)
    return [Check("acceptance", "8 fringe path length", ok,
                  {"mean_constant": w.value, "spread": spread, "mean_over_n": mu[BIG] / BIG,
                   "var_mean": pw, "var_over_n": v[BIG] / BIG})]


def criterion_9() -> list[Check]:
    c = A.dpl_mean_constant().value
    mu, v = f64_series("dpl")
    slope = (v[2 * MID] - 2 * v[MID]) / (2 * MID)
    res = A.dpl_sqrt_resolution(MID, mu)
    gap = abs(res["predicted"][res["selected"]] - res["statistic"])
    ok = abs(c - 1.3390746494) <= 1e-6 and abs(slope - (1 - 2 / math.pi)) <= 0.02 and gap <= 0.02
    return [Check("acceptance", "9 differential path length", ok,
                  {"mean_constant": c, "var_doubling_slope": slope, "sqrt_term": res})]


def criterion_10() -> list[Check]:
    s = npl_series()
    corr = M.correlation(s, BIG)
    v = s.as_float("var")
    growth = v[2 * MID] / v[MID]
    want = 2 * (1 + 1 / math.log2(MID)) ** 2
    occ = MC.occupancy_study(2, BIG, 1000, 3)
    ok = (corr >= 0.99 and abs(growth / want - 1) <= 0.1
          and abs(occ[2] - 0.425) <= 0.01 and abs(occ[1] - 0.14) <= 0.01)
    return [Check("acceptance", "10 bucket node path length", ok,
                  {"correlation": corr, "growth": growth, "growth_target": want, "occupancy": occ})]


def charlier_checks() -> list[Check]:
    alt = D.charlier_partial_sums("alternating", 10, 80)
    pw = D.charlier_partial_sums("power2", 10, 80)
    tau_ok = all(D.tau(j, n) == D.tau_by_convolution(j, n) for j in range(9) for n in range(13))
    return [
        Check("charlier", "tau closed form equals convolution", tau_ok),
        Check("charlier", "alternating demo at n=10, J=80", abs(alt[80] - 1) <= 1e-9,
              {"partial_sum": alt[80]}),
        Check("charlier", "power-of-two demo at n=10, J=80", abs(pw[80] - 1024) <= 1e-9,
              {"partial_sum": pw[80]}),
        Check("charlier", "alternating trajectory at J=49", abs(alt[49] - 0.9968) <= 1e-3,
              {"partial_sum": alt[49]}),
    ]


def depoisson_mean_errors(n: int = 200) -> list[float]:
    mu, _ = f64_series("ipl", 1, n)
    return [D.depoissonized_mean(n, K) - mu[n] for K in range(1, 5)]


def criterion_11() -> list[Check]:
    parts = charlier_checks()
    errs = depoisson_mean_errors()
    ratios = [abs(errs[i] / errs[i + 1]) for i in range(3)]
    ok = _all(parts) and min(ratios) >= 5
    return [Check("acceptance", "11 Poisson-Charlier expansion", ok,
                  {c.name: c.measured for c in parts} | {"mean_errors": errs, "ratios": ratios})]


def vtilde_gaps(lo: int = 16, hi: int = 64) -> dict[int, float]:
    s = M.variance_series("ipl", 1, hi, "exact")
    return {n: float(D.vtilde_at(n) - s.var[n]) for n in range(lo, hi + 1)}


def criterion_12() -> list[Check]:
    gaps = vtilde_gaps()
    exact64 = float(M.variance_series("ipl", 1, 64, "exact").var[64])
    refined = D.refined_variance(64) - exact64
    ok = max(abs(g) for g in gaps.values()) <= 5 and abs(refined) < abs(gaps[64])
    return [Check("acceptance", "12 corrected Poissonized variance", ok,
                  {"max_gap": max(abs(g) for g in gaps.values()), "gap_64": gaps[64],
                   "refined_gap_64": refined})]


def depth_fit(ns=(MID, 2 * MID, 4 * MID)) -> dict:
    """Limits of E(depth) - log2 n and Var(depth) after fitting the next-order terms.

    The mean behaves like K + (a log2 n + c)/n and the variance like
    K + (a log2^2 n + b log2 n + c)/n; the fits use that many consecutive doublings.
    """
    mean, var = depth_series(max(ns))
    L = math.log2
    rows = np.array([[1.0, L(n) / n, 1.0 / n] for n in ns])
    k_mean = np.linalg.solve(rows, [mean[n] - L(n) for n in ns])[0]
    vns = (ns[0] // 2,) + tuple(ns)
    rows = np.array([[1.0, L(n) ** 2 / n, L(n) / n, 1.0 / n] for n in vns])
    k_var = np.linalg.solve(rows, [var[n] for n in vns])[0]
    return {"mean": float(k_mean), "variance": float(k_var)}


def depth_exact_moments(n: int) -> tuple[Fraction, Fraction]:
    """Mean and variance of the depth from the exact profile polynomial."""
    p = M.depth_profile_poly(n, "exact")
    d1 = sum(k * c for k, c in enumerate(p))
    d2 = sum(k * (k - 1) * c for k, c in enumerate(p))
    mean = d1 / n
    return mean, (d2 + d1) / n - mean * mean


def criterion_13() -> list[Check]:
    const = A.depth_constants()
    mean, var = depth_series()
    n = MID
    mgap = mean[n] - math.log2(n) - const["mean"]
    vgap = var[n] - const["variance"]
    profile = nested_profile(PROFILE_EXAMPLE)
    literal = Check("acceptance", "13 depth mean and variance at n=4096", abs(mgap) <= 1e-4
                    and abs(vgap) <= 1e-2 and profile == [1, 2, 3, 2, 3],
                    {"mean_gap": mgap, "var_gap": vgap, "profile": profile}, known_limit=True)
    fit = depth_fit()
    em, ev = depth_exact_moments(128)
    cross = max(abs(float(em) - mean[128]), abs(float(ev) - var[128]))
    refined = Check("acceptance", "13r depth limits after next-order fit",
                    abs(fit["mean"] - const["mean"]) <= 1e-4
                    and abs(fit["variance"] - const["variance"]) <= 1e-2
                    and profile == [1, 2, 3, 2, 3] and cross <= 1e-10,
                    {"fit": fit, "constants": const, "exact_vs_float_n128": cross})
    return [literal, refined]


def wpl_doubling(m: int, n: int = MID) -> dict:
    mu, v = f64_series("wpl", 1, 2 * n, m)
    lg = math.log
    c_est = (mu[2 * n] - 2 * mu[n]) / (2 * n * (lg(2 * n) ** (m + 1) - lg(n) ** (m + 1)))
    return {"var_ratio": v[2 * n] / v[n], "mean_coeff": c_est, "target": A.wpl_mean_coeff(m)}


def criterion_14() -> list[Check]:
    res = {m: wpl_doubling(m) for m in (1, 2)}
    ok = all(abs(r["var_ratio"] - 2) <= 0.1 and abs(r["mean_coeff"] / r["target"] - 1) <= 0.15
             for r in res.values())
    return [Check("acceptance", "14 weighted path length doubling", ok, res)]


CRITERIA: tuple[Callable[[], list[Check]], ...] = (
    criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
    criterion_8, criterion_9, criterion_10, criterion_11, criterion_12, criterion_13, criterion_14)


def acceptance_checks() -> list[Check]:
    return [c for crit in CRITERIA for c in crit()]


def constant_checks() -> list[Check]:
    out = []
    for e in registry.REGISTRY:
        if not e.anchored:
            continue
        row = registry.evaluate(e)
        out.append(Check("constants", f"{e.key} b={e.b}", row.status == "pass",
                         {"value": row.value, "reference": row.reference, "tol": row.tol,
                          "error": row.error}))
    return out


SUITES: dict[str, Callable[[], list[Check]]] = {
    "oracle": oracle_checks,
    "simulation": monte_carlo_checks,
    "charlier": charlier_checks,
    "constants": constant_checks,
    "acceptance": acceptance_checks,
}


def run(suite: str = "all") -> list[Check]:
    if suite == "all":
        return [c for name in SUITES for c in SUITES[name]()]
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {sorted(SUITES)} or 'all'")
    return SUITES[suite]()
