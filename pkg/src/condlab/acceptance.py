"""The acceptance suite: ten numbered checks, each returning a verdict with details.

Every check runs at fixed tolerances and seeds.  ``run_suite`` executes the
selected checks, optionally in a process pool, and reduces results in order.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import weights as W
from .conditionality import (bhcc_envelope, ccdom_lower, greedy_ratio, greedy_ratio_batch,
                             k_measure, ktilde_measure, transform_norms)
from .fitting import fit_log_power, fit_power, ratio_stabilization
from .series import GrowthSeries, Kind
from .spaces import (Lorentz, Lp, WeightedLorentz, WeightSeq, fundamental, harmonic,
                     harmonic_w, space_norm)
from .systems import (Partition, TrigSystem, almost_greedy_system, averaging_projection,
                      diamond, direct_sum, dual_pairing_check, orthonormal)

TIME_LIMIT = 15 * 60.0


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    elapsed: float = 0.0

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        parts = []
        for k, v in self.details.items():
            if isinstance(v, float):
                v = f"{v:.4g}"
            elif isinstance(v, (list, tuple)):
                v = "[" + ", ".join(f"{x:.4g}" if isinstance(x, float) else str(x) for x in v) + "]"
            parts.append(f"{k}={v}")
        return f"criterion {self.number:2d} [{tag}] {self.title} ({self.elapsed:.1f}s): " + "; ".join(parts)


def _dyadic(lo, hi):
    return [2**k for k in range(lo, hi + 1)]


# -- 1 --------------------------------------------------------------------------

def check_dirichlet():
    t0 = time.perf_counter()
    ms = _dyadic(4, 12)
    ok, d = True, {}
    for lam in (-0.5, 0.0, 0.5):
        table = W.build_table(lam, 2 * ms[-1])
        vals = [W.dirichlet_norm(lam, m, table) for m in ms]
        fr = fit_power(ms, vals)
        target = (1 - lam) / 2
        good = abs(fr.gamma - target) <= 0.03 and fr.r2 >= 0.999
        d[f"gamma({lam:g})"] = fr.gamma
        d[f"r2({lam:g})"] = fr.r2
        if lam == 0.0:
            err = max(abs(v - math.sqrt(2 * m + 1)) for m, v in zip(ms, vals))
            d["max|D_m-sqrt(2m+1)|"] = float(err)
            good &= err <= 1e-12
        ok &= good
    elapsed = time.perf_counter() - t0
    d["seconds"] = elapsed
    return ok and elapsed <= 120.0, d


# -- 2 --------------------------------------------------------------------------

def check_weight_coefficients():
    n_max, n_cmp = 2**13, 2**10
    ok, d = True, {}
    for alpha in (0.25, 0.5, 0.75):
        coeffs = W.build_table(-alpha, n_max).coeffs
        n = np.arange(1, n_max + 1)
        series = coeffs[1:] * (1.0 + n) ** (1 - alpha)
        rep = ratio_stabilization(n, series)
        other = W.coeffs_via_oscillatory(alpha, n_cmp)
        rel = float(np.max(np.abs(other - coeffs[1:n_cmp + 1]) / np.abs(coeffs[1:n_cmp + 1])))
        d[f"slope({alpha:g})"] = rep.slope
        d[f"spread({alpha:g})"] = rep.spread
        d[f"route_rel({alpha:g})"] = rel
        ok &= rep.bounded and rep.spread <= 3.0 and rel <= 1e-8
    return ok, d


# -- 3 --------------------------------------------------------------------------

def check_secondary_norm():
    alpha, lo, hi = 0.5, 2**6, 2**12
    norms = W.fm_norm_series(alpha, hi)
    m = np.arange(lo, hi + 1)
    H = np.cumsum(1.0 / np.arange(1, hi + 1))
    ratio = norms[lo - 1:] ** 2 / H[lo - 1:]
    width = float(ratio.max() / ratio.min())
    dy = np.array(_dyadic(6, 12))
    slope = float(np.polyfit(np.log(H[dy - 1]), np.log(norms[dy - 1] ** 2), 1)[0])
    ok = width <= 1.5 and abs(slope - 1.0) <= 0.05
    return ok, {"band_width": width, "slope_vs_logH": slope, "m_range": f"{m[0]}..{m[-1]}"}


# -- 4 and 5 --------------------------------------------------------------------

def _trig_pair(d):
    return TrigSystem(-0.5, d), TrigSystem(0.5, d)


def _exact_small_diamond(d=8):
    S1, S2 = _trig_pair(d)
    B = diamond(S1, S2)
    exact = GrowthSeries("ktilde", B.label)
    witness = GrowthSeries("ktilde", B.label)
    for m in range(1, 2 * d + 1):
        ex = ktilde_measure(B, m, mode="exact")
        exact.add(m, ex.value, Kind.EXACT)
        witness.add(m, ktilde_measure(B, m, mode="heuristic", seed=m).value, Kind.LOWER)
    cc = {2 * m: ccdom_lower(S1, S2, m).value for m in range(1, d + 1)}
    return B, exact, witness, cc


def check_ccdom_growth():
    ms = _dyadic(4, 10)
    d = ms[-1]
    S1, S2 = _trig_pair(d)
    cc = [ccdom_lower(S1, S2, m).value for m in ms]
    fr = fit_power(ms, cc)
    B = diamond(S1, S2)
    scales = _dyadic(2, 10)
    C1 = transform_norms(B, Lp(4 / 3), "hilbertian", scales).constant
    C2 = transform_norms(B, Lp(4), "besselian", scales).constant
    pair = (Lp(4 / 3), Lp(4))
    points = [(2 * m, v) for m, v in zip(ms, cc)]
    _, exact, _, _ = _exact_small_diamond(8)
    points += list(zip(*exact.select((Kind.EXACT,))))
    slack = min(bhcc_envelope(C1, C2, pair, k).value / v for k, v in points)
    ok = abs(fr.gamma - 0.5) <= 0.05 and slack >= 1.0
    return ok, {"gamma": fr.gamma, "r2": fr.r2, "C1": C1, "C2": C2,
                "min_envelope/point": float(slack), "points": len(points)}


ROUNDING = 1e-12  # relative; the same set evaluated along two code paths


def check_exact_witness():
    B, exact, witness, cc = _exact_small_diamond(8)
    bad = []
    for m2, bound in cc.items():
        v = exact.value_at(m2, Kind.EXACT)
        if v < bound * (1 - ROUNDING):
            bad.append(f"k~_{m2}={v:.6g} < ccdom {bound:.6g}")
    merged = GrowthSeries("ktilde", B.label, exact.entries + witness.entries)
    bad += merged.check(k_type=True, atol=ROUNDING)
    margin = min(exact.value_at(m2, Kind.EXACT) / b for m2, b in cc.items())
    return not bad, {"dimension": B.dim, "checked_m": len(exact.entries), "min_exact/ccdom": margin,
                     "violations": len(bad), "first": bad[0] if bad else "none"}


# -- 6 --------------------------------------------------------------------------

def _oracle_lorentz_norm():
    worst = 0.0
    for p in (2.0, 4 / 3, 4.0):
        for q in (1.0, 4 / 3, 2.0, 4.0):
            for m in range(1, 65):
                f = np.arange(1, m + 1) ** (-1.0 / p)
                H = harmonic(m)
                worst = max(worst, abs(space_norm(Lorentz(p, q), f) - H ** (1 / q)) / H ** (1 / q))
    return worst


def _oracle_comlplq(rng):
    worst_attain, worst_excess = 0.0, 0.0
    pairs = [(1.0, 2.0), (1.0, math.inf), (2.0, 4.0), (4 / 3, 4.0), (0.5, 1.0)]
    for q, r in pairs:
        for m in (1, 2, 5, 16):
            bound = m ** (1 / q - (0 if r == math.inf else 1 / r))
            c = np.ones(m)
            worst_attain = max(worst_attain, abs(space_norm(Lp(q), c) / space_norm(Lp(r), c) - bound) / bound)
            F = rng.standard_normal((10_000 // (len(pairs) * 4) + 1, m)) * rng.random((1, m)) ** 2
            ratios = space_norm(Lp(q), F) / space_norm(Lp(r), F)
            worst_excess = max(worst_excess, float(ratios.max() / bound - 1.0))
    return worst_attain, worst_excess


def _oracle_dom_wlorentz(rng):
    worst_attain, worst_excess = 0.0, 0.0
    for w in (WeightSeq.power(-0.5, 256), WeightSeq.lorentz(3.0)):
        for q, r in ((1.0, 2.0), (4 / 3, 4.0), (2.0, math.inf)):
            for m in (1, 3, 8, 32):
                Hw = harmonic_w(w, m)
                bound = Hw ** (1 / q - (0 if r == math.inf else 1 / r))
                A, B = WeightedLorentz(w, q), WeightedLorentz(w, r)
                a = 1.0 / w.s(m)
                got = space_norm(A, a) / space_norm(B, a)
                worst_attain = max(worst_attain, abs(got - bound) / bound)
                F = rng.standard_normal((417, m)) * rng.random((1, m)) ** 2
                worst_excess = max(worst_excess, float((space_norm(A, F) / space_norm(B, F)).max() / bound - 1.0))
    return worst_attain, worst_excess


def _oracle_subsymmetric_band():
    specs = [Lp(1), Lp(2), Lp(4), Lorentz(2, 1), Lorentz(3, 2), Lorentz(4, 4 / 3),
             WeightedLorentz(WeightSeq.power(-0.5, 2048), 1.0),
             WeightedLorentz(WeightSeq.lorentz(3.0), 2.0)]
    ms = list(range(1, 33)) + _dyadic(6, 10)
    lo, hi = math.inf, 0.0
    for spec in specs:
        assert spec.banach
        for m in ms:
            c = fundamental(spec, m).c
            lo, hi = min(lo, c), max(hi, c)
    return lo, hi


def _oracle_direct_sum():
    O, R = TrigSystem(-0.5, 4), TrigSystem(0.3, 4)
    D = direct_sum(O, R)
    worst = 0.0
    for m in range(1, 9):
        lhs = ktilde_measure(D, m).value
        rhs = max(ktilde_measure(O, (m + 1) // 2).value, ktilde_measure(R, m // 2).value if m >= 2 else 1.0)
        worst = max(worst, abs(lhs - rhs) / rhs)
        lhs = k_measure(D, m).value
        rhs = max(k_measure(O, m).value, k_measure(R, m).value)
        worst = max(worst, abs(lhs - rhs) / rhs)
    return worst


def _oracle_projection(rng):
    worst_idem, worst_pair = 0.0, 0.0
    for spec in (Lp(2), Lorentz(4, 2)):
        sigma = Partition.dyadic(6, spec)
        f = rng.standard_normal((200, sigma.N))
        P, _ = averaging_projection(sigma, f)
        PP, _ = averaging_projection(sigma, P)
        worst_idem = max(worst_idem, float((np.linalg.norm(PP - P, axis=1) / np.linalg.norm(f, axis=1)).max()))
        rep = dual_pairing_check(sigma, samples=500, seed=1)
        worst_pair = max(worst_pair, rep["max_defect_P"], rep["max_defect_Q"])
    return worst_idem, worst_pair


def check_formula_oracles():
    rng = np.random.default_rng(6)
    d = {}
    d["lorentz_norm_rel"] = _oracle_lorentz_norm()
    d["lplq_attain_rel"], d["lplq_excess"] = _oracle_comlplq(rng)
    d["wlorentz_attain_rel"], d["wlorentz_excess"] = _oracle_dom_wlorentz(rng)
    d["c_m_min"], d["c_m_max"] = _oracle_subsymmetric_band()
    d["direct_sum_rel"] = _oracle_direct_sum()
    d["P_idempotence"], d["P_pairing"] = _oracle_projection(rng)
    tol = 1e-10
    ok = (d["lorentz_norm_rel"] <= tol and d["lplq_attain_rel"] <= tol and d["lplq_excess"] <= tol
          and d["wlorentz_attain_rel"] <= tol and d["wlorentz_excess"] <= tol
          and d["c_m_min"] >= 1 - tol and d["c_m_max"] <= 2 + tol
          and d["direct_sum_rel"] <= tol and d["P_idempotence"] <= 1e-12 and d["P_pairing"] <= 1e-12)
    return ok, d


# -- 7 --------------------------------------------------------------------------

def check_fourier_transforms():
    scales = _dyadic(4, 12)
    N = 2 * scales[-1] + 1
    Tp = TrigSystem(0.5, N, field="complex")
    Tm = TrigSystem(-0.5, N, field="complex")
    r1 = transform_norms(Tp, Lorentz(4, 2), "besselian", scales)
    r2 = transform_norms(Tm, Lorentz(4 / 3, 2), "hilbertian", scales)
    r3 = transform_norms(Tp, Lp(3.75), "besselian", scales)
    s1 = ratio_stabilization(scales, r1.per_scale)
    s2 = ratio_stabilization(scales, r2.per_scale)
    s3 = ratio_stabilization(scales, r3.per_scale)
    ok = s1.bounded and s2.bounded and s3.slope > 0.03
    return ok, {"besselian_l4,2_slope": s1.slope, "hilbertian_l4/3,2_slope": s2.slope,
                "besselian_l3.75_slope": s3.slope,
                "extremal": f"{r1.argmax[-1]}/{r2.argmax[-1]}/{r3.argmax[-1]}"}


# -- 8 and 9 --------------------------------------------------------------------

DKK_K = 14


def _almost_greedy():
    B = diamond(TrigSystem(-0.5, 7), TrigSystem(0.5, 7))
    return almost_greedy_system(B, "lp:2", DKK_K)


def check_almost_greedy_growth():
    Y = _almost_greedy()
    ms = _dyadic(2, DKK_K)
    series = GrowthSeries("ktilde", Y.label)
    for m in ms:
        ktilde_measure(Y, m).add_to(series)
    fr = fit_log_power(series)
    target = 2**0.5
    pairs = [(a, r) for a, r in fr.extra["doubling"] if a >= 4]
    dev = max(abs(r / target - 1.0) for _, r in pairs)
    ok = dev <= 0.25 and abs(fr.gamma - 0.5) <= 0.2
    return ok, {"gamma": fr.gamma, "doubling": [r for _, r in pairs],
                "max_doubling_dev": float(dev), "dim": Y.dim}


def greedy_vectors(rng, Ys, s, n):
    """Three families on the first s coordinates: Gaussian, block-constant plus
    noise, and Gaussian with exactly s/2 nonzeros."""
    sig = Ys.sigma
    fam = np.arange(n) % 3
    g = rng.standard_normal((n, Ys.dim))
    g[:, s:] = 0.0
    lift = np.repeat(rng.standard_normal((n, sig.K)), sig.sizes, axis=1)
    lift[:, s:] = 0.0
    keep = np.argsort(rng.random((n, s)), axis=1)[:, : s // 2]
    sparse = np.zeros_like(g)
    np.put_along_axis(sparse[:, :s], keep, np.take_along_axis(g[:, :s], keep, 1), 1)
    F = np.where((fam == 0)[:, None], g, 0.0)
    F += np.where((fam == 1)[:, None], lift + 0.3 * g, 0.0)
    F += np.where((fam == 2)[:, None], sparse, 0.0)
    return F


def check_greedy():
    Y = _almost_greedy()
    rng = np.random.default_rng(9)
    supports = _dyadic(6, 10)
    maxima = []
    for s in supports:
        Ys = Y.section(int(Y.sigma.stops[Y.sigma.complete_blocks(s)]))
        F = greedy_vectors(rng, Ys, s, 1000)
        m = s // 4
        _, _, r = greedy_ratio_batch(Ys, F, m, seed=s, budget=4 * m)
        maxima.append(float(r.max()))
    slope = fit_power(supports, maxima).gamma
    O = orthonormal(12)
    orth = []
    for i in range(100):
        f = rng.standard_normal(12)
        orth.append(greedy_ratio(O, f, 1 + i % 10).ratio)
    orth_exact = all(r == 1.0 for r in orth)
    ok = abs(slope) < 0.05 and orth_exact
    return ok, {"max_ratio": maxima, "slope": slope, "orthonormal_all_exactly_1": orth_exact}


CRITERIA = {
    1: ("Dirichlet exponents", check_dirichlet),
    2: ("weight-coefficient asymptotics", check_weight_coefficients),
    3: ("secondary-index norm", check_secondary_norm),
    4: ("ccdom exponent and BHCC envelope", check_ccdom_growth),
    5: ("exact/witness consistency", check_exact_witness),
    6: ("small-instance formula oracles", check_formula_oracles),
    7: ("Fourier transform boundedness", check_fourier_transforms),
    8: ("almost greedy growth", check_almost_greedy_growth),
    9: ("greedy behavior", check_greedy),
}


def run_one(number) -> CriterionResult:
    title, fn = CRITERIA[number]
    t0 = time.perf_counter()
    passed, details = fn()
    return CriterionResult(number, title, bool(passed), details, time.perf_counter() - t0)


def run_suite(selected=None, jobs=1, echo=None):
    """Run the selected checks (default: all) and append the runtime check.

    Results come back in criterion order regardless of ``jobs``.
    """
    numbers = sorted(n for n in selected if n in CRITERIA) if selected else sorted(CRITERIA)
    t0 = time.perf_counter()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_one, numbers))
        if echo:
            for r in results:
                echo(r.line())
    else:
        results = []
        for n in numbers:
            r = run_one(n)
            results.append(r)
            if echo:
                echo(r.line())
    total = time.perf_counter() - t0
    if selected is None or 10 in selected:
        full = len(numbers) == len(CRITERIA)
        r = CriterionResult(10, "full suite runtime", full and total <= TIME_LIMIT,
                            {"seconds": total, "limit": TIME_LIMIT, "jobs": jobs, "complete_run": full}, total)
        results.append(r)
        if echo:
            echo(r.line())
    return results
