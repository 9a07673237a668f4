"""Conditionality measurements: ‖S_A‖, k_m, k̃_m, δ_m, δ̃_m, fundamental
functions, transform constants and greedy ratios.

Gram-backed systems get exact values from generalized eigenproblems.  For a
Hilbert-space system with Gram matrix G,

    ‖S_A‖² = λ_max(D_A G D_A, G) = λ_max(G_AA (G⁻¹)_AA),

the second form being the one used for batched subset enumeration.  Other
norm oracles only get lower witnesses.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BudgetExceeded, DimensionMismatch, InvalidParameter
from .linalg import gen_sym_eig_max
from .series import GrowthSeries, Kind
from .spaces import SpaceSpec, delta_closed_form, space_norm
from .systems import DkkSystem, FiniteSystem, TrigSystem
from .weights import Arrangement, frequencies

KTILDE_EXACT_CAP = 18
K_EXACT_DIM_CAP = 24
ENUM_BUDGET = 1 << 22
HEURISTIC_RESTARTS = 32
HEURISTIC_BUDGET = 10_000
BATCH = 4096


def _unit(n, k=0):
    e = np.zeros(n)
    e[k] = 1.0
    return e


@dataclass
class Witness:
    A: tuple
    a: Optional[np.ndarray]
    ratio: float

    def reproduce(self, S: FiniteSystem):
        """Re-evaluate ‖S_A a‖/‖a‖ with the system's oracle."""
        a = np.asarray(self.a)
        full = np.zeros(S.dim, dtype=a.dtype)
        full[: len(a)] = a
        proj = np.zeros_like(full)
        idx = list(self.A)
        proj[idx] = full[idx]
        return float(S.norm(proj) / S.norm(full))


@dataclass
class Measurement:
    m: int
    value: float
    kind: Kind
    witness: Optional[Witness] = None
    evaluations: int = 0

    def add_to(self, series: GrowthSeries):
        series.add(self.m, self.value, self.kind)
        return series


# -- exact Hilbert-space projection norms ------------------------------------


def projection_norm(S: FiniteSystem, A, seed=0):
    """(‖S_A‖, kind).  Exact for Gram systems; otherwise a lower witness."""
    A = sorted(set(int(i) for i in A))
    if not A:
        return 0.0, Kind.EXACT
    if A[-1] >= S.dim or A[0] < 0:
        raise DimensionMismatch(f"index set exceeds dimension {S.dim}")
    G = S.gram
    if G is not None:
        if len(A) == S.dim:
            return 1.0, Kind.EXACT
        D = np.zeros(S.dim)
        D[A] = 1.0
        M = D[:, None] * G * D[None, :]
        return math.sqrt(max(gen_sym_eig_max(M, G), 0.0)), Kind.EXACT
    w = projection_witness(S, A, np.arange(S.dim), np.random.default_rng(seed))
    return w.ratio, Kind.LOWER


def _subset_values(G, Ginv, subsets):
    """‖S_A‖ for each row of ``subsets`` (equal sizes), Hilbert-space system G."""
    subsets = np.asarray(subsets)
    k, r = subsets.shape
    if r == 0:
        return np.zeros(k)
    out = np.empty(k)
    for lo in range(0, k, BATCH):
        idx = subsets[lo:lo + BATCH]
        GA = G[idx[:, :, None], idx[:, None, :]]
        HA = Ginv[idx[:, :, None], idx[:, None, :]]
        L = np.linalg.cholesky(GA)
        C = np.swapaxes(L, -1, -2) @ HA @ L
        C = 0.5 * (C + np.swapaxes(C, -1, -2))
        out[lo:lo + BATCH] = np.linalg.eigvalsh(C)[:, -1]
    return np.sqrt(np.maximum(out, 0.0))


def _enumerate_max(G, sizes, ground):
    """Max ‖S_A‖ over subsets of ``ground`` with the given sizes."""
    G = np.asarray(G, dtype=float)
    Ginv = np.linalg.inv(G)
    Ginv = 0.5 * (Ginv + Ginv.T)
    best, best_A, count = 1.0, (ground[0],), 0
    for r in sizes:
        if r < 1 or r >= len(ground):
            continue
        combos = np.array(list(itertools.combinations(ground, r)), dtype=int)
        vals = _subset_values(G, Ginv, combos)
        count += len(combos)
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, best_A = float(vals[i]), tuple(int(x) for x in combos[i])
    return best, best_A, count


def _maximiser(G, A):
    """Coefficient vector attaining ‖S_A‖ for the Gram system G."""
    D = np.zeros(G.shape[0])
    D[list(A)] = 1.0
    M = D[:, None] * G * D[None, :]
    _, v = gen_sym_eig_max(M, G, return_vector=True)
    return np.real_if_close(v)


def _n_subsets(n, sizes):
    return sum(math.comb(n, r) for r in sizes if 0 <= r <= n)


def _heuristic_max(G, ground, max_size, rng, restarts, budget):
    """Steepest-ascent add/remove/swap search on ‖S_A‖ over A ⊆ ground, |A| ≤ max_size."""
    G = np.asarray(G, dtype=float)
    Ginv = np.linalg.inv(G)
    Ginv = 0.5 * (Ginv + Ginv.T)
    ground = np.asarray(ground, dtype=int)
    max_size = min(max_size, len(ground))
    evals = 0
    best, best_A = 1.0, (int(ground[0]),)

    def value(A):
        return float(_subset_values(G, Ginv, np.array([sorted(A)]))[0])

    per_start = max(budget // max(restarts, 1), 1)
    for _ in range(restarts):
        if evals >= budget:
            break
        r = int(rng.integers(1, max_size + 1))
        cur = set(int(x) for x in rng.choice(ground, size=r, replace=False))
        cur_val = value(cur) if len(cur) < len(ground) else 1.0
        evals += 1
        used = 1
        while used < per_start:
            moves = []
            inside, outside = sorted(cur), sorted(set(ground.tolist()) - cur)
            if len(cur) < max_size:
                moves += [cur | {j} for j in outside]
            if len(cur) > 1:
                moves += [cur - {i} for i in inside]
            moves += [(cur - {i}) | {j} for i in inside for j in outside]
            moves = [m for m in moves if 0 < len(m) < len(ground)]
            if len(moves) > per_start - used:
                pick = rng.choice(len(moves), size=per_start - used, replace=False)
                moves = [moves[i] for i in pick]
            if not moves:
                break
            vals = np.empty(len(moves))
            by_size = {}
            for i, mv in enumerate(moves):
                by_size.setdefault(len(mv), []).append(i)
            for size, ids in by_size.items():
                vals[ids] = _subset_values(G, Ginv, np.array([sorted(moves[i]) for i in ids]))
            used += len(moves)
            i = int(np.argmax(vals))
            if vals[i] <= cur_val * (1 + 1e-14):
                break
            cur, cur_val = moves[i], float(vals[i])
        evals += used - 1
        if cur_val > best:
            best, best_A = cur_val, tuple(sorted(cur))
    return best, best_A, evals


def ktilde_measure(S: FiniteSystem, m, mode="exact", seed=0, cap=KTILDE_EXACT_CAP,
                   restarts=HEURISTIC_RESTARTS, budget=HEURISTIC_BUDGET) -> Measurement:
    """k̃_m = sup ‖S_A f‖/‖f‖ over f supported in the first m coordinates."""
    m = int(m)
    if m < 1:
        raise InvalidParameter("m must be >= 1")
    m_eff = min(m, S.dim)
    G = S.gram
    if G is None:
        if isinstance(S, DkkSystem):
            w = lifted_block_witness(S, m_eff)
            if mode == "heuristic" and m_eff <= 64:
                w2 = ktilde_witness_search(S, m_eff, np.random.default_rng(seed), restarts, budget)
                w = max(w, w2, key=lambda x: x.ratio)
            return Measurement(m, max(w.ratio, 1.0), Kind.LOWER, w)
        w = ktilde_witness_search(S, m_eff, np.random.default_rng(seed), restarts, budget)
        return Measurement(m, max(w.ratio, 1.0), Kind.LOWER, w)
    Gm = np.asarray(G[:m_eff, :m_eff])
    if m_eff == 1:
        return Measurement(m, 1.0, Kind.EXACT, Witness((0,), np.ones(1), 1.0))
    ground = list(range(m_eff))
    if mode == "exact":
        if m_eff > cap:
            raise BudgetExceeded(2**m_eff, 2**cap)
        # ‖S_A‖ = ‖S_{A^c}‖ for proper nonempty A, so half the sizes suffice
        best, A, count = _enumerate_max(Gm, range(1, m_eff // 2 + 1), ground)
        kind = Kind.EXACT
    elif mode == "heuristic":
        best, A, count = _heuristic_max(Gm, ground, m_eff - 1, np.random.default_rng(seed), restarts, budget)
        kind = Kind.LOWER
    else:
        raise InvalidParameter(f"mode must be exact or heuristic, got {mode!r}")
    a = _maximiser(Gm, A)
    return Measurement(m, best, kind, Witness(A, a, best), count)


def k_measure(S: FiniteSystem, m, mode="exact", seed=0, dim_cap=K_EXACT_DIM_CAP,
              budget_cap=ENUM_BUDGET, restarts=HEURISTIC_RESTARTS, budget=HEURISTIC_BUDGET) -> Measurement:
    """k_m = sup_{|A| ≤ m} ‖S_A‖ over the whole system."""
    m = int(m)
    N = S.dim
    G = S.gram
    if G is None:
        rng = np.random.default_rng(seed)
        w = ktilde_witness_search(S, N, rng, restarts, budget, max_size=m)
        return Measurement(m, max(w.ratio, 1.0), Kind.LOWER, w)
    if N == 1:
        return Measurement(m, 1.0, Kind.EXACT, Witness((0,), np.ones(1), 1.0))
    sizes = range(1, min(m, N - 1) + 1)
    if mode == "exact":
        need = _n_subsets(N, sizes)
        if N > dim_cap or need > budget_cap:
            raise BudgetExceeded(need, budget_cap if N <= dim_cap else f"dimension {dim_cap}")
        best, A, count = _enumerate_max(G, sizes, list(range(N)))
        kind = Kind.EXACT
    elif mode == "heuristic":
        best, A, count = _heuristic_max(G, list(range(N)), min(m, N - 1), np.random.default_rng(seed), restarts, budget)
        kind = Kind.LOWER
    else:
        raise InvalidParameter(f"mode must be exact or heuristic, got {mode!r}")
    a = _maximiser(np.asarray(G), A)
    return Measurement(m, best, kind, Witness(A, a, best), count)


# -- lower witnesses for general norm oracles --------------------------------


def projection_witness(S: FiniteSystem, A, support, rng, restarts=8, sweeps=6):
    """Lower bound for ‖S_A‖ on vectors supported in ``support``.

    For fixed f_A the ratio ‖f_A‖/‖f_A + g‖ is maximised by making ‖f_A + g‖ small
    over g supported off A; starts are signed indicators, decreasing profiles and
    random vectors, improved by coordinate moves on the off-A coordinates.
    """
    A = np.array(sorted(set(int(i) for i in A)), dtype=int)
    support = np.asarray(support, dtype=int)
    off = np.setdiff1d(support, A)
    n = S.dim
    starts = []
    ind = np.zeros(n)
    ind[support] = 1.0
    starts.append(ind)
    prof = np.zeros(n)
    prof[support] = 1.0 / np.sqrt(np.arange(1, len(support) + 1))
    starts.append(prof)
    for _ in range(restarts):
        v = np.zeros(n)
        v[support] = rng.choice([-1.0, 1.0], size=len(support))
        starts.append(v)
        v = np.zeros(n)
        v[support] = rng.standard_normal(len(support))
        starts.append(v)
    best = Witness(tuple(A.tolist()), starts[0], 0.0)
    steps = np.array([-1.0, -0.5, -0.25, -0.1, 0.1, 0.25, 0.5, 1.0])
    for f in starts:
        f = f.copy()
        top = float(S.norm(np.where(np.isin(np.arange(n), A), f, 0.0)))
        if top == 0.0:
            continue
        cur = float(S.norm(f))
        for _ in range(sweeps if len(off) else 0):
            improved = False
            for j in off:
                scale = max(abs(f[j]), 1e-3 * max(np.abs(f).max(), 1.0))
                cand = np.repeat(f[None, :], len(steps), axis=0)
                cand[:, j] += steps * scale
                vals = np.asarray(S.norm(cand))
                i = int(np.argmin(vals))
                if vals[i] < cur * (1 - 1e-12):
                    f, cur, improved = cand[i], float(vals[i]), True
            if not improved:
                break
        ratio = top / cur
        if ratio > best.ratio:
            best = Witness(tuple(A.tolist()), f, ratio)
    return best


def ktilde_witness_search(S, m, rng, restarts=HEURISTIC_RESTARTS, budget=HEURISTIC_BUDGET, max_size=None):
    """Lower witness for k̃_m (or k_m with ``max_size``) of a general norm oracle."""
    support = np.arange(min(m, S.dim))
    max_size = len(support) - 1 if max_size is None else min(max_size, S.dim)
    best = Witness((0,), _unit(S.dim), 1.0)
    if max_size < 1 or len(support) < 2:
        return best
    tries = max(1, min(restarts, budget // max(1, 10 * len(support))))
    for _ in range(tries):
        r = int(rng.integers(1, max_size + 1))
        A = rng.choice(support, size=r, replace=False)
        w = projection_witness(S, A, support, rng, restarts=2, sweeps=3)
        if w.ratio > best.ratio:
            best = w
    return best


def lifted_block_witness(Y: DkkSystem, m) -> Witness:
    """Witness for k̃_m of a DKK system from block-constant vectors.

    For f = Σ c_n v_n and A a union of blocks, Q_σ f = Q_σ S_A f = 0, so the
    ratio equals ‖S_J c‖_X/‖c‖_X: the exact k̃_J of the inner system, where J is
    the number of complete blocks in the first m coordinates.
    """
    sigma = Y.sigma
    J = sigma.complete_blocks(m)
    if J < 2:
        return Witness((0,), _unit(m), 1.0)
    inner = ktilde_measure(Y.X, J, mode="exact" if Y.X.gram is not None else "heuristic")
    c = np.zeros(sigma.K)
    c[:J] = inner.witness.a[:J]
    f = sigma.lift(c)
    A = np.concatenate([sigma.block(n) for n in inner.witness.A])
    stop = int(sigma.stops[J - 1])
    return Witness(tuple(A.tolist()), f[:stop], inner.value)


# -- δ between two systems ----------------------------------------------------


def delta_between(S1: FiniteSystem, S2: FiniteSystem, m, tilde=True, mode="exact", seed=0,
                  budget_cap=ENUM_BUDGET) -> Measurement:
    """δ̃_m (A ⊆ first m) or δ_m (|A| ≤ m) of ‖Σ a x_n‖_{S1} / ‖Σ a y_n‖_{S2}.

    The supremum over coefficients on a fixed A is λ_max(G1_AA, G2_AA)^{1/2} for
    two Gram systems; it grows with A, so δ̃ uses A = {1..m} and δ uses |A| = m.
    """
    if S1.dim != S2.dim:
        raise DimensionMismatch(f"dimensions differ: {S1.dim} vs {S2.dim}")
    m = min(int(m), S1.dim)
    G1, G2 = S1.gram, S2.gram
    if G1 is not None and G2 is not None:
        if tilde:
            val = math.sqrt(gen_sym_eig_max(G1[:m, :m], G2[:m, :m]))
            return Measurement(m, val, Kind.EXACT, Witness(tuple(range(m)), None, val))
        N = S1.dim
        if mode == "exact":
            need = math.comb(N, m)
            if need > budget_cap:
                raise BudgetExceeded(need, budget_cap)
            combos = np.array(list(itertools.combinations(range(N), m)))
        else:
            rng = np.random.default_rng(seed)
            combos = np.array([np.sort(rng.choice(N, m, replace=False)) for _ in range(HEURISTIC_RESTARTS * 8)])
            combos = np.vstack([combos, np.arange(m)[None, :]])
        best, bestA = 0.0, None
        for lo in range(0, len(combos), BATCH):
            idx = combos[lo:lo + BATCH]
            M = G1[idx[:, :, None], idx[:, None, :]]
            H = G2[idx[:, :, None], idx[:, None, :]]
            L = np.linalg.cholesky(H)
            Li = np.linalg.inv(L)
            C = Li @ M @ np.swapaxes(Li, -1, -2)
            vals = np.linalg.eigvalsh(0.5 * (C + np.swapaxes(C, -1, -2)))[:, -1]
            i = int(np.argmax(vals))
            if vals[i] > best:
                best, bestA = float(vals[i]), tuple(int(x) for x in idx[i])
        val = math.sqrt(best)
        return Measurement(m, val, Kind.EXACT if mode == "exact" else Kind.LOWER, Witness(bestA, None, val))
    # general oracles: constant vectors, decreasing profiles and random vectors on A
    rng = np.random.default_rng(seed)
    cands = [np.ones(m), 1.0 / np.arange(1, m + 1), 1.0 / np.sqrt(np.arange(1, m + 1))]
    cands += [rng.standard_normal(m) for _ in range(64)]
    cands += [_unit(m)]
    best = Witness(tuple(range(m)), cands[0], 0.0)
    for c in cands:
        a = np.zeros(S1.dim)
        a[:m] = c
        r = float(S1.norm(a) / S2.norm(a))
        if r > best.ratio:
            best = Witness(tuple(range(m)), a, r)
    return Measurement(m, best.ratio, Kind.LOWER, best)


def ccdom_lower(S1: FiniteSystem, S2: FiniteSystem, m) -> Measurement:
    """½ max(δ̃_m[S1,S2], δ̃_m[S2,S1]), a lower bound for k̃_{2m} of diamond(S1, S2)."""
    a = delta_between(S1, S2, m).value
    b = delta_between(S2, S1, m).value
    return Measurement(2 * int(m), 0.5 * max(a, b), Kind.LOWER)


# -- fundamental function -----------------------------------------------------


def _subset_family(N, m, rng, random_count=16):
    fam = {tuple(range(s, s + m)) for s in range(0, N - m + 1)}
    for step in range(2, N):
        for s in range(0, step):
            if s + step * (m - 1) < N:
                fam.add(tuple(range(s, s + step * (m - 1) + 1, step)))
    for _ in range(random_count):
        fam.add(tuple(sorted(rng.choice(N, m, replace=False).tolist())))
    return sorted(fam)


def phi_fundamental(S: FiniteSystem, m, sign_mode="all_signs_exact", seed=0, sign_samples=256,
                    sign_cap=20, full_family_cap=2000) -> Measurement:
    """max ‖Σ_{n∈A} ε_n x_n‖ over |A| = m in a structured family of subsets."""
    m = int(m)
    N = S.dim
    if not 1 <= m <= N:
        raise InvalidParameter(f"need 1 <= m <= {N}")
    rng = np.random.default_rng(seed)
    full_family = math.comb(N, m) <= full_family_cap
    family = list(itertools.combinations(range(N), m)) if full_family else _subset_family(N, m, rng)
    exact_signs = sign_mode == "all_signs_exact" and m <= sign_cap
    if exact_signs:
        signs = np.array(list(itertools.product([1.0, -1.0], repeat=m - 1))) if m > 1 else np.ones((1, 0))
        signs = np.hstack([np.ones((len(signs), 1)), signs])  # global sign is irrelevant
    else:
        signs = rng.choice([-1.0, 1.0], size=(sign_samples, m))
        signs[0] = 1.0
    best, bestA, bestv = 0.0, None, None
    G = S.gram
    for A in family:
        A = list(A)
        if G is not None:
            GA = np.asarray(G)[np.ix_(A, A)]
            vals = np.einsum("ki,ij,kj->k", signs, GA, signs)
            i = int(np.argmax(vals))
            v = math.sqrt(max(vals[i], 0.0))
        else:
            vecs = np.zeros((len(signs), N))
            vecs[:, A] = signs
            vals = np.asarray(S.norm(vecs))
            i = int(np.argmax(vals))
            v = float(vals[i])
        if v > best:
            best, bestA, bestv = v, tuple(A), signs[i]
    kind = Kind.EXACT if (full_family and exact_signs) else Kind.LOWER
    return Measurement(m, best, kind, Witness(bestA, bestv, best))


# -- series / coefficient transforms -----------------------------------------


@dataclass
class TransformReport:
    direction: str
    space: str
    constant: float
    scales: list
    per_scale: list
    argmax: list = field(default_factory=list)


def _battery(S: FiniteSystem, m, rng, profile_exponents=(0.25, 0.5, 0.75)):
    """Named test coefficient vectors at scale m (support ≲ 2m+1)."""
    out = []
    L = min(S.dim, 2 * m + 1)
    if isinstance(S, TrigSystem):
        if S.field == "complex":
            freq = frequencies(Arrangement.COMPLEX, L)
            out.append(("dirichlet", np.ones(L)))
            for e in profile_exponents:
                a = np.zeros(L)
                pos = freq >= 1
                a[pos] = freq[pos] ** (-e)
                out.append((f"profile{e:g}", a))
        else:
            d = np.zeros(L)
            d[0] = 1.0
            d[1::2] = 2.0
            out.append(("dirichlet", d))
            for e in profile_exponents:
                a = np.zeros(L)
                k = np.arange(1, (L - 1) // 2 + 1)
                a[2 * k - 1] = k ** (-e)
                out.append((f"profile{e:g}", a))
    else:
        out.append(("indicator", np.ones(L)))
        for e in profile_exponents:
            out.append((f"profile{e:g}", np.arange(1, L + 1) ** (-e)))
    out.append(("signs", rng.choice([-1.0, 1.0], size=L)))
    a = np.zeros(L)
    pick = rng.choice(L, size=max(1, L // 8), replace=False)
    a[pick] = rng.standard_normal(len(pick))
    out.append(("sparse", a))
    out.append(("dense", rng.standard_normal(L)))
    return out


def transform_norms(S: FiniteSystem, U: SpaceSpec, direction="besselian", scales=None, seed=0) -> TransformReport:
    """Measured constant of the series transform (hilbertian: ‖f‖/‖a‖_U) or the
    coefficient transform (besselian: ‖a‖_U/‖f‖) over the test battery, per scale."""
    if direction not in ("hilbertian", "besselian"):
        raise InvalidParameter(f"direction must be hilbertian or besselian, got {direction!r}")
    if scales is None:
        top = max(4, (S.dim - 1) // 2)
        scales = [2**k for k in range(2, int(math.log2(top)) + 1)]
    rng = np.random.default_rng(seed)
    per, arg = [], []
    for m in scales:
        best, name = 0.0, ""
        for label, a in _battery(S, m, rng):
            L = len(a)
            nf = float(S.section(L).norm(a))
            nu = float(space_norm(U, a))
            if nf == 0.0 or nu == 0.0:
                continue
            r = nf / nu if direction == "hilbertian" else nu / nf
            if r > best:
                best, name = r, label
        per.append(best)
        arg.append(name)
    return TransformReport(direction, U.text(), max(per) if per else 0.0, list(scales), per, arg)


def bhcc_envelope(C1, C2, pair, m) -> Measurement:
    """C1 C2 δ_m[U1, U2]: an upper envelope for k_m."""
    return Measurement(int(m), C1 * C2 * delta_closed_form(pair, m), Kind.UPPER)


# -- greedy algorithm ------------------------------------------------------------


def greedy_set(f, m):
    """Indices of the m largest |f_j|, ties broken by the lowest index."""
    f = np.asarray(f)
    order = np.lexsort((np.arange(f.shape[-1]), -np.abs(f)))
    return np.sort(order[:m])


@dataclass
class GreedyResult:
    greedy_error: float
    best_error: float
    ratio: float
    kind: Kind


def greedy_ratio(S: FiniteSystem, f, m, seed=0, exact_cap=18, budget=2000) -> GreedyResult:
    """(‖f - G_m f‖, min_{|A|=m} ‖f - S_A f‖, ratio); best error exact for support ≤ exact_cap."""
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != S.dim:
        raise DimensionMismatch(f"vector length {f.shape[-1]} != {S.dim}")
    supp = np.flatnonzero(f)
    if not 0 < m < len(supp):
        raise InvalidParameter(f"need 0 < m < support size {len(supp)}")
    g = f.copy()
    g[greedy_set(f, m)] = 0.0
    gerr = float(S.norm(g))
    if len(supp) <= exact_cap:
        combos = np.array(list(itertools.combinations(supp, m)))
        R = np.repeat(f[None, :], len(combos), axis=0)
        np.put_along_axis(R, combos, 0.0, axis=1)
        best = float(np.min(S.norm(R)))
        kind = Kind.EXACT
    else:
        best = float(_swap_search_batch(S, f[None, :], m, np.random.default_rng(seed), budget)[0])
        kind = Kind.LOWER
    best = min(best, gerr)
    ratio = gerr / best if best > 0 else 1.0
    return GreedyResult(gerr, best, ratio, kind)


def _sample_in(rng, mask, k):
    """k random column indices per row among the True entries of ``mask``."""
    keys = rng.random(mask.shape)
    keys[~mask] = -1.0
    # random pick among allowed entries: draw uniformly from the top-k of random keys,
    # falling back to repeats when a row has fewer than k allowed entries
    order = np.argsort(-keys, axis=1)
    counts = mask.sum(axis=1)
    pos = (rng.random((mask.shape[0], k)) * np.maximum(counts, 1)[:, None]).astype(int)
    return np.take_along_axis(order, pos, axis=1), counts > 0


def _kth(values, allowed, k, small):
    """Per row, the k-th smallest (or largest) value among allowed entries."""
    v = np.where(allowed, values, np.inf if small else -np.inf)
    v = np.sort(v, axis=1) if small else -np.sort(-v, axis=1)
    cnt = np.maximum(allowed.sum(axis=1), 1)
    idx = np.minimum(k, cnt) - 1
    return v[np.arange(len(v)), idx]


def _swap_search_batch(S, F, m, rng, budget, candidates=16, chunk=64, edge=8):
    """Batched local search for min_{|A|=m} ‖f - S_A f‖, started at the greedy sets.

    Each step proposes ``candidates`` random swaps (i ∈ A, j ∈ supp f \\ A) per
    vector and keeps the best improving one; ``budget`` counts proposals.
    """
    F = np.asarray(F, dtype=float)
    B, N = F.shape
    out = np.empty(B)
    for lo in range(0, B, chunk):
        Fc = F[lo:lo + chunk]
        b = len(Fc)
        rows = np.arange(b)
        mask = np.zeros((b, N), dtype=bool)  # True = removed (in A)
        for i in rows:
            mask[i, greedy_set(Fc[i], m)] = True
        supp = Fc != 0
        absF = np.abs(Fc)
        cur = np.asarray(S.norm(np.where(mask, 0.0, Fc)), dtype=float).reshape(b)
        used = 0
        cols = np.arange(candidates)[None, :]
        while used + candidates <= budget:
            ins, _ = _sample_in(rng, mask, candidates)
            outs, ok = _sample_in(rng, supp & ~mask, candidates)
            # half of the proposals swap across the greedy threshold
            h = candidates // 2
            ins[:, :h], _ = _sample_in(rng, mask & (absF <= _kth(absF, mask, edge, small=True)[:, None]), h)
            outs[:, :h], ok2 = _sample_in(rng, supp & ~mask & (absF >= _kth(absF, supp & ~mask, edge, small=False)[:, None]), h)
            ok &= ok2
            used += candidates
            if not ok.any():
                break
            trial = np.repeat(np.where(mask, 0.0, Fc)[:, None, :], candidates, axis=1)
            trial[rows[:, None], cols, ins] = Fc[rows[:, None], ins]
            trial[rows[:, None], cols, outs] = 0.0
            vals = np.asarray(S.norm(trial)).reshape(b, candidates)
            k = np.argmin(vals, axis=1)
            better = ok & (vals[rows, k] < cur * (1 - 1e-13))
            for i in np.flatnonzero(better):
                mask[i, ins[i, k[i]]] = False
                mask[i, outs[i, k[i]]] = True
                cur[i] = vals[i, k[i]]
        out[lo:lo + b] = cur
    return out


def greedy_ratio_batch(S: FiniteSystem, F, m, seed=0, budget=256):
    """Greedy ratios for a stack of vectors; best errors from the batched swap search."""
    F = np.asarray(F, dtype=float)
    G = F.copy()
    for b in range(len(F)):
        G[b, greedy_set(F[b], m)] = 0.0
    gerr = np.asarray(S.norm(G), dtype=float)
    best = _swap_search_batch(S, F, m, np.random.default_rng(seed), budget)
    best = np.minimum(best, gerr)
    return gerr, best, gerr / best
