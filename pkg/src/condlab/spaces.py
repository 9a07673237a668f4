"""Sequence spaces: ℓ_p, Lorentz ℓ_{p,q} and weighted Lorentz d_{1,q}(w).

Norms act on the last axis of an array, so a stack of vectors is measured in
one call.  Every norm here is rearrangement invariant: only the non-increasing
rearrangement of |f| matters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParameter, UnsupportedPair

INF = math.inf


def _inv(p):
    return 0.0 if p == INF else 1.0 / p


def _parse_exponent(text):
    text = text.strip().lower()
    if text in ("inf", "infinity", "oo"):
        return INF
    num, _, den = text.partition("/")
    val = float(num) / float(den) if den else float(num)
    return val


class WeightSeq:
    """A weight w = (w_n) with primitive s_n = w_1 + ... + w_n.

    Either a finite array of weights or a closed-form primitive ``s(n)`` (which
    avoids cumulative round-off and has no length limit).
    """

    def __init__(self, w=None, primitive: Optional[Callable] = None, label: str = ""):
        if (w is None) == (primitive is None):
            raise InvalidParameter("give exactly one of w or primitive")
        self._primitive = primitive
        self._w = None
        self.label = label
        if w is not None:
            w = np.asarray(w, dtype=float)
            if w.ndim != 1 or len(w) == 0 or np.any(w <= 0):
                raise InvalidParameter("weights must be a non-empty positive sequence")
            self._w = w
            self._s = np.cumsum(w)

    @classmethod
    def lorentz(cls, p):
        """w_n = n^{1/p} - (n-1)^{1/p}, with primitive n^{1/p}."""
        if not 0 < p < INF:
            raise InvalidParameter(f"Lorentz weight needs 0 < p < inf, got {p}")
        return cls(primitive=lambda n: n ** (1.0 / p), label=f"lorentz({p:g})")

    @classmethod
    def power(cls, e, length=1 << 16):
        """w_n = n^e (e.g. e = 1/p - 1), tabulated to ``length`` terms."""
        n = np.arange(1, length + 1, dtype=float)
        return cls(w=n**e, label=f"power({e:g})")

    @classmethod
    def from_file(cls, path):
        """Read ``n,w_n`` CSV lines (header optional, n must run 1, 2, ...)."""
        text = Path(path).read_text()
        vals = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            a, _, b = line.partition(",")
            try:
                n, v = int(a), float(b)
            except ValueError:
                if not vals:
                    continue  # header row
                raise InvalidParameter(f"bad weight line {line!r}")
            if n != len(vals) + 1:
                raise InvalidParameter(f"weight indices must run 1,2,...; got {n}")
            vals.append(v)
        return cls(w=vals, label=Path(path).name)

    @property
    def length(self):
        return INF if self._w is None else len(self._w)

    def s(self, n):
        """Primitive sums s_1..s_n."""
        n = int(n)
        if self._w is None:
            return self._primitive(np.arange(1, n + 1, dtype=float))
        if n > len(self._w):
            raise InvalidParameter(f"weight {self.label!r} has {len(self._w)} terms, {n} needed")
        return self._s[:n]

    def w(self, n):
        s = self.s(n)
        return np.diff(s, prepend=0.0)

    def doubling_constant(self, n):
        """max_{m ≤ n/2} s_{2m}/s_m over the stored range."""
        s = self.s(n)
        m = np.arange(1, n // 2 + 1)
        return float((s[2 * m - 1] / s[m - 1]).max()) if len(m) else 1.0

    def __eq__(self, other):
        return isinstance(other, WeightSeq) and (self is other or (
            self.label == other.label and self.label != "" and self.length == other.length))

    def __hash__(self):
        return hash(self.label)


@dataclass(frozen=True, eq=False)
class SpaceSpec:
    kind: str  # "lp", "lorentz", "wlorentz"
    p: float = 2.0
    q: float = INF
    weight: Optional[WeightSeq] = field(default=None)

    def __post_init__(self):
        if self.kind == "lp":
            if not self.p > 0:
                raise InvalidParameter(f"lp needs p > 0, got {self.p}")
        elif self.kind == "lorentz":
            if not (0 < self.p < INF and self.q > 0):
                raise InvalidParameter(f"lorentz needs 0 < p < inf, q > 0; got {self.p}, {self.q}")
        elif self.kind == "wlorentz":
            if self.weight is None or not self.q > 0:
                raise InvalidParameter("wlorentz needs a weight and q > 0")
        else:
            raise InvalidParameter(f"unknown space kind {self.kind!r}")

    @property
    def banach(self):
        """Parameters for which the formula is a genuine norm."""
        if self.kind == "lp":
            return self.p >= 1
        if self.kind == "lorentz":
            return 1 <= self.q <= self.p
        w = self.weight.w(min(self.weight.length, 4096))
        return self.q >= 1 and bool(np.all(np.diff(w) <= 1e-15 * w[0]))

    def text(self):
        def e(v):
            if v == INF:
                return "inf"
            short = f"{v:g}"
            return short if float(short) == v else repr(float(v))
        if self.kind == "lp":
            return f"lp:{e(self.p)}"
        if self.kind == "lorentz":
            return f"lorentz:{e(self.p)},{e(self.q)}"
        return f"wlorentz:{self.weight.label},{e(self.q)}"

    def __eq__(self, other):
        if not isinstance(other, SpaceSpec):
            return NotImplemented
        return (self.kind, self.p, self.q) == (other.kind, other.p, other.q) and (
            self.kind != "wlorentz" or self.weight == other.weight)

    def __hash__(self):
        return hash((self.kind, self.p, self.q))

    def __str__(self):
        return self.text()


def Lp(p):
    return SpaceSpec("lp", p=float(p))


def Lorentz(p, q):
    return SpaceSpec("lorentz", p=float(p), q=float(q))


def WeightedLorentz(w, q):
    return SpaceSpec("wlorentz", p=1.0, q=float(q), weight=w)


def parse_space(text: str) -> SpaceSpec:
    """``lp:p``, ``lorentz:p,q`` or ``wlorentz:<weightfile>,q``."""
    kind, _, rest = text.strip().partition(":")
    try:
        if kind == "lp":
            return Lp(_parse_exponent(rest))
        if kind == "lorentz":
            p, q = rest.split(",")
            return Lorentz(_parse_exponent(p), _parse_exponent(q))
        if kind == "wlorentz":
            path, _, q = rest.rpartition(",")
            return WeightedLorentz(WeightSeq.from_file(path), _parse_exponent(q))
    except (ValueError, OSError) as exc:
        raise InvalidParameter(f"cannot parse space {text!r}: {exc}") from exc
    raise InvalidParameter(f"unknown space syntax {text!r}")


# -- norms --------------------------------------------------------------------


def decreasing_rearrangement(f):
    """|f| sorted non-increasingly along the last axis."""
    a = np.abs(np.asarray(f))
    return -np.sort(-a, axis=-1)


def _primitive(spec, n):
    """(s_n, v_n) with the norm written as (Σ v_n a_n^q)^{1/q} or sup s_n a_n."""
    idx = np.arange(1, n + 1, dtype=float)
    if spec.kind == "lorentz":
        s = idx ** (1.0 / spec.p)
        v = idx ** (spec.q / spec.p - 1.0) if spec.q != INF else None
    else:
        s = spec.weight.s(n)
        w = np.diff(s, prepend=0.0)
        v = s ** (spec.q - 1.0) * w if spec.q != INF else None
    return s, v


def space_norm(spec: SpaceSpec, f):
    """Exact norm of finitely supported f (vectorised over the last axis).

    ℓ_{p,q}: (Σ (n^{1/p} a_n)^q / n)^{1/q}; d_{1,q}(w): (Σ (s_n a_n)^q w_n/s_n)^{1/q};
    q = ∞ by supremum.
    """
    f = np.asarray(f)
    if f.shape[-1] == 0:
        return np.zeros(f.shape[:-1]) if f.ndim > 1 else 0.0
    if spec.kind == "lp":
        a = np.abs(f)
        if spec.p == INF:
            out = a.max(axis=-1)
        else:
            # scale out the max to avoid under/overflow in a^p
            top = a.max(axis=-1, keepdims=True)
            safe = np.where(top > 0, top, 1.0)
            out = safe[..., 0] * ((a / safe) ** spec.p).sum(axis=-1) ** (1.0 / spec.p)
        return out if np.ndim(out) else float(out)
    a = decreasing_rearrangement(f)
    s, v = _primitive(spec, a.shape[-1])
    if spec.q == INF:
        out = (s * a).max(axis=-1)
    else:
        out = (v * a**spec.q).sum(axis=-1) ** (1.0 / spec.q)
    return out if np.ndim(out) else float(out)


def norm_variants(w: WeightSeq, q, f):
    """The defining d_{1,q}(w) norm, the LRP form (Σ (s_n a_n)^q/n)^{1/q} and the
    increment form (Σ a_n^q (s_n^q - s_{n-1}^q))^{1/q}, on the last axis."""
    a = decreasing_rearrangement(f)
    n = a.shape[-1]
    s = w.s(n)
    idx = np.arange(1, n + 1)
    defining = space_norm(WeightedLorentz(w, q), f)
    if q == INF:
        sup = (s * a).max(axis=-1)
        return defining, sup, sup
    lrp = ((s * a) ** q / idx).sum(axis=-1) ** (1.0 / q)
    inc = (a**q * np.diff(s**q, prepend=0.0)).sum(axis=-1) ** (1.0 / q)
    return defining, lrp, inc


def harmonic(m):
    """H_m = 1 + 1/2 + ... + 1/m."""
    return float(np.sum(1.0 / np.arange(1, int(m) + 1))) if m >= 1 else 0.0


def harmonic_w(w: WeightSeq, m):
    """H_m[w] = Σ_{n≤m} w_n / s_n."""
    s = w.s(m)
    return float((np.diff(s, prepend=0.0) / s).sum())


def delta_closed_form(pair, m):
    """δ_m between the two spaces of ``pair`` (first one smaller index q ≤ r)."""
    A, B = pair
    if A.kind != B.kind:
        raise UnsupportedPair(f"no closed form for ({A}, {B})")
    if A.kind == "lp":
        q, r = A.p, B.p
        base = float(m)
    elif A.kind == "lorentz":
        if A.p != B.p:
            raise UnsupportedPair(f"Lorentz pair needs equal p: ({A}, {B})")
        q, r = A.q, B.q
        base = harmonic(m)
    else:
        if A.weight != B.weight:
            raise UnsupportedPair("weighted Lorentz pair needs the same weight")
        q, r = A.q, B.q
        base = harmonic_w(A.weight, m)
    if q > r:
        raise UnsupportedPair(f"need q <= r, got {q} > {r}")
    return base ** (_inv(q) - _inv(r))


# -- fundamental functions ----------------------------------------------------


@dataclass(frozen=True)
class FundamentalRow:
    m: int
    Lambda: float
    Gamma: float
    Gamma_steps: float

    @property
    def c(self):
        """Λ_m Γ_m / m, which lies in [1, 2] for symmetric Banach spaces."""
        return self.Lambda * self.Gamma / self.m


def _pava_dual(v, q):
    """max Σ x_n subject to Σ v_n x_n^q ≤ 1 over non-increasing x ≥ 0 (q > 1).

    The Lagrangian is separable and concave, so pooled adjacent violators give
    the exact optimum: each block B is flat with x_B ∝ (|B|/V_B)^{1/(q-1)}.
    """
    blocks = []  # [count, V]
    for vn in v:
        blocks.append([1.0, float(vn)])
        while len(blocks) > 1 and blocks[-2][0] / blocks[-2][1] < blocks[-1][0] / blocks[-1][1]:
            c, V = blocks.pop()
            blocks[-1][0] += c
            blocks[-1][1] += V
    c = np.array([b[0] for b in blocks])
    V = np.array([b[1] for b in blocks])
    x = (c / V) ** (1.0 / (q - 1.0))
    return float((c * x).sum() / ((V * x**q).sum()) ** (1.0 / q))


def dual_fundamental(spec: SpaceSpec, m):
    """(Γ_m, Γ_m restricted to step vectors): sup{Σ_{j≤m} g_j : ‖g‖ ≤ 1}."""
    m = int(m)
    idx = np.arange(1, m + 1, dtype=float)
    steps_norm = np.array([space_norm(spec, np.ones(k)) for k in range(1, m + 1)]) \
        if spec.kind != "lp" else None
    if spec.kind == "lp":
        g = m ** (1.0 - _inv(spec.p)) if spec.p >= 1 else 1.0
        return g, g
    steps = float((idx / steps_norm).max())
    if spec.q == INF:
        s, _ = _primitive(spec, m)
        return float((1.0 / s).sum()), steps
    if spec.q <= 1:
        return steps, steps
    _, v = _primitive(spec, m)
    return max(_pava_dual(v, spec.q), steps), steps


def fundamental(spec: SpaceSpec, m) -> FundamentalRow:
    lam = float(space_norm(spec, np.ones(int(m))))
    gam, st = dual_fundamental(spec, m)
    return FundamentalRow(int(m), lam, gam, st)


def fundamental_function(spec: SpaceSpec, m):
    """Λ_m = ‖e_1 + ... + e_m‖."""
    return float(space_norm(spec, np.ones(int(m))))


# -- regularity ---------------------------------------------------------------


@dataclass(frozen=True)
class RegularityResult:
    kind: str
    witness: Optional[int]
    violations: dict  # r -> first violating m (1-based)

    @property
    def holds(self):
        return self.witness is not None


def regularity_check(s, kind="LRP", cap=64) -> RegularityResult:
    """Smallest integer r in [2, cap] with s_{rm} ≥ 2 s_m (LRP) or s_{rm} ≤ (r/2) s_m
    (URP) for every m with rm inside the sequence."""
    s = np.asarray(s, dtype=float)
    if kind not in ("LRP", "URP"):
        raise InvalidParameter(f"kind must be LRP or URP, got {kind!r}")
    n = len(s)
    violations = {}
    for r in range(2, int(cap) + 1):
        m = np.arange(1, n // r + 1)
        if len(m) == 0:
            break
        big, small = s[r * m - 1], s[m - 1]
        bad = big < 2 * small if kind == "LRP" else big > 0.5 * r * small
        if not bad.any():
            return RegularityResult(kind, r, violations)
        violations[r] = int(m[np.argmax(bad)])
    return RegularityResult(kind, None, violations)


def essential_decrease_check(phi, q):
    """sup_{n>m} (φ_n^q/n) / (φ_m^q/m) over the given finite sequence."""
    phi = np.asarray(phi, dtype=float)
    if len(phi) < 2:
        return 1.0
    psi = phi**q / np.arange(1, len(phi) + 1)
    later = np.maximum.accumulate(psi[::-1])[::-1][1:]  # max_{n>m} psi_n
    return float((later / psi[:-1]).max())
