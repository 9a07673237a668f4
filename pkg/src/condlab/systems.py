"""Finite biorthogonal systems in coefficient coordinates.

A system of dimension N is a norm oracle on coefficient vectors a ∈ F^N: the
norm of Σ a_n x_n.  Coordinate functionals are the coordinates themselves, so
biorthogonality holds by construction.  Every ``norm`` acts on the last axis,
so stacks of coefficient vectors are evaluated in one call.

Constructors mirror the operations used to build conditional bases: weighted
trigonometric systems, interleaved direct sums, rotations, diamond products,
prefix sums X^(m) and the DKK composite Y[X, S, σ].
"""
from __future__ import annotations

import ast
import json
import math
from typing import Optional

import numpy as np

from . import weights as W
from .errors import (
    BlockOverrun,
    DimensionMismatch,
    IncompatibleOracles,
    InvalidParameter,
    OddDimension,
)
from .linalg import cholesky
from .spaces import SpaceSpec, fundamental_function, parse_space, space_norm

GRAM_MATERIALIZE_MAX = 2048


class FiniteSystem:
    """Base class; subclasses implement ``norm`` and optionally ``gram``."""

    dim: int
    label: str = ""
    tree: Optional[dict] = None

    @property
    def gram(self):
        return None

    @property
    def hilbertian(self):
        return self.gram is not None

    def norm(self, a):
        raise NotImplementedError

    def section(self, m):
        """The first m vectors (the system restricted to coordinates 1..m)."""
        if not 1 <= m <= self.dim:
            raise BlockOverrun(f"section of size {m} from a system of dimension {self.dim}")
        if m == self.dim:
            return self
        return SectionSystem(self, m)

    def _check(self, a):
        a = np.asarray(a)
        if a.shape[-1] != self.dim:
            raise DimensionMismatch(f"coefficient length {a.shape[-1]} != dimension {self.dim}")
        return a

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, label={self.label!r})"


def _quad_norm(G, a):
    """sqrt(Re a* G a) over the last axis."""
    val = np.einsum("...i,ij,...j->...", np.conj(a), G, a).real
    out = np.sqrt(np.maximum(val, 0.0))
    return out if np.ndim(out) else float(out)


class GramSystem(FiniteSystem):
    """Hilbert-space system: ‖Σ a_n x_n‖² = a* G a with G positive definite."""

    def __init__(self, G, label="gram", check=True):
        G = np.array(G, dtype=np.result_type(np.asarray(G), float))
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise DimensionMismatch(f"Gram matrix must be square, got {G.shape}")
        if check:
            cholesky(G)  # raises NotPositiveDefinite
        G.setflags(write=False)
        self._G = G
        self.dim = G.shape[0]
        self.label = label

    @property
    def gram(self):
        return self._G

    def norm(self, a):
        return _quad_norm(self._G, self._check(a))

    def section(self, m):
        if not 1 <= m <= self.dim:
            raise BlockOverrun(f"section of size {m} from a system of dimension {self.dim}")
        return GramSystem(self._G[:m, :m], f"{self.label}[:{m}]", check=False)

    def scaled(self, c):
        return GramSystem(c * self._G, f"{c:g}*{self.label}", check=False)


def orthonormal(N, label=None):
    return GramSystem(np.eye(int(N)), label or f"orthonormal({N})", check=False)


class TrigSystem(FiniteSystem):
    """First N functions of the trigonometric system in H_λ.

    ``field="complex"`` uses the natural complex arrangement, ``"real"`` the
    1, cos, sin arrangement.  Norms use the Toeplitz form; the Gram matrix is
    formed on demand.
    """

    def __init__(self, params, N, field="real"):
        self.params = W._params(params)
        self.N = self.dim = int(N)
        if self.dim < 1:
            raise DimensionMismatch("N must be >= 1")
        if field not in ("real", "complex"):
            raise InvalidParameter(f"field must be real or complex, got {field!r}")
        self.field = field
        self.arrangement = W.Arrangement.REAL if field == "real" else W.Arrangement.COMPLEX
        self.label = f"T{'^R' if field == 'real' else ''}(H_{self.params.lam:g})[{N}]"
        self._G = None

    @property
    def gram(self):
        if self._G is None:
            G = W.gram_matrix(self.params, self.dim, self.arrangement)
            G.setflags(write=False)
            self._G = G
        return self._G

    def norm(self, a):
        a = self._check(a)
        if self.dim <= GRAM_MATERIALIZE_MAX:
            return _quad_norm(self.gram, a)
        if a.ndim == 1:
            return W.h_norm(self.params, a, self.arrangement)
        flat = a.reshape(-1, self.dim)
        out = np.array([W.h_norm(self.params, row, self.arrangement) for row in flat])
        return out.reshape(a.shape[:-1])

    def section(self, m):
        if not 1 <= m <= self.dim:
            raise BlockOverrun(f"section of size {m} from a system of dimension {self.dim}")
        return TrigSystem(self.params, m, self.field)


def trig_system(params, N, arrangement=None, field="real"):
    if arrangement is not None:
        field = "real" if W.Arrangement(arrangement) is W.Arrangement.REAL else "complex"
    return TrigSystem(params, N, field)


class SequenceSystem(FiniteSystem):
    """Unit vector system of a sequence space, truncated to N coordinates."""

    def __init__(self, spec: SpaceSpec, N):
        self.spec = spec
        self.dim = int(N)
        self.label = f"E({spec.text()})[{N}]"

    @property
    def gram(self):
        if self.spec.kind == "lp" and self.spec.p == 2:
            return np.eye(self.dim)
        return None

    def norm(self, a):
        return space_norm(self.spec, self._check(a))

    def section(self, m):
        if not 1 <= m <= self.dim:
            raise BlockOverrun(f"section of size {m} from a system of dimension {self.dim}")
        return SequenceSystem(self.spec, m)


class SectionSystem(FiniteSystem):
    def __init__(self, base, m):
        self.base, self.dim = base, int(m)
        self.label = f"{base.label}[:{m}]"

    @property
    def gram(self):
        G = self.base.gram
        return None if G is None else G[: self.dim, : self.dim]

    def norm(self, a):
        a = self._check(a)
        pad = [(0, 0)] * (a.ndim - 1) + [(0, self.base.dim - self.dim)]
        return self.base.norm(np.pad(a, pad))


class TransformedSystem(FiniteSystem):
    """y_k = Σ_j R[j, k] x_j, so Σ b_k y_k has base coefficients a = R b."""

    def __init__(self, base, R, label):
        R = np.asarray(R)
        if R.shape != (base.dim, base.dim):
            raise DimensionMismatch(f"transform shape {R.shape} vs dimension {base.dim}")
        self.base, self.R = base, R
        self.dim = base.dim
        self.label = label
        self._G = None

    @property
    def gram(self):
        if self._G is None and self.base.gram is not None:
            G = self.R.conj().T @ self.base.gram @ self.R
            G = 0.5 * (G + G.conj().T)
            G.setflags(write=False)
            self._G = G
        return self._G

    def norm(self, b):
        b = self._check(b)
        if self.gram is not None:
            return _quad_norm(self.gram, b)
        return self.base.norm(b @ self.R.T)


ROTATION = np.array([[1.0, -1.0], [1.0, 1.0]]) / math.sqrt(2.0)


def rotation_matrix(N):
    """Block-diagonal vector map y = M x: y_{2n-1} = (x_{2n-1} - x_{2n})/√2,
    y_{2n} = (x_{2n-1} + x_{2n})/√2."""
    if N % 2:
        raise OddDimension(f"rotation needs an even dimension, got {N}")
    return np.kron(np.eye(N // 2), ROTATION)


def rotate(S: FiniteSystem) -> FiniteSystem:
    M = rotation_matrix(S.dim)
    return TransformedSystem(S, M.T, f"rot({S.label})")


def interleave_indices(d1, d2):
    """Positions of the two summands in X ⊕ Y: odd slots for X, even for Y,
    with the longer summand's tail appended when dimensions differ."""
    order = []
    for k in range(max(d1, d2)):
        if k < d1:
            order.append((0, k))
        if k < d2:
            order.append((1, k))
    idx1 = np.array([i for i, (s, _) in enumerate(order) if s == 0], dtype=int)
    idx2 = np.array([i for i, (s, _) in enumerate(order) if s == 1], dtype=int)
    return idx1, idx2


class WeightedSumSystem(FiniteSystem):
    """‖a‖ = (Σ_j ‖a[idx_j]‖_{S_j}^p)^{1/p}; the parts' index sets partition 0..N-1."""

    def __init__(self, parts, p=2.0, label="sum"):
        self.parts = [(S, np.asarray(idx, dtype=int)) for S, idx in parts]
        self.p = float(p)
        self.dim = sum(len(idx) for _, idx in self.parts)
        cover = np.sort(np.concatenate([idx for _, idx in self.parts]))
        if not np.array_equal(cover, np.arange(self.dim)):
            raise DimensionMismatch("part indices must partition the coordinates")
        for S, idx in self.parts:
            if S.dim != len(idx):
                raise DimensionMismatch(f"part {S.label} has dimension {S.dim}, {len(idx)} slots")
        self.label = label
        self._G = None

    @property
    def gram(self):
        if self._G is None and self.p == 2 and all(S.gram is not None for S, _ in self.parts):
            dtype = np.result_type(*[S.gram for S, _ in self.parts])
            G = np.zeros((self.dim, self.dim), dtype=dtype)
            for S, idx in self.parts:
                G[np.ix_(idx, idx)] = S.gram
            G.setflags(write=False)
            self._G = G
        return self._G

    def norm(self, a):
        a = self._check(a)
        if self.gram is not None:
            return _quad_norm(self.gram, a)
        vals = np.stack([np.asarray(S.norm(a[..., idx])) for S, idx in self.parts], axis=-1)
        if self.p == math.inf:
            out = vals.max(axis=-1)
        else:
            out = (vals**self.p).sum(axis=-1) ** (1.0 / self.p)
        return out if np.ndim(out) else float(out)


def direct_sum(S1, S2, p=2.0, outer=None):
    """Interleaved direct sum X ⊕ Y with outer ℓ_p rule (⊕₂ for Hilbert systems).

    ``outer="hilbert"`` demands two Gram systems and yields a Gram system.
    """
    if outer == "hilbert":
        if S1.gram is None or S2.gram is None:
            raise IncompatibleOracles("a Hilbert direct sum needs two Gram systems")
        p = 2.0
    idx1, idx2 = interleave_indices(S1.dim, S2.dim)
    out = WeightedSumSystem([(S1, idx1), (S2, idx2)], p, f"({S1.label} + {S2.label})")
    if out.gram is not None:
        return GramSystem(out.gram, out.label, check=False)
    return out


def diamond(S1, S2):
    """Rotation of the interleaved direct sum."""
    return rotate(direct_sum(S1, S2, outer="hilbert" if S1.hilbertian and S2.hilbertian else None))


def prefix_sum_system(S, sizes, p=2.0):
    """X^(m) = ⊕_j (first m_j vectors of S), consecutive blocks, outer ℓ_p."""
    sizes = [int(m) for m in sizes]
    parts, start = [], 0
    for m in sizes:
        if m > S.dim:
            raise BlockOverrun(f"block size {m} exceeds dimension {S.dim}")
        if m < 1:
            raise InvalidParameter("block sizes must be positive")
        parts.append((S.section(m), np.arange(start, start + m)))
        start += m
    return WeightedSumSystem(parts, p, f"prefix({S.label}; {sizes})")


# -- ordered partitions and the DKK method -----------------------------------


class Partition:
    """Consecutive integer intervals σ_1 < σ_2 < ... with averaging vectors.

    v_n = Λ_{|σ_n|}^{-1} 1_{σ_n} and v_n* = (Λ_{|σ_n|}/|σ_n|) 1_{σ_n}, where Λ is
    the fundamental function of the attached space.
    """

    def __init__(self, sizes, spec: SpaceSpec):
        sizes = np.asarray([int(s) for s in sizes], dtype=int)
        if len(sizes) == 0 or np.any(sizes < 1):
            raise InvalidParameter("partition sizes must be positive")
        self.sizes = sizes
        self.spec = spec
        self.stops = np.cumsum(sizes)
        self.starts = self.stops - sizes
        self.N = int(self.stops[-1])
        self.K = len(sizes)
        self.Lambda = np.array([fundamental_function(spec, s) for s in sizes])

    @classmethod
    def dyadic(cls, K, spec):
        """|σ_n| = 2^n, n = 1..K."""
        return cls([2**n for n in range(1, K + 1)], spec)

    def block(self, n):
        return np.arange(self.starts[n], self.stops[n])

    def block_of(self, j):
        return int(np.searchsorted(self.stops, j, side="right"))

    def v(self, n):
        out = np.zeros(self.N)
        out[self.starts[n]:self.stops[n]] = 1.0 / self.Lambda[n]
        return out

    def v_star(self, n):
        out = np.zeros(self.N)
        out[self.starts[n]:self.stops[n]] = self.Lambda[n] / self.sizes[n]
        return out

    def coords(self, f):
        """(v_n*(f))_n over the last axis."""
        f = np.asarray(f)
        if f.shape[-1] != self.N:
            raise DimensionMismatch(f"vector length {f.shape[-1]} != partition span {self.N}")
        sums = np.add.reduceat(f, self.starts, axis=-1)
        return sums * (self.Lambda / self.sizes)

    def lift(self, c):
        """Σ c_n v_n."""
        c = np.asarray(c)
        return np.repeat(c / self.Lambda, self.sizes, axis=-1)

    def condition_A(self):
        """Smallest D with Σ_{i<m} |σ_i| ≤ D |σ_m| for all m."""
        if self.K < 2:
            return 0.0
        return float(((self.stops[:-1]) / self.sizes[1:]).max())

    def complete_blocks(self, m):
        """Number of blocks contained in the first m coordinates."""
        return int(np.searchsorted(self.stops, m, side="right"))


def averaging_projection(sigma: Partition, f):
    """(P_σ f, Q_σ f) with P_σ f = Σ v_n*(f) v_n."""
    f = np.asarray(f)
    P = sigma.lift(sigma.coords(f))
    return P, f - P


def dual_pairing_check(sigma: Partition, samples=1000, seed=0):
    """Largest relative self-adjointness defect of P_σ and Q_σ on random pairs."""
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((samples, sigma.N))
    g = rng.standard_normal((samples, sigma.N))
    Pf, Qf = averaging_projection(sigma, f)
    Pg, Qg = averaging_projection(sigma, g)
    scale = np.linalg.norm(f, axis=-1) * np.linalg.norm(g, axis=-1)
    dP = np.abs((f * Pg).sum(-1) - (Pf * g).sum(-1)) / scale
    dQ = np.abs((f * Qg).sum(-1) - (Qf * g).sum(-1)) / scale
    return {"samples": samples, "max_defect_P": float(dP.max()), "max_defect_Q": float(dQ.max())}


class AveragingBasisSystem(FiniteSystem):
    """The unconditional basis (v_n) of P_σ(S): ‖Σ c_n v_n‖_S."""

    def __init__(self, sigma: Partition):
        self.sigma = sigma
        self.dim = sigma.K
        self.label = f"V({sigma.spec.text()}; K={sigma.K})"

    @property
    def gram(self):
        if self.sigma.spec.kind == "lp" and self.sigma.spec.p == 2:
            return np.eye(self.dim)
        return None

    def norm(self, c):
        c = self._check(c)
        return space_norm(self.sigma.spec, self.sigma.lift(c))


class DkkSystem(FiniteSystem):
    """‖f‖ = ‖Q_σ f‖_S + ‖Σ_n v_n*(f) x_n‖_X."""

    def __init__(self, X: FiniteSystem, spec: SpaceSpec, sigma: Partition):
        if sigma.K > X.dim:
            raise DimensionMismatch(f"{sigma.K} partition blocks but the inner system has dimension {X.dim}")
        self.X, self.spec, self.sigma = X, spec, sigma
        self.dim = sigma.N
        self.label = f"DKK[{X.label}, {spec.text()}, K={sigma.K}]"

    def parts(self, f):
        """(‖Q_σ f‖_S, ‖Σ v_n*(f) x_n‖_X)."""
        f = self._check(f)
        c = self.sigma.coords(f)
        Q = f - self.sigma.lift(c)
        pad = [(0, 0)] * (c.ndim - 1) + [(0, self.X.dim - self.sigma.K)]
        return space_norm(self.spec, Q), self.X.norm(np.pad(c, pad))

    def section(self, m):
        """Exact truncation when m ends a block (later blocks see only zeros)."""
        k = self.sigma.complete_blocks(m)
        if 1 <= k < self.sigma.K and int(self.sigma.stops[k - 1]) == m:
            return DkkSystem(self.X, self.spec, Partition(self.sigma.sizes[:k], self.spec))
        return super().section(m)

    def norm(self, f):
        q, x = self.parts(f)
        out = np.asarray(q) + np.asarray(x)
        return out if np.ndim(out) else float(out)


def dkk_system(X, spec, sigma):
    if isinstance(spec, str):
        spec = parse_space(spec)
    return DkkSystem(X, spec, sigma)


def almost_greedy_system(B, spec, K):
    """Y[B ⊕ V, S, σ] with |σ_n| = 2^n, n ≤ K, and V the averaging basis of P_σ(S)."""
    if isinstance(spec, str):
        spec = parse_space(spec)
    sigma = Partition.dyadic(K, spec)
    V = AveragingBasisSystem(sigma)
    X = direct_sum(B, V, outer="hilbert" if B.hilbertian and V.hilbertian else None)
    return DkkSystem(X, spec, sigma)


# -- constructor trees ----------------------------------------------------------

_BUILDERS = {}


def _builder(name):
    def deco(fn):
        _BUILDERS[name] = fn
        return fn

    return deco


@_builder("orthonormal")
def _b_orth(N):
    return orthonormal(N)


@_builder("gram")
def _b_gram(entries):
    return GramSystem(np.array(entries, dtype=float))


@_builder("trig")
def _b_trig(lam, N, field="real"):
    return TrigSystem(lam, N, field)


@_builder("seq")
def _b_seq(space, N):
    return SequenceSystem(parse_space(space), N)


@_builder("direct_sum")
def _b_sum(S1, S2, p=2.0):
    return direct_sum(S1, S2, p)


@_builder("rotate")
def _b_rot(S):
    return rotate(S)


@_builder("diamond")
def _b_diamond(S1, S2):
    return diamond(S1, S2)


@_builder("prefix")
def _b_prefix(S, sizes, p=2.0):
    return prefix_sum_system(S, sizes, p)


@_builder("dkk")
def _b_dkk(X, space, sizes):
    spec = parse_space(space)
    return dkk_system(X, spec, Partition(sizes, spec))


@_builder("almost_greedy")
def _b_ag(B, space="lp:2", K=8):
    return almost_greedy_system(B, space, K)


def _node(expr):
    if isinstance(expr, ast.Call):
        if not isinstance(expr.func, ast.Name) or expr.func.id not in _BUILDERS:
            name = getattr(expr.func, "id", "?")
            raise InvalidParameter(f"unknown constructor {name!r}; known: {sorted(_BUILDERS)}")
        return {
            "op": expr.func.id,
            "args": [_node(a) for a in expr.args],
            "kwargs": {k.arg: _node(k.value) for k in expr.keywords},
        }
    try:
        return ast.literal_eval(expr)
    except ValueError as exc:
        raise InvalidParameter(f"cannot read constructor argument {ast.dump(expr)}") from exc


def parse_tree(text: str) -> dict:
    """Parse e.g. ``diamond(trig(lam=-0.5, N=8), trig(lam=0.5, N=8))``."""
    try:
        expr = ast.parse(text.strip(), mode="eval").body
    except SyntaxError as exc:
        raise InvalidParameter(f"bad constructor expression {text!r}: {exc.msg}") from exc
    return _node(expr)


def tree_text(tree) -> str:
    if isinstance(tree, dict) and "op" in tree:
        args = [tree_text(a) for a in tree["args"]]
        args += [f"{k}={tree_text(v)}" for k, v in tree["kwargs"].items()]
        return f"{tree['op']}({', '.join(args)})"
    return repr(tree)


def build(tree) -> FiniteSystem:
    """Build a system from a constructor tree (dict, JSON text or expression text)."""
    if isinstance(tree, str):
        s = tree.strip()
        tree = json.loads(s) if s.startswith("{") else parse_tree(s)

    def rec(node):
        if isinstance(node, dict) and "op" in node:
            args = [rec(a) for a in node["args"]]
            kwargs = {k: rec(v) for k, v in node["kwargs"].items()}
            return _BUILDERS[node["op"]](*args, **kwargs)
        return node

    S = rec(tree)
    S.tree = tree
    return S
