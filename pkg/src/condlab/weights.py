"""Power weight ``|t|**lam`` on [-1/2, 1/2]: Fourier coefficients, Gram matrices
of the trigonometric systems, and the explicit norms built from them.

Quadrature layout for the coefficients: composite 16-point Gauss-Legendre
panels, four per period of ``cos(2 pi n t)``.  With panels of width 1/(4n)
the nodes land at ``t = (k + x_i)/(4n)``, so ``cos(2 pi n t)`` only depends on
``k mod 4`` and the node.  Every panel sum therefore factors as
``(4n)**(-1-lam) * P_k`` with ``P_k`` independent of ``n``, and a single prefix
sum over ``k`` yields the whole table.  The first panel (endpoint singularity
of ``t**lam``) is handled by the substitution ``u = s**(1/(1+lam))`` plus
geometric grading toward ``s = 0``.
"""
from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, InvalidExponent, InvalidParameter

DEFAULT_TOL = 1e-10
MIN_TOL = 1e-13
GL_POINTS = 16
CACHE_ENV = "CONDLAB_CACHE_DIR"


@lru_cache(maxsize=None)
def _gauss01(npts=GL_POINTS):
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


def _graded_panels(ratio, levels):
    """Panel edges 0 < ratio**levels < ... < ratio < 1 on [0, 1]."""
    edges = np.concatenate([[0.0], ratio ** np.arange(levels, -1, -1, dtype=float)])
    return edges[:-1], edges[1:]


def _graded_integral(func, ratio=0.15, levels=20):
    """Integral over [0, 1] of a function with a weak singularity at 0."""
    x, w = _gauss01()
    lo, hi = _graded_panels(ratio, levels)
    h = hi - lo
    pts = lo[:, None] + h[:, None] * x[None, :]
    return float(np.sum(h[:, None] * w[None, :] * func(pts)))


@dataclass(frozen=True)
class WeightParams:
    """Exponent of the power weight with the derived Hilbertian/Besselian indices."""

    lam: float

    def __post_init__(self):
        if not -1.0 < self.lam < 1.0:
            raise InvalidExponent(f"weight exponent must satisfy |lambda| < 1, got {self.lam}")

    @property
    def alpha(self):
        return abs(self.lam)

    @property
    def q_alpha(self):
        return 2.0 / (1.0 + self.alpha)

    @property
    def r_alpha(self):
        return 2.0 / (1.0 - self.alpha)


def _params(p):
    return p if isinstance(p, WeightParams) else WeightParams(float(p))


def _check_tol(tol):
    if not tol >= MIN_TOL:
        raise InvalidParameter(f"quadrature tolerance must be >= {MIN_TOL}, got {tol}")


@lru_cache(maxsize=64)
def _first_panel(lam):
    """Integral over [0, 1] of ``u**lam * cos(pi u / 2)``.

    Substituting ``u = s**p`` with ``p = 1/(1+lam)`` turns the integrand into
    ``p * cos(pi s**p / 2)``, which is bounded; grading handles what is left of
    the singularity when ``p`` is not an integer.
    """
    p = 1.0 / (1.0 + lam)
    return p * _graded_integral(lambda s: np.cos(0.5 * np.pi * s**p))


def _panel_sums(lam, kmax):
    """``P_k`` for k = 1..kmax-1: panel [k, k+1] of ``u**lam cos(pi u / 2)``."""
    x, w = _gauss01()
    k = np.arange(1, kmax, dtype=float)
    u = k[:, None] + x[None, :]
    half = 0.5 * np.pi * x
    # cos(pi (k + x) / 2) cycles through cos, -sin, -cos, sin with k mod 4
    patterns = np.stack([np.cos(half), -np.sin(half), -np.cos(half), np.sin(half)])
    c = patterns[np.arange(1, kmax) % 4]
    return np.sum(w[None, :] * u**lam * c, axis=1)


def _coeffs_by_panels(lam, N):
    out = np.empty(N + 1)
    out[0] = 2.0 * 0.5 ** (1.0 + lam) / (1.0 + lam)
    if N == 0:
        return out
    P = _panel_sums(lam, 2 * N)
    F = np.concatenate([[0.0], np.cumsum(P)])  # F[j] = P_1 + ... + P_j
    n = np.arange(1, N + 1)
    out[1:] = 2.0 * (4.0 * n) ** (-1.0 - lam) * (_first_panel(lam) + F[2 * n - 1])
    return out


def weight_fourier_coeff(params, n, tol=DEFAULT_TOL):
    """``2 * int_0^{1/2} t**lam cos(2 pi n t) dt``, the n-th Fourier coefficient."""
    params = _params(params)
    _check_tol(tol)
    n = abs(int(n))
    if params.lam == 0.0:
        return 1.0 if n == 0 else 0.0
    return float(_coeffs_by_panels(params.lam, n)[n])


@dataclass(frozen=True)
class WeightFourierTable:
    """Coefficients ``w_hat(n)`` for 0 <= n <= max_index (even extension implied)."""

    params: WeightParams
    max_index: int
    coeffs: np.ndarray = field(repr=False)
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        self.coeffs.setflags(write=False)

    def __getitem__(self, n):
        return self.coeffs[np.abs(n)]

    def header(self):
        return f"lambda={self.params.lam!r},N={self.max_index},tol={self.tol!r}"

    def to_csv(self):
        lines = [self.header()]
        lines += [f"{n},{v:.17g}" for n, v in enumerate(self.coeffs)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text):
        lines = text.strip().splitlines()
        meta = dict(item.split("=", 1) for item in lines[0].split(","))
        N = int(meta["N"])
        vals = np.empty(N + 1)
        for line in lines[1:]:
            n, v = line.split(",")
            vals[int(n)] = float(v)
        if len(lines) - 1 != N + 1:
            raise ValueError(f"table file lists {len(lines) - 1} rows, header says {N + 1}")
        return cls(WeightParams(float(meta["lambda"])), N, vals, float(meta["tol"]))


def build_table(params, N, tol=DEFAULT_TOL):
    params = _params(params)
    _check_tol(tol)
    if params.lam == 0.0:
        vals = np.zeros(N + 1)
        vals[0] = 1.0
    else:
        vals = _coeffs_by_panels(params.lam, N)
    return WeightFourierTable(params, int(N), vals, float(tol))


_MEMO: dict = {}


def _cache_path(params, N, tol):
    root = os.environ.get(CACHE_ENV)
    if not root:
        return None
    return Path(root) / f"wcoef_lam{params.lam!r}_N{N}_tol{tol!r}.csv"


def get_table(params, N, tol=DEFAULT_TOL):
    """Table covering indices 0..N, memoised in-process and on disk when
    ``CONDLAB_CACHE_DIR`` is set.  Tables are immutable; a larger memoised
    table is sliced rather than rebuilt."""
    params = _params(params)
    N = int(N)
    key = (params.lam, float(tol))
    held = _MEMO.get(key)
    if held is not None and held.max_index >= N:
        if held.max_index == N:
            return held
        return WeightFourierTable(params, N, held.coeffs[: N + 1].copy(), held.tol)
    path = _cache_path(params, N, tol)
    if path is not None and path.exists():
        table = WeightFourierTable.from_csv(path.read_text())
    else:
        table = build_table(params, N, tol)
        if path is not None:
            from .io import atomic_write_text

            path.parent.mkdir(parents=True, exist_ok=True)
            atomic_write_text(path, table.to_csv())
    _MEMO[key] = table
    return table


# -- the oscillatory integral route -----------------------------------------


@lru_cache(maxsize=64)
def _first_unit_interval(alpha):
    """Integral over [0, 1] of ``cos(pi x) x**-alpha``, via ``x = s**(1/(1-alpha))``."""
    p = 1.0 / (1.0 - alpha)
    return p * _graded_integral(lambda s: np.cos(np.pi * s**p), ratio=0.1, levels=16)


def oscillatory_partial_integrals(alpha, nmax):
    """``A_n = int_0^n cos(pi x) x**-alpha dx`` for n = 1..nmax (unit intervals)."""
    x, w = _gauss01()
    k = np.arange(2, nmax + 1, dtype=float)
    pts = (k - 1.0)[:, None] + x[None, :]
    pieces = np.sum(w[None, :] * np.cos(np.pi * pts) * pts ** (-alpha), axis=1)
    return np.cumsum(np.concatenate([[_first_unit_interval(alpha)], pieces]))


def coeffs_via_oscillatory(alpha, nmax):
    """``w_hat_{-alpha}(n) = 2**alpha n**(alpha-1) A_n`` for n = 1..nmax."""
    n = np.arange(1, nmax + 1, dtype=float)
    return 2.0**alpha * n ** (alpha - 1.0) * oscillatory_partial_integrals(alpha, nmax)


@dataclass(frozen=True)
class AlternatingTail:
    """Quantities from the optimality argument for the secondary index.

    ``oscillatory`` is the integral ``int_0^n cos(pi x)/x**alpha dx``;
    ``convolution`` the sum ``sum_k k**(-(1+alpha)/2) (1+n-k)**(alpha-1)``
    bracketed by ``beta_integral`` (B_n) and ``beta_integral - remainder``.
    """

    alpha: float
    n: int
    oscillatory: float
    convolution: float
    beta_integral: float
    remainder: float

    @property
    def lower_bracket_holds(self):
        """convolution <= B_n (the sum under-estimates the integral)."""
        return self.convolution <= self.beta_integral

    @property
    def upper_bracket_holds(self):
        """B_n <= convolution + remainder; measured to fail for n >= 10."""
        if self.n < 2:
            return True
        return self.beta_integral <= self.convolution + self.remainder


def convolution_sum(alpha, n):
    k = np.arange(1, n + 1, dtype=float)
    return float(np.sum(k ** (-(1.0 + alpha) / 2.0) * (1.0 + n - k) ** (alpha - 1.0)))


def beta_integral(alpha, n):
    a = (1.0 - alpha) / 2.0
    beta = math.exp(math.lgamma(a) + math.lgamma(alpha) - math.lgamma(a + alpha))
    return beta * n ** (-a)


def tail_remainder(alpha, n):
    if n < 2:
        return math.nan
    return (
        -(n ** (alpha - 1.0))
        - n ** (-(1.0 + alpha) / 2.0)
        + (2.0 / (1.0 - alpha)) * (n - 1.0) ** (alpha - 1.0)
        + (1.0 / alpha) * (n - 1.0) ** (-(1.0 + alpha) / 2.0)
    )


def alternating_tail(alpha, n):
    if not 0.0 < alpha < 1.0:
        raise InvalidExponent(f"alpha must lie in (0, 1), got {alpha}")
    if n < 1:
        raise InvalidParameter("n must be >= 1")
    return AlternatingTail(
        alpha=float(alpha),
        n=int(n),
        oscillatory=float(oscillatory_partial_integrals(alpha, n)[-1]),
        convolution=convolution_sum(alpha, n),
        beta_integral=beta_integral(alpha, n),
        remainder=tail_remainder(alpha, n),
    )


# -- arrangements and Gram matrices -------------------------------------------


class Arrangement(str, enum.Enum):
    RAW = "raw"          # tau_n, n = -m..m in increasing frequency
    COMPLEX = "complex"  # phi_{2n} = tau_{-n}, phi_{2n+1} = tau_{n+1}
    REAL = "real"        # 1, cos, sin, cos, sin, ...


def frequencies(arrangement, N):
    """Frequency of each index for the complex arrangements."""
    arrangement = Arrangement(arrangement)
    idx = np.arange(N)
    if arrangement is Arrangement.RAW:
        return idx - (N - 1) // 2
    if arrangement is Arrangement.COMPLEX:
        return np.where(idx % 2 == 1, (idx + 1) // 2, -(idx // 2))
    raise ValueError("the real arrangement has no single frequency per index")


def real_complex_transform(N):
    """Change of basis between the real and complex natural arrangements.

    Returns ``(C, C_inv)`` where column j of C expresses ``phi^R_j`` in the
    complex natural system: ``phi^R_{2k-1} = (phi_{2k-1} + phi_{2k})/2`` and
    ``phi^R_{2k} = (phi_{2k-1} - phi_{2k})/(2i)``.
    """
    if N < 1 or N % 2 == 0:
        raise DimensionMismatch(f"the transform needs an odd dimension, got {N}")
    C = np.zeros((N, N), dtype=complex)
    Cinv = np.zeros((N, N), dtype=complex)
    C[0, 0] = Cinv[0, 0] = 1.0
    for k in range(1, (N - 1) // 2 + 1):
        c, s = 2 * k - 1, 2 * k
        C[c, c], C[s, c] = 0.5, 0.5
        C[c, s], C[s, s] = 0.5 / 1j, -0.5 / 1j
        # phi_{2k-1} = phi^R_{2k-1} + i phi^R_{2k}, phi_{2k} = phi^R_{2k-1} - i phi^R_{2k}
        Cinv[c, c], Cinv[s, c] = 1.0, 1j
        Cinv[c, s], Cinv[s, s] = 1.0, -1j
    return C, Cinv


def _table_for(params, span, table):
    if table is not None:
        if table.max_index < span:
            raise DimensionMismatch(f"table covers |n| <= {table.max_index}, need {span}")
        return table
    return get_table(params, span)


def gram_matrix(params, N, arrangement=Arrangement.COMPLEX, table=None):
    """Gram matrix of the first N functions of the arrangement in ``H_lam``.

    Entry (j, k) is ``<phi_k, phi_j> = w_hat(freq(k) - freq(j))`` for the
    complex arrangements.  The real arrangement is obtained as ``C* G C``
    with the cos/sin change of basis (dimension rounded up to odd, then cut).
    Since the weight is even, every Gram matrix here is real symmetric.
    """
    params = _params(params)
    arrangement = Arrangement(arrangement)
    if N < 1:
        raise DimensionMismatch("N must be >= 1")
    if arrangement is Arrangement.REAL:
        Nodd = N if N % 2 else N + 1
        Gc = gram_matrix(params, Nodd, Arrangement.COMPLEX, table)
        C, _ = real_complex_transform(Nodd)
        G = (C.conj().T @ Gc @ C).real
        G = 0.5 * (G + G.T)
        return G[:N, :N].copy()
    f = frequencies(arrangement, N)
    diff = f[None, :] - f[:, None]
    tab = _table_for(params, int(np.abs(diff).max()), table)
    return np.array(tab[diff], dtype=float)


def real_gram_direct(params, N, table=None):
    """Real-arrangement Gram from the product-to-sum formulas (cross-check)."""
    params = _params(params)
    K = N // 2 + 1
    tab = _table_for(params, 2 * K, table)
    G = np.zeros((N, N))
    kind = ["one"] + ["cos" if j % 2 else "sin" for j in range(1, N)]
    freq = [0] + [(j + 1) // 2 for j in range(1, N)]
    for a in range(N):
        for b in range(N):
            ka, kb, fa, fb = kind[a], kind[b], freq[a], freq[b]
            if ka == "one" and kb == "one":
                G[a, b] = tab[0]
            elif ka != kb and "sin" in (ka, kb):
                G[a, b] = 0.0
            elif ka == "one" or kb == "one":
                G[a, b] = tab[fa + fb]
            elif ka == "cos":
                G[a, b] = 0.5 * (tab[fa - fb] + tab[fa + fb])
            else:
                G[a, b] = 0.5 * (tab[fa - fb] - tab[fa + fb])
    return G


def to_raw(coeffs, arrangement):
    """Coefficients of the same function on consecutive frequencies -K..K."""
    a = np.asarray(coeffs)
    arrangement = Arrangement(arrangement)
    if arrangement is Arrangement.RAW:
        return a
    N = a.shape[0]
    if arrangement is Arrangement.REAL:
        Nodd = N if N % 2 else N + 1
        b = np.zeros(Nodd, dtype=complex)
        b[:N] = a
        K = (Nodd - 1) // 2
        out = np.zeros(2 * K + 1, dtype=complex)
        out[K] = b[0]
        k = np.arange(1, K + 1)
        cos, sin = b[2 * k - 1], b[2 * k]
        out[K + k] = 0.5 * cos + sin / 2j
        out[K - k] = 0.5 * cos - sin / 2j
        return out
    f = frequencies(arrangement, N)
    K = int(np.abs(f).max())
    out = np.zeros(2 * K + 1, dtype=np.result_type(a, float))
    out[f + K] = a
    return out


def h_norm(params, coeffs, arrangement=Arrangement.RAW, table=None):
    """``||sum_n a_n phi_n||`` in ``H_lam``.

    The quadratic form is evaluated through its Toeplitz structure,
    ``sum_d w_hat(d) sum_n conj(a_n) a_{n+d}``, on the raw frequency
    coefficients, without forming a Gram matrix.
    """
    params = _params(params)
    a = to_raw(coeffs, arrangement)
    N = a.shape[0]
    tab = _table_for(params, N - 1, table)
    corr = np.correlate(a, a, mode="full")  # index N-1+d holds sum a_{n+d} conj(a_n)
    d = np.arange(-(N - 1), N)
    val = np.sum(tab[d] * corr).real
    return math.sqrt(max(float(val), 0.0))


def dirichlet_norm(params, m, table=None):
    """``||D_m||`` with ``D_m = sum_{|n|<=m} tau_n``:
    ``sqrt(sum_{|j|<=2m} (2m+1-|j|) w_hat(j))``."""
    params = _params(params)
    m = int(m)
    tab = _table_for(params, 2 * m, table)
    j = np.arange(1, 2 * m + 1)
    val = (2 * m + 1) * tab[0] + 2.0 * np.dot(2 * m + 1 - j, tab.coeffs[1 : 2 * m + 1])
    return math.sqrt(val)


def harmonic(m):
    return float(np.sum(1.0 / np.arange(1, int(m) + 1)))


def fm_coefficients(alpha, m):
    n = np.arange(1, int(m) + 1, dtype=float)
    return n ** (-(1.0 + alpha) / 2.0)


def fm_norm(alpha, m, table=None):
    """``||f_m||`` in ``H_{-alpha}``, ``f_m = sum_{n<=m} n**(-1/q_alpha) tau_n``."""
    if not 0.0 < alpha < 1.0:
        raise InvalidExponent(f"alpha must lie in (0, 1), got {alpha}")
    c = fm_coefficients(alpha, m)
    return h_norm(WeightParams(-alpha), c, Arrangement.RAW, table)


def fm_norm_series(alpha, M, table=None):
    """``||f_m||`` for m = 1..M, built incrementally in O(M^2):
    ``||f_m||^2 = ||f_{m-1}||^2 + c_m^2 w(0) + 2 c_m sum_{n<m} c_n w(m-n)``."""
    if not 0.0 < alpha < 1.0:
        raise InvalidExponent(f"alpha must lie in (0, 1), got {alpha}")
    M = int(M)
    params = WeightParams(-alpha)
    tab = _table_for(params, M, table).coeffs
    c = fm_coefficients(alpha, M)
    sq = np.empty(M)
    acc = 0.0
    for m in range(1, M + 1):
        cm = c[m - 1]
        cross = np.dot(c[: m - 1], tab[m - 1:0:-1]) if m > 1 else 0.0
        acc += cm * cm * tab[0] + 2.0 * cm * cross
        sq[m - 1] = acc
    return np.sqrt(sq)
