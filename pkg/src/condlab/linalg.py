"""Dense symmetric / Hermitian linear algebra.

Cholesky factorisation, triangular solves and a cyclic Jacobi eigensolver are
implemented here directly.  Above ``JACOBI_MAX_ORDER`` the eigensolver hands
over to LAPACK (``numpy.linalg.eigh``); the batched pencil routine used by the
subset enumeration engine is LAPACK-backed as well.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NoConvergence, NotPositiveDefinite

PD_RTOL = 1e-13
JACOBI_MAX_ORDER = 192
JACOBI_MAX_SWEEPS = 60


def as_sym(A, check=True):
    """Return ``A`` as a square float/complex array, checking Hermitian symmetry."""
    A = np.asarray(A)
    if A.dtype.kind not in "fc":
        A = A.astype(float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {A.shape}")
    if check:
        scale = max(np.abs(A).max(), 1.0)
        if np.abs(A - A.conj().T).max() > 1e-12 * scale:
            raise ValueError("matrix is not Hermitian")
    return A


def cholesky(A, rtol=PD_RTOL):
    """Lower-triangular ``L`` with ``L @ L.conj().T == A``.

    A pivot at or below ``rtol * max|diag(A)|`` raises NotPositiveDefinite.
    """
    A = as_sym(A)
    n = A.shape[0]
    L = np.zeros_like(A)
    tol = rtol * np.abs(np.diagonal(A)).max()
    for j in range(n):
        col = A[j:, j] - L[j:, :j] @ L[j, :j].conj()
        d = col[0].real
        if not d > tol:
            raise NotPositiveDefinite(j, float(d))
        r = np.sqrt(d)
        L[j, j] = r
        L[j + 1:, j] = col[1:] / r
    return L


def solve_lower(L, B):
    """Forward substitution ``L X = B`` for lower-triangular ``L``."""
    L = np.asarray(L)
    B = np.asarray(B)
    vec = B.ndim == 1
    X = np.array(B.reshape(B.shape[0], -1), dtype=np.result_type(L, B, float))
    for i in range(L.shape[0]):
        if i:
            X[i] -= L[i, :i] @ X[:i]
        X[i] /= L[i, i]
    return X[:, 0] if vec else X


def solve_upper(U, B):
    """Back substitution ``U X = B`` for upper-triangular ``U``."""
    U = np.asarray(U)
    B = np.asarray(B)
    vec = B.ndim == 1
    X = np.array(B.reshape(B.shape[0], -1), dtype=np.result_type(U, B, float))
    n = U.shape[0]
    for i in range(n - 1, -1, -1):
        if i < n - 1:
            X[i] -= U[i, i + 1:] @ X[i + 1:]
        X[i] /= U[i, i]
    return X[:, 0] if vec else X


def solve_spd(A, b):
    """Solve ``A x = b`` for Hermitian positive definite ``A``."""
    L = cholesky(A)
    return solve_upper(L.conj().T, solve_lower(L, b))


def _round_robin(n):
    """Rounds of disjoint index pairs covering every pair once (n even)."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        rounds.append((np.array(players[: n // 2]), np.array(players[n // 2:][::-1])))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(A, tol=None, max_sweeps=JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi for a real symmetric matrix, parallel (round-robin) ordering.

    Each round rotates n/2 disjoint pairs at once.  Rotations whose off-diagonal
    entry is below the current threshold are skipped.  Returns (w, V) unsorted.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if n == 1:
        return A.diagonal().copy(), np.ones((1, 1))
    pad = n % 2
    if pad:
        A = np.pad(A, ((0, 1), (0, 1)))
    m = A.shape[0]
    V = np.eye(m)
    rounds = _round_robin(m)
    fro = np.linalg.norm(A)
    if fro == 0.0:
        return np.zeros(n), np.eye(n)
    eps = tol if tol is not None else 1e-15
    for sweep in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(A.diagonal()))
        if off <= eps * fro:
            break
        thresh = 0.2 * off / m**2 if sweep < 3 else 0.0
        for p, q in rounds:
            apq = A[p, q]
            active = np.abs(apq) > max(thresh, 1e-300)
            if not active.any():
                continue
            p, q, apq = p[active], q[active], apq[active]
            app, aqq = A[p, p], A[q, q]
            theta = (aqq - app) / (2.0 * apq)
            big = np.abs(theta) > 1e150
            safe = np.where(big, 1.0, theta)
            t = np.sign(safe) / (np.abs(safe) + np.sqrt(safe * safe + 1.0))
            t = np.where(big, 0.5 / np.where(big, theta, 1.0), t)
            t[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            Ap, Aq = A[:, p].copy(), A[:, q].copy()
            A[:, p] = c * Ap - s * Aq
            A[:, q] = s * Ap + c * Aq
            Ap, Aq = A[p, :].copy(), A[q, :].copy()
            A[p, :] = c[:, None] * Ap - s[:, None] * Aq
            A[q, :] = s[:, None] * Ap + c[:, None] * Aq
            A[p, q] = 0.0
            A[q, p] = 0.0
            Vp, Vq = V[:, p].copy(), V[:, q].copy()
            V[:, p] = c * Vp - s * Vq
            V[:, q] = s * Vp + c * Vq
    else:
        raise NoConvergence(max_sweeps)
    w = A.diagonal().copy()
    if pad:
        w, V = w[:n], V[:n, :n]
    return w, V


def _complex_from_embedding(w, V, n):
    """Recover Hermitian eigenpairs from the real embedding of order 2n."""
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]
    Z = V[:n] + 1j * V[n:]
    vals, vecs = [], []
    i = 0
    while i < 2 * n:
        j = i + 1
        while j < 2 * n and abs(w[j] - w[i]) <= 1e-9 * max(1.0, abs(w[i])):
            j += 1
        basis = []
        for k in range(i, j):
            z = Z[:, k].copy()
            for b in basis:
                z -= (b.conj() @ z) * b
            nz = np.linalg.norm(z)
            if nz > 1e-6:
                basis.append(z / nz)
        need = (j - i) // 2
        basis = basis[:need]
        vals.extend([w[i:j].mean()] * len(basis))
        vecs.extend(basis)
        i = j
    return np.array(vals), np.column_stack(vecs)


def sym_eig(A, method="auto"):
    """Eigen-decomposition of a Hermitian matrix.

    Returns eigenvalues in descending order and orthonormal eigenvectors as
    columns.  ``method`` is ``"jacobi"``, ``"lapack"`` or ``"auto"`` (Jacobi up
    to ``JACOBI_MAX_ORDER``).  Complex input goes through the real symmetric
    embedding ``[[Re, -Im], [Im, Re]]``.
    """
    A = as_sym(A)
    n = A.shape[0]
    if method == "auto":
        method = "jacobi" if n <= JACOBI_MAX_ORDER else "lapack"
    if method == "lapack":
        w, V = np.linalg.eigh(A)
        return w[::-1].copy(), V[:, ::-1].copy()
    if method != "jacobi":
        raise ValueError(f"unknown method {method!r}")
    if np.iscomplexobj(A) and np.abs(A.imag).max() > 0:
        E = np.block([[A.real, -A.imag], [A.imag, A.real]])
        w, V = jacobi_eigh(E)
        return _complex_from_embedding(w, V, n)
    w, V = jacobi_eigh(A.real)
    order = np.argsort(w)[::-1]
    return w[order], V[:, order]


def gen_sym_eig_max(M, G, return_vector=False, method="auto"):
    """Largest ``lam`` with ``M v = lam G v`` (G positive definite).

    Reduced through ``G = L L*`` to the standard problem for ``L^-1 M L^-*``.
    With ``return_vector`` the maximiser ``v`` (normalised so ``v* G v = 1``)
    is returned as well.
    """
    M = as_sym(M)
    G = as_sym(G)
    if M.shape != G.shape:
        raise DimensionMismatch(f"pencil shapes differ: {M.shape} vs {G.shape}")
    L = cholesky(G)
    Y = solve_lower(L, M)
    C = solve_lower(L, Y.conj().T).conj().T
    C = 0.5 * (C + C.conj().T)
    if not return_vector:
        if C.shape[0] == 1:
            return float(C[0, 0].real)
        w, _ = sym_eig(C, method=method)
        return float(w[0])
    w, Z = sym_eig(C, method=method)
    v = solve_upper(L.conj().T, Z[:, 0])
    return float(w[0]), v


def gen_sym_eig_max_batch(M, G):
    """Batched largest pencil eigenvalue for stacks of shape (k, n, n); LAPACK."""
    M = np.asarray(M, dtype=float)
    G = np.asarray(G, dtype=float)
    L = np.linalg.cholesky(G)
    Linv = np.linalg.inv(L)
    C = Linv @ M @ np.swapaxes(Linv, -1, -2)
    C = 0.5 * (C + np.swapaxes(C, -1, -2))
    return np.linalg.eigvalsh(C)[..., -1]
