"""Finite universal gate basis, product approximation search and the
universal-code encoding of unitary matrices."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "V",
    "elementary",
    "enumeration",
    "operator_norm",
    "GateWord",
    "SearchResult",
    "approx_search",
    "phase_aligned_error",
    "product_error_bound",
    "universal_code_decode",
    "encode_word",
    "r_function_eval",
]

_S5 = np.sqrt(5.0)
_V = {
    1: np.array([[1, 2j], [2j, 1]]) / _S5,
    2: np.array([[1, 2], [-2, 1]], dtype=complex) / _S5,
    3: np.array([[1 + 2j, 0], [0, 1 - 2j]]) / _S5,
}
for _i in (1, 2, 3):
    _V[_i + 3] = _V[_i].conj().T
V = {i: m.copy() for i, m in _V.items()}
"""The six 2x2 basis matrices; ``V[i + 3]`` is the inverse of ``V[i]``."""


def elementary(i: int, j: int, d: int) -> np.ndarray:
    """``W_{i,j}``: ``V_i`` acting on the (1-based) coordinates ``j, j+1`` of ``C^d``."""
    if not 1 <= i <= 6:
        raise ValueError(f"gate index i must lie in 1..6, got {i}")
    if not 1 <= j <= d - 1:
        raise ValueError(f"position j must lie in 1..{d - 1}, got {j}")
    W = np.eye(d, dtype=complex)
    W[j - 1:j + 1, j - 1:j + 1] = _V[i]
    return W


def enumeration(d: int) -> list[tuple[int, int]]:
    """The fixed enumeration ``W_0..W_{b-1}`` of the basis, ``b = 6(d-1)``:
    ``i``-major, ``j``-minor."""
    return [(i, j) for i in range(1, 7) for j in range(1, d)]


def operator_norm(A, rtol: float = 1e-10, max_iter: int = 100_000, seed: int = 0) -> float:
    """Largest singular value by power iteration on ``A^dagger A``.

    Falls back to a dense SVD if the iteration has not converged after
    ``max_iter`` steps (nearly degenerate top singular values).
    """
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    if not A.size or not np.any(A):
        return 0.0
    rng = np.random.default_rng(seed)
    x = rng.normal(size=A.shape[1]) + 1j * rng.normal(size=A.shape[1])
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(max_iter):
        y = A.conj().T @ (A @ x)
        new = np.linalg.norm(y)
        if new == 0:
            x = rng.normal(size=A.shape[1]) + 0j
            x /= np.linalg.norm(x)
            continue
        x = y / new
        if abs(new - lam) <= rtol * new:
            return float(np.sqrt(new))
        lam = new
    logger.debug("power iteration did not converge; using SVD")
    return float(np.linalg.norm(A, 2))


@dataclass(frozen=True)
class GateWord:
    """A product ``U_1 U_2 ... U_k`` of basis gates ``(i, j)`` in dimension ``d``."""

    gates: tuple
    d: int

    @cached_property
    def matrix(self) -> np.ndarray:
        M = np.eye(self.d, dtype=complex)
        for i, j in self.gates:
            M = M @ elementary(i, j, self.d)
        return M

    def __len__(self):
        return len(self.gates)


def phase_aligned_error(target, M, phase: bool = True) -> float:
    """``||target - e^{i phi} M||`` with ``phi = arg tr(M^dagger target)``
    (``phi = 0`` when ``phase`` is false)."""
    c = 1.0
    if phase:
        tr = np.trace(M.conj().T @ target)
        c = tr / abs(tr) if abs(tr) > 1e-15 else 1.0
    return operator_norm(target - c * M)


@dataclass
class SearchResult:
    """Outcome of :func:`approx_search`; ``word`` is ``None`` when not found."""

    word: GateWord | None
    error: float
    depth: int
    explored: int
    complete: bool = True

    @property
    def found(self) -> bool:
        return self.word is not None


def _key(M, phase, grid):
    if phase:
        flat = M.reshape(-1)
        k = int(np.argmax(np.abs(flat) > 1e-6))
        M = M * (abs(flat[k]) / flat[k])
    q = np.round(np.concatenate([M.real.ravel(), M.imag.ravel()]) / grid).astype(np.int64)
    return q.tobytes()


def approx_search(target, eps: float, max_depth: int, phase: bool = True,
                  grid: float = 1e-3, max_states: int = 500_000) -> SearchResult:
    """Breadth-first search for a shortest basis word approximating ``target``.

    Words are explored by length; products equal on a ``grid``-quantized,
    phase-normalized key are explored once.  At the first depth containing
    a word within ``eps`` the best such word is returned, its error
    recomputed from the word.  ``complete`` is false if ``max_states`` cut
    the frontier.

    Raises
    ------
    ValueError
        If ``target`` is not unitary within 1e-9.
    """
    T = np.asarray(target, dtype=complex)
    d = T.shape[0]
    if T.shape != (d, d) or d < 2:
        raise ValueError("target must be a square matrix of dimension >= 2")
    if np.abs(T.conj().T @ T - np.eye(d)).max() > 1e-9:
        raise ValueError("target is not unitary")
    gates = enumeration(d)
    mats = [elementary(i, j, d) for i, j in gates]
    err0 = phase_aligned_error(T, np.eye(d), phase)
    if err0 <= eps:
        return SearchResult(GateWord((), d), err0, 0, 1)
    seen = {_key(np.eye(d, dtype=complex), phase, grid)}
    frontier = [((), np.eye(d, dtype=complex))]
    explored = 1
    complete = True
    for depth in range(1, max_depth + 1):
        nxt = []
        best = None
        for word, M in frontier:
            for g, G in zip(gates, mats):
                P = M @ G
                k = _key(P, phase, grid)
                if k in seen:
                    continue
                seen.add(k)
                explored += 1
                w = word + (g,)
                e = phase_aligned_error(T, P, phase)
                if e <= eps and (best is None or e < best[1]):
                    best = (w, e)
                if len(nxt) < max_states:
                    nxt.append((w, P))
                else:
                    complete = False
        if best is not None:
            word = GateWord(best[0], d)
            return SearchResult(word, phase_aligned_error(T, word.matrix, phase), depth, explored, complete)
        frontier = nxt
        logger.debug("depth %d: %d new products", depth, len(nxt))
    return SearchResult(None, float("inf"), max_depth, explored, complete)


def product_error_bound(errors) -> float:
    """Triangle bound ``sum_i eps_i`` on ``||U_1...U_n - V_1...V_n||``."""
    errors = [float(e) for e in errors]
    if any(e < 0 for e in errors):
        raise ValueError("errors must be nonnegative")
    return float(sum(errors))


# ----------------------------------------------------------- universal codes
def _code_shape(bits, d, ell, m):
    b = 6 * (d - 1)
    bits = np.asarray([int(c) for c in bits] if isinstance(bits, str) else bits, dtype=np.int64)
    if m is None:
        m = b - 1
    if m < b - 1:
        raise ValueError(f"m must be at least b - 1 = {b - 1}")
    if ell is None:
        if bits.size % (m + 1):
            raise ValueError(f"{bits.size} bits do not form rows of length {m + 1}")
        ell = bits.size // (m + 1)
    if bits.size != ell * (m + 1):
        raise ValueError(f"expected {ell * (m + 1)} bits, got {bits.size}")
    return bits.reshape(ell, m + 1), b


def universal_code_decode(bits, d: int, ell: int | None = None, m: int | None = None) -> np.ndarray:
    """Unitary ``W(x) = U_l ... U_1`` encoded by ``l`` rows of ``m + 1`` bits.

    Row ``i`` contributes ``v(x_i)``, the number of ones among its first
    ``m`` bits; if its last bit is 1 then ``U_i`` is the basis gate with
    index ``(v(x_1) + ... + v(x_i)) mod b`` in :func:`enumeration`,
    otherwise ``U_i = I``.
    """
    rows, b = _code_shape(bits, d, ell, m)
    gates = enumeration(d)
    W = np.eye(d, dtype=complex)
    s = 0
    for row in rows:
        s = (s + int(row[:-1].sum())) % b
        if row[-1]:
            W = elementary(*gates[s], d) @ W
    return W


def encode_word(word: GateWord, ell: int, m: int | None = None) -> np.ndarray:
    """Universal-code bits whose decoding equals ``word.matrix``."""
    d = word.d
    b = 6 * (d - 1)
    m = b - 1 if m is None else m
    if m < b - 1:
        raise ValueError(f"m must be at least b - 1 = {b - 1}")
    if len(word) > ell:
        raise ValueError(f"word of length {len(word)} does not fit in {ell} rows")
    index = {g: k for k, g in enumerate(enumeration(d))}
    rows = np.zeros((ell, m + 1), dtype=np.int64)
    s = 0
    # W(x) applies U_1 first, so the word is encoded back to front
    for r, g in enumerate(reversed(word.gates)):
        v = (index[g] - s) % b
        rows[r, :v] = 1
        rows[r, m] = 1
        s = index[g]
    return rows.reshape(-1)


def r_function_eval(a_code, b_code, c_code, theta: float, n: int, ell: int | None = None,
                    m: int | None = None) -> int | None:
    """Partial function on three codes for ``A, B, C``: with ``y = CBA|1>``,
    return ``z`` if ``y`` lies within distance ``theta`` of ``V_z`` and
    ``None`` otherwise; ``V_0`` (``V_1``) is spanned by the first (last)
    ``n/2`` basis vectors."""
    if not 0 < theta < 1 / np.sqrt(2):
        raise ValueError("theta must lie in (0, 1/sqrt(2))")
    if n < 2 or n % 2:
        raise ValueError("n must be even and at least 2")
    A, B, C = (universal_code_decode(x, n, ell, m) for x in (a_code, b_code, c_code))
    y = C @ B @ A[:, 0]
    h = n // 2
    dist = (np.linalg.norm(y[h:]), np.linalg.norm(y[:h]))
    for z in (0, 1):
        if dist[z] <= theta:
            return z
    return None
