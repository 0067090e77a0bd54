"""Function oracles and explicit program constructions.

Variable conventions (0-based):

* PERM_n, DET_Z2: matrix entry ``x_{j,k}`` is variable ``j*n + k`` (rowwise).
* DISJ_n, IP_n: pairs ``(x_{2i}, x_{2i+1})``.
* IND_n: ``x_0..x_{n-1}`` are variables ``0..n-1``, ``y_0..y_{l-1}`` follow;
  ``|y| = sum_i y_i 2^i``.
* ISA_n: ``y_0..y_{k-1}`` are variables ``0..k-1``, ``x_0..x_{n-1}`` follow;
  binary numbers are least significant bit first.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import BranchingProgram, Edge, Node, ProgramBuilder, all_assignments
from .transforms import _renumbered

logger = logging.getLogger(__name__)

__all__ = [
    "FunctionOracle",
    "oracle",
    "perm_oracle",
    "disj_oracle",
    "ip_oracle",
    "ind_oracle",
    "isa_oracle",
    "det_z2_oracle",
    "xor_oracle",
    "literal_oracle",
    "r_partial_oracle",
    "first_primes",
    "fig1_example",
    "linear_obdd",
    "perm_component",
    "perm_qobdd",
    "ind_zero_error_qobdd",
    "gm_exact_obdd",
    "isa_tree",
    "reversible_tree",
    "min_reversible_obdd",
    "parity_obdd",
]

INV_SQRT2 = 1 / math.sqrt(2)


# ------------------------------------------------------------------- oracles
@dataclass(frozen=True)
class FunctionOracle:
    """A boolean function given by an evaluation rule.

    ``fn`` maps a 0/1 integer array of length ``n_vars`` to 0, 1 or ``None``
    (outside the domain of a partial function).
    """

    name: str
    n_vars: int
    fn: Callable = field(repr=False, compare=False)
    params: tuple = ()

    def __call__(self, bits) -> int | None:
        a = np.asarray([int(c) for c in bits] if isinstance(bits, str) else bits, dtype=np.int64)
        if a.size != self.n_vars:
            raise ValueError(f"{self.name} expects {self.n_vars} bits, got {a.size}")
        v = self.fn(a)
        return None if v is None else int(v)

    @property
    def is_total(self) -> bool:
        return self.name != "R_PARTIAL"

    def truth_table(self) -> np.ndarray:
        """Values over all assignments (index bit ``j`` = variable ``j``); -1 marks undefined."""
        out = np.empty(2 ** self.n_vars, dtype=np.int64)
        for i, a in enumerate(all_assignments(self.n_vars)):
            v = self.fn(a)
            out[i] = -1 if v is None else int(v)
        return out


def _log2_exact(n: int, what: str) -> int:
    if n < 1 or n & (n - 1):
        raise ValueError(f"{what}: n must be a power of two, got {n}")
    return n.bit_length() - 1


def _perm(n):
    def fn(a):
        X = a.reshape(n, n)
        return int(np.all(X.sum(axis=0) == 1) and np.all(X.sum(axis=1) == 1))
    return fn


def perm_oracle(n: int) -> FunctionOracle:
    """PERM_n: the n x n matrix is a permutation matrix."""
    return FunctionOracle("PERM", n * n, _perm(n), (n,))


def _check_even(n):
    if n < 2 or n % 2:
        raise ValueError(f"n must be even and positive, got {n}")


def disj_oracle(n: int) -> FunctionOracle:
    """DISJ_n = AND_i (not x_{2i} or not x_{2i+1})."""
    _check_even(n)
    return FunctionOracle("DISJ", n, lambda a: int(not np.any(a[0::2] & a[1::2])), (n,))


def ip_oracle(n: int) -> FunctionOracle:
    """IP_n = XOR_i x_{2i} x_{2i+1}."""
    _check_even(n)
    return FunctionOracle("IP", n, lambda a: int(np.sum(a[0::2] & a[1::2]) % 2), (n,))


def _binary(bits) -> int:
    return int(sum(int(b) << i for i, b in enumerate(bits)))


def ind_oracle(n: int) -> FunctionOracle:
    """IND_n(x, y) = x_{|y|}."""
    ell = _log2_exact(n, "IND")
    return FunctionOracle("IND", n + ell, lambda a: int(a[_binary(a[n:])]), (n,))


def isa_oracle(n: int) -> FunctionOracle:
    """Indirect storage access ISA_n."""
    k = _log2_exact(n, "ISA")
    if k == 0:
        raise ValueError("ISA needs n >= 2")
    b = n // k

    def fn(a):
        s = _binary(a[:k])
        if s >= b:
            return 0
        t = _binary(a[k + s * k: k + s * k + k])
        return int(a[k + t])
    return FunctionOracle("ISA", n + k, fn, (n,))


def _det_gf2(M: np.ndarray) -> int:
    M = M.copy() % 2
    n = M.shape[0]
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r, c]), None)
        if piv is None:
            return 0
        M[[c, piv]] = M[[piv, c]]
        for r in range(c + 1, n):
            if M[r, c]:
                M[r] ^= M[c]
    return 1


def det_z2_oracle(n: int) -> FunctionOracle:
    """Determinant over Z_2 of an n x n matrix (rowwise variables)."""
    return FunctionOracle("DET_Z2", n * n, lambda a: _det_gf2(a.reshape(n, n)), (n,))


def xor_oracle(n: int) -> FunctionOracle:
    """Parity of n bits."""
    return FunctionOracle("XOR", n, lambda a: int(a.sum() % 2), (n,))


def literal_oracle(n: int, i: int, negated: bool = False) -> FunctionOracle:
    """The function x_i (or its complement) on n variables."""
    return FunctionOracle("LITERAL", n, lambda a: int(a[i]) ^ int(negated), (n, i, negated))


def r_partial_oracle(n: int, ell: int, m: int, theta: float) -> FunctionOracle:
    """Partial function R on three universal codes (variables a, b, c in that order)."""
    from .gateset import r_function_eval

    size = ell * (m + 1)

    def fn(a):
        return r_function_eval(a[:size], a[size:2 * size], a[2 * size:], theta, n, ell, m)
    return FunctionOracle("R_PARTIAL", 3 * size, fn, (n, ell, m, theta))


_ORACLES = {
    "PERM": perm_oracle,
    "DISJ": disj_oracle,
    "IP": ip_oracle,
    "IND": ind_oracle,
    "ISA": isa_oracle,
    "DET_Z2": det_z2_oracle,
    "XOR": xor_oracle,
}


def oracle(name: str, n: int) -> FunctionOracle:
    """Look up an oracle by name (case-insensitive)."""
    key = name.upper().replace("-", "_")
    if key == "PARITY":
        key = "XOR"
    if key not in _ORACLES:
        raise ValueError(f"unknown function {name!r}; choose from {sorted(_ORACLES)}")
    return _ORACLES[key](n)


def natural_order(orc: FunctionOracle) -> list[int]:
    return list(range(orc.n_vars))


# ------------------------------------------------------------------- helpers
def first_primes(m: int) -> list[int]:
    """The ``m`` smallest primes (sieve of Eratosthenes)."""
    if m <= 0:
        return []
    limit = max(16, int(m * (math.log(m + 1) + math.log(math.log(m + 3)) + 3)))
    while True:
        sieve = np.ones(limit + 1, dtype=bool)
        sieve[:2] = False
        for p in range(2, int(limit ** 0.5) + 1):
            if sieve[p]:
                sieve[p * p::p] = False
        primes = np.flatnonzero(sieve)
        if len(primes) >= m:
            return [int(p) for p in primes[:m]]
        limit *= 2


def _program(n_vars, nodes, edges, start, mode="quantum", k=None):
    """Build from keyed nodes/edges keeping only reachable nodes."""
    return _renumbered(n_vars, nodes, edges, start, mode, k)


# --------------------------------------------------------------------- fig. 1
def fig1_example() -> BranchingProgram:
    """Six-node QBP from the introductory example (a reconstruction).

    Nodes ``v1..v6`` have ids ``0..5``; ``v1`` tests ``x_1`` (variable 0),
    ``v2, v3, v4`` test ``x_2``, ``v5`` is the 0-sink and ``v6`` the 1-sink.
    For ``x_1 = 0`` the start moves to ``(v2 + v3)/sqrt 2``, and for
    ``x_2 = 0`` this superposition interferes into ``v6``.  The columns not
    fixed by that story are completed so that the program is well formed and
    unidirectional.  It computes ``not x_1`` when ``x_2 = 0`` and outputs a
    fair coin when ``x_2 = 1``.
    """
    s = INV_SQRT2
    nodes = [Node(0, var=0), Node(1, var=1), Node(2, var=1), Node(3, var=1),
             Node(4, sink="0"), Node(5, sink="1")]
    edges = [
        Edge(0, 1, 0, s), Edge(0, 2, 0, s),
        Edge(0, 1, 1, s), Edge(0, 2, 1, -s),
        Edge(1, 4, 0, s), Edge(1, 5, 0, s), Edge(1, 3, 1, 1.0),
        Edge(2, 4, 0, -s), Edge(2, 5, 0, s), Edge(2, 4, 1, 1.0),
        Edge(3, 0, 0, 1.0), Edge(3, 5, 1, 1.0),
    ]
    return BranchingProgram(2, tuple(nodes), tuple(edges), 0, "quantum")


# ------------------------------------------------------------- DISJ and IP
def linear_obdd(f: str, n: int) -> BranchingProgram:
    """Reduced deterministic OBDD for DISJ_n or IP_n in the natural order.

    Level ``2i`` stores the value accumulated over the first ``i`` pairs;
    level ``2i+1`` additionally remembers ``x_{2i}``.
    """
    _check_even(n)
    f = f.upper()
    if f not in ("DISJ", "IP"):
        raise ValueError("linear_obdd supports DISJ and IP")
    half = n // 2
    nodes, edges = [], []
    nodes.append((("S", 0), None, "0", None))
    nodes.append((("S", 1), None, "1", None))

    def A(i, p):
        if i == half:
            return ("S", 1) if f == "DISJ" else ("S", p)
        return ("A", i, p)

    parities = (0,) if f == "DISJ" else (0, 1)
    for i in range(half):
        for p in parities:
            nodes.append((("A", i, p), 2 * i, None, None))
            nodes.append((("B", i, p), 2 * i + 1, None, None))
            edges.append((("A", i, p), A(i + 1, p), 0, 1.0))
            edges.append((("A", i, p), ("B", i, p), 1, 1.0))
            edges.append((("B", i, p), A(i + 1, p), 0, 1.0))
            dst = ("S", 0) if f == "DISJ" else A(i + 1, 1 - p)
            edges.append((("B", i, p), dst, 1, 1.0))
    nodes.sort(key=lambda t: (t[0][0] != "A" and t[0][0] != "B", t[0]))
    return _program(n, nodes, edges, A(0, 0), "det")


def gm_exact_obdd(f: str, n: int) -> BranchingProgram:
    """Exact gm-QOBDD with ``k = 4`` for DISJ_n or IP_n.

    Each pair ``(x_{2i}, x_{2i+1})`` uses ``A`` (tests ``x_{2i}``), ``C``
    (reached on 0, forgets ``x_{2i+1}``) and ``B`` (reached on 1).  ``C`` and
    ``B`` share a 0-successor, so they go to different measurement classes:
    ``A, C`` in class 2 and ``B`` in class 3.  Every sink has a single
    predecessor node.
    """
    _check_even(n)
    f = f.upper()
    if f not in ("DISJ", "IP"):
        raise ValueError("gm_exact_obdd supports DISJ and IP")
    half = n // 2
    parities = (0,) if f == "DISJ" else (0, 1)
    nodes, edges = [], []
    sinks = []

    def target(i, p, src):
        if i < half:
            return ("A", i, p)
        label = "1" if f == "DISJ" else str(p)
        key = ("S", src, label)
        sinks.append((key, None, label, None))
        return key

    for i in range(half):
        for p in parities:
            a, c, b = ("A", i, p), ("C", i, p), ("B", i, p)
            nodes.append((a, 2 * i, None, 2))
            nodes.append((c, 2 * i + 1, None, 2))
            nodes.append((b, 2 * i + 1, None, 3))
            edges.append((a, c, 0, 1.0))
            edges.append((a, b, 1, 1.0))
            tc = target(i + 1, p, c)
            edges.append((c, tc, 0, 1.0))
            edges.append((c, tc, 1, 1.0))
            edges.append((b, target(i + 1, p, b), 0, 1.0))
            if f == "DISJ":
                key = ("S", b, "0")
                sinks.append((key, None, "0", None))
                edges.append((b, key, 1, 1.0))
            else:
                edges.append((b, target(i + 1, 1 - p, b), 1, 1.0))
    # sinks may be requested twice with the same key; keep first occurrence
    return _program(n, nodes + sinks, edges, ("A", 0, 0), "gm", 4)


# ---------------------------------------------------------------------- PERM
def _perm_component_parts(p: int, n: int, tag):
    """Nodes/edges of the reversible component for prime ``p``.

    State ``(pos, found, sigma)``: ``pos`` is the index of the next variable,
    ``found`` whether the current row already has a 1, ``sigma`` the running
    value of ``sum_j |x_j| - (2^n - 1)`` mod ``p``.  Each rejecting edge
    leads to its own 0-sink.
    """
    nn = n * n
    start = (tag, 0, 0, (-(2 ** n - 1)) % p)
    nodes, edges = [], []
    frontier = [start]
    seen = {start}
    while frontier:
        nxt = []
        for node in frontier:
            _, pos, found, sigma = node
            j, k = divmod(pos, n)
            nodes.append((node, pos, None, None))
            for b in (0, 1):
                if found and b:
                    dst = (tag, "rej", node, b)
                    nodes.append((dst, None, "0", None))
                    edges.append((node, dst, b, 1.0))
                    continue
                f2 = found | b
                s2 = (sigma + b * pow(2, k, p)) % p
                if k == n - 1:
                    if not f2:
                        dst = (tag, "rej", node, b)
                        nodes.append((dst, None, "0", None))
                        edges.append((node, dst, b, 1.0))
                        continue
                    f2 = 0
                if pos + 1 == nn:
                    label = "1" if s2 == 0 else "0"
                    dst = (tag, "end", node, b)
                    nodes.append((dst, None, label, None))
                    edges.append((node, dst, b, 1.0))
                    continue
                dst = (tag, pos + 1, f2, s2)
                edges.append((node, dst, b, 1.0))
                if dst not in seen:
                    seen.add(dst)
                    nxt.append(dst)
        frontier = nxt
    return start, nodes, edges


def perm_component(p: int, n: int) -> BranchingProgram:
    """Reversible deterministic OBDD checking rows and the sum test mod ``p``.

    It accepts iff every row of the rowwise-read matrix has exactly one 1
    and ``sum_j |x_j| = 2^n - 1`` modulo ``p``, where ``|x_j|`` is row
    ``j`` read as a binary number with ``x_{j,k}`` of weight ``2^k``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    start, nodes, edges = _perm_component_parts(p, n, "G")
    return _program(n * n, nodes, edges, start, "det")


def perm_qobdd(n: int, primes_count: int | None = None) -> BranchingProgram:
    """QOBDD for PERM_n with one-sided error (rowwise order).

    The start node tests ``x_{0,0}`` and branches with amplitude
    ``1/sqrt(m)`` into the components for the ``m`` smallest primes
    (default ``m = 2 n^2``), skipping their own start nodes.  Permutation
    matrices are accepted with probability 1.  Other inputs with a bad row
    are always rejected, and the rest are accepted only through primes
    dividing ``sum_j |x_j| - (2^n - 1)`` (fewer than ``n + log n`` of them).
    """
    if n < 2:
        raise ValueError("perm_qobdd needs n >= 2")
    m = 2 * n * n if primes_count is None else int(primes_count)
    if m < 1:
        raise ValueError("primes_count must be positive")
    amp = 1 / math.sqrt(m)
    top = ("top",)
    nodes = [(top, 0, None, None)]
    edges = []
    for p in first_primes(m):
        start, cn, ce = _perm_component_parts(p, n, p)
        nodes.extend(x for x in cn if x[0] != start)
        for s, d, b, a in ce:
            if s == start:
                edges.append((top, d, b, amp))
            else:
                edges.append((s, d, b, a))
    return _program(n * n, nodes, edges, top)


# ----------------------------------------------------------------------- IND
def _ind_blocks(n: int, eps: float) -> list[list[int]]:
    if eps >= 0.5:
        k = int(math.floor(1 / (1 - eps) + 1e-12))
        size = math.ceil(n / k)
        blocks = [list(range(i, min(n, i + size))) for i in range(0, n, size)]
    else:
        k = int(math.ceil(1 / eps - 1e-12))
        bounds = [round(i * n / k) for i in range(k + 1)]
        chunks = [set(range(bounds[i], bounds[i + 1])) for i in range(k)]
        blocks = [[x for x in range(n) if x not in chunks[i]] for i in range(k)]
    return blocks


def ind_zero_error_qobdd(n: int, eps: float) -> BranchingProgram:
    """Zero-error QOBDD for IND_n with failure probability at most ``eps``.

    A random block ``B`` of x-variables is chosen with amplitude
    ``1/sqrt(k)``; the program stores the bits of ``B``, reads ``y`` and
    answers ``x_{|y|}`` if ``|y|`` lies in ``B`` and ``?`` otherwise.  For
    ``eps >= 1/2`` the ``k = floor(1/(1-eps))`` blocks partition ``x``; for
    smaller ``eps`` there are ``k = ceil(1/eps)`` blocks, each missing one
    of ``k`` chunks.  The program is leveled: every level tests one variable
    in the order ``x_0..x_{n-1}, y_0..y_{l-1}`` and all sinks are at the
    end.
    """
    ell = _log2_exact(n, "IND")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    blocks = _ind_blocks(n, eps)
    k = len(blocks)
    amp = 1 / math.sqrt(k)
    nodes, edges = [], []
    top = ("top",)
    nodes.append((top, 0, None, None))
    total = n + ell
    for j, block in enumerate(blocks):
        bset = set(block)
        # level-by-level over keys (j, level, stored x bits, y bits)
        frontier = [((), ())]
        for level in range(total):
            nxt = []
            for stored, ys in frontier:
                node = ("B", j, level, stored, ys)
                if level > 0:
                    nodes.append((node, level, None, None))
                for b in (0, 1):
                    if level < n:
                        s2, y2 = (stored + (b,), ys) if level in bset else (stored, ys)
                    else:
                        s2, y2 = stored, ys + (b,)
                    if level + 1 == total:
                        idx = _binary(y2)
                        label = str(s2[block.index(idx)]) if idx in bset else "?"
                        dst = ("T", j, s2, y2)
                        nodes.append((dst, None, label, None))
                    else:
                        dst = ("B", j, level + 1, s2, y2)
                        if (s2, y2) not in nxt:
                            nxt.append((s2, y2))
                    src, a = (top, amp) if level == 0 else (node, 1.0)
                    edges.append((src, dst, b, a))
            frontier = nxt
    return _program(total, nodes, edges, top)


# ----------------------------------------------------------------------- ISA
def isa_tree(n: int) -> BranchingProgram:
    """Read-once deterministic decision tree for ISA_n.

    Reads ``y`` (giving ``s``), then block ``s`` (giving ``t``), then
    ``x_t`` unless it was already read in the block.  ``s >= b`` leads to a
    0-sink.  Every leaf is its own sink.
    """
    k = _log2_exact(n, "ISA")
    if k == 0:
        raise ValueError("ISA needs n >= 2")
    b = n // k
    nodes, edges = [], []
    counter = itertools.count()

    def sink(label):
        key = ("S", next(counter))
        nodes.append((key, None, str(label), None))
        return key

    def x_var(i):
        return k + i

    def build_x(s, t_bits, known):
        # t_bits: block bits read so far; known: dict x index -> bit
        if len(t_bits) == k:
            t = _binary(t_bits)
            if t in known:
                return sink(known[t])
            key = ("X", s, tuple(t_bits))
            nodes.append((key, x_var(t), None, None))
            for bit in (0, 1):
                edges.append((key, sink(bit), bit, 1.0))
            return key
        idx = s * k + len(t_bits)
        key = ("K", s, tuple(t_bits))
        nodes.append((key, x_var(idx), None, None))
        for bit in (0, 1):
            child = build_x(s, t_bits + [bit], {**known, idx: bit})
            edges.append((key, child, bit, 1.0))
        return key

    def build_y(ys):
        if len(ys) == k:
            s = _binary(ys)
            return sink(0) if s >= b else build_x(s, [], {})
        key = ("Y", tuple(ys))
        nodes.append((key, len(ys), None, None))
        for bit in (0, 1):
            edges.append((key, build_y(ys + [bit]), bit, 1.0))
        return key

    root = build_y([])
    return _program(n + k, nodes, edges, root, "det")


# ---------------------------------------------------------------- trees, OBDDs
def reversible_tree(orc: FunctionOracle, order=None) -> BranchingProgram:
    """Complete decision tree in ``order`` with one sink per leaf.

    The tree is a reversible deterministic program; reinterpreted as a
    quantum program it is well formed.  Undefined values of a partial
    oracle become ``?``-sinks.
    """
    n = orc.n_vars
    order = list(range(n)) if order is None else list(order)
    if sorted(order) != list(range(n)):
        raise ValueError("order must be a permutation of the variables")
    nodes, edges = [], []
    a = np.zeros(n, dtype=np.int64)

    def build(depth, prefix):
        if depth == n:
            for x, bit in zip(order, prefix):
                a[x] = bit
            v = orc(a)
            key = ("S", prefix)
            nodes.append((key, None, "?" if v is None else str(v), None))
            return key
        key = ("T", prefix)
        nodes.append((key, order[depth], None, None))
        for bit in (0, 1):
            edges.append((key, build(depth + 1, prefix + (bit,)), bit, 1.0))
        return key

    root = build(0, ())
    return _program(n, nodes, edges, root, "det")


def _subfunction_tables(orc: FunctionOracle, order):
    """For each level ``i`` map prefix assignments to the subfunction key."""
    n = orc.n_vars
    tt = orc.truth_table()
    weights = np.array([1 << x for x in order], dtype=np.int64)
    # table indexed by the assignment in reading order
    idx = all_assignments(n) @ weights
    table = tt[idx]  # table[c] where c has bit i = value of order[i]
    return table


def min_reversible_obdd(orc: FunctionOracle, order=None) -> BranchingProgram:
    """Leveled reversible OBDD with the fewest nodes level by level.

    Level ``i`` tests ``order[i]`` on every node.  A subfunction ``g`` on
    level ``i+1`` that receives ``A`` 0-edges and ``B`` 1-edges gets
    ``max(A, B)`` copies; the 0-edges use copies ``0..A-1`` and the 1-edges
    copies ``0..B-1``, so no copy has two incoming edges with the same bit.
    Level ``n`` holds the sinks.
    """
    if not orc.is_total:
        raise ValueError("min_reversible_obdd needs a total function")
    n = orc.n_vars
    order = list(range(n)) if order is None else list(order)
    table = _subfunction_tables(orc, order)
    # level-i node: (subfunction table over remaining vars, copy index)
    level = [(table.tobytes(), table, 0)]
    nodes, edges = [], []
    keys = {}

    def key_of(i, sub, copy):
        return ("L", i, sub, copy)

    for i in range(n):
        counts = {}
        nxt = []
        for sub, tab, copy in level:
            src = key_of(i, sub, copy)
            nodes.append((src, order[i], None, None))
            for bit in (0, 1):
                child = tab[bit::2]  # fix order[i] (the lowest remaining bit)
                ck = child.tobytes()
                c = counts.setdefault(ck, [0, 0, child])
                idx = c[bit]
                c[bit] += 1
                dst = key_of(i + 1, ck, idx)
                edges.append((src, dst, bit, 1.0))
        for ck, (c0, c1, child) in counts.items():
            for copy in range(max(c0, c1)):
                nxt.append((ck, child, copy))
        level = nxt
    for sub, tab, copy in level:
        nodes.append((key_of(n, sub, copy), None, str(int(tab[0])), None))
    return _program(n, nodes, edges, key_of(0, table.tobytes(), 0), "det")


def parity_obdd(n: int) -> BranchingProgram:
    """Leveled reversible OBDD for the parity of ``n`` bits."""
    return min_reversible_obdd(xor_oracle(n))
