"""Entropy tools, lower-bound inequality checks, measurement schemes and
exhaustive function oracles (minimal OBDD size, k-stability)."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from .families import FunctionOracle
from .model import BranchingProgram, all_assignments, with_mode
from .semantics import complete_unitary, evolve
from .transforms import align_levels
from .validate import (ValidationReport, Violation, check_reversible_bp,
                       infer_variable_order, validate_program)

logger = logging.getLogger(__name__)

__all__ = [
    "TOL",
    "RANK_TOL",
    "von_neumann_entropy",
    "binary_entropy",
    "BoundCheck",
    "check_nayak",
    "check_klauck",
    "random_density",
    "random_nayak_instance",
    "random_klauck_instance",
    "entropy_accumulation",
    "EntropyRow",
    "Measurement",
    "MeasurementScheme",
    "verify_scheme",
    "scheme_dimension_bound",
    "build_scheme",
    "build_schemes",
    "SchemeLevel",
    "min_obdd_size",
    "is_k_stable",
]

TOL = 1e-9
RANK_TOL = 1e-8


# ------------------------------------------------------------------ entropy
def von_neumann_entropy(sigma, tol: float = TOL, trace_tol: float = 1e-6) -> float:
    """Entropy in bits of a density matrix.

    Eigenvalues in ``[-tol, 0]`` are treated as zero and ``0 log 0 = 0``.

    Raises
    ------
    ValueError
        If the trace differs from 1 by more than ``trace_tol`` or an
        eigenvalue is below ``-tol``.
    """
    sigma = np.asarray(sigma, dtype=complex)
    tr = np.trace(sigma).real
    if abs(tr - 1) > trace_tol:
        raise ValueError(f"density matrix has trace {tr:.6g}")
    lam = np.linalg.eigvalsh((sigma + sigma.conj().T) / 2)
    if lam.min() < -max(tol, 1e-7):
        raise ValueError(f"matrix is not positive semidefinite (eigenvalue {lam.min():.3e})")
    lam = lam[lam > tol]
    return float(-np.sum(lam * np.log2(lam)))


def binary_entropy(p: float) -> float:
    """``H(p) = -p log p - (1-p) log(1-p)`` in bits with ``H(0) = H(1) = 0``."""
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if p in (0, 1):
        return 0.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


@dataclass
class BoundCheck:
    """Outcome of an entropy inequality check.

    ``status`` is ``"holds"``, ``"violated"`` or ``"premise-failed"``;
    ``slack = lhs - rhs``.
    """

    status: str
    lhs: float = float("nan")
    rhs: float = float("nan")
    detail: str = ""

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs

    @property
    def holds(self) -> bool:
        return self.status == "holds"


def _prob(sigma, P):
    return float(np.trace(sigma @ P).real)


def check_nayak(sigma0, sigma1, measurement, p: float, tol: float = TOL) -> BoundCheck:
    """Check ``S(s) >= (S(s0) + S(s1))/2 + 1 - H(p)`` for ``s = (s0 + s1)/2``.

    The premise ``Pr[M(s_b) = b] >= p >= 1/2`` is verified first.
    """
    P0, P1 = measurement
    pr = (_prob(sigma0, P0), _prob(sigma1, P1))
    if p < 0.5 or min(pr) < p - tol:
        return BoundCheck("premise-failed", detail=f"success probabilities {pr}, p={p}")
    s = (np.asarray(sigma0) + np.asarray(sigma1)) / 2
    lhs = von_neumann_entropy(s)
    rhs = (von_neumann_entropy(sigma0) + von_neumann_entropy(sigma1)) / 2 + 1 - binary_entropy(p)
    return BoundCheck("holds" if lhs >= rhs - tol else "violated", lhs, rhs)


def check_klauck(sigma0, sigma1, measurement, p: float, eps: float, tol: float = TOL) -> BoundCheck:
    """Check ``S(s) >= p S(s0) + (1-p) S(s1) + (1 - eps) H(p)`` for
    ``s = p s0 + (1-p) s1``.

    The premise is ``Pr[M(s_b) = b] >= 1 - eps`` and ``Pr[M(s_b) = not b] = 0``
    for the three-outcome measurement ``(M_0, M_1, M_?)``.
    """
    M0, M1, _ = measurement
    ok = (_prob(sigma0, M0) >= 1 - eps - tol and _prob(sigma1, M1) >= 1 - eps - tol
          and _prob(sigma0, M1) <= tol and _prob(sigma1, M0) <= tol)
    if not ok or not 0 <= p <= 1:
        return BoundCheck("premise-failed", detail="zero-error premise fails")
    s = p * np.asarray(sigma0) + (1 - p) * np.asarray(sigma1)
    lhs = von_neumann_entropy(s)
    rhs = (p * von_neumann_entropy(sigma0) + (1 - p) * von_neumann_entropy(sigma1)
           + (1 - eps) * binary_entropy(p))
    return BoundCheck("holds" if lhs >= rhs - tol else "violated", lhs, rhs)


# --------------------------------------------------------- random instances
def _haar_unitary(d, rng):
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(d: int, rng, rank: int | None = None, basis=None) -> np.ndarray:
    """Random density matrix of the given rank, supported on ``span(basis)``."""
    basis = np.eye(d, dtype=complex) if basis is None else basis
    k = basis.shape[1]
    rank = int(rng.integers(1, k + 1)) if rank is None else rank
    G = rng.normal(size=(k, rank)) + 1j * rng.normal(size=(k, rank))
    rho = G @ G.conj().T
    rho = basis @ rho @ basis.conj().T
    return rho / np.trace(rho).real


def random_nayak_instance(rng, max_dim: int = 8):
    """Random ``(s0, s1, (P0, P1), p)`` satisfying the distinguishing premise."""
    d = int(rng.integers(2, max_dim + 1))
    U = _haar_unitary(d, rng)
    r = int(rng.integers(1, d))
    B0, B1 = U[:, :r], U[:, r:]
    P0, P1 = B0 @ B0.conj().T, B1 @ B1.conj().T
    sig = []
    for B in (B0, B1):
        lam = rng.uniform(0, 0.5)
        sig.append((1 - lam) * random_density(d, rng, basis=B) + lam * random_density(d, rng))
    pmin = min(_prob(sig[0], P0), _prob(sig[1], P1))
    p = float(rng.uniform(0.5, pmin))
    return sig[0], sig[1], (P0, P1), p


def random_klauck_instance(rng, max_dim: int = 8):
    """Random ``(s0, s1, (M0, M1, M?), p, eps)`` satisfying the zero-error premise."""
    d = int(rng.integers(3, max_dim + 1))
    U = _haar_unitary(d, rng)
    r0 = int(rng.integers(1, d - 1))
    r1 = int(rng.integers(1, d - r0))
    B0, B1, Bq = U[:, :r0], U[:, r0:r0 + r1], U[:, r0 + r1:]
    Ms = [B @ B.conj().T for B in (B0, B1, Bq)]
    sig = []
    for B in (B0, B1):
        mu = rng.uniform(0, 1) if Bq.shape[1] else 0.0
        part = random_density(d, rng, basis=B)
        if Bq.shape[1]:
            part = (1 - mu) * part + mu * random_density(d, rng, basis=np.hstack([B, Bq]))
        sig.append(part)
    eps = max(_prob(sig[0], Ms[2]), _prob(sig[1], Ms[2]))
    p = float(rng.uniform(0, 1))
    return sig[0], sig[1], tuple(Ms), p, min(1.0, eps)


# -------------------------------------------------------- entropy accumulation
@dataclass
class EntropyRow:
    k: int
    entropy: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.entropy >= self.bound - 1e-9


@dataclass
class EntropyResult:
    rows: list
    p: float
    size: int
    size_bound: float

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.rows)

    @property
    def size_ok(self) -> bool:
        return self.size_bound <= self.size + 1e-9


def entropy_accumulation(bp: BranchingProgram, orc: FunctionOracle, p: float,
                         tol: float = TOL) -> EntropyResult:
    """Entropy of the program state on random inputs to DISJ-like functions.

    Variables ``x_0, x_2, ...`` are uniform random bits and ``x_1, x_3, ...``
    are 0.  ``s(k)`` is the exact mixture, over the ``2^k`` settings of the
    first ``k`` random variables, of the states right after the ``k``-th of
    them is read.  Each row compares ``S(s(k))`` with ``(1 - H(p)) k``; the
    result also compares ``2^{(1 - H(p)) n/2}`` with the program size.

    Raises
    ------
    ValueError
        If the program is not ordered with each ``x_{2i}`` before
        ``x_{2i+1}``, or fails to compute ``orc`` with success ``p``.
    """
    if bp.mode == "det":
        bp = with_mode(bp, "quantum")
    n = bp.n_vars
    if n % 2:
        raise ValueError("entropy_accumulation needs an even number of variables")
    res = infer_variable_order(bp)
    if not res.ok:
        raise ValueError(f"program is not ordered: {res.violation}")
    order = res.order
    pos = {x: i for i, x in enumerate(order)}
    if any(pos[2 * i] > pos[2 * i + 1] for i in range(n // 2)):
        raise ValueError("each x_{2i} must be read before x_{2i+1}")
    al, _ = align_levels(bp, order)
    for a in all_assignments(n):
        v = orc(a)
        pr = evolve(al, a, n).p(str(v))
        if pr < p - tol:
            raise ValueError(f"success probability {pr:.6g} < {p} on input {a.tolist()}")
    odd = sorted(range(0, n, 2), key=lambda x: pos[x])
    h = binary_entropy(p)
    rows = []
    for k in range(1, n // 2 + 1):
        steps = pos[odd[k - 1]] + 1
        sigma = np.zeros((al.size, al.size), dtype=complex)
        for bits in itertools.product((0, 1), repeat=k):
            a = np.zeros(n, dtype=np.int64)
            a[odd[:k]] = bits
            psi = evolve(al, a, steps).state
            sigma += np.outer(psi, psi.conj())
        sigma /= 2 ** k
        rows.append(EntropyRow(k, von_neumann_entropy(sigma), (1 - h) * k))
    return EntropyResult(rows, p, bp.size, 2 ** ((1 - h) * n / 2))


# --------------------------------------------------------- measurement schemes
class Measurement:
    """Three-outcome projective measurement with results ``0, 1, ?``.

    Either given by explicit operators ``(M_0, M_1, M_?)`` or, more cheaply,
    by a unitary frame ``W`` and three disjoint coordinate masks, in which
    case ``M_x = E_x W``.
    """

    def __init__(self, W=None, masks=None, ops=None):
        self.W = W
        self.masks = masks
        self.ops = ops

    @classmethod
    def from_projectors(cls, P0, P1, Pq):
        return cls(ops=(np.asarray(P0), np.asarray(P1), np.asarray(Pq)))

    def probabilities(self, psi) -> np.ndarray:
        psi = np.asarray(psi)
        if self.ops is not None:
            return np.array([float(np.vdot(M @ psi, M @ psi).real) for M in self.ops])
        phi = np.abs(self.W @ psi) ** 2
        return np.array([phi[m].sum() for m in self.masks])

    def conjugated(self, V) -> "Measurement":
        """Measurement with operators ``M_x V``."""
        if self.ops is not None:
            return Measurement(ops=tuple(M @ V for M in self.ops))
        return Measurement(W=self.W @ V, masks=self.masks)


@dataclass
class MeasurementScheme:
    """A ``{0,1,*}`` matrix with one measurement per column and one state per row."""

    A: np.ndarray
    measurements: list
    states: np.ndarray
    eps: float

    @property
    def m(self) -> int:
        return self.A.shape[0]


def verify_scheme(s: MeasurementScheme, tol: float = TOL) -> ValidationReport:
    """Check the three scheme conditions.

    (i) any two rows differ in a column where both are boolean; (ii) a
    ``*`` is followed only by ``*`` in its row; (iii) a boolean entry ``a``
    is measured with probability at least ``1 - eps`` and ``not a`` with
    probability at most ``tol``.
    """
    rep = ValidationReport(checks=["scheme-i", "scheme-ii", "scheme-iii"])
    A = s.A
    m, ncol = A.shape
    if len(s.measurements) != ncol or len(s.states) != m:
        rep.add(Violation("scheme-shape", (m, ncol), None, "matrix, measurements and states disagree"))
        return rep
    boolean = A != "*"
    for i in range(m):
        for j in range(i + 1, m):
            both = boolean[i] & boolean[j]
            if not np.any(both & (A[i] != A[j])):
                rep.add(Violation("scheme-i", (i, j), None, "rows not distinguishable"))
    for i in range(m):
        star = np.flatnonzero(~boolean[i])
        if star.size and np.any(boolean[i, star[0]:]):
            rep.add(Violation("scheme-ii", (i,), None, f"'*' at column {star[0]} followed by a boolean"))
    for k, meas in enumerate(s.measurements):
        rows = np.flatnonzero(boolean[:, k])
        for i in rows:
            pr = meas.probabilities(s.states[i])
            a = int(A[i, k])
            res = max(0.0, (1 - s.eps) - pr[a])
            rep.max_residual = max(rep.max_residual, res, pr[1 - a])
            if pr[a] < 1 - s.eps - tol or pr[1 - a] > tol:
                rep.add(Violation("scheme-iii", (int(i), k), float(max(res, pr[1 - a])),
                                  f"Pr[{a}]={pr[a]:.6g}, Pr[{1 - a}]={pr[1 - a]:.3g}"))
    return rep


def scheme_dimension_bound(s: MeasurementScheme, rank_tol: float = RANK_TOL):
    """``(m^(1-eps), rank of the states, rank >= m^(1-eps))``."""
    sv = np.linalg.svd(np.asarray(s.states), compute_uv=False) if s.m else np.zeros(0)
    rank = int(np.sum(sv > rank_tol))
    border = sv[(sv > rank_tol / 100) & (sv < rank_tol * 100)]
    if border.size:
        logger.info("singular values near the rank threshold: %s", border)
    bound = s.m ** (1 - s.eps)
    return bound, rank, rank >= bound - 1e-9


@dataclass
class SchemeLevel:
    """Scheme for one level plus the level sizes of both programs."""

    level: int
    scheme: MeasurementScheme
    size_G: int
    size_Gp: int
    b_values: tuple

    @property
    def size_bound_ok(self) -> bool:
        return self.size_Gp >= self.size_G ** (1 - self.scheme.eps) - 1e-9


def _bfs_levels(bp, n):
    depth = {bp.start: 0}
    frontier = [bp.start]
    levels = [[bp.start]]
    for _ in range(n):
        nxt = []
        for v in frontier:
            for b in (0, 1):
                for e in bp.out_edges[v][b]:
                    if e.dst not in depth:
                        depth[e.dst] = depth[v] + 1
                        nxt.append(e.dst)
        levels.append(sorted(nxt))
        frontier = nxt
    return levels, depth


def _check_scheme_premises(G, Gp, tol):
    if G.mode != "det":
        raise ValueError("G must be a deterministic program")
    rev = check_reversible_bp(G)
    if not rev.ok:
        raise ValueError("G is not reversible:\n" + rev.to_text())
    if Gp.mode == "det":
        Gp = with_mode(Gp, "quantum")
    prof = validate_program(Gp)
    if not prof.ok:
        raise ValueError("G' is not a valid quantum program:\n" + prof.to_text())
    n = G.n_vars
    levels, depth = _bfs_levels(G, n)
    order = []
    for i in range(n):
        vars_ = {int(G.var_array[v]) for v in levels[i]}
        if len(vars_) != 1 or any(G.nodes[v].is_sink for v in levels[i]):
            raise ValueError(f"G level {i + 1} does not test a single variable")
        order.append(vars_.pop())
    if not all(G.nodes[v].is_sink for v in levels[n]):
        raise ValueError("G must have all sinks on the last level")
    for e in G.edges:
        if depth.get(e.dst, -1) != depth.get(e.src, -2) + 1:
            raise ValueError("G is not leveled")
    plevels, pdepth = _bfs_levels(Gp, n)
    for i in range(n):
        vars_ = {int(Gp.var_array[v]) for v in plevels[i]}
        if vars_ != {order[i]} or any(Gp.nodes[v].is_sink for v in plevels[i]):
            raise ValueError(f"G' level {i + 1} does not test x{order[i]} only")
    if not all(Gp.nodes[v].is_sink for v in plevels[n]):
        raise ValueError("G' must have all sinks on the last level")
    return Gp, order, levels, plevels


def build_schemes(G: BranchingProgram, Gp: BranchingProgram, eps: float | None = None,
                  tol: float = TOL) -> list[SchemeLevel]:
    """Measurement schemes for the states of ``Gp`` indexed by the levels of ``G``.

    ``G`` is a leveled reversible OBDD and ``Gp`` a leveled QOBDD with the
    same order computing the same function with zero error.  Level ``i``
    gets the states ``phi(asn_i(v))`` for ``v`` on level ``i`` of ``G``:
    a node ``v`` inherits the assignment of a predecessor ``u`` extended by
    the bit of the edge ``u -> v``, where all copies of one subfunction
    use the same bit.  The matrix has one column per assignment to the
    remaining variables (measure the output after running ``Gp`` on it)
    followed by the previous level's scheme conjugated by ``U_b^dagger``
    for the copies that need it.  One bit value is used per level whenever
    possible; if copies need both, two blocks are appended and the report
    of :func:`verify_scheme` shows the resulting violations.

    ``eps`` defaults to the largest ``?`` probability of ``Gp``.
    """
    Gp, order, levels, plevels = _check_scheme_premises(G, Gp, tol)
    n = G.n_vars
    # subfunction tables of G's nodes, lowest index bit = next variable
    tables = {}
    for i in range(n, -1, -1):
        for v in levels[i]:
            node = G.nodes[v]
            if node.is_sink:
                tables[v] = np.array([int(node.sink)], dtype=np.int64)
            else:
                c0 = G.out_edges[v][0][0].dst
                c1 = G.out_edges[v][1][0].dst
                t = np.empty(2 * tables[c0].size, dtype=np.int64)
                t[0::2], t[1::2] = tables[c0], tables[c1]
                tables[v] = t
    # zero-error premise, exhaustively
    f = tables[G.start]
    worst_q = 0.0
    for c in range(2 ** n):
        a = np.zeros(n, dtype=np.int64)
        for i, x in enumerate(order):
            a[x] = (c >> i) & 1
        pr = evolve(Gp, a, n).halting.sum(axis=0)
        if pr[1 - f[c]] > tol:
            raise ValueError(f"G' errs on input {a.tolist()} (Pr[wrong] = {pr[1 - f[c]]:.3g})")
        worst_q = max(worst_q, pr[2])
    if eps is None:
        eps = worst_q
    elif worst_q > eps + tol:
        raise ValueError(f"G' fails with probability {worst_q:.6g} > eps = {eps}")
    d = Gp.size
    U = [complete_unitary(Gp, np.full(n, b)) for b in (0, 1)]
    masks = [Gp.label_masks[r] for r in ("0", "1", "?")]
    psi0 = np.zeros(d, dtype=complex)
    psi0[Gp.start] = 1
    states = {G.start: psi0}
    A = np.empty((1, 0), dtype="<U1")
    meas = []
    out = [SchemeLevel(1, MeasurementScheme(A, meas, psi0[None, :], eps), 1,
                       len(plevels[0]), ())]
    rows_prev = {G.start: 0}
    inc = {}
    for e in G.edges:
        inc.setdefault(e.dst, {})[e.bit] = e.src
    for i in range(1, n + 1):
        L = levels[i]
        groups = {}
        for v in L:
            groups.setdefault(tables[v].tobytes(), []).append(v)
        multi = [g for g in groups.values() if len(g) > 1]
        feasible = [{b for b in (0, 1) if all(b in inc[v] for v in g)} for g in multi]
        if all(0 in fs for fs in feasible):
            pref = 0
        elif all(1 in fs for fs in feasible):
            pref = 1
        else:
            pref = 0
        choice = {}
        for g in groups.values():
            if len(g) > 1:
                fs = {b for b in (0, 1) if all(b in inc[v] for v in g)}
                if not fs:
                    raise ValueError("copies of a subfunction lack a common incoming bit; "
                                     "is G of minimum size?")
                b = pref if pref in fs else min(fs)
            else:
                b = pref if pref in inc[g[0]] else min(inc[g[0]])
            for v in g:
                choice[v] = (b, len(g) > 1)
        new_states = {v: U[choice[v][0]] @ states[inc[v][choice[v][0]]] for v in L}
        # fresh columns: every assignment y to the remaining variables
        N = 2 ** (n - i)
        rest = order[i:]
        A_new = np.empty((len(L), N), dtype="<U1")
        meas_new = []
        for k in range(N):
            W = np.eye(d, dtype=complex)
            for j in range(len(rest)):
                W = U[(k >> j) & 1] @ W
            meas_new.append(Measurement(W=W, masks=masks))
            for r, v in enumerate(L):
                A_new[r, k] = str(tables[v][k])
        blocks = [A_new]
        used = sorted({b for b, mult in choice.values() if mult}, key=lambda b: b != pref)
        for b in used:
            Bblk = np.full((len(L), A.shape[1]), "*", dtype="<U1")
            for r, v in enumerate(L):
                if choice[v] == (b, True):
                    Bblk[r] = A[rows_prev[inc[v][b]]]
            blocks.append(Bblk)
            Ub_dag = U[b].conj().T
            meas_new.extend(m_.conjugated(Ub_dag) for m_ in meas)
        A = np.hstack(blocks)
        meas = meas_new
        states = new_states
        rows_prev = {v: r for r, v in enumerate(L)}
        S = np.array([states[v] for v in L])
        out.append(SchemeLevel(i + 1, MeasurementScheme(A, meas, S, eps), len(L),
                               len(plevels[i]), tuple(used)))
        logger.debug("scheme level %d: %d states, %d columns, bits %s", i + 1, len(L), A.shape[1], used)
    return out


def build_scheme(G: BranchingProgram, Gp: BranchingProgram, level: int,
                 eps: float | None = None) -> SchemeLevel:
    """Scheme for level ``level`` (1-based; level ``n + 1`` holds the sinks)."""
    levels = build_schemes(G, Gp, eps)
    if not 1 <= level <= len(levels):
        raise ValueError(f"level must lie in [1, {len(levels)}]")
    return levels[level - 1]


# ------------------------------------------------------------- exact oracles
def _table_in_order(orc: FunctionOracle, order) -> np.ndarray:
    tt = orc.truth_table()
    if np.any(tt < 0):
        raise ValueError(f"{orc.name} is partial; exhaustive oracles need a total function")
    n = orc.n_vars
    order = list(range(n)) if order is None else list(order)
    if sorted(order) != list(range(n)):
        raise ValueError("order must be a permutation of the variables")
    weights = np.array([1 << x for x in order], dtype=np.int64)
    return tt[all_assignments(n) @ weights], order


def min_obdd_size(orc: FunctionOracle, order=None) -> int:
    """Size of the minimal OBDD for ``orc`` in ``order``, sinks included.

    Level ``i`` needs one node per distinct subfunction obtained by fixing
    the first ``i`` variables of the order that essentially depends on
    ``order[i]``; one sink per constant value that occurs.
    """
    table, order = _table_in_order(orc, order)
    n = orc.n_vars
    size = 0
    for i in range(n):
        subs = table.reshape(-1, 2 ** i).T  # row q: subfunction after prefix q
        dep = np.any(subs[:, 0::2] != subs[:, 1::2], axis=1)
        size += len({row.tobytes() for row in subs[dep]})
    size += len(np.unique(table))
    return size


def is_k_stable(orc: FunctionOracle, k: int) -> bool:
    """Whether every ``k``-set ``V`` of variables and every ``x_i`` in ``V``
    admit a setting of the other variables reducing the function to
    ``x_i`` or its complement."""
    n = orc.n_vars
    if not 0 < k <= n:
        raise ValueError("k must lie in [1, n]")
    tt = orc.truth_table()
    if np.any(tt < 0):
        raise ValueError("is_k_stable needs a total function")
    cube = tt.reshape((2,) * n)  # axis j holds variable n - 1 - j
    for V in itertools.combinations(range(n), k):
        outside = [x for x in range(n) if x not in V]
        axes = [n - 1 - x for x in outside] + [n - 1 - x for x in reversed(V)]
        sub = cube.transpose(axes).reshape(2 ** (n - k), 2 ** k)
        # column index: bit j corresponds to V[j]
        for j in range(k):
            pattern = (np.arange(2 ** k) >> j) & 1
            hit = np.all(sub == pattern, axis=1) | np.all(sub == 1 - pattern, axis=1)
            if not hit.any():
                logger.debug("not %d-stable: V=%s, x%d", k, V, V[j])
                return False
    return True
