"""Structural validation of branching programs.

Every check returns a :class:`ValidationReport`; ``report.ok`` is true iff no
violation was recorded.  The default tolerance is ``1e-9``.
"""
from __future__ import annotations

import heapq
import json
import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .model import BranchingProgram, topological_order

logger = logging.getLogger(__name__)

__all__ = [
    "TOL",
    "Violation",
    "ValidationReport",
    "ModeError",
    "check_well_formed",
    "check_gm_well_formed",
    "check_unidirectional",
    "infer_variable_order",
    "OrderResult",
    "check_reversible_bp",
    "check_leveled",
    "LevelResult",
    "check_mode_invariants",
    "validate_program",
]

TOL = 1e-9
MAX_RECORDED = 1000


class ModeError(ValueError):
    """Raised when a check is applied to a program of the wrong mode."""


@dataclass(frozen=True)
class Violation:
    rule: str
    ids: tuple
    residual: float | None = None
    detail: str = ""

    def to_dict(self):
        return {"rule": self.rule, "ids": list(self.ids), "residual": self.residual,
                "detail": self.detail}

    def __str__(self):
        res = "" if self.residual is None else f" residual={self.residual:.3e}"
        det = f" ({self.detail})" if self.detail else ""
        return f"{self.rule}: {list(self.ids)}{res}{det}"


@dataclass
class ValidationReport:
    """Result of one or more checks.

    ``max_residual`` tracks the largest numeric deviation seen, whether or
    not it exceeded the tolerance.
    """

    violations: list = field(default_factory=list)
    max_residual: float = 0.0
    checks: list = field(default_factory=list)
    n_violations: int = 0

    @property
    def ok(self) -> bool:
        return self.n_violations == 0

    def add(self, v: Violation):
        self.n_violations += 1
        if len(self.violations) < MAX_RECORDED:
            self.violations.append(v)

    def merge(self, other: "ValidationReport") -> "ValidationReport":
        for v in other.violations:
            self.violations.append(v)
        self.n_violations += other.n_violations
        self.max_residual = max(self.max_residual, other.max_residual)
        self.checks.extend(other.checks)
        return self

    def __bool__(self):
        return self.ok

    def to_text(self) -> str:
        head = "ok" if self.ok else f"FAILED ({self.n_violations} violations)"
        lines = [f"{head}; checks: {', '.join(self.checks)}; max residual {self.max_residual:.3e}"]
        lines.extend(str(v) for v in self.violations)
        return "\n".join(lines)

    def to_json(self) -> str:
        return json.dumps({"ok": self.ok, "checks": self.checks, "max_residual": self.max_residual,
                           "n_violations": self.n_violations,
                           "violations": [v.to_dict() for v in self.violations]}, indent=2)


def _column_gram(bp: BranchingProgram):
    """Sparse Gram matrix of the columns ``delta(v, ., b)`` for internal v.

    Column ``2*i + b`` belongs to the ``i``-th internal node and bit ``b``.
    """
    internal = bp.internal_ids
    L0, L1 = bp.transition_matrices
    C0 = L0.tocsc()[:, internal]
    C1 = L1.tocsc()[:, internal]
    n = len(internal)
    C = sp.hstack([C0, C1]).tocsc()
    # interleave to (node, bit) order
    perm = np.empty(2 * n, dtype=np.int64)
    perm[0::2] = np.arange(n)
    perm[1::2] = np.arange(n) + n
    C = C[:, perm]
    return internal, (C.conj().T @ C).tocoo()


def _check_gram(bp, report, tol, same_class_only):
    internal, G = _column_gram(bp)
    var = bp.var_array[internal]
    cls = np.array([bp.nodes[v].gm_class or 0 for v in internal])
    # diagonal entries: every column must have unit norm
    diag = np.asarray(G.tocsr().diagonal()).real if G.shape[0] else np.zeros(0)
    for c in range(2 * len(internal)):
        res = abs(diag[c] - 1.0) if c < len(diag) else 1.0
        report.max_residual = max(report.max_residual, res)
        if res > tol:
            v = int(internal[c // 2])
            report.add(Violation("W-norm" if not same_class_only else "W*-norm", (v,), float(res),
                                 f"bit {c % 2}: squared norm {diag[c]:.6g}"))
    rule = "W*-orth" if same_class_only else "W-orth"
    for r, c, val in zip(G.row, G.col, G.data):
        if r >= c:
            continue
        iu, bu = divmod(int(r), 2)
        iv, bv = divmod(int(c), 2)
        if iu == iv:
            continue  # same node, different bits: never realized together
        if var[iu] == var[iv] and bu != bv:
            continue  # not realizable by an assignment
        if same_class_only and cls[iu] != cls[iv]:
            continue
        res = abs(val)
        report.max_residual = max(report.max_residual, res)
        if res > tol:
            u, v = int(internal[iu]), int(internal[iv])
            report.add(Violation(rule, (u, v), float(res),
                                 f"bits ({bu},{bv}): |<u,v>| = {res:.6g}"))


def check_well_formed(bp: BranchingProgram, tol: float = TOL) -> ValidationReport:
    """Check well-formedness (W) of a quantum program.

    For internal ``u, v`` and every bit pair realizable by some assignment
    (equal bits when ``var(u) == var(v)``, all four pairs otherwise) the
    inner product of the one-step images must be ``[u == v]``.
    """
    if bp.mode != "quantum":
        raise ModeError(f"check_well_formed needs a quantum program, got mode {bp.mode!r}")
    report = ValidationReport(checks=["W"])
    _check_gram(bp, report, tol, same_class_only=False)
    return report


def check_gm_well_formed(bp: BranchingProgram, tol: float = TOL) -> ValidationReport:
    """Check the class-restricted well-formedness (W*) of a gm program."""
    if bp.mode != "gm":
        raise ModeError(f"check_gm_well_formed needs a gm program, got mode {bp.mode!r}")
    for v in bp.internal_ids:
        if bp.nodes[v].gm_class is None:
            raise ModeError(f"internal node {v} has no gm class")
    report = ValidationReport(checks=["W*"])
    _check_gram(bp, report, tol, same_class_only=True)
    return report


def check_unidirectional(bp: BranchingProgram) -> ValidationReport:
    """All predecessors of every node must be labeled by one common variable."""
    report = ValidationReport(checks=["unidirectional"])
    var = bp.var_array
    for w, preds in enumerate(bp.predecessors):
        labels = {int(var[u]) for u in preds}
        if len(labels) > 1:
            report.add(Violation("unidirectional", (w,), None,
                                 f"predecessors {sorted(preds)} test variables {sorted(labels)}"))
    return report


# ------------------------------------------------------------- variable order
@dataclass
class OrderResult:
    order: list | None
    violation: str | None = None

    @property
    def ok(self) -> bool:
        return self.order is not None

    def __bool__(self):
        return self.ok


def _reachable(bp: BranchingProgram) -> np.ndarray:
    seen = np.zeros(bp.size, dtype=bool)
    seen[bp.start] = True
    stack = [bp.start]
    while stack:
        v = stack.pop()
        for bit in (0, 1):
            for e in bp.out_edges[v][bit]:
                if not seen[e.dst]:
                    seen[e.dst] = True
                    stack.append(e.dst)
    return seen


def infer_variable_order(bp: BranchingProgram) -> OrderResult:
    """Find a variable order respected by every path from the start.

    Every edge between reachable internal nodes ``u -> w`` forces
    ``var(u)`` before ``var(w)``.  The program is ordered iff these
    constraints are acyclic; ties are broken by variable index, so the
    result does not depend on node numbering.

    Raises
    ------
    ValueError
        If the program is cyclic.
    """
    if topological_order(bp) is None:
        raise ValueError("infer_variable_order needs an acyclic program")
    reach = _reachable(bp)
    var = bp.var_array
    n = bp.n_vars
    succ = [set() for _ in range(n)]
    witness = {}
    for e in bp.edges:
        if not reach[e.src] or var[e.dst] < 0:
            continue
        x, y = int(var[e.src]), int(var[e.dst])
        if x == y:
            return OrderResult(None, f"variable x{x} tested twice on a path through nodes {e.src}->{e.dst}")
        if y not in succ[x]:
            succ[x].add(y)
            witness[(x, y)] = (e.src, e.dst)
    indeg = [0] * n
    for x in range(n):
        for y in succ[x]:
            indeg[y] += 1
    heap = [x for x in range(n) if indeg[x] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        x = heapq.heappop(heap)
        order.append(x)
        for y in succ[x]:
            indeg[y] -= 1
            if indeg[y] == 0:
                heapq.heappush(heap, y)
    if len(order) < n:
        cyc = _find_cycle(succ, [x for x in range(n) if indeg[x] > 0])
        parts = [f"x{a}->x{b} at nodes {witness[(a, b)][0]}->{witness[(a, b)][1]}"
                 for a, b in zip(cyc, cyc[1:] + cyc[:1])]
        return OrderResult(None, "paths test variables in conflicting orders: " + "; ".join(parts))
    return OrderResult(order)


def _find_cycle(succ, candidates):
    cand = set(candidates)
    start = min(cand)
    path, pos = [], {}
    x = start
    while x not in pos:
        pos[x] = len(path)
        path.append(x)
        x = min(y for y in succ[x] if y in cand)
    return path[pos[x]:]


# ---------------------------------------------------------------- reversible
def check_reversible_bp(bp: BranchingProgram) -> ValidationReport:
    """Each node has at most one incoming 0-edge and one incoming 1-edge, and
    if both exist their sources test the same variable."""
    if bp.mode != "det":
        raise ModeError(f"check_reversible_bp needs a deterministic program, got mode {bp.mode!r}")
    report = ValidationReport(checks=["reversible"])
    inc = [([], []) for _ in range(bp.size)]
    for e in bp.edges:
        inc[e.dst][e.bit].append(e.src)
    var = bp.var_array
    for w, (i0, i1) in enumerate(inc):
        for b, lst in ((0, i0), (1, i1)):
            if len(lst) > 1:
                report.add(Violation("reversible-indegree", (w, *lst), None,
                                     f"{len(lst)} incoming {b}-edges"))
        if i0 and i1 and len({int(var[u]) for u in i0 + i1}) > 1:
            report.add(Violation("reversible-label", (w, *i0, *i1), None,
                                 "0- and 1-predecessors test different variables"))
    return report


# ------------------------------------------------------------------ leveled
@dataclass
class LevelResult:
    levels: list | None
    violation: str | None = None

    @property
    def ok(self) -> bool:
        return self.levels is not None

    def __bool__(self):
        return self.ok


def check_leveled(bp: BranchingProgram, n_levels: int | None = None) -> LevelResult:
    """Partition the nodes into levels ``V_1..V_l`` with every edge leaving
    ``V_i`` (``i < l``) entering ``V_{i+1}``.

    Levels come from breadth-first depth from the start.  Edges leaving the
    last level are unconstrained, so sinks entered only from the last level
    are placed in the first level.  Nodes not reachable from the start get
    levels inferred from their neighbours.

    Without ``n_levels`` the smallest such partition is returned; with it,
    a partition into exactly ``n_levels`` (possibly empty) levels is checked.
    """
    n = bp.size
    depth = np.full(n, -1, dtype=np.int64)
    depth[bp.start] = 0
    q = deque([bp.start])
    succ = [sorted({e.dst for e in bp.out_edges[v][0] + bp.out_edges[v][1]}) for v in range(n)]
    while q:
        v = q.popleft()
        for w in succ[v]:
            if depth[w] < 0:
                depth[w] = depth[v] + 1
                q.append(w)
    # unreached nodes: propagate along edges in both directions
    changed = True
    while changed and np.any(depth < 0):
        changed = False
        for v in range(n):
            for w in succ[v]:
                if depth[v] >= 0 and depth[w] < 0:
                    depth[w] = depth[v] + 1
                    changed = True
                elif depth[w] > 0 and depth[v] < 0:
                    depth[v] = depth[w] - 1
                    changed = True
    depth[depth < 0] = 0
    preds = bp.predecessors
    if n_levels is None:
        internal_depth = depth[~bp.sink_mask]
        last = int(internal_depth.max()) if internal_depth.size else int(depth.max())
    else:
        if n_levels < 1:
            raise ValueError("n_levels must be positive")
        last = n_levels - 1
    for w in range(n):
        if depth[w] > last:
            if bp.nodes[w].is_sink and all(depth[u] == last for u in preds[w]):
                depth[w] = 0
            elif n_levels is not None:
                return LevelResult(None, f"node {w} lies at depth {depth[w] + 1} > {n_levels}")
            else:
                last = max(last, int(depth[w]))
    for v in range(n):
        if depth[v] == last:
            continue
        for w in succ[v]:
            if depth[w] != depth[v] + 1:
                return LevelResult(None, f"edge {v}->{w} goes from level {depth[v] + 1} to level {depth[w] + 1}")
    levels = [sorted(np.flatnonzero(depth == i).tolist()) for i in range(last + 1)]
    return LevelResult(levels)


# ------------------------------------------------------------ mode profile
def check_mode_invariants(bp: BranchingProgram, tol: float = TOL) -> ValidationReport:
    """Mode-specific invariants for deterministic and randomized programs."""
    report = ValidationReport(checks=[f"{bp.mode}-invariants"])
    if bp.mode == "det":
        for v in bp.internal_ids:
            for b in (0, 1):
                es = bp.out_edges[v][b]
                if len(es) != 1 or abs(es[0].amp - 1) > tol:
                    report.add(Violation("det-edges", (int(v),), None,
                                         f"needs exactly one {b}-edge of weight 1, has {len(es)}"))
        if topological_order(bp) is None:
            report.add(Violation("det-acyclic", (), None, "deterministic programs must be acyclic"))
    elif bp.mode == "rand":
        for v in bp.internal_ids:
            for b in (0, 1):
                total = sum(e.amp.real for e in bp.out_edges[v][b])
                res = abs(total - 1)
                report.max_residual = max(report.max_residual, res)
                if res > tol:
                    report.add(Violation("rand-sum", (int(v),), float(res),
                                         f"{b}-edge probabilities sum to {total:.6g}"))
    return report


def validate_program(bp: BranchingProgram, tol: float = TOL) -> ValidationReport:
    """Full validation profile for the program's mode."""
    if bp.mode == "quantum":
        return check_well_formed(bp, tol).merge(check_unidirectional(bp))
    if bp.mode == "gm":
        return check_gm_well_formed(bp, tol).merge(check_unidirectional(bp))
    return check_mode_invariants(bp, tol)
