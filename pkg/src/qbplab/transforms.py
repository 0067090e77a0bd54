"""Structure-preserving rewrites of branching programs."""
from __future__ import annotations

import itertools
import logging
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .model import BranchingProgram, Edge, Node, ProgramBuilder
from .validate import ValidationReport, check_unidirectional, infer_variable_order

logger = logging.getLogger(__name__)

__all__ = [
    "ClockParams",
    "ExpansionError",
    "prune_unreachable",
    "levelize",
    "realify",
    "expand_unlabeled",
    "randomized_to_gm",
    "clock_wrap",
    "align_levels",
    "amplify",
    "COMBINERS",
]


class ExpansionError(ValueError):
    """Expanding unlabeled nodes produced a non-unidirectional program."""

    def __init__(self, report: ValidationReport):
        super().__init__(report.to_text())
        self.report = report


def _renumbered(n_vars, nodes, edges, start, mode="quantum", k=None):
    """Build a program from nodes keyed by arbitrary hashable ids.

    ``nodes`` is a list of ``(key, var, sink, cls)`` in the desired id order;
    ``edges`` a list of ``(src_key, dst_key, bit, amp)``.  Only nodes
    reachable from ``start`` are kept.
    """
    succ = {}
    for s, d, _, _ in edges:
        succ.setdefault(s, []).append(d)
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w in succ.get(v, ()):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    ids = {}
    out_nodes = []
    for key, var, sink, cls in nodes:
        if key in seen and key not in ids:
            ids[key] = len(ids)
            out_nodes.append(Node(ids[key], var=var, sink=sink, gm_class=cls))
    out_edges = [Edge(ids[s], ids[d], b, a) for s, d, b, a in edges if s in ids]
    return BranchingProgram(n_vars, tuple(out_nodes), tuple(out_edges), ids[start], mode, k)


def prune_unreachable(bp: BranchingProgram) -> BranchingProgram:
    """Drop nodes not reachable from the start, keeping the relative id order."""
    nodes = [(v.id, v.var, v.sink, v.gm_class) for v in bp.nodes]
    edges = [(e.src, e.dst, e.bit, e.amp) for e in bp.edges]
    return _renumbered(bp.n_vars, nodes, edges, bp.start, bp.mode, bp.k)


# ------------------------------------------------------------------ levelize
def levelize(bp: BranchingProgram, t: int) -> BranchingProgram:
    """Leveled program with ``t + 1`` levels that stops exactly at step ``t``.

    Level ``l`` holds a copy ``(v, l)`` of every internal node.  An edge into
    a sink ``w`` from level ``l - 1`` enters a delay chain that reaches a
    copy of ``w`` at level ``t``, so every output is emitted at step ``t``
    with probability ``p_{G,r}(a, t)``.  Internal copies at level ``t`` lead
    to fresh ``?``-sinks, which the leveling places in the first level
    (edges leaving the last level are unconstrained).  Size is at most
    ``(t+1) |V \\ F| + |V \\ F| + |F| (t+1)(t+2)/2``.
    """
    if bp.mode != "quantum":
        raise ValueError("levelize needs a quantum program")
    if t < 0:
        raise ValueError("t must be nonnegative")
    internal = [v for v in bp.nodes if not v.is_sink]
    if bp.n_vars == 0:
        return bp
    nodes, edges = [], []

    def chain(w, tau):
        """Entry of the delay chain for sink ``w`` entered at level ``tau``."""
        return ("D", w, tau, tau)

    for v in internal:
        for l in range(t + 1):
            nodes.append((("C", v.id, l), v.var, None, None))
    for w in bp.sink_ids:
        label = bp.nodes[w].sink
        for tau in range(t + 1):
            for l in range(tau, t + 1):
                key = ("D", int(w), tau, l)
                if l == t:
                    nodes.append((key, None, label, None))
                else:
                    nodes.append((key, 0, None, None))
                    for b in (0, 1):
                        edges.append((key, ("D", int(w), tau, l + 1), b, 1.0))
    for v in internal:
        nodes.append((("Z", v.id), None, "?", None))
        for l in range(t + 1):
            src = ("C", v.id, l)
            if l == t:
                for b in (0, 1):
                    edges.append((src, ("Z", v.id), b, 1.0))
                continue
            for b in (0, 1):
                for e in bp.out_edges[v.id][b]:
                    dst = chain(e.dst, l + 1) if bp.nodes[e.dst].is_sink else ("C", e.dst, l + 1)
                    edges.append((src, dst, b, e.amp))
    start = chain(bp.start, 0) if bp.nodes[bp.start].is_sink else ("C", bp.start, 0)
    out = _renumbered(bp.n_vars, nodes, edges, start)
    logger.debug("levelize t=%d: %d -> %d nodes", t, bp.size, out.size)
    return out


# -------------------------------------------------------------------- realify
def realify(bp: BranchingProgram) -> BranchingProgram:
    """Equivalent program with real amplitudes.

    Node ``v`` splits into ``v_re`` and ``v_im`` holding the real and
    imaginary part of its amplitude; an amplitude ``x + iy`` becomes the
    real 2x2 block ``[[x, -y], [y, x]]``.  Unreachable halves are dropped,
    so an already-real program keeps its size.
    """
    if bp.mode != "quantum":
        raise ValueError("realify needs a quantum program")
    nodes, edges = [], []
    for v in bp.nodes:
        for part in ("r", "i"):
            nodes.append(((v.id, part), v.var, v.sink, None))
    for e in bp.edges:
        x, y = e.amp.real, e.amp.imag
        for sp_, dp_, amp in (("r", "r", x), ("r", "i", y), ("i", "r", -y), ("i", "i", x)):
            if amp != 0:
                edges.append(((e.src, sp_), (e.dst, dp_), e.bit, amp))
    return _renumbered(bp.n_vars, nodes, edges, (bp.start, "r"))


# ----------------------------------------------------------- unlabeled nodes
def expand_unlabeled(builder: ProgramBuilder) -> BranchingProgram:
    """Replace every unlabeled node by a node labeled with some variable.

    Each amplitude-only edge becomes a 0-edge and a 1-edge with the same
    amplitude.  Unlabeled nodes that share a successor with labeled nodes
    take their variable; otherwise variable 0 is used.  The result is
    checked for unidirectionality.

    Raises
    ------
    ExpansionError
        If no choice of labels makes the program unidirectional.
    """
    n = builder.size
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    preds = {}
    for (s, d, _b) in builder._edges:
        preds.setdefault(d, set()).add(s)
    for (s, d) in builder._free:
        preds.setdefault(d, set()).add(s)
    for ps in preds.values():
        ps = sorted(ps)
        for p in ps[1:]:
            ra, rb = find(ps[0]), find(p)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    group_var = {}
    for i, (kind, x, _cls) in enumerate(builder._nodes):
        if kind == "var":
            group_var.setdefault(find(i), x)
    labels = {}
    for i, (kind, _x, _cls) in enumerate(builder._nodes):
        if kind == "free":
            labels[i] = group_var.get(find(i), 0)
    if labels and builder.n_vars == 0:
        raise ValueError("unlabeled nodes need at least one input variable")
    bp = builder.build(labels)
    report = check_unidirectional(bp)
    if not report.ok:
        raise ExpansionError(report)
    return bp


# ------------------------------------------------------------ randomized -> gm
def randomized_to_gm(bp: BranchingProgram) -> BranchingProgram:
    """gm program simulating a randomized one.

    Probabilities ``p`` become amplitudes ``sqrt(p)`` and every internal node
    forms its own measurement class, so the measurement collapses the state
    onto a single node before every step.
    """
    if bp.mode != "rand" and bp.mode != "det":
        raise ValueError("randomized_to_gm needs a randomized or deterministic program")
    if any(v.sink == "?" for v in bp.nodes):
        raise ValueError("gm programs have only 0- and 1-sinks")
    nodes, cls = [], 2
    for v in bp.nodes:
        if v.is_sink:
            nodes.append(Node(v.id, sink=v.sink))
        else:
            nodes.append(Node(v.id, var=v.var, gm_class=cls))
            cls += 1
    edges = [Edge(e.src, e.dst, e.bit, complex(np.sqrt(e.amp.real))) for e in bp.edges]
    return BranchingProgram(bp.n_vars, tuple(nodes), tuple(edges), bp.start, "gm", max(cls, 3))


# ---------------------------------------------------------------------- clock
@dataclass(frozen=True)
class ClockParams:
    """Abort amplitudes of the probabilistic clock for parameter ``t``."""

    t: int

    def __post_init__(self):
        if self.t < 1:
            raise ValueError("clock parameter t must be positive")

    @property
    def exact(self) -> tuple[Fraction, Fraction]:
        a = 2 ** (2 * self.t + 1) + 2 ** (self.t + 1)
        c = a + 1
        return Fraction(a, c), Fraction(2 ** (self.t + 1) + 1, c)

    @property
    def beta(self) -> float:
        return float(self.exact[0])

    @property
    def gamma(self) -> float:
        return float(self.exact[1])


def clock_wrap(bp: BranchingProgram, t: int) -> BranchingProgram:
    """Add a probabilistic clock to ``bp``.

    Every internal node ``v`` becomes the gadget ``w_v -> beta w'_v +
    gamma w*_v`` where ``w*_v`` is a 0-sink and ``w'_v`` carries the edges of
    ``v``; these lead to ``w''_u``, which forwards to ``w_u`` (or is the sink
    ``u`` itself).  One step of ``bp`` takes three steps and is aborted with
    probability ``gamma**2``.
    """
    if bp.mode != "quantum":
        raise ValueError("clock_wrap needs a quantum program")
    if bp.nodes[bp.start].is_sink:
        return bp
    params = ClockParams(t)
    b = ProgramBuilder(bp.n_vars)
    w, wp, target = {}, {}, {}
    for v in bp.nodes:
        if v.is_sink:
            target[v.id] = b.add_sink(v.sink)
        else:
            w[v.id] = b.add_unlabeled()
            wp[v.id] = b.add_internal(v.var)
            star = b.add_sink("0")
            target[v.id] = b.add_unlabeled()
            b.add_free_edge(w[v.id], wp[v.id], params.beta)
            b.add_free_edge(w[v.id], star, params.gamma)
            b.add_free_edge(target[v.id], w[v.id], 1.0)
    for e in bp.edges:
        b.add_edge(wp[e.src], target[e.dst], e.bit, e.amp)
    b.start = w[bp.start]
    return prune_unreachable(expand_unlabeled(b))


# -------------------------------------------------------------------- amplify
def _all_accept(labels):
    if "0" in labels:
        return "0"
    return "1" if all(x == "1" for x in labels) else "?"


def _majority(labels):
    k = len(labels)
    for r in ("1", "0"):
        if sum(x == r for x in labels) * 2 > k:
            return r
    return "?"


COMBINERS = {"all-accept": _all_accept, "majority": _majority}


def _decided(labels, k, combiner):
    """Outcome fixed by the known labels whatever the others turn out to be."""
    known = [x for x in labels if x is not None]
    if len(known) == k:
        return combiner(known)
    if combiner is _all_accept:
        return "0" if "0" in known else None
    for r in ("1", "0"):
        if sum(x == r for x in known) * 2 > k:
            return r
    return None


def align_levels(bp: BranchingProgram, order=None) -> tuple[BranchingProgram, list]:
    """Ordered program in which level ``l`` tests ``order[l]`` on every path.

    Skipped variables are filled in by pass-through nodes, and sinks are
    delayed to level ``n``.  Returns the program and the level of each node.
    """
    if order is None:
        res = infer_variable_order(bp)
        if not res.ok:
            raise ValueError(f"program is not ordered: {res.violation}")
        order = res.order
    n = bp.n_vars
    pos = {x: i for i, x in enumerate(order)}

    def level(v):
        node = bp.nodes[v]
        return n if node.is_sink else pos[node.var]

    nodes, edges = [], []
    for v in bp.nodes:
        nodes.append((("N", v.id), v.var, v.sink, None))

    chains = set()

    def entry(w, from_level):
        """Node entered from ``from_level`` on the way to ``w``."""
        lw = level(w)
        if from_level + 1 >= lw:
            return ("N", w)
        for l in range(from_level + 1, lw):
            key = ("P", w, l)
            if key not in chains:
                chains.add(key)
                nodes.append((key, order[l], None, None))
                nxt = ("P", w, l + 1) if l + 1 < lw else ("N", w)
                edges.append((key, nxt, 0, 1.0))
                edges.append((key, nxt, 1, 1.0))
        return ("P", w, from_level + 1)

    for e in bp.edges:
        edges.append((("N", e.src), entry(e.dst, level(e.src)), e.bit, e.amp))
    start = entry(bp.start, -1)
    out = _renumbered(n, nodes, edges, start)
    # recover levels by breadth-first depth
    lev = [-1] * out.size
    lev[out.start] = 0
    q = deque([out.start])
    while q:
        v = q.popleft()
        for b in (0, 1):
            for e in out.out_edges[v][b]:
                if lev[e.dst] < 0:
                    lev[e.dst] = lev[v] + 1
                    q.append(e.dst)
    return out, lev


def _final_label(bp, levels, v):
    """Sink label a node is committed to, or None if it still branches."""
    node = bp.nodes[v]
    while not node.is_sink:
        es = bp.out_edges[v][0] + bp.out_edges[v][1]
        dsts = {e.dst for e in es}
        if len(dsts) != 1 or len(es) != 2 or any(e.amp != 1 for e in es):
            return None
        v = dsts.pop()
        node = bp.nodes[v]
    return node.sink


def amplify(bp: BranchingProgram, copies: int, combiner: str = "all-accept") -> BranchingProgram:
    """Run ``copies`` independent copies of an ordered program in lockstep.

    The program is first aligned so that every path reads all variables in
    the inferred order; the product then tests one variable per level and
    carries the tensor product of the copies' states.  A product node whose
    combined outcome is already determined becomes a sink.

    Parameters
    ----------
    combiner : {"all-accept", "majority"}
        ``all-accept`` outputs 1 iff every copy outputs 1 (for one-sided
        error this gives error ``eps**copies``); ``majority`` outputs the
        strict-majority label and ``?`` otherwise.
    """
    if bp.mode != "quantum":
        raise ValueError("amplify needs a quantum program")
    if copies < 1:
        raise ValueError("copies must be positive")
    if combiner not in COMBINERS:
        raise ValueError(f"unknown combiner {combiner!r}")
    res = infer_variable_order(bp)
    if not res.ok:
        raise ValueError(f"amplify needs an ordered program: {res.violation}")
    comb = COMBINERS[combiner]
    al, lev = align_levels(bp, res.order)
    final = [_final_label(al, lev, v) for v in range(al.size)]
    k = copies
    start = (al.start,) * k
    ids = {start: 0}
    nodes, edges = [], []
    queue = deque([start])
    while queue:
        tup = queue.popleft()
        i = ids[tup]
        decided = _decided([final[v] for v in tup], k, comb)
        if decided is not None:
            nodes.append(Node(i, sink=decided))
            continue
        var = al.nodes[tup[0]].var
        nodes.append(Node(i, var=var))
        for b in (0, 1):
            choices = [al.out_edges[v][b] for v in tup]
            for combo in itertools.product(*choices):
                dst = tuple(e.dst for e in combo)
                amp = np.prod([e.amp for e in combo])
                if dst not in ids:
                    ids[dst] = len(ids)
                    queue.append(dst)
                edges.append(Edge(i, ids[dst], b, complex(amp)))
    out = BranchingProgram(bp.n_vars, tuple(nodes), tuple(edges), 0, "quantum")
    logger.debug("amplify k=%d: %d -> %d nodes", k, bp.size, out.size)
    return out
