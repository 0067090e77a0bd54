"""Core data model for branching programs and the QBPF v1 file format.

A single immutable carrier, :class:`BranchingProgram`, represents
deterministic and randomized branching programs, quantum branching programs
(QBPs, QOBDDs) and generalized-measurement QBPs.  The ``mode`` field selects
the interpretation of the edge amplitudes.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

__all__ = [
    "MODES",
    "SINK_LABELS",
    "Node",
    "Edge",
    "BranchingProgram",
    "ProgramBuilder",
    "ProgramFormatError",
    "parse_program",
    "serialize_program",
    "load_program",
    "save_program",
    "check_assignment",
    "all_assignments",
    "with_mode",
]

MODES = ("det", "rand", "quantum", "gm")
SINK_LABELS = ("0", "1", "?")


class ProgramFormatError(ValueError):
    """Raised for malformed program documents or invalid references."""


@dataclass(frozen=True)
class Node:
    """A node of a branching program.

    Exactly one of ``var`` (internal node) and ``sink`` (sink label) is set.
    ``gm_class`` is only used for internal nodes in gm mode.
    """

    id: int
    var: int | None = None
    sink: str | None = None
    gm_class: int | None = None

    @property
    def is_sink(self) -> bool:
        return self.sink is not None


@dataclass(frozen=True)
class Edge:
    """Edge ``src -> dst`` taken when the tested bit equals ``bit``."""

    src: int
    dst: int
    bit: int
    amp: complex = 1.0 + 0.0j


@dataclass(frozen=True, eq=False)
class BranchingProgram:
    """Immutable branching program.

    Parameters
    ----------
    n_vars : int
        Number of input variables.
    nodes : sequence of Node
        Nodes with ids ``0..len(nodes)-1`` (any input order, stored sorted).
    edges : sequence of Edge
        Edges; zero-amplitude edges are dropped, edges are stored in the
        canonical ``(src, bit, dst)`` order.
    start : int
        Start node id.
    mode : {"det", "rand", "quantum", "gm"}
        Interpretation of the program.
    k : int, optional
        Number of measurement classes in gm mode (``k >= 3``).

    Notes
    -----
    Construction only checks references and structural rules.  Semantic
    constraints such as well-formedness live in :mod:`qbplab.validate`.
    """

    n_vars: int
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    start: int
    mode: str = "quantum"
    k: int | None = None

    def __post_init__(self):
        nodes = tuple(sorted(self.nodes, key=lambda v: v.id))
        edges = tuple(
            sorted(
                (Edge(int(e.src), int(e.dst), int(e.bit), complex(e.amp))
                 for e in self.edges if complex(e.amp) != 0),
                key=lambda e: (e.src, e.bit, e.dst),
            )
        )
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        _check_structure(self)

    # equality on content, ignoring cached properties
    def __eq__(self, other):
        if not isinstance(other, BranchingProgram):
            return NotImplemented
        return (self.n_vars, self.nodes, self.edges, self.start, self.mode, self.k) == (
            other.n_vars, other.nodes, other.edges, other.start, other.mode, other.k)

    def __hash__(self):
        return hash((self.n_vars, self.nodes, self.edges, self.start, self.mode, self.k))

    def __len__(self):
        return len(self.nodes)

    @property
    def size(self) -> int:
        """Total node count, sinks included."""
        return len(self.nodes)

    def __repr__(self):
        mode = f"gm({self.k})" if self.mode == "gm" else self.mode
        return (f"BranchingProgram(n_vars={self.n_vars}, size={self.size}, "
                f"edges={len(self.edges)}, start={self.start}, mode={mode})")

    # ------------------------------------------------------------------ views
    @cached_property
    def var_array(self) -> np.ndarray:
        """Variable index per node, ``-1`` for sinks."""
        return np.array([-1 if v.var is None else v.var for v in self.nodes], dtype=np.int64)

    @cached_property
    def sink_mask(self) -> np.ndarray:
        return np.array([v.is_sink for v in self.nodes], dtype=bool)

    @cached_property
    def label_masks(self) -> dict[str, np.ndarray]:
        """Boolean masks of the sinks carrying each output label."""
        return {r: np.array([v.sink == r for v in self.nodes], dtype=bool) for r in SINK_LABELS}

    @cached_property
    def internal_ids(self) -> np.ndarray:
        return np.flatnonzero(~self.sink_mask)

    @cached_property
    def sink_ids(self) -> np.ndarray:
        return np.flatnonzero(self.sink_mask)

    @cached_property
    def out_edges(self) -> tuple[tuple[tuple[Edge, ...], tuple[Edge, ...]], ...]:
        """``out_edges[v][b]`` lists the ``b``-edges leaving ``v``."""
        out = [([], []) for _ in self.nodes]
        for e in self.edges:
            out[e.src][e.bit].append(e)
        return tuple((tuple(a), tuple(b)) for a, b in out)

    @cached_property
    def predecessors(self) -> tuple[frozenset[int], ...]:
        pred = [set() for _ in self.nodes]
        for e in self.edges:
            pred[e.dst].add(e.src)
        return tuple(frozenset(p) for p in pred)

    @cached_property
    def transition_matrices(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """Sparse ``L_b`` with ``L_b[w, v] = delta(v, w, b)``."""
        n = self.size
        mats = []
        for b in (0, 1):
            es = [e for e in self.edges if e.bit == b]
            rows = np.array([e.dst for e in es], dtype=np.int64)
            cols = np.array([e.src for e in es], dtype=np.int64)
            vals = np.array([e.amp for e in es], dtype=complex)
            mats.append(sp.csr_matrix((vals, (rows, cols)), shape=(n, n)))
        return tuple(mats)

    def transition(self, bits: Sequence[int]) -> sp.csr_matrix:
        """The map ``L(a)``: column ``v`` holds the amplitudes of ``v``'s ``a_var(v)``-edges.

        Sink columns are zero, so ``L(a) = U(a) E_cont`` for every unitary
        completion ``U(a)``.
        """
        a = check_assignment(self, bits)
        var = self.var_array
        internal = var >= 0
        chosen = np.zeros(self.size, dtype=np.int64)
        chosen[internal] = a[var[internal]]
        m1 = internal & (chosen == 1)
        m0 = internal & (chosen == 0)
        L0, L1 = self.transition_matrices
        return (L0 @ sp.diags(m0.astype(complex)) + L1 @ sp.diags(m1.astype(complex))).tocsr()

    def node(self, v: int) -> Node:
        return self.nodes[v]

    def is_acyclic(self) -> bool:
        return topological_order(self) is not None


def topological_order(bp: BranchingProgram) -> list[int] | None:
    """Kahn topological order of all nodes, or ``None`` if there is a cycle."""
    n = bp.size
    succ = [set() for _ in range(n)]
    for e in bp.edges:
        succ[e.src].add(e.dst)
    indeg = [0] * n
    for s in succ:
        for w in s:
            indeg[w] += 1
    order = [v for v in range(n) if indeg[v] == 0]
    i = 0
    while i < len(order):
        v = order[i]
        i += 1
        for w in sorted(succ[v]):
            indeg[w] -= 1
            if indeg[w] == 0:
                order.append(w)
    return order if len(order) == n else None


def _check_structure(bp: BranchingProgram) -> None:
    if not isinstance(bp.n_vars, (int, np.integer)) or bp.n_vars < 0:
        raise ProgramFormatError(f"n_vars must be a nonnegative integer, got {bp.n_vars!r}")
    if bp.mode not in MODES:
        raise ProgramFormatError(f"unknown mode {bp.mode!r}")
    if bp.mode == "gm":
        if bp.k is None or bp.k < 3:
            raise ProgramFormatError("gm mode needs k >= 3")
    elif bp.k is not None:
        raise ProgramFormatError("k is only meaningful in gm mode")
    n = len(bp.nodes)
    if n == 0:
        raise ProgramFormatError("program has no nodes")
    for i, v in enumerate(bp.nodes):
        if v.id != i:
            raise ProgramFormatError(f"node ids must be dense 0..{n - 1}; missing or duplicate id near {i}")
        if (v.var is None) == (v.sink is None):
            raise ProgramFormatError(f"node {i}: exactly one of var and sink must be given")
        if v.sink is not None:
            if v.sink not in SINK_LABELS:
                raise ProgramFormatError(f"node {i}: sink label must be one of 0, 1, ?")
            if v.gm_class is not None:
                raise ProgramFormatError(f"node {i}: sinks carry no gm class")
            if bp.mode == "gm" and v.sink == "?":
                raise ProgramFormatError(f"node {i}: '?' sinks are not allowed in gm mode")
        else:
            if not 0 <= v.var < bp.n_vars:
                raise ProgramFormatError(f"node {i}: var {v.var} out of range [0, {bp.n_vars})")
            if bp.mode == "gm":
                if v.gm_class is None:
                    raise ProgramFormatError(f"node {i}: internal node missing gm class")
                if not 2 <= v.gm_class < bp.k:
                    raise ProgramFormatError(f"node {i}: gm class {v.gm_class} not in [2, {bp.k})")
            elif v.gm_class is not None:
                raise ProgramFormatError(f"node {i}: gm class given outside gm mode")
    if not 0 <= bp.start < n:
        raise ProgramFormatError(f"start {bp.start} is not a node id")
    seen = set()
    for e in bp.edges:
        if not (0 <= e.src < n and 0 <= e.dst < n):
            raise ProgramFormatError(f"dangling edge {e.src}->{e.dst} (bit {e.bit})")
        if e.bit not in (0, 1):
            raise ProgramFormatError(f"edge {e.src}->{e.dst}: bit must be 0 or 1")
        if bp.nodes[e.src].is_sink:
            raise ProgramFormatError(f"edge {e.src}->{e.dst}: leaves sink {e.src}")
        key = (e.src, e.dst, e.bit)
        if key in seen:
            raise ProgramFormatError(f"duplicate edge {e.src}->{e.dst} (bit {e.bit})")
        seen.add(key)
        if not np.isfinite(e.amp.real) or not np.isfinite(e.amp.imag):
            raise ProgramFormatError(f"edge {e.src}->{e.dst}: non-finite amplitude")
        if bp.mode == "rand" and (e.amp.imag != 0 or not 0 < e.amp.real <= 1):
            raise ProgramFormatError(f"edge {e.src}->{e.dst}: randomized amplitudes must be real in (0, 1]")


# ---------------------------------------------------------------- assignments
def check_assignment(bp: BranchingProgram, bits) -> np.ndarray:
    """Return ``bits`` as an int array, checking its length and values."""
    if isinstance(bits, str):
        bits = [int(c) for c in bits]
    a = np.asarray(bits, dtype=np.int64).reshape(-1)
    if a.size != bp.n_vars:
        raise ValueError(f"assignment has length {a.size}, program has {bp.n_vars} variables")
    if np.any((a != 0) & (a != 1)):
        raise ValueError("assignment entries must be 0 or 1")
    return a


def all_assignments(n: int) -> np.ndarray:
    """All ``2**n`` assignments; row ``i`` has bit ``j`` equal to bit ``j`` of ``i``."""
    idx = np.arange(2 ** n, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.int64)


def with_mode(bp: BranchingProgram, mode: str, k: int | None = None,
              classes: dict[int, int] | None = None) -> BranchingProgram:
    """Reinterpret ``bp`` under another mode.

    For gm mode every internal node gets class ``classes.get(v, 2)``.
    """
    nodes = []
    for v in bp.nodes:
        cls = None
        if mode == "gm" and not v.is_sink:
            cls = (classes or {}).get(v.id, 2)
        nodes.append(Node(v.id, v.var, v.sink, cls))
    return BranchingProgram(bp.n_vars, tuple(nodes), bp.edges, bp.start, mode,
                            k if mode == "gm" else None)


# -------------------------------------------------------------------- builder
@dataclass
class ProgramBuilder:
    """Incremental construction helper.

    Besides labeled internal nodes and sinks it supports *unlabeled* nodes,
    whose outgoing edges carry an amplitude only and are taken for either
    bit value.  Programs containing unlabeled nodes are turned into a
    :class:`BranchingProgram` by :func:`qbplab.transforms.expand_unlabeled`.
    """

    n_vars: int
    mode: str = "quantum"
    k: int | None = None
    _nodes: list = field(default_factory=list)
    _edges: dict = field(default_factory=dict)
    _free: dict = field(default_factory=dict)
    start: int = 0

    def add_internal(self, var: int, gm_class: int | None = None) -> int:
        self._nodes.append(("var", var, gm_class))
        return len(self._nodes) - 1

    def add_sink(self, label) -> int:
        self._nodes.append(("sink", str(label), None))
        return len(self._nodes) - 1

    def add_unlabeled(self) -> int:
        self._nodes.append(("free", None, None))
        return len(self._nodes) - 1

    def add_edge(self, src: int, dst: int, bit: int, amp: complex = 1.0) -> None:
        if self._nodes[src][0] != "var":
            raise ValueError(f"node {src} is not a labeled internal node")
        key = (src, dst, bit)
        self._edges[key] = self._edges.get(key, 0) + complex(amp)

    def add_free_edge(self, src: int, dst: int, amp: complex = 1.0) -> None:
        if self._nodes[src][0] != "free":
            raise ValueError(f"node {src} is not unlabeled")
        self._free[(src, dst)] = self._free.get((src, dst), 0) + complex(amp)

    @property
    def size(self) -> int:
        return len(self._nodes)

    def has_unlabeled(self) -> bool:
        return any(kind == "free" for kind, _, _ in self._nodes)

    def build(self, var_of_unlabeled: dict[int, int] | None = None) -> BranchingProgram:
        """Build the program; unlabeled nodes need a variable from ``var_of_unlabeled``."""
        nodes, edges = [], []
        for i, (kind, x, cls) in enumerate(self._nodes):
            if kind == "sink":
                nodes.append(Node(i, sink=x))
            elif kind == "var":
                nodes.append(Node(i, var=x, gm_class=cls))
            else:
                if var_of_unlabeled is None or i not in var_of_unlabeled:
                    raise ValueError(f"unlabeled node {i} needs expansion")
                nodes.append(Node(i, var=var_of_unlabeled[i],
                                  gm_class=2 if self.mode == "gm" else None))
        for (s, d, b), amp in self._edges.items():
            edges.append(Edge(s, d, b, amp))
        for (s, d), amp in self._free.items():
            edges.append(Edge(s, d, 0, amp))
            edges.append(Edge(s, d, 1, amp))
        return BranchingProgram(self.n_vars, tuple(nodes), tuple(edges), self.start,
                                self.mode, self.k)


# ---------------------------------------------------------------- QBPF v1 I/O
_MODE_NAMES = {"det": "det", "rand": "rand", "quantum": "quantum"}


def _fmt_float(x: float) -> str:
    s = format(float(x), ".17g")
    if s in ("-0", "0"):
        return "0.0" if s == "0" else "-0.0"
    return s


def serialize_program(bp: BranchingProgram) -> str:
    """Canonical QBPF v1 text for ``bp``.

    Nodes appear by id and edges by ``(from, bit, to)``, one per line.
    Amplitudes are written with 17 significant digits so that re-parsing is
    exact.
    """
    mode = {"gm": bp.k} if bp.mode == "gm" else _MODE_NAMES[bp.mode]
    lines = ["{",
             f'  "n_vars": {bp.n_vars},',
             f'  "mode": {json.dumps(mode)},',
             f'  "start": {bp.start},',
             '  "nodes": [']
    node_lines = []
    for v in bp.nodes:
        if v.is_sink:
            node_lines.append(f'    {{"id": {v.id}, "sink": "{v.sink}"}}')
        elif v.gm_class is not None:
            node_lines.append(f'    {{"id": {v.id}, "var": {v.var}, "class": {v.gm_class}}}')
        else:
            node_lines.append(f'    {{"id": {v.id}, "var": {v.var}}}')
    lines.append(",\n".join(node_lines))
    lines.append("  ],")
    lines.append('  "edges": [')
    edge_lines = [
        f'    {{"from": {e.src}, "to": {e.dst}, "bit": {e.bit}, '
        f'"amp": [{_fmt_float(e.amp.real)}, {_fmt_float(e.amp.imag)}]}}'
        for e in bp.edges
    ]
    if edge_lines:
        lines.append(",\n".join(edge_lines))
    lines.append("  ]")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _require(obj, key, kind, where):
    if key not in obj:
        raise ProgramFormatError(f"{where}: missing field '{key}'")
    val = obj[key]
    if kind is int and (isinstance(val, bool) or not isinstance(val, int)):
        raise ProgramFormatError(f"{where}: field '{key}' must be an integer")
    return val


def parse_program(text: str) -> BranchingProgram:
    """Parse a QBPF v1 document.

    Raises
    ------
    ProgramFormatError
        On JSON syntax errors (with line and column), missing or mistyped
        fields, dangling ids and duplicate edges.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProgramFormatError(f"syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ProgramFormatError("top level must be an object")
    n_vars = _require(doc, "n_vars", int, "document")
    start = _require(doc, "start", int, "document")
    mode_raw = _require(doc, "mode", None, "document")
    k = None
    if isinstance(mode_raw, dict):
        if set(mode_raw) != {"gm"} or isinstance(mode_raw["gm"], bool) or not isinstance(mode_raw["gm"], int):
            raise ProgramFormatError("document: field 'mode' must be {\"gm\": k}")
        mode, k = "gm", mode_raw["gm"]
    elif mode_raw in _MODE_NAMES:
        mode = mode_raw
    else:
        raise ProgramFormatError(f"document: unknown mode {mode_raw!r}")
    raw_nodes = _require(doc, "nodes", None, "document")
    raw_edges = _require(doc, "edges", None, "document")
    if not isinstance(raw_nodes, list) or not isinstance(raw_edges, list):
        raise ProgramFormatError("document: 'nodes' and 'edges' must be arrays")
    nodes = []
    ids = set()
    for i, rn in enumerate(raw_nodes):
        where = f"nodes[{i}]"
        if not isinstance(rn, dict):
            raise ProgramFormatError(f"{where}: must be an object")
        nid = _require(rn, "id", int, where)
        if nid in ids:
            raise ProgramFormatError(f"{where}: duplicate id {nid}")
        ids.add(nid)
        if "sink" in rn:
            if "var" in rn or "class" in rn:
                raise ProgramFormatError(f"{where}: sink nodes take no 'var' or 'class'")
            if rn["sink"] not in SINK_LABELS:
                raise ProgramFormatError(f"{where}: field 'sink' must be \"0\", \"1\" or \"?\"")
            nodes.append(Node(nid, sink=rn["sink"]))
        else:
            var = _require(rn, "var", int, where)
            cls = rn.get("class")
            if cls is not None and (isinstance(cls, bool) or not isinstance(cls, int)):
                raise ProgramFormatError(f"{where}: field 'class' must be an integer")
            nodes.append(Node(nid, var=var, gm_class=cls))
    if ids and ids != set(range(len(ids))):
        raise ProgramFormatError(f"node ids must be dense 0..{len(ids) - 1}")
    edges = []
    for i, re_ in enumerate(raw_edges):
        where = f"edges[{i}]"
        if not isinstance(re_, dict):
            raise ProgramFormatError(f"{where}: must be an object")
        s = _require(re_, "from", int, where)
        d = _require(re_, "to", int, where)
        b = _require(re_, "bit", int, where)
        amp = _require(re_, "amp", None, where)
        if (not isinstance(amp, list) or len(amp) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in amp)):
            raise ProgramFormatError(f"{where}: field 'amp' must be [re, im]")
        if s not in ids or d not in ids:
            raise ProgramFormatError(f"{where}: dangling id in edge {s}->{d}")
        edges.append(Edge(s, d, b, complex(float(amp[0]), float(amp[1]))))
    keys = [(e.src, e.dst, e.bit) for e in edges]
    if len(set(keys)) != len(keys):
        dup = next(k_ for k_ in keys if keys.count(k_) > 1)
        raise ProgramFormatError(f"duplicate edge {dup[0]}->{dup[1]} (bit {dup[2]})")
    return BranchingProgram(n_vars, tuple(nodes), tuple(edges), start, mode, k)


def load_program(path) -> BranchingProgram:
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read())


def save_program(bp: BranchingProgram, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_program(bp))


def iter_edges(bp: BranchingProgram, v: int, bit: int) -> Iterable[Edge]:
    return bp.out_edges[v][bit]
