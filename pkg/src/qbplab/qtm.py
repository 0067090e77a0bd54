"""Bounded-tape quantum Turing machines: simulation and compilation of the
configuration graph into a quantum branching program.

A machine has an input tape (``n`` cells holding the input bits), an
optional read-only advice tape and a work tape of ``S`` cells.  The result
of a halting configuration is the first character of the symbol in work
cell 0 if that is ``0``, ``1`` or ``?``, and ``?`` otherwise.
"""
from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .model import BranchingProgram, Edge, Node
from .semantics import EvolutionTrace
from .validate import ValidationReport, Violation, check_unidirectional, check_well_formed

logger = logging.getLogger(__name__)

__all__ = [
    "BLANK",
    "QtmError",
    "Transition",
    "QtmSpec",
    "Config",
    "load_qtm",
    "simulate_qtm",
    "compile_to_qbp",
    "reachable_configs",
    "is_unidirectional",
    "config_space_bound",
    "BUNDLED_MACHINES",
    "bundled_machine",
]

BLANK = "_"
TOL = 1e-9


class QtmError(ValueError):
    """Invalid machine description or a transition leaving a tape."""


@dataclass(frozen=True)
class Transition:
    """``delta(q, (s_in, s_adv, s_w)) -> (q', s_w', move)`` with amplitude ``amp``.

    ``move`` holds the head moves ``(d_in, d_adv, d_w)``; ``None`` means the
    entry directions declared for ``q'``.
    """

    state: str
    read: tuple
    target: str
    write: str
    amp: complex
    move: tuple | None = None


@dataclass
class QtmSpec:
    """A finite machine with bounded tapes."""

    states: list
    start: str
    final: str
    alphabet: list
    n: int
    work_cells: int
    transitions: list
    directions: dict = field(default_factory=dict)
    advice: str | None = None
    work_init: str | None = None
    name: str = "qtm"

    def __post_init__(self):
        if self.start not in self.states or self.final not in self.states:
            raise QtmError("start and final must be listed states")
        missing = {"0", "1", "?", BLANK} - set(self.alphabet)
        if missing:
            raise QtmError(f"work alphabet lacks {sorted(missing)}")
        if self.n < 1 or self.work_cells < 1:
            raise QtmError("input length and work tape size must be positive")
        init = self.initial_work
        if len(init) != self.work_cells or any(c not in self.alphabet for c in init):
            raise QtmError("work_init must list work_cells alphabet symbols")
        table = {}
        for tr in self.transitions:
            if tr.state not in self.states or tr.target not in self.states:
                raise QtmError(f"transition mentions an unknown state: {tr}")
            if tr.state == self.final:
                raise QtmError("the final state has no outgoing transitions")
            if tr.write not in self.alphabet or tr.read[2] not in self.alphabet:
                raise QtmError(f"transition uses a symbol outside the work alphabet: {tr}")
            if tr.read[0] not in ("0", "1"):
                raise QtmError(f"input symbol must be 0 or 1: {tr}")
            move = self.move_of(tr)
            if len(move) != 3 or any(d not in (-1, 0, 1) for d in move):
                raise QtmError(f"moves must be -1, 0 or 1: {tr}")
            key = (tr.state, tuple(tr.read), tr.target, tr.write, move)
            if key in table:
                raise QtmError(f"duplicate transition {key}")
            table[key] = tr
        self._delta = {}
        for tr in self.transitions:
            self._delta.setdefault((tr.state, tuple(tr.read)), []).append(tr)

    @property
    def initial_work(self) -> tuple:
        if self.work_init is None:
            return (BLANK,) * self.work_cells
        return tuple(self.work_init) if isinstance(self.work_init, str) else tuple(self.work_init)

    @property
    def advice_tape(self) -> str:
        return self.advice if self.advice else BLANK

    def move_of(self, tr: Transition) -> tuple:
        if tr.move is not None:
            return tuple(tr.move)
        if tr.target not in self.directions:
            raise QtmError(f"no move given and no entry directions for {tr.target!r}")
        return tuple(self.directions[tr.target])

    def delta(self, q, read):
        return self._delta.get((q, read), [])

    @classmethod
    def from_dict(cls, d: dict) -> "QtmSpec":
        try:
            trs = []
            for t in d["transitions"]:
                amp = t.get("amp", 1.0)
                amp = complex(amp[0], amp[1]) if isinstance(amp, (list, tuple)) else complex(amp)
                read = t["read"]
                if isinstance(read, str):
                    raise QtmError("'read' must be a list [input, advice, work]")
                if len(read) == 2:
                    read = [read[0], BLANK, read[1]]
                mv = t.get("move")
                trs.append(Transition(t["from"], tuple(str(x) for x in read), t["to"],
                                      str(t["write"]), amp, None if mv is None else tuple(mv)))
            dirs = {q: tuple(v) for q, v in d.get("directions", {}).items()}
            return cls(list(d["states"]), d["start"], d["final"], [str(a) for a in d["alphabet"]],
                       int(d["n"]), int(d["work_cells"]), trs, dirs, d.get("advice"),
                       d.get("work_init"), d.get("name", "qtm"))
        except KeyError as exc:
            raise QtmError(f"missing field {exc.args[0]!r}") from None

    def to_dict(self) -> dict:
        trs = []
        for t in self.transitions:
            e = {"from": t.state, "read": list(t.read), "to": t.target, "write": t.write,
                 "amp": [t.amp.real, t.amp.imag]}
            if t.move is not None:
                e["move"] = list(t.move)
            trs.append(e)
        d = {"name": self.name, "states": self.states, "start": self.start, "final": self.final,
             "alphabet": self.alphabet, "n": self.n, "work_cells": self.work_cells,
             "directions": {q: list(v) for q, v in self.directions.items()}, "transitions": trs}
        if self.advice is not None:
            d["advice"] = self.advice
        if self.work_init is not None:
            d["work_init"] = "".join(self.work_init) if all(len(c) == 1 for c in self.work_init) \
                else list(self.work_init)
        return d


def load_qtm(path) -> QtmSpec:
    with open(path) as fh:
        try:
            return QtmSpec.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise QtmError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from None


@dataclass(frozen=True, order=True)
class Config:
    """Machine state, work tape contents and head positions."""

    state: str
    work: tuple
    i: int
    j: int
    k: int


def _start(m: QtmSpec) -> Config:
    return Config(m.start, m.initial_work, 0, 0, 0)


def _output(m: QtmSpec, c: Config) -> str:
    s = c.work[0][:1]
    return s if s in ("0", "1", "?") else "?"


def _successors(m: QtmSpec, c: Config, bit: int):
    """``[(config', amplitude)]`` for reading input symbol ``bit``."""
    adv = m.advice_tape
    read = (str(bit), adv[c.j], c.work[c.k])
    out = {}
    for tr in m.delta(c.state, read):
        di, da, dw = m.move_of(tr)
        i, j, k = c.i + di, c.j + da, c.k + dw
        if not (0 <= i < m.n and 0 <= j < len(adv) and 0 <= k < m.work_cells):
            raise QtmError(f"transition {tr} moves a head off its tape from {c}")
        w = c.work[:c.k] + (tr.write,) + c.work[c.k + 1:]
        nc = Config(tr.target, w, i, j, k)
        out[nc] = out.get(nc, 0) + tr.amp
    return [(nc, a) for nc, a in out.items() if a != 0]


def reachable_configs(m: QtmSpec, bits=None) -> list[Config]:
    """Configurations reachable from the start, in breadth-first order.

    With ``bits`` given only that input is followed; otherwise both
    values of every input read are explored.
    """
    start = _start(m)
    seen = {start}
    order = [start]
    queue = deque([start])
    while queue:
        c = queue.popleft()
        if c.state == m.final:
            continue
        choices = (0, 1) if bits is None else (int(bits[c.i]),)
        for b in choices:
            for nc, _ in _successors(m, c, b):
                if nc not in seen:
                    seen.add(nc)
                    order.append(nc)
                    queue.append(nc)
    return order


def config_space_bound(m: QtmSpec) -> int:
    """``|Q| |Sigma|^S n S`` times the advice length."""
    return len(m.states) * len(m.alphabet) ** m.work_cells * m.n * m.work_cells * len(m.advice_tape)


def is_unidirectional(m: QtmSpec) -> ValidationReport:
    """Every state is entered with a single head-move triple."""
    rep = ValidationReport(checks=["qtm-unidirectional"])
    moves = {}
    for tr in m.transitions:
        moves.setdefault(tr.target, set()).add(m.move_of(tr))
    for q, mv in sorted(moves.items()):
        if len(mv) > 1:
            rep.add(Violation("qtm-unidirectional", (q,), None, f"state {q!r} entered with moves {sorted(mv)}"))
    return rep


def _check_isometry(m: QtmSpec, configs, bits, tol=TOL):
    """Columns of the non-final configurations must be orthonormal."""
    idx = {c: n for n, c in enumerate(configs)}
    cols = []
    for c in configs:
        if c.state == m.final:
            continue
        col = {}
        for nc, a in _successors(m, c, int(bits[c.i])):
            col[idx[nc]] = a
        cols.append(col)
    G = np.zeros((len(cols), len(cols)), dtype=complex)
    for x, cx in enumerate(cols):
        for y in range(x, len(cols)):
            cy = cols[y]
            G[x, y] = sum(np.conj(cx[r]) * cy[r] for r in cx.keys() & cy.keys())
            G[y, x] = np.conj(G[x, y])
    res = np.abs(G - np.eye(len(cols))).max() if cols else 0.0
    if res > tol:
        raise QtmError(f"time evolution is not unitary on the reachable configurations "
                       f"(max |U^dagger U - I| = {res:.3g})")


def simulate_qtm(m: QtmSpec, bits, T: int, check: bool = True) -> EvolutionTrace:
    """Alternate the final-state measurement and one step of ``U(a)``.

    Halting mass at step ``t`` is split by the result in work cell 0.
    """
    bits = np.asarray([int(c) for c in bits] if isinstance(bits, str) else bits, dtype=np.int64)
    if bits.size != m.n or np.any((bits != 0) & (bits != 1)):
        raise ValueError(f"expected {m.n} input bits")
    if check:
        _check_isometry(m, reachable_configs(m, bits), bits)
    labels = ("0", "1", "?")
    psi = {_start(m): 1.0 + 0j}
    halting = np.zeros((T + 1, 3))
    residual = np.zeros(T + 1)
    for t in range(T + 1):
        live = {}
        for c, a in psi.items():
            p = abs(a) ** 2
            if c.state == m.final:
                halting[t, labels.index(_output(m, c))] += p
            else:
                live[c] = a
        residual[t] = sum(abs(a) ** 2 for a in live.values())
        if t == T:
            break
        psi = {}
        for c, a in live.items():
            for nc, amp in _successors(m, c, int(bits[c.i])):
                psi[nc] = psi.get(nc, 0) + amp * a
    return EvolutionTrace(halting, residual, None)


def compile_to_qbp(m: QtmSpec, check: bool = False):
    """Configuration graph of ``m`` as a quantum branching program.

    Nodes are the configurations reachable from the start under any input,
    numbered in breadth-first order (the start is node 0).  A non-final
    configuration is labeled by its input head position and has a
    ``b``-edge to each successor under input symbol ``b``; final
    configurations are sinks labeled by their result.

    Returns
    -------
    program : BranchingProgram
    configs : list of Config
        ``configs[v]`` is the configuration of node ``v``.

    Raises
    ------
    QtmError
        If ``check`` is true and the program fails well-formedness or
        unidirectionality.
    """
    configs = reachable_configs(m)
    idx = {c: n for n, c in enumerate(configs)}
    nodes, edges = [], []
    for v, c in enumerate(configs):
        if c.state == m.final:
            nodes.append(Node(v, sink=_output(m, c)))
            continue
        nodes.append(Node(v, var=c.i))
        for b in (0, 1):
            for nc, a in _successors(m, c, b):
                edges.append(Edge(v, idx[nc], b, complex(a)))
    bp = BranchingProgram(m.n, tuple(nodes), tuple(edges), 0, "quantum")
    logger.info("compiled %s: %d configurations (bound %d)", m.name, bp.size, config_space_bound(m))
    if check:
        rep = check_well_formed(bp).merge(check_unidirectional(bp))
        if not rep.ok:
            raise QtmError("compiled program is invalid:\n" + rep.to_text())
    return bp, configs


# ---------------------------------------------------------- bundled machines
_ALPHA = ["0", "1", "?", BLANK]
_R = 2 ** -0.5


def _t(q, read, to, write, amp=1.0, move=None):
    return {"from": q, "read": read, "to": to, "write": write, "amp": [complex(amp).real, complex(amp).imag],
            **({} if move is None else {"move": move})}


def _immediate_halt():
    return {"name": "immediate-halt", "states": ["f"], "start": "f", "final": "f", "alphabet": _ALPHA,
            "n": 1, "work_cells": 1, "work_init": "1", "directions": {"f": [0, 0, 0]}, "transitions": []}


def _scan_or(n=3):
    """Right scan; halts writing 1 at the first 1, or 0 at the marked last cell."""
    trs = [_t("a", ["0", BLANK, BLANK], "a", BLANK),
           _t("a", ["1", BLANK, BLANK], "f", "1"),
           _t("a", ["1", "#", BLANK], "f", "1"),
           _t("a", ["0", "#", BLANK], "f", "0")]
    return {"name": f"or-{n}", "states": ["a", "f"], "start": "a", "final": "f", "alphabet": _ALPHA,
            "n": n, "work_cells": 1, "advice": BLANK * (n - 1) + "#",
            "directions": {"a": [1, 1, 0], "f": [0, 0, 0]}, "transitions": trs}


def _parity(n=4):
    """Reversible parity scan carrying the running parity in the state."""
    trs = []
    for q, p in (("e", 0), ("o", 1)):
        for b in (0, 1):
            nxt = "e" if (p ^ b) == 0 else "o"
            trs.append(_t(q, [str(b), BLANK, BLANK], nxt, BLANK))
            trs.append(_t(q, [str(b), "#", BLANK], "f", str(p ^ b)))
    return {"name": f"parity-{n}", "states": ["e", "o", "f"], "start": "e", "final": "f",
            "alphabet": _ALPHA, "n": n, "work_cells": 1, "advice": BLANK * (n - 1) + "#",
            "directions": {"e": [1, 1, 0], "o": [1, 1, 0], "f": [0, 0, 0]}, "transitions": trs}


def _interference():
    """XOR of two bits by two Hadamard-like splits; one branch cancels."""
    trs = []
    for b in (0, 1):
        sgn = -1 if b else 1
        trs += [_t("s", [str(b), BLANK, BLANK], "l", BLANK, _R),
                _t("s", [str(b), BLANK, BLANK], "r", BLANK, sgn * _R),
                _t("l", [str(b), BLANK, BLANK], "p", BLANK, _R),
                _t("l", [str(b), BLANK, BLANK], "m", BLANK, _R),
                _t("r", [str(b), BLANK, BLANK], "p", BLANK, sgn * _R),
                _t("r", [str(b), BLANK, BLANK], "m", BLANK, -sgn * _R),
                _t("p", [str(b), BLANK, BLANK], "f", "0"),
                _t("m", [str(b), BLANK, BLANK], "f", "1")]
    return {"name": "interference", "states": ["s", "l", "r", "p", "m", "f"], "start": "s", "final": "f",
            "alphabet": _ALPHA, "n": 2, "work_cells": 1,
            "directions": {"l": [1, 0, 0], "r": [1, 0, 0], "p": [0, 0, 0], "m": [0, 0, 0], "f": [0, 0, 0]},
            "transitions": trs}


def _bidirectional():
    """States ``w`` and ``z`` are entered both moving right and standing still."""
    trs = []
    for b in (0, 1):
        sgn = -1 if b else 1
        trs += [_t("s", [str(b), BLANK, BLANK], "u", BLANK, _R, [0, 0, 0]),
                _t("s", [str(b), BLANK, BLANK], "v", BLANK, sgn * _R, [1, 0, 0]),
                _t("u", [str(b), BLANK, BLANK], "w", BLANK, _R, [1, 0, 0]),
                _t("u", [str(b), BLANK, BLANK], "z", BLANK, _R, [1, 0, 0]),
                _t("v", [str(b), BLANK, BLANK], "w", BLANK, _R, [0, 0, 0]),
                _t("v", [str(b), BLANK, BLANK], "z", BLANK, -_R, [0, 0, 0]),
                _t("w", [str(b), BLANK, BLANK], "f", "0", 1.0, [0, 0, 0]),
                _t("z", [str(b), BLANK, BLANK], "f", "1", 1.0, [0, 0, 0])]
    return {"name": "bidirectional", "states": ["s", "u", "v", "w", "z", "f"], "start": "s", "final": "f",
            "alphabet": _ALPHA, "n": 2, "work_cells": 1, "transitions": trs}


BUNDLED_MACHINES = {
    "immediate-halt": _immediate_halt,
    "or-3": _scan_or,
    "parity-4": _parity,
    "interference": _interference,
    "bidirectional": _bidirectional,
}


def bundled_machine(name: str) -> QtmSpec:
    """One of the test machines in :data:`BUNDLED_MACHINES`."""
    if name not in BUNDLED_MACHINES:
        raise ValueError(f"unknown machine {name!r}; choose from {sorted(BUNDLED_MACHINES)}")
    return QtmSpec.from_dict(BUNDLED_MACHINES[name]())
