"""Random program generators shared by the test modules."""
import numpy as np
from scipy.stats import unitary_group

from qbplab.model import BranchingProgram, Edge, Node


def random_isometry(rows, cols, rng, sparse=False):
    if sparse:
        P = np.zeros((rows, cols), dtype=complex)
        P[rng.permutation(rows)[:cols], np.arange(cols)] = np.exp(2j * np.pi * rng.random(cols))
        return P
    U = unitary_group.rvs(rows, random_state=rng) if rows > 1 else np.exp(2j * np.pi * rng.random((1, 1)))
    return U[:, :cols]


def random_qbp(rng, max_nodes=12, max_vars=4, allow_cycles=True):
    """A random well-formed, unidirectional QBP.

    Internal nodes are grouped by variable; each group maps, for each bit,
    isometrically into its own disjoint block of target nodes.
    """
    n = int(rng.integers(1, max_vars + 1))
    while True:
        n_int = int(rng.integers(1, max(2, max_nodes // 2) + 1))
        var = [int(rng.integers(0, n)) for _ in range(n_int)]
        groups = {}
        for v, x in enumerate(var):
            groups.setdefault(x, []).append(v)
        need = sum(len(g) for g in groups.values())
        n_sinks = max(1, int(rng.integers(0, max_nodes - n_int + 1)))
        total = n_int + n_sinks
        if total > max_nodes:
            continue
        # candidate targets: internal nodes other than the start, and sinks
        cands = list(range(1, total)) if allow_cycles else list(range(n_int, total))
        if len(cands) < need:
            continue
        perm = list(rng.permutation(cands))
        blocks = {}
        pos = 0
        free = len(cands) - need
        for x, g in sorted(groups.items()):
            extra = int(rng.integers(0, free + 1))
            free -= extra
            blocks[x] = perm[pos:pos + len(g) + extra]
            pos += len(g) + extra
        break
    nodes = [Node(v, var=var[v]) for v in range(n_int)]
    nodes += [Node(v, sink=str(rng.choice(["0", "1", "?"]))) for v in range(n_int, total)]
    edges = []
    for x, g in groups.items():
        tgt = blocks[x]
        for b in (0, 1):
            Q = random_isometry(len(tgt), len(g), rng, sparse=rng.random() < 0.4)
            for c, u in enumerate(g):
                for r, w in enumerate(tgt):
                    if abs(Q[r, c]) > 1e-12:
                        edges.append(Edge(u, int(w), b, complex(Q[r, c])))
    return BranchingProgram(n, tuple(nodes), tuple(edges), 0, "quantum")


def random_randomized_obdd(rng, n=None, max_width=3, leveled=True):
    """A random randomized OBDD in the natural order.

    With ``leveled`` every edge goes to the next level or to sinks owned by
    its own level, so the program is unidirectional; otherwise edges may
    skip levels and sinks are shared.
    """
    n = int(rng.integers(1, 9)) if n is None else n
    widths = [1] + [int(rng.integers(1, max_width + 1)) for _ in range(n - 1)]
    ids, nodes = [], []
    for i, w in enumerate(widths):
        ids.append(list(range(len(nodes), len(nodes) + w)))
        nodes += [Node(len(nodes) + j, var=i) for j in range(w)]
    if leveled:
        sinks = []
        for i in range(n):
            sinks.append([len(nodes), len(nodes) + 1])
            nodes += [Node(len(nodes), sink="0"), Node(len(nodes) + 1, sink="1")]
    else:
        shared = [len(nodes), len(nodes) + 1]
        nodes += [Node(shared[0], sink="0"), Node(shared[1], sink="1")]
    edges = []
    for i in range(n):
        if leveled:
            later = (ids[i + 1] if i + 1 < n else []) + sinks[i]
        else:
            later = [v for lvl in ids[i + 1:] for v in lvl] + shared
        for u in ids[i]:
            for b in (0, 1):
                k = int(rng.integers(1, min(3, len(later)) + 1))
                tg = rng.choice(later, size=k, replace=False)
                p = rng.dirichlet(np.ones(k))
                for w, q in zip(tg, p):
                    if q > 0:
                        edges.append(Edge(u, int(w), b, float(q)))
    return BranchingProgram(n, tuple(nodes), tuple(edges), 0, "rand")


# criterion number -> (passed, detail); printed in the terminal summary
ACCEPTANCE = {}


def record(k, ok, detail):
    ACCEPTANCE[k] = (bool(ok), detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
    return bool(ok)
