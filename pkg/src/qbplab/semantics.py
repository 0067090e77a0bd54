"""Computation semantics of quantum, gm and classical branching programs.

A quantum program on input ``a`` alternates a three-outcome measurement
(continue, or stop with a sink label) with the time evolution ``U(a)``.
Because the measurement projects onto the internal nodes before ``U(a)`` is
applied, only ``L(a) = U(a) E_cont`` is ever needed; the unitary completion
is built explicitly only on request.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import SINK_LABELS, BranchingProgram, check_assignment, topological_order

logger = logging.getLogger(__name__)

__all__ = [
    "CompletionError",
    "EvolutionTrace",
    "complete_unitary",
    "evolve",
    "absolute_probabilities",
    "AbsoluteResult",
    "running_times",
    "RunningTimes",
    "evolve_gm",
    "classical_eval",
    "perturbation_check",
    "output_distribution",
]

TOL = 1e-9


class CompletionError(ValueError):
    """The non-sink columns of ``L(a)`` are not orthonormal."""


@dataclass
class EvolutionTrace:
    """Per-step halting masses of one run.

    Attributes
    ----------
    halting : ndarray, shape (T + 1, 3)
        ``halting[t, r]`` is the mass measured on label ``SINK_LABELS[r]`` at
        step ``t``.
    residual : ndarray, shape (T + 1,)
        Mass still on internal nodes after the measurement at step ``t``.
    state : ndarray, optional
        Final (unnormalized) state or density matrix after the last
        measurement, with the sink entries removed.
    """

    halting: np.ndarray
    residual: np.ndarray
    state: np.ndarray | None = None

    @property
    def T(self) -> int:
        return self.halting.shape[0] - 1

    @property
    def cumulative(self) -> np.ndarray:
        """``cumulative[t, r] = p_r(a, t)``."""
        return np.cumsum(self.halting, axis=0)

    def p(self, r: str | int, T: int | None = None) -> float:
        """Cumulative probability of label ``r`` up to step ``T`` (default: last)."""
        idx = SINK_LABELS.index(str(r))
        T = self.T if T is None else T
        return float(self.halting[: T + 1, idx].sum())

    @property
    def probabilities(self) -> dict[str, float]:
        tot = self.halting.sum(axis=0)
        return {r: float(tot[i]) for i, r in enumerate(SINK_LABELS)}

    @property
    def final_residual(self) -> float:
        return float(self.residual[-1])

    def halting_steps(self, tol: float = TOL) -> list[int]:
        """Steps ``t`` at which some mass above ``tol`` was measured on sinks."""
        return [int(t) for t in np.flatnonzero(self.halting.sum(axis=1) > tol)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "h_0", "h_1", "h_?", "residual"])
        for t in range(self.T + 1):
            w.writerow([t] + [f"{x:.12g}" for x in self.halting[t]] + [f"{self.residual[t]:.12g}"])
        return buf.getvalue()


# --------------------------------------------------------------- completion
def _orthonormal_complement(Q: np.ndarray, count: int, strategy: str) -> np.ndarray:
    d = Q.shape[0]
    if count == 0:
        return np.zeros((d, 0), dtype=complex)
    if strategy == "svd":
        N = sla.null_space(Q.conj().T) if Q.shape[1] else np.eye(d, dtype=complex)
        if N.shape[1] < count:
            raise CompletionError("not enough room for a unitary completion")
        return N[:, :count]
    if strategy != "gram-schmidt":
        raise ValueError(f"unknown completion strategy {strategy!r}")
    basis = [Q[:, i] for i in range(Q.shape[1])]
    out = []
    threshold = 0.5 / d
    for k in range(d):
        if len(out) == count:
            break
        r = np.zeros(d, dtype=complex)
        r[k] = 1.0
        for _ in range(2):  # modified Gram-Schmidt, repeated once for stability
            for q in basis:
                r -= (q.conj() @ r) * q
        nrm2 = float(np.vdot(r, r).real)
        if nrm2 >= threshold:
            q = r / np.sqrt(nrm2)
            basis.append(q)
            out.append(q)
    if len(out) < count:
        raise CompletionError("not enough room for a unitary completion")
    return np.column_stack(out)


def complete_unitary(bp: BranchingProgram, bits, strategy: str = "gram-schmidt",
                     tol: float = TOL) -> np.ndarray:
    """Dense unitary ``U(a)`` extending ``L(a)``.

    Columns of internal nodes are the columns of ``L(a)``.  Sink columns, in
    id order, are filled with the normalized residuals of standard basis
    vectors ``e_0, e_1, ...`` after projecting out all columns chosen so
    far; a basis vector is used once its residual has squared norm at least
    ``1/(2|V|)``.  ``strategy="svd"`` uses an SVD null-space basis instead
    (a second, independent completion used to test completion invariance).

    Raises
    ------
    CompletionError
        If the internal columns are not orthonormal within ``tol``.
    """
    L = bp.transition(bits).toarray()
    internal = bp.internal_ids
    sinks = bp.sink_ids
    Q = L[:, internal]
    gram = Q.conj().T @ Q
    err = np.max(np.abs(gram - np.eye(len(internal)))) if len(internal) else 0.0
    if err > tol:
        raise CompletionError(f"columns of L(a) are not orthonormal (max deviation {err:.3e})")
    U = L.copy()
    U[:, sinks] = _orthonormal_complement(Q, len(sinks), strategy)
    return U


# ------------------------------------------------------------------ evolve
def _label_masks(bp: BranchingProgram):
    return [bp.label_masks[r] for r in SINK_LABELS]


def evolve(bp: BranchingProgram, bits, T: int, unitary: np.ndarray | None = None,
           initial: np.ndarray | None = None, keep_states: bool = False) -> EvolutionTrace:
    """Run ``T`` steps of the measure/evolve alternation.

    At each step ``t = 0..T`` the masses ``||E_r psi_t||^2`` are recorded and
    the state is projected onto the internal nodes; then
    ``psi_{t+1} = U(a) E_cont psi_t``.

    Parameters
    ----------
    unitary : ndarray, optional
        Explicit time evolution to use instead of ``L(a)`` (for example a
        perturbed completion).
    initial : ndarray, optional
        Initial state; defaults to the start node.
    keep_states : bool
        If true, ``trace.state`` holds the array of states ``psi_0..psi_T``
        before each measurement.
    """
    if bp.mode != "quantum":
        raise ValueError(f"evolve needs a quantum program, got mode {bp.mode!r}")
    check_assignment(bp, bits)
    if T < 0:
        raise ValueError("T must be nonnegative")
    step = bp.transition(bits) if unitary is None else None
    cont = ~bp.sink_mask
    masks = _label_masks(bp)
    psi = np.zeros(bp.size, dtype=complex)
    if initial is None:
        psi[bp.start] = 1.0
    else:
        psi = np.asarray(initial, dtype=complex).copy()
    halting = np.zeros((T + 1, 3))
    residual = np.zeros(T + 1)
    states = [] if keep_states else None
    for t in range(T + 1):
        if keep_states:
            states.append(psi.copy())
        prob = np.abs(psi) ** 2
        for i, m in enumerate(masks):
            halting[t, i] = prob[m].sum()
        psi = np.where(cont, psi, 0)
        residual[t] = prob[cont].sum()
        if t == T:
            break
        psi = step @ psi if unitary is None else unitary @ psi
    state = np.array(states) if keep_states else psi
    return EvolutionTrace(halting, residual, state)


def output_distribution(bp: BranchingProgram, bits, T: int) -> np.ndarray:
    """``(p_0, p_1, p_?)`` after ``T`` steps."""
    return evolve(bp, bits, T).halting.sum(axis=0)


# ---------------------------------------------------- absolute probabilities
@dataclass
class AbsoluteResult:
    p: dict
    uncertainty: float
    method: str
    steps: int | None = None
    residual: float | None = None
    note: str = ""

    def __getitem__(self, r):
        return self.p[str(r)]


def _iterate(bp, bits, T_max, tail_tol):
    step = bp.transition(bits)
    cont = ~bp.sink_mask
    masks = _label_masks(bp)
    psi = np.zeros(bp.size, dtype=complex)
    psi[bp.start] = 1.0
    acc = np.zeros(3)
    res = 1.0
    t = 0
    while True:
        prob = np.abs(psi) ** 2
        for i, m in enumerate(masks):
            acc[i] += prob[m].sum()
        res = float(prob[cont].sum())
        if res <= tail_tol or t >= T_max:
            break
        psi = step @ np.where(cont, psi, 0)
        t += 1
    return acc, res, t


def absolute_probabilities(bp: BranchingProgram, bits, method: str = "iterate",
                           T_max: int = 100_000, tail_tol: float = 1e-12,
                           delta: float = 1e-10) -> AbsoluteResult:
    """Absolute output probabilities ``p_r(a) = p_r(a, infinity)``.

    ``method="iterate"`` runs the evolution until the continuing mass drops
    to ``tail_tol`` or ``T_max`` steps pass; the uncertainty is the leftover
    mass.  ``method="damped"`` sums the series of ``M = conj(D) (x) D`` with
    ``D = L(a)`` in closed form by solving ``(I - z M) x = e_s`` for
    ``z = 1 - delta``.  The uncertainty combines the solver residual with an
    estimate of the damping bias obtained from a second solve at
    ``z = 1 - 2 delta``.  If the damped solve fails it falls back to
    iteration.
    """
    if bp.mode != "quantum":
        raise ValueError("absolute_probabilities needs a quantum program")
    if method == "iterate":
        acc, res, t = _iterate(bp, bits, T_max, tail_tol)
        return AbsoluteResult({r: float(acc[i]) for i, r in enumerate(SINK_LABELS)}, res,
                              "iterate", steps=t, residual=res)
    if method != "damped":
        raise ValueError(f"unknown method {method!r}")
    try:
        p1, r1 = _damped_solve(bp, bits, 1.0 - delta)
        p2, _ = _damped_solve(bp, bits, 1.0 - 2 * delta)
    except (np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
        logger.warning("damped solve failed (%s); falling back to iteration", exc)
        out = absolute_probabilities(bp, bits, "iterate", T_max, tail_tol)
        out.note = f"damped solve failed: {exc}"
        return out
    bias = float(np.max(np.abs(p1 - p2)))
    p = {r: float(p1[i]) for i, r in enumerate(SINK_LABELS)}
    return AbsoluteResult(p, r1 + bias, "damped", residual=r1)


DENSE_LIMIT = 24  # |V| up to which M = conj(D) (x) D is formed densely


def _damped_solve(bp, bits, z):
    D = bp.transition(bits)
    n = bp.size
    N = n * n
    rhs = np.zeros(N, dtype=complex)
    rhs[bp.start * n + bp.start] = 1.0
    if n <= DENSE_LIMIT:
        Dd = D.toarray()
        A = np.eye(N) - z * np.kron(Dd.conj(), Dd)
        x = np.linalg.solve(A, rhs)
        res = float(np.linalg.norm(A @ x - rhs))
    elif D.nnz ** 2 <= 5_000_000:
        M = sp.kron(D.conj(), D, format="csc")
        A = (sp.identity(N, format="csc", dtype=complex) - z * M).tocsc()
        x = spla.spsolve(A, rhs)
        res = float(np.linalg.norm(A @ x - rhs))
    else:
        Dc = D.conj().tocsr()

        def matvec(v):
            X = v.reshape(n, n)
            # kron(conj(D), D) vec(X) = vec(conj(D) X D^T) for row-major vec
            return v - z * (Dc @ (D @ X.T).T).reshape(-1)

        op = spla.LinearOperator((N, N), matvec=matvec, dtype=complex)
        x, info = spla.gmres(op, rhs, rtol=1e-13, atol=0.0, restart=200, maxiter=2000)
        if info != 0:
            raise RuntimeError(f"gmres did not converge (info={info})")
        res = float(np.linalg.norm(op.matvec(x) - rhs))
    diag = x[np.arange(n) * (n + 1)].real
    p = np.array([diag[bp.label_masks[r]].sum() for r in SINK_LABELS])
    return p, res


# ------------------------------------------------------------ running times
@dataclass
class RunningTimes:
    """Worst-case and expected running time of one input.

    ``worst_case`` is the least ``T`` whose cumulative halting mass is 1
    within ``tol``, or ``None``.  ``status`` is ``"finite"``, ``"infinite"``
    (mass tends to 1 without reaching it by ``T_max``) or ``"undefined"``
    (halting mass plateaus below 1).
    """

    worst_case: int | None
    status: str
    expected: float
    tail_bound: float
    steps: int


def running_times(bp: BranchingProgram, bits, T_max: int = 10_000, tail_tol: float = 1e-12,
                  tol: float = TOL) -> RunningTimes:
    """Running times following the sums over ``t`` of the halting masses.

    The expected time ``sum_t t * h(t)`` is truncated at the last simulated
    step ``T``; ``tail_bound`` bounds the missing part assuming the
    continuing mass keeps decaying at the worst ratio seen over the last
    steps: ``R_T (T + 1 + rho / (1 - rho))``.
    """
    step = bp.transition(bits)
    cont = ~bp.sink_mask
    psi = np.zeros(bp.size, dtype=complex)
    psi[bp.start] = 1.0
    stops, residuals = [], []
    worst = None
    t = 0
    while True:
        prob = np.abs(psi) ** 2
        h = float(prob[~cont].sum())
        r = float(prob[cont].sum())
        stops.append(h)
        residuals.append(r)
        if worst is None and r <= tol:
            worst = t
        if r <= tail_tol or t >= T_max:
            break
        psi = step @ np.where(cont, psi, 0)
        t += 1
    stops = np.array(stops)
    residuals = np.array(residuals)
    expected = float(np.dot(np.arange(len(stops)), stops))
    R = residuals[-1]
    if R == 0:
        tail = 0.0
    else:
        window = residuals[-min(len(residuals), 50):]
        ratios = window[1:] / np.where(window[:-1] > 0, window[:-1], np.inf)
        rho = float(np.max(ratios)) if ratios.size else 1.0
        tail = float(R * (t + 1 + rho / (1 - rho))) if rho < 1 else float("inf")
    if worst is not None:
        status = "finite"
    elif tail < np.inf:
        status = "infinite"
    else:
        status = "undefined"
    return RunningTimes(worst, status, expected, tail, t)


# ---------------------------------------------------------------- gm mode
def evolve_gm(bp: BranchingProgram, bits, T: int) -> EvolutionTrace:
    """Density-matrix evolution of a gm program.

    At each step ``tr(P_0 s)`` and ``tr(P_1 s)`` are recorded and
    ``s <- sum_{r >= 2} U_r P_r s P_r U_r^dagger``.  Only the class-``r``
    columns of ``U_r(a)`` enter, and they coincide with the columns of
    ``L(a)``, so no completion is formed.
    """
    if bp.mode != "gm":
        raise ValueError(f"evolve_gm needs a gm program, got mode {bp.mode!r}")
    L = bp.transition(bits).toarray()
    n = bp.size
    classes = {}
    for v in bp.internal_ids:
        classes.setdefault(bp.nodes[v].gm_class, []).append(int(v))
    blocks = [(np.array(idx), L[:, idx]) for _, idx in sorted(classes.items())]
    masks = _label_masks(bp)
    sigma = np.zeros((n, n), dtype=complex)
    sigma[bp.start, bp.start] = 1.0
    halting = np.zeros((T + 1, 3))
    residual = np.zeros(T + 1)
    for t in range(T + 1):
        d = sigma.diagonal().real
        for i, m in enumerate(masks):
            halting[t, i] = d[m].sum()
        residual[t] = d[~bp.sink_mask].sum()
        if t == T:
            break
        new = np.zeros_like(sigma)
        for idx, Lr in blocks:
            new += Lr @ sigma[np.ix_(idx, idx)] @ Lr.conj().T
        sigma = new
    return EvolutionTrace(halting, residual, sigma)


# ----------------------------------------------------------------- classical
def classical_eval(bp: BranchingProgram, bits) -> np.ndarray:
    """Exact output distribution ``(p_0, p_1, p_?)`` of a classical program.

    Acyclic programs are evaluated by pushing probability mass in
    topological order.  Cyclic randomized programs are treated as absorbing
    Markov chains: absorption probabilities solve ``(I - Q) B = R`` over the
    internal nodes that can reach a sink; mass that never halts is missing
    from the result.
    """
    if bp.mode not in ("det", "rand"):
        raise ValueError(f"classical_eval needs a det/rand program, got mode {bp.mode!r}")
    a = check_assignment(bp, bits)
    n = bp.size
    P = np.zeros((n, n))
    for v in bp.internal_ids:
        b = a[bp.var_array[v]]
        for e in bp.out_edges[v][b]:
            P[v, e.dst] += e.amp.real
    out = np.zeros(3)
    order = topological_order(bp)
    if order is not None:
        mass = np.zeros(n)
        mass[bp.start] = 1.0
        for v in order:
            if bp.nodes[v].is_sink:
                out[SINK_LABELS.index(bp.nodes[v].sink)] += mass[v]
            else:
                mass += mass[v] * P[v]
        return out
    if bp.nodes[bp.start].is_sink:
        out[SINK_LABELS.index(bp.nodes[bp.start].sink)] = 1.0
        return out
    sinks = bp.sink_ids
    # internal nodes that can reach a sink
    can = np.zeros(n, dtype=bool)
    can[sinks] = True
    changed = True
    while changed:
        new = can | ((P > 0) & can[None, :]).any(axis=1)
        changed = bool((new != can).any())
        can = new
    trans = np.flatnonzero(can & ~bp.sink_mask)
    if not can[bp.start]:
        return out
    Q = P[np.ix_(trans, trans)]
    R = P[np.ix_(trans, sinks)]
    B = np.linalg.solve(np.eye(len(trans)) - Q, R)
    row = B[np.searchsorted(trans, bp.start)]
    for j, w in enumerate(sinks):
        out[SINK_LABELS.index(bp.nodes[w].sink)] += row[j]
    return out


# --------------------------------------------------------------- perturbation
def _random_hermitian(d: int, eps: float, rng) -> np.ndarray:
    A = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    H = (A + A.conj().T) / 2
    nrm = np.linalg.norm(H, 2)
    return H * (eps / nrm) if nrm > 0 else H


def perturbation_check(bp: BranchingProgram, bits, T: int, eps: float, rng=None):
    """Compare a run under ``U(a)`` with a run under a perturbed ``U'``.

    ``U' = U(a) exp(iH)`` with ``H`` Hermitian of operator norm ``eps``, so
    ``||U' - U(a)|| = ||exp(iH) - I|| <= eps``.  Returns ``(p, p', ok)`` with
    ``p`` and ``p'`` the cumulative ``(p_0, p_1, p_?)`` after ``T`` steps and
    ``ok`` true iff every label differs by at most ``2 T eps``.
    """
    rng = np.random.default_rng(rng)
    U = complete_unitary(bp, bits)
    if eps == 0:
        Up = U
    else:
        Up = U @ sla.expm(1j * _random_hermitian(bp.size, eps, rng))
    dist = np.linalg.norm(Up - U, 2)
    if dist > eps * (1 + 1e-9) + 1e-15:
        raise AssertionError(f"perturbation too large: {dist} > {eps}")
    p = evolve(bp, bits, T, unitary=U).halting.sum(axis=0)
    pp = evolve(bp, bits, T, unitary=Up).halting.sum(axis=0)
    ok = bool(np.all(np.abs(p - pp) <= 2 * T * eps + 1e-12))
    return p, pp, ok
