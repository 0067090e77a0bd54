"""Acceptance criteria 1-15, each checked at its stated tolerance.

Every test prints one PASS/FAIL line; the lines are repeated in the
terminal summary.
"""
import itertools
import time

import numpy as np
from scipy.stats import unitary_group

from helpers import random_qbp, random_randomized_obdd, record
from qbplab import analysis, gateset, qtm
from qbplab.families import (fig1_example, gm_exact_obdd, ind_zero_error_qobdd, isa_tree, linear_obdd,
                             min_reversible_obdd, oracle, parity_obdd, perm_component, perm_qobdd,
                             reversible_tree)
from qbplab.model import all_assignments, with_mode
from qbplab.semantics import (absolute_probabilities, classical_eval, evolve, evolve_gm,
                              perturbation_check, running_times)
from qbplab.transforms import ClockParams, clock_wrap, levelize, randomized_to_gm, realify
from qbplab.validate import check_well_formed, validate_program


def test_criterion_01_perm_one_sided_error():
    t0 = time.perf_counter()
    bp = perm_qobdd(3)
    orc = oracle("PERM", 3)
    acc_min, rej_max = 1.0, 0.0
    for a in all_assignments(9):
        p1 = absolute_probabilities(bp, a).p["1"]
        if orc(a) == 1:
            acc_min = min(acc_min, p1)
        else:
            rej_max = max(rej_max, p1)
    dt = time.perf_counter() - t0
    ok = acc_min >= 1 - 1e-6 and rej_max <= 1 / 3 + 1e-6 and dt < 60
    assert record(1, ok, f"min p_1 on permutations {acc_min:.12g}, max p_1 otherwise {rej_max:.12g}, "
                         f"{dt:.1f} s")


def test_criterion_02_fig1_narrative():
    tr = evolve(fig1_example(), [0, 0], 3)
    p1 = tr.p("1")
    halted = tr.halting.sum(axis=1)
    # measurements are numbered from t = 0, so the third one is t = 2
    ok = abs(p1 - 1) <= 1e-9 and halted[:2].max() <= 1e-9 and abs(halted[2] - 1) <= 1e-9
    assert record(2, ok, f"p_1 = {p1:.12g}, halting mass per measurement {np.round(halted, 12).tolist()}")


def _families():
    yield "fig1", fig1_example()
    for f in ("DISJ", "IP"):
        yield f"{f}_4 OBDD", linear_obdd(f, 4)
        yield f"{f}_8 gm", gm_exact_obdd(f, 8)
    yield "PERM_2", perm_qobdd(2)
    yield "PERM component p=3", perm_component(3, 2)
    yield "IND_4 zero-error", ind_zero_error_qobdd(4, 0.5)
    yield "ISA_8 tree", isa_tree(8)
    yield "DISJ_6 reversible tree", reversible_tree(oracle("DISJ", 6))
    yield "IND_4 min reversible", min_reversible_obdd(oracle("IND", 4))
    yield "parity_4", parity_obdd(4)


def test_criterion_03_validation_soundness():
    bad = []
    worst = 0.0
    for name, bp in _families():
        rep = validate_program(bp)
        worst = max(worst, rep.max_residual)
        if not rep.ok or rep.max_residual > 1e-9:
            bad.append(name)
    rep = check_well_formed(with_mode(linear_obdd("DISJ", 4), "quantum"))
    named = (not rep.ok and rep.violations[0].rule.startswith("W") and len(rep.violations[0].ids) >= 2)
    ok = not bad and named
    detail = rep.violations[0] if rep.violations else "no violation"
    assert record(3, ok, f"failing families {bad}, max residual {worst:.3g}; DISJ_4 as quantum: {detail}")


def test_criterion_04_leveling():
    rng = np.random.default_rng(20240401)
    worst, size_bad, early = 0.0, 0, 0.0
    for _ in range(50):
        G = random_qbp(rng, max_nodes=12, max_vars=4)
        for t in range(6):
            L = levelize(G, t)
            size_bad += L.size > (t + 1) ** 2 * G.size
            for a in all_assignments(G.n_vars):
                ref = evolve(G, a, t).halting.sum(axis=0)
                h = evolve(L, a, t).halting
                early = max(early, float(h[:t].sum()))
                worst = max(worst, float(np.abs(h[t] - ref).max()))
    ok = worst <= 1e-9 and early <= 1e-9 and size_bad == 0
    assert record(4, ok, f"max |p - p'| {worst:.3g}, mass before step t {early:.3g}, size violations {size_bad}")


def test_criterion_05_realification():
    rng = np.random.default_rng(7)
    progs = [fig1_example(), perm_qobdd(2)] + [random_qbp(rng, max_vars=4) for _ in range(30)]
    worst, size_bad, complex_seen = 0.0, 0, 0
    for G in progs:
        R = realify(G)
        complex_seen += any(e.amp.imag != 0 for e in G.edges)
        assert all(e.amp.imag == 0 for e in R.edges)
        size_bad += R.size > 2 * G.size
        for a in all_assignments(G.n_vars):
            d = np.abs(evolve(G, a, 20).halting - evolve(R, a, 20).halting).max()
            worst = max(worst, float(d))
    ok = worst <= 1e-9 and size_bad == 0
    assert record(5, ok, f"{len(progs)} programs ({complex_seen} complex), max deviation {worst:.3g} "
                         f"over 20 steps, size violations {size_bad}")


def test_criterion_06_perturbation():
    rng = np.random.default_rng(11)
    bad, worst_ratio = 0, 0.0
    for trial in range(200):
        bp = fig1_example() if trial % 4 == 0 else random_qbp(rng)
        inputs = all_assignments(bp.n_vars)
        a = inputs[rng.integers(len(inputs))]
        T = int(rng.integers(1, 11))
        eps = float(rng.choice([1e-3, 1e-2]))
        p, pp, ok = perturbation_check(bp, a, T, eps, rng)
        bad += not ok
        worst_ratio = max(worst_ratio, float(np.abs(p - pp).max()) / (2 * T * eps))
    assert record(6, bad == 0, f"200 trials, violations {bad}, max |p - p'| / (2 T eps) = {worst_ratio:.3g}")


def test_criterion_07_clock():
    ident = 0.0
    exact = True
    for t in range(1, 31):
        c = ClockParams(t)
        b, g = c.exact
        exact &= b * b + g * g == 1
        ident = max(ident, abs(c.beta ** 2 + c.gamma ** 2 - 1))
    bp = perm_qobdd(2)
    wrapped = clock_wrap(bp, 12)
    mono, diff, tail = True, 0.0, 0.0
    for a in all_assignments(4):
        p1 = absolute_probabilities(bp, a).p["1"]
        q1 = absolute_probabilities(wrapped, a).p["1"]
        mono &= q1 <= p1 + 1e-12
        diff = max(diff, abs(q1 - p1))
        rt = running_times(wrapped, a)
        tail = max(tail, rt.tail_bound)
    ok = exact and ident <= 1e-12 and mono and diff <= 1e-3 and tail <= 1e-6
    assert record(7, ok, f"beta^2+gamma^2 exact {exact}, float error {ident:.3g}; p'_1 <= p_1 {mono}, "
                         f"max |p'_1 - p_1| {diff:.3g}, max tail {tail:.3g}")


def test_criterion_08_gm_exactness():
    worst, sizes = 0.0, {}
    for f in ("DISJ", "IP"):
        G = gm_exact_obdd(f, 8)
        orc = oracle(f, 8)
        sizes[f] = (G.size, G.k)
        for a in all_assignments(8):
            p = evolve_gm(G, a, G.size).halting.sum(axis=0)
            worst = max(worst, 1 - p[orc(a)])
    ok = worst <= 1e-9 and all(s <= 4 * 8 and k == 4 for s, k in sizes.values())
    assert record(8, ok, f"max error {worst:.3g}, (size, k) {sizes}, bound 4n = 32")


def test_criterion_09_randomized_to_gm():
    rng = np.random.default_rng(99)
    worst, grown = 0.0, 0
    for _ in range(100):
        R = random_randomized_obdd(rng)
        g = randomized_to_gm(R)
        grown += g.size > R.size
        for a in all_assignments(R.n_vars):
            d = np.abs(classical_eval(R, a) - evolve_gm(g, a, R.n_vars + 1).halting.sum(axis=0)).max()
            worst = max(worst, float(d))
    assert record(9, worst <= 1e-9 and grown == 0, f"max deviation {worst:.3g}, size increases {grown}")


def test_criterion_10_zero_error_ind():
    bp = ind_zero_error_qobdd(4, 0.5)
    orc = oracle("IND", 4)
    wrong, unknown = 0.0, 0.0
    for a in all_assignments(bp.n_vars):
        p = absolute_probabilities(bp, a).p
        wrong = max(wrong, p[str(1 - orc(a))])
        unknown = max(unknown, p["?"])
    ok = wrong <= 1e-9 and unknown <= 0.5 + 1e-9
    assert record(10, ok, f"64 inputs, max wrong {wrong:.3g}, max p_? {unknown:.12g}")


def test_criterion_11_entropy():
    orc = oracle("DISJ", 6)
    res = analysis.entropy_accumulation(reversible_tree(orc), orc, 1.0)
    ent_ok = [r.k for r in res.rows] == [1, 2, 3] and all(r.entropy >= r.k - 1e-6 for r in res.rows)
    rng = np.random.default_rng(5)
    nayak = [analysis.check_nayak(*analysis.random_nayak_instance(rng)).status for _ in range(1000)]
    klauck = [analysis.check_klauck(*analysis.random_klauck_instance(rng)).status for _ in range(1000)]
    nbad = sum(s != "holds" for s in nayak)
    kbad = sum(s != "holds" for s in klauck)
    ok = ent_ok and nbad == 0 and kbad == 0
    ents = [round(r.entropy, 9) for r in res.rows]
    assert record(11, ok, f"S(sigma(k)) {ents}; Nayak failures {nbad}/1000, Klauck failures {kbad}/1000")


def _scheme_summary(G, Gp, eps):
    levels = analysis.build_schemes(G, Gp, eps)
    good = True
    for lv in levels:
        good &= analysis.verify_scheme(lv.scheme).ok and lv.size_bound_ok
        good &= analysis.scheme_dimension_bound(lv.scheme)[2]
    return good, len(levels)


def test_criterion_12_measurement_schemes():
    P = parity_obdd(4)
    ok_par, n_par = _scheme_summary(P, P, 0.0)
    ok_ind, n_ind = _scheme_summary(min_reversible_obdd(oracle("IND", 4)), ind_zero_error_qobdd(4, 0.5), 0.5)
    assert record(12, ok_par and ok_ind, f"parity_4 eps=0: {n_par} levels valid {ok_par}; "
                                         f"IND_4 eps=1/2: {n_ind} levels valid {ok_ind}")


def test_criterion_13_gate_basis():
    unit, inverse = 0.0, 0.0
    for d in range(2, 7):
        I = np.eye(d)
        for i, j in gateset.enumeration(d):
            W = gateset.elementary(i, j, d)
            unit = max(unit, np.abs(W.conj().T @ W - I).max())
            if i <= 3:
                inverse = max(inverse, np.abs(W @ gateset.elementary(i + 3, j, d) - I).max())
    search = 0.0
    missing = 0
    for d in (2, 3):
        gates = gateset.enumeration(d)
        words = [()] + [(g,) for g in gates] + list(itertools.product(gates, repeat=2))
        for w in words:
            target = gateset.GateWord(tuple(w), d).matrix
            res = gateset.approx_search(target, 1e-12, 2)
            if not res.found or len(res.word) > len(w):
                missing += 1
            else:
                search = max(search, res.error)
    rng = np.random.default_rng(13)
    bound_bad = 0
    for _ in range(100):
        d = int(rng.integers(2, 7))
        k = int(rng.integers(1, 6))
        Us, Vs = [], []
        for _ in range(k):
            U = unitary_group.rvs(d, random_state=rng)
            H = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            Q, _r = np.linalg.qr(np.eye(d) + rng.uniform(0, 0.3) * (H - H.conj().T) / 2)
            Us.append(U)
            Vs.append(U @ Q)
        lhs = gateset.operator_norm(np.linalg.multi_dot(Us + [np.eye(d)]) - np.linalg.multi_dot(Vs + [np.eye(d)]))
        rhs = gateset.product_error_bound([gateset.operator_norm(U - V) for U, V in zip(Us, Vs)])
        # both norms come from power iteration with relative tolerance 1e-10
        bound_bad += lhs > rhs * (1 + 2e-10) + 1e-12
    ok = unit <= 1e-12 and inverse <= 1e-12 and missing == 0 and search <= 1e-12 and bound_bad == 0
    assert record(13, ok, f"unitarity {unit:.3g}, inverse pairs {inverse:.3g}, search misses {missing} "
                          f"max error {search:.3g}, product bound violations {bound_bad}/100")


def test_criterion_14_qtm_cross_simulation():
    worst, checked = 0.0, []
    for name in sorted(qtm.BUNDLED_MACHINES):
        m = qtm.bundled_machine(name)
        assert m.n <= 6
        bp, _ = qtm.compile_to_qbp(m)
        for a in all_assignments(m.n):
            h1 = qtm.simulate_qtm(m, a, 20).halting
            h2 = evolve(bp, a, 20).halting
            worst = max(worst, float(np.abs(h1 - h2).max()))
        checked.append(name)
    assert record(14, worst <= 1e-9, f"machines {checked}, T <= 20, max deviation {worst:.3g}")


def test_criterion_15_oracle_sizes():
    sizes = (analysis.min_obdd_size(oracle("DISJ", 4)), analysis.min_obdd_size(oracle("IP", 4)),
             analysis.min_obdd_size(oracle("PERM", 2)))
    stab = (analysis.is_k_stable(oracle("DET_Z2", 3), 2), analysis.is_k_stable(oracle("XOR", 3), 2))
    ok = sizes == (6, 8, 9) and stab == (True, False)
    assert record(15, ok, f"min OBDD sizes DISJ_4, IP_4, PERM_2 = {sizes}; "
                          f"2-stable DET_Z2 3x3, XOR_3 = {stab}")
