"""Command-line interface.

Exit codes: 0 on success, 1 when a validation or verification fails,
2 on usage errors and unreadable input.  Probabilities are printed with 12
significant digits; ``--json`` switches every subcommand to JSON output.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import analysis, families, gateset, qtm, semantics, transforms
from .model import SINK_LABELS, ProgramFormatError, all_assignments, load_program, save_program
from .validate import validate_program

logger = logging.getLogger(__name__)

__all__ = ["main", "run", "build_parser"]

FAMILIES = ("fig1", "disj", "ip", "perm", "ind", "isa", "gm-disj", "gm-ip", "tree", "parity", "min-rev")
TRANSFORMS = ("levelize", "realify", "clock", "amplify", "rand2gm")
EXPERIMENTS = ("perm-error", "entropy", "scheme", "kstable", "clock", "perturbation")


class UsageError(Exception):
    """Bad arguments or unreadable input (exit code 2)."""


def _fmt(x) -> str:
    return f"{x:.12g}"


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("QBPLAB_JOBS", "1")))
    except ValueError:
        return 1


def _bits(text: str, n: int) -> np.ndarray:
    if any(c not in "01" for c in text):
        raise UsageError(f"input must be a string of 0s and 1s, got {text!r}")
    if len(text) != n:
        raise UsageError(f"input has {len(text)} bits but the program reads {n} variables")
    return np.array([int(c) for c in text], dtype=np.int64)


def _load(path):
    try:
        return load_program(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except ProgramFormatError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _emit(args, data: dict, text: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps(data, sort_keys=True))
    else:
        print(text)


# ----------------------------------------------------------------- commands
def cmd_validate(args) -> int:
    bp = _load(args.file)
    rep = validate_program(bp, tol=args.tol)
    if args.json:
        print(rep.to_json())
    else:
        print(f"mode {bp.mode}, {bp.size} nodes, {len(bp.edges)} edges")
        print(rep.to_text())
    return 0 if rep.ok else 1


def _distribution(bp, a, steps):
    if bp.mode == "quantum":
        tr = semantics.evolve(bp, a, steps)
        return tr.probabilities, tr.halting_steps(), tr.final_residual
    if bp.mode == "gm":
        tr = semantics.evolve_gm(bp, a, steps)
        return tr.probabilities, tr.halting_steps(), tr.final_residual
    dist = semantics.classical_eval(bp, a)
    return {r: float(dist[i]) for i, r in enumerate(SINK_LABELS)}, [], 0.0


def cmd_eval(args) -> int:
    bp = _load(args.file)
    a = _bits(args.input, bp.n_vars)
    steps = bp.size if args.steps is None else args.steps
    if steps < 0:
        raise UsageError("--steps must be nonnegative")
    p, halts, res = _distribution(bp, a, steps)
    data = {"input": args.input, "steps": steps, "p": p, "halting_steps": halts, "residual": res}
    lines = [f"p_{r} = {_fmt(p[r])}" for r in SINK_LABELS]
    lines.append(f"continuing mass = {_fmt(res)}")
    if halts:
        lines.append("halting at steps " + " ".join(map(str, halts)))
    _emit(args, data, "\n".join(lines))
    return 0


def cmd_abs(args) -> int:
    bp = _load(args.file)
    a = _bits(args.input, bp.n_vars)
    if bp.mode != "quantum":
        raise UsageError("abs needs a quantum program")
    r = semantics.absolute_probabilities(bp, a, args.method, T_max=args.tmax, tail_tol=args.tail,
                                         delta=args.delta)
    rt = semantics.running_times(bp, a, T_max=args.tmax, tail_tol=args.tail)
    data = {"p": r.p, "uncertainty": r.uncertainty, "method": r.method, "note": r.note,
            "worst_case": rt.worst_case, "status": rt.status, "expected": rt.expected,
            "tail_bound": rt.tail_bound}
    lines = [f"p_{k} = {_fmt(v)}" for k, v in r.p.items()]
    lines += [f"uncertainty = {_fmt(r.uncertainty)} ({r.method})",
              f"running time: worst case {rt.worst_case}, {rt.status}, expected {_fmt(rt.expected)}"
              f" (tail <= {_fmt(rt.tail_bound)})"]
    if r.note:
        lines.append(r.note)
    _emit(args, data, "\n".join(lines))
    return 0


def _build_family(args):
    name, n = args.family, args.n
    if name == "fig1":
        return families.fig1_example()
    if n is None:
        raise UsageError(f"--n is required for family {name}")
    if name in ("disj", "ip"):
        return families.linear_obdd(name.upper(), n)
    if name == "perm":
        return families.perm_qobdd(n, args.primes)
    if name == "ind":
        return families.ind_zero_error_qobdd(n, 0.5 if args.eps is None else args.eps)
    if name == "isa":
        return families.isa_tree(n)
    if name in ("gm-disj", "gm-ip"):
        return families.gm_exact_obdd(name[3:].upper(), n)
    if name == "tree":
        return families.reversible_tree(families.oracle(args.function, n))
    if name == "parity":
        return families.parity_obdd(n)
    if name == "min-rev":
        return families.min_reversible_obdd(families.oracle(args.function, n))
    raise UsageError(f"unknown family {name}")


def cmd_build(args) -> int:
    try:
        bp = _build_family(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    save_program(bp, args.out)
    _emit(args, {"family": args.family, "nodes": bp.size, "edges": len(bp.edges), "out": args.out},
          f"{args.family}: {bp.size} nodes, {len(bp.edges)} edges -> {args.out}")
    return 0


def cmd_transform(args) -> int:
    bp = _load(args.input)
    kind = args.kind
    try:
        if kind == "levelize":
            out = transforms.levelize(bp, args.t)
        elif kind == "realify":
            out = transforms.realify(bp)
        elif kind == "clock":
            out = transforms.clock_wrap(bp, args.t)
        elif kind == "amplify":
            out = transforms.amplify(bp, args.copies, args.combiner)
        else:
            out = transforms.randomized_to_gm(bp)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    save_program(out, args.output)
    rep = validate_program(out)
    _emit(args, {"transform": kind, "nodes_in": bp.size, "nodes_out": out.size, "valid": rep.ok},
          f"{kind}: {bp.size} -> {out.size} nodes, {'valid' if rep.ok else 'INVALID'} -> {args.output}")
    return 0 if rep.ok else 1


def _read_matrix(path):
    try:
        with open(path) as fh:
            rows = json.load(fh)
        M = np.array([[complex(re, im) for re, im in row] for row in rows])
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(f"cannot read matrix from {path}: {exc}") from None
    return M


def cmd_gatesearch(args) -> int:
    T = _read_matrix(args.target)
    if T.shape != (args.dim, args.dim):
        raise UsageError(f"target has shape {T.shape}, expected ({args.dim}, {args.dim})")
    try:
        r = gateset.approx_search(T, args.eps, args.max_depth, phase=not args.strict_phase)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    gates = [] if r.word is None else [list(g) for g in r.word.gates]
    data = {"found": r.found, "gates": gates, "error": r.error if r.found else None,
            "depth": r.depth, "explored": r.explored, "complete": r.complete}
    if r.found:
        text = (f"found word of length {len(gates)}: "
                + " ".join(f"W{i},{j}" for i, j in gates) + f"\nerror = {_fmt(r.error)}")
    else:
        text = f"not found up to depth {args.max_depth} ({r.explored} products explored)"
    _emit(args, data, text)
    return 0 if r.found else 1


def _load_qtm(spec):
    try:
        if spec.startswith("bundled:"):
            return qtm.bundled_machine(spec.split(":", 1)[1])
        return qtm.load_qtm(spec)
    except OSError as exc:
        raise UsageError(f"cannot read {spec}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_qtm(args) -> int:
    m = _load_qtm(args.spec)
    if args.action == "simulate":
        if args.input is None:
            raise UsageError("qtm simulate needs --input")
        try:
            tr = qtm.simulate_qtm(m, _bits(args.input, m.n), args.steps)
        except qtm.QtmError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        p = tr.probabilities
        _emit(args, {"p": p, "halting_steps": tr.halting_steps(), "residual": tr.final_residual},
              "\n".join(f"p_{r} = {_fmt(p[r])}" for r in SINK_LABELS))
        return 0
    bp, configs = qtm.compile_to_qbp(m)
    rep = validate_program(bp)
    if args.out:
        save_program(bp, args.out)
    _emit(args, {"nodes": bp.size, "bound": qtm.config_space_bound(m), "valid": rep.ok,
                 "violations": [v.rule for v in rep.violations]},
          f"{bp.size} configurations (bound {qtm.config_space_bound(m)})\n{rep.to_text()}")
    return 0 if rep.ok else 1


# -------------------------------------------------------------- experiments
def _perm_row(payload):
    n, primes, idx = payload
    bp = families.perm_qobdd(n, primes)
    a = all_assignments(n * n)[idx]
    f = families.perm_oracle(n)(a)
    p1 = semantics.evolve(bp, a, n * n + 1).p("1")
    return [idx, "".join(map(str, a)), f, _fmt(p1)]


def _map(fn, items, jobs):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))
    return [fn(x) for x in items]


def _exp_perm_error(args):
    n = args.n or 2
    rows = _map(_perm_row, [(n, args.primes, i) for i in range(2 ** (n * n))], args.jobs)
    worst = max((float(r[3]) for r in rows if r[2] == 0), default=0.0)
    ok = all(float(r[3]) >= 1 - 1e-6 for r in rows if r[2] == 1) and worst <= 1 / n + 1e-6
    return ["index", "input", "perm", "p_1"], rows, ok


def _exp_entropy(args):
    n = args.n or 6
    orc = families.oracle(args.function or "DISJ", n)
    res = analysis.entropy_accumulation(families.reversible_tree(orc), orc, args.p)
    rows = [[r.k, _fmt(r.entropy), _fmt(r.bound), int(r.ok)] for r in res.rows]
    return ["k", "entropy", "bound", "ok"], rows, res.ok and res.size_ok


def _exp_scheme(args):
    fn = (args.function or "PARITY").upper()
    n = args.n or 4
    if fn in ("PARITY", "XOR"):
        G = families.parity_obdd(n)
        Gp, eps = G, 0.0
    elif fn == "IND":
        eps = 0.5 if args.eps is None else args.eps
        G = families.min_reversible_obdd(families.oracle("IND", n))
        Gp = families.ind_zero_error_qobdd(n, eps)
    else:
        raise UsageError("scheme experiment supports PARITY and IND")
    rows, ok = [], True
    for lv in analysis.build_schemes(G, Gp, eps):
        rep = analysis.verify_scheme(lv.scheme)
        bound, rank, holds = analysis.scheme_dimension_bound(lv.scheme)
        good = rep.ok and holds and lv.size_bound_ok
        ok &= good
        rows.append([lv.level, lv.size_G, lv.size_Gp, lv.scheme.A.shape[0], lv.scheme.A.shape[1],
                     int(rep.ok), rank, _fmt(bound), int(lv.size_bound_ok)])
    return ["level", "L", "L_prime", "rows", "columns", "scheme_valid", "rank", "m_pow", "size_bound"], rows, ok


def _exp_kstable(args):
    orc = families.oracle(args.function or "DET_Z2", args.n or 3)
    k = args.k or 2
    val = analysis.is_k_stable(orc, k)
    return ["function", "n_vars", "k", "stable"], [[orc.name, orc.n_vars, k, int(val)]], True


def _exp_clock(args):
    n = args.n or 2
    t = args.t or 12
    bp = families.perm_qobdd(n, args.primes)
    wrapped = transforms.clock_wrap(bp, t)
    rows, ok = [], True
    for idx, a in enumerate(all_assignments(n * n)):
        p1 = semantics.absolute_probabilities(bp, a).p["1"]
        q = semantics.absolute_probabilities(wrapped, a)
        rt = semantics.running_times(wrapped, a)
        good = q.p["1"] <= p1 + 1e-9 and abs(q.p["1"] - p1) <= 1e-3 and rt.tail_bound <= 1e-6
        ok &= good
        rows.append([idx, "".join(map(str, a)), _fmt(p1), _fmt(q.p["1"]), _fmt(rt.expected),
                     _fmt(rt.tail_bound), int(good)])
    return ["index", "input", "p_1", "p_1_wrapped", "expected_time", "tail", "ok"], rows, ok


def _exp_perturbation(args):
    bp = families.fig1_example() if args.file is None else _load(args.file)
    rng = np.random.default_rng(args.seed)
    rows, ok = [], True
    inputs = all_assignments(bp.n_vars)
    for trial in range(args.trials):
        a = inputs[rng.integers(len(inputs))]
        T = int(rng.integers(1, 11))
        eps = float(args.eps if args.eps is not None else rng.choice([1e-3, 1e-2]))
        p, pp, holds = semantics.perturbation_check(bp, a, T, eps, rng)
        ok &= holds
        rows.append([trial, "".join(map(str, a)), T, _fmt(eps), _fmt(float(np.abs(p - pp).max())),
                     _fmt(2 * T * eps), int(holds)])
    return ["trial", "input", "T", "eps", "max_diff", "bound", "ok"], rows, ok


_EXPERIMENTS = {
    "perm-error": _exp_perm_error,
    "entropy": _exp_entropy,
    "scheme": _exp_scheme,
    "kstable": _exp_kstable,
    "clock": _exp_clock,
    "perturbation": _exp_perturbation,
}


def cmd_experiment(args) -> int:
    try:
        header, rows, ok = _EXPERIMENTS[args.name](args)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            fh.write(buf.getvalue())
    if args.json:
        print(json.dumps({"experiment": args.name, "ok": bool(ok), "header": header,
                          "rows": [[str(x) for x in r] for r in rows]}))
    elif not args.csv:
        sys.stdout.write(buf.getvalue())
    else:
        print(f"{args.name}: {len(rows)} rows -> {args.csv} ({'ok' if ok else 'FAILED'})")
    return 0 if ok else 1


def cmd_oracle(args) -> int:
    try:
        orc = families.oracle(args.family, args.n)
        order = None if args.order is None else [int(x) for x in args.order.split(",")]
        size = analysis.min_obdd_size(orc, order)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(args, {"function": orc.name, "n_vars": orc.n_vars, "order": order, "min_obdd_size": size},
          f"{orc.name} ({orc.n_vars} variables): minimal OBDD size {size}")
    return 0


# ------------------------------------------------------------------ parser
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qbplab", description="Quantum branching program toolkit.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        sp.set_defaults(fn=fn)
        return sp

    sp = add("validate", cmd_validate, "run the validation profile of a program")
    sp.add_argument("file")
    sp.add_argument("--tol", type=float, default=1e-9)

    sp = add("eval", cmd_eval, "output distribution after T steps")
    sp.add_argument("file")
    sp.add_argument("--input", required=True)
    sp.add_argument("--steps", type=int)

    sp = add("abs", cmd_abs, "absolute output probabilities and running times")
    sp.add_argument("file")
    sp.add_argument("--input", required=True)
    sp.add_argument("--method", choices=("iterate", "damped"), default="iterate")
    sp.add_argument("--delta", type=float, default=1e-10)
    sp.add_argument("--tmax", type=int, default=100_000)
    sp.add_argument("--tail", type=float, default=1e-12)

    sp = add("build", cmd_build, "write a program of a bundled family")
    sp.add_argument("--family", choices=FAMILIES, required=True)
    sp.add_argument("--n", type=int)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--primes", type=int)
    sp.add_argument("--function", default="XOR", help="function for tree and min-rev")
    sp.add_argument("--out", required=True)

    sp = add("transform", cmd_transform, "rewrite a program")
    sp.add_argument("kind", choices=TRANSFORMS)
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--t", type=int, default=1)
    sp.add_argument("--copies", type=int, default=2)
    sp.add_argument("--combiner", choices=tuple(transforms.COMBINERS), default="all-accept")

    sp = add("gatesearch", cmd_gatesearch, "approximate a unitary by basis gates")
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--target", required=True, help="JSON rows of [re, im] pairs")
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--max-depth", type=int, default=6)
    sp.add_argument("--strict-phase", action="store_true", help="do not compare up to global phase")

    sp = add("qtm", cmd_qtm, "simulate or compile a machine (SPEC may be bundled:NAME)")
    sp.add_argument("action", choices=("simulate", "compile"))
    sp.add_argument("spec")
    sp.add_argument("--input")
    sp.add_argument("--steps", type=int, default=20)
    sp.add_argument("--out")

    sp = add("experiment", cmd_experiment, "batch experiments with CSV output")
    sp.add_argument("name", choices=EXPERIMENTS)
    sp.add_argument("--n", type=int)
    sp.add_argument("--k", type=int)
    sp.add_argument("--t", type=int)
    sp.add_argument("--p", type=float, default=1.0)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--primes", type=int)
    sp.add_argument("--function")
    sp.add_argument("--file")
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--jobs", type=int, default=_default_jobs())
    sp.add_argument("--csv")

    sp = add("oracle", cmd_oracle, "exhaustive function oracles")
    sp.add_argument("query", choices=("min-obdd",))
    sp.add_argument("--family", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--order")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"qbplab {args.command}: error: {exc}", file=sys.stderr)
        return 2


run = main


if __name__ == "__main__":
    sys.exit(main())
