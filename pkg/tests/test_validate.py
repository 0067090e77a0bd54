import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import random_qbp
from qbplab.families import (fig1_example, gm_exact_obdd, isa_tree, linear_obdd, oracle,
                             perm_component, perm_qobdd, reversible_tree)
from qbplab.model import BranchingProgram, Edge, Node, with_mode
from qbplab.transforms import levelize
from qbplab.validate import (ModeError, check_gm_well_formed, check_leveled, check_reversible_bp,
                             check_unidirectional, check_well_formed, infer_variable_order,
                             validate_program)


def test_fig1_well_formed():
    rep = check_well_formed(fig1_example())
    assert rep.ok and rep.max_residual <= 1e-12


def test_xor2_tree_well_formed():
    bp = with_mode(reversible_tree(oracle("XOR", 2)), "quantum")
    assert check_well_formed(bp).ok


def test_disj4_as_quantum_names_pair():
    bp = with_mode(linear_obdd("DISJ", 4), "quantum")
    rep = check_well_formed(bp)
    assert not rep.ok
    v = rep.violations[0]
    assert v.rule.startswith("W") and len(v.ids) >= 2 and v.residual == pytest.approx(1.0)


def test_wrong_mode_raises():
    with pytest.raises(ModeError):
        check_well_formed(linear_obdd("DISJ", 4))
    with pytest.raises(ModeError):
        check_gm_well_formed(fig1_example())


def test_gm_exact_well_formed():
    assert check_gm_well_formed(gm_exact_obdd("DISJ", 4)).ok


def test_gm_same_class_collision():
    nodes = (Node(0, var=0, gm_class=2), Node(1, var=1, gm_class=2), Node(2, sink="0"), Node(3, sink="1"))
    edges = (Edge(0, 1, 0), Edge(0, 3, 1), Edge(1, 2, 0), Edge(1, 3, 1))
    bp = BranchingProgram(2, nodes, edges, 0, "gm", 3)
    rep = check_gm_well_formed(bp)
    assert not rep.ok


def test_unidirectional_violation_names_node():
    nodes = (Node(0, var=0), Node(1, var=1), Node(2, sink="1"), Node(3, sink="0"))
    edges = (Edge(0, 1, 0), Edge(0, 2, 1), Edge(1, 2, 0), Edge(1, 3, 1))
    rep = check_unidirectional(BranchingProgram(2, nodes, edges, 0))
    assert not rep.ok and rep.violations[0].ids[0] == 2


def test_perm_unidirectional():
    assert check_unidirectional(perm_qobdd(2)).ok


def test_variable_order():
    assert infer_variable_order(linear_obdd("DISJ", 4)).order == [0, 1, 2, 3]
    assert not infer_variable_order(isa_tree(8)).ok
    const = BranchingProgram(0, (Node(0, sink="1"),), (), 0)
    assert infer_variable_order(const).order == []


def test_variable_order_renumbering_invariant():
    bp = linear_obdd("IP", 4)
    perm = np.random.default_rng(3).permutation(bp.size)
    nodes = tuple(Node(int(perm[v.id]), v.var, v.sink) for v in bp.nodes)
    edges = tuple(Edge(int(perm[e.src]), int(perm[e.dst]), e.bit, e.amp) for e in bp.edges)
    re = BranchingProgram(bp.n_vars, nodes, edges, int(perm[bp.start]), "det")
    assert infer_variable_order(re).order == infer_variable_order(bp).order


def test_reversible():
    assert check_reversible_bp(reversible_tree(oracle("DISJ", 4))).ok
    assert not check_reversible_bp(linear_obdd("DISJ", 4)).ok
    assert check_reversible_bp(perm_component(3, 2)).ok


def test_leveled():
    one = BranchingProgram(0, (Node(0, sink="0"),), (), 0)
    assert check_leveled(one).levels == [[0]]
    nodes = (Node(0, var=0), Node(1, var=1), Node(2, var=2), Node(3, var=3), Node(4, sink="0"),
             Node(5, sink="1"))
    edges = (Edge(0, 1, 0), Edge(0, 2, 1), Edge(1, 2, 0), Edge(1, 2, 1), Edge(2, 3, 0), Edge(2, 3, 1),
             Edge(3, 4, 0), Edge(3, 5, 1))
    # x1 is skipped on the path 0 -> 2, so node 2 cannot sit on one level
    skip = BranchingProgram(4, nodes, edges, 0, "det")
    res = check_leveled(skip)
    assert not res.ok and "1->2" in res.violation


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(0, 4))
def test_levelize_output_leveled(seed, t):
    bp = random_qbp(np.random.default_rng(seed))
    res = check_leveled(levelize(bp, t), t + 1)
    assert res.ok and len(res.levels) == t + 1


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_random_unitary_blocks_well_formed(seed):
    rep = check_well_formed(random_qbp(np.random.default_rng(seed)))
    assert rep.ok and rep.max_residual <= 1e-12


def test_family_profiles():
    for bp in (fig1_example(), perm_qobdd(2), gm_exact_obdd("IP", 4), linear_obdd("DISJ", 4)):
        assert validate_program(bp).ok
