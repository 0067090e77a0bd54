import json

import numpy as np
import pytest

from qbplab.model import all_assignments
from qbplab.qtm import (BUNDLED_MACHINES, QtmError, QtmSpec, bundled_machine, compile_to_qbp, config_space_bound,
                        is_unidirectional, load_qtm, reachable_configs, simulate_qtm)
from qbplab.semantics import evolve
from qbplab.validate import check_unidirectional, check_well_formed


@pytest.mark.parametrize("name", sorted(BUNDLED_MACHINES))
def test_cross_simulation(name):
    m = bundled_machine(name)
    bp, configs = compile_to_qbp(m)
    assert check_well_formed(bp).ok
    assert bp.size <= config_space_bound(m)
    assert configs[0].state == m.start
    for a in all_assignments(m.n):
        assert np.allclose(simulate_qtm(m, a, 20).halting, evolve(bp, a, 20).halting, atol=1e-12)


def test_or3_outputs():
    m = bundled_machine("or-3")
    for a in all_assignments(3):
        assert simulate_qtm(m, a, 5).p(str(int(a.any()))) == pytest.approx(1)


def test_parity4_outputs():
    m = bundled_machine("parity-4")
    for a in all_assignments(4):
        tr = simulate_qtm(m, a, 6)
        assert tr.p(str(int(a.sum() % 2))) == pytest.approx(1)
        assert tr.halting_steps() == [4]


def test_interference_computes_xor():
    m = bundled_machine("interference")
    for a in all_assignments(2):
        assert simulate_qtm(m, a, 4).p(str(int(a[0] ^ a[1]))) == pytest.approx(1, abs=1e-12)


def test_immediate_halt():
    tr = simulate_qtm(bundled_machine("immediate-halt"), [0], 3)
    assert tr.halting_steps() == [0] and tr.p("1") == 1


def test_bidirectional_detected():
    m = bundled_machine("bidirectional")
    assert not is_unidirectional(m).ok
    bp, _ = compile_to_qbp(m)
    assert not check_unidirectional(bp).ok
    with pytest.raises(QtmError):
        compile_to_qbp(m, check=True)


def test_unitarity_check():
    d = bundled_machine("interference").to_dict()
    d["transitions"][1]["amp"] = [0.9, 0]
    with pytest.raises(QtmError, match="unitary"):
        simulate_qtm(QtmSpec.from_dict(d), [0, 0], 3)


def test_round_trip_and_load(tmp_path):
    m = bundled_machine("or-3")
    path = tmp_path / "m.json"
    path.write_text(json.dumps(m.to_dict()))
    back = load_qtm(path)
    assert back.to_dict() == m.to_dict()
    path.write_text("{\n  oops")
    with pytest.raises(QtmError, match="line 2"):
        load_qtm(path)


def test_spec_errors():
    d = bundled_machine("parity-4").to_dict()
    with pytest.raises(QtmError):
        QtmSpec.from_dict({k: v for k, v in d.items() if k != "start"})
    bad = dict(d, alphabet=["0", "1"])
    with pytest.raises(QtmError):
        QtmSpec.from_dict(bad)
    with pytest.raises(ValueError):
        simulate_qtm(bundled_machine("parity-4"), [0, 1], 3)
    with pytest.raises(ValueError):
        bundled_machine("nope")


def test_reachable_configs_per_input():
    m = bundled_machine("or-3")
    assert len(reachable_configs(m, [1, 0, 0])) < len(reachable_configs(m))
