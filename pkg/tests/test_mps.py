import io

import numpy as np
import pytest
from scipy.optimize import Bounds, LinearConstraint, milp

from dsomarket import assemble, builtin_instance, builtin_scenarios, solve_milp
from dsomarket.solver.mps import MpsError, read_mps, write_model_mps, write_mps
from helpers import random_lp


def dump(lp, integer=None):
    buf = io.StringIO()
    rows = [f"r{i}" for i in range(lp.shape[0])]
    cols = [f"c{j}" for j in range(lp.shape[1])]
    write_mps(buf, lp, rows, cols, integer)
    return buf.getvalue(), rows, cols


@pytest.mark.parametrize("seed", range(5))
def test_round_trip_bitwise(seed):
    lp = random_lp(np.random.default_rng(seed), 12, 15)
    text, rows, cols = dump(lp)
    back = read_mps(text)
    assert back.row_names == rows and back.col_names == cols
    assert np.array_equal(back.lp.A.toarray(), lp.A.toarray())
    for attr in ("row_lo", "col_lo", "col_hi", "c"):
        assert np.array_equal(getattr(back.lp, attr), getattr(lp, attr)), attr
    # ranged rows store lo and the range; hi is rebuilt with one rounding
    one_sided = np.isinf(lp.row_lo) | np.isinf(lp.row_hi) | (lp.row_lo == lp.row_hi)
    assert np.array_equal(back.lp.row_hi[one_sided], lp.row_hi[one_sided])
    assert np.allclose(back.lp.row_hi, lp.row_hi, rtol=4e-16, atol=1e-15)
    assert not back.integer.any()


def test_integer_markers_and_ranges():
    lp = random_lp(np.random.default_rng(4), 5, 6)
    integer = np.array([0, 1, 1, 0, 1, 0], dtype=bool)
    lp.col_lo[integer] = 0.0
    lp.col_hi[integer] = 1.0
    text, _, _ = dump(lp, integer)
    assert "'INTORG'" in text and "'INTEND'" in text
    back = read_mps(text)
    assert np.array_equal(back.integer, integer)
    assert np.array_equal(back.lp.col_hi, lp.col_hi)


def test_bad_names_rejected():
    lp = random_lp(np.random.default_rng(0), 2, 2)
    with pytest.raises(MpsError):
        write_mps(io.StringIO(), lp, ["a", "a"], ["x", "y"])
    with pytest.raises(MpsError):
        write_mps(io.StringIO(), lp, ["a", "b c"], ["x", "y"])
    with pytest.raises(MpsError):
        write_mps(io.StringIO(), lp, ["a"], ["x", "y"])


def test_reader_errors():
    with pytest.raises(MpsError):
        read_mps("NAME x\nROWS\n N obj\n Q r1\nENDATA\n")
    with pytest.raises(MpsError):
        read_mps("NAME x\nROWS\n N obj\n L r1\nCOLUMNS\n x r2 1.0\nENDATA\n")
    with pytest.raises(MpsError):
        read_mps("NAME x\nWHAT\n")


def test_model_export_solves_identically(tmp_path):
    inst = builtin_instance("single-uncertainty").truncated(range(21, 25))
    model = assemble(inst, builtin_scenarios(inst, "single-uncertainty"))
    path = write_model_mps(model, tmp_path / "m.mps")
    prob = read_mps(path.read_text())
    assert prob.col_names == model.col_names
    assert prob.row_names == [t.name for t in model.tags]
    assert np.array_equal(prob.integer, model.is_binary)
    lp = prob.lp
    ref = milp(lp.c, constraints=LinearConstraint(lp.A, lp.row_lo, lp.row_hi),
               integrality=prob.integer.astype(int), bounds=Bounds(lp.col_lo, lp.col_hi))
    assert ref.status == 0
    assert solve_milp(model).objective == pytest.approx(ref.fun, abs=1e-6)
