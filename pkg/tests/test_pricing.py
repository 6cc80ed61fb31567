import csv

import numpy as np
import pytest

from dsomarket import builtin_case, run_case, sensitivity_sweep
from dsomarket.pricing import (SWEEP_MODES, scaled_scenarios, write_lmps_da, write_lmps_rt,
                               write_settlement, write_solution, write_sweep)
from dsomarket.scenario import Scenario, ScenarioSet, forecast_scenario
from helpers import zero_price_instance


def test_settlement_closes_on_objective(solved, mode):
    _, _, res = solved(mode)
    s = res.settlement
    assert s.dso.objective == pytest.approx(s.objective, abs=1e-8 * (1 + abs(s.objective)))
    assert s.objective == pytest.approx(res.milp.objective, abs=1e-9 * (1 + abs(s.objective)))


def test_retail_regulation_matches_aggregators(solved):
    _, _, res = solved("multi-uncertainty")
    s = res.settlement
    total = sum(a.reg_capacity + a.reg_mileage for a in s.aggregators)
    assert s.dso.retail_regulation_payments == pytest.approx(total)


def test_rt_prices_invariant_to_scenario_split():
    inst, scen = builtin_case("deterministic")
    s = scen.scenarios[0]
    halves = ScenarioSet(tuple(Scenario(w, 0.5, s.reag, s.load_p, s.load_q, s.rt_buy, s.rt_sell)
                               for w in (1, 2)))
    one = run_case(inst, scen)
    two = run_case(inst, halves)
    assert two.milp.objective == pytest.approx(one.milp.objective, abs=1e-6)
    assert np.allclose(two.lmps.rt[0], one.lmps.rt[0], atol=1e-6)
    assert np.allclose(two.lmps.rt[1], one.lmps.rt[0], atol=1e-6)


def test_lmp_lookup(solved):
    _, scen, res = solved("single-uncertainty")
    L = res.lmps
    assert L.da.shape == (5, 24) and L.rt.shape == (5, 5, 24)
    assert L.da_at(3, 7) == L.da[2, 6]
    assert L.rt_at(3, 7, 2) == L.rt[1, 2, 6]


def test_scaling_modes():
    inst, scen = builtin_case("multi-uncertainty")
    s = scen.scenarios[0]
    up = scaled_scenarios(scen, 2.0, "rt_premium_scale").scenarios[0]
    assert up.rt_buy[0] == 2 * s.rt_buy[0] and up.rt_sell[0] == 2 * s.rt_sell[0]
    spread = scaled_scenarios(scen, 2.0, "sell_buy_spread_scale").scenarios[0]
    assert spread.rt_buy[0] == 2 * s.rt_buy[0] and spread.rt_sell[0] == s.rt_sell[0] / 2
    with pytest.raises(ValueError):
        scaled_scenarios(scen, 2.0, "nope")


def test_sweep_at_one_equals_base(solved):
    inst, scen, base = solved("multi-uncertainty")
    series = sensitivity_sweep(inst, scen, [1.0, 3.0], mode="sell_buy_spread_scale")
    assert not series.failed
    first = series.records[0]
    assert first.objective == pytest.approx(base.milp.objective, abs=1e-9)
    r = base.settlement.get("reag", 5)
    assert first.reag_rt_expected == pytest.approx(r.rt_expected, abs=1e-9)
    # a wider real-time spread makes real-time correction of the renewable worth more
    assert series.records[1].reag_rt_expected > first.reag_rt_expected


def test_sweep_input_checks():
    inst, scen = builtin_case("deterministic")
    with pytest.raises(ValueError):
        sensitivity_sweep(inst, scen, [0.0])
    with pytest.raises(ValueError):
        sensitivity_sweep(inst, scen, [1.0], mode="other")
    assert SWEEP_MODES == ("rt_premium_scale", "sell_buy_spread_scale")


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_csv_writers(tmp_path, solved):
    inst, scen, res = solved("single-uncertainty")
    da = _read(write_lmps_da(tmp_path / "da.csv", res.lmps))
    assert da[0] == ["bus", "hour", "price"] and len(da) == 1 + 5 * 24
    assert float(da[1][2]) == res.lmps.da[0, 0]
    rt = _read(write_lmps_rt(tmp_path / "rt.csv", res.lmps))
    assert rt[0] == ["bus", "hour", "scenario", "price"] and len(rt) == 1 + 5 * 5 * 24
    st = _read(write_settlement(tmp_path / "s.csv", res.settlement, scen))
    assert st[0][:3] == ["party", "id", "bus"] and "rt_w5" in st[0]
    assert st[-1][0] == "dso_objective" and float(st[-1][3]) == res.settlement.objective
    sol = _read(write_solution(tmp_path / "x.csv", res.model, res.milp.x))
    assert sol[0] == ["column", "kind", "owner", "hour", "scenario", "value"]
    assert len(sol) == 1 + res.model.n_cols
    assert not any("np." in cell for row in sol for cell in row)


def test_sweep_csv(tmp_path):
    from dsomarket.pricing import SweepRecord, SweepSeries
    series = SweepSeries("rt_premium_scale", [SweepRecord(1.0, 1.0, -2.0, -1.0, (3.0, 3.0), 0.5, -9.0),
                                               SweepRecord(2.0, error="i=2: boom", error_kind="error")])
    rows = _read(write_sweep(tmp_path / "sw.csv", series))
    assert rows[0][-2:] == ["reag_schedule_1", "reag_schedule_2"]
    assert rows[2][6] == "i=2: boom"


def test_zero_prices_zero_revenues():
    inst = zero_price_instance(builtin_case("single-uncertainty")[0])
    scen = forecast_scenario(inst)
    res = run_case(inst, scen)
    assert res.milp.objective == 0.0
    for a in res.settlement.aggregators:
        assert a.da_energy == 0 and a.reg_capacity == 0 and a.reg_mileage == 0
        assert a.rt_expected == 0


def test_spread_sweep_shape():
    """Wider real-time spreads push the renewable day-ahead schedule down and raise
    its expected real-time revenue from one schedule level to the next (inside a
    level the revenue drifts down slightly as the sell price shrinks)."""
    inst, scen = builtin_case("multi-uncertainty")
    series = sensitivity_sweep(inst, scen, [1, 5, 13, 25], mode="sell_buy_spread_scale")
    assert not series.failed
    sched = [sum(r.reag_schedule) for r in series.records]
    assert all(b <= a + 1e-9 for a, b in zip(sched, sched[1:]))
    rt = [r.reag_rt_expected for r in series.records]
    assert rt[0] < rt[1] < rt[2]
    assert rt[3] > rt[0]
