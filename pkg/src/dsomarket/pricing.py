"""Nodal prices, settlement and real-time price sensitivity sweeps."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .instance import Instance
from .model import Model, ModelError, Tag, assemble
from .scenario import ScenarioSet
from .solver.lp import LpSolution, NumericalBreakdown, Tolerances
from .solver.milp import MilpInfeasible, MilpSolution, solve_milp


@dataclass
class LmpSurface:
    buses: tuple[int, ...]
    hours: tuple[int, ...]
    scenarios: tuple[int, ...]
    da: np.ndarray   # (bus, hour)
    rt: np.ndarray   # (scenario, bus, hour)

    def da_at(self, bus: int, hour: int) -> float:
        return float(self.da[self.buses.index(bus), self.hours.index(hour)])

    def rt_at(self, bus: int, hour: int, scenario: int) -> float:
        return float(self.rt[self.scenarios.index(scenario), self.buses.index(bus),
                             self.hours.index(hour)])


def extract_lmps(model: Model, pricing: LpSolution, scen: ScenarioSet | None,
                 inst: Instance) -> LmpSurface:
    """Day-ahead prices are the nodal active-balance duals; real-time prices are the
    adjustment-balance duals divided by scenario probability."""
    if not pricing.optimal:
        raise ModelError("pricing LP is not optimal")
    if pricing.duals.shape[0] != model.n_rows:
        raise ModelError("solution does not belong to this model")
    buses = inst.network.buses
    hours = inst.horizon.hours
    da = np.empty((len(buses), len(hours)))
    for i, n in enumerate(buses):
        for t, h in enumerate(hours):
            da[i, t] = pricing.duals[model.row(Tag("EQ52_BALANCE_P", n, h))]
    ids = tuple(s.id for s in scen) if scen is not None else ()
    rt = np.empty((len(ids), len(buses), len(hours)))
    if scen is not None:
        for k, s in enumerate(scen):
            for i, n in enumerate(buses):
                for t, h in enumerate(hours):
                    dual = pricing.duals[model.row(Tag("EQ60_ADJ_P", n, h, s.id))]
                    rt[k, i, t] = dual / s.probability
    if not (np.all(np.isfinite(da)) and np.all(np.isfinite(rt))):
        raise ModelError("non-finite prices")
    return LmpSurface(tuple(buses), tuple(hours), ids, da, rt)


@dataclass
class AggregatorSettlement:
    kind: str
    id: int
    bus: int
    da_energy: float
    reg_capacity: float
    reg_mileage: float
    rt_by_scenario: dict[int, float]
    rt_expected: float

    @property
    def total_expected(self) -> float:
        return self.da_energy + self.reg_capacity + self.reg_mileage + self.rt_expected


@dataclass
class DsoBreakdown:
    """Signed terms of the DSO objective (costs positive)."""

    da_energy_cost: float
    reg_capacity_revenue: float
    reg_mileage_revenue: float
    retail_energy_payments: float
    retail_regulation_payments: float
    rt_buy_cost: float
    rt_sell_revenue: float

    @property
    def objective(self) -> float:
        return (self.da_energy_cost - self.reg_capacity_revenue - self.reg_mileage_revenue
                + self.retail_energy_payments + self.retail_regulation_payments
                + self.rt_buy_cost - self.rt_sell_revenue)


@dataclass
class SettlementReport:
    aggregators: list[AggregatorSettlement]
    dso: DsoBreakdown
    objective: float

    def get(self, kind: str, agg_id: int) -> AggregatorSettlement:
        for a in self.aggregators:
            if a.kind == kind and a.id == agg_id:
                return a
        raise KeyError((kind, agg_id))


_ENERGY_COLS = {
    "drag": None, "esag": ("esag_p", 1.0), "evcs": ("evcs_p", -1.0),
    "ddgag": ("ddg_p", 1.0), "reag": ("reag_p", 1.0),
}
_REG_COLS = {"drag": ("drag_rup", "drag_rdn"), "esag": ("esag_rup", "esag_rdn"),
             "evcs": ("evcs_rup", "evcs_rdn"), "ddgag": ("ddg_rup", "ddg_rdn")}


def settle(model: Model, solution: MilpSolution | LpSolution, lmps: LmpSurface, inst: Instance,
           scen: ScenarioSet | None) -> SettlementReport:
    x = solution.x
    pr = inst.prices
    hours = inst.horizon.hours
    col = model.col
    out = []
    for kind, agg in inst.aggregators():
        da = 0.0
        cap = 0.0
        mil = 0.0
        for t, h in enumerate(hours):
            lam = lmps.da_at(agg.bus, h)
            if kind == "drag":
                taken = sum(x[col("drag_p", (agg.id, a), h)] for a in range(1, len(agg.block_p_max) + 1))
                da -= taken * lam
            else:
                kname, sign = _ENERGY_COLS[kind]
                da += sign * x[col(kname, agg.id, h)] * lam
            if kind in _REG_COLS:
                up, dn = (x[col(k, agg.id, h)] for k in _REG_COLS[kind])
                reg = agg.regulation
                cap += up * reg.cap_up[t] + dn * reg.cap_dn[t]
                mil += (up * pr.s_up[t] * pr.mu_up[t] * reg.mil_up[t]
                        + dn * pr.s_dn[t] * pr.mu_dn[t] * reg.mil_dn[t])
        rt: dict[int, float] = {}
        if scen is not None:
            for s in scen:
                v = 0.0
                if kind == "reag":
                    for t, h in enumerate(hours):
                        dev = (s.reag[agg.id][t] - x[col("spill", agg.id, h, s.id)]
                               - x[col("reag_p", agg.id, h)])
                        v += dev * lmps.rt_at(agg.bus, h, s.id)
                rt[s.id] = v
        expected = math.fsum(s.probability * rt[s.id] for s in scen) if scen is not None else 0.0
        out.append(AggregatorSettlement(kind, agg.id, agg.bus, da, cap, mil, rt, expected))

    da_cost = cap_rev = mil_rev = 0.0
    retail_e = retail_r = 0.0
    for t, h in enumerate(hours):
        da_cost += pr.da_energy[t] * x[col("psub", None, h)]
        up, dn = x[col("rsub_up", None, h)], x[col("rsub_dn", None, h)]
        cap_rev += up * pr.cap_up[t] + dn * pr.cap_dn[t]
        mil_rev += up * pr.s_up[t] * pr.mu_up[t] * pr.mil_up[t] + dn * pr.s_dn[t] * pr.mu_dn[t] * pr.mil_dn[t]
        for d in inst.drags:
            for a, prices in enumerate(d.block_prices, start=1):
                retail_e -= prices[t] * x[col("drag_p", (d.id, a), h)]
        for e in inst.esags:
            retail_e += e.energy_price[t] * x[col("esag_p", e.id, h)]
        for e in inst.evcss:
            retail_e -= e.energy_price[t] * x[col("evcs_p", e.id, h)]
        for g in inst.ddgags:
            retail_e += g.energy_price[t] * x[col("ddg_p", g.id, h)]
        for r in inst.reags:
            retail_e += r.energy_price[t] * x[col("reag_p", r.id, h)]
    for a in out:
        retail_r += a.reg_capacity + a.reg_mileage
    buy = sell = 0.0
    if scen is not None:
        for s in scen:
            for t, h in enumerate(hours):
                buy += s.probability * s.rt_buy[t] * x[col("pbuy", None, h, s.id)]
                sell += s.probability * s.rt_sell[t] * x[col("psell", None, h, s.id)]
    dso = DsoBreakdown(da_cost, cap_rev, mil_rev, retail_e, retail_r, buy, sell)
    return SettlementReport(out, dso, float(model.c @ x))


# ---------------------------------------------------------------------------
# sensitivity sweeps

SWEEP_MODES = ("rt_premium_scale", "sell_buy_spread_scale")


@dataclass
class SweepRecord:
    multiplier: float
    reag_da_revenue: float = math.nan
    reag_rt_expected: float = math.nan
    reag_total: float = math.nan
    reag_schedule: tuple[float, ...] = ()
    rt_traded_expected: float = math.nan
    objective: float = math.nan
    error: str | None = None
    error_kind: str | None = None   # "infeasible" | "breakdown" | "error"


@dataclass
class SweepSeries:
    mode: str
    records: list[SweepRecord] = field(default_factory=list)

    @property
    def multipliers(self) -> list[float]:
        return [r.multiplier for r in self.records]

    @property
    def failed(self) -> list[SweepRecord]:
        return [r for r in self.records if r.error is not None]


def scaled_scenarios(scen: ScenarioSet, multiplier: float, mode: str) -> ScenarioSet:
    if mode == "rt_premium_scale":
        return scen.scaled_prices(multiplier, multiplier)
    if mode == "sell_buy_spread_scale":
        # buy price grows, sell price shrinks: the real-time spread widens with i
        return scen.scaled_prices(multiplier, 1.0 / multiplier)
    raise ValueError(f"unknown sweep mode {mode!r}; expected one of {SWEEP_MODES}")


@dataclass
class CaseResult:
    model: Model
    milp: MilpSolution
    lmps: LmpSurface
    settlement: SettlementReport


def run_case(inst: Instance, scen: ScenarioSet | None, tol: Tolerances | None = None,
             stream=None) -> CaseResult:
    model = assemble(inst, scen)
    milp = solve_milp(model, tol=tol, stream=stream)
    lmps = extract_lmps(model, milp.pricing, scen, inst)
    report = settle(model, milp, lmps, inst, scen)
    return CaseResult(model, milp, lmps, report)


def _failure_kind(exc: Exception) -> str:
    if isinstance(exc, MilpInfeasible):
        return "infeasible"
    if isinstance(exc, NumericalBreakdown):
        return "breakdown"
    return "error"


def sensitivity_sweep(inst: Instance, scen: ScenarioSet, multipliers: Iterable[float],
                      mode: str = "rt_premium_scale", tol: Tolerances | None = None) -> SweepSeries:
    multipliers = [float(i) for i in multipliers]
    if any(not (i > 0) for i in multipliers):
        raise ValueError("multipliers must be positive")
    if mode not in SWEEP_MODES:
        raise ValueError(f"unknown sweep mode {mode!r}; expected one of {SWEEP_MODES}")
    series = SweepSeries(mode)
    for i in multipliers:
        case_scen = scaled_scenarios(scen, i, mode)
        try:
            res = run_case(inst, case_scen, tol)
        except Exception as exc:  # recorded per case, the sweep carries on
            series.records.append(SweepRecord(i, error=f"i={i:g}: {exc}", error_kind=_failure_kind(exc)))
            continue
        x = res.milp.x
        reag = inst.reags[0]
        rs = res.settlement.get("reag", reag.id)
        sched = tuple(float(x[res.model.col("reag_p", reag.id, h)]) for h in inst.horizon.hours)
        traded = 0.0
        for s in case_scen:
            for h in inst.horizon.hours:
                traded += s.probability * (x[res.model.col("pbuy", None, h, s.id)]
                                           + x[res.model.col("psell", None, h, s.id)])
        series.records.append(SweepRecord(i, rs.da_energy, rs.rt_expected, rs.total_expected,
                                          sched, traded, res.milp.objective))
    return series


# ---------------------------------------------------------------------------
# CSV emitters (fixed headers and row order, full double precision)

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def write_lmps_da(path, lmps: LmpSurface) -> Path:
    rows = ((n, h, float(lmps.da[i, t])) for i, n in enumerate(lmps.buses)
            for t, h in enumerate(lmps.hours))
    return _write(path, ("bus", "hour", "price"), rows)


def write_lmps_rt(path, lmps: LmpSurface) -> Path:
    rows = ((n, h, w, float(lmps.rt[k, i, t])) for k, w in enumerate(lmps.scenarios)
            for i, n in enumerate(lmps.buses) for t, h in enumerate(lmps.hours))
    return _write(path, ("bus", "hour", "scenario", "price"), rows)


def write_settlement(path, report: SettlementReport, scen: ScenarioSet | None) -> Path:
    ids = [s.id for s in scen] if scen is not None else []
    header = ["party", "id", "bus", "da_energy", "reg_capacity", "reg_mileage"]
    header += [f"rt_w{w}" for w in ids] + ["rt_expected", "total_expected"]
    rows = []
    for a in report.aggregators:
        rows.append([a.kind, a.id, a.bus, a.da_energy, a.reg_capacity, a.reg_mileage]
                    + [a.rt_by_scenario[w] for w in ids] + [a.rt_expected, a.total_expected])
    d = report.dso
    pad = [""] * len(ids)
    for name, value in (("dso_da_energy_cost", d.da_energy_cost),
                        ("dso_reg_capacity_revenue", d.reg_capacity_revenue),
                        ("dso_reg_mileage_revenue", d.reg_mileage_revenue),
                        ("dso_retail_energy_payments", d.retail_energy_payments),
                        ("dso_retail_regulation_payments", d.retail_regulation_payments),
                        ("dso_rt_buy_cost", d.rt_buy_cost),
                        ("dso_rt_sell_revenue", d.rt_sell_revenue),
                        ("dso_objective", report.objective)):
        rows.append([name, "", "", value, "", ""] + pad + ["", ""])
    return _write(path, header, rows)


def _owner(owner) -> str:
    if owner is None:
        return ""
    if isinstance(owner, tuple):
        return "b".join(str(o) for o in owner)
    return str(owner)


def write_solution(path, model: Model, x: np.ndarray) -> Path:
    rows = ((k.name, k.kind, _owner(k.owner), "" if k.hour is None else k.hour,
             "" if k.scenario is None else k.scenario, float(x[i]))
            for i, k in enumerate(model.index.keys))
    return _write(path, ("column", "kind", "owner", "hour", "scenario", "value"), rows)


def write_sweep(path, series: SweepSeries) -> Path:
    T = max((len(r.reag_schedule) for r in series.records), default=0)
    header = ["multiplier", "reag_da_revenue", "reag_rt_expected", "reag_total",
              "rt_traded_expected", "objective", "error"] + [f"reag_schedule_{t + 1}" for t in range(T)]
    rows = []
    for r in series.records:
        sched = list(r.reag_schedule) + [""] * (T - len(r.reag_schedule))
        rows.append([r.multiplier, r.reag_da_revenue, r.reag_rt_expected, r.reag_total,
                     r.rt_traded_expected, r.objective, r.error or ""] + sched)
    return _write(path, header, rows)
