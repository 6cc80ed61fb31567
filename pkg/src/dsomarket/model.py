"""Two-stage stochastic MILP of the DSO problem.

Columns are created once, with their bounds, by :func:`index_variables`; the
``add_*`` builders append tagged rows; :func:`assemble` glues the pieces into a
:class:`Model`.  Balance rows are written supply-minus-demand with the inelastic
load on the right-hand side, so their duals read directly as $/MWh prices of
extra consumption.

Column count for an instance with |T| hours, |W| scenarios and |N| buses::

    per hour      4 (substation) + sum_DRAG(|A|+2) + 11*|K2| + 3*|K3| + 3*|K4|
                  + |K5| + 2*|J| + |N|
    per station   1 (EVCS binary)
    per (w, t)    3 (rt buy, rt sell, rt reactive) + |K5| (spill) + 2*|J| + |N|
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable

import numpy as np
import scipy.sparse as sp

from .instance import Instance, validate_instance
from .scenario import ScenarioSet
from .solver.lp import BoundedLp

INF = np.inf


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class VarKey:
    kind: str
    owner: Hashable
    hour: int | None
    scenario: int | None = None

    @property
    def name(self) -> str:
        owner = self.owner
        if isinstance(owner, tuple):
            owner = "b".join(str(o) for o in owner)
        parts = [self.kind, str(owner) if owner is not None else "sys"]
        if self.hour is not None:
            parts.append(str(self.hour))
        if self.scenario is not None:
            parts.append(f"w{self.scenario}")
        return "_".join(parts)


@dataclass(frozen=True)
class Tag:
    family: str
    owner: Hashable
    hour: int | None
    scenario: int | None = None

    @property
    def name(self) -> str:
        owner = self.owner
        if isinstance(owner, tuple):
            owner = "b".join(str(o) for o in owner)
        parts = [self.family, str(owner) if owner is not None else "sys"]
        if self.hour is not None:
            parts.append(str(self.hour))
        if self.scenario is not None:
            parts.append(f"w{self.scenario}")
        return "_".join(parts)


FIRST_STAGE_KINDS = (
    "psub", "qsub", "rsub_up", "rsub_dn",
    "drag_p", "drag_rup", "drag_rdn",
    "esag_e", "esag_p", "esag_pch", "esag_pdi", "esag_rup", "esag_rdn",
    "esag_rup_di", "esag_rdn_di", "esag_rup_ch", "esag_rdn_ch", "esag_b",
    "evcs_p", "evcs_rup", "evcs_rdn", "evcs_b",
    "ddg_p", "ddg_rup", "ddg_rdn", "reag_p",
    "pl", "ql", "v",
)
SECOND_STAGE_KINDS = ("pbuy", "psell", "qsub_rt", "spill", "pl_w", "ql_w", "v_w")


class VariableIndex:
    """Bijection between :class:`VarKey` and dense column ids, with bounds."""

    def __init__(self):
        self.keys: list[VarKey] = []
        self.lo: list[float] = []
        self.hi: list[float] = []
        self.binary: list[bool] = []
        self._col: dict[VarKey, int] = {}

    def add(self, kind, owner, hour, scenario=None, lo=0.0, hi=INF, binary=False) -> int:
        key = VarKey(kind, owner, hour, scenario)
        if key in self._col:
            raise ModelError(f"duplicate column {key.name}")
        self._col[key] = len(self.keys)
        self.keys.append(key)
        self.lo.append(float(lo))
        self.hi.append(float(hi))
        self.binary.append(binary)
        return self._col[key]

    def __call__(self, kind, owner, hour, scenario=None) -> int:
        return self._col[VarKey(kind, owner, hour, scenario)]

    def get(self, kind, owner, hour, scenario=None) -> int | None:
        return self._col.get(VarKey(kind, owner, hour, scenario))

    def __len__(self) -> int:
        return len(self.keys)

    def __contains__(self, key: VarKey) -> bool:
        return key in self._col

    @property
    def n_binaries(self) -> int:
        return sum(self.binary)

    def count_by_kind(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for k in self.keys:
            out[k.kind] = out.get(k.kind, 0) + 1
        return out


class RowBuffer:
    """Accumulates tagged sparse rows."""

    def __init__(self):
        self.tags: list[Tag] = []
        self.coefs: list[dict[int, float]] = []
        self.sense: list[str] = []
        self.rhs: list[float] = []
        self._seen: set[Tag] = set()

    def add(self, tag: Tag, coefs: dict[int, float], sense: str, rhs: float) -> None:
        if tag in self._seen:
            raise ModelError(f"duplicate row tag {tag.name}")
        coefs = {c: v for c, v in coefs.items() if v != 0.0}
        if not coefs:
            raise ModelError(f"empty row {tag.name}")
        if sense not in ("E", "L", "G"):
            raise ModelError(f"bad sense {sense!r}")
        self._seen.add(tag)
        self.tags.append(tag)
        self.coefs.append(coefs)
        self.sense.append(sense)
        self.rhs.append(float(rhs))

    def __len__(self) -> int:
        return len(self.tags)

    def count_by_family(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for t in self.tags:
            out[t.family] = out.get(t.family, 0) + 1
        return out


def _acc(coefs: dict[int, float], col: int | None, v: float) -> None:
    if col is None:
        return
    coefs[col] = coefs.get(col, 0.0) + v


# ---------------------------------------------------------------------------
# columns

def index_variables(inst: Instance, scen: ScenarioSet | None) -> VariableIndex:
    idx = VariableIndex()
    net = inst.network
    hours = inst.horizon.hours
    for t, h in enumerate(hours):
        idx.add("psub", None, h, lo=-INF, hi=INF)
        idx.add("qsub", None, h, lo=-INF, hi=INF)
        idx.add("rsub_up", None, h)
        idx.add("rsub_dn", None, h)
        for d in inst.drags:
            for a, pmax in enumerate(d.block_p_max, start=1):
                idx.add("drag_p", (d.id, a), h, hi=pmax)
            idx.add("drag_rup", d.id, h, hi=d.r_up_max)
            idx.add("drag_rdn", d.id, h, hi=d.r_dn_max)
        for e in inst.esags:
            idx.add("esag_e", e.id, h, lo=e.e_min, hi=e.e_max)
            idx.add("esag_p", e.id, h, lo=-INF, hi=INF)
            idx.add("esag_pch", e.id, h, hi=e.cr_max)
            idx.add("esag_pdi", e.id, h, hi=e.dr_max)
            idx.add("esag_rup", e.id, h)
            idx.add("esag_rdn", e.id, h)
            idx.add("esag_rup_di", e.id, h, hi=e.dr_max)
            idx.add("esag_rdn_di", e.id, h, hi=e.dr_max)
            idx.add("esag_rup_ch", e.id, h, hi=e.cr_max)
            idx.add("esag_rdn_ch", e.id, h, hi=e.cr_max)
            idx.add("esag_b", e.id, h, hi=1.0, binary=True)
        for e in inst.evcss:
            on = h in e.window
            idx.add("evcs_p", e.id, h, hi=e.er_max if on else 0.0)
            idx.add("evcs_rup", e.id, h, hi=e.err_max if on else 0.0)
            idx.add("evcs_rdn", e.id, h, hi=e.err_max if on else 0.0)
        for g in inst.ddgags:
            idx.add("ddg_p", g.id, h, lo=g.p_min, hi=g.p_max)
            idx.add("ddg_rup", g.id, h, hi=g.ru)
            idx.add("ddg_rdn", g.id, h, hi=g.rd)
        for r in inst.reags:
            idx.add("reag_p", r.id, h, hi=r.p_forecast_max[t])
        for br in net.branches:
            idx.add("pl", br.id, h, lo=-net.branch_pl_max(br), hi=net.branch_pl_max(br))
            idx.add("ql", br.id, h, lo=-net.branch_ql_max(br), hi=net.branch_ql_max(br))
        for n in net.buses:
            if n == net.substation_bus:
                idx.add("v", n, h, lo=net.v_ref, hi=net.v_ref)
            else:
                idx.add("v", n, h, lo=net.v_min, hi=net.v_max)
    for e in inst.evcss:
        idx.add("evcs_b", e.id, None, hi=1.0, binary=True)
    if scen is None:
        return idx
    sell_hi = INF if inst.flags.rt_sell_allowed else 0.0
    for s in scen:
        w = s.id
        for t, h in enumerate(hours):
            idx.add("pbuy", None, h, w)
            idx.add("psell", None, h, w, hi=sell_hi)
            idx.add("qsub_rt", None, h, w, lo=-INF, hi=INF)
            for r in inst.reags:
                idx.add("spill", r.id, h, w, hi=s.reag[r.id][t])
            for br in net.branches:
                idx.add("pl_w", br.id, h, w, lo=-net.branch_pl_max(br), hi=net.branch_pl_max(br))
                idx.add("ql_w", br.id, h, w, lo=-net.branch_ql_max(br), hi=net.branch_ql_max(br))
            for n in net.buses:
                if n == net.substation_bus:
                    idx.add("v_w", n, h, w, lo=net.v_ref, hi=net.v_ref)
                else:
                    idx.add("v_w", n, h, w, lo=net.v_min, hi=net.v_max)
    return idx


# ---------------------------------------------------------------------------
# objective

def build_objective(inst: Instance, scen: ScenarioSet | None, idx: VariableIndex) -> np.ndarray:
    c = np.zeros(len(idx))
    pr = inst.prices
    for t, h in enumerate(inst.horizon.hours):
        up_mileage = pr.s_up[t] * pr.mu_up[t]
        dn_mileage = pr.s_dn[t] * pr.mu_dn[t]
        c[idx("psub", None, h)] += pr.da_energy[t]
        c[idx("rsub_up", None, h)] -= pr.cap_up[t] + up_mileage * pr.mil_up[t]
        c[idx("rsub_dn", None, h)] -= pr.cap_dn[t] + dn_mileage * pr.mil_dn[t]

        def regulation(kind_up, kind_dn, owner, reg):
            c[idx(kind_up, owner, h)] += reg.cap_up[t] + up_mileage * reg.mil_up[t]
            c[idx(kind_dn, owner, h)] += reg.cap_dn[t] + dn_mileage * reg.mil_dn[t]

        for d in inst.drags:
            for a, prices in enumerate(d.block_prices, start=1):
                c[idx("drag_p", (d.id, a), h)] -= prices[t]
            regulation("drag_rup", "drag_rdn", d.id, d.regulation)
        for e in inst.esags:
            c[idx("esag_p", e.id, h)] += e.energy_price[t]
            regulation("esag_rup", "esag_rdn", e.id, e.regulation)
        for e in inst.evcss:
            c[idx("evcs_p", e.id, h)] -= e.energy_price[t]
            regulation("evcs_rup", "evcs_rdn", e.id, e.regulation)
        for g in inst.ddgags:
            c[idx("ddg_p", g.id, h)] += g.energy_price[t]
            regulation("ddg_rup", "ddg_rdn", g.id, g.regulation)
        for r in inst.reags:
            c[idx("reag_p", r.id, h)] += r.energy_price[t]
    if scen is not None:
        for s in scen:
            for t, h in enumerate(inst.horizon.hours):
                c[idx("pbuy", None, h, s.id)] += s.probability * s.rt_buy[t]
                c[idx("psell", None, h, s.id)] -= s.probability * s.rt_sell[t]
    return c


# ---------------------------------------------------------------------------
# aggregator blocks

def add_drag_block(inst: Instance, idx: VariableIndex, rows: RowBuffer) -> None:
    for d in inst.drags:
        total = sum(d.block_p_max)
        for h in inst.horizon.hours:
            blocks = [idx("drag_p", (d.id, a), h) for a in range(1, len(d.block_p_max) + 1)]
            lo = {b: 1.0 for b in blocks}
            lo[idx("drag_rdn", d.id, h)] = -1.0
            rows.add(Tag("EQ2_DRAG_DN", d.id, h), lo, "G", 0.0)
            hi = {b: 1.0 for b in blocks}
            hi[idx("drag_rup", d.id, h)] = 1.0
            rows.add(Tag("EQ3_DRAG_UP", d.id, h), hi, "L", total)


def add_esag_block(inst: Instance, idx: VariableIndex, rows: RowBuffer) -> None:
    pr = inst.prices
    for e in inst.esags:
        prev = None
        for t, h in enumerate(inst.horizon.hours):
            col = lambda kind: idx(kind, e.id, h)  # noqa: E731
            # P = E_{t-1} - E_t + (mu_up/eta_di) r_up - eta_ch mu_dn r_dn
            coefs = {col("esag_p"): 1.0, col("esag_e"): 1.0,
                     col("esag_rup"): -pr.mu_up[t] / e.eta_di,
                     col("esag_rdn"): e.eta_ch * pr.mu_dn[t]}
            rhs = 0.0
            if prev is None:
                rhs = e.e_init
            else:
                _acc(coefs, prev, -1.0)
            rows.add(Tag("EQ7_ESAG_ENERGY", e.id, h), coefs, "E", rhs)
            rows.add(Tag("EQ8_ESAG_SPLIT", e.id, h),
                     {col("esag_p"): 1.0, col("esag_pdi"): -1.0 / e.eta_di,
                      col("esag_pch"): e.eta_ch}, "E", 0.0)
            rows.add(Tag("EQ9_ESAG_RUP", e.id, h),
                     {col("esag_rup"): 1.0, col("esag_rup_di"): -1.0, col("esag_rdn_ch"): -1.0},
                     "E", 0.0)
            rows.add(Tag("EQ10_ESAG_RDN", e.id, h),
                     {col("esag_rdn"): 1.0, col("esag_rdn_di"): -1.0, col("esag_rup_ch"): -1.0},
                     "E", 0.0)
            b = col("esag_b")
            for fam, kind in (("EQ12_ESAG_PDI", "esag_pdi"), ("EQ13_ESAG_RUP_DI", "esag_rup_di"),
                              ("EQ14_ESAG_RDN_DI", "esag_rdn_di")):
                rows.add(Tag(fam, e.id, h), {col(kind): 1.0, b: -e.dr_max}, "L", 0.0)
            for fam, kind in (("EQ15_ESAG_PCH", "esag_pch"), ("EQ16_ESAG_RUP_CH", "esag_rup_ch"),
                              ("EQ17_ESAG_RDN_CH", "esag_rdn_ch")):
                rows.add(Tag(fam, e.id, h), {col(kind): 1.0, b: e.cr_max}, "L", e.cr_max)
            rows.add(Tag("EQ18_ESAG_DI_LO", e.id, h),
                     {col("esag_rdn_di"): 1.0, col("esag_pdi"): -1.0}, "L", 0.0)
            rows.add(Tag("EQ18_ESAG_DI_HI", e.id, h),
                     {col("esag_pdi"): 1.0, col("esag_rup_di"): 1.0}, "L", e.dr_max)
            rows.add(Tag("EQ19_ESAG_CH_LO", e.id, h),
                     {col("esag_rdn_ch"): 1.0, col("esag_pch"): -1.0}, "L", 0.0)
            rows.add(Tag("EQ19_ESAG_CH_HI", e.id, h),
                     {col("esag_pch"): 1.0, col("esag_rup_ch"): 1.0}, "L", e.cr_max)
            prev = col("esag_e")


def add_evcs_block(inst: Instance, idx: VariableIndex, rows: RowBuffer) -> None:
    pr = inst.prices
    for e in inst.evcss:
        if not e.window:
            raise ModelError(f"EVCS {e.id} has an empty availability window")
        b = idx("evcs_b", e.id, None)
        strict = inst.flags.evcs_eq23_strict
        g = e.gamma_ch
        energy: dict[int, float] = {}
        for t, h in enumerate(inst.horizon.hours):
            if h not in e.window:
                continue
            p, up, dn = idx("evcs_p", e.id, h), idx("evcs_rup", e.id, h), idx("evcs_rdn", e.id, h)
            rows.add(Tag("EQ20_1_EVCS_P", e.id, h), {p: 1.0, b: -e.er_max}, "L", 0.0)
            rows.add(Tag("EQ20_2_EVCS_RUP", e.id, h), {up: 1.0, b: -e.err_max}, "L", 0.0)
            rows.add(Tag("EQ20_3_EVCS_RDN", e.id, h), {dn: 1.0, b: -e.err_max}, "L", 0.0)
            rows.add(Tag("EQ20_EVCS_HEAD", e.id, h), {p: 1.0, up: 1.0}, "L", e.er_max)
            rows.add(Tag("EQ21_EVCS_FOOT", e.id, h), {p: 1.0, dn: -1.0}, "G", 0.0)
            _acc(energy, p, g)
            _acc(energy, up, g * pr.mu_up[t])
            _acc(energy, dn, -g * pr.mu_dn[t])
        init = e.e_init if strict else g * e.e_init
        lo = dict(energy)
        _acc(lo, b, init - 0.9 * e.cl_max)
        rows.add(Tag("EQ23_EVCS_FULL_LO", e.id, None), lo, "G", 0.0)
        hi = dict(energy)
        _acc(hi, b, init - e.cl_max)
        rows.add(Tag("EQ23_EVCS_FULL_HI", e.id, None), hi, "L", 0.0)


def add_ddgag_block(inst: Instance, idx: VariableIndex, rows: RowBuffer) -> None:
    for g in inst.ddgags:
        for h in inst.horizon.hours:
            p = idx("ddg_p", g.id, h)
            rows.add(Tag("EQ24_DDG_UP", g.id, h), {p: 1.0, idx("ddg_rup", g.id, h): 1.0}, "L", g.p_max)
            rows.add(Tag("EQ25_DDG_DN", g.id, h), {p: 1.0, idx("ddg_rdn", g.id, h): -1.0}, "G", g.p_min)


def add_reag_block(inst: Instance, idx: VariableIndex, rows: RowBuffer) -> None:
    """Renewable limits are column bounds only (schedule cap and spill <= availability)."""
    return None


# ---------------------------------------------------------------------------
# network

def _at_bus(group, bus):
    return [a for a in group if a.bus == bus]


def add_day_ahead_network(inst: Instance, idx: VariableIndex, rows: RowBuffer) -> None:
    net = inst.network
    for t, h in enumerate(inst.horizon.hours):
        for n in net.buses:
            p: dict[int, float] = {}
            q: dict[int, float] = {}
            for d in _at_bus(inst.drags, n):
                for a in range(1, len(d.block_p_max) + 1):
                    col = idx("drag_p", (d.id, a), h)
                    _acc(p, col, -1.0)
                    _acc(q, col, -d.tan_phi)
            for e in _at_bus(inst.evcss, n):
                _acc(p, idx("evcs_p", e.id, h), -1.0)
            for e in _at_bus(inst.esags, n):
                _acc(p, idx("esag_p", e.id, h), 1.0)
            for g in _at_bus(inst.ddgags, n):
                _acc(p, idx("ddg_p", g.id, h), 1.0)
                _acc(q, idx("ddg_p", g.id, h), g.tan_phi)
            for r in _at_bus(inst.reags, n):
                _acc(p, idx("reag_p", r.id, h), 1.0)
            if n == net.substation_bus:
                _acc(p, idx("psub", None, h), 1.0)
                _acc(q, idx("qsub", None, h), 1.0)
            for br in net.branches:
                a = net.incidence(br, n)
                if a:
                    _acc(p, idx("pl", br.id, h), -a)
                    _acc(q, idx("ql", br.id, h), -a)
            rows.add(Tag("EQ52_BALANCE_P", n, h), p, "E", inst.loads.p_at(n, t))
            rows.add(Tag("EQ53_BALANCE_Q", n, h), q, "E", inst.loads.q_at(n, t))
        for br in net.branches:
            # V_to = V_from - (r Pl + x Ql) / S_base
            rows.add(Tag("EQ54_VDROP", br.id, h),
                     {idx("v", br.to_bus, h): 1.0, idx("v", br.from_bus, h): -1.0,
                      idx("pl", br.id, h): br.r / net.s_base,
                      idx("ql", br.id, h): br.x / net.s_base}, "E", 0.0)
        up: dict[int, float] = {idx("rsub_up", None, h): 1.0}
        dn: dict[int, float] = {idx("rsub_dn", None, h): 1.0}
        for e in inst.esags:
            _acc(up, idx("esag_rup", e.id, h), -1.0)
            _acc(dn, idx("esag_rdn", e.id, h), -1.0)
        for g in inst.ddgags:
            _acc(up, idx("ddg_rup", g.id, h), -1.0)
            _acc(dn, idx("ddg_rdn", g.id, h), -1.0)
        # demand-side capacity-down is system regulation-up and vice versa
        for d in inst.drags:
            _acc(up, idx("drag_rdn", d.id, h), -1.0)
            _acc(dn, idx("drag_rup", d.id, h), -1.0)
        for e in inst.evcss:
            _acc(up, idx("evcs_rdn", e.id, h), -1.0)
            _acc(dn, idx("evcs_rup", e.id, h), -1.0)
        rows.add(Tag("EQ58_REG_UP", None, h), up, "E", 0.0)
        rows.add(Tag("EQ59_REG_DN", None, h), dn, "E", 0.0)


def add_real_time_network(inst: Instance, scen: ScenarioSet, idx: VariableIndex,
                          rows: RowBuffer) -> None:
    net = inst.network
    for s in scen:
        w = s.id
        for t, h in enumerate(inst.horizon.hours):
            for n in net.buses:
                p: dict[int, float] = {}
                q: dict[int, float] = {}
                rhs_p = s.load_p_at(n, t) - inst.loads.p_at(n, t)
                rhs_q = s.load_q_at(n, t) - inst.loads.q_at(n, t)
                for r in _at_bus(inst.reags, n):
                    _acc(p, idx("reag_p", r.id, h), -1.0)
                    _acc(p, idx("spill", r.id, h, w), -1.0)
                    rhs_p -= s.reag[r.id][t]
                if n == net.substation_bus:
                    _acc(p, idx("pbuy", None, h, w), 1.0)
                    _acc(p, idx("psell", None, h, w), -1.0)
                    _acc(q, idx("qsub_rt", None, h, w), 1.0)
                for br in net.branches:
                    a = net.incidence(br, n)
                    if a:
                        _acc(p, idx("pl_w", br.id, h, w), -a)
                        _acc(p, idx("pl", br.id, h), a)
                        _acc(q, idx("ql_w", br.id, h, w), -a)
                        _acc(q, idx("ql", br.id, h), a)
                rows.add(Tag("EQ60_ADJ_P", n, h, w), p, "E", rhs_p)
                rows.add(Tag("EQ61_ADJ_Q", n, h, w), q, "E", rhs_q)
            for br in net.branches:
                rs, xs = br.r / net.s_base, br.x / net.s_base
                coefs: dict[int, float] = {}
                _acc(coefs, idx("v_w", br.to_bus, h, w), 1.0)
                _acc(coefs, idx("v", br.to_bus, h), -1.0)
                _acc(coefs, idx("v_w", br.from_bus, h, w), -1.0)
                _acc(coefs, idx("v", br.from_bus, h), 1.0)
                _acc(coefs, idx("pl_w", br.id, h, w), rs)
                _acc(coefs, idx("pl", br.id, h), -rs)
                _acc(coefs, idx("ql_w", br.id, h, w), xs)
                _acc(coefs, idx("ql", br.id, h), -xs)
                rows.add(Tag("EQ62_ADJ_V", br.id, h, w), coefs, "E", 0.0)


# ---------------------------------------------------------------------------
# model

@dataclass
class Model:
    index: VariableIndex
    c: np.ndarray
    A: sp.csr_matrix
    sense: np.ndarray
    rhs: np.ndarray
    tags: list[Tag]
    scenario_probability: dict[int, float] = field(default_factory=dict)
    # secondary cost used only to pick among alternative optima
    tie_break: np.ndarray | None = None

    def __post_init__(self):
        self.col_lo = np.asarray(self.index.lo, dtype=float)
        self.col_hi = np.asarray(self.index.hi, dtype=float)
        self.is_binary = np.asarray(self.index.binary, dtype=bool)
        self.tag_index = {tag: i for i, tag in enumerate(self.tags)}

    @property
    def n_cols(self) -> int:
        return self.A.shape[1]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def binaries(self) -> np.ndarray:
        return np.flatnonzero(self.is_binary)

    @property
    def col_names(self) -> list[str]:
        return [k.name for k in self.index.keys]

    def row_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.where(self.sense == "L", -INF, self.rhs)
        hi = np.where(self.sense == "G", INF, self.rhs)
        return lo, hi

    def to_lp(self, col_lo: np.ndarray | None = None, col_hi: np.ndarray | None = None) -> BoundedLp:
        lo, hi = self.row_bounds()
        return BoundedLp(self.A, lo, hi,
                         self.col_lo if col_lo is None else col_lo,
                         self.col_hi if col_hi is None else col_hi,
                         self.c, list(self.tags))

    def row(self, tag: Tag) -> int:
        try:
            return self.tag_index[tag]
        except KeyError:
            raise ModelError(f"no row tagged {tag}") from None

    def col(self, kind, owner, hour, scenario=None) -> int:
        return self.index(kind, owner, hour, scenario)

    def violations(self, x: np.ndarray) -> tuple[float, float]:
        """Largest row and bound violations of ``x``."""
        act = self.A @ x
        lo, hi = self.row_bounds()
        row_v = np.maximum(lo - act, act - hi).max(initial=0.0)
        col_v = np.maximum(self.col_lo - x, x - self.col_hi).max(initial=0.0)
        return float(max(row_v, 0.0)), float(max(col_v, 0.0))


def assemble(inst: Instance, scen: ScenarioSet | None, validate: bool = True) -> Model:
    """Build the MILP; ``scen=None`` gives the pure day-ahead model."""
    if validate:
        report = validate_instance(inst)
        if not report.ok:
            raise ModelError(f"invalid instance:\n{report}")
    if scen is not None:
        missing = [s.id for s in scen for r in inst.reags if r.id not in s.reag]
        if missing:
            raise ModelError(f"scenarios {missing} lack renewable realisations")
    idx = index_variables(inst, scen)
    c = build_objective(inst, scen, idx)
    rows = RowBuffer()
    add_drag_block(inst, idx, rows)
    add_esag_block(inst, idx, rows)
    add_evcs_block(inst, idx, rows)
    add_ddgag_block(inst, idx, rows)
    add_reag_block(inst, idx, rows)
    add_day_ahead_network(inst, idx, rows)
    if scen is not None:
        add_real_time_network(inst, scen, idx, rows)
    data, indices, indptr = [], [], [0]
    for coefs in rows.coefs:
        for col in sorted(coefs):
            indices.append(col)
            data.append(coefs[col])
        indptr.append(len(indices))
    A = sp.csr_matrix((np.array(data, dtype=float), np.array(indices, dtype=np.int64),
                       np.array(indptr, dtype=np.int64)), shape=(len(rows), len(idx)))
    probs = {s.id: s.probability for s in scen} if scen is not None else {}
    return Model(idx, c, A, np.array(rows.sense), np.array(rows.rhs), rows.tags, probs,
                 rt_trade_weights(inst, scen, idx))


def rt_trade_weights(inst: Instance, scen: ScenarioSet | None, idx: VariableIndex) -> np.ndarray:
    """Expected real-time traded energy as a cost vector (day-ahead wins price ties)."""
    w = np.zeros(len(idx))
    if scen is None:
        return w
    for s in scen:
        for h in inst.horizon.hours:
            for kind in ("pbuy", "psell"):
                w[idx(kind, None, h, s.id)] = s.probability
    return w
