"""Problem data: network, aggregator fleets, price series, loads and flags.

Everything here is immutable.  Hourly series are tuples aligned with
``TimeHorizon.hours`` (position ``t`` of a series belongs to ``hours[t]``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Mapping

Series = tuple[float, ...]


@dataclass(frozen=True)
class TimeHorizon:
    hours: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.hours)

    def position(self, hour: int) -> int:
        return self.hours.index(hour)


@dataclass(frozen=True)
class Branch:
    id: int
    from_bus: int
    to_bus: int
    r: float
    x: float
    # per-branch limit overrides; None falls back to the network-wide limit
    pl_max: float | None = None
    ql_max: float | None = None


@dataclass(frozen=True)
class Network:
    buses: tuple[int, ...]
    branches: tuple[Branch, ...]
    substation_bus: int
    v_min: float = 0.95
    v_max: float = 1.05
    pl_max: float = 20.0
    ql_max: float = 20.0
    v_ref: float = 1.0
    s_base: float = 10.0

    def incidence(self, branch: Branch, bus: int) -> int:
        """A(j, n): +1 at the sending bus, -1 at the receiving bus."""
        if bus == branch.from_bus:
            return 1
        if bus == branch.to_bus:
            return -1
        return 0

    def adjacency(self) -> dict[tuple[int, int], int]:
        """C(m, n) = 1 for every bus pair joined by a branch."""
        C = {}
        for br in self.branches:
            C[(br.from_bus, br.to_bus)] = 1
            C[(br.to_bus, br.from_bus)] = 1
        return C

    def branch_pl_max(self, br: Branch) -> float:
        return self.pl_max if br.pl_max is None else br.pl_max

    def branch_ql_max(self, br: Branch) -> float:
        return self.ql_max if br.ql_max is None else br.ql_max


@dataclass(frozen=True)
class RegulationOffer:
    """Hourly regulation offer prices of one aggregator ($/MW and $/MW-mile)."""

    cap_up: Series
    cap_dn: Series
    mil_up: Series
    mil_dn: Series


@dataclass(frozen=True)
class DragSpec:
    id: int
    bus: int
    block_p_max: tuple[float, ...]
    block_prices: tuple[Series, ...]
    r_up_max: float
    r_dn_max: float
    tan_phi: float
    regulation: RegulationOffer


@dataclass(frozen=True)
class EsagSpec:
    id: int
    bus: int
    e_min: float
    e_max: float
    e_init: float
    cr_max: float
    dr_max: float
    eta_ch: float
    eta_di: float
    energy_price: Series
    regulation: RegulationOffer


@dataclass(frozen=True)
class EvcsSpec:
    id: int
    bus: int
    er_max: float
    err_max: float
    cl_max: float
    e_init: float
    gamma_ch: float
    window: tuple[int, ...]
    energy_price: Series
    regulation: RegulationOffer


@dataclass(frozen=True)
class DdgagSpec:
    id: int
    bus: int
    p_min: float
    p_max: float
    ru: float
    rd: float
    tan_phi: float
    energy_price: Series
    regulation: RegulationOffer


@dataclass(frozen=True)
class ReagSpec:
    id: int
    bus: int
    p_forecast_max: Series
    energy_price: Series


@dataclass(frozen=True)
class PriceData:
    da_energy: Series
    cap_up: Series
    cap_dn: Series
    mil_up: Series
    mil_dn: Series
    s_up: Series
    s_dn: Series
    mu_up: Series
    mu_dn: Series


@dataclass(frozen=True)
class LoadProfile:
    """Inelastic base load per bus; buses absent from the maps carry no load."""

    p: Mapping[int, Series]
    q: Mapping[int, Series]

    def p_at(self, bus: int, t: int) -> float:
        s = self.p.get(bus)
        return 0.0 if s is None else s[t]

    def q_at(self, bus: int, t: int) -> float:
        s = self.q.get(bus)
        return 0.0 if s is None else s[t]


@dataclass(frozen=True)
class Flags:
    rt_sell_allowed: bool = True
    rt_premium: float = 0.0
    rt_sell_ratio: float = 1.0
    # True: E_int*b + gamma*sum(...); False: gamma*(E_int*b + sum(...))
    evcs_eq23_strict: bool = True


@dataclass(frozen=True)
class Instance:
    horizon: TimeHorizon
    network: Network
    drags: tuple[DragSpec, ...]
    esags: tuple[EsagSpec, ...]
    evcss: tuple[EvcsSpec, ...]
    ddgags: tuple[DdgagSpec, ...]
    reags: tuple[ReagSpec, ...]
    prices: PriceData
    loads: LoadProfile
    flags: Flags = Flags()
    provenance: Mapping[str, str] = field(default_factory=dict, compare=True)

    @property
    def T(self) -> int:
        return len(self.horizon.hours)

    def aggregators(self):
        for kind, group in (("drag", self.drags), ("esag", self.esags), ("evcs", self.evcss),
                            ("ddgag", self.ddgags), ("reag", self.reags)):
            for agg in group:
                yield kind, agg

    def truncated(self, hours: Iterable[int]) -> "Instance":
        """Restrict every series to a subset of hours (EVCS windows are intersected)."""
        keep = [h for h in self.horizon.hours if h in set(hours)]
        pos = [self.horizon.position(h) for h in keep]

        def cut(s):
            return tuple(s[p] for p in pos)

        def cut_reg(reg):
            return RegulationOffer(cut(reg.cap_up), cut(reg.cap_dn), cut(reg.mil_up), cut(reg.mil_dn))

        drags = tuple(replace(d, block_prices=tuple(cut(b) for b in d.block_prices),
                              regulation=cut_reg(d.regulation)) for d in self.drags)
        esags = tuple(replace(e, energy_price=cut(e.energy_price), regulation=cut_reg(e.regulation))
                      for e in self.esags)
        evcss = tuple(replace(e, window=tuple(h for h in e.window if h in keep),
                              energy_price=cut(e.energy_price), regulation=cut_reg(e.regulation))
                      for e in self.evcss)
        ddgags = tuple(replace(d, energy_price=cut(d.energy_price), regulation=cut_reg(d.regulation))
                       for d in self.ddgags)
        reags = tuple(replace(r, p_forecast_max=cut(r.p_forecast_max), energy_price=cut(r.energy_price))
                      for r in self.reags)
        prices = PriceData(**{f.name: cut(getattr(self.prices, f.name)) for f in fields(PriceData)})
        loads = LoadProfile({b: cut(s) for b, s in self.loads.p.items()},
                            {b: cut(s) for b, s in self.loads.q.items()})
        return replace(self, horizon=TimeHorizon(tuple(keep)), drags=drags, esags=esags,
                       evcss=evcss, ddgags=ddgags, reags=reags, prices=prices, loads=loads)


# ---------------------------------------------------------------------------
# validation

@dataclass(frozen=True)
class Finding:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.findings

    def __len__(self) -> int:
        return len(self.findings)

    def __iter__(self):
        return iter(self.findings)

    def __str__(self) -> str:
        return "\n".join(str(f) for f in self.findings) or "no findings"


def _is_radial(buses: tuple[int, ...], branches: tuple[Branch, ...]) -> bool:
    if len(branches) != len(buses) - 1:
        return False
    adj = {b: [] for b in buses}
    for br in branches:
        if br.from_bus not in adj or br.to_bus not in adj:
            return False
        adj[br.from_bus].append(br.to_bus)
        adj[br.to_bus].append(br.from_bus)
    seen = {buses[0]}
    stack = [buses[0]]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == len(buses)


def validate_instance(inst: Instance) -> ValidationReport:
    out: list[Finding] = []

    def bad(path, msg):
        out.append(Finding(path, msg))

    T = len(inst.horizon.hours)
    hours = inst.horizon.hours
    if T == 0:
        bad("horizon.hours", "horizon is empty")
    elif any(b <= a for a, b in zip(hours, hours[1:])):
        bad("horizon.hours", "hours are not strictly increasing")

    def series(path, s, lo=None, hi=None):
        if len(s) != T:
            bad(path, f"expected {T} hourly values, got {len(s)}")
            return
        if not all(math.isfinite(v) for v in s):
            bad(path, "non-finite value")
            return
        if lo is not None and min(s, default=lo) < lo:
            bad(path, f"value below {lo}")
        if hi is not None and max(s, default=hi) > hi:
            bad(path, f"value above {hi}")

    net = inst.network
    buses = set(net.buses)
    if len(buses) != len(net.buses):
        bad("network.buses", "duplicate bus id")
    if net.substation_bus not in buses:
        bad("network.substation_bus", f"substation bus {net.substation_bus} not in network")
    for j, br in enumerate(net.branches):
        p = f"network.branches[{j}]"
        for end in (br.from_bus, br.to_bus):
            if end not in buses:
                bad(p, f"branch {br.id} references unknown bus {end}")
        if br.r < 0 or br.x < 0:
            bad(p, "negative impedance")
        if br.pl_max is not None and br.pl_max <= 0:
            bad(p + ".pl_max", "flow limit must be positive")
        if br.ql_max is not None and br.ql_max <= 0:
            bad(p + ".ql_max", "flow limit must be positive")
    if len({br.id for br in net.branches}) != len(net.branches):
        bad("network.branches", "duplicate branch id")
    if net.buses and not _is_radial(net.buses, net.branches):
        bad("network.branches", "network is not radial (needs |buses|-1 branches, connected)")
    if not net.v_min < net.v_max:
        bad("network.v_min", "v_min must be below v_max")
    if net.pl_max <= 0 or net.ql_max <= 0:
        bad("network.pl_max", "flow limits must be positive")
    if net.s_base <= 0:
        bad("network.s_base", "system base must be positive")

    pr = inst.prices
    for f in fields(PriceData):
        lo, hi = None, None
        if f.name in ("mu_up", "mu_dn"):
            lo, hi = 0.0, 1.0
        elif f.name in ("s_up", "s_dn"):
            lo = 0.0
        series(f"prices.{f.name}", getattr(pr, f.name), lo, hi)

    for label, loads in (("p", inst.loads.p), ("q", inst.loads.q)):
        for i, (bus, s) in enumerate(loads.items()):
            if bus not in buses:
                bad(f"loads[{i}].bus", f"load at unknown bus {bus}")
            series(f"loads[{i}].{label}", s, lo=0.0)

    def reg(path, r):
        for name in ("cap_up", "cap_dn", "mil_up", "mil_dn"):
            series(f"{path}.regulation.{name}", getattr(r, name))

    for kind, group in (("drag", inst.drags), ("esag", inst.esags), ("evcs", inst.evcss),
                        ("ddgag", inst.ddgags), ("reag", inst.reags)):
        if len({a.id for a in group}) != len(group):
            bad(f"aggregators.{kind}", "duplicate aggregator id")
        for i, a in enumerate(group):
            p = f"aggregators.{kind}[{i}]"
            if a.bus not in buses:
                bad(p + ".bus", f"{kind} {a.id} placed at unknown bus {a.bus}")

    for i, d in enumerate(inst.drags):
        p = f"aggregators.drag[{i}]"
        if not d.block_p_max:
            bad(p + ".blocks", "at least one demand block required")
        if any(v <= 0 for v in d.block_p_max):
            bad(p + ".blocks", "block p_max must be positive")
        if len(d.block_prices) != len(d.block_p_max):
            bad(p + ".blocks", "one price series per block required")
        for a, s in enumerate(d.block_prices):
            series(f"{p}.blocks[{a}].price", s)
        if d.r_up_max < 0 or d.r_dn_max < 0:
            bad(p, "regulation limits must be non-negative")
        reg(p, d.regulation)
    for i, e in enumerate(inst.esags):
        p = f"aggregators.esag[{i}]"
        if e.e_init > e.e_max:
            bad(p + ".e_init", "e_init exceeds e_max")
        if e.e_init < e.e_min:
            bad(p + ".e_init", "e_init below e_min")
        if e.e_min > e.e_max:
            bad(p + ".e_min", "e_min exceeds e_max")
        if e.cr_max <= 0 or e.dr_max <= 0:
            bad(p, "charge/discharge rates must be positive")
        if not (0 < e.eta_ch <= 1 and 0 < e.eta_di <= 1):
            bad(p, "efficiencies must lie in (0, 1]")
        series(p + ".energy_price", e.energy_price)
        reg(p, e.regulation)
    for i, e in enumerate(inst.evcss):
        p = f"aggregators.evcs[{i}]"
        if not 0 <= e.e_init <= e.cl_max:
            bad(p + ".e_init", "e_init must lie in [0, cl_max]")
        if e.er_max <= 0:
            bad(p + ".er_max", "er_max must be positive")
        if e.err_max < 0:
            bad(p + ".err_max", "err_max must be non-negative")
        if not 0 < e.gamma_ch <= 1:
            bad(p + ".gamma_ch", "gamma_ch must lie in (0, 1]")
        w = e.window
        if not w:
            bad(p + ".window", "availability window is empty")
        elif any(h not in hours for h in w):
            bad(p + ".window", "availability window is not a subset of the horizon")
        else:
            pos = [hours.index(h) for h in w]
            if pos != list(range(pos[0], pos[0] + len(pos))):
                bad(p + ".window", "availability window is not contiguous")
        series(p + ".energy_price", e.energy_price)
        reg(p, e.regulation)
    for i, d in enumerate(inst.ddgags):
        p = f"aggregators.ddgag[{i}]"
        if not 0 <= d.p_min <= d.p_max:
            bad(p + ".p_min", "need 0 <= p_min <= p_max")
        if d.ru < 0 or d.rd < 0:
            bad(p, "ramp limits must be non-negative")
        series(p + ".energy_price", d.energy_price)
        reg(p, d.regulation)
    for i, r in enumerate(inst.reags):
        p = f"aggregators.reag[{i}]"
        series(p + ".p_forecast_max", r.p_forecast_max, lo=0.0)
        series(p + ".energy_price", r.energy_price)

    fl = inst.flags
    if not 0 <= fl.rt_sell_ratio <= 1:
        bad("flags.rt_sell_ratio", "sell/buy ratio must lie in [0, 1]")
    if not math.isfinite(fl.rt_premium):
        bad("flags.rt_premium", "non-finite premium")
    return ValidationReport(tuple(out))
