"""The five-bus case: one aggregator of each kind on a radial feeder.

Parameters stated in the case description are tagged ``paper`` in the
provenance log; everything the case leaves open (placements, line data, the
hourly price curves, demand blocks, EV charge capacity, power factors) is a
documented default and tagged ``default``.
"""
from __future__ import annotations

import math

from .instance import (Branch, DdgagSpec, DragSpec, EsagSpec, EvcsSpec, Flags, Instance,
                       LoadProfile, Network, PriceData, ReagSpec, RegulationOffer, TimeHorizon)
from .scenario import (ScenarioSet, discrete_reag_scenarios, forecast_scenario,
                       multi_uncertainty_scenarios)

MODES = ("deterministic", "single-uncertainty", "multi-uncertainty")

HOURS = tuple(range(1, 25))
EV_WINDOW = tuple(range(16, 25))

# synthetic day-ahead energy curve, $/MWh (overnight trough, evening peak)
DA_ENERGY = (24.0, 22.5, 21.0, 20.5, 21.0, 23.5, 28.0, 32.5, 35.0, 37.0, 38.5, 39.5,
             39.0, 38.0, 37.5, 39.0, 43.0, 48.5, 52.0, 50.0, 45.5, 39.0, 32.0, 27.0)
CAP_UP = tuple(round(6.0 + 0.12 * p, 2) for p in DA_ENERGY)
CAP_DN = tuple(round(4.0 + 0.10 * p, 2) for p in DA_ENERGY)
MIL_UP = (1.5,) * 24
MIL_DN = (1.2,) * 24

REAG_TABLE = ((1.0, 0.1), (1.5, 0.1), (3.0, 0.6), (2.0, 0.1), (2.5, 0.1))

POWER_FACTOR = 0.95
TAN_PHI = math.tan(math.acos(POWER_FACTOR))


def _flat(v: float) -> tuple[float, ...]:
    return (float(v),) * len(HOURS)


def _reg(cap_up, cap_dn, mil_up, mil_dn) -> RegulationOffer:
    return RegulationOffer(_flat(cap_up), _flat(cap_dn), _flat(mil_up), _flat(mil_dn))


PAPER_FIELDS = (
    "horizon.hours", "network.buses", "network.branches.count",
    "aggregators.evcs[0].window", "loads[0].p", "loads[0].bus",
    "aggregators.esag[0].e_init", "aggregators.esag[0].eta_ch", "aggregators.esag[0].eta_di",
    "aggregators.esag[0].e_min", "aggregators.esag[0].e_max", "aggregators.esag[0].cr_max",
    "aggregators.esag[0].dr_max", "aggregators.evcs[0].e_init", "aggregators.evcs[0].er_max",
    "aggregators.evcs[0].err_max", "aggregators.ddgag[0].p_min", "aggregators.ddgag[0].p_max",
    "aggregators.ddgag[0].ru", "aggregators.ddgag[0].rd", "aggregators.drag[0].blocks.p_max",
    "aggregators.drag[0].r_up_max", "aggregators.drag[0].r_dn_max",
    "aggregators.reag[0].p_forecast_max",
)

DEFAULT_FIELDS = (
    "network.substation_bus", "network.branches.topology", "network.branches.r",
    "network.branches.x", "network.v_min", "network.v_max", "network.pl_max", "network.ql_max",
    "network.v_ref", "network.s_base",
    "aggregators.drag[0].bus", "aggregators.esag[0].bus", "aggregators.evcs[0].bus",
    "aggregators.ddgag[0].bus", "aggregators.reag[0].bus",
    "prices.da_energy", "prices.cap_up", "prices.cap_dn", "prices.mil_up", "prices.mil_dn",
    "prices.s_up", "prices.s_dn", "prices.mu_up", "prices.mu_dn",
    "aggregators.drag[0].blocks.count", "aggregators.drag[0].blocks.price",
    "aggregators.drag[0].tan_phi", "aggregators.ddgag[0].tan_phi",
    "aggregators.evcs[0].cl_max", "aggregators.evcs[0].gamma_ch", "loads[0].q",
    "aggregators.drag[0].regulation", "aggregators.esag[0].regulation",
    "aggregators.evcs[0].regulation", "aggregators.ddgag[0].regulation",
    "aggregators.esag[0].energy_price", "aggregators.evcs[0].energy_price",
    "aggregators.ddgag[0].energy_price", "aggregators.reag[0].energy_price",
)


def builtin_instance(mode: str = "deterministic") -> Instance:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    network = Network(
        buses=(1, 2, 3, 4, 5),
        branches=tuple(Branch(j, j, j + 1, 0.01, 0.02) for j in range(1, 5)),
        substation_bus=1, v_min=0.95, v_max=1.05, pl_max=20.0, ql_max=20.0,
        v_ref=1.0, s_base=10.0)
    prices = PriceData(DA_ENERGY, CAP_UP, CAP_DN, MIL_UP, MIL_DN,
                       _flat(1.0), _flat(1.0), _flat(0.9), _flat(0.9))
    drag = DragSpec(
        id=1, bus=2, block_p_max=(10.0, 10.0, 10.0),
        block_prices=(tuple(p + 20.0 for p in DA_ENERGY), tuple(p - 6.0 for p in DA_ENERGY),
                      tuple(p - 12.0 for p in DA_ENERGY)),
        r_up_max=1.0, r_dn_max=1.0, tan_phi=TAN_PHI, regulation=_reg(3.0, 3.0, 0.5, 0.5))
    esag = EsagSpec(id=2, bus=3, e_min=2.0, e_max=10.0, e_init=8.0, cr_max=5.0, dr_max=5.0,
                    eta_ch=1.0, eta_di=1.0, energy_price=_flat(26.0),
                    regulation=_reg(25.0, 25.0, 5.0, 5.0))
    evcs = EvcsSpec(id=3, bus=4, er_max=5.0, err_max=0.5, cl_max=20.0, e_init=2.0, gamma_ch=1.0,
                    window=EV_WINDOW, energy_price=_flat(60.0), regulation=_reg(3.0, 3.0, 0.5, 0.5))
    ddgag = DdgagSpec(id=4, bus=5, p_min=0.0, p_max=5.0, ru=1.0, rd=1.0, tan_phi=TAN_PHI,
                      energy_price=_flat(30.0), regulation=_reg(2.5, 2.5, 0.5, 0.5))
    reag = ReagSpec(id=5, bus=4, p_forecast_max=_flat(3.0), energy_price=_flat(0.0))
    loads = LoadProfile({5: _flat(3.0)}, {5: _flat(3.0 * TAN_PHI)})
    if mode == "single-uncertainty":
        flags = Flags(rt_sell_allowed=False, rt_premium=2.0, rt_sell_ratio=1.0)
    elif mode == "multi-uncertainty":
        flags = Flags(rt_sell_allowed=True, rt_premium=0.0, rt_sell_ratio=0.8)
    else:
        flags = Flags(rt_sell_allowed=True, rt_premium=0.0, rt_sell_ratio=1.0)
    provenance = {k: "paper" for k in PAPER_FIELDS}
    provenance.update({k: "default" for k in DEFAULT_FIELDS})
    if mode == "deterministic":
        provenance.update({"flags.rt_premium": "default", "flags.rt_sell_ratio": "default",
                           "flags.rt_sell_allowed": "default"})
    elif mode == "single-uncertainty":
        provenance.update({"flags.rt_premium": "paper", "flags.rt_sell_allowed": "paper",
                           "flags.rt_sell_ratio": "default"})
    else:
        provenance.update({"flags.rt_premium": "default", "flags.rt_sell_allowed": "default",
                           "flags.rt_sell_ratio": "paper"})
    provenance["flags.evcs_eq23_strict"] = "default"
    return Instance(TimeHorizon(HOURS), network, (drag,), (esag,), (evcs,), (ddgag,), (reag,),
                    prices, loads, flags, dict(sorted(provenance.items())))


def builtin_scenarios(inst: Instance, mode: str) -> ScenarioSet:
    if mode == "deterministic":
        return forecast_scenario(inst)
    if mode == "single-uncertainty":
        return discrete_reag_scenarios(inst, REAG_TABLE)
    if mode == "multi-uncertainty":
        return multi_uncertainty_scenarios(inst, 0.05, 0.15, 0.08)
    raise ValueError(f"unknown mode {mode!r}")


def builtin_case(mode: str = "deterministic") -> tuple[Instance, ScenarioSet]:
    inst = builtin_instance(mode)
    return inst, builtin_scenarios(inst, mode)
