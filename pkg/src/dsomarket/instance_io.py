"""Reading and writing instance documents (YAML).

The schema is described in ``docs/instance_format.md``.  Hourly series may be
written as a list (one value per hour) or as a single number repeated over the
horizon.  Optional fields that are left out are filled with documented defaults
and recorded as ``default`` in the instance provenance log.
"""
from __future__ import annotations

import hashlib
import math
from pathlib import Path
from typing import Any

import yaml

from .instance import (Branch, DdgagSpec, DragSpec, EsagSpec, EvcsSpec, Flags, Instance,
                       LoadProfile, Network, PriceData, ReagSpec, RegulationOffer, TimeHorizon,
                       validate_instance)

FORMAT_TAG = "dsomarket-instance/1"

DEFAULT_TAN_PHI = math.tan(math.acos(0.95))

NETWORK_DEFAULTS = {"v_min": 0.95, "v_max": 1.05, "pl_max": 20.0, "ql_max": 20.0,
                    "v_ref": 1.0, "s_base": 10.0}
PRICE_DEFAULTS = {"cap_up": 0.0, "cap_dn": 0.0, "mil_up": 0.0, "mil_dn": 0.0,
                  "s_up": 1.0, "s_dn": 1.0, "mu_up": 0.9, "mu_dn": 0.9}
FLAG_DEFAULTS = {"rt_sell_allowed": True, "rt_premium": 0.0, "rt_sell_ratio": 1.0,
                 "evcs_eq23_strict": True}


class InstanceError(ValueError):
    """Syntax or semantic problem in an instance document.

    ``path`` is a dotted field path (``aggregators.esag[0].e_init``) and ``line``
    a 1-based line number when known.
    """

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if path:
            where.append(path)
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.path = path
        self.line = line


class _Reader:
    def __init__(self, T: int | None = None):
        self.T = T
        self.defaulted: list[str] = []

    # --- primitives -------------------------------------------------------
    def mapping(self, node, path, allowed, required=()):
        if not isinstance(node, dict):
            raise InstanceError("expected a mapping", path)
        unknown = sorted(set(map(str, node)) - set(allowed))
        if unknown:
            raise InstanceError(f"unknown field(s) {', '.join(unknown)}", path)
        for k in required:
            if k not in node:
                raise InstanceError("missing required field", f"{path}.{k}" if path else k)
        return node

    def number(self, value, path) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InstanceError(f"expected a number, got {value!r}", path)
        v = float(value)
        if not math.isfinite(v):
            raise InstanceError("non-finite number", path)
        return v

    def integer(self, value, path) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise InstanceError(f"expected an integer, got {value!r}", path)
        return int(value)

    def boolean(self, value, path) -> bool:
        if not isinstance(value, bool):
            raise InstanceError(f"expected true/false, got {value!r}", path)
        return value

    def series(self, value, path) -> tuple[float, ...]:
        if isinstance(value, list):
            out = tuple(self.number(v, f"{path}[{i}]") for i, v in enumerate(value))
            if len(out) != self.T:
                raise InstanceError(f"expected {self.T} hourly values, got {len(out)}", path)
            return out
        return (self.number(value, path),) * self.T

    def opt(self, node, key, path, default, conv):
        if key in node:
            return conv(node[key], f"{path}.{key}")
        self.defaulted.append(f"{path}.{key}")
        if conv == self.series:
            return conv(default, f"{path}.{key}")
        return default

    # --- sections -----------------------------------------------------------
    def regulation(self, node, path) -> RegulationOffer:
        if node is None:
            node = {}
        node = self.mapping(node, f"{path}.regulation", ("cap_up", "cap_dn", "mil_up", "mil_dn"))
        p = f"{path}.regulation"
        return RegulationOffer(*(self.opt(node, k, p, 0.0, self.series)
                                 for k in ("cap_up", "cap_dn", "mil_up", "mil_dn")))

    def regulation_of(self, node, path):
        if "regulation" not in node:
            self.defaulted.append(f"{path}.regulation")
            return RegulationOffer(*((0.0,) * self.T for _ in range(4)))
        return self.regulation(node["regulation"], path)

    def network(self, node) -> Network:
        p = "network"
        node = self.mapping(node, p, ("buses", "branches", "substation_bus", *NETWORK_DEFAULTS),
                            ("buses", "branches", "substation_bus"))
        if not isinstance(node["buses"], list):
            raise InstanceError("expected a list of bus ids", "network.buses")
        buses = tuple(self.integer(b, f"network.buses[{i}]") for i, b in enumerate(node["buses"]))
        if not isinstance(node["branches"], list):
            raise InstanceError("expected a list of branches", "network.branches")
        branches = []
        for i, br in enumerate(node["branches"]):
            bp = f"network.branches[{i}]"
            br = self.mapping(br, bp, ("id", "from", "to", "r", "x", "pl_max", "ql_max"),
                              ("id", "from", "to", "r", "x"))
            branches.append(Branch(
                self.integer(br["id"], bp + ".id"), self.integer(br["from"], bp + ".from"),
                self.integer(br["to"], bp + ".to"), self.number(br["r"], bp + ".r"),
                self.number(br["x"], bp + ".x"),
                self.number(br["pl_max"], bp + ".pl_max") if "pl_max" in br else None,
                self.number(br["ql_max"], bp + ".ql_max") if "ql_max" in br else None))
        extra = {k: self.opt(node, k, p, d, self.number) for k, d in NETWORK_DEFAULTS.items()}
        return Network(buses, tuple(branches), self.integer(node["substation_bus"],
                                                            "network.substation_bus"), **extra)

    def prices(self, node) -> PriceData:
        p = "prices"
        node = self.mapping(node, p, ("da_energy", *PRICE_DEFAULTS), ("da_energy",))
        values = {"da_energy": self.series(node["da_energy"], "prices.da_energy")}
        for k, d in PRICE_DEFAULTS.items():
            values[k] = self.opt(node, k, p, d, self.series)
        return PriceData(**values)

    def loads(self, node) -> LoadProfile:
        if node is None:
            node = []
        if not isinstance(node, list):
            raise InstanceError("expected a list of bus loads", "loads")
        p_map, q_map = {}, {}
        for i, item in enumerate(node):
            lp = f"loads[{i}]"
            item = self.mapping(item, lp, ("bus", "p", "q"), ("bus", "p"))
            bus = self.integer(item["bus"], lp + ".bus")
            if bus in p_map:
                raise InstanceError(f"duplicate load entry for bus {bus}", lp + ".bus")
            p_map[bus] = self.series(item["p"], lp + ".p")
            if "q" in item:
                q_map[bus] = self.series(item["q"], lp + ".q")
            else:
                self.defaulted.append(lp + ".q")
                q_map[bus] = tuple(v * DEFAULT_TAN_PHI for v in p_map[bus])
        return LoadProfile(p_map, q_map)

    def drag(self, node, path) -> DragSpec:
        node = self.mapping(node, path, ("id", "bus", "blocks", "r_up_max", "r_dn_max", "tan_phi",
                                         "regulation"), ("id", "bus", "blocks"))
        if not isinstance(node["blocks"], list):
            raise InstanceError("expected a list of demand blocks", path + ".blocks")
        p_max, prices = [], []
        for a, blk in enumerate(node["blocks"]):
            bp = f"{path}.blocks[{a}]"
            blk = self.mapping(blk, bp, ("p_max", "price"), ("p_max", "price"))
            p_max.append(self.number(blk["p_max"], bp + ".p_max"))
            prices.append(self.series(blk["price"], bp + ".price"))
        return DragSpec(self.integer(node["id"], path + ".id"), self.integer(node["bus"], path + ".bus"),
                        tuple(p_max), tuple(prices),
                        self.opt(node, "r_up_max", path, 0.0, self.number),
                        self.opt(node, "r_dn_max", path, 0.0, self.number),
                        self.opt(node, "tan_phi", path, DEFAULT_TAN_PHI, self.number),
                        self.regulation_of(node, path))

    def esag(self, node, path) -> EsagSpec:
        req = ("id", "bus", "e_min", "e_max", "e_init", "cr_max", "dr_max")
        node = self.mapping(node, path, (*req, "eta_ch", "eta_di", "energy_price", "regulation"), req)
        n = {k: self.number(node[k], f"{path}.{k}") for k in req[2:]}
        return EsagSpec(self.integer(node["id"], path + ".id"), self.integer(node["bus"], path + ".bus"),
                        n["e_min"], n["e_max"], n["e_init"], n["cr_max"], n["dr_max"],
                        self.opt(node, "eta_ch", path, 1.0, self.number),
                        self.opt(node, "eta_di", path, 1.0, self.number),
                        self.opt(node, "energy_price", path, 0.0, self.series),
                        self.regulation_of(node, path))

    def evcs(self, node, path) -> EvcsSpec:
        req = ("id", "bus", "er_max", "err_max", "cl_max", "e_init", "window")
        node = self.mapping(node, path, (*req, "gamma_ch", "energy_price", "regulation"), req)
        win = node["window"]
        if not isinstance(win, list):
            raise InstanceError("expected a list of hours", path + ".window")
        return EvcsSpec(self.integer(node["id"], path + ".id"), self.integer(node["bus"], path + ".bus"),
                        *(self.number(node[k], f"{path}.{k}") for k in ("er_max", "err_max", "cl_max",
                                                                       "e_init")),
                        self.opt(node, "gamma_ch", path, 1.0, self.number),
                        tuple(self.integer(h, f"{path}.window[{i}]") for i, h in enumerate(win)),
                        self.opt(node, "energy_price", path, 0.0, self.series),
                        self.regulation_of(node, path))

    def ddgag(self, node, path) -> DdgagSpec:
        req = ("id", "bus", "p_min", "p_max", "ru", "rd")
        node = self.mapping(node, path, (*req, "tan_phi", "energy_price", "regulation"), req)
        return DdgagSpec(self.integer(node["id"], path + ".id"), self.integer(node["bus"], path + ".bus"),
                         *(self.number(node[k], f"{path}.{k}") for k in req[2:]),
                         self.opt(node, "tan_phi", path, DEFAULT_TAN_PHI, self.number),
                         self.opt(node, "energy_price", path, 0.0, self.series),
                         self.regulation_of(node, path))

    def reag(self, node, path) -> ReagSpec:
        node = self.mapping(node, path, ("id", "bus", "p_forecast_max", "energy_price"),
                            ("id", "bus", "p_forecast_max"))
        return ReagSpec(self.integer(node["id"], path + ".id"), self.integer(node["bus"], path + ".bus"),
                        self.series(node["p_forecast_max"], path + ".p_forecast_max"),
                        self.opt(node, "energy_price", path, 0.0, self.series))

    def flags(self, node) -> Flags:
        if node is None:
            node = {}
        node = self.mapping(node, "flags", tuple(FLAG_DEFAULTS))
        return Flags(
            self.opt(node, "rt_sell_allowed", "flags", True, self.boolean),
            self.opt(node, "rt_premium", "flags", 0.0, self.number),
            self.opt(node, "rt_sell_ratio", "flags", 1.0, self.number),
            self.opt(node, "evcs_eq23_strict", "flags", True, self.boolean))


_KINDS = ("drag", "esag", "evcs", "ddgag", "reag")


def parse_instance(text: str, validate: bool = True) -> Instance:
    """Build an :class:`Instance` from a YAML document.

    Raises :class:`InstanceError` on malformed YAML (with a line number), on
    schema problems (with the field path) and, when ``validate`` is set, on the
    first finding of :func:`validate_instance`.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(exc, "problem", None) or str(exc)
        raise InstanceError(f"syntax error: {problem}", line=line) from None
    rd = _Reader()
    doc = rd.mapping(doc, "", ("format", "horizon", "network", "prices", "loads", "aggregators",
                               "flags", "provenance"), ("horizon", "network", "prices"))
    if "format" in doc and doc["format"] != FORMAT_TAG:
        raise InstanceError(f"unsupported format {doc['format']!r}", "format")
    hz = rd.mapping(doc["horizon"], "horizon", ("hours",), ("hours",))
    if not isinstance(hz["hours"], list) or not hz["hours"]:
        raise InstanceError("expected a non-empty list of hours", "horizon.hours")
    hours = tuple(rd.integer(h, f"horizon.hours[{i}]") for i, h in enumerate(hz["hours"]))
    rd.T = len(hours)
    network = rd.network(doc["network"])
    prices = rd.prices(doc["prices"])
    loads = rd.loads(doc.get("loads"))
    aggs = rd.mapping(doc.get("aggregators") or {}, "aggregators", _KINDS)
    groups = {}
    for kind in _KINDS:
        items = aggs.get(kind) or []
        if not isinstance(items, list):
            raise InstanceError("expected a list", f"aggregators.{kind}")
        build = getattr(rd, kind)
        groups[kind] = tuple(build(item, f"aggregators.{kind}[{i}]") for i, item in enumerate(items))
    flags = rd.flags(doc.get("flags"))
    prov_doc = doc.get("provenance") or {}
    if not isinstance(prov_doc, dict) or not all(isinstance(v, str) for v in prov_doc.values()):
        raise InstanceError("expected a mapping of field path to source label", "provenance")
    provenance = {str(k): v for k, v in prov_doc.items()}
    for p in rd.defaulted:
        provenance.setdefault(p, "default")
    inst = Instance(TimeHorizon(hours), network, groups["drag"], groups["esag"], groups["evcs"],
                    groups["ddgag"], groups["reag"], prices, loads, flags,
                    dict(sorted(provenance.items())))
    if validate:
        report = validate_instance(inst)
        if not report.ok:
            first = report.findings[0]
            more = f" (+{len(report) - 1} more)" if len(report) > 1 else ""
            raise InstanceError(first.message + more, first.path)
    return inst


def load_instance(path, validate: bool = True) -> Instance:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise InstanceError(f"cannot read instance file {p}: {exc.strerror or exc}") from None
    return parse_instance(text, validate=validate)


# ---------------------------------------------------------------------------
# writing

def _series(s):
    """Constant series collapse to a scalar."""
    if s and all(v == s[0] for v in s):
        return float(s[0])
    return [float(v) for v in s]


def _reg(r: RegulationOffer) -> dict:
    return {"cap_up": _series(r.cap_up), "cap_dn": _series(r.cap_dn),
            "mil_up": _series(r.mil_up), "mil_dn": _series(r.mil_dn)}


def instance_to_dict(inst: Instance) -> dict[str, Any]:
    net = inst.network
    branches = []
    for br in net.branches:
        d = {"id": br.id, "from": br.from_bus, "to": br.to_bus, "r": br.r, "x": br.x}
        if br.pl_max is not None:
            d["pl_max"] = br.pl_max
        if br.ql_max is not None:
            d["ql_max"] = br.ql_max
        branches.append(d)
    pr = inst.prices
    doc: dict[str, Any] = {
        "format": FORMAT_TAG,
        "horizon": {"hours": list(inst.horizon.hours)},
        "network": {"buses": list(net.buses), "substation_bus": net.substation_bus,
                    "branches": branches, **{k: getattr(net, k) for k in NETWORK_DEFAULTS}},
        "prices": {"da_energy": _series(pr.da_energy),
                   **{k: _series(getattr(pr, k)) for k in PRICE_DEFAULTS}},
        "loads": [{"bus": b, "p": _series(inst.loads.p[b]), "q": _series(inst.loads.q.get(b, ()))}
                  for b in inst.loads.p],
        "aggregators": {
            "drag": [{"id": d.id, "bus": d.bus,
                      "blocks": [{"p_max": pm, "price": _series(pp)}
                                 for pm, pp in zip(d.block_p_max, d.block_prices)],
                      "r_up_max": d.r_up_max, "r_dn_max": d.r_dn_max, "tan_phi": d.tan_phi,
                      "regulation": _reg(d.regulation)} for d in inst.drags],
            "esag": [{"id": e.id, "bus": e.bus, "e_min": e.e_min, "e_max": e.e_max,
                      "e_init": e.e_init, "cr_max": e.cr_max, "dr_max": e.dr_max,
                      "eta_ch": e.eta_ch, "eta_di": e.eta_di,
                      "energy_price": _series(e.energy_price), "regulation": _reg(e.regulation)}
                     for e in inst.esags],
            "evcs": [{"id": e.id, "bus": e.bus, "er_max": e.er_max, "err_max": e.err_max,
                      "cl_max": e.cl_max, "e_init": e.e_init, "gamma_ch": e.gamma_ch,
                      "window": list(e.window), "energy_price": _series(e.energy_price),
                      "regulation": _reg(e.regulation)} for e in inst.evcss],
            "ddgag": [{"id": d.id, "bus": d.bus, "p_min": d.p_min, "p_max": d.p_max,
                       "ru": d.ru, "rd": d.rd, "tan_phi": d.tan_phi,
                       "energy_price": _series(d.energy_price), "regulation": _reg(d.regulation)}
                      for d in inst.ddgags],
            "reag": [{"id": r.id, "bus": r.bus, "p_forecast_max": _series(r.p_forecast_max),
                      "energy_price": _series(r.energy_price)} for r in inst.reags],
        },
        "flags": {"rt_sell_allowed": inst.flags.rt_sell_allowed,
                  "rt_premium": inst.flags.rt_premium, "rt_sell_ratio": inst.flags.rt_sell_ratio,
                  "evcs_eq23_strict": inst.flags.evcs_eq23_strict},
        "provenance": dict(inst.provenance),
    }
    for b in inst.loads.q:
        if b not in inst.loads.p:
            raise InstanceError(f"reactive load at bus {b} has no active counterpart", "loads")
    return doc


class _Dumper(yaml.SafeDumper):
    pass


def _flow_lists(dumper, data):
    # short numeric lists stay on one line
    flow = all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in data)
    return dumper.represent_sequence("tag:yaml.org,2002:seq", data, flow_style=flow)


_Dumper.add_representer(list, _flow_lists)


def serialize_instance(inst: Instance) -> str:
    """YAML text that :func:`parse_instance` maps back to an equal instance."""
    return yaml.dump(instance_to_dict(inst), Dumper=_Dumper, sort_keys=False, width=100,
                     default_flow_style=False)


def save_instance(inst: Instance, path) -> Path:
    p = Path(path)
    p.write_text(serialize_instance(inst))
    return p


def instance_hash(inst: Instance) -> str:
    return hashlib.sha256(serialize_instance(inst).encode()).hexdigest()
