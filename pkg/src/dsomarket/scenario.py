"""Second-stage scenario sets.

Two generators are provided: a discrete table of renewable production levels
(one scenario per row, everything else at its forecast) and a seven-point
quantisation of a normal deviation applied comonotonically to load, real-time
price and renewable production.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .instance import Instance, Series


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    id: int
    probability: float
    reag: Mapping[int, Series]      # reag id -> available production per hour
    load_p: Mapping[int, Series]    # bus -> active load per hour
    load_q: Mapping[int, Series]
    rt_buy: Series
    rt_sell: Series
    label: str = ""

    def load_p_at(self, bus: int, t: int) -> float:
        s = self.load_p.get(bus)
        return 0.0 if s is None else s[t]

    def load_q_at(self, bus: int, t: int) -> float:
        s = self.load_q.get(bus)
        return 0.0 if s is None else s[t]


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple[Scenario, ...]

    def __post_init__(self):
        if not self.scenarios:
            raise ScenarioError("scenario set is empty")
        ids = [s.id for s in self.scenarios]
        if len(set(ids)) != len(ids):
            raise ScenarioError("scenario ids must be unique")
        if any(s.probability <= 0 for s in self.scenarios):
            raise ScenarioError("scenario probabilities must be positive")
        total = math.fsum(s.probability for s in self.scenarios)
        if abs(total - 1.0) > 1e-12:
            raise ScenarioError(f"scenario probabilities sum to {total!r}, not 1")
        for s in self.scenarios:
            if any(sell > buy for sell, buy in zip(s.rt_sell, s.rt_buy)):
                raise ScenarioError(f"scenario {s.id}: real-time sell price above buy price")
            for series in list(s.reag.values()) + list(s.load_p.values()) + list(s.load_q.values()):
                if min(series, default=0.0) < 0:
                    raise ScenarioError(f"scenario {s.id}: negative realisation")

    def __len__(self) -> int:
        return len(self.scenarios)

    def __iter__(self):
        return iter(self.scenarios)

    @property
    def probabilities(self) -> tuple[float, ...]:
        return tuple(s.probability for s in self.scenarios)

    def scaled_prices(self, buy_factor: float, sell_factor: float) -> "ScenarioSet":
        out = []
        for s in self.scenarios:
            out.append(Scenario(s.id, s.probability, s.reag, s.load_p, s.load_q,
                                tuple(v * buy_factor for v in s.rt_buy),
                                tuple(v * sell_factor for v in s.rt_sell), s.label))
        return ScenarioSet(tuple(out))


def base_rt_prices(inst: Instance) -> tuple[Series, Series]:
    buy = tuple(p + inst.flags.rt_premium for p in inst.prices.da_energy)
    sell = tuple(inst.flags.rt_sell_ratio * b for b in buy)
    return buy, sell


def forecast_scenario(inst: Instance) -> ScenarioSet:
    """Single scenario with probability 1 and every quantity at its forecast."""
    buy, sell = base_rt_prices(inst)
    s = Scenario(1, 1.0, {r.id: r.p_forecast_max for r in inst.reags},
                 dict(inst.loads.p), dict(inst.loads.q), buy, sell, "forecast")
    return ScenarioSet((s,))


def discrete_reag_scenarios(inst: Instance, rows: Sequence[tuple[float, float]]) -> ScenarioSet:
    """One scenario per (production MW, probability) row.

    Production is held constant over the horizon for every renewable aggregator;
    loads stay at their base values and real-time prices follow the instance flags.
    """
    probs = [p for _, p in rows]
    if not rows:
        raise ScenarioError("no scenario rows")
    if any(p <= 0 for p in probs):
        raise ScenarioError("scenario probabilities must be positive")
    if abs(math.fsum(probs) - 1.0) > 1e-9:
        raise ScenarioError(f"scenario probabilities sum to {math.fsum(probs)!r}, not 1")
    # renormalise so the set invariant (1e-12) holds for any admissible table
    total = math.fsum(probs)
    buy, sell = base_rt_prices(inst)
    out = []
    for w, (prod, prob) in enumerate(rows, start=1):
        reag = {r.id: (float(prod),) * inst.T for r in inst.reags}
        out.append(Scenario(w, prob / total, reag, dict(inst.loads.p), dict(inst.loads.q),
                            buy, sell, f"{prod:g} MW"))
    return ScenarioSet(tuple(out))


def _phi(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def seven_point_weights() -> tuple[float, ...]:
    """Standard-normal masses of the unit intervals centred on -3..3, tails folded into +-3."""
    inner = {k: _phi(k + 0.5) - _phi(k - 0.5) for k in (1, 2)}
    tail = _phi(-2.5)
    w = [tail, inner[2], inner[1], 0.0, inner[1], inner[2], tail]
    w[3] = 1.0 - math.fsum(w)
    return tuple(w)


K_POINTS = (-3, -2, -1, 0, 1, 2, 3)


@dataclass(frozen=True)
class QuantizedFactor:
    mean: Series
    sigma_frac: float
    direction: int
    weights: tuple[float, ...]
    ks: tuple[int, ...] = K_POINTS

    def multiplier(self, k: int) -> float:
        return 1.0 + self.direction * k * self.sigma_frac

    def at(self, k: int) -> Series:
        """Deviate series at k standard deviations (sigma = sigma_frac * mean per hour)."""
        return tuple(m + self.direction * k * self.sigma_frac * m for m in self.mean)

    def apply(self, k: int, series: Series) -> Series:
        """Same relative deviation applied to another series."""
        f = self.multiplier(k)
        return tuple(v * f for v in series)

    @property
    def values(self) -> tuple[Series, ...]:
        return tuple(self.at(k) for k in self.ks)


def seven_point_normal(mean: Sequence[float], sigma_frac: float, direction: int = 1) -> QuantizedFactor:
    if sigma_frac < 0:
        raise ScenarioError("sigma_frac must be non-negative")
    if direction not in (1, -1):
        raise ScenarioError("direction must be +1 or -1")
    mean = tuple(float(m) for m in mean)
    if not all(math.isfinite(m) for m in mean):
        raise ScenarioError("mean must be finite")
    return QuantizedFactor(mean, float(sigma_frac), direction, seven_point_weights())


def compose_joint(inst: Instance, reag: QuantizedFactor, load: QuantizedFactor,
                  price: QuantizedFactor) -> ScenarioSet:
    """Comonotone seven-scenario set: scenario k takes every factor at its k-th point.

    The factors carry their own direction, so building the renewable factor with
    ``direction=-1`` makes production fall while load and price rise.  Reactive load
    is scaled with active load; the sell price is ``rt_sell_ratio`` times the buy price.
    """
    if not (len(reag.ks) == len(load.ks) == len(price.ks) == 7):
        raise ScenarioError("all factors must have seven points")
    if not (reag.weights == load.weights == price.weights):
        raise ScenarioError("factor weights differ")
    ratio = inst.flags.rt_sell_ratio
    out = []
    for w, k in enumerate(price.ks, start=1):
        buy = price.at(k)
        sell = tuple(ratio * b for b in buy)
        reag_map = {r.id: reag.apply(k, r.p_forecast_max) for r in inst.reags}
        lp = {b: load.apply(k, s) for b, s in inst.loads.p.items()}
        lq = {b: load.apply(k, s) for b, s in inst.loads.q.items()}
        out.append(Scenario(w, price.weights[w - 1], reag_map, lp, lq, buy, sell, f"k={k:+d}"))
    return ScenarioSet(tuple(out))


def multi_uncertainty_scenarios(inst: Instance, price_sigma: float = 0.05, load_sigma: float = 0.15,
                                reag_sigma: float = 0.08) -> ScenarioSet:
    buy, _ = base_rt_prices(inst)
    price = seven_point_normal(buy, price_sigma, +1)
    total_load = [sum(s[t] for s in inst.loads.p.values()) for t in range(inst.T)]
    load = seven_point_normal(total_load, load_sigma, +1)
    cap = [sum(r.p_forecast_max[t] for r in inst.reags) for t in range(inst.T)]
    reag = seven_point_normal(cap, reag_sigma, -1)
    return compose_joint(inst, reag, load, price)
