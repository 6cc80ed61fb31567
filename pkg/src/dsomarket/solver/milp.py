"""Best-first branch-and-bound over binary columns, plus the pricing re-solve."""
from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .lp import Basis, LpSolution, LpStatus, Tolerances, refine_on_optimal_face, solve_lp

log = logging.getLogger(__name__)


class MilpInfeasible(RuntimeError):
    def __init__(self, message: str, hint=None):
        super().__init__(message)
        self.hint = hint


class TooManyBinaries(ValueError):
    pass


@dataclass
class MilpSolution:
    status: LpStatus
    x: np.ndarray | None
    objective: float
    assignment: dict[int, int]
    nodes: int
    pricing: LpSolution | None = None
    root_bound: float = math.nan
    lp_iterations: int = 0
    trace: list[tuple[int, float, float]] = field(default_factory=list)  # (node, bound, incumbent)
    hint: object = None

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def infeasibility_hint(model, sol: LpSolution, tol: float = 1e-6):
    """Tag of the first row left violated by an infeasible LP's final point."""
    lo, hi = model.row_bounds()
    act = model.A @ sol.x
    viol = np.maximum(lo - act, act - hi)
    rows = np.flatnonzero(viol > tol)
    if rows.size == 0:
        return None
    return model.tags[int(rows[0])]


def _fixed_bounds(model, assignment: dict[int, int]):
    lo = model.col_lo.copy()
    hi = model.col_hi.copy()
    for col, v in assignment.items():
        lo[col] = hi[col] = float(v)
    return lo, hi


def fix_and_price(model, assignment: dict[int, int] | np.ndarray, warm: Basis | None = None,
                  tol: Tolerances | None = None) -> LpSolution:
    """LP with every binary fixed to ``assignment``; its duals price the tagged rows.

    If the model carries a ``tie_break`` cost vector, the primal point is then
    chosen among the alternative optima by minimising it; duals are unaffected.
    """
    if not isinstance(assignment, dict):
        values = np.asarray(assignment)
        assignment = {int(c): int(round(values[i])) for i, c in enumerate(model.binaries)}
    missing = set(model.binaries.tolist()) - set(assignment)
    if missing:
        raise ValueError(f"assignment misses binary columns {sorted(missing)[:5]}")
    if any(v not in (0, 1) for v in assignment.values()):
        raise ValueError("assignment must be 0/1")
    lo, hi = _fixed_bounds(model, assignment)
    lp = model.to_lp(lo, hi)
    sol = solve_lp(lp, warm=warm, tol=tol)
    tie = getattr(model, "tie_break", None)
    if sol.optimal and tie is not None and np.any(tie):
        sol = refine_on_optimal_face(lp, sol, tie, tol=tol)
    return sol


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    lo: np.ndarray = field(compare=False)
    hi: np.ndarray = field(compare=False)
    basis: Basis | None = field(compare=False, default=None)
    depth: int = field(compare=False, default=0)


def solve_milp(model, tol: Tolerances | None = None, stream: TextIO | None = None,
               node_limit: int = 100000, price: bool = True) -> MilpSolution:
    """Solve to an absolute gap of ``tol.gap``; raises :class:`MilpInfeasible` if no
    integer point exists.  With ``price`` the fixed-binary LP is solved afterwards and
    attached as ``pricing``."""
    tol = tol or Tolerances()
    bins = model.binaries
    base = model.to_lp()

    def say(msg):
        if stream is not None:
            stream.write(msg + "\n")
        log.debug(msg)

    root = solve_lp(base, tol=tol)
    lp_iters = root.iterations
    if root.status is LpStatus.INFEASIBLE:
        hint = infeasibility_hint(model, root)
        raise MilpInfeasible(f"LP relaxation infeasible (first violated row: {hint})", hint)
    if root.status is LpStatus.UNBOUNDED:
        raise RuntimeError("LP relaxation unbounded")
    say(f"root  obj={root.objective:.10g} iters={root.iterations}")

    incumbent: LpSolution | None = None
    inc_obj = math.inf
    trace = []
    counter = itertools.count()
    heap = [_Node(root.objective, next(counter), model.col_lo.copy(), model.col_hi.copy(),
                  root.basis)]
    solutions = {heap[0].seq: root}
    nodes = 0
    while heap:
        node = heapq.heappop(heap)
        sol = solutions.pop(node.seq)
        if node.bound >= inc_obj - tol.gap:
            continue
        nodes += 1
        if nodes > node_limit:
            raise RuntimeError(f"node limit {node_limit} reached")
        xb = sol.x[bins]
        frac = np.abs(xb - np.round(xb))
        if bins.size == 0 or frac.max() <= tol.integrality:
            if sol.objective < inc_obj:
                incumbent, inc_obj = sol, sol.objective
                say(f"node {nodes} incumbent obj={inc_obj:.10g}")
            trace.append((nodes, node.bound, inc_obj))
            continue
        trace.append((nodes, node.bound, inc_obj))
        # most fractional; argmax keeps the lowest column id on ties
        score = np.where(frac > tol.integrality, 0.5 - np.abs(xb - np.floor(xb) - 0.5), -1.0)
        j = int(bins[int(np.argmax(score))])
        for v in (0.0, 1.0):
            lo, hi = node.lo.copy(), node.hi.copy()
            lo[j] = hi[j] = v
            child = solve_lp(base.with_col_bounds(lo, hi), warm=sol.basis, tol=tol)
            lp_iters += child.iterations
            if child.status is not LpStatus.OPTIMAL:
                continue
            # relaxation bound can only worsen going down the tree
            bound = max(child.objective, node.bound)
            if bound >= inc_obj - tol.gap:
                continue
            seq = next(counter)
            solutions[seq] = child
            heapq.heappush(heap, _Node(bound, seq, lo, hi, child.basis, node.depth + 1))
        say(f"node {nodes} branch col={j} open={len(heap)}")

    if incumbent is None:
        raise MilpInfeasible("no integer-feasible point found")
    assignment = {int(c): int(round(incumbent.x[c])) for c in bins}
    x = incumbent.x.copy()
    x[bins] = np.round(x[bins])
    out = MilpSolution(LpStatus.OPTIMAL, x, inc_obj, assignment, nodes, None, root.objective,
                       lp_iters, trace)
    if price:
        pricing = fix_and_price(model, assignment, warm=incumbent.basis, tol=tol)
        out.pricing = pricing
        out.lp_iterations += pricing.iterations
        if pricing.optimal:
            x = pricing.x.copy()
            x[bins] = np.round(x[bins])
            out.x = x
            out.objective = pricing.objective
    say(f"done  obj={out.objective:.10g} nodes={nodes} lp_iters={out.lp_iterations}")
    return out


def brute_force_milp(model, tol: Tolerances | None = None, max_binaries: int = 20) -> MilpSolution:
    """Enumerate every binary assignment in lexicographic order and keep the first best."""
    bins = model.binaries
    if bins.size > max_binaries:
        raise TooManyBinaries(f"{bins.size} binaries exceed the enumeration guard of {max_binaries}")
    best: LpSolution | None = None
    best_obj = math.inf
    best_assign: dict[int, int] = {}
    count = 0
    iters = 0
    for combo in itertools.product((0, 1), repeat=int(bins.size)):
        assignment = {int(c): v for c, v in zip(bins, combo)}
        sol = fix_and_price(model, assignment, tol=tol)
        iters += sol.iterations
        count += 1
        if sol.optimal and sol.objective < best_obj - 1e-9:
            best, best_obj, best_assign = sol, sol.objective, assignment
    if best is None:
        return MilpSolution(LpStatus.INFEASIBLE, None, math.inf, {}, count, None,
                            lp_iterations=iters)
    return MilpSolution(LpStatus.OPTIMAL, best.x, best_obj, best_assign, count, best,
                        lp_iterations=iters)
