"""Independent oracles and checkers shared by the test modules."""
from __future__ import annotations

import itertools

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from dsomarket.solver.lp import BoundedLp


def random_lp(rng: np.random.Generator, m: int, n: int, density: float = 0.6,
              equalities: bool = True, ranged: bool = True) -> BoundedLp:
    """Feasible, bounded LP: built around a known interior point."""
    A = rng.normal(size=(m, n)) * (rng.random((m, n)) < density)
    for i in range(m):
        if not A[i].any():
            A[i, rng.integers(n)] = rng.normal() or 1.0
    lo = -rng.uniform(0, 5, n)
    hi = rng.uniform(0, 5, n)
    free = rng.random(n) < 0.1
    x0 = rng.uniform(lo, hi)
    lo = np.where(free & (rng.random(n) < 0.5), -np.inf, lo)
    act = A @ x0
    kind = rng.integers(0, 4 if ranged else 3, size=m)
    row_lo = np.full(m, -np.inf)
    row_hi = np.full(m, np.inf)
    for i in range(m):
        slack = rng.uniform(0, 2)
        if kind[i] == 0:
            row_hi[i] = act[i] + slack
        elif kind[i] == 1:
            row_lo[i] = act[i] - slack
        elif kind[i] == 2 and equalities:
            row_lo[i] = row_hi[i] = act[i]
        else:
            row_lo[i], row_hi[i] = act[i] - slack, act[i] + rng.uniform(0, 2)
    c = rng.normal(size=n)
    # keep the problem bounded: free-below columns get a non-positive cost
    c = np.where(np.isinf(lo), -np.abs(c), c)
    return BoundedLp(sp.csr_matrix(A), row_lo, row_hi, lo, hi, c)


def highs_lp(lp: BoundedLp):
    A = lp.A.toarray()
    ub_rows, ub_b, eq_rows, eq_b = [], [], [], []
    for i in range(A.shape[0]):
        lo, hi = lp.row_lo[i], lp.row_hi[i]
        if lo == hi:
            eq_rows.append(A[i]); eq_b.append(lo)
            continue
        if np.isfinite(hi):
            ub_rows.append(A[i]); ub_b.append(hi)
        if np.isfinite(lo):
            ub_rows.append(-A[i]); ub_b.append(-lo)
    kw = {}
    if ub_rows:
        kw.update(A_ub=np.array(ub_rows), b_ub=np.array(ub_b))
    if eq_rows:
        kw.update(A_eq=np.array(eq_rows), b_eq=np.array(eq_b))
    bounds = [(None if np.isinf(a) else a, None if np.isinf(b) else b)
              for a, b in zip(lp.col_lo, lp.col_hi)]
    return linprog(lp.c, bounds=bounds, method="highs", **kw)


def vertex_enumeration(A: np.ndarray, b: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                       c: np.ndarray, tol: float = 1e-9) -> float:
    """min c.x over {A x <= b, lo <= x <= hi} by enumerating every basic point.

    A vertex has ``n`` active constraints.  Choosing which columns sit at a bound
    (set S) and which rows are tight (set R, |R| = n - |S|) leaves a square system
    in the remaining columns; all 2^|S| bound choices are solved as one multi-RHS
    system.  Returns +inf when no feasible vertex exists.
    """
    m, n = A.shape
    best = np.inf
    cols = range(n)
    for k in range(n + 1):
        for S in itertools.combinations(cols, k):
            F = [j for j in cols if j not in S]
            choices = np.array(list(itertools.product(*[(lo[j], hi[j]) for j in S])),
                               dtype=float).reshape(2 ** k, k)
            for R in itertools.combinations(range(m), n - k):
                X = np.empty((choices.shape[0], n))
                X[:, list(S)] = choices
                if F:
                    M = A[np.ix_(R, F)]
                    if abs(np.linalg.det(M)) < 1e-10:
                        continue
                    rhs = b[list(R)][:, None] - A[np.ix_(R, list(S))] @ choices.T
                    X[:, F] = np.linalg.solve(M, rhs).T
                ok = (np.all(A @ X.T <= b[:, None] + tol, axis=0)
                      & np.all(X >= lo - tol, axis=1) & np.all(X <= hi + tol, axis=1))
                if ok.any():
                    best = min(best, float((X[ok] @ c).min()))
    return best


# ---------------------------------------------------------------------------
# physical checks on a solved case, computed from the column values alone

def balance_residuals(inst, scen, model, x) -> dict[str, float]:
    col = model.col
    net = inst.network
    hours = inst.horizon.hours
    worst = {"p": 0.0, "q": 0.0, "p_rt": 0.0, "q_rt": 0.0}

    def flow(kind, n, h, w=None):
        tot = 0.0
        for br in net.branches:
            a = net.incidence(br, n)
            if a:
                tot += a * x[col(kind, br.id, h, w) if w is not None else col(kind, br.id, h)]
        return tot

    for t, h in enumerate(hours):
        for n in net.buses:
            inj = -inst.loads.p_at(n, t)
            qinj = -inst.loads.q_at(n, t)
            for d in inst.drags:
                if d.bus == n:
                    taken = sum(x[col("drag_p", (d.id, a), h)] for a in range(1, len(d.block_p_max) + 1))
                    inj -= taken
                    qinj -= d.tan_phi * taken
            for e in inst.evcss:
                if e.bus == n:
                    inj -= x[col("evcs_p", e.id, h)]
            for e in inst.esags:
                if e.bus == n:
                    inj += x[col("esag_p", e.id, h)]
            for g in inst.ddgags:
                if g.bus == n:
                    inj += x[col("ddg_p", g.id, h)]
                    qinj += g.tan_phi * x[col("ddg_p", g.id, h)]
            for r in inst.reags:
                if r.bus == n:
                    inj += x[col("reag_p", r.id, h)]
            if n == net.substation_bus:
                inj += x[col("psub", None, h)]
                qinj += x[col("qsub", None, h)]
            worst["p"] = max(worst["p"], abs(inj - flow("pl", n, h)))
            worst["q"] = max(worst["q"], abs(qinj - flow("ql", n, h)))
            if scen is None:
                continue
            for s in scen:
                dp = -(s.load_p_at(n, t) - inst.loads.p_at(n, t))
                dq = -(s.load_q_at(n, t) - inst.loads.q_at(n, t))
                for r in inst.reags:
                    if r.bus == n:
                        dp += s.reag[r.id][t] - x[col("spill", r.id, h, s.id)] - x[col("reag_p", r.id, h)]
                if n == net.substation_bus:
                    dp += x[col("pbuy", None, h, s.id)] - x[col("psell", None, h, s.id)]
                    dq += x[col("qsub_rt", None, h, s.id)]
                dflow = flow("pl_w", n, h, s.id) - flow("pl", n, h)
                dqflow = flow("ql_w", n, h, s.id) - flow("ql", n, h)
                worst["p_rt"] = max(worst["p_rt"], abs(dp - dflow))
                worst["q_rt"] = max(worst["q_rt"], abs(dq - dqflow))
    return worst


def storage_checks(inst, model, x) -> dict[str, float]:
    """Telescoped ESAG energy, state bounds, charge/discharge products, EVCS terminal
    energy and the regulation aggregation identities."""
    col = model.col
    pr = inst.prices
    hours = inst.horizon.hours
    out = {"esag_telescope": 0.0, "esag_bounds": 0.0, "esag_chdi": 0.0, "evcs_terminal": 0.0,
           "reg_identity": 0.0}
    for e in inst.esags:
        energy = e.e_init
        for t, h in enumerate(hours):
            energy += (-x[col("esag_p", e.id, h)] + pr.mu_up[t] / e.eta_di * x[col("esag_rup", e.id, h)]
                       - e.eta_ch * pr.mu_dn[t] * x[col("esag_rdn", e.id, h)])
            out["esag_telescope"] = max(out["esag_telescope"], abs(energy - x[col("esag_e", e.id, h)]))
            E = x[col("esag_e", e.id, h)]
            out["esag_bounds"] = max(out["esag_bounds"], e.e_min - E, E - e.e_max)
            out["esag_chdi"] = max(out["esag_chdi"],
                                   x[col("esag_pch", e.id, h)] * x[col("esag_pdi", e.id, h)])
    for e in inst.evcss:
        b = x[col("evcs_b", e.id, None)]
        if round(b) != 1:
            continue
        total = sum(x[col("evcs_p", e.id, h)] + pr.mu_up[t] * x[col("evcs_rup", e.id, h)]
                    - pr.mu_dn[t] * x[col("evcs_rdn", e.id, h)]
                    for t, h in enumerate(hours) if h in e.window)
        init = e.e_init if inst.flags.evcs_eq23_strict else e.gamma_ch * e.e_init
        term = init + e.gamma_ch * total
        out["evcs_terminal"] = max(out["evcs_terminal"], 0.9 * e.cl_max - term, term - e.cl_max)
    for h in hours:
        up = x[col("rsub_up", None, h)]
        dn = x[col("rsub_dn", None, h)]
        for e in inst.esags:
            up -= x[col("esag_rup", e.id, h)]
            dn -= x[col("esag_rdn", e.id, h)]
        for g in inst.ddgags:
            up -= x[col("ddg_rup", g.id, h)]
            dn -= x[col("ddg_rdn", g.id, h)]
        for d in inst.drags:
            up -= x[col("drag_rdn", d.id, h)]
            dn -= x[col("drag_rup", d.id, h)]
        for e in inst.evcss:
            up -= x[col("evcs_rdn", e.id, h)]
            dn -= x[col("evcs_rup", e.id, h)]
        out["reg_identity"] = max(out["reg_identity"], abs(up), abs(dn))
    return out


def tiny_model(c, A, sense, rhs, lo, hi, binary):
    """Hand-made :class:`Model` over anonymous columns, for solver tests."""
    from dsomarket.model import Model, Tag, VariableIndex

    idx = VariableIndex()
    for j, (a, b, z) in enumerate(zip(lo, hi, binary)):
        idx.add("x", j, None, lo=a, hi=b, binary=bool(z))
    A = sp.csr_matrix(np.atleast_2d(np.asarray(A, float)))
    tags = [Tag("ROW", i, None) for i in range(A.shape[0])]
    return Model(idx, np.asarray(c, float), A, np.array(list(sense)), np.asarray(rhs, float), tags)


def zero_price_instance(inst):
    """Same case with every energy, regulation and offer price set to zero."""
    from dataclasses import replace

    zero = tuple(0.0 for _ in range(inst.T))

    def z(reg):
        return replace(reg, cap_up=zero, cap_dn=zero, mil_up=zero, mil_dn=zero)

    return replace(
        inst,
        prices=replace(inst.prices, da_energy=zero, cap_up=zero, cap_dn=zero, mil_up=zero,
                       mil_dn=zero),
        drags=tuple(replace(d, block_prices=(zero,) * len(d.block_p_max), regulation=z(d.regulation))
                    for d in inst.drags),
        esags=tuple(replace(e, energy_price=zero, regulation=z(e.regulation)) for e in inst.esags),
        evcss=tuple(replace(e, energy_price=zero, regulation=z(e.regulation)) for e in inst.evcss),
        ddgags=tuple(replace(g, energy_price=zero, regulation=z(g.regulation)) for g in inst.ddgags),
        reags=tuple(replace(r, energy_price=zero) for r in inst.reags))
