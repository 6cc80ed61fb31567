"""Bounded-variable revised simplex.

The LP is held in range form ``row_lo <= A x <= row_hi``, ``col_lo <= x <= col_hi``
and solved as ``[A, -I] [x; s] = 0`` with one logical ``s_i`` per row carrying the
row range as its bounds.  The all-logical basis is always a valid start, so no
artificial columns are needed; phase 1 minimises the sum of basic bound
violations with the usual piecewise-linear cost.

The basis inverse is kept as a sparse LU (SuperLU) of a reference basis plus a
product-form eta file, refactorised every ``refactor_every`` pivots.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

log = logging.getLogger(__name__)

AT_LOWER, AT_UPPER, AT_ZERO, BASIC = 0, 1, 2, 3


class LpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


class NumericalBreakdown(RuntimeError):
    """Raised when the basis cannot be refactorised after repeated repair."""


@dataclass(frozen=True)
class Tolerances:
    feasibility: float = 1e-7
    optimality: float = 1e-7
    pivot: float = 1e-9
    integrality: float = 1e-6
    gap: float = 1e-6


@dataclass
class BoundedLp:
    A: sp.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    col_lo: np.ndarray
    col_hi: np.ndarray
    c: np.ndarray
    tags: list | None = None

    def __post_init__(self):
        self.A = sp.csr_matrix(self.A, dtype=float)
        m, n = self.A.shape
        self.row_lo = np.asarray(self.row_lo, dtype=float).reshape(m)
        self.row_hi = np.asarray(self.row_hi, dtype=float).reshape(m)
        self.col_lo = np.asarray(self.col_lo, dtype=float).reshape(n)
        self.col_hi = np.asarray(self.col_hi, dtype=float).reshape(n)
        self.c = np.asarray(self.c, dtype=float).reshape(n)
        if np.any(self.row_lo > self.row_hi) or np.any(self.col_lo > self.col_hi):
            raise ValueError("crossed bounds")
        if not np.all(np.isfinite(self.A.data)) or not np.all(np.isfinite(self.c)):
            raise ValueError("non-finite coefficients")

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def with_col_bounds(self, lo: np.ndarray, hi: np.ndarray) -> "BoundedLp":
        return BoundedLp(self.A, self.row_lo, self.row_hi, lo, hi, self.c, self.tags)

    def with_cost(self, c: np.ndarray) -> "BoundedLp":
        return BoundedLp(self.A, self.row_lo, self.row_hi, self.col_lo, self.col_hi, c, self.tags)


@dataclass(frozen=True)
class Basis:
    """Basic variable per row position plus a status per variable (columns then logicals)."""

    head: tuple[int, ...]
    status: tuple[int, ...]


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray
    objective: float
    duals: np.ndarray
    reduced_costs: np.ndarray
    row_activity: np.ndarray
    basis: Basis | None = None
    iterations: int = 0
    phase1_iterations: int = 0
    tags: list | None = None

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL

    def dual_by_tag(self) -> dict:
        if self.tags is None:
            raise ValueError("solution carries no row tags")
        return dict(zip(self.tags, self.duals))


def geometric_scaling(A: sp.csr_matrix, passes: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """Row and column factors R, C so that R A C has entries near 1 in magnitude."""
    m, n = A.shape
    R = np.ones(m)
    C = np.ones(n)
    absA = abs(sp.coo_matrix(A))
    rows, cols, vals = absA.row, absA.col, absA.data
    mask = vals > 0
    rows, cols, vals = rows[mask], cols[mask], vals[mask]
    if vals.size == 0:
        return R, C
    logv = np.log(vals)
    for _ in range(passes):
        scaled = logv + np.log(R[rows]) + np.log(C[cols])
        rmax = np.full(m, -np.inf)
        rmin = np.full(m, np.inf)
        np.maximum.at(rmax, rows, scaled)
        np.minimum.at(rmin, rows, scaled)
        has = np.isfinite(rmax)
        R[has] *= np.exp(-0.5 * (rmax[has] + rmin[has]))
        scaled = logv + np.log(R[rows]) + np.log(C[cols])
        cmax = np.full(n, -np.inf)
        cmin = np.full(n, np.inf)
        np.maximum.at(cmax, cols, scaled)
        np.minimum.at(cmin, cols, scaled)
        has = np.isfinite(cmax)
        C[has] *= np.exp(-0.5 * (cmax[has] + cmin[has]))
    # powers of two keep the scaling exact in floating point
    R = np.exp2(np.round(np.log2(R)))
    C = np.exp2(np.round(np.log2(C)))
    return R, C


class _Factor:
    def __init__(self, M: sp.csc_matrix, head: np.ndarray):
        B = M[:, head].tocsc()
        self.lu = splu(B, permc_spec="COLAMD", diag_pivot_thresh=0.1)
        self.eta_r: list[int] = []
        self.eta_a: list[np.ndarray] = []

    def ftran(self, v: np.ndarray) -> np.ndarray:
        w = self.lu.solve(v)
        for r, a in zip(self.eta_r, self.eta_a):
            wr = w[r] / a[r]
            if wr != 0.0:
                w -= wr * a
            w[r] = wr
        return w

    def btran(self, c: np.ndarray) -> np.ndarray:
        z = np.array(c, dtype=float)
        for r, a in zip(reversed(self.eta_r), reversed(self.eta_a)):
            zr = z[r]
            z[r] = 0.0
            z[r] = (zr - a @ z) / a[r]
        return self.lu.solve(z, trans="T")

    def push(self, r: int, alpha: np.ndarray) -> None:
        self.eta_r.append(r)
        self.eta_a.append(alpha)

    @property
    def n_etas(self) -> int:
        return len(self.eta_r)


class _Simplex:
    def __init__(self, lp: BoundedLp, tol: Tolerances, scale: bool, refactor_every: int,
                 max_iter: int):
        self.tol = tol
        self.refactor_every = refactor_every
        self.max_iter = max_iter
        m, n = lp.shape
        self.m, self.n = m, n
        if scale:
            R, C = geometric_scaling(lp.A)
        else:
            R, C = np.ones(m), np.ones(n)
        self.R, self.C = R, C
        A = sp.diags(R) @ lp.A @ sp.diags(C)
        self.A = sp.csr_matrix(A)
        self.AT = sp.csr_matrix(A.T)
        self.M = sp.hstack([A, -sp.identity(m)], format="csc")
        with np.errstate(invalid="ignore"):
            self.lo = np.concatenate([lp.col_lo / C, lp.row_lo * R])
            self.hi = np.concatenate([lp.col_hi / C, lp.row_hi * R])
        self.cost = np.concatenate([lp.c * C, np.zeros(m)])
        self.fixed = self.lo == self.hi
        self.iterations = 0
        self.phase1_iterations = 0

    # ---- basis management -------------------------------------------------
    def _cold_start(self):
        m, n = self.m, self.n
        self.head = np.arange(n, n + m)
        status = np.empty(n + m, dtype=np.int8)
        lo, hi = self.lo, self.hi
        status[:] = np.where(np.isfinite(lo), AT_LOWER, np.where(np.isfinite(hi), AT_UPPER, AT_ZERO))
        status[self.head] = BASIC
        self.status = status

    def _warm_start(self, basis: Basis) -> bool:
        head = np.asarray(basis.head, dtype=int)
        status = np.asarray(basis.status, dtype=np.int8).copy()
        if head.size != self.m or status.size != self.n + self.m:
            return False
        # re-seat nonbasic statuses whose bound disappeared or appeared
        lo, hi = self.lo, self.hi
        nb = status != BASIC
        bad_lo = nb & (status == AT_LOWER) & ~np.isfinite(lo)
        bad_hi = nb & (status == AT_UPPER) & ~np.isfinite(hi)
        status[bad_lo] = np.where(np.isfinite(hi[bad_lo]), AT_UPPER, AT_ZERO)
        status[bad_hi] = np.where(np.isfinite(lo[bad_hi]), AT_LOWER, AT_ZERO)
        zero = nb & (status == AT_ZERO) & (np.isfinite(lo) | np.isfinite(hi))
        status[zero] = np.where(np.isfinite(lo[zero]), AT_LOWER, AT_UPPER)
        self.head = head
        self.status = status
        try:
            self._refactor()
        except RuntimeError:
            return False
        return True

    def _nonbasic_values(self) -> np.ndarray:
        x = np.zeros(self.n + self.m)
        st = self.status
        x[st == AT_LOWER] = self.lo[st == AT_LOWER]
        x[st == AT_UPPER] = self.hi[st == AT_UPPER]
        return x

    def _refactor(self):
        self.factor = _Factor(self.M, self.head)
        self._recompute_primal()

    def _recompute_primal(self):
        x = self._nonbasic_values()
        x[self.head] = 0.0
        rhs = -(self.M @ x)
        x[self.head] = self.factor.ftran(rhs)
        self.x = x

    def _repair(self):
        """Swap logicals in for basic columns until the basis factorises."""
        for _ in range(5):
            try:
                self._refactor()
                return
            except RuntimeError:
                pass
            B = self.M[:, self.head].toarray()
            q, r = np.linalg.qr(B)
            weak = np.abs(np.diag(r)) < 1e-10 * max(1.0, np.abs(np.diag(r)).max())
            positions = np.flatnonzero(weak)
            if positions.size == 0:
                positions = np.arange(self.m)
            used = set(self.head.tolist())
            for p in positions:
                var = self.head[p]
                for cand in range(self.m):
                    logical = self.n + cand
                    if logical not in used:
                        self.head[p] = logical
                        used.discard(var)
                        used.add(logical)
                        self.status[logical] = BASIC
                        lo, hi = self.lo[var], self.hi[var]
                        self.status[var] = AT_LOWER if np.isfinite(lo) else (AT_UPPER if np.isfinite(hi) else AT_ZERO)
                        break
        raise NumericalBreakdown("basis could not be refactorised")

    # ---- iteration --------------------------------------------------------
    def _column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        start, end = self.M.indptr[j], self.M.indptr[j + 1]
        col[self.M.indices[start:end]] = self.M.data[start:end]
        return col

    def _reduced_costs(self, y: np.ndarray, cost: np.ndarray) -> np.ndarray:
        d = np.empty(self.n + self.m)
        d[: self.n] = cost[: self.n] - self.AT @ y
        d[self.n:] = cost[self.n:] + y
        return d

    def run(self) -> LpStatus:
        tol = self.tol
        ftol = tol.feasibility
        head = self.head
        lo, hi = self.lo, self.hi
        best_obj = np.inf
        stall = 0
        bland = False
        phase = 0
        while True:
            if self.iterations >= self.max_iter:
                raise NumericalBreakdown(f"iteration limit {self.max_iter} reached")
            xb = self.x[head]
            below = xb < lo[head] - ftol
            above = xb > hi[head] + ftol
            infeasible = below.any() or above.any()
            if infeasible:
                if phase != 1:
                    phase, best_obj, stall, bland = 1, np.inf, 0, False
                cost = np.zeros(self.n + self.m)
                cost[head[below]] = -1.0
                cost[head[above]] = 1.0
                obj = float(np.sum(lo[head][below] - xb[below]) + np.sum(xb[above] - hi[head][above]))
            else:
                if phase != 2:
                    phase, best_obj, stall, bland = 2, np.inf, 0, False
                cost = self.cost
                obj = float(cost @ self.x)
            if obj < best_obj - 1e-12 * max(1.0, abs(best_obj) if np.isfinite(best_obj) else 1.0):
                best_obj = obj
                stall = 0
                bland = False
            else:
                stall += 1
                if stall > 60:
                    bland = True

            y = self.factor.btran(cost[head])
            d = self._reduced_costs(y, cost)
            st = self.status
            otol = tol.optimality
            elig = np.zeros_like(d)
            low = st == AT_LOWER
            upp = st == AT_UPPER
            zer = st == AT_ZERO
            elig[low] = np.where(d[low] < -otol, -d[low], 0.0)
            elig[upp] = np.where(d[upp] > otol, d[upp], 0.0)
            elig[zer] = np.where(np.abs(d[zer]) > otol, np.abs(d[zer]), 0.0)
            elig[self.fixed] = 0.0
            if bland:
                cands = np.flatnonzero(elig > 0)
                q = int(cands[0]) if cands.size else -1
            else:
                q = int(np.argmax(elig))
                if elig[q] <= 0:
                    q = -1
            if q < 0:
                if infeasible:
                    return LpStatus.INFEASIBLE
                self.y = y
                self.d = d
                return LpStatus.OPTIMAL

            direction = 1.0 if d[q] < 0 else -1.0
            alpha = self.factor.ftran(self._column(q))
            delta = -direction * alpha  # rate of change of basic values

            xb = self.x[head]
            lb = lo[head]
            ub = hi[head]
            nz = np.abs(delta) > tol.pivot
            dec = nz & (delta < 0)
            inc = nz & (delta > 0)
            # target bound for each blocking basic variable
            target = np.full(self.m, np.nan)
            if phase == 1:
                blo = xb < lb - ftol
                bhi = xb > ub + ftol
                feas = ~blo & ~bhi
                target[dec & feas] = lb[dec & feas]
                target[dec & bhi] = ub[dec & bhi]
                target[inc & feas] = ub[inc & feas]
                target[inc & blo] = lb[inc & blo]
            else:
                target[dec] = lb[dec]
                target[inc] = ub[inc]
            blocking = np.isfinite(target)
            theta_entry = hi[q] - lo[q]
            r = -1
            theta = theta_entry
            if blocking.any():
                idx = np.flatnonzero(blocking)
                dl = delta[idx]
                slack = target[idx] - xb[idx]
                relaxed = (slack + np.sign(dl) * ftol) / dl
                theta_max = relaxed.min()
                if theta_max < theta_entry:
                    exact = np.maximum(slack / dl, 0.0)
                    ok = exact <= theta_max
                    if bland:
                        pick = np.flatnonzero(ok)
                        pick = pick[np.argmin(head[idx[pick]])]
                    else:
                        mags = np.where(ok, np.abs(dl), -1.0)
                        pick = int(np.argmax(mags))
                    r = int(idx[pick])
                    theta = float(exact[pick])
            if not np.isfinite(theta):
                if phase == 1:
                    raise NumericalBreakdown("phase 1 ray")
                return LpStatus.UNBOUNDED

            self.iterations += 1
            if phase == 1:
                self.phase1_iterations += 1
            self.x[head] = xb + theta * delta
            self.x[q] += direction * theta
            if r < 0:
                # bound flip of the entering variable
                self.status[q] = AT_UPPER if direction > 0 else AT_LOWER
                self.x[q] = hi[q] if direction > 0 else lo[q]
                continue
            leaving = int(head[r])
            at_lo = target[r] == lb[r]
            self.status[leaving] = AT_LOWER if at_lo else AT_UPPER
            self.x[leaving] = target[r]
            head[r] = q
            self.status[q] = BASIC
            if abs(alpha[r]) < 1e-7 or self.factor.n_etas >= self.refactor_every:
                self._repair()
            else:
                self.factor.push(r, alpha)


def solve_lp(lp: BoundedLp, warm: Basis | None = None, tol: Tolerances | None = None,
             scale: bool = True, refactor_every: int = 50,
             max_iter: int | None = None) -> LpSolution:
    """Solve ``lp`` with the bounded revised simplex.

    ``warm`` is a basis from an earlier solve of an LP with the same shape; it is
    dropped silently if it no longer factorises.
    """
    tol = tol or Tolerances()
    m, n = lp.shape
    if max_iter is None:
        max_iter = 50 * (m + n) + 1000
    s = _Simplex(lp, tol, scale, refactor_every, max_iter)
    if warm is None or not s._warm_start(warm):
        s._cold_start()
        s._repair()
    status = s.run()
    # polish: fresh factorisation, then re-check optimality
    for _ in range(3):
        if status is not LpStatus.OPTIMAL:
            break
        s._repair()
        status = s.run()
        if s.factor.n_etas == 0:
            break
    x_scaled = s.x[:n]
    x = x_scaled * s.C
    activity = lp.A @ x
    if status is LpStatus.OPTIMAL:
        y = s.y[:m] * s.R
        d = s.d[:n] / s.C
        objective = float(lp.c @ x)
    else:
        y = np.full(m, np.nan)
        d = np.full(n, np.nan)
        objective = np.inf if status is LpStatus.INFEASIBLE else -np.inf
    basis = Basis(tuple(int(v) for v in s.head), tuple(int(v) for v in s.status))
    log.debug("lp %dx%d status=%s iters=%d (phase1 %d) obj=%.10g", m, n, status.value,
              s.iterations, s.phase1_iterations, objective)
    return LpSolution(status, x, objective, y, d, activity, basis, s.iterations,
                      s.phase1_iterations, lp.tags)


def refine_on_optimal_face(lp: BoundedLp, sol: LpSolution, c2: np.ndarray,
                           tol: Tolerances | None = None, threshold: float = 1e-9) -> LpSolution:
    """Lexicographic tie-break: minimise ``c2`` over the optimal face of ``sol``.

    Columns with a nonzero reduced cost and rows with a nonzero dual are pinned to
    the bound they sit at, so any point of the restricted LP is complementary to
    ``sol``'s duals.  The returned solution keeps those duals and reduced costs and
    takes its primal point from the restricted solve.  Falls back to ``sol`` when the
    restricted LP does not solve cleanly.
    """
    if not sol.optimal:
        return sol
    d, y = sol.reduced_costs, sol.duals
    col_lo, col_hi = lp.col_lo.copy(), lp.col_hi.copy()
    up = d > threshold
    dn = d < -threshold
    if np.any(~np.isfinite(col_lo[up])) or np.any(~np.isfinite(col_hi[dn])):
        return sol
    col_hi[up] = col_lo[up]
    col_lo[dn] = col_hi[dn]
    row_lo, row_hi = lp.row_lo.copy(), lp.row_hi.copy()
    ge = y > threshold
    le = y < -threshold
    if np.any(~np.isfinite(row_lo[ge])) or np.any(~np.isfinite(row_hi[le])):
        return sol
    row_hi[ge] = row_lo[ge]
    row_lo[le] = row_hi[le]
    face = BoundedLp(lp.A, row_lo, row_hi, col_lo, col_hi, c2, lp.tags)
    res = solve_lp(face, warm=sol.basis, tol=tol)
    if not res.optimal:
        log.debug("face refinement returned %s; keeping the first solve", res.status.value)
        return sol
    objective = float(lp.c @ res.x)
    if abs(objective - sol.objective) > 1e-7 * (1.0 + abs(sol.objective)):
        return sol
    return LpSolution(LpStatus.OPTIMAL, res.x, objective, sol.duals, sol.reduced_costs,
                      lp.A @ res.x, sol.basis, sol.iterations + res.iterations,
                      sol.phase1_iterations + res.phase1_iterations, lp.tags)
