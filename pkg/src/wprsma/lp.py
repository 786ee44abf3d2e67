"""Bounded-variable primal simplex for small dense linear programs.

Problems are stated as maximize ``c @ x`` subject to rows ``A @ x (<=|>=|=) b``
and ``lb <= x <= ub``.  The solver keeps a dense tableau, prices with
Dantzig's rule and falls back to Bland's rule after a run of degenerate
pivots, so identical inputs always reproduce identical pivots.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp
from scipy.linalg.blas import dger as _dger

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-12
_ALPHA_TOL = 1e-9
_REFACTOR_EVERY = 150
_DEGENERATE_RUN = 25

LE, GE, EQ = "<=", ">=", "=="


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class NumericalFailure(RuntimeError):
    """Raised when pivots become too small or accuracy is lost; rescale the model."""


@dataclass
class Constraint:
    coeffs: dict
    sense: str
    rhs: float


@dataclass
class LinearProgram:
    c: np.ndarray
    A: sp.csr_matrix
    senses: list[str]
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    names: list[str] = field(default_factory=list)
    # derived data shared by every copy made with ``with_bounds``
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.c = np.asarray(self.c, float)
        self.rhs = np.asarray(self.rhs, float)
        self.lb = np.asarray(self.lb, float)
        self.ub = np.asarray(self.ub, float)
        self.A = sp.csr_matrix(self.A, dtype=float)
        n = len(self.c)
        if self.A.shape != (len(self.rhs), n):
            raise ValueError(f"A has shape {self.A.shape}, expected {(len(self.rhs), n)}")
        if len(self.lb) != n or len(self.ub) != n:
            raise ValueError("bounds do not match the number of variables")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.A.data))
                and np.all(np.isfinite(self.rhs))):
            raise ValueError("coefficients must be finite")
        if np.any(self.lb > self.ub):
            raise ValueError("lower bound exceeds upper bound")
        if np.any(self.lb == np.inf) or np.any(self.ub == -np.inf):
            raise ValueError("bounds must not exclude every finite value")
        bad = set(self.senses) - {LE, GE, EQ}
        if bad or len(self.senses) != len(self.rhs):
            raise ValueError(f"invalid senses {sorted(bad)}")
        if not self.names:
            self.names = [f"x{j}" for j in range(n)]

    @property
    def n_vars(self) -> int:
        return len(self.c)

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    def with_bounds(self, lb: np.ndarray, ub: np.ndarray) -> "LinearProgram":
        out = object.__new__(LinearProgram)
        out.__dict__.update(self.__dict__)
        out.lb, out.ub = np.asarray(lb, float), np.asarray(ub, float)
        return out

    def max_violation(self, x: np.ndarray) -> float:
        """Largest absolute row or bound violation at ``x``."""
        ax = self.A @ x
        senses = np.asarray(self.senses)
        viol = np.zeros(self.n_rows)
        viol = np.where(senses == LE, ax - self.rhs, viol)
        viol = np.where(senses == GE, self.rhs - ax, viol)
        viol = np.where(senses == EQ, np.abs(ax - self.rhs), viol)
        worst = max(float(viol.max(initial=0.0)), 0.0)
        worst = max(worst, float((self.lb - x).max(initial=0.0)), float((x - self.ub).max(initial=0.0)))
        return worst


class LpBuilder:
    """Incremental construction of a :class:`LinearProgram` by named columns."""

    def __init__(self):
        self.names: list[str] = []
        self.index: dict[str, int] = {}
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.obj: list[float] = []
        self._rows: list[int] = []
        self._cols: list[int] = []
        self._vals: list[float] = []
        self.senses: list[str] = []
        self.rhs: list[float] = []
        self.row_names: list[str] = []

    def add_var(self, name: str, lb: float = 0.0, ub: float = np.inf, obj: float = 0.0) -> int:
        if name in self.index:
            raise ValueError(f"duplicate variable {name}")
        j = len(self.names)
        self.names.append(name)
        self.index[name] = j
        self.lb.append(lb)
        self.ub.append(ub)
        self.obj.append(obj)
        return j

    def add_row(self, coeffs: dict, sense: str, rhs: float, name: str = "") -> int:
        i = len(self.rhs)
        for j, v in coeffs.items():
            j = self.index[j] if isinstance(j, str) else j
            if v != 0.0:
                self._rows.append(i)
                self._cols.append(j)
                self._vals.append(float(v))
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self.row_names.append(name or f"r{i}")
        return i

    def add(self, con: Constraint, name: str = "") -> int:
        return self.add_row(con.coeffs, con.sense, con.rhs, name)

    def build(self) -> LinearProgram:
        A = sp.coo_matrix((self._vals, (self._rows, self._cols)),
                          shape=(len(self.rhs), len(self.names))).tocsr()
        return LinearProgram(np.array(self.obj), A, list(self.senses), np.array(self.rhs),
                             np.array(self.lb, float), np.array(self.ub, float), list(self.names))


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None
    objective: float
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == LpStatus.OPTIMAL


def solve(lp: LinearProgram, method: str = "simplex", presolve: bool = False) -> LpSolution:
    """Solve ``lp``.  ``presolve`` strips fixed columns and never-binding rows first."""
    if method == "simplex":
        if presolve:
            return _solve_presolved(lp)
        try:
            return _solve_scaled(lp)
        except NumericalFailure:
            return _Simplex(lp).run()
    if method == "highs":
        return _solve_highs(lp)
    raise ValueError(f"unknown LP method {method!r}")


# ---------------------------------------------------------------------------


def _equilibrate(A: sp.csr_matrix, passes: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Power-of-two row and column scales pulling nonzero magnitudes towards 1."""
    m, n = A.shape
    r, s = np.ones(m), np.ones(n)
    M = abs(A).tocoo()
    if M.nnz == 0:
        return r, s
    logv = np.log2(M.data)
    for _ in range(passes):
        v = logv + np.log2(r[M.row]) + np.log2(s[M.col])
        hi = np.full(m, -np.inf)
        lo = np.full(m, np.inf)
        np.maximum.at(hi, M.row, v)
        np.minimum.at(lo, M.row, v)
        ok = np.isfinite(hi)
        r[ok] *= np.exp2(-np.round((hi[ok] + lo[ok]) / 2))
        v = logv + np.log2(r[M.row]) + np.log2(s[M.col])
        hi = np.full(n, -np.inf)
        lo = np.full(n, np.inf)
        np.maximum.at(hi, M.col, v)
        np.minimum.at(lo, M.col, v)
        ok = np.isfinite(hi)
        s[ok] *= np.exp2(-np.round((hi[ok] + lo[ok]) / 2))
    return r, s


def _solve_scaled(lp: LinearProgram) -> LpSolution:
    if "scaled" not in lp.cache:
        r, s = _equilibrate(lp.A)
        As = (sp.diags(r) @ lp.A @ sp.diags(s)).tocsr()
        lp.cache["scaled"] = (r, s, As, As.toarray())
    r, s, As, dense = lp.cache["scaled"]
    scaled = object.__new__(LinearProgram)
    scaled.__dict__.update(c=lp.c * s, A=As, senses=lp.senses, rhs=lp.rhs * r,
                           lb=lp.lb / s, ub=lp.ub / s, names=lp.names, cache={})
    sol = _Simplex(scaled, check=False, dense=dense).run()
    if not sol.optimal:
        return sol
    x = np.clip(sol.x * s, lp.lb, lp.ub)
    _check_residual(lp, x)
    return LpSolution(LpStatus.OPTIMAL, x, float(lp.c @ x), sol.iterations)


def _activity_bounds(A: sp.csr_matrix, lb: np.ndarray, ub: np.ndarray):
    """Smallest and largest value each row of ``A @ x`` can take within the bounds."""
    pos, neg = A.maximum(0).tocsr(), A.minimum(0).tocsr()
    lo_inf, hi_inf = np.isinf(lb).astype(float), np.isinf(ub).astype(float)
    lbf, ubf = np.where(np.isinf(lb), 0.0, lb), np.where(np.isinf(ub), 0.0, ub)
    low = pos @ lbf + neg @ ubf
    high = pos @ ubf + neg @ lbf
    low[(pos != 0) @ lo_inf + (neg != 0) @ hi_inf > 0] = -np.inf
    high[(pos != 0) @ hi_inf + (neg != 0) @ lo_inf > 0] = np.inf
    return low, high


def _solve_presolved(lp: LinearProgram) -> LpSolution:
    fixed = lp.lb == lp.ub
    keep_cols = np.flatnonzero(~fixed)
    A = lp.A.tocsc()
    rhs = lp.rhs - A[:, np.flatnonzero(fixed)] @ lp.lb[fixed]
    Ar = A[:, keep_cols].tocsr()
    lo_act, hi_act = _activity_bounds(Ar, lp.lb[keep_cols], lp.ub[keep_cols])
    senses = np.asarray(lp.senses)
    tol = FEAS_TOL * max(1.0, float(np.abs(lp.rhs).max(initial=0.0)))
    le, ge, eq = senses == LE, senses == GE, senses == EQ
    if (np.any(le & (lo_act > rhs + tol)) or np.any(ge & (hi_act < rhs - tol))
            or np.any(eq & ((lo_act > rhs + tol) | (hi_act < rhs - tol)))):
        return LpSolution(LpStatus.INFEASIBLE, None, np.nan)
    redundant = (le & (hi_act <= rhs)) | (ge & (lo_act >= rhs)) | (eq & (lo_act == hi_act))
    rows = np.flatnonzero(~redundant)
    x = lp.lb.copy()
    if len(keep_cols):
        sub = LinearProgram(lp.c[keep_cols], Ar[rows], [lp.senses[i] for i in rows], rhs[rows],
                            lp.lb[keep_cols], lp.ub[keep_cols],
                            [lp.names[j] for j in keep_cols])
        sol = solve(sub, "simplex")
        if not sol.optimal:
            return LpSolution(sol.status, None, sol.objective, sol.iterations)
        x[keep_cols] = sol.x
        iterations = sol.iterations
    else:
        iterations = 0
    _check_residual(lp, x)
    return LpSolution(LpStatus.OPTIMAL, x, float(lp.c @ x), iterations)


def _rank1(T: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """In-place ``T -= outer(u, v)`` for a Fortran-ordered ``T``."""
    return _dger(-1.0, u, v, a=T, overwrite_a=True)


def _check_residual(lp: LinearProgram, x: np.ndarray) -> None:
    viol = lp.max_violation(x)
    scale = max(1.0, float(np.abs(lp.rhs).max(initial=0.0)))
    if viol > 1e-6 * scale:
        raise NumericalFailure(f"solution violates constraints by {viol:.2e}")


class _Simplex:
    def __init__(self, lp: LinearProgram, check: bool = True, dense: np.ndarray | None = None):
        self.lp = lp
        self.check = check
        m, n = lp.A.shape
        A = lp.A.toarray() if dense is None else dense
        lb, ub = lp.lb, lp.ub

        # Map each structural variable onto nonnegative columns y with y <= u:
        # shift by a finite lower bound, mirror a finite upper bound, split free columns.
        has_lb, has_ub = np.isfinite(lb), np.isfinite(ub)
        mirrored = ~has_lb & has_ub
        free = ~has_lb & ~has_ub
        shift = np.where(has_lb, lb, np.where(mirrored, ub, 0.0))
        sgn = np.where(mirrored, -1.0, 1.0)
        width = np.where(free, 2, 1)
        first = np.concatenate([[0], np.cumsum(width)[:-1]]).astype(int)
        n_struct = int(width.sum())
        cols = np.zeros((m, n_struct))
        cols[:, first] = A * sgn
        costs = np.zeros(n_struct)
        costs[first] = lp.c * sgn
        uppers = np.full(n_struct, np.inf)
        uppers[first] = np.where(has_lb, ub - np.where(has_lb, lb, 0.0), np.inf)
        if free.any():
            cols[:, first[free] + 1] = -A[:, free]
            costs[first[free] + 1] = -lp.c[free]
        self._kind = np.where(free, 0.0, sgn)
        self._shift = shift
        self._first = first
        b = lp.rhs - A @ shift

        senses = lp.senses
        slack_sign = np.array([1.0 if s == LE else (-1.0 if s == GE else 0.0) for s in senses])
        has_slack = slack_sign != 0
        n_slack = int(has_slack.sum())
        flip = b < 0
        sign = np.where(flip, -1.0, 1.0)

        # Rows whose slack enters with +1 after sign normalisation start with the slack basic.
        slack_basic = has_slack & (slack_sign * sign > 0)
        need_art = ~slack_basic
        n_art = int(need_art.sum())

        ntot = n_struct + n_slack + n_art
        T = np.zeros((m, ntot), order="F")
        if n_struct:
            T[:, :n_struct] = cols * sign[:, None]
        slack_cols = np.full(m, -1)
        k = n_struct
        for i in np.flatnonzero(has_slack):
            T[i, k] = slack_sign[i] * sign[i]
            slack_cols[i] = k
            k += 1
        basis = np.empty(m, dtype=int)
        for i in range(m):
            if slack_basic[i]:
                basis[i] = slack_cols[i]
            else:
                T[i, k] = 1.0
                basis[i] = k
                k += 1

        self.m, self.ntot = m, ntot
        self.n_struct, self.n_art = n_struct, n_art
        self.art_start = n_struct + n_slack
        self.A0 = T.copy()
        self.b0 = b * sign
        self.T = T
        self.xB = self.b0.copy()
        self.basis = basis
        self.is_basic = np.zeros(ntot, dtype=bool)
        self.is_basic[basis] = True
        self.upper = np.concatenate([uppers, np.full(n_slack + n_art, np.inf)])
        self.at_upper = np.zeros(ntot, dtype=bool)
        self.cost2 = np.concatenate([costs, np.zeros(n_slack + n_art)])
        self.allowed = np.ones(ntot, dtype=bool)
        self.iterations = 0
        self._since_refactor = 0

    # -- linear algebra helpers ------------------------------------------

    def _refactor(self, cost):
        B = self.A0[:, self.basis]
        try:
            self.T = np.asfortranarray(np.linalg.solve(B, self.A0))
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis during refactorisation") from exc
        nb_up = self.at_upper & ~self.is_basic
        rhs = self.b0 - self.A0[:, nb_up] @ self.upper[nb_up]
        self.xB = np.linalg.solve(B, rhs)
        self.T[np.abs(self.T) < 1e-14] = 0.0
        self._since_refactor = 0
        return self._reduced_costs(cost)

    def _refresh_values(self):
        """Recompute basic values from the original rows without rebuilding the tableau."""
        B = self.A0[:, self.basis]
        nb_up = self.at_upper & ~self.is_basic
        rhs = self.b0 - self.A0[:, nb_up] @ self.upper[nb_up]
        try:
            self.xB = np.linalg.solve(B, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis") from exc

    def _settle_values(self):
        """Recompute basic values only when accumulated drift is visible in the rows."""
        y = self._values()
        drift = np.abs(self.A0 @ y - self.b0).max(initial=0.0)
        if drift > 1e-11 * max(1.0, float(np.abs(self.b0).max(initial=0.0))):
            self._refresh_values()

    def _reduced_costs(self, cost):
        return cost - cost[self.basis] @ self.T

    # -- main loop -------------------------------------------------------

    def _iterate(self, cost, max_iter):
        d = self._reduced_costs(cost)
        bland = False
        degenerate = 0
        finite_up = np.isfinite(self.upper)
        while True:
            if self.iterations >= max_iter:
                raise NumericalFailure("iteration limit reached")
            if self._since_refactor >= _REFACTOR_EVERY:
                d = self._refactor(cost)
            nonbasic = self.allowed & ~self.is_basic & (self.upper > 0)
            inc = nonbasic & ~self.at_upper & (d > OPT_TOL)
            dec = nonbasic & self.at_upper & (d < -OPT_TOL)
            cand = inc | dec
            if not cand.any():
                return "optimal", d
            if bland:
                j = int(np.flatnonzero(cand)[0])
            else:
                score = np.where(cand, np.abs(d), -1.0)
                j = int(np.argmax(score))
            s = 1.0 if inc[j] else -1.0
            alpha = self.T[:, j].copy()
            sa = s * alpha

            ratios = np.full(self.m, np.inf)
            dn = sa > _ALPHA_TOL
            ratios[dn] = np.maximum(self.xB[dn], 0.0) / sa[dn]
            ub_basic = self.upper[self.basis]
            up = (sa < -_ALPHA_TOL) & finite_up[self.basis]
            ratios[up] = np.maximum(ub_basic[up] - self.xB[up], 0.0) / (-sa[up])
            theta_row = ratios.min() if self.m else np.inf
            theta = min(theta_row, self.upper[j])
            if not np.isfinite(theta):
                return "unbounded", d

            self.iterations += 1
            if theta <= 1e-12:
                degenerate += 1
                if degenerate >= _DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
                bland = False

            if self.upper[j] <= theta_row:
                # Bound flip: the entering column reaches its own upper bound first.
                self.xB -= theta * sa
                self.at_upper[j] = not self.at_upper[j]
                continue

            ties = np.flatnonzero(ratios <= theta_row + 1e-12)
            if bland:
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])
            piv = alpha[r]
            if abs(piv) < PIVOT_TOL:
                raise NumericalFailure(f"pivot magnitude {abs(piv):.2e} below tolerance")
            leaving = self.basis[r]
            hit_upper = sa[r] < 0
            start = self.upper[j] if self.at_upper[j] else 0.0
            self.xB -= theta * sa
            self.xB[r] = start + s * theta

            prow = self.T[r] / piv
            alpha[r] = 0.0
            self.T = _rank1(self.T, alpha, prow)
            self.T[r] = prow
            d = d - d[j] * prow
            d[j] = 0.0

            self.is_basic[leaving] = False
            self.at_upper[leaving] = bool(hit_upper)
            self.basis[r] = j
            self.is_basic[j] = True
            self.at_upper[j] = False
            self._since_refactor += 1

    def _values(self):
        y = np.where(self.at_upper, self.upper, 0.0)
        y[self.basis] = self.xB
        return y

    def run(self) -> LpSolution:
        lp = self.lp
        max_iter = 50 * (self.m + self.ntot) + 1000
        if self.n_art:
            cost1 = np.zeros(self.ntot)
            cost1[self.art_start:] = -1.0
            status, _ = self._iterate(cost1, max_iter)
            self._settle_values()
            infeas = self._values()[self.art_start:].sum()
            scale = max(1.0, float(np.abs(self.b0).max(initial=0.0)))
            if infeas > FEAS_TOL * scale:
                return LpSolution(LpStatus.INFEASIBLE, None, float("nan"), self.iterations)
            self.upper[self.art_start:] = 0.0
            self.allowed[self.art_start:] = False
            self.at_upper[self.art_start:] = False
        status, _ = self._iterate(self.cost2, max_iter)
        if status == "unbounded":
            return LpSolution(LpStatus.UNBOUNDED, None, float("inf"), self.iterations)
        self._settle_values()
        y = self._values()
        x = self._shift + self._kind * y[self._first]
        free = self._kind == 0.0
        x[free] = y[self._first[free]] - y[self._first[free] + 1]
        x = np.clip(x, lp.lb, lp.ub)
        if self.check:
            _check_residual(lp, x)
        return LpSolution(LpStatus.OPTIMAL, x, float(lp.c @ x), self.iterations)


def _solve_highs(lp: LinearProgram) -> LpSolution:
    from scipy.optimize import linprog

    senses = np.asarray(lp.senses)
    A = lp.A
    le = senses == LE
    ge = senses == GE
    eq = senses == EQ
    A_ub = sp.vstack([A[le], -A[ge]]).tocsr() if (le.any() or ge.any()) else None
    b_ub = np.concatenate([lp.rhs[le], -lp.rhs[ge]]) if A_ub is not None else None
    A_eq = A[eq] if eq.any() else None
    b_eq = lp.rhs[eq] if eq.any() else None
    bounds = np.column_stack([lp.lb, lp.ub])
    bounds = [(None if not np.isfinite(l) else l, None if not np.isfinite(u) else u)
              for l, u in bounds]
    options = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}
    res = linprog(-lp.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs", options=options)
    if res.status == 2:
        # presolve cannot tell infeasible from unbounded; settle it without presolve
        res = linprog(-lp.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                      method="highs", options={**options, "presolve": False})
    if res.status == 0:
        x = np.clip(res.x, lp.lb, lp.ub)
        return LpSolution(LpStatus.OPTIMAL, x, float(lp.c @ x), int(res.nit))
    if res.status == 2:
        return LpSolution(LpStatus.INFEASIBLE, None, float("nan"), int(res.nit))
    if res.status == 3:
        return LpSolution(LpStatus.UNBOUNDED, None, float("inf"), int(res.nit))
    raise NumericalFailure(f"HiGHS failed: {res.message}")
