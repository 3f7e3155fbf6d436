"""LP solution with optimality certificates, and an independent residual check.

The LP itself goes to HiGHS (dual simplex) so that solutions are vertices
with exact zeros off the support. The duals it reports are turned into a
duality-gap certificate here rather than trusted as a bare status code, and
the final basis is re-solved directly to tighten the primal residuals.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from typing import Any

import numpy as np
import highspy
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import NumericalFailure
from .model import LpProblem

FEAS_TOL = 1e-8
GAP_TOL = 1e-6
# stage-two objective slack, relative to the optimum
TIEBREAK_SLACK = 1e-14

_HIGHS_OPTIONS = {
    "output_flag": False,
    "solver": "simplex",
    "simplex_strategy": 1,  # dual simplex
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
    "random_seed": 0,
    "threads": 1,
}


class SolveStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclasses.dataclass
class FlowSolution:
    status: SolveStatus
    x: np.ndarray | None = None
    user_flow: np.ndarray | None = None  # (M, E)
    aggregate_flow: np.ndarray | None = None  # (E,)
    rebalancing_flow: np.ndarray | None = None  # (E_R,)
    beta_in: np.ndarray | None = None
    beta_out: np.ndarray | None = None
    epigraph: np.ndarray | None = None
    objective: float = math.nan
    solver_objective: float = math.nan
    dual_objective: float = math.nan
    duality_gap: float = math.nan
    dual_residual: float = math.nan
    iterations: int = 0
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == SolveStatus.OPTIMAL

    def to_dict(self) -> dict[str, Any]:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        return {
            "status": self.status.value,
            "objective": self.objective,
            "solver_objective": self.solver_objective,
            "dual_objective": self.dual_objective,
            "duality_gap": self.duality_gap,
            "dual_residual": self.dual_residual,
            "aggregate_flow": arr(self.aggregate_flow),
            "user_flow": arr(self.user_flow),
            "rebalancing_flow": arr(self.rebalancing_flow),
            "beta_in": arr(self.beta_in),
            "beta_out": arr(self.beta_out),
            "message": self.message,
        }


@dataclasses.dataclass
class _Prepared:
    """Row-equilibrated problem in HiGHS row form ``lower <= A x <= upper``."""

    A: sparse.csr_matrix
    lower: np.ndarray
    upper: np.ndarray
    scale: np.ndarray
    n_eq: int
    ub_rows: np.ndarray  # original indices of the kept inequality rows


def _row_norms(A: sparse.csr_matrix) -> np.ndarray:
    if not A.nnz:
        return np.zeros(A.shape[0])
    return np.asarray(abs(A).max(axis=1).todense()).ravel()


def _prepare(lp: LpProblem) -> _Prepared | None:
    """Drop vacuous rows and scale every row to unit max-norm.

    Returns None if a row without variables is violated.
    """
    keep = np.isfinite(lp.b_ub)
    A_ub = lp.A_ub[keep]
    b_ub = lp.b_ub[keep]
    empty_ub = np.diff(A_ub.indptr) == 0
    if np.any(b_ub[empty_ub] < 0):
        return None
    rows = np.flatnonzero(keep)[~empty_ub]
    A_ub, b_ub = A_ub[~empty_ub], b_ub[~empty_ub]
    empty_eq = np.diff(lp.A_eq.indptr) == 0
    if np.any(lp.b_eq[empty_eq] != 0):
        return None
    A = sparse.vstack([lp.A_eq, A_ub]).tocsr()
    norms = _row_norms(A)
    scale = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 1.0)
    A = (sparse.diags(scale) @ A).tocsr()
    lower = np.concatenate([lp.b_eq, np.full(len(b_ub), -np.inf)]) * scale
    upper = np.concatenate([lp.b_eq, b_ub]) * scale
    return _Prepared(A, lower, upper, scale, lp.A_eq.shape[0], rows)


def _highs(c: np.ndarray, prep: _Prepared, lb: np.ndarray, ub: np.ndarray) -> highspy.Highs:
    h = highspy.Highs()
    for name, value in _HIGHS_OPTIONS.items():
        h.setOptionValue(name, value)
    inf = highspy.kHighsInf
    model = highspy.HighsLp()
    model.num_col_ = len(c)
    model.num_row_ = prep.A.shape[0]
    model.col_cost_ = np.asarray(c, dtype=float)
    model.col_lower_ = np.where(np.isfinite(lb), lb, -inf)
    model.col_upper_ = np.where(np.isfinite(ub), ub, inf)
    model.row_lower_ = np.where(np.isfinite(prep.lower), prep.lower, -inf)
    model.row_upper_ = np.where(np.isfinite(prep.upper), prep.upper, inf)
    model.a_matrix_.format_ = highspy.MatrixFormat.kRowwise
    model.a_matrix_.num_row_ = prep.A.shape[0]
    model.a_matrix_.num_col_ = len(c)
    model.a_matrix_.start_ = prep.A.indptr.astype(np.int32)
    model.a_matrix_.index_ = prep.A.indices.astype(np.int32)
    model.a_matrix_.value_ = prep.A.data.astype(float)
    h.passModel(model)
    return h


def _certificate(lp: LpProblem, prep: _Prepared, x: np.ndarray, row_dual: np.ndarray,
                 col_dual: np.ndarray) -> tuple[float, float, float]:
    """(dual objective, relative gap, dual infeasibility) in original units.

    Row duals come back for the scaled rows, so they are rescaled before the
    reduced costs ``c - A_eq' y_eq - A_ub' y_ub - z`` are recomputed here.
    """
    y = row_dual * prep.scale
    y_eq, y_ub = y[:prep.n_eq], y[prep.n_eq:]
    b_ub = lp.b_ub[prep.ub_rows]
    dual = float(lp.b_eq @ y_eq + b_ub @ y_ub)
    # a column dual prices whichever bound it sits on: lower if >= 0, upper if < 0
    z = col_dual
    at_lower = z >= 0
    bound = np.where(at_lower, lp.lb, lp.ub)
    finite = np.isfinite(bound)
    dual += float(z[finite] @ bound[finite])
    reduced = lp.c - lp.A_eq.T @ y_eq - lp.A_ub[prep.ub_rows].T @ y_ub - z
    infeasible = max(
        float(np.max(np.abs(reduced), initial=0.0)),
        float(np.max(y_ub, initial=0.0)),  # a <= row must have y <= 0
        float(np.max(np.abs(z[~finite]), initial=0.0)),
    )
    primal = float(lp.c @ x)
    gap = abs(primal - dual) / max(1.0, abs(primal))
    return dual, gap, infeasible


def _polish(h: highspy.Highs, A: sparse.csr_matrix, row_lo: np.ndarray, row_hi: np.ndarray,
            col_lo: np.ndarray, col_hi: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Recompute the basic variables of the final basis with a direct sparse
    solve, taking nonbasic columns and rows exactly at their bounds.

    The simplex leaves row residuals near its feasibility tolerance times the
    flow magnitude; this removes most of that. The refined point is only kept
    if it stays within bounds and actually lowers the residual.
    """
    basis = h.getBasis()
    if not basis.valid:
        return x
    B = highspy.HighsBasisStatus
    cs = np.array([int(v) for v in basis.col_status])
    rs = np.array([int(v) for v in basis.row_status])
    m, n = A.shape
    basic_c, basic_r = cs == int(B.kBasic), rs == int(B.kBasic)
    if basic_c.sum() + basic_r.sum() != m:
        return x
    x_n = np.where(cs == int(B.kUpper), col_hi, np.where(cs == int(B.kZero), 0.0, col_lo))
    r_n = np.where(rs == int(B.kUpper), row_hi, row_lo)
    x_n[basic_c] = 0.0
    r_n[basic_r] = 0.0
    if not (np.all(np.isfinite(x_n)) and np.all(np.isfinite(r_n))):
        return x
    # A x - r = 0 split into basic unknowns and fixed nonbasic values
    slack = sparse.identity(m, format="csc")[:, np.flatnonzero(basic_r)]
    M = sparse.hstack([A.tocsc()[:, np.flatnonzero(basic_c)], -slack]).tocsc()
    try:
        z = splu(M).solve(r_n - A @ x_n)
    except RuntimeError:  # singular factor
        return x
    y = x_n.copy()
    y[basic_c] = z[:basic_c.sum()]
    tol = 1e-9 * np.maximum(1.0, np.abs(y))
    if np.any(y < col_lo - tol) or np.any(y > col_hi + tol):
        return x
    y = np.clip(y, col_lo, col_hi)

    def residual(v):
        r = A @ v
        return float(np.max(np.maximum(row_lo - r, 0.0) + np.maximum(r - row_hi, 0.0), initial=0.0))

    return y if residual(y) <= residual(x) else x


def _clean(x: np.ndarray, lb: np.ndarray, ub: np.ndarray) -> np.ndarray:
    x = np.clip(x, lb, ub)
    x[np.abs(x) < 1e-11] = 0.0
    return x


def _unpack(lp: LpProblem, x: np.ndarray) -> dict[str, np.ndarray]:
    idx = lp.index
    user = x[idx.user_slice].reshape(idx.M, idx.E)
    return {
        "user_flow": user,
        "aggregate_flow": user.sum(axis=0),
        "rebalancing_flow": x[idx.rebalancing_slice],
        "beta_in": x[idx.beta_in_slice],
        "beta_out": x[idx.beta_out_slice],
        "epigraph": x[idx.epigraph_slice] if idx.has_epigraph else None,
    }


def solve(lp: LpProblem, tiebreak: bool | None = None) -> FlowSolution:
    """Solve ``lp`` to optimality.

    When ``tiebreak`` is on (default: the scenario's ``tiebreak_rebalancing``)
    a second pass picks, among all optimal solutions, one with the least total
    rebalancing (AMoD empty flow plus micromobility feed and withdraw). The
    travel-time objective is free of rebalancing terms, so without this pass
    the reported rebalancing totals would depend on solver internals.
    """
    if tiebreak is None:
        tiebreak = lp.config.tiebreak_rebalancing
    prep = _prepare(lp)
    if prep is None:
        return FlowSolution(SolveStatus.INFEASIBLE, message="constraint row with no variables is violated")
    h = _highs(lp.c, prep, lp.lb, lp.ub)
    h.run()
    status = h.getModelStatus()
    if status == highspy.HighsModelStatus.kUnboundedOrInfeasible:
        # presolve could not tell which; ask the simplex itself
        h.setOptionValue("presolve", "off")
        h.clearSolver()
        h.run()
        status = h.getModelStatus()
    message = h.modelStatusToString(status)
    if status == highspy.HighsModelStatus.kInfeasible:
        return FlowSolution(SolveStatus.INFEASIBLE, message=message)
    if status == highspy.HighsModelStatus.kUnbounded:
        return FlowSolution(SolveStatus.UNBOUNDED, message=message)
    if status != highspy.HighsModelStatus.kOptimal:
        raise NumericalFailure(f"LP solver stopped without an optimum: {message}")

    result = h.getSolution()
    x = _polish(h, prep.A, prep.lower, prep.upper, lp.lb, lp.ub, np.array(result.col_value))
    dual, gap, dres = _certificate(lp, prep, x, np.array(result.row_dual), np.array(result.col_dual))
    z_star = float(lp.c @ x)
    iterations = int(h.getInfo().simplex_iteration_count)

    if tiebreak:
        idx = lp.index
        secondary = np.zeros_like(lp.c)
        secondary[idx.rebalancing_slice] = 1.0
        secondary[idx.beta_in_slice] = 1.0
        secondary[idx.beta_out_slice] = 1.0
        if secondary.any():
            # keep the travel-time optimum as a constraint and warm-start from
            # the current basis
            cmax = float(np.max(np.abs(lp.c))) or 1.0
            nz = np.flatnonzero(lp.c)
            rhs = (z_star + TIEBREAK_SLACK * max(1.0, abs(z_star))) / cmax
            h.addRow(-highspy.kHighsInf, rhs, len(nz), nz.astype(np.int32), lp.c[nz] / cmax)
            cols = np.arange(len(lp.c), dtype=np.int32)
            h.changeColsCost(len(cols), cols, secondary)
            h.run()
            if h.getModelStatus() == highspy.HighsModelStatus.kOptimal:
                A2 = sparse.vstack([prep.A, sparse.csr_matrix((lp.c[nz] / cmax, (np.zeros(len(nz), int), nz)),
                                                              shape=(1, len(lp.c)))]).tocsr()
                x = _polish(h, A2, np.append(prep.lower, -np.inf), np.append(prep.upper, rhs),
                            lp.lb, lp.ub, np.array(h.getSolution().col_value))
                iterations += int(h.getInfo().simplex_iteration_count)

    x = _clean(np.array(x, dtype=float), lp.lb, lp.ub)
    return FlowSolution(
        SolveStatus.OPTIMAL, x=x, **_unpack(lp, x),
        objective=float(lp.c @ x), solver_objective=z_star,
        dual_objective=dual, duality_gap=gap, dual_residual=dres,
        iterations=iterations, message=message,
    )


@dataclasses.dataclass
class VerifyReport:
    max_eq_residual: float  # vehicle and rebalancing balances, absolute
    max_ub_violation: float
    max_bound_violation: float
    family_residuals: dict[str, float]
    max_commodity_residual: float  # relative to max(1, commodity rate)
    objective_rel_error: float
    duality_gap: float
    violated_eq_rows: list[tuple[str, int]]
    violated_ub_rows: list[tuple[str, int]]
    tol: float = FEAS_TOL
    gap_tol: float = GAP_TOL

    @property
    def ok(self) -> bool:
        return (self.max_eq_residual <= self.tol
                and self.max_ub_violation <= self.tol
                and self.max_bound_violation <= self.tol
                and self.max_commodity_residual <= self.tol
                and self.objective_rel_error <= 1e-9
                and self.duality_gap <= self.gap_tol)

    def summary(self) -> str:
        return (f"eq residual {self.max_eq_residual:.2e}, ub violation {self.max_ub_violation:.2e}, "
                f"commodity residual {self.max_commodity_residual:.2e}, "
                f"objective error {self.objective_rel_error:.2e}, gap {self.duality_gap:.2e}")


def _family_of(families: dict[str, slice], row: int) -> tuple[str, int]:
    for name, sl in families.items():
        if sl.start <= row < sl.stop:
            return name, row - sl.start
    raise IndexError(row)


def verify(sol: FlowSolution, lp: LpProblem, tol: float = FEAS_TOL) -> VerifyReport:
    """Recompute every constraint residual and the objective from the raw flows."""
    if not sol.optimal:
        raise ValueError("verify needs an optimal solution")
    x = sol.x
    r_eq = lp.A_eq @ x - lp.b_eq
    finite = np.isfinite(lp.b_ub)
    r_ub = np.zeros(len(lp.b_ub))
    r_ub[finite] = np.maximum(lp.A_ub[finite] @ x - lp.b_ub[finite], 0.0)
    bounds = max(float(np.max(lp.lb - x, initial=0.0)), float(np.max(x - lp.ub, initial=0.0)))

    families = {}
    for name, sl in {**lp.eq_rows}.items():
        families[name] = float(np.max(np.abs(r_eq[sl]), initial=0.0))
    for name, sl in lp.ub_rows.items():
        families[name] = float(np.max(r_ub[sl], initial=0.0))

    cons = lp.eq_rows["user_conservation"]
    N = lp.graph.N
    per_node = np.abs(r_eq[cons]).reshape(len(lp.commodities), N)
    rel = per_node.max(axis=1) / np.maximum(1.0, lp.commodity_rates())

    # scale-aware tolerance for flagging single rows
    bad_eq = np.flatnonzero(np.abs(r_eq) > tol * np.maximum(1.0, np.abs(lp.b_eq)))
    bad_ub = np.flatnonzero(r_ub > tol * np.maximum(1.0, np.abs(np.where(finite, lp.b_ub, 0.0))))
    obj = float(lp.c @ x)
    ref = sol.solver_objective
    return VerifyReport(
        max_eq_residual=float(np.max(np.abs(r_eq[lp.eq_rows["amod_balance"].start:]), initial=0.0)),
        max_ub_violation=float(np.max(r_ub, initial=0.0)),
        max_bound_violation=bounds,
        family_residuals=families,
        max_commodity_residual=float(np.max(rel, initial=0.0)),
        objective_rel_error=abs(obj - ref) / max(1.0, abs(ref)),
        duality_gap=sol.duality_gap,
        violated_eq_rows=[_family_of(lp.eq_rows, int(i)) for i in bad_eq],
        violated_ub_rows=[_family_of(lp.ub_rows, int(i)) for i in bad_ub],
        tol=tol,
    )
