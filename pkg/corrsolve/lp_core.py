"""Sparse linear programs, a bundled dense two-phase simplex, and pluggable solver backends.

Backends are looked up by name: an explicit name first, then ``CORRSOLVE_LP_BACKEND``,
then ``"bundled"``. Dual values follow one convention for every backend: the dual of a row
is the derivative of the optimal objective with respect to that row's right-hand side.
"""

import os
import re
import time
import logging
from abc import ABC, abstractmethod
from enum import Enum
from typing import List, Dict, Any, Optional, Tuple, Iterable, Union
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from tenacity import Retrying, stop_after_attempt, retry_if_exception_type, before_sleep_log


logger = logging.getLogger(__name__)

INF = float("inf")
SENSES = ("<=", ">=", "=")
DEFAULT_BACKEND = "bundled"
_NAME = re.compile(r"^[^\s|]+$")


class UnknownBackendError(ValueError):
    pass


class LpFormatError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class NumericalTroubleError(RuntimeError):
    pass


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration-limit"


@dataclass
class Variable:
    name: str
    lower: float = 0.0
    upper: float = INF


@dataclass
class Row:
    name: str
    terms: Dict[int, float]
    sense: str
    rhs: float


Terms = Union[Dict[int, float], Iterable[Tuple[int, float]]]


class LinearProgram:
    """Sparse LP: named bounded variables, named rows, one linear objective."""

    def __init__(self, sense: str = "max"):
        if sense not in ("max", "min"):
            raise ValueError(f"objective sense must be 'max' or 'min', got {sense!r}")
        self.sense = sense
        self.variables: List[Variable] = []
        self.var_index: Dict[str, int] = {}
        self.rows: List[Row] = []
        self.objective: Dict[int, float] = {}

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def add_variable(self, name: str, lower: float = 0.0, upper: float = INF) -> int:
        if not _NAME.match(name):
            raise ValueError(f"bad variable name {name!r}")
        if name in self.var_index:
            raise ValueError(f"duplicate variable {name!r}")
        if lower == INF or upper == -INF:
            raise ValueError(f"variable {name!r} has an empty domain")
        self.var_index[name] = len(self.variables)
        self.variables.append(Variable(name, float(lower), float(upper)))
        return len(self.variables) - 1

    def _merge(self, terms: Terms) -> Dict[int, float]:
        items = terms.items() if isinstance(terms, dict) else terms
        merged: Dict[int, float] = {}
        for j, coef in items:
            if not 0 <= j < len(self.variables):
                raise ValueError(f"undeclared variable index {j}")
            merged[j] = merged.get(j, 0.0) + float(coef)
        return {j: a for j, a in merged.items() if a != 0.0}

    def add_row(self, name: str, terms: Terms, sense: str, rhs: float) -> int:
        """Append a row; repeated variables in ``terms`` are summed."""
        if not _NAME.match(name):
            raise ValueError(f"bad row name {name!r}")
        if sense not in SENSES:
            raise ValueError(f"row sense must be one of {SENSES}, got {sense!r}")
        if not np.isfinite(rhs):
            raise ValueError(f"row {name!r} has a non-finite right-hand side")
        self.rows.append(Row(name, self._merge(terms), sense, float(rhs)))
        return len(self.rows) - 1

    def set_objective(self, terms: Terms, sense: Optional[str] = None) -> None:
        if sense is not None:
            if sense not in ("max", "min"):
                raise ValueError(f"objective sense must be 'max' or 'min', got {sense!r}")
            self.sense = sense
        self.objective = self._merge(terms)

    def copy(self) -> 'LinearProgram':
        other = LinearProgram(self.sense)
        other.variables = [Variable(v.name, v.lower, v.upper) for v in self.variables]
        other.var_index = dict(self.var_index)
        other.rows = [Row(r.name, dict(r.terms), r.sense, r.rhs) for r in self.rows]
        other.objective = dict(self.objective)
        return other

    def matrix(self) -> sparse.csr_matrix:
        rows, cols, vals = [], [], []
        for r, row in enumerate(self.rows):
            for j, a in row.terms.items():
                rows.append(r)
                cols.append(j)
                vals.append(a)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(self.n_rows, self.n_vars))

    def rhs(self) -> np.ndarray:
        return np.array([row.rhs for row in self.rows], dtype=float)

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for j, a in self.objective.items():
            c[j] = a
        return c

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        lower = np.array([v.lower for v in self.variables], dtype=float)
        upper = np.array([v.upper for v in self.variables], dtype=float)
        return lower, upper

    def residual(self, x: np.ndarray) -> float:
        """Largest row or bound violation of x."""
        worst = 0.0
        if self.n_rows:
            lhs = self.matrix() @ x
            for row, value in zip(self.rows, lhs):
                if row.sense == "<=":
                    worst = max(worst, value - row.rhs)
                elif row.sense == ">=":
                    worst = max(worst, row.rhs - value)
                else:
                    worst = max(worst, abs(value - row.rhs))
        if self.n_vars:
            lower, upper = self.bounds()
            worst = max(worst, float(np.max(lower - x)), float(np.max(x - upper)))
        return max(worst, 0.0)


@dataclass
class SolverOptions:
    backend: Optional[str] = None
    pivot_rule: str = "hybrid"          # hybrid | bland | dantzig
    pivot_tol: float = 1e-10
    feasibility_tol: float = 1e-9
    optimality_tol: float = 1e-9
    max_iterations: int = 50_000
    max_retries: int = 3
    refactor_interval: int = 200
    degenerate_limit: int = 50

    def __post_init__(self):
        if self.pivot_rule not in ("hybrid", "bland", "dantzig"):
            raise ValueError(f"unknown pivot rule {self.pivot_rule!r}")


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray
    objective: float
    duals: Optional[np.ndarray] = None
    iterations: int = 0
    backend: str = ""
    time: float = 0.0

    @property
    def optimal(self) -> bool:
        return self.status == LpStatus.OPTIMAL


class LpBackend(ABC):
    name: str = ""

    @abstractmethod
    def solve(self, lp: LinearProgram, options: SolverOptions) -> LpSolution:
        ...


_BACKENDS: Dict[str, LpBackend] = {}


def register(backend: LpBackend) -> LpBackend:
    if not backend.name:
        raise ValueError("backend needs a name")
    _BACKENDS[backend.name] = backend
    return backend


def available_backends() -> List[str]:
    return sorted(_BACKENDS)


def select(name: Optional[str] = None) -> LpBackend:
    name = name or os.getenv("CORRSOLVE_LP_BACKEND") or DEFAULT_BACKEND
    if name not in _BACKENDS:
        raise UnknownBackendError(f"unknown LP backend '{name}' (available: {available_backends()})")
    return _BACKENDS[name]


def solve(lp: LinearProgram, options: Optional[SolverOptions] = None) -> LpSolution:
    """Solve with the selected backend. Non-optimal outcomes are statuses, not exceptions."""
    options = options or SolverOptions()
    backend = select(options.backend)
    start = time.perf_counter()
    solution = backend.solve(lp, options)
    solution.time = time.perf_counter() - start
    solution.backend = backend.name
    logger.debug(f"[{backend.name}] {lp.n_rows} rows x {lp.n_vars} vars: {solution.status.value}, "
                 f"objective {solution.objective:.9g}, {solution.iterations} iterations, "
                 f"{solution.time:.3f}s")
    return solution


# ---------------------------------------------------------------------------
# Bundled dense two-phase simplex
# ---------------------------------------------------------------------------

@dataclass
class _StandardForm:
    """min c.x, T x = b, x >= 0, b >= 0, with a starting basis of slacks and artificials."""
    T: np.ndarray
    b: np.ndarray
    cost: np.ndarray
    basis: np.ndarray
    artificial: np.ndarray          # bool per column
    row_origin: np.ndarray          # original row index, -1 for bound rows
    flip: np.ndarray                # +1 / -1 per row
    var_offset: np.ndarray
    var_cols: List[List[Tuple[int, float]]] = field(default_factory=list)
    n_struct: int = 0


def _standardize(lp: LinearProgram) -> _StandardForm:
    offsets = np.zeros(lp.n_vars)
    var_cols: List[List[Tuple[int, float]]] = []
    n_struct = 0
    bound_rows: List[Tuple[int, float]] = []
    for j, var in enumerate(lp.variables):
        if np.isfinite(var.lower):
            offsets[j] = var.lower
            var_cols.append([(n_struct, 1.0)])
            if np.isfinite(var.upper):
                bound_rows.append((n_struct, var.upper - var.lower))
            n_struct += 1
        elif np.isfinite(var.upper):
            offsets[j] = var.upper
            var_cols.append([(n_struct, -1.0)])
            n_struct += 1
        else:
            var_cols.append([(n_struct, 1.0), (n_struct + 1, -1.0)])
            n_struct += 2

    m = lp.n_rows + len(bound_rows)
    M = np.zeros((m, n_struct))
    rhs = np.zeros(m)
    senses: List[str] = []
    for r, row in enumerate(lp.rows):
        shift = 0.0
        for j, a in row.terms.items():
            shift += a * offsets[j]
            for col, coef in var_cols[j]:
                M[r, col] += a * coef
        rhs[r] = row.rhs - shift
        senses.append(row.sense)
    for k, (col, bound) in enumerate(bound_rows):
        M[lp.n_rows + k, col] = 1.0
        rhs[lp.n_rows + k] = bound
        senses.append("<=")

    flip = np.ones(m)
    slack_sign = np.zeros(m)       # +1 slack, -1 surplus, 0 none
    needs_artificial = np.zeros(m, dtype=bool)
    for r in range(m):
        sense = senses[r]
        if rhs[r] < 0 or (rhs[r] == 0 and sense == ">="):
            flip[r] = -1.0
            M[r] = -M[r]
            rhs[r] = -rhs[r]
            sense = {"<=": ">=", ">=": "<=", "=": "="}[sense]
        if sense == "<=":
            slack_sign[r] = 1.0
        elif sense == ">=":
            slack_sign[r] = -1.0
            needs_artificial[r] = True
        else:
            needs_artificial[r] = True

    slack_rows = np.flatnonzero(slack_sign != 0)
    art_rows = np.flatnonzero(needs_artificial)
    n = n_struct + len(slack_rows) + len(art_rows)
    T = np.zeros((m, n))
    T[:, :n_struct] = M
    basis = np.full(m, -1, dtype=np.int64)
    for k, r in enumerate(slack_rows):
        T[r, n_struct + k] = slack_sign[r]
        if slack_sign[r] > 0:
            basis[r] = n_struct + k
    first_art = n_struct + len(slack_rows)
    for k, r in enumerate(art_rows):
        T[r, first_art + k] = 1.0
        basis[r] = first_art + k

    sign = 1.0 if lp.sense == "min" else -1.0
    cost = np.zeros(n)
    for j, a in lp.objective.items():
        for col, coef in var_cols[j]:
            cost[col] += sign * a * coef
    artificial = np.zeros(n, dtype=bool)
    artificial[first_art:] = True

    row_origin = np.concatenate([np.arange(lp.n_rows), np.full(len(bound_rows), -1)]).astype(np.int64)
    return _StandardForm(T=T, b=rhs, cost=cost, basis=basis, artificial=artificial,
                         row_origin=row_origin, flip=flip, var_offset=offsets,
                         var_cols=var_cols, n_struct=n_struct)


class _Tableau:
    """Canonical tableau T = B^-1 A with the original A kept for refactorization."""

    def __init__(self, form: _StandardForm, options: SolverOptions, rule: str, pivot_tol: float):
        self.T = form.T.copy()
        self.b = form.b.copy()
        self.A0 = form.T
        self.b0 = form.b
        self.basis = form.basis.copy()
        self.options = options
        self.rule = rule
        self.pivot_tol = pivot_tol
        self.iterations = 0
        self._since_refactor = 0

    def reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        return cost - cost[self.basis] @ self.T

    def pivot(self, r: int, q: int, d: np.ndarray) -> None:
        T, b = self.T, self.b
        piv = T[r, q]
        T[r] /= piv
        b[r] /= piv
        column = T[:, q].copy()
        column[r] = 0.0
        rows = np.flatnonzero(column)
        if rows.size:
            T[rows] -= np.outer(column[rows], T[r])
            b[rows] -= column[rows] * b[r]
            T[rows, q] = 0.0
        T[r, q] = 1.0
        d -= d[q] * T[r]
        d[q] = 0.0
        self.basis[r] = q
        self.iterations += 1

        scale = 1.0 + np.abs(self.b0).max(initial=0.0)
        if b.min(initial=0.0) < -1e-7 * scale:
            raise NumericalTroubleError(f"basic solution went negative ({b.min():.3g})")
        np.maximum(b, 0.0, out=b)

        self._since_refactor += 1
        if self._since_refactor >= self.options.refactor_interval:
            self.refactor()

    def refactor(self) -> None:
        B = self.A0[:, self.basis]
        try:
            solved = np.linalg.solve(B, np.column_stack([self.A0, self.b0]))
        except np.linalg.LinAlgError as e:
            raise NumericalTroubleError(f"singular basis on refactorization: {e}") from e
        if not np.all(np.isfinite(solved)):
            raise NumericalTroubleError("non-finite tableau after refactorization")
        self.T = solved[:, :-1]
        self.b = solved[:, -1]
        scale = 1.0 + np.abs(self.b0).max(initial=0.0)
        if self.b.min(initial=0.0) < -1e-7 * scale:
            raise NumericalTroubleError("refactorized basis is infeasible")
        np.maximum(self.b, 0.0, out=self.b)
        self._since_refactor = 0

    def drop_rows(self, rows: np.ndarray) -> None:
        keep = np.setdiff1d(np.arange(self.T.shape[0]), rows)
        self.T = self.T[keep]
        self.b = self.b[keep]
        self.A0 = self.A0[keep]
        self.b0 = self.b0[keep]
        self.basis = self.basis[keep]

    def run(self, cost: np.ndarray, allowed: np.ndarray, budget: int) -> LpStatus:
        opts = self.options
        d = self.reduced_costs(cost)
        bland = self.rule == "bland"
        degenerate_run = 0
        while True:
            if self._since_refactor == 0:
                d = self.reduced_costs(cost)
            candidates = allowed & (d < -opts.optimality_tol)
            if not candidates.any():
                return LpStatus.OPTIMAL
            if self.iterations >= budget:
                return LpStatus.ITERATION_LIMIT

            if bland:
                q = int(np.flatnonzero(candidates)[0])
            else:
                q = int(np.argmin(np.where(candidates, d, INF)))

            column = self.T[:, q]
            eligible = column > self.pivot_tol
            if not eligible.any():
                return LpStatus.UNBOUNDED
            ratios = np.full(column.shape, INF)
            ratios[eligible] = self.b[eligible] / column[eligible]
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + 1e-12 * (1.0 + best))
            r = int(ties[np.argmin(self.basis[ties])])
            degenerate = self.b[r] <= opts.feasibility_tol

            self.pivot(r, q, d)

            if self.rule == "hybrid":
                if degenerate:
                    degenerate_run += 1
                    if degenerate_run >= opts.degenerate_limit and not bland:
                        logger.debug(f"{degenerate_run} degenerate pivots, switching to Bland's rule")
                        bland = True
                else:
                    degenerate_run = 0
                    bland = False


def _simplex(lp: LinearProgram, options: SolverOptions, rule: str, pivot_tol: float) -> LpSolution:
    form = _standardize(lp)
    tab = _Tableau(form, options, rule, pivot_tol)
    m, n = tab.T.shape
    budget = options.max_iterations
    allowed = ~form.artificial

    def failed(status: LpStatus) -> LpSolution:
        return LpSolution(status=status, x=np.zeros(lp.n_vars), objective=float("nan"),
                          iterations=tab.iterations)

    if form.artificial.any():
        phase1_cost = form.artificial.astype(float)
        status = tab.run(phase1_cost, allowed, budget)
        if status == LpStatus.ITERATION_LIMIT:
            return failed(status)
        infeasibility = float(phase1_cost[tab.basis] @ tab.b)
        if infeasibility > options.feasibility_tol * (1.0 + np.abs(form.b).max(initial=0.0)):
            logger.debug(f"Phase 1 ended with infeasibility {infeasibility:.3g}")
            return failed(LpStatus.INFEASIBLE)

        redundant = []
        d = np.zeros(n)
        for r in range(m):
            if not form.artificial[tab.basis[r]]:
                continue
            row = np.where(allowed, np.abs(tab.T[r]), 0.0)
            q = int(np.argmax(row))
            if row[q] > pivot_tol:
                tab.b[r] = 0.0
                tab.pivot(r, q, d)
            else:
                redundant.append(r)
        if redundant:
            logger.debug(f"Dropping {len(redundant)} redundant rows")
            tab.drop_rows(np.array(redundant, dtype=np.int64))
            form.row_origin = np.delete(form.row_origin, redundant)
            form.flip = np.delete(form.flip, redundant)
        tab.refactor()

    status = tab.run(form.cost, allowed, budget)
    if status != LpStatus.OPTIMAL:
        return failed(status)

    cols = np.zeros(n)
    cols[tab.basis] = tab.b
    x = form.var_offset.copy()
    for j, parts in enumerate(form.var_cols):
        for col, coef in parts:
            x[j] += coef * cols[col]
    objective = float(lp.objective_vector() @ x) if lp.n_vars else 0.0

    duals = np.zeros(lp.n_rows)
    if tab.T.shape[0]:
        B = tab.A0[:, tab.basis]
        try:
            y = np.linalg.solve(B.T, form.cost[tab.basis])
        except np.linalg.LinAlgError:
            y = np.linalg.lstsq(B.T, form.cost[tab.basis], rcond=None)[0]
        sense_sign = 1.0 if lp.sense == "min" else -1.0
        for k, origin in enumerate(form.row_origin):
            if origin >= 0:
                duals[origin] = sense_sign * form.flip[k] * y[k]

    return LpSolution(status=LpStatus.OPTIMAL, x=x, objective=objective, duals=duals,
                      iterations=tab.iterations)


class BundledSimplex(LpBackend):
    """Dense-tableau two-phase simplex for desk-scale LPs.

    Pricing is Dantzig's rule falling back to Bland's rule after a run of degenerate pivots
    (``pivot_rule="hybrid"``). A singular or drifting basis restarts the solve under Bland's
    rule with a stricter pivot threshold.
    """
    name = "bundled"

    def solve(self, lp: LinearProgram, options: SolverOptions) -> LpSolution:
        for attempt in Retrying(
            stop=stop_after_attempt(options.max_retries),
            retry=retry_if_exception_type(NumericalTroubleError),
            before_sleep=before_sleep_log(logger, logging.WARNING),
            reraise=True,
        ):
            with attempt:
                n = attempt.retry_state.attempt_number
                rule = options.pivot_rule if n == 1 else "bland"
                pivot_tol = options.pivot_tol * 100 ** (n - 1)
                return _simplex(lp, options, rule, pivot_tol)


class HighsBackend(LpBackend):
    """scipy's HiGHS interface (``linprog(method="highs")``)."""
    name = "highs"

    _STATUS = {
        0: LpStatus.OPTIMAL,
        1: LpStatus.ITERATION_LIMIT,
        2: LpStatus.INFEASIBLE,
        3: LpStatus.UNBOUNDED,
        4: LpStatus.ITERATION_LIMIT,
    }

    def solve(self, lp: LinearProgram, options: SolverOptions) -> LpSolution:
        A = lp.matrix()
        rhs = lp.rhs()
        senses = np.array([row.sense for row in lp.rows], dtype=object)
        le = np.flatnonzero(senses == "<=")
        ge = np.flatnonzero(senses == ">=")
        eq = np.flatnonzero(senses == "=")
        ub_rows = np.concatenate([le, ge])
        ub_sign = np.concatenate([np.ones(len(le)), -np.ones(len(ge))])

        A_ub = sparse.diags(ub_sign) @ A[ub_rows] if len(ub_rows) else None
        b_ub = ub_sign * rhs[ub_rows] if len(ub_rows) else None
        A_eq = A[eq] if len(eq) else None
        b_eq = rhs[eq] if len(eq) else None

        sign = 1.0 if lp.sense == "min" else -1.0
        c = sign * lp.objective_vector()
        bounds = [(None if not np.isfinite(v.lower) else v.lower,
                   None if not np.isfinite(v.upper) else v.upper) for v in lp.variables]

        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                      method="highs")
        status = self._STATUS.get(res.status, LpStatus.ITERATION_LIMIT)
        if res.status == 4:
            logger.warning(f"HiGHS reported numerical difficulties: {res.message}")
        iterations = int(getattr(res, "nit", 0) or 0)
        if status != LpStatus.OPTIMAL:
            return LpSolution(status=status, x=np.zeros(lp.n_vars), objective=float("nan"),
                              iterations=iterations)

        x = np.asarray(res.x, dtype=float)
        duals = np.zeros(lp.n_rows)
        ineqlin = getattr(res, "ineqlin", None)
        eqlin = getattr(res, "eqlin", None)
        if ineqlin is not None and len(ub_rows):
            duals[ub_rows] = sign * ub_sign * np.asarray(ineqlin.marginals)
        if eqlin is not None and len(eq):
            duals[eq] = sign * np.asarray(eqlin.marginals)
        return LpSolution(status=status, x=x, objective=float(lp.objective_vector() @ x),
                          duals=duals, iterations=iterations)


register(BundledSimplex())
register(HighsBackend())


# ---------------------------------------------------------------------------
# LP text format (docs/lp_format.md)
# ---------------------------------------------------------------------------

def _fmt(value: float) -> str:
    if value == INF:
        return "inf"
    if value == -INF:
        return "-inf"
    return repr(float(value))


def dump_lp(lp: LinearProgram) -> str:
    lines = ["LP v1", f"SENSE {lp.sense}"]
    for var in lp.variables:
        lines.append(f"VAR {var.name} {_fmt(var.lower)} {_fmt(var.upper)}")
    for j, a in sorted(lp.objective.items()):
        lines.append(f"OBJ {lp.variables[j].name} {_fmt(a)}")
    for row in lp.rows:
        terms = " ".join(f"{lp.variables[j].name} {_fmt(a)}" for j, a in sorted(row.terms.items()))
        lines.append(f"ROW {row.name} {row.sense} {_fmt(row.rhs)} | {terms}".rstrip())
    lines.append("END")
    return "\n".join(lines) + "\n"


def _parse_float(token: str, line: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise LpFormatError(f"bad number {token!r}", line)


def load_lp(text: str) -> LinearProgram:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "LP v1":
        raise LpFormatError("missing 'LP v1' header", 1)
    lp = LinearProgram()
    objective: Dict[int, float] = {}
    ended = False
    for number, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ended:
            raise LpFormatError("content after END", number)
        keyword, _, rest = line.partition(" ")
        try:
            if keyword == "SENSE":
                lp.sense = rest.strip()
                if lp.sense not in ("max", "min"):
                    raise LpFormatError(f"bad sense {lp.sense!r}", number)
            elif keyword == "VAR":
                parts = rest.split()
                if len(parts) != 3:
                    raise LpFormatError("VAR needs name, lower, upper", number)
                lp.add_variable(parts[0], _parse_float(parts[1], number),
                                _parse_float(parts[2], number))
            elif keyword == "OBJ":
                parts = rest.split()
                if len(parts) != 2 or parts[0] not in lp.var_index:
                    raise LpFormatError("OBJ needs a declared variable and a coefficient", number)
                j = lp.var_index[parts[0]]
                objective[j] = objective.get(j, 0.0) + _parse_float(parts[1], number)
            elif keyword == "ROW":
                head, bar, body = rest.partition("|")
                parts = head.split()
                if not bar or len(parts) != 3:
                    raise LpFormatError("ROW needs name, sense, rhs and '|'", number)
                tokens = body.split()
                if len(tokens) % 2:
                    raise LpFormatError("ROW terms must be name/coefficient pairs", number)
                terms = []
                for name, coef in zip(tokens[::2], tokens[1::2]):
                    if name not in lp.var_index:
                        raise LpFormatError(f"undeclared variable {name!r}", number)
                    terms.append((lp.var_index[name], _parse_float(coef, number)))
                lp.add_row(parts[0], terms, parts[1], _parse_float(parts[2], number))
            elif keyword == "END":
                ended = True
            else:
                raise LpFormatError(f"unknown keyword {keyword!r}", number)
        except LpFormatError:
            raise
        except ValueError as e:
            raise LpFormatError(str(e), number) from e
    if not ended:
        raise LpFormatError("missing END", len(lines))
    lp.objective = {j: a for j, a in objective.items() if a != 0.0}
    return lp
