"""Conic program data model and solve contract.

A :class:`ConicProgram` is a linear-cost optimization over linear equalities,
nonnegative variables, and second-order cones:

    minimize    c^T x
    subject to  A x = b
                x[i] >= 0              for i in nonneg indices
                x[t] >= || x[xs] ||_2  for each cone (t, xs)

Equalities are stored in sparse triplet form since the subproblems produced
by the trajectory stack are block-banded in the node index.  Programs are
immutable values; every mutation-shaped operation returns a new program.
The solve backend is Clarabel, a native interior-point conic solver, kept
behind :func:`solve` so nothing else in the package depends on it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

import clarabel

DEFAULT_TOL = 1e-8

__all__ = [
    "DEFAULT_TOL",
    "ConicProgram",
    "ProgramBuilder",
    "SolveResult",
    "SolveStatus",
    "add_abs_penalty",
    "add_quadratic_epigraph",
    "dump_program",
    "load_program",
    "solve",
]


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITERATIONS = "max_iterations"


def _frozen(a, dtype) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class ConicProgram:
    """Immutable conic program in equality/nonneg/SOC standard form.

    Attributes
    ----------
    num_vars : int
        Total decision-variable count.
    objective : (num_vars,) float array
        Dense cost coefficients.
    eq_rows, eq_cols, eq_vals : int/int/float arrays
        Triplet storage of the equality matrix A.
    eq_rhs : (num_rows,) float array
        Right-hand side b; its length defines the equality row count.
    cones : tuple of (t_index, x_indices)
        Each entry enforces x[t] >= ||x[list(x_indices)]||_2.
    nonneg : tuple of int
        Indices of variables constrained to be >= 0.
    """

    num_vars: int
    objective: np.ndarray
    eq_rows: np.ndarray
    eq_cols: np.ndarray
    eq_vals: np.ndarray
    eq_rhs: np.ndarray
    cones: tuple[tuple[int, tuple[int, ...]], ...] = ()
    nonneg: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "objective", _frozen(self.objective, float))
        object.__setattr__(self, "eq_rows", _frozen(self.eq_rows, np.int64))
        object.__setattr__(self, "eq_cols", _frozen(self.eq_cols, np.int64))
        object.__setattr__(self, "eq_vals", _frozen(self.eq_vals, float))
        object.__setattr__(self, "eq_rhs", _frozen(self.eq_rhs, float))
        object.__setattr__(
            self,
            "cones",
            tuple((int(t), tuple(int(i) for i in xs)) for t, xs in self.cones),
        )
        object.__setattr__(self, "nonneg", tuple(int(i) for i in self.nonneg))
        self._validate()

    def _validate(self):
        n = self.num_vars
        if n < 0:
            raise ValueError("num_vars must be nonnegative")
        if self.objective.shape != (n,):
            raise ValueError("objective length must equal num_vars")
        if not (len(self.eq_rows) == len(self.eq_cols) == len(self.eq_vals)):
            raise ValueError("triplet arrays must have equal length")
        m = len(self.eq_rhs)
        if len(self.eq_rows) and (self.eq_rows.min() < 0 or self.eq_rows.max() >= m):
            raise ValueError("equality row index out of range")
        if len(self.eq_cols) and (self.eq_cols.min() < 0 or self.eq_cols.max() >= n):
            raise ValueError("equality column index out of range")
        for t, xs in self.cones:
            if not xs:
                raise ValueError("cone must reference at least one x variable")
            for i in (t, *xs):
                if not 0 <= i < n:
                    raise ValueError(f"cone index {i} out of range")
        for i in self.nonneg:
            if not 0 <= i < n:
                raise ValueError(f"nonneg index {i} out of range")

    @property
    def num_eq_rows(self) -> int:
        return len(self.eq_rhs)

    def eq_matrix(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(
            (self.eq_vals, (self.eq_rows, self.eq_cols)),
            shape=(self.num_eq_rows, self.num_vars),
        )

    def residuals(self, x: np.ndarray) -> tuple[float, float, float]:
        """Max equality, cone, and nonnegativity violations at a point x."""
        eq = 0.0
        if self.num_eq_rows:
            eq = float(np.max(np.abs(self.eq_matrix() @ x - self.eq_rhs)))
        cone = 0.0
        for t, xs in self.cones:
            cone = max(cone, float(np.linalg.norm(x[list(xs)]) - x[t]))
        nn = 0.0
        if self.nonneg:
            nn = max(nn, float(np.max(-x[list(self.nonneg)])))
        return eq, max(cone, 0.0), max(nn, 0.0)


@dataclass(frozen=True)
class SolveResult:
    """Outcome of a conic solve; primal is present iff status is OPTIMAL."""

    status: SolveStatus
    primal: np.ndarray | None
    objective_value: float | None
    solve_time: float

    def __post_init__(self):
        if (self.status is SolveStatus.OPTIMAL) != (self.primal is not None):
            raise ValueError("primal must be present exactly when status is OPTIMAL")


class ProgramBuilder:
    """Mutable accumulator used to assemble a ConicProgram incrementally."""

    def __init__(self, num_vars: int = 0):
        self.num_vars = num_vars
        self.objective: dict[int, float] = {}
        self.eq_rows: list[int] = []
        self.eq_cols: list[int] = []
        self.eq_vals: list[float] = []
        self.eq_rhs: list[float] = []
        self.cones: list[tuple[int, tuple[int, ...]]] = []
        self.nonneg: list[int] = []

    @classmethod
    def from_program(cls, p: ConicProgram) -> "ProgramBuilder":
        b = cls(p.num_vars)
        b.objective = {int(i): float(c) for i, c in enumerate(p.objective) if c != 0.0}
        b.eq_rows = list(p.eq_rows)
        b.eq_cols = list(p.eq_cols)
        b.eq_vals = list(p.eq_vals)
        b.eq_rhs = list(p.eq_rhs)
        b.cones = list(p.cones)
        b.nonneg = list(p.nonneg)
        return b

    def add_vars(self, n: int) -> int:
        """Append n variables, returning the index of the first one."""
        start = self.num_vars
        self.num_vars += n
        return start

    def add_cost(self, idx: int, coeff: float):
        self.objective[idx] = self.objective.get(idx, 0.0) + float(coeff)

    def add_eq(self, cols: Iterable[int], vals: Iterable[float], rhs: float) -> int:
        """Append one equality row sum_j vals[j] * x[cols[j]] = rhs."""
        r = len(self.eq_rhs)
        for c, v in zip(cols, vals):
            if v != 0.0:
                self.eq_rows.append(r)
                self.eq_cols.append(int(c))
                self.eq_vals.append(float(v))
        self.eq_rhs.append(float(rhs))
        return r

    def add_ineq(self, cols: Iterable[int], vals: Iterable[float], ub: float) -> int:
        """Append sum_j vals[j] * x[cols[j]] <= ub via a nonnegative slack."""
        s = self.add_vars(1)
        self.nonneg.append(s)
        self.add_eq(list(cols) + [s], list(vals) + [1.0], ub)
        return s

    def add_cone(self, t: int, xs: Sequence[int]):
        self.cones.append((int(t), tuple(int(i) for i in xs)))

    def add_nonneg(self, idxs: Iterable[int]):
        self.nonneg.extend(int(i) for i in idxs)

    def pin(self, idx: int, value: float):
        """Fix a variable with an equality row."""
        self.add_eq([idx], [1.0], value)

    def build(self) -> ConicProgram:
        obj = np.zeros(self.num_vars)
        for i, c in self.objective.items():
            obj[i] = c
        return ConicProgram(
            num_vars=self.num_vars,
            objective=obj,
            eq_rows=np.asarray(self.eq_rows, dtype=np.int64),
            eq_cols=np.asarray(self.eq_cols, dtype=np.int64),
            eq_vals=np.asarray(self.eq_vals, dtype=float),
            eq_rhs=np.asarray(self.eq_rhs, dtype=float),
            cones=tuple(self.cones),
            nonneg=tuple(self.nonneg),
        )


def psd_factor(W: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Factor a symmetric PSD matrix as W = L^T L, dropping null directions.

    Raises ValueError when W is not symmetric positive semi-definite.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError("weight matrix must be square")
    if not np.allclose(W, W.T, atol=1e-12 * max(1.0, np.abs(W).max(initial=1.0))):
        raise ValueError("weight matrix must be symmetric")
    evals, evecs = np.linalg.eigh(W)
    scale = max(1.0, float(evals.max(initial=0.0)))
    if evals.min(initial=0.0) < -tol * scale:
        raise ValueError("weight matrix must be positive semi-definite")
    keep = evals > tol * scale
    return (np.sqrt(evals[keep])[:, None] * evecs[:, keep].T)


def emit_quadratic_epigraph(
    b: ProgramBuilder,
    W: np.ndarray,
    var_indices: Sequence[int],
    epigraph_index: int,
    offset: np.ndarray | None = None,
):
    """Add rows/cone encoding x[epi] >= (v - offset)^T W (v - offset).

    Uses the standard second-order-cone form ||(y, (1-s)/2)|| <= (1+s)/2
    with y = L (v - offset) and W = L^T L.
    """
    idxs = [int(i) for i in var_indices]
    L = psd_factor(W)
    if L.shape[1] != len(idxs):
        raise ValueError("weight matrix size must match var_indices")
    off = np.zeros(len(idxs)) if offset is None else np.asarray(offset, dtype=float)
    m = L.shape[0]
    y = b.add_vars(m)
    shift = L @ off
    for i in range(m):
        # y_i - L[i] @ v = -(L @ offset)_i
        b.add_eq([y + i, *idxs], [1.0, *(-L[i])], -shift[i])
    t = b.add_vars(1)
    x0 = b.add_vars(1)
    b.add_eq([t, epigraph_index], [1.0, -0.5], 0.5)   # t = (1+s)/2
    b.add_eq([x0, epigraph_index], [1.0, 0.5], 0.5)   # x0 = (1-s)/2
    b.add_cone(t, list(range(y, y + m)) + [x0])


def emit_abs_penalty(b: ProgramBuilder, weights, var_indices: Sequence[int]):
    """Add split slacks pricing sum_i w_i * |x[idx_i]| into the objective."""
    idxs = [int(i) for i in var_indices]
    w = np.broadcast_to(np.asarray(weights, dtype=float), (len(idxs),))
    if np.any(w < 0):
        raise ValueError("absolute-value penalty weights must be nonnegative")
    pos = b.add_vars(len(idxs))
    neg = b.add_vars(len(idxs))
    b.add_nonneg(range(pos, pos + len(idxs)))
    b.add_nonneg(range(neg, neg + len(idxs)))
    for j, i in enumerate(idxs):
        b.add_eq([i, pos + j, neg + j], [1.0, -1.0, 1.0], 0.0)  # v = p - n
        b.add_cost(pos + j, w[j])
        b.add_cost(neg + j, w[j])


def add_quadratic_epigraph(
    p: ConicProgram,
    W: np.ndarray,
    var_indices: Sequence[int],
    epigraph_index: int,
    offset: np.ndarray | None = None,
) -> ConicProgram:
    """Return a new program with a cone encoding s >= dz^T W dz.

    dz is x[var_indices] minus the optional offset.  W must be symmetric
    positive semi-definite.
    """
    b = ProgramBuilder.from_program(p)
    emit_quadratic_epigraph(b, W, var_indices, epigraph_index, offset)
    return b.build()


def add_abs_penalty(p: ConicProgram, weights, var_indices: Sequence[int]) -> ConicProgram:
    """Return a new program whose objective gains sum_i w_i |x_i| exactly."""
    b = ProgramBuilder.from_program(p)
    emit_abs_penalty(b, weights, var_indices)
    return b.build()


_STATUS_MAP = {
    "Solved": SolveStatus.OPTIMAL,
    "PrimalInfeasible": SolveStatus.INFEASIBLE,
    "DualInfeasible": SolveStatus.UNBOUNDED,
}


def solve(p: ConicProgram, tol: float = DEFAULT_TOL) -> SolveResult:
    """Solve a conic program through the Clarabel backend.

    Any backend outcome other than solved/infeasible/unbounded (including
    reduced-accuracy and numerical-failure terminations) is reported as
    MAX_ITERATIONS rather than raised.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = p.num_vars

    # Constraint block: [equalities; nonneg selections; one block per cone],
    # all expressed as A x + s = b with s in the matching cone.
    rows = [np.asarray(p.eq_rows, dtype=np.int64)]
    cols = [np.asarray(p.eq_cols, dtype=np.int64)]
    vals = [np.asarray(p.eq_vals, dtype=float)]
    rhs = [np.asarray(p.eq_rhs, dtype=float)]
    cones_out: list = [clarabel.ZeroConeT(p.num_eq_rows)] if p.num_eq_rows else []
    r = p.num_eq_rows
    if p.nonneg:
        nn = np.asarray(p.nonneg, dtype=np.int64)
        rows.append(np.arange(r, r + len(nn)))
        cols.append(nn)
        vals.append(np.full(len(nn), -1.0))
        rhs.append(np.zeros(len(nn)))
        cones_out.append(clarabel.NonnegativeConeT(len(nn)))
        r += len(nn)
    for t, xs in p.cones:
        sel = np.array([t, *xs], dtype=np.int64)
        rows.append(np.arange(r, r + len(sel)))
        cols.append(sel)
        vals.append(np.full(len(sel), -1.0))
        rhs.append(np.zeros(len(sel)))
        cones_out.append(clarabel.SecondOrderConeT(len(sel)))
        r += len(sel)

    A = sparse.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(r, n),
    )
    b = np.concatenate(rhs)
    P = sparse.csc_matrix((n, n))

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_feas = tol
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol

    sol = clarabel.DefaultSolver(P, np.asarray(p.objective, dtype=float), A, b, cones_out, settings).solve()
    status = _STATUS_MAP.get(str(sol.status), SolveStatus.MAX_ITERATIONS)
    if status is SolveStatus.OPTIMAL:
        return SolveResult(status, np.asarray(sol.x, dtype=float), float(sol.obj_val), float(sol.solve_time))
    return SolveResult(status, None, None, float(sol.solve_time))


def dump_program(p: ConicProgram) -> str:
    """Dump a program to a line-oriented text form for cross-solver diffing.

    Floats are written with repr, which round-trips bit-exactly.
    """
    out = ["conic-program v1", f"vars {p.num_vars}", f"rows {p.num_eq_rows}"]
    for i, c in enumerate(p.objective):
        if c != 0.0:
            out.append(f"obj {i} {float(c)!r}")
    for r, c, v in zip(p.eq_rows, p.eq_cols, p.eq_vals):
        out.append(f"a {r} {c} {float(v)!r}")
    for r, v in enumerate(p.eq_rhs):
        if v != 0.0:
            out.append(f"b {r} {float(v)!r}")
    for t, xs in p.cones:
        out.append("cone " + " ".join(str(i) for i in (t, *xs)))
    if p.nonneg:
        out.append("nonneg " + " ".join(str(i) for i in p.nonneg))
    return "\n".join(out) + "\n"


def load_program(text: str) -> ConicProgram:
    """Parse the text form produced by :func:`dump_program`."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != "conic-program v1":
        raise ValueError("not a conic-program dump")
    num_vars = 0
    num_rows = 0
    obj: dict[int, float] = {}
    rows, cols, vals = [], [], []
    rhs: dict[int, float] = {}
    cones = []
    nonneg: tuple[int, ...] = ()
    for ln in lines[1:]:
        tok = ln.split()
        kind = tok[0]
        if kind == "vars":
            num_vars = int(tok[1])
        elif kind == "rows":
            num_rows = int(tok[1])
        elif kind == "obj":
            obj[int(tok[1])] = float(tok[2])
        elif kind == "a":
            rows.append(int(tok[1]))
            cols.append(int(tok[2]))
            vals.append(float(tok[3]))
        elif kind == "b":
            rhs[int(tok[1])] = float(tok[2])
        elif kind == "cone":
            idx = [int(i) for i in tok[1:]]
            cones.append((idx[0], tuple(idx[1:])))
        elif kind == "nonneg":
            nonneg = tuple(int(i) for i in tok[1:])
        else:
            raise ValueError(f"unknown record {kind!r}")
    objective = np.zeros(num_vars)
    for i, c in obj.items():
        objective[i] = c
    rhs_vec = np.zeros(num_rows)
    for r, v in rhs.items():
        rhs_vec[r] = v
    return ConicProgram(
        num_vars=num_vars,
        objective=objective,
        eq_rows=np.asarray(rows, dtype=np.int64),
        eq_cols=np.asarray(cols, dtype=np.int64),
        eq_vals=np.asarray(vals, dtype=float),
        eq_rhs=rhs_vec,
        cones=tuple(cones),
        nonneg=nonneg,
    )
