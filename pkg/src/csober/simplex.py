"""Dense two-phase revised simplex returning basic (vertex) solutions.

Solves::

    minimise    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                x >= 0

Pricing is Dantzig's rule; after a run of degenerate pivots the solver
switches to Bland's smallest-index rule, which cannot cycle, and switches
back once the objective moves again. The basis inverse is kept explicitly
and refactorised periodically.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailure, SolverStall

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
REFACTOR_EVERY = 64
DEGENERATE_RUN = 30


class InfeasibleProblem(NumericalFailure):
    pass


class UnboundedProblem(NumericalFailure):
    pass


@dataclass
class SimplexResult:
    x: np.ndarray          # structural variables only
    fun: float
    basis: np.ndarray      # structural indices that are basic
    nit: int


def _row_scale(A: np.ndarray, b: np.ndarray):
    s = np.max(np.abs(A), axis=1) if A.shape[1] else np.ones(A.shape[0])
    s = np.where(s > 0, s, 1.0)
    return A / s[:, None], b / s


class _Tableau:
    """Standard-form state ``A x = b, x >= 0`` with an explicit basis inverse."""

    def __init__(self, A: np.ndarray, b: np.ndarray, basis: np.ndarray):
        self.A = A
        self.b = b
        self.basis = basis
        self.refactor()

    def refactor(self):
        # ill-conditioned bases are also flagged here
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular simplex basis") from exc
        self.xB = self.Binv @ self.b

    def run(self, c: np.ndarray, allowed: np.ndarray, tol: float, max_iter: int, nit: int = 0) -> int:
        bland = False
        degenerate = 0
        since_refactor = 0
        while True:
            if nit >= max_iter:
                raise SolverStall(f"simplex exceeded {max_iter} iterations")
            y = c[self.basis] @ self.Binv
            d = c - y @ self.A
            d[self.basis] = 0.0
            d[~allowed] = 0.0
            if bland:
                cand = np.flatnonzero(d < -tol)
                q = cand[0] if cand.size else -1
            else:
                q = int(np.argmin(d))
                if d[q] >= -tol:
                    q = -1
            if q < 0:
                # optimality claimed: confirm against a fresh factorisation
                if since_refactor == 0:
                    return nit
                self.refactor()
                since_refactor = 0
                continue
            u = self.Binv @ self.A[:, q]
            rows = np.flatnonzero(u > PIVOT_TOL)
            if rows.size == 0:
                raise UnboundedProblem("LP is unbounded")
            xb = np.maximum(self.xB[rows], 0.0)
            ratios = xb / u[rows]
            theta = ratios.min()
            ties = rows[ratios <= theta + 1e-12 * (1.0 + theta)]
            if bland:
                r = ties[np.argmin(self.basis[ties])]
            else:
                r = ties[np.argmax(u[ties])]
            theta = max(self.xB[r], 0.0) / u[r]
            # pivot
            self.xB = self.xB - theta * u
            self.xB[r] = theta
            pivot_row = self.Binv[r] / u[r]
            self.Binv -= np.outer(u, pivot_row)
            self.Binv[r] = pivot_row
            self.basis[r] = q
            nit += 1
            since_refactor += 1
            if since_refactor >= REFACTOR_EVERY:
                self.refactor()
                since_refactor = 0
            if theta <= 1e-12:
                degenerate += 1
                if degenerate >= DEGENERATE_RUN:
                    bland = True
            else:
                degenerate = 0
                bland = False


def solve_simplex(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, max_iter: int | None = None,
                  tol: float = 1e-10) -> SimplexResult:
    """Minimise ``c @ x`` over the polyhedron; returns a vertex of the feasible set."""
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    A_ub, b_ub = _row_scale(A_ub, b_ub)
    A_eq, b_eq = _row_scale(A_eq, b_eq)
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # slack columns; flip rows with negative rhs so that b >= 0
    sign_ub = np.where(b_ub < 0, -1.0, 1.0)
    sign_eq = np.where(b_eq < 0, -1.0, 1.0)
    A_rows = np.vstack([A_ub * sign_ub[:, None], A_eq * sign_eq[:, None]])
    b = np.concatenate([b_ub * sign_ub, b_eq * sign_eq])
    slack = np.zeros((m, m_ub))
    slack[np.arange(m_ub), np.arange(m_ub)] = sign_ub
    needs_art = np.concatenate([sign_ub < 0, np.ones(m_eq, dtype=bool)])
    art_rows = np.flatnonzero(needs_art)
    art = np.zeros((m, art_rows.size))
    art[art_rows, np.arange(art_rows.size)] = 1.0
    A = np.hstack([A_rows, slack, art])
    n_total = A.shape[1]
    first_slack, first_art = n, n + m_ub

    basis = np.empty(m, dtype=int)
    basis[art_rows] = first_art + np.arange(art_rows.size)
    slack_rows = np.flatnonzero(~needs_art)
    basis[slack_rows] = first_slack + slack_rows
    if max_iter is None:
        max_iter = max(5000, 20 * (m + n_total))

    tab = _Tableau(A, b, basis)
    nit = 0
    if art_rows.size:
        c1 = np.zeros(n_total)
        c1[first_art:] = 1.0
        nit = tab.run(c1, np.ones(n_total, dtype=bool), 1e-11, max_iter)
        tab.refactor()
        infeas = float(np.sum(np.maximum(tab.xB[tab.basis >= first_art], 0.0)))
        if infeas > 1e-9 * (1.0 + np.abs(b).max()):
            raise InfeasibleProblem(f"LP infeasible (phase-one residual {infeas:.3g})")
        # drive remaining artificials out of the basis, dropping redundant rows
        keep = np.ones(m, dtype=bool)
        for r in np.flatnonzero(tab.basis >= first_art):
            row = tab.Binv[r] @ A[:, :first_art]
            row[tab.basis[tab.basis < first_art]] = 0.0
            j = int(np.argmax(np.abs(row)))
            if abs(row[j]) > PIVOT_TOL:
                tab.basis[r] = j
                tab.refactor()
            else:
                keep[r] = False
        if not keep.all():
            A = A[keep]
            b = b[keep]
            tab = _Tableau(A, b, tab.basis[keep].copy())
    c2 = np.zeros(n_total)
    c2[:n] = c
    allowed = np.ones(n_total, dtype=bool)
    allowed[first_art:] = False
    scale = max(1.0, float(np.abs(c).max()) if n else 1.0)
    nit = tab.run(c2, allowed, tol * scale, max_iter, nit)
    tab.refactor()
    xB = np.where(tab.xB < 0, 0.0, tab.xB)
    x = np.zeros(n_total)
    x[tab.basis] = xB
    struct = tab.basis[tab.basis < n]
    logger.debug("simplex: m=%d n=%d iterations=%d", m, n, nit)
    return SimplexResult(x[:n], float(c @ x[:n]), np.sort(struct), nit)


def solve_highs(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, **_) -> SimplexResult:
    """Adapter for scipy's HiGHS dual simplex; also yields vertex solutions."""
    from scipy.optimize import linprog

    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs-ds")
    if res.status == 1:
        raise SolverStall(res.message)
    if res.status != 0:
        raise NumericalFailure(res.message)
    x = np.maximum(res.x, 0.0)
    return SimplexResult(x, float(np.dot(c, x)), np.flatnonzero(x > 0), int(res.nit))


SOLVERS = {"simplex": solve_simplex, "highs": solve_highs}
