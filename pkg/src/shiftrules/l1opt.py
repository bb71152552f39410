"""Minimum-L1 and minimum-total-variation rule synthesis.

Both syntheses reduce to linear programs over the shift-rule constraint
system and are solved by a self-contained dense two-phase simplex with
Bland's anti-cycling pivot rule.  Problem sizes here are small (at most a
few hundred rows and a couple of thousand columns), where a dense tableau is
simple, fast enough and easy to certify via the reduced costs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (InvalidArgumentError, NoSolutionError,
                     NumericFailureError, UnboundedError)
from .linsys import LinearSystem, ShiftRule, feasible

_PIVOT_TOL = 1e-9
_ENTER_TOL = 1e-8
_DUAL_FEAS_TOL = 1e-7
_MAX_ITER = 200_000
_REFACTOR_EVERY = 64


@dataclass(frozen=True)
class LPResult:
    """Outcome of an LP solve: status is 'optimal', 'infeasible' or 'unbounded'."""

    status: str
    x: np.ndarray | None = None
    objective: float | None = None


def _bland_enter(reduced: np.ndarray) -> int:
    """Lowest-index column with a negative reduced cost, or -1 at optimality."""
    neg = np.nonzero(reduced < -_ENTER_TOL)[0]
    return int(neg[0]) if neg.size else -1


def _bland_leave(tableau: np.ndarray, basis: list[int], col: int,
                 entry_tol: float) -> int:
    """Min-ratio row; ties broken by the lowest basis variable index (Bland).

    Only entries above ``entry_tol`` are eligible pivots; a strict tolerance
    keeps the basis well conditioned through long degenerate pivot chains.
    """
    column = tableau[:-1, col]
    rhs = tableau[:-1, -1]
    best_row = -1
    best_ratio = np.inf
    best_var = -1
    for i in range(column.size):
        if column[i] > entry_tol:
            ratio = rhs[i] / column[i]
            if (ratio < best_ratio - _PIVOT_TOL
                    or (abs(ratio - best_ratio) <= _PIVOT_TOL
                        and (best_var == -1 or basis[i] < best_var))):
                best_row, best_ratio, best_var = i, ratio, basis[i]
    return best_row


def _pivot(tableau: np.ndarray, row: int, col: int) -> None:
    tableau[row, :] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row, :])


def _reduced_tableau(a: np.ndarray, b: np.ndarray, cost: np.ndarray,
                     basis: list[int]) -> np.ndarray:
    """Rebuild the simplex tableau from scratch for the given basis.

    Long pivot chains accumulate roundoff in the running tableau; rebuilding
    from the basis keeps reduced costs trustworthy.
    """
    m, n = a.shape
    base = a[:, basis]
    try:
        binv_a = np.linalg.solve(base, a)
        binv_b = np.linalg.solve(base, b)
    except np.linalg.LinAlgError as exc:
        raise NumericFailureError("singular simplex basis") from exc
    tableau = np.empty((m + 1, n + 1))
    tableau[:m, :n] = binv_a
    tableau[:m, -1] = binv_b
    cb = cost[basis]
    tableau[-1, :n] = cost - cb @ binv_a
    tableau[-1, -1] = -float(cb @ binv_b)
    return tableau


def _run_simplex(a: np.ndarray, b: np.ndarray, cost: np.ndarray,
                 basis: list[int]) -> tuple[str, np.ndarray]:
    """Iterate Bland pivots to optimality on ``min cost@x, a@x=b, x>=0``.

    The tableau is refactorized from the basis every few dozen pivots, and
    any termination decision (optimal or unbounded) is re-checked on a
    freshly built tableau before it is accepted.
    """
    tableau = _reduced_tableau(a, b, cost, basis)
    stale = 0
    for _ in range(_MAX_ITER):
        col = _bland_enter(tableau[-1, :-1])
        if col == -1:
            if stale:
                tableau = _reduced_tableau(a, b, cost, basis)
                stale = 0
                if _bland_enter(tableau[-1, :-1]) != -1:
                    continue
            return "optimal", tableau
        strict = max(_PIVOT_TOL, 1e-7 * float(np.max(tableau[:-1, col],
                                                     initial=0.0)))
        row = _bland_leave(tableau, basis, col, strict)
        if row == -1:
            if stale:
                tableau = _reduced_tableau(a, b, cost, basis)
                stale = 0
                continue
            # Last resort on a clean tableau: allow any positive entry
            # before declaring the direction an unbounded ray.
            row = _bland_leave(tableau, basis, col, _PIVOT_TOL)
            if row == -1:
                return "unbounded", tableau
        _pivot(tableau, row, col)
        basis[row] = col
        stale += 1
        if stale >= _REFACTOR_EVERY:
            tableau = _reduced_tableau(a, b, cost, basis)
            stale = 0
    raise NumericFailureError("simplex iteration limit exceeded")


def simplex_standard(cost: np.ndarray, a: np.ndarray, b: np.ndarray) -> LPResult:
    """Solve ``min cost @ x  s.t.  a @ x = b, x >= 0`` (dense two-phase)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    cost = np.asarray(cost, dtype=float)
    m, n = a.shape
    if cost.shape != (n,) or b.shape != (m,):
        raise InvalidArgumentError("inconsistent LP dimensions")
    a = a.copy()
    flip = b < 0
    a[flip] *= -1.0
    b[flip] *= -1.0

    # Crash: singleton columns with a positive entry can start basic, which
    # spares their rows an artificial variable (and the degenerate phase-1
    # churn that comes with it).
    assigned = np.full(m, -1, dtype=int)
    for j in range(n):
        nz = np.nonzero(np.abs(a[:, j]) > 0.0)[0]
        if nz.size == 1:
            i = int(nz[0])
            if assigned[i] == -1 and a[i, j] > _PIVOT_TOL:
                assigned[i] = j

    # Phase 1: artificials on the remaining rows, minimize their mass.
    art_rows = [i for i in range(m) if assigned[i] == -1]
    art = np.zeros((m, len(art_rows)))
    for t, i in enumerate(art_rows):
        art[i, t] = 1.0
    a_aug = np.hstack([a, art])
    cost_aug = np.concatenate([np.zeros(n), np.ones(len(art_rows))])
    basis = [0] * m
    for i in range(m):
        basis[i] = int(assigned[i]) if assigned[i] != -1 else n + art_rows.index(i)
    status, tableau = _run_simplex(a_aug, b, cost_aug, basis)
    if status != "optimal":
        raise NumericFailureError("phase 1 terminated " + status)
    if -tableau[-1, -1] > 1e-7:
        return LPResult("infeasible")

    # Drive leftover artificials out of the basis or drop redundant rows.
    # The replacement column is the largest-magnitude structural entry not
    # already basic; rows with no usable entry are redundant constraints.
    # Work on a freshly refactorized tableau so the entries are trustworthy.
    if any(v >= n for v in basis):
        tableau = _reduced_tableau(a_aug, b, cost_aug, basis)
    keep = list(range(m))
    for i in range(m):
        if basis[i] >= n:
            candidates = np.abs(tableau[i, :n]).copy()
            candidates[[v for v in basis if v < n]] = 0.0
            col = int(np.argmax(candidates))
            if candidates[col] > 1e-7:
                _pivot(tableau, i, col)
                basis[i] = col
            else:
                keep.remove(i)
    a2 = a[keep, :]
    b2 = b[keep]
    basis = [basis[i] for i in keep]

    # Phase 2: the real objective over the structural columns only.
    status, tableau = _run_simplex(a2, b2, cost, basis)
    if status == "unbounded":
        return LPResult("unbounded")

    x = np.zeros(n)
    for i, var in enumerate(basis):
        x[var] = tableau[i, -1]
    # Optimality certificate: reduced costs of the final tableau.
    if np.min(tableau[-1, :n]) < -_DUAL_FEAS_TOL:
        raise NumericFailureError("dual feasibility check failed at optimum")
    return LPResult("optimal", x, float(cost @ x))


def lp_solve(cost, eq_matrix, eq_rhs, lower=None, upper=None) -> LPResult:
    """General-form LP: ``min cost @ x  s.t.  eq_matrix @ x = eq_rhs, l <= x <= u``.

    Bounds may be finite or infinite (None means unbounded on that side).
    The problem is transformed to standard form: finite lower bounds are
    shifted out, variables bounded above get a slack row and free variables
    are split into positive and negative parts.
    """
    a = np.asarray(eq_matrix, dtype=float)
    b = np.asarray(eq_rhs, dtype=float)
    c = np.asarray(cost, dtype=float)
    if a.ndim != 2:
        raise InvalidArgumentError("eq_matrix must be 2-D")
    m, n = a.shape
    lo = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    hi = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
    if lo.shape != (n,) or hi.shape != (n,) or c.shape != (n,):
        raise InvalidArgumentError("inconsistent LP dimensions")
    if np.any(lo > hi):
        return LPResult("infeasible")

    # Column-wise transformation bookkeeping: each original variable maps to
    # one or two standard-form columns plus a constant offset.
    cols: list[np.ndarray] = []
    costs: list[float] = []
    recover: list[tuple] = []  # (kind, col_index[, col_index2, const])
    offset = b.astype(float).copy()
    extra_rows: list[tuple[int, float]] = []  # (column, upper-minus-lower)

    for j in range(n):
        aj = a[:, j]
        if np.isfinite(lo[j]):
            offset -= aj * lo[j]
            cols.append(aj)
            costs.append(c[j])
            recover.append(("shift", len(cols) - 1, lo[j]))
            if np.isfinite(hi[j]):
                extra_rows.append((len(cols) - 1, hi[j] - lo[j]))
        elif np.isfinite(hi[j]):
            # x = u - y with y >= 0
            offset -= aj * hi[j]
            cols.append(-aj)
            costs.append(-c[j])
            recover.append(("mirror", len(cols) - 1, hi[j]))
        else:
            cols.append(aj)
            costs.append(c[j])
            cols.append(-aj)
            costs.append(-c[j])
            recover.append(("free", len(cols) - 2, len(cols) - 1))

    n_std = len(cols)
    a_std = np.column_stack(cols) if n_std else np.zeros((m, 0))
    b_std = offset
    c_std = np.asarray(costs)
    if extra_rows:
        # y_j + s = u - l rows for doubly-bounded variables.
        n_slack = len(extra_rows)
        a_top = np.hstack([a_std, np.zeros((m, n_slack))])
        a_bot = np.zeros((n_slack, n_std + n_slack))
        b_bot = np.zeros(n_slack)
        for r, (j, span) in enumerate(extra_rows):
            a_bot[r, j] = 1.0
            a_bot[r, n_std + r] = 1.0
            b_bot[r] = span
        a_std = np.vstack([a_top, a_bot])
        b_std = np.concatenate([b_std, b_bot])
        c_std = np.concatenate([c_std, np.zeros(n_slack)])

    base = simplex_standard(c_std, a_std, b_std)
    if base.status != "optimal":
        return base
    x = np.zeros(n)
    for j, item in enumerate(recover):
        if item[0] == "shift":
            x[j] = base.x[item[1]] + item[2]
        elif item[0] == "mirror":
            x[j] = item[2] - base.x[item[1]]
        else:
            x[j] = base.x[item[1]] - base.x[item[2]]
    return LPResult("optimal", x, float(c @ x))


def solve_l1(system: LinearSystem) -> ShiftRule:
    """Rule of minimum total coefficient mass subject to the constraints.

    Uses the standard split c = u - v with u, v >= 0 and cost sum(u + v);
    at the optimum u and v have disjoint support so the objective equals
    ||c||_1.
    """
    if not feasible(system):
        raise NoSolutionError("shift-rule system is infeasible")
    a = system.matrix
    m, n = a.shape
    res = simplex_standard(np.ones(2 * n), np.hstack([a, -a]), system.rhs)
    if res.status == "infeasible":
        raise NoSolutionError("LP reported an infeasible system")
    if res.status == "unbounded":
        raise UnboundedError("L1 synthesis cannot be unbounded")
    coeffs = res.x[:n] - res.x[n:]
    residual = np.max(np.abs(a @ coeffs - system.rhs)) if m else 0.0
    if residual > 1e-8:
        raise NumericFailureError(
            f"L1 solution residual {residual:.3e} exceeds 1e-8")
    return ShiftRule(system.shifts, tuple(coeffs.tolist()),
                     symmetric=system.symmetric, source="L1")


def solve_tv(system: LinearSystem) -> ShiftRule:
    """Rule minimizing the total variation ``sum_p |c_{p+1} - c_p|``.

    Differences run over consecutive shifts in grid order with no wraparound
    term.  The coefficients stay as free variables; each difference gets a
    pair of nonnegative magnitude variables.
    """
    if not feasible(system):
        raise NoSolutionError("shift-rule system is infeasible")
    order = np.argsort(system.shifts)
    a = system.matrix[:, order]
    m, n = a.shape
    k = max(n - 1, 0)
    # Variables: [c (free, n)] [d+ (k)] [d- (k)] with
    # c_{p+1} - c_p - d+_p + d-_p = 0.
    eq = np.zeros((m + k, n + 2 * k))
    eq[:m, :n] = a
    rhs = np.concatenate([system.rhs, np.zeros(k)])
    for p in range(k):
        eq[m + p, p] = -1.0
        eq[m + p, p + 1] = 1.0
        eq[m + p, n + p] = -1.0
        eq[m + p, n + k + p] = 1.0
    cost = np.concatenate([np.zeros(n), np.ones(2 * k)])
    lower = np.concatenate([np.full(n, -np.inf), np.zeros(2 * k)])
    res = lp_solve(cost, eq, rhs, lower=lower, upper=None)
    if res.status == "infeasible":
        raise NoSolutionError("LP reported an infeasible system")
    if res.status == "unbounded":
        raise UnboundedError("TV synthesis cannot be unbounded")
    coeffs_sorted = res.x[:n]
    residual = np.max(np.abs(a @ coeffs_sorted - system.rhs)) if m else 0.0
    if residual > 1e-8:
        raise NumericFailureError(
            f"TV solution residual {residual:.3e} exceeds 1e-8")
    coeffs = np.empty(n)
    coeffs[order] = coeffs_sorted
    return ShiftRule(system.shifts, tuple(coeffs.tolist()),
                     symmetric=system.symmetric, source="TV")


def total_variation(rule: ShiftRule) -> float:
    """``sum_p |c_{p+1} - c_p|`` over the rule's shifts in sorted order."""
    if len(rule) < 2:
        return 0.0
    order = np.argsort(rule.shifts)
    c = np.asarray(rule.coefficients)[order]
    return float(np.sum(np.abs(np.diff(c))))


def sign_changes(coefficients, tol_fraction: float = 1e-7) -> int:
    """Sign flips along the coefficient profile, ignoring near-zero entries.

    This is the operational clustering metric used to compare TV against L1
    solutions: clustered solutions flip sign less often along the grid.
    """
    c = np.asarray(coefficients, dtype=float)
    if c.size == 0:
        return 0
    cutoff = tol_fraction * np.max(np.abs(c), initial=0.0)
    signs = np.sign(c[np.abs(c) > cutoff])
    return int(np.sum(signs[1:] != signs[:-1]))
