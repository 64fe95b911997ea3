"""Diagonal-Hessian quadratic programs over linear constraints and box bounds.

    minimize    (1/2) v' diag(d) v + q' v
    subject to  A_eq v = b_eq,   A_in v <= b_in,   lo <= v <= hi

Solved by an operator-splitting iteration: a linear KKT step on the smooth
part alternates with projection onto the stacked constraint interval. The
KKT factorization is computed once per structure and cached, so resolving
after a change of the linear cost (the only thing an outer ADMM iteration
changes) is cheap; warm starts carry (v, z, lam) across solves. A final
active-set polish tightens residuals well below the iteration tolerance.

Constraint rows are normalized to unit infinity-norm before iterating; all
reported residuals refer to the original, unscaled data. Everything here is
deterministic: identical inputs produce identical iterate sequences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "QuadraticProgram",
    "QpSolution",
    "QpWorkspace",
    "solve_qp",
    "InfeasibleSubproblemError",
]


class InfeasibleSubproblemError(RuntimeError):
    """Raised by callers for whom an infeasible subproblem is fatal."""


def _empty_system(n):
    return sp.csr_matrix((0, n)), np.zeros(0)


@dataclass
class QuadraticProgram:
    """Problem data. Constraint matrices are sparse row structures."""

    d: np.ndarray
    q: np.ndarray
    a_eq: sp.spmatrix | None = None
    b_eq: np.ndarray | None = None
    a_in: sp.spmatrix | None = None
    b_in: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        n = len(self.d)
        if len(self.q) != n:
            raise ValueError("d and q must have the same length")
        if not np.isfinite(self.d).all() or (self.d < 0).any():
            raise ValueError("d must be finite and nonnegative")
        if self.a_eq is None:
            self.a_eq, self.b_eq = _empty_system(n)
        else:
            self.a_eq = sp.csr_matrix(self.a_eq)
            self.b_eq = np.asarray(self.b_eq, dtype=float)
        if self.a_in is None:
            self.a_in, self.b_in = _empty_system(n)
        else:
            self.a_in = sp.csr_matrix(self.a_in)
            self.b_in = np.asarray(self.b_in, dtype=float)
        if self.a_eq.shape[1] != n or self.a_in.shape[1] != n:
            raise ValueError("constraint matrices must have n columns")
        if self.a_eq.shape[0] != len(self.b_eq) or self.a_in.shape[0] != len(self.b_in):
            raise ValueError("rhs length must match row count")
        self.lo = np.full(n, -np.inf) if self.lo is None else np.asarray(self.lo, dtype=float)
        self.hi = np.full(n, np.inf) if self.hi is None else np.asarray(self.hi, dtype=float)
        if len(self.lo) != n or len(self.hi) != n:
            raise ValueError("box bounds must have length n")
        if (self.lo > self.hi).any():
            raise ValueError("box bounds must satisfy lo <= hi")

    @property
    def n(self):
        return len(self.d)


@dataclass
class QpSolution:
    """Primal point, KKT residuals on the original data, and solver status.

    ``stationarity`` is the infinity norm of the Lagrangian gradient plus any
    dual-sign violation; when status is "solved" all residuals are at or
    below the requested tolerance. ``z`` and ``lam`` are the splitting state
    kept for warm starts.
    """

    v: np.ndarray
    eq_residual: float
    in_violation: float
    stationarity: float
    iterations: int
    status: str
    z: np.ndarray = field(repr=False, default=None)
    lam: np.ndarray = field(repr=False, default=None)

    @property
    def max_residual(self):
        return max(self.eq_residual, self.in_violation, self.stationarity)


class QpWorkspace:
    """Cached scaled/stacked system and KKT factorization for one structure.

    Reuse across solves whose constraint data and diagonal are unchanged;
    ``solve_with`` accepts a freshly built QuadraticProgram and swaps in its
    linear cost, rebuilding only when the structure actually changed.
    """

    SIGMA = 1e-6
    ALPHA = 1.6
    EQ_RHO_FACTOR = 1e3
    CHECK_EVERY = 25
    RHO_MIN, RHO_MAX = 1e-6, 1e6

    def __init__(self, qp, rho0=0.1):
        self._lu = None
        self._rho_base = rho0
        self._attach(qp)

    # -- structure handling ------------------------------------------------

    def _attach(self, qp):
        self.qp = qp
        n = qp.n
        m_eq = qp.a_eq.shape[0]
        m_in = qp.a_in.shape[0]
        scale_eq = _row_scales(qp.a_eq)
        scale_in = _row_scales(qp.a_in)
        a_rows = sp.vstack(
            [
                sp.diags(1.0 / scale_eq) @ qp.a_eq if m_eq else qp.a_eq,
                sp.diags(1.0 / scale_in) @ qp.a_in if m_in else qp.a_in,
                sp.identity(n, format="csr"),
            ],
            format="csc",
        )
        self.a = a_rows
        self.a_csr = a_rows.tocsr()
        self.row_scale = np.concatenate([scale_eq, scale_in, np.ones(n)])
        self.l = np.concatenate([qp.b_eq / scale_eq, np.full(m_in, -np.inf), qp.lo])
        self.u = np.concatenate([qp.b_eq / scale_eq, qp.b_in / scale_in, qp.hi])
        self.m_eq, self.m_in, self.n = m_eq, m_in, n
        self.m_total = m_eq + m_in + n
        self._is_eq = np.zeros(self.m_total, dtype=bool)
        self._is_eq[:m_eq] = True
        self._refactor()

    def _refactor(self):
        rho = np.full(self.m_total, self._rho_base)
        rho[self._is_eq] *= self.EQ_RHO_FACTOR
        self.rho = rho
        kkt = sp.bmat(
            [
                [sp.diags(self.qp.d + self.SIGMA), self.a.T],
                [self.a, sp.diags(-1.0 / rho)],
            ],
            format="csc",
        )
        self._lu = spla.splu(kkt)

    def matches(self, qp):
        """True when qp shares this workspace's structure (everything but q)."""
        mine = self.qp
        return (
            qp.n == mine.n
            and np.array_equal(qp.d, mine.d)
            and np.array_equal(qp.lo, mine.lo)
            and np.array_equal(qp.hi, mine.hi)
            and _same_matrix(qp.a_eq, mine.a_eq)
            and np.array_equal(qp.b_eq, mine.b_eq)
            and _same_matrix(qp.a_in, mine.a_in)
            and np.array_equal(qp.b_in, mine.b_in)
        )

    def solve_with(self, qp, tol=1e-6, max_iters=20000, warm=None):
        """Solve a QP that usually shares this workspace's structure."""
        if self.matches(qp):
            self.qp = qp  # adopt the new linear cost
        else:
            self._attach(qp)
        return self.solve(tol=tol, max_iters=max_iters, warm=warm)

    # -- main iteration ----------------------------------------------------

    def solve(self, tol=1e-6, max_iters=20000, warm=None):
        qp = self.qp
        n, m_total = self.n, self.m_total
        q = qp.q
        a_csr = self.a_csr
        l, u = self.l, self.u

        if warm is not None and warm.z is not None and len(warm.v) == n \
                and len(warm.z) == m_total:
            x = warm.v.copy()
            z = warm.z.copy()
            lam = warm.lam.copy()
        else:
            x = np.zeros(n)
            z = np.clip(a_csr @ x, l, u)
            lam = np.zeros(m_total)

        rp_window = []
        lam_snapshot = lam.copy()
        status = "max-iters"
        iterations = max_iters
        for it in range(1, max_iters + 1):
            rho = self.rho
            rhs = np.concatenate([self.SIGMA * x - q, z - lam / rho])
            sol = self._lu.solve(rhs)
            xt = sol[:n]
            nu = sol[n:]
            zt = z + (nu - lam) / rho
            x = self.ALPHA * xt + (1.0 - self.ALPHA) * x
            z_pre = self.ALPHA * zt + (1.0 - self.ALPHA) * z
            z_new = np.clip(z_pre + lam / rho, l, u)
            lam = lam + rho * (z_pre - z_new)
            z = z_new

            if it % self.CHECK_EVERY == 0 or it == max_iters:
                r_prim, r_dual = self._residuals(x, z, lam)
                if r_prim <= tol and r_dual <= tol:
                    status = "solved"
                    iterations = it
                    break
                rp_window.append(r_prim)
                if len(rp_window) > 12:
                    rp_window.pop(0)
                if self._primal_stalled(rp_window, tol) and \
                        self._certify_infeasible(lam - lam_snapshot):
                    status = "infeasible-detected"
                    iterations = it
                    break
                lam_snapshot = lam.copy()
                if it % (self.CHECK_EVERY * 4) == 0:
                    self._adapt_rho(r_prim, r_dual)

        x, z, lam = self._polish(x, z, lam, tol)
        eq_res, in_vio, stat = self._report_residuals(x, lam)
        if status == "solved" and max(eq_res, in_vio, stat) > tol:
            # polish never regresses; this can only trip if tolerances are
            # extremely tight relative to conditioning
            status = "max-iters"
        return QpSolution(
            v=x,
            eq_residual=eq_res,
            in_violation=in_vio,
            stationarity=stat,
            iterations=iterations,
            status=status,
            z=z,
            lam=lam,
        )

    # -- diagnostics ---------------------------------------------------------

    def _residuals(self, x, z, lam):
        """(primal, dual) infinity-norm residuals on the original data.

        Rows were divided by their scale, so the original-units primal
        residual multiplies it back; A_scaled' lam_scaled already equals
        A' lam_original, so the gradient needs no adjustment.
        """
        ax = self.a_csr @ x
        r_prim = np.max(np.abs(ax - z) * self.row_scale) if self.m_total else 0.0
        grad = self.qp.d * x + self.qp.q + self.a_csr.T @ lam
        r_dual = float(np.max(np.abs(grad))) if len(grad) else 0.0
        return float(r_prim), r_dual

    def _primal_stalled(self, window, tol):
        if len(window) < 12:
            return False
        recent = min(window[6:])
        older = min(window[:6])
        return recent > 0.999 * older and recent > max(1e3 * tol, 1e-5)

    def _certify_infeasible(self, dlam):
        norm = float(np.max(np.abs(dlam))) if len(dlam) else 0.0
        if norm <= 1e-14:
            return False
        if float(np.max(np.abs(self.a.T @ dlam))) > 1e-8 * norm:
            return False
        pos = np.maximum(dlam, 0.0)
        neg = np.minimum(dlam, 0.0)
        # rows with an infinite bound must not push in that direction
        lo_inf = np.isinf(self.l)
        hi_inf = np.isinf(self.u)
        if np.any(neg[lo_inf] < -1e-12 * norm) or np.any(pos[hi_inf] > 1e-12 * norm):
            return False
        support = float(
            np.sum(np.where(hi_inf, 0.0, self.u) * pos)
            + np.sum(np.where(lo_inf, 0.0, self.l) * neg)
        )
        return support < -1e-10 * norm

    def _adapt_rho(self, r_prim, r_dual):
        ratio = np.sqrt(max(r_prim, 1e-16) / max(r_dual, 1e-16))
        if 0.2 < ratio < 5.0:
            return
        new_base = float(np.clip(self._rho_base * ratio, self.RHO_MIN, self.RHO_MAX))
        if new_base == self._rho_base:
            return
        self._rho_base = new_base
        self._refactor()

    def _report_residuals(self, x, lam):
        qp = self.qp
        eq_res = float(np.max(np.abs(qp.a_eq @ x - qp.b_eq))) if self.m_eq else 0.0
        in_vio = 0.0
        if self.m_in:
            in_vio = float(np.max(np.maximum(qp.a_in @ x - qp.b_in, 0.0)))
        box_vio = float(np.max(np.maximum.reduce([qp.lo - x, x - qp.hi,
                                                  np.zeros(self.n)])))
        in_vio = max(in_vio, box_vio)
        grad = qp.d * x + qp.q + self.a_csr.T @ lam
        stat = float(np.max(np.abs(grad))) if len(grad) else 0.0
        # inequality rows only bound from above; a negative multiplier there
        # is a dual-feasibility violation and is folded into stationarity
        if self.m_in:
            sl = slice(self.m_eq, self.m_eq + self.m_in)
            lam_in = lam[sl] / self.row_scale[sl]
            stat = max(stat, float(np.max(np.maximum(-lam_in, 0.0))))
        return eq_res, in_vio, stat

    # -- polish --------------------------------------------------------------

    def _polish(self, x, z, lam, tol):
        """Solve the KKT system on the detected active set; keep it only if
        every residual (on the full constraint data) improves."""
        act_low = (lam < -1e-12) & ~self._is_eq
        act_up = (lam > 1e-12) & ~self._is_eq
        active = self._is_eq | act_low | act_up
        if not active.any():
            return x, z, lam
        a_act = self.a_csr[active]
        b_act = np.where(act_up[active], self.u[active], self.l[active])
        b_act = np.where(self._is_eq[active], self.u[active], b_act)
        k = a_act.shape[0]
        delta = 1e-9
        kkt = sp.bmat(
            [
                [sp.diags(self.qp.d + delta), a_act.T],
                [a_act, sp.diags(np.full(k, -delta))],
            ],
            format="csc",
        )
        try:
            lu = spla.splu(kkt)
        except RuntimeError:
            return x, z, lam
        rhs = np.concatenate([-self.qp.q, b_act])
        sol = lu.solve(rhs)
        # one round of iterative refinement against the unregularized system
        x_p, nu_p = sol[:self.n], sol[self.n:]
        res_top = -self.qp.q - self.qp.d * x_p - a_act.T @ nu_p
        res_bot = b_act - a_act @ x_p
        corr = lu.solve(np.concatenate([res_top, res_bot]))
        x_p = x_p + corr[:self.n]
        nu_p = nu_p + corr[self.n:]
        lam_p = np.zeros(self.m_total)
        lam_p[active] = nu_p
        old = max(self._report_residuals(x, lam))
        new = max(self._report_residuals(x_p, lam_p))
        if not np.isfinite(new) or new >= old:
            return x, z, lam
        z_p = np.clip(self.a_csr @ x_p, self.l, self.u)
        return x_p, z_p, lam_p


def _row_scales(mat):
    """Per-row infinity norms (1.0 for empty rows)."""
    if mat.shape[0] == 0:
        return np.ones(0)
    absmat = abs(mat)
    scales = absmat.max(axis=1).toarray().ravel()
    scales[scales == 0.0] = 1.0
    return scales


def _same_matrix(a, b):
    return (
        a.shape == b.shape
        and a.nnz == b.nnz
        and np.array_equal(a.indptr, b.indptr)
        and np.array_equal(a.indices, b.indices)
        and np.array_equal(a.data, b.data)
    )


def solve_qp(qp, tol=1e-6, max_iters=20000, warm=None):
    """One-shot solve; builds and discards a workspace.

    Long-running drivers should hold a QpWorkspace instead so the KKT
    factorization and warm starts are reused across iterations.
    """
    return QpWorkspace(qp).solve(tol=tol, max_iters=max_iters, warm=warm)
