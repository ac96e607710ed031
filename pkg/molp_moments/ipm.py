"""Primal-dual interior-point solver for moment relaxations.

The relaxation is a feasibility problem in the moment vector y:

    E y = f,   S_b(y) = mat(P_b y) >= 0  for every block b.

The equalities are eliminated once, y = y_p + Z w with Z an orthonormal
null-space basis, leaving the conic feasibility problem S_b = C_b + F_b(w) >= 0
paired with  min <C, X>  s.t.  F^*(X) = 0, X >= 0.  An infeasible-start HKM
predictor-corrector drives mu = <X, S>/n to zero along the central path. With
a zero objective the dual iterates head to the analytic center of the
solution face, which is the maximum-rank moment vector extraction needs.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from molp_moments.config import SolverSettings
from molp_moments.errors import DimensionError
from molp_moments.moment import MomentRelaxation

logger = logging.getLogger(__name__)


class SolveStatus(str, Enum):
    SOLVED = "Solved"
    MAX_ITERS = "MaxIters"
    INFEASIBLE = "Infeasible"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class ConicSolution:
    y: np.ndarray
    blocks: list[np.ndarray]
    eq_residual: float
    min_eigenvalue: float
    iterations: int
    status: SolveStatus
    mu: float = float("nan")
    message: str = ""
    seconds: float = 0.0
    history: list[dict] = field(default_factory=list)

    @property
    def solved(self) -> bool:
        return self.status is SolveStatus.SOLVED


# ---------------------------------------------------------------------------
# Residuals
# ---------------------------------------------------------------------------


def residuals(rel: MomentRelaxation, y: np.ndarray) -> tuple[float, float]:
    """(max |E y - f|, smallest eigenvalue over all blocks)."""
    y = np.asarray(y, dtype=float)
    if y.shape != (rel.n_moments,):
        raise DimensionError(f"moment vector has shape {y.shape}, expected ({rel.n_moments},)")
    eq = float(np.max(np.abs(rel.E @ y - rel.f))) if rel.E.shape[0] else 0.0
    min_eig = min(
        (float(la.eigvalsh(b.evaluate(y))[0]) for b in rel.blocks if b.size), default=0.0
    )
    return eq, min_eig


# ---------------------------------------------------------------------------
# Equality elimination
# ---------------------------------------------------------------------------


def _parametrize(E: sp.csr_matrix, f: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Particular solution, orthonormal null-space basis and the LS residual."""
    if E.shape[0] == 0:
        return np.zeros(p), np.eye(p), 0.0
    dense = E.toarray()
    U, s, Vt = la.svd(dense, full_matrices=True, lapack_driver="gesdd")
    cutoff = max(dense.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0) * 10
    rank = int(np.sum(s > cutoff))
    coeffs = (U[:, :rank].T @ f) / s[:rank]
    y_p = Vt[:rank].T @ coeffs
    Z = Vt[rank:].T.copy()
    resid = float(np.max(np.abs(dense @ y_p - f)))
    return y_p, Z, resid


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------


class _BlockOps:
    """Per-block sparse data reused by every iteration."""

    def __init__(self, rel: MomentRelaxation):
        self.blocks = [b for b in rel.blocks if b.size]
        self.P = [b.P.tocsr() for b in self.blocks]
        self.PT = [b.P.T.tocsr() for b in self.blocks]
        self.Pc = [b.P.tocsc() for b in self.blocks]
        self.sizes = [b.size for b in self.blocks]
        self.p = rel.n_moments

    def mats(self, y: np.ndarray) -> list[np.ndarray]:
        out = []
        for P, s in zip(self.P, self.sizes):
            m = np.asarray(P @ y).reshape(s, s)
            out.append(0.5 * (m + m.T))
        return out

    def adjoint(self, mats: list[np.ndarray]) -> np.ndarray:
        """sum_b P_b^T vec(G_b), in y-space."""
        out = np.zeros(self.p)
        for PT, G in zip(self.PT, mats):
            out += PT @ G.ravel()
        return out

    def schur(self, X: list[np.ndarray], Sinv: list[np.ndarray]) -> np.ndarray:
        """M[a, b] = sum_blocks <A_a, X A_b S^-1> over the moment coordinates."""
        M = np.zeros((self.p, self.p))
        for Pc, PT, Xb, Si, s in zip(self.Pc, self.PT, X, Sinv, self.sizes):
            indptr, indices, data = Pc.indptr, Pc.indices, Pc.data
            for beta in np.nonzero(np.diff(indptr))[0]:
                lo, hi = indptr[beta], indptr[beta + 1]
                flat = indices[lo:hi]
                r, c = flat // s, flat % s
                G = (Xb[:, r] * data[lo:hi]) @ Si[c, :]
                M[:, beta] += PT @ G.ravel()
        return 0.5 * (M + M.T)


def _max_step(M: np.ndarray, dM: np.ndarray) -> float:
    """Largest alpha with M + alpha dM >= 0 (M positive definite)."""
    L = la.cholesky(M, lower=True)
    Linv_dM = la.solve_triangular(L, dM, lower=True)
    W = la.solve_triangular(L, Linv_dM.T, lower=True)
    lam_min = float(la.eigvalsh(0.5 * (W + W.T))[0])
    return np.inf if lam_min >= 0 else -1.0 / lam_min


def _solve_normal(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    reg = 1e-14 * max(1.0, float(np.max(np.abs(np.diag(M))))) if M.size else 0.0
    try:
        factor = la.cho_factor(M + reg * np.eye(M.shape[0]), lower=True)
        return la.cho_solve(factor, rhs)
    except la.LinAlgError:
        logger.debug("schur_cholesky_failed falling back to least squares")
        return la.lstsq(M, rhs)[0]


def solve(rel: MomentRelaxation, settings: Optional[SolverSettings] = None, **overrides) -> ConicSolution:
    """Analytic-center solve of the relaxation; status codes, never exceptions."""
    settings = replace(settings or SolverSettings(), **overrides)
    started = time.perf_counter()

    y_p, Z, ls_resid = _parametrize(rel.E, rel.f, rel.n_moments)
    if ls_resid > 1e-8 * (1.0 + float(np.max(np.abs(rel.f), initial=0.0))):
        logger.info("ipm_infeasible_equalities residual=%.3e", ls_resid)
        eq, min_eig = residuals(rel, y_p)
        return ConicSolution(
            y=y_p, blocks=[b.evaluate(y_p) for b in rel.blocks], eq_residual=eq,
            min_eigenvalue=min_eig, iterations=0, status=SolveStatus.INFEASIBLE,
            message="inconsistent linear equalities", seconds=time.perf_counter() - started,
        )

    ops = _BlockOps(rel)
    q = Z.shape[1]
    n_total = sum(ops.sizes)
    C = ops.mats(y_p)
    w = np.zeros(q)
    X = [np.eye(s) for s in ops.sizes]
    S = [np.eye(s) for s in ops.sizes]

    def F(dw: np.ndarray) -> list[np.ndarray]:
        return ops.mats(Z @ dw)

    def Fadj(mats: list[np.ndarray]) -> np.ndarray:
        return Z.T @ ops.adjoint(mats)

    status = SolveStatus.MAX_ITERS
    message = ""
    history: list[dict] = []
    stalled = 0
    mu = float("nan")
    it = 0

    for it in range(1, settings.max_iters + 1):
        V = [Cb + Fb for Cb, Fb in zip(C, F(w))]
        Rd = [Vb - Sb for Vb, Sb in zip(V, S)]
        rp = Fadj(X)
        mu = sum(float(np.sum(Xb * Sb)) for Xb, Sb in zip(X, S)) / max(n_total, 1)
        rd_norm = max((float(np.max(np.abs(R))) for R in Rd), default=0.0)
        rp_norm = float(np.max(np.abs(rp))) if q else 0.0
        trace_x = sum(float(np.trace(Xb)) for Xb in X)
        primal_obj = sum(float(np.sum(Cb * Xb)) for Cb, Xb in zip(C, X))
        history.append({"it": it, "mu": mu, "rp": rp_norm, "rd": rd_norm})
        logger.debug("ipm_iteration it=%d mu=%.3e rp=%.3e rd=%.3e", it, mu, rp_norm, rd_norm)

        if mu <= settings.tol_gap and rd_norm <= 0.1 * settings.tol_psd:
            status = SolveStatus.SOLVED
            break
        if trace_x > 1e8 and primal_obj < -1e-8 * trace_x and rp_norm < 1e-8 * trace_x:
            status = SolveStatus.INFEASIBLE
            message = "primal improving ray certifies an empty moment set"
            break

        try:
            Sinv = [la.cho_solve(la.cho_factor(Sb, lower=True), np.eye(Sb.shape[0])) for Sb in S]
        except la.LinAlgError:
            status = SolveStatus.NUMERICAL_FAILURE
            message = "dual slack lost definiteness"
            break

        My = ops.schur(X, Sinv)
        Mw = Z.T @ My @ Z

        def direction(sigma: float, corr: Optional[list[np.ndarray]]):
            targets = []
            for Xb, Si, Rb, idx in zip(X, Sinv, Rd, range(len(X))):
                T = sigma * mu * Si - Xb @ Rb @ Si
                if corr is not None:
                    T = T - corr[idx] @ Si
                targets.append(T)
            dw = _solve_normal(Mw, Fadj(targets))
            dS = [Fb + Rb for Fb, Rb in zip(F(dw), Rd)]
            dX = []
            for Xb, Si, dSb, idx in zip(X, Sinv, dS, range(len(X))):
                inner = Xb @ dSb
                if corr is not None:
                    inner = inner + corr[idx]
                D = sigma * mu * Si - Xb - inner @ Si
                dX.append(0.5 * (D + D.T))
            return dw, dX, dS

        def steps(dX, dS):
            a_p = min([1.0] + [settings.step_fraction * _max_step(Xb, d) for Xb, d in zip(X, dX)])
            a_d = min([1.0] + [settings.step_fraction * _max_step(Sb, d) for Sb, d in zip(S, dS)])
            return a_p, a_d

        try:
            dw_a, dX_a, dS_a = direction(0.0, None)
            a_p, a_d = steps(dX_a, dS_a)
            mu_aff = sum(
                float(np.sum((Xb + a_p * dXb) * (Sb + a_d * dSb)))
                for Xb, dXb, Sb, dSb in zip(X, dX_a, S, dS_a)
            ) / max(n_total, 1)
            sigma = min(1.0, (mu_aff / mu) ** 3) if mu > 0 else 0.0
            corr = [dXb @ dSb for dXb, dSb in zip(dX_a, dS_a)]
            dw, dX, dS = direction(sigma, corr)
            a_p, a_d = steps(dX, dS)
        except la.LinAlgError:
            status = SolveStatus.NUMERICAL_FAILURE
            message = "factorization failed while computing the search direction"
            break

        X = [Xb + a_p * d for Xb, d in zip(X, dX)]
        X = [0.5 * (Xb + Xb.T) for Xb in X]
        S = [Sb + a_d * d for Sb, d in zip(S, dS)]
        S = [0.5 * (Sb + Sb.T) for Sb in S]
        w = w + a_d * dw

        stalled = stalled + 1 if max(a_p, a_d) < 1e-8 else 0
        if stalled >= 5:
            status = SolveStatus.NUMERICAL_FAILURE
            message = "step lengths collapsed"
            break

    y = y_p + Z @ w
    block_values = [b.evaluate(y) for b in rel.blocks]
    eq, min_eig = residuals(rel, y)
    if status is SolveStatus.SOLVED and (eq > settings.tol_eq or min_eig < -settings.tol_psd):
        status = SolveStatus.NUMERICAL_FAILURE
        message = f"residuals out of tolerance eq={eq:.2e} min_eig={min_eig:.2e}"
    seconds = time.perf_counter() - started
    logger.info(
        "ipm_finished status=%s iterations=%d mu=%.3e eq=%.2e min_eig=%.2e seconds=%.1f",
        status.value, it, mu, eq, min_eig, seconds,
    )
    return ConicSolution(
        y=y, blocks=block_values, eq_residual=eq, min_eigenvalue=min_eig, iterations=it,
        status=status, mu=mu, message=message, seconds=seconds, history=history,
    )
