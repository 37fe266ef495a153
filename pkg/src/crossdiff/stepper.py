"""Implicit Euler time stepping with regularized reactions.

One step solves, cellwise on the grid and for i = 1, 2, 3,

    (u_i - u_i_old) / tau - Lap F_i(u) - Q_i^eta(u) = 0

with the no-flux Laplacian of :mod:`crossdiff.grid`. Newton's method with an
exact block-tridiagonal Jacobian is the primary solver; the fixed-point map
built from ``(M - tau*Lap)^-1`` and ``F^-1`` is the fallback.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .grid import Grid1D, block_tridiag_solve, integrate, laplacian_bands, laplacian_neumann, solve_shifted
from .maps import DivergenceError, F_inverse
from .model import ModelFunctions

log = logging.getLogger(__name__)

POSITIVITY_FLOOR = 1e-14
SIGMA = np.array([-1.0, 1.0, 1.0])


@dataclass(frozen=True)
class SchemeParams:
    tau: float
    eta: float = 0.0
    eps: float = 1.0
    newton_tol: float = 1e-9
    newton_max: int = 50
    strict_tau: bool = False
    max_halvings: int = 10
    fixedpoint_max: int = 5000
    # one extra Newton correction after convergence, kept only if it lowers the residual
    polish: bool = True

    def validate(self) -> None:
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise ValueError(f"tau must be positive, got {self.tau!r}")
        if not (self.eta >= 0 and math.isfinite(self.eta)):
            raise ValueError(f"eta must be nonnegative, got {self.eta!r}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps!r}")
        if not self.newton_tol > 0:
            raise ValueError(f"newton_tol must be positive, got {self.newton_tol!r}")
        if self.newton_max < 1:
            raise ValueError(f"newton_max must be >= 1, got {self.newton_max!r}")
        if self.strict_tau:
            if self.eta <= 0:
                raise ValueError("strict_tau requires eta > 0")
            if self.tau > self.tau_bound:
                raise ValueError(f"strict_tau: tau={self.tau!r} exceeds eps*eta^2/2={self.tau_bound!r}")

    @property
    def tau_bound(self) -> float:
        """``eps * eta**2 / 2``, the reciprocal of the bound on ``|Q^eta|``."""
        return self.eps * self.eta**2 / 2.0

    @property
    def fixedpoint_admissible(self) -> bool:
        return self.eta > 0 and math.isfinite(self.eps) and self.tau <= self.tau_bound


@dataclass
class State:
    u: np.ndarray
    t: float
    grid: Grid1D

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if self.u.shape != (3, self.grid.N):
            raise ValueError(f"state must have shape (3, {self.grid.N}), got {self.u.shape}")

    def copy(self) -> "State":
        return State(self.u.copy(), self.t, self.grid)


# --------------------------------------------------------------------------
# reactions


def regularized_rates(u, eta: float, funcs: ModelFunctions) -> tuple[np.ndarray, np.ndarray]:
    """Forward and backward rates ``a = q1/(1+eta q1)`` and
    ``b = q2/(1+eta q2) * q3/(1+eta q3)``, evaluated at ``|u|``."""
    u = np.abs(np.asarray(u, dtype=float))
    q1, q2, q3 = funcs.q[0](u[0]), funcs.q[1](u[1]), funcs.q[2](u[2])
    return q1 / (1.0 + eta * q1), (q2 / (1.0 + eta * q2)) * (q3 / (1.0 + eta * q3))


def Q_eta(u, eta: float, eps: float, funcs: ModelFunctions) -> np.ndarray:
    """Regularized reaction terms; ``eta = 0`` gives the original ones and
    ``eps = inf`` switches reactions off."""
    a, b = regularized_rates(u, eta, funcs)
    r = (a - b) / eps
    return np.stack([-r, r, r])


def Q_eta_prime(u, eta: float, eps: float, funcs: ModelFunctions) -> np.ndarray:
    """Jacobian of :func:`Q_eta` for nonnegative ``u``, shape ``(3, 3) + u.shape[1:]``."""
    u = np.asarray(u, dtype=float)
    qs = [funcs.q[i](u[i]) for i in range(3)]
    dqs = [funcs.dq[i](u[i]) for i in range(3)]
    reg = [q / (1.0 + eta * q) for q in qs]
    dreg = [dq / (1.0 + eta * q) ** 2 for q, dq in zip(qs, dqs)]
    dr = np.stack([dreg[0], -dreg[1] * reg[2], -reg[1] * dreg[2]]) / eps
    return np.multiply.outer(SIGMA, dr)


def reaction_K2(funcs: ModelFunctions, eps: float, eta: float) -> float:
    """Sampled constant with ``Q_{i,-}^eta(u) <= K2 * u_i``.

    Uses ``Q_{1,-} <= a/eps`` and ``Q_{2,-}, Q_{3,-} <= b/eps <= b2/(eta eps)``
    and takes the supremum of the per-species quotients over a log grid.
    """
    if eta <= 0:
        return math.inf
    s = np.geomspace(1e-10, 1e10, 4001)
    sup1 = np.max(funcs.q[0](s) / (1.0 + eta * funcs.q[0](s)) / s)
    sup23 = max(np.max(funcs.q[i](s) / (1.0 + eta * funcs.q[i](s)) / s) for i in (1, 2)) / eta
    return float(max(sup1, sup23) / eps)


# --------------------------------------------------------------------------
# one step


def step_residual(u_new, u_old, p: SchemeParams, funcs: ModelFunctions, grid: Grid1D) -> np.ndarray:
    """Residual of the implicit Euler scheme, shape ``(3, N)``."""
    u_new = u_new.u if isinstance(u_new, State) else np.asarray(u_new, float)
    u_old = u_old.u if isinstance(u_old, State) else np.asarray(u_old, float)
    if u_new.shape != u_old.shape:
        raise ValueError("state shapes differ")
    return (u_new - u_old) / p.tau - laplacian_neumann(funcs.F(u_new), grid) - Q_eta(u_new, p.eta, p.eps, funcs)


def step_jacobian_blocks(u, p: SchemeParams, funcs: ModelFunctions, grid: Grid1D):
    """Blocks ``(lower, diag, upper)`` of the step Jacobian in cell-major order."""
    sub, main, sup = laplacian_bands(grid)
    Fp = np.moveaxis(funcs.F_prime(u), -1, 0)  # (N, 3, 3)
    Qp = np.moveaxis(Q_eta_prime(u, p.eta, p.eps, funcs), -1, 0)
    diag = np.eye(3)[None] / p.tau - main[:, None, None] * Fp - Qp
    lower = -sub[:, None, None] * Fp[:-1]
    upper = -sup[:, None, None] * Fp[1:]
    return lower, diag, upper


def _converged(res_inf: float, u_old: np.ndarray, p: SchemeParams) -> bool:
    return res_inf <= p.newton_tol * (1.0 + np.max(np.abs(u_old)))


@dataclass
class StepInfo:
    iterations: int = 0
    projections: int = 0
    solver: str = "newton"
    residual: float = math.nan


class _SwitchToFixedPoint(Exception):
    pass


def newton_solve_step(u_old: State, p: SchemeParams, funcs: ModelFunctions,
                      info: Optional[StepInfo] = None) -> State:
    """Advance one implicit Euler step with damped Newton.

    Converged when ``max|R| <= newton_tol * (1 + max|u_old|)``. Steps are
    halved until the residual 2-norm decreases (at most 30 times); negative
    trial components are projected to a small floor. Raises
    :class:`DivergenceError` after ``newton_max`` iterations.
    """
    grid = u_old.grid
    info = info if info is not None else StepInfo()
    uo = u_old.u
    u = np.maximum(uo.copy(), POSITIVITY_FLOOR)
    R = step_residual(u, uo, p, funcs, grid)
    consecutive_proj = 0
    for it in range(p.newton_max + 1):
        rinf = float(np.max(np.abs(R)))
        info.iterations, info.residual = it, rinf
        if _converged(rinf, uo, p):
            if p.polish:
                u, R = _polish(u, R, uo, p, funcs, grid)
                info.residual = float(np.max(np.abs(R)))
            return State(u, u_old.t + p.tau, grid)
        if it == p.newton_max:
            break
        lower, diag, upper = step_jacobian_blocks(u, p, funcs, grid)
        du = block_tridiag_solve(lower, diag, upper, -R.T).T
        r2 = np.linalg.norm(R)
        lam = 1.0
        accepted = False
        projected = False
        for _ in range(31):
            trial = u + lam * du
            low = trial < POSITIVITY_FLOOR
            if low.any():
                trial = np.where(low, POSITIVITY_FLOOR, trial)
            Rt = step_residual(trial, uo, p, funcs, grid)
            if np.all(np.isfinite(Rt)) and np.linalg.norm(Rt) < r2:
                accepted, projected = True, bool(low.any())
                break
            lam *= 0.5
        if not accepted:
            if np.max(np.abs(du)) <= 1e-13 * (1.0 + np.max(np.abs(u))):
                # rounding floor: the correction is negligible
                info.solver = "newton-floor"
                return State(u, u_old.t + p.tau, grid)
            raise DivergenceError("newton: line search failed", iterate=u, residual=R)
        u, R = trial, Rt
        consecutive_proj = consecutive_proj + 1 if projected else 0
        info.projections += int(projected)
        if consecutive_proj > 5:
            raise _SwitchToFixedPoint()
    raise DivergenceError(f"newton: no convergence in {p.newton_max} iterations", iterate=u, residual=R)


def _polish(u, R, uo, p, funcs, grid):
    lower, diag, upper = step_jacobian_blocks(u, p, funcs, grid)
    trial = np.maximum(u + block_tridiag_solve(lower, diag, upper, -R.T).T, POSITIVITY_FLOOR)
    Rt = step_residual(trial, uo, p, funcs, grid)
    if np.all(np.isfinite(Rt)) and np.max(np.abs(Rt)) < np.max(np.abs(R)):
        return trial, Rt
    return u, R


def fixedpoint_solve_step(u_old: State, p: SchemeParams, funcs: ModelFunctions, M: Optional[float] = None,
                          info: Optional[StepInfo] = None) -> State:
    """Advance one step with the fixed-point map

        u <- F^-1((M - tau*Lap)^-1 (u_old + M F(u) - u + tau Q^eta(u))).

    ``M`` defaults to ``(tau*K2 + 1)/kappa1``, which keeps the right-hand side
    nonnegative so every iterate stays in the octant.
    """
    if not p.fixedpoint_admissible:
        raise ValueError("fixed-point iteration needs eta > 0 and tau <= eps*eta^2/2")
    grid = u_old.grid
    info = info if info is not None else StepInfo(solver="fixedpoint")
    info.solver = "fixedpoint"
    M_min = (p.tau * reaction_K2(funcs, p.eps, p.eta) + 1.0) / funcs.kappa1
    M = M_min if M is None else M
    if M < M_min * (1 - 1e-12):
        raise ValueError(f"M={M!r} below the admissible bound {M_min!r}")
    uo = u_old.u
    u = uo.copy()
    for it in range(1, p.fixedpoint_max + 1):
        rhs = uo + M * funcs.F(u) - u + p.tau * Q_eta(u, p.eta, p.eps, funcs)
        z = solve_shifted(M, p.tau, np.maximum(rhs, 0.0), grid)
        u = F_inverse(np.maximum(z, 0.0), funcs)
        R = step_residual(u, uo, p, funcs, grid)
        rinf = float(np.max(np.abs(R)))
        info.iterations, info.residual = it, rinf
        if _converged(rinf, uo, p):
            return State(u, u_old.t + p.tau, grid)
    raise DivergenceError(f"fixed point: no convergence in {p.fixedpoint_max} iterations", iterate=u, residual=R)


def advance(u_old: State, p: SchemeParams, funcs: ModelFunctions, depth: int = 0,
            info: Optional[StepInfo] = None) -> State:
    """One step of size ``p.tau``: Newton, then the fixed-point fallback when
    admissible, then recursive halving of the step."""
    info = info if info is not None else StepInfo()
    try:
        return newton_solve_step(u_old, p, funcs, info)
    except (DivergenceError, _SwitchToFixedPoint, np.linalg.LinAlgError) as exc:
        if p.fixedpoint_admissible:
            log.info("t=%g: newton failed (%s); fixed-point fallback", u_old.t, exc)
            try:
                return fixedpoint_solve_step(u_old, p, funcs, info=info)
            except DivergenceError:
                pass
        if depth >= p.max_halvings:
            raise DivergenceError(f"step at t={u_old.t:g} failed after {depth} halvings") from exc
        log.info("t=%g: halving step to %g", u_old.t, p.tau / 2)
        half = replace(p, tau=p.tau / 2)
        mid = advance(u_old, half, funcs, depth + 1, info)
        return advance(mid, half, funcs, depth + 1, info)


@dataclass
class RunResult:
    times: np.ndarray
    states: np.ndarray  # (steps+1, 3, N)
    grid: Grid1D
    params: SchemeParams
    reports: list = field(default_factory=list)
    infos: list = field(default_factory=list)

    @property
    def min_u(self) -> np.ndarray:
        """Minimum of each species over all cells and time levels."""
        return self.states.min(axis=(0, 2))

    def masses(self) -> np.ndarray:
        """``integrate(u1+u2)`` and ``integrate(u1+u3)`` per time level, shape (steps+1, 2)."""
        s = self.states
        return np.stack([integrate(s[:, 0] + s[:, 1], self.grid), integrate(s[:, 0] + s[:, 2], self.grid)], axis=1)


class RunDivergence(DivergenceError):
    def __init__(self, message, step, partial: RunResult):
        super().__init__(message)
        self.step = step
        self.partial = partial


def run(u_init: State, T_final: float, p: SchemeParams, funcs: ModelFunctions, monitors: bool = True) -> RunResult:
    """Integrate from ``u_init`` to ``T_final`` with fixed step ``p.tau``.

    The last step is shortened if ``T_final`` is not a multiple of ``tau``.
    With ``monitors`` on, an entropy report is recorded at every time level.
    """
    from .entropy import entropy_report

    p.validate()
    if np.any(u_init.u <= 0):
        raise ValueError("initial data must be strictly positive")
    n_steps = max(1, math.ceil(T_final / p.tau - 1e-9))
    grid = u_init.grid
    states = np.empty((n_steps + 1, 3, grid.N))
    times = np.empty(n_steps + 1)
    states[0], times[0] = u_init.u, u_init.t
    reports = [entropy_report(u_init, None, p, funcs, 0)] if monitors else []
    infos = []
    cur = u_init
    for k in range(1, n_steps + 1):
        tau_k = min(p.tau, u_init.t + T_final - cur.t) if k == n_steps else p.tau
        pk = p if tau_k == p.tau else replace(p, tau=tau_k)
        info = StepInfo()
        try:
            nxt = advance(cur, pk, funcs, info=info)
        except DivergenceError as exc:
            partial = RunResult(times[:k], states[:k], grid, p, reports, infos)
            raise RunDivergence(f"solver diverged at step {k}: {exc}", k, partial) from exc
        states[k], times[k] = nxt.u, nxt.t
        infos.append(info)
        if monitors:
            reports.append(entropy_report(nxt, cur, pk, funcs, k))
        cur = nxt
    return RunResult(times, states, grid, p, reports, infos)
