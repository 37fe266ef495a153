"""Reduced (fast-reaction) system in the conserved variables and the eps sweep.

With ``v = u1 + u2`` and ``w = u1 + u3`` the limit problem reads

    dv/dt = Lap G1(v, w),    dw/dt = Lap G2(v, w),

where ``G1 = F1 + F2`` and ``G2 = F1 + F3`` are evaluated at the equilibrium
triple reconstructed from ``(v, w)``. It is discretized with the same grid and
implicit Euler step as the full system so that trajectories can be compared
level by level.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .entropy import h0_eval, reaction_defect
from .grid import Grid1D, block_tridiag_solve, integrate, laplacian_bands, laplacian_neumann
from .maps import DivergenceError, g_jacobian, reconstruct
from .model import ModelFunctions, PowerLawParams, build_power_law
from .stepper import POSITIVITY_FLOOR, SchemeParams, State, run

log = logging.getLogger(__name__)

# rows of the map (F1, F2, F3) -> (G1, G2)
_P = np.array([[1.0, 1.0, 0.0], [1.0, 0.0, 1.0]])


def well_prepared_init(u2_init, u3_init, funcs: ModelFunctions, grid: Grid1D, t: float = 0.0) -> State:
    """State with ``u1 = q1^-1(q2(u2) q3(u3))`` in every cell."""
    u2 = np.broadcast_to(np.asarray(u2_init, dtype=float), (grid.N,)).copy()
    u3 = np.broadcast_to(np.asarray(u3_init, dtype=float), (grid.N,)).copy()
    if np.any(u2 <= 0) or np.any(u3 <= 0):
        raise ValueError("well-prepared data needs strictly positive u2, u3")
    u1 = funcs.q_inverse(0, funcs.q[1](u2) * funcs.q[2](u3))
    return State(np.stack([u1, u2, u3]), t, grid)


def limit_fluxes(vw: np.ndarray, funcs: ModelFunctions, closed_form: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """``(G, u)`` with ``G`` of shape (2, N) and the reconstructed ``u`` (3, N)."""
    u = reconstruct(vw[0], vw[1], funcs, closed_form=closed_form)
    return _P @ funcs.F(u), u


def limit_flux_jacobian(u: np.ndarray, funcs: ModelFunctions) -> np.ndarray:
    """``dG/d(v, w)`` per cell, shape (N, 2, 2).

    The chain rule goes through ``(u2, u3) = g^-1(v, w)`` and
    ``u1 = v - u2``.
    """
    gp = np.moveaxis(g_jacobian(u[1], u[2], funcs), -1, 0)  # (N, 2, 2)
    ginv = np.linalg.inv(gp)
    du = np.empty((u.shape[1], 3, 2))
    du[:, 1:] = ginv
    du[:, 0] = np.array([1.0, 0.0]) - ginv[:, 0]
    Fp = np.moveaxis(funcs.F_prime(u), -1, 0)  # (N, 3, 3)
    return _P[None] @ Fp @ du


def limit_residual(vw, vw_old, tau: float, funcs: ModelFunctions, grid: Grid1D, closed_form: bool = True):
    G, u = limit_fluxes(vw, funcs, closed_form)
    return (vw - vw_old) / tau - laplacian_neumann(G, grid), u


def limit_step(vw_old: np.ndarray, p: SchemeParams, funcs: ModelFunctions, grid: Grid1D,
               closed_form: bool = True) -> tuple[np.ndarray, np.ndarray, int]:
    """One implicit Euler step of the limit system by damped Newton.

    Returns ``(vw, u, iterations)``. Uses the same convergence rule as the
    full-system Newton solver.
    """
    sub, main, sup = laplacian_bands(grid)
    tol = p.newton_tol * (1.0 + np.max(np.abs(vw_old)))
    vw = vw_old.copy()
    R, u = limit_residual(vw, vw_old, p.tau, funcs, grid, closed_form)
    for it in range(p.newton_max + 1):
        if np.max(np.abs(R)) <= tol:
            return vw, u, it
        if it == p.newton_max:
            break
        dG = limit_flux_jacobian(u, funcs)
        diag = np.eye(2)[None] / p.tau - main[:, None, None] * dG
        lower = -sub[:, None, None] * dG[:-1]
        upper = -sup[:, None, None] * dG[1:]
        d = block_tridiag_solve(lower, diag, upper, -R.T).T
        r2 = np.linalg.norm(R)
        lam = 1.0
        for _ in range(31):
            trial = np.maximum(vw + lam * d, POSITIVITY_FLOOR)
            Rt, ut = limit_residual(trial, vw_old, p.tau, funcs, grid, closed_form)
            if np.all(np.isfinite(Rt)) and np.linalg.norm(Rt) < r2:
                break
            lam *= 0.5
        else:
            if np.max(np.abs(d)) <= 1e-13 * (1.0 + np.max(np.abs(vw))):
                return vw, u, it
            raise DivergenceError("limit newton: line search failed", iterate=vw, residual=R)
        vw, R, u = trial, Rt, ut
    raise DivergenceError(f"limit newton: no convergence in {p.newton_max} iterations", iterate=vw, residual=R)


@dataclass
class LimitResult:
    times: np.ndarray
    vw: np.ndarray  # (steps+1, 2, N)
    u: np.ndarray  # (steps+1, 3, N), reconstructed equilibrium
    h0: np.ndarray
    grid: Grid1D
    iterations: list = field(default_factory=list)

    def masses(self) -> np.ndarray:
        return integrate(self.vw, self.grid)


def solve_limit_system(v_init, w_init, T_final: float, p: SchemeParams, funcs: ModelFunctions, grid: Grid1D,
                       closed_form: bool = True, t0: float = 0.0) -> LimitResult:
    """Integrate the limit system to ``T_final`` with the step size of ``p``.

    Only ``tau``, ``newton_tol`` and ``newton_max`` of ``p`` are used.
    """
    vw0 = np.stack([np.broadcast_to(np.asarray(v_init, float), (grid.N,)),
                    np.broadcast_to(np.asarray(w_init, float), (grid.N,))])
    if np.any(vw0 <= 0):
        raise ValueError("limit system needs strictly positive v, w")
    n_steps = max(1, math.ceil(T_final / p.tau - 1e-9))
    times = np.empty(n_steps + 1)
    vw = np.empty((n_steps + 1, 2, grid.N))
    us = np.empty((n_steps + 1, 3, grid.N))
    h0 = np.empty(n_steps + 1)
    times[0], vw[0] = t0, vw0
    us[0] = reconstruct(vw0[0], vw0[1], funcs, closed_form=closed_form)
    h0[0] = h0_eval(vw0[0], vw0[1], funcs, grid)
    iters = []
    for k in range(1, n_steps + 1):
        tau_k = min(p.tau, t0 + T_final - times[k - 1]) if k == n_steps else p.tau
        pk = p if tau_k == p.tau else replace(p, tau=tau_k)
        vw[k], us[k], it = limit_step(vw[k - 1], pk, funcs, grid, closed_form)
        times[k] = times[k - 1] + tau_k
        h0[k] = h0_eval(vw[k, 0], vw[k, 1], funcs, grid)
        iters.append(it)
    return LimitResult(times, vw, us, h0, grid, iters)


# --------------------------------------------------------------------------
# sweep


@dataclass
class SweepConfig:
    funcs: ModelFunctions
    grid: Grid1D
    T_final: float
    scheme: SchemeParams  # eps is overridden per run
    u2_init: np.ndarray
    u3_init: np.ndarray


def reference_config() -> SweepConfig:
    """N=128 on [0, 1], T=0.5, tau=1e-3, eta=0, default power-law model."""
    grid = Grid1D(128, 1.0)
    x = grid.x
    return SweepConfig(
        funcs=build_power_law(PowerLawParams()),
        grid=grid,
        T_final=0.5,
        scheme=SchemeParams(tau=1e-3, eta=0.0, eps=1.0),
        u2_init=1.0 + 0.5 * np.cos(np.pi * x),
        u3_init=1.0 + 0.5 * np.sin(np.pi * x) ** 2,
    )


@dataclass
class SweepRow:
    epsilon: float
    defect_L1_QT: float = math.nan
    gap_v: float = math.nan
    gap_w: float = math.nan
    ratio_sqrt_eps: float = math.nan
    mass_dev: float = math.nan  # max relative deviation of the masses from the limit run
    h_final: float = math.nan
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class SweepResult:
    rows: list
    limit: LimitResult

    FIELDS = ("epsilon", "defect_L1_QT", "gap_v", "gap_w", "ratio_sqrt_eps")

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


def space_time_l1(values: np.ndarray, times: np.ndarray, grid: Grid1D) -> float:
    """``sum_k tau_k * h * sum_j |values[k]|`` over the levels ``k >= 1``."""
    taus = np.diff(times)
    return float(np.sum(taus * integrate(np.abs(values[1:]), grid)))


def _sweep_row(eps: float, config: SweepConfig, init: State, limit: LimitResult) -> SweepRow:
    row = SweepRow(eps)
    p = replace(config.scheme, eps=eps)
    try:
        res = run(init, config.T_final, p, config.funcs, monitors=False)
    except (DivergenceError, ValueError, np.linalg.LinAlgError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
        log.warning("eps=%g failed: %s", eps, exc)
        return row
    s, g = res.states, config.grid
    if s.shape[0] != limit.vw.shape[0] or not np.allclose(res.times, limit.times, rtol=0, atol=1e-12):
        row.error = "time levels of full and limit runs differ"
        return row
    row.defect_L1_QT = space_time_l1(reaction_defect(np.moveaxis(s, 0, 1), config.funcs), res.times, g)
    row.gap_v = space_time_l1(s[:, 0] + s[:, 1] - limit.vw[:, 0], res.times, g)
    row.gap_w = space_time_l1(s[:, 0] + s[:, 2] - limit.vw[:, 1], res.times, g)
    row.ratio_sqrt_eps = row.defect_L1_QT / math.sqrt(eps)
    m_full = res.masses()
    m_lim = limit.masses()
    row.mass_dev = float(np.max(np.abs(m_full - m_lim) / np.abs(m_lim)))
    from .entropy import h_eval

    row.h_final = h_eval(State(s[-1], res.times[-1], g), config.funcs)
    return row


def eps_sweep(config: SweepConfig, eps_list: Sequence[float]) -> SweepResult:
    """Run the full system for each eps and the limit system once.

    Rows are sorted by decreasing eps. A failing eps is recorded in its row
    and does not stop the remaining runs.
    """
    eps_vals = [float(e) for e in eps_list]
    if not eps_vals:
        raise ValueError("empty eps list")
    if any(not (e > 0 and math.isfinite(e)) for e in eps_vals):
        raise ValueError(f"eps values must be positive and finite: {eps_vals}")
    if len(set(eps_vals)) != len(eps_vals):
        raise ValueError(f"duplicate eps values: {eps_vals}")
    init = well_prepared_init(config.u2_init, config.u3_init, config.funcs, config.grid)
    u = init.u
    limit = solve_limit_system(u[0] + u[1], u[0] + u[2], config.T_final, config.scheme, config.funcs, config.grid)
    rows = [_sweep_row(e, config, init, limit) for e in sorted(eps_vals, reverse=True)]
    return SweepResult(rows, limit)
