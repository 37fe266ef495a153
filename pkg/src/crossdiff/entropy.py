"""Entropy functionals, dissipation terms and the duality monitor."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .grid import Grid1D, face_gradient, integrate, laplacian_neumann
from .maps import reconstruct, identity_g_inverse
from .model import ModelFunctions
from .stepper import SchemeParams, State, regularized_rates

# Gauss-Legendre rule for the bounded, smooth regularization integrals
_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)


@dataclass
class EntropyReport:
    step: int
    t: float
    h_eta: float
    D_grad: float
    D_reac: float
    mass12: float
    mass13: float
    defect_L1: float
    min_u: float

    FIELDS = ("step", "t", "h_eta", "D_grad", "D_reac", "mass12", "mass13", "defect_L1", "min_u")

    def row(self) -> list:
        return [getattr(self, k) for k in self.FIELDS]


def _values(u) -> np.ndarray:
    return u.u if isinstance(u, State) else np.asarray(u, dtype=float)


def _generic_log_integral(func, s: np.ndarray) -> np.ndarray:
    out = np.empty(s.shape)
    flat = s.ravel()
    res = out.ravel()
    for k, sv in enumerate(flat):
        sv = max(float(sv), 1e-300)
        val, _ = quad(lambda y: math.log(max(float(func(np.array(y))), 1e-300)), 1.0, sv, limit=200)
        res[k] = val
    return res.reshape(s.shape)


def entropy_density(u, funcs: ModelFunctions) -> np.ndarray:
    """Pointwise ``sum_i int_1^{u_i} log q_i(s) ds``, extended by its limit at 0."""
    u = _values(u)
    total = np.zeros(u.shape[1:])
    for i in range(3):
        if funcs.entropy_density is not None:
            total = total + funcs.entropy_density[i](u[i])
        else:
            total = total + _generic_log_integral(funcs.q[i], np.asarray(u[i]))
    return total


def _regularization_integral(qi, s: np.ndarray, eta: float, identity: bool) -> np.ndarray:
    """``int_1^s log(1 + eta q_i(y)) dy``."""
    if eta == 0:
        return np.zeros_like(s)
    if identity:
        return ((1 + eta * s) * np.log1p(eta * s) - (1 + eta) * math.log1p(eta)) / eta - (s - 1.0)
    half = 0.5 * (s - 1.0)
    mid = 0.5 * (s + 1.0)
    y = mid[..., None] + half[..., None] * _GL_X
    return half * np.sum(_GL_W * np.log1p(eta * qi(y)), axis=-1)


def entropy_eta_density(u, eta: float, funcs: ModelFunctions) -> np.ndarray:
    """Pointwise ``sum_i int_1^{u_i} log(q_i/(1 + eta q_i)) ds``."""
    u = _values(u)
    dens = entropy_density(u, funcs)
    for i in range(3):
        dens = dens - _regularization_integral(funcs.q[i], np.asarray(u[i], float), eta, funcs.identity_q)
    return dens


def h_eval(u: State, funcs: ModelFunctions) -> float:
    return float(integrate(entropy_density(u, funcs), u.grid))


def h_eta_eval(u: State, eta: float, funcs: ModelFunctions) -> float:
    return float(integrate(entropy_eta_density(u, eta, funcs), u.grid))


@dataclass
class Dissipation:
    T1: np.ndarray
    T2: np.ndarray
    T3: np.ndarray
    T4: np.ndarray
    D_grad: float
    cross_bound_cell_ok: np.ndarray
    delta: Optional[float]
    flagged: np.ndarray


def dissipation_terms(u: State, eta: float, funcs: ModelFunctions, delta: Optional[float] = None,
                      floor: float = 1e-12) -> Dissipation:
    """Entropy-weighted gradient dissipation on the grid.

    ``T1..T4`` are evaluated per cell, the weights are averaged to the
    interior faces and multiplied by the face differences. With a certified
    ``delta`` (argument or the bundle's) the result is
    ``delta*sum(T1 g1^2 + T2 g2^2) + sum(T3 g3^2)``; without one the full
    quadratic form including the mixed ``T4 g1 g2`` term is returned.
    Cells below ``floor`` are evaluated at the floor and flagged.
    """
    grid = u.grid
    x = u.u
    flagged = np.any(x < floor, axis=0)
    s = np.maximum(x, floor)
    s1, s2, s3 = s
    delta = delta if delta is not None else funcs.certified_delta
    w = []
    for i in range(3):
        qi = funcs.q[i](s[i])
        w.append(funcs.dq[i](s[i]) / (qi * (1.0 + eta * qi)))
    T1 = w[0] * (funcs.df[0](s1) + funcs.d1f12(s1, s2))
    T2 = w[1] * (funcs.df[1](s2) + funcs.d2f21(s1, s2))
    T3 = w[2] * funcs.df[2](s3)
    T4 = w[0] * funcs.d2f12(s1, s2) + w[1] * funcs.d1f21(s1, s2)
    T1, T2, T3, T4 = (np.broadcast_to(T, s1.shape) for T in (T1, T2, T3, T4))

    def face(T):
        return 0.5 * (T[1:] + T[:-1])

    g = face_gradient(x, grid)
    h = grid.h
    if delta is not None:
        D = delta * h * np.sum(face(T1) * g[0] ** 2 + face(T2) * g[1] ** 2) + h * np.sum(face(T3) * g[2] ** 2)
        ok = T4**2 <= 2.0 * (1.0 - delta) ** 2 * T1 * T2 * (1 + 1e-12)
    else:
        D = h * np.sum(face(T1) * g[0] ** 2 + face(T2) * g[1] ** 2 + face(T3) * g[2] ** 2 + face(T4) * g[0] * g[1])
        ok = T4**2 <= 4.0 * T1 * T2
    return Dissipation(T1, T2, T3, T4, float(D), ok, delta, flagged)


def reaction_dissipation_density(u, eta: float, eps: float, funcs: ModelFunctions) -> np.ndarray:
    """``-Q^eta . (h^eta)' = (a - b)(log a - log b)/eps`` per cell."""
    a, b = regularized_rates(_values(u), eta, funcs)
    if not math.isfinite(eps):
        return np.zeros_like(a)
    both_zero = (a <= 0) & (b <= 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (a - b) * (np.log(a) - np.log(b)) / eps
    return np.where(both_zero, 0.0, val)


def reaction_dissipation(u: State, eta: float, eps: float, funcs: ModelFunctions) -> float:
    return float(integrate(reaction_dissipation_density(u, eta, eps, funcs), u.grid))


def reaction_defect(u, funcs: ModelFunctions) -> np.ndarray:
    """``q1(u1) - q2(u2) q3(u3)`` per cell."""
    x = _values(u)
    return funcs.q[0](x[0]) - funcs.q[1](x[1]) * funcs.q[2](x[2])


def h0_density(v, w, funcs: ModelFunctions) -> np.ndarray:
    """Limit entropy density: the entropy density at the equilibrium point
    reconstructed from ``(v, w)``."""
    return entropy_density(reconstruct(v, w, funcs), funcs)


def h0_eval(v, w, funcs: ModelFunctions, grid: Grid1D) -> float:
    return float(integrate(h0_density(v, w, funcs), grid))


def h0_identity_density(v, w) -> np.ndarray:
    """``sum u_i (log u_i - 1)`` at the closed-form reconstruction for
    ``q = identity``; differs from :func:`h0_density` by the constant 3."""
    u1, u2, u3 = identity_g_inverse(np.stack([np.asarray(v, float), np.asarray(w, float)]))

    def xlogx(z):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(z > 0, z * (np.log(np.where(z > 0, z, 1.0)) - 1.0), 0.0)

    return xlogx(u1) + xlogx(u2) + xlogx(u3)


def entropy_report(u: State, u_prev: Optional[State], p: SchemeParams, funcs: ModelFunctions, step: int) -> EntropyReport:
    x = u.u
    g = u.grid
    return EntropyReport(
        step=step,
        t=u.t,
        h_eta=h_eta_eval(u, p.eta, funcs),
        D_grad=dissipation_terms(u, p.eta, funcs).D_grad,
        D_reac=reaction_dissipation(u, p.eta, p.eps, funcs),
        mass12=float(integrate(x[0] + x[1], g)),
        mass13=float(integrate(x[0] + x[2], g)),
        defect_L1=float(integrate(np.abs(reaction_defect(x, funcs)), g)),
        min_u=float(x.min()),
    )


@dataclass
class DualityReport:
    A: float
    B: float
    ratio: float
    residuals: np.ndarray
    max_residual: float


def duality_monitor(states: np.ndarray, times: np.ndarray, funcs: ModelFunctions, grid: Grid1D) -> DualityReport:
    """Accumulate ``A = tau sum integrate(mu v^2)`` and ``B = tau sum
    integrate(mu)`` for ``v = 2u1 + u2 + u3``, ``mu = (2F1 + F2 + F3)/v``,
    and the residual of ``(v^k - v^{k-1})/tau - Lap(mu^k v^k)``, in which the
    reactions cancel exactly."""
    states = np.asarray(states, dtype=float)
    wts = np.array([2.0, 1.0, 1.0])
    A = B = 0.0
    res = np.zeros(len(states) - 1)
    v_prev = np.tensordot(wts, states[0], axes=1)
    for k in range(1, len(states)):
        tau = times[k] - times[k - 1]
        x = states[k]
        v = np.tensordot(wts, x, axes=1)
        muv = np.tensordot(wts, funcs.F(x), axes=1)
        mu = muv / v
        A += tau * float(integrate(mu * v**2, grid))
        B += tau * float(integrate(mu, grid))
        res[k - 1] = np.max(np.abs((v - v_prev) / tau - laplacian_neumann(muv, grid)))
        v_prev = v
    return DualityReport(A, B, A / (1.0 + B), res, float(res.max()) if res.size else 0.0)
