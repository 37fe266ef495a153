"""Nonlinear maps of the system and their inverses.

``F`` maps concentrations to diffusion potentials, ``g`` maps the reduced
unknowns ``(u2, u3)`` of the equilibrium manifold to the conserved
combinations ``(v, w) = (u1 + u2, u1 + u3)``. Both are inverted by damped
Newton iterations in logarithmic coordinates, vectorized over points.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .model import ModelFunctions, invert_increasing

GOLDEN_S0 = (math.sqrt(5.0) - 1.0) / 2.0


class DivergenceError(RuntimeError):
    """A nonlinear iteration failed to converge.

    Carries the last iterate and its residual for diagnosis.
    """

    def __init__(self, message: str, iterate=None, residual=None):
        super().__init__(message)
        self.iterate = iterate
        self.residual = residual


def _as_points(x, k: int) -> tuple[np.ndarray, tuple]:
    x = np.asarray(x, dtype=float)
    if x.shape[0] != k:
        raise ValueError(f"expected leading dimension {k}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")
    return x.reshape(k, -1), x.shape


def F_eval(u, funcs: ModelFunctions) -> np.ndarray:
    """Diffusion potentials ``(f1(u1)+f12, f2(u2)+f21, f3(u3))``."""
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("non-finite input")
    return funcs.F(u)


def F_jacobian(u, funcs: ModelFunctions) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("non-finite input")
    return funcs.F_prime(u)


def F_inverse(y, funcs: ModelFunctions, tol: float = 1e-13, max_iter: int = 100,
              max_halvings: int = 30) -> np.ndarray:
    """Solve ``F(u) = y`` for ``u >= 0``.

    Components with zero target are pinned to zero (F maps each face of the
    octant into itself); the remaining ones are found by damped Newton on
    ``log F(exp s) = log y``. Converged when
    ``|F_i(u) - y_i| <= tol * (1 + y_i)`` for every component, which implies
    ``|F(u) - y|_inf <= tol * (1 + |y|_inf)``.
    """
    y2, shape = _as_points(y, 3)
    if np.any(y2 < 0):
        raise ValueError("F_inverse requires nonnegative targets")
    active = y2 > 0
    logy = np.log(np.where(active, y2, 1.0))
    contract = np.full(y2.shape[1], tol)

    guess = np.zeros_like(y2)
    for i in range(3):
        guess[i] = invert_increasing(funcs.f[i], funcs.df[i], y2[i])
    s = np.log(np.where(active, np.maximum(guess, 1e-300), 1.0))
    cols = {"idx": None}

    def residual(s_):
        idx = cols["idx"]
        act = active[:, idx]
        u = np.where(act, np.exp(s_), 0.0)
        Fu = funcs.F(u)
        with np.errstate(divide="ignore"):
            r = np.where(act, np.log(np.where(act, Fu, 1.0)) - logy[:, idx], 0.0)
        return r, np.max(np.abs(Fu - y2[:, idx]) / (1.0 + y2[:, idx]), axis=0)

    def jacobian(s_):
        act = active[:, cols["idx"]]
        u = np.where(act, np.exp(s_), 0.0)
        Fu = funcs.F(u)
        with np.errstate(divide="ignore", invalid="ignore"):
            Jl = funcs.F_prime(u) * u[None, :, :] / np.where(act, Fu, 1.0)[:, None, :]
        mask = act[:, None, :] & act[None, :, :]
        Jl = np.where(mask, Jl, np.eye(3)[:, :, None])
        return np.moveaxis(Jl, -1, 0)

    s = _subset_newton(residual, jacobian, s, active, contract, cols, max_iter, max_halvings, "F_inverse")
    u = np.where(active, np.exp(s), 0.0)
    return u.reshape(shape)


def _subset_newton(residual, jacobian, s, active, contract, cols, max_iter, max_halvings, what):
    n = s.shape[1]
    cols["idx"] = np.arange(n)
    r, err = residual(s)
    todo = ~(err <= contract)
    for _ in range(max_iter):
        if not todo.any():
            return s
        idx = np.flatnonzero(todo)
        cols["idx"] = idx
        sub = s[:, idx]
        Jl = jacobian(sub)
        rl = r[:, idx]
        step = np.linalg.solve(Jl, rl.T[..., None])[..., 0].T
        step[~active[:, idx]] = 0.0
        norm0 = np.max(np.abs(rl), axis=0)
        lam = np.ones(idx.size)
        pending = np.ones(idx.size, dtype=bool)
        for _h in range(max_halvings + 1):
            p = np.flatnonzero(pending)
            cols["idx"] = idx[p]
            trial = sub[:, p] - lam[p] * step[:, p]
            with np.errstate(all="ignore"):
                rt, et = residual(trial)
            ok = np.all(np.isfinite(rt), axis=0) & (
                (np.max(np.abs(rt), axis=0) < norm0[p]) | (et <= contract[idx[p]])
            )
            g = idx[p[ok]]
            s[:, g] = trial[:, ok]
            r[:, g] = rt[:, ok]
            err[g] = et[ok]
            pending[p[ok]] = False
            lam[p[~ok]] *= 0.5
            if not pending.any():
                break
        if pending.any():
            p = np.flatnonzero(pending)
            tiny = np.max(np.abs(step[:, p]), axis=0) <= 1e-14 * (1.0 + np.max(np.abs(sub[:, p]), axis=0))
            if not np.all(tiny):
                raise DivergenceError(f"{what}: damping failed", iterate=s, residual=err)
            # rounding floor reached
            todo[idx[p]] = False
        todo &= ~(err <= contract)
    if todo.any():
        raise DivergenceError(f"{what}: no convergence after {max_iter} iterations", iterate=s, residual=err)
    return s


def _p_of(u2, u3, funcs: ModelFunctions) -> np.ndarray:
    return funcs.q_inverse(0, funcs.q[1](u2) * funcs.q[2](u3))


def g_eval(u2, u3, funcs: ModelFunctions) -> np.ndarray:
    """``(u2 + p, u3 + p)`` with ``p = q1^-1(q2(u2) q3(u3))``."""
    u2 = np.asarray(u2, dtype=float)
    u3 = np.asarray(u3, dtype=float)
    if not (np.all(np.isfinite(u2)) and np.all(np.isfinite(u3))):
        raise ValueError("non-finite input")
    if np.any(u2 < 0) or np.any(u3 < 0):
        raise ValueError("g_eval requires nonnegative arguments")
    p = _p_of(u2, u3, funcs)
    return np.stack([u2 + p, u3 + p])


def g_jacobian(u2, u3, funcs: ModelFunctions) -> np.ndarray:
    """Jacobian of g, shape ``(2, 2) + shape``; valid for positive arguments."""
    u2 = np.asarray(u2, dtype=float)
    u3 = np.asarray(u3, dtype=float)
    p = _p_of(u2, u3, funcs)
    dq1 = funcs.dq[0](p)
    p2 = funcs.dq[1](u2) * funcs.q[2](u3) / dq1
    p3 = funcs.q[1](u2) * funcs.dq[2](u3) / dq1
    return np.array([[1.0 + p2, p3], [p2, 1.0 + p3]])


def g_inverse(p, funcs: ModelFunctions, tol: float = 1e-13, max_iter: int = 100,
              max_halvings: int = 30, closed_form: bool = True) -> np.ndarray:
    """Solve ``g(u2, u3) = (v, w)``; returns an array stacked as ``(u2, u3)``.

    On the axes the solution is explicit (``v = 0`` forces ``u2 = 0`` and
    ``u3 = w``); elsewhere damped Newton in log coordinates until
    ``|g_i - p_i| <= tol * (1 + p_i)``. For identity ``q`` the closed form is
    used as the starting point unless ``closed_form=False``.
    """
    pw, shape = _as_points(p, 2)
    if np.any(pw < 0):
        raise ValueError("g_inverse requires nonnegative targets")
    v, w = pw
    out = np.zeros_like(pw)
    out[0] = np.where(w == 0, v, 0.0)
    out[1] = np.where(v == 0, w, 0.0)
    inner = (v > 0) & (w > 0)
    if inner.any():
        use_closed = funcs.identity_q and closed_form
        if use_closed:
            _, u2, u3 = identity_g_inverse(pw[:, inner])
            out[:, inner] = np.stack([u2, u3])
        target = pw[:, inner]
        logt = np.log(target)
        contract = np.full(target.shape[1], tol)
        active = np.ones_like(target, dtype=bool)
        cols = {"idx": None}
        start = out[:, inner] if use_closed else 0.5 * target
        s = np.log(np.maximum(start, 1e-300))

        def residual(s_):
            u = np.exp(s_)
            gv = g_eval(u[0], u[1], funcs)
            idx = cols["idx"]
            tt, lt = target[:, idx], logt[:, idx]
            return np.log(gv) - lt, np.max(np.abs(gv - tt) / (1.0 + tt), axis=0)

        def jacobian(s_):
            u = np.exp(s_)
            gv = g_eval(u[0], u[1], funcs)
            J = g_jacobian(u[0], u[1], funcs)
            Jl = J * u[None, :, :] / gv[:, None, :]
            return np.moveaxis(Jl, -1, 0)

        s = _subset_newton(residual, jacobian, s, active, contract, cols, max_iter, max_halvings, "g_inverse")
        out[:, inner] = np.exp(s)
    return out.reshape(shape)


def identity_g_inverse(p) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closed-form inverse of ``(u2, u3) -> (u2 + u2 u3, u3 + u2 u3)``.

    Returns ``(u1, u2, u3)`` with ``u1 = w - u3``. Uses the cancellation-free
    branch of the quadratic formula.
    """
    p = np.asarray(p, dtype=float)
    v, w = p[0], p[1]
    if np.any(v < 0) or np.any(w < 0):
        raise ValueError("identity_g_inverse requires nonnegative v, w")

    def root(a, c):
        # positive root of x^2 + b x - a = 0 with b = c - a + 1
        b = c - a + 1.0
        disc = np.sqrt(b * b + 4.0 * a)
        with np.errstate(divide="ignore", invalid="ignore"):
            pos = np.where(b > 0, 2.0 * a / (b + disc), 0.5 * (disc - b))
        return np.where(a == 0, 0.0, pos)

    u2 = root(v, w)
    u3 = root(w, v)
    u1 = w - u3
    return u1, u2, u3


def reconstruct(v, w, funcs: ModelFunctions, closed_form: bool = True) -> np.ndarray:
    """Equilibrium triple ``(u1, u2, u3)`` with ``u1 = q1^-1(q2(u2) q3(u3))``."""
    u23 = g_inverse(np.stack([np.asarray(v, float), np.asarray(w, float)]), funcs, closed_form=closed_form)
    u1 = _p_of(u23[0], u23[1], funcs)
    return np.stack([u1, u23[0], u23[1]])


# --------------------------------------------------------------------------
# entropy flux


def J_closed_form_identity(s) -> np.ndarray:
    """Entropy flux for ``f = q = identity``.

    The integrand equals 1 below the golden-ratio point ``s0`` and
    ``1/sqrt(y(1+y))`` above it.
    """
    s = np.asarray(s, dtype=float)
    s0 = GOLDEN_S0
    base = math.log(0.5 + s0 + math.sqrt(s0 + s0 * s0))
    with np.errstate(invalid="ignore"):
        upper = np.log(0.5 + s + np.sqrt(s + s * s)) - base
    return np.minimum(s, s0) + np.where(s > s0, upper, 0.0)


def _J_integrand(i: int, funcs: ModelFunctions):
    q, dq, df = funcs.q[i], funcs.dq[i], funcs.df[i]

    def ratio(y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            qy = q(y)
            r = dq(y) * df(y) / (qy * (1.0 + qy))
        return np.where(np.isnan(r) | (qy <= 0), np.inf, r)

    return ratio


def J_flux(s, i: int, funcs: ModelFunctions, method: str = "auto", atol: float = 1e-12):
    """Entropy flux ``J_i(s) = int_0^s min(1, sqrt(q' f' / (q (1 + q)))) dy``.

    ``method='auto'`` uses the closed form when ``f = q = identity`` and
    quadrature otherwise; ``'quad'`` forces quadrature. The quadrature splits
    the interval at the kinks where the ratio crosses 1 (located by
    root-bracketing to 1e-12).
    """
    if method not in ("auto", "quad", "closed"):
        raise ValueError(f"unknown method {method!r}")
    if (method == "closed" or method == "auto") and funcs.identity_q and funcs.identity_f:
        return J_closed_form_identity(s)
    if method == "closed":
        raise ValueError("closed form only available for f = q = identity")
    ratio = _J_integrand(i, funcs)

    def integrand(y):
        return min(1.0, math.sqrt(float(ratio(y))))

    def one(sv: float) -> float:
        if sv < 0:
            raise ValueError("J_flux requires s >= 0")
        if sv == 0:
            return 0.0
        ys = np.concatenate([np.geomspace(sv * 1e-9, sv, 400)])
        g = np.log(ratio(ys))
        kinks = []
        for a, b, ga, gb in zip(ys[:-1], ys[1:], g[:-1], g[1:]):
            if np.isfinite(ga) and np.isfinite(gb) and (ga > 0) != (gb > 0):
                kinks.append(brentq(lambda y: math.log(float(ratio(y))), a, b, xtol=1e-12))
        pts = [0.0] + kinks + [sv]
        total = 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            mid = 0.5 * (a + b)
            if ratio(mid) >= 1.0:
                total += b - a
            else:
                val, _ = quad(integrand, a, b, epsabs=atol, epsrel=1e-13, limit=200)
                total += val
        return total

    arr = np.asarray(s, dtype=float)
    if arr.ndim == 0:
        return one(float(arr))
    return np.vectorize(one)(arr)
