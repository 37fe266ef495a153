"""Nonlinearity bundles for the three-species reaction-cross-diffusion system.

A :class:`ModelFunctions` bundle carries the diffusion functions ``f_i``,
the cross-diffusion functions ``f12``/``f21``, the reaction functions ``q_i``
and all derivatives the solvers need. Two constructors are provided: the
power-law family (:func:`build_power_law`) and a generic bundle built from
user callables (:func:`from_callables`). The validators in this module check
the structural assumptions on sample grids and return an
:class:`AssumptionReport`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

Func1 = Callable[[np.ndarray], np.ndarray]
Func2 = Callable[[np.ndarray, np.ndarray], np.ndarray]

# delta used for the weak cross-diffusion condition on the certified power-law family
CERTIFIED_DELTA = 1.0 - 1.0 / math.sqrt(2.0)


class ModelError(ValueError):
    """Raised for invalid model parameters."""


@dataclass(frozen=True)
class PowerLawParams:
    """Parameters of the power-law family.

    ``f_i(u) = alpha_i*u + u**delta``, ``q_i(u) = u**beta``,
    ``f12 = alpha*u1**gamma*u2`` and ``f21 = alpha*u1*u2**gamma``.
    """

    alpha1: float = 1.0
    alpha2: float = 1.0
    alpha3: float = 1.0
    delta: float = 5.0
    beta: float = 1.0
    gamma: float = 1.0
    alpha: float = 0.005

    def validate(self) -> None:
        for name in ("alpha1", "alpha2", "alpha3", "delta", "beta", "gamma", "alpha"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ModelError(f"{name} must be finite, got {value!r}")
        for name in ("alpha1", "alpha2", "alpha3"):
            if getattr(self, name) <= 0:
                raise ModelError(f"{name} must be positive, got {getattr(self, name)!r}")
        for name in ("delta", "beta", "gamma"):
            if getattr(self, name) < 1:
                raise ModelError(f"exponent {name} must be >= 1, got {getattr(self, name)!r}")
        if self.alpha < 0:
            raise ModelError(f"alpha must be nonnegative, got {self.alpha!r}")


@dataclass(frozen=True)
class ModelFunctions:
    """Immutable bundle of the structural functions and their derivatives.

    All callables act elementwise on numpy arrays. Optional hooks
    (``q_inv``, ``q_ratio``, ``entropy_density``, ``cross_bound_sides``) carry closed
    forms; when absent, generic numerical fallbacks are used.
    """

    f: tuple[Func1, Func1, Func1]
    df: tuple[Func1, Func1, Func1]
    f12: Func2
    f21: Func2
    d1f12: Func2
    d2f12: Func2
    d1f21: Func2
    d2f21: Func2
    q: tuple[Func1, Func1, Func1]
    dq: tuple[Func1, Func1, Func1]
    kappa1: float
    q_inv: Optional[tuple[Func1, Func1, Func1]] = None
    # q_i/q_i', finite at zero for the power-law family
    q_ratio: Optional[tuple[Func1, Func1, Func1]] = None
    # s -> int_1^s log q_i
    entropy_density: Optional[tuple[Func1, Func1, Func1]] = None
    cross_bound_sides: Optional[Callable[[np.ndarray, np.ndarray, float, float], tuple[np.ndarray, np.ndarray]]] = None
    identity_q: bool = False
    identity_f: bool = False
    name: str = "generic"
    params: Optional[PowerLawParams] = None
    certified_delta: Optional[float] = None

    def F(self, u: np.ndarray) -> np.ndarray:
        u1, u2, u3 = u[0], u[1], u[2]
        return np.stack(
            [
                self.f[0](u1) + self.f12(u1, u2),
                self.f[1](u2) + self.f21(u1, u2),
                self.f[2](u3),
            ]
        )

    def F_prime(self, u: np.ndarray) -> np.ndarray:
        """Jacobian of F, shape ``(3, 3) + u.shape[1:]``."""
        u1, u2, u3 = u[0], u[1], u[2]
        zero = np.zeros_like(np.asarray(u1, dtype=float))
        return np.array(
            [
                [self.df[0](u1) + self.d1f12(u1, u2), self.d2f12(u1, u2) + zero, zero],
                [self.d1f21(u1, u2) + zero, self.df[1](u2) + self.d2f21(u1, u2), zero],
                [zero, zero, self.df[2](u3) + zero],
            ]
        )

    def q_inverse(self, i: int, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.q_inv is not None:
            return self.q_inv[i](y)
        return invert_increasing(self.q[i], self.dq[i], y)


def invert_increasing(func: Func1, dfunc: Func1, y: np.ndarray, max_iter: int = 200) -> np.ndarray:
    """Invert a strictly increasing ``func`` with ``func(0) = 0`` elementwise.

    Safeguarded Newton inside a bracket that starts at ``[0, 1]`` and is
    grown geometrically until it encloses the target.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise ModelError("inverse requires finite nonnegative targets")
    shape = y.shape
    y = y.ravel().copy()
    lo = np.zeros_like(y)
    hi = np.ones_like(y)
    for _ in range(2000):
        short = func(hi) < y
        if not short.any():
            break
        lo[short] = hi[short]
        hi[short] *= 2.0
    else:
        raise ModelError("could not bracket the inverse")
    x = 0.5 * (lo + hi)
    active = y > 0
    x[~active] = 0.0
    for _ in range(max_iter):
        if not active.any():
            break
        xa, ya = x[active], y[active]
        r = func(xa) - ya
        below = r < 0
        lo_a, hi_a = lo[active], hi[active]
        lo_a = np.where(below, xa, lo_a)
        hi_a = np.where(below, hi_a, xa)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = xa - r / dfunc(xa)
        bad = ~np.isfinite(xn) | (xn <= lo_a) | (xn >= hi_a)
        xn = np.where(bad, 0.5 * (lo_a + hi_a), xn)
        done = (np.abs(xn - xa) <= 4e-16 * np.maximum(xa, 1e-300)) | (r == 0) | (hi_a - lo_a <= 4e-16 * hi_a)
        lo[active], hi[active] = lo_a, hi_a
        x[active] = np.where(r == 0, xa, xn)
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return x.reshape(shape)


def build_power_law(params: PowerLawParams) -> ModelFunctions:
    """Build the power-law bundle with exact derivatives and ``q`` inverse.

    Examples
    --------
    >>> m = build_power_law(PowerLawParams(1, 1, 1, 5, 1, 1, 0.005))
    >>> float(m.f[0](np.array(2.0)))
    34.0
    """
    params.validate()
    a = (params.alpha1, params.alpha2, params.alpha3)
    dl, b, g, al = params.delta, params.beta, params.gamma, params.alpha

    def make_f(ai):
        return lambda s: ai * s + s**dl

    def make_df(ai):
        return lambda s: ai + dl * s ** (dl - 1.0)

    q = lambda s: s**b
    dq = lambda s: b * s ** (b - 1.0)
    qinv = lambda y: np.asarray(y, dtype=float) ** (1.0 / b)
    qratio = lambda s: s / b

    def hdens(s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            slog = np.where(s > 0, s * np.log(np.where(s > 0, s, 1.0)), 0.0)
        return b * (slog - s + 1.0)

    def cross_bound_sides(s1, s2, eta, delta):
        # inequality multiplied by q1 q2 (1+eta q1)(1+eta q2)/(q1' q2'); finite on the axes
        q1, q2 = s1**b, s2**b
        e1, e2 = 1.0 + eta * q1, 1.0 + eta * q2
        mixed = al * s1 ** (g - 1.0) / e1 + al * s2 ** (g - 1.0) / e2
        lhs = (s1 / b) * (s2 / b) * e1 * e2 * (b * mixed) ** 2
        rhs = (
            2.0
            * (1.0 - delta) ** 2
            * (a[0] + dl * s1 ** (dl - 1.0) + al * g * s1 ** (g - 1.0) * s2)
            * (a[1] + dl * s2 ** (dl - 1.0) + al * g * s1 * s2 ** (g - 1.0))
        )
        return lhs, rhs

    certified = check_power_law_conditions(params).passed
    return ModelFunctions(
        f=tuple(make_f(ai) for ai in a),
        df=tuple(make_df(ai) for ai in a),
        f12=lambda s1, s2: al * s1**g * s2,
        f21=lambda s1, s2: al * s1 * s2**g,
        d1f12=lambda s1, s2: al * g * s1 ** (g - 1.0) * s2,
        d2f12=lambda s1, s2: al * s1**g + 0.0 * s2,
        d1f21=lambda s1, s2: al * s2**g + 0.0 * s1,
        d2f21=lambda s1, s2: al * g * s1 * s2 ** (g - 1.0),
        q=(q, q, q),
        dq=(dq, dq, dq),
        kappa1=min(a),
        q_inv=(qinv, qinv, qinv),
        q_ratio=(qratio, qratio, qratio),
        entropy_density=(hdens, hdens, hdens),
        cross_bound_sides=cross_bound_sides,
        identity_q=(b == 1.0),
        name="power_law",
        params=params,
        certified_delta=CERTIFIED_DELTA if certified else None,
    )


def identity_model() -> ModelFunctions:
    """``f_i(s) = q_i(s) = s`` without cross-diffusion (the closed-form example)."""
    ident = lambda s: np.asarray(s, dtype=float) * 1.0
    one = lambda s: np.ones_like(np.asarray(s, dtype=float))
    zero2 = lambda s1, s2: 0.0 * s1 * s2
    plain = build_power_law(PowerLawParams(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0))
    return ModelFunctions(
        f=(ident, ident, ident),
        df=(one, one, one),
        f12=zero2,
        f21=zero2,
        d1f12=zero2,
        d2f12=zero2,
        d1f21=zero2,
        d2f21=zero2,
        q=(ident, ident, ident),
        dq=(one, one, one),
        kappa1=1.0,
        q_inv=(ident, ident, ident),
        q_ratio=(ident, ident, ident),
        entropy_density=plain.entropy_density,
        cross_bound_sides=None,
        identity_q=True,
        identity_f=True,
        name="identity",
        certified_delta=CERTIFIED_DELTA,
    )


def from_callables(
    f: Sequence[Func1],
    df: Sequence[Func1],
    f12: Func2,
    f21: Func2,
    d1f12: Func2,
    d2f12: Func2,
    d1f21: Func2,
    d2f21: Func2,
    q: Sequence[Func1],
    dq: Sequence[Func1],
    kappa1: float,
    q_inv: Optional[Sequence[Func1]] = None,
    certified_delta: Optional[float] = None,
    name: str = "generic",
) -> ModelFunctions:
    """Generic bundle from user callables; derivatives are cross-checked by
    :func:`check_model`."""
    if not (math.isfinite(kappa1) and kappa1 > 0):
        raise ModelError(f"kappa1 must be positive and finite, got {kappa1!r}")
    return ModelFunctions(
        f=tuple(f), df=tuple(df), f12=f12, f21=f21,
        d1f12=d1f12, d2f12=d2f12, d1f21=d1f21, d2f21=d2f21,
        q=tuple(q), dq=tuple(dq), kappa1=float(kappa1),
        q_inv=tuple(q_inv) if q_inv is not None else None,
        name=name, certified_delta=certified_delta,
    )


# --------------------------------------------------------------------------
# assumption reports


@dataclass
class Witness:
    point: tuple
    lhs: float
    rhs: float

    def __str__(self) -> str:
        pt = ", ".join(f"{v:.6g}" for v in self.point)
        return f"at ({pt}): lhs={self.lhs:.17g} rhs={self.rhs:.17g}"


@dataclass
class CheckResult:
    name: str
    inequality: str
    passed: bool
    witnesses: list[Witness] = field(default_factory=list)
    note: str = ""


@dataclass
class AssumptionReport:
    checks: list[CheckResult] = field(default_factory=list)
    delta: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, check: CheckResult) -> None:
        self.checks.append(check)

    def merge(self, other: "AssumptionReport") -> "AssumptionReport":
        out = AssumptionReport(self.checks + other.checks, self.delta if self.delta is not None else other.delta)
        return out

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def to_text(self) -> str:
        lines = [f"assumption certificate: {'PASS' if self.passed else 'FAIL'}"]
        if self.delta is not None:
            lines.append(f"  delta = {self.delta:.17g}")
        for c in self.checks:
            lines.append(f"  [{'pass' if c.passed else 'FAIL'}] {c.name}: {c.inequality}")
            if c.note:
                lines.append(f"      {c.note}")
            for w in c.witnesses:
                lines.append(f"      witness {w}")
        return "\n".join(lines)


def check_power_law_conditions(params: PowerLawParams) -> AssumptionReport:
    """Exact parameter conditions that certify the power-law family."""
    p = params
    report = AssumptionReport(delta=CERTIFIED_DELTA)
    conds = [
        ("beta >= 1", p.beta, 1.0),
        ("gamma >= 1", p.gamma, 1.0),
        ("delta >= 1 + 4*max(beta, gamma-1)", p.delta, 1.0 + 4.0 * max(p.beta, p.gamma - 1.0)),
        ("min(alpha1, alpha2, delta) >= 1024*alpha^2", min(p.alpha1, p.alpha2, p.delta), 1024.0 * p.alpha**2),
    ]
    for text, lhs, rhs in conds:
        ok = bool(lhs >= rhs)
        report.add(
            CheckResult(
                name="power_law",
                inequality=text,
                passed=ok,
                witnesses=[] if ok else [Witness((), float(lhs), float(rhs))],
            )
        )
    return report


def default_sample_axis(n: int = 64, lo: float = 1e-2, hi: float = 10.0) -> np.ndarray:
    return np.concatenate([[0.0], np.geomspace(lo, hi, n)])


def _worst_witnesses(mask, pts, lhs, rhs, limit=5) -> list[Witness]:
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    # largest violations first
    gap = np.where(np.isfinite(lhs - rhs), lhs - rhs, np.inf)[idx]
    idx = idx[np.argsort(-gap)][:limit]
    return [Witness(tuple(float(c[i]) for c in pts), float(lhs[i]), float(rhs[i])) for i in idx]


def check_cross_diffusion_bound(
    funcs: ModelFunctions,
    eta_max: float = 1.0,
    delta_cand: float = CERTIFIED_DELTA,
    sample_grid: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> AssumptionReport:
    """Check the weak cross-diffusion inequality and the determinant sign.

    The inequality is tested at every ``(s1, s2)`` of the tensor grid and
    ``eta in {0, eta_max/2, eta_max}``. Bundles with an ``cross_bound_sides`` hook are
    evaluated in the scaled form that stays finite on the axes; generic
    bundles skip points with a zero coordinate.
    """
    if not eta_max > 0:
        raise ModelError("eta_max must be positive")
    if not 0 < delta_cand < 1:
        raise ModelError("delta_cand must lie in (0, 1)")
    if sample_grid is None:
        ax = default_sample_axis()
        sample_grid = (ax, ax)
    s1, s2 = np.meshgrid(np.asarray(sample_grid[0], float), np.asarray(sample_grid[1], float), indexing="ij")
    s1, s2 = s1.ravel(), s2.ravel()
    report = AssumptionReport(delta=delta_cand)

    viol_pts, viol_l, viol_r = [], [], []
    for eta in (0.0, 0.5 * eta_max, eta_max):
        with np.errstate(all="ignore"):
            if funcs.cross_bound_sides is not None:
                a, b = s1, s2
                lhs, rhs = funcs.cross_bound_sides(a, b, eta, delta_cand)
            else:
                keep = (s1 > 0) & (s2 > 0)
                a, b = s1[keep], s2[keep]
                q1, q2 = funcs.q[0](a), funcs.q[1](b)
                dq1, dq2 = funcs.dq[0](a), funcs.dq[1](b)
                e1, e2 = 1.0 + eta * q1, 1.0 + eta * q2
                lhs = (dq1 * funcs.d2f12(a, b) / (q1 * e1) + dq2 * funcs.d1f21(a, b) / (q2 * e2)) ** 2
                rhs = (
                    2.0 * (1.0 - delta_cand) ** 2 * dq1 * dq2
                    * (funcs.df[0](a) + funcs.d1f12(a, b))
                    * (funcs.df[1](b) + funcs.d2f21(a, b))
                    / (q1 * q2 * e1 * e2)
                )
        lhs, rhs = np.broadcast_to(lhs, a.shape), np.broadcast_to(rhs, a.shape)
        bad = ~(np.isfinite(lhs) & np.isfinite(rhs)) | (lhs > rhs)
        viol_pts.append((a[bad], b[bad], np.full(bad.sum(), eta)))
        viol_l.append(lhs[bad])
        viol_r.append(rhs[bad])
    pts = tuple(np.concatenate([v[k] for v in viol_pts]) for k in range(3))
    lhs_all, rhs_all = np.concatenate(viol_l), np.concatenate(viol_r)
    mask = np.ones(lhs_all.shape, bool)
    report.add(
        CheckResult(
            name="cross_diffusion_bound",
            inequality="(mixed term)^2 <= 2(1-delta)^2 (diagonal product), eta in {0, eta_max/2, eta_max}",
            passed=not mask.any(),
            witnesses=_worst_witnesses(mask, pts, lhs_all, rhs_all),
            note=f"{s1.size} grid points, {int(mask.sum())} violations",
        )
    )

    with np.errstate(all="ignore"):
        diag = (funcs.df[0](s1) + funcs.d1f12(s1, s2)) * (funcs.df[1](s2) + funcs.d2f21(s1, s2))
        off = funcs.d2f12(s1, s2) * funcs.d1f21(s1, s2)
    diag, off = np.broadcast_to(diag, s1.shape), np.broadcast_to(off, s1.shape)
    bad = ~(np.isfinite(diag) & np.isfinite(off)) | (off >= diag)
    report.add(
        CheckResult(
            name="det",
            inequality="d2f12*d1f21 < (f1'+d1f12)(f2'+d2f21)",
            passed=not bad.any(),
            witnesses=_worst_witnesses(bad, (s1, s2), off, diag),
        )
    )
    return report


def _fd_check(name, fn, dfn, args, k, report_list, rtol=1e-5):
    args = [np.asarray(a, float) for a in args]
    x = args[k]
    step = 1e-6 * np.maximum(np.abs(x), 1.0)
    ap, am = list(args), list(args)
    ap[k] = x + step
    am[k] = x - step
    fd = (fn(*ap) - fn(*am)) / (2 * step)
    an = np.broadcast_to(dfn(*args), fd.shape)
    err = np.abs(fd - an)
    bad = err > rtol * np.maximum(1.0, np.abs(an))
    report_list.append(
        CheckResult(
            name="derivatives",
            inequality=f"|finite difference - {name}| <= {rtol:g}*max(1,|{name}|)",
            passed=not bad.any(),
            witnesses=_worst_witnesses(bad, tuple(args), fd, an),
        )
    )


def check_model(funcs: ModelFunctions, s_max: float = 100.0, n: int = 200) -> AssumptionReport:
    """Sampled structural checks: diffusion growth, sign and vanishing of the
    cross terms, reaction-rate shape, q-inverse consistency, derivative
    consistency for generic bundles, and the sampled growth ratio."""
    s = np.concatenate([[0.0], np.geomspace(1e-3, s_max, n)])
    report = AssumptionReport(delta=funcs.certified_delta)
    with np.errstate(all="ignore"):
        for i in range(3):
            fi, dfi = funcs.f[i](s), funcs.df[i](s)
            zero_ok = funcs.f[i](np.array(0.0)) == 0
            bad = ~np.isfinite(dfi) | (dfi < funcs.kappa1)
            report.add(CheckResult("diffusion_growth", f"f{i+1}(0) = 0 and f{i+1}' >= kappa1 = {funcs.kappa1:g}",
                                   bool(zero_ok) and not bad.any(),
                                   _worst_witnesses(bad, (s,), np.full_like(s, funcs.kappa1), dfi)))
            bad = fi < funcs.kappa1 * s * (1 - 1e-14)
            report.add(CheckResult("diffusion_growth", f"f{i+1}(s) >= kappa1*s", not bad.any(),
                                   _worst_witnesses(bad, (s,), funcs.kappa1 * s, fi)))

        a, b = np.meshgrid(s[::10], s[::10], indexing="ij")
        a, b = a.ravel(), b.ravel()
        for label, fn, dn in (("f12", funcs.f12, (funcs.d1f12, funcs.d2f12)),
                              ("f21", funcs.f21, (funcs.d1f21, funcs.d2f21))):
            val = np.broadcast_to(fn(a, b), a.shape)
            d1, d2 = np.broadcast_to(dn[0](a, b), a.shape), np.broadcast_to(dn[1](a, b), a.shape)
            first = a if label == "f12" else b
            bad = (val < 0) | (d1 < 0) | (d2 < 0) | ((first == 0) & (val != 0))
            report.add(CheckResult("cross_terms", f"{label} >= 0, vanishes with its own species, partials >= 0",
                                   not bad.any(), _worst_witnesses(bad, (a, b), val, np.zeros_like(val))))

        for i in range(3):
            qi, dqi = funcs.q[i](s), funcs.dq[i](s)
            bad = (qi[0] != 0) | np.any(dqi[1:] <= 0) | ~np.any(qi >= 1)
            report.add(CheckResult("reaction_rates", f"q{i+1}(0)=0, q{i+1}'>0 on s>0, q{i+1}(s0)>=1 for a sampled s0",
                                   not bad, []))
            back = funcs.q_inverse(i, qi)
            err = np.abs(back - s)
            badm = err > 1e-12 * np.maximum(s, 1e-300)
            badm[0] = back[0] != 0
            report.add(CheckResult("q_inverse", f"q{i+1}^-1(q{i+1}(s)) = s to 1e-12 relative on [0,{s_max:g}]",
                                   not badm.any(), _worst_witnesses(badm, (s,), back, s)))

    if funcs.params is None and not funcs.identity_f:
        checks: list[CheckResult] = []
        x = s[1:]
        for i in range(3):
            _fd_check(f"f{i+1}'", funcs.f[i], funcs.df[i], (x,), 0, checks)
            _fd_check(f"q{i+1}'", funcs.q[i], funcs.dq[i], (x,), 0, checks)
        a, b = np.meshgrid(x[::10], x[::10], indexing="ij")
        _fd_check("d1f12", funcs.f12, funcs.d1f12, (a, b), 0, checks)
        _fd_check("d2f12", funcs.f12, funcs.d2f12, (a, b), 1, checks)
        _fd_check("d1f21", funcs.f21, funcs.d1f21, (a, b), 0, checks)
        _fd_check("d2f21", funcs.f21, funcs.d2f21, (a, b), 1, checks)
        for c in checks:
            report.add(c)

    ratio_max = growth_ratio_max(funcs)
    report.add(CheckResult("growth_ratio", "sampled max of q(1+q)/(q' f' (F_i s_i + 1)) on [0,1e3]^3 is finite",
                           bool(np.all(np.isfinite(ratio_max))),
                           note="sampled maxima: " + ", ".join(f"{r:.6g}" for r in ratio_max)))
    return report


def growth_ratio_max(funcs: ModelFunctions, s_max: float = 1e3, n: int = 24) -> np.ndarray:
    """Sampled maximum per species of ``q(1+q) / (q' f' (F_i(s) s_i + 1))``.

    Reported only: the growth condition is asymptotic and is not certified.
    """
    ax = np.concatenate([[0.0], np.geomspace(1e-3, s_max, n)])
    g = np.stack(np.meshgrid(ax, ax, ax, indexing="ij")).reshape(3, -1)
    with np.errstate(all="ignore"):
        F = funcs.F(g)
        out = np.empty(3)
        for i in range(3):
            si = g[i]
            qi = funcs.q[i](si)
            if funcs.q_ratio is not None:
                qq = funcs.q_ratio[i](si)
            else:
                qq = np.where(si > 0, qi / funcs.dq[i](si), 0.0)
            r = qq * (1.0 + qi) / (funcs.df[i](si) * (F[i] * si + 1.0))
            out[i] = np.max(r)
    return out


def check_limit_continuity(funcs: ModelFunctions, n: int = 40) -> AssumptionReport:
    """Advisory check that ``q1^-1(q2(u2) q3(u3)) / u_i`` approaches a finite
    limit along the axes."""
    report = AssumptionReport()
    other = np.array([0.5, 1.0, 2.0, 5.0])
    t = np.geomspace(1e-8, 1e-2, n)
    worst = 0.0
    for k in (0, 1):
        for o in other:
            s = (t, np.full_like(t, o)) if k == 0 else (np.full_like(t, o), t)
            p = funcs.q_inverse(0, funcs.q[1](s[0]) * funcs.q[2](s[1]))
            for i in (0, 1):
                r = p / s[i]
                tail = r[: n // 4]
                if not np.all(np.isfinite(tail)):
                    worst = np.inf
                else:
                    worst = max(worst, float(np.ptp(tail) / max(1.0, np.max(np.abs(tail)))))
    report.add(CheckResult("limit_continuity", "q1^-1(q2 q3)/u_i settles near the axes (advisory)",
                           bool(worst < 1e-3), note=f"max relative spread near the axes {worst:.3g}"))
    return report
