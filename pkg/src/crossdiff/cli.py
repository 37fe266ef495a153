"""Command-line front end: ``crossdiff {simulate,sweep,limit,check}``.

Configuration is an INI file with the sections ``[model]``, ``[grid]``,
``[scheme]``, ``[init]``, ``[output]`` and ``[sweep]``; every key is optional
and defaults to the reference setup. Exit codes: 0 success, 1 configuration
error, 2 solver divergence, 3 failed check.
"""

from __future__ import annotations

import argparse
import ast
import configparser
import csv
import logging
import math
import operator
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .entropy import EntropyReport
from .fastlimit import SweepConfig, SweepResult, eps_sweep, solve_limit_system, well_prepared_init
from .grid import Grid1D
from .maps import DivergenceError, F_eval, F_inverse, g_eval, g_inverse, identity_g_inverse
from .model import (
    ModelFunctions,
    PowerLawParams,
    build_power_law,
    check_cross_diffusion_bound,
    check_power_law_conditions,
    check_limit_continuity,
    check_model,
    identity_model,
)
from .stepper import RunDivergence, SchemeParams, State, run

log = logging.getLogger("crossdiff")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_CHECK = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# initial-data expressions


_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_CONSTS = {"pi": math.pi}


def eval_expression(expr: str, x: np.ndarray) -> np.ndarray:
    """Evaluate a profile such as ``1 + 0.5*cos(pi*x)`` at the points ``x``.

    Numbers, ``x``, ``pi``, the binary operators ``+ - * / ^`` (``**`` also
    works), unary signs and ``sin``, ``cos``, ``exp`` are accepted; anything
    else raises :class:`ConfigError`.
    """
    try:
        # "^" is rewritten to "**" so that it binds tighter than "*" and unary minus
        tree = ast.parse(expr.strip().replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {expr!r}: {exc.msg}") from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id == "x":
                return x
            if node.id in _CONSTS:
                return _CONSTS[node.id]
            raise ConfigError(f"unknown name {node.id!r} in {expr!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
            val = ev(node.operand)
            return -val if isinstance(node.op, ast.USub) else val
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS
                and len(node.args) == 1 and not node.keywords):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ConfigError(f"unsupported construct {ast.dump(node)[:40]}... in {expr!r}")

    with np.errstate(all="ignore"):
        val = np.broadcast_to(np.asarray(ev(tree), dtype=float), x.shape).copy()
    if not np.all(np.isfinite(val)):
        raise ConfigError(f"expression {expr!r} is not finite on the grid")
    return val


# --------------------------------------------------------------------------
# configuration


_DEFAULTS = {
    "model": {"preset": "powerlaw", "alpha1": "1", "alpha2": "1", "alpha3": "1", "delta": "5",
              "beta": "1", "gamma": "1", "alpha": "0.005", "certified": "false"},
    "grid": {"N": "128", "L": "1"},
    "scheme": {"tau": "1e-3", "eta": "0", "eps": "1e-2", "newton_tol": "1e-9", "newton_max": "50",
               "strict_tau": "false", "T_final": "0.5"},
    "init": {"well_prepared": "true", "u1": "", "u2": "1 + 0.5*cos(pi*x)", "u3": "1 + 0.5*sin(pi*x)^2"},
    "output": {"dir": "out", "stride": "10", "monitors": "true"},
    "sweep": {"epsilons": "0.1, 0.01, 0.001"},
}


@dataclass
class RunConfig:
    funcs: ModelFunctions
    preset: str
    params: Optional[PowerLawParams]
    grid: Grid1D
    scheme: SchemeParams
    T_final: float
    well_prepared: bool
    init_expr: dict
    out_dir: Path
    stride: int
    monitors: bool
    epsilons: list = field(default_factory=list)

    def initial_state(self) -> State:
        x = self.grid.x
        u2 = eval_expression(self.init_expr["u2"], x)
        u3 = eval_expression(self.init_expr["u3"], x)
        if self.well_prepared:
            try:
                return well_prepared_init(u2, u3, self.funcs, self.grid)
            except ValueError as exc:
                raise ConfigError(f"[init]: {exc}") from None
        if not self.init_expr.get("u1"):
            raise ConfigError("[init] u1 is required when well_prepared = false")
        u1 = eval_expression(self.init_expr["u1"], x)
        u = np.stack([u1, u2, u3])
        if np.any(u <= 0):
            raise ConfigError("[init]: initial data must be strictly positive")
        return State(u, 0.0, self.grid)


def _get(cp, section, key, conv, check=None, what=""):
    raw = cp.get(section, key)
    try:
        val = conv(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {conv.__name__}") from None
    if check is not None and not check(val):
        raise ConfigError(f"[{section}] {key} = {raw!r}: {what}")
    return val


def _bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


_bool.__name__ = "boolean"


def parse_epsilons(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"epsilons {text!r}: expected a comma-separated list of numbers") from None
    if not vals:
        raise ConfigError("epsilons: empty list")
    if any(not (v > 0 and math.isfinite(v)) for v in vals):
        raise ConfigError(f"epsilons {text!r}: values must be positive")
    if len(set(vals)) != len(vals):
        raise ConfigError(f"epsilons {text!r}: duplicate values")
    return vals


def load_config(path: Optional[str], out_override: Optional[str] = None) -> RunConfig:
    """Read an INI file over the built-in defaults and validate it."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_dict(_DEFAULTS)
    if path is not None:
        user = configparser.ConfigParser(interpolation=None)
        user.optionxform = str
        try:
            with open(path, encoding="utf-8") as fh:
                user.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path!r}: {exc}") from None
        for sec in user.sections():
            if sec not in _DEFAULTS:
                raise ConfigError(f"unknown section [{sec}]")
            for key, val in user.items(sec):
                if key not in _DEFAULTS[sec]:
                    raise ConfigError(f"unknown key [{sec}] {key}")
                cp.set(sec, key, val)

    preset = cp.get("model", "preset").strip().lower()
    params = None
    if preset == "identity":
        funcs = identity_model()
    elif preset == "powerlaw":
        names = ("alpha1", "alpha2", "alpha3", "delta", "beta", "gamma", "alpha")
        vals = {k: _get(cp, "model", k, float, math.isfinite, "must be finite") for k in names}
        params = PowerLawParams(**vals)
        try:
            funcs = build_power_law(params)
        except ValueError as exc:
            raise ConfigError(f"[model]: {exc}") from None
        if _get(cp, "model", "certified", _bool) and not check_power_law_conditions(params).passed:
            raise ConfigError("[model] certified = true but the parameters fail the power-law conditions:\n"
                              + check_power_law_conditions(params).to_text())
    else:
        raise ConfigError(f"[model] preset = {preset!r}: expected 'powerlaw' or 'identity'")

    N = _get(cp, "grid", "N", int, lambda v: v >= 2, "must be at least 2")
    L = _get(cp, "grid", "L", float, lambda v: v > 0 and math.isfinite(v), "must be positive")
    pos = (lambda v: v > 0 and math.isfinite(v), "must be positive")
    tau = _get(cp, "scheme", "tau", float, *pos)
    eta = _get(cp, "scheme", "eta", float, lambda v: v >= 0 and math.isfinite(v), "must be nonnegative")
    eps = _get(cp, "scheme", "eps", float, *pos)
    tol = _get(cp, "scheme", "newton_tol", float, *pos)
    nmax = _get(cp, "scheme", "newton_max", int, lambda v: v >= 1, "must be at least 1")
    strict = _get(cp, "scheme", "strict_tau", _bool)
    T = _get(cp, "scheme", "T_final", float, *pos)
    scheme = SchemeParams(tau=tau, eta=eta, eps=eps, newton_tol=tol, newton_max=nmax, strict_tau=strict)
    try:
        scheme.validate()
    except ValueError as exc:
        raise ConfigError(f"[scheme] strict_tau: {exc}") from None

    init = {k: cp.get("init", k) for k in ("u1", "u2", "u3")}
    cfg = RunConfig(
        funcs=funcs,
        preset=preset,
        params=params,
        grid=Grid1D(N, L),
        scheme=scheme,
        T_final=T,
        well_prepared=_get(cp, "init", "well_prepared", _bool),
        init_expr=init,
        out_dir=Path(out_override if out_override is not None else cp.get("output", "dir")),
        stride=_get(cp, "output", "stride", int, lambda v: v >= 1, "must be at least 1"),
        monitors=_get(cp, "output", "monitors", _bool),
        epsilons=parse_epsilons(cp.get("sweep", "epsilons")),
    )
    return cfg


# --------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _snapshot_levels(n_levels: int, stride: int) -> list[int]:
    levels = list(range(0, n_levels, stride))
    if levels[-1] != n_levels - 1:
        levels.append(n_levels - 1)
    return levels


def field_rows(times, fields, x, stride: int):
    for k in _snapshot_levels(len(times), stride):
        for j, xj in enumerate(x):
            yield [times[k], xj, *fields[k, :, j]]


# --------------------------------------------------------------------------
# commands


def _write_run(cfg: RunConfig, times, states, reports) -> None:
    write_csv(cfg.out_dir / "fields.csv", ("t", "x", "u1", "u2", "u3"),
              field_rows(times, states, cfg.grid.x, cfg.stride))
    if cfg.monitors:
        write_csv(cfg.out_dir / "entropy.csv", EntropyReport.FIELDS, (r.row() for r in reports))


def cmd_simulate(cfg: RunConfig) -> int:
    init = cfg.initial_state()
    try:
        res = run(init, cfg.T_final, cfg.scheme, cfg.funcs, monitors=cfg.monitors)
    except RunDivergence as exc:
        part = exc.partial
        _write_run(cfg, part.times, part.states, part.reports)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    _write_run(cfg, res.times, res.states, res.reports)
    m = res.masses()
    dev = np.max(np.abs(m - m[0]) / np.abs(m[0]))
    print(f"simulate: {len(res.times) - 1} steps to t={res.times[-1]:.6g}, "
          f"max relative mass deviation {dev:.3g}, min u {res.states.min():.6g}")
    print(f"wrote {cfg.out_dir}")
    return EXIT_OK


def sweep_rows(result: SweepResult):
    return ([getattr(r, k) for k in SweepResult.FIELDS] for r in result.rows)


def cmd_sweep(cfg: RunConfig, epsilons: Optional[list[float]] = None) -> int:
    eps = epsilons if epsilons is not None else cfg.epsilons
    init = cfg.initial_state()
    config = SweepConfig(cfg.funcs, cfg.grid, cfg.T_final, cfg.scheme, init.u[1], init.u[2])
    if not cfg.well_prepared:
        log.warning("sweep uses well-prepared data built from u2, u3; u1 from [init] is ignored")
    try:
        result = eps_sweep(config, eps)
    except DivergenceError as exc:
        print(f"error: limit solve failed: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    write_csv(cfg.out_dir / "sweep.csv", SweepResult.FIELDS, sweep_rows(result))
    print(f"{'epsilon':>10} {'defect_L1_QT':>14} {'gap_v':>12} {'gap_w':>12} {'ratio':>12}")
    for r in result.rows:
        if r.ok:
            print(f"{r.epsilon:10.3g} {r.defect_L1_QT:14.6e} {r.gap_v:12.6e} {r.gap_w:12.6e} {r.ratio_sqrt_eps:12.6e}")
        else:
            print(f"{r.epsilon:10.3g} failed: {r.error}")
    print(f"wrote {cfg.out_dir / 'sweep.csv'}")
    return EXIT_OK if all(r.ok for r in result.rows) else EXIT_DIVERGED


def cmd_limit(cfg: RunConfig) -> int:
    u = cfg.initial_state().u
    try:
        res = solve_limit_system(u[0] + u[1], u[0] + u[2], cfg.T_final, cfg.scheme, cfg.funcs, cfg.grid)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    x = cfg.grid.x
    both = np.concatenate([res.vw, res.u], axis=1)
    write_csv(cfg.out_dir / "limit_fields.csv", ("t", "x", "v", "w", "u1", "u2", "u3"),
              field_rows(res.times, both, x, cfg.stride))
    m = res.masses()
    write_csv(cfg.out_dir / "limit_entropy.csv", ("step", "t", "h0", "mass_v", "mass_w"),
              ([k, res.times[k], res.h0[k], m[k, 0], m[k, 1]] for k in range(len(res.times))))
    print(f"limit: {len(res.times) - 1} steps, h0 {res.h0[0]:.10g} -> {res.h0[-1]:.10g}")
    print(f"wrote {cfg.out_dir}")
    return EXIT_OK


def round_trip_errors(funcs: ModelFunctions, rng: np.random.Generator, n: int = 100) -> dict:
    """Maximum round-trip errors of the F and g inversions on random points
    of [0, 10]^3 and [0, 10]^2; for the identity preset also the distance
    between the Newton and closed-form g inverses."""
    u = rng.uniform(0.0, 10.0, size=(3, n))
    out = {"F": float(np.max(np.abs(F_inverse(F_eval(u, funcs), funcs) - u)))}
    p = rng.uniform(0.0, 10.0, size=(2, n))
    out["g"] = float(np.max(np.abs(g_inverse(g_eval(p[0], p[1], funcs), funcs) - p)))
    if funcs.identity_q:
        vw = rng.uniform(0.0, 10.0, size=(2, n))
        newton = g_inverse(vw, funcs, closed_form=False)
        closed = np.stack(identity_g_inverse(vw)[1:])
        out["g_closed_vs_newton"] = float(np.max(np.abs(newton - closed)))
    return out


def cmd_check(cfg: RunConfig, seed: int = 0) -> int:
    report = check_model(cfg.funcs)
    if cfg.params is not None:
        report = check_power_law_conditions(cfg.params).merge(report)
    report = report.merge(check_cross_diffusion_bound(cfg.funcs))
    print(report.to_text())
    advisory = check_limit_continuity(cfg.funcs)
    for c in advisory.checks:
        print(f"  [advisory {'ok' if c.passed else 'warn'}] {c.name}: {c.note}")
    errs = round_trip_errors(cfg.funcs, np.random.default_rng(seed))
    ok = report.passed
    for name, val in errs.items():
        good = val <= 1e-10
        ok = ok and good
        print(f"  [{'pass' if good else 'FAIL'}] round trip {name}: max error {val:.3e} (bound 1e-10)")
    print("check:", "PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_CHECK


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crossdiff", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides [output] dir)")
    common.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("simulate", parents=[common], help="run the full system, write fields.csv and entropy.csv")
    sp = sub.add_parser("sweep", parents=[common], help="eps sweep against the limit system, write sweep.csv")
    sp.add_argument("--epsilons", metavar="LIST", help="comma-separated eps values (overrides [sweep] epsilons)")
    sub.add_parser("limit", parents=[common], help="run the limit system, write limit_fields.csv and limit_entropy.csv")
    cp = sub.add_parser("check", parents=[common], help="validate the model and the inversion maps")
    cp.add_argument("--seed", type=int, default=0, help="seed for the random round-trip points")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.out)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "sweep":
            eps = parse_epsilons(args.epsilons) if args.epsilons else None
            return cmd_sweep(cfg, eps)
        if args.command == "limit":
            return cmd_limit(cfg)
        return cmd_check(cfg, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
