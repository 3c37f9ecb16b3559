"""Command-line sweeps producing CSV/JSON tables.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 failed
verification.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone

import numpy as np

from wrmf import __version__
from wrmf import finite_volume as fv
from wrmf import verify
from wrmf.errors import CriticalPointError, DomainError, NumericalError
from wrmf.landscape import E, E1, E2, ModelParams, c, global_maximizers, w
from wrmf.phase import (
    OneComponentParams,
    classify,
    coexistence_activities,
    density_residual,
    maxwell_construction,
    one_component_density,
    order_parameter,
    pressure_of_density,
    spinodal_boundary,
    spinodal_eta,
    two_component_eos,
)
from wrmf.special import u
from wrmf.tables import write_tables

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3

COMMANDS = ("phase-diagram", "landscape", "eos", "maxwell", "finite-volume", "verify")

DEFAULTS = {
    "a": 1.0,
    "theta": 1.0,
    "mu0": 2.0,
    "mu1": 0.0,
    "mu0_grid": "-2:4:41",
    "mu1_grid": "-2:4:41",
    "mu_grid": "-3:3:121",
    "y_grid": None,
    "V_list": "25,50,100,200,400",
    "theta_list": None,
    "a_list": None,
    "ratio_list": "1.5,3,10",
    "mode": "one",
    "points": 200,
    "format": "csv",
    "jobs": 1,
    "output": None,
    "no_meta": False,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --- parsing helpers -------------------------------------------------------


def parse_grid(spec: str) -> np.ndarray:
    """``MIN:MAX:N`` -> N evenly spaced values (N >= 1, MIN <= MAX)."""
    parts = str(spec).split(":")
    if len(parts) != 3:
        raise UsageError(f"grid must be MIN:MAX:N, got {spec!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise UsageError(f"bad grid {spec!r}: {exc}") from None
    if n < 1:
        raise UsageError(f"grid count must be >= 1 in {spec!r}")
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise UsageError(f"grid needs finite MIN <= MAX in {spec!r}")
    if n == 1:
        return np.array([lo])
    return np.linspace(lo, hi, n)


def parse_list(spec: str, positive: bool = True) -> list[float]:
    try:
        vals = [float(s) for s in str(spec).split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(f"bad list {spec!r}: {exc}") from None
    if not vals:
        raise UsageError("empty list")
    if positive and any(not (v > 0.0 and math.isfinite(v)) for v in vals):
        raise UsageError(f"list entries must be positive: {spec!r}")
    return vals


def parse_tols(items) -> dict[str, float]:
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--tol expects KEY=VAL, got {item!r}")
        key = key.strip()
        if key not in verify.DEFAULTS:
            raise UsageError(f"unknown tolerance key {key!r}; known: {', '.join(verify.DEFAULTS)}")
        try:
            out[key] = float(val)
        except ValueError:
            raise UsageError(f"bad tolerance value {val!r}") from None
    return out


def read_config(path: str) -> dict[str, str]:
    """Simple ``key = value`` file; blank lines and ``#`` comments ignored."""
    out = {}
    try:
        lines = open(path, encoding="utf-8").read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path!r}: {exc}") from None
    for k, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{k}: expected key=value")
        key = key.strip().replace("-", "_")
        if key not in DEFAULTS and key != "tol":
            raise UsageError(f"{path}:{k}: unknown key {key!r}")
        out[key] = val.strip()
    return out


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"bad boolean {v!r}")


def resolve(args: argparse.Namespace) -> dict:
    """Merge flags > config file > defaults into one config dict."""
    cfg_file = read_config(args.config) if args.config else {}
    cfg = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        if key == "no_meta":
            flag = True if flag else None
        if flag is not None:
            cfg[key] = flag
        elif key in cfg_file:
            cfg[key] = cfg_file[key]
        else:
            cfg[key] = default
    try:
        for key in ("a", "theta", "mu0", "mu1"):
            cfg[key] = float(cfg[key])
        cfg["jobs"] = int(cfg["jobs"])
        cfg["points"] = int(cfg["points"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cfg["no_meta"] = _bool(cfg["no_meta"])
    if not (cfg["a"] > 0.0 and math.isfinite(cfg["a"])):
        raise UsageError(f"--a must be positive, got {cfg['a']}")
    if not (cfg["theta"] > 0.0 and math.isfinite(cfg["theta"])):
        raise UsageError(f"--theta must be positive, got {cfg['theta']}")
    if cfg["jobs"] < 1:
        raise UsageError("--jobs must be >= 1")
    if cfg["points"] < 2:
        raise UsageError("--points must be >= 2")
    if cfg["format"] not in ("csv", "json"):
        raise UsageError(f"unknown format {cfg['format']!r}")
    if cfg["mode"] not in ("one", "two"):
        raise UsageError(f"--mode must be 'one' or 'two', got {cfg['mode']!r}")
    tols = parse_tols(cfg_file["tol"].split(",")) if "tol" in cfg_file else {}
    tols.update(parse_tols(args.tol))
    cfg["tol"] = tols
    return cfg


def _pmap(fn, items, jobs: int):
    """Ordered map, optionally over a process pool."""
    if jobs <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _columns(rows: list[dict]) -> dict:
    if not rows:
        return {}
    return {k: [r[k] for r in rows] for k in rows[0]}


# --- phase diagram ---------------------------------------------------------


def _phase_row(pt):
    a, m0, m1 = pt
    params = ModelParams(a, m0, m1)
    cls = classify(params)
    sol = global_maximizers(params)
    return {
        "mu0": m0,
        "mu1": m1,
        "region": cls.region,
        "n_fixed_points": len(sol.fixed_points),
        "in_spinodal": cls.in_spinodal,
        "y_star": max(sol.maximizers),
        "n_maximizers": len(sol.maximizers),
        "order_parameter": cls.order_parameter if cls.order_parameter is not None else float("nan"),
    }


def cmd_phase_diagram(cfg) -> dict:
    a = cfg["a"]
    g0, g1 = parse_grid(cfg["mu0_grid"]), parse_grid(cfg["mu1_grid"])
    pts = [(a, float(m0), float(m1)) for m0 in g0 for m1 in g1]
    rows = _pmap(_phase_row, pts, cfg["jobs"])
    xi_max = max(1.0, 0.5 * (g0.max() + g1.max()) + math.log(a))
    xi = np.linspace(1.0, xi_max, cfg["points"]) if xi_max > 1.0 else np.array([1.0])
    m0u, m1u, m0l, m1l = spinodal_boundary(a, xi)
    spinodal = {
        "xi": xi.tolist(),
        "eta": np.atleast_1d(spinodal_eta(xi)).tolist(),
        "mu0_upper": m0u.tolist(),
        "mu1_upper": m1u.tolist(),
        "mu0_lower": m0l.tolist(),
        "mu1_lower": m1l.tolist(),
    }
    return {"phase_diagram": _columns(rows), "spinodal": spinodal}


# --- landscape -------------------------------------------------------------


def cmd_landscape(cfg) -> dict:
    params = ModelParams(cfg["a"], cfg["mu0"], cfg["mu1"])
    sol = global_maximizers(params)
    if cfg["y_grid"] is None:
        r = max(abs(y) for y in sol.fixed_points) + 3.0
        ys = np.linspace(-r, r, 2 * cfg["points"] + 1)
    else:
        ys = parse_grid(cfg["y_grid"])
    land = {"y": [], "E": [], "E1": [], "E2": [], "w": [], "c": []}
    for y in ys:
        y = float(y)
        land["y"].append(y)
        land["E"].append(E(params, y))
        land["E1"].append(E1(params, y))
        land["E2"].append(E2(params, y))
        land["w"].append(w(params, y))
        land["c"].append(c(params, y))
    fps = {
        "y": list(sol.fixed_points),
        "E": list(sol.fixed_point_values),
        "E2": [E2(params, y) for y in sol.fixed_points],
        "is_maximizer": [y in sol.maximizers for y in sol.fixed_points],
    }
    return {"landscape": land, "fixed_points": fps}


# --- equations of state ----------------------------------------------------


def _eos_two_rows(pt):
    a, m0, m1 = pt
    params = ModelParams(a, m0, m1)
    nan = float("nan")
    try:
        phases = two_component_eos(params)
    except CriticalPointError:
        return [
            {"mu0": m0, "mu1": m1, "region": "C", "phase": -1, "rho0": nan, "rho1": nan, "p": nan,
             "warning": "critical point skipped"}
        ]
    region = "M" if len(phases) == 2 else "R"
    return [
        {"mu0": m0, "mu1": m1, "region": region, "phase": k, "rho0": ph.rho0, "rho1": ph.rho1,
         "p": a * ph.rho0 * ph.rho1 + ph.rho0 + ph.rho1, "warning": ""}
        for k, ph in enumerate(phases)
    ]


def _one_row(a, theta, mu, branch, rho, ptype):
    p = OneComponentParams(a, theta, mu)
    return {
        "mu": mu,
        "branch": branch,
        "rho": rho,
        "p_hat": float(pressure_of_density(a, theta, rho)) if math.isfinite(rho) else float("nan"),
        "residual": density_residual(p, rho) if math.isfinite(rho) else float("nan"),
        "warning": ptype,
    }


def _eos_one_rows(pt):
    a, theta, mu = pt
    p = OneComponentParams(a, theta, mu)
    try:
        if p.coexistence:
            return [
                _one_row(a, theta, mu, side, one_component_density(p, side), "")
                for side in ("left", "right")
            ]
        return [_one_row(a, theta, mu, "stable", one_component_density(p), "")]
    except CriticalPointError:
        return [_one_row(a, theta, mu, "critical", float("nan"), "critical point skipped")]


def cmd_eos(cfg) -> dict:
    a, theta = cfg["a"], cfg["theta"]
    if cfg["mode"] == "two":
        g0, g1 = parse_grid(cfg["mu0_grid"]), parse_grid(cfg["mu1_grid"])
        pts = [(a, float(m0), float(m1)) for m0 in g0 for m1 in g1]
        rows = [r for chunk in _pmap(_eos_two_rows, pts, cfg["jobs"]) for r in chunk]
        return {"eos": _columns(rows)}
    mus = [float(m) for m in parse_grid(cfg["mu_grid"])]
    mu_line = math.log(theta)
    tables = {}
    if a * theta > math.e:
        # insert the coexistence point itself, replacing any grid value within EPS of it
        mus = [m for m in mus if abs(m - mu_line) > 1e-12] + [mu_line]
        mus.sort()
    rows = [r for chunk in _pmap(_eos_one_rows, [(a, theta, m) for m in mus], cfg["jobs"]) for r in chunk]
    tables["eos"] = _columns(rows)
    if a * theta > math.e:
        zm, zp = coexistence_activities(a, theta)
        tables["jump"] = {
            "mu": [mu_line],
            "rho_left": [zm],
            "rho_right": [zp],
            "delta_rho": [zp - zm],
            "ybar_over_a": [order_parameter(a, mu_line) / a],
        }
    return tables


# --- Maxwell construction --------------------------------------------------


def cmd_maxwell(cfg) -> dict:
    thetas = parse_list(cfg["theta_list"]) if cfg["theta_list"] is not None else [cfg["theta"]]
    rows, curve = [], {"a": [], "theta": [], "rho": [], "p_hat_formal": [], "p_hat_maxwell": [], "plateau": []}
    for theta in thetas:
        if cfg["a_list"] is not None:
            a_vals = parse_list(cfg["a_list"])
        else:
            a_vals = [r * math.e / theta for r in parse_list(cfg["ratio_list"])]
        for a in a_vals:
            ratio = a * theta / math.e
            row = {"a": a, "theta": theta, "ratio": ratio, "applicable": ratio > 1.0}
            nan = float("nan")
            if ratio <= 1.0:
                row.update(z_minus=nan, z_plus=nan, plateau=nan, plateau_stable=nan, residual=nan,
                           identity_lhs=nan, identity_rhs=nan)
                rows.append(row)
                continue
            res = maxwell_construction(a, theta)
            row.update(
                z_minus=res.z_minus,
                z_plus=res.z_plus,
                plateau=a * res.z_plus * res.z_minus + res.z_plus + res.z_minus - theta,
                plateau_stable=res.p_star_stable,
                residual=res.residual,
                identity_lhs=res.identity_lhs,
                identity_rhs=res.identity_rhs,
            )
            rows.append(row)
            # geometric spacing resolves the loop even when z- << z+
            rho = np.geomspace(0.5 * res.z_minus, 1.5 * res.z_plus, cfg["points"])
            ph = pressure_of_density(a, theta, rho)
            inside = (rho >= res.z_minus) & (rho <= res.z_plus)
            curve["a"] += [a] * len(rho)
            curve["theta"] += [theta] * len(rho)
            curve["rho"] += rho.tolist()
            curve["p_hat_formal"] += ph.tolist()
            curve["p_hat_maxwell"] += np.where(inside, res.p_star_stable, ph).tolist()
            curve["plateau"] += np.where(inside, res.p_star_stable, np.nan).tolist()
    return {"maxwell": _columns(rows), "curve": curve}


# --- finite volume ---------------------------------------------------------


def _fv_row(pt):
    a, m0, m1, V = pt
    params = ModelParams(a, m0, m1)
    sol = global_maximizers(params)
    ys = max(sol.maximizers)
    p = fv.limit_pressure(params)
    F = fv.F_Lambda(params, V)
    x = m0 + ys
    uv, uu = fv.u_V(a, x, V), u(a, x)
    ysv = fv.y_star_V(params, V)
    return {
        "V": V,
        "F_Lambda": F,
        "p": p,
        "F_error": abs(F - p),
        "u_V": uv,
        "u": uu,
        "u_error": abs(uv - uu),
        "u_bound": 1.0 / (2.0 * V),
        "y_star_V": ysv,
        "y_star": ys,
        "y_error": abs(ysv - ys),
    }


def _slope(Vs, errs) -> float:
    Vs, errs = np.asarray(Vs, float), np.asarray(errs, float)
    ok = errs > 0.0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(Vs[ok]), np.log(errs[ok]), 1)[0])


def cmd_finite_volume(cfg) -> dict:
    Vs = parse_list(cfg["V_list"])
    a, m0, m1 = cfg["a"], cfg["mu0"], cfg["mu1"]
    ModelParams(a, m0, m1)
    rows = _pmap(_fv_row, [(a, m0, m1, V) for V in Vs], cfg["jobs"])
    tab = _columns(rows)
    fits = {"quantity": [], "slope": []}
    for q in ("F_error", "u_error", "y_error"):
        fits["quantity"].append(q)
        fits["slope"].append(_slope(tab["V"], tab[q]))
    return {"finite_volume": tab, "fits": fits}


# --- driver ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; flags override it")
    common.add_argument("--a", type=float, help="interaction strength a > 0")
    common.add_argument("--theta", type=float, help="activity of the second species (one-component mode)")
    common.add_argument("--mu0", type=float)
    common.add_argument("--mu1", type=float)
    common.add_argument("--mu0-grid", dest="mu0_grid", metavar="MIN:MAX:N")
    common.add_argument("--mu1-grid", dest="mu1_grid", metavar="MIN:MAX:N")
    common.add_argument("--mu-grid", dest="mu_grid", metavar="MIN:MAX:N")
    common.add_argument("--y-grid", dest="y_grid", metavar="MIN:MAX:N")
    common.add_argument("--V-list", dest="V_list", metavar="V1,V2,...")
    common.add_argument("--theta-list", dest="theta_list", metavar="T1,T2,...")
    common.add_argument("--a-list", dest="a_list", metavar="A1,A2,...")
    common.add_argument("--ratio-list", dest="ratio_list", metavar="R1,R2,...", help="a in units of e/theta")
    common.add_argument("--mode", choices=("one", "two"), help="eos: one- or two-component")
    common.add_argument("--points", type=int, help="samples per curve")
    common.add_argument("--output", metavar="PATH")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--jobs", type=int, metavar="N")
    common.add_argument("--no-meta", dest="no_meta", action="store_true")
    common.add_argument("--tol", action="append", metavar="KEY=VAL")

    parser = _Parser(prog="wrmf", description="Mean-field Widom-Rowlinson sweeps and checks.")
    parser.add_argument("--version", action="version", version=f"wrmf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "phase-diagram": "classify a (mu0, mu1) grid and sample the spinodal",
        "landscape": "tabulate E(y) and its fixed points",
        "eos": "densities and pressure along a grid",
        "maxwell": "equal-area residuals and p(rho) curves",
        "finite-volume": "finite-V partition function convergence",
        "verify": "run the acceptance checks",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


HANDLERS = {
    "phase-diagram": cmd_phase_diagram,
    "landscape": cmd_landscape,
    "eos": cmd_eos,
    "maxwell": cmd_maxwell,
    "finite-volume": cmd_finite_volume,
}


def _meta(command: str, cfg: dict) -> dict:
    echo = {k: v for k, v in cfg.items() if k not in ("output", "no_meta", "jobs")}
    return {
        "command": command,
        "version": __version__,
        "config": echo,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def _run_verify(cfg, out) -> int:
    results = verify.run_all(cfg["tol"], echo=lambda s: print(s, file=sys.stderr))
    rep = verify.report(results, __version__)
    text = json.dumps(rep, indent=2) + "\n"
    if cfg["output"]:
        with open(cfg["output"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        out.write(text)
    if rep["passed"]:
        return EXIT_OK
    print(f"verification failed: {', '.join(rep['failed'])}", file=sys.stderr)
    return EXIT_VERIFY


_VALUE_FLAGS = ("--mu0-grid", "--mu1-grid", "--mu-grid", "--y-grid", "--mu0", "--mu1")


def _join_values(argv: list[str]) -> list[str]:
    """Attach values such as ``-2:4:41`` to their flag so argparse does not
    mistake them for options."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(_join_values(argv))
    try:
        cfg = resolve(args)
        if args.command == "verify":
            return _run_verify(cfg, out)
        tables = HANDLERS[args.command](cfg)
        meta = None if cfg["no_meta"] else _meta(args.command, cfg)
        write_tables(tables, cfg["output"], cfg["format"], meta, stream=out)
    except UsageError as exc:
        print(f"wrmf: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"wrmf: domain error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, ArithmeticError) as exc:
        print(f"wrmf: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
