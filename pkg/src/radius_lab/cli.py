"""``radius-lab`` command line front end.

Every subcommand is a pure function of its resolved configuration: built-in
defaults, overridden by the ``[run]`` and ``[<command>]`` tables of the TOML
config, overridden by command-line flags. The resolved configuration is
echoed at the top of every output.

Exit status: 0 success, 1 configuration error, 2 numerical non-convergence,
3 violation of a theorem-backed inequality.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import __version__, blocks, cocycle, ergodic, io, lyapunov, manifold, radii, systems
from .cocycle import Sign
from .errors import ConfigError, NonConvergenceError, TheoremViolation
from .parallel import uniform_points

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VIOLATION = 0, 1, 2, 3
SEED_MAX = 2**64 - 1


@dataclass(frozen=True)
class Param:
    name: str
    type: Callable[[str], Any]
    default: Any
    help: str
    flag: bool = False

    @property
    def dest(self) -> str:
        return self.name.replace("-", "_")


def _opt_float(s):
    return None if s is None or str(s).lower() in ("", "none", "auto") else float(s)


def _opt_int(s):
    return None if s is None or str(s).lower() in ("", "none", "auto") else int(s)


def _bool(s):
    if isinstance(s, bool):
        return s
    key = str(s).strip().lower()
    if key in ("1", "true", "yes", "on"):
        return True
    if key in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# shared parameter groups
POINT = [
    Param("x", _opt_float, None, "start point x coordinate in [0, 1) (torus units); auto = drawn from the seed"),
    Param("y", _opt_float, None, "start point y coordinate in [0, 1) (torus units); auto = drawn from the seed"),
]
HOELDER = [
    Param("alpha", float, 1.0, "Hoelder exponent in (0, 1] (dimensionless)"),
    Param("pairs", int, 10_000, "number of sampled point pairs for the Hoelder estimate (count)"),
    Param("d-max", float, 0.25, "largest pair distance for the Hoelder estimate (torus units)"),
    Param("safety", float, 1.25, "multiplier applied to the largest sampled ratio (dimensionless, >= 1)"),
]
LE = [
    Param("le", _opt_float, None, "LE+ value (1/step); auto = estimated from --le-orbit and --le-samples"),
    Param("le-orbit", int, 10_000, "orbit length for the LE+ estimate (steps)"),
    Param("le-samples", int, 20, "number of random starts for the LE+ estimate (count)"),
]

COMMANDS: dict[str, tuple[str, list[Param]]] = {
    "lyapunov": ("Lyapunov exponent of log psi by Birkhoff averages (JSON)", [
        Param("sign", str, "plus", "bundle: plus (E+) or minus (E-)"),
        Param("n", int, 10_000, "orbit length per sample (steps, >= 1000)"),
        Param("samples", int, 20, "number of random starts (count)"),
    ]),
    "domination": ("Domination margin on a grid (JSON)", [
        Param("gamma", float, 0.1, "domination rate to test (1/step, > 0)"),
        Param("grid", int, 128, "grid size per side (nodes)"),
    ]),
    "radii": ("Radius recursion r_{k+1} = psi_+(f^k x, r_k) r_k (CSV k,r_k,m_k,log_r_k)", [
        *POINT,
        Param("r0", float, 1e-4, "initial radius (torus units, > 0)"),
        Param("n", int, 1000, "number of steps (steps)"),
        Param("mode", str, "ball", "ball (exact ball conorm) or pointwise (proxy)"),
        Param("clamp", _bool, False, "clamp radii at the chart radius 0.25", flag=True),
        Param("check-growth", _bool, False, "also check the growth inequality; exit 3 on violation", flag=True),
        *HOELDER,
    ]),
    "hoelder": ("Empirical Hoelder constant of log psi (JSON)", [
        Param("sign", str, "plus", "bundle: plus (E+) or minus (E-)"),
        *HOELDER,
    ]),
    "theorem3": ("Averaged radius bound LE+ <= tail-min of (C/n) sum r_k^alpha (JSON)", [
        *POINT,
        Param("r0", float, 1e-4, "initial radius (torus units, > 0)"),
        Param("n", int, 10_000, "sequence length N (steps, >= 2)"),
        Param("slack", float, 0.0, "allowed excess of LE+ over the bound (1/step)"),
        *HOELDER, *LE,
    ]),
    "horizon": ("Smallest time from which the radius claim applies (JSON)", [
        *POINT,
        Param("delta", float, 0.1, "averaging tolerance (1/step, > 0)"),
        Param("r0", float, 1e-4, "initial radius (torus units, > 0)"),
        Param("n-cap", int, 10_000, "largest time searched (steps)"),
        *HOELDER, *LE,
    ]),
    "blocks": ("Block membership on a grid (CSV x,y,member,first_violation)", [
        Param("gamma", float, 0.5, "rate (1/step, > 0)"),
        Param("block-n", int, 10, "block index N (steps, >= 1)"),
        Param("horizon", _opt_int, None, "checked depth (steps); auto = 10 N"),
        Param("sign", str, "plus", "bundle: plus or minus"),
        Param("grid", int, 32, "grid size per side (nodes)"),
    ]),
    "timebound": ("Time-bound proposition on random starts (CSV); exit 3 on violation", [
        Param("samples", int, 10, "number of random starts (count)"),
        Param("gamma", _opt_float, None, "rate (1/step); auto = LE+ estimate"),
        Param("k", int, 1000, "time K (steps)"),
        Param("horizon", int, 1000, "block depth (steps)"),
        Param("seed-radius", float, 1e-8, "seed radius of the certifying past recursion (torus units)"),
        *HOELDER, *LE,
    ]),
    "kac": ("Kac identity by Monte Carlo (JSON lhs,rhs,rel_err)", [
        Param("region", str, "ball:0.5,0.5,0.1", "region A: ball:cx,cy,r | grid-indicator:path | whole, joined with &"),
        Param("psi", str, "logpsi+", "test function: one | logpsi+ | grid"),
        Param("field", str, "", "path of a grid field (.npy or CSV) for --psi grid"),
        Param("samples", int, 10_000, "Monte Carlo samples per side (count)"),
        Param("orbit-cap", int, 100_000, "largest return time followed (steps)"),
    ]),
    "measurable-radius": ("Return-path radius r+ on random points (CSV x,y,phi,r_plus)", [
        Param("r0", float, 0.25, "base radius on A (torus units, > 0)"),
        Param("region", str, "ball:0.5,0.5,0.1", "base region A (same syntax as kac)"),
        Param("certify", _bool, True, "restrict A to cells certified to radius r0", flag=True),
        Param("certify-grid", int, 32, "grid size per side for certification (nodes)"),
        Param("samples", int, 1000, "number of uniform points (count)"),
        Param("orbit-cap", int, 100_000, "largest backward return time followed (steps)"),
        Param("base-case-override", _bool, False, "assign r0 directly on A", flag=True),
        Param("check", _bool, False, "emit the integrated inequality (JSON) instead; exit 3 on violation", flag=True),
        *HOELDER, *LE,
    ]),
    "region": ("Grid indicator of {log psi^N_+ > 0} (CSV i,j,x,y,inside,log_psi)", [
        Param("block-n", int, 1, "iterate N (steps, >= 1)"),
        Param("grid", int, 256, "grid size per side (nodes)"),
    ]),
    "periodic": ("Periodic point by Newton and its radius bounds (JSON)", [
        *POINT,
        Param("period", int, 1, "period (steps, >= 1)"),
        Param("grid", int, 256, "grid size per side for A+(period) (nodes)"),
        *HOELDER,
    ]),
    "grow": ("Grow a local unstable curve (CSV t,x,y)", [
        *POINT,
        Param("h", float, 1e-5, "seed half length (torus units, <= 1e-4)"),
        Param("generations", int, 10, "number of forward pushes (steps)"),
    ]),
    "lemaures": ("Curve-length check against psi_+ over a ball (CSV); exit 3 on violation", [
        Param("samples", int, 100, "number of random (x, r) draws (count)"),
        Param("r-max", float, 0.05, "largest ball radius (torus units)"),
        Param("r-min", float, 1e-3, "smallest ball radius (torus units)"),
    ]),
}


# ---------------------------------------------------------------- parsing

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=argparse.SUPPRESS,
                   help="TOML file with a [system] table (or top-level system keys), optional [run] "
                        "and per-command tables")
    p.add_argument("--system", default=argparse.SUPPRESS,
                   help="system shortcut instead of --config: cat | shear:EPS | da:EPS[,RADIUS]")
    p.add_argument("--seed", default=argparse.SUPPRESS,
                   help="64-bit unsigned RNG seed (default: 0)")
    p.add_argument("--out", default=argparse.SUPPRESS, help="output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radius-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"radius-lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (desc, params) in COMMANDS.items():
        p = sub.add_parser(name, help=desc, description=desc)
        _add_common(p)
        for prm in params:
            text = f"{prm.help} (default: {prm.default if prm.default is not None else 'auto'})"
            if prm.flag:
                p.add_argument(f"--{prm.name}", dest=prm.dest, nargs="?", const="true",
                               default=argparse.SUPPRESS, help=text)
            else:
                p.add_argument(f"--{prm.name}", dest=prm.dest, default=argparse.SUPPRESS, help=text)
    return parser


def parse_system(text: str) -> systems.SystemSpec:
    kind, _, rest = text.partition(":")
    vals = [float(v) for v in rest.split(",") if v.strip()] if rest else []
    kind = kind.strip().lower()
    if kind in ("cat", "linear") and not vals:
        return systems.cat_map()
    if kind == "shear" and len(vals) == 1:
        return systems.shear(vals[0])
    if kind == "da" and 1 <= len(vals) <= 2:
        return systems.derived_from_anosov(*vals)
    raise ConfigError(f"bad --system {text!r}")


def _table(cfg: dict, key: str) -> dict:
    t = cfg.get(key, {})
    if not isinstance(t, dict):
        raise ConfigError(f"[{key}] must be a table")
    return {str(k).replace("-", "_"): v for k, v in t.items()}


def resolve(command: str, ns: dict) -> tuple[systems.SystemSpec, dict]:
    """System spec and the fully resolved run configuration."""
    params = COMMANDS[command][1]
    file_cfg: dict = {}
    if "config" in ns:
        file_cfg = systems.load_toml(ns["config"])
    if "system" in ns:
        spec = parse_system(ns["system"])
    elif file_cfg:
        sys_cfg = file_cfg.get("system", file_cfg)
        if not isinstance(sys_cfg, dict):
            raise ConfigError("[system] must be a table")
        spec = systems.SystemSpec.from_mapping(sys_cfg)
    else:
        raise ConfigError("no system given: pass --config or --system")

    layered: dict = {}
    layered.update(_table(file_cfg, "run"))
    layered.update(_table(file_cfg, command.replace("-", "_")))
    layered.update(_table(file_cfg, command))
    layered.update({k: v for k, v in ns.items() if k not in ("config", "system", "out", "command")})

    known = {p.dest for p in params} | {"seed"}
    unknown = sorted(set(_table(file_cfg, command)) - known)
    if unknown:
        raise ConfigError(f"unknown parameter(s) for {command}: {', '.join(unknown)}")

    run: dict[str, Any] = {}
    try:
        seed = int(layered.get("seed", 0))
    except (TypeError, ValueError):
        raise ConfigError("seed must be an integer") from None
    if not 0 <= seed <= SEED_MAX:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    run["seed"] = seed
    for prm in params:
        raw = layered.get(prm.dest, prm.default)
        try:
            run[prm.dest] = raw if raw is None or raw is prm.default else prm.type(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"bad value for --{prm.name}: {raw!r}") from None
    config = {"command": command, "system": spec.to_dict(), "run": run}
    return spec, config


# ---------------------------------------------------------------- helpers

def _point(run: dict, index: int = 0) -> systems.TorusPoint:
    if run.get("x") is None or run.get("y") is None:
        start = lyapunov.sample_start(run["seed"], index)
        x = start.x if run.get("x") is None else run["x"]
        y = start.y if run.get("y") is None else run["y"]
        return systems.TorusPoint(x, y)
    return systems.TorusPoint(run["x"], run["y"])


def _hoelder(spec, run: dict, sign=Sign.PLUS) -> radii.HoelderEstimate:
    return radii.estimate_hoelder(spec, sign, run["alpha"], run["pairs"], run["d_max"],
                                  run["seed"], run["safety"])


def _le(spec, run: dict) -> float:
    if run.get("le") is not None:
        return float(run["le"])
    return lyapunov.le_estimate(spec, Sign.PLUS, run["le_orbit"], run["le_samples"], run["seed"]).mean


class Output:
    """Text result plus an optional violation message (mapped to exit 3)."""

    def __init__(self, text: str, violation: Optional[str] = None):
        self.text = text
        self.violation = violation


# ---------------------------------------------------------------- commands

def cmd_lyapunov(spec, run, cfg):
    est = lyapunov.le_estimate(spec, Sign.parse(run["sign"]), run["n"], run["samples"], run["seed"])
    return Output(io.json_text(est.to_dict(), cfg))


def cmd_domination(spec, run, cfg):
    res = cocycle.check_domination(spec, run["gamma"], run["grid"])
    payload = {"holds": res.holds, "margin": res.margin, "gamma_max": res.gamma_max,
               "gamma": res.gamma, "grid_n": res.grid_n}
    return Output(io.json_text(payload, cfg))


def cmd_radii(spec, run, cfg):
    seq = radii.radii_sequence(spec, _point(run), run["r0"], run["n"], radii.Mode.parse(run["mode"]),
                               clamp=run["clamp"])
    violation = None
    if run["check_growth"]:
        chk = radii.check_growth_inequality(seq, _hoelder(spec, run))
        if not chk.holds:
            violation = f"growth inequality violated (worst gap {chk.worst_gap:.3e})"
    return Output(io.csv_text(seq.columns, seq.rows(), cfg), violation)


def cmd_hoelder(spec, run, cfg):
    return Output(io.json_text(_hoelder(spec, run, Sign.parse(run["sign"])).to_dict(), cfg))


def cmd_theorem3(spec, run, cfg):
    est = _hoelder(spec, run)
    le = _le(spec, run)
    chk = radii.check_theorem3(spec, _point(run), run["r0"], run["n"], est, le - run["slack"])
    payload = chk.to_dict() | {"C": est.C, "alpha": est.alpha, "le_estimate": le}
    return Output(io.json_text(payload, cfg))


def cmd_horizon(spec, run, cfg):
    est = _hoelder(spec, run)
    le = _le(spec, run)
    hz = radii.claim_horizon(spec, _point(run), run["delta"], run["r0"], est, le, run["n_cap"])
    return Output(io.json_text(hz.to_dict() | {"C": est.C, "le_plus": le}, cfg))


def cmd_blocks(spec, run, cfg):
    params = blocks.BlockParams(run["gamma"], run["block_n"], run["horizon"], Sign.parse(run["sign"]))
    rows = blocks.block_map(spec, cocycle.grid_points(run["grid"]), params)
    return Output(io.csv_text(blocks.BLOCK_COLUMNS, rows, cfg))


TIMEBOUND_COLUMNS = ("i", "x", "y", "hypothesis_met", "conclusion_met", "R0", "T", "N",
                     "certified_radius", "sup_r", "proof_chain")


def cmd_timebound(spec, run, cfg):
    est = _hoelder(spec, run)
    gamma = run["gamma"] if run["gamma"] is not None else _le(spec, run)
    rows, bad = [], 0
    for i in range(run["samples"]):
        p = lyapunov.sample_start(run["seed"], i)
        tb = blocks.time_bound_check(spec, p, gamma, run["k"], est, run["horizon"], run["seed_radius"])
        bad += tb.hypothesis_met and not tb.conclusion_met
        rows.append((i, p.x, p.y, tb.hypothesis_met, tb.conclusion_met, tb.R0, tb.T, tb.N,
                     tb.certified_radius, tb.sup_r, tb.proof_chain))
    violation = f"{bad} sample(s) meet the hypothesis but not the conclusion" if bad else None
    return Output(io.csv_text(TIMEBOUND_COLUMNS, rows, cfg), violation)


def cmd_kac(spec, run, cfg):
    region = ergodic.parse_region(run["region"])
    tf = ergodic.TestFunction.parse(run["psi"])
    field = None
    if tf is ergodic.TestFunction.GRID_FIELD:
        if not run["field"]:
            raise ConfigError("--psi grid needs --field")
        field = np.asarray(ergodic.load_mask(run["field"]), dtype=float)
    res = ergodic.kac_verify(spec, region, tf, run["samples"], run["orbit_cap"], run["seed"], field)
    return Output(io.json_text(res.to_dict(), cfg))


def cmd_measurable_radius(spec, run, cfg):
    base = ergodic.parse_region(run["region"])
    A = ergodic.certified_region(spec, run["r0"], base, run["certify_grid"]) if run["certify"] else base
    sample = ergodic.measurable_radius_sample(spec, run["r0"], A, run["samples"], run["seed"],
                                              run["orbit_cap"], run["base_case_override"])
    if not run["check"]:
        return Output(io.csv_text(sample.columns, sample.rows(), cfg))
    est = _hoelder(spec, run)
    chk = ergodic.check_integrated_inequality(sample, est, _le(spec, run))
    payload = chk.to_dict() | {"C": est.C, "alpha": est.alpha, "n_samples": len(sample.entries),
                               "mean_phi": float(sample.phi.mean())}
    violation = None if chk.holds else "integrated inequality violated"
    return Output(io.json_text(payload, cfg), violation)


def cmd_region(spec, run, cfg):
    reg = radii.region_a_plus(spec, run["block_n"], run["grid"])
    n = reg.grid_n

    def rows():
        for i in range(n):
            for j in range(n):
                yield (i, j, i / n, j / n, bool(reg.indicator[i, j]), float(reg.log_psi[i, j]))

    return Output(io.csv_text(("i", "j", "x", "y", "inside", "log_psi"), rows(), cfg))


def cmd_periodic(spec, run, cfg):
    p = radii.find_periodic(spec, run["period"], _point(run))
    bounds = radii.periodic_point_bounds(spec, p, run["period"], _hoelder(spec, run), run["grid"])
    payload = bounds.to_dict() | {"point": [p.x, p.y],
                                  "defect": radii.periodicity_defect(spec, p, run["period"])}
    return Output(io.json_text(payload, cfg))


def cmd_grow(spec, run, cfg):
    seg = manifold.grow_unstable_segment(spec, _point(run), run["h"], run["generations"])
    return Output(io.csv_text(seg.columns, seg.rows(), cfg))


def cmd_lemaures(spec, run, cfg):
    if not 0 < run["r_min"] <= run["r_max"]:
        raise ConfigError("need 0 < r-min <= r-max")
    rng = np.random.default_rng([run["seed"], 1])
    pts = uniform_points(run["seed"], run["samples"])
    rs = rng.uniform(run["r_min"], run["r_max"], run["samples"])
    rows, bad = [], 0
    for p, r in zip(pts, rs):
        seg = manifold.segment_in_ball(spec, p, float(r))
        chk = manifold.check_lemaures(spec, p, float(r), seg)
        bad += not chk.holds
        rows.append((p[0], p[1], r, chk.m0, chk.length_ratio, chk.holds))
    violation = f"{bad} curve(s) below m0 - {manifold.SLACK:g}" if bad else None
    return Output(io.csv_text(("x", "y", "r", "m0", "length_ratio", "holds"), rows, cfg), violation)


HANDLERS = {
    "lyapunov": cmd_lyapunov, "domination": cmd_domination, "radii": cmd_radii,
    "hoelder": cmd_hoelder, "theorem3": cmd_theorem3, "horizon": cmd_horizon,
    "blocks": cmd_blocks, "timebound": cmd_timebound, "kac": cmd_kac,
    "measurable-radius": cmd_measurable_radius, "region": cmd_region,
    "periodic": cmd_periodic, "grow": cmd_grow, "lemaures": cmd_lemaures,
}


def run(command: str, options: dict) -> tuple[int, str, Optional[str]]:
    """Run ``command`` with parsed ``options``; returns (exit status, output text, message)."""
    try:
        spec, cfg = resolve(command, options)
        out = HANDLERS[command](spec, cfg["run"], cfg)
    except ConfigError as exc:
        return EXIT_CONFIG, "", f"config error: {exc}"
    except NonConvergenceError as exc:
        return EXIT_NUMERIC, "", f"non-convergence: {exc}"
    except TheoremViolation as exc:
        return EXIT_VIOLATION, "", f"violation: {exc}"
    except ValueError as exc:
        return EXIT_CONFIG, "", f"invalid parameter: {exc}"
    if out.violation:
        return EXIT_VIOLATION, out.text, f"violation: {out.violation}"
    return EXIT_OK, out.text, None


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    ns = vars(parser.parse_args(argv))
    command = ns.pop("command")
    status, text, msg = run(command, ns)
    if text:
        if "out" in ns:
            Path(ns["out"]).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    if msg:
        print(msg, file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
