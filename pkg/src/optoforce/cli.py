"""Command-line front end.

Exit codes: 0 success, 1 validation error, 2 physics-domain error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import analysis
from .analysis import Axis, NoMinimumError, SweepSpec, UnboundedSqueezingError
from .closed_form import SingularSensitivity, sensitivity
from .moment_oracle import IntegrationError, verify_against_closed_form
from .params import (ParameterError, PhysicalParams, PhysicsDomainError, default_tau, derive_couplings,
                     sql_force, thermal_occupation)

EXIT_OK, EXIT_VALIDATION, EXIT_PHYSICS, EXIT_VERIFY = 0, 1, 2, 3
REFERENCE_SQL_N = 12.2e-18
PARAM_KEYS = tuple(f.name for f in fields(PhysicalParams))

VERIFY_DEFAULTS = {
    "t_points": 5, "t_max_periods": 3.0, "squeezing": [0.0, 1.0, 2.0], "temperatures_k": [0.0, 3.0],
    "damping_hz": [0.0, 1.0], "dt": None, "cov_dt": None, "tolerance": 1e-6,
}
EVAL_DEFAULTS = {"t": "first_min", "tau": None}
SQL_DEFAULTS = {"tau": None}
OPTIMIZE_DEFAULTS = {"bracket": [0.0, 10.0]}
OUTPUT_DEFAULTS = {"path": None, "format": None}
BLOCKS = {"eval": EVAL_DEFAULTS, "verify": VERIFY_DEFAULTS, "sql": SQL_DEFAULTS,
          "optimize": OPTIMIZE_DEFAULTS, "output": OUTPUT_DEFAULTS}


class ConfigError(ParameterError):
    pass


@dataclass
class RunConfig:
    params: PhysicalParams = field(default_factory=PhysicalParams)
    blocks: dict = field(default_factory=dict)
    sweep: dict | None = None

    def block(self, name: str) -> dict:
        return {**BLOCKS[name], **self.blocks.get(name, {})}

    def to_dict(self) -> dict:
        out = dict(self.params.to_dict())
        for name, block in self.blocks.items():
            out[name] = copy.deepcopy(block)
        if self.sweep is not None:
            out["sweep"] = copy.deepcopy(self.sweep)
        return out


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    params = {}
    blocks = {}
    sweep = None
    for key, value in raw.items():
        if key in PARAM_KEYS:
            params[key] = value
        elif key == "sweep":
            if not isinstance(value, dict):
                raise ConfigError("sweep", "must be an object")
            sweep = value
        elif key in BLOCKS:
            if not isinstance(value, dict):
                raise ConfigError(key, "must be an object")
            unknown = sorted(set(value) - set(BLOCKS[key]))
            if unknown:
                raise ConfigError(f"{key}.{unknown[0]}", "unknown key")
            blocks[key] = value
        else:
            raise ConfigError(key, "unknown key")
    cfg = RunConfig(params=PhysicalParams.from_dict(params), blocks=blocks, sweep=sweep)
    if sweep is not None:
        build_sweep_spec(sweep)
    return cfg


def load_config(path: str | None, overrides: list[str]) -> RunConfig:
    raw: dict = {}
    if path:
        text = Path(path).read_text()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None
    for item in overrides:
        apply_override(raw, item)
    return parse_config(raw)


def apply_override(raw: dict, item: str) -> None:
    """Apply ``a.b.c=value``; the value is read as JSON, falling back to a plain string."""
    if "=" not in item:
        raise ConfigError(item, "override must look like key=value")
    key, text = item.split("=", 1)
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    parts = key.split(".")
    node = raw
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(key, f"{part} is not an object")
    node[parts[-1]] = value


def build_sweep_spec(raw: dict) -> SweepSpec:
    allowed = {"axis1", "axis2", "fixed", "output", "time", "tau"}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"sweep.{unknown[0]}", "unknown key")
    if "axis1" not in raw:
        raise ConfigError("sweep.axis1", "missing")

    def axis(name):
        block = raw[name]
        if not isinstance(block, dict):
            raise ConfigError(f"sweep.{name}", "must be an object")
        extra = sorted(set(block) - {"name", "min", "max", "count", "scale"})
        if extra:
            raise ConfigError(f"sweep.{name}.{extra[0]}", "unknown key")
        try:
            return Axis(name=block["name"], min=float(block["min"]), max=float(block["max"]),
                        count=block["count"], scale=block.get("scale", "linear"))
        except KeyError as exc:
            raise ConfigError(f"sweep.{name}.{exc.args[0]}", "missing") from None
        except ParameterError as exc:
            raise ConfigError(f"sweep.{name}.{exc.field.split('.')[-1]}", str(exc).split(': ', 1)[-1]) from None

    fixed = raw.get("fixed", {})
    unknown = sorted(set(fixed) - set(PARAM_KEYS))
    if unknown:
        raise ConfigError(f"sweep.fixed.{unknown[0]}", "unknown parameter")
    return SweepSpec(axis1=axis("axis1"), axis2=axis("axis2") if raw.get("axis2") else None, fixed=fixed,
                     output=raw.get("output", "log10_sql_ratio"), time=raw.get("time", "first_min"),
                     tau=raw.get("tau"))


# ---------------------------------------------------------------------------
# Formatting
# ---------------------------------------------------------------------------

def fmt_number(x) -> str:
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.14e}"


def to_csv(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt_number(row[c]) for c in columns])
    return buf.getvalue()


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def to_json(obj) -> str:
    return json.dumps(_json_safe(obj), indent=2, sort_keys=False) + "\n"


def emit(text: str, out: str | None) -> None:
    if out:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise ConfigError("--out", f"cannot write {out}: {exc.strerror}") from None
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def derived_summary(p: PhysicalParams) -> dict:
    d = derive_couplings(p)
    thetas = {}
    for conv in ("literal", "angular_det"):
        try:
            thetas[conv] = derive_couplings(p.replace(bandwidth_convention=conv)).Theta
        except PhysicsDomainError:
            thetas[conv] = math.nan
    return {
        "omega0": d.omega0, "chi": d.chi, "theta": d.theta, "theta_minus_chi": d.theta_minus_chi,
        "Theta": d.Theta, "omega": d.omega, "nbar": d.nbar, "force_scale_N": d.force_scale,
        "Theta_literal": thetas["literal"], "Theta_angular_det": thetas["angular_det"],
        "tau_default": default_tau(d.Theta),
        "F_sql_default_tau": sql_force(d.mass, d.Omega, default_tau(d.Theta)),
    }


def cmd_eval(cfg: RunConfig, args) -> int:
    p = cfg.params
    if args.force is not None:
        p = p.replace(force=args.force)
    block = cfg.block("eval")
    t = args.time if args.time is not None else block["t"]
    tau = args.tau if args.tau is not None else block["tau"]
    d = derive_couplings(p)
    if t == "first_min":
        t, _ = analysis.find_first_minimum(p)
    elif isinstance(t, str):
        t = _number(t, "eval.t")
    res = sensitivity(d, float(t), p.squeezing, f=p.force, tau=tau)
    env = analysis.delta_envelope(d, float(t), p.squeezing)
    out = {
        "params": p.to_dict(), "derived": derived_summary(p),
        "result": asdict(res),
        "envelope": {"f_min_lower": env.lower, "f_min_upper": env.upper,
                     "F_lower_N": env.lower * d.force_scale,
                     "sql_ratio_lower": env.lower * d.force_scale / res.F_sql},
    }
    fmt = _format(cfg, args, "text")
    if fmt == "json":
        text = to_json(out)
    elif fmt == "csv":
        flat = {**{f"derived.{k}": v for k, v in out["derived"].items()},
                **{f"result.{k}": v for k, v in out["result"].items()},
                **{f"envelope.{k}": v for k, v in out["envelope"].items()}}
        text = to_csv(list(flat), [flat])
    else:
        lines = ["derived:"] + [f"  {k:20s} {fmt_number(v)}" for k, v in out["derived"].items()]
        lines += ["result:"] + [f"  {k:20s} {fmt_number(v)}" for k, v in out["result"].items()]
        lines += ["envelope:"] + [f"  {k:20s} {fmt_number(v)}" for k, v in out["envelope"].items()]
        text = "\n".join(lines) + "\n"
    emit(text, _out(cfg, args))
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    if cfg.sweep is None:
        raise ConfigError("sweep", "missing sweep block")
    spec = build_sweep_spec(cfg.sweep)
    result = analysis.sweep(spec, cfg.params)
    fmt = _format(cfg, args, "csv")
    if fmt == "json":
        text = to_json([{c: r[c] for c in result.columns} for r in result.rows])
    else:
        text = to_csv(result.columns, result.rows)
    emit(text, _out(cfg, args))
    print(f"rows={len(result.rows)} flagged={result.flagged}", file=sys.stderr)
    return EXIT_OK


def cmd_optimize(cfg: RunConfig, args) -> int:
    p = cfg.params
    d = derive_couplings(p)
    t1, f1 = analysis.find_first_minimum(p)
    lo, hi = cfg.block("optimize")["bracket"]
    try:
        s_star, f_star = analysis.optimal_squeezing(d, t1, d.nbar)
        note = "" if lo <= s_star <= hi else "optimum outside bracket"
    except UnboundedSqueezingError as exc:
        s_star, f_star, note = math.nan, math.nan, str(exc)
    F_sql = sql_force(d.mass, d.Omega, default_tau(d.Theta))
    out = {"t1": t1, "f_min_t1": f1, "F_t1_N": f1 * d.force_scale, "s_opt": s_star, "f_min_opt": f_star,
           "F_opt_N": f_star * d.force_scale, "F_sql_N": F_sql, "sql_ratio_opt": f_star * d.force_scale / F_sql,
           "note": note}
    fmt = _format(cfg, args, "text")
    if fmt == "json":
        text = to_json(out)
    elif fmt == "csv":
        text = to_csv(list(out), [out])
    else:
        text = "".join(f"{k:14s} {fmt_number(v)}\n" for k, v in out.items())
    emit(text, _out(cfg, args))
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    p = cfg.params
    v = cfg.block("verify")
    d = derive_couplings(p)
    periods = float(v["t_max_periods"])
    n = int(v["t_points"])
    if n < 1:
        raise ConfigError("verify.t_points", "must be >= 1")
    span = periods * 2 * math.pi / d.omega
    t_grid = [span * (i + 1) / n for i in range(n)]
    nbars = [thermal_occupation(T, p.mech_freq_rad_s) for T in v["temperatures_k"]]
    report = verify_against_closed_form(p, t_grid, v["squeezing"], nbars, gamma_list=v["damping_hz"],
                                        dt=v["dt"], cov_dt=v["cov_dt"], tolerance=float(v["tolerance"]))
    data = report.to_dict()
    fmt = _format(cfg, args, "json")
    if fmt == "csv":
        cols = list(data["points"][0])
        text = to_csv(cols, data["points"])
    else:
        text = to_json(data)
    emit(text, _out(cfg, args))
    status = "PASS" if report.passed else "FAIL"
    print(f"{status} max_rel_err={report.max_error:.3e} tolerance={report.tolerance:.1e} "
          f"points={len(report.points)}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_sql(cfg: RunConfig, args) -> int:
    p = cfg.params
    d = derive_couplings(p)
    user_tau = args.tau if args.tau is not None else cfg.block("sql")["tau"]
    taus = {"2pi/Theta": default_tau(d.Theta), "pi/Theta": math.pi / d.Theta}
    if user_tau is not None:
        taus["user"] = float(user_tau)
    rows = []
    for label, tau in taus.items():
        F = sql_force(d.mass, d.Omega, tau)
        rows.append({"tau_rule": label, "tau_s": tau, "F_sql_N": F,
                     "matches_12.2e-18": "yes" if abs(F / REFERENCE_SQL_N - 1) <= 0.02 else "no"})
    fmt = _format(cfg, args, "text")
    cols = ["tau_rule", "tau_s", "F_sql_N", "matches_12.2e-18"]
    if fmt == "json":
        text = to_json({"Theta": d.Theta, "Theta_literal": derived_summary(p)["Theta_literal"], "rows": rows})
    elif fmt == "csv":
        text = to_csv(cols, rows)
    else:
        text = "".join(f"{r['tau_rule']:10s} tau={fmt_number(r['tau_s'])} s  F_SQL={fmt_number(r['F_sql_N'])} N"
                       f"  reproduces 12.2e-18 N: {r['matches_12.2e-18']}\n" for r in rows)
    emit(text, _out(cfg, args))
    return EXIT_OK


def _number(text, field_name):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(field_name, f"expected a number or 'first_min', got {text!r}") from None


def _format(cfg, args, default):
    return args.format or cfg.block("output")["format"] or default


def _out(cfg, args):
    return args.out or cfg.block("output")["path"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="optoforce", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--format", choices=["csv", "json", "text"])
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="dotted-path config override, repeatable")
    sub = parser.add_subparsers(dest="command", required=True)
    p_eval = sub.add_parser("eval", parents=[common], help="sensitivity at one time")
    p_eval.add_argument("--time", help="interaction time in s, or first_min")
    p_eval.add_argument("--tau", type=float, help="SQL interaction time in s")
    p_eval.add_argument("--force", type=float, help="dimensionless force amplitude")
    sub.add_parser("sweep", parents=[common], help="parameter sweep to CSV/JSON")
    sub.add_parser("optimize", parents=[common], help="first minimum and optimal squeezing")
    sub.add_parser("verify", parents=[common], help="closed forms against the moment oracle")
    p_sql = sub.add_parser("sql", parents=[common], help="standard quantum limit for several tau")
    p_sql.add_argument("--tau", type=float, help="extra user-supplied tau in s")
    return parser


COMMANDS = {"eval": cmd_eval, "sweep": cmd_sweep, "optimize": cmd_optimize, "verify": cmd_verify, "sql": cmd_sql}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        return COMMANDS[args.command](cfg, args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc.filename}: file not found", file=sys.stderr)
        return EXIT_VALIDATION
    except (PhysicsDomainError, SingularSensitivity, NoMinimumError, IntegrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS


if __name__ == "__main__":
    sys.exit(main())
