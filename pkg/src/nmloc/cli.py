"""Batch runner: config ingestion, scenario execution, report emission.

Subcommands::

    nmloc run           --config cfg.json [--override k=v ...] [--out-dir DIR]
    nmloc verify-distal --config cfg.json ...
    nmloc check-theory  --config cfg.json ...
    nmloc sweep         --config cfg.json --override hopping.epsilon=0.3,0.1 ...

Configs are JSON, schema-validated with unknown keys rejected.  ``run``
writes a per-step ledger CSV and a report JSON (schema-validated before
writing); ``sweep`` treats comma-separated override values as cartesian
sweep axes and emits one report per cell plus an aggregate CSV.  All
floating-point output is written in round-trip precision.

Exit codes: 0 success, 1 a numerical invariant failed (named on stderr),
2 configuration errors.
"""

from __future__ import annotations

import argparse
import copy
import itertools
import json
import os
import sys

import jsonschema

from . import localization
from .errors import ConfigError
from .box import LatticeBox
from .iteration import (
    DIRECT,
    INVERSE,
    BOUND_FORMULAS,
    SchemeParams,
    check_theory_conditions,
    ledger_to_csv,
    run,
)
from .models import HoppingSpec, PotentialSpec, build_hopping, build_potential, check_diophantine
from .algebra import distal_gamma_window, distal_margin
from .operators import LatticeOperator, TameConstants

_NUM = {"type": "number"}
_NUM_OR_NULL = {"type": ["number", "null"]}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["box", "potential", "hopping", "params"],
    "properties": {
        "box": {
            "type": "object",
            "additionalProperties": False,
            "required": ["dimension", "radius", "interior_radius"],
            "properties": {
                "dimension": {"type": "integer", "minimum": 1},
                "radius": {"type": "integer", "minimum": 1},
                "interior_radius": {"type": "integer", "minimum": 1},
            },
        },
        "potential": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {
                    "enum": [
                        "maryland",
                        "sarnak",
                        "craig_mod1",
                        "limit_periodic_binary",
                        "limit_periodic_ternary",
                        "custom",
                    ]
                },
                "omega": {"type": ["array", "null"], "items": _NUM},
                "custom_values": {"type": ["array", "null"], "items": _NUM},
            },
        },
        "hopping": {
            "type": "object",
            "additionalProperties": False,
            "required": ["s_exponent", "epsilon"],
            "properties": {
                "s_exponent": {"type": "number", "exclusiveMinimum": 0},
                "epsilon": {"type": "number", "minimum": 0},
                "profile": {"enum": ["power_law"]},
            },
        },
        "params": {
            "type": "object",
            "additionalProperties": False,
            "required": ["tau", "delta", "alpha0", "theta0", "Theta"],
            "properties": {
                "tau": _NUM,
                "gamma": _NUM_OR_NULL,
                "delta": _NUM,
                "alpha0": _NUM,
                "alpha": _NUM_OR_NULL,
                "alpha1": _NUM_OR_NULL,
                "theta0": _NUM,
                "Theta": _NUM,
                "mode": {"enum": [INVERSE, DIRECT]},
                "theory_checks": {"type": "boolean"},
                "stop_tol": _NUM,
                "max_steps": {"type": "integer", "minimum": 1},
                "s_grid": {"type": ["array", "null"], "items": _NUM},
                "eps_floor": _NUM,
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "ledger_csv_path": {"type": ["string", "null"]},
                "report_json_path": {"type": ["string", "null"]},
                "checkpoint_dir": {"type": ["string", "null"]},
            },
        },
        "seeds": {"type": "integer"},
    },
}

_EIGENREPORT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": [
        "center",
        "eigenvalue",
        "decay_envelope_margin",
        "eigen_residual",
        "interior",
        "envelope_constant",
    ],
    "properties": {
        "center": {"type": "array", "items": {"type": "integer"}},
        "eigenvalue": {
            "type": "object",
            "properties": {"re": _NUM, "im": _NUM},
            "required": ["re", "im"],
            "additionalProperties": False,
        },
        "decay_envelope_margin": _NUM,
        "eigen_residual": _NUM,
        "interior": {"type": "boolean"},
        "envelope_constant": _NUM,
    },
}

REPORT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": [
        "config_echo",
        "converged",
        "steps",
        "final_residual_norms",
        "qplus_norms",
        "dplus_norm",
        "localization",
        "theory_conditions",
    ],
    "properties": {
        "config_echo": {"type": "object"},
        "converged": {"type": "boolean"},
        "steps": {"type": "integer"},
        "final_residual_norms": {"type": "object", "additionalProperties": _NUM},
        "qplus_norms": {"type": "object", "additionalProperties": _NUM},
        "dplus_norm": _NUM,
        "gamma_used": _NUM,
        "master_residual": _NUM,
        "bound_formulas": {"type": "object", "additionalProperties": {"type": "string"}},
        "localization": {
            "type": "object",
            "additionalProperties": False,
            "required": ["eigenreports", "completeness", "spectrum"],
            "properties": {
                "eigenreports": {"type": "array", "items": _EIGENREPORT_SCHEMA},
                "completeness": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["min_singular_value", "gram_offdiag"],
                    "properties": {
                        "min_singular_value": _NUM,
                        "gram_offdiag": _NUM,
                        "unitarity_defect": _NUM_OR_NULL,
                    },
                },
                "spectrum": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "hausdorff_interior": _NUM_OR_NULL,
                        "skipped": {"type": ["string", "null"]},
                    },
                },
            },
        },
        "theory_conditions": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["name", "holds", "margin", "scale", "effective"],
                "properties": {
                    "name": {"type": "string"},
                    "holds": {"type": "boolean"},
                    "margin": _NUM,
                    "scale": {"type": "string"},
                    "effective": {"type": "boolean"},
                    "detail": {"type": "string"},
                },
            },
        },
    },
}

DEFAULT_OUTPUT = {
    "ledger_csv_path": "ledger.csv",
    "report_json_path": "report.json",
    "checkpoint_dir": None,
}


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict):
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config rejected: {exc.message}") from exc


def apply_override(cfg: dict, key: str, value):
    """Set a dotted-path key, parsing the value as JSON when possible."""
    if isinstance(value, str):
        try:
            value = json.loads(value)
        except json.JSONDecodeError:
            pass
    node = cfg
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override path {key!r} crosses a non-object")
    node[parts[-1]] = value


def _assemble(cfg):
    try:
        box = LatticeBox(**cfg["box"])
        pot_cfg = dict(cfg["potential"])
        spec = PotentialSpec(
            kind=pot_cfg["kind"],
            omega=tuple(pot_cfg["omega"]) if pot_cfg.get("omega") else None,
            custom_values=pot_cfg.get("custom_values"),
        )
        hop_cfg = dict(cfg["hopping"])
        hop_cfg.setdefault("profile", "power_law")
        hop = HoppingSpec(**hop_cfg)
        params_cfg = dict(cfg["params"])
        params = SchemeParams(
            s_hopping=hop.s_exponent, epsilon=hop.epsilon, **params_cfg
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    # model construction can fail numerically (pole proximity); that is a
    # run failure, not a config failure
    D = build_potential(spec, box)
    T = build_hopping(hop, box)
    return box, spec, D, hop, T, params


def _f17(x) -> str:
    return f"{float(x):.17g}"


def _report_dict(cfg, result, conditions):
    p = result.params
    s_levels = {0.0, p.alpha0, p.alpha, p.alpha - p.tau - 7 * p.delta}
    final_norms = {
        f"s={lvl:g}": float(result.final_residual.sobolev_norm(lvl))
        for lvl in sorted(s_levels)
        if lvl >= 0
    }
    q_norms = {"operator_norm": result.qplus.operator_norm()}
    eye_norm_s = p.alpha - p.tau - 7 * p.delta
    if eye_norm_s >= 0:
        eye = LatticeOperator.identity(result.box)
        q_norms[f"minus_identity@s={eye_norm_s:g}"] = float(
            (result.qplus - eye).sobolev_norm(eye_norm_s)
        )
    if result.scaling_ratio is not None:
        q_norms["coupling_scaling_ratio"] = float(result.scaling_ratio)

    loc = {"eigenreports": [], "completeness": {}, "spectrum": {}}
    if result.converged:
        reports = localization.eigenfunctions(result)
        loc["eigenreports"] = [
            {
                "center": list(r.center),
                "eigenvalue": {"re": r.eigenvalue.real, "im": r.eigenvalue.imag},
                "decay_envelope_margin": r.decay_envelope_margin,
                "eigen_residual": r.eigen_residual,
                "interior": r.interior,
                "envelope_constant": r.envelope_constant,
            }
            for r in reports
        ]
        min_sv, gram_off = localization.completeness_check(result)
        loc["completeness"] = {
            "min_singular_value": min_sv,
            "gram_offdiag": gram_off,
            "unitarity_defect": result.unitarity_defect,
        }
        try:
            loc["spectrum"] = {
                "hausdorff_interior": localization.spectrum_compare(result),
                "skipped": None,
            }
        except Exception as exc:  # non-symmetric models keep running
            loc["spectrum"] = {"hausdorff_interior": None, "skipped": str(exc)}
    else:
        loc["completeness"] = {
            "min_singular_value": float("nan"),
            "gram_offdiag": float("nan"),
            "unitarity_defect": None,
        }
        loc["spectrum"] = {"hausdorff_interior": None, "skipped": "run not converged"}

    report = {
        "config_echo": cfg,
        "converged": bool(result.converged),
        "steps": int(result.steps),
        "final_residual_norms": final_norms,
        "qplus_norms": q_norms,
        "dplus_norm": float(result.dplus.sobolev_norm(0.0)),
        "gamma_used": float(result.gamma_used),
        "master_residual": float(result.master_residual),
        "bound_formulas": dict(BOUND_FORMULAS),
        "localization": loc,
        "theory_conditions": [
            {
                "name": c.name,
                "holds": c.holds,
                "margin": c.margin,
                "scale": c.scale,
                "effective": c.effective,
                "detail": c.detail,
            }
            for c in conditions
        ],
    }
    jsonschema.validate(report, REPORT_SCHEMA)
    return report


def _write_json(path, payload):
    tmp = str(path) + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, allow_nan=True)
        fh.write("\n")
    os.replace(tmp, path)


def _out_path(out_dir, rel):
    if rel is None:
        return None
    if out_dir is None:
        return rel
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, rel)


def _theory_rows(T, params, box):
    tc = TameConstants(box.dimension, params.resolved(box.dimension).alpha0)
    p = params.resolved(box.dimension)
    t_norms = {
        p.alpha + 4 * p.delta: T.sobolev_norm(p.alpha + 4 * p.delta),
        p.alpha + 3 * p.delta: T.sobolev_norm(p.alpha + 3 * p.delta),
    }
    return check_theory_conditions(p, t_norms, tc)


def cmd_run(cfg: dict, out_dir=None) -> int:
    box, _spec, D, _hop, T, params = _assemble(cfg)
    output = {**DEFAULT_OUTPUT, **cfg.get("output", {})}
    conditions = _theory_rows(T, params, box)
    result = run(
        T, D, params,
        checkpoint_dir=_out_path(out_dir, output.get("checkpoint_dir")),
    )
    ledger_path = _out_path(out_dir, output.get("ledger_csv_path"))
    if ledger_path:
        with open(ledger_path, "w") as fh:
            fh.write(ledger_to_csv(result.ledger))
    report = _report_dict(cfg, result, conditions)
    report_path = _out_path(out_dir, output.get("report_json_path"))
    if report_path:
        _write_json(report_path, report)
    print(
        f"run: converged={result.converged} steps={result.steps} "
        f"final ||R||_0={_f17(result.final_residual.sobolev_norm(0.0))} "
        f"gamma={_f17(result.gamma_used)}"
    )
    if not result.converged:
        print("invariant failed: convergence (stop tolerance not reached)",
              file=sys.stderr)
        return 1
    return 0


def cmd_verify_distal(cfg: dict, out_dir=None) -> int:
    del out_dir
    box, spec, D, _hop, _T, params = _assemble(cfg)
    p = params.resolved(box.dimension)
    max_offset = min(2 * box.radius, 64)
    taus = sorted({p.tau, 0.5 * p.tau, 1.5 * p.tau, 2.0 * p.tau})
    print(f"distal frontier for {spec.kind} on {box} (offsets up to {max_offset}):")
    print("tau,gamma_best,worst_offset")
    failed = False
    for tau in taus:
        gamma_best, worst = distal_gamma_window(D.diag, tau, max_offset)
        print(f"{_f17(tau)},{_f17(gamma_best)},{worst}")
    if spec.omega is not None:
        gamma_dio, worst = check_diophantine(spec.omega, p.tau, max_offset)
        print(f"torus frequency constant at tau={p.tau:g}: "
              f"gamma={_f17(gamma_dio)} worst_k={worst}")
    if p.gamma is not None:
        report = distal_margin(D.diag, p.tau, p.gamma, max_offset)
        status = "pass" if report.passed else "FAIL"
        print(f"requested (tau={p.tau:g}, gamma={p.gamma:g}): {status} "
              f"margin={_f17(report.empirical_margin)} at {report.worst_offset}")
        failed = not report.passed
    if failed:
        print("invariant failed: distal margin negative", file=sys.stderr)
    return 1 if failed else 0


def cmd_check_theory(cfg: dict, out_dir=None) -> int:
    del out_dir
    box, _spec, _D, _hop, T, params = _assemble(cfg)
    rows = _theory_rows(T, params, box)
    print("condition,holds,margin,scale,effective,detail")
    for c in rows:
        print(f"{c.name},{c.holds},{_f17(c.margin)},{c.scale},{c.effective},{c.detail}")
    binding = next((c for c in rows if c.name == "Theta"), None)
    if binding is not None and binding.data:
        print(
            f"binding Theta constraint: {binding.data['binding']} "
            f"(log10 required = {_f17(binding.data['required_log10'])})"
        )
    if params.theory_checks and any(c.effective and not c.holds for c in rows):
        print("invariant failed: a theory condition does not hold", file=sys.stderr)
        return 1
    return 0


def _axis_values(raw: str):
    vals = [v for v in raw.split(",") if v != ""]
    parsed = []
    for v in vals:
        try:
            parsed.append(json.loads(v))
        except json.JSONDecodeError:
            parsed.append(v)
    return parsed


def cmd_sweep(cfg: dict, overrides, out_dir=None) -> int:
    axes = []
    for key, raw in overrides:
        values = _axis_values(raw)
        if not values:
            raise ConfigError(f"sweep axis {key!r} has no values")
        axes.append((key, values))
    if not axes:
        raise ConfigError("sweep requires at least one --override axis")
    out_dir = out_dir or "sweep_out"
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    status = 0
    for combo in itertools.product(*(vals for _, vals in axes)):
        cell = copy.deepcopy(cfg)
        tags = []
        for (key, _), value in zip(axes, combo):
            apply_override(cell, key, value)
            tags.append(f"{key.split('.')[-1]}={value}")
        validate_config(cell)
        cell_name = "_".join(tags).replace("/", "-")
        cell_dir = os.path.join(out_dir, cell_name)
        os.makedirs(cell_dir, exist_ok=True)
        code = cmd_run(cell, out_dir=cell_dir)
        status = max(status, code)
        with open(os.path.join(cell_dir, "report.json")) as fh:
            rep = json.load(fh)
        rows.append(
            {
                "cell": cell_name,
                "converged": rep["converged"],
                "steps": rep["steps"],
                "final_residual_0": rep["final_residual_norms"].get("s=0"),
                "dplus_norm": rep["dplus_norm"],
                "min_singular_value": rep["localization"]["completeness"][
                    "min_singular_value"
                ],
            }
        )
    agg = os.path.join(out_dir, "sweep.csv")
    with open(agg, "w") as fh:
        cols = ["cell", "converged", "steps", "final_residual_0", "dplus_norm",
                "min_singular_value"]
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(
                ",".join(
                    str(row[c]) if not isinstance(row[c], float) else _f17(row[c])
                    for c in cols
                )
                + "\n"
            )
    print(f"sweep: {len(rows)} cells, aggregate at {agg}")
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nmloc",
        description="run the conjugation scheme and its certification suite",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "verify-distal", "check-theory", "sweep"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument(
            "--override", action="append", default=[], metavar="KEY=VALUE",
            help="dotted-path config override; comma lists form sweep axes",
        )
        sp.add_argument("--out-dir", default=None)
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        pairs = []
        for item in args.override:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not KEY=VALUE")
            key, _, raw = item.partition("=")
            pairs.append((key, raw))
        if args.command == "sweep":
            return cmd_sweep(cfg, pairs, out_dir=args.out_dir)
        for key, raw in pairs:
            apply_override(cfg, key, raw)
        validate_config(cfg)
        if args.command == "run":
            return cmd_run(cfg, out_dir=args.out_dir)
        if args.command == "verify-distal":
            return cmd_verify_distal(cfg, out_dir=args.out_dir)
        return cmd_check_theory(cfg, out_dir=args.out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # numerical invariant failures
        print(f"invariant failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
