"""Command-line interface: configuration ingestion, command dispatch, and
result emission.

    gsrisk validate    config.json
    gsrisk compute     config.json [--u-grid 0:10:0.5] [--out FILE] [--format csv|json]
    gsrisk compare     config.json [--eps-ladder 0.02,0.05,0.1] [--paths N] [...]
    gsrisk asymptotics config.json [--u-grid 20:200:20] [...]

Exit codes: 0 success, 1 input error, 2 numerical failure, 3 Monte Carlo
tolerance failure.  Every command is a thin mapper over library calls; for
a fixed config and seed the output is byte-identical across runs.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys

import jsonschema
import numpy as np

from . import __version__
from .distributions import HeavyTail, MixtureClaim, PhaseType
from .errors import (GsriskError, InputError, MonteCarloError, NumericalError,
                     ParseError, SchemaError)
from .fluid_map import build_model, det_polynomial
from .gerber_shiu import (PenaltyFunction, asymptotic_bound, cl_ruin_corrected,
                          gs_corrected)
from .montecarlo import estimate_gs_ladder, estimate_ruin
from .scale import base_scale_matrix
from .spectral import build_spectral

_PH_SCHEMA = {
    "type": "object",
    "properties": {
        "alpha": {"type": "array", "items": {"type": "number"},
                  "description": "initial phase probabilities"},
        "T": {"type": "array", "items": {"type": "array", "items": {"type": "number"}},
              "description": "subintensity matrix (1/time units)"},
    },
    "required": ["alpha", "T"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "premium_rate": {"type": "number", "exclusiveMinimum": 0,
                         "description": "premium income per unit time (c)"},
        "claim_rate": {"type": "number", "minimum": 0,
                       "description": "claim arrival intensity (lambda_-)"},
        "gain_rate": {"type": "number", "minimum": 0,
                      "description": "gain arrival intensity (lambda_+)"},
        "claim_ph": _PH_SCHEMA,
        "gain_ph": _PH_SCHEMA,
        "heavy_tail": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["pareto", "weibull", "lognormal"]},
                "params": {"type": "array", "items": {"type": "number"},
                           "minItems": 2, "maxItems": 2},
            },
            "required": ["kind", "params"],
            "additionalProperties": False,
        },
        "epsilon": {"type": "number", "minimum": 0, "maximum": 1,
                    "description": "heavy-tail mixing weight"},
        "q": {"type": "number", "minimum": 0, "description": "discount rate"},
        "penalty": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["constant", "deficit_indicator",
                                  "bilateral_exponential"]},
                "params": {"type": "array", "items": {"type": "number"}},
            },
            "required": ["kind", "params"],
            "additionalProperties": False,
        },
        "grid": {
            "type": "object",
            "properties": {
                "h": {"type": "number", "exclusiveMinimum": 0},
                "u_max": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "mc": {
            "type": "object",
            "properties": {
                "paths": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "horizon": {"type": "number", "exclusiveMinimum": 0,
                            "description": "time horizon for q > 0 stopping"},
                "barrier": {"type": "number", "exclusiveMinimum": 0,
                            "description": "upper barrier for q = 0 stopping"},
            },
            "additionalProperties": False,
        },
    },
    "required": ["premium_rate", "claim_rate", "claim_ph", "heavy_tail",
                 "epsilon", "q", "penalty"],
    "additionalProperties": False,
}

RESULT_COLUMNS = ("u", "base", "correction", "corrected",
                  "mc_mean", "mc_half_width", "tail_ratio")
TABLE_VERSION = "gsrisk-table-v1"


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            raw = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON in {path}: {exc}") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaError(f"config schema violation: {exc.message}") from exc
    return cfg


def model_from_config(cfg: dict):
    claim_ph = PhaseType(np.asarray(cfg["claim_ph"]["alpha"], float),
                         np.asarray(cfg["claim_ph"]["T"], float))
    ht = HeavyTail(cfg["heavy_tail"]["kind"], tuple(cfg["heavy_tail"]["params"]))
    claims = MixtureClaim(claim_ph, ht, float(cfg["epsilon"]))
    gain_rate = float(cfg.get("gain_rate", 0.0))
    gains = None
    if gain_rate > 0:
        if "gain_ph" not in cfg:
            raise SchemaError("gain_rate > 0 requires gain_ph")
        gains = PhaseType(np.asarray(cfg["gain_ph"]["alpha"], float),
                          np.asarray(cfg["gain_ph"]["T"], float))
    return build_model(float(cfg["premium_rate"]), float(cfg["claim_rate"]),
                       claims, lambda_plus=gain_rate, gains=gains,
                       q=float(cfg["q"]))


def penalty_from_config(cfg: dict) -> PenaltyFunction:
    pen = cfg["penalty"]
    return PenaltyFunction(pen["kind"], tuple(float(p) for p in pen["params"]))


def parse_u_grid(text: str) -> np.ndarray:
    """start:stop:step, inclusive of both ends within half a step."""
    try:
        start, stop, step = (float(p) for p in text.split(":"))
    except ValueError as exc:
        raise InputError(f"bad u-grid {text!r}: expected start:stop:step") from exc
    if step <= 0 or stop < start:
        raise InputError(f"bad u-grid {text!r}: need step > 0 and stop >= start")
    n = int(math.floor((stop - start) / step + 0.5)) + 1
    return start + step * np.arange(n)


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return format(float(x), ".12g")


def _csv_field(s: str) -> str:
    if any(ch in s for ch in ',"\r\n'):
        return '"' + s.replace('"', '""') + '"'
    return s


def emit_table(rows: list[dict], fmt: str, out) -> None:
    if fmt == "json":
        data = [{k: row.get(k) for k in RESULT_COLUMNS} for row in rows]
        out.write(json.dumps(data, indent=2, default=float))
        out.write("\n")
        return
    # RFC 4180: CRLF line endings, quoted fields only when needed
    out.write(",".join(RESULT_COLUMNS) + "\r\n")
    for row in rows:
        out.write(",".join(_csv_field(_fmt(row.get(k))) for k in RESULT_COLUMNS)
                  + "\r\n")


def _write_output(rows, fmt, path):
    if path:
        with open(path, "w", newline="") as fh:
            emit_table(rows, fmt, fh)
    else:
        buf = io.StringIO()
        emit_table(rows, fmt, buf)
        sys.stdout.write(buf.getvalue())


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    model = model_from_config(cfg)
    penalty = penalty_from_config(cfg)
    detp = det_polynomial(model)
    n_pos = model.dimension if model.q > 0 else model.dimension - 1
    roots = detp.roots()
    pos = [r for r in roots if r.real > 1e-9]
    print(f"model: c={model.c:g}, lambda_-={model.lambda_minus:g}, "
          f"lambda_+={model.lambda_plus:g}, q={model.q:g}, eps={model.eps:g}")
    print(f"claim mean: {model.claim_mean():.6g} "
          f"(ph {model.mu_p:.6g}, heavy {model.mu_h:.6g})")
    print(f"loading margin: {model.loading():.6g}")
    print(f"penalty: {penalty.kind}, bound {penalty.bound:g}")
    print(f"positive roots: {len(pos)} (expected {n_pos})")
    return 0


def _compute_rows(model, penalty, u_grid, eps) -> list[dict]:
    if model.q == 0:
        # Cramer-Lundberg specialization: ruin probability with omega == 1
        if penalty.kind != "constant" or penalty.params[0] != 1.0:
            raise InputError("q = 0 supports only the constant unit penalty")
        detp = det_polynomial(model)
        W = base_scale_matrix(model, detp)
        base = 1.0 - (model.loading(0.0)) * np.array(
            [float(W(ui)[0, 0]) for ui in u_grid])
        corrected = cl_ruin_corrected(model, u_grid, eps)
        return [{"u": ui, "base": b, "correction": c - b, "corrected": c}
                for ui, b, c in zip(u_grid, base, corrected)]
    results = gs_corrected(model, penalty, u_grid, eps)
    # table column is the applied first-order term, so base + correction
    # equals corrected row-wise
    return [{"u": r.u, "base": r.base, "correction": r.corrected - r.base,
             "corrected": r.corrected} for r in results]


def cmd_compute(args) -> int:
    cfg = load_config(args.config)
    model = model_from_config(cfg)
    penalty = penalty_from_config(cfg)
    u_grid = parse_u_grid(args.u_grid)
    rows = _compute_rows(model, penalty, u_grid, model.eps)
    _write_output(rows, args.format, args.out)
    return 0


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    if "mc" not in cfg:
        raise SchemaError("compare needs an mc section in the config")
    model = model_from_config(cfg)
    penalty = penalty_from_config(cfg)
    ladder = [float(e) for e in args.eps_ladder.split(",") if e]
    if not ladder:
        raise InputError("empty eps ladder")
    n_paths = args.paths if args.paths else int(cfg["mc"]["paths"])
    seed = int(cfg["mc"].get("seed", 0))
    u = args.u
    rows = []
    errors, half_widths = [], []
    if model.q > 0:
        estimates = estimate_gs_ladder(model, ladder, penalty, u, n_paths,
                                       seed, horizon=cfg["mc"].get("horizon"))
    else:
        estimates = [estimate_ruin(model, e, u, n_paths, seed + i,
                                   barrier=cfg["mc"].get("barrier"))
                     for i, e in enumerate(ladder)]
    for eps, est in zip(ladder, estimates):
        row = _compute_rows(model, penalty, np.array([u]), eps)[0]
        err = float(row["corrected"]) - est.mean
        rows.append({**row, "mc_mean": est.mean,
                     "mc_half_width": est.half_width_95})
        errors.append(abs(err))
        half_widths.append(est.half_width_95)
        print(f"eps={eps:g}: corrected={_fmt(row['corrected'])} "
              f"mc={_fmt(est.mean)} +- {_fmt(est.half_width_95)} "
              f"error={err:+.3e}", file=sys.stderr)
    _write_output(rows, args.format, args.out)
    clear = [(e, err) for e, err, hw in zip(ladder, errors, half_widths)
             if err > 3.0 * hw]
    if len(ladder) < 2 or len(clear) < 2:
        print("slope: unavailable "
              "(noise floor: errors within 3x MC half-width)"
              if len(ladder) >= 2 else "slope: unavailable (single point)",
              file=sys.stderr)
    else:
        le = np.log([e for e, _ in clear])
        lr = np.log([err for _, err in clear])
        slope = float(np.polyfit(le, lr, 1)[0])
        print(f"slope: {slope:.3f} over {len(clear)} points clear of the "
              f"noise floor", file=sys.stderr)
    return 0


def cmd_asymptotics(args) -> int:
    cfg = load_config(args.config)
    model = model_from_config(cfg)
    penalty = penalty_from_config(cfg)
    u_grid = parse_u_grid(args.u_grid)
    detp = det_polynomial(model)
    sp = build_spectral(model, detp)
    W = base_scale_matrix(model, detp)
    bound = asymptotic_bound(model, sp, W, penalty, model.eps)
    rows = _compute_rows(model, penalty, u_grid, model.eps)
    ht = model.claims.ht
    violated = False
    for row in rows:
        tail = float(ht.equilibrium_tail(row["u"]))
        row["tail_ratio"] = float(row["corrected"]) / tail
        if row["tail_ratio"] > bound * (1 + 1e-9):
            violated = True
    _write_output(rows, args.format, args.out)
    print(f"asymptotic bound: {_fmt(bound)}", file=sys.stderr)
    if violated:
        print("warning: tail ratio exceeds the asymptotic bound "
              "(numerics suspect)", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gsrisk",
                                description="Gerber-Shiu functions for risk "
                                "processes with phase-type gains and mixed "
                                "phase-type/heavy-tailed claims")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="JSON model configuration")
        sp.add_argument("--out", default=None, help="output file (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sub.add_parser("validate").add_argument("config")

    c = sub.add_parser("compute")
    common(c)
    c.add_argument("--u-grid", default="0:10:0.5", help="start:stop:step")

    c = sub.add_parser("compare")
    common(c)
    c.add_argument("--eps-ladder", default="0.02,0.05,0.1")
    c.add_argument("--paths", type=int, default=None)
    c.add_argument("--u", type=float, default=2.0)

    c = sub.add_parser("asymptotics")
    common(c)
    c.add_argument("--u-grid", default="20:200:20", help="start:stop:step")
    return p


_HANDLERS = {"validate": cmd_validate, "compute": cmd_compute,
             "compare": cmd_compare, "asymptotics": cmd_asymptotics}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except MonteCarloError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InputError, GsriskError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
