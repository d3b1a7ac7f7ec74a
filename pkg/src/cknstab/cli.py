"""Command-line entry point.

Every invocation is turned into a JSON run configuration, validated against
CONFIG_SCHEMA, executed, and written out as a JSON (or CSV) report that embeds
the resolved configuration.

Exit codes: 0 success, 1 inequality violation, 2 numerical failure,
3 invalid input or configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import fields
from datetime import datetime, timezone

import jsonschema

from . import __version__
from .errors import CknError, InvalidBracket, InvalidInput, NumericalFailure, RegimeMismatch, \
    UnsupportedRegime
from .experiments import (ROW_COLUMNS, CorpusSpec, Theorem, poincare_corpus, poincare_probe,
                          scaling_blowup, second_order_reports, sharpness_scan,
                          strong_stability_reports, verify_weak_stability, weak_theorem_for)
from .functionals import deficit, deficit2, identity2_sides
from .model import make_profile, profile_from_dict
from .numerics import QuadratureSpec
from .params import Regime, classify_regime, derive_first_order, derive_second_order
from .projection import (ProjectionOptions, best_aligned, best_aligned2, inf_distance,
                         project_Hc2, project_Lc)

EXIT_OK, EXIT_VIOLATION, EXIT_NUMERICAL, EXIT_INVALID = 0, 1, 2, 3

COMMANDS = ("info", "deficit", "project", "verify", "sharpness", "scaling", "identity2",
            "poincare")

_NUM = {"type": "number"}
_PROFILE = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["minimizer", "perturbed", "closed_form", "samples"]},
        "k": _NUM, "lambda": _NUM, "eps": _NUM,
        "mode": {"enum": ["gauss_bump", "poly_tilt", "scale_split"]},
        "name": {"enum": ["gaussian", "exp_r", "bump", "quartic"]},
        "scale": _NUM,
        "r_grid": {"type": "array", "items": _NUM, "minItems": 8},
        "values": {"type": "array", "items": _NUM, "minItems": 8},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "cknstab run configuration",
    "type": "object",
    "required": ["command", "params"],
    "additionalProperties": False,
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "params": {
            "type": "object",
            "required": ["N", "p"],
            "additionalProperties": False,
            "properties": {"N": {"type": "integer", "minimum": 1}, "p": _NUM, "a": _NUM,
                           "b": _NUM, "order": {"enum": ["first", "second"]}},
        },
        "input": _PROFILE,
        "corpus": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_perturbed": {"type": "integer", "minimum": 0},
                "n_closed": {"type": "integer", "minimum": 0},
                "n_samples": {"type": "integer", "minimum": 0},
                "n_minimizers": {"type": "integer", "minimum": 0},
                "eps_range": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
            },
        },
        "quadrature": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rel_tol": {"type": "number", "exclusiveMinimum": 0},
                "abs_tol": {"type": "number", "exclusiveMinimum": 0},
                "split_points": {"type": "array", "items": _NUM},
                "tail_cutoff_strategy": {"enum": ["exp_decay_bound", "fixed_R"]},
                "max_subdivisions": {"type": "integer", "minimum": 1},
                "r_max": {"type": ["number", "null"]},
            },
        },
        "search": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "box": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                "seeds": {"type": "array", "items": _NUM, "minItems": 1},
                "scan_step": {"type": "number", "exclusiveMinimum": 0},
                "strict": {"type": "boolean"},
                "panel": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "options": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "theorem": {"enum": [t.value for t in Theorem]},
                "mode": {"enum": ["Lc", "aligned", "H_b", "L_a", "Hc"]},
                "j_list": {"type": "array", "items": {"type": "integer", "minimum": 1},
                           "minItems": 3},
                "lambdas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                            "minItems": 2},
                "mu": _NUM, "gamma": _NUM, "m": _NUM, "lam_tilde": _NUM,
                "n_functions": {"type": "integer", "minimum": 1},
                "mesh_check": {"type": "boolean"},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"path": {"type": ["string", "null"]},
                           "format": {"enum": ["json", "csv"]}},
        },
    },
}


class ConfigError(InvalidInput):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# ---------------------------------------------------------------------------
# configuration


def validate_config(cfg: dict) -> dict:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    return cfg


def _config_from_args(ns) -> dict:
    if ns.config:
        try:
            with open(ns.config, "r", encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {ns.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        if cfg.get("command", ns.command) != ns.command:
            raise ConfigError("config command does not match the subcommand")
        cfg = dict(cfg)
        cfg["command"] = ns.command
    else:
        cfg = {"command": ns.command}
    params = dict(cfg.get("params", {}))
    for key in ("N", "p", "a", "b", "order"):
        val = getattr(ns, key, None)
        if val is not None:
            params[key] = val
    cfg["params"] = params
    if getattr(ns, "profile", None):
        try:
            cfg["input"] = json.loads(ns.profile)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--profile is not valid JSON: {exc}") from None
    if ns.seed is not None:
        cfg["seed"] = ns.seed
    quad = dict(cfg.get("quadrature", {}))
    for key in ("rel_tol", "abs_tol", "max_subdivisions"):
        val = getattr(ns, key, None)
        if val is not None:
            quad[key] = val
    if quad:
        cfg["quadrature"] = quad
    corpus = dict(cfg.get("corpus", {}))
    for key in ("n_perturbed", "n_closed", "n_samples", "n_minimizers"):
        val = getattr(ns, key, None)
        if val is not None:
            corpus[key] = val
    if corpus:
        cfg["corpus"] = corpus
    opts = dict(cfg.get("options", {}))
    for key, attr in (("theorem", "theorem"), ("mode", "mode"), ("j_list", "j"),
                      ("lambdas", "lambdas"), ("mu", "mu"), ("gamma", "gamma"), ("m", "m"),
                      ("lam_tilde", "lam_tilde"), ("n_functions", "n_functions")):
        val = getattr(ns, attr, None)
        if val is not None:
            opts[key] = val
    if getattr(ns, "no_mesh_check", False):
        opts["mesh_check"] = False
    if opts:
        cfg["options"] = opts
    out = dict(cfg.get("output", {}))
    if ns.output is not None:
        out["path"] = ns.output
    if ns.format is not None:
        out["format"] = ns.format
    if out:
        cfg["output"] = out
    return validate_config(cfg)


def _resolve(cfg: dict) -> dict:
    """Fill defaults so the embedded config fully describes the run."""
    res = json.loads(json.dumps(cfg))
    res.setdefault("seed", 0)
    res["quadrature"] = QuadratureSpec(**{k: (tuple(v) if k == "split_points" else v)
                                          for k, v in res.get("quadrature", {}).items()}).to_dict()
    s = ProjectionOptions()
    search = {"box": list(s.box), "seeds": list(s.seeds), "scan_step": s.scan_step,
              "strict": s.strict, "panel": s.panel}
    search.update(res.get("search", {}))
    res["search"] = search
    out = {"path": None, "format": "json"}
    out.update(res.get("output", {}))
    res["output"] = out
    cmd = res["command"]
    opts = res.get("options", {})
    second_th = opts.get("theorem") in (Theorem.T1_10.value, Theorem.T1_11.value)
    res["params"].setdefault("order", "second" if cmd == "identity2" or second_th else "first")
    defaults = dict(_OPTION_DEFAULTS.get(cmd, {}))
    if cmd == "project":
        defaults["mode"] = "Hc" if res["params"]["order"] == "second" else "Lc"
    if cmd == "verify":
        corpus = {f.name: f.default for f in fields(CorpusSpec)
                  if f.name not in ("params", "seed")}
        corpus["eps_range"] = list(corpus["eps_range"])
        corpus.update(res.get("corpus", {}))
        res["corpus"] = corpus
    if defaults or opts:
        defaults.update(opts)
        res["options"] = defaults
    return res


_OPTION_DEFAULTS = {
    "verify": {"mesh_check": True},
    "sharpness": {"j_list": [4, 8, 16, 32]},
    "scaling": {"lambdas": [0.25, 0.5, 1.0, 2.0, 4.0]},
    "poincare": {"mu": 1.0, "gamma": 1.0, "m": 2.0, "lam_tilde": 1.0, "n_functions": 20},
}


def _quad(res) -> QuadratureSpec:
    q = dict(res["quadrature"])
    q["split_points"] = tuple(q["split_points"])
    return QuadratureSpec(**q)


def _search(res, spec) -> ProjectionOptions:
    s = res["search"]
    return ProjectionOptions(box=tuple(s["box"]), seeds=tuple(s["seeds"]),
                             scan_step=float(s["scan_step"]), strict=bool(s["strict"]),
                             spec=spec, panel=float(s["panel"]))


def _need(params: dict, *keys):
    missing = [k for k in keys if k not in params]
    if missing:
        raise ConfigError(f"missing parameter(s): {', '.join(missing)}")


def _first(res):
    pr = res["params"]
    _need(pr, "a", "b")
    return derive_first_order(pr["N"], pr["p"], pr["a"], pr["b"])


def _second(res):
    pr = res["params"]
    _need(pr, "a", "b")
    return derive_second_order(pr["N"], pr["p"], pr["a"], pr["b"])


def _params_for(res):
    order = res["params"].get("order", "first")
    return _second(res) if order == "second" else _first(res)


def _input(res, params, spec):
    if "input" not in res:
        raise ConfigError("this command needs an input profile (--profile or config 'input')")
    return make_profile(profile_from_dict(res["input"]), params, spec)


def _corpus(res, params) -> CorpusSpec:
    c = res.get("corpus", {})
    kw = {k: c[k] for k in ("n_perturbed", "n_closed", "n_samples", "n_minimizers") if k in c}
    if "eps_range" in c:
        kw["eps_range"] = tuple(c["eps_range"])
    return CorpusSpec(params, seed=int(res.get("seed", 0)), **kw)


# ---------------------------------------------------------------------------
# commands


def _cmd_info(res):
    pr = res["params"]
    _need(pr, "a", "b")
    order = pr.get("order", "first")
    regime = classify_regime(pr["N"], pr["p"], pr["a"], pr["b"], order)
    if regime is Regime.Unsupported:
        raise UnsupportedRegime(f"no {order}-order regime for these parameters")
    P = _params_for(res)
    out = P.to_dict()
    if order == "first":
        out["e0"] = P.e0
    return out, EXIT_OK


def _cmd_deficit(res):
    spec = _quad(res)
    P = _params_for(res)
    u = _input(res, P, spec)
    rep = deficit2(u, P, spec) if res["params"].get("order") == "second" else deficit(u, P, spec)
    return rep.to_dict(), EXIT_OK


def _cmd_project(res):
    spec = _quad(res)
    opts = _search(res, spec)
    P = _params_for(res)
    u = _input(res, P, spec)
    second = res["params"].get("order") == "second"
    mode = res.get("options", {}).get("mode", "Hc" if second else "Lc")
    if second:
        if mode == "Hc":
            r = project_Hc2(u, P, opts)
        elif mode == "aligned":
            r = best_aligned2(u, P, opts)
        else:
            raise ConfigError(f"mode {mode!r} is not available in second order")
    else:
        if mode == "Lc":
            r = project_Lc(u, P, opts)
        elif mode == "aligned":
            r = best_aligned(u, P, opts)
        elif mode in ("H_b", "L_a"):
            r = inf_distance(u, P, mode, opts)
        else:
            raise ConfigError(f"mode {mode!r} is not available in first order")
    return r.to_dict(), EXIT_OK


def _report_code(rep) -> int:
    if rep.violations > 0:
        return EXIT_VIOLATION
    if rep.failures > 0:
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_verify(res):
    spec = _quad(res)
    opts = _search(res, spec)
    o = res.get("options", {})
    if "theorem" not in o:
        raise ConfigError("verify needs --theorem")
    th = Theorem(o["theorem"])
    mesh = bool(o.get("mesh_check", True))
    if th in (Theorem.T1_10, Theorem.T1_11):
        rep = second_order_reports(_corpus(res, _second(res)), spec, opts, mesh)[th.value]
    else:
        P = _first(res)
        if th in (Theorem.T1_3, Theorem.T1_4):
            if weak_theorem_for(P) is not th:
                raise RegimeMismatch(f"{th.value} does not cover regime {P.regime.value}")
            rep = verify_weak_stability(_corpus(res, P), spec, opts, mesh)
        else:
            if th is Theorem.T1_7 and P.p != 2.0:
                raise RegimeMismatch("T1_7 is the p = 2 statement")
            if th is Theorem.T1_8 and P.p == 2.0:
                raise RegimeMismatch("T1_8 is the p > 2 statement")
            rep = strong_stability_reports(_corpus(res, P), spec, opts, mesh)[th.value]
    return rep.to_dict(), _report_code(rep)


def _cmd_sharpness(res):
    spec = _quad(res)
    P = _first(res)
    js = res.get("options", {}).get("j_list", [4, 8, 16, 32])
    r = sharpness_scan(P, js, spec, _search(res, spec))
    return r.to_dict(), EXIT_OK


def _cmd_scaling(res):
    spec = _quad(res)
    P = _first(res)
    u = _input(res, P, spec)
    lams = res.get("options", {}).get("lambdas", [0.25, 0.5, 1.0, 2.0, 4.0])
    r = scaling_blowup(u, P, lams, spec, _search(res, spec))
    return r.to_dict(), EXIT_OK


def _cmd_identity2(res):
    spec = _quad(res)
    P = _second(res)
    u = _input(res, P, spec)
    s = identity2_sides(u, P, spec)
    out = s.to_dict()
    out["relative_residual"] = abs(s.lhs - s.rhs) / max(abs(s.lhs), s.scale, 1e-300)
    return out, EXIT_OK


def _cmd_poincare(res):
    spec = _quad(res)
    pr = res["params"]
    o = res.get("options", {})
    N, p = int(pr["N"]), float(pr["p"])
    corpus = poincare_corpus(int(o.get("n_functions", 20)), N, int(res.get("seed", 0)))
    out = poincare_probe(corpus, N, p, float(o.get("mu", 1.0)), float(o.get("gamma", 1.0)),
                         float(o.get("m", 2.0)), float(o.get("lam_tilde", 1.0)), spec)
    return out, EXIT_OK


_HANDLERS = {"info": _cmd_info, "deficit": _cmd_deficit, "project": _cmd_project,
             "verify": _cmd_verify, "sharpness": _cmd_sharpness, "scaling": _cmd_scaling,
             "identity2": _cmd_identity2, "poincare": _cmd_poincare}


def run(cfg: dict) -> tuple[dict, int]:
    """Execute a validated configuration; returns (report, exit code)."""
    validate_config(cfg)
    res = _resolve(cfg)
    result, code = _HANDLERS[res["command"]](res)
    report = {"tool": "cknstab", "version": __version__, "command": res["command"],
              "config": res, "result": result, "exit_code": code,
              "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds")}
    return report, code


# ---------------------------------------------------------------------------
# output


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, tuples become lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        try:
            obj = obj.item()
        except (TypeError, ValueError):
            pass
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def dumps_report(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


CSV_COLUMNS = {
    "verify": ROW_COLUMNS + ("identity_residual",),
    "sharpness": ("j", "delta", "quotient", "k", "log_lambda"),
    "scaling": ("lambda", "delta", "H_ratio", "L_ratio"),
    "poincare": ("lhs", "prefactor", "gradient_integral", "rhs", "c_opt", "ratio"),
}


def report_csv(report: dict) -> str:
    cmd = report["command"]
    res = _clean(report["result"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if cmd in CSV_COLUMNS:
        cols = CSV_COLUMNS[cmd]
        rows = res.get("rows") if cmd in ("verify", "poincare") else res.get("table")
        w.writerow(cols)
        for row in rows or []:
            w.writerow(["" if row.get(c) is None else row.get(c) for c in cols])
    else:
        w.writerow(("key", "value"))
        for key, val in _flatten(res):
            w.writerow((key, "" if val is None else val))
    return buf.getvalue()


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}{k}.")
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}{i}.")
    else:
        yield prefix.rstrip("."), obj


def write_atomic(path: str, text: str):
    """Write via a temporary file in the target directory, then rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".cknstab-", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cknstab", description="Numerical stability checks for weighted "
                 "interpolation inequalities and their minimizer families.")
    ap.add_argument("--version", action="version", version=f"cknstab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, profile=False):
        g = p.add_argument_group("parameters")
        g.add_argument("--N", type=int)
        g.add_argument("--p", type=float)
        g.add_argument("--a", type=float)
        g.add_argument("--b", type=float)
        g.add_argument("--order", choices=["first", "second"])
        p.add_argument("--config", help="JSON run configuration (flags override its values)")
        p.add_argument("--seed", type=int)
        p.add_argument("--output", "-o", help="report path (default: standard output)")
        p.add_argument("--format", choices=["json", "csv"])
        q = p.add_argument_group("quadrature")
        q.add_argument("--rel-tol", dest="rel_tol", type=float)
        q.add_argument("--abs-tol", dest="abs_tol", type=float)
        q.add_argument("--max-subdivisions", dest="max_subdivisions", type=int)
        if profile:
            p.add_argument("--profile", help='profile spec as JSON, e.g. \'{"kind": "closed_form", '
                           '"name": "gaussian"}\'')
        return p

    common(sub.add_parser("info", help="derived constants and regime"))
    common(sub.add_parser("deficit", help="norms and deficits of one profile"), profile=True)
    pp = common(sub.add_parser("project", help="distance to the minimizer family"), profile=True)
    pp.add_argument("--mode", choices=["Lc", "aligned", "H_b", "L_a", "Hc"])
    pv = common(sub.add_parser("verify", help="stability inequality campaign"))
    pv.add_argument("--theorem", choices=[t.value for t in Theorem])
    pv.add_argument("--n-perturbed", dest="n_perturbed", type=int)
    pv.add_argument("--n-closed", dest="n_closed", type=int)
    pv.add_argument("--n-samples", dest="n_samples", type=int)
    pv.add_argument("--n-minimizers", dest="n_minimizers", type=int)
    pv.add_argument("--no-mesh-check", dest="no_mesh_check", action="store_true")
    ps = common(sub.add_parser("sharpness", help="anisotropic sharpness rates"))
    ps.add_argument("--j", type=int, nargs="+")
    pc = common(sub.add_parser("scaling", help="deficit-preserving dilation rates"), profile=True)
    pc.add_argument("--lambdas", type=float, nargs="+")
    common(sub.add_parser("identity2", help="second-order identity residual"), profile=True)
    pq = common(sub.add_parser("poincare", help="weighted Poincare probe"))
    pq.add_argument("--mu", type=float)
    pq.add_argument("--gamma", type=float)
    pq.add_argument("--m", type=float)
    pq.add_argument("--lam-tilde", dest="lam_tilde", type=float)
    pq.add_argument("--n-functions", dest="n_functions", type=int)
    return ap


def main(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        if ns.command in ("identity2",) and ns.order is None:
            ns.order = "second"
        cfg = _config_from_args(ns)
        report, code = run(cfg)
        out = report["config"]["output"]
        text = report_csv(report) if out["format"] == "csv" else dumps_report(report)
        if out["path"]:
            write_atomic(out["path"], text)
        else:
            sys.stdout.write(text)
        if code == EXIT_VIOLATION:
            print("cknstab: inequality violation detected", file=sys.stderr)
        elif code == EXIT_NUMERICAL:
            print("cknstab: some rows failed numerically", file=sys.stderr)
        return code
    except SystemExit as exc:          # --help / --version
        return int(exc.code or 0)
    except NumericalFailure as exc:
        print(f"cknstab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InvalidInput, InvalidBracket, UnsupportedRegime, RegimeMismatch, ValueError) as exc:
        print(f"cknstab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except CknError as exc:
        print(f"cknstab: error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
