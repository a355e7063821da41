"""Command-line front end.

Every command prints one payload on stdout: JSON ``{"config": ..., "result":
...}`` or CSV preceded by a ``# config: {...}`` comment line.  Warnings and
log messages go to stderr; the level comes from ``STEINER_LOG_LEVEL``
(``error``, ``warn``, ``info`` or ``debug``).

Exit codes: 0 on success, 2 on invalid input, 3 when a numerical method does
not converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import evalzero, gaussmc, growth, volseq
from .errors import InvalidInputError, NonConvergenceError
from .volseq import BoxSpec, VolumeSequence

log = logging.getLogger("steiner")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
FAMILIES = ("spiral", "bridge", "box", "user")


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from exc


def _window(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(t) for t in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected LO,HI: {text!r}") from exc
    return lo, hi


def _complex(text: str) -> complex:
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from exc


def read_user_sequence(path: str | os.PathLike) -> VolumeSequence:
    """Load a user sequence from JSON or CSV.

    Accepted layouts: a JSON list of ``V_k``; ``{"values": [...]}``; the
    interchange form with ``logV``; or a CSV with columns ``k`` and ``V_k``.
    """
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise InvalidInputError(f"cannot read {p}: {exc}") from exc
    if p.suffix.lower() == ".csv":
        rows = [r for r in csv.DictReader(line for line in io.StringIO(text)
                                          if not line.startswith("#"))]
        try:
            pairs = sorted((int(r["k"]), float(r["V_k"])) for r in rows)
        except (KeyError, ValueError) as exc:
            raise InvalidInputError(f"CSV needs numeric columns k and V_k: {exc}") from exc
        if [k for k, _ in pairs] != list(range(len(pairs))):
            raise InvalidInputError("CSV rows must cover k = 0, 1, ..., n without gaps")
        return volseq.user_volume_sequence([v for _, v in pairs])
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{p} is not valid JSON: {exc}") from exc
    if isinstance(data, list):
        return volseq.user_volume_sequence(data)
    if isinstance(data, dict) and "values" in data:
        return volseq.user_volume_sequence(data["values"])
    if isinstance(data, dict) and "logV" in data:
        return VolumeSequence.from_json_dict(data)
    raise InvalidInputError("JSON must be a list, {'values': [...]} or {'logV': [...]}")


def box_spec(args) -> BoxSpec:
    if args.sides is not None:
        return BoxSpec.explicit(args.sides)
    if args.rule is None:
        raise InvalidInputError("box family needs --sides or --rule")
    if args.rule == "log_squared":
        return BoxSpec.log_squared(j_cut=args.j_cut, tail=args.tail)
    if args.param is None:
        raise InvalidInputError(f"rule {args.rule} needs --param")
    ctor = BoxSpec.power_law if args.rule == "power_law" else BoxSpec.exponential
    return ctor(args.param, j_cut=args.j_cut, tail=args.tail)


def build_sequence(args, k_max: int) -> VolumeSequence:
    fam = args.family
    if fam == "spiral":
        return volseq.spiral_volume_sequence(k_max)
    if fam == "bridge":
        return volseq.bridge_volume_sequence(k_max)
    if fam == "box":
        spec = box_spec(args)
        if spec.sides is not None:
            if getattr(args, "kmax", None) is None:
                k_max = min(k_max, len(spec.sides))
        return volseq.box_volume_sequence(spec, k_max)
    if fam == "user":
        if args.file is None:
            raise InvalidInputError("user family needs --file")
        return read_user_sequence(args.file)
    raise InvalidInputError(f"unknown family {fam!r}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_volumes(args):
    v = build_sequence(args, args.kmax if args.kmax is not None else 100)
    if args.format == "csv":
        return v.to_csv(with_mk=True)
    d = v.to_json_dict()
    d["m_k"] = [float(x) for x in volseq.mk_sequence(v)]
    d["ulc"] = volseq.validate_ulc(v).to_json_dict()
    d["chevet"] = volseq.validate_chevet(v).to_json_dict()
    return d


def cmd_analyze(args):
    v = build_sequence(args, args.kmax if args.kmax is not None else 2000)
    rep = growth.analyze(v, window=args.window, rho_for_type=args.rho)
    out = rep.to_json_dict()
    gv = rep.diagnostics.get("gao_vitale")
    out["gao_vitale"] = gv["verdict"] if gv else "n/a"
    return out


def cmd_counterexample(args):
    args.family, args.rule, args.param, args.sides = "box", "power_law", 1.25, None
    out = cmd_analyze(args)
    gv = out["diagnostics"].get("gao_vitale", {})
    return {"gao_vitale": out["gao_vitale"], "decay_exponent": gv.get("exponent"),
            "sqrt_scaled_increasing": gv.get("sqrt_scaled_increasing"),
            "mk_decrease_factor": gv.get("decrease_factor"), "gv_window": gv.get("window"),
            "report": out}


def _closed_form(args, z: np.ndarray):
    if args.family == "spiral":
        return np.atleast_1d(evalzero.spiral_closed_form(z))
    if args.family == "bridge":
        return np.atleast_1d(evalzero.bridge_closed_form(z))
    if args.family == "box":
        spec = box_spec(args)
        return np.array([evalzero.eval_box_product(spec, zz).value for zz in z])
    return None


def cmd_eval(args):
    zs = np.array(args.z or [0.5], dtype=complex)
    degree = args.degree if args.degree is not None else 300
    v = build_sequence(args, degree)
    f = evalzero.build_function(v, min(degree, v.k_max))
    sv = evalzero.eval_series(f, zs)
    ref = _closed_form(args, zs)
    rows = []
    for i, z in enumerate(zs):
        row = {"re_z": z.real, "im_z": z.imag, "re_f": sv.value[i].real, "im_f": sv.value[i].imag,
               "tail_bound": float(sv.tail_bound[i]), "degree_too_low": bool(sv.degree_too_low[i])}
        if ref is not None:
            row["closed_form_rel_delta"] = float(abs(sv.value[i] - ref[i]) / abs(ref[i]))
        rows.append(row)
    if args.format == "csv":
        return _rows_csv(rows)
    return {"degree": f.degree, "points": rows}


def cmd_zeros(args):
    degree = args.degree if args.degree is not None else 60
    v = build_sequence(args, degree)
    f = evalzero.build_function(v, min(degree, v.k_max))
    zs = evalzero.find_zeros(f)
    rows = zs.to_json_list()
    if args.format == "csv":
        return _rows_csv(rows)
    out = {"degree": f.degree, "reliable_radius": zs.reliable_radius, "zeros": rows}
    try:
        est = evalzero.convergence_exponent(zs, window=args.window)
        out["convergence_exponent"] = {"exponent": est.exponent, "stderr": est.stderr,
                                       "window": list(est.window)}
    except InvalidInputError as exc:
        out["convergence_exponent"] = f"not estimated: {exc}"
    return out


def cmd_mc(args):
    if args.sides is None:
        raise InvalidInputError("mc needs --sides")
    sides = np.array(args.sides)
    common = dict(n=args.samples, seed=args.seed, workers=args.workers)
    if args.method == "tube":
        lam = 1.0 if args.lam is None else args.lam
        est = gaussmc.tube_volume_mc(sides, lam, **common)
        v = volseq.box_volume_sequence(BoxSpec.explicit(sides[sides > 0]), int(np.sum(sides > 0)))
        exact = gaussmc.steiner_polynomial_value(v, sides.size, lam)
    elif args.method == "wills":
        est = gaussmc.wills_mc(sides, proposal_scale=args.proposal_scale, **common)
        exact = float(np.prod(1 + sides))
    else:
        lam = 0.5 if args.lam is None else args.lam
        est = gaussmc.tsirelson_mc(sides, lam, **common)
        exact = float(np.prod(1 + sides * lam))
    out = est.to_json_dict()
    out["exact"] = exact
    out["z_score"] = (est.value - exact) / est.stderr if est.stderr > 0 else 0.0
    return out


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": _clean(x.real), "im": _clean(x.imag)}
    return x


def _rows_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for k, v in r.items()})
    return buf.getvalue()


def config_echo(args) -> dict:
    skip = {"func", "out"}
    return _clean({k: v for k, v in sorted(vars(args).items()) if k not in skip})


def render(args, result) -> str:
    cfg = config_echo(args)
    if isinstance(result, str):
        return "# config: " + json.dumps(cfg, sort_keys=True) + "\n" + result
    if args.format == "csv":
        return "# config: " + json.dumps(cfg, sort_keys=True) + "\n" + _rows_csv(
            [{"key": k, "value": json.dumps(v, sort_keys=True)} for k, v in _clean(result).items()])
    return json.dumps({"config": cfg, "result": _clean(result)}, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _add_family(p, default="spiral"):
    p.add_argument("--family", choices=FAMILIES, default=default)
    p.add_argument("--sides", type=_float_list, help="explicit box sides, comma separated")
    p.add_argument("--rule", choices=volseq.RULES)
    p.add_argument("--param", type=float, help="alpha for power_law, c for exponential")
    p.add_argument("--j-cut", type=int, dest="j_cut")
    p.add_argument("--tail", choices=("analytic", "drop"), default="analytic")
    p.add_argument("--file", help="user sequence (JSON or CSV)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steiner", description=(
        "Intrinsic volumes, growth analysis and Gaussian checks for Steiner functions."))
    parser.add_argument("--format", choices=("json", "csv"), default=None)
    parser.add_argument("--out", help="write the payload here instead of stdout")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("volumes", help="intrinsic volume table")
    _add_family(p)
    p.add_argument("--kmax", type=int)
    p.set_defaults(func=cmd_volumes, default_format="csv")

    for name, func in (("analyze", cmd_analyze), ("counterexample", cmd_counterexample)):
        p = sub.add_parser(name, help="order, type, m_k decay and GC verdict")
        _add_family(p, "box" if name == "counterexample" else "spiral")
        p.add_argument("--kmax", type=int)
        p.add_argument("--window", type=_window)
        p.add_argument("--rho", type=float, help="plug-in order for the type estimate")
        p.set_defaults(func=func, default_format="json")

    p = sub.add_parser("eval", help="evaluate the truncated Steiner function")
    _add_family(p)
    p.add_argument("--z", type=_complex, action="append", help="evaluation point (repeatable)")
    p.add_argument("--degree", type=int)
    p.set_defaults(func=cmd_eval, default_format="json")

    p = sub.add_parser("zeros", help="zeros of a truncation and their convergence exponent")
    _add_family(p)
    p.add_argument("--degree", type=int)
    p.add_argument("--window", type=_window)
    p.set_defaults(func=cmd_zeros, default_format="json")

    p = sub.add_parser("mc", help="Monte Carlo checks on a finite box")
    p.add_argument("method", choices=gaussmc.METHODS)
    p.add_argument("--sides", type=_float_list, required=True)
    p.add_argument("--lambda", type=float, dest="lam")
    p.add_argument("--samples", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--proposal-scale", type=float, dest="proposal_scale")
    p.set_defaults(func=cmd_mc, default_format="json")

    for sp in sub.choices.values():
        sp.add_argument("--format", choices=("json", "csv"), default=argparse.SUPPRESS)
        sp.add_argument("--out", default=argparse.SUPPRESS)
    return parser


def _setup_logging():
    level = LOG_LEVELS.get(os.environ.get("STEINER_LOG_LEVEL", "warn").lower(), logging.WARNING)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger()
    root.addHandler(handler)
    root.setLevel(level)
    logging.captureWarnings(True)
    return handler


def main(argv=None) -> int:
    root = logging.getLogger()
    saved = root.level
    handler = _setup_logging()
    try:
        return _run(argv)
    finally:
        root.removeHandler(handler)
        root.setLevel(saved)
        logging.captureWarnings(False)


def _run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.format is None:
        args.format = args.default_format
    del args.default_format
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            payload = render(args, args.func(args))
    except InvalidInputError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except NonConvergenceError as exc:
        log.error("no convergence: %s", exc)
        return EXIT_NUMERIC
    if args.out:
        Path(args.out).write_text(payload)
    else:
        sys.stdout.write(payload)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
