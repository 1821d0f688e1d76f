"""``macfb`` command line: exponent bounds, capacity-region samples, confirmation
error curves, drift-lab checks, scheme simulation and the reference examples.

Exit codes: 0 success, 1 a check failed, 2 usage error, 3 bad input.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
import sys
import warnings

import numpy as np

from . import __version__
from .bounds import d_lb, exponent_report
from .channel import bsc, build_additive_mod_m, build_product, kl, validate_channel
from .driftlab import TinyCode, corpus, run_checks
from .errors import ConfigInfeasible, InputError, MacfbError
from .hypotest import ConfirmationDesign, _hybrid_rows, error_curve, exponent_slope
from .infotheory import region_boundary
from .parallel import ENV_THREADS
from .reference import EXAMPLES, example_checks
from .vlcsim import SchemeConfig, gamma_grid, run_scheme, sweep_gamma

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INPUT = 0, 1, 2, 3
SIG_DIGITS = 12


class CliInputError(Exception):
    pass


# ----------------------------------------------------------------- output


def round_sig(obj):
    """Plain JSON-ready data with floats cut to 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k) if not isinstance(k, str) else k: round_sig(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_sig(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return round_sig(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return x
        return float(f"{x:.{SIG_DIGITS}g}")
    return obj


def emit_json(obj) -> str:
    return json.dumps(round_sig(obj), indent=2, sort_keys=False)


def emit_csv(rows: list[dict], manifest: dict | None = None) -> str:
    buf = io.StringIO()
    if manifest:
        for k, v in manifest.items():
            buf.write(f"# {k}: {json.dumps(round_sig(v), sort_keys=True)}\n")
    if rows:
        names = list(dict.fromkeys(k for row in rows for k in row))
        w = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _csv_cell(v) for k, v in row.items()})
    return buf.getvalue()


def _csv_cell(v):
    v = round_sig(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v)
    return v


def _flatten(d: dict, prefix: str = "") -> list[dict]:
    rows = []
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            rows.extend(_flatten(v, key + "."))
        else:
            rows.append({"key": key, "value": v})
    return rows


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = (_dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc) if epoch
            else _dt.datetime.now(_dt.timezone.utc))
    return when.replace(microsecond=0).isoformat()


def make_manifest(args, digests: dict) -> dict:
    params = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
    return {"subcommand": args.command, "parameters": params, "inputs": digests,
            "seed": getattr(args, "seed", None), "version": __version__,
            "threads_cap": os.environ.get(ENV_THREADS), "timestamp": _timestamp()}


def write(args, digests: dict, result, rows: list[dict] | None = None):
    manifest = make_manifest(args, digests)
    if args.out == "csv":
        if rows is None:
            rows = _flatten(result) if isinstance(result, dict) else [{"value": result}]
        sys.stdout.write(emit_csv(rows, manifest))
    else:
        sys.stdout.write(emit_json({"manifest": manifest, "result": result}) + "\n")


# ----------------------------------------------------------------- input


def _read_json(path: str, digests: dict):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise CliInputError(f"{path}: {exc.strerror}") from exc
    digests[path] = hashlib.sha256(data).hexdigest()
    try:
        return json.loads(data.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise CliInputError(f"{path}: not UTF-8 text") from exc
    except json.JSONDecodeError as exc:
        raise CliInputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def _shorthand_args(text: str) -> list[tuple[str, float]]:
    out = []
    for item in text.split(","):
        key, sep, val = item.partition("=")
        if not sep:
            raise CliInputError(f"expected key=value in channel shorthand, got {item!r}")
        try:
            out.append((key.strip(), float(val)))
        except ValueError as exc:
            raise CliInputError(f"bad number {val!r} in channel shorthand") from exc
    return out


def parse_channel(spec: str, digests: dict, renormalize: bool = False):
    """A JSON channel file, ``additive:m=3,p=0.1`` or ``product:bsc=0.1,bsc=0.2``."""
    kind, sep, rest = spec.partition(":")
    if sep and kind == "additive":
        kv = dict(_shorthand_args(rest))
        if set(kv) != {"m", "p"}:
            raise CliInputError("additive shorthand needs m and p")
        return build_additive_mod_m(int(kv["m"]), kv["p"])
    if sep and kind == "product":
        parts = _shorthand_args(rest)
        if len(parts) != 2 or any(k != "bsc" for k, _ in parts):
            raise CliInputError("product shorthand needs exactly two bsc=p components")
        return build_product(bsc(parts[0][1]), bsc(parts[1][1]))
    obj = _read_json(spec, digests)
    if not isinstance(obj, dict) or "Q" not in obj:
        raise CliInputError(f"{spec}: expected an object with x1_size, x2_size, y_size and Q")
    try:
        return validate_channel(obj["Q"], obj.get("x1_size"), obj.get("x2_size"), obj.get("y_size"),
                                renormalize=renormalize)
    except InputError as exc:
        raise CliInputError(f"{spec}: {exc}") from exc


def _int_range(text: str) -> list[int]:
    try:
        a, b, step = (int(v) for v in text.split(":"))
    except ValueError as exc:
        raise CliInputError(f"expected a:b:step, got {text!r}") from exc
    if step <= 0 or b < a:
        raise CliInputError("n-sweep needs a <= b and step > 0")
    return list(range(a, b + 1, step))


# ----------------------------------------------------------------- commands


def cmd_bounds(args, digests):
    ch = parse_channel(args.channel, digests, args.renormalize)
    rep = exponent_report(ch, (args.r1, args.r2), args.grid, args.gamma_step, args.lam_step)
    write(args, digests, rep.to_dict())
    return EXIT_OK


def cmd_region(args, digests):
    ch = parse_channel(args.channel, digests, args.renormalize)
    rows = []
    for theta in np.linspace(0, math.pi / 2, args.points):
        s = region_boundary(ch, float(theta), args.grid, args.lam_step)
        rows.append({"theta": s.theta, "radius": s.radius, "r1": s.r1, "r2": s.r2})
    if args.out == "csv":
        sys.stdout.write(emit_csv(rows, make_manifest(args, digests)))
    else:
        write(args, digests, rows)
    return EXIT_OK


def cmd_dlb(args, digests):
    ch = parse_channel(args.channel, digests, args.renormalize)
    value, pz = d_lb(ch)
    write(args, digests, {"value": value, "pz": pz.ravel().tolist(), "pz_shape": list(pz.shape)})
    return EXIT_OK


def _design(args, digests) -> ConfirmationDesign:
    obj = _read_json(args.design, digests)
    try:
        return ConfirmationDesign.from_dict(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliInputError(f"{args.design}: malformed design ({exc})") from exc


def cmd_confirm(args, digests):
    ch = parse_channel(args.channel, digests, args.renormalize)
    design = _design(args, digests)
    ns = _int_range(args.n_sweep)
    if args.mc and args.seed is None:
        raise UsageError("--seed is required with --mc")
    total = design.n2 + design.n3
    rate = args.lam_rate if args.lam_rate is not None else design.lam / total
    curve = error_curve(ch, design, ns, lambda n: rate * n, exact=not args.mc,
                        trials=args.trials, seed=args.seed or 0)
    rows = [{"n": n, "alpha": a, "beta": b} for n, a, b in curve.points]
    try:
        slope = exponent_slope(curve)
    except MacfbError:
        slope = None
    prediction = None
    if design.n2 > 0:
        r0, r1 = _hybrid_rows(ch, design)
        prediction = kl(r0, r1)
    extra = {"slope": slope, "kl_prediction": prediction, "lam_per_symbol": rate}
    if args.out == "csv":
        sys.stdout.write(emit_csv(rows, {**make_manifest(args, digests), **extra}))
    else:
        write(args, digests, {"curve": rows, **extra})
    return EXIT_OK


def _load_codes(args, ch, digests):
    spec = args.codes
    if spec.startswith("random:"):
        try:
            _, k, seed = spec.split(":")
            k, seed = int(k), int(seed)
        except ValueError as exc:
            raise CliInputError(f"expected random:K:seed, got {spec!r}") from exc
        if args.m1 is None or args.m2 is None or args.horizon is None:
            raise UsageError("random codes need --m1, --m2 and --horizon")
        rng = np.random.default_rng(seed)
        return [TinyCode.random(ch, args.m1, args.m2, args.horizon, rng) for _ in range(k)]
    obj = _read_json(spec, digests)
    items = obj["codes"] if isinstance(obj, dict) and "codes" in obj else [obj]
    out = []
    for item in items:
        try:
            out.append(TinyCode(int(item["m1"]), int(item["m2"]), int(item["horizon"]), ch.y_size,
                                np.asarray(item["enc1"], dtype=np.int64),
                                np.asarray(item["enc2"], dtype=np.int64)))
        except (KeyError, TypeError, ValueError) as exc:
            raise CliInputError(f"{spec}: malformed code ({exc})") from exc
    return out


def cmd_drift(args, digests):
    if args.channel == "corpus":
        if args.seed is None:
            raise UsageError("--seed is required for the random corpus")
        pairs = list(corpus(args.count, args.seed))
    else:
        ch = parse_channel(args.channel, digests, args.renormalize)
        pairs = [(ch, code) for code in _load_codes(args, ch, digests)]
    summary: dict = {}
    for ch, code in pairs:
        for name, rep in run_checks(ch, code, args.eps).items():
            s = summary.setdefault(name, {"passed": 0, "failed": 0, "checked": 0, "worst_margin": None})
            s["passed" if rep.passed else "failed"] += 1
            s["checked"] += rep.checked
            if rep.checked and not math.isinf(rep.worst_margin):
                w = s["worst_margin"]
                s["worst_margin"] = rep.worst_margin if w is None else min(w, rep.worst_margin)
            if name == "pruned_submartingale":
                s.setdefault("mu", []).append(rep.info.get("mu"))
    if "pruned_submartingale" in summary:
        summary["pruned_submartingale"]["mu_min"] = min(summary["pruned_submartingale"].pop("mu"))
    ok = all(s["failed"] == 0 for s in summary.values())
    result = {"pairs": len(pairs), "eps": args.eps, "all_passed": ok, "checks": summary}
    if args.out == "csv":
        rows = [{"check": k, **{kk: vv for kk, vv in v.items()}} for k, v in summary.items()]
        sys.stdout.write(emit_csv(rows, make_manifest(args, digests)))
    else:
        write(args, digests, result)
    return EXIT_OK if ok else EXIT_FAIL


def _config(args, digests) -> SchemeConfig:
    obj = _read_json(args.config, digests)
    try:
        return SchemeConfig.from_dict(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliInputError(f"{args.config}: malformed config ({exc})") from exc


def cmd_simulate(args, digests):
    ch = parse_channel(args.channel, digests, args.renormalize)
    cfg = _config(args, digests)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConfigInfeasible)
        res = run_scheme(ch, cfg, args.trials, args.seed)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    write(args, digests, res.to_dict())
    return EXIT_OK


def cmd_sweep(args, digests):
    ch = parse_channel(args.channel, digests, args.renormalize)
    cfg = _config(args, digests)
    rows = sweep_gamma(ch, cfg, gamma_grid(args.gamma_step), args.trials, args.seed)
    if args.out == "json":
        write(args, digests, rows)
    else:
        sys.stdout.write(emit_csv(rows, make_manifest(args, digests)))
    return EXIT_OK


def cmd_example(args, digests):
    checks = example_checks(args.name)
    ok = all(c.passed for c in checks)
    if args.out == "json":
        write(args, digests, {"example": args.name, "passed": ok, "checks": [c.to_dict() for c in checks]})
    elif args.out == "csv":
        sys.stdout.write(emit_csv([c.to_dict() for c in checks], make_manifest(args, digests)))
    else:
        width = max(len(c.name) for c in checks)
        print(f"{'check':<{width}}  {'expected':>14}  {'computed':>14}  {'tol':>8}  result")
        for c in checks:
            exp = c.expected if isinstance(c.expected, str) else f"{c.expected:.8g}"
            print(f"{c.name:<{width}}  {exp:>14}  {c.computed:>14.8g}  {c.tol:>8.2g}  "
                  f"{'PASS' if c.passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


# ----------------------------------------------------------------- parser


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="macfb", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"macfb {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_, out="json", channel=True):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--out", choices=("json", "csv") if out != "table" else ("table", "json", "csv"),
                        default=out)
        if channel:
            sp.add_argument("--channel", required=True,
                            help="JSON file, additive:m=M,p=P or product:bsc=P1,bsc=P2")
            sp.add_argument("--renormalize", action="store_true", help="rescale rows to sum to 1")
        sp.set_defaults(func=func)
        return sp

    sp = add("bounds", cmd_bounds, "all exponent bounds at one rate pair")
    sp.add_argument("--r1", type=float, required=True)
    sp.add_argument("--r2", type=float, required=True)
    sp.add_argument("--grid", type=int, default=None, help="simplex grid resolution")
    sp.add_argument("--gamma-step", type=float, default=0.02)
    sp.add_argument("--lam-step", type=float, default=0.05)

    sp = add("region", cmd_region, "capacity-region boundary samples", out="csv")
    sp.add_argument("--points", type=int, default=19)
    sp.add_argument("--grid", type=int, default=None)
    sp.add_argument("--lam-step", type=float, default=0.05)

    add("dlb", cmd_dlb, "max-min confirmation divergence and its pz")

    sp = add("confirm", cmd_confirm, "confirmation error curve", out="csv")
    sp.add_argument("--design", required=True)
    sp.add_argument("--n-sweep", required=True, help="a:b:step total lengths")
    mode = sp.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true", default=True)
    mode.add_argument("--mc", action="store_true")
    sp.add_argument("--trials", type=int, default=100000)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--lam-rate", type=float, default=None, help="threshold per symbol (lam = rate * n)")

    sp = add("drift", cmd_drift, "drift-lab checks on tiny codes", channel=False)
    sp.add_argument("--channel", required=True, help="channel spec, or 'corpus' for random channels")
    sp.add_argument("--renormalize", action="store_true")
    sp.add_argument("--codes", default="random:10:0", help="random:K:seed or a JSON file")
    sp.add_argument("--m1", type=int)
    sp.add_argument("--m2", type=int)
    sp.add_argument("--horizon", type=int)
    sp.add_argument("--eps", type=float, default=0.3)
    sp.add_argument("--count", type=int, default=100, help="corpus size with --channel corpus")
    sp.add_argument("--seed", type=int, default=None)

    for name, func, help_, out in (("simulate", cmd_simulate, "Monte-Carlo run of a scheme", "json"),
                                   ("sweep", cmd_sweep, "scheme runs over a gamma grid", "csv")):
        sp = add(name, func, help_, out=out)
        sp.add_argument("--config", required=True)
        sp.add_argument("--trials", type=int, required=True)
        sp.add_argument("--seed", type=int, required=True)
        if name == "sweep":
            sp.add_argument("--gamma-step", type=float, default=0.2)

    sp = add("example", cmd_example, "reference checks with known answers", out="table", channel=False)
    sp.add_argument("name", choices=EXAMPLES)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    digests: dict = {}
    try:
        return args.func(args, digests)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"macfb: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CliInputError, InputError) as exc:
        print(f"macfb: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except MacfbError as exc:
        print(f"macfb: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
