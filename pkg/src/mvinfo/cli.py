"""Command-line entry point: ``python -m mvinfo <subcommand> ...``.

Exit status: 0 success, 2 invalid input, 3 parameters outside a bound's
regime, 1 anything else. All randomness comes from ``--seed``.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import finite_info as fi
from .bounds import BoundParams, evaluate
from .common_info import gk_common_information, multiview_common_information
from .errors import RegimeError, ValidationError
from .estimators import _PROFILE_FIELDS, InfoProfile
from .experiments.configs import apply_overrides, config_keys, default_config, load_config
from .multiview import LossEnvelope

MEASURES = ("entropy", "renyi", "conditional_entropy", "mutual_information",
            "conditional_mutual_information", "kl", "total_correlation")

ENVELOPE_UNITS = {"r_x": "loss units", "r_xy": "loss units", "rs_x": "loss units", "rs_xy": "loss units"}
PARAM_UNITS = {"n": "samples", "m": "views", "d": "coordinates", "gamma": "> 0", "delta": "probability",
               "lam": "in (0, 1)", "beta": "per unit loss", "xi": "> 0", "sigma_u": "loss units",
               "sup_loss_rms": "loss units", "empirical_risk": "loss units"}


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _axes(text: str | None) -> list[str] | None:
    if text is None:
        return None
    return [a.strip() for a in text.split(",") if a.strip()]


def _study_epilog() -> str:
    rows = config_keys()
    w = max(len(k) for k, _, _ in rows)
    lines = ["config keys (override with key=value; values parse as JSON):"]
    lines += [f"  {k.ljust(w)}  {u:<20} default {d}" for k, d, u in rows]
    return "\n".join(lines)


def _bound_epilog() -> str:
    lines = ["input file keys: {\"profile\": {...}, \"envelope\": {...}, \"params\": {...}}",
             "override with section.key=value, e.g. params.beta=0.3", "profile (nats unless noted):"]
    lines += [f"  profile.{k:<18} {'count' if k == 'y_card' else 'nats'}" for k in _PROFILE_FIELDS]
    lines.append("envelope:")
    lines += [f"  envelope.{k:<17} {u}" for k, u in ENVELOPE_UNITS.items()]
    lines.append("params:")
    lines += [f"  params.{k:<19} {u}" for k, u in PARAM_UNITS.items()]
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mvinfo", description="Multi-view information measures and bounds.")
    sub = p.add_subparsers(dest="command", required=True)
    raw = argparse.RawDescriptionHelpFormatter

    s = sub.add_parser("info", help="information measures of a distribution file (nats)", formatter_class=raw,
                       epilog="keys: --axes/--with/--given are comma-separated axis names; "
                              "--alpha is dimensionless; results are in nats")
    s.add_argument("distribution", help="distribution JSON file")
    s.add_argument("--measure", action="append", choices=MEASURES, help="repeatable; default entropy")
    s.add_argument("--axes", help="target axes (default: all)")
    s.add_argument("--with", dest="with_axes", help="second axis group for (conditional) mutual information")
    s.add_argument("--given", help="conditioning axes")
    s.add_argument("--alpha", type=float, help="Renyi order (dimensionless)")
    s.add_argument("--other", help="second distribution file for kl")
    s.add_argument("--partition", help="blocks for total_correlation, e.g. 'A,B|C' (default: singletons)")
    s.add_argument("--renormalize", action="store_true", help="renormalize probabilities that miss 1")
    s.add_argument("--json", action="store_true", help="print a JSON object instead of aligned lines")

    s = sub.add_parser("gk", help="Gacs-Korner common information of a view distribution", formatter_class=raw,
                       epilog="keys: --views comma-separated axis names; value in nats")
    s.add_argument("distribution")
    s.add_argument("--views", help="view axes (default: all)")
    s.add_argument("--multiview", action="store_true", help="maximize I(X^(j); C) over agreeing functions")
    s.add_argument("--budget", type=int, default=100_000, help="labelings searched before fallback (count)")

    s = sub.add_parser("bound", help="evaluate a generalization bound", formatter_class=raw,
                       epilog=_bound_epilog())
    s.add_argument("--theorem", type=int, required=True, choices=(1, 2, 3, 4, 5, 6, 7))
    s.add_argument("--input", required=True, help="JSON with profile, envelope and params")
    s.add_argument("overrides", nargs="*", help="section.key=value")
    s.add_argument("--output", help="also write the breakdown JSON here")

    for name, default, what in (("validate", "validation", "bound coverage study"),
                                ("correlate", "correlation", "gap/metric correlation study"),
                                ("scale", "scaling", "scaling-rate study")):
        s = sub.add_parser(name, help=what, formatter_class=raw, epilog=_study_epilog())
        s.add_argument("--config", help=f"config JSON (default: shipped '{default}')")
        s.add_argument("overrides", nargs="*", help="key=value config overrides")
        s.add_argument("--out", help="output directory (default: config output_dir)")
        s.add_argument("--seed", type=int, default=None,
                       help="master seed (64-bit); defaults to the config seed, 0 in every shipped config")
        if name != "correlate":
            s.add_argument("--workers", type=int, default=1, help="worker processes (count)")
        s.set_defaults(default_config=default)
    return p


def _info(args) -> int:
    dist = fi.load_distribution(args.distribution, renormalize=args.renormalize)
    axes = _axes(args.axes) or [a.name for a in dist.axes]
    out = {}
    for meas in args.measure or ["entropy"]:
        if meas == "entropy":
            out[meas] = fi.entropy(dist, axes)
        elif meas == "renyi":
            if args.alpha is None:
                raise ValidationError("renyi needs --alpha")
            out[meas] = fi.renyi_entropy(dist, axes, args.alpha)
        elif meas == "conditional_entropy":
            out[meas] = fi.conditional_entropy(dist, axes, _axes(args.given) or [])
        elif meas in ("mutual_information", "conditional_mutual_information"):
            other = _axes(args.with_axes)
            if not other:
                raise ValidationError(f"{meas} needs --with")
            if meas == "mutual_information":
                out[meas] = fi.mutual_information(dist, axes, other)
            else:
                out[meas] = fi.conditional_mutual_information(dist, axes, other, _axes(args.given) or [])
        elif meas == "kl":
            if not args.other:
                raise ValidationError("kl needs --other")
            out[meas] = fi.kl_divergence(dist, fi.load_distribution(args.other, renormalize=args.renormalize))
        else:
            blocks = ([_axes(b) for b in args.partition.split("|")] if args.partition
                      else [[a.name] for a in dist.axes])
            out[meas] = fi.total_correlation(dist, blocks)
    if args.json:
        print(json.dumps({"units": "nats", **out}, sort_keys=True))
    else:
        w = max(len(k) for k in out)
        for k, v in out.items():
            print(f"{k.ljust(w)}  {_fmt(v)}")
    return 0


def _gk(args) -> int:
    dist = fi.load_distribution(args.distribution)
    views = _axes(args.views)
    if args.multiview:
        lab = multiview_common_information(dist, views, budget=args.budget)
    else:
        lab = gk_common_information(dist, views)
    print(json.dumps(lab.to_json(), sort_keys=True))
    print(f"value  {_fmt(lab.value)}")
    return 0


def _set_path(doc: dict, key: str, raw: str) -> None:
    parts = key.split(".")
    if len(parts) != 2 or parts[0] not in ("profile", "envelope", "params"):
        raise ValidationError(f"bound override {key!r} must be profile.X, envelope.X or params.X")
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        raise ValidationError(f"bound override {key!r} needs a JSON value, got {raw!r}") from None
    doc.setdefault(parts[0], {})[parts[1]] = val


def _bound(args) -> int:
    try:
        doc = json.loads(Path(args.input).read_text())
    except json.JSONDecodeError as e:
        raise ValidationError(f"bound input {args.input} is not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ValidationError("bound input must be a JSON object")
    for item in args.overrides:
        if "=" not in item:
            raise ValidationError(f"override {item!r} must look like key=value")
        _set_path(doc, *item.split("=", 1))
    unknown = set(doc) - {"profile", "envelope", "params", "theorem"}
    if unknown:
        raise ValidationError(f"unknown bound input key(s) {sorted(unknown)}")
    profile = InfoProfile.from_json(doc.get("profile", {}))
    try:
        env = LossEnvelope(**doc.get("envelope", {}))
        params = BoundParams(**doc.get("params", {}))
    except TypeError as e:
        raise ValidationError(f"bad envelope or params field: {e}") from None
    bd = evaluate(args.theorem, profile, env, params)
    text = json.dumps(bd.to_json(), sort_keys=True)
    if args.output:
        Path(args.output).write_text(text + "\n")
    print(text)
    print(bd.table())
    return 0


def _study(args) -> int:
    from .experiments import studies

    cfg = load_config(args.config) if args.config else default_config(args.default_config)
    cfg = apply_overrides(cfg, args.overrides)
    if args.seed is not None:
        cfg = apply_overrides(cfg, [f"seed={int(args.seed)}"])
    out = args.out or cfg.output_dir
    workers = getattr(args, "workers", 1)
    if args.command == "validate":
        report = studies.run_bound_validation(cfg, workers=workers)
        line = f"min coverage  {_fmt(report.summary['min_coverage'])}"
    elif args.command == "correlate":
        report = studies.run_correlation_study(cfg)
        line = f"directional pass rate  {_fmt(report.summary['directional_pass_rate'])}"
    else:
        report = studies.run_scaling_study(cfg, workers=workers)
        fs = report.summary["frozen_slopes"]
        line = "  ".join(f"{k} {_fmt(v['slope'])}" for k, v in fs.items())
    paths = report.write(out, cfg.name)
    for k, p in paths.items():
        print(f"{k}  {p}")
    print(line)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"info": _info, "gk": _gk, "bound": _bound}
    try:
        return handlers.get(args.command, _study)(args)
    except RegimeError as e:
        print(f"regime error: {e}", file=sys.stderr)
        return 3
    except (ValidationError, json.JSONDecodeError, FileNotFoundError, IsADirectoryError) as e:
        print(f"invalid input: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - the exit status contract covers every other failure
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
