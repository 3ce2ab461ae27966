"""Command-line interface.

Subcommands: ``fit-dm``, ``calibrate-sector``, ``calibrate-country``, ``price``
and ``validate``. Each writes its output file plus a ``.manifest.json``
sidecar; ``--manifest`` re-runs a recorded command, and the output is
byte-identical.

Exit codes: 0 success, 2 invalid input, 3 calibration did not converge,
4 internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from collections import defaultdict
from dataclasses import replace
from pathlib import Path
from typing import Callable, Sequence


from . import __version__
from .basket import BasketOptions, em_corporate_curve
from .calibration import (
    CALIBRATION_DT,
    CALIBRATION_PATHS,
    SECTOR_TENORS,
    CalibrationTarget,
    calibrate_country,
    calibrate_sector,
    make_spread_oracle,
)
from .curve_fit import fit_sector
from .default_curve import DiscountCurve
from .errors import EmBasketError, NonConvergenceError, SchemaError
from .io import (
    BP,
    CurveRow,
    ParamRow,
    RunManifest,
    RunSettings,
    describe_platform,
    file_digest,
    manifest_path,
    now_utc,
    read_config,
    read_country_quotes,
    read_parametric,
    read_params,
    read_quotes,
    write_curves,
    write_parametric,
    write_params,
    write_residuals,
)
from .process import DEFAULT_DT, PathConfig, ProcessParams
from .ratings import BROAD, RatingGrade, RatingSchemes
from .validate import VALIDATION_PATHS, run_validation

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NONCONVERGENCE = 3
EXIT_INTERNAL = 4

DEFAULT_TENORS = (0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0)
PRICING_PATHS = 100_000

log = logging.getLogger("embasket")


# --------------------------------------------------------------------------
# helpers


def _schemes(settings: RunSettings) -> RatingSchemes:
    base = RatingSchemes()
    return base.with_overrides(lambdas=settings.lambdas or None, lstar_c=settings.lstar_c or None)


def _cfg(settings: RunSettings, horizon: float, paths: int, dt: float) -> PathConfig:
    n = settings.n_paths if settings.n_paths is not None else paths
    step = settings.dt if settings.dt is not None else dt
    # snap the horizon to the step grid so that PathConfig accepts it
    steps = math.ceil(horizon / step - 1e-9)
    return PathConfig(horizon=steps * step, dt=step, n_paths=n, seed=settings.seed)


def _tenors(text: str | Sequence[float]) -> tuple[float, ...]:
    if isinstance(text, str):
        try:
            vals = tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())
        except ValueError:
            raise SchemaError(f"tenors must be numbers, got {text!r}") from None
    else:
        vals = tuple(float(t) for t in text)
    if not vals or any(not t > 0 for t in vals) or list(vals) != sorted(set(vals)):
        raise SchemaError("tenors must be positive and strictly increasing")
    return vals


def _grades(text: str | None) -> list[str] | None:
    if not text:
        return None
    return [str(RatingGrade.parse(g)) for g in text.split(",") if g.strip()]


# --------------------------------------------------------------------------
# commands; each takes JSON-able arguments and returns {role: output path}


def cmd_fit_dm(args: dict, settings: RunSettings, workers: int = 1) -> dict[str, str]:
    rows = read_quotes(args["quotes"])
    by_sector: dict[str, list] = defaultdict(list)
    for r in rows:
        by_sector[r.sector].append(r)
    curves = {}
    residuals = []
    for sector in sorted(by_sector):
        quotes = [r.to_quote() for r in by_sector[sector]]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fit = fit_sector(quotes)
        for d in fit.diagnostics:
            log.warning("%s: %s", sector, d)
        curves[sector] = fit.curve
        for q, e in zip(fit.quotes, fit.residuals):
            residuals.append((sector, q.name, str(q.grade), q.tenor, q.spread * BP,
                              float(fit.curve.spread(q.grade, q.tenor)) * BP, float(e)))
    write_parametric(args["out"], curves)
    out = {"out": args["out"]}
    if args.get("residuals"):
        write_residuals(args["residuals"], residuals)
        out["residuals"] = args["residuals"]
    return out


def cmd_calibrate_sector(args: dict, settings: RunSettings, workers: int = 1) -> dict[str, str]:
    curves = read_parametric(args["curves"])
    sectors = [args["sector"]] if args.get("sector") else sorted(curves)
    schemes = _schemes(settings)
    wanted = _grades(args.get("grades"))
    cfg = _cfg(settings, max(SECTOR_TENORS), CALIBRATION_PATHS, CALIBRATION_DT)
    disc = DiscountCurve(settings.discount_rate)
    rows = []
    for sector in sectors:
        if sector not in curves:
            raise SchemaError(f"sector {sector!r} not in {args['curves']}")
        curve = curves[sector]
        grades = wanted or [b for b in BROAD if b in curve.params]
        targets, oracles = {}, {}
        for g in grades:
            lam = schemes.lam(g)
            spreads = [float(curve.spread(g, t)) for t in SECTOR_TENORS]
            targets[g] = CalibrationTarget.sector(spreads, lam, f"{sector} {g}")
            oracles[g] = make_spread_oracle(lam, SECTOR_TENORS, cfg, disc=disc, recovery=settings.recovery,
                                            workers=workers)
        res = calibrate_sector(targets, oracles, shared_xi=not args.get("free_xi", False))
        if res.binding:
            log.warning("%s: a common jump size costs fit quality (worst error %.3g)", sector, res.objective)
        for g in grades:
            r = res.results[g]
            rows.append(ParamRow(sector, g, r.sigma, r.xi, r.lam))
    write_params(args["out"], rows)
    return {"out": args["out"]}


def cmd_calibrate_country(args: dict, settings: RunSettings, workers: int = 1) -> dict[str, str]:
    quotes = read_country_quotes(args["quotes"])
    grouped: dict[str, list] = defaultdict(list)
    for q in quotes:
        grouped[q.country].append(q)
    names = [args["country"]] if args.get("country") else sorted(grouped)
    schemes = _schemes(settings)
    disc = DiscountCurve(settings.discount_rate)
    rows = []
    for name in names:
        if name not in grouped:
            raise SchemaError(f"country {name!r} not in {args['quotes']}")
        qs = sorted(grouped[name], key=lambda q: q.tenor_years)
        grades = {q.grade for q in qs}
        if len(grades) != 1:
            raise SchemaError(f"country {name} has more than one grade: {', '.join(sorted(grades))}")
        tenors = tuple(q.tenor_years for q in qs)
        if len(set(tenors)) != len(tenors):
            raise SchemaError(f"country {name} has duplicate tenors")
        grade = qs[0].grade
        cfg = _cfg(settings, max(tenors), CALIBRATION_PATHS, CALIBRATION_DT)
        oracle = make_spread_oracle(schemes.lam(grade), tenors, cfg, disc=disc, recovery=settings.recovery,
                                    workers=workers)
        r = calibrate_country(tenors, [q.spread_bp / BP for q in qs], grade, schemes, oracle, label=name)
        rows.append(ParamRow(name, grade, r.sigma, r.xi, r.lam))
    write_params(args["out"], rows)
    return {"out": args["out"]}


def cmd_price(args: dict, settings: RunSettings, workers: int = 1) -> dict[str, str]:
    rows = read_params(args["params"])
    country = args["country"]
    crow = [r for r in rows if r.label == country]
    if len(crow) != 1:
        raise SchemaError(f"expected exactly one parameter row labelled {country!r}, found {len(crow)}")
    crow = crow[0]
    labels = sorted({r.label for r in rows if r.label != country})
    sector = args.get("sector")
    if sector is None:
        if len(labels) != 1:
            raise SchemaError(f"choose a sector with --sector (have {', '.join(labels) or 'none'})")
        sector = labels[0]
    srows = [r for r in rows if r.label == sector]
    if not srows:
        raise SchemaError(f"no parameter rows labelled {sector!r}")
    sector_params = {}
    for r in srows:
        if r.grade in sector_params:
            raise SchemaError(f"duplicate rating {r.grade} for {sector}")
        sector_params[r.grade] = ProcessParams(r.sigma, r.lam, r.xi)
    tenors = _tenors(args.get("tenors") or DEFAULT_TENORS)
    schemes = _schemes(settings)
    cfg = _cfg(settings, max(tenors), PRICING_PATHS, DEFAULT_DT)
    options = BasketOptions(lstar_a=settings.lstar_a, extension1=settings.extension1,
                            extension1_grades=settings.extension1_grades,
                            quasi_sovereign=settings.quasi_sovereign,
                            lstar_c=1.0 if args.get("ftd") else None)
    cs = em_corporate_curve(ProcessParams(crow.sigma, crow.lam, crow.xi), sector_params, schemes,
                            rho=settings.rho, cfg=cfg, tenors=tenors, grades=_grades(args.get("grades")),
                            options=options, disc=DiscountCurve(settings.discount_rate),
                            recovery=settings.recovery, country_grade=crow.grade, workers=workers)
    out = []
    for g in cs.grades:
        for cid in ("em", "standalone", "ftd"):
            for t, s, e in zip(cs.tenors, cs.spreads(cid, g), cs.stderr(cid, g)):
                out.append(CurveRow(cid, g, float(t), float(s) * BP, float(e) * BP))
    for t, s, e in zip(cs.tenors, cs.spreads("country", crow.grade), cs.stderr("country", crow.grade)):
        out.append(CurveRow("country", crow.grade, float(t), float(s) * BP, float(e) * BP))
    write_curves(args["out"], out)
    return {"out": args["out"]}


def cmd_validate(args: dict, settings: RunSettings, workers: int = 1) -> dict[str, str]:
    n = settings.n_paths if settings.n_paths is not None else VALIDATION_PATHS
    dt = settings.dt if settings.dt is not None else DEFAULT_DT
    report = run_validation(n, dt, settings.seed, workers=workers,
                            inject_drift=float(args.get("inject_drift") or 0.0))
    text = json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n"
    if args.get("out"):
        Path(args["out"]).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    for c in report.checks:
        log.info("%-28s %s", c.name, c.status.upper())
    return {"out": args["out"]} if args.get("out") else {}


COMMANDS: dict[str, tuple[Callable, tuple[str, ...]]] = {
    # name: (function, argument keys naming input files)
    "fit-dm": (cmd_fit_dm, ("quotes",)),
    "calibrate-sector": (cmd_calibrate_sector, ("curves",)),
    "calibrate-country": (cmd_calibrate_country, ("quotes",)),
    "price": (cmd_price, ("params",)),
    "validate": (cmd_validate, ()),
}


# --------------------------------------------------------------------------
# manifests


def run_command(command: str, args: dict, settings: RunSettings, workers: int = 1,
                write_manifest: bool = True) -> RunManifest:
    """Run ``command`` and record a manifest next to its main output."""
    fn, input_keys = COMMANDS[command]
    args = dict(args)
    for k in input_keys:
        args[k] = str(Path(args[k]).resolve())
    inputs = {k: {"path": args[k], "sha256": file_digest(args[k])} for k in input_keys}
    started = now_utc()
    outputs = fn(args, settings, workers)
    manifest = RunManifest(command=command, settings=settings, arguments=args, inputs=inputs,
                           outputs={k: file_digest(v) for k, v in outputs.items()}, started=started,
                           finished=now_utc(), platform=describe_platform())
    if write_manifest and "out" in outputs:
        manifest_path(outputs["out"]).write_text(manifest.to_json(), encoding="utf-8")
    return manifest


def replay(manifest_file: str | Path, out: str | None = None, workers: int = 1) -> RunManifest:
    """Re-run a recorded command; outputs go to ``out`` or the recorded paths."""
    try:
        text = Path(manifest_file).read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read manifest {manifest_file}: {exc}") from exc
    m = RunManifest.from_json(text)
    if m.command not in COMMANDS:
        raise SchemaError(f"manifest names unknown command {m.command!r}")
    m.check_inputs()
    args = dict(m.arguments)
    if out is not None:
        args["out"] = out
        if "residuals" in args and args["residuals"]:
            args["residuals"] = str(Path(out).with_name(Path(out).stem + ".residuals.csv"))
    return run_command(m.command, args, m.settings, workers)


# --------------------------------------------------------------------------
# argument parsing


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value settings file")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--paths", type=int, help="number of Monte Carlo paths")
    common.add_argument("--workers", type=int, default=1, help="threads (output does not depend on it)")
    common.add_argument("--manifest", help="re-run the command recorded in this manifest")
    common.add_argument("--out", help="output file")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="embasket", description="EM corporate credit curves from a "
                                "two-barrier structural model.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("fit-dm", parents=[common], help="fit parametric sector curves to DM quotes")
    s.add_argument("quotes", nargs="?", help="quotes CSV")
    s.add_argument("--residuals", help="write per-quote residuals here")

    s = sub.add_parser("calibrate-sector", parents=[common], help="calibrate sector (sigma, xi) per rating")
    s.add_argument("curves", nargs="?", help="parametric curves CSV from fit-dm")
    s.add_argument("--sector", help="only this sector")
    s.add_argument("--grades", help="comma-separated ratings (default: every fitted broad rating)")
    s.add_argument("--free-xi", action="store_true", help="separate xi per rating")

    s = sub.add_parser("calibrate-country", parents=[common], help="calibrate country (sigma, xi)")
    s.add_argument("quotes", nargs="?", help="country spreads CSV")
    s.add_argument("--country", help="only this country")

    s = sub.add_parser("price", parents=[common], help="price EM corporate curves")
    s.add_argument("params", nargs="?", help="parameters CSV (sector and country rows)")
    s.add_argument("--country", help="label of the country row")
    s.add_argument("--sector", help="label of the sector rows (needed when several are present)")
    s.add_argument("--tenors", help="comma-separated tenors in years")
    s.add_argument("--grades", help="comma-separated ratings (default: every rating with parameters)")
    s.add_argument("--ftd", action="store_true", help="plain first-to-default in place of the EM basket")

    s = sub.add_parser("validate", parents=[common], help="run the simulation self-checks")
    s.add_argument("--inject-drift", type=float, default=0.0, help=argparse.SUPPRESS)
    return p


_ARG_KEYS = {
    "fit-dm": ("quotes", "out", "residuals"),
    "calibrate-sector": ("curves", "out", "sector", "grades", "free_xi"),
    "calibrate-country": ("quotes", "out", "country"),
    "price": ("params", "out", "country", "sector", "tenors", "grades", "ftd"),
    "validate": ("out", "inject_drift"),
}


def _settings(ns: argparse.Namespace) -> RunSettings:
    s = read_config(ns.config) if ns.config else RunSettings()
    if ns.seed is not None:
        s = replace(s, seed=ns.seed)
    if ns.paths is not None:
        if ns.paths < 1:
            raise SchemaError("--paths must be at least 1")
        s = replace(s, n_paths=ns.paths)
    return s


def main(argv: Sequence[str] | None = None) -> int:
    ns = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose or ns.command == "validate" else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        if ns.workers < 1:
            raise SchemaError("--workers must be at least 1")
        if ns.manifest:
            if ns.config or ns.seed is not None or ns.paths is not None:
                raise SchemaError("--manifest fixes the settings; drop --config, --seed and --paths")
            m = RunManifest.from_json(Path(ns.manifest).read_text(encoding="utf-8"))
            if m.command != ns.command:
                raise SchemaError(f"manifest records {m.command!r}, not {ns.command!r}")
            replay(ns.manifest, ns.out, ns.workers)
            return EXIT_OK
        args = {k: getattr(ns, k) for k in _ARG_KEYS[ns.command]}
        _, input_keys = COMMANDS[ns.command]
        for k in input_keys:
            if not args.get(k):
                raise SchemaError(f"missing input file ({k})")
        if ns.command != "validate" and not args.get("out"):
            raise SchemaError("--out is required")
        if ns.command == "price" and not args.get("country"):
            raise SchemaError("--country is required")
        run_command(ns.command, args, _settings(ns), ns.workers)
        return EXIT_OK
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (EmBasketError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # pragma: no cover - last resort
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
