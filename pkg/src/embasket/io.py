"""File formats: CSV inputs and outputs, key=value run configuration, run manifests.

Spreads are basis points in files and decimals everywhere else. Floats are
written with ``repr`` so that a write-then-read round trip is exact and
re-runs produce byte-identical files.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .curve_fit import ParametricSpreadCurve, Quote
from .errors import DomainError, RatingRangeError, SchemaError
from .ratings import BROAD, RatingGrade

QUOTE_COLUMNS = ("name", "sector", "country", "grade", "tenor_years", "spread_bp")
COUNTRY_COLUMNS = ("country", "grade", "tenor_years", "spread_bp")
PARAM_COLUMNS = ("label", "grade", "sigma", "xi", "lambda")
CURVE_COLUMNS = ("curve_id", "grade", "tenor_years", "spread_bp", "stderr_bp")
PARAMETRIC_COLUMNS = ("sector", "broad", "a", "b", "theta")
RESIDUAL_COLUMNS = ("sector", "name", "grade", "tenor_years", "spread_bp", "model_bp", "rel_error")

BP = 1e4


def fmt(x: float) -> str:
    return repr(float(x))


# --------------------------------------------------------------------------
# rows


@dataclass(frozen=True)
class QuoteRow:
    name: str
    sector: str
    country: str
    grade: str
    tenor_years: float
    spread_bp: float

    def to_quote(self) -> Quote:
        return Quote(self.tenor_years, self.spread_bp / BP, RatingGrade.parse(self.grade), name=self.name)


@dataclass(frozen=True)
class CountryRow:
    country: str
    grade: str
    tenor_years: float
    spread_bp: float


@dataclass(frozen=True)
class ParamRow:
    label: str
    grade: str
    sigma: float
    xi: float
    lam: float


@dataclass(frozen=True)
class CurveRow:
    curve_id: str
    grade: str
    tenor_years: float
    spread_bp: float
    stderr_bp: float


# --------------------------------------------------------------------------
# readers


def _read_rows(path: str | Path, columns: Sequence[str]):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise SchemaError(f"{path}: empty file, expected header {','.join(columns)}")
    reader = csv.reader(lines)
    header = [h.strip() for h in next(reader)]
    if header != list(columns):
        raise SchemaError(f"{path}: header {','.join(header)} does not match {','.join(columns)}", row=1)
    rows = []
    for line_no, raw in enumerate(reader, start=2):
        if not raw or all(not c.strip() for c in raw):
            continue
        if len(raw) != len(columns):
            raise SchemaError(f"{path}: expected {len(columns)} fields, got {len(raw)}", row=line_no)
        rows.append((line_no, dict(zip(columns, (c.strip() for c in raw)))))
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def _number(value: str, column: str, line: int, *, positive: bool = False, allow_inf: bool = False) -> float:
    try:
        x = float(value)
    except ValueError:
        raise SchemaError(f"{column} is not a number: {value!r}", row=line) from None
    if math.isnan(x) or (math.isinf(x) and not allow_inf):
        raise SchemaError(f"{column} must be finite, got {value!r}", row=line)
    if positive and not x > 0:
        raise SchemaError(f"{column} must be positive, got {value!r}", row=line)
    return x


def _grade(value: str, line: int, broad_only: bool = False) -> str:
    try:
        g = RatingGrade.parse(value)
    except RatingRangeError as exc:
        raise SchemaError(str(exc), row=line) from None
    if broad_only and not g.is_broad:
        raise SchemaError(f"expected a broad rating ({', '.join(BROAD)}), got {value!r}", row=line)
    return str(g)


def _text(value: str, column: str, line: int) -> str:
    if not value:
        raise SchemaError(f"{column} must not be empty", row=line)
    return value


def read_quotes(path: str | Path) -> list[QuoteRow]:
    out = []
    for line, r in _read_rows(path, QUOTE_COLUMNS):
        tenor = _number(r["tenor_years"], "tenor_years", line, positive=True)
        spread = _number(r["spread_bp"], "spread_bp", line, positive=True)
        row = QuoteRow(r["name"], _text(r["sector"], "sector", line), r["country"],
                       _grade(r["grade"], line), tenor, spread)
        try:
            row.to_quote()
        except DomainError as exc:
            raise SchemaError(str(exc), row=line) from None
        out.append(row)
    return out


def read_country_quotes(path: str | Path) -> list[CountryRow]:
    out = []
    for line, r in _read_rows(path, COUNTRY_COLUMNS):
        out.append(CountryRow(_text(r["country"], "country", line), _grade(r["grade"], line),
                              _number(r["tenor_years"], "tenor_years", line, positive=True),
                              _number(r["spread_bp"], "spread_bp", line, positive=True)))
    return out


def read_params(path: str | Path) -> list[ParamRow]:
    out = []
    for line, r in _read_rows(path, PARAM_COLUMNS):
        out.append(ParamRow(_text(r["label"], "label", line), _grade(r["grade"], line),
                            _number(r["sigma"], "sigma", line, positive=True),
                            _number(r["xi"], "xi", line, positive=True),
                            _number(r["lambda"], "lambda", line)))
        if out[-1].lam < 0:
            raise SchemaError("lambda must be non-negative", row=line)
    return out


def read_curves(path: str | Path) -> list[CurveRow]:
    out = []
    for line, r in _read_rows(path, CURVE_COLUMNS):
        grade = _grade(r["grade"], line) if r["grade"] else ""
        out.append(CurveRow(_text(r["curve_id"], "curve_id", line), grade,
                            _number(r["tenor_years"], "tenor_years", line, positive=True),
                            _number(r["spread_bp"], "spread_bp", line),
                            _number(r["stderr_bp"], "stderr_bp", line)))
    return out


def read_parametric(path: str | Path) -> dict[str, ParametricSpreadCurve]:
    by_sector: dict[str, dict[str, tuple[float, float]]] = {}
    thetas: dict[str, float] = {}
    for line, r in _read_rows(path, PARAMETRIC_COLUMNS):
        sector = _text(r["sector"], "sector", line)
        broad = _grade(r["broad"], line, broad_only=True)
        theta = _number(r["theta"], "theta", line, positive=True)
        if sector in thetas and thetas[sector] != theta:
            raise SchemaError(f"sector {sector} has more than one theta", row=line)
        thetas[sector] = theta
        if broad in by_sector.setdefault(sector, {}):
            raise SchemaError(f"duplicate {broad} row for sector {sector}", row=line)
        by_sector[sector][broad] = (_number(r["a"], "a", line), _number(r["b"], "b", line))
    return {s: ParametricSpreadCurve(p, thetas[s]) for s, p in by_sector.items()}


# --------------------------------------------------------------------------
# writers


def _write(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow(r)


def write_quotes(path, rows: Iterable[QuoteRow]) -> None:
    _write(path, QUOTE_COLUMNS, ((r.name, r.sector, r.country, r.grade, fmt(r.tenor_years), fmt(r.spread_bp))
                                 for r in rows))


def write_country_quotes(path, rows: Iterable[CountryRow]) -> None:
    _write(path, COUNTRY_COLUMNS, ((r.country, r.grade, fmt(r.tenor_years), fmt(r.spread_bp)) for r in rows))


def write_params(path, rows: Iterable[ParamRow]) -> None:
    _write(path, PARAM_COLUMNS, ((r.label, r.grade, fmt(r.sigma), fmt(r.xi), fmt(r.lam)) for r in rows))


def write_curves(path, rows: Iterable[CurveRow]) -> None:
    _write(path, CURVE_COLUMNS, ((r.curve_id, r.grade, fmt(r.tenor_years), fmt(r.spread_bp), fmt(r.stderr_bp))
                                 for r in rows))


def write_parametric(path, curves: dict[str, ParametricSpreadCurve]) -> None:
    rows = []
    for sector, c in curves.items():
        for b in BROAD:
            if b in c.params:
                a, bb = c.params[b]
                rows.append((sector, b, fmt(a), fmt(bb), fmt(c.theta)))
    _write(path, PARAMETRIC_COLUMNS, rows)


def write_residuals(path, rows: Iterable[Sequence]) -> None:
    _write(path, RESIDUAL_COLUMNS, ((s, n, g, fmt(t), fmt(q), fmt(m), fmt(e)) for s, n, g, t, q, m, e in rows))


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunSettings:
    """Everything besides input files that determines a run's output.

    ``n_paths`` and ``dt`` left as ``None`` take the command's own default
    (calibration runs use a smaller, coarser simulation than pricing).
    """

    seed: int = 0
    n_paths: int | None = None
    dt: float | None = None
    rho: float = 0.8
    recovery: float = 0.4
    discount_rate: float = 0.02
    lstar_a: float = 1.0
    lstar_c: dict[str, float] = field(default_factory=dict)
    lambdas: dict[str, float] = field(default_factory=dict)
    extension1: bool = False
    extension1_grades: tuple[str, ...] = ("BB", "B")
    quasi_sovereign: bool = False

    def to_json(self) -> dict:
        d = asdict(self)
        d["extension1_grades"] = list(self.extension1_grades)
        d["lstar_c"] = {k: _json_float(v) for k, v in sorted(self.lstar_c.items())}
        d["lambdas"] = dict(sorted(self.lambdas.items()))
        return d

    @classmethod
    def from_json(cls, d: dict) -> RunSettings:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise SchemaError(f"unknown settings in manifest: {', '.join(sorted(unknown))}")
        d = dict(d)
        d["extension1_grades"] = tuple(d.get("extension1_grades", ("BB", "B")))
        d["lstar_c"] = {k: float(v) for k, v in d.get("lstar_c", {}).items()}
        d["lambdas"] = {k: float(v) for k, v in d.get("lambdas", {}).items()}
        return cls(**d)


def _json_float(x: float):
    return "inf" if math.isinf(x) else x


def _bool(value: str, key: str, line: int) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise SchemaError(f"{key} must be a boolean, got {value!r}", row=line)


def parse_config(text: str, base: RunSettings | None = None) -> RunSettings:
    """Parse a flat ``key=value`` file (``#`` comments) on top of ``base``."""
    s = base or RunSettings()
    changes: dict = {}
    lstar_c = dict(s.lstar_c)
    lambdas = dict(s.lambdas)
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SchemaError(f"expected key=value, got {raw.strip()!r}", row=line_no)
        key, value = (p.strip() for p in line.split("=", 1))
        if key == "seed":
            try:
                changes["seed"] = int(value, 0)
            except ValueError:
                raise SchemaError(f"seed must be an integer, got {value!r}", row=line_no) from None
        elif key == "n_paths":
            n = _number(value, key, line_no, positive=True)
            if n != int(n):
                raise SchemaError("n_paths must be an integer", row=line_no)
            changes["n_paths"] = int(n)
        elif key in ("dt", "discount_rate", "rho", "recovery", "lstar_a"):
            changes[key] = _number(value, key, line_no, positive=key in ("dt", "lstar_a"))
        elif key.startswith("lstar_c."):
            lstar_c[_grade(key.split(".", 1)[1], line_no, broad_only=True)] = _number(
                value, key, line_no, positive=True, allow_inf=True)
        elif key.startswith("lambda."):
            lambdas[_grade(key.split(".", 1)[1], line_no, broad_only=True)] = _number(value, key, line_no)
        elif key in ("extension1", "quasi_sovereign"):
            changes[key] = _bool(value, key, line_no)
        elif key == "extension1_grades":
            grades = tuple(_grade(g, line_no) for g in value.replace(";", ",").split(",") if g.strip())
            changes[key] = grades
        else:
            raise SchemaError(f"unknown configuration key {key!r}", row=line_no)
    out = replace(s, lstar_c=lstar_c, lambdas=lambdas, **changes)
    if not -1 <= out.rho <= 1:
        raise SchemaError(f"rho must lie in [-1, 1], got {out.rho}")
    if not 0 <= out.recovery < 1:
        raise SchemaError(f"recovery must lie in [0, 1), got {out.recovery}")
    return out


def read_config(path: str | Path, base: RunSettings | None = None) -> RunSettings:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, base)


# --------------------------------------------------------------------------
# manifests


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    """Sidecar describing how an output was produced.

    ``arguments`` holds the command-specific options; together with
    ``settings`` and the input files (checked against ``inputs`` digests) they
    reproduce the outputs byte for byte.
    """

    command: str
    settings: RunSettings
    arguments: dict
    inputs: dict[str, dict[str, str]]
    outputs: dict[str, str]
    version: str = __version__
    started: str = ""
    finished: str = ""
    platform: str = ""

    def to_json(self) -> str:
        d = {
            "tool": "embasket",
            "version": self.version,
            "command": self.command,
            "settings": self.settings.to_json(),
            "arguments": self.arguments,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "started": self.started,
            "finished": self.finished,
            "platform": self.platform,
        }
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> RunManifest:
        try:
            d = json.loads(text)
            return cls(command=d["command"], settings=RunSettings.from_json(d["settings"]),
                       arguments=d.get("arguments", {}), inputs=d.get("inputs", {}),
                       outputs=d.get("outputs", {}), version=d.get("version", ""),
                       started=d.get("started", ""), finished=d.get("finished", ""),
                       platform=d.get("platform", ""))
        except (ValueError, KeyError, TypeError) as exc:
            raise SchemaError(f"malformed manifest: {exc}") from None

    def check_inputs(self) -> None:
        """Fail when an input file no longer matches its recorded digest."""
        for role, info in self.inputs.items():
            path = Path(info["path"])
            if not path.exists():
                raise SchemaError(f"manifest input {role} missing: {path}")
            if file_digest(path) != info["sha256"]:
                raise SchemaError(f"manifest input {role} changed since the recorded run: {path}")


def now_utc() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def describe_platform() -> str:
    return f"python {platform.python_version()} on {platform.system()} {platform.machine()}"


def manifest_path(output: str | Path) -> Path:
    output = Path(output)
    return output.with_name(output.name + ".manifest.json")
