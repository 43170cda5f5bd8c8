"""Run configuration, CSV ingestion and JSON/CSV report emission."""

from __future__ import annotations

import configparser
import csv
import dataclasses
import json
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .bands import EvalGrid, PolicyBand, build_band, normalize_side, uniform_sign_test
from .errors import ConfigError, DataError, SchemaError, SurrogatePolicyError
from .losses import LOSS_KINDS
from .pipeline import FitSettings, fit_policy
from .problems import PROBLEM_KINDS, ObservationTable
from .value import BenchmarkPolicy, benchmark_test, value_ci

SCHEMA_VERSION = "v1"
NULLS = ("all_leq_zero", "all_geq_zero")


@dataclass
class RunConfig:
    """Every knob of a pipeline run; embedded verbatim in each report."""

    problem: str = "welfare"
    loss: str = "logistic"
    k: int = 2
    m: int = 2
    nuisance_k: int = 3
    cv_folds: int = 5
    grid_size: int = 50
    alpha: float = 0.05
    B: int = 1000
    seed: int = 0
    grid: Optional[str] = None
    side: str = "two_sided"
    null: Optional[str] = None
    benchmarks: list = field(default_factory=lambda: ["everyone", "random:p=0.5"])
    utility_b: float = 1.0
    utility_c: float = 0.5
    y_col: str = "y"
    a_col: str = "a"
    x_cols: Optional[list] = None
    normalize_outcome: Optional[bool] = None
    threads: int = 1
    data: Optional[str] = None
    out: Optional[str] = None

    def validate(self) -> "RunConfig":
        if self.problem not in PROBLEM_KINDS:
            raise ConfigError(f"problem must be one of {PROBLEM_KINDS}, got {self.problem!r}")
        if self.loss not in LOSS_KINDS:
            raise ConfigError(f"loss must be one of {LOSS_KINDS}, got {self.loss!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.B < 100:
            raise ConfigError(f"B must be at least 100, got {self.B}")
        if self.threads < 1:
            raise ConfigError("threads must be positive")
        if not 0.0 < self.utility_c < 1.0 or self.utility_b < 0:
            raise ConfigError("utility needs b >= 0 and c in (0, 1)")
        self.side = normalize_side(self.side)
        if self.null is not None:
            if self.null not in NULLS:
                raise ConfigError(f"null must be one of {NULLS}")
            need = "lower" if self.null == "all_leq_zero" else "upper"
            if self.side != need:
                raise ConfigError(f"null {self.null} is tested with a {need} band")
        for b in self.benchmarks:
            BenchmarkPolicy.parse(b)
        self.settings()  # checks k, m and the nuisance options
        return self

    def settings(self) -> FitSettings:
        return FitSettings(problem=self.problem, loss=self.loss, k=self.k, m=self.m,
                           nuisance_k=self.nuisance_k, cv_folds=self.cv_folds,
                           grid_size=self.grid_size, utility_b=self.utility_b,
                           utility_c=self.utility_c)

    @property
    def outcome_normalized(self) -> bool:
        if self.normalize_outcome is None:
            return self.problem == "welfare"
        return bool(self.normalize_outcome)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


# section.key in config files -> RunConfig field
_FILE_KEYS = {
    "run.problem": "problem", "run.loss": "loss", "run.seed": "seed",
    "run.threads": "threads", "seed": "seed",
    "sieve.k": "k", "sieve.folds": "m", "crossfit.m": "m",
    "nuisance.k": "nuisance_k", "nuisance.cv_folds": "cv_folds",
    "nuisance.grid_size": "grid_size",
    "inference.alpha": "alpha", "inference.b": "B", "inference.grid": "grid",
    "inference.side": "side", "inference.null": "null",
    "inference.benchmarks": "benchmarks",
    "utility.b": "utility_b", "utility.c": "utility_c",
    "data.path": "data", "data.y": "y_col", "data.a": "a_col", "data.x": "x_cols",
    "data.normalize_outcome": "normalize_outcome",
    "output.path": "out",
}
_INT = {"k", "m", "nuisance_k", "cv_folds", "grid_size", "B", "seed", "threads"}
_FLOAT = {"alpha", "utility_b", "utility_c"}
_LIST = {"benchmarks", "x_cols"}


def _coerce(name: str, raw: str):
    try:
        if name in _INT:
            return int(raw)
        if name in _FLOAT:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from None
    if name in _LIST:
        return [p.strip() for p in raw.split(",") if p.strip()]
    if name == "normalize_outcome":
        low = raw.strip().lower()
        if low not in ("true", "false", "yes", "no", "1", "0"):
            raise ConfigError(f"normalize_outcome: cannot parse {raw!r}")
        return low in ("true", "yes", "1")
    if name in ("null", "grid") and raw.strip().lower() in ("", "none"):
        return None
    return raw.strip()


def parse_config_text(text: str) -> dict:
    """Parse sectioned ``key = value`` text into RunConfig field values.

    Keys outside any section may be given as ``section.key``.
    """
    parser = configparser.ConfigParser()
    try:
        parser.read_string("[DEFAULT_TOP]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    out = {}
    for section in parser.sections():
        for key, raw in parser.items(section, raw=True):
            full = key if section == "DEFAULT_TOP" else f"{section}.{key}"
            full = full.lower()
            if full not in _FILE_KEYS:
                raise ConfigError(f"unknown config key {full!r}")
            name = _FILE_KEYS[full]
            out[name] = _coerce(name, raw)
    return out


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


# -- ingestion --------------------------------------------------------------

def minmax(values: np.ndarray, name: str) -> tuple[np.ndarray, tuple[float, float]]:
    """Map to ``[0, 1]``; a column that is already in ``[0, 1]`` with min 0 and max 1 is unchanged."""
    lo, hi = float(values.min()), float(values.max())
    if not hi > lo:
        raise SchemaError(f"column {name!r} is constant (zero range); cannot normalize")
    return (values - lo) / (hi - lo), (lo, hi)


def read_csv_columns(path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read data file {path}: {exc}") from exc
    if not rows:
        raise SchemaError(f"{path}: empty file, header expected")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if any(cell.strip() for cell in r)]
    return header, body


def ingest_csv(path, config: RunConfig) -> ObservationTable:
    """Read a CSV file into an :class:`ObservationTable`.

    Covariates are min-max normalized into ``[0, 1]``; so is the outcome
    for the welfare problem (configurable). A treatment column coded
    ``-1/1`` is mapped to ``0/1``. The ``(min, max)`` pairs are stored in
    ``table.normalization``.
    """
    header, body = read_csv_columns(path)
    x_cols = config.x_cols
    needs_a = config.problem == "welfare"
    if x_cols is None:
        skip = {config.y_col, config.a_col}
        x_cols = [h for h in header if h not in skip]
    wanted = [config.y_col] + (([config.a_col]) if needs_a else []) + list(x_cols)
    missing = [c for c in wanted if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {missing}; header is {header}")
    if not x_cols:
        raise SchemaError(f"{path}: no covariate columns")
    index = {h: j for j, h in enumerate(header)}
    cols = {}
    for name in wanted:
        j = index[name]
        vals = np.empty(len(body))
        for i, row in enumerate(body):
            cell = row[j].strip() if j < len(row) else ""
            try:
                vals[i] = float(cell)
            except ValueError:
                raise SchemaError(f"{path}: row {i + 2}, column {name!r}: "
                                  f"non-numeric value {cell!r}") from None
            if not math.isfinite(vals[i]):
                raise SchemaError(f"{path}: row {i + 2}, column {name!r}: non-finite value")
        cols[name] = vals
    norm = {}
    x = np.empty((len(body), len(x_cols)))
    for j, name in enumerate(x_cols):
        x[:, j], norm[name] = minmax(cols[name], name)
    y = cols[config.y_col]
    if config.outcome_normalized:
        y, norm[config.y_col] = minmax(y, config.y_col)
    a = None
    if needs_a:
        a = cols[config.a_col]
        if np.all((a == -1) | (a == 1)):
            a = (a + 1.0) / 2.0
        elif not np.all((a == 0) | (a == 1)):
            raise SchemaError(f"column {config.a_col!r} must be coded 0/1 or -1/1")
    return ObservationTable(y=y, x=x, a=a, normalization=norm)


def denormalize(value: float, bounds: Optional[tuple]) -> float:
    if bounds is None:
        return value
    lo, hi = bounds
    return lo + (hi - lo) * value


def default_grid(d: int, num: int = 201) -> str:
    """First covariate on ``[0.05, 0.95]``, the others fixed at 0.5."""
    return ",".join([f"0.05:0.95:{num}"] + ["0.5"] * (d - 1))


# -- reports ----------------------------------------------------------------

def _clean(obj):
    """Make an object JSON-safe: arrays to lists, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(obj) -> str:
    """JSON with shortest round-trip float formatting."""
    return json.dumps(_clean(obj), indent=1, sort_keys=True, allow_nan=False)


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj) + "\n")


@contextmanager
def stage(name: str):
    """Prefix errors raised inside with the pipeline stage name."""
    try:
        yield
    except SurrogatePolicyError as exc:
        if getattr(exc, "stage", None):
            raise
        new = type(exc)(f"[{name}] {exc}")
        new.stage = name
        raise new from exc


def band_rows(band: PolicyBand, normalization: dict, x_cols) -> list:
    rows = band.to_dict()["points"]
    for row in rows:
        row["x_raw"] = [denormalize(v, normalization.get(c)) for v, c in zip(row["x"], x_cols)]
    return rows


def band_csv(band: PolicyBand, path) -> None:
    """Tidy CSV: one row per grid point and series."""
    d = band.grid.points.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j + 1}" for j in range(d)] + ["series", "value"])
        series = {"g_hat": band.g_hat, "lo": band.lo, "hi": band.hi,
                  "pointwise_lo": band.pointwise_lo, "pointwise_hi": band.pointwise_hi}
        for i, x in enumerate(band.grid.points):
            for name, vals in series.items():
                v = float(vals[i])
                if math.isfinite(v):
                    w.writerow([repr(float(c)) for c in x] + [name, repr(v)])


def run_pipeline(config: RunConfig, table: Optional[ObservationTable] = None,
                 sections=("model", "band", "value", "benchmarks")) -> dict:
    """Ingest, fit, and run the requested inference; return the report dict."""
    config.validate()
    with stage("ingest"):
        if table is None:
            if config.data is None:
                raise ConfigError("no data file given")
            table = ingest_csv(config.data, config)
    x_cols = config.x_cols or [f"x{j + 1}" for j in range(table.d)]
    if config.data is not None and config.x_cols is None:
        header, _ = read_csv_columns(config.data)
        x_cols = [h for h in header if h not in {config.y_col, config.a_col}]
    with stage("fit"):
        fit = fit_policy(table, config.settings(), seed=config.seed,
                         with_sandwich="band" in sections)
    report = {"schema": SCHEMA_VERSION, "config": config.to_dict(),
              "data": {"n": table.n, "d": table.d, "x_cols": list(x_cols),
                       "normalization": table.normalization}}
    if "model" in sections:
        nuis = None
        if fit.nuisance_cross is not None:
            nuis = {"cross": fit.nuisance_cross.to_dict(),
                    "full": None if fit.nuisance_full is None else fit.nuisance_full.to_dict()}
        report["model"] = fit.model.to_dict()
        report["nuisance"] = nuis
        report["folds"] = {"m": fit.folds.m, "sizes": fit.folds.sizes().tolist()}
    if "band" in sections:
        with stage("band"):
            grid = EvalGrid.parse(config.grid or default_grid(table.d), table.d)
            band = build_band(fit.model, fit.full, grid, alpha=config.alpha, B=config.B,
                              seed=config.seed, side=config.side)
            out = band.to_dict()
            out["points"] = band_rows(band, table.normalization, x_cols)
            if config.null is not None:
                out["sign_test"] = uniform_sign_test(band, config.null).to_dict()
            report["band"] = out
            report["_band_object"] = band
    g_rows = fit.g_rows()
    y_bounds = table.normalization.get(config.y_col) if config.outcome_normalized else None
    if "value" in sections:
        with stage("value"):
            rep = value_ci(g_rows, fit.cross, alpha=config.alpha, B=config.B, seed=config.seed)
            val = rep.to_dict()
            val["raw"] = {"v_hat": denormalize(rep.v_hat, y_bounds),
                          "ci": [denormalize(c, y_bounds) for c in rep.ci],
                          "lower_bound": denormalize(rep.lower_bound, y_bounds)}
            report["value"] = val
    if "benchmarks" in sections:
        with stage("benchmarks"):
            scale = 1.0 if y_bounds is None else y_bounds[1] - y_bounds[0]
            tests = []
            for spec in config.benchmarks:
                bench = BenchmarkPolicy.parse(spec, seed=config.seed)
                res = benchmark_test(g_rows, bench.evaluate(table.x), fit.cross,
                                     alpha=config.alpha, B=config.B, seed=config.seed,
                                     label=bench.label)
                rec = res.to_dict()
                rec["diff_raw"] = scale * res.diff
                tests.append(rec)
            report["benchmarks"] = tests
    report["diagnostics"] = {"rate_condition_warning": fit.rate_warning,
                             "n_clamped": fit.model.spec.n_clamped,
                             **{k: v for k, v in fit.model.diagnostics.items()
                                if k != "rate_condition_warning"}}
    return report


def public(report: dict) -> dict:
    """Drop in-memory helper entries before serialization."""
    return {k: v for k, v in report.items() if not k.startswith("_")}
