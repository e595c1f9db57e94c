"""Configuration-driven experiments and report bundles.

A bundle directory holds ``curves.csv``, ``fisher.csv``, ``campaign.csv``,
``histograms.csv``, ``summary.json`` and, unless disabled, PNG figures under
``figures/``. Everything is a deterministic function of the configuration.
"""
from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError, QMetroError, ValidationError
from .estimation import (
    DEFAULT_GRID_POINTS,
    LikelihoodTable,
    bayes_campaign,
    ml_campaign,
    rescaled_limits,
)
from .interferometer import NoiseModel, fisher_terms, probability_model
from .io import load_density_matrix
from .qfi import classify_depth, optimize_axes, qfi, witness_value
from .states import KETS, QuantumState, as_density, coerce_axes, collective_generator, state_factory

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

CURVES_HEADER = ["theta", "mu", "p", "dp"]
FISHER_HEADER = ["theta", "f", "flag"]
CAMPAIGN_HEADER = [
    "theta0", "m", "reps", "ml_std", "ml_bias", "ml_dres",
    "bayes_mean_c", "bayes_c_std", "bayes_dres",
    # columns after this point are additions to the core schema
    "bayes_c_sem", "crlb_dres", "ml_failures", "bayes_failures", "bayes_clipped",
]
HISTOGRAM_HEADER = ["method", "theta0", "m", "bin_lo", "bin_hi", "count"]

_PHASE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*\*?\s*(pi)?\s*(?:/\s*(\d+\.?\d*))?\s*$")


def parse_phase(value) -> float:
    """Parse a phase in radians: ``0.628``, ``"0.2pi"``, ``"pi/4"``, ``"0.5*pi"``."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    match = _PHASE.match(str(value))
    if not match or (match.group(1) is None and match.group(2) is None):
        raise ConfigError(f"cannot parse phase {value!r}")
    coeff = float(match.group(1)) if match.group(1) else 1.0
    if match.group(2):
        coeff *= np.pi
    if match.group(3):
        coeff /= float(match.group(3))
    return coeff


def parse_state_spec(spec) -> QuantumState:
    """``dicke:N:k``, ``ghz:N`` or ``product:N:ket`` (ket in H, V, +, -, R, L), or an equivalent dict."""
    if isinstance(spec, dict):
        kind = spec.get("kind")
        parts = [kind, spec.get("n"), spec.get("k", spec.get("ket"))]
        parts = [str(p) for p in parts if p is not None]
    else:
        parts = str(spec).split(":")
    kind = parts[0] if parts else ""
    try:
        if kind == "dicke" and len(parts) in (2, 3):
            n = int(parts[1])
            k = int(parts[2]) if len(parts) == 3 else n // 2
            return state_factory("dicke", n, k=k).density()
        if kind == "ghz" and len(parts) == 2:
            return state_factory("ghz", int(parts[1])).density()
        if kind == "product" and len(parts) in (2, 3):
            ket = parts[2] if len(parts) == 3 else "+"
            if ket not in KETS:
                raise ConfigError(f"unknown single-qubit ket {ket!r}")
            return state_factory("product", int(parts[1]), ket=ket).density()
    except ValueError as exc:
        raise ConfigError(f"invalid state spec {spec!r}: {exc}") from None
    raise ConfigError(f"unknown state spec {spec!r}; use dicke:N:k, ghz:N or product:N:ket")


def parse_axes(spec, n_qubits: int):
    """``"y"``, ``"x,y,y,z"``, or a list of labels / 3-vectors."""
    if isinstance(spec, str):
        labels = [s for s in spec.replace(" ", "").split(",") if s]
        spec = labels[0] if len(labels) == 1 else labels
    try:
        return coerce_axes(spec, n_qubits)
    except QMetroError as exc:
        raise ConfigError(str(exc)) from None


@dataclass
class ExperimentConfig:
    """Everything one report bundle depends on. All fields have defaults."""

    state: Any = "dicke:4:2"
    state_file: str | None = None
    label: str | None = None
    axes: Any = "y"
    noise: dict = field(default_factory=lambda: {"misalignment": 0.0, "white_noise": 0.0, "visibility": 1.0})
    theta0: list = field(default_factory=lambda: ["0.1pi", "0.2pi", "0.3pi"])
    m: list = field(default_factory=lambda: [10, 100])
    repetitions: int = 500
    base_seed: int = 0
    interval: list = field(default_factory=lambda: [0.0, "0.5pi"])
    grid_points: int = DEFAULT_GRID_POINTS
    curve_points: int = 101
    histogram_bins: int = 60
    restarts: int = 16
    output_dir: str = "report"
    figures: bool = True

    @classmethod
    def from_dict(cls, obj: dict, base_dir=None) -> ExperimentConfig:
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        cfg = cls(**obj)
        if base_dir is not None and cfg.state_file and not Path(cfg.state_file).is_absolute():
            cfg.state_file = str(Path(base_dir) / cfg.state_file)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        path = Path(path)
        try:
            obj = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(obj, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_dict(obj, base_dir=path.parent)

    def validate(self):
        """Resolve every field once so that errors surface before any computation."""
        self.resolve()

    def resolve(self) -> dict:
        if self.state_file is not None:
            if not Path(self.state_file).exists():
                raise ConfigError(f"state_file {self.state_file!r} does not exist")
            rho = None  # loaded lazily; file parse errors are reported by run_experiment
            n = None
        else:
            rho = parse_state_spec(self.state)
            n = rho.n_qubits
        thetas = [parse_phase(t) for t in _as_list(self.theta0)]
        lo, hi = (parse_phase(v) for v in self.interval)
        if not lo < hi:
            raise ConfigError(f"empty estimation interval {self.interval!r}")
        for t in thetas:
            if not lo <= t <= hi:
                raise ConfigError(f"theta0 {t} lies outside the interval [{lo}, {hi}]")
        ms = [int(v) for v in _as_list(self.m)]
        if any(v < 1 for v in ms):
            raise ConfigError("m values must be positive")
        if int(self.repetitions) < 2:
            raise ConfigError("repetitions must be at least 2")
        if int(self.grid_points) < 3 or int(self.curve_points) < 2 or int(self.histogram_bins) < 1:
            raise ConfigError("grid_points >= 3, curve_points >= 2 and histogram_bins >= 1 are required")
        if int(self.restarts) < 1:
            raise ConfigError("restarts must be at least 1")
        try:
            noise = NoiseModel(**self.noise)
        except TypeError as exc:
            raise ConfigError(f"invalid noise block: {exc}") from None
        except QMetroError as exc:
            raise ConfigError(str(exc)) from None
        if n is not None:
            parse_axes(self.axes, n)
            noise.tilts(n)
        return {"rho": rho, "thetas": thetas, "interval": (lo, hi), "ms": ms, "noise": noise}


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


@dataclass
class ReportBundle:
    summary: dict
    curves: list = field(default_factory=list)
    fisher: list = field(default_factory=list)
    campaign: list = field(default_factory=list)
    histograms: list = field(default_factory=list)
    failures: list = field(default_factory=list)


def _axes_list(axes):
    return [[a.x, a.y, a.z] for a in axes]


def _cell_seed(base_seed: int, i: int, j: int) -> int:
    return int(np.random.SeedSequence([int(base_seed), 1, i, j]).generate_state(1)[0])


def run_experiment(config: ExperimentConfig) -> ReportBundle:
    """Compute every table of a report bundle.

    Errors inside a stage are recorded in ``bundle.failures`` together with the
    config field that caused them; the remaining stages still run.
    """
    res = config.resolve()
    failures = []
    if config.state_file is not None:
        try:
            rho = load_density_matrix(config.state_file)
        except QMetroError as exc:
            raise ConfigError(f"state_file: {exc}") from exc
    else:
        rho = res["rho"]
    n = rho.n_qubits
    axes = parse_axes(config.axes, n)
    noise = res["noise"]
    model = probability_model(rho, axes, None if noise.is_identity else noise)
    generator = collective_generator(axes)
    lo, hi = res["interval"]

    summary: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "label": config.label or (config.state_file and Path(config.state_file).stem) or str(config.state),
        "n_qubits": n,
        "axes": _axes_list(axes),
        "noise": noise.as_dict(),
        "limits": {k: float(v) for k, v in rescaled_limits(n).items()},
    }

    def stage(name, fn):
        try:
            return fn()
        except QMetroError as exc:
            log.warning("stage %s failed: %s", name, exc)
            failures.append({"stage": name, "config_path": name, "error": str(exc)})
            return None

    def qfi_stage():
        f = qfi(rho, generator)
        summary["qfi"] = f
        summary["depth"] = classify_depth(min(f, n * n), n).certified_depth
        summary["bounds"] = {str(k): v for k, v in classify_depth(0.0, n).bounds_table.items()}
        if model.noise is not None:
            summary["qfi_effective"] = qfi(model.effective_probe, model.effective_generator)

    def qfi_opt_stage():
        opt = optimize_axes(rho, restarts=int(config.restarts), seed=int(config.base_seed))
        summary["qfi_opt"] = opt.value
        summary["qfi_opt_axes"] = _axes_list(opt.axes)
        summary["depth_opt"] = classify_depth(min(opt.value, n * n), n).certified_depth

    def witness_stage():
        summary["witness"] = witness_value(rho) if n == 4 else None

    stage("state", qfi_stage)
    stage("restarts", qfi_opt_stage)
    stage("state", witness_stage)

    curves, fisher_rows = [], []

    def curve_stage():
        thetas = np.linspace(lo, hi, int(config.curve_points))
        p = model.probabilities(thetas)
        dp = model.derivatives(thetas)
        f, div = fisher_terms(model, thetas)
        for j, t in enumerate(thetas):
            for i, mu in enumerate(model.outcomes):
                curves.append((float(t), int(mu), float(p[j, i]), float(dp[j, i])))
            fisher_rows.append((float(t), float(f[j]), "divergent" if div[j] else "ok"))
        summary["fisher_min"] = float(f.min())
        summary["fisher_max"] = float(f.max())

    stage("curve_points", curve_stage)

    campaign_rows, hist_rows = [], []
    table = stage("grid_points", lambda: LikelihoodTable(model, (lo, hi), int(config.grid_points)))
    if table is not None:
        for i, theta0 in enumerate(res["thetas"]):
            f0, _ = fisher_terms(model, theta0)
            for j, m in enumerate(res["ms"]):
                path = f"theta0[{i}],m[{j}]"
                seed = _cell_seed(config.base_seed, i, j)
                kw = dict(base_seed=seed, interval=(lo, hi), bins=int(config.histogram_bins), table=table)
                try:
                    # both protocols see the same outcome records
                    ml = ml_campaign(model, theta0, m, int(config.repetitions), **kw)
                    by = bayes_campaign(model, theta0, m, int(config.repetitions), **kw)
                except QMetroError as exc:
                    failures.append({"stage": "campaign", "config_path": path, "error": str(exc)})
                    continue
                campaign_rows.append((
                    theta0, m, int(config.repetitions), ml.std, ml.bias, ml.delta_res,
                    by.c_mean, by.c_std, by.delta_res, by.c_sem,
                    float(1 / np.sqrt(f0)) if f0 > 0 else float("inf"),
                    ml.failures, by.failures, by.clipped,
                ))
                for rep in (ml, by):
                    for c, a, b in zip(rep.hist_counts, rep.hist_edges[:-1], rep.hist_edges[1:]):
                        hist_rows.append((rep.method, theta0, m, float(a), float(b), int(c)))

    summary["failures"] = len(failures)
    return ReportBundle(summary, curves, fisher_rows, campaign_rows, hist_rows, failures)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _check_rows(bundle: ReportBundle):
    # crlb_dres is legitimately inf where F vanishes, so only the curves are checked
    bad = [r for r in bundle.curves + bundle.fisher if not all(
        np.isfinite(v) for v in r if isinstance(v, (float, np.floating))
    )]
    if bad:
        raise ValidationError("non-finite report rows", len(bad), f"{len(bad)} report rows are not finite")


def write_bundle(bundle: ReportBundle, out_dir, figures: bool = True) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _check_rows(bundle)
    _write_csv(out / "curves.csv", CURVES_HEADER, bundle.curves)
    _write_csv(out / "fisher.csv", FISHER_HEADER, bundle.fisher)
    _write_csv(out / "campaign.csv", CAMPAIGN_HEADER, bundle.campaign)
    _write_csv(out / "histograms.csv", HISTOGRAM_HEADER, bundle.histograms)
    (out / "summary.json").write_text(json.dumps(bundle.summary, indent=2, sort_keys=True) + "\n")
    failures_path = out / "failures.json"
    if bundle.failures:
        failures_path.write_text(json.dumps(bundle.failures, indent=2) + "\n")
    elif failures_path.exists():
        failures_path.unlink()
    tables = read_bundle(out)
    validate_probabilities(tables)
    if figures:
        from . import plotting

        plotting.render_bundle_figures([tables], out / "figures")
    return out


def run_and_write(config: ExperimentConfig, out_dir=None) -> Path:
    bundle = run_experiment(config)
    return write_bundle(bundle, out_dir or config.output_dir, figures=config.figures)


# reading bundles back --------------------------------------------------------


@dataclass
class BundleTables:
    label: str
    summary: dict
    curves: dict
    fisher: dict
    campaign: dict
    histograms: dict


def _read_csv(path: Path) -> dict:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = {name: [] for name in reader.fieldnames or []}
        for row in reader:
            for k, v in row.items():
                cols[k].append(v)
    out = {}
    for k, vals in cols.items():
        try:
            out[k] = np.array([float(v) for v in vals])
        except ValueError:
            out[k] = np.array(vals)
    return out


def read_bundle(path) -> BundleTables:
    path = Path(path)
    if not (path / "summary.json").exists():
        raise ConfigError(f"{path} is not a report bundle (no summary.json)")
    summary = json.loads((path / "summary.json").read_text())
    return BundleTables(
        label=str(summary.get("label", path.name)),
        summary=summary,
        curves=_read_csv(path / "curves.csv"),
        fisher=_read_csv(path / "fisher.csv"),
        campaign=_read_csv(path / "campaign.csv"),
        histograms=_read_csv(path / "histograms.csv"),
    )


def validate_probabilities(tables: BundleTables, tol: float = 1e-9):
    """Re-check that the emitted P(mu|theta) rows sum to one at every phase."""
    c = tables.curves
    if not len(c.get("theta", ())):
        return
    thetas, inverse = np.unique(c["theta"], return_inverse=True)
    sums = np.bincount(inverse, weights=c["p"], minlength=len(thetas))
    worst = float(np.max(np.abs(sums - 1.0)))
    if worst > tol:
        raise ValidationError("probability normalization deviation", worst)


def merge_bundles(paths, out_dir, figures: bool = True) -> Path:
    """Concatenate several bundles into one directory with a leading ``label`` column."""
    tables = [read_bundle(p) for p in paths]
    labels = [t.label for t in tables]
    if len(set(labels)) != len(labels):
        labels = [f"{t.label}#{i}" for i, t in enumerate(tables)]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, header in (
        ("curves", CURVES_HEADER),
        ("fisher", FISHER_HEADER),
        ("campaign", CAMPAIGN_HEADER),
        ("histograms", HISTOGRAM_HEADER),
    ):
        rows = []
        for label, path in zip(labels, paths):
            with open(Path(path) / f"{name}.csv", newline="") as fh:
                reader = csv.reader(fh)
                next(reader, None)
                rows.extend([label] + r for r in reader)
        with open(out / f"{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["label"] + header)
            w.writerows(rows)
    merged = {
        "schema_version": SCHEMA_VERSION,
        "bundles": [dict(t.summary, label=label) for t, label in zip(tables, labels)],
    }
    (out / "summary.json").write_text(json.dumps(merged, indent=2, sort_keys=True) + "\n")
    if figures:
        from . import plotting

        for t, label in zip(tables, labels):
            t.label = label
        plotting.render_bundle_figures(tables, out / "figures")
    return out


def config_to_dict(config: ExperimentConfig) -> dict:
    return asdict(config)
