"""File formats: density matrices (JSON), calibration counts and outcome lists (CSV)."""
from __future__ import annotations

import csv
import json
import warnings
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError
from .interferometer import CalibrationData
from .states import State, QuantumState, as_density

HERMITIAN_TOL = 1e-8
TRACE_TOL = 1e-6
EIGEN_TOL = 1e-8


class TomographyWarning(UserWarning):
    """A loaded density matrix needed a small repair."""


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from None


def density_from_dict(obj) -> QuantumState:
    """Validate {"dim", "re", "im"} and build a QuantumState.

    Eigenvalues in [-1e-8, 0) are clipped to zero and the trace renormalized,
    with a ``TomographyWarning``. Anything further off raises ``ValidationError``.
    """
    try:
        dim = int(obj["dim"])
        re = np.asarray(obj["re"], dtype=float)
        im = np.asarray(obj.get("im", np.zeros((dim, dim))), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed density matrix object: {exc}") from None
    if dim < 2 or dim & (dim - 1):
        raise FormatError(f"dim must be a power of two, got {dim}")
    if re.shape != (dim, dim) or im.shape != (dim, dim):
        raise FormatError(f"re/im must be {dim}x{dim} matrices")
    rho = re + 1j * im
    if not np.all(np.isfinite(rho)):
        raise FormatError("density matrix contains non-finite entries")

    herm = float(np.max(np.abs(rho - rho.conj().T)))
    if herm > HERMITIAN_TOL:
        raise ValidationError("hermiticity deviation", herm)
    rho = 0.5 * (rho + rho.conj().T)
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValidationError("trace deviation", tr - 1.0)
    evals, evecs = np.linalg.eigh(rho)
    if evals[0] < -EIGEN_TOL:
        raise ValidationError("negative eigenvalue", evals[0])
    if evals[-1] > 1 + EIGEN_TOL:
        raise ValidationError("eigenvalue above one", evals[-1] - 1)
    if evals[0] < 0 or abs(tr - 1.0) > 1e-12:
        if evals[0] < -1e-12:  # round-off is repaired silently
            warnings.warn(
                f"clipped negative eigenvalues down to {evals[0]:.3e}", TomographyWarning, stacklevel=3
            )
        evals = np.clip(evals, 0.0, None)
        evals = evals / evals.sum()
        rho = (evecs * evals) @ evecs.conj().T
        rho = 0.5 * (rho + rho.conj().T)
    return QuantumState(dim.bit_length() - 1, rho)


def load_density_matrix(path) -> QuantumState:
    return density_from_dict(_read_json(path))


def density_to_dict(state: State) -> dict:
    rho = as_density(state).matrix
    return {"dim": int(rho.shape[0]), "re": rho.real.tolist(), "im": rho.imag.tolist()}


def save_density_matrix(state: State, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(density_to_dict(state)) + "\n")
    return path


def read_calibration_csv(path) -> CalibrationData:
    """Rows ``theta,mu,count``; missing (theta, mu) pairs count as zero."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["theta", "mu", "count"]:
            raise FormatError(f"{path}: expected header theta,mu,count")
        for n, row in enumerate(reader, start=2):
            try:
                rows.append((float(row["theta"]), int(row["mu"]), int(row["count"])))
            except (TypeError, ValueError):
                raise FormatError(f"{path}:{n}: cannot parse {row}") from None
    if not rows:
        raise FormatError(f"{path}: no data rows")
    thetas = sorted({r[0] for r in rows})
    outcomes = sorted({r[1] for r in rows})
    counts = np.zeros((len(thetas), len(outcomes)), dtype=int)
    ti = {t: i for i, t in enumerate(thetas)}
    mi = {m: i for i, m in enumerate(outcomes)}
    for t, m, c in rows:
        counts[ti[t], mi[m]] += c
    return CalibrationData(np.array(thetas), tuple(outcomes), counts)


def write_calibration_csv(data: CalibrationData, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "mu", "count"])
        for theta, row in zip(data.thetas, data.counts):
            for mu, c in zip(data.outcomes, row):
                w.writerow([repr(float(theta)), mu, int(c)])
    return path


def read_outcomes(path) -> np.ndarray:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "mu":
        raise FormatError(f"{path}: expected header 'mu'")
    try:
        return np.array([int(v) for v in lines[1:]], dtype=int)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_outcomes(outcomes, path) -> Path:
    path = Path(path)
    path.write_text("mu\n" + "".join(f"{int(v)}\n" for v in outcomes))
    return path
