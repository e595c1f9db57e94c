"""Maximum-likelihood and Bayesian phase estimation from simulated m-experiments."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .errors import EstimationError, ParameterError
from .interferometer import ProbabilityModel

DEFAULT_INTERVAL = (0.0, np.pi / 2)
DEFAULT_GRID_POINTS = 2001
LOG_FLOOR = 1e-300
CONFIDENCE_MASS = 0.68
# posterior values within this relative distance of the maximum form a plateau
PLATEAU_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class OutcomeSample:
    theta_true: float
    outcomes: np.ndarray
    seed: int | None = None

    @property
    def m(self) -> int:
        return len(self.outcomes)


@dataclass(frozen=True, eq=False)
class LikelihoodCurve:
    grid: np.ndarray
    log_values: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return np.exp(self.log_values)


@dataclass(frozen=True)
class MlEstimate:
    theta_est: float
    log_likelihood_at_max: float

    @property
    def likelihood_at_max(self) -> float:
        return float(np.exp(self.log_likelihood_at_max))


@dataclass(frozen=True, eq=False)
class BayesPosterior:
    grid: np.ndarray
    density: np.ndarray
    theta_est: float
    confidence: float
    clipped: bool = False


class BoundResult(NamedTuple):
    value: float
    bias_slope: float
    one_sided: bool


@dataclass(eq=False)
class CampaignReport:
    """Summary of R independent m-experiments at one true phase."""

    method: str
    theta_true: float
    m: int
    repetitions: int
    estimates: np.ndarray = field(repr=False)
    hist_counts: np.ndarray = field(repr=False)
    hist_edges: np.ndarray = field(repr=False)
    mean: float
    std: float
    bias: float
    delta_res: float
    failures: int = 0
    confidences: np.ndarray | None = field(default=None, repr=False)
    c_mean: float | None = None
    c_std: float | None = None
    c_sem: float | None = None
    clipped: int = 0

    @property
    def std_error(self) -> float:
        """Monte Carlo standard error of ``std`` (normal approximation)."""
        n = len(self.estimates)
        return self.std / np.sqrt(2 * (n - 1)) if n > 1 else float("nan")


def _check_interval(interval) -> tuple[float, float]:
    lo, hi = (float(v) for v in interval)
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ParameterError(f"invalid estimation interval {interval!r}")
    return lo, hi


class LikelihoodTable:
    """log P(mu|theta) tabulated on a uniform phase grid.

    Building the table is the only expensive step; every m-experiment afterwards
    costs one (n_outcomes x grid) dot product.
    """

    def __init__(self, model: ProbabilityModel, interval=DEFAULT_INTERVAL, grid_points=DEFAULT_GRID_POINTS):
        lo, hi = _check_interval(interval)
        if int(grid_points) != grid_points or grid_points < 3:
            raise ParameterError(f"grid needs at least 3 points, got {grid_points!r}")
        self.model = model
        self.interval = (lo, hi)
        self.grid = np.linspace(lo, hi, int(grid_points))
        p = model.probabilities(self.grid)
        self.possible = p > LOG_FLOOR
        self.log_p = np.log(np.maximum(p, LOG_FLOOR)).T

    def counts(self, sample: OutcomeSample) -> np.ndarray:
        outcomes = np.asarray(sample.outcomes)
        idx = np.array([self.model.outcome_index(mu) for mu in outcomes], dtype=int)
        if np.any(idx < 0):
            bad = outcomes[idx < 0][0]
            raise ParameterError(f"outcome {bad!r} is not in {self.model.outcomes}")
        return np.bincount(idx, minlength=len(self.model.outcomes))

    def log_likelihood(self, counts: np.ndarray) -> np.ndarray:
        if counts.sum() == 0:
            raise ParameterError("sample is empty")
        seen = counts > 0
        if not np.any(np.all(self.possible[:, seen], axis=1)):
            raise EstimationError("likelihood vanishes on the whole interval")
        return counts @ self.log_p


def _refine(grid: np.ndarray, y: np.ndarray, i: int) -> tuple[float, float]:
    """Vertex of the parabola through the three grid points around index ``i``."""
    if i == 0 or i == len(grid) - 1:
        return float(grid[i]), float(y[i])
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    curv = y0 - 2 * y1 + y2
    if not curv < 0:
        return float(grid[i]), float(y1)
    delta = 0.5 * (y0 - y2) / curv
    h = grid[1] - grid[0]
    return float(grid[i] + delta * h), float(y1 - 0.25 * (y0 - y2) * delta)


def _ml_from_table(table: LikelihoodTable, counts: np.ndarray) -> MlEstimate:
    loglik = table.log_likelihood(counts)
    i = int(np.argmax(loglik))
    theta, peak = _refine(table.grid, loglik, i)
    return MlEstimate(theta, peak)


def _confidence(grid, density, center, mass=CONFIDENCE_MASS):
    """Half-width C of [center - C, center + C] holding ``mass`` of the density.

    Near a boundary the window is truncated, so it keeps growing on the open
    side only until the mass is reached.
    """
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    lo, hi = grid[0], grid[-1]

    def enclosed(c):
        return np.interp(min(hi, center + c), grid, cdf) - np.interp(max(lo, center - c), grid, cdf)

    a, b = 0.0, max(center - lo, hi - center)
    for _ in range(100):
        mid = 0.5 * (a + b)
        if enclosed(mid) < mass:
            a = mid
        else:
            b = mid
    c = 0.5 * (a + b)
    return c, bool(center - c < lo or center + c > hi)


def _posterior_from_table(table: LikelihoodTable, counts: np.ndarray) -> BayesPosterior:
    loglik = table.log_likelihood(counts)
    top = loglik.max()
    dens = np.exp(loglik - top)
    dens = dens / trapezoid(dens, table.grid)
    plateau = np.flatnonzero(loglik >= top + np.log1p(-PLATEAU_RTOL))
    if len(plateau) >= 3 and plateau[-1] - plateau[0] + 1 == len(plateau):
        # a flat top has no unique maximum; take its midpoint
        theta = float(0.5 * (table.grid[plateau[0]] + table.grid[plateau[-1]]))
    else:
        theta, _ = _refine(table.grid, loglik, int(plateau[0]))
    c, clipped = _confidence(table.grid, dens, theta)
    return BayesPosterior(table.grid, dens, theta, c, clipped)


def sample_outcomes(model: ProbabilityModel, theta0: float, m: int, seed: int) -> OutcomeSample:
    """m i.i.d. outcomes drawn from P(mu|theta0)."""
    if int(m) != m or m < 0:
        raise ParameterError(f"m must be a nonnegative integer, got {m!r}")
    if not np.isfinite(theta0):
        raise ParameterError(f"phase must be finite, got {theta0!r}")
    p = model.probabilities(float(theta0))
    rng = np.random.default_rng(seed)
    outcomes = np.asarray(model.outcomes)[rng.choice(len(p), size=int(m), p=p / p.sum())]
    return OutcomeSample(float(theta0), outcomes, seed)


def likelihood_curve(model, sample, interval=DEFAULT_INTERVAL, grid_points=DEFAULT_GRID_POINTS):
    table = LikelihoodTable(model, interval, grid_points)
    return LikelihoodCurve(table.grid, table.log_likelihood(table.counts(sample)))


def ml_estimate(
    model: ProbabilityModel,
    sample: OutcomeSample,
    interval=DEFAULT_INTERVAL,
    grid_points: int = DEFAULT_GRID_POINTS,
) -> MlEstimate:
    """Grid argmax of the log-likelihood, refined by a parabola through its neighbors.

    Ties go to the smallest phase.
    """
    table = LikelihoodTable(model, interval, grid_points)
    return _ml_from_table(table, table.counts(sample))


def bayes_posterior(
    model: ProbabilityModel,
    sample: OutcomeSample,
    interval=DEFAULT_INTERVAL,
    grid_points: int = DEFAULT_GRID_POINTS,
) -> BayesPosterior:
    """Posterior under a flat prior on ``interval`` with its 68% half-width C."""
    table = LikelihoodTable(model, interval, grid_points)
    return _posterior_from_table(table, table.counts(sample))


def repetition_seed(base_seed: int, i: int) -> int:
    return int(np.random.SeedSequence([int(base_seed), int(i)]).generate_state(1)[0])


def _histogram(estimates, interval, bins):
    return np.histogram(estimates, bins=bins, range=interval)


def _campaign(method, model, theta0, m, repetitions, base_seed, interval, grid_points, bins, table):
    if int(repetitions) != repetitions or repetitions < 2:
        raise ParameterError(f"need at least 2 repetitions, got {repetitions!r}")
    if int(m) != m or m < 1:
        raise ParameterError(f"m must be a positive integer, got {m!r}")
    if table is None:
        table = LikelihoodTable(model, interval, grid_points)
    estimates, confidences = [], []
    failures = clipped = 0
    for i in range(int(repetitions)):
        sample = sample_outcomes(model, theta0, m, repetition_seed(base_seed, i))
        counts = table.counts(sample)
        try:
            if method == "ml":
                estimates.append(_ml_from_table(table, counts).theta_est)
            else:
                post = _posterior_from_table(table, counts)
                estimates.append(post.theta_est)
                confidences.append(post.confidence)
                clipped += post.clipped
        except EstimationError:
            failures += 1
    est = np.array(estimates)
    if len(est) < 2:
        raise EstimationError(f"only {len(est)} of {repetitions} repetitions produced an estimate")
    counts, edges = _histogram(est, table.interval, bins)
    std = float(np.std(est, ddof=1))
    report = CampaignReport(
        method=method,
        theta_true=float(theta0),
        m=int(m),
        repetitions=int(repetitions),
        estimates=est,
        hist_counts=counts,
        hist_edges=edges,
        mean=float(est.mean()),
        std=std,
        bias=float(est.mean() - theta0),
        delta_res=float(np.sqrt(m) * std),
        failures=failures,
    )
    if method == "bayes":
        c = np.array(confidences)
        report.confidences = c
        report.c_mean = float(c.mean())
        report.c_std = float(c.std(ddof=1))
        report.c_sem = report.c_std / np.sqrt(len(c))
        report.delta_res = float(np.sqrt(m) * report.c_mean)
        report.clipped = clipped
    return report


def ml_campaign(
    model: ProbabilityModel,
    theta0: float,
    m: int,
    repetitions: int,
    base_seed: int = 0,
    interval=DEFAULT_INTERVAL,
    grid_points: int = DEFAULT_GRID_POINTS,
    bins: int = 60,
    table: LikelihoodTable | None = None,
) -> CampaignReport:
    """R independent ML estimates; ``delta_res`` is sqrt(m) * std(theta_est).

    Repetition i uses seed ``repetition_seed(base_seed, i)``. Repetitions whose
    likelihood vanishes everywhere are counted in ``failures``.
    """
    return _campaign("ml", model, theta0, m, repetitions, base_seed, interval, grid_points, bins, table)


def bayes_campaign(
    model: ProbabilityModel,
    theta0: float,
    m: int,
    repetitions: int,
    base_seed: int = 0,
    interval=DEFAULT_INTERVAL,
    grid_points: int = DEFAULT_GRID_POINTS,
    bins: int = 60,
    table: LikelihoodTable | None = None,
) -> CampaignReport:
    """R single-experiment posteriors; ``delta_res`` is sqrt(m) * mean(C)."""
    return _campaign("bayes", model, theta0, m, repetitions, base_seed, interval, grid_points, bins, table)


def bias_corrected_crlb(
    bias_curve, fisher: float, m: int, theta0: float
) -> BoundResult:
    """Cramer-Rao bound of a biased estimator, |1 + db/dtheta0| / sqrt(m F).

    With b = <theta_est> - theta0 the numerator is d<theta_est>/dtheta0, so a
    constant estimator (db/dtheta0 = -1) is bounded by 0, and the bound falls
    below 1/sqrt(m F) wherever -2 < db/dtheta0 < 0.

    ``bias_curve`` maps true phases to biases (a dict, or a pair of sequences).
    Central differences are used in the interior; at either end of the grid
    the difference is one-sided and ``one_sided`` is set.
    """
    if isinstance(bias_curve, dict):
        pts = sorted(bias_curve.items())
        thetas = np.array([p[0] for p in pts], dtype=float)
        biases = np.array([p[1] for p in pts], dtype=float)
    else:
        thetas, biases = (np.asarray(v, dtype=float) for v in bias_curve)
        order = np.argsort(thetas)
        thetas, biases = thetas[order], biases[order]
    if fisher <= 0 or m < 1:
        raise ParameterError("need positive Fisher information and m >= 1")
    if len(thetas) < 2:
        raise ParameterError("bias curve needs at least two phases")
    hits = np.flatnonzero(np.isclose(thetas, theta0, rtol=0, atol=1e-12))
    if len(hits) != 1:
        raise ParameterError(f"theta0 = {theta0!r} is not on the bias grid")
    i = int(hits[0])
    one_sided = i == 0 or i == len(thetas) - 1
    if i == 0:
        slope = (biases[1] - biases[0]) / (thetas[1] - thetas[0])
    elif i == len(thetas) - 1:
        slope = (biases[-1] - biases[-2]) / (thetas[-1] - thetas[-2])
    else:
        slope = (biases[i + 1] - biases[i - 1]) / (thetas[i + 1] - thetas[i - 1])
    value = abs(1.0 + slope) / np.sqrt(m * fisher)
    return BoundResult(float(value), float(slope), one_sided)


def crlb(fisher: float, m: int) -> float:
    """Unbiased Cramer-Rao bound 1/sqrt(m F)."""
    if fisher <= 0 or m < 1:
        raise ParameterError("need positive Fisher information and m >= 1")
    return float(1.0 / np.sqrt(m * fisher))


def rescaled_limits(n_qubits: int) -> dict[str, float]:
    """Delta_res reference lines: shot noise, ideal Dicke state and Heisenberg."""
    n = n_qubits
    return {"snl": 1 / np.sqrt(n), "dicke": 1 / np.sqrt(n * (n + 2) / 2), "hl": 1.0 / n}


def duplicate(sample: OutcomeSample, times: int = 2) -> OutcomeSample:
    return OutcomeSample(sample.theta_true, np.tile(sample.outcomes, times), sample.seed)


def outcomes_sample(outcomes: Sequence[int], theta_true: float = float("nan")) -> OutcomeSample:
    return OutcomeSample(theta_true, np.asarray(outcomes, dtype=int), None)
