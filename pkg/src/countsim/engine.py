"""Forward simulation, common-noise coupling and Monte Carlo moments.

Everything here is a pure function of ``(spec, parameters, master_seed)``:
per-step randomness is derived from the lineage ``(master_seed,
replicate_id, time_index)``, replicates are independent tasks, and parallel
runs merge their per-replicate summaries in replicate order, so serial and
parallel executions agree bit for bit.

Coupled chains are two trajectories driven through the identical sequence of
step-noise objects: the same count-process realizations evaluated at each
chain's own intensity, the same counting-cache draws and the same
immigration.  Contraction of the underlying random maps then shows up as
decay of the l1 distance between the stacked composite states.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError
from .models import (
    ModelSpec,
    StepNoise,
    default_window,
    step,
    validate_window,
    window_distance,
)

DEFAULT_BURN_IN = 1000
DEFAULT_REPLICATES = 32

_COUNT_LIMIT = float(2**62)


@dataclass
class SamplePath:
    """A simulated trajectory with burn-in discarded.

    ``counts`` is T x p integers; ``intensities`` holds the conditional mean
    of the counts given the past (lambda for the intensity models, the
    thinning mean plus immigration mean for GINAR).
    """

    counts: np.ndarray
    intensities: np.ndarray
    burn_in: int
    lineage: tuple[int, int]
    model_kind: str

    @property
    def length(self) -> int:
        return self.counts.shape[0]

    @property
    def dimension(self) -> int:
        return self.counts.shape[1]

    def l1_counts(self) -> np.ndarray:
        """Per-step l1 size of the count vector."""
        return self.counts.sum(axis=1).astype(float)

    def to_csv(self, path) -> None:
        """Write ``t,y_1..y_p,lambda_1..lambda_p`` rows with LF endings."""
        p = self.dimension
        header = "t," + ",".join(f"y_{j + 1}" for j in range(p)) \
            + "," + ",".join(f"lambda_{j + 1}" for j in range(p))
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(header + "\n")
            for t in range(self.length):
                ys = ",".join(str(int(v)) for v in self.counts[t])
                lams = ",".join(repr(float(v)) for v in self.intensities[t])
                fh.write(f"{t},{ys},{lams}\n")


def simulate(spec: ModelSpec, T: int, burn_in: int = DEFAULT_BURN_IN,
             master_seed: int = 0, replicate_id: int = 0) -> SamplePath:
    """Iterate the one-step map ``T + burn_in`` times from the default window.

    Bit-reproducible from ``(master_seed, replicate_id)``.  Raises
    :class:`DivergenceError`, tagged with the offending time index, if the
    trajectory leaves the representable range.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    if burn_in < 0:
        raise ValueError("burn_in must be nonnegative")
    window = default_window(spec)
    counts = np.zeros((T, spec.p), dtype=np.int64)
    intensities = np.zeros((T, spec.p))
    for t in range(T + burn_in):
        try:
            window, y, intensity = step(spec, window, t, StepNoise(spec, t, master_seed, replicate_id))
        except DivergenceError as exc:
            if exc.time_index is None:
                raise DivergenceError(str(exc), time_index=t) from exc
            raise
        if float(y.max()) > _COUNT_LIMIT:
            raise DivergenceError("counts exceeded the 64-bit safe range", time_index=t)
        if t >= burn_in:
            counts[t - burn_in] = y
            intensities[t - burn_in] = intensity
    return SamplePath(counts, intensities, burn_in, (int(master_seed), int(replicate_id)), spec.kind)


@dataclass
class CouplingReport:
    """Distances between two common-noise chains and a fitted decay rate.

    ``fitted_rate`` is either a per-iteration geometric factor in (0, 1] or
    one of the flags ``"no-decay"`` (least-squares slope not below zero),
    ``"degenerate-equal"`` (identical start windows) or ``"coalesced"``
    (chains met exactly before a slope could be fitted).
    """

    distances: list[float]
    fitted_rate: float | str
    fit_window: tuple[int, int]
    initial_pair: tuple
    initial_distance: float

    def final_distance(self) -> float:
        return self.distances[-1]


def _fit_decay_rate(initial: float, distances: list[float]) -> tuple[float | str, tuple[int, int]]:
    """Least squares on log distance over the last three quarters of the run.

    Exact zeros (integer chains can coalesce) terminate the fit window; if
    the tail window holds fewer than two positive distances the fit falls
    back to every positive distance before coalescence.
    """
    n = len(distances)
    series = [initial] + distances  # index = iterations applied
    if initial == 0.0:
        return "degenerate-equal", (0, 0)
    zeros = [i for i, d in enumerate(series) if d == 0.0]
    end = zeros[0] if zeros else len(series)
    start = n // 4
    points = [(i, np.log(series[i])) for i in range(start, end) if series[i] > 0.0]
    if len(points) < 2:
        start = 0
        points = [(i, np.log(series[i])) for i in range(end) if series[i] > 0.0]
    if len(points) < 2:
        return "coalesced", (0, end)
    xs = np.array([float(i) for i, _ in points])
    ys = np.array([v for _, v in points])
    slope = float(np.polyfit(xs, ys, 1)[0])
    rate = float(np.exp(slope))
    if rate > 1.0:
        return "no-decay", (start, end)
    return rate, (start, end)


def couple(spec: ModelSpec, n: int, window_a, window_b,
           master_seed: int = 0, replicate_id: int = 0) -> CouplingReport:
    """Run two chains from different windows under fully shared noise.

    Both chains consume the same :class:`StepNoise` at every step, so equal
    windows stay equal forever and, under the model's contraction condition,
    the l1 distance between the stacked states decays geometrically.

    Because the per-step noise is i.i.d., iterating n frozen random maps
    forward has the same law as composing them in reverse order; this run is
    therefore a cheap stand-in for the backward iterations whose convergence
    defines the stationary solution.
    """
    if n < 10:
        raise ValueError("n must be at least 10")
    wa = validate_window(spec, window_a)
    wb = validate_window(spec, window_b)
    initial = window_distance(spec, wa, wb)
    distances: list[float] = []
    for t in range(n):
        noise = StepNoise(spec, t, master_seed, replicate_id)
        wa, _, _ = step(spec, wa, t, noise)
        wb, _, _ = step(spec, wb, t, noise)
        distances.append(window_distance(spec, wa, wb))
    rate, window = _fit_decay_rate(initial, distances)
    return CouplingReport(distances, rate, window, (window_a, window_b), initial)


@dataclass
class CouplingEnsemble:
    """Replicate-averaged coupling behaviour for one pair of start windows."""

    replicates: int
    n: int
    initial_distance: float
    mean_distances: np.ndarray
    median_final_distance: float
    fitted_rate: float | str
    fit_window: tuple[int, int]


def _couple_replicate(args) -> list[float]:
    spec, n, window_a, window_b, master_seed, replicate_id = args
    return couple(spec, n, window_a, window_b, master_seed, replicate_id).distances


def couple_ensemble(spec: ModelSpec, n: int, window_a, window_b, master_seed: int = 0,
                    replicates: int = DEFAULT_REPLICATES, jobs: int = 1) -> CouplingEnsemble:
    """Average the coupling distances over independent replicates.

    Replicate ``r`` derives all noise from ``(master_seed, r)``; the decay
    rate is fitted on the replicate-mean curve.
    """
    if replicates < 1:
        raise ValueError("replicates must be at least 1")
    tasks = [(spec, n, window_a, window_b, master_seed, r) for r in range(replicates)]
    rows = _map_tasks(_couple_replicate, tasks, jobs)
    stacked = np.array(rows)
    mean_distances = stacked.mean(axis=0)
    initial = window_distance(spec, validate_window(spec, window_a), validate_window(spec, window_b))
    rate, fit_window = _fit_decay_rate(initial, [float(v) for v in mean_distances])
    return CouplingEnsemble(
        replicates=replicates,
        n=n,
        initial_distance=initial,
        mean_distances=mean_distances,
        median_final_distance=float(np.median(stacked[:, -1])),
        fitted_rate=rate,
        fit_window=fit_window,
    )


@dataclass
class PolynomialMoment:
    estimate: float
    std_error: float


@dataclass
class ExponentialMoment:
    """Log-scale estimate of E exp(delta |Y|_1) with a saturation diagnostic.

    ``top10_share`` is the fraction of the exponential mass carried by the
    ten largest samples; the estimate is flagged saturated when that share
    exceeds one half, i.e. the average is dominated by fewer than 10 samples.
    """

    log_estimate: float
    std_error: float
    top10_share: float
    saturated: bool


@dataclass
class MomentReport:
    polynomial: dict[float, PolynomialMoment]
    exponential: dict[float, ExponentialMoment]
    sample_size: int
    burn_in: int
    replicates: int
    lineage: tuple[int, ...] = field(default=())


def _logsumexp(values: np.ndarray) -> float:
    m = float(np.max(values))
    return m + float(np.log(np.sum(np.exp(values - m))))


def _moment_replicate(args):
    spec, r_values, delta_values, T, burn_in, master_seed, replicate_id = args
    path = simulate(spec, T, burn_in, master_seed, replicate_id)
    sizes = path.l1_counts()
    poly = {r: (float(np.mean(sizes**r)), float(np.std(sizes**r, ddof=1))) for r in r_values}
    expo = {}
    for delta in delta_values:
        scaled = delta * sizes
        top10 = np.sort(scaled)[-10:]
        expo[delta] = (_logsumexp(scaled), _logsumexp(2.0 * scaled), top10.tolist())
    return len(sizes), poly, expo


def monte_carlo_moments(spec: ModelSpec, r_values, delta_values, T: int,
                        burn_in: int = DEFAULT_BURN_IN, replicates: int = DEFAULT_REPLICATES,
                        master_seed: int = 0, jobs: int = 1) -> MomentReport:
    """Estimate polynomial and exponential moments of |Y_t|_1 by pooling.

    Polynomial moments are plain averages of ``|Y_t|_1 ** r`` pooled over
    replicates, with the standard error taken across replicate means (a
    within-path fallback is used for a single replicate).  Exponential
    moments are accumulated in log space (log-sum-exp) and reported on the
    log scale together with the top-10-sample mass share, since a finite
    moment estimated by naive averaging fails silently under heavy tails.
    """
    r_values = [float(r) for r in r_values]
    delta_values = [float(d) for d in delta_values]
    if not r_values or not delta_values:
        raise ValueError("r_values and delta_values must be nonempty")
    if any(r < 1 for r in r_values):
        raise ValueError("polynomial orders must be >= 1")
    if any(d <= 0 for d in delta_values):
        raise ValueError("exponential scales must be positive")
    if replicates < 1:
        raise ValueError("replicates must be at least 1")

    tasks = [(spec, r_values, delta_values, T, burn_in, master_seed, rep)
             for rep in range(replicates)]
    summaries = _map_tasks(_moment_replicate, tasks, jobs)

    total = sum(s[0] for s in summaries)
    polynomial = {}
    for r in r_values:
        means = np.array([s[1][r][0] for s in summaries])
        estimate = float(np.mean(means))
        if replicates > 1:
            se = float(np.std(means, ddof=1) / np.sqrt(replicates))
        else:
            se = float(summaries[0][1][r][1] / np.sqrt(total))
        polynomial[r] = PolynomialMoment(estimate, se)

    exponential = {}
    for delta in delta_values:
        lses = np.array([s[2][delta][0] for s in summaries])
        counts = np.array([float(s[0]) for s in summaries])
        log_means = lses - np.log(counts)
        total_lse = _logsumexp(lses)
        log_estimate = total_lse - np.log(total)
        if replicates > 1:
            # Delta method across replicate means, evaluated in shifted space.
            shift = float(np.max(log_means))
            scaled = np.exp(log_means - shift)
            se = float(np.std(scaled, ddof=1) / (np.mean(scaled) * np.sqrt(replicates)))
        else:
            lse2 = summaries[0][2][delta][1]
            ratio = np.exp(lse2 + np.log(total) - 2.0 * lses[0]) - 1.0
            se = float(np.sqrt(max(ratio, 0.0) / total))
        top10_all = np.sort(np.concatenate([np.asarray(s[2][delta][2]) for s in summaries]))[-10:]
        top10_share = float(np.exp(_logsumexp(top10_all) - total_lse))
        exponential[delta] = ExponentialMoment(float(log_estimate), se, top10_share, top10_share > 0.5)

    return MomentReport(polynomial, exponential, total, burn_in, replicates,
                        lineage=(int(master_seed),))


def _map_tasks(fn, tasks, jobs: int):
    """Run per-replicate tasks, serially or in a process pool.

    Results are merged in task order either way, keeping parallel output
    bit-identical to the serial one.
    """
    jobs = max(1, int(jobs))
    if jobs == 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with multiprocessing.Pool(processes=min(jobs, len(tasks))) as pool:
        return pool.map(fn, tasks)
