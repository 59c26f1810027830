"""Seeded deterministic randomness for count-process simulation.

Every random object here is addressed by a *lineage*: a tuple of integers
starting with ``(master_seed, replicate_id, time_index)``.  The lineage is
folded into a 64-bit PCG64 seed with a fixed SplitMix64-based mixer, so any
stream can be reconstructed independently of construction order and the same
lineage yields bit-identical draws on every platform.

The module provides unit-rate Poisson process paths (evaluable at several
intensities on one realization, which is what makes common-noise coupling
possible), copula-coupled Poisson count vectors, and the cached counting
sequences behind the thinning operator.
"""

from __future__ import annotations

import math
from bisect import bisect_right, insort

import numpy as np

from .errors import ConfigurationError, DivergenceError

_MASK64 = (1 << 64) - 1

#: Counting-sequence families supported by the thinning operator.
COUNTING_FAMILIES = ("bernoulli", "poisson", "geometric")

#: Intensities above this are refused; counts would overflow 64-bit integers.
INTENSITY_LIMIT = 1e18


def _splitmix64(x: int) -> int:
    """One SplitMix64 output step (Steele, Lea & Flood constants)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _mix(parts: tuple[int, ...]) -> int:
    """Fold a lineage tuple into one 64-bit seed, order-sensitively."""
    acc = 0
    for part in parts:
        acc = _splitmix64(acc ^ (int(part) & _MASK64))
    return acc


class Stream:
    """A deterministic pseudo-random stream identified by its lineage.

    Two streams with equal lineage produce identical draw sequences; streams
    with different lineages are statistically independent.  The generator is
    built lazily on first use (derivation chains create many streams that
    never draw).  Instances own their generator state and must not be shared
    between concurrent tasks.
    """

    __slots__ = ("lineage", "_rng")

    def __init__(self, lineage: tuple[int, ...]):
        self.lineage = tuple(int(x) for x in lineage)
        self._rng = None

    @property
    def rng(self) -> np.random.Generator:
        if self._rng is None:
            self._rng = np.random.Generator(np.random.PCG64(_mix(self.lineage)))
        return self._rng

    def substream(self, *tags: int) -> "Stream":
        """Fresh stream derived from this lineage plus extra tag components."""
        return Stream(self.lineage + tags)

    def __repr__(self) -> str:
        return f"Stream(lineage={self.lineage})"


def make_stream(master_seed: int, replicate_id: int, time_index: int) -> Stream:
    """Stream for one time step of one replicate; pure in its arguments."""
    return Stream((int(master_seed), int(replicate_id), int(time_index)))


def poisson_inverse_cdf(u: float, lam: float) -> int:
    """Smallest k with Poisson(lam) CDF(k) >= u, by sequential summation.

    Intended for small/moderate intensities; the search is capped at
    ``lam + 40*sqrt(lam) + 50`` and an :class:`OverflowError` is raised if
    the cap is hit or the leading probability underflows.
    """
    if not 0.0 <= u < 1.0:
        raise ValueError(f"u must lie in [0, 1), got {u}")
    if lam < 0.0 or not math.isfinite(lam):
        raise ValueError(f"intensity must be finite and nonnegative, got {lam}")
    if lam == 0.0:
        return 0
    cap = int(lam + 40.0 * math.sqrt(lam) + 50.0)
    prob = math.exp(-lam)
    if prob == 0.0:
        raise OverflowError(f"intensity {lam} too large for sequential inverse CDF")
    cdf = prob
    k = 0
    while cdf < u:
        if k >= cap:
            raise OverflowError(f"inverse CDF search exceeded cap {cap} at intensity {lam}")
        k += 1
        prob *= lam / k
        cdf += prob
    return k


class PoissonProcessPath:
    """One realization of a unit-rate Poisson process on the half line.

    Arrival times are materialized lazily as partial sums of unit-mean
    exponential interarrivals, so the same realization can be counted at
    several intensities: counts are monotone in the intensity and extending
    the horizon never changes arrivals already drawn.

    Beyond :attr:`dense_cap` arrivals are no longer materialized one by one;
    counts are recorded at the queried points instead and new queries are
    filled in exactly with Poisson increments past the frontier and binomial
    bridges between recorded points.  This keeps evaluation O(1) for the very
    large intensities reached by nonstationary configurations.
    """

    #: Largest time up to which individual arrivals are materialized.
    dense_cap = 4096.0

    __slots__ = ("arrivals", "_marks")

    def __init__(self):
        self.arrivals: list[float] = []
        # Sorted (time, count) records governing times beyond the dense region.
        self._marks: list[tuple[float, int]] = []

    @property
    def horizon(self) -> float:
        """Largest time up to which the realization is pinned down."""
        last_dense = self.arrivals[-1] if self.arrivals else 0.0
        last_mark = self._marks[-1][0] if self._marks else 0.0
        return max(last_dense, last_mark)

    def count(self, lam: float, stream: Stream) -> int:
        """Number of arrivals in (0, lam], extending the path if needed."""
        if not math.isfinite(lam) or lam < 0.0:
            raise ValueError(f"intensity must be finite and nonnegative, got {lam}")
        if lam == 0.0:
            return 0
        if not self._marks and lam <= self.dense_cap:
            self._extend_dense(lam, stream)
            return bisect_right(self.arrivals, lam)
        return self._count_marked(lam, stream)

    def _extend_dense(self, lam: float, stream: Stream) -> None:
        # Materialize until one arrival lies strictly beyond lam.
        total = self.arrivals[-1] if self.arrivals else 0.0
        while total <= lam:
            gaps = stream.rng.exponential(size=16)
            for g in gaps:
                total += g
                self.arrivals.append(total)
            total = self.arrivals[-1]

    def _count_marked(self, lam: float, stream: Stream) -> int:
        if not self._marks:
            # Anchor the mark records at the dense frontier.
            anchor_t = self.arrivals[-1] if self.arrivals else 0.0
            self._marks.append((anchor_t, len(self.arrivals)))
        if lam <= self._marks[0][0]:
            return bisect_right(self.arrivals, lam)
        idx = bisect_right(self._marks, (lam, float("inf")))
        lo_t, lo_n = self._marks[idx - 1]
        if lam == lo_t:
            return lo_n
        if idx == len(self._marks):
            count = lo_n + int(stream.rng.poisson(lam - lo_t))
        else:
            hi_t, hi_n = self._marks[idx]
            gap = hi_n - lo_n
            count = lo_n
            if gap > 0:
                count += int(stream.rng.binomial(gap, (lam - lo_t) / (hi_t - lo_t)))
        insort(self._marks, (lam, count))
        return count


def path_count(path: PoissonProcessPath, lam: float, stream: Stream) -> int:
    """Evaluate a Poisson process path at intensity ``lam``."""
    return path.count(lam, stream)


class Dependence:
    """Joint law of the per-coordinate unit Poisson noise.

    One of ``independent`` (independent coordinates), ``comonotone`` (all
    coordinates driven by one shared uniform) or ``gaussian`` (a Gaussian
    copula with the given correlation matrix).  Marginals are Poisson under
    every scheme; only the joint changes.
    """

    KINDS = ("independent", "comonotone", "gaussian")

    __slots__ = ("kind", "correlation", "cholesky")

    def __init__(self, kind: str = "independent", correlation=None):
        if kind not in self.KINDS:
            raise ConfigurationError(f"unknown dependence scheme {kind!r}, expected one of {self.KINDS}")
        self.kind = kind
        self.correlation = None
        self.cholesky = None
        if kind == "gaussian":
            if correlation is None:
                raise ConfigurationError("gaussian dependence requires a correlation matrix")
            corr = np.asarray(correlation, dtype=float)
            if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
                raise ConfigurationError(f"correlation must be square, got shape {corr.shape}")
            if not np.all(np.isfinite(corr)):
                raise ConfigurationError("correlation contains non-finite entries")
            if not np.allclose(corr, corr.T, atol=1e-12):
                raise ConfigurationError("correlation matrix is not symmetric")
            if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
                raise ConfigurationError("correlation matrix must have unit diagonal")
            try:
                self.cholesky = np.linalg.cholesky(corr)
            except np.linalg.LinAlgError as exc:
                raise ConfigurationError("correlation matrix is not positive definite") from exc
            self.correlation = corr
        elif correlation is not None:
            raise ConfigurationError(f"scheme {kind!r} does not take a correlation matrix")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dependence):
            return NotImplemented
        if self.kind != other.kind:
            return False
        if self.correlation is None:
            return other.correlation is None
        return other.correlation is not None and np.array_equal(self.correlation, other.correlation)

    def __repr__(self) -> str:
        if self.kind == "gaussian":
            return f"Dependence('gaussian', correlation={self.correlation.tolist()})"
        return f"Dependence({self.kind!r})"


def _standard_normal_cdf(x: np.ndarray) -> np.ndarray:
    root2 = math.sqrt(2.0)
    return np.array([0.5 * (1.0 + math.erf(v / root2)) for v in x])


class CountNoise:
    """The count-process noise of a single time step.

    Evaluable at any intensity vector via :meth:`at`; repeated evaluations
    reuse the same underlying realization (paths, shared uniform or Gaussian
    draw), which is what coupled chains rely on when they share an instance.
    """

    __slots__ = ("scheme", "p", "_stream", "_paths", "_uniforms")

    def __init__(self, scheme: Dependence, p: int, stream: Stream):
        self.scheme = scheme
        self.p = int(p)
        self._stream = stream
        self._paths = None
        self._uniforms = None

    def at(self, lambdas) -> np.ndarray:
        """Counts with marginal law Poisson(lambdas_j), joint per the scheme."""
        lam = np.asarray(lambdas, dtype=float)
        if lam.shape != (self.p,):
            raise ValueError(f"expected {self.p} intensities, got shape {lam.shape}")
        lo, hi = float(lam.min()), float(lam.max())
        if lo < 0.0 or not math.isfinite(lo) or math.isnan(hi):
            raise ValueError("intensities must be finite and nonnegative")
        if hi > INTENSITY_LIMIT:
            raise DivergenceError(f"intensity exceeded {INTENSITY_LIMIT:g}")
        if self.scheme.kind == "independent":
            return self._independent(lam)
        return self._via_uniforms(lam)

    def _independent(self, lam: np.ndarray) -> np.ndarray:
        if self._paths is None:
            self._paths = [PoissonProcessPath() for _ in range(self.p)]
        out = np.zeros(self.p, dtype=np.int64)
        for j in range(self.p):
            out[j] = self._paths[j].count(float(lam[j]), self._stream)
        return out

    def _via_uniforms(self, lam: np.ndarray) -> np.ndarray:
        if self._uniforms is None:
            if self.scheme.kind == "comonotone":
                self._uniforms = np.full(self.p, float(self._stream.rng.random()))
            else:
                z = self._stream.rng.standard_normal(self.p)
                self._uniforms = _standard_normal_cdf(self.scheme.cholesky @ z)
        out = np.zeros(self.p, dtype=np.int64)
        for j in range(self.p):
            try:
                out[j] = poisson_inverse_cdf(float(self._uniforms[j]), float(lam[j]))
            except OverflowError as exc:
                raise DivergenceError(str(exc)) from exc
        return out


def sample_count_vector(lambdas, scheme: Dependence, stream: Stream) -> np.ndarray:
    """One fresh count vector with Poisson marginals coupled per the scheme."""
    lam = np.asarray(lambdas, dtype=float)
    return CountNoise(scheme, lam.shape[0], stream).at(lam)


def _draw_counting(family: str, mean: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` i.i.d. nonnegative-integer draws with the given mean."""
    if family == "bernoulli":
        if mean > 1.0:
            raise ConfigurationError(f"bernoulli counting mean {mean} exceeds 1")
        return (rng.random(size) < mean).astype(np.int64)
    if family == "poisson":
        return rng.poisson(mean, size).astype(np.int64)
    if family == "geometric":
        # Geometric on {0, 1, 2, ...} with success probability 1/(1+mean).
        return (rng.geometric(1.0 / (1.0 + mean), size) - 1).astype(np.int64)
    raise ConfigurationError(f"unknown counting family {family!r}, expected one of {COUNTING_FAMILIES}")


class CountingCache:
    """Lazily extended counting sequences keyed by (t, j, i, l).

    Extensions append draws from the supplied stream and never touch earlier
    entries, so re-reading a key always returns the same prefix: two coupled
    chains sharing a cache see the same underlying variables wherever their
    counts overlap.  Instances are single-owner (or shared deliberately
    between two coupled chains processed in turn).
    """

    def __init__(self):
        self._entries: dict[tuple[int, int, int, int], list[int]] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def draws(self, key: tuple[int, int, int, int], n: int, family: str, mean: float, stream: Stream) -> list[int]:
        """First ``n`` draws of the sequence at ``key``, extending on demand."""
        if n <= 0:
            return []
        values = self._entries.get(key)
        if values is None:
            values = []
            self._entries[key] = values
        deficit = n - len(values)
        if deficit > 0:
            values.extend(int(v) for v in _draw_counting(family, mean, deficit, stream.rng))
        return values[:n]


def thinning(cache: CountingCache, key: tuple[int, int], mean_matrix: np.ndarray, family: str, x, stream: Stream) -> np.ndarray:
    """Apply the thinning operator to a count vector.

    Coordinate ``i`` of the result is the sum over ``l`` of the first
    ``x[l]`` draws of the counting sequence with mean ``mean_matrix[i, l]``,
    read from the cache under key ``(t, j, i, l)`` with ``(t, j) = key``.
    The conditional mean of the output is ``mean_matrix @ x``.
    """
    t, j = key
    counts = np.asarray(x)
    if np.any(counts < 0):
        raise ValueError("thinning input must be nonnegative")
    p = mean_matrix.shape[0]
    out = np.zeros(p, dtype=np.int64)
    for i in range(p):
        row = mean_matrix[i]
        acc = 0
        for l in range(p):
            n = int(counts[l])
            mean = float(row[l])
            if n == 0 or mean == 0.0:
                continue
            acc += sum(cache.draws((t, j, i, l), n, family, mean, stream))
        out[i] = acc
    return out
