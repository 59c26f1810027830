import math

import numpy as np
import pytest

from countsim.errors import ConfigurationError, DivergenceError
from countsim.models import (
    GinarSpec,
    ImmigrationSpec,
    IngarchSpec,
    LogLinearSpec,
    StepNoise,
    default_window,
    ginar_step,
    ingarch_intensity,
    ingarch_step,
    loglinear_mu,
    loglinear_step,
    step,
    validate_window,
    window_distance,
)
from countsim.randomness import CountNoise, CountingCache, Dependence, PoissonProcessPath, make_stream


def ginar_2d():
    return GinarSpec(2, 1, ([[0.4, 0.0], [0.1, 0.2]],), "bernoulli",
                     ImmigrationSpec("poisson", [1.0, 1.0]))


def ingarch_1d(d=1.0, a=0.3, b=0.5):
    return IngarchSpec(1, 1, [d], ([[a]],), ([[b]],))


# --- spec validation ---------------------------------------------------------

def test_bernoulli_mean_above_one_rejected_at_construction():
    with pytest.raises(ConfigurationError):
        GinarSpec(1, 1, ([[1.5]],), "bernoulli", ImmigrationSpec("poisson", [1.0]))


def test_poisson_family_allows_means_above_one():
    spec = GinarSpec(1, 1, ([[1.5]],), "poisson", ImmigrationSpec("poisson", [1.0]))
    assert spec.counting_family == "poisson"


def test_constant_immigration_requires_integers():
    with pytest.raises(ConfigurationError):
        ImmigrationSpec("constant", [1.5])
    imm = ImmigrationSpec("constant", [2.0])
    assert np.array_equal(imm.draw(make_stream(0, 0, 0)), [2])


def test_immigration_families_mean():
    for family in ("poisson", "geometric"):
        imm = ImmigrationSpec(family, [1.5, 0.5])
        draws = np.array([imm.draw(make_stream(1, 0, t)) for t in range(50000)])
        se = draws.std(axis=0, ddof=1) / math.sqrt(len(draws))
        assert np.all(np.abs(draws.mean(axis=0) - imm.mean()) < 3.5 * se)


def test_negative_matrix_rejected_for_counting_models():
    with pytest.raises(ConfigurationError):
        IngarchSpec(1, 1, [1.0], ([[-0.1]],), ([[0.2]],))
    with pytest.raises(ConfigurationError):
        GinarSpec(1, 1, ([[-0.2]],), "poisson", ImmigrationSpec("poisson", [1.0]))


def test_loglinear_allows_negative_matrices():
    spec = LogLinearSpec(1, 1, [0.1], ([[-0.4]],), ([[0.3]],))
    assert spec.mu_matrices[0][0, 0] == -0.4


def test_correlation_dimension_checked():
    with pytest.raises(ConfigurationError):
        IngarchSpec(2, 1, [1.0, 1.0], ([[0.1, 0.0], [0.0, 0.1]],),
                    ([[0.1, 0.0], [0.0, 0.1]],),
                    Dependence("gaussian", np.eye(3)))


def test_window_validation():
    spec = ingarch_1d()
    with pytest.raises(ConfigurationError):
        validate_window(spec, [])
    with pytest.raises(ConfigurationError):
        validate_window(spec, [(np.array([-1]), np.array([1.0]))])
    ok = validate_window(spec, [(np.array([2]), np.array([2.0]))])
    assert ok[0][0].dtype == np.int64


# --- ginar steps -------------------------------------------------------------

def test_ginar_zero_window_zero_immigration_absorbs():
    spec = GinarSpec(1, 1, ([[0.5]],), "bernoulli", ImmigrationSpec("constant", [0.0]))
    out = ginar_step(spec, [np.zeros(1, dtype=np.int64)], 0, CountingCache(), make_stream(1, 0, 0))
    assert np.array_equal(out, [0])


def test_ginar_pure_immigration_is_poisson():
    mu = 1.7
    spec = GinarSpec(1, 1, ([[0.0]],), "bernoulli", ImmigrationSpec("poisson", [mu]))
    window = [np.array([5], dtype=np.int64)]
    n = 100000
    draws = np.empty(n)
    for t in range(n):
        draws[t] = ginar_step(spec, window, t, CountingCache(), make_stream(2, 0, t))[0]
    se = draws.std(ddof=1) / math.sqrt(n)
    assert abs(draws.mean() - mu) < 3 * se
    # Poisson: variance equals the mean.
    assert abs(draws.var(ddof=1) - mu) < 5 * se


def test_ginar_conditional_mean_formula():
    spec = ginar_2d()
    window = [np.array([3, 1], dtype=np.int64)]
    target = np.array([0.4 * 3 + 1.0, 0.1 * 3 + 0.2 * 1 + 1.0])  # (2.2, 1.5)
    n = 100000
    draws = np.empty((n, 2))
    for t in range(n):
        draws[t] = ginar_step(spec, window, t, CountingCache(), make_stream(3, 0, t))
    se = draws.std(axis=0, ddof=1) / math.sqrt(n)
    assert np.all(np.abs(draws.mean(axis=0) - target) < 3 * se)


# --- ingarch steps -----------------------------------------------------------

def test_ingarch_intensity_at_zero_window_is_offset():
    spec = IngarchSpec(2, 2, [1.0, 0.5],
                       ([[0.1, 0.0], [0.0, 0.1]], [[0.05, 0.0], [0.0, 0.05]]),
                       ([[0.2, 0.0], [0.0, 0.2]], [[0.1, 0.0], [0.0, 0.1]]))
    window = [(np.zeros(2, dtype=np.int64), np.zeros(2)) for _ in range(2)]
    lam = ingarch_intensity(spec, window)
    assert np.array_equal(lam, spec.intensity_offset)


def test_ingarch_intensity_arithmetic():
    spec = ingarch_1d()
    lam = ingarch_intensity(spec, [(np.array([2]), np.array([2.0]))])
    assert lam[0] == pytest.approx(1.0 + 0.3 * 2 + 0.5 * 2)


def test_ingarch_conditional_mean_is_intensity():
    spec = ingarch_1d()
    window = [(np.array([2]), np.array([2.0]))]
    n = 100000
    draws = np.empty(n)
    for t in range(n):
        noise = CountNoise(spec.dependence, 1, make_stream(4, 0, t))
        y, lam = ingarch_step(spec, window, noise)
        assert lam[0] == pytest.approx(2.6)
        draws[t] = y[0]
    se = draws.std(ddof=1) / math.sqrt(n)
    assert abs(draws.mean() - 2.6) < 3 * se


def test_ingarch_intensity_dominates_offset_along_path():
    spec = IngarchSpec(2, 1, [0.7, 0.2],
                       ([[0.2, 0.1], [0.0, 0.2]],),
                       ([[0.3, 0.05], [0.1, 0.25]],))
    window = default_window(spec)
    for t in range(500):
        window, _, lam = step(spec, window, t, StepNoise(spec, t, 5, 0))
        assert np.all(lam >= spec.intensity_offset - 1e-12)


# --- loglinear steps ---------------------------------------------------------

def test_loglinear_zero_parameters_unit_intensity():
    spec = LogLinearSpec(1, 1, [0.0], ([[0.0]],), ([[0.0]],))
    noise = CountNoise(spec.dependence, 1, make_stream(6, 0, 0))
    y, mu, lam = loglinear_step(spec, [(np.zeros(1), np.zeros(1))], noise)
    assert mu[0] == 0.0
    assert lam[0] == 1.0


def test_loglinear_worked_example():
    spec = LogLinearSpec(1, 1, [0.1], ([[-0.4]],), ([[0.3]],))
    window = [(np.array([math.log(3.0)]), np.array([0.5]))]
    mu = loglinear_mu(spec, window)
    expected_mu = 0.1 - 0.4 * 0.5 + 0.3 * math.log(3.0)
    assert mu[0] == pytest.approx(expected_mu, abs=1e-12)
    assert math.exp(mu[0]) == pytest.approx(1.25807, abs=1e-5)


def test_loglinear_counts_mean_matches_intensity():
    spec = LogLinearSpec(1, 1, [0.1], ([[-0.4]],), ([[0.3]],))
    window = [(np.array([math.log(3.0)]), np.array([0.5]))]
    lam_target = math.exp(0.1 - 0.4 * 0.5 + 0.3 * math.log(3.0))
    n = 100000
    draws = np.empty(n)
    for t in range(n):
        noise = CountNoise(spec.dependence, 1, make_stream(7, 0, t))
        y, _, lam = loglinear_step(spec, window, noise)
        draws[t] = y[0]
    se = draws.std(ddof=1) / math.sqrt(n)
    assert abs(draws.mean() - lam_target) < 3 * se


def test_loglinear_divergence_carries_time_index():
    spec = LogLinearSpec(1, 1, [0.5], ([[1.3]],), ([[0.2]],))
    window = [(np.zeros(1), np.array([600.0]))]
    with pytest.raises(DivergenceError) as err:
        loglinear_step(spec, window, CountNoise(spec.dependence, 1, make_stream(8, 0, 3)), t=3)
    assert err.value.time_index == 3


# --- dispatch ----------------------------------------------------------------

def test_step_matches_ginar_step_bit_exactly():
    spec = ginar_2d()
    window = [np.array([3, 1], dtype=np.int64)]
    for t in range(20):
        direct = ginar_step(spec, window, t, CountingCache(), make_stream(9, 1, t))
        _, via_step, _ = step(spec, window, t, StepNoise(spec, t, 9, 1))
        assert np.array_equal(direct, via_step)


def test_step_matches_ingarch_step_bit_exactly():
    spec = ingarch_1d()
    window = [(np.array([2]), np.array([2.0]))]
    for t in range(20):
        noise = CountNoise(spec.dependence, 1, make_stream(10, 1, t))
        direct, _ = ingarch_step(spec, window, noise)
        _, via_step, _ = step(spec, window, t, StepNoise(spec, t, 10, 1))
        assert np.array_equal(direct, via_step)


def test_step_matches_loglinear_step_bit_exactly():
    spec = LogLinearSpec(1, 1, [0.1], ([[-0.4]],), ([[0.3]],))
    window = [(np.array([math.log(3.0)]), np.array([0.5]))]
    for t in range(20):
        noise = CountNoise(spec.dependence, 1, make_stream(11, 1, t))
        direct, _, _ = loglinear_step(spec, window, noise)
        _, via_step, _ = step(spec, window, t, StepNoise(spec, t, 11, 1))
        assert np.array_equal(direct, via_step)


def test_step_keeps_window_length():
    spec = IngarchSpec(1, 3, [1.0],
                       ([[0.1]], [[0.1]], [[0.1]]),
                       ([[0.2]], [[0.1]], [[0.05]]))
    window = default_window(spec)
    assert len(window) == 3
    for t in range(10):
        window, _, _ = step(spec, window, t, StepNoise(spec, t, 12, 0))
        assert len(window) == 3


def test_step_rejects_mismatched_noise():
    gspec = ginar_2d()
    ispec = ingarch_1d()
    with pytest.raises(ConfigurationError):
        step(gspec, default_window(gspec), 0, StepNoise(ispec, 0, 1, 0))
    with pytest.raises(ConfigurationError):
        step(ispec, default_window(ispec), 0, StepNoise(gspec, 0, 1, 0))


def test_ginar_order_two_equals_hand_stacked_pair_map():
    # A 2nd-order scalar model stepped through the window machinery must
    # reproduce the first-order map on pairs (x_t, x_{t-1}) built by hand,
    # when both consume the same per-step noise.
    spec = GinarSpec(1, 2, ([[0.3]], [[0.2]]), "bernoulli",
                     ImmigrationSpec("poisson", [1.0]))
    from countsim.randomness import thinning

    window = [np.array([4], dtype=np.int64), np.array([2], dtype=np.int64)]
    pair = (np.array([4], dtype=np.int64), np.array([2], dtype=np.int64))
    for t in range(60):
        window, got, _ = step(spec, window, t, StepNoise(spec, t, 13, 0))

        noise = StepNoise(spec, t, 13, 0)
        cur, prev = pair
        expected = noise.immigration(spec).copy()
        expected = expected + thinning(noise.cache, (t, 1), spec.mean_matrices[0],
                                       "bernoulli", cur, noise.base)
        expected = expected + thinning(noise.cache, (t, 2), spec.mean_matrices[1],
                                       "bernoulli", prev, noise.base)
        pair = (expected.astype(np.int64), cur)

        assert np.array_equal(got, pair[0])
        assert np.array_equal(window[0], pair[0])
        assert np.array_equal(window[1], pair[1])


# --- shared-path log bound ---------------------------------------------------

@pytest.mark.parametrize("s,t", [(1.0, 2.0), (2.0, 5.0), (0.5, 4.0)])
def test_log_count_ratio_respects_log_time_ratio(s, t):
    # For one shared unit-rate path, E log((1+N_t)/(1+N_s)) <= log(t) - log(s).
    n = 20000
    values = np.empty(n)
    for i in range(n):
        path = PoissonProcessPath()
        stream = make_stream(14, 0, i)
        ns = path.count(s, stream)
        nt = path.count(t, stream)
        values[i] = math.log((1 + nt) / (1 + ns))
    se = values.std(ddof=1) / math.sqrt(n)
    assert values.mean() <= math.log(t) - math.log(s) + 3 * se


def test_window_distance_l1():
    spec = ingarch_1d()
    wa = [(np.array([2]), np.array([3.0]))]
    wb = [(np.array([5]), np.array([1.5]))]
    assert window_distance(spec, wa, wb) == pytest.approx(3 + 1.5)
    gspec = ginar_2d()
    assert window_distance(gspec, [np.array([1, 2])], [np.array([4, 0])]) == pytest.approx(5.0)
