"""Tests for null replicate simulation and bounding sequence calibration."""

import math

import numpy as np
import pytest
from scipy import stats

from app.models.calibration import BoundingSequence, BoundingSpec, NullReplicates, integer_grid
from app.services.calibration import calibration_service, normalized_deviation
from app.services.dependence import dependence_service
from app.utils.errors import DomainError, MatrixFormatError


def sf(t):
    return 0.5 * math.erfc(t / math.sqrt(2.0))


def naive_v(w, theta, grid_points, both_limits):
    """Reference V: double loop over thresholds and entries."""
    p = len(w)
    best = -math.inf
    for t in grid_points:
        above = sum(1 for x in w if abs(x) > t) / p
        at_or_above = sum(1 for x in w if abs(x) >= t) / p
        candidates = [above, at_or_above] if both_limits else [above]
        for frac in candidates:
            best = max(best, abs(frac - 2.0 * sf(t)) / sf(t) ** theta)
    return best


def test_integer_grid():
    assert integer_grid(2000) == [1, 2, 3, 4, 5, 6]
    assert integer_grid(1) == []
    assert integer_grid(100) == [1, 2, 3, 4]


def test_v_statistic_zero_vector_integer_grid():
    spec = BoundingSpec(theta=0.0, alpha=0.1, grid="integer")
    assert calibration_service.v_statistic(np.zeros(100), spec) == pytest.approx(2.0 * sf(1.0), rel=1e-14)


def test_v_statistic_zero_vector_observed_grid():
    assert calibration_service.v_statistic(np.zeros(10), BoundingSpec(theta=0.5)) == 0.0


def test_v_statistic_four_points():
    w = np.array([0.5, 1.5, 2.5, 3.5])
    expected = naive_v(list(w), 0.5, list(w), both_limits=True)
    assert calibration_service.v_statistic(w, BoundingSpec(theta=0.5)) == pytest.approx(expected, rel=1e-12)


def test_v_statistic_matches_naive(rng):
    for _ in range(20):
        p = int(rng.integers(2, 150))
        w = rng.standard_normal(p) * rng.uniform(0.5, 2.0)
        w[rng.integers(0, p)] = w[0]  # ties
        for theta in (0.0, 0.5, 1.0):
            observed = calibration_service.v_statistic(w, BoundingSpec(theta=theta))
            assert observed == pytest.approx(naive_v(list(w), theta, sorted(set(np.abs(w))), True), rel=1e-12)
            if p >= 3:
                discrete = calibration_service.v_statistic(w, BoundingSpec(theta=theta, grid="integer"))
                assert discrete == pytest.approx(naive_v(list(w), theta, integer_grid(p), False), rel=1e-12)


def test_v_statistic_invariant_to_duplication(rng):
    w = rng.standard_normal(40)
    spec = BoundingSpec(theta=0.5)
    assert calibration_service.v_statistic(np.concatenate([w, w]), spec) == pytest.approx(
        calibration_service.v_statistic(w, spec), rel=1e-14
    )


def test_v_statistic_rejects_bad_input():
    with pytest.raises(DomainError):
        calibration_service.v_statistic(np.array([]), BoundingSpec(theta=0.5))
    with pytest.raises(DomainError):
        calibration_service.v_statistic(np.array([0.1, np.nan]), BoundingSpec(theta=0.5))
    with pytest.raises(DomainError):
        calibration_service.v_statistic(np.array([0.1]), BoundingSpec(theta=0.5, grid="integer"))


def test_normalized_deviation_deep_tail():
    # The plain tail underflows at t = 39; the log form keeps the ratio exact
    assert normalized_deviation(np.array([0.0]), np.array([39.0]), 1.0)[0] == pytest.approx(2.0)
    assert normalized_deviation(np.array([0.0]), np.array([39.0]), 0.0)[0] == pytest.approx(0.0, abs=1e-300)


def test_parametric_identity_variances():
    sigma = dependence_service.make_equal(50, 0.0)
    reps = calibration_service.simulate_null_replicates_parametric(sigma, 2000, seed=1)
    assert reps.values.shape == (2000, 50)
    assert np.all(np.abs(reps.values.var(axis=0, ddof=1) - 1.0) < 0.1)


def test_parametric_equal_correlation():
    sigma = dependence_service.make_equal(20, 0.5)
    reps = calibration_service.simulate_null_replicates_parametric(sigma, 2000, seed=2)
    corr = np.corrcoef(reps.values.T)
    off_diagonal = corr[~np.eye(20, dtype=bool)]
    assert off_diagonal.mean() == pytest.approx(0.5, abs=0.05)


def test_parametric_is_deterministic_across_threads():
    sigma = dependence_service.make_autoregressive(30, 0.7)
    one = calibration_service.simulate_null_replicates_parametric(sigma, 300, seed=9, threads=1)
    again = calibration_service.simulate_null_replicates_parametric(sigma, 300, seed=9, threads=1)
    many = calibration_service.simulate_null_replicates_parametric(sigma, 300, seed=9, threads=4)
    assert np.array_equal(one.values, again.values)
    assert np.array_equal(one.values, many.values)
    assert one.provenance == "parametric(autoregressive(r=0.7), seed=9)"


def test_marginal_z_scores_null(rng):
    X = rng.standard_normal((100, 500))
    y = rng.standard_normal(100)
    z = calibration_service.marginal_z_scores(X, y)
    assert stats.kstest(z, "norm").statistic < 0.08


def test_marginal_z_scores_duplicate_and_perfect_fit(rng):
    X = rng.standard_normal((100, 4))
    X[:, 2] = X[:, 0]
    y = X[:, 1].copy()
    z = calibration_service.marginal_z_scores(X, y)
    assert z[0] == z[2]
    assert 30.0 <= z[1] <= 38.0


def test_marginal_z_scores_matches_regression_t(rng):
    X = rng.standard_normal((40, 3))
    y = 0.3 * X[:, 0] + rng.standard_normal(40)
    z = calibration_service.marginal_z_scores(X, y)
    fit = stats.linregress(X[:, 0], y)
    t_stat = fit.slope / fit.stderr
    expected = np.sign(t_stat) * -stats.norm.ppf(stats.t.cdf(-abs(t_stat), 38))
    assert z[0] == pytest.approx(expected, rel=1e-8)


def test_marginal_z_scores_validation(rng):
    X = rng.standard_normal((10, 3))
    with pytest.raises(DomainError):
        calibration_service.marginal_z_scores(X[:2], np.ones(2))
    with pytest.raises(DomainError):
        calibration_service.marginal_z_scores(X, np.ones(10))
    X[:, 1] = 2.0
    with pytest.raises(DomainError) as exc:
        calibration_service.marginal_z_scores(X, rng.standard_normal(10))
    assert "Column 1" in str(exc.value)


def test_permutation_observed_row(rng):
    X = rng.standard_normal((30, 8))
    y = rng.standard_normal(30)
    reps = calibration_service.permutation_null_replicates(X, y, 1, seed=0, include_observed=True)
    assert np.allclose(reps.values[0], calibration_service.marginal_z_scores(X, y), atol=1e-12)


def test_permutation_rows_centered(rng):
    X = rng.standard_normal((100, 200))
    y = rng.standard_normal(100)
    reps = calibration_service.permutation_null_replicates(X, y, 50, seed=3)
    assert np.all(np.abs(reps.values.mean(axis=1)) < 4.0 / math.sqrt(200))


def test_permutation_preserves_column_correlation(rng):
    sigma = dependence_service.make_equal(50, 0.5)
    X = rng.standard_normal((100, 50)) @ sigma.factor().lower.T
    y = rng.standard_normal(100)
    reps = calibration_service.permutation_null_replicates(X, y, 500, seed=4, threads=2)
    target = dependence_service.sample_correlation_from_data(X).entries
    observed = np.corrcoef(reps.values.T)
    assert np.linalg.norm(observed - target) / np.linalg.norm(target) < 0.2


def test_permutation_deterministic(rng):
    X = rng.standard_normal((20, 5))
    y = rng.standard_normal(20)
    a = calibration_service.permutation_null_replicates(X, y, 130, seed=5, threads=1)
    b = calibration_service.permutation_null_replicates(X, y, 130, seed=5, threads=3)
    assert np.array_equal(a.values, b.values)


def test_bounding_sequence_single_replicate(rng):
    w = rng.standard_normal(25)
    reps = NullReplicates(values=w[np.newaxis, :], provenance="test")
    for alpha in (0.01, 0.5, 0.9):
        seq = calibration_service.bounding_sequence(reps, BoundingSpec(theta=0.5, alpha=alpha))
        assert seq.c == calibration_service.v_statistic(w, BoundingSpec(theta=0.5))
        assert seq.R == 1
        assert seq.p == 25


def test_bounding_sequence_order_statistic(rng):
    reps = NullReplicates(values=rng.standard_normal((1000, 30)), provenance="test")
    spec = BoundingSpec(theta=1.0, alpha=0.1)
    values = np.sort(calibration_service.v_statistics(reps, spec))
    assert calibration_service.bounding_sequence(reps, spec).c == values[899]
    tiny = calibration_service.bounding_sequence(reps, BoundingSpec(theta=1.0, alpha=1e-6))
    assert tiny.c == values[-1]


def test_bounding_sequence_non_increasing_in_alpha(rng):
    reps = NullReplicates(values=rng.standard_normal((400, 60)), provenance="test")
    for theta in (0.5, 1.0):
        for grid in ("observed", "integer"):
            cs = [
                calibration_service.bounding_sequence(reps, BoundingSpec(theta=theta, alpha=alpha, grid=grid)).c
                for alpha in (0.05, 0.1, 0.2, 0.5)
            ]
            assert all(later <= earlier for earlier, later in zip(cs, cs[1:]))


def test_bounding_sequence_rejects_overflow():
    w = np.zeros(10)
    w[0] = 38.0
    reps = NullReplicates(values=w[np.newaxis, :], provenance="test")
    assert math.isfinite(calibration_service.bounding_sequence(reps, BoundingSpec(theta=0.5, alpha=0.1)).c)
    with pytest.raises(DomainError, match="overflowed"):
        calibration_service.bounding_sequence(reps, BoundingSpec(theta=1.0, alpha=0.1))


def test_bounding_sequence_model_rejects_non_finite_c():
    for c in (math.inf, math.nan):
        with pytest.raises(ValueError):
            BoundingSequence(c=c, theta=1.0, alpha=0.1, grid="observed", R=1, p=10, provenance="test")


def test_calibrate_returns_one_sequence_per_theta(rng):
    reps = NullReplicates(values=rng.standard_normal((50, 30)), provenance="test", seed=3)
    seqs = calibration_service.calibrate(reps, (0.5, 1.0), 0.2, "integer")
    assert [s.theta for s in seqs] == [0.5, 1.0]
    assert all(s.grid == "integer" and s.alpha == 0.2 and s.seed == 3 for s in seqs)


@pytest.mark.parametrize("structure", ["identity:p=500", "equal:p=500,rho=0.5", "ar:p=500,r=0.9"])
def test_bounding_sequence_controls_exceedance(structure):
    sigma = dependence_service.build_from_text(structure)
    spec = BoundingSpec(theta=0.5, alpha=0.1)
    calibration = calibration_service.simulate_null_replicates_parametric(sigma, 1000, seed=10)
    fresh = calibration_service.simulate_null_replicates_parametric(sigma, 1000, seed=11)
    c = calibration_service.bounding_sequence(calibration, spec).c
    rate = np.mean(calibration_service.v_statistics(fresh, spec) > c)
    assert rate <= 0.13


def test_null_replicates_round_trip(tmp_path, rng):
    reps = NullReplicates(values=rng.standard_normal((4, 6)), provenance="test")
    path = calibration_service.save_null_replicates(reps, tmp_path / "reps.csv")
    loaded = calibration_service.load_null_replicates(path)
    assert np.array_equal(loaded.values, reps.values)
    single = tmp_path / "single.csv"
    single.write_text("0.1,0.2,0.3\n")
    assert calibration_service.load_null_replicates(single).R == 1


def test_null_replicates_bad_cell(tmp_path):
    path = tmp_path / "reps.csv"
    path.write_text("0.1,0.2\n0.3,x\n")
    with pytest.raises(MatrixFormatError) as exc:
        calibration_service.load_null_replicates(path)
    assert (exc.value.row, exc.value.column) == (1, 1)


def test_bounding_sequence_json_round_trip(tmp_path):
    seq = BoundingSequence(c=0.87, theta=0.5, alpha=0.1, grid="observed", R=1000, p=2000, seed=1, provenance="x")
    path = calibration_service.save_bounding_sequence(seq, tmp_path / "c.json")
    assert calibration_service.load_bounding_sequence(path) == seq


@pytest.mark.slow
def test_reference_bounding_sequences():
    expected = {
        "ar:p=2000,r=0.9": (0.178, 8.46),
        "equal:p=2000,rho=0.5": (0.87, 4.39),
        "block:p=2000,size=400,rho=0.5": (0.397, 5.58),
        "sparse:p=2000,prob=0.1,value=0.9,seed=1": (0.099, 6.79),
    }
    for structure, (c_half, c_one) in expected.items():
        reps = calibration_service.simulate_null_replicates_parametric(
            dependence_service.build_from_text(structure), 1000, seed=0
        )
        half, one = calibration_service.calibrate(reps, (0.5, 1.0), 0.1, "observed")
        assert half.c == pytest.approx(c_half, rel=0.25)
        assert one.c == pytest.approx(c_one, rel=0.30)


@pytest.mark.slow
def test_discrete_sequence_scales_with_dependence():
    c_half, c_one = [], []
    for rho in (0.1, 0.4, 0.8):
        reps = calibration_service.simulate_null_replicates_parametric(
            dependence_service.make_equal(1000, rho), 1000, seed=0
        )
        half, one = calibration_service.calibrate(reps, (0.5, 1.0), 0.1, "integer")
        c_half.append(half.c)
        c_one.append(one.c)
    assert c_half[0] < c_half[1] < c_half[2]
    assert c_half[2] / c_half[0] >= 1.5
    assert 0.5 <= c_one[2] / c_one[0] <= 2.0
