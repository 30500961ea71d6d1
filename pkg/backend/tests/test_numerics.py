"""Tests for the normal / Student-t primitives, Cholesky and random streams."""

import math

import numpy as np
import pytest
from scipy import special

from app.utils.errors import DimensionMismatchError, DomainError, NotPositiveDefiniteError
from app.utils.numerics import (
    NS_CALIBRATION,
    NS_REPLICATES,
    RngStream,
    cholesky,
    log_std_normal_sf,
    sample_mvn,
    standard_normal_rows,
    std_normal_cdf,
    std_normal_isf,
    std_normal_quantile,
    std_normal_sf,
    student_t_cdf,
    student_t_to_z,
)


def test_std_normal_sf_values():
    assert std_normal_sf(0.0) == 0.5
    assert std_normal_sf(1.96) == pytest.approx(0.024997895148220435, rel=1e-12)
    for t in (0.3, 1.0, 2.7, 5.0):
        assert std_normal_sf(t) + std_normal_sf(-t) == pytest.approx(1.0, abs=1e-15)


def test_std_normal_sf_monotone_and_bounded(rng):
    t = np.sort(rng.uniform(-8.0, 8.0, size=10_000))
    sf = std_normal_sf(t)
    assert np.all(np.diff(sf) <= 0.0)
    assert np.all((sf > 0.0) & (sf < 1.0))


def test_std_normal_sf_deep_tail_is_positive():
    assert std_normal_sf(38.0) > 0.0
    # Log form stays finite where the plain tail underflows
    assert math.isfinite(log_std_normal_sf(45.0))
    assert log_std_normal_sf(45.0) == pytest.approx(-45.0 ** 2 / 2 - math.log(45.0 * math.sqrt(2 * math.pi)), rel=1e-3)


def test_std_normal_sf_rejects_non_finite():
    with pytest.raises(DomainError):
        std_normal_sf(float("nan"))
    with pytest.raises(DomainError):
        std_normal_sf(np.array([0.0, np.inf]))


def test_std_normal_quantile_values():
    assert std_normal_quantile(0.5) == 0.0
    assert std_normal_quantile(0.975) == pytest.approx(1.959963984540054, rel=1e-12)
    assert std_normal_quantile(1.0 - std_normal_sf(2.5)) == pytest.approx(2.5, abs=1e-10)
    assert std_normal_isf(std_normal_sf(30.0)) == pytest.approx(30.0, rel=1e-10)
    assert std_normal_cdf(1.0) == pytest.approx(1.0 - std_normal_sf(1.0), abs=1e-15)


def test_tail_quantile_identities():
    u = np.logspace(-12, -1, 45)
    t = std_normal_isf(u)
    assert std_normal_sf(t) == pytest.approx(u, rel=1e-9)
    assert std_normal_quantile(u) == pytest.approx(-t, abs=1e-9)

    grid = np.linspace(0.1, 7.0, 70)
    assert std_normal_isf(std_normal_sf(grid)) == pytest.approx(grid, abs=1e-9)
    assert std_normal_quantile(std_normal_sf(grid)) == pytest.approx(-grid, abs=1e-9)
    # 1 - u keeps enough bits for the upper-tail form only while u >= 1e-6
    moderate = grid[std_normal_sf(grid) >= 1e-6]
    assert std_normal_quantile(1.0 - std_normal_sf(moderate)) == pytest.approx(moderate, abs=1e-9)


@pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5])
def test_std_normal_quantile_domain(u):
    with pytest.raises(DomainError):
        std_normal_quantile(u)


def test_student_t_cdf():
    for df in (1, 3, 10, 200):
        assert student_t_cdf(0.0, df) == 0.5
        assert student_t_cdf(1.3, df) + student_t_cdf(-1.3, df) == pytest.approx(1.0, abs=1e-14)
    # Regularized incomplete beta form of the t distribution
    oracle = 1.0 - 0.5 * special.betainc(5.0, 0.5, 10.0 / 14.0)
    assert student_t_cdf(2.0, 10) == pytest.approx(oracle, rel=1e-12)


def test_student_t_cdf_domain():
    with pytest.raises(DomainError):
        student_t_cdf(1.0, 0)


def test_student_t_to_z():
    t = np.array([-3.0, 0.0, 2.0])
    z = student_t_to_z(t, 10, 38.0)
    assert z[1] == 0.0
    assert z[2] == pytest.approx(std_normal_quantile(student_t_cdf(2.0, 10)), rel=1e-10)
    assert z[0] == pytest.approx(-std_normal_isf(student_t_cdf(-3.0, 10)), rel=1e-10)
    extreme = student_t_to_z(np.array([np.inf, -np.inf, 1e300]), 5, 38.0)
    assert list(extreme) == [38.0, -38.0, 38.0]


def test_cholesky_closed_forms():
    assert np.array_equal(cholesky(np.eye(3)).lower, np.eye(3))
    factor = cholesky(np.array([[1.0, 0.5], [0.5, 1.0]]))
    assert factor.lower == pytest.approx(np.array([[1.0, 0.0], [0.5, math.sqrt(0.75)]]), abs=1e-15)
    assert factor.reconstruct() == pytest.approx(np.array([[1.0, 0.5], [0.5, 1.0]]), abs=1e-15)


def test_cholesky_round_trip_random_correlations(rng):
    for _ in range(100):
        p = int(rng.integers(1, 51))
        a = rng.standard_normal((p, 2 * p + 1))
        s = a @ a.T
        d = np.sqrt(np.diag(s))
        m = s / np.outer(d, d)
        m = (m + m.T) / 2.0
        np.fill_diagonal(m, 1.0)
        factor = cholesky(m)
        assert factor.dim == p
        assert np.allclose(np.triu(factor.lower, 1), 0.0)
        assert np.max(np.abs(factor.reconstruct() - m)) <= 1e-10


def test_cholesky_reports_failing_pivot():
    m = np.array([[1.0, 0.9, 0.9], [0.9, 1.0, -0.9], [0.9, -0.9, 1.0]])
    with pytest.raises(NotPositiveDefiniteError) as exc:
        cholesky(m)
    assert exc.value.index == 2


def test_cholesky_rejects_asymmetric():
    with pytest.raises(DomainError):
        cholesky(np.array([[1.0, 0.5], [0.4, 1.0]]))


def test_rng_stream_determinism():
    a = RngStream(seed=7, stream_id=3).generator().standard_normal(5)
    b = RngStream(seed=7, stream_id=3).generator().standard_normal(5)
    c = RngStream(seed=7, stream_id=4).generator().standard_normal(5)
    d = RngStream(seed=7, stream_id=3, namespace=NS_CALIBRATION).generator().standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_standard_normal_rows_match_streams():
    rows = standard_normal_rows(11, NS_CALIBRATION, np.arange(4), 6)
    for r in range(4):
        expected = RngStream(seed=11, stream_id=r, namespace=NS_CALIBRATION).generator().standard_normal(6)
        assert np.array_equal(rows[r], expected)


def test_sample_mvn_identity_mean():
    factor = cholesky(np.eye(3))
    n = 20_000
    draws = np.array([sample_mvn(factor, np.zeros(3), RngStream(seed=1, stream_id=k)) for k in range(n)])
    assert np.all(np.abs(draws.mean(axis=0)) < 4.0 / math.sqrt(n))


def test_sample_mvn_equal_correlation():
    factor = cholesky(np.array([[1.0, 0.5], [0.5, 1.0]]))
    streams = [RngStream(seed=2, stream_id=k, namespace=NS_REPLICATES) for k in range(20_000)]
    draws = np.array([sample_mvn(factor, np.zeros(2), stream) for stream in streams])
    assert np.corrcoef(draws.T)[0, 1] == pytest.approx(0.5, abs=0.02)


def test_sample_mvn_determinism_and_shape():
    factor = cholesky(np.eye(4))
    stream = RngStream(seed=5, stream_id=9)
    assert np.array_equal(sample_mvn(factor, np.ones(4), stream), sample_mvn(factor, np.ones(4), stream))
    with pytest.raises(DimensionMismatchError):
        sample_mvn(factor, np.zeros(3), stream)
