# tests/unit/services/test_mc_engine.py
import numpy as np
import pytest

from core.exceptions import InputValidationError
from helpers.covariance import validate_spec
from helpers.special_fn import bivariate_cdf, std_normal_cdf
from models.gaussian_array import (
    Convention,
    OrderStatSelector,
    ShapeMismatchError,
    ThresholdVector,
)
from services.mc_engine import (
    StarvedRatioError,
    UnsupportedShapeError,
    estimate_delta,
    estimate_prob_le,
    estimate_theta_log,
    exact_prob_small,
    order_stat_vector,
    sample_array,
)


def pair_spec(d: int, n: int, rho: float):
    return validate_spec(d, n, [[1.0, rho], [rho, 1.0]])


@pytest.fixture
def column_pair():
    return pair_spec(2, 1, 0.5), pair_spec(2, 1, 0.0)


SINGLE = OrderStatSelector(r=1, n=1)
ORIGIN = ThresholdVector(u=[0.0, 0.0])


@pytest.mark.parametrize(
    "r,convention,expected",
    [
        (1, Convention.ASCENDING, [1.0, -4.0]),
        (1, Convention.DESCENDING, [3.0, 0.5]),
        (2, Convention.ASCENDING, [2.0, 0.0]),
    ],
)
def test_order_stat_vector(r, convention, expected):
    sample = np.array([[3.0, 1.0, 2.0], [0.0, -4.0, 0.5]])
    sel = OrderStatSelector(r=r, n=3, convention=convention)
    assert np.array_equal(order_stat_vector(sample, sel), expected)


def test_order_stat_vector_checks_columns():
    with pytest.raises(ShapeMismatchError):
        order_stat_vector(np.zeros((2, 2)), OrderStatSelector(r=1, n=3))


def test_sample_array_yields_matrices():
    spec = validate_spec(2, 2, np.eye(4))
    samples = list(sample_array(spec, seed=5, count=7, chunk_size=3))
    assert len(samples) == 7
    assert all(sample.shape == (2, 2) for sample in samples)
    again = list(sample_array(spec, seed=5, count=7, chunk_size=3))
    assert np.array_equal(samples[6], again[6])


def test_verify_example_matches_the_closed_form(column_pair):
    delta = estimate_delta(*column_pair, SINGLE, ORIGIN, n_samples=40_000, seed=11)
    assert delta.within(1.0 / 12.0, k=4.0)
    assert delta.diagnostics["p_x"] == pytest.approx(1.0 / 3.0, abs=0.02)


def test_delta_is_identical_across_worker_counts(column_pair):
    kwargs = dict(n_samples=10_000, seed=3, chunk_size=1000)
    one = estimate_delta(*column_pair, SINGLE, ORIGIN, workers=1, **kwargs)
    four = estimate_delta(*column_pair, SINGLE, ORIGIN, workers=4, **kwargs)
    assert one == four


def test_common_random_numbers_cancel_for_equal_arrays(column_pair):
    spec = column_pair[0]
    delta = estimate_delta(
        spec, spec, SINGLE, ORIGIN, n_samples=2000, seed=9, crn=True
    )
    assert delta.value == 0.0


@pytest.mark.parametrize("antithetic", [True, False])
def test_prob_le_against_the_oracle(antithetic):
    spec = pair_spec(1, 2, 0.5)
    u = ThresholdVector(u=[0.3])
    for r in (1, 2):
        sel = OrderStatSelector(r=r, n=2)
        estimate = estimate_prob_le(
            spec, sel, u, n_samples=20_000, seed=21 + r, antithetic=antithetic
        )
        assert estimate.within(exact_prob_small(spec, sel, u), k=4.0)
        assert estimate.n_samples == 20_000


def test_prob_le_is_monotone_in_each_threshold_under_a_shared_seed():
    spec = validate_spec(2, 2, 0.6 * np.eye(4) + 0.4)
    sel = OrderStatSelector(r=1, n=2)
    base = np.array([-0.3, 0.2])
    low = estimate_prob_le(spec, sel, ThresholdVector(u=base.tolist()), 5000, seed=8)
    for i in range(2):
        for step in (0.05, 0.5):
            raised = base.copy()
            raised[i] += step
            thresholds = ThresholdVector(u=raised.tolist())
            high = estimate_prob_le(spec, sel, thresholds, 5000, seed=8)
            assert high.value >= low.value


def test_prob_le_rejects_tiny_budgets(column_pair):
    with pytest.raises(InputValidationError):
        estimate_prob_le(column_pair[0], SINGLE, ORIGIN, n_samples=50, seed=1)


def test_theta_log_matches_the_ratio(column_pair):
    theta = estimate_theta_log(*column_pair, SINGLE, ORIGIN, n_samples=40_000, seed=4)
    assert theta.within(np.log(4.0 / 3.0), k=4.0)
    assert theta.value <= np.log(1.5)


def test_theta_log_reports_starved_sides(column_pair):
    deep = ThresholdVector(u=[-5.0, -5.0])
    with pytest.raises(StarvedRatioError) as excinfo:
        estimate_theta_log(*column_pair, SINGLE, deep, n_samples=1000, seed=2)
    assert excinfo.value.side == "X"


def test_exact_prob_small_shapes():
    one = validate_spec(1, 1, [[1.0]])
    assert exact_prob_small(one, SINGLE, ThresholdVector(u=[1.0])) == pytest.approx(
        float(std_normal_cdf(1.0))
    )
    column = pair_spec(2, 1, 0.5)
    assert exact_prob_small(column, SINGLE, ORIGIN) == pytest.approx(1.0 / 3.0)
    row = pair_spec(1, 2, 0.5)
    u = ThresholdVector(u=[0.4])
    both = bivariate_cdf(0.4, 0.4, 0.5)
    top = OrderStatSelector(r=1, n=2, convention=Convention.DESCENDING)
    bottom = OrderStatSelector(r=1, n=2)
    assert exact_prob_small(row, top, u) == pytest.approx(both)
    assert exact_prob_small(row, bottom, u) == pytest.approx(
        2.0 * float(std_normal_cdf(0.4)) - both
    )


def test_exact_prob_small_rejects_larger_shapes():
    spec = validate_spec(2, 2, np.eye(4))
    with pytest.raises(UnsupportedShapeError):
        exact_prob_small(spec, OrderStatSelector(r=1, n=2), ORIGIN)


@pytest.mark.slow
def test_oracle_equivalence_over_random_shapes():
    rng = np.random.default_rng(2024)
    agree = 0
    for case in range(50):
        d, n = [(1, 1), (2, 1), (1, 2)][case % 3]
        rho = float(rng.uniform(-0.9, 0.9))
        spec = validate_spec(1, 1, [[1.0]]) if d * n == 1 else pair_spec(d, n, rho)
        u = ThresholdVector(u=rng.uniform(-1.5, 1.5, size=d).tolist())
        sel = OrderStatSelector(r=int(rng.integers(1, n + 1)), n=n)
        estimate = estimate_prob_le(spec, sel, u, n_samples=200_000, seed=case)
        agree += estimate.within(exact_prob_small(spec, sel, u), k=3.5)
    assert agree >= 48
