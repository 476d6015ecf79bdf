# tests/unit/helpers/test_special_fn.py
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from core.exceptions import InputValidationError
from helpers.special_fn import (
    SQRT_2PI,
    CorrelationRangeError,
    bivariate_cdf,
    bivariate_pdf,
    h_function,
    plus_mean,
    std_normal_cdf,
    std_normal_pdf,
)

finite = st.floats(min_value=-20.0, max_value=20.0, allow_nan=False)


@pytest.mark.parametrize(
    "x,expected",
    [(0.0, 0.3989422804), (1.0, 0.2419707245), (-1.0, 0.2419707245)],
)
def test_std_normal_pdf_values(x, expected):
    assert std_normal_pdf(x) == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize(
    "x,expected", [(0.0, 0.5), (1.0, 0.8413447461), (40.0, 1.0), (-40.0, 0.0)]
)
def test_std_normal_cdf_values(x, expected):
    assert std_normal_cdf(x) == pytest.approx(expected, abs=1e-10)


@given(finite)
def test_std_normal_cdf_symmetry(x):
    assert std_normal_cdf(-x) == pytest.approx(1.0 - std_normal_cdf(x), abs=1e-12)


@pytest.mark.parametrize(
    "x,expected", [(0.0, 0.3989422804), (1.0, 1.0833154706), (-40.0, 0.0)]
)
def test_plus_mean_values(x, expected):
    assert plus_mean(x) == pytest.approx(expected, abs=1e-10)


@given(finite)
def test_plus_mean_reflection_identity(x):
    assert abs(plus_mean(x) - plus_mean(-x) - x) <= 1e-12


@given(st.floats(min_value=-5.0, max_value=5.0))
def test_plus_mean_derivative_is_phi(x):
    step = 1e-5
    slope = (plus_mean(x + step) - plus_mean(x - step)) / (2.0 * step)
    assert slope == pytest.approx(std_normal_cdf(x), abs=1e-6)


def test_plus_mean_is_nonnegative_and_increasing():
    xs = np.linspace(-40.0, 40.0, 2001)
    values = plus_mean(xs)
    assert np.all(values >= 0.0)
    assert np.all(np.diff(values) >= 0.0)


def test_h_function_at_zero_and_one():
    assert h_function(0.0) == pytest.approx(1.0)
    composed = SQRT_2PI * np.exp(0.5) * plus_mean(1.0)
    assert h_function(1.0) == pytest.approx(composed, rel=1e-12)
    assert h_function(2.0) > h_function(1.0)


def test_h_function_rejects_overflowing_arguments():
    with pytest.raises(InputValidationError):
        h_function(38.0)


@pytest.mark.parametrize(
    "x,y,rho,expected",
    [
        (0.0, 0.0, 0.0, 1.0 / (2.0 * np.pi)),
        (0.0, 0.0, 0.5, 1.0 / (2.0 * np.pi * np.sqrt(0.75))),
    ],
)
def test_bivariate_pdf_values(x, y, rho, expected):
    assert bivariate_pdf(x, y, rho) == pytest.approx(expected, rel=1e-12)


def test_bivariate_pdf_symmetry_and_range():
    assert bivariate_pdf(0.3, -1.2, 0.4) == pytest.approx(bivariate_pdf(-1.2, 0.3, 0.4))
    with pytest.raises(CorrelationRangeError):
        bivariate_pdf(0.0, 0.0, 1.0)


@pytest.mark.parametrize(
    "x,y,rho,expected",
    [
        (0.0, 0.0, 0.0, 0.25),
        (0.0, 0.0, 0.5, 1.0 / 3.0),
        (0.0, 0.0, -1.0, 0.0),
        (0.0, 0.0, 1.0, 0.5),
        (0.0, 0.0, -0.5, 0.25 + np.arcsin(-0.5) / (2.0 * np.pi)),
    ],
)
def test_bivariate_cdf_values(x, y, rho, expected):
    assert bivariate_cdf(x, y, rho) == pytest.approx(expected, abs=1e-10)


def test_bivariate_cdf_independence_is_product():
    expected = std_normal_cdf(0.7) * std_normal_cdf(-0.4)
    assert bivariate_cdf(0.7, -0.4, 0.0) == pytest.approx(expected, abs=1e-12)


@given(
    st.floats(min_value=-3.0, max_value=3.0),
    st.floats(min_value=-3.0, max_value=3.0),
    st.floats(min_value=-0.95, max_value=0.95),
)
def test_bivariate_cdf_rho_derivative_is_density(x, y, rho):
    step = 1e-5
    slope = (bivariate_cdf(x, y, rho + step) - bivariate_cdf(x, y, rho - step)) / (
        2.0 * step
    )
    assert slope == pytest.approx(bivariate_pdf(x, y, rho), abs=1e-6)


def test_bivariate_cdf_is_monotone():
    grid = np.linspace(-2.0, 2.0, 9)
    for rho in (-0.9, -0.3, 0.0, 0.4, 0.95):
        values = [bivariate_cdf(x, 0.5, rho) for x in grid]
        assert np.all(np.diff(values) >= -1e-12)
    values = [bivariate_cdf(0.2, -0.3, rho) for rho in np.linspace(-0.99, 0.99, 21)]
    assert np.all(np.diff(values) >= -1e-12)


def test_bivariate_cdf_rejects_out_of_range_correlation():
    with pytest.raises(CorrelationRangeError):
        bivariate_cdf(0.0, 0.0, 1.5)
