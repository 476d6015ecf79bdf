# tests/unit/models/test_paths.py
import numpy as np
import pytest
from pydantic import ValidationError

from core.exceptions import InputValidationError
from models.experiment_results import ExponentFit, LadderPoint, NormingConstants
from models.paths import (
    CorrelationModel,
    GridSpec,
    ModelKind,
    ModelParameterError,
    SampledPath,
    Spacing,
)


def test_uniform_grid_points_and_refinement():
    grid = GridSpec(t0=0.0, t1=1.0, m=5)
    assert np.allclose(grid.points, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert grid.step == pytest.approx(0.25)
    finer = grid.refined(2)
    assert finer.m == 17
    assert np.allclose(finer.points[::4], grid.points)


def test_exponential_grid_points():
    grid = GridSpec(t0=1.0, t1=np.e**2, m=3, spacing=Spacing.EXPONENTIAL)
    assert np.allclose(np.log(grid.points), [0.0, 1.0, 2.0])


@pytest.mark.parametrize(
    "fields",
    [
        {"t0": 1.0, "t1": 1.0, "m": 3},
        {"t0": 0.0, "t1": 1.0, "m": 3, "spacing": Spacing.EXPONENTIAL},
    ],
)
def test_grid_rejects_bad_intervals(fields):
    with pytest.raises(InputValidationError):
        GridSpec(**fields)


def test_grid_needs_two_points():
    with pytest.raises(ValidationError):
        GridSpec(t0=0.0, t1=1.0, m=1)


def test_sampled_path_checks_shape_and_values():
    grid = GridSpec(t0=0.0, t1=1.0, m=3)
    path = SampledPath(grid=grid, values=[0.0, 1.0, 2.0])
    assert path.model_dump()["values"] == [0.0, 1.0, 2.0]
    with pytest.raises(InputValidationError):
        SampledPath(grid=grid, values=[0.0, 1.0])
    with pytest.raises(InputValidationError):
        SampledPath(grid=grid, values=[0.0, np.nan, 1.0])


@pytest.mark.parametrize(
    "fields",
    [
        {"kind": ModelKind.FBM, "alpha": 2.0},
        {"kind": ModelKind.POWER_EXP, "alpha": 2.5},
        {"kind": ModelKind.POWER_EXP, "alpha": 1.0, "scale": 0.0},
        {"kind": ModelKind.SELF_SIMILAR_BETA, "beta": 0.0},
        {"kind": ModelKind.SELF_SIMILAR_BETA, "beta": 0.5, "alpha": 1.5},
        {"kind": ModelKind.CUSTOM_TABLE, "alpha": 1.0, "table_lags": [0.0]},
        {
            "kind": ModelKind.CUSTOM_TABLE,
            "alpha": 1.0,
            "table_lags": [0.0, 1.0],
            "table_rho": [0.9, 0.5],
        },
    ],
)
def test_correlation_model_rejects_bad_parameters(fields):
    with pytest.raises(ModelParameterError):
        CorrelationModel(**fields)


def test_correlation_model_properties():
    beta = CorrelationModel(kind=ModelKind.SELF_SIMILAR_BETA, beta=0.5)
    assert beta.index == 1.0
    assert beta.self_similar and not beta.stationary
    power = CorrelationModel(kind=ModelKind.POWER_EXP, alpha=1.5)
    assert power.stationary
    assert "scale=1.0" in power.describe()


def test_norming_constants_check_a():
    log_t = np.e
    a = float(np.sqrt(2.0 * log_t))
    fields = dict(b=a, T=np.exp(np.e), n=1, r=1, alpha=2.0, A_const=1.0, D=1.0)
    assert NormingConstants(a=a, **fields).a == a
    with pytest.raises(ValidationError):
        NormingConstants(a=2.0 * a, **fields)


def test_exponent_fit_and_ladder_point():
    with pytest.raises(ValidationError):
        ExponentFit(
            slope=1.0,
            intercept=0.0,
            slope_stderr=0.1,
            x_window=(1.0, 1.0),
            n_points=3,
            r2=1.0,
        )
    assert LadderPoint(T=2.0, successes=0).censored
