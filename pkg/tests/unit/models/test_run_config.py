# tests/unit/models/test_run_config.py
import pytest
from pydantic import ValidationError

from core.exceptions import InputValidationError
from models.run_config import (
    BoundsParams,
    ConstantsParams,
    GumbelParams,
    LowtailParams,
    RunConfig,
    Subcommand,
    parse_grid_spec,
)


@pytest.mark.parametrize(
    "text,expected",
    [
        ("lin:2:10:5", [2.0, 4.0, 6.0, 8.0, 10.0]),
        ("log:1:100:3", [1.0, 10.0, 100.0]),
        ("geom:1:1000:10", [1.0, 10.0, 100.0, 1000.0]),
        ("geom:1.0:0.5:0.5", [1.0, 0.5]),
        ("0.5, 1, 2", [0.5, 1.0, 2.0]),
    ],
)
def test_parse_grid_spec(text, expected):
    assert parse_grid_spec(text) == pytest.approx(expected)


@pytest.mark.parametrize("text", ["geom:1:10:1", "lin:a:b:3", "geom:0:1:2"])
def test_parse_grid_spec_rejects_bad_specs(text):
    with pytest.raises(InputValidationError):
        parse_grid_spec(text)


def test_default_lowtail_grid_is_geometric():
    params = LowtailParams(alpha=1.0, n=1, r=1)
    assert params.x_grid[0] == pytest.approx(1.0)
    assert params.x_grid[-1] >= 0.05
    assert params.grid_m >= 2


def test_bounds_params_parse_threshold_list():
    params = BoundsParams(cov_x="x.json", cov_y="y.json", r=1, u="-1,0.5")
    assert params.u == [-1.0, 0.5]


def test_params_reject_unknown_keys():
    with pytest.raises(ValidationError):
        LowtailParams(alpah=1.0, n=1, r=1)


@pytest.mark.parametrize(
    "fields",
    [{"variant": "b"}, {"variant": "c"}, {"n": 1, "r": 2}],
)
def test_gumbel_params_cross_checks(fields):
    with pytest.raises(ValidationError):
        GumbelParams(**fields)


def test_constants_params_need_a_constant_source():
    with pytest.raises(ValidationError):
        ConstantsParams(n=1, r=1, alpha=1.0, t=100.0)
    assert ConstantsParams(n=1, r=1, alpha=1.0, t=100.0, calibrate=True).calibrate


def test_run_config_leaves_workers_out_of_dumps():
    config = RunConfig(
        subcommand=Subcommand.CONSTANTS,
        params=ConstantsParams(n=1, r=1, alpha=1.0, t=100.0, a_const=1.0),
        seed=3,
        workers=4,
    )
    dumped = config.model_dump(mode="json")
    assert "workers" not in dumped
    assert dumped["params"]["a_const"] == 1.0
    assert dumped["output"]["format"] == "json"
