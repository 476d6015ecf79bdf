# tests/unit/helpers/test_kernels.py
import numpy as np
import pytest

from core.exceptions import InputValidationError
from helpers.kernels import (
    beta_kernel,
    fbm_cov,
    gram_matrix,
    parse_model_spec,
    stationary_corr,
)
from models.paths import CorrelationModel, ModelKind, ModelParameterError


@pytest.mark.parametrize(
    "s,t,alpha,expected",
    [
        (1.0, 1.0, 1.0, 1.0),
        (0.5, 1.0, 1.0, 0.5),
        (0.0, 0.7, 0.6, 0.0),
        (2.0, 3.0, 1.5, 0.5 * (2.0**1.5 + 3.0**1.5 - 1.0)),
    ],
)
def test_fbm_cov_values(s, t, alpha, expected):
    assert fbm_cov(s, t, alpha) == pytest.approx(expected)


def test_fbm_cov_scales_with_self_similarity():
    alpha, c = 0.7, 3.0
    assert fbm_cov(c * 0.4, c * 0.9, alpha) == pytest.approx(
        c**alpha * fbm_cov(0.4, 0.9, alpha)
    )


def test_fbm_cov_rejects_bad_input():
    with pytest.raises(ModelParameterError):
        fbm_cov(1.0, 1.0, 2.0)
    with pytest.raises(InputValidationError):
        fbm_cov(-1.0, 1.0, 1.0)


def test_beta_kernel_has_unit_index():
    t = np.array([0.1, 1.0, 7.0])
    assert np.allclose(beta_kernel(t, t, 0.5), t)
    assert beta_kernel(0.0, 0.0, 0.5) == 0.0


def test_stationary_corr_power_exp_and_table():
    model = CorrelationModel(kind=ModelKind.POWER_EXP, alpha=1.0, scale=2.0)
    assert stationary_corr(model, [0.0, 2.0])[1] == pytest.approx(np.exp(-1.0))
    table = CorrelationModel(
        kind=ModelKind.CUSTOM_TABLE,
        alpha=1.0,
        table_lags=[0.0, 1.0],
        table_rho=[1.0, 0.5],
    )
    assert np.allclose(stationary_corr(table, [0.5, 3.0]), [0.75, 0.5])


def test_gram_matrix_of_fbm_has_time_variance():
    model = CorrelationModel(kind=ModelKind.FBM, alpha=1.0)
    points = np.linspace(0.0, 1.0, 5)
    gram = gram_matrix(model, points)
    assert np.allclose(np.diag(gram), points)
    assert np.allclose(gram, np.minimum.outer(points, points))


@pytest.mark.parametrize(
    "text,kind,alpha",
    [
        ("fbm:alpha=1", ModelKind.FBM, 1.0),
        ("power_exp:alpha=1.5,scale=2", ModelKind.POWER_EXP, 1.5),
        ("beta:beta=0.5", ModelKind.SELF_SIMILAR_BETA, None),
    ],
)
def test_parse_model_spec(text, kind, alpha):
    model = parse_model_spec(text)
    assert model.kind == kind
    assert model.alpha == alpha


def test_parse_model_spec_reads_table_file(tmp_path):
    table = tmp_path / "corr.csv"
    table.write_text("lag,rho\n0,1\n1,0.6\n2,0.2\n")
    model = parse_model_spec(f"table:file={table},alpha=1")
    assert model.kind == ModelKind.CUSTOM_TABLE
    assert model.table_rho == [1.0, 0.6, 0.2]


@pytest.mark.parametrize(
    "text",
    ["brownian:alpha=1", "fbm:alpah=1", "fbm:alpha", "fbm:alpha=x", "fbm:alpha=2"],
)
def test_parse_model_spec_rejects_bad_specs(text):
    with pytest.raises(InputValidationError):
        parse_model_spec(text)
