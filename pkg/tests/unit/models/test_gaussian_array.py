# tests/unit/models/test_gaussian_array.py
import pytest
from hypothesis import given
from hypothesis import strategies as st
from pydantic import ValidationError

from models.bound_report import BoundKind, BoundReport, Condition
from models.gaussian_array import (
    Convention,
    GaussianArraySpec,
    OrderStatSelector,
    ShapeMismatchError,
    ThresholdVector,
)
from models.mc_estimate import McEstimate


@st.composite
def selectors(draw):
    n = draw(st.integers(min_value=1, max_value=50))
    r = draw(st.integers(min_value=1, max_value=n))
    convention = draw(st.sampled_from(list(Convention)))
    return OrderStatSelector(r=r, n=n, convention=convention)


@given(selectors())
def test_convention_conversion_is_an_involution(sel):
    assert sel.converted().converted() == sel
    assert sel.converted().r == sel.n - sel.r + 1


def test_ascending_rank_of_the_maximum():
    top = OrderStatSelector(r=1, n=3, convention=Convention.DESCENDING)
    assert top.ascending_rank == 3
    assert OrderStatSelector(r=1, n=3).ascending_rank == 1


def test_selector_rejects_rank_above_n():
    with pytest.raises(ValidationError):
        OrderStatSelector(r=4, n=3)


def test_spec_is_read_only():
    spec = GaussianArraySpec(d=1, n=2, cov=[[1.0, 0.1], [0.1, 1.0]])
    with pytest.raises(ValueError):
        spec.cov[0, 1] = 0.5
    assert spec.model_dump()["cov"] == [[1.0, 0.1], [0.1, 1.0]]


def test_threshold_length_check():
    with pytest.raises(ShapeMismatchError):
        ThresholdVector(u=[0.0, 1.0]).check_length(3)


def test_bound_report_invariants():
    with pytest.raises(ValidationError):
        BoundReport(value=0.1, kind=BoundKind.THM1_SIGNED, applicable=False)
    with pytest.raises(ValidationError):
        BoundReport(value=-0.1, kind=BoundKind.THM1_ABS)
    report = BoundReport(
        value=-0.1,
        kind=BoundKind.PROP2_LOG_RATIO,
        applicable=False,
        violated_conditions=[Condition.SIGN_ORDER],
    )
    assert report.table_row()["violated_conditions"] == "sign_order"


def test_mc_estimate_within():
    estimate = McEstimate(value=0.5, stderr=0.01, n_samples=100, seed=1)
    assert estimate.within(0.52)
    assert not estimate.within(0.6)
    assert estimate.within(0.6, slack=0.1)
