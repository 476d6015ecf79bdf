from enum import Enum

import numpy as np
from pydantic import BaseModel, PositiveInt, field_serializer, field_validator
from pydantic import model_validator

from core.exceptions import InputValidationError

SYMMETRY_TOL = 1e-12
DIAGONAL_TOL = 1e-12
EIGENVALUE_REL_TOL = 1e-10


class CovarianceValidationError(InputValidationError):
    """
    Raised when a covariance matrix violates one or more array invariants.
    All violations are collected before raising.
    """

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("invalid covariance: " + "; ".join(violations))


class ShapeMismatchError(InputValidationError):
    """
    Raised when two arrays or a threshold vector do not share dimensions.
    """


class Convention(str, Enum):
    ASCENDING = "asc"
    DESCENDING = "desc"


def covariance_violations(d: int, n: int, cov: np.ndarray) -> list[str]:
    """
    List every invariant a standard Gaussian array covariance violates.

    :param d: Row count
    :type d: int
    :param n: Column count
    :type n: int
    :param cov: Candidate dn x dn correlation matrix
    :type cov: np.ndarray
    :return: Human readable violations, empty when valid
    :rtype: list[str]
    """
    size = d * n
    if cov.ndim != 2 or cov.shape != (size, size):
        return [f"dimension mismatch: expected {size}x{size}, got {cov.shape}"]
    if not np.all(np.isfinite(cov)):
        return ["non-finite entries"]

    violations = []
    asymmetry = float(np.max(np.abs(cov - cov.T)))
    if asymmetry > SYMMETRY_TOL:
        violations.append(f"asymmetry: max |C - C^T| = {asymmetry:.3e}")

    diag_dev = float(np.max(np.abs(np.diag(cov) - 1.0)))
    if diag_dev > DIAGONAL_TOL:
        violations.append(f"non-unit diagonal: max |C_pp - 1| = {diag_dev:.3e}")

    if np.any(np.abs(cov) > 1.0):
        worst = float(np.max(np.abs(cov)))
        violations.append(f"entry outside [-1, 1]: max |C_pq| = {worst:.6g}")

    eigenvalues = np.linalg.eigvalsh((cov + cov.T) / 2.0)
    smallest, largest = float(eigenvalues[0]), float(eigenvalues[-1])
    if smallest < -EIGENVALUE_REL_TOL * max(largest, 0.0):
        violations.append(
            f"eigenvalue below tolerance: min {smallest:.3e} vs max {largest:.3e}"
        )
    return violations


class GaussianArraySpec(BaseModel):
    """
    A d x n standard Gaussian array. Entry (i, j), 1-based, sits at flat index
    (i - 1) * n + (j - 1) of the dn x dn correlation matrix.
    """

    d: PositiveInt
    n: PositiveInt
    cov: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @field_validator("cov", mode="before")
    @classmethod
    def _as_float_array(cls, value) -> np.ndarray:
        return np.array(value, dtype=float)

    @model_validator(mode="after")
    def _check_invariants(self) -> "GaussianArraySpec":
        violations = covariance_violations(self.d, self.n, self.cov)
        if violations:
            raise CovarianceValidationError(violations)
        self.cov.setflags(write=False)
        return self

    @field_serializer("cov")
    def _serialize_cov(self, cov: np.ndarray) -> list[list[float]]:
        return cov.tolist()

    @property
    def size(self) -> int:
        return self.d * self.n

    @property
    def row_index(self) -> np.ndarray:
        return np.repeat(np.arange(self.d), self.n)

    @property
    def col_index(self) -> np.ndarray:
        return np.tile(np.arange(self.n), self.d)

    def flat_index(self, i: int, j: int) -> int:
        return (i - 1) * self.n + (j - 1)

    def sigma(self, i: int, j: int, l: int, k: int) -> float:
        return float(self.cov[self.flat_index(i, j), self.flat_index(l, k)])

    def row_block(self) -> np.ndarray:
        """
        The d x d matrix sigma_il := sigma_{i1,l1} used under column independence.
        """
        first_cols = np.arange(self.d) * self.n
        return np.array(self.cov[np.ix_(first_cols, first_cols)])

    def same_shape(self, other: "GaussianArraySpec") -> bool:
        return (self.d, self.n) == (other.d, other.n)


class OrderStatSelector(BaseModel):
    r: PositiveInt
    n: PositiveInt
    convention: Convention = Convention.ASCENDING

    class Config:
        frozen = True

    @model_validator(mode="after")
    def _check_rank(self) -> "OrderStatSelector":
        if self.r > self.n:
            raise ValueError(f"rank r={self.r} outside 1..{self.n}")
        return self

    def converted(self) -> "OrderStatSelector":
        flipped = (
            Convention.DESCENDING
            if self.convention == Convention.ASCENDING
            else Convention.ASCENDING
        )
        return OrderStatSelector(r=self.n - self.r + 1, n=self.n, convention=flipped)

    def as_convention(self, convention: Convention) -> "OrderStatSelector":
        return self if self.convention == convention else self.converted()

    @property
    def ascending_rank(self) -> int:
        return self.as_convention(Convention.ASCENDING).r


class ThresholdVector(BaseModel):
    u: list[float]

    class Config:
        frozen = True

    def as_array(self) -> np.ndarray:
        return np.asarray(self.u, dtype=float)

    def check_length(self, d: int) -> np.ndarray:
        if len(self.u) != d:
            raise ShapeMismatchError(
                f"threshold vector has length {len(self.u)}, array has d={d} rows"
            )
        return self.as_array()
