import itertools
import math
from typing import Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


def monomial_table(n_vars: int, degree: int) -> np.ndarray:
    """All exponent vectors with total degree <= degree, graded then lexicographic."""
    rows = [e for e in itertools.product(range(degree + 1), repeat=n_vars) if sum(e) <= degree]
    rows.sort(key=lambda e: (sum(e), tuple(-v for v in e)))
    return np.asarray(rows, dtype=np.int64).reshape(-1, n_vars)


class MultiPoly(BaseModel):
    """Dense polynomial over all monomials of total degree <= degree.

    exponents is (C(n+d, d), n_vars) in graded order; coeffs lines up with it.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    n_vars: int = Field(ge=1)
    degree: int = Field(ge=1)
    exponents: np.ndarray
    coeffs: np.ndarray

    @model_validator(mode="after")
    def _check_table(self):
        expected = math.comb(self.n_vars + self.degree, self.degree)
        if self.exponents.shape != (expected, self.n_vars):
            raise ValueError(f"exponent table has shape {self.exponents.shape}, expected ({expected}, {self.n_vars})")
        if self.coeffs.shape != (expected,):
            raise ValueError(f"coefficient table has {self.coeffs.shape[0]} entries, expected {expected}")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("coefficients must be finite")
        return self

    @classmethod
    def from_terms(cls, terms: Dict[Tuple[int, ...], float], n_vars: int = None, degree: int = None) -> "MultiPoly":
        keys = list(terms)
        n_vars = n_vars or len(keys[0])
        degree = degree or max(2, max(sum(k) for k in keys))
        exps = monomial_table(n_vars, degree)
        index = {tuple(int(v) for v in row): i for i, row in enumerate(exps)}
        coeffs = np.zeros(len(exps))
        for k, c in terms.items():
            coeffs[index[tuple(k)]] = c
        return cls(n_vars=n_vars, degree=degree, exponents=exps, coeffs=coeffs)


class CriticalPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    location: List[float]
    gradient_norm: float
    hessian_eigenvalues: List[float]  # ascending
    index: float = Field(ge=0.0, le=1.0)  # fraction of negative eigenvalues
    degenerate: bool = False

    @property
    def is_minimum(self) -> bool:
        return not self.degenerate and self.index == 0.0


class CriticalSearch(BaseModel):
    model_config = ConfigDict(frozen=True)

    points: List[CriticalPoint]
    starts: int
    converged: int
    nonconverged_fraction: float

    @property
    def minima(self) -> List[CriticalPoint]:
        return [p for p in self.points if p.is_minimum]

    @property
    def degenerate(self) -> List[CriticalPoint]:
        return [p for p in self.points if p.degenerate]


class CensusResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_vars: int
    degree: int
    trials: int
    mean_critical_points: float
    critical_stderr: float
    mean_minima: float
    minima_fraction: float = Field(ge=0.0, le=1.0)
    minima_fraction_stderr: float
    degenerate_rate: float
    nonconverged_fraction: float
    bound_C: float
    within_bound: bool
    log_minima_shape: float  # -n^2 ln3 / 4 + (n+1)/2 ln(d-1)
    bound_note: str

    @model_validator(mode="after")
    def _ordered(self):
        if self.mean_minima > self.mean_critical_points:
            raise ValueError("mean minima cannot exceed mean critical points")
        return self


class ReluApproximation(BaseModel):
    """ReLU(x) ~ (x + q(x)) / 2 with q(x) = p(x^2) the minimax fit of |x| on [-1, 1]."""
    model_config = ConfigDict(frozen=True)

    degree: int = Field(ge=1)
    coefficients: List[float]     # ascending powers of x
    sqrt_chebyshev: List[float]   # p in the Chebyshev basis over t in [0, 1]
    abs_error: float              # levelled |x| error from the exchange
    sup_error: float              # measured ReLU error on the grid
    iterations: int

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p = np.polynomial.Chebyshev(self.sqrt_chebyshev, domain=[0.0, 1.0])
        return 0.5 * (x + p(x * x))
