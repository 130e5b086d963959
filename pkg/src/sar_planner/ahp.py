"""Analytic hierarchy process: pairwise matrices to objective weights.

Weights are ordered (time, energy, obstacle, human) throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .enums import ConfigError, Label

# Saaty's random consistency index by matrix order.
RANDOM_INDEX = {1: 0.0, 2: 0.0, 3: 0.58, 4: 0.90, 5: 1.12, 6: 1.24, 7: 1.32, 8: 1.41, 9: 1.45, 10: 1.49}

WEIGHT_FLOOR = 1e-4


class ConvergenceError(ArithmeticError):
    def __init__(self, iterations: int, change: float):
        super().__init__(f"power iteration did not converge after {iterations} iterations (last change {change:.3e})")
        self.iterations = iterations
        self.change = change


@dataclass(frozen=True)
class WeightVector:
    w_t: float
    w_e: float
    w_o: float
    w_h: float

    @classmethod
    def from_array(cls, values) -> "WeightVector":
        values = [float(v) for v in values]
        if len(values) != 4:
            raise ValueError(f"weight vector needs 4 entries, got {len(values)}")
        return cls(*values)

    def as_array(self) -> np.ndarray:
        return np.array([self.w_t, self.w_e, self.w_o, self.w_h])

    def __iter__(self):
        return iter((self.w_t, self.w_e, self.w_o, self.w_h))

    @property
    def total(self) -> float:
        return self.w_t + self.w_e + self.w_o + self.w_h

    def normalized(self) -> "WeightVector":
        arr = self.as_array()
        if np.any(arr < 0) or arr.sum() <= 0:
            raise ValueError(f"weights must be non-negative with a positive sum: {arr}")
        return WeightVector.from_array(arr / arr.sum())

    def without_human(self) -> "WeightVector":
        """Drop the human weight, spreading it proportionally over the rest."""
        rest = self.w_t + self.w_e + self.w_o
        if rest <= 0:
            return WeightVector(1 / 3, 1 / 3, 1 / 3, 0.0)
        return WeightVector(self.w_t / rest, self.w_e / rest, self.w_o / rest, 0.0)


UNIFORM_WEIGHTS = WeightVector(0.25, 0.25, 0.25, 0.25)

# Published per-context weights; rows are left exactly as printed (L4 sums to 0.999).
CONTEXT_WEIGHTS: dict[Label, WeightVector] = {
    Label.L1: WeightVector(0.417, 0.417, 0.083, 0.083),
    Label.L2: WeightVector(0.083, 0.083, 0.417, 0.417),
    Label.L3: WeightVector(0.136, 0.191, 0.042, 0.631),
    Label.L4: WeightVector(0.103, 0.137, 0.724, 0.035),
}


class CategoryWeightTable(Mapping):
    """Label -> normalized weight row. Rows are renormalized at construction."""

    def __init__(self, rows: Mapping[Label, WeightVector] | None = None):
        rows = dict(CONTEXT_WEIGHTS if rows is None else rows)
        missing = set(Label) - set(rows)
        if missing:
            raise ConfigError(f"weight table missing labels: {sorted(m.name for m in missing)}")
        self.raw = {Label(k): v for k, v in rows.items()}
        self._rows = {k: v.normalized() for k, v in self.raw.items()}
        self._matrix = np.stack([self._rows[label].as_array() for label in Label])

    @classmethod
    def uniform(cls) -> "CategoryWeightTable":
        return cls({label: UNIFORM_WEIGHTS for label in Label})

    def __getitem__(self, label: Label) -> WeightVector:
        return self._rows[Label(label)]

    def __iter__(self):
        return iter(Label)

    def __len__(self) -> int:
        return len(self._rows)

    def as_matrix(self) -> np.ndarray:
        """(4, 4) array, row per label in label order."""
        return self._matrix.copy()


DEFAULT_TABLE = CategoryWeightTable()


def weights_for(label: Label, table: CategoryWeightTable = DEFAULT_TABLE) -> WeightVector:
    return table[label]


def check_reciprocal(matrix, tol: float = 1e-9) -> np.ndarray:
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"pairwise matrix must be square, got shape {a.shape}")
    if np.any(a <= 0) or not np.all(np.isfinite(a)):
        raise ValueError("pairwise matrix entries must be finite and positive")
    if not np.allclose(np.diag(a), 1.0, rtol=0, atol=tol):
        raise ValueError("pairwise matrix diagonal must be 1")
    if not np.allclose(a * a.T, 1.0, rtol=0, atol=tol):
        raise ValueError("pairwise matrix is not reciprocal (a_ji != 1/a_ij)")
    return a


def principal_eigenvector(
    matrix, tol: float = 1e-10, max_iter: int = 10_000
) -> tuple[np.ndarray, float]:
    """Power iteration on a positive matrix.

    Returns the eigenvector normalized to unit sum and the Rayleigh-quotient
    estimate of the dominant eigenvalue. Does not check reciprocity.
    """
    a = np.asarray(matrix, dtype=float)
    w = np.full(a.shape[0], 1.0 / a.shape[0])
    change = np.inf
    for _ in range(max_iter):
        nxt = a @ w
        nxt /= nxt.sum()
        change = float(np.max(np.abs(nxt - w)))
        w = nxt
        if change < tol:
            aw = a @ w
            return w, float(w @ aw / (w @ w))
    raise ConvergenceError(max_iter, change)


def derive_weights(matrix, tol: float = 1e-10, max_iter: int = 10_000) -> tuple[WeightVector, float]:
    a = check_reciprocal(matrix)
    if a.shape[0] != 4:
        raise ValueError(f"objective weights need a 4x4 matrix, got {a.shape}")
    w, lam = principal_eigenvector(a, tol, max_iter)
    return WeightVector.from_array(w), lam


def consistency_ratio(matrix, lambda_max: float) -> float:
    n = np.asarray(matrix).shape[0]
    if n < 3:
        return 0.0
    ci = (lambda_max - n) / (n - 1)
    return ci / RANDOM_INDEX[n]


def consistent_matrix(weights) -> np.ndarray:
    w = np.maximum(np.asarray(list(weights), dtype=float), WEIGHT_FLOOR)
    return w[:, None] / w[None, :]


def calibrate_matrices(table: CategoryWeightTable = DEFAULT_TABLE) -> dict[Label, np.ndarray]:
    """Consistent matrices a_ij = w_i / w_j reproducing each table row."""
    return {label: consistent_matrix(table[label]) for label in Label}
