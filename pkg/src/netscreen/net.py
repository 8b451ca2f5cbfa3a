"""Commute network of counties built from pairwise traffic distances.

Off-diagonal weights fall off with the squared distance, ``w_ij = lam / L_ij**2``,
and each diagonal entry takes up the remainder so that every row sums to one.
``lam`` carries units of distance squared, so it must be expressed in the same
length unit as the distance table.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AsymmetryError,
    LabelMismatch,
    NonPositiveDistance,
    NonPositivePopulation,
    ParseError,
    ValidationError,
    WeightOutOfRange,
)
from .tables import parse_float, read_rows

ASYMMETRY_TOL = 0.01
ROW_SUM_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DistanceTable:
    labels: tuple[str, ...]
    L: np.ndarray = field(repr=False)

    def __post_init__(self):
        L = _readonly(self.L)
        labels = tuple(str(x) for x in self.labels)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "labels", labels)
        n = len(labels)
        if L.shape != (n, n):
            raise ValidationError(f"distance matrix has shape {L.shape}, expected ({n}, {n})")
        if any(not lab for lab in labels) or len(set(labels)) != n:
            raise ValidationError("county labels must be unique and non-empty")
        if not np.all(np.isfinite(L)):
            raise ValidationError("distance matrix contains non-finite values")
        off = ~np.eye(n, dtype=bool)
        if np.any(L[off] <= 0):
            i, j = np.argwhere((L <= 0) & off)[0]
            raise NonPositiveDistance(f"distance {labels[i]}-{labels[j]} is {L[i, j]}, must be > 0")
        if not np.array_equal(L, L.T):
            raise AsymmetryError("distance matrix must be symmetric")

    @property
    def n(self) -> int:
        return len(self.labels)

    def permuted(self, order) -> "DistanceTable":
        order = list(order)
        return DistanceTable(tuple(self.labels[k] for k in order), self.L[np.ix_(order, order)])


@dataclass(frozen=True)
class CommuteWeights:
    W: np.ndarray = field(repr=False)
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "W", _readonly(self.W))

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @classmethod
    def identity(cls, n: int) -> "CommuteWeights":
        return cls(np.eye(n), 0.0)


def _inverse_square(dist: DistanceTable) -> np.ndarray:
    off = ~np.eye(dist.n, dtype=bool)
    out = np.zeros((dist.n, dist.n))
    out[off] = 1.0 / dist.L[off] ** 2
    return out


def lambda_max(dist: DistanceTable) -> float:
    """Largest ``lam`` for which :func:`build_weights` still yields valid weights."""
    if dist.n == 1:
        return np.inf
    return float(1.0 / _inverse_square(dist).sum(axis=1).max())


def build_weights(dist: DistanceTable, lam: float) -> CommuteWeights:
    """Weight matrix of the commute network for scale parameter ``lam``.

    Raises :class:`WeightOutOfRange` when ``lam`` is so large that an
    off-diagonal weight exceeds 1 or a diagonal weight turns negative.
    """
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0:
        raise ValidationError(f"lambda must be a finite non-negative number, got {lam}")
    n = dist.n
    W = lam * _inverse_square(dist)
    if np.any(W > 1.0):
        raise WeightOutOfRange(f"lambda={lam} gives an off-diagonal weight of {W.max():.6g} > 1")
    diag = 1.0 - W.sum(axis=1)
    if np.any(diag < 0):
        i = int(np.argmin(diag))
        raise WeightOutOfRange(
            f"lambda={lam} gives a negative self-weight {diag[i]:.6g} for {dist.labels[i]}"
        )
    W[np.diag_indices(n)] = diag
    return CommuteWeights(W, lam)


def node_strength(weights: CommuteWeights) -> np.ndarray:
    """Off-diagonal row sums, one per county."""
    W = weights.W
    return W.sum(axis=1) - np.diag(W)


def lambda_for_strength(dist: DistanceTable, target: float) -> float:
    """``lam`` at which the largest node strength equals ``target``.

    Strengths are linear in ``lam``, so this is a single division.
    """
    lam = target / _inverse_square(dist).sum(axis=1).max()
    if lam > lambda_max(dist):
        raise WeightOutOfRange(f"strength {target} is not reachable with valid weights")
    return float(lam)


def load_distance_table(path) -> DistanceTable:
    """Read a square distance table with labels in the first row and column.

    Asymmetric entries are averaged when they differ by at most 1% of their
    mean; larger discrepancies raise :class:`AsymmetryError`.
    """
    rows = read_rows(path)
    header = rows[0][1:]
    n = len(header)
    body = rows[1:]
    if len(body) != n:
        raise ParseError(f"expected {n} data rows, found {len(body)}", path=path)
    L = np.zeros((n, n))
    for r, row in enumerate(body):
        if len(row) != n + 1:
            raise ParseError(f"expected {n + 1} cells, found {len(row)}", path=path, line=r + 2)
        if row[0] != header[r]:
            raise ParseError(
                f"row label {row[0]!r} does not match column label {header[r]!r}", path=path, line=r + 2
            )
        for c, cell in enumerate(row[1:]):
            if r == c:
                continue
            L[r, c] = parse_float(cell, path=path, line=r + 2)

    off = ~np.eye(n, dtype=bool)
    if np.any(L[off] <= 0):
        i, j = np.argwhere((L <= 0) & off)[0]
        raise NonPositiveDistance(f"{path}: distance {header[i]}-{header[j]} is {L[i, j]}")
    mean = 0.5 * (L + L.T)
    rel = np.zeros_like(L)
    rel[off] = np.abs(L - L.T)[off] / mean[off]
    if rel.max() > ASYMMETRY_TOL:
        i, j = np.unravel_index(int(np.argmax(rel)), rel.shape)
        raise AsymmetryError(
            f"{path}: distances {header[i]}-{header[j]} differ by {100 * rel[i, j]:.2f}% "
            f"({L[i, j]} vs {L[j, i]})"
        )
    return DistanceTable(tuple(header), mean)


def load_population_table(path, labels=None) -> np.ndarray:
    """Read ``label, population`` rows (header required).

    When ``labels`` is given the result is reordered to match it.
    """
    rows = read_rows(path)
    body = rows[1:]
    names, values = [], []
    for r, row in enumerate(body):
        if len(row) != 2:
            raise ParseError(f"expected 2 cells, found {len(row)}", path=path, line=r + 2)
        v = parse_float(row[1], path=path, line=r + 2)
        if v != int(v):
            raise ParseError(f"population must be an integer, got {row[1]!r}", path=path, line=r + 2)
        if v < 1:
            raise NonPositivePopulation(f"{path}: population of {row[0]!r} is {row[1]}")
        names.append(row[0])
        values.append(int(v))
    if len(set(names)) != len(names):
        raise ParseError("duplicate county label", path=path)
    if labels is None:
        return np.array(values, dtype=float)
    labels = list(labels)
    if sorted(labels) != sorted(names):
        missing = set(labels) ^ set(names)
        raise LabelMismatch(f"{path}: labels differ from the distance table: {sorted(missing)}")
    lookup = dict(zip(names, values))
    return np.array([lookup[lab] for lab in labels], dtype=float)


def load_tables(distance_path, population_path) -> tuple[DistanceTable, np.ndarray]:
    dist = load_distance_table(Path(distance_path))
    N = load_population_table(Path(population_path), dist.labels)
    return dist, N
