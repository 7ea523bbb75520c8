"""Discrete probability measures, ground costs and transport plans."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

WEIGHT_CLAMP = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finitely supported probability measure sum_i w_i delta_{x_i}.

    Build it with :func:`new_measure`; the constructor assumes the arrays
    are already validated.
    """

    atoms: np.ndarray  # (k, d)
    weights: np.ndarray  # (k,)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def entropy(self) -> float:
        return shannon_entropy(self.weights)

    def translate(self, shift) -> DiscreteMeasure:
        return DiscreteMeasure(_frozen(self.atoms + np.asarray(shift, float)), self.weights)

    def scale(self, s: float) -> DiscreteMeasure:
        return DiscreteMeasure(_frozen(self.atoms * s), self.weights)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return (
            self.atoms.shape == other.atoms.shape
            and np.array_equal(self.atoms, other.atoms)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self) -> int:
        return hash((self.atoms.tobytes(), self.weights.tobytes()))

    def to_dict(self) -> dict:
        return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist()}


def new_measure(atoms, weights) -> DiscreteMeasure:
    """Validate, normalize and zero-filter a weighted point cloud.

    Scalars in ``atoms`` are read as 1-d points. Weights in
    ``[-1e-12, 0)`` are float noise and clamped to zero; anything more
    negative raises. Zero-weight atoms are dropped.
    """
    rows = [np.atleast_1d(np.asarray(a, dtype=float)) for a in atoms]
    w = np.asarray(weights, dtype=float).ravel()
    if len(rows) != w.shape[0]:
        raise ValueError(f"{len(rows)} atoms but {w.shape[0]} weights")
    if not rows:
        raise ValueError("a measure needs at least one atom")
    dims = {r.shape for r in rows}
    if len(dims) != 1 or rows[0].ndim != 1 or rows[0].shape[0] < 1:
        raise ValueError(f"atoms must share one dimension d >= 1, got shapes {sorted(dims)}")
    x = np.vstack(rows)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
        raise ValueError("atoms and weights must be finite")
    if np.any(w < -WEIGHT_CLAMP):
        raise ValueError(f"negative weight {w.min()!r}")
    w = np.where(w < 0, 0.0, w)
    total = w.sum()
    if total <= 0:
        raise ValueError("weights sum to zero")
    keep = w > 0
    return DiscreteMeasure(_frozen(x[keep]), _frozen(w[keep] / total))


def dirac(point) -> DiscreteMeasure:
    return new_measure([point], [1.0])


def shannon_entropy(p) -> float:
    """-sum p log p (natural log) with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


@dataclass(frozen=True, eq=False)
class CostMatrix:
    entries: np.ndarray
    max_entry: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


def pairwise_distances(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - y[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def cost_matrix(src: DiscreteMeasure, dst: DiscreteMeasure) -> CostMatrix:
    """Euclidean distances between the atoms of ``src`` (rows) and ``dst``."""
    if src.dim != dst.dim:
        raise ValueError(f"dimension mismatch: {src.dim} vs {dst.dim}")
    m = _frozen(pairwise_distances(src.atoms, dst.atoms))
    return CostMatrix(m, float(m.max()))


@dataclass(frozen=True, eq=False)
class TransportPlan:
    matrix: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray

    def __post_init__(self):
        k, kk = self.matrix.shape
        if self.row_marginal.shape != (k,) or self.col_marginal.shape != (kk,):
            raise ValueError("plan shape does not match its marginals")

    @property
    def total_mass(self) -> float:
        return float(self.matrix.sum())

    def entropy(self) -> float:
        return shannon_entropy(self.matrix)


def make_plan(matrix, row_marginal, col_marginal) -> TransportPlan:
    return TransportPlan(_frozen(matrix), _frozen(row_marginal), _frozen(col_marginal))


def product_plan(r, c) -> TransportPlan:
    r = np.asarray(r, float)
    c = np.asarray(c, float)
    return make_plan(np.outer(r, c), r, c)


def marginal_violation(plan: TransportPlan) -> float:
    """Largest absolute deviation of a row or column sum from its marginal."""
    rows = np.abs(plan.matrix.sum(axis=1) - plan.row_marginal)
    cols = np.abs(plan.matrix.sum(axis=0) - plan.col_marginal)
    return float(max(rows.max(initial=0.0), cols.max(initial=0.0)))


# ---------------------------------------------------------------- file formats


def load_measure(path) -> DiscreteMeasure:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    try:
        return new_measure(data["atoms"], data["weights"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"{path}: expected {{'atoms': [...], 'weights': [...]}}") from exc


def save_measure(measure: DiscreteMeasure, path) -> None:
    Path(path).write_text(json.dumps(measure.to_dict()) + "\n", encoding="utf-8")


def format_float(x: float) -> str:
    # shortest repr that round-trips; never more than 17 significant digits
    return repr(float(x))


def write_plan_csv(plan: TransportPlan, path) -> None:
    m = plan.matrix
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["i", "j", "mass"])
        for i, j in zip(*np.nonzero(m)):
            out.writerow([int(i), int(j), format_float(m[i, j])])


def read_plan_csv(path, row_marginal, col_marginal) -> TransportPlan:
    r = np.asarray(row_marginal, float)
    c = np.asarray(col_marginal, float)
    m = np.zeros((r.shape[0], c.shape[0]))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["i", "j", "mass"]:
            raise ValueError(f"{path}: header must be i,j,mass")
        for row in reader:
            m[int(row["i"]), int(row["j"])] = float(row["mass"])
    return make_plan(m, r, c)
