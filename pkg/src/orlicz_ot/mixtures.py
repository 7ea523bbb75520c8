"""Gaussian and Laplace location mixtures: sampling and mixing measures.

Random streams: ``SeedSequence(seed)`` is split into ``1 + K`` children.
Child 0 draws the component labels (one uniform per sample, inverted
through the cumulative weights), child ``k + 1`` draws the kernel noise
for component ``k`` in sample order. Each child drives a PCG64 generator,
so a given (spec, n, seed) reproduces bit-for-bit on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import DiscreteMeasure, new_measure

KERNELS = ("gaussian", "laplace")


@dataclass(frozen=True, eq=False)
class MixtureSpec:
    kernel: str
    means: np.ndarray  # (K, d)
    scales: np.ndarray  # (K,), sigma for gaussian, diversity b for laplace
    weights: np.ndarray  # (K,)

    @classmethod
    def create(cls, kernel: str, means, scales, weights) -> MixtureSpec:
        if kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}, got {kernel!r}")
        mu = np.asarray(means, dtype=float)
        if mu.ndim == 1:
            mu = mu[:, None]
        s = np.asarray(scales, dtype=float).ravel()
        w = np.asarray(weights, dtype=float).ravel()
        if mu.ndim != 2 or not (mu.shape[0] == s.shape[0] == w.shape[0]) or mu.shape[0] == 0:
            raise ValueError("means, scales and weights need one entry per component")
        if np.any(s < 0):
            raise ValueError("scales must be nonnegative")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"mixture weights must lie on the simplex, got sum {w.sum()!r}")
        for a in (mu, s, w):
            a.setflags(write=False)
        return cls(kernel, mu, s, w)

    @classmethod
    def from_dict(cls, data: dict) -> MixtureSpec:
        return cls.create(data["kernel"], data["means"], data["scales"], data["weights"])

    def to_dict(self) -> dict:
        means = self.means[:, 0] if self.means.shape[1] == 1 else self.means
        return {
            "kernel": self.kernel,
            "means": means.tolist(),
            "scales": self.scales.tolist(),
            "weights": self.weights.tolist(),
        }

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]


# the two mixtures of the transport-plan comparison experiment
NORMAL_3 = MixtureSpec.create("gaussian", [3.0, 4.0, 5.0], [0.3, 0.3, 0.3], [0.37, 0.30, 0.33])
LAPLACE_4 = MixtureSpec.create(
    "laplace", [7.0, 8.0, 9.0, 6.0], [0.3, 0.3, 0.3, 0.1], [0.30, 0.32, 0.32, 0.06]
)
OUTLIER_MEAN = 6.0


def sample_points(spec: MixtureSpec, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw n points; returns (points (n, d), component labels (n,))."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k, d = spec.means.shape
    children = np.random.SeedSequence(seed).spawn(k + 1)
    labels = np.random.Generator(np.random.PCG64(children[0])).choice(k, size=n, p=spec.weights)
    points = np.empty((n, d))
    for comp in range(k):
        idx = np.flatnonzero(labels == comp)
        rng = np.random.Generator(np.random.PCG64(children[comp + 1]))
        if spec.kernel == "gaussian":
            noise = rng.standard_normal((idx.size, d))
        else:
            noise = rng.laplace(0.0, 1.0, (idx.size, d))
        points[idx] = spec.means[comp] + spec.scales[comp] * noise
    return points, labels


def sample(spec: MixtureSpec, n: int, seed: int) -> DiscreteMeasure:
    """Empirical measure of n draws, each with weight 1/n (duplicates kept)."""
    points, _ = sample_points(spec, n, seed)
    return new_measure(points, np.full(n, 1.0 / n))


def mixing_measure(spec: MixtureSpec) -> DiscreteMeasure:
    """sum_k w_k delta_{mean_k}."""
    return new_measure(spec.means, spec.weights)


def nearest_component(spec: MixtureSpec, points) -> np.ndarray:
    """Index of the closest component mean for each point."""
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    dist = np.linalg.norm(x[:, None, :] - spec.means[None, :, :], axis=2)
    return np.argmin(dist, axis=1)
