"""
Closed-form one-dimensional optimal transport and its sliced estimators.

Measures here are uniform-weight point clouds (every atom carries mass 1/T).
In one dimension both the two-marginal Wasserstein distance and the
barycentric multi-marginal Monge-Wasserstein distance are solved by sorting:
atoms of equal rank are matched. Higher-dimensional measures are handled by
projecting onto random directions and averaging the 1D costs (Monte-Carlo
slicing).

All arithmetic is float64. Every function is pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class DiscreteMeasure:
    """Uniform-weight point cloud of T atoms in R^d, stored as a (T, d) array."""

    atoms: np.ndarray

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=np.float64)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        if atoms.ndim != 2:
            raise ValueError(f"atoms must be a (T, d) array, got shape {atoms.shape}")
        if atoms.shape[0] < 1 or atoms.shape[1] < 1:
            raise ValueError(f"a measure needs at least one atom of dimension >= 1, got {atoms.shape}")
        if not np.all(np.isfinite(atoms)):
            raise ValueError("atoms must be finite")
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def size(self) -> int:
        return self.atoms.shape[0]


@dataclass(frozen=True)
class ProjectionSet:
    """K unit directions on the sphere S^{d-1}, stored as a (K, d) array."""

    directions: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        dirs = np.array(self.directions, dtype=np.float64)
        if dirs.ndim != 2 or dirs.shape[0] < 1 or dirs.shape[1] < 1:
            raise ValueError(f"directions must be a non-empty (K, d) array, got shape {dirs.shape}")
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("every direction must have unit norm")
        dirs.setflags(write=False)
        object.__setattr__(self, "directions", dirs)

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    @property
    def count(self) -> int:
        return self.directions.shape[0]


@dataclass(frozen=True)
class BarycentricWeights:
    """A point of the probability simplex, one weight per marginal."""

    values: np.ndarray

    def __post_init__(self):
        lam = np.array(self.values, dtype=np.float64).ravel()
        if lam.size < 1:
            raise ValueError("weights must be non-empty")
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(lam.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {lam.sum()!r}")
        lam.setflags(write=False)
        object.__setattr__(self, "values", lam)

    @classmethod
    def uniform(cls, count: int) -> "BarycentricWeights":
        if count < 1:
            raise ValueError("count must be >= 1")
        return cls(np.full(count, 1.0 / count))

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class SortedAlignment:
    """Rank permutations of every marginal under every projection.

    ``ranks[k, p, t]`` is the sorted position of atom ``t`` of marginal ``p``
    after projecting onto direction ``k``; ``order[k, p, r]`` is the inverse,
    the original index of the atom holding rank ``r``.
    """

    ranks: np.ndarray
    order: np.ndarray

    def aligned_index(self, k: int, source: int, target: int, t: int) -> int:
        """Index of the atom in marginal ``target`` sharing atom ``t`` of ``source``'s rank under ``k``."""
        return int(self.order[k, target, self.ranks[k, source, t]])


def _as_measure(m) -> DiscreteMeasure:
    return m if isinstance(m, DiscreteMeasure) else DiscreteMeasure(m)


def _check_compatible(measures: Sequence[DiscreteMeasure], projections: ProjectionSet | None = None):
    d, T = measures[0].dim, measures[0].size
    for m in measures[1:]:
        if m.dim != d:
            raise ValueError(f"dimension mismatch: {m.dim} != {d}")
        if m.size != T:
            raise ValueError(f"atom-count mismatch: {m.size} != {T}")
    if projections is not None and projections.dim != d:
        raise ValueError(f"projection dimension {projections.dim} != measure dimension {d}")


def sample_projections(dim: int, count: int, seed: int) -> ProjectionSet:
    """Draw ``count`` directions uniformly on S^{dim-1} (normalized Gaussians)."""
    if dim < 1 or count < 1:
        raise ValueError(f"dim and count must be >= 1, got dim={dim}, count={count}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((count, dim))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    # a zero Gaussian draw has probability zero; redraw defensively anyway
    while np.any(norms == 0):
        bad = norms[:, 0] == 0
        g[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
    dirs = g / norms
    if dim == 1:
        dirs = np.sign(dirs)
    return ProjectionSet(dirs, seed=seed)


def project_and_sort(measure: DiscreteMeasure, direction) -> tuple[np.ndarray, np.ndarray]:
    """Project atoms onto ``direction`` and sort ascending.

    Returns the sorted values and ``rank`` with ``rank[t]`` the sorted position
    of atom ``t``. Ties keep original order.
    """
    measure = _as_measure(measure)
    theta = np.asarray(direction, dtype=np.float64).ravel()
    if theta.size != measure.dim:
        raise ValueError(f"direction has dimension {theta.size}, measure has {measure.dim}")
    values = measure.atoms @ theta
    order = np.argsort(values, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return values[order], rank


def w2_squared_1d(u, v) -> float:
    """Squared 2-Wasserstein distance between two sorted 1D samples of equal size."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.ndim != 1 or v.ndim != 1 or u.size < 1:
        raise ValueError("u and v must be non-empty 1D arrays")
    if u.size != v.size:
        raise ValueError(f"unequal atom counts: {u.size} != {v.size}")
    return float(np.mean((u - v) ** 2))


def _dispersion(lam: np.ndarray, x: np.ndarray) -> np.ndarray:
    # sum_p lam_p |x_p - sum_j lam_j x_j|^2 == 1/2 sum_{p,q} lam_p lam_q |x_p - x_q|^2 on the simplex;
    # the pairwise form is exactly zero when all marginals coincide
    diff = x[:, None] - x[None, :]
    return 0.5 * np.tensordot(np.outer(lam, lam), diff * diff, axes=2)


def mw_squared_1d(values: Sequence, weights: BarycentricWeights) -> float:
    """Barycentric multi-marginal Monge-Wasserstein cost of P sorted 1D samples.

    (1/N) sum_t sum_p lambda_p |x_t^(p) - b_t|^2 with b_t = sum_j lambda_j x_t^(j).
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError("values must be P equal-length non-empty lists")
    lam = weights.values
    if lam.size != x.shape[0]:
        raise ValueError(f"{lam.size} weights for {x.shape[0]} marginals")
    return float(np.mean(_dispersion(lam, x)))


def _projected(measures: Sequence[DiscreteMeasure], projections: ProjectionSet) -> np.ndarray:
    # (P, T, K), each column sorted
    return np.sort(np.stack([m.atoms @ projections.directions.T for m in measures]), axis=1)


def sliced_w2_squared(mu, nu, projections: ProjectionSet) -> float:
    """Monte-Carlo sliced squared 2-Wasserstein distance: mean over directions of the 1D cost."""
    mu, nu = _as_measure(mu), _as_measure(nu)
    _check_compatible([mu, nu], projections)
    s = _projected([mu, nu], projections)
    per_direction = np.mean((s[0] - s[1]) ** 2, axis=0)
    return float(np.mean(per_direction))


def sliced_mw_squared(measures: Sequence, weights: BarycentricWeights, projections: ProjectionSet) -> float:
    """Monte-Carlo sliced multi-marginal Monge-Wasserstein distance."""
    measures = [_as_measure(m) for m in measures]
    if len(measures) < 2:
        raise ValueError("at least two marginals are required")
    if len(weights) != len(measures):
        raise ValueError(f"{len(weights)} weights for {len(measures)} marginals")
    _check_compatible(measures, projections)
    s = _projected(measures, projections)
    dev = _dispersion(weights.values, s)  # (T, K)
    return float(np.mean(np.mean(dev, axis=0)))


def build_alignment(measures: Sequence, projections: ProjectionSet) -> SortedAlignment:
    """Rank every atom of every marginal under every projection."""
    measures = [_as_measure(m) for m in measures]
    _check_compatible(measures, projections)
    proj = np.stack([m.atoms @ projections.directions.T for m in measures])  # (P, T, K)
    order = np.argsort(proj, axis=1, kind="stable").transpose(2, 0, 1)  # (K, P, T)
    ranks = np.empty_like(order)
    K, P, T = order.shape
    kk, pp = np.meshgrid(np.arange(K), np.arange(P), indexing="ij")
    ranks[kk[..., None], pp[..., None], order] = np.arange(T)
    return SortedAlignment(ranks=ranks, order=order)
