"""Bounded integer demand distributions."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from statistics import NormalDist
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateSupport, EmptySamples, SchemaError

SUM_TOL = 1e-12


class DemandPmf:
    """Probability mass function on the integers ``support_min .. support_max``.

    Both end points carry positive mass, so the support is tight.
    Instances are immutable and hashable by value.
    """

    __slots__ = ("support_min", "probs", "_cdf")

    def __init__(self, support_min: int, probs: Sequence[float] | np.ndarray):
        p = np.array(probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise DegenerateSupport("pmf needs at least one support point")
        if int(support_min) != support_min or support_min < 0:
            raise ValueError(f"support_min must be a nonnegative integer, got {support_min}")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        if p[0] <= 0 or p[-1] <= 0:
            raise ValueError("support end points must carry positive mass")
        p.setflags(write=False)
        cdf = np.cumsum(p)
        cdf[-1] = 1.0
        cdf.setflags(write=False)
        object.__setattr__(self, "support_min", int(support_min))
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "_cdf", cdf)

    def __setattr__(self, name, value):
        raise AttributeError("DemandPmf is immutable")

    @classmethod
    def from_weights(cls, support_min: int, weights: Sequence[float] | np.ndarray) -> "DemandPmf":
        """Normalize nonnegative weights and trim zero-mass ends."""
        w = np.asarray(weights, dtype=float)
        nz = np.flatnonzero(w > 0)
        if nz.size == 0:
            raise DegenerateSupport("all weights are zero")
        w = w[nz[0] : nz[-1] + 1]
        return cls(support_min + int(nz[0]), w / w.sum())

    @property
    def support_max(self) -> int:
        return self.support_min + self.probs.size - 1

    @property
    def values(self) -> np.ndarray:
        return np.arange(self.support_min, self.support_max + 1)

    def support_bounds(self) -> tuple[int, int]:
        return self.support_min, self.support_max

    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))

    def variance(self) -> float:
        v = self.values
        m = self.mean()
        return float(np.dot((v - m) ** 2, self.probs))

    def pmf(self, v: int) -> float:
        if self.support_min <= v <= self.support_max:
            return float(self.probs[v - self.support_min])
        return 0.0

    def cdf(self, v: float) -> float:
        """P(demand <= v)."""
        if v < self.support_min:
            return 0.0
        if v >= self.support_max:
            return 1.0
        return float(self._cdf[int(math.floor(v)) - self.support_min])

    def quantile(self, u: np.ndarray | float) -> np.ndarray | int:
        """Inverse CDF: smallest v with CDF(v) > u, for u in [0, 1)."""
        idx = np.searchsorted(self._cdf, u, side="right")
        idx = np.minimum(idx, self.probs.size - 1)
        out = self.support_min + idx
        return int(out) if np.ndim(out) == 0 else out

    def sample(self, rng: np.random.Generator) -> int:
        return sample(self, rng)

    def shifted(self, delta: int) -> "DemandPmf":
        """Same shape translated by ``delta`` units, clipped at zero."""
        lo = self.support_min + int(delta)
        if lo >= 0:
            return DemandPmf(lo, self.probs)
        vals = np.maximum(self.values + int(delta), 0)
        return DemandPmf.from_weights(0, np.bincount(vals, weights=self.probs))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DemandPmf):
            return NotImplemented
        return self.support_min == other.support_min and np.array_equal(self.probs, other.probs)

    def __hash__(self) -> int:
        return hash((self.support_min, self.probs.tobytes()))

    def __repr__(self) -> str:
        return f"DemandPmf(support=[{self.support_min}, {self.support_max}], mean={self.mean():.4g})"


def point_mass(value: int) -> DemandPmf:
    return DemandPmf(value, [1.0])


def uniform(lo: int, hi: int) -> DemandPmf:
    return DemandPmf(lo, np.full(hi - lo + 1, 1.0 / (hi - lo + 1)))


def discretize_normal(mean: float, std: float, trunc_sigmas: float = 4.0) -> DemandPmf:
    """Integer pmf from a normal law using half-integer CDF bins.

    Support is ``[max(0, ceil(mean - t*std)), floor(mean + t*std)]``; bin v
    gets ``Phi((v + .5 - mean)/std) - Phi((v - .5 - mean)/std)``, then the
    weights are renormalized.
    """
    if not std > 0:
        raise ValueError("std must be positive")
    lo = max(0, math.ceil(mean - trunc_sigmas * std))
    hi = math.floor(mean + trunc_sigmas * std)
    if hi < lo:
        raise DegenerateSupport(f"normal({mean}, {std}) truncated at {trunc_sigmas} sigma has no nonnegative support")
    dist = NormalDist(mean, std)
    edges = [dist.cdf(v - 0.5) for v in range(lo, hi + 2)]
    weights = np.diff(edges)
    if not np.any(weights > 0):
        raise DegenerateSupport("all bins underflow to zero probability")
    return DemandPmf.from_weights(lo, weights)


def pmf_from_samples(samples: Iterable[int] | np.ndarray) -> DemandPmf:
    """Empirical pmf with the tight observed support."""
    arr = np.asarray(samples if isinstance(samples, np.ndarray) else list(samples), dtype=np.int64).ravel()
    if arr.size == 0:
        raise EmptySamples("cannot build a pmf from zero samples")
    if arr.min() < 0:
        raise ValueError("demand samples must be nonnegative")
    lo = int(arr.min())
    counts = np.bincount(arr - lo)
    return DemandPmf(lo, counts / arr.size)


def pmf_from_counts(counts: Mapping[int, int]) -> DemandPmf:
    if not counts or sum(counts.values()) <= 0:
        raise EmptySamples("empirical counts are empty")
    lo, hi = min(counts), max(counts)
    w = np.zeros(hi - lo + 1)
    for v, c in counts.items():
        w[v - lo] += c
    return DemandPmf.from_weights(lo, w)


def convolve(a: DemandPmf, b: DemandPmf) -> DemandPmf:
    """Distribution of the sum of independent draws from ``a`` and ``b``."""
    p = np.convolve(a.probs, b.probs)
    return DemandPmf(a.support_min + b.support_min, p / p.sum())


def sample(pmf: DemandPmf, rng: np.random.Generator) -> int:
    """One inverse-CDF draw; consumes exactly one uniform from ``rng``."""
    return pmf.quantile(rng.random())


@dataclass(frozen=True)
class DemandModel:
    """Stage-indexed demand: one stationary pmf, or one pmf per stage."""

    pmfs: tuple[DemandPmf, ...]
    stationary: bool = True

    @classmethod
    def constant(cls, pmf: DemandPmf) -> "DemandModel":
        return cls((pmf,), True)

    @classmethod
    def per_stage(cls, pmfs: Sequence[DemandPmf]) -> "DemandModel":
        if not pmfs:
            raise ValueError("need at least one stage")
        return cls(tuple(pmfs), False)

    def at(self, k: int) -> DemandPmf:
        return self.pmfs[0] if self.stationary else self.pmfs[k]

    def check_horizon(self, horizon: int) -> None:
        if not self.stationary and len(self.pmfs) != horizon:
            raise ValueError(f"demand model has {len(self.pmfs)} stages, solver horizon is {horizon}")

    def max_support(self, horizon: int) -> int:
        return max(self.at(k).support_max for k in range(horizon))


# Exogenous demand sources. ``pmf(shift)`` returns the stage pmf when the mean
# is moved by ``shift`` units, which is how demand shocks are injected.


@dataclass(frozen=True)
class NormalDemand:
    mean: float
    std: float
    trunc_sigmas: float = 4.0

    def pmf(self, shift: float = 0.0) -> DemandPmf:
        return _normal_cached(self.mean + shift, self.std, self.trunc_sigmas)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "normal", "mean": self.mean, "std": self.std, "trunc_sigmas": self.trunc_sigmas}


@lru_cache(maxsize=4096)
def _normal_cached(mean: float, std: float, trunc: float) -> DemandPmf:
    return discretize_normal(mean, std, trunc)


@dataclass(frozen=True)
class FixedDemand:
    base: DemandPmf
    kind: str = "empirical"

    def pmf(self, shift: float = 0.0) -> DemandPmf:
        if shift == 0:
            return self.base
        return self.base.shifted(int(round(shift)))

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "point":
            return {"kind": "point", "value": self.base.support_min}
        counts = {int(v): float(p) for v, p in zip(self.base.values, self.base.probs) if p > 0}
        return {"kind": "empirical", "counts": counts}


def demand_from_spec(spec: Mapping[str, Any]) -> NormalDemand | FixedDemand:
    """Build a demand source from ``{kind: normal|empirical|point, ...}``."""
    kind = spec.get("kind")
    if kind == "normal":
        return NormalDemand(float(spec["mean"]), float(spec["std"]), float(spec.get("trunc_sigmas", 4.0)))
    if kind == "point":
        return FixedDemand(point_mass(int(spec["value"])), "point")
    if kind == "empirical":
        counts = {int(k): v for k, v in dict(spec["counts"]).items()}
        return FixedDemand(pmf_from_counts(counts), "empirical")
    raise SchemaError(f"unknown demand kind {kind!r}")
