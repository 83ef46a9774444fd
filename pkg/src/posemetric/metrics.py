"""Objective per-pose metrics and their registry.

A metric is a named scalar function of a single pose. The three built-ins
(spine flexion, shoulder openness, leg spread) are all angles between two
vectors derived from joint positions, measured in radians in [0, pi]. Users
register their own metrics; custom ones are free to leave that range.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .skeleton import Pose, STD_CLAMP

# Below this norm a direction is meaningless and the angle undefined.
MIN_VECTOR_NORM = 1e-9

WORLD_UP = np.array([0.0, 1.0, 0.0])


class MetricError(ValueError):
    pass


class DegenerateVectorError(MetricError):
    """Raised when an angle is requested between near-zero-length vectors."""


class DuplicateMetricError(MetricError):
    pass


class UnknownMetricError(MetricError):
    pass


def vector_angle(u: np.ndarray, v: np.ndarray) -> float:
    """Angle in radians between two 3D vectors.

    The cosine is clamped to [-1, 1] before the arccos so that parallel
    vectors whose dot product exceeds 1 by a few ulps stay finite.
    """
    u = np.asarray(u, dtype=np.float64).reshape(3)
    v = np.asarray(v, dtype=np.float64).reshape(3)
    nu = math.sqrt(float(u @ u))
    nv = math.sqrt(float(v @ v))
    if nu <= MIN_VECTOR_NORM or nv <= MIN_VECTOR_NORM:
        raise DegenerateVectorError(
            f"cannot measure an angle on near-zero vectors (norms {nu:.3g}, {nv:.3g})"
        )
    cos = float(u @ v) / (nu * nv)
    return math.acos(max(-1.0, min(1.0, cos)))


def spine_flexion(pose: Pose) -> float:
    """Angle between the pelvis-to-neck axis and the world up vector."""
    return vector_angle(pose.joint("neck") - pose.joint("pelvis"), WORLD_UP)


def shoulders_openness(pose: Pose) -> float:
    """Angle at the upper spine between the two shoulder directions."""
    spine1 = pose.joint("spine1")
    return vector_angle(spine1 - pose.joint("rshoulder"), pose.joint("lshoulder") - spine1)


def legs_spread(pose: Pose) -> float:
    """Angle at the pelvis between the directions from the two knees."""
    pelvis = pose.joint("pelvis")
    return vector_angle(pelvis - pose.joint("rknee"), pose.joint("lknee") - pelvis)


@dataclass(frozen=True)
class MetricDef:
    name: str
    required_roles: tuple[str, ...]
    evaluate: Callable[[Pose], float]


@dataclass(frozen=True)
class MetricStats:
    """Dataset mean/std of one metric, std clamped away from zero so that
    standardizing a target value never divides by ~0."""

    mean: float
    std: float

    def __post_init__(self):
        object.__setattr__(self, "std", max(float(self.std), STD_CLAMP))
        object.__setattr__(self, "mean", float(self.mean))

    def standardize(self, value: float) -> float:
        return (value - self.mean) / self.std


BUILTIN_METRICS = (
    MetricDef("legs_spread", ("pelvis", "rknee", "lknee"), legs_spread),
    MetricDef("shoulders_openness", ("spine1", "rshoulder", "lshoulder"), shoulders_openness),
    MetricDef("spine_flexion", ("neck", "pelvis"), spine_flexion),
)


class MetricRegistry:
    """Name -> MetricDef lookup. Mutable during startup configuration,
    frozen afterwards; reads are lock-free."""

    def __init__(self, include_builtins: bool = True):
        self._metrics: dict[str, MetricDef] = {}
        self._frozen = False
        if include_builtins:
            for m in BUILTIN_METRICS:
                self.register(m)

    def register(self, metric: MetricDef) -> None:
        if self._frozen:
            raise MetricError("registry is frozen; register metrics during startup")
        if metric.name in self._metrics:
            raise DuplicateMetricError(f"metric {metric.name!r} is already registered")
        self._metrics[metric.name] = metric

    def freeze(self) -> None:
        self._frozen = True

    def get(self, name: str) -> MetricDef:
        try:
            return self._metrics[name]
        except KeyError:
            raise UnknownMetricError(
                f"unknown metric {name!r}; registered: {', '.join(self.names())}"
            ) from None

    def names(self) -> list[str]:
        return sorted(self._metrics)

    def __contains__(self, name: str) -> bool:
        return name in self._metrics

    def evaluate(self, name: str, pose: Pose) -> float:
        return self.get(name).evaluate(pose)


def metric_stats(metric: MetricDef, poses: Iterable[Pose]) -> MetricStats:
    """Mean/std of a metric over a dataset (population std, clamped)."""
    values = np.array([metric.evaluate(p) for p in poses], dtype=np.float64)
    if values.size == 0:
        raise MetricError(f"no poses to compute stats for metric {metric.name!r}")
    return MetricStats(float(values.mean()), float(values.std()))


def default_registry() -> MetricRegistry:
    return MetricRegistry(include_builtins=True)
