"""Skeleton, pose and clip data model.

A pose is stored as root-relative joint positions: every joint is expressed
relative to the projection of the pelvis onto the floor plane (y = 0, y up),
so the pelvis keeps its height while its horizontal coordinates are zero.
World-space positions coming out of forward kinematics are plain (J, 3)
arrays; they become a ``Pose`` through :func:`to_root_relative`.

All values are immutable after construction; every operation here is a pure
function, so the types are safe to share between threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np

# Roles the built-in metrics may resolve on a skeleton.
ROLE_NAMES = ("pelvis", "neck", "spine1", "lshoulder", "rshoulder", "lknee", "rknee")

STD_CLAMP = 1e-8


class SkeletonError(ValueError):
    pass


class PoseError(ValueError):
    pass


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Joint:
    """One joint: a name, a parent index (None for the root) and the local
    offset from the parent in meters."""

    name: str
    parent: int | None
    offset: np.ndarray

    def __post_init__(self):
        off = np.asarray(self.offset, dtype=np.float64).reshape(3)
        object.__setattr__(self, "offset", _freeze(off))


@dataclass(frozen=True)
class Skeleton:
    joints: tuple[Joint, ...]
    named_roles: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "named_roles", dict(self.named_roles))
        roots = 0
        for i, j in enumerate(self.joints):
            if j.parent is None:
                roots += 1
            elif not 0 <= j.parent < i:
                raise SkeletonError(
                    f"joint {i} ({j.name!r}) has parent {j.parent}; parents must precede children"
                )
        if roots != 1:
            raise SkeletonError(f"expected exactly one root joint, found {roots}")
        for role, idx in self.named_roles.items():
            if not 0 <= idx < len(self.joints):
                raise SkeletonError(f"role {role!r} maps to invalid joint index {idx}")

    @property
    def joint_count(self) -> int:
        return len(self.joints)

    @property
    def joint_names(self) -> list[str]:
        return [j.name for j in self.joints]

    def parent_indices(self) -> list[int]:
        """Parent index per joint, -1 for the root."""
        return [-1 if j.parent is None else j.parent for j in self.joints]

    def offsets(self) -> np.ndarray:
        return np.stack([j.offset for j in self.joints])

    def role_index(self, role: str) -> int:
        try:
            return self.named_roles[role]
        except KeyError:
            raise SkeletonError(f"skeleton has no joint mapped to role {role!r}") from None


@dataclass(frozen=True)
class Pose:
    """Joint positions (J, 3) in meters, plus the role map used by metrics.

    Poses produced by :func:`to_root_relative` additionally satisfy
    pelvis.x == pelvis.z == 0; arbitrary world poses may be constructed
    directly for analysis.
    """

    positions: np.ndarray
    roles: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise PoseError(f"positions must have shape (J, 3), got {pos.shape}")
        if not np.isfinite(pos).all():
            raise PoseError("pose contains non-finite coordinates")
        object.__setattr__(self, "positions", _freeze(pos))
        object.__setattr__(self, "roles", dict(self.roles))

    @property
    def joint_count(self) -> int:
        return self.positions.shape[0]

    def joint(self, role: str) -> np.ndarray:
        """Position of the joint bound to ``role``."""
        try:
            idx = self.roles[role]
        except KeyError:
            raise PoseError(f"pose has no joint mapped to role {role!r}") from None
        return self.positions[idx]


@dataclass(frozen=True)
class AnimationClip:
    poses: tuple[Pose, ...]
    frame_rate: float
    id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "poses", tuple(self.poses))
        if len(self.poses) < 1:
            raise PoseError("clip needs at least one pose")
        if not self.frame_rate > 0:
            raise PoseError(f"frame rate must be positive, got {self.frame_rate}")
        j = self.poses[0].joint_count
        for i, p in enumerate(self.poses):
            if p.joint_count != j:
                raise PoseError(f"pose {i} has {p.joint_count} joints, expected {j}")

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def joint_count(self) -> int:
        return self.poses[0].joint_count

    def as_matrix(self) -> np.ndarray:
        """All frames flattened to a (N, 3J) float32 matrix (training layout)."""
        return np.stack([flatten(p) for p in self.poses]).astype(np.float32)

    @staticmethod
    def from_matrix(
        frames: np.ndarray, frame_rate: float, clip_id: str, roles: Mapping[str, int]
    ) -> "AnimationClip":
        frames = np.asarray(frames)
        poses = tuple(unflatten(row, frames.shape[1] // 3, roles) for row in frames)
        return AnimationClip(poses, frame_rate, clip_id)


@dataclass(frozen=True)
class NormalizationStats:
    """Per-component mean / population std of the flattened pose dataset."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float32).reshape(-1)
        std = np.asarray(self.std, dtype=np.float32).reshape(-1)
        if mean.shape != std.shape:
            raise PoseError("mean and std must have the same length")
        if not (std > 0).all():
            raise PoseError("std entries must be strictly positive")
        object.__setattr__(self, "mean", _freeze(mean))
        object.__setattr__(self, "std", _freeze(std))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class PoseDataset:
    """A skeleton, its normalization statistics and the ingested clips."""

    skeleton: Skeleton
    stats: NormalizationStats
    clips: tuple[AnimationClip, ...]

    def __post_init__(self):
        object.__setattr__(self, "clips", tuple(self.clips))
        dim = 3 * self.skeleton.joint_count
        if self.stats.dim != dim:
            raise PoseError(f"stats dimension {self.stats.dim} != 3J = {dim}")
        for c in self.clips:
            if c.joint_count != self.skeleton.joint_count:
                raise PoseError(f"clip {c.id!r} joint count differs from skeleton")

    @property
    def pose_count(self) -> int:
        return sum(len(c) for c in self.clips)

    def all_frames(self) -> np.ndarray:
        """Every pose of every clip as one (M, 3J) float32 matrix."""
        if not self.clips:
            return np.zeros((0, 3 * self.skeleton.joint_count), dtype=np.float32)
        return np.concatenate([c.as_matrix() for c in self.clips])

    def iter_poses(self) -> Iterator[Pose]:
        for c in self.clips:
            yield from c.poses


def forward_kinematics(
    skeleton: Skeleton,
    rotations: np.ndarray,
    root_translation: Sequence[float] = (0.0, 0.0, 0.0),
    local_translations: np.ndarray | None = None,
) -> np.ndarray:
    """World positions (J, 3) from per-joint local rotation matrices.

    ``rotations`` is (J, 3, 3), one matrix per joint in skeleton order.
    ``local_translations`` optionally adds per-joint translation on top of
    the rest offsets (BVH position channels on non-root joints).
    """
    rot = np.asarray(rotations, dtype=np.float64)
    if rot.shape != (skeleton.joint_count, 3, 3):
        raise SkeletonError(
            f"expected {skeleton.joint_count} rotation matrices, got shape {rot.shape}"
        )
    if not np.isfinite(rot).all():
        raise SkeletonError("non-finite rotation input")
    trans = np.asarray(root_translation, dtype=np.float64).reshape(3)
    if not np.isfinite(trans).all():
        raise SkeletonError("non-finite root translation")

    j_count = skeleton.joint_count
    world_pos = np.zeros((j_count, 3))
    world_rot = np.zeros((j_count, 3, 3))
    for i, joint in enumerate(skeleton.joints):
        local = joint.offset.copy()
        if local_translations is not None:
            local = local + local_translations[i]
        if joint.parent is None:
            world_pos[i] = local + trans
            world_rot[i] = rot[i]
        else:
            p = joint.parent
            world_pos[i] = world_pos[p] + world_rot[p] @ local
            world_rot[i] = world_rot[p] @ rot[i]
    return world_pos


def to_root_relative(
    world_positions: np.ndarray, pelvis_index: int, roles: Mapping[str, int] | None = None
) -> Pose:
    """Subtract the pelvis' floor projection (x, 0, z) from every joint."""
    pos = np.asarray(world_positions, dtype=np.float64)
    if not np.isfinite(pos).all():
        raise PoseError("non-finite world positions")
    if not 0 <= pelvis_index < pos.shape[0]:
        raise PoseError(f"pelvis index {pelvis_index} out of range")
    shift = np.array([pos[pelvis_index, 0], 0.0, pos[pelvis_index, 2]])
    return Pose(pos - shift, roles or {})


def flatten(pose: Pose) -> np.ndarray:
    """Joint-major (x, y, z per joint) 3J vector."""
    return pose.positions.reshape(-1).copy()


def unflatten(vec: np.ndarray, joint_count: int, roles: Mapping[str, int] | None = None) -> Pose:
    vec = np.asarray(vec, dtype=np.float64).reshape(-1)
    if vec.shape[0] != 3 * joint_count:
        raise PoseError(f"vector length {vec.shape[0]} != 3 * {joint_count}")
    return Pose(vec.reshape(joint_count, 3), roles or {})


def compute_stats(frames: np.ndarray) -> NormalizationStats:
    """Per-component mean and population std, std clamped to 1e-8."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise PoseError("stats need a non-empty (M, 3J) dataset")
    mean = frames.mean(axis=0)
    std = frames.std(axis=0)  # population std (ddof=0)
    std = np.maximum(std, STD_CLAMP)
    return NormalizationStats(mean, std)


def normalize(vec: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    vec = np.asarray(vec)
    if vec.shape[-1] != stats.dim:
        raise PoseError(f"vector dim {vec.shape[-1]} != stats dim {stats.dim}")
    return (vec - stats.mean) / stats.std


def denormalize(vec: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    vec = np.asarray(vec)
    if vec.shape[-1] != stats.dim:
        raise PoseError(f"vector dim {vec.shape[-1]} != stats dim {stats.dim}")
    return vec * stats.std + stats.mean
