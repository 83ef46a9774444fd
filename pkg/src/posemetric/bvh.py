"""BVH motion-capture ingestion and the JSON dataset format.

``parse_bvh`` turns the HIERARCHY/MOTION text format into a document
(skeleton + per-frame channel rows); ``clip_from_bvh`` runs the channels
through forward kinematics and root-relativization to produce an
``AnimationClip``. Every parse error carries the offending line number.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import jsonfmt
from .skeleton import (
    AnimationClip,
    Joint,
    NormalizationStats,
    PoseDataset,
    Skeleton,
    forward_kinematics,
    to_root_relative,
)

CHANNEL_NAMES = frozenset(
    ["Xposition", "Yposition", "Zposition", "Xrotation", "Yrotation", "Zrotation"]
)

# Default joint-name candidates per role, tried in order, case-insensitive.
# Corpora disagree on naming; a role-mapping file overrides this table.
DEFAULT_ROLE_TABLE: dict[str, tuple[str, ...]] = {
    "pelvis": ("hips", "pelvis", "hip", "root"),
    "neck": ("neck", "neck1", "head"),
    "spine1": ("spine1", "chest", "spine2", "spine"),
    "lshoulder": ("leftshoulder", "lshoulder", "leftarm", "l_shoulder", "leftcollar"),
    "rshoulder": ("rightshoulder", "rshoulder", "rightarm", "r_shoulder", "rightcollar"),
    "lknee": ("leftleg", "lknee", "leftknee", "l_knee", "leftlowleg", "leftshin"),
    "rknee": ("rightleg", "rknee", "rightknee", "r_knee", "rightlowleg", "rightshin"),
}


class BvhError(ValueError):
    pass


class BvhParseError(BvhError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


class RoleMappingError(BvhError):
    pass


class DatasetFormatError(ValueError):
    pass


@dataclass(frozen=True)
class BvhDocument:
    skeleton: Skeleton
    end_sites: tuple[tuple[int, np.ndarray], ...]  # (parent joint index, offset)
    channel_layout: tuple[tuple[str, ...], ...]  # per joint, declaration order
    frames: np.ndarray  # (F, total channel count) float64
    frame_time: float

    @property
    def channel_count(self) -> int:
        return sum(len(c) for c in self.channel_layout)

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]


class _Tokens:
    def __init__(self, text: str):
        self.items: list[tuple[str, int]] = []
        for line_no, line in enumerate(text.splitlines(), 1):
            for tok in line.split():
                self.items.append((tok, line_no))
        self.pos = 0
        self.last_line = self.items[-1][1] if self.items else 1

    def eof(self) -> bool:
        return self.pos >= len(self.items)

    def peek(self) -> str | None:
        return None if self.eof() else self.items[self.pos][0]

    def line(self) -> int:
        return self.last_line if self.eof() else self.items[self.pos][1]

    def next(self, what: str) -> str:
        if self.eof():
            raise BvhParseError(f"unexpected end of file, expected {what}", self.last_line)
        tok, _ = self.items[self.pos]
        self.pos += 1
        return tok

    def expect(self, token: str) -> None:
        line = self.line()
        got = self.next(repr(token))
        if got != token:
            raise BvhParseError(f"expected {token!r}, got {got!r}", line)

    def next_float(self, what: str) -> float:
        line = self.line()
        tok = self.next(what)
        try:
            return float(tok)
        except ValueError:
            raise BvhParseError(f"expected a number for {what}, got {tok!r}", line) from None

    def next_int(self, what: str) -> int:
        line = self.line()
        tok = self.next(what)
        try:
            return int(tok)
        except ValueError:
            raise BvhParseError(f"expected an integer for {what}, got {tok!r}", line) from None


def parse_bvh(text: str) -> BvhDocument:
    """Parse BVH text; joints keep depth-first document order, End Sites are
    recorded separately and carry no channels."""
    tokens = _Tokens(text)
    tokens.expect("HIERARCHY")
    line = tokens.line()
    kw = tokens.next("'ROOT'")
    if kw != "ROOT":
        raise BvhParseError(f"expected 'ROOT', got {kw!r}", line)

    joints: list[Joint] = []
    layouts: list[tuple[str, ...]] = []
    end_sites: list[tuple[int, np.ndarray]] = []
    _parse_joint(tokens, None, joints, layouts, end_sites)

    tokens.expect("MOTION")
    motion_line = tokens.line()
    tokens.expect("Frames:")
    declared = tokens.next_int("frame count")
    tokens.expect("Frame")
    tokens.expect("Time:")
    frame_time = tokens.next_float("frame time")

    channel_count = sum(len(c) for c in layouts)
    values = []
    while not tokens.eof():
        values.append(tokens.next_float("channel value"))
    if channel_count == 0:
        raise BvhParseError("hierarchy declares no channels", motion_line)
    if len(values) % channel_count != 0 or len(values) // channel_count != declared:
        raise BvhParseError(
            f"MOTION section declares {declared} frames of {channel_count} channels "
            f"but contains {len(values)} values",
            motion_line,
        )
    frames = np.array(values, dtype=np.float64).reshape(declared, channel_count)
    if frame_time <= 0:
        raise BvhParseError(f"frame time must be positive, got {frame_time}", motion_line)

    skeleton = Skeleton(tuple(joints))
    return BvhDocument(skeleton, tuple(end_sites), tuple(layouts), frames, frame_time)


def _parse_joint(tokens, parent, joints, layouts, end_sites) -> None:
    name = tokens.next("joint name")
    tokens.expect("{")
    index = len(joints)
    tokens.expect("OFFSET")
    offset = np.array([tokens.next_float("offset component") for _ in range(3)])
    joints.append(Joint(name, parent, offset))

    channels: tuple[str, ...] = ()
    if tokens.peek() == "CHANNELS":
        tokens.next("CHANNELS")
        count = tokens.next_int("channel count")
        names = []
        for _ in range(count):
            line = tokens.line()
            ch = tokens.next("channel name")
            if ch not in CHANNEL_NAMES:
                raise BvhParseError(f"unknown channel name {ch!r}", line)
            names.append(ch)
        channels = tuple(names)
    layouts.append(channels)

    while True:
        line = tokens.line()
        tok = tokens.next("'JOINT', 'End' or '}'")
        if tok == "}":
            return
        if tok == "JOINT":
            _parse_joint(tokens, index, joints, layouts, end_sites)
        elif tok == "End":
            site_kw = tokens.next("'Site'")
            if site_kw != "Site":
                raise BvhParseError(f"expected 'Site' after 'End', got {site_kw!r}", line)
            tok2 = tokens.next("'{'")
            if tok2 != "{":  # some files name the site before the brace
                tokens.expect("{")
            tokens.expect("OFFSET")
            off = np.array([tokens.next_float("offset component") for _ in range(3)])
            tokens.expect("}")
            end_sites.append((index, off))
        else:
            raise BvhParseError(f"expected 'JOINT', 'End' or '}}', got {tok!r}", line)


_AXIS_INDEX = {"X": 0, "Y": 1, "Z": 2}


def _axis_rotation(axis: str, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    if axis == "X":
        return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=np.float64)
    if axis == "Y":
        return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=np.float64)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=np.float64)


def resolve_roles(
    skeleton: Skeleton, overrides: Mapping[str, str] | None = None
) -> dict[str, int]:
    """Map role names to joint indices via the default name table, with
    explicit role -> joint-name overrides taking precedence."""
    by_name = {j.name.lower(): i for i, j in enumerate(skeleton.joints)}
    roles: dict[str, int] = {}
    overrides = overrides or {}
    for role, candidates in DEFAULT_ROLE_TABLE.items():
        if role in overrides:
            wanted = overrides[role].lower()
            if wanted not in by_name:
                raise RoleMappingError(
                    f"role {role!r} override {overrides[role]!r} matches no joint"
                )
            roles[role] = by_name[wanted]
            continue
        for cand in candidates:
            if cand in by_name:
                roles[role] = by_name[cand]
                break
    return roles


def clip_from_bvh(
    doc: BvhDocument,
    role_overrides: Mapping[str, str] | None = None,
    clip_id: str = "",
) -> AnimationClip:
    """Channels -> rotations (declaration order) -> FK -> root-relative."""
    if doc.frame_time <= 0:
        raise BvhError(f"degenerate frame time {doc.frame_time}")
    roles = resolve_roles(doc.skeleton, role_overrides)
    if "pelvis" not in roles:
        raise RoleMappingError(
            "could not map the pelvis role to any joint; "
            f"joints are {doc.skeleton.joint_names}; provide a role-mapping override"
        )
    pelvis = roles["pelvis"]
    j_count = doc.skeleton.joint_count
    root = doc.skeleton.parent_indices().index(-1)

    poses = []
    for row in doc.frames:
        rotations = np.tile(np.eye(3), (j_count, 1, 1))
        local_trans = np.zeros((j_count, 3))
        cursor = 0
        for ji, channels in enumerate(doc.channel_layout):
            rot = np.eye(3)
            for ch in channels:
                value = row[cursor]
                cursor += 1
                if ch.endswith("position"):
                    local_trans[ji, _AXIS_INDEX[ch[0]]] += value
                else:
                    rot = rot @ _axis_rotation(ch[0], math.radians(value))
            rotations[ji] = rot
        root_trans = local_trans[root].copy()
        local_trans[root] = 0.0
        world = forward_kinematics(doc.skeleton, rotations, root_trans, local_trans)
        poses.append(to_root_relative(world, pelvis, roles))
    return AnimationClip(tuple(poses), 1.0 / doc.frame_time, clip_id)


def skeleton_to_json(skeleton: Skeleton) -> dict:
    return {
        "joints": [
            {
                "name": j.name,
                "parent": j.parent,
                "offset": [float(v) for v in j.offset],
            }
            for j in skeleton.joints
        ],
        "named_roles": {k: skeleton.named_roles[k] for k in sorted(skeleton.named_roles)},
    }


def skeleton_from_json(data: dict) -> Skeleton:
    joints = tuple(
        Joint(j["name"], j["parent"], np.array(j["offset"], dtype=np.float64))
        for j in data["joints"]
    )
    return Skeleton(joints, dict(data.get("named_roles", {})))


def write_dataset(
    clips: Sequence[AnimationClip],
    skeleton: Skeleton,
    stats: NormalizationStats,
    path,
) -> None:
    """Single canonical JSON document; floats at 9 significant digits."""
    j_count = skeleton.joint_count
    for c in clips:
        if c.joint_count != j_count:
            raise DatasetFormatError(
                f"clip {c.id!r} has {c.joint_count} joints, skeleton has {j_count}"
            )
    doc = {
        "skeleton": skeleton_to_json(skeleton),
        "stats": {
            "mean": [float(v) for v in stats.mean],
            "std": [float(v) for v in stats.std],
        },
        "clips": [
            {
                "id": c.id,
                "frame_rate": float(c.frame_rate),
                "frames": [[float(v) for v in row] for row in c.as_matrix()],
            }
            for c in clips
        ],
    }
    with open(path, "w", encoding="utf-8") as f:
        f.write(jsonfmt.dumps(doc))
        f.write("\n")


def read_dataset(path) -> PoseDataset:
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise DatasetFormatError(f"malformed dataset JSON: {e}") from None
    try:
        skeleton = skeleton_from_json(doc["skeleton"])
        stats = NormalizationStats(doc["stats"]["mean"], doc["stats"]["std"])
        roles = skeleton.named_roles
        clips = tuple(
            AnimationClip.from_matrix(
                np.array(c["frames"], dtype=np.float64),
                float(c["frame_rate"]),
                c["id"],
                roles,
            )
            for c in doc["clips"]
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetFormatError(f"invalid dataset JSON: {e}") from None
    return PoseDataset(skeleton, stats, clips)
