"""Procedural humanoid clips for demos, tests and the acceptance corpus.

Clips are generated on a 21-joint skeleton by driving a handful of joint
angles with smooth per-clip randomized sinusoids and running forward
kinematics, so bone lengths stay rigid and neighboring frames stay close
(the pair-sampling trainer relies on temporal coherence).
"""
from __future__ import annotations

import math

import numpy as np

from .skeleton import (
    AnimationClip,
    Joint,
    PoseDataset,
    Skeleton,
    compute_stats,
    forward_kinematics,
    to_root_relative,
)

HIP_HEIGHT = 0.92


def default_skeleton() -> Skeleton:
    """21-joint humanoid with all seven metric roles mapped.

    Clavicle joints sit between the upper spine and the shoulders so that
    shrug/squeeze motion changes the shoulder geometry relative to the
    spine (the shoulder-openness metric is insensitive to rigid rotations
    of the whole shoulder girdle)."""
    j = [
        ("pelvis", None, (0.0, 0.0, 0.0)),
        ("spine1", 0, (0.0, 0.22, 0.0)),
        ("spine2", 1, (0.0, 0.22, 0.0)),
        ("neck", 2, (0.0, 0.12, 0.0)),
        ("head", 3, (0.0, 0.14, 0.0)),
        ("rclav", 2, (-0.03, 0.07, 0.0)),
        ("rshoulder", 5, (-0.16, 0.0, 0.0)),
        ("relbow", 6, (-0.27, 0.0, 0.0)),
        ("rwrist", 7, (-0.25, 0.0, 0.0)),
        ("lclav", 2, (0.03, 0.07, 0.0)),
        ("lshoulder", 9, (0.16, 0.0, 0.0)),
        ("lelbow", 10, (0.27, 0.0, 0.0)),
        ("lwrist", 11, (0.25, 0.0, 0.0)),
        ("rhip", 0, (-0.10, -0.04, 0.0)),
        ("rknee", 13, (0.0, -0.42, 0.0)),
        ("rankle", 14, (0.0, -0.41, 0.0)),
        ("rfoot", 15, (0.0, -0.06, 0.13)),
        ("lhip", 0, (0.10, -0.04, 0.0)),
        ("lknee", 17, (0.0, -0.42, 0.0)),
        ("lankle", 18, (0.0, -0.41, 0.0)),
        ("lfoot", 19, (0.0, -0.06, 0.13)),
    ]
    joints = tuple(Joint(name, parent, np.array(off)) for name, parent, off in j)
    roles = {
        "pelvis": 0,
        "spine1": 1,
        "neck": 3,
        "rshoulder": 6,
        "lshoulder": 10,
        "rknee": 14,
        "lknee": 18,
    }
    return Skeleton(joints, roles)


def _rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def _rot_y(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def _rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def generate_clip(
    skeleton: Skeleton,
    frames: int,
    frame_rate: float,
    rng: np.random.Generator,
    clip_id: str,
) -> AnimationClip:
    """One gait-like clip.

    Fast joint oscillations share a per-clip gait phase (with small jitter),
    the way limbs coordinate in real locomotion, so the near future of a
    pose is largely determined by the pose itself. Slow independent drifts
    on posture angles (spine bend, shrug, leg spread) vary the metric
    operating points within and across clips.
    """
    f1 = rng.uniform(0.35, 0.7)  # gait frequency, Hz
    # Half the clips move as one coordinated gait (all body groups share a
    # phase), half move each group independently. Coordinated clips give a
    # pose's near future a sharp prediction from any one metric; the
    # independent clips keep the metrics' edit networks from coupling to
    # each other through an implied shared phase.
    legs_phase = rng.uniform(0.0, 2.0 * math.pi)
    if rng.uniform() < 0.5:
        spine_phase = legs_phase + math.pi
        clav_phase = legs_phase + math.pi
    else:
        spine_phase = rng.uniform(0.0, 2.0 * math.pi)
        clav_phase = rng.uniform(0.0, 2.0 * math.pi)
    arms_phase = legs_phase + math.pi  # arms counter-swing the legs

    def osc(amp_range, phase_center, bias=0.0, freq=None):
        amp = rng.uniform(*amp_range)
        phase = phase_center + rng.uniform(-0.08, 0.08)
        f = f1 if freq is None else freq
        return lambda t: bias + amp * math.sin(2.0 * math.pi * f * t + phase)

    def drift(lo, hi, amp=(0.03, 0.12)):
        base = rng.uniform(lo, hi)
        a = rng.uniform(*amp)
        f = rng.uniform(0.04, 0.12)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        return lambda t: base + a * math.sin(2.0 * math.pi * f * t + phase)

    spine_lean = drift(-0.05, 0.40)
    spine1_pitch = osc((0.06, 0.20), spine_phase)
    spine2_pitch = osc((0.03, 0.12), spine_phase)
    spine2_roll = osc((0.0, 0.08), spine_phase)
    spine2_twist = osc((0.0, 0.12), spine_phase)
    neck_pitch = osc((0.0, 0.12), spine_phase)
    shrug_rest = drift(-0.20, 0.50, amp=(0.04, 0.14))
    clav_shrug = osc((0.08, 0.25), clav_phase)
    clav_forward = osc((0.0, 0.25), clav_phase)
    arm_swing = osc((0.10, 0.50), arms_phase)
    arm_hang = rng.uniform(0.9, 1.3)
    elbow_bend = osc((0.05, 0.25), arms_phase, bias=rng.uniform(0.1, 0.4))
    stance_width = drift(0.03, 0.35)
    hip_spread = osc((0.08, 0.22), legs_phase)
    hip_swing = osc((0.05, 0.22), legs_phase)
    knee_amp = rng.uniform(0.08, 0.30)
    knee_phase = legs_phase + rng.uniform(-0.08, 0.08)
    yaw = osc((0.0, 0.3), 0.0, bias=rng.uniform(-math.pi, math.pi), freq=rng.uniform(0.015, 0.04))
    bob = osc((0.01, 0.03), legs_phase, freq=2.0 * f1)
    wander_x = osc((0.0, 0.8), 0.0, freq=0.07)
    wander_z = osc((0.0, 0.8), 0.0, freq=0.07)

    name_to_idx = {j.name: i for i, j in enumerate(skeleton.joints)}
    eye = np.eye(3)
    poses = []
    for frame in range(frames):
        t = frame / frame_rate
        rot = np.tile(eye, (skeleton.joint_count, 1, 1))

        def put(name, matrix):
            rot[name_to_idx[name]] = matrix

        put("pelvis", _rot_y(yaw(t)))
        put("spine1", _rot_x(spine_lean(t) + spine1_pitch(t)))
        put(
            "spine2",
            _rot_z(spine2_roll(t)) @ _rot_x(spine2_pitch(t)) @ _rot_y(spine2_twist(t)),
        )
        put("neck", _rot_x(neck_pitch(t)))
        shrug = shrug_rest(t) + clav_shrug(t)
        protract = clav_forward(t)
        put("rclav", _rot_z(-shrug) @ _rot_y(-protract))
        put("lclav", _rot_z(shrug) @ _rot_y(protract))
        swing = arm_swing(t)
        put("rshoulder", _rot_z(arm_hang) @ _rot_x(swing))
        put("lshoulder", _rot_z(-arm_hang) @ _rot_x(-swing))
        put("relbow", _rot_z(elbow_bend(t)))
        put("lelbow", _rot_z(-elbow_bend(t)))
        spread = stance_width(t) + hip_spread(t)
        leg = hip_swing(t)
        put("rhip", _rot_z(-spread) @ _rot_x(leg))
        put("lhip", _rot_z(spread) @ _rot_x(-leg))
        # knees only fold backwards
        bend_r = knee_amp * (1.0 + math.sin(2 * math.pi * f1 * t + knee_phase)) / 2
        bend_l = knee_amp * (1.0 - math.sin(2 * math.pi * f1 * t + knee_phase)) / 2
        put("rknee", _rot_x(bend_r))
        put("lknee", _rot_x(bend_l))

        root = np.array([wander_x(t), HIP_HEIGHT + bob(t), wander_z(t)])
        world = forward_kinematics(skeleton, rot, root)
        poses.append(to_root_relative(world, skeleton.named_roles["pelvis"], skeleton.named_roles))
    return AnimationClip(tuple(poses), frame_rate, clip_id)


def generate_clips(
    n_clips: int,
    frames_per_clip: int = 120,
    frame_rate: float = 30.0,
    seed: int = 0,
    id_prefix: str = "synth",
) -> tuple[Skeleton, list[AnimationClip]]:
    skeleton = default_skeleton()
    rng = np.random.Generator(np.random.PCG64(seed))
    clips = [
        generate_clip(skeleton, frames_per_clip, frame_rate, rng, f"{id_prefix}-{i:03d}")
        for i in range(n_clips)
    ]
    return skeleton, clips


def generate_dataset(
    n_clips: int = 100,
    frames_per_clip: int = 120,
    frame_rate: float = 30.0,
    seed: int = 0,
    id_prefix: str = "synth",
) -> PoseDataset:
    skeleton, clips = generate_clips(n_clips, frames_per_clip, frame_rate, seed, id_prefix)
    stats = compute_stats(np.concatenate([c.as_matrix() for c in clips]))
    return PoseDataset(skeleton, stats, tuple(clips))
