import numpy as np
import pytest

from posemetric.metrics import MetricRegistry
from posemetric.skeleton import ROLE_NAMES
from posemetric.synthetic import default_skeleton, generate_clips, generate_dataset

REGISTRY = MetricRegistry()


class TestDefaultSkeleton:
    def test_21_joints_with_all_roles(self):
        sk = default_skeleton()
        assert sk.joint_count == 21
        for role in ROLE_NAMES:
            assert role in sk.named_roles

    def test_topologically_sorted(self):
        sk = default_skeleton()
        for i, joint in enumerate(sk.joints):
            if joint.parent is not None:
                assert joint.parent < i


class TestGeneration:
    def test_shapes_and_finiteness(self):
        skeleton, clips = generate_clips(3, frames_per_clip=25, seed=4)
        assert len(clips) == 3
        for clip in clips:
            assert len(clip) == 25
            assert clip.joint_count == skeleton.joint_count
            for pose in clip.poses:
                assert np.isfinite(pose.positions).all()

    def test_seed_determinism(self):
        _, a = generate_clips(2, 20, seed=9)
        _, b = generate_clips(2, 20, seed=9)
        for ca, cb in zip(a, b):
            np.testing.assert_array_equal(ca.as_matrix(), cb.as_matrix())

    def test_different_seeds_differ(self):
        _, a = generate_clips(1, 20, seed=1)
        _, b = generate_clips(1, 20, seed=2)
        assert not np.array_equal(a[0].as_matrix(), b[0].as_matrix())

    def test_bone_lengths_rigid_across_frames(self):
        skeleton, clips = generate_clips(2, 30, seed=6)
        offsets = skeleton.offsets()
        parents = skeleton.parent_indices()
        for clip in clips:
            for pose in clip.poses[::7]:
                for j, parent in enumerate(parents):
                    if parent < 0:
                        continue
                    bone = np.linalg.norm(pose.positions[j] - pose.positions[parent])
                    assert bone == pytest.approx(np.linalg.norm(offsets[j]), abs=1e-6)

    def test_root_relative_frames(self):
        _, clips = generate_clips(1, 15, seed=3)
        for pose in clips[0].poses:
            assert pose.positions[0, 0] == 0.0
            assert pose.positions[0, 2] == 0.0
            assert pose.positions[0, 1] > 0.5  # pelvis keeps its height

    def test_temporal_coherence(self):
        # neighboring frames stay close; pair-sampling training relies on it
        _, clips = generate_clips(3, 40, seed=8)
        for clip in clips:
            frames = clip.as_matrix()
            step = np.linalg.norm(frames[1:] - frames[:-1], axis=1)
            assert step.max() < 0.6

    def test_dataset_stats_and_metric_spread(self):
        ds = generate_dataset(n_clips=12, frames_per_clip=60, seed=13)
        assert ds.pose_count == 720
        assert (ds.stats.std > 0).all()
        for name in REGISTRY.names():
            metric = REGISTRY.get(name)
            values = np.array([metric.evaluate(p) for p in ds.iter_poses()])
            assert np.isfinite(values).all()
            assert values.std() > 0.03, f"{name} barely varies"
