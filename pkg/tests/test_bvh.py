import numpy as np
import pytest

import bvh_fixtures as fx
from posemetric.bvh import (
    BvhDocument,
    BvhError,
    BvhParseError,
    DatasetFormatError,
    RoleMappingError,
    clip_from_bvh,
    parse_bvh,
    read_dataset,
    resolve_roles,
    write_dataset,
)
from posemetric.skeleton import (
    AnimationClip,
    Joint,
    NormalizationStats,
    Skeleton,
    compute_stats,
)


class TestParse:
    def test_minimal_one_joint(self):
        doc = parse_bvh(fx.MINIMAL_ONE_JOINT)
        assert doc.skeleton.joint_count == 1
        assert doc.skeleton.joints[0].name == "Hips"
        assert doc.channel_layout == (
            ("Xposition", "Yposition", "Zposition", "Zrotation", "Xrotation", "Yrotation"),
        )
        assert doc.frames.shape == (1, 6)
        assert (doc.frames == 0).all()

    def test_three_joint_offsets_match_authored_values(self):
        doc = parse_bvh(fx.THREE_JOINT_CHAIN)
        assert doc.skeleton.joint_names == ["Hips", "Spine", "Neck"]
        np.testing.assert_array_equal(doc.skeleton.joints[0].offset, [0.0, 0.0, 0.0])
        np.testing.assert_array_equal(doc.skeleton.joints[1].offset, [0.0, 0.5, 0.0])
        np.testing.assert_array_equal(doc.skeleton.joints[2].offset, [0.0, 0.4, 0.0])
        assert doc.skeleton.joints[1].parent == 0
        assert doc.skeleton.joints[2].parent == 1
        assert len(doc.end_sites) == 1
        parent, offset = doc.end_sites[0]
        assert parent == 2
        np.testing.assert_array_equal(offset, [0.0, 0.15, 0.0])
        assert doc.frame_count == 2

    def test_determinism(self):
        a = parse_bvh(fx.THREE_JOINT_CHAIN)
        b = parse_bvh(fx.THREE_JOINT_CHAIN)
        assert a.skeleton.joint_names == b.skeleton.joint_names
        np.testing.assert_array_equal(a.frames, b.frames)

    @pytest.mark.parametrize("name", sorted(fx.MALFORMED_FIXTURES))
    def test_malformed_reports_line_number(self, name):
        text, expected_line = fx.MALFORMED_FIXTURES[name]
        with pytest.raises(BvhParseError) as exc:
            parse_bvh(text)
        assert exc.value.line == expected_line
        assert f"line {expected_line}:" in str(exc.value)

    def test_frame_count_error_names_motion_section(self):
        with pytest.raises(BvhParseError, match="MOTION"):
            parse_bvh(fx.FRAME_COUNT_MISMATCH)


class TestClipConversion:
    def test_rest_pose_with_translation(self):
        doc = parse_bvh(fx.THREE_JOINT_CHAIN)
        clip = clip_from_bvh(doc, clip_id="chain")
        # frame 0: zero rotations, root moved to (5, 0.9, 2)
        pose = clip.poses[0]
        np.testing.assert_allclose(
            pose.positions, [[0, 0.9, 0], [0, 1.4, 0], [0, 1.8, 0]], atol=1e-12
        )
        assert clip.frame_rate == pytest.approx(1 / 0.033333)
        assert pose.roles["pelvis"] == 0

    def test_spine_rotation_second_frame(self):
        # frame 1 has Spine Zrotation = 30 deg; neck swings in the xy plane.
        doc = parse_bvh(fx.THREE_JOINT_CHAIN)
        clip = clip_from_bvh(doc)
        neck = clip.poses[1].positions[2]
        expected = np.array(
            [-0.4 * np.sin(np.radians(30.0)), 0.9 + 0.5 + 0.4 * np.cos(np.radians(30.0)), 0.0]
        )
        np.testing.assert_allclose(neck, expected, atol=1e-9)

    def test_yaw_180_flips_chain(self):
        doc = parse_bvh(fx.YAW_CHAIN)
        clip = clip_from_bvh(doc)
        chain = clip.poses[0].positions[1] - clip.poses[0].positions[0]
        np.testing.assert_allclose(chain, [0.0, 0.0, -1.0], atol=1e-6)

    def test_degenerate_frame_time(self):
        doc = parse_bvh(fx.MINIMAL_ONE_JOINT)
        broken = BvhDocument(
            doc.skeleton, doc.end_sites, doc.channel_layout, doc.frames, 0.0
        )
        with pytest.raises(BvhError):
            clip_from_bvh(broken)

    def test_missing_pelvis_mapping(self):
        text = fx.MINIMAL_ONE_JOINT.replace("Hips", "Torso")
        with pytest.raises(RoleMappingError):
            clip_from_bvh(parse_bvh(text))

    def test_role_override(self):
        text = fx.MINIMAL_ONE_JOINT.replace("Hips", "Torso")
        clip = clip_from_bvh(parse_bvh(text), role_overrides={"pelvis": "Torso"})
        assert clip.poses[0].roles["pelvis"] == 0

    def test_fk_never_nan_for_finite_channels(self):
        doc = parse_bvh(fx.THREE_JOINT_CHAIN)
        rng = np.random.default_rng(44)
        frames = rng.uniform(-720, 720, size=(25, doc.channel_count))
        wild = BvhDocument(
            doc.skeleton, doc.end_sites, doc.channel_layout, frames, doc.frame_time
        )
        clip = clip_from_bvh(wild)
        for pose in clip.poses:
            assert np.isfinite(pose.positions).all()


class TestRoleResolution:
    def test_default_table(self):
        sk = parse_bvh(fx.THREE_JOINT_CHAIN).skeleton
        roles = resolve_roles(sk)
        assert roles["pelvis"] == 0
        assert roles["spine1"] == 1
        assert roles["neck"] == 2

    def test_bad_override(self):
        sk = parse_bvh(fx.MINIMAL_ONE_JOINT).skeleton
        with pytest.raises(RoleMappingError):
            resolve_roles(sk, {"pelvis": "NoSuchJoint"})


def small_dataset(rng):
    skeleton = Skeleton(
        (
            Joint("hips", None, np.zeros(3)),
            Joint("chest", 0, np.array([0.0, 0.5, 0.0])),
        ),
        {"pelvis": 0},
    )
    clips = []
    for i in range(2):
        frames = rng.normal(size=(4, 6)).astype(np.float32)
        clips.append(AnimationClip.from_matrix(frames, 30.0, f"clip{i}", {"pelvis": 0}))
    stats = compute_stats(np.concatenate([c.as_matrix() for c in clips]))
    return skeleton, stats, clips


class TestDatasetIo:
    def test_round_trip_within_tolerance(self, tmp_path):
        rng = np.random.default_rng(50)
        skeleton, stats, clips = small_dataset(rng)
        path = tmp_path / "data.json"
        write_dataset(clips, skeleton, stats, path)
        ds = read_dataset(path)
        assert [c.id for c in ds.clips] == ["clip0", "clip1"]
        for orig, back in zip(clips, ds.clips):
            assert np.abs(orig.as_matrix() - back.as_matrix()).max() < 1e-6
        np.testing.assert_allclose(ds.stats.mean, stats.mean, atol=1e-6)

    def test_second_round_trip_byte_identical(self, tmp_path):
        rng = np.random.default_rng(51)
        skeleton, stats, clips = small_dataset(rng)
        p1 = tmp_path / "a.json"
        p2 = tmp_path / "b.json"
        write_dataset(clips, skeleton, stats, p1)
        ds = read_dataset(p1)
        write_dataset(ds.clips, ds.skeleton, ds.stats, p2)
        ds2 = read_dataset(p2)
        p3 = tmp_path / "c.json"
        write_dataset(ds2.clips, ds2.skeleton, ds2.stats, p3)
        assert p2.read_bytes() == p3.read_bytes()

    def test_mixed_joint_count_rejected(self, tmp_path):
        rng = np.random.default_rng(52)
        skeleton, stats, clips = small_dataset(rng)
        other = AnimationClip.from_matrix(np.zeros((2, 9), np.float32), 30.0, "bad", {})
        with pytest.raises(DatasetFormatError):
            write_dataset(clips + [other], skeleton, stats, tmp_path / "x.json")

    def test_empty_clip_list(self, tmp_path):
        rng = np.random.default_rng(53)
        skeleton, stats, _ = small_dataset(rng)
        path = tmp_path / "empty.json"
        write_dataset([], skeleton, stats, path)
        ds = read_dataset(path)
        assert ds.clips == ()
        assert ds.skeleton.joint_count == 2

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"skeleton": ')
        with pytest.raises(DatasetFormatError):
            read_dataset(path)

    def test_missing_field(self, tmp_path):
        path = tmp_path / "missing.json"
        path.write_text('{"skeleton": {"joints": []}}')
        with pytest.raises(DatasetFormatError):
            read_dataset(path)
