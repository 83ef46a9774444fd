import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from posemetric.metrics import MetricRegistry
from posemetric.service import create_app

REGISTRY = MetricRegistry()


@pytest.fixture(scope="module")
def client(tiny_bundle, tiny_dataset):
    app = create_app(tiny_bundle, tiny_dataset)
    with TestClient(app) as c:
        yield c


@pytest.fixture(scope="module")
def served(tiny_dataset):
    return tiny_dataset


class TestHealth:
    def test_ok_after_startup(self, client, tiny_bundle):
        r = client.get("/api/health")
        assert r.status_code == 200
        body = r.json()
        assert body["status"] == "ok"
        assert body["latent_dim"] == tiny_bundle.model.latent_dim
        assert body["J"] == tiny_bundle.model.joint_count
        assert body["bundle_version"] == 1

    def test_503_without_bundle(self, tiny_dataset):
        app = create_app(None, tiny_dataset)
        with TestClient(app) as c:
            r = c.get("/api/health")
            assert r.status_code == 503
            assert r.json() == {"code": 503, "message": "model bundle not loaded"}


class TestMetricsEndpoint:
    def test_contains_builtins_alphabetical(self, client):
        r = client.get("/api/metrics")
        assert r.status_code == 200
        names = [m["name"] for m in r.json()]
        assert names == ["legs_spread", "shoulders_openness", "spine_flexion"]

    def test_stds_positive(self, client):
        for item in client.get("/api/metrics").json():
            assert item["std"] is not None and item["std"] > 0

    def test_required_roles_reported(self, client):
        by_name = {m["name"]: m for m in client.get("/api/metrics").json()}
        assert by_name["legs_spread"]["required_roles"] == ["pelvis", "rknee", "lknee"]


class TestClipsEndpoints:
    def test_listing_matches_dataset(self, client, served):
        r = client.get("/api/clips")
        assert r.status_code == 200
        items = r.json()
        assert [c["id"] for c in items] == [c.id for c in served.clips]
        assert items[0]["frames"] == len(served.clips[0])

    def test_unknown_clip_404(self, client):
        r = client.get("/api/clips/not-a-clip")
        assert r.status_code == 404
        assert r.json()["code"] == 404

    def test_detail_frames_and_metrics(self, client, served):
        clip = served.clips[0]
        r = client.get(f"/api/clips/{clip.id}")
        assert r.status_code == 200
        body = r.json()
        assert len(body["frames"]) == len(clip)
        assert len(body["frames"][0]) == 3 * clip.joint_count
        assert len(body["parents"]) == clip.joint_count
        for name, series in body["metrics"].items():
            assert len(series) == len(clip)
        # readouts come from the same metric implementations
        first = REGISTRY.evaluate("legs_spread", clip.poses[0])
        assert body["metrics"]["legs_spread"][0] == pytest.approx(first, abs=1e-6)


class TestEditPose:
    def request_for(self, served, frame=4):
        pose = served.clips[0].poses[frame]
        return {
            "pose": [float(v) for v in pose.positions.reshape(-1)],
            "targets": [{"metric": "legs_spread", "value": 2.3}],
        }

    def test_readouts_match_returned_pose(self, client, served):
        r = client.post("/api/edit/pose", json=self.request_for(served))
        assert r.status_code == 200
        body = r.json()
        edited = np.array(body["pose"]).reshape(-1, 3)
        roles = served.skeleton.named_roles
        from posemetric.skeleton import Pose

        check = REGISTRY.evaluate("legs_spread", Pose(edited, roles))
        readout = body["readouts"][0]
        assert readout["name"] == "legs_spread"
        assert readout["after"] == pytest.approx(check, abs=1e-6)

    def test_empty_targets_422(self, client, served):
        req = self.request_for(served)
        req["targets"] = []
        r = client.post("/api/edit/pose", json=req)
        assert r.status_code == 422
        assert r.json()["code"] == 422

    def test_unknown_metric_422(self, client, served):
        req = self.request_for(served)
        req["targets"] = [{"metric": "bogus", "value": 1.0}]
        assert client.post("/api/edit/pose", json=req).status_code == 422

    def test_wrong_pose_length_422(self, client):
        r = client.post(
            "/api/edit/pose",
            json={"pose": [0.0, 1.0], "targets": [{"metric": "legs_spread", "value": 2.0}]},
        )
        assert r.status_code == 422

    def test_non_finite_target_422(self, client, served):
        # non-standard JSON extension some encoders emit; the server must
        # reject the non-finite value rather than edit with it
        req = self.request_for(served)
        body = json.dumps(req).replace("2.3", "Infinity")
        r = client.post(
            "/api/edit/pose", content=body, headers={"content-type": "application/json"}
        )
        assert r.status_code == 422

    def test_identical_requests_identical_bytes(self, client, served):
        req = self.request_for(served)
        a = client.post("/api/edit/pose", json=req)
        b = client.post("/api/edit/pose", json=req)
        assert a.content == b.content

    def test_concurrent_identical_requests_identical_bodies(self, client, served):
        from concurrent.futures import ThreadPoolExecutor

        req = self.request_for(served)
        with ThreadPoolExecutor(max_workers=8) as pool:
            bodies = list(
                pool.map(lambda _: client.post("/api/edit/pose", json=req).content, range(16))
            )
        assert all(body == bodies[0] for body in bodies)


class TestEditClip:
    def request_for(self, served, **overrides):
        req = {
            "clip_id": served.clips[0].id,
            "peak_frame": 10,
            "radius": 3,
            "shape": "hat",
            "targets": [{"metric": "legs_spread", "value": 2.4}],
        }
        req.update(overrides)
        return req

    def test_outside_radius_equals_reconstruction(self, client, served, tiny_bundle):
        from posemetric.pipeline import reconstruct

        clip = served.clips[0]
        r = client.post("/api/edit/clip", json=self.request_for(served))
        assert r.status_code == 200
        body = r.json()
        frames = np.array(body["frames"], dtype=np.float32)
        assert frames.shape == (len(clip), 3 * clip.joint_count)
        for t in range(len(clip)):
            if abs(t - 10) > 3:
                recon = reconstruct(tiny_bundle.model, clip.poses[t])
                expect = recon.positions.reshape(-1).astype(np.float32)
                np.testing.assert_array_equal(frames[t], expect)

    def test_sine_shape_accepted(self, client, served):
        r = client.post("/api/edit/clip", json=self.request_for(served, shape="sine"))
        assert r.status_code == 200

    def test_invalid_frame_422(self, client, served):
        r = client.post("/api/edit/clip", json=self.request_for(served, peak_frame=9999))
        assert r.status_code == 422

    def test_invalid_radius_422(self, client, served):
        r = client.post("/api/edit/clip", json=self.request_for(served, radius=0))
        assert r.status_code == 422

    def test_unknown_clip_404(self, client, served):
        r = client.post("/api/edit/clip", json=self.request_for(served, clip_id="zzz"))
        assert r.status_code == 404

    def test_readout_series_cover_every_frame(self, client, served):
        r = client.post("/api/edit/clip", json=self.request_for(served))
        body = r.json()
        for series in body["readouts"]:
            assert len(series["before"]) == len(served.clips[0])
            assert len(series["after"]) == len(served.clips[0])


class TestUprightClip:
    def test_spine_flexion_of_upright_clip_is_zero(self, tiny_bundle):
        # a standing rest pose (identity rotations through FK) keeps the
        # neck straight above the pelvis on every frame
        import numpy as np

        from posemetric.skeleton import (
            AnimationClip,
            PoseDataset,
            compute_stats,
            forward_kinematics,
            to_root_relative,
        )
        from posemetric.synthetic import default_skeleton

        skeleton = default_skeleton()
        eye = np.tile(np.eye(3), (skeleton.joint_count, 1, 1))
        world = forward_kinematics(skeleton, eye, (0.0, 0.92, 0.0))
        pose = to_root_relative(world, 0, skeleton.named_roles)
        clip = AnimationClip((pose,) * 4, 30.0, "upright")
        stats = compute_stats(clip.as_matrix())
        dataset = PoseDataset(skeleton, stats, (clip,))

        app = create_app(tiny_bundle, dataset)
        with TestClient(app) as c:
            body = c.get("/api/clips/upright").json()
            assert all(abs(v) < 1e-9 for v in body["metrics"]["spine_flexion"])


class TestCanonicalJson:
    def test_float_precision_round_trips_float32(self, client, served):
        body = client.get(f"/api/clips/{served.clips[0].id}").content
        parsed = json.loads(body)
        sent = np.array(parsed["frames"], dtype=np.float32)
        original = served.clips[0].as_matrix()
        np.testing.assert_array_equal(sent, original)
