"""Stateless wire API over a loaded model bundle and dataset.

Every handler is a pure function of the request and the immutable loaded
state, so identical requests produce identical response bytes. Responses
are rendered with the canonical JSON writer (floats at 9 significant
digits); errors use {"code", "message"} bodies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from pydantic import BaseModel, Field

from . import jsonfmt
from .metrics import MetricRegistry, default_registry, metric_stats
from .pipeline import (
    CURVE_SHAPES,
    ModelBundle,
    PipelineError,
    edit_animation,
    edit_pose,
)
from .skeleton import AnimationClip, Pose, PoseDataset, unflatten


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        self.status = status
        self.message = message
        super().__init__(message)


class TargetSpec(BaseModel):
    metric: str
    value: float


class EditPoseRequest(BaseModel):
    pose: list[float]
    targets: list[TargetSpec] = Field(min_length=1)


class EditClipRequest(BaseModel):
    clip_id: str
    peak_frame: int
    radius: int = 3
    shape: str = "hat"
    targets: list[TargetSpec] = Field(min_length=1)


@dataclass
class ServiceState:
    """Loaded once at startup, then shared read-only across requests."""

    bundle: Optional[ModelBundle] = None
    dataset: Optional[PoseDataset] = None
    registry: MetricRegistry = field(default_factory=default_registry)
    metric_dataset_stats: dict = field(default_factory=dict)

    def ready(self) -> bool:
        return self.bundle is not None and self.dataset is not None

    def compute_metric_stats(self) -> None:
        poses = list(self.dataset.iter_poses()) if self.dataset else []
        self.metric_dataset_stats = {}
        for name in self.registry.names():
            metric = self.registry.get(name)
            try:
                self.metric_dataset_stats[name] = metric_stats(metric, poses)
            except ValueError:
                continue


def _json_response(payload, status: int = 200) -> Response:
    return Response(
        content=jsonfmt.dumps(payload), status_code=status, media_type="application/json"
    )


def _error(status: int, message: str) -> Response:
    return _json_response({"code": status, "message": message}, status)


def create_app(
    bundle: ModelBundle | None = None,
    dataset: PoseDataset | None = None,
    registry: MetricRegistry | None = None,
    ui_dir: str | None = None,
) -> FastAPI:
    state = ServiceState(bundle=bundle, dataset=dataset)
    if registry is not None:
        state.registry = registry
    state.registry.freeze()
    if state.dataset is not None:
        state.compute_metric_stats()

    app = FastAPI(title="posemetric edit service", docs_url=None, redoc_url=None)
    app.state.service = state

    @app.exception_handler(ApiError)
    async def handle_api_error(_request: Request, exc: ApiError):
        return _error(exc.status, exc.message)

    @app.exception_handler(RequestValidationError)
    async def handle_validation(_request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        loc = ".".join(str(p) for p in first.get("loc", ()))
        return _error(422, f"invalid request: {loc}: {first.get('msg', 'validation error')}")

    @app.exception_handler(PipelineError)
    async def handle_pipeline_error(_request: Request, exc: PipelineError):
        return _error(422, str(exc))

    @app.exception_handler(Exception)
    async def handle_unexpected(_request: Request, exc: Exception):
        return _error(500, f"internal error: {exc}")

    def require_ready() -> None:
        if not state.ready():
            raise ApiError(503, "model bundle not loaded")

    def clip_by_id(clip_id: str) -> AnimationClip:
        for clip in state.dataset.clips:
            if clip.id == clip_id:
                return clip
        raise ApiError(404, f"unknown clip {clip_id!r}")

    def targets_to_pairs(targets: list[TargetSpec]):
        pairs = []
        for spec in targets:
            if not math.isfinite(spec.value):
                raise ApiError(422, f"target for {spec.metric!r} is not finite")
            if spec.metric not in state.bundle.metric_networks:
                raise ApiError(
                    422,
                    f"no trained network for metric {spec.metric!r}; "
                    f"available: {sorted(state.bundle.metric_networks)}",
                )
            pairs.append((state.bundle.metric_networks[spec.metric], spec.value))
        return pairs

    def readout(pose: Pose, names: list[str]) -> dict[str, float]:
        values = {}
        for name in names:
            values[name] = state.registry.evaluate(name, pose)
        return values

    @app.get("/api/health")
    def health():
        if not state.ready():
            return _error(503, "model bundle not loaded")
        return _json_response(
            {
                "status": "ok",
                "bundle_version": state.bundle.version,
                "J": state.bundle.model.joint_count,
                "latent_dim": state.bundle.model.latent_dim,
            }
        )

    @app.get("/api/metrics")
    def list_metrics():
        require_ready()
        items = []
        for name in state.registry.names():
            metric = state.registry.get(name)
            stats = state.metric_dataset_stats.get(name)
            items.append(
                {
                    "name": name,
                    "required_roles": list(metric.required_roles),
                    "mean": None if stats is None else stats.mean,
                    "std": None if stats is None else stats.std,
                    "trained": name in state.bundle.metric_networks,
                }
            )
        return _json_response(items)

    @app.get("/api/clips")
    def list_clips():
        require_ready()
        return _json_response(
            [
                {"id": c.id, "frames": len(c), "frame_rate": float(c.frame_rate)}
                for c in state.dataset.clips
            ]
        )

    @app.get("/api/clips/{clip_id}")
    def clip_detail(clip_id: str):
        require_ready()
        clip = clip_by_id(clip_id)
        per_frame: dict[str, list] = {}
        for name in state.registry.names():
            metric = state.registry.get(name)
            values = []
            for pose in clip.poses:
                try:
                    values.append(metric.evaluate(pose))
                except ValueError:
                    values.append(None)
            per_frame[name] = values
        return _json_response(
            {
                "id": clip.id,
                "frame_rate": float(clip.frame_rate),
                "J": clip.joint_count,
                "parents": state.dataset.skeleton.parent_indices(),
                "frames": [[float(v) for v in row] for row in clip.as_matrix()],
                "metrics": per_frame,
            }
        )

    @app.post("/api/edit/pose")
    def edit_pose_endpoint(request: EditPoseRequest):
        require_ready()
        model = state.bundle.model
        if len(request.pose) != model.pose_dim:
            raise ApiError(
                422, f"pose must have {model.pose_dim} floats, got {len(request.pose)}"
            )
        values = np.array(request.pose, dtype=np.float64)
        if not np.isfinite(values).all():
            raise ApiError(422, "pose contains non-finite values")
        roles = state.dataset.skeleton.named_roles
        pose = unflatten(values, model.joint_count, roles)
        pairs = targets_to_pairs(request.targets)
        names = [t.metric for t in request.targets]
        before = readout(pose, names)
        edited = edit_pose(model, pairs, pose)
        after = readout(edited, names)
        return _json_response(
            {
                "pose": [float(v) for v in edited.positions.reshape(-1).astype(np.float32)],
                "readouts": [
                    {"name": n, "before": before[n], "after": after[n]} for n in names
                ],
            }
        )

    @app.post("/api/edit/clip")
    def edit_clip_endpoint(request: EditClipRequest):
        require_ready()
        clip = clip_by_id(request.clip_id)
        if request.shape not in CURVE_SHAPES:
            raise ApiError(
                422, f"unknown curve shape {request.shape!r}; choose hat or sine"
            )
        if not 0 <= request.peak_frame < len(clip):
            raise ApiError(
                422, f"peak frame {request.peak_frame} outside clip of {len(clip)} frames"
            )
        if request.radius < 1:
            raise ApiError(422, f"curve radius must be >= 1, got {request.radius}")
        curve = CURVE_SHAPES[request.shape](len(clip), request.peak_frame, request.radius)
        pairs = targets_to_pairs(request.targets)
        names = [t.metric for t in request.targets]
        edited = edit_animation(state.bundle.model, pairs, clip, curve)
        before = {n: [] for n in names}
        after = {n: [] for n in names}
        for orig_pose, new_pose in zip(clip.poses, edited.poses):
            for n in names:
                before[n].append(state.registry.evaluate(n, orig_pose))
                after[n].append(state.registry.evaluate(n, new_pose))
        return _json_response(
            {
                "id": edited.id,
                "frame_rate": float(edited.frame_rate),
                "curve": [float(w) for w in curve.factors],
                "frames": [[float(v) for v in row] for row in edited.as_matrix()],
                "readouts": [
                    {"name": n, "before": before[n], "after": after[n]} for n in names
                ],
            }
        )

    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
