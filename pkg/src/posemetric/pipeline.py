"""Latent pose space, per-metric edit networks, and clip editing.

An encoder/decoder pair maps normalized flattened poses to a 64-d latent
space. Each metric gets its own small network that takes a latent pose
concatenated with a standardized target value and returns an edited latent
pose. Multiple modules are combined by averaging their latent outputs, and
whole clips are edited by blending original and edited latents per frame
under a weight curve.
"""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np

from . import jsonfmt
from .metrics import MetricDef, MetricStats
from .nn import (
    AdamState,
    Mlp,
    NetworkError,
    adam_step,
    backward,
    forward,
    init_mlp,
    load_weights,
    mse_loss,
    save_weights,
    seeded_rng,
)
from .skeleton import (
    NormalizationStats,
    Pose,
    PoseDataset,
    AnimationClip,
    denormalize,
    flatten,
    normalize,
    unflatten,
)

log = logging.getLogger(__name__)

LATENT_DIM = 64
ENCODER_HIDDEN = 512
METRIC_HIDDEN = 126

BUNDLE_VERSION = 1
BUNDLE_FILE = "bundle.json"
ENCODER_FILE = "encoder.tnn"
DECODER_FILE = "decoder.tnn"


class PipelineError(ValueError):
    pass


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class TrainingConfig:
    """Optimization settings shared by the autoencoder and metric trainers."""

    learning_rate: float = 1e-4
    final_learning_rate: float | None = None  # exponential decay target; None = constant
    batch_size: int = 1024
    steps: int = 2000
    offset_range: int = 10  # target frame offset sampled uniformly in [-R, R]
    seed: int = 0
    latent_dim: int = LATENT_DIM
    hidden_units: int = ENCODER_HIDDEN
    metric_hidden_units: int = METRIC_HIDDEN
    # early stop: quit when validation loss has not improved by min_delta
    # for `patience` consecutive evaluations
    early_stop: bool = True
    val_fraction: float = 0.05
    eval_every: int = 50
    patience: int = 10
    min_delta: float = 1e-5

    def __post_init__(self):
        if self.batch_size < 1:
            raise PipelineError("batch size must be >= 1")
        if self.offset_range < 1:
            raise PipelineError("offset range must be >= 1")
        if self.steps < 1:
            raise PipelineError("step budget must be >= 1")

    def lr_at(self, step: int) -> float:
        """Learning rate for a 1-based step, decayed exponentially toward
        final_learning_rate over the step budget."""
        if self.final_learning_rate is None or self.steps <= 1:
            return self.learning_rate
        frac = (step - 1) / (self.steps - 1)
        return float(
            self.learning_rate
            * (self.final_learning_rate / self.learning_rate) ** frac
        )


@dataclass
class EncoderDecoder:
    """Latent pose space: encoder 3J -> hidden -> latent, decoder mirrored."""

    encoder: Mlp
    decoder: Mlp
    stats: NormalizationStats

    def __post_init__(self):
        if self.encoder.out_dim != self.decoder.in_dim:
            raise PipelineError("encoder output dim must equal decoder input dim")
        if self.encoder.in_dim != self.stats.dim:
            raise PipelineError("encoder input dim must match stats dim")

    @property
    def latent_dim(self) -> int:
        return self.encoder.out_dim

    @property
    def pose_dim(self) -> int:
        return self.encoder.in_dim

    @property
    def joint_count(self) -> int:
        return self.pose_dim // 3


@dataclass
class MetricNetwork:
    """Edit network for one metric: (latent ++ standardized target) -> latent."""

    metric_name: str
    net: Mlp
    standardization: MetricStats

    def __post_init__(self):
        if self.net.in_dim != self.net.out_dim + 1:
            raise PipelineError("metric network input dim must be latent dim + 1")

    @property
    def latent_dim(self) -> int:
        return self.net.out_dim


class LatentModule(Protocol):
    """Anything that maps a latent pose to a latent pose can join the
    averaging stage (e.g. an external latent-space IK solver)."""

    name: str

    def apply(self, latent: np.ndarray) -> np.ndarray: ...


@dataclass
class IdentityModule:
    """Trivial latent module; useful to test module composition."""

    name: str = "identity"

    def apply(self, latent: np.ndarray) -> np.ndarray:
        return latent


@dataclass
class MetricModule:
    """Binds a metric network to a target value, making it a LatentModule."""

    network: MetricNetwork
    target: float

    @property
    def name(self) -> str:
        return self.network.metric_name

    def apply(self, latent: np.ndarray) -> np.ndarray:
        return apply_metric(self.network, latent, self.target)


def encode(model: EncoderDecoder, pose: Pose) -> np.ndarray:
    """Normalize the flattened pose and run the encoder."""
    vec = flatten(pose).astype(np.float32)
    if vec.shape[0] != model.pose_dim:
        raise PipelineError(f"pose dim {vec.shape[0]} != model dim {model.pose_dim}")
    z, _ = forward(model.encoder, normalize(vec, model.stats).astype(np.float32))
    return z


def decode(model: EncoderDecoder, latent: np.ndarray, roles: Mapping[str, int] | None = None) -> Pose:
    """Run the decoder and denormalize back to joint positions."""
    latent = np.asarray(latent, dtype=np.float32)
    if latent.shape != (model.latent_dim,):
        raise PipelineError(f"latent shape {latent.shape} != ({model.latent_dim},)")
    y, _ = forward(model.decoder, latent)
    vec = denormalize(y, model.stats).astype(np.float32)
    return unflatten(vec, model.joint_count, roles)


def reconstruct(model: EncoderDecoder, pose: Pose) -> Pose:
    return decode(model, encode(model, pose), pose.roles)


def apply_metric(network: MetricNetwork, latent: np.ndarray, target: float) -> np.ndarray:
    """One forward pass of z ++ standardized target through the edit net."""
    if not math.isfinite(target):
        raise PipelineError(f"target metric value must be finite, got {target}")
    latent = np.asarray(latent, dtype=np.float32)
    if latent.shape != (network.latent_dim,):
        raise PipelineError(f"latent shape {latent.shape} != ({network.latent_dim},)")
    scaled = np.float32(network.standardization.standardize(target))
    inp = np.concatenate([latent, [scaled]]).astype(np.float32)
    z, _ = forward(network.net, inp)
    return z


def average_latents(latents: Sequence[np.ndarray]) -> np.ndarray:
    """Component-wise mean, summed in sorted order so the result does not
    depend on module order (exact, bitwise). The mean of identical inputs
    is returned as-is: (z + z + z) / 3 would otherwise pick up a rounding
    ulp for counts that are not powers of two."""
    if len(latents) == 0:
        raise PipelineError("cannot average an empty list of latents")
    stack = np.stack([np.asarray(z) for z in latents])
    if stack.ndim != 2:
        raise PipelineError("latents must be 1-D vectors of equal length")
    if stack.shape[0] == 1 or (stack[1:] == stack[0]).all():
        return stack[0].copy()
    stack = np.sort(stack, axis=0)
    total = stack[0].copy()
    for row in stack[1:]:
        total += row
    return total / stack.shape[0]


def _modules_for(
    model: EncoderDecoder,
    metric_targets: Sequence[tuple[MetricNetwork, float]],
    extra_modules: Sequence[LatentModule],
) -> list[LatentModule]:
    modules: list[LatentModule] = [MetricModule(net, float(t)) for net, t in metric_targets]
    modules.extend(extra_modules)
    if not modules:
        raise PipelineError("need at least one edit module")
    for m in modules:
        probe = getattr(m, "network", None)
        if probe is not None and probe.latent_dim != model.latent_dim:
            raise PipelineError(f"module {m.name!r} latent dim != model latent dim")
    return modules


def edit_pose(
    model: EncoderDecoder,
    metric_targets: Sequence[tuple[MetricNetwork, float]],
    pose: Pose,
    extra_modules: Sequence[LatentModule] = (),
) -> Pose:
    """Encode once, run every module on the same latent, average, decode."""
    modules = _modules_for(model, metric_targets, extra_modules)
    z = encode(model, pose)
    edited = [np.asarray(m.apply(z), dtype=np.float32) for m in modules]
    for m, e in zip(modules, edited):
        if e.shape != z.shape:
            raise PipelineError(f"module {m.name!r} returned latent shape {e.shape}")
    return decode(model, average_latents(edited), pose.roles)


@dataclass(frozen=True)
class WeightCurve:
    """Per-frame blend factor in [0, 1]."""

    factors: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.factors, dtype=np.float32).reshape(-1)
        if f.size < 1:
            raise PipelineError("weight curve needs at least one frame")
        if not ((f >= 0.0) & (f <= 1.0)).all():
            raise PipelineError("weight curve factors must lie in [0, 1]")
        f.flags.writeable = False
        object.__setattr__(self, "factors", f)

    def __len__(self) -> int:
        return self.factors.shape[0]


def _check_peak_radius(length: int, peak: int, radius: int) -> None:
    if not 0 <= peak < length:
        raise PipelineError(f"peak frame {peak} outside clip of {length} frames")
    if radius < 1:
        raise PipelineError(f"curve radius must be >= 1, got {radius}")


def hat_curve(length: int, peak: int, radius: int) -> WeightCurve:
    """1 at the peak, linear to 0 at +-radius, 0 beyond."""
    _check_peak_radius(length, peak, radius)
    k = np.abs(np.arange(length) - peak)
    return WeightCurve(np.maximum(0.0, 1.0 - k / radius))


def sine_curve(length: int, peak: int, radius: int) -> WeightCurve:
    """Cosine-shaped variant with the same support as the hat."""
    _check_peak_radius(length, peak, radius)
    k = np.abs(np.arange(length) - peak)
    inside = k <= radius
    w = np.zeros(length)
    w[inside] = 0.5 * (1.0 + np.cos(np.pi * k[inside] / radius))
    # pin the endpoints of the support exactly
    w[k == 0] = 1.0
    w[k == radius] = 0.0
    return WeightCurve(w)


CURVE_SHAPES: dict[str, Callable[[int, int, int], WeightCurve]] = {
    "hat": hat_curve,
    "sine": sine_curve,
}


def blend_latents(z: np.ndarray, z_bar: np.ndarray, w: float) -> np.ndarray:
    """Convex combination (1 - w) * z + w * z_bar; exact at the endpoints."""
    w = np.float32(w)
    return (np.float32(1.0) - w) * z + w * z_bar


def edit_animation(
    model: EncoderDecoder,
    metric_targets: Sequence[tuple[MetricNetwork, float]],
    clip: AnimationClip,
    curve: WeightCurve,
    extra_modules: Sequence[LatentModule] = (),
) -> AnimationClip:
    """Per frame t: z = E(frame), zbar = mean of module outputs, then decode
    blend_latents(z, zbar, W(t)). Frames are processed independently."""
    if len(curve) != len(clip):
        raise PipelineError(f"curve length {len(curve)} != clip length {len(clip)}")
    modules = _modules_for(model, metric_targets, extra_modules)
    out = []
    for t, pose in enumerate(clip.poses):
        z = encode(model, pose)
        w = curve.factors[t]
        if w == 0.0:  # blend_latents(z, _, 0) == z; skip the module work
            z_hat = z
        else:
            edited = [np.asarray(m.apply(z), dtype=np.float32) for m in modules]
            z_hat = blend_latents(z, average_latents(edited), w)
        out.append(decode(model, z_hat, pose.roles))
    return AnimationClip(tuple(out), clip.frame_rate, clip.id)


def _loss_nan_guard(loss: float, step: int, what: str) -> None:
    if not math.isfinite(loss):
        raise TrainingDivergedError(
            f"{what} loss became non-finite at step {step}; "
            "lower the learning rate or check the dataset"
        )


class _EarlyStopper:
    def __init__(self, cfg: TrainingConfig):
        self.enabled = cfg.early_stop
        self.patience = cfg.patience
        self.min_delta = cfg.min_delta
        self.best = math.inf
        self.stale = 0

    def should_stop(self, val_loss: float) -> bool:
        if not self.enabled:
            return False
        if val_loss < self.best - self.min_delta:
            self.best = val_loss
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


def train_autoencoder(
    dataset: PoseDataset, config: TrainingConfig
) -> tuple[EncoderDecoder, list[tuple[int, float]]]:
    """Train encoder and decoder jointly on squared reconstruction error."""
    frames = dataset.all_frames()
    if frames.shape[0] == 0:
        raise PipelineError("cannot train on an empty dataset")
    stats = dataset.stats
    data = normalize(frames, stats).astype(np.float32)

    rng = seeded_rng(config.seed)
    dim = data.shape[1]
    encoder = init_mlp(
        [dim, config.hidden_units, config.latent_dim], ["relu", "linear"], rng
    )
    decoder = init_mlp(
        [config.latent_dim, config.hidden_units, dim], ["relu", "linear"], rng
    )
    enc_state = AdamState.for_mlp(encoder, config.learning_rate)
    dec_state = AdamState.for_mlp(decoder, config.learning_rate)

    perm = rng.permutation(data.shape[0])
    n_val = int(data.shape[0] * config.val_fraction) if config.early_stop else 0
    val_idx = perm[:n_val]
    train_idx = perm[n_val:]
    if train_idx.size == 0:
        raise PipelineError("dataset too small for the validation split")

    stopper = _EarlyStopper(config)
    history: list[tuple[int, float]] = []
    for step in range(1, config.steps + 1):
        batch = data[train_idx[rng.integers(0, train_idx.size, config.batch_size)]]
        z, enc_caches = forward(encoder, batch)
        recon, dec_caches = forward(decoder, z)
        loss, grad = mse_loss(recon, batch)
        _loss_nan_guard(loss, step, "autoencoder")
        history.append((step, loss))
        try:
            dec_grads, d_z = backward(decoder, dec_caches, grad)
            enc_grads, _ = backward(encoder, enc_caches, d_z)
            enc_state.learning_rate = dec_state.learning_rate = config.lr_at(step)
            adam_step(decoder, dec_state, dec_grads)
            adam_step(encoder, enc_state, enc_grads)
        except NetworkError as e:  # non-finite gradients = divergence
            raise TrainingDivergedError(f"autoencoder diverged at step {step}: {e}") from e
        if n_val and step % config.eval_every == 0:
            val_recon, _ = forward(decoder, forward(encoder, data[val_idx])[0])
            val_loss, _ = mse_loss(val_recon, data[val_idx])
            if stopper.should_stop(val_loss):
                log.info("autoencoder early stop at step %d (val %.6f)", step, val_loss)
                break
    return EncoderDecoder(encoder, decoder, stats), history


@dataclass
class _PairSampler:
    """Samples (source frame, target frame) pairs from the same clip with a
    bounded frame offset; boundary-violating offsets are re-sampled."""

    frame_index: np.ndarray  # position of each pose inside its clip
    clip_length: np.ndarray  # length of the owning clip, per pose
    valid_target: np.ndarray  # metric evaluated successfully on this pose
    offset_range: int

    def sample(self, rng: np.random.Generator, count: int, pool: np.ndarray):
        src = pool[rng.integers(0, pool.size, count)]
        offsets = rng.integers(-self.offset_range, self.offset_range + 1, count)
        for _ in range(64):
            tgt = src + offsets
            bad = (
                (self.frame_index[src] + offsets < 0)
                | (self.frame_index[src] + offsets >= self.clip_length[src])
                | ~self.valid_target[np.clip(tgt, 0, self.valid_target.size - 1)]
            )
            if not bad.any():
                return src, src + offsets
            offsets = np.where(
                bad, rng.integers(-self.offset_range, self.offset_range + 1, count), offsets
            )
        raise PipelineError("could not sample valid pose pairs (clips too short?)")


def train_metric_network(
    model: EncoderDecoder,
    metric: MetricDef,
    dataset: PoseDataset,
    config: TrainingConfig,
) -> tuple[MetricNetwork, list[tuple[int, float]]]:
    """Train one edit network against a frozen encoder/decoder.

    Per iteration a batch of (source, target) pose pairs is sampled from the
    same clips; the network sees the source latent plus the standardized
    target metric value and is trained to reconstruct the target pose
    through the frozen decoder.
    """
    if not dataset.clips:
        raise PipelineError("cannot train on an empty dataset")
    for c in dataset.clips:
        if len(c) < 2:
            raise PipelineError(f"clip {c.id!r} is shorter than 2 frames")

    frames = dataset.all_frames()
    data = normalize(frames, model.stats).astype(np.float32)

    # Per-pose clip bookkeeping and metric values; failures are skipped.
    frame_index = np.concatenate([np.arange(len(c)) for c in dataset.clips])
    clip_length = np.concatenate([np.full(len(c), len(c)) for c in dataset.clips])
    values = np.zeros(frames.shape[0], dtype=np.float64)
    valid = np.zeros(frames.shape[0], dtype=bool)
    for i, pose in enumerate(dataset.iter_poses()):
        try:
            values[i] = metric.evaluate(pose)
            valid[i] = True
        except Exception as e:  # degenerate pose; sample is skipped
            log.warning("metric %s failed on pose %d: %s", metric.name, i, e)
    if not valid.any():
        raise PipelineError(f"metric {metric.name!r} failed on every dataset pose")
    if not valid.all():
        log.info(
            "metric %s: skipping %d/%d poses with failed evaluations",
            metric.name,
            int((~valid).sum()),
            valid.size,
        )

    standardization = MetricStats(
        float(values[valid].mean()), float(values[valid].std())
    )
    scaled_values = ((values - standardization.mean) / standardization.std).astype(np.float32)

    # The encoder is frozen: latents for every pose can be computed once.
    latents = forward(model.encoder, data)[0]

    rng = seeded_rng(config.seed)
    net = init_mlp(
        [model.latent_dim + 1, config.metric_hidden_units, model.latent_dim],
        ["relu", "linear"],
        rng,
    )
    state = AdamState.for_mlp(net, config.learning_rate)

    sampler = _PairSampler(frame_index, clip_length, valid, config.offset_range)
    pool = np.arange(frames.shape[0])
    perm = rng.permutation(pool.size)
    n_val = int(pool.size * config.val_fraction) if config.early_stop else 0
    val_pool = pool[perm[:n_val]]
    train_pool = pool[perm[n_val:]]
    if train_pool.size == 0:
        raise PipelineError("dataset too small for the validation split")
    val_pair = sampler.sample(rng, min(2048, val_pool.size), val_pool) if n_val else None

    def run_batch(src, tgt, train: bool):
        inp = np.concatenate([latents[src], scaled_values[tgt][:, None]], axis=1)
        z_hat, net_caches = forward(net, inp)
        recon, dec_caches = forward(model.decoder, z_hat)
        loss, grad = mse_loss(recon, data[tgt])
        if train:
            try:
                # decoder is frozen: only its input gradient flows back
                _, d_zhat = backward(model.decoder, dec_caches, grad)
                net_grads, _ = backward(net, net_caches, d_zhat)
                adam_step(net, state, net_grads)
            except NetworkError as e:
                raise TrainingDivergedError(
                    f"metric {metric.name} training diverged: {e}"
                ) from e
        return loss

    stopper = _EarlyStopper(config)
    history: list[tuple[int, float]] = []
    for step in range(1, config.steps + 1):
        state.learning_rate = config.lr_at(step)
        src, tgt = sampler.sample(rng, config.batch_size, train_pool)
        loss = run_batch(src, tgt, train=True)
        _loss_nan_guard(loss, step, f"metric {metric.name}")
        history.append((step, loss))
        if val_pair is not None and step % config.eval_every == 0:
            val_loss = run_batch(*val_pair, train=False)
            if stopper.should_stop(val_loss):
                log.info(
                    "metric %s early stop at step %d (val %.6f)", metric.name, step, val_loss
                )
                break
    return MetricNetwork(metric.name, net, standardization), history


@dataclass
class ModelBundle:
    """A trained latent space plus any number of metric networks."""

    model: EncoderDecoder
    metric_networks: dict[str, MetricNetwork] = field(default_factory=dict)
    version: int = BUNDLE_VERSION

    def network_for(self, name: str) -> MetricNetwork:
        try:
            return self.metric_networks[name]
        except KeyError:
            raise PipelineError(
                f"bundle has no trained network for metric {name!r}; "
                f"available: {sorted(self.metric_networks)}"
            ) from None


def metric_weight_file(name: str) -> str:
    return f"metric_{name}.tnn"


def save_bundle(directory, bundle: ModelBundle) -> None:
    os.makedirs(directory, exist_ok=True)
    save_weights(bundle.model.encoder, os.path.join(directory, ENCODER_FILE))
    save_weights(bundle.model.decoder, os.path.join(directory, DECODER_FILE))
    metrics_meta = {}
    for name in sorted(bundle.metric_networks):
        mn = bundle.metric_networks[name]
        save_weights(mn.net, os.path.join(directory, metric_weight_file(name)))
        metrics_meta[name] = {
            "mean": mn.standardization.mean,
            "std": mn.standardization.std,
        }
    meta = {
        "format_version": bundle.version,
        "J": bundle.model.joint_count,
        "latent_dim": bundle.model.latent_dim,
        "stats": {
            "mean": [float(v) for v in bundle.model.stats.mean],
            "std": [float(v) for v in bundle.model.stats.std],
        },
        "metrics": metrics_meta,
    }
    with open(os.path.join(directory, BUNDLE_FILE), "w", encoding="utf-8") as f:
        f.write(jsonfmt.dumps(meta))
        f.write("\n")


def load_bundle(directory) -> ModelBundle:
    bundle_path = os.path.join(directory, BUNDLE_FILE)
    try:
        with open(bundle_path, "r", encoding="utf-8") as f:
            meta = json.load(f)
    except FileNotFoundError:
        raise PipelineError(f"no bundle metadata at {bundle_path}") from None
    except json.JSONDecodeError as e:
        raise PipelineError(f"malformed bundle metadata: {e}") from None
    if meta.get("format_version") != BUNDLE_VERSION:
        raise PipelineError(
            f"bundle format version {meta.get('format_version')} != {BUNDLE_VERSION}"
        )
    stats = NormalizationStats(meta["stats"]["mean"], meta["stats"]["std"])
    model = EncoderDecoder(
        load_weights(os.path.join(directory, ENCODER_FILE)),
        load_weights(os.path.join(directory, DECODER_FILE)),
        stats,
    )
    if model.latent_dim != meta["latent_dim"] or model.joint_count != meta["J"]:
        raise PipelineError("bundle metadata disagrees with weight files")
    networks = {}
    for name, m in meta.get("metrics", {}).items():
        net = load_weights(os.path.join(directory, metric_weight_file(name)))
        networks[name] = MetricNetwork(name, net, MetricStats(m["mean"], m["std"]))
    return ModelBundle(model, networks, meta["format_version"])
