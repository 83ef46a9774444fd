"""Command-line entry point.

Exit codes: 0 success, 2 usage or input error, 3 runtime failure. Heavy
imports happen inside the command handlers so thread limits can be pinned
before numpy loads its BLAS.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUNTIME = 3


class InputError(Exception):
    pass


def _default_seed() -> int:
    try:
        return int(os.environ.get("POSEMETRIC_SEED", "0"))
    except ValueError:
        return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="posemetric",
        description="Edit character animation through objective pose metrics.",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=1,
        help="BLAS threads (default 1 for bit-reproducible training)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a directory of BVH files into a dataset")
    p.add_argument("--bvh-dir", required=True)
    p.add_argument("--out", required=True, help="output dataset JSON path")
    p.add_argument("--roles", help="JSON file mapping role names to joint names")

    p = sub.add_parser("synth", help="generate a procedural synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--clips", type=int, default=100)
    p.add_argument("--frames", type=int, default=120)
    p.add_argument("--frame-rate", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("train-ae", help="train the latent pose space")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out-bundle", required=True)
    _add_training_flags(p, default_steps=2000)

    p = sub.add_parser("train-metric", help="train an edit network for one metric")
    p.add_argument("--dataset", required=True)
    p.add_argument("--bundle", required=True)
    p.add_argument("--metric", required=True)
    _add_training_flags(p, default_steps=20000)

    p = sub.add_parser("edit", help="edit a clip offline around a key frame")
    p.add_argument("--bundle", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--clip", required=True, help="clip id")
    p.add_argument("--frame", type=int, required=True, help="peak frame")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="METRIC=VALUE",
        help="target metric value in radians (repeatable)",
    )
    p.add_argument("--radius", type=int, default=3)
    p.add_argument("--shape", choices=["hat", "sine"], default="hat")
    p.add_argument("--out", required=True, help="output clip file (dataset JSON format)")

    p = sub.add_parser("eval", help="report reconstruction and edit quality")
    p.add_argument("--bundle", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--metric", required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--max-delta", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("serve", help="run the edit service")
    p.add_argument("--bundle", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--ui", help="directory of static UI files to serve at /")

    p = sub.add_parser("metrics", help="metric registry commands")
    msub = p.add_subparsers(dest="metrics_command", required=True)
    msub.add_parser("list", help="list registered metrics and required roles")

    return parser


def _add_training_flags(p: argparse.ArgumentParser, default_steps: int) -> None:
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--batch", type=int, default=1024)
    p.add_argument("--steps", type=int, default=default_steps)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-early-stop", action="store_true")
    p.add_argument("--loss-csv", help="loss history CSV path (default: next to the bundle)")


def _training_config(args):
    from .pipeline import TrainingConfig

    return TrainingConfig(
        learning_rate=args.lr,
        batch_size=args.batch,
        steps=args.steps,
        seed=_default_seed() if args.seed is None else args.seed,
        early_stop=not args.no_early_stop,
    )


def _write_loss_csv(path, history) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("step,loss\n")
        for step, loss in history:
            f.write(f"{step},{loss:.9g}\n")


def _require_file(path, what: str) -> None:
    if not os.path.exists(path):
        raise InputError(f"{what} not found: {path}")


def cmd_ingest(args) -> int:
    from .bvh import BvhError, clip_from_bvh, parse_bvh, resolve_roles, write_dataset
    from .skeleton import Skeleton, compute_stats
    import numpy as np

    if not os.path.isdir(args.bvh_dir):
        raise InputError(f"not a directory: {args.bvh_dir}")
    overrides = None
    if args.roles:
        _require_file(args.roles, "role-mapping file")
        with open(args.roles, "r", encoding="utf-8") as f:
            overrides = json.load(f)

    names = sorted(n for n in os.listdir(args.bvh_dir) if n.lower().endswith(".bvh"))
    clips = []
    skeleton = None
    for name in names:
        path = os.path.join(args.bvh_dir, name)
        try:
            with open(path, "r", encoding="utf-8", errors="replace") as f:
                doc = parse_bvh(f.read())
            clip = clip_from_bvh(doc, overrides, clip_id=os.path.splitext(name)[0])
        except (BvhError, ValueError) as e:
            print(f"warning: skipping {name}: {e}", file=sys.stderr)
            continue
        if skeleton is None:
            skeleton = doc.skeleton
        elif doc.skeleton.joint_count != skeleton.joint_count:
            print(
                f"warning: skipping {name}: {doc.skeleton.joint_count} joints, "
                f"expected {skeleton.joint_count}",
                file=sys.stderr,
            )
            continue
        clips.append(clip)
    if not clips:
        raise InputError(f"no parseable BVH files in {args.bvh_dir}")

    skeleton = Skeleton(skeleton.joints, resolve_roles(skeleton, overrides))
    stats = compute_stats(np.concatenate([c.as_matrix() for c in clips]))
    write_dataset(clips, skeleton, stats, args.out)
    print(f"wrote {args.out}: {len(clips)} clips, {sum(len(c) for c in clips)} poses")
    return EXIT_OK


def cmd_synth(args) -> int:
    from .bvh import write_dataset
    from .synthetic import generate_dataset

    seed = _default_seed() if args.seed is None else args.seed
    ds = generate_dataset(args.clips, args.frames, args.frame_rate, seed)
    write_dataset(ds.clips, ds.skeleton, ds.stats, args.out)
    print(f"wrote {args.out}: {len(ds.clips)} clips, {ds.pose_count} poses (seed {seed})")
    return EXIT_OK


def cmd_train_ae(args) -> int:
    from .bvh import read_dataset
    from .pipeline import ModelBundle, save_bundle, train_autoencoder

    _require_file(args.dataset, "dataset")
    dataset = read_dataset(args.dataset)
    config = _training_config(args)
    model, history = train_autoencoder(dataset, config)
    save_bundle(args.out_bundle, ModelBundle(model))
    csv_path = args.loss_csv or os.path.join(args.out_bundle, "loss_autoencoder.csv")
    _write_loss_csv(csv_path, history)
    print(
        f"trained autoencoder: {len(history)} steps, "
        f"loss {history[0][1]:.6f} -> {history[-1][1]:.6f}; bundle at {args.out_bundle}"
    )
    return EXIT_OK


def cmd_train_metric(args) -> int:
    from .bvh import read_dataset
    from .metrics import default_registry
    from .pipeline import load_bundle, metric_weight_file, save_bundle, train_metric_network

    _require_file(args.dataset, "dataset")
    dataset = read_dataset(args.dataset)
    bundle = load_bundle(args.bundle)
    registry = default_registry()
    if args.metric not in registry:
        raise InputError(
            f"unknown metric {args.metric!r}; registered: {', '.join(registry.names())}"
        )
    config = _training_config(args)
    network, history = train_metric_network(
        bundle.model, registry.get(args.metric), dataset, config
    )
    bundle.metric_networks[args.metric] = network
    save_bundle(args.bundle, bundle)
    csv_path = args.loss_csv or os.path.join(args.bundle, f"loss_metric_{args.metric}.csv")
    _write_loss_csv(csv_path, history)
    print(
        f"trained metric network {args.metric!r}: {len(history)} steps, "
        f"loss {history[0][1]:.6f} -> {history[-1][1]:.6f}; "
        f"wrote {metric_weight_file(args.metric)}"
    )
    return EXIT_OK


def _parse_targets(pairs) -> dict[str, float]:
    targets = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        if not sep:
            raise InputError(f"expected METRIC=VALUE, got {pair!r}")
        try:
            targets[name.strip()] = float(value)
        except ValueError:
            raise InputError(f"target value for {name!r} is not a number: {value!r}") from None
    if not targets:
        raise InputError("provide at least one --set METRIC=VALUE")
    return targets


def cmd_edit(args) -> int:
    from .bvh import read_dataset, write_dataset
    from .pipeline import CURVE_SHAPES, PipelineError, edit_animation, load_bundle
    from .skeleton import AnimationClip

    _require_file(args.dataset, "dataset")
    dataset = read_dataset(args.dataset)
    bundle = load_bundle(args.bundle)
    targets = _parse_targets(args.set)

    clip = next((c for c in dataset.clips if c.id == args.clip), None)
    if clip is None:
        raise InputError(
            f"clip {args.clip!r} not in dataset; ids: {[c.id for c in dataset.clips]}"
        )
    try:
        curve = CURVE_SHAPES[args.shape](len(clip), args.frame, args.radius)
        metric_targets = [(bundle.network_for(n), v) for n, v in targets.items()]
        edited = edit_animation(bundle.model, metric_targets, clip, curve)
    except PipelineError as e:
        raise InputError(str(e)) from None
    # keep untouched frames pristine: outside the curve support the animator
    # expects the original data, not its reconstruction
    poses = [
        edited.poses[t] if curve.factors[t] > 0.0 else clip.poses[t]
        for t in range(len(clip))
    ]
    out_clip = AnimationClip(tuple(poses), clip.frame_rate, clip.id + "-edited")
    write_dataset([out_clip], dataset.skeleton, dataset.stats, args.out)
    print(
        f"edited clip {clip.id!r} at frame {args.frame} (radius {args.radius}, "
        f"{args.shape}); wrote {args.out}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    import numpy as np

    from .bvh import read_dataset
    from .metrics import default_registry
    from .pipeline import edit_pose, load_bundle, reconstruct

    _require_file(args.dataset, "dataset")
    dataset = read_dataset(args.dataset)
    bundle = load_bundle(args.bundle)
    registry = default_registry()
    if args.metric not in registry:
        raise InputError(f"unknown metric {args.metric!r}")
    metric = registry.get(args.metric)
    network = bundle.network_for(args.metric)

    rng = np.random.default_rng(_default_seed() if args.seed is None else args.seed)
    poses = [p for c in dataset.clips for p in c.poses]
    if not poses:
        raise InputError("dataset has no poses")
    idx = rng.integers(0, len(poses), args.trials)

    recon_errors = []
    drift_errors = []
    successes = 0
    evaluated = 0
    for i in idx:
        pose = poses[i]
        recon = reconstruct(bundle.model, pose)
        recon_errors.append(
            float(np.linalg.norm(recon.positions - pose.positions, axis=1).mean())
        )
        try:
            before = metric.evaluate(pose)
        except ValueError:
            continue
        evaluated += 1
        target = before + rng.uniform(-args.max_delta, args.max_delta)
        edited = edit_pose(bundle.model, [(network, target)], pose)
        after = metric.evaluate(edited)
        if abs(after - target) < abs(before - target):
            successes += 1
        noop = edit_pose(bundle.model, [(network, before)], pose)
        drift_errors.append(
            float(np.linalg.norm(noop.positions - pose.positions, axis=1).mean())
        )

    print("reconstruction:")
    print(f"  mean per-joint error: {np.mean(recon_errors):.6f} m over {args.trials} poses")
    print("metric-move success:")
    rate = successes / max(1, evaluated)
    print(
        f"  {args.metric}: {successes}/{evaluated} trials moved toward the target "
        f"({rate:.1%}, targets within +-{args.max_delta} rad)"
    )
    print("no-op drift:")
    print(
        f"  mean per-joint drift at target=current: {np.mean(drift_errors):.6f} m "
        f"({np.mean(drift_errors) / max(np.mean(recon_errors), 1e-12):.2f}x reconstruction)"
    )
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .bvh import read_dataset
    from .pipeline import load_bundle
    from .service import create_app

    _require_file(args.dataset, "dataset")
    if not os.path.isdir(args.bundle):
        raise InputError(f"bundle directory not found: {args.bundle}")
    bundle = load_bundle(args.bundle)
    dataset = read_dataset(args.dataset)
    app = create_app(bundle, dataset, ui_dir=args.ui)
    print(f"serving edit API on http://{args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def cmd_metrics_list(_args) -> int:
    from .metrics import default_registry

    registry = default_registry()
    for name in registry.names():
        metric = registry.get(name)
        print(f"{name}: requires {', '.join(metric.required_roles)}")
    return EXIT_OK


_HANDLERS = {
    "ingest": cmd_ingest,
    "synth": cmd_synth,
    "train-ae": cmd_train_ae,
    "train-metric": cmd_train_metric,
    "edit": cmd_edit,
    "eval": cmd_eval,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = str(max(1, args.threads))
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, threads)

    if args.command == "metrics":
        return cmd_metrics_list(args)
    handler = _HANDLERS[args.command]
    try:
        return handler(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # runtime failure contract
        print(f"runtime failure: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
