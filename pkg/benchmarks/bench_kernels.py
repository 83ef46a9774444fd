"""Compare the numpy (BLAS) and compiled (Cython) kernel backends.

Two workloads matter in practice:
  * training step at batch 1024 through the pose autoencoder shapes;
  * single-pose edit latency (encode + metric network + decode, batch 1).

Run:  python benchmarks/bench_kernels.py
"""
import os
import sys
import time

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import numpy as np

from posemetric.nn import kernels

POSE_DIM = 63
HIDDEN = 512
LATENT = 64
METRIC_HIDDEN = 126
BATCH = 1024


def make_layers(rng, sizes):
    layers = []
    for a, b in zip(sizes, sizes[1:]):
        layers.append(
            (
                rng.normal(size=(b, a)).astype(np.float32) * 0.05,
                rng.normal(size=b).astype(np.float32) * 0.05,
            )
        )
    return layers


def train_step(fwd, bwd, upd, layers, moments, x, t):
    acts = [x]
    pres = []
    out = x
    for i, (w, b) in enumerate(layers):
        pre, out = fwd(out, w, b, i < len(layers) - 1)
        pres.append(pre)
        acts.append(out)
    d_out = ((out - x) * (2.0 / out.size)).astype(np.float32)
    for i in range(len(layers) - 1, -1, -1):
        w, b = layers[i]
        d_w, d_b, d_out = bwd(acts[i], w, pres[i], d_out, i < len(layers) - 1)
        m_w, v_w, m_b, v_b = moments[i]
        upd(w.reshape(-1), d_w.reshape(-1), m_w, v_w, 1e-4, 0.9, 0.999, 1e-8, t)
        upd(b, d_b, m_b, v_b, 1e-4, 0.9, 0.999, 1e-8, t)


def edit_pass(fwd, enc, metric, dec, pose, target):
    out = pose
    for i, (w, b) in enumerate(enc):
        _, out = fwd(out, w, b, i < len(enc) - 1)
    z = np.concatenate([out, target], axis=1)
    for i, (w, b) in enumerate(metric):
        _, z = fwd(z, w, b, i < len(metric) - 1)
    for i, (w, b) in enumerate(dec):
        _, z = fwd(z, w, b, i < len(dec) - 1)
    return z


def timeit(fn, min_seconds=1.0):
    fn()  # warm up
    n = 0
    start = time.perf_counter()
    while time.perf_counter() - start < min_seconds:
        fn()
        n += 1
    return (time.perf_counter() - start) / n


def main():
    if kernels.COMPILED_KERNELS is None:
        print("compiled backend not built; install with a working C toolchain")
        sys.exit(1)

    rng = np.random.default_rng(0)
    backends = {
        "python": kernels.PYTHON_KERNELS,
        "compiled": kernels.COMPILED_KERNELS,
    }

    enc = make_layers(rng, [POSE_DIM, HIDDEN, LATENT])
    dec = make_layers(rng, [LATENT, HIDDEN, POSE_DIM])
    metric = make_layers(rng, [LATENT + 1, METRIC_HIDDEN, LATENT])
    batch = rng.normal(size=(BATCH, POSE_DIM)).astype(np.float32)
    pose = rng.normal(size=(1, POSE_DIM)).astype(np.float32)
    target = rng.normal(size=(1, 1)).astype(np.float32)

    print(f"numpy {np.__version__}, single BLAS thread, batch {BATCH}")
    results = {}
    for name, (fwd, bwd, upd) in backends.items():
        layers = [(w.copy(), b.copy()) for w, b in enc + dec]
        moments = [
            (
                np.zeros(w.size, np.float32),
                np.zeros(w.size, np.float32),
                np.zeros_like(b),
                np.zeros_like(b),
            )
            for w, b in layers
        ]
        step = [0]

        def one_training_step():
            step[0] += 1
            train_step(fwd, bwd, upd, layers, moments, batch, step[0])

        t_train = timeit(one_training_step)

        def one_edit():
            edit_pass(fwd, enc, metric, dec, pose, target)

        t_edit = timeit(one_edit, min_seconds=0.5)
        results[name] = (t_train, t_edit)
        print(f"{name:9s} training step: {t_train * 1e3:8.2f} ms   single-pose edit: {t_edit * 1e6:8.1f} us")

    ratio_train = results["compiled"][0] / results["python"][0]
    ratio_edit = results["compiled"][1] / results["python"][1]
    print(f"compiled/python ratio: training {ratio_train:.2f}x, edit {ratio_edit:.2f}x")
    print("(values < 1 mean the compiled backend is faster)")


if __name__ == "__main__":
    main()
