"""Dense-layer kernels with two interchangeable backends.

``python`` runs on numpy (matmuls go through BLAS), ``compiled`` on the
Cython extension ``_ckernels`` (scalar loops with a fixed reduction order).
The backend is chosen once at import time:

* ``POSEMETRIC_BACKEND=python`` or ``compiled`` forces one;
* unset/``auto`` uses numpy, which the committed benchmark
  (benchmarks/bench_kernels.py) shows is the faster lane for the
  batch-1024 training shapes on BLAS-backed numpy builds.

Both backends are deterministic run-to-run for a given build; they are
equivalent to float32 round-off, not bit-identical to each other. The
compiled backend handles float32 only; float64 arrays (used by the
gradient-check oracle) always take the numpy path.
"""
from __future__ import annotations

import os

import numpy as np


def _dense_fwd_np(x, w, b, relu: bool):
    """pre = x @ w.T + b, out = act(pre). x: (B, I), w: (O, I), b: (O,)."""
    pre = x @ w.T
    pre += b
    out = np.maximum(pre, 0) if relu else pre
    return pre, out


def _dense_bwd_np(x, w, pre, d_out, relu: bool):
    """Gradients of a dense layer; relu subgradient at exactly 0 is 0."""
    d_pre = d_out * (pre > 0) if relu else d_out
    d_w = d_pre.T @ x
    d_b = d_pre.sum(axis=0)
    d_x = d_pre @ w
    return d_w, d_b, d_x


def _adam_update_np(param, grad, m, v, lr, beta1, beta2, eps, t: int):
    """In-place Adam with bias correction; all arrays share param's dtype."""
    one = param.dtype.type(1)
    b1 = param.dtype.type(beta1)
    b2 = param.dtype.type(beta2)
    m *= b1
    m += (one - b1) * grad
    v *= b2
    v += (one - b2) * grad * grad
    m_hat = m / (one - b1**t)
    v_hat = v / (one - b2**t)
    param -= param.dtype.type(lr) * m_hat / (np.sqrt(v_hat) + param.dtype.type(eps))


_compiled = None
try:
    from . import _ckernels as _compiled  # built by setup.py; optional
except ImportError:
    _compiled = None


def _pick_backend() -> str:
    choice = os.environ.get("POSEMETRIC_BACKEND", "auto").strip().lower()
    if choice in ("", "auto"):
        return "python"
    if choice == "python":
        return "python"
    if choice == "compiled":
        if _compiled is None:
            raise ImportError(
                "POSEMETRIC_BACKEND=compiled but posemetric.nn._ckernels is not built; "
                "reinstall the package with a working C toolchain"
            )
        return "compiled"
    raise ValueError(f"POSEMETRIC_BACKEND must be auto|python|compiled, got {choice!r}")


BACKEND = _pick_backend()


def compiled_available() -> bool:
    return _compiled is not None


def _use_compiled(*arrays) -> bool:
    if BACKEND != "compiled":
        return False
    return all(a.dtype == np.float32 for a in arrays)


def dense_fwd(x, w, b, relu: bool):
    if _use_compiled(x, w, b):
        return _compiled.dense_fwd(
            np.ascontiguousarray(x), np.ascontiguousarray(w), np.ascontiguousarray(b), relu
        )
    return _dense_fwd_np(x, w, b, relu)


def dense_bwd(x, w, pre, d_out, relu: bool):
    if _use_compiled(x, w, pre, d_out):
        return _compiled.dense_bwd(
            np.ascontiguousarray(x),
            np.ascontiguousarray(w),
            np.ascontiguousarray(pre),
            np.ascontiguousarray(d_out),
            relu,
        )
    return _dense_bwd_np(x, w, pre, d_out, relu)


def adam_update(param, grad, m, v, lr, beta1, beta2, eps, t: int):
    if _use_compiled(param, grad, m, v):
        _compiled.adam_update(
            param.reshape(-1),
            np.ascontiguousarray(grad).reshape(-1),
            m.reshape(-1),
            v.reshape(-1),
            lr,
            beta1,
            beta2,
            eps,
            t,
        )
        return
    _adam_update_np(param, grad, m, v, lr, beta1, beta2, eps, t)


# Explicit handles for the benchmark, bypassing the import-time selection.
PYTHON_KERNELS = (_dense_fwd_np, _dense_bwd_np, _adam_update_np)
COMPILED_KERNELS = (
    None
    if _compiled is None
    else (_compiled.dense_fwd, _compiled.dense_bwd, _compiled.adam_update)
)
