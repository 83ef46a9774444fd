# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Float32 dense-layer kernels with a fixed, single-threaded reduction order.

Semantics mirror the numpy backend in kernels.py; results agree with it to
float32 round-off (summation orders differ, so bit-identity is only
guaranteed within one backend).
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport sqrtf

cnp.import_array()


cdef inline float _dot(const float* a, const float* b, Py_ssize_t n) noexcept nogil:
    # Four accumulator lanes: fixed reassociation that the C compiler can
    # vectorize without -ffast-math.
    cdef float s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef Py_ssize_t k = 0
    while k + 4 <= n:
        s0 += a[k] * b[k]
        s1 += a[k + 1] * b[k + 1]
        s2 += a[k + 2] * b[k + 2]
        s3 += a[k + 3] * b[k + 3]
        k += 4
    while k < n:
        s0 += a[k] * b[k]
        k += 1
    return (s0 + s1) + (s2 + s3)


def dense_fwd(const float[:, ::1] x, const float[:, ::1] w, const float[::1] b, bint relu):
    """pre = x @ w.T + b, out = act(pre). x: (B, I), w: (O, I), b: (O,)."""
    cdef Py_ssize_t bs = x.shape[0], ni = x.shape[1], no = w.shape[0]
    pre_arr = np.empty((bs, no), dtype=np.float32)
    cdef float[:, ::1] pre = pre_arr
    cdef Py_ssize_t i, o
    cdef float z
    with nogil:
        for i in range(bs):
            for o in range(no):
                pre[i, o] = b[o] + _dot(&x[i, 0], &w[o, 0], ni)
    if not relu:
        return pre_arr, pre_arr
    out_arr = np.empty((bs, no), dtype=np.float32)
    cdef float[:, ::1] out = out_arr
    with nogil:
        for i in range(bs):
            for o in range(no):
                z = pre[i, o]
                out[i, o] = z if z > 0.0 else 0.0
    return pre_arr, out_arr


def dense_bwd(const float[:, ::1] x, const float[:, ::1] w,
              const float[:, ::1] pre, const float[:, ::1] d_out, bint relu):
    """Gradients of a dense layer; relu subgradient at exactly 0 is 0."""
    cdef Py_ssize_t bs = x.shape[0], ni = x.shape[1], no = w.shape[0]
    d_pre_arr = np.empty((bs, no), dtype=np.float32)
    d_w_arr = np.zeros((no, ni), dtype=np.float32)
    d_b_arr = np.zeros(no, dtype=np.float32)
    d_x_arr = np.zeros((bs, ni), dtype=np.float32)
    cdef float[:, ::1] d_pre = d_pre_arr
    cdef float[:, ::1] d_w = d_w_arr
    cdef float[::1] d_b = d_b_arr
    cdef float[:, ::1] d_x = d_x_arr
    cdef Py_ssize_t i, o, k
    cdef float g
    with nogil:
        for i in range(bs):
            for o in range(no):
                if relu and pre[i, o] <= 0.0:
                    d_pre[i, o] = 0.0
                else:
                    d_pre[i, o] = d_out[i, o]
        # Batch index outermost so every accumulation order is fixed.
        for i in range(bs):
            for o in range(no):
                g = d_pre[i, o]
                d_b[o] += g
                for k in range(ni):
                    d_w[o, k] += g * x[i, k]
                for k in range(ni):
                    d_x[i, k] += g * w[o, k]
    return d_w_arr, d_b_arr, d_x_arr


def adam_update(float[::1] param, const float[::1] grad,
                float[::1] m, float[::1] v,
                double lr, double beta1, double beta2, double eps, long t):
    """In-place Adam step with bias correction, elementwise in float32."""
    cdef Py_ssize_t n = param.shape[0]
    cdef float b1 = <float> beta1
    cdef float b2 = <float> beta2
    cdef float one = 1.0
    cdef float bc1 = one - <float> (beta1 ** t)
    cdef float bc2 = one - <float> (beta2 ** t)
    cdef float flr = <float> lr
    cdef float feps = <float> eps
    cdef float g, m_hat, v_hat
    cdef Py_ssize_t k
    with nogil:
        for k in range(n):
            g = grad[k]
            m[k] = b1 * m[k] + (one - b1) * g
            v[k] = b2 * v[k] + (one - b2) * g * g
            m_hat = m[k] / bc1
            v_hat = v[k] / bc2
            param[k] -= flr * m_hat / (sqrtf(v_hat) + feps)
