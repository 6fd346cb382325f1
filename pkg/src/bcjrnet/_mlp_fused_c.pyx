# cython: boundscheck=False, wraparound=False, cdivision=True
"""Fused classifier kernels for the fixed 3-layer architecture.

One call runs forward, backprop, and the Adam update for a batch (or just
the forward pass for inference), avoiding the per-op dispatch cost that
dominates the pure-NumPy path at these layer sizes. Matrix products go
through BLAS dgemm; activations, softmax, and Adam are plain C loops.

Only the (1 -> h1 sigmoid -> h2 relu -> K softmax) shape used by the state
classifier is supported; other shapes take the NumPy path.
"""

from libc.math cimport exp, log, sqrt

import numpy as np

from scipy.linalg.cython_blas cimport dgemm

IMPL = "c"


cdef inline void _mm_nn(double* a, double* b, double* c, int m, int k, int n) noexcept nogil:
    # row-major c (m,n) = a (m,k) @ b (k,n)
    cdef double one = 1.0, zero = 0.0
    dgemm("N", "N", &n, &m, &k, &one, b, &n, a, &k, &zero, c, &n)


cdef inline void _mm_tn(double* a, double* b, double* c, int m, int k, int n) noexcept nogil:
    # row-major c (m,n) = a^T @ b with a stored (k,m), b (k,n)
    cdef double one = 1.0, zero = 0.0
    dgemm("N", "T", &n, &m, &k, &one, b, &n, a, &m, &zero, c, &n)


cdef inline void _mm_nt(double* a, double* b, double* c, int m, int k, int n) noexcept nogil:
    # row-major c (m,n) = a @ b^T with a stored (m,k), b (n,k)
    cdef double one = 1.0, zero = 0.0
    dgemm("T", "N", &n, &m, &k, &one, b, &k, a, &k, &zero, c, &n)


cdef int _forward(
    const double[::1] flat, double[::1] y, double in_mean, double in_scale,
    int h1, int h2, int k_out,
    double[::1] a0, double[:, ::1] a1, double[:, ::1] a2, double[:, ::1] p,
) except -1:
    """Shared forward pass; fills a0, a1, a2 and softmax probabilities p."""
    cdef Py_ssize_t batch = y.shape[0]
    cdef Py_ssize_t w2_off = 2 * h1
    cdef Py_ssize_t b2_off = w2_off + h1 * h2
    cdef Py_ssize_t w3_off = b2_off + h2
    cdef Py_ssize_t b3_off = w3_off + h2 * k_out
    cdef Py_ssize_t i, j
    cdef double z, zmax, total

    for i in range(batch):
        a0[i] = (y[i] - in_mean) / in_scale
        for j in range(h1):
            z = a0[i] * flat[j] + flat[h1 + j]
            a1[i, j] = 1.0 / (1.0 + exp(-z))

    _mm_nn(&a1[0, 0], &flat[w2_off], &a2[0, 0], batch, h1, h2)
    for i in range(batch):
        for j in range(h2):
            z = a2[i, j] + flat[b2_off + j]
            a2[i, j] = z if z > 0.0 else 0.0

    _mm_nn(&a2[0, 0], &flat[w3_off], &p[0, 0], batch, h2, k_out)
    for i in range(batch):
        zmax = p[i, 0] + flat[b3_off]
        for j in range(k_out):
            p[i, j] += flat[b3_off + j]
            if p[i, j] > zmax:
                zmax = p[i, j]
        total = 0.0
        for j in range(k_out):
            p[i, j] = exp(p[i, j] - zmax)
            total += p[i, j]
        for j in range(k_out):
            p[i, j] /= total
    return 0


def forward_probs(const double[::1] flat, y, double in_mean, double in_scale,
                  int h1, int h2, int k_out):
    """Softmax outputs for a batch, shape (len(y), k_out)."""
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t batch = yv.shape[0]
    cdef double[::1] a0 = np.empty(batch)
    cdef double[:, ::1] a1 = np.empty((batch, h1))
    cdef double[:, ::1] a2 = np.empty((batch, h2))
    out = np.empty((batch, k_out))
    cdef double[:, ::1] p = out
    _forward(flat, yv, in_mean, in_scale, h1, h2, k_out, a0, a1, a2, p)
    return out


def train_step(
    double[::1] flat, y, labels, double in_mean, double in_scale,
    int h1, int h2, int k_out,
    double[::1] m, double[::1] v, int step,
    double lr, double beta1, double beta2, double eps,
):
    """One batch: forward, cross-entropy backprop, in-place Adam update.

    Returns the mean batch loss. ``step`` is the post-increment Adam step
    counter (caller passes its counter already advanced to this update).
    """
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef long[::1] lab = np.ascontiguousarray(labels, dtype=np.int64)
    cdef Py_ssize_t batch = yv.shape[0]
    cdef Py_ssize_t total_params = flat.shape[0]

    cdef double[::1] a0 = np.empty(batch)
    cdef double[:, ::1] a1 = np.empty((batch, h1))
    cdef double[:, ::1] a2 = np.empty((batch, h2))
    cdef double[:, ::1] p = np.empty((batch, k_out))
    cdef double[:, ::1] d2 = np.empty((batch, h2))
    cdef double[:, ::1] d1 = np.empty((batch, h1))
    cdef double[::1] g = np.zeros(total_params)

    cdef Py_ssize_t w2_off = 2 * h1
    cdef Py_ssize_t b2_off = w2_off + h1 * h2
    cdef Py_ssize_t w3_off = b2_off + h2
    cdef Py_ssize_t b3_off = w3_off + h2 * k_out
    cdef Py_ssize_t i, j
    cdef double loss = 0.0, acc, c1, c2, mh, vh

    _forward(flat, yv, in_mean, in_scale, h1, h2, k_out, a0, a1, a2, p)

    # softmax + cross-entropy gradient: (p - onehot) / batch
    for i in range(batch):
        loss -= log(p[i, lab[i]])
        for j in range(k_out):
            p[i, j] /= batch
        p[i, lab[i]] -= 1.0 / batch
    loss /= batch

    # output layer grads
    _mm_tn(&a2[0, 0], &p[0, 0], &g[w3_off], h2, batch, k_out)
    for j in range(k_out):
        acc = 0.0
        for i in range(batch):
            acc += p[i, j]
        g[b3_off + j] = acc

    # relu layer
    _mm_nt(&p[0, 0], &flat[w3_off], &d2[0, 0], batch, k_out, h2)
    for i in range(batch):
        for j in range(h2):
            if a2[i, j] <= 0.0:
                d2[i, j] = 0.0
    _mm_tn(&a1[0, 0], &d2[0, 0], &g[w2_off], h1, batch, h2)
    for j in range(h2):
        acc = 0.0
        for i in range(batch):
            acc += d2[i, j]
        g[b2_off + j] = acc

    # sigmoid layer
    _mm_nt(&d2[0, 0], &flat[w2_off], &d1[0, 0], batch, h2, h1)
    for i in range(batch):
        for j in range(h1):
            d1[i, j] *= a1[i, j] * (1.0 - a1[i, j])
    for j in range(h1):
        acc = 0.0
        for i in range(batch):
            acc += a0[i] * d1[i, j]
        g[j] = acc
        acc = 0.0
        for i in range(batch):
            acc += d1[i, j]
        g[h1 + j] = acc

    # Adam
    c1 = 1.0 / (1.0 - beta1 ** step)
    c2 = 1.0 / (1.0 - beta2 ** step)
    for j in range(total_params):
        m[j] += (1.0 - beta1) * (g[j] - m[j])
        v[j] += (1.0 - beta2) * (g[j] * g[j] - v[j])
        mh = m[j] * c1
        vh = v[j] * c2
        flat[j] -= lr * mh / (sqrt(vh) + eps)
    return loss
