# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled message recursions; see _kernels_py for the reference semantics."""

from libc.math cimport log, isfinite

import numpy as np

IMPL = "c"


def forward_kernel(
    double[:, ::1] like,
    long[:, ::1] pred,
    double inv_q,
    double[:, ::1] out,
    double[::1] logs,
):
    cdef Py_ssize_t n = like.shape[0]
    cdef Py_ssize_t num_states = like.shape[1]
    cdef Py_ssize_t q = pred.shape[1]
    cdef double uniform = 1.0 / num_states
    cdef double[::1] prev = np.full(num_states, uniform)
    cdef double[::1] row = np.empty(num_states)
    cdef Py_ssize_t i, s, d
    cdef double acc = 0.0, total, incoming
    cdef int zero_steps = 0

    for i in range(n):
        total = 0.0
        for s in range(num_states):
            incoming = 0.0
            for d in range(q):
                incoming += prev[pred[s, d]]
            row[s] = like[i, s] * inv_q * incoming
            total += row[s]
        if not isfinite(total):
            raise FloatingPointError(f"non-finite forward message at step {i}")
        if total > 0.0:
            for s in range(num_states):
                row[s] /= total
            acc += log(total)
        else:
            for s in range(num_states):
                row[s] = uniform
            zero_steps += 1
        for s in range(num_states):
            out[i, s] = row[s]
            prev[s] = row[s]
        logs[i] = acc
    return zero_steps


def backward_kernel(
    double[:, ::1] like,
    long[:, ::1] succ,
    double inv_q,
    double[:, ::1] out,
    double[::1] logs,
):
    cdef Py_ssize_t n = like.shape[0]
    cdef Py_ssize_t num_states = like.shape[1]
    cdef Py_ssize_t q = succ.shape[1]
    cdef double uniform = 1.0 / num_states
    cdef double[::1] nxt = np.full(num_states, uniform)
    cdef double[::1] weighted = np.empty(num_states)
    cdef double[::1] row = np.empty(num_states)
    cdef Py_ssize_t i, s, d
    cdef double acc = 0.0, total, outgoing
    cdef int zero_steps = 0

    for s in range(num_states):
        out[n - 1, s] = uniform
    logs[n - 1] = 0.0

    for i in range(n - 2, -1, -1):
        for s in range(num_states):
            weighted[s] = like[i + 1, s] * nxt[s]
        total = 0.0
        for s in range(num_states):
            outgoing = 0.0
            for d in range(q):
                outgoing += weighted[succ[s, d]]
            row[s] = inv_q * outgoing
            total += row[s]
        if not isfinite(total):
            raise FloatingPointError(f"non-finite backward message at step {i}")
        if total > 0.0:
            for s in range(num_states):
                row[s] /= total
            acc += log(total)
        else:
            for s in range(num_states):
                row[s] = uniform
            zero_steps += 1
        for s in range(num_states):
            out[i, s] = row[s]
            nxt[s] = row[s]
        logs[i] = acc
    return zero_steps
