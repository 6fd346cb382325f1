"""NumPy implementation of the message recursions.

Drop-in fallback for the compiled kernel; same call signatures, same
normalization order. ``pred``/``succ`` are (S, q) tables listing each state's
shift-consistent neighbours, and ``like`` is the (n, S) observation
likelihood table. Both kernels write normalized messages into ``out`` and the
cumulative log normalization into ``logs``, returning the number of steps
where the message underflowed to zero and was reset to uniform.
"""

from __future__ import annotations

import numpy as np

IMPL = "python"


def forward_kernel(
    like: np.ndarray,
    pred: np.ndarray,
    inv_q: float,
    out: np.ndarray,
    logs: np.ndarray,
) -> int:
    n, num_states = like.shape
    uniform = 1.0 / num_states
    prev = np.full(num_states, uniform)
    zero_steps = 0
    acc = 0.0
    for i in range(n):
        row = like[i] * (inv_q * prev[pred].sum(axis=1))
        total = row.sum()
        if not np.isfinite(total):
            raise FloatingPointError(f"non-finite forward message at step {i}")
        if total > 0.0:
            row /= total
            acc += np.log(total)
        else:
            row = np.full(num_states, uniform)
            zero_steps += 1
        out[i] = row
        logs[i] = acc
        prev = row
    return zero_steps


def backward_kernel(
    like: np.ndarray,
    succ: np.ndarray,
    inv_q: float,
    out: np.ndarray,
    logs: np.ndarray,
) -> int:
    n, num_states = like.shape
    uniform = 1.0 / num_states
    nxt = np.full(num_states, uniform)
    out[n - 1] = nxt
    logs[n - 1] = 0.0
    zero_steps = 0
    acc = 0.0
    for i in range(n - 2, -1, -1):
        weighted = like[i + 1] * nxt
        row = inv_q * weighted[succ].sum(axis=1)
        total = row.sum()
        if not np.isfinite(total):
            raise FloatingPointError(f"non-finite backward message at step {i}")
        if total > 0.0:
            row /= total
            acc += np.log(total)
        else:
            row = np.full(num_states, uniform)
            zero_steps += 1
        out[i] = row
        logs[i] = acc
        nxt = row
    return zero_steps
