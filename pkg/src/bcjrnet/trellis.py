"""Chain-structured sum-product engine for shift-register state trellises.

Implements the forward/backward message recursions, pairwise state joints,
per-symbol posteriors, and MAP decisions, generic over any function-node
backend. Backends supply the observation likelihood P(y | s); the engine owns
the transition kernel (1/|X| on shift-consistent state pairs, 0 elsewhere),
so a full node value factorizes as ``likelihood(y, s) * kernel(s, s_prev)``.

Messages are kept in the linear domain and renormalized at every step; a
cumulative log-scale accumulator preserves the discarded constants. A step
whose message underflows to exactly zero is reset to uniform and counted in
``zero_steps`` so detection degrades gracefully and observably.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import kernels
from .channels import Alphabet

__all__ = [
    "Trellis",
    "transition_kernel",
    "FunctionNodeBackend",
    "Messages",
    "PosteriorTable",
    "forward_pass",
    "backward_pass",
    "pairwise_joint",
    "symbol_posterior",
    "map_detect",
]


class Trellis:
    """Transition structure of a length-L shift register over q symbols.

    ``predecessors[s]`` / ``successors[s]`` list the q states reachable from /
    leading to ``s``; ``newest_symbol[s]`` is the symbol index in the most
    significant digit, i.e. the symbol transmitted when ``s`` was entered.
    """

    def __init__(self, num_symbols: int, memory: int):
        if num_symbols < 2 or memory < 1:
            raise ValueError("need at least 2 symbols and memory >= 1")
        self.num_symbols = num_symbols
        self.memory = memory
        self.num_states = num_symbols**memory
        base = num_symbols ** (memory - 1)
        states = np.arange(self.num_states, dtype=np.int64)
        self.newest_symbol = states // base
        self.successors = np.empty((self.num_states, num_symbols), dtype=np.int64)
        self.predecessors = np.empty((self.num_states, num_symbols), dtype=np.int64)
        for d in range(num_symbols):
            self.successors[:, d] = d * base + states // num_symbols
            self.predecessors[:, d] = (states % base) * num_symbols + d

    def is_consistent(self, s: int, s_prev: int) -> bool:
        """True when s keeps the newest memory-1 symbols of s_prev."""
        base = self.num_symbols ** (self.memory - 1)
        return s % base == s_prev // self.num_symbols

    def kernel(self, s: int, s_prev: int) -> float:
        return 1.0 / self.num_symbols if self.is_consistent(s, s_prev) else 0.0


def transition_kernel(s: int, s_prev: int, alphabet: Alphabet, memory: int) -> float:
    """State-transition probability: 1/|X| on a one-symbol shift, else 0."""
    q = alphabet.size
    if not (0 <= s < q**memory and 0 <= s_prev < q**memory):
        raise ValueError(f"state index out of range for {q}^{memory} states")
    return 1.0 / q if s % q ** (memory - 1) == s_prev // q else 0.0


class FunctionNodeBackend:
    """Evaluation interface consumed by the engine.

    Subclasses set ``alphabet`` and ``memory`` and implement ``likelihood``;
    ``likelihood_table`` has a generic (slow) default and should be overridden
    with a vectorized version. Backends must be immutable after construction
    so blocks can be processed concurrently.
    """

    alphabet: Alphabet
    memory: int

    @property
    def num_states(self) -> int:
        return self.alphabet.size**self.memory

    @property
    def trellis(self) -> Trellis:
        cached = getattr(self, "_trellis", None)
        if cached is None:
            cached = Trellis(self.alphabet.size, self.memory)
            object.__setattr__(self, "_trellis", cached)
        return cached

    def likelihood(self, y: float, state: int) -> float:
        """Observation likelihood P(y | s), or a learned estimate of it."""
        raise NotImplementedError

    def likelihood_table(self, y_block: np.ndarray) -> np.ndarray:
        """(n, num_states) likelihoods for a whole block."""
        y_block = np.asarray(y_block, dtype=np.float64)
        return np.array(
            [[self.likelihood(y, s) for s in range(self.num_states)] for y in y_block]
        )

    def node_value(self, y: float, s: int, s_prev: int) -> float:
        """Full function-node value ``likelihood(y, s) * kernel(s, s_prev)``."""
        k = self.trellis.kernel(s, s_prev)
        return self.likelihood(y, s) * k if k else 0.0


@dataclass
class Messages:
    """One normalized state distribution per index plus bookkeeping.

    ``values[i]`` sums to 1; the unnormalized message is
    ``values[i] * exp(log_scale[i])``. ``kernel_evals`` counts the
    (index, state, predecessor) triples the recursion touched.
    """

    values: np.ndarray
    log_scale: np.ndarray
    zero_steps: int
    kernel_evals: int


def _check_block(y_block: np.ndarray) -> np.ndarray:
    y = np.asarray(y_block, dtype=np.float64)
    if y.ndim != 1 or y.shape[0] < 1:
        raise ValueError("y_block must be a nonempty 1-D array")
    return y


def forward_pass(y_block: np.ndarray, backend: FunctionNodeBackend) -> Messages:
    """Forward recursion from a uniform initial message.

    Message i is proportional to P(s_i, y_1..y_i) with the proportionality
    constant tracked in ``log_scale``.
    """
    y = _check_block(y_block)
    like = backend.likelihood_table(y)
    trellis = backend.trellis
    n, num_states = like.shape
    out = np.empty((n, num_states))
    logs = np.empty(n)
    zero_steps = kernels.forward_kernel(
        np.ascontiguousarray(like), trellis.predecessors, 1.0 / trellis.num_symbols, out, logs
    )
    return Messages(out, logs, zero_steps, n * num_states * trellis.num_symbols)


def backward_pass(y_block: np.ndarray, backend: FunctionNodeBackend) -> Messages:
    """Backward recursion from a uniform terminal message.

    ``values[i]`` carries the message arriving at the state for index i from
    the future observations y_{i+2}..y_n; the last entry is the uniform
    terminal message.
    """
    y = _check_block(y_block)
    like = backend.likelihood_table(y)
    trellis = backend.trellis
    n, num_states = like.shape
    out = np.empty((n, num_states))
    logs = np.empty(n)
    zero_steps = kernels.backward_kernel(
        np.ascontiguousarray(like), trellis.successors, 1.0 / trellis.num_symbols, out, logs
    )
    return Messages(out, logs, zero_steps, (n - 1) * num_states * trellis.num_symbols)


def pairwise_joint(
    k: int,
    forward: Messages,
    backward: Messages,
    y_block: np.ndarray,
    backend: FunctionNodeBackend,
) -> np.ndarray:
    """Normalized joint of the states at positions k and k+1 (0-based).

    Entry [a, b] is P(s at k = a, s at k+1 = b | y); shift-inconsistent pairs
    are exactly zero.
    """
    y = _check_block(y_block)
    n = y.shape[0]
    if not 0 <= k < n - 1:
        raise IndexError(f"pairwise_joint needs 0 <= k < {n - 1}, got {k}")
    trellis = backend.trellis
    num_states = trellis.num_states
    like_next = np.array([backend.likelihood(y[k + 1], s) for s in range(num_states)])
    joint = np.zeros((num_states, num_states))
    inv_q = 1.0 / trellis.num_symbols
    for a in range(num_states):
        succ = trellis.successors[a]
        joint[a, succ] = (
            forward.values[k, a] * inv_q * like_next[succ] * backward.values[k + 1, succ]
        )
    total = joint.sum()
    if total > 0.0:
        joint /= total
    else:
        # mirror the engine's zero-message policy: uniform over valid pairs
        for a in range(num_states):
            joint[a, trellis.successors[a]] = 1.0
        joint /= joint.sum()
    return joint


@dataclass
class PosteriorTable:
    """Per-index symbol posteriors; column order follows the alphabet."""

    probs: np.ndarray
    alphabet: Alphabet
    zero_steps: int = 0

    def decisions(self) -> np.ndarray:
        """MAP symbols; ties go to the lowest alphabet index."""
        return self.alphabet.as_array()[np.argmax(self.probs, axis=1)]

    def to_csv(self, path: str) -> None:
        """Rows of (k, then one probability column per symbol)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k"] + [f"p_{sym:g}" for sym in self.alphabet.symbols])
            for k, row in enumerate(self.probs):
                writer.writerow([k] + [repr(float(p)) for p in row])


def symbol_posterior(y_block: np.ndarray, backend: FunctionNodeBackend) -> PosteriorTable:
    """P(X_k = x | y) for every index k and alphabet symbol x."""
    fwd = forward_pass(y_block, backend)
    bwd = backward_pass(y_block, backend)
    state_post = fwd.values * bwd.values
    totals = state_post.sum(axis=1, keepdims=True)
    zero_rows = totals[:, 0] == 0.0
    if np.any(zero_rows):
        state_post[zero_rows] = 1.0
        totals = state_post.sum(axis=1, keepdims=True)
    state_post /= totals
    trellis = backend.trellis
    probs = np.zeros((state_post.shape[0], trellis.num_symbols))
    for e in range(trellis.num_symbols):
        probs[:, e] = state_post[:, trellis.newest_symbol == e].sum(axis=1)
    zero_steps = fwd.zero_steps + bwd.zero_steps + int(np.count_nonzero(zero_rows))
    return PosteriorTable(probs, backend.alphabet, zero_steps)


def map_detect(y_block: np.ndarray, backend: FunctionNodeBackend) -> np.ndarray:
    """Per-symbol MAP decisions (posterior argmax, ties to lowest index)."""
    return symbol_posterior(y_block, backend).decisions()
