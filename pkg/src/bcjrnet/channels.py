"""Finite-memory channel models.

Symbol alphabets, exponentially decaying tap profiles, integer state coding
for the length-L shift register, closed-form observation likelihoods, seeded
samplers, and tap-perturbation utilities for the noisy-estimate scenario.

A state integer encodes the window (x_i, ..., x_{i-L+1}) in base |X| with the
most recent symbol in the most significant digit, so the valid transitions
are exactly ``s = new_digit * |X|**(L-1) + s_prev // |X|``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

__all__ = [
    "Family",
    "Alphabet",
    "BPSK",
    "OOK",
    "TapProfile",
    "ChannelSpec",
    "LabeledDataset",
    "decay_profile",
    "state_of_window",
    "window_of_state",
    "state_sequence",
    "signal_levels",
    "poisson_rates",
    "awgn_likelihood",
    "poisson_pmf",
    "likelihood_table",
    "sample_block",
    "perturb_taps",
    "substream",
    "snr_from_db",
    "export_dataset_csv",
]

# Perturbed taps can drive a Poisson rate nonpositive; clamp instead of
# producing an invalid distribution.
RATE_FLOOR = 1e-12

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class Family(Enum):
    """Channel family: linear ISI with unit-variance AWGN, or Poisson counts."""

    ISI_AWGN = "isi_awgn"
    POISSON = "poisson"


@dataclass(frozen=True)
class Alphabet:
    """Ordered constellation; the symbol order fixes label and digit coding."""

    symbols: tuple[float, ...]

    def __post_init__(self) -> None:
        symbols = tuple(float(s) for s in self.symbols)
        if not symbols:
            raise ValueError("alphabet must be nonempty")
        if len(set(symbols)) != len(symbols):
            raise ValueError("alphabet symbols must be distinct")
        object.__setattr__(self, "symbols", symbols)

    @property
    def size(self) -> int:
        return len(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def index_of(self, symbol: float) -> int:
        try:
            return self.symbols.index(float(symbol))
        except ValueError:
            raise ValueError(f"symbol {symbol!r} not in alphabet {self.symbols}") from None

    def as_array(self) -> np.ndarray:
        return np.asarray(self.symbols, dtype=np.float64)


BPSK = Alphabet((-1.0, 1.0))
OOK = Alphabet((0.0, 1.0))


@dataclass(frozen=True)
class TapProfile:
    """Channel taps h_1..h_L; ``gamma`` is kept when generated from a decay law."""

    taps: tuple[float, ...]
    gamma: float | None = None

    def __post_init__(self) -> None:
        taps = tuple(float(t) for t in self.taps)
        if not taps:
            raise ValueError("tap profile must have at least one tap")
        object.__setattr__(self, "taps", taps)

    @property
    def memory(self) -> int:
        return len(self.taps)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.taps, dtype=np.float64)


def decay_profile(gamma: float, memory: int) -> TapProfile:
    """Exponentially decaying taps h_tau = exp(-gamma * (tau - 1)), tau = 1..memory."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if memory < 1:
        raise ValueError(f"memory must be >= 1, got {memory}")
    return TapProfile(tuple(math.exp(-gamma * t) for t in range(memory)), gamma=float(gamma))


@dataclass(frozen=True)
class ChannelSpec:
    """Channel family, alphabet, taps, and linear SNR rho.

    ``alphabet`` defaults to BPSK for the ISI-AWGN family and OOK for Poisson.
    """

    family: Family
    profile: TapProfile
    snr: float
    alphabet: Alphabet = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if not self.snr > 0:
            raise ValueError(f"snr must be positive, got {self.snr}")
        if self.alphabet is None:
            default = BPSK if self.family is Family.ISI_AWGN else OOK
            object.__setattr__(self, "alphabet", default)

    @property
    def memory(self) -> int:
        return self.profile.memory

    @property
    def num_states(self) -> int:
        return self.alphabet.size ** self.memory


@dataclass(frozen=True)
class LabeledDataset:
    """Aligned (observation, state label) pairs used to fit a learned node."""

    ys: np.ndarray
    states: np.ndarray

    def __post_init__(self) -> None:
        ys = np.asarray(self.ys, dtype=np.float64)
        states = np.asarray(self.states, dtype=np.int64)
        if ys.shape != states.shape or ys.ndim != 1:
            raise ValueError("ys and states must be aligned 1-D arrays")
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "states", states)

    def __len__(self) -> int:
        return self.ys.shape[0]


def snr_from_db(snr_db: float) -> float:
    """dB to linear."""
    return 10.0 ** (snr_db / 10.0)


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Child generator fully determined by (seed, keys).

    Distinct key tuples give statistically independent streams, which is how
    per-block / per-trial randomness is derived from one master seed.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(keys)))


# ---------------------------------------------------------------------------
# State coding
# ---------------------------------------------------------------------------


def state_of_window(window: Sequence[float], alphabet: Alphabet) -> int:
    """Encode the window (x_i, ..., x_{i-L+1}) - newest first - as an integer."""
    state = 0
    for sym in window:
        state = state * alphabet.size + alphabet.index_of(sym)
    return state


def window_of_state(state: int, alphabet: Alphabet, memory: int) -> tuple[float, ...]:
    """Inverse of :func:`state_of_window`."""
    q = alphabet.size
    if not 0 <= state < q**memory:
        raise ValueError(f"state {state} out of range for {q}^{memory} states")
    window = []
    for _ in range(memory):
        window.append(alphabet.symbols[state % q])
        state //= q
    return tuple(reversed(window))


def state_sequence(
    x_block: Sequence[float], memory: int, alphabet: Alphabet
) -> np.ndarray:
    """Per-index states for a symbol block; pre-block symbols take the
    alphabet's first element."""
    idx = np.array([alphabet.index_of(x) for x in x_block], dtype=np.int64)
    n = idx.shape[0]
    if n < 1:
        raise ValueError("x_block must contain at least one symbol")
    states = np.zeros(n, dtype=np.int64)
    q = alphabet.size
    # pre-block symbols are the first alphabet element, whose index is 0
    for j in range(memory):
        shifted = np.concatenate([np.zeros(min(j, n), dtype=np.int64), idx[: n - j]])
        states += shifted * q ** (memory - 1 - j)
    return states


# ---------------------------------------------------------------------------
# Likelihoods
# ---------------------------------------------------------------------------


def signal_levels(spec: ChannelSpec) -> np.ndarray:
    """Noiseless signal sqrt(rho) * sum_tau h_tau x_{i-tau+1} for every state."""
    q, memory = spec.alphabet.size, spec.memory
    taps = spec.profile.as_array()
    syms = spec.alphabet.as_array()
    states = np.arange(q**memory)
    levels = np.zeros(q**memory)
    for j in range(memory):
        digit = (states // q ** (memory - 1 - j)) % q
        levels += taps[j] * syms[digit]
    return math.sqrt(spec.snr) * levels


def poisson_rates(spec: ChannelSpec) -> np.ndarray:
    """Per-state Poisson rate: signal level + 1, floored at RATE_FLOOR."""
    return np.maximum(signal_levels(spec) + 1.0, RATE_FLOOR)


def awgn_likelihood(y: float, state: int, spec: ChannelSpec) -> float:
    """Unit-variance Gaussian density of y given the state's signal level."""
    if spec.family is not Family.ISI_AWGN:
        raise ValueError(f"awgn_likelihood requires the ISI-AWGN family, got {spec.family}")
    mean = signal_levels(spec)[state]
    return math.exp(-0.5 * (y - mean) ** 2) / _SQRT_2PI


def poisson_pmf(y: float, state: int, spec: ChannelSpec) -> float:
    """Poisson pmf of the count y given the state's rate."""
    if spec.family is not Family.POISSON:
        raise ValueError(f"poisson_pmf requires the Poisson family, got {spec.family}")
    if y < 0 or y != int(y):
        raise ValueError(f"Poisson observation must be a nonnegative integer, got {y}")
    rate = poisson_rates(spec)[state]
    return math.exp(y * math.log(rate) - rate - gammaln(y + 1.0))


def likelihood_table(y_block: np.ndarray, spec: ChannelSpec) -> np.ndarray:
    """Vectorized conditional likelihoods, shape (n, num_states)."""
    y = np.asarray(y_block, dtype=np.float64)
    if spec.family is Family.ISI_AWGN:
        means = signal_levels(spec)
        return np.exp(-0.5 * (y[:, None] - means[None, :]) ** 2) / _SQRT_2PI
    if np.any(y < 0) or np.any(y != np.floor(y)):
        raise ValueError("Poisson observations must be nonnegative integers")
    rates = poisson_rates(spec)
    return np.exp(
        y[:, None] * np.log(rates)[None, :] - rates[None, :] - gammaln(y + 1.0)[:, None]
    )


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def sample_block(
    spec: ChannelSpec, x_block: Sequence[float], rng: int | np.random.Generator
) -> np.ndarray:
    """Draw one observation per symbol from the channel's conditional law.

    ``rng`` may be a seed or a Generator; the same seed always reproduces the
    same block.
    """
    rng = np.random.default_rng(rng)
    states = state_sequence(x_block, spec.memory, spec.alphabet)
    if spec.family is Family.ISI_AWGN:
        means = signal_levels(spec)
        return means[states] + rng.standard_normal(states.shape[0])
    rates = poisson_rates(spec)
    return rng.poisson(rates[states]).astype(np.float64)


def random_symbols(
    alphabet: Alphabet, n: int, rng: int | np.random.Generator
) -> np.ndarray:
    """n i.i.d. uniform symbols."""
    rng = np.random.default_rng(rng)
    return alphabet.as_array()[rng.integers(0, alphabet.size, size=n)]


def perturb_taps(
    profile: TapProfile, sigma_e_sq: float, rng: int | np.random.Generator
) -> TapProfile:
    """Add i.i.d. zero-mean Gaussian noise of variance sigma_e_sq to each tap."""
    if sigma_e_sq < 0:
        raise ValueError(f"sigma_e_sq must be nonnegative, got {sigma_e_sq}")
    if sigma_e_sq == 0:
        return profile
    rng = np.random.default_rng(rng)
    noise = math.sqrt(sigma_e_sq) * rng.standard_normal(profile.memory)
    return TapProfile(tuple(profile.as_array() + noise), gamma=None)


# ---------------------------------------------------------------------------
# Dataset export
# ---------------------------------------------------------------------------


def export_dataset_csv(
    path: str,
    blocks: Iterable[tuple[np.ndarray, np.ndarray]],
    memory: int,
    alphabet: Alphabet,
) -> None:
    """Write one row per symbol: block_id, i, x_i, state_index, y_i."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["block_id", "i", "x_i", "state_index", "y_i"])
        for block_id, (x_block, y_block) in enumerate(blocks):
            if len(x_block) != len(y_block):
                raise ValueError(f"block {block_id}: symbol/observation length mismatch")
            states = state_sequence(x_block, memory, alphabet)
            for i, (x, s, y) in enumerate(zip(x_block, states, y_block)):
                writer.writerow([block_id, i, repr(float(x)), int(s), repr(float(y))])
