"""Model-based function node: closed-form likelihoods from a known channel.

This is the classical full-knowledge detector; point it at a spec built from
perturbed taps to model detection under a noisy channel estimate.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .channels import ChannelSpec, Family, poisson_rates, signal_levels
from .trellis import FunctionNodeBackend

__all__ = ["ExactNode"]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class ExactNode(FunctionNodeBackend):
    """Evaluates P(y | s) from a :class:`ChannelSpec`; immutable."""

    def __init__(self, spec: ChannelSpec):
        self.spec = spec
        self.alphabet = spec.alphabet
        self.memory = spec.memory
        if spec.family is Family.ISI_AWGN:
            self._means = signal_levels(spec)
        else:
            self._rates = poisson_rates(spec)
            self._log_rates = np.log(self._rates)

    def likelihood(self, y: float, state: int) -> float:
        return float(self.likelihood_table(np.array([y]))[0, state])

    def likelihood_table(self, y_block: np.ndarray) -> np.ndarray:
        y = np.asarray(y_block, dtype=np.float64)
        if self.spec.family is Family.ISI_AWGN:
            return np.exp(-0.5 * (y[:, None] - self._means[None, :]) ** 2) / _SQRT_2PI
        if np.any(y < 0) or np.any(y != np.floor(y)):
            raise ValueError("Poisson observations must be nonnegative integers")
        return np.exp(
            y[:, None] * self._log_rates[None, :]
            - self._rates[None, :]
            - gammaln(y + 1.0)[:, None]
        )
