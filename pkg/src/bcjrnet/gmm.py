"""One-dimensional Gaussian mixture density fitting via EM.

Estimates the marginal observation density P(y) from samples. The default
component count for a learned node is the number of trellis states, since the
true marginal is exactly a per-state mixture. Initialization is
deterministic: means at the (k + 1/2) / K sample quantiles, a shared variance
of var(samples) / K, uniform weights.

Mixture files are plain text, versioned ``gmm-format 1``: a components line
followed by whitespace-separated ``weights`` / ``means`` / ``variances``
lines, %.17g each.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GmmParams",
    "ConstantDensity",
    "EmConfig",
    "EmFit",
    "em_fit",
    "density",
    "save_mixture",
    "load_mixture",
]

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GmmParams:
    """Mixture weights (simplex), means, and variances (all length K)."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        mu = np.asarray(self.means, dtype=np.float64)
        var = np.asarray(self.variances, dtype=np.float64)
        if not (w.shape == mu.shape == var.shape) or w.ndim != 1 or w.size < 1:
            raise ValueError("weights, means, variances must be matching 1-D arrays")
        if abs(w.sum() - 1.0) > 1e-12 or np.any(w < 0):
            raise ValueError("weights must form a probability simplex")
        if np.any(var <= 0):
            raise ValueError("variances must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "variances", var)

    @property
    def num_components(self) -> int:
        return self.weights.size

    def pdf(self, y: np.ndarray) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        z = (y[:, None] - self.means[None, :]) ** 2 / self.variances[None, :]
        comp = np.exp(-0.5 * z) / np.sqrt(2.0 * np.pi * self.variances)[None, :]
        return comp @ self.weights


@dataclass(frozen=True)
class ConstantDensity:
    """Stand-in density that is the same positive value everywhere.

    Swapping this in for a fitted mixture must not change any MAP decision,
    because the density enters every state's node value identically.
    """

    value: float = 1.0

    def __post_init__(self) -> None:
        if not self.value > 0:
            raise ValueError("constant density must be positive")

    def pdf(self, y: np.ndarray) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        return np.full(y.shape, self.value)


@dataclass(frozen=True)
class EmConfig:
    max_iter: int = 500
    rel_tol: float = 1e-8
    var_floor: float = 1e-6


@dataclass(frozen=True)
class EmFit:
    """Fit result: parameters, per-iteration log-likelihood, floor events."""

    params: GmmParams
    log_likelihood: np.ndarray
    floored: int


def _weighted_components(y, weights, means, variances):
    # (n, K) of weight_k * Normal(y; mean_k, var_k); linear domain is safe in
    # 1-D since fitted components stay within the data's span
    z = (y[:, None] - means[None, :]) ** 2 / variances[None, :]
    return np.exp(-0.5 * z) * (weights / np.sqrt(2.0 * np.pi * variances))[None, :]


def em_fit(samples: np.ndarray, num_components: int, config: EmConfig = EmConfig()) -> EmFit:
    """Fit a K-component mixture to 1-D samples by EM.

    Stops on relative log-likelihood improvement below ``rel_tol`` or after
    ``max_iter`` iterations. Collapsing components are clamped to the
    variance floor and counted in ``floored``.
    """
    y = np.asarray(samples, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError("samples must be 1-D")
    k = int(num_components)
    if k < 1 or y.size < k:
        raise ValueError(f"need at least {k} samples for {k} components")

    quantiles = (np.arange(k) + 0.5) / k
    means = np.quantile(y, quantiles)
    variances = np.full(k, max(y.var() / k, config.var_floor))
    weights = np.full(k, 1.0 / k)

    trace = []
    floored = 0
    prev_ll = -np.inf
    for _ in range(config.max_iter):
        comp = _weighted_components(y, weights, means, variances)
        norm = np.maximum(comp.sum(axis=1), 1e-300)
        ll = float(np.log(norm).sum())
        trace.append(ll)
        if abs(ll - prev_ll) <= config.rel_tol * max(1.0, abs(ll)):
            break
        prev_ll = ll

        resp = comp / norm[:, None]
        counts = np.maximum(resp.sum(axis=0), 1e-300)
        weights = counts / counts.sum()
        means = y @ resp / counts
        variances = (y * y) @ resp / counts - means**2
        low = variances < config.var_floor
        floored += int(np.count_nonzero(low))
        variances = np.maximum(variances, config.var_floor)

    return EmFit(GmmParams(weights, means, variances), np.asarray(trace), floored)


def density(params: GmmParams | ConstantDensity, y: float | np.ndarray) -> float | np.ndarray:
    """Evaluate the fitted density; scalar in, scalar out."""
    out = params.pdf(np.atleast_1d(y))
    return float(out[0]) if np.isscalar(y) or np.ndim(y) == 0 else out


def save_mixture(params: GmmParams, path: str) -> None:
    def fmt(arr):
        return " ".join("%.17g" % v for v in arr)

    with open(path, "w") as fh:
        fh.write(
            "gmm-format 1\n"
            f"components {params.num_components}\n"
            f"weights {fmt(params.weights)}\n"
            f"means {fmt(params.means)}\n"
            f"variances {fmt(params.variances)}\n"
        )


def load_mixture(path: str) -> GmmParams:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "gmm-format 1":
        raise ValueError(f"{path}: not a version-1 mixture file")
    fields = {line.split()[0]: [float(v) for v in line.split()[1:]] for line in lines[1:]}
    return GmmParams(
        np.array(fields["weights"]), np.array(fields["means"]), np.array(fields["variances"])
    )
