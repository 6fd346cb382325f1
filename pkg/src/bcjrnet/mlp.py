"""From-scratch feed-forward state classifier.

A small dense network mapping one observation to a distribution over trellis
states: 1 -> 100 -> 50 -> |X|^L by default, with sigmoid and ReLU hidden
activations, softmax output, cross-entropy loss, and the Adam optimizer.

All parameters live in one flat float64 buffer; per-layer weight matrices and
bias vectors are views into it, so the optimizer updates a single array.
Inputs are standardized by training-set mean/scale constants stored with the
parameters (the sigmoid first layer saturates on raw high-SNR observations).

Model files are plain text, versioned ``mlp-format 1``:

    mlp-format 1
    dims <d0> <d1> ... <dk>
    norm <mean> <scale>
    flat <total>
    <one parameter value per line, %.17g, flat-buffer order>

Flat-buffer order is W then b per layer, weights row-major (fan_in, fan_out).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels

__all__ = [
    "MlpParams",
    "AdamState",
    "TrainConfig",
    "TrainingDiverged",
    "init_params",
    "forward",
    "forward_batch",
    "loss_and_gradient",
    "adam_step",
    "train",
    "save_params",
    "load_params",
]


class TrainingDiverged(RuntimeError):
    """Raised when the training loss stops being finite."""


class MlpParams:
    """Network parameters: flat buffer plus per-layer views.

    ``dims`` is (input, hidden..., classes); activations are sigmoid for the
    first hidden layer, ReLU for the rest, softmax at the output.
    """

    def __init__(
        self,
        dims: tuple[int, ...],
        flat: np.ndarray | None = None,
        input_mean: float = 0.0,
        input_scale: float = 1.0,
    ):
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ValueError(f"invalid layer dims {dims}")
        self.dims = tuple(int(d) for d in dims)
        total = sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))
        if flat is None:
            flat = np.zeros(total)
        flat = np.ascontiguousarray(flat, dtype=np.float64)
        if flat.shape != (total,):
            raise ValueError(f"flat buffer must have {total} entries, got {flat.shape}")
        self.flat = flat
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        offset = 0
        for a, b in zip(dims[:-1], dims[1:]):
            self.weights.append(flat[offset : offset + a * b].reshape(a, b))
            offset += a * b
            self.biases.append(flat[offset : offset + b])
            offset += b
        self.input_mean = float(input_mean)
        self.input_scale = float(input_scale)

    @property
    def num_classes(self) -> int:
        return self.dims[-1]

    def copy(self) -> "MlpParams":
        return MlpParams(self.dims, self.flat.copy(), self.input_mean, self.input_scale)

    def freeze(self) -> "MlpParams":
        """Mark parameters read-only; evaluation is then thread-safe."""
        self.flat.flags.writeable = False
        for arr in (*self.weights, *self.biases):
            arr.flags.writeable = False
        return self


def init_params(
    dims: tuple[int, ...], rng: int | np.random.Generator
) -> MlpParams:
    """Symmetric uniform init, per-layer bound sqrt(6 / (fan_in + fan_out))."""
    rng = np.random.default_rng(rng)
    params = MlpParams(dims)
    for w in params.weights:
        bound = np.sqrt(6.0 / (w.shape[0] + w.shape[1]))
        w[:] = rng.uniform(-bound, bound, size=w.shape)
    return params


def _forward_cached(params: MlpParams, ys: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Forward pass keeping per-layer activations for backprop."""
    a = (ys[:, None] - params.input_mean) / params.input_scale
    acts = [a]
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        if i == last:
            z -= z.max(axis=1, keepdims=True)
            np.exp(z, out=z)
            z /= z.sum(axis=1, keepdims=True)
            return acts, z
        a = 1.0 / (1.0 + np.exp(-z)) if i == 0 else np.maximum(z, 0.0)
        acts.append(a)
    raise AssertionError("unreachable")


def _fusable(params: MlpParams) -> bool:
    return kernels.fused_mlp is not None and len(params.dims) == 4 and params.dims[0] == 1


def forward_batch(params: MlpParams, ys: np.ndarray) -> np.ndarray:
    """Class probabilities for a batch of observations, shape (n, classes)."""
    ys = np.asarray(ys, dtype=np.float64)
    if not np.all(np.isfinite(ys)):
        raise ValueError("observations must be finite")
    if _fusable(params):
        return kernels.fused_mlp.forward_probs(
            params.flat, ys, params.input_mean, params.input_scale, *params.dims[1:]
        )
    return _forward_cached(params, ys)[1]


def forward(params: MlpParams, y: float) -> np.ndarray:
    """Class probabilities for a single observation."""
    return forward_batch(params, np.array([y]))[0]


def loss_and_gradient(
    params: MlpParams, ys: np.ndarray, labels: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient (flat-buffer order)."""
    ys = np.asarray(ys, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if ys.shape[0] == 0:
        raise ValueError("batch must be nonempty")
    if labels.min() < 0 or labels.max() >= params.num_classes:
        raise ValueError("label out of range")
    acts, probs = _forward_cached(params, ys)
    n = ys.shape[0]
    loss = -np.log(probs[np.arange(n), labels]).mean()

    grad = MlpParams(params.dims)  # zero-filled flat buffer with matching views
    delta = probs
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    for i in range(len(params.weights) - 1, -1, -1):
        grad.weights[i][:] = acts[i].T @ delta
        grad.biases[i][:] = delta.sum(axis=0)
        if i == 0:
            break
        delta = delta @ params.weights[i].T
        if i == 1:
            a = acts[1]  # sigmoid layer output
            delta *= a * (1.0 - a)
        else:
            delta *= acts[i] > 0.0
    return float(loss), grad.flat


@dataclass
class AdamState:
    """Adam moments and step counter for one flat parameter buffer."""

    size: int
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.m = np.zeros(self.size)
        self.v = np.zeros(self.size)


def adam_step(params: MlpParams, grad: np.ndarray, state: AdamState) -> None:
    """One in-place Adam update."""
    state.step += 1
    state.m += (1.0 - state.beta1) * (grad - state.m)
    state.v += (1.0 - state.beta2) * (grad * grad - state.v)
    m_hat = state.m / (1.0 - state.beta1**state.step)
    v_hat = state.v / (1.0 - state.beta2**state.step)
    params.flat -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)


@dataclass(frozen=True)
class TrainConfig:
    """Optimization schedule; the shuffle seed also seeds the weight init."""

    epochs: int = 100
    batch_size: int = 128
    seed: int = 0
    hidden: tuple[int, ...] = (100, 50)
    learning_rate: float = 0.01
    standardize: bool = True

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


def train(
    ys: np.ndarray,
    labels: np.ndarray,
    num_classes: int,
    config: TrainConfig = TrainConfig(),
    track_full_loss: bool = False,
) -> tuple[MlpParams, np.ndarray]:
    """Fit the classifier; returns final parameters and the per-epoch loss trace.

    The trace holds the epoch's mean batch loss, or the post-epoch
    full-dataset loss when ``track_full_loss`` is set (slower; used by
    diagnostics and property tests). Uses the fused compiled step when
    available; the NumPy path computes exactly the same updates.
    """
    ys = np.asarray(ys, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if ys.shape[0] == 0:
        raise ValueError("training set must be nonempty")
    if labels.min() < 0 or labels.max() >= num_classes:
        raise ValueError("label out of range")
    rng = np.random.default_rng(config.seed)
    params = init_params((1, *config.hidden, num_classes), rng)
    if config.standardize:
        params.input_mean = float(ys.mean())
        params.input_scale = float(max(ys.std(), 1e-12))
    adam = AdamState(params.flat.size, learning_rate=config.learning_rate)
    fused = kernels.fused_mlp if _fusable(params) else None
    n = ys.shape[0]
    epoch_losses = np.empty(config.epochs)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        ys_ep, labels_ep = ys[order], labels[order]
        loss_sum = 0.0
        batches = 0
        for start in range(0, n, config.batch_size):
            batch = slice(start, start + config.batch_size)
            if fused is not None:
                adam.step += 1
                loss = fused.train_step(
                    params.flat,
                    ys_ep[batch],
                    labels_ep[batch],
                    params.input_mean,
                    params.input_scale,
                    *params.dims[1:],
                    adam.m,
                    adam.v,
                    adam.step,
                    adam.learning_rate,
                    adam.beta1,
                    adam.beta2,
                    adam.epsilon,
                )
            else:
                loss, grad = loss_and_gradient(params, ys_ep[batch], labels_ep[batch])
                adam_step(params, grad, adam)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch offset {start}"
                )
            loss_sum += loss
            batches += 1
        if track_full_loss:
            epoch_losses[epoch], _ = loss_and_gradient(params, ys, labels)
        else:
            epoch_losses[epoch] = loss_sum / batches
        if not np.isfinite(epoch_losses[epoch]):
            raise TrainingDiverged(f"non-finite epoch loss at epoch {epoch}")
    return params.freeze(), epoch_losses


def save_params(params: MlpParams, path: str) -> None:
    """Write the versioned text format documented in the module docstring."""
    lines = [
        "mlp-format 1",
        "dims " + " ".join(str(d) for d in params.dims),
        f"norm {params.input_mean!r} {params.input_scale!r}",
        f"flat {params.flat.size}",
    ]
    lines.extend("%.17g" % v for v in params.flat)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_params(path: str) -> MlpParams:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "mlp-format 1":
        raise ValueError(f"{path}: not a version-1 mlp parameter file")
    dims = tuple(int(t) for t in lines[1].split()[1:])
    _, mean, scale = lines[2].split()
    total = int(lines[3].split()[1])
    flat = np.array([float(v) for v in lines[4 : 4 + total]])
    return MlpParams(dims, flat, float(mean), float(scale)).freeze()
