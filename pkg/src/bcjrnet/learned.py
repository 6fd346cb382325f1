"""Data-driven function node: classifier and mixture density fused by Bayes.

Given labeled pairs (y_i, state_i), a softmax classifier estimates the state
posterior P(s | y) and a Gaussian mixture estimates the observation marginal
P(y). The node's likelihood estimate is then

    P(y | s) = |X|^L * P(s | y) * P(y),

which plugs into the same trellis engine as the exact channel-model node.
Since P(y) scales every state equally at a given index, MAP decisions depend
only on the classifier; the fitted density keeps the node's joint values
calibrated.

A trained node is persisted as a bundle directory: ``classifier.txt``,
``mixture.txt``, and ``metadata.json``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import gmm, mlp
from .channels import Alphabet, LabeledDataset, state_sequence
from .trellis import FunctionNodeBackend

__all__ = [
    "LearnedNode",
    "BcjrnetFit",
    "build_training_set",
    "train_bcjrnet",
    "learned_likelihood",
    "save_bundle",
    "load_bundle",
]


def build_training_set(
    x_blocks: Sequence[np.ndarray] | np.ndarray,
    y_blocks: Sequence[np.ndarray] | np.ndarray,
    memory: int,
    alphabet: Alphabet,
) -> LabeledDataset:
    """Label observations with their state indices, block by block.

    Accepts a single block pair or aligned sequences of blocks; pre-block
    symbols follow the channel padding convention, so state labels at block
    starts match what the sampler actually transmitted.
    """
    if isinstance(x_blocks, np.ndarray) and x_blocks.ndim == 1:
        x_blocks, y_blocks = [x_blocks], [y_blocks]
    ys, states = [], []
    for block_id, (x_block, y_block) in enumerate(zip(x_blocks, y_blocks, strict=True)):
        x_block = np.asarray(x_block)
        y_block = np.asarray(y_block, dtype=np.float64)
        if x_block.shape != y_block.shape:
            raise ValueError(f"block {block_id}: symbol/observation length mismatch")
        states.append(state_sequence(x_block, memory, alphabet))
        ys.append(y_block)
    return LabeledDataset(np.concatenate(ys), np.concatenate(states))


class LearnedNode(FunctionNodeBackend):
    """Backend evaluating |X|^L * P_classifier(s | y) * P_density(y)."""

    def __init__(
        self,
        classifier: mlp.MlpParams,
        density: gmm.GmmParams | gmm.ConstantDensity,
        alphabet: Alphabet,
        memory: int,
    ):
        if classifier.num_classes != alphabet.size**memory:
            raise ValueError(
                f"classifier has {classifier.num_classes} outputs, "
                f"expected {alphabet.size**memory} states"
            )
        self.classifier = classifier
        self.density = density
        self.alphabet = alphabet
        self.memory = memory

    def with_density(self, density: gmm.GmmParams | gmm.ConstantDensity) -> "LearnedNode":
        """Same classifier, different marginal-density model."""
        return LearnedNode(self.classifier, density, self.alphabet, self.memory)

    def likelihood(self, y: float, state: int) -> float:
        return float(self.likelihood_table(np.array([y]))[0, state])

    def likelihood_table(self, y_block: np.ndarray) -> np.ndarray:
        y = np.asarray(y_block, dtype=np.float64)
        posteriors = mlp.forward_batch(self.classifier, y)
        return self.num_states * posteriors * self.density.pdf(y)[:, None]


def learned_likelihood(node: LearnedNode, y: float, state: int) -> float:
    """Bayes-rule likelihood estimate |X|^L * P(s | y) * P(y)."""
    return node.likelihood(y, state)


@dataclass(frozen=True)
class BcjrnetFit:
    """Trained node plus the sub-model diagnostics."""

    node: LearnedNode
    classifier_losses: np.ndarray
    em: gmm.EmFit


def train_bcjrnet(
    dataset: LabeledDataset,
    alphabet: Alphabet,
    memory: int,
    train_config: mlp.TrainConfig = mlp.TrainConfig(),
    em_config: gmm.EmConfig = gmm.EmConfig(),
    components: int | None = None,
) -> BcjrnetFit:
    """Fit classifier and mixture on the same labeled set and fuse them.

    ``components`` defaults to the state count |X|^L, the true order of the
    observation marginal. Deterministic given the configs' seeds.
    """
    if len(dataset) == 0:
        raise ValueError("training set must be nonempty")
    num_states = alphabet.size**memory
    classifier, losses = mlp.train(dataset.ys, dataset.states, num_states, train_config)
    em = gmm.em_fit(dataset.ys, components or num_states, em_config)
    node = LearnedNode(classifier, em.params, alphabet, memory)
    return BcjrnetFit(node, losses, em)


def save_bundle(directory: str, node: LearnedNode, metadata: dict) -> None:
    """Persist classifier, mixture, and run metadata in one directory."""
    if not isinstance(node.density, gmm.GmmParams):
        raise ValueError("only mixture-density nodes can be persisted")
    os.makedirs(directory, exist_ok=True)
    mlp.save_params(node.classifier, os.path.join(directory, "classifier.txt"))
    gmm.save_mixture(node.density, os.path.join(directory, "mixture.txt"))
    meta = dict(metadata)
    meta["alphabet"] = list(node.alphabet.symbols)
    meta["memory"] = node.memory
    with open(os.path.join(directory, "metadata.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_bundle(directory: str) -> tuple[LearnedNode, dict]:
    with open(os.path.join(directory, "metadata.json")) as fh:
        meta = json.load(fh)
    classifier = mlp.load_params(os.path.join(directory, "classifier.txt"))
    mixture = gmm.load_mixture(os.path.join(directory, "mixture.txt"))
    node = LearnedNode(classifier, mixture, Alphabet(tuple(meta["alphabet"])), meta["memory"])
    return node, meta
