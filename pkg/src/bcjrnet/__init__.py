"""MAP symbol detection over finite-memory channels.

Sum-product (forward/backward) trellis engine with two interchangeable
function-node backends: an exact channel-model node and a data-driven node
built from a state classifier and a mixture density fused by Bayes' rule.
"""

__version__ = "0.1.0"

from .channels import (
    BPSK,
    OOK,
    Alphabet,
    ChannelSpec,
    Family,
    LabeledDataset,
    TapProfile,
    decay_profile,
    perturb_taps,
    sample_block,
    snr_from_db,
    state_of_window,
    state_sequence,
    window_of_state,
)
from .exact import ExactNode
from .trellis import (
    FunctionNodeBackend,
    Messages,
    PosteriorTable,
    Trellis,
    backward_pass,
    forward_pass,
    map_detect,
    pairwise_joint,
    symbol_posterior,
    transition_kernel,
)

__all__ = [
    "__version__",
    "Alphabet",
    "BPSK",
    "OOK",
    "TapProfile",
    "ChannelSpec",
    "Family",
    "LabeledDataset",
    "decay_profile",
    "perturb_taps",
    "sample_block",
    "snr_from_db",
    "state_of_window",
    "state_sequence",
    "window_of_state",
    "ExactNode",
    "FunctionNodeBackend",
    "Messages",
    "PosteriorTable",
    "Trellis",
    "forward_pass",
    "backward_pass",
    "pairwise_joint",
    "symbol_posterior",
    "map_detect",
    "transition_kernel",
]
