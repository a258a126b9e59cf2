"""symalign-trainer: learns the aligner's value network from sampled states.

Consumes newline-delimited state files, trains a per-slot binary token
classifier, and exports SMAW weight files the aligner loads directly.
"""

__version__ = "0.1.0"

from .model import NetConfig, ValueNet, batch_to_torch
from .smaw import SmawError, read_smaw, write_smaw
from .states import (
    StateFileError,
    StateRecord,
    balance_folds,
    encode_batch,
    feasible_shift,
    load_states,
)
from .train import TrainConfig, TrainReport, crossval, evaluate_topk, learning_rate, train, train_records

__all__ = [name for name in dir() if not name.startswith("_")]
