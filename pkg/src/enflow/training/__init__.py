"""Conditional paths, losses, joint training and reflow"""

__all__ = [
    "HistoryRow",
    "LossValue",
    "PathSample",
    "ReflowPair",
    "TrainConfig",
    "TrainResult",
    "loss_em",
    "loss_energy",
    "loss_energy_batch",
    "loss_finetune",
    "loss_sbcfm",
    "make_path_sample",
    "reflow_finetune",
    "train_joint",
    "write_history_csv",
]

from .config import TrainConfig
from .losses import (
    LossValue,
    loss_em,
    loss_energy,
    loss_energy_batch,
    loss_finetune,
    loss_sbcfm,
)
from .paths import PathSample, make_path_sample
from .reflow import ReflowPair, reflow_finetune
from .trainer import HistoryRow, TrainResult, train_joint, write_history_csv
