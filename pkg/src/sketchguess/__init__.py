"""Sketch-guessing game stack: a stroke-sequence classifier trained from
scratch, strategy specialists transfer-learned from it, a probability-
averaging ensemble, and a live game service where drawings race the network
under blacklist and cadence rules."""

__version__ = "0.1.0"

from .ensemble import EnsembleBundle, adapt_specialist, ensemble_predict, ensemble_topk
from .game import GameRound
from .model import ArchitectureSpec, build, load_checkpoint, save_checkpoint
from .strokes import Sketch, encode, normalize, rdp_simplify, split_dataset
from .trainer import TrainConfig, train

__all__ = [
    "ArchitectureSpec",
    "EnsembleBundle",
    "GameRound",
    "Sketch",
    "TrainConfig",
    "adapt_specialist",
    "build",
    "encode",
    "ensemble_predict",
    "ensemble_topk",
    "load_checkpoint",
    "normalize",
    "rdp_simplify",
    "save_checkpoint",
    "split_dataset",
    "train",
]
