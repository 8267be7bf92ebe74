"""Mini-batch training: Adam, global-norm gradient clipping, early stopping.

Every source of randomness derives from the config seed: the shuffle order
of epoch e comes from (seed, e) and the dropout stream from (seed,
fixed salt), so a run is bit-reproducible on one machine.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .layers import ParamTensor, softmax_xent
from .model import SketchModel
from .strokes import EncodedSequence

_DROPOUT_SALT = 0xD120


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    learning_rate: float = 3e-4
    batch_size: int = 256
    clip_norm: float = 1.0
    patience: int = 20
    max_epochs: int = 200
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def validate(self) -> None:
        if self.learning_rate <= 0 or self.batch_size <= 0 or self.clip_norm <= 0:
            raise ValueError("learning_rate, batch_size and clip_norm must be positive")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        cfg = cls(**d)
        cfg.validate()
        return cfg


class AdamState:
    """First/second moment accumulators, keyed by parameter name."""

    def __init__(self, params: list[ParamTensor]):
        self.m = {p.name: np.zeros_like(p.values) for p in params}
        self.v = {p.name: np.zeros_like(p.values) for p in params}
        self.t = 0


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_top1: float


@dataclass
class TrainReport:
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    stop_reason: str = ""
    wall_time_s: float = 0.0

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for e in self.epochs:
                f.write(json.dumps(e.__dict__) + "\n")
            f.write(
                json.dumps(
                    {
                        "best_epoch": self.best_epoch,
                        "stop_reason": self.stop_reason,
                        "wall_time_s": self.wall_time_s,
                    }
                )
                + "\n"
            )


def clip_gradients(params: list[ParamTensor], clip_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most clip_norm."""
    if clip_norm <= 0:
        raise ValueError("clip_norm must be positive")
    total = 0.0
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise TrainingError(f"non-finite gradient in parameter {p.name}")
        total += float((p.grad * p.grad).sum())
    norm = float(np.sqrt(total))
    if norm > clip_norm:
        scale = clip_norm / norm
        for p in params:
            p.grad *= scale
    return norm


def adam_step(params: list[ParamTensor], state: AdamState, config: TrainConfig) -> None:
    """One bias-corrected Adam update from the accumulated gradients."""
    state.t += 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p in params:
        m = state.m[p.name]
        v = state.v[p.name]
        m *= b1
        m += (1 - b1) * p.grad
        v *= b2
        v += (1 - b2) * p.grad * p.grad
        p.values -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.adam_eps)


def pad_inputs(seqs: list[EncodedSequence]) -> tuple[np.ndarray, np.ndarray]:
    """Stack variable-length sequences into zero-padded (x, mask)."""
    b = len(seqs)
    t_max = max(len(s.rows) for s in seqs)
    x = np.zeros((b, t_max, 3))
    mask = np.zeros((b, t_max))
    for i, s in enumerate(seqs):
        t = len(s.rows)
        x[i, :t] = s.rows
        mask[i, :t] = 1.0
    return x, mask


def pad_batch(seqs: list[EncodedSequence]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stack labeled sequences into (x, mask, labels), zero-padded."""
    x, mask = pad_inputs(seqs)
    labels = np.empty(len(seqs), dtype=np.int64)
    for i, s in enumerate(seqs):
        if s.label is None:
            raise ValueError("training data must be labeled")
        labels[i] = s.label
    return x, mask, labels


def evaluate_loss(model: SketchModel, seqs: list[EncodedSequence], batch_size: int) -> tuple[float, float]:
    """Eval-mode mean cross-entropy and top-1 accuracy over a dataset."""
    total_loss = 0.0
    correct = 0
    for start in range(0, len(seqs), batch_size):
        chunk = seqs[start : start + batch_size]
        x, mask, labels = pad_batch(chunk)
        logits = model.forward(x, mask=mask, train=False)
        loss, _ = softmax_xent(logits, labels)
        total_loss += loss * len(chunk)
        correct += int((logits.argmax(axis=1) == labels).sum())
    return total_loss / len(seqs), correct / len(seqs)


def train(
    model: SketchModel,
    train_seqs: list[EncodedSequence],
    val_seqs: list[EncodedSequence],
    config: TrainConfig,
) -> tuple[SketchModel, TrainReport]:
    """Fit in place and return (best-validation-loss snapshot, report).

    Stops when validation loss has not improved for `patience` consecutive
    epochs or when max_epochs is reached. The returned model is a snapshot
    of the epoch with minimal validation cross-entropy.
    """
    config.validate()
    if not train_seqs or not val_seqs:
        raise ValueError("train and validation sets must be non-empty")
    started = time.perf_counter()
    adam = AdamState(model.params())
    dropout_rng = np.random.default_rng([config.seed, _DROPOUT_SALT])
    report = TrainReport()
    best_val = np.inf
    best_state: SketchModel | None = None
    since_best = 0
    n = len(train_seqs)
    stop_reason = "max_epochs"
    for epoch in range(1, config.max_epochs + 1):
        order = np.random.default_rng([config.seed, epoch]).permutation(n)
        epoch_loss = 0.0
        for batch_idx, start in enumerate(range(0, n, config.batch_size)):
            batch = [train_seqs[i] for i in order[start : start + config.batch_size]]
            x, mask, labels = pad_batch(batch)
            ctx: dict = {}
            logits = model.forward(x, mask=mask, train=True, rng=dropout_rng, ctx=ctx)
            if not np.all(np.isfinite(logits)):
                raise TrainingError(f"non-finite logits at epoch {epoch}, batch {batch_idx}")
            loss, dlogits = softmax_xent(logits, labels)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {batch_idx}")
            model.zero_grads()
            model.backward(dlogits, ctx)
            clip_gradients(model.params(), config.clip_norm)
            adam_step(model.params(), adam, config)
            epoch_loss += loss * len(batch)
        val_loss, val_top1 = evaluate_loss(model, val_seqs, config.batch_size)
        report.epochs.append(EpochStats(epoch, epoch_loss / n, val_loss, val_top1))
        if val_loss < best_val:
            best_val = val_loss
            best_state = model.clone()
            report.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                stop_reason = "early_stopping"
                break
    report.stop_reason = stop_reason
    report.wall_time_s = time.perf_counter() - started
    if best_state is None:
        best_state = model.clone()
    best_state.metadata = {
        "epoch": report.best_epoch,
        "best_val_loss": None if not report.epochs else best_val,
    }
    return best_state, report
