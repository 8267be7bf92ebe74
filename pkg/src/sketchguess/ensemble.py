"""Strategy specialists and the probability-averaging ensemble.

A specialist starts as a clone of the baseline model state and is trained
exclusively on one strategy's data with unchanged hyperparameters. The
ensemble queries every member on the same observation and combines the
per-member softmax outputs by weighted arithmetic mean. The blacklist, when
present, is applied to the combined distribution and the remainder is
renormalized over the whitelist.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .layers import softmax
from .model import SketchModel, load_checkpoint
from .strokes import EncodedSequence
from .trainer import TrainConfig, TrainReport, pad_inputs, train


class EnsembleBundle:
    """Ordered named members with nonnegative weights summing to one."""

    def __init__(self, members: list[tuple[str, SketchModel]], weights=None):
        if not members:
            raise ValueError("ensemble needs at least one member")
        class_counts = {m.spec.class_count for _, m in members}
        if len(class_counts) != 1:
            raise ValueError(f"members disagree on class count: {sorted(class_counts)}")
        if weights is None:
            weights = np.full(len(members), 1.0 / len(members))
        weights = np.asarray(weights, dtype=np.float64)
        if len(weights) != len(members):
            raise ValueError("one weight per member required")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1")
        self.members = list(members)
        self.weights = weights

    @property
    def class_count(self) -> int:
        return self.members[0][1].spec.class_count

    def predict_proba(self, seqs: list[EncodedSequence]) -> np.ndarray:
        """Weighted mean of member softmax outputs for a batch; rows sum to 1."""
        x, mask = pad_inputs(seqs)
        combined = np.zeros((len(seqs), self.class_count))
        for (_, model), w in zip(self.members, self.weights):
            logits = model.forward(x, mask=mask, train=False)
            combined += w * softmax(logits, axis=1)
        return combined


def adapt_specialist(
    baseline: SketchModel,
    train_seqs: list[EncodedSequence],
    val_seqs: list[EncodedSequence],
    config: TrainConfig,
) -> tuple[SketchModel, TrainReport]:
    """Fine-tune a clone of the baseline on one strategy's data only."""
    if config.max_epochs > 0 and not train_seqs:
        raise ValueError("strategy training set is empty")
    specialist = baseline.clone()
    if config.max_epochs == 0:
        return specialist, TrainReport(stop_reason="max_epochs")
    return train(specialist, train_seqs, val_seqs, config)


def _as_rows(sequence) -> EncodedSequence:
    if isinstance(sequence, EncodedSequence):
        return sequence
    return EncodedSequence(np.asarray(sequence, dtype=np.float64))


def ensemble_predict(bundle: EnsembleBundle, sequence) -> np.ndarray:
    """Combined class probabilities for one encoded sequence."""
    return bundle.predict_proba([_as_rows(sequence)])[0]


def rank_classes(probs: np.ndarray) -> np.ndarray:
    """Indices by descending probability; ties broken by lower class index."""
    return np.lexsort((np.arange(len(probs)), -probs))


def ensemble_topk(
    bundle: EnsembleBundle, sequence, k: int, blacklist: set[int] | None = None
) -> list[int]:
    """Top-k whitelisted classes by combined probability."""
    if k < 1:
        raise ValueError("k must be >= 1")
    probs = ensemble_predict(bundle, sequence)
    if blacklist:
        bad = [b for b in blacklist if 0 <= b < len(probs)]
        if len(set(bad)) >= len(probs):
            raise ValueError("blacklist covers every class")
        probs = probs.copy()
        probs[bad] = 0.0
        total = probs.sum()
        if total > 0:
            probs /= total
    order = rank_classes(probs)
    if blacklist:
        order = [c for c in order if c not in blacklist]
    return [int(c) for c in order[:k]]


# ---------------------------------------------------------------- manifests


def save_manifest(path, members: list[tuple[str, str]], weights=None) -> None:
    """Write a bundle manifest: member names, checkpoint paths, weights."""
    if weights is None:
        weights = [1.0 / len(members)] * len(members)
    doc = {
        "members": [
            {"name": name, "path": ckpt, "weight": w}
            for (name, ckpt), w in zip(members, weights)
        ]
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def _load_group(group: list[dict], base_dir: str) -> EnsembleBundle:
    members = []
    weights = []
    for entry in group:
        ckpt = entry["path"]
        if not os.path.isabs(ckpt):
            ckpt = os.path.join(base_dir, ckpt)
        members.append((entry["name"], load_checkpoint(ckpt)))
        weights.append(entry.get("weight"))
    if any(w is None for w in weights):
        weights = None
    return EnsembleBundle(members, weights)


def load_bundle(manifest_path) -> EnsembleBundle:
    """Load the (single) bundle described by a manifest file."""
    groups = load_bundle_groups(manifest_path)
    if len(groups) != 1:
        raise ValueError(f"{manifest_path}: expected a single bundle, found {len(groups)} repeats")
    return groups[0]


def load_bundle_groups(manifest_path) -> list[EnsembleBundle]:
    """Load one bundle per repeat group; a flat manifest yields one group."""
    with open(manifest_path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    base_dir = os.path.dirname(os.path.abspath(manifest_path))
    if "repeats" in doc:
        return [_load_group(g["members"], base_dir) for g in doc["repeats"]]
    return [_load_group(doc["members"], base_dir)]
