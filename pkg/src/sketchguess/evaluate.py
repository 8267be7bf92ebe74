"""Accuracy and cross-entropy metrics over (model, dataset) grids.

A predictor is anything with predict_proba(list[EncodedSequence]) -> (B, C)
probabilities; both single models (via ModelPredictor) and ensemble bundles
qualify. Grid cells can be averaged over repeated training runs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .layers import softmax
from .model import SketchModel
from .strokes import EncodedSequence
from .trainer import pad_inputs

EVAL_BATCH = 256


class ModelPredictor:
    """Adapts a single model to the predictor protocol."""

    def __init__(self, model: SketchModel):
        self.model = model

    def predict_proba(self, seqs: list[EncodedSequence]) -> np.ndarray:
        x, mask = pad_inputs(seqs)
        return softmax(self.model.forward(x, mask=mask, train=False), axis=1)


@dataclass
class MetricRow:
    model: str
    dataset: str
    top1: float  # percent
    top5: float  # percent
    cross_entropy: float
    n_examples: int
    repeats: int = 1


def _predict_all(predictor, seqs: list[EncodedSequence]) -> np.ndarray:
    chunks = [
        predictor.predict_proba(seqs[i : i + EVAL_BATCH]) for i in range(0, len(seqs), EVAL_BATCH)
    ]
    return np.concatenate(chunks, axis=0)


def _labels(seqs: list[EncodedSequence]) -> np.ndarray:
    labels = [s.label for s in seqs]
    if any(l is None for l in labels):
        raise ValueError("evaluation data must be labeled")
    return np.asarray(labels, dtype=np.int64)


def top_k_accuracy(predictor, seqs: list[EncodedSequence], k: int) -> float:
    """Percent of examples whose label ranks in the k most probable classes.

    Ties rank the lower class index first.
    """
    if not seqs:
        raise ValueError("empty dataset")
    labels = _labels(seqs)
    probs = _predict_all(predictor, seqs)
    # stable sort of -p keeps equal-probability classes in index order
    topk = np.argsort(-probs, axis=1, kind="stable")[:, :k]
    hits = (topk == labels[:, None]).any(axis=1)
    return 100.0 * float(hits.mean())


def mean_cross_entropy(predictor, seqs: list[EncodedSequence]) -> float:
    """Mean of -log p[label] with the probability clamped at 1e-12."""
    if not seqs:
        raise ValueError("empty dataset")
    labels = _labels(seqs)
    probs = _predict_all(predictor, seqs)
    picked = np.clip(probs[np.arange(len(seqs)), labels], 1e-12, None)
    return float(-np.log(picked).mean())


def evaluate_cell(predictor, seqs: list[EncodedSequence]) -> tuple[float, float, float]:
    if not seqs:
        raise ValueError("empty dataset")
    labels = _labels(seqs)
    probs = _predict_all(predictor, seqs)
    topk = np.argsort(-probs, axis=1, kind="stable")[:, :5]
    top1 = 100.0 * float((topk[:, 0] == labels).mean())
    top5 = 100.0 * float((topk == labels[:, None]).any(axis=1).mean())
    picked = np.clip(probs[np.arange(len(seqs)), labels], 1e-12, None)
    xent = float(-np.log(picked).mean())
    return top1, top5, xent


def evaluate_grid(
    model_sets: list[dict],
    datasets: dict[str, list[EncodedSequence]],
) -> list[MetricRow]:
    """Metrics for every (model, dataset) cell, averaged over repeats.

    `model_sets` holds one name -> predictor mapping per repeated training
    run; every repeat must provide the same model names.
    """
    if not model_sets or not datasets:
        raise ValueError("need at least one model set and one dataset")
    names = list(model_sets[0])
    for ms in model_sets[1:]:
        if list(ms) != names:
            raise ValueError("every repeat must provide the same model names")
    rows = []
    for name in names:
        for ds_name, seqs in datasets.items():
            cells = np.array([evaluate_cell(ms[name], seqs) for ms in model_sets])
            top1, top5, xent = cells.mean(axis=0)
            rows.append(
                MetricRow(name, ds_name, float(top1), float(top5), float(xent), len(seqs), len(model_sets))
            )
    return rows


def render_table(rows: list[MetricRow]) -> str:
    """Aligned text grid: one model per row, one dataset per metric column."""
    datasets = list(dict.fromkeys(r.dataset for r in rows))
    models = list(dict.fromkeys(r.model for r in rows))
    cell = {(r.model, r.dataset): r for r in rows}
    headers = ["model"]
    for metric in ("top1%", "top5%", "xent"):
        headers += [f"{d}:{metric}" for d in datasets]
    lines = []
    table = [headers]
    for m in models:
        row = [m]
        for attr in ("top1", "top5", "cross_entropy"):
            row += [f"{getattr(cell[(m, d)], attr):.2f}" for d in datasets]
        table.append(row)
    widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
    for r in table:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
    return "\n".join(lines)


def write_csv(rows: list[MetricRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["model", "dataset", "top1", "top5", "xent", "n_examples", "repeats"])
        for r in rows:
            writer.writerow(
                [r.model, r.dataset, f"{r.top1:.2f}", f"{r.top5:.2f}", f"{r.cross_entropy:.2f}", r.n_examples, r.repeats]
            )
