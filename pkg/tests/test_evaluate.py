import csv
import math

import numpy as np
import pytest

from sketchguess.evaluate import (
    MetricRow,
    ModelPredictor,
    evaluate_grid,
    mean_cross_entropy,
    render_table,
    top_k_accuracy,
    write_csv,
)
from sketchguess.ensemble import EnsembleBundle
from sketchguess.model import ArchitectureSpec, build
from sketchguess.strokes import EncodedSequence


def labeled_seq(label: int, class_count: int) -> EncodedSequence:
    rows = np.zeros((3, 3))
    rows[:, 0] = label / max(class_count - 1, 1)  # first coordinate encodes the label
    rows[-1, 2] = 1.0
    return EncodedSequence(rows, label=label)


class OraclePredictor:
    def __init__(self, class_count):
        self.class_count = class_count

    def predict_proba(self, seqs):
        out = np.zeros((len(seqs), self.class_count))
        for i, s in enumerate(seqs):
            label = int(round(s.rows[0, 0] * (self.class_count - 1)))
            out[i, label] = 1.0
        return out


class UniformPredictor:
    def __init__(self, class_count):
        self.class_count = class_count

    def predict_proba(self, seqs):
        return np.full((len(seqs), self.class_count), 1.0 / self.class_count)


def test_oracle_predictor_scores_100():
    seqs = [labeled_seq(l, 10) for l in range(10)] * 3
    assert top_k_accuracy(OraclePredictor(10), seqs, 1) == 100.0
    assert top_k_accuracy(OraclePredictor(10), seqs, 5) == 100.0


def test_uniform_predictor_top5_expectation():
    # With uniform probabilities ties resolve to classes 0..4, so accuracy is
    # the fraction of labels below 5; expectation 5/345 with binomial noise.
    c = 345
    rng = np.random.default_rng(0)
    n = 4000
    labels = rng.integers(0, c, size=n)
    seqs = [labeled_seq(int(l), c) for l in labels]
    acc = top_k_accuracy(UniformPredictor(c), seqs, 5) / 100.0
    p = 5 / c
    sigma = math.sqrt(p * (1 - p) / n)
    assert abs(acc - p) < 3 * sigma


def test_top1_never_exceeds_top5():
    rng = np.random.default_rng(1)
    model = build(
        ArchitectureSpec(
            conv_channels=[4], conv_kernels=[3], lstm_layers=1, hidden_size=4,
            dropout_rate=0.0, class_count=6,
        ),
        seed=2,
    )
    seqs = []
    for _ in range(40):
        rows = rng.uniform(0, 1, size=(5, 3))
        rows[-1, 2] = 1.0
        seqs.append(EncodedSequence(rows, label=int(rng.integers(0, 6))))
    pred = ModelPredictor(model)
    assert top_k_accuracy(pred, seqs, 1) <= top_k_accuracy(pred, seqs, 5)


def test_mean_cross_entropy_uniform_and_perfect():
    seqs = [labeled_seq(l, 345) for l in range(20)]
    assert abs(mean_cross_entropy(UniformPredictor(345), seqs) - 5.8435) < 1e-4
    assert mean_cross_entropy(OraclePredictor(345), seqs) == 0.0


def test_mean_cross_entropy_hand_case():
    class Fixed:
        def predict_proba(self, seqs):
            return np.array([[0.5, 0.5], [0.9, 0.1], [0.25, 0.75]])

    seqs = [labeled_seq(0, 2), labeled_seq(0, 2), labeled_seq(1, 2)]
    want = -(math.log(0.5) + math.log(0.9) + math.log(0.75)) / 3
    assert abs(mean_cross_entropy(Fixed(), seqs) - want) < 1e-12


def test_empty_dataset_rejected():
    with pytest.raises(ValueError):
        top_k_accuracy(UniformPredictor(3), [], 1)
    with pytest.raises(ValueError):
        mean_cross_entropy(UniformPredictor(3), [])


# ---------------------------------------------------------------- grid


def test_grid_shape_and_determinism(tmp_path):
    seqs_a = [labeled_seq(l % 4, 4) for l in range(12)]
    seqs_b = [labeled_seq((l + 1) % 4, 4) for l in range(8)]
    sets = [{"oracle": OraclePredictor(4), "uniform": UniformPredictor(4)}] * 3
    datasets = {"clean": seqs_a, "dotted": seqs_b}
    rows = evaluate_grid(sets, datasets)
    assert len(rows) == 2 * 2
    assert all(r.repeats == 3 for r in rows)
    assert {(r.model, r.dataset) for r in rows} == {
        ("oracle", "clean"), ("oracle", "dotted"), ("uniform", "clean"), ("uniform", "dotted"),
    }
    again = evaluate_grid(sets, datasets)
    assert [r.__dict__ for r in rows] == [r.__dict__ for r in again]


def test_grid_single_member_bundle_matches_member():
    spec = ArchitectureSpec(
        conv_channels=[4], conv_kernels=[3], lstm_layers=1, hidden_size=4,
        dropout_rate=0.0, class_count=4,
    )
    model = build(spec, seed=3)
    rng = np.random.default_rng(4)
    seqs = []
    for _ in range(20):
        rows = rng.uniform(0, 1, size=(6, 3))
        rows[-1, 2] = 1.0
        seqs.append(EncodedSequence(rows, label=int(rng.integers(0, 4))))
    direct = evaluate_grid([{"m": ModelPredictor(model)}], {"d": seqs})[0]
    bundled = evaluate_grid([{"m": EnsembleBundle([("m", model)])}], {"d": seqs})[0]
    assert abs(direct.top1 - bundled.top1) < 1e-9
    assert abs(direct.cross_entropy - bundled.cross_entropy) < 1e-9


def test_render_two_decimal_reference_cells():
    rows = [
        MetricRow("baseline", "quickdraw", 83.52, 96.20, 0.62, 100, 3),
        MetricRow("ensemble", "quickdraw", 82.59, 95.98, 0.65, 100, 3),
    ]
    text = render_table(rows)
    for token in ("83.52", "96.20", "0.62", "82.59", "95.98", "0.65"):
        assert token in text


def test_csv_columns(tmp_path):
    rows = [MetricRow("m", "d", 50.0, 75.0, 1.2345, 42, 3)]
    path = tmp_path / "grid.csv"
    write_csv(rows, path)
    with open(path) as f:
        got = list(csv.reader(f))
    assert got[0] == ["model", "dataset", "top1", "top5", "xent", "n_examples", "repeats"]
    assert got[1] == ["m", "d", "50.00", "75.00", "1.23", "42", "3"]
