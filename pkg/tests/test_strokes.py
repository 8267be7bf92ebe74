import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sketchguess.strokes import (
    DatasetSplit,
    EncodingError,
    LabelError,
    ParseError,
    Sketch,
    encode,
    load_cache,
    normalize,
    parse_quickdraw_line,
    rdp_simplify,
    save_cache,
    split_dataset,
)

CLASS_INDEX = {"cat": 0, "dog": 1, "house": 2}


def rdp_oracle(points, epsilon):
    """Reference RDP: direct recursion on the textbook split rule."""

    def perp(p, a, b):
        dx, dy = b[0] - a[0], b[1] - a[1]
        seg = math.hypot(dx, dy)
        if seg == 0.0:
            return math.hypot(p[0] - a[0], p[1] - a[1])
        return abs(dx * (a[1] - p[1]) - (a[0] - p[0]) * dy) / seg

    def recurse(pts):
        if len(pts) <= 2:
            return list(pts)
        dmax, idx = 0.0, 0
        for i in range(1, len(pts) - 1):
            d = perp(pts[i], pts[0], pts[-1])
            if d > dmax:
                dmax, idx = d, i
        if dmax > epsilon:
            left = recurse(pts[: idx + 1])
            right = recurse(pts[idx:])
            return left[:-1] + right
        return [pts[0], pts[-1]]

    return np.array(recurse([tuple(p) for p in points]))


# ---------------------------------------------------------------- parsing


def test_parse_single_stroke_record():
    rec = json.dumps({"word": "cat", "drawing": [[[0, 10], [0, 5]]]})
    sk = parse_quickdraw_line(rec, CLASS_INDEX)
    assert len(sk.strokes) == 1
    assert sk.strokes[0].shape == (2, 2)
    assert sk.label == 0
    np.testing.assert_array_equal(sk.strokes[0], [[0, 0], [10, 5]])


def test_parse_empty_drawing_rejected():
    rec = json.dumps({"word": "cat", "drawing": []})
    with pytest.raises(ParseError):
        parse_quickdraw_line(rec, CLASS_INDEX)


def test_parse_unknown_word():
    rec = json.dumps({"word": "zeppelin", "drawing": [[[0], [0]]]})
    with pytest.raises(LabelError):
        parse_quickdraw_line(rec, CLASS_INDEX)


def test_parse_missing_fields_name_the_field():
    with pytest.raises(ParseError, match="word"):
        parse_quickdraw_line(json.dumps({"drawing": [[[0], [0]]]}), CLASS_INDEX)
    with pytest.raises(ParseError, match="drawing"):
        parse_quickdraw_line(json.dumps({"word": "cat"}), CLASS_INDEX)


def test_parse_three_stroke_record_counts():
    # Hand-written fixture: stroke lengths 4, 2, 3.
    drawing = [
        [[0, 10, 20, 30], [0, 5, 5, 0]],
        [[40, 50], [0, 10]],
        [[60, 70, 80], [0, 10, 0]],
    ]
    rec = json.dumps({"word": "dog", "drawing": drawing})
    sk = parse_quickdraw_line(rec, CLASS_INDEX)
    assert [len(s) for s in sk.strokes] == [4, 2, 3]
    assert sk.label == 1


# ---------------------------------------------------------------- rdp


def test_rdp_two_points_unchanged():
    stroke = np.array([[0.0, 0.0], [3.0, 4.0]])
    out = rdp_simplify(stroke, 100.0)
    np.testing.assert_array_equal(out, stroke)


def test_rdp_collinear_collapses():
    stroke = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    out = rdp_simplify(stroke, 0.5)
    np.testing.assert_array_equal(out, [[0, 0], [2, 0]])


def test_rdp_negative_epsilon():
    with pytest.raises(ValueError):
        rdp_simplify(np.array([[0.0, 0.0], [1.0, 1.0]]), -0.1)


def test_rdp_zigzag_matches_oracle():
    stroke = np.array([[0.0, 0.0], [1.0, 2.0], [2.0, 0.0], [3.0, 2.0], [4.0, 0.0]])
    out = rdp_simplify(stroke, 1.0)
    np.testing.assert_array_equal(out, rdp_oracle(stroke, 1.0))


def test_rdp_matches_oracle_on_random_polylines():
    rng = np.random.default_rng(7)
    for _ in range(200):
        n = rng.integers(1, 9)
        pts = rng.uniform(0, 10, size=(n, 2))
        eps = float(rng.uniform(0, 3))
        got = rdp_simplify(pts, eps)
        want = rdp_oracle(pts, eps) if n > 1 else pts
        np.testing.assert_array_equal(got, want)


def test_rdp_idempotent():
    rng = np.random.default_rng(3)
    for _ in range(50):
        pts = rng.uniform(0, 255, size=(rng.integers(2, 30), 2))
        once = rdp_simplify(pts, 2.0)
        twice = rdp_simplify(once, 2.0)
        np.testing.assert_array_equal(once, twice)


def test_rdp_output_is_subsequence_within_epsilon():
    rng = np.random.default_rng(11)
    pts = rng.uniform(0, 100, size=(40, 2))
    out = rdp_simplify(pts, 5.0)
    # subsequence check
    rows = {tuple(p) for p in out}
    assert rows <= {tuple(p) for p in pts}
    assert tuple(out[0]) == tuple(pts[0]) and tuple(out[-1]) == tuple(pts[-1])


# ---------------------------------------------------------------- normalize


def test_normalize_full_range():
    sk = Sketch([np.array([[0.0, 0.0], [256.0, 128.0], [128.0, 256.0]])])
    out = normalize(sk)
    np.testing.assert_allclose(out.strokes[0], [[0, 0], [1, 0.5], [0.5, 1]])


def test_normalize_degenerate_axis():
    sk = Sketch([np.array([[7.0, 0.0], [7.0, 10.0], [7.0, 20.0]])])
    out = normalize(sk)
    assert np.all(out.strokes[0][:, 0] == 0.5)
    np.testing.assert_allclose(out.strokes[0][:, 1], [0, 0.5, 1])


def test_normalize_two_points():
    sk = Sketch([np.array([[10.0, 20.0], [30.0, 60.0]])])
    out = normalize(sk)
    np.testing.assert_allclose(out.strokes[0], [[0, 0], [1, 1]])


def test_normalize_is_whole_sketch_not_per_stroke():
    sk = Sketch([np.array([[0.0, 0.0], [10.0, 10.0]]), np.array([[90.0, 90.0], [100.0, 100.0]])])
    out = normalize(sk)
    np.testing.assert_allclose(out.strokes[1], [[0.9, 0.9], [1.0, 1.0]])


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_normalize_idempotent(seed):
    rng = np.random.default_rng(seed)
    strokes = [rng.uniform(0, 255, size=(rng.integers(1, 10), 2)) for _ in range(rng.integers(1, 4))]
    once = normalize(Sketch(strokes))
    twice = normalize(once)
    for a, b in zip(once.strokes, twice.strokes):
        np.testing.assert_allclose(a, b, atol=1e-12)


# ---------------------------------------------------------------- encode


def test_encode_single_stroke_flags():
    sk = normalize(Sketch([np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])]))
    enc = encode(sk)
    np.testing.assert_array_equal(enc.rows[:, 2], [0, 0, 1])


def test_encode_two_stroke_flags():
    sk = normalize(
        Sketch([np.array([[0.0, 0.0], [1.0, 1.0]]), np.array([[2.0, 2.0], [3.0, 3.0]])])
    )
    enc = encode(sk)
    assert enc.rows.shape == (4, 3)
    np.testing.assert_array_equal(enc.rows[:, 2], [0, 1, 0, 1])


def test_encode_rows_match_coordinates():
    strokes = [
        np.array([[0.0, 0.0], [100.0, 50.0], [200.0, 0.0]]),
        np.array([[50.0, 200.0], [150.0, 200.0]]),
    ]
    sk = normalize(Sketch(strokes, label=2))
    enc = encode(sk)
    assert enc.label == 2
    assert enc.rows.shape[0] == 5
    np.testing.assert_allclose(enc.rows[:, :2], sk.points())


def test_encode_rejects_unnormalized():
    with pytest.raises(EncodingError):
        encode(Sketch([np.array([[0.0, 0.0], [255.0, 255.0]])]))


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_encode_round_trip_row_count(seed):
    rng = np.random.default_rng(seed)
    strokes = [rng.uniform(0, 255, size=(rng.integers(1, 12), 2)) for _ in range(rng.integers(1, 5))]
    sk = Sketch(strokes)
    enc = encode(normalize(sk))
    assert enc.rows.shape == (sk.point_count, 3)
    ends = np.flatnonzero(enc.rows[:, 2] == 1)
    assert len(ends) == len(strokes)
    assert ends[-1] == sk.point_count - 1


# ---------------------------------------------------------------- splitting


def _labeled_sketches(per_class: dict[int, int]) -> list[Sketch]:
    out = []
    for label, count in per_class.items():
        for i in range(count):
            out.append(Sketch([np.array([[float(i), 0.0], [1.0, float(label)]])], label=label))
    return out


def test_split_ratios():
    sketches = _labeled_sketches({0: 50, 1: 50})
    split = split_dataset(sketches, val_ratio=0.1, test_ratio=0.2, seed=1)
    assert (len(split.train), len(split.validation), len(split.test)) == (70, 10, 20)


def test_split_strategy_ratios():
    sketches = _labeled_sketches({0: 40, 1: 40})
    split = split_dataset(sketches, val_ratio=0.1, test_ratio=0.1, seed=1)
    assert (len(split.train), len(split.validation), len(split.test)) == (64, 8, 8)


def test_split_deterministic():
    sketches = _labeled_sketches({0: 30, 1: 30, 2: 30})

    def key(split: DatasetSplit):
        return [sorted(id(s) for s in part) for part in (split.train, split.validation, split.test)]

    a = split_dataset(sketches, 0.1, 0.2, seed=42)
    b = split_dataset(sketches, 0.1, 0.2, seed=42)
    assert key(a) == key(b)


def test_split_partition_is_disjoint_and_complete():
    sketches = _labeled_sketches({0: 17, 1: 23, 2: 9})
    split = split_dataset(sketches, 0.15, 0.25, seed=5)
    ids = [id(s) for s in split.train + split.validation + split.test]
    assert sorted(ids) == sorted(id(s) for s in sketches)


def test_split_stratified_balance():
    sketches = _labeled_sketches({0: 100, 1: 100})
    split = split_dataset(sketches, 0.1, 0.2, seed=2)
    test_labels = [s.label for s in split.test]
    assert test_labels.count(0) == test_labels.count(1) == 20


def test_split_small_class_falls_back_unstratified(caplog):
    sketches = _labeled_sketches({0: 50, 1: 2})
    with caplog.at_level("INFO"):
        split = split_dataset(sketches, 0.1, 0.2, seed=0)
    assert len(split.train) + len(split.validation) + len(split.test) == 52


def test_split_empty_rejected():
    with pytest.raises(ValueError):
        split_dataset([], 0.1, 0.2, seed=0)


# ---------------------------------------------------------------- cache io


def test_cache_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    sketches = [
        Sketch(
            [rng.uniform(0, 255, size=(rng.integers(1, 9), 2)) for _ in range(rng.integers(1, 4))],
            label=int(rng.integers(0, 3)) if rng.random() > 0.2 else None,
        )
        for _ in range(25)
    ]
    path = tmp_path / "cache.inkd"
    save_cache(path, sketches, class_count=3, tag="dotted")
    loaded, class_count, tag = load_cache(path)
    assert class_count == 3 and tag == "dotted"
    assert len(loaded) == 25
    for a, b in zip(sketches, loaded):
        assert a.label == b.label
        assert len(a.strokes) == len(b.strokes)
        for sa, sb in zip(a.strokes, b.strokes):
            np.testing.assert_array_equal(sa, sb)


def test_cache_rejects_garbage(tmp_path):
    path = tmp_path / "bad.inkd"
    path.write_bytes(b"not a cache at all")
    with pytest.raises(ParseError):
        load_cache(path)
