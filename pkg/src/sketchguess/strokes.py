"""Sketch ingestion, simplification, normalization and encoding.

A sketch is an ordered list of strokes; a stroke is an ordered run of 2-D
points drawn without lifting the pen. The network consumes sketches as
T x 3 float matrices: normalized x, normalized y, and a binary flag that is
1 on the last point of each stroke.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

CANVAS_SIZE = 255.0

CACHE_MAGIC = b"INKD"
CACHE_VERSION = 1


class ParseError(ValueError):
    """Malformed sketch record."""


class LabelError(ParseError):
    """Record names a class missing from the class table."""


class EncodingError(ValueError):
    """Sketch violates the encoding contract (e.g. un-normalized coords)."""


@dataclass
class Sketch:
    """Ordered strokes plus an optional class label.

    Each stroke is an (n, 2) float64 array of x, y coordinates with n >= 1.
    """

    strokes: list[np.ndarray]
    label: int | None = None

    def __post_init__(self):
        if not self.strokes:
            raise ValueError("sketch needs at least one stroke")
        self.strokes = [np.asarray(s, dtype=np.float64).reshape(-1, 2) for s in self.strokes]
        for s in self.strokes:
            if len(s) == 0:
                raise ValueError("empty stroke")
            if not np.all(np.isfinite(s)):
                raise ValueError("non-finite coordinate")

    @property
    def point_count(self) -> int:
        return sum(len(s) for s in self.strokes)

    def points(self) -> np.ndarray:
        return np.concatenate(self.strokes, axis=0)

    def copy(self) -> "Sketch":
        return Sketch([s.copy() for s in self.strokes], self.label)


@dataclass
class EncodedSequence:
    """T x 3 network input: (x_norm, y_norm, stroke-end flag)."""

    rows: np.ndarray
    label: int | None = None


@dataclass
class DatasetSplit:
    train: list[Sketch]
    validation: list[Sketch]
    test: list[Sketch]
    seed: int = 0


def load_class_table(path) -> list[str]:
    """Read the class table: one class name per line, line number = index."""
    with open(path, "r", encoding="utf-8") as f:
        names = [line.strip() for line in f if line.strip()]
    if len(names) < 2:
        raise ValueError(f"class table {path} needs at least 2 classes, got {len(names)}")
    if len(set(names)) != len(names):
        raise ValueError(f"class table {path} has duplicate names")
    return names


def parse_quickdraw_line(text: str, class_index: dict[str, int]) -> Sketch:
    """Parse one NDJSON record in the Quick Draw `simplified` schema.

    A record carries a `word` and a `drawing` field; `drawing` is a list of
    [x-list, y-list] pairs, one pair per stroke, coordinates in [0, 255].
    """
    try:
        record = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON record: {exc}") from exc
    if "word" not in record:
        raise ParseError("record missing `word` field")
    if "drawing" not in record:
        raise ParseError("record missing `drawing` field")
    word = record["word"]
    if word not in class_index:
        raise LabelError(f"unknown class name {word!r}")
    drawing = record["drawing"]
    if not isinstance(drawing, list) or not drawing:
        raise ParseError("`drawing` must be a non-empty list of strokes")
    strokes = []
    for i, pair in enumerate(drawing):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ParseError(f"`drawing` stroke {i} is not an [x-list, y-list] pair")
        xs, ys = pair
        if len(xs) != len(ys):
            raise ParseError(f"`drawing` stroke {i} has mismatched x/y lengths")
        if len(xs) == 0:
            raise ParseError(f"`drawing` stroke {i} is empty")
        strokes.append(np.column_stack([xs, ys]).astype(np.float64))
    return Sketch(strokes, label=class_index[word])


def _perp_distances(points: np.ndarray, start: np.ndarray, end: np.ndarray) -> np.ndarray:
    """Perpendicular distance of each point to the segment line start-end."""
    d = end - start
    seg_len = np.hypot(d[0], d[1])
    if seg_len == 0.0:
        return np.hypot(points[:, 0] - start[0], points[:, 1] - start[1])
    num = np.abs(d[0] * (start[1] - points[:, 1]) - (start[0] - points[:, 0]) * d[1])
    return num / seg_len


def rdp_simplify(stroke: np.ndarray, epsilon: float) -> np.ndarray:
    """Ramer-Douglas-Peucker simplification of one stroke.

    Keeps the endpoints; recursively splits at the interior point farthest
    from the chord whenever that distance exceeds `epsilon`. The output is a
    subsequence of the input.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    stroke = np.asarray(stroke, dtype=np.float64).reshape(-1, 2)
    n = len(stroke)
    if n <= 2:
        return stroke.copy()
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo < 2:
            continue
        interior = stroke[lo + 1 : hi]
        dists = _perp_distances(interior, stroke[lo], stroke[hi])
        idx = int(np.argmax(dists))
        if dists[idx] > epsilon:
            split = lo + 1 + idx
            keep[split] = True
            stack.append((lo, split))
            stack.append((split, hi))
    return stroke[keep]


def simplify_sketch(sketch: Sketch, epsilon: float) -> Sketch:
    return Sketch([rdp_simplify(s, epsilon) for s in sketch.strokes], sketch.label)


def normalize(sketch: Sketch) -> Sketch:
    """Min-max map coordinates into [0, 1], per axis, over the whole sketch.

    An axis with zero range maps to 0.5. Stroke structure and label are kept.
    """
    pts = sketch.points()
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = hi - lo
    out = []
    for s in sketch.strokes:
        scaled = np.empty_like(s)
        for axis in range(2):
            if span[axis] == 0.0:
                scaled[:, axis] = 0.5
            else:
                scaled[:, axis] = (s[:, axis] - lo[axis]) / span[axis]
        out.append(scaled)
    return Sketch(out, sketch.label)


def encode(sketch: Sketch) -> EncodedSequence:
    """Flatten a normalized sketch into the T x 3 input matrix."""
    pts = sketch.points()
    if pts.min() < -1e-9 or pts.max() > 1.0 + 1e-9:
        raise EncodingError("encode() expects a normalized sketch with coordinates in [0, 1]")
    total = len(pts)
    rows = np.zeros((total, 3), dtype=np.float64)
    rows[:, :2] = pts
    offset = 0
    for s in sketch.strokes:
        offset += len(s)
        rows[offset - 1, 2] = 1.0
    return EncodedSequence(rows, sketch.label)


def prepare(sketch: Sketch, simplify_epsilon: float | None = None) -> EncodedSequence:
    """Full preprocessing path: optional RDP, then normalize, then encode."""
    if simplify_epsilon is not None:
        sketch = simplify_sketch(sketch, simplify_epsilon)
    return encode(normalize(sketch))


def _largest_remainder(total: int, weights: np.ndarray) -> np.ndarray:
    """Split `total` into integer parts proportional to `weights`."""
    if total == 0:
        return np.zeros(len(weights), dtype=int)
    exact = weights * (total / weights.sum())
    parts = np.floor(exact).astype(int)
    short = total - parts.sum()
    order = np.argsort(-(exact - parts), kind="stable")
    parts[order[:short]] += 1
    return parts


def split_dataset(
    sketches: list[Sketch],
    val_ratio: float,
    test_ratio: float,
    seed: int,
) -> DatasetSplit:
    """Partition into train/validation/test, stratified by label when possible.

    Stratification requires every class to have at least 3 examples and every
    sketch to be labeled; otherwise the split is plain shuffled with a logged
    notice. Deterministic for a fixed seed; split sizes land within one sketch
    of the requested ratios.
    """
    if not sketches:
        raise ValueError("cannot split an empty dataset")
    if val_ratio < 0 or test_ratio < 0 or val_ratio + test_ratio >= 1:
        raise ValueError("ratios must be >= 0 and sum to < 1")
    rng = np.random.default_rng(seed)
    n = len(sketches)
    n_val = int(round(val_ratio * n))
    n_test = int(round(test_ratio * n))

    labels = [s.label for s in sketches]
    by_class: dict[int, list[int]] = {}
    stratify = all(l is not None for l in labels)
    if stratify:
        for i, l in enumerate(labels):
            by_class.setdefault(l, []).append(i)
        stratify = all(len(v) >= 3 for v in by_class.values())
    if not stratify:
        logger.info("split_dataset: falling back to unstratified split")
        order = rng.permutation(n)
        val_idx = order[:n_val]
        test_idx = order[n_val : n_val + n_test]
        train_idx = order[n_val + n_test :]
    else:
        classes = sorted(by_class)
        counts = np.array([len(by_class[c]) for c in classes], dtype=np.float64)
        val_quota = _largest_remainder(n_val, counts)
        test_quota = _largest_remainder(n_test, counts)
        val_idx, test_idx, train_idx = [], [], []
        for c, qv, qt in zip(classes, val_quota, test_quota):
            members = np.array(by_class[c])[rng.permutation(len(by_class[c]))]
            val_idx.extend(members[:qv])
            test_idx.extend(members[qv : qv + qt])
            train_idx.extend(members[qv + qt :])
    return DatasetSplit(
        train=[sketches[i] for i in train_idx],
        validation=[sketches[i] for i in val_idx],
        test=[sketches[i] for i in test_idx],
        seed=seed,
    )


def save_cache(path, sketches: list[Sketch], class_count: int, tag: str = "") -> None:
    """Write the binary dataset cache: INKD header, then length-prefixed records."""
    tag_bytes = tag.encode("utf-8")
    with open(path, "wb") as f:
        f.write(CACHE_MAGIC)
        f.write(struct.pack("<HB", CACHE_VERSION, len(tag_bytes)))
        f.write(tag_bytes)
        f.write(struct.pack("<II", class_count, len(sketches)))
        for sk in sketches:
            payload = bytearray()
            label = -1 if sk.label is None else sk.label
            payload += struct.pack("<iH", label, len(sk.strokes))
            for s in sk.strokes:
                payload += struct.pack("<H", len(s))
                payload += s.astype("<f8").tobytes()
            f.write(struct.pack("<I", len(payload)))
            f.write(payload)


def load_cache(path) -> tuple[list[Sketch], int, str]:
    """Read a binary dataset cache; returns (sketches, class_count, strategy tag)."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != CACHE_MAGIC:
        raise ParseError(f"{path}: not a sketch cache (bad magic)")
    version, tag_len = struct.unpack_from("<HB", data, 4)
    if version != CACHE_VERSION:
        raise ParseError(f"{path}: unsupported cache version {version}")
    pos = 7
    tag = data[pos : pos + tag_len].decode("utf-8")
    pos += tag_len
    class_count, record_count = struct.unpack_from("<II", data, pos)
    pos += 8
    sketches = []
    for _ in range(record_count):
        (size,) = struct.unpack_from("<I", data, pos)
        pos += 4
        end = pos + size
        label, stroke_count = struct.unpack_from("<iH", data, pos)
        pos += 6
        strokes = []
        for _ in range(stroke_count):
            (n,) = struct.unpack_from("<H", data, pos)
            pos += 2
            pts = np.frombuffer(data, dtype="<f8", count=2 * n, offset=pos).reshape(n, 2)
            strokes.append(pts.copy())
            pos += 16 * n
        if pos != end:
            raise ParseError(f"{path}: record size mismatch")
        sketches.append(Sketch(strokes, label=None if label < 0 else label))
    return sketches, class_count, tag


def load_ndjson(path, class_names: list[str]) -> list[Sketch]:
    """Parse every record of an NDJSON file (or all *.ndjson files in a dir)."""
    import os

    files = []
    if os.path.isdir(path):
        files = sorted(
            os.path.join(path, name) for name in os.listdir(path) if name.endswith(".ndjson")
        )
    else:
        files = [path]
    index = {name: i for i, name in enumerate(class_names)}
    sketches = []
    for fname in files:
        with open(fname, "r", encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    sketches.append(parse_quickdraw_line(line, index))
                except ParseError as exc:
                    raise ParseError(f"{fname}:{lineno}: {exc}") from exc
    return sketches
