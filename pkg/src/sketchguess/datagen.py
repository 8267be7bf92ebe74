"""Procedural sketch corpus in the Quick Draw `simplified` NDJSON schema.

Ten parametric shape classes rendered as stroke sequences on the 256x256
canvas, with per-sketch translation, scale, rotation and point jitter, then
RDP-simplified and rounded to integers like the published files. Used for
desk-scale training runs and tests; real Quick Draw NDJSON drops in through
the same `ingest` path.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .strokes import Sketch, simplify_sketch

DEFAULT_CLASSES = [
    "circle",
    "square",
    "triangle",
    "star",
    "zigzag",
    "line",
    "house",
    "envelope",
    "ladder",
    "clock",
]

# compound -> (left part, right part); used by the rebus strategy
DEFAULT_COMPOUNDS = [
    ("house", "square", "triangle"),
    ("clock", "circle", "line"),
    ("envelope", "square", "zigzag"),
]


def _closed(points: np.ndarray) -> np.ndarray:
    return np.vstack([points, points[:1]])


def _circle_strokes(rng) -> list[np.ndarray]:
    n = int(rng.integers(14, 22))
    angles = np.linspace(0, 2 * np.pi, n, endpoint=False) + rng.uniform(0, 2 * np.pi)
    rx = rng.uniform(0.8, 1.0)
    ry = rng.uniform(0.8, 1.0)
    pts = np.column_stack([rx * np.cos(angles), ry * np.sin(angles)])
    return [_closed(pts)]


def _square_strokes(rng) -> list[np.ndarray]:
    w = rng.uniform(0.8, 1.0)
    h = rng.uniform(0.8, 1.0)
    pts = np.array([[-w, -h], [w, -h], [w, h], [-w, h]])
    return [_closed(pts)]


def _triangle_strokes(rng) -> list[np.ndarray]:
    spread = rng.uniform(0.7, 1.0)
    pts = np.array([[-spread, 0.9], [spread, 0.9], [rng.uniform(-0.2, 0.2), -0.9]])
    return [_closed(pts)]


def _star_strokes(rng) -> list[np.ndarray]:
    inner = rng.uniform(0.35, 0.5)
    angles = -np.pi / 2 + np.arange(10) * np.pi / 5
    radii = np.where(np.arange(10) % 2 == 0, 1.0, inner)
    pts = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    return [_closed(pts)]


def _zigzag_strokes(rng) -> list[np.ndarray]:
    teeth = int(rng.integers(3, 6))
    xs = np.linspace(-1.0, 1.0, 2 * teeth + 1)
    ys = np.where(np.arange(len(xs)) % 2 == 0, 0.6, -0.6)
    return [np.column_stack([xs, ys])]


def _line_strokes(rng) -> list[np.ndarray]:
    angle = rng.uniform(0, np.pi)
    d = np.array([np.cos(angle), np.sin(angle)])
    return [np.stack([-d, d])]


def _house_strokes(rng) -> list[np.ndarray]:
    base = np.array([[-0.8, 1.0], [0.8, 1.0], [0.8, -0.1], [-0.8, -0.1]])
    roof = np.array([[-0.9, -0.1], [0.0, -1.0], [0.9, -0.1]])
    return [_closed(base), roof]


def _envelope_strokes(rng) -> list[np.ndarray]:
    rect = np.array([[-1.0, -0.6], [1.0, -0.6], [1.0, 0.6], [-1.0, 0.6]])
    flap = np.array([[-1.0, -0.6], [0.0, rng.uniform(0.0, 0.2)], [1.0, -0.6]])
    return [_closed(rect), flap]


def _ladder_strokes(rng) -> list[np.ndarray]:
    rungs = int(rng.integers(3, 5))
    left = np.array([[-0.4, -1.0], [-0.4, 1.0]])
    right = np.array([[0.4, -1.0], [0.4, 1.0]])
    out = [left, right]
    for y in np.linspace(-0.7, 0.7, rungs):
        out.append(np.array([[-0.4, y], [0.4, y]]))
    return out


def _clock_strokes(rng) -> list[np.ndarray]:
    face = _circle_strokes(rng)[0]
    minute = np.array([[0.0, 0.0], [0.0, -0.7]])
    hour_angle = rng.uniform(0, 2 * np.pi)
    hour = np.array([[0.0, 0.0], [0.45 * np.cos(hour_angle), 0.45 * np.sin(hour_angle)]])
    return [face, minute, hour]


_GENERATORS = {
    "circle": _circle_strokes,
    "square": _square_strokes,
    "triangle": _triangle_strokes,
    "star": _star_strokes,
    "zigzag": _zigzag_strokes,
    "line": _line_strokes,
    "house": _house_strokes,
    "envelope": _envelope_strokes,
    "ladder": _ladder_strokes,
    "clock": _clock_strokes,
}


def generate_sketch(class_name: str, rng: np.random.Generator, label: int | None = None) -> Sketch:
    """One randomized sketch of the class, in integer canvas coordinates."""
    strokes = _GENERATORS[class_name](rng)
    theta = rng.uniform(-0.2, 0.2)
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    half = rng.uniform(60.0, 115.0)
    center = rng.uniform(half + 5.0, 250.0 - half, size=2)
    out = []
    for s in strokes:
        pts = s @ rot.T * half + center
        pts = pts + rng.normal(scale=1.5, size=pts.shape)
        out.append(np.clip(np.round(pts), 0, 255))
    sketch = simplify_sketch(Sketch(out, label=label), epsilon=2.0)
    return Sketch([np.round(s) for s in sketch.strokes], label=label)


def generate_dataset(
    per_class: int, seed: int, class_names: list[str] | None = None
) -> tuple[list[Sketch], list[str]]:
    names = class_names or list(DEFAULT_CLASSES)
    unknown = [n for n in names if n not in _GENERATORS]
    if unknown:
        raise ValueError(f"no generator for classes {unknown}")
    rng = np.random.default_rng(seed)
    sketches = []
    for label, name in enumerate(names):
        for _ in range(per_class):
            sketches.append(generate_sketch(name, rng, label=label))
    return sketches, names


def write_ndjson(path, sketches: list[Sketch], class_names: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for sk in sketches:
            drawing = [
                [[int(v) for v in s[:, 0]], [int(v) for v in s[:, 1]]] for s in sk.strokes
            ]
            f.write(json.dumps({"word": class_names[sk.label], "drawing": drawing}) + "\n")


def write_class_table(path, class_names: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(class_names) + "\n")


def write_compound_table(path, compounds=None) -> None:
    compounds = compounds or DEFAULT_COMPOUNDS
    with open(path, "w", encoding="utf-8") as f:
        for compound, a, b in compounds:
            f.write(f"{compound}\t{a}\t{b}\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sketchguess-datagen", description="Generate a synthetic sketch corpus."
    )
    parser.add_argument("--out", required=True, help="output NDJSON path")
    parser.add_argument("--classes", help="also write the class table to this path")
    parser.add_argument("--compounds", help="also write the compound table to this path")
    parser.add_argument("--per-class", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    sketches, names = generate_dataset(args.per_class, args.seed)
    write_ndjson(args.out, sketches, names)
    if args.classes:
        write_class_table(args.classes, names)
    if args.compounds:
        write_compound_table(args.compounds)
    print(f"wrote {len(sketches)} sketches over {len(names)} classes to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
