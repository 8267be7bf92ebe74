"""Programmatic generators for the three adversarial drawing strategies.

Each transform operates on clean sketches in canvas coordinates (0..255)
and preserves the class label:

* distraction: random straight lines prepended before the real drawing,
* dotted: every stroke resampled by arc length and cut into dash strokes,
* rebus: a compound class drawn as its two part classes side by side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .strokes import CANVAS_SIZE, Sketch, simplify_sketch


@dataclass
class DistractionConfig:
    min_lines: int = 1
    max_lines: int = 5
    min_length_frac: float = 0.2
    max_length_frac: float = 0.9
    seed: int = 0

    def validate(self) -> None:
        if not 1 <= self.min_lines <= self.max_lines:
            raise ValueError("need 1 <= min_lines <= max_lines")
        if not 0 < self.min_length_frac <= self.max_length_frac <= 1:
            raise ValueError("length fractions must satisfy 0 < min <= max <= 1")


@dataclass
class DottedConfig:
    dash_length: float = 12.0
    gap_length: float = 8.0
    resample_step: float = 2.0

    def validate(self) -> None:
        if self.dash_length <= 0 or self.gap_length <= 0 or self.resample_step <= 0:
            raise ValueError("dash, gap and resample step must be positive")


@dataclass(frozen=True)
class CompoundEntry:
    compound: int
    part_a: int
    part_b: int


def load_compound_table(path, class_names: list[str]) -> list[CompoundEntry]:
    """Read compound<TAB>partA<TAB>partB lines; all names must be known classes."""
    index = {name: i for i, name in enumerate(class_names)}
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 tab-separated names")
            for name in fields:
                if name not in index:
                    raise ValueError(f"{path}:{lineno}: {name!r} is not in the class table")
            entries.append(CompoundEntry(*(index[n] for n in fields)))
    return entries


def distraction_transform(
    sketch: Sketch, config: DistractionConfig, rng: np.random.Generator | None = None
) -> Sketch:
    """Prepend random straight strokes before the original drawing."""
    config.validate()
    if rng is None:
        rng = np.random.default_rng(config.seed)
    n = int(rng.integers(config.min_lines, config.max_lines + 1))
    lines = []
    for _ in range(n):
        length = rng.uniform(config.min_length_frac, config.max_length_frac) * CANVAS_SIZE
        angle = rng.uniform(0.0, 2.0 * np.pi)
        start = rng.uniform(0.0, CANVAS_SIZE, size=2)
        end = start + length * np.array([np.cos(angle), np.sin(angle)])
        end = np.clip(end, 0.0, CANVAS_SIZE)
        lines.append(np.stack([start, end]))
    return Sketch(lines + [s.copy() for s in sketch.strokes], sketch.label)


def _arc_lengths(stroke: np.ndarray) -> np.ndarray:
    diffs = np.diff(stroke, axis=0)
    return np.concatenate([[0.0], np.cumsum(np.hypot(diffs[:, 0], diffs[:, 1]))])


def _sample_at(stroke: np.ndarray, cum: np.ndarray, positions: np.ndarray) -> np.ndarray:
    out = np.empty((len(positions), 2))
    out[:, 0] = np.interp(positions, cum, stroke[:, 0])
    out[:, 1] = np.interp(positions, cum, stroke[:, 1])
    return out


def dotted_transform(sketch: Sketch, config: DottedConfig) -> Sketch:
    """Cut each stroke into dash strokes separated by pen-up gaps.

    Dashes cover arc intervals [k*(dash+gap), k*(dash+gap)+dash]; the final
    partial dash is kept. A stroke shorter than one dash is resampled but
    spans its original arc.
    """
    config.validate()
    period = config.dash_length + config.gap_length
    out = []
    for stroke in sketch.strokes:
        if len(stroke) == 1:
            out.append(stroke.copy())
            continue
        cum = _arc_lengths(stroke)
        total = cum[-1]
        if total == 0.0:
            out.append(stroke[:1].copy())
            continue
        start = 0.0
        while start < total:
            end = min(start + config.dash_length, total)
            positions = np.arange(start, end, config.resample_step)
            positions = np.append(positions, end)
            out.append(_sample_at(stroke, cum, positions))
            start += period
    return Sketch(out, sketch.label)


def _fit_into(sketch: Sketch, x0: float, y0: float, x1: float, y1: float) -> list[np.ndarray]:
    """Scale a sketch into the rectangle, preserving aspect, centered."""
    pts = sketch.points()
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = hi - lo
    w, h = x1 - x0, y1 - y0
    scales = [w / span[0] if span[0] > 0 else np.inf, h / span[1] if span[1] > 0 else np.inf]
    scale = min(scales)
    if not np.isfinite(scale):
        scale = 0.0  # single point: collapse to rect center
    center = np.array([(x0 + x1) / 2, (y0 + y1) / 2])
    mid = (lo + hi) / 2
    return [(s - mid) * scale + center for s in sketch.strokes]


def rebus_compose(entry: CompoundEntry, parts: tuple[Sketch, Sketch]) -> Sketch:
    """Draw part A in the left half-canvas, then part B in the right half."""
    part_a, part_b = parts
    if part_a.label != entry.part_a or part_b.label != entry.part_b:
        raise ValueError(
            f"part labels ({part_a.label}, {part_b.label}) do not match "
            f"table entry ({entry.part_a}, {entry.part_b})"
        )
    margin = 8.0
    mid = CANVAS_SIZE / 2
    left = _fit_into(part_a, margin, margin, mid - margin, CANVAS_SIZE - margin)
    right = _fit_into(part_b, mid + margin, margin, CANVAS_SIZE - margin, CANVAS_SIZE - margin)
    return Sketch(left + right, label=entry.compound)


def synthesize_strategy_dataset(
    clean_sketches: list[Sketch],
    strategy: str,
    config,
    target_count: int,
    seed: int = 0,
    compounds: list[CompoundEntry] | None = None,
    simplify_epsilon: float | None = 2.0,
) -> list[Sketch]:
    """Produce exactly target_count adversarial sketches from a clean pool.

    Sources are drawn without replacement until the pool is exhausted, then
    redrawn under fresh transform randomness. Outputs pass through the same
    RDP simplification as every other data source, so dash strokes end up
    with the sparse vertex density of the published sketch files.
    """
    if target_count < 0:
        raise ValueError("target_count must be >= 0")
    rng = np.random.default_rng(seed)
    out: list[Sketch] = []

    def finish(sketch: Sketch) -> Sketch:
        if simplify_epsilon is None:
            return sketch
        return simplify_sketch(sketch, simplify_epsilon)

    if strategy == "rebus":
        if not compounds:
            raise ValueError("rebus synthesis needs a non-empty compound table")
        by_label: dict[int, list[Sketch]] = {}
        for s in clean_sketches:
            if s.label is not None:
                by_label.setdefault(s.label, []).append(s)
        usable = [
            e for e in compounds if by_label.get(e.part_a) and by_label.get(e.part_b)
        ]
        if not usable:
            raise ValueError("no compound entry has source sketches for both parts")
        while len(out) < target_count:
            entry = usable[int(rng.integers(len(usable)))]
            a = by_label[entry.part_a][int(rng.integers(len(by_label[entry.part_a])))]
            b = by_label[entry.part_b][int(rng.integers(len(by_label[entry.part_b])))]
            out.append(finish(rebus_compose(entry, (a, b))))
        return out

    if strategy not in ("distraction", "dotted"):
        raise ValueError(f"unknown strategy {strategy!r}")
    if not clean_sketches:
        raise ValueError("need at least one clean source sketch")
    order: list[int] = []
    while len(out) < target_count:
        if not order:
            order = list(rng.permutation(len(clean_sketches)))
        source = clean_sketches[order.pop()]
        if strategy == "distraction":
            out.append(finish(distraction_transform(source, config, rng)))
        else:
            out.append(finish(dotted_transform(source, config)))
    return out
