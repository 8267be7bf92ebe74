"""Round lifecycle: stroke buffer, cadence-gated guessing, blacklist, outcome.

All timing is injected by the caller (timestamps in seconds), so a round is
fully deterministic and testable without a real clock. The network guesses
at most once per cadence interval; every wrong guess (from the network or a
human) lands on the shared blacklist and can never be guessed again.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import EnsembleBundle, ensemble_topk
from .strokes import Sketch, encode, normalize, simplify_sketch

DEFAULT_CADENCE = 2.5
DEFAULT_ROUND_SECONDS = 60.0
LIVE_SIMPLIFY_EPSILON = 2.0

ACTIVE = "active"
NN_WON = "nn_won"
PLAYERS_WON = "players_won"
EXPIRED = "expired"


class RoundStateError(RuntimeError):
    """Operation on a round that has already ended."""


class BlacklistedGuessError(ValueError):
    """Guess repeats a word that is already blacklisted."""


@dataclass
class GuessEvent:
    source: str  # "nn" or "human"
    class_index: int
    timestamp: float
    correct: bool


class GameRound:
    def __init__(
        self,
        code_word: int,
        class_count: int,
        started_at: float = 0.0,
        cadence: float = DEFAULT_CADENCE,
        round_seconds: float = DEFAULT_ROUND_SECONDS,
        simplify_epsilon: float = LIVE_SIMPLIFY_EPSILON,
    ):
        if not 0 <= code_word < class_count:
            raise ValueError(f"code word {code_word} out of range for {class_count} classes")
        self.code_word = code_word
        self.class_count = class_count
        self.started_at = started_at
        self.cadence = cadence
        self.round_seconds = round_seconds
        self.simplify_epsilon = simplify_epsilon
        self.strokes: list[np.ndarray] = []
        self.blacklist: set[int] = set()
        self.last_query = started_at
        self.status = ACTIVE
        self.events: list[GuessEvent] = []

    def submit_stroke(self, stroke) -> None:
        """Append one canvas-coordinate stroke; never triggers a prediction."""
        if self.status != ACTIVE:
            raise RoundStateError(f"round is over ({self.status})")
        stroke = np.asarray(stroke, dtype=np.float64).reshape(-1, 2)
        if len(stroke) == 0:
            raise ValueError("empty stroke")
        self.strokes.append(stroke)

    def current_sequence(self):
        """Preprocess the accumulated drawing exactly like training data."""
        if not self.strokes:
            return None
        sketch = simplify_sketch(Sketch([s.copy() for s in self.strokes]), self.simplify_epsilon)
        return encode(normalize(sketch))

    def tick(self, now: float, bundle: EnsembleBundle) -> GuessEvent | None:
        """Advance the round clock; guess when a full cadence has elapsed."""
        if self.status != ACTIVE:
            return None
        if now - self.started_at >= self.round_seconds:
            self.status = EXPIRED
            return None
        if now - self.last_query < self.cadence or not self.strokes:
            return None
        if len(self.blacklist) >= self.class_count:
            return None
        guess = ensemble_topk(bundle, self.current_sequence(), 1, self.blacklist)[0]
        self.last_query = now
        correct = guess == self.code_word
        event = GuessEvent("nn", guess, now, correct)
        self.events.append(event)
        if correct:
            self.status = NN_WON
        else:
            self.blacklist.add(guess)
        return event

    def human_guess(self, class_index: int, now: float) -> GuessEvent:
        """Resolve a player's guess; wrong guesses blacklist for everyone."""
        if self.status != ACTIVE:
            raise RoundStateError(f"round is over ({self.status})")
        if class_index in self.blacklist:
            raise BlacklistedGuessError(f"class {class_index} is already blacklisted")
        correct = class_index == self.code_word
        event = GuessEvent("human", class_index, now, correct)
        self.events.append(event)
        if correct:
            self.status = PLAYERS_WON
        else:
            self.blacklist.add(class_index)
        return event
