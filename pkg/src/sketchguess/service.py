"""Game service: WebSocket rounds, REST prediction, static UI delivery.

One round per socket session at a time. The server drives the guess cadence
from its own clock via a per-session background task; every server frame
echoes the round id. The ensemble bundle is shared and read-only, so any
number of sessions can run concurrently.
"""

from __future__ import annotations

import asyncio
import os
import time
from dataclasses import dataclass, field
from typing import Literal, Union

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field, TypeAdapter, ValidationError

from .ensemble import EnsembleBundle, ensemble_predict, ensemble_topk
from .game import (
    ACTIVE,
    EXPIRED,
    LIVE_SIMPLIFY_EPSILON,
    NN_WON,
    PLAYERS_WON,
    BlacklistedGuessError,
    GameRound,
)
from .strokes import CANVAS_SIZE, Sketch, encode, normalize, simplify_sketch


@dataclass
class ServiceSettings:
    cadence: float = 2.5
    round_seconds: float = 60.0
    code_word_seed: int | None = None  # fixed seed makes code words scriptable
    ui_dir: str | None = None
    tick_interval: float = 0.05
    clock: callable = field(default=time.monotonic)


class StartRoundMessage(BaseModel):
    type: Literal["start_round"]
    mode: Literal["guesser", "sketcher"] = "guesser"


class StrokeMessage(BaseModel):
    type: Literal["stroke"]
    points: list[tuple[float, float]] = Field(min_length=1)


class GuessMessage(BaseModel):
    type: Literal["guess"]
    word: str


_CLIENT_MESSAGE = TypeAdapter(
    Union[StartRoundMessage, StrokeMessage, GuessMessage]
)


class PredictRequest(BaseModel):
    strokes: list[list[tuple[float, float]]] = Field(min_length=1)
    k: int = 5


class Prediction(BaseModel):
    word: str
    probability: float


class PredictResponse(BaseModel):
    top: list[Prediction]


class HealthResponse(BaseModel):
    status: str
    members: list[str]
    classes: int


def _winner(status: str) -> str:
    return "nn" if status == NN_WON else "players"


class Session:
    """Per-connection state: at most one live round and its tick task."""

    def __init__(self, ws: WebSocket, bundle, class_names, settings):
        self.ws = ws
        self.bundle = bundle
        self.class_names = class_names
        self.class_index = {name: i for i, name in enumerate(class_names)}
        self.settings = settings
        self.rng = np.random.default_rng(settings.code_word_seed)
        self.round: GameRound | None = None
        self.round_id = 0
        self.ticker: asyncio.Task | None = None
        self.send_lock = asyncio.Lock()

    async def send(self, payload: dict) -> None:
        async with self.send_lock:
            await self.ws.send_json(payload)

    def _blacklist_words(self) -> list[str]:
        return [self.class_names[i] for i in sorted(self.round.blacklist)]

    async def start_round(self, msg: StartRoundMessage) -> None:
        if self.round is not None and self.round.status == ACTIVE:
            raise ValueError("a round is already active on this session")
        await self.stop_ticker()
        code_word = int(self.rng.integers(len(self.class_names)))
        self.round_id += 1
        self.round = GameRound(
            code_word,
            len(self.class_names),
            started_at=self.settings.clock(),
            cadence=self.settings.cadence,
            round_seconds=self.settings.round_seconds,
        )
        started = {
            "type": "round_started",
            "round_id": self.round_id,
            "code_word_masked_length": len(self.class_names[code_word]),
            "round_seconds": self.settings.round_seconds,
        }
        if msg.mode == "sketcher":
            started["code_word_plain"] = self.class_names[code_word]
        await self.send(started)
        self.ticker = asyncio.create_task(self.run_ticks(self.round, self.round_id))

    async def run_ticks(self, round_: GameRound, round_id: int) -> None:
        while round_.status == ACTIVE:
            await asyncio.sleep(self.settings.tick_interval)
            if round_ is not self.round or round_.status != ACTIVE:
                return
            event = round_.tick(self.settings.clock(), self.bundle)
            if event is not None:
                await self.send(
                    {
                        "type": "nn_guess",
                        "round_id": round_id,
                        "word": self.class_names[event.class_index],
                        "correct": event.correct,
                        "blacklist": self._blacklist_words(),
                    }
                )
        if round_.status in (NN_WON, EXPIRED):
            await self.send(
                {
                    "type": "round_over",
                    "round_id": round_id,
                    "winner": _winner(round_.status),
                    "code_word": self.class_names[round_.code_word],
                }
            )

    async def handle_stroke(self, msg: StrokeMessage) -> None:
        if self.round is None or self.round.status != ACTIVE:
            raise ValueError("no active round for stroke")
        points = np.clip(np.asarray(msg.points, dtype=np.float64), 0.0, CANVAS_SIZE)
        self.round.submit_stroke(points)

    async def handle_guess(self, msg: GuessMessage) -> None:
        if self.round is None or self.round.status != ACTIVE:
            raise ValueError("no active round for guess")
        result = {
            "type": "human_guess_result",
            "round_id": self.round_id,
            "correct": False,
            "rejected": False,
        }
        class_index = self.class_index.get(msg.word)
        if class_index is None:
            result["rejected"] = True
            result["reason"] = "unknown word"
        else:
            try:
                event = self.round.human_guess(class_index, self.settings.clock())
                result["correct"] = event.correct
            except BlacklistedGuessError:
                result["rejected"] = True
                result["reason"] = "blacklisted"
        result["blacklist"] = self._blacklist_words()
        await self.send(result)
        if self.round.status == PLAYERS_WON:
            await self.stop_ticker()
            await self.send(
                {
                    "type": "round_over",
                    "round_id": self.round_id,
                    "winner": "players",
                    "code_word": self.class_names[self.round.code_word],
                }
            )

    async def stop_ticker(self) -> None:
        if self.ticker is not None:
            self.ticker.cancel()
            try:
                await self.ticker
            except asyncio.CancelledError:
                pass
            self.ticker = None

    async def run(self) -> None:
        try:
            while True:
                raw = await self.ws.receive_text()
                try:
                    msg = _CLIENT_MESSAGE.validate_json(raw)
                except ValidationError as exc:
                    await self.send({"type": "error", "message": f"malformed message: {exc.errors()[0]['msg']}"})
                    return
                try:
                    if isinstance(msg, StartRoundMessage):
                        await self.start_round(msg)
                    elif isinstance(msg, StrokeMessage):
                        await self.handle_stroke(msg)
                    else:
                        await self.handle_guess(msg)
                except (ValueError, RuntimeError) as exc:
                    await self.send({"type": "error", "message": str(exc)})
                    return
        finally:
            await self.stop_ticker()


def create_app(
    bundle: EnsembleBundle, class_names: list[str], settings: ServiceSettings | None = None
) -> FastAPI:
    if len(class_names) != bundle.class_count:
        raise ValueError(
            f"class table has {len(class_names)} names, bundle expects {bundle.class_count}"
        )
    settings = settings or ServiceSettings()
    app = FastAPI(title="sketchguess")

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(
            status="ok", members=[name for name, _ in bundle.members], classes=len(class_names)
        )

    @app.post("/predict", response_model=PredictResponse)
    def predict(req: PredictRequest):
        strokes = [np.clip(np.asarray(s, dtype=np.float64), 0.0, CANVAS_SIZE) for s in req.strokes]
        sketch = simplify_sketch(Sketch(strokes), LIVE_SIMPLIFY_EPSILON)
        seq = encode(normalize(sketch))
        probs = ensemble_predict(bundle, seq)
        top = ensemble_topk(bundle, seq, req.k)
        return PredictResponse(
            top=[Prediction(word=class_names[c], probability=float(probs[c])) for c in top]
        )

    @app.websocket("/play")
    async def play(ws: WebSocket):
        await ws.accept()
        session = Session(ws, bundle, class_names, settings)
        try:
            await session.run()
            await ws.close()
        except WebSocketDisconnect:
            pass
        finally:
            await session.stop_ticker()

    if settings.ui_dir and os.path.isdir(settings.ui_dir):
        app.mount("/", StaticFiles(directory=settings.ui_dir, html=True), name="ui")
    else:

        @app.get("/")
        def index():
            return {"service": "sketchguess", "play": "/play", "health": "/health"}

    return app
