// Browser entry point: canvas wiring, panels, countdown, reconnect banner.

import { CANVAS_UNITS, StrokeRecorder, toCanvasPoint } from "./canvas.js";
import { GameClient, webSocketTransport } from "./client.js";
import type { Point } from "./protocol.js";
import type { RoundState } from "./state.js";

const canvas = document.getElementById("pad") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const guessList = document.getElementById("guesses")!;
const blacklistPanel = document.getElementById("blacklist")!;
const banner = document.getElementById("banner")!;
const wordLabel = document.getElementById("word")!;
const timerLabel = document.getElementById("timer")!;
const guessInput = document.getElementById("guess-input") as HTMLInputElement;
const guessButton = document.getElementById("guess-send") as HTMLButtonElement;
const startButton = document.getElementById("start") as HTMLButtonElement;
const reconnectButton = document.getElementById("reconnect") as HTMLButtonElement;

let client = connect();
let strokes: Point[][] = [];
const recorder = new StrokeRecorder();
let roundStartedAt: number | null = null;

function connect(): GameClient {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  const c = new GameClient(webSocketTransport(`${proto}://${location.host}/play`));
  c.onChange(render);
  return c;
}

function scale(): number {
  return canvas.width / CANVAS_UNITS;
}

function redraw(): void {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.lineWidth = 2;
  ctx.lineCap = "round";
  ctx.strokeStyle = "#222";
  const k = scale();
  for (const stroke of [...strokes, recorder.current()]) {
    if (stroke.length === 0) {
      continue;
    }
    ctx.beginPath();
    ctx.moveTo(stroke[0][0] * k, stroke[0][1] * k);
    for (const [x, y] of stroke.slice(1)) {
      ctx.lineTo(x * k, y * k);
    }
    ctx.stroke();
  }
}

function pointerPoint(e: PointerEvent): Point {
  return toCanvasPoint(e.clientX, e.clientY, canvas.getBoundingClientRect());
}

canvas.addEventListener("pointerdown", (e) => {
  if (client.state.phase !== "active") {
    return;
  }
  canvas.setPointerCapture(e.pointerId);
  recorder.begin(pointerPoint(e));
  redraw();
});

canvas.addEventListener("pointermove", (e) => {
  if (recorder.active) {
    recorder.extend(pointerPoint(e));
    redraw();
  }
});

canvas.addEventListener("pointerup", () => {
  const stroke = recorder.end();
  if (stroke) {
    strokes.push(stroke);
    client.sendStroke(stroke);
    redraw();
  }
});

startButton.addEventListener("click", () => {
  strokes = [];
  redraw();
  roundStartedAt = performance.now();
  client.startRound("sketcher");
});

guessButton.addEventListener("click", submitGuess);
guessInput.addEventListener("keydown", (e) => {
  if (e.key === "Enter") {
    submitGuess();
  }
});

function submitGuess(): void {
  client.guess(guessInput.value);
  guessInput.value = "";
}

reconnectButton.addEventListener("click", () => {
  client = connect();
  render(client.state);
});

function render(state: RoundState): void {
  banner.hidden = state.connected && !state.error;
  banner.textContent = state.error
    ? `session error: ${state.error}`
    : "connection lost";
  reconnectButton.hidden = state.connected;

  if (state.phase === "over") {
    wordLabel.textContent = `${state.winner === "players" ? "players win" : "the network wins"}: the word was "${state.codeWord}"`;
  } else if (state.codeWord) {
    wordLabel.textContent = `draw: ${state.codeWord}`;
  } else if (state.phase === "active") {
    wordLabel.textContent = `word: ${"_ ".repeat(state.maskedLength).trim()}`;
  } else {
    wordLabel.textContent = "press start";
  }

  guessList.replaceChildren(
    ...state.guesses.map((g) => {
      const li = document.createElement("li");
      const flag = g.rejected ? "(rejected)" : g.correct ? "✓" : "✗";
      li.textContent = `${g.source === "nn" ? "NN" : "you"}: ${g.word} ${flag}`;
      li.className = g.correct ? "correct" : g.rejected ? "rejected" : "wrong";
      return li;
    })
  );
  blacklistPanel.replaceChildren(
    ...state.blacklist.map((w) => {
      const li = document.createElement("li");
      li.textContent = w;
      return li;
    })
  );
  canvas.classList.toggle("locked", state.phase !== "active");
}

function tickTimer(): void {
  if (client.state.phase === "active" && roundStartedAt !== null) {
    const left = Math.max(
      0,
      client.state.roundSeconds - (performance.now() - roundStartedAt) / 1000
    );
    timerLabel.textContent = `${left.toFixed(1)}s`;
  } else if (client.state.phase === "over") {
    timerLabel.textContent = "";
  }
  requestAnimationFrame(tickTimer);
}

render(client.state);
tickTimer();
