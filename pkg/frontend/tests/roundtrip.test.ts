// Scripted session against a server double that mirrors the live wire
// protocol: cadence-gated ranked guesses, a shared blacklist, and both win
// conditions. The double exposes a virtual clock the test advances.

import { describe, expect, it } from "vitest";

import { GameClient, Transport } from "../src/client.js";
import type { ClientMessage, ServerMessage } from "../src/protocol.js";

const CADENCE = 2.5;
const RANKED = ["circle", "square", "triangle", "star", "zigzag", "line"];

function scriptedServer(codeWord: string) {
  let push: (msg: ServerMessage) => void = () => {};
  let openHandler: () => void = () => {};
  let blacklist: string[] = [];
  let strokes = 0;
  let clock = 0;
  let lastQuery = 0;
  let roundId = 0;
  let active = false;

  function nextGuess(): string {
    return RANKED.filter((w) => !blacklist.includes(w))[0];
  }

  function overMessage(winner: "nn" | "players"): ServerMessage {
    return { type: "round_over", round_id: roundId, winner, code_word: codeWord };
  }

  const transport: Transport = {
    send(msg: ClientMessage) {
      if (msg.type === "start_round") {
        roundId += 1;
        active = true;
        blacklist = [];
        strokes = 0;
        clock = 0;
        lastQuery = 0;
        push({
          type: "round_started",
          round_id: roundId,
          code_word_masked_length: codeWord.length,
          round_seconds: 60,
          ...(msg.mode === "sketcher" ? { code_word_plain: codeWord } : {}),
        });
      } else if (msg.type === "stroke") {
        strokes += 1;
      } else if (msg.type === "guess") {
        if (!active) {
          return;
        }
        if (blacklist.includes(msg.word)) {
          push({
            type: "human_guess_result",
            round_id: roundId,
            correct: false,
            rejected: true,
            reason: "blacklisted",
            blacklist: [...blacklist],
          });
          return;
        }
        const correct = msg.word === codeWord;
        if (!correct) {
          blacklist = [...blacklist, msg.word];
        }
        push({
          type: "human_guess_result",
          round_id: roundId,
          correct,
          rejected: false,
          blacklist: [...blacklist],
        });
        if (correct) {
          active = false;
          push(overMessage("players"));
        }
      }
    },
    onMessage(h) {
      push = h;
    },
    onOpen(h) {
      openHandler = h;
    },
    onClose() {},
  };

  return {
    transport,
    open: () => openHandler(),
    advance(seconds: number) {
      const target = clock + seconds;
      while (active && strokes > 0 && target - lastQuery >= CADENCE) {
        lastQuery += CADENCE;
        clock = lastQuery;
        const word = nextGuess();
        const correct = word === codeWord;
        if (!correct) {
          blacklist = [...blacklist, word];
        }
        push({
          type: "nn_guess",
          round_id: roundId,
          word,
          correct,
          blacklist: [...blacklist],
        });
        if (correct) {
          active = false;
          push(overMessage("nn"));
        }
      }
      clock = target;
    },
  };
}

const FIXTURE_SKETCH: [number, number][][] = [
  [
    [40, 200],
    [40, 80],
    [215, 80],
    [215, 200],
    [40, 200],
  ],
  [
    [30, 80],
    [128, 20],
    [225, 80],
  ],
];

describe("scripted session round trip", () => {
  it("draws, sees guesses and the blacklist grow, and wins by guessing", () => {
    const server = scriptedServer("house");
    const client = new GameClient(server.transport);
    server.open();
    expect(client.state.connected).toBe(true);

    client.startRound("sketcher");
    expect(client.state.phase).toBe("active");
    expect(client.state.codeWord).toBe("house");

    for (const stroke of FIXTURE_SKETCH) {
      client.sendStroke(stroke);
    }

    // at least one network guess within two cadence periods
    server.advance(2 * CADENCE);
    const nnGuesses = client.state.guesses.filter((g) => g.source === "nn");
    expect(nnGuesses.length).toBeGreaterThanOrEqual(1);
    expect(client.state.blacklist).toContain(nnGuesses[0].word);

    // a wrong human guess grows the shared blacklist
    const before = client.state.blacklist.length;
    client.guess("clock");
    expect(client.state.blacklist.length).toBe(before + 1);
    expect(client.state.blacklist).toContain("clock");
    expect(client.state.guesses.at(-1)).toMatchObject({
      source: "human",
      word: "clock",
      correct: false,
    });

    // the correct guess ends the round for the players
    client.guess("house");
    expect(client.state.phase).toBe("over");
    expect(client.state.winner).toBe("players");
    expect(client.state.codeWord).toBe("house");
  });

  it("lets the network win when it reaches the code word", () => {
    const server = scriptedServer("triangle"); // third in the ranking
    const client = new GameClient(server.transport);
    server.open();
    client.startRound();
    client.sendStroke(FIXTURE_SKETCH[0]);
    server.advance(3 * CADENCE);
    expect(client.state.phase).toBe("over");
    expect(client.state.winner).toBe("nn");
    const last = client.state.guesses.at(-1);
    expect(last).toMatchObject({ source: "nn", word: "triangle", correct: true });
  });

  it("rejects a repeated blacklisted guess without changing state", () => {
    const server = scriptedServer("house");
    const client = new GameClient(server.transport);
    server.open();
    client.startRound("sketcher");
    client.guess("clock");
    const blacklistAfterFirst = [...client.state.blacklist];
    client.guess("clock");
    expect(client.state.guesses.at(-1)).toMatchObject({ rejected: true });
    expect(client.state.blacklist).toEqual(blacklistAfterFirst);
  });
});
