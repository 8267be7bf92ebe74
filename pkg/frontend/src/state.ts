// Round view state as a pure function of the event log: server messages
// plus two local events (connection changes and the word of a submitted
// guess). Replaying a recorded log reproduces the exact same state.

import type { ServerMessage } from "./protocol.js";

export interface GuessRow {
  source: "nn" | "human";
  word: string;
  correct: boolean;
  rejected: boolean;
}

export type LocalEvent =
  | { type: "connection"; connected: boolean }
  | { type: "local_guess"; word: string };

export type AppEvent = ServerMessage | LocalEvent;

export interface RoundState {
  phase: "idle" | "active" | "over";
  roundId: number | null;
  maskedLength: number;
  roundSeconds: number;
  codeWord: string | null;
  winner: "nn" | "players" | null;
  guesses: GuessRow[];
  blacklist: string[];
  pendingGuess: string | null;
  connected: boolean;
  error: string | null;
}

export const initialState: RoundState = {
  phase: "idle",
  roundId: null,
  maskedLength: 0,
  roundSeconds: 0,
  codeWord: null,
  winner: null,
  guesses: [],
  blacklist: [],
  pendingGuess: null,
  connected: false,
  error: null,
};

export function reduce(state: RoundState, event: AppEvent): RoundState {
  switch (event.type) {
    case "connection":
      return { ...state, connected: event.connected };
    case "local_guess":
      return { ...state, pendingGuess: event.word };
    case "round_started":
      return {
        ...initialState,
        connected: state.connected,
        phase: "active",
        roundId: event.round_id,
        maskedLength: event.code_word_masked_length,
        roundSeconds: event.round_seconds,
        codeWord: event.code_word_plain ?? null,
      };
    case "nn_guess":
      return {
        ...state,
        blacklist: event.blacklist,
        guesses: [
          ...state.guesses,
          { source: "nn", word: event.word, correct: event.correct, rejected: false },
        ],
      };
    case "human_guess_result": {
      const word = state.pendingGuess ?? "?";
      return {
        ...state,
        pendingGuess: null,
        blacklist: event.blacklist,
        guesses: [
          ...state.guesses,
          { source: "human", word, correct: event.correct, rejected: event.rejected },
        ],
      };
    }
    case "round_over":
      return { ...state, phase: "over", winner: event.winner, codeWord: event.code_word };
    case "error":
      return { ...state, error: event.message };
  }
}

export function replay(events: AppEvent[]): RoundState {
  return events.reduce(reduce, initialState);
}
