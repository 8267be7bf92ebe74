// Wire schema shared with the game server, field names verbatim.

export type Point = [number, number];

export type ClientMessage =
  | { type: "start_round"; mode?: "guesser" | "sketcher" }
  | { type: "stroke"; points: Point[] }
  | { type: "guess"; word: string };

export interface RoundStarted {
  type: "round_started";
  round_id: number;
  code_word_masked_length: number;
  round_seconds: number;
  code_word_plain?: string;
}

export interface NnGuess {
  type: "nn_guess";
  round_id: number;
  word: string;
  correct: boolean;
  blacklist: string[];
}

export interface HumanGuessResult {
  type: "human_guess_result";
  round_id: number;
  correct: boolean;
  rejected: boolean;
  reason?: string;
  blacklist: string[];
}

export interface RoundOver {
  type: "round_over";
  round_id: number;
  winner: "nn" | "players";
  code_word: string;
}

export interface ServerError {
  type: "error";
  message: string;
}

export type ServerMessage = RoundStarted | NnGuess | HumanGuessResult | RoundOver | ServerError;
