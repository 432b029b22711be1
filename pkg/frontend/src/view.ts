/**
 * Session view model: a pure function of the message transcript.
 *
 * The console never updates the view optimistically; only server
 * messages move it forward.  Reloading a view from a saved transcript
 * therefore reproduces the live view exactly.
 */

import { ServerMessage, SessionReport, TranscriptMessage, isServerMessage } from "./protocol.js";

export type StripEntry =
  | { kind: "segment"; steps: number }
  | { kind: "query"; seq: number };

export type Outcome =
  | { kind: "halt"; output: string }
  | { kind: "abort"; reason: string | null };

export interface PendingQuery {
  seq: number;
  prompt: string;
}

export interface SessionView {
  connection: "idle" | "connected" | "finished";
  sessionId: string | null;
  alphabet: string[];
  maxAnswerLen: number;
  strip: StripEntry[];
  pending: PendingQuery | null;
  outcome: Outcome | null;
  reportReady: boolean;
  report: SessionReport | null;
  errors: string[];
}

export function initialView(): SessionView {
  return {
    connection: "idle",
    sessionId: null,
    alphabet: [],
    maxAnswerLen: 0,
    strip: [],
    pending: null,
    outcome: null,
    reportReady: false,
    report: null,
    errors: [],
  };
}

/** Fold one server message into the view; returns a new view. */
export function reduceView(view: SessionView, message: ServerMessage): SessionView {
  switch (message.type) {
    case "hello_ack":
      return {
        ...view,
        connection: "connected",
        sessionId: message.session,
        alphabet: message.alphabet,
        maxAnswerLen: message.max_answer_len,
      };
    case "segment":
      return {
        ...view,
        strip: [...view.strip, { kind: "segment", steps: message.steps_since_last_query }],
      };
    case "query":
      return {
        ...view,
        strip: [...view.strip, { kind: "query", seq: message.seq }],
        pending: { seq: message.seq, prompt: message.prompt },
      };
    case "halt":
      return {
        ...view,
        connection: "finished",
        pending: null,
        outcome: { kind: "halt", output: message.output },
      };
    case "abort":
      return {
        ...view,
        connection: "finished",
        pending: null,
        outcome: { kind: "abort", reason: message.reason ?? null },
      };
    case "report_ready":
      return { ...view, reportReady: true };
    case "report":
      return { ...view, report: message.report };
    case "error":
      return { ...view, errors: [...view.errors, message.reason] };
  }
}

/** Rebuild the view from a transcript; client messages are skipped. */
export function viewFromTranscript(messages: TranscriptMessage[]): SessionView {
  let view = initialView();
  for (const message of messages) {
    if (isServerMessage(message)) {
      view = reduceView(view, message);
    }
  }
  return view;
}

export function canAnswer(view: SessionView): boolean {
  return view.connection === "connected" && view.pending !== null;
}

export function canStop(view: SessionView): boolean {
  return view.connection === "connected";
}

/**
 * Check a candidate answer against the session's answer space before it
 * is sent.  Returns an error message, or null when the word is valid.
 */
export function validateAnswer(view: SessionView, word: string): string | null {
  if (!canAnswer(view)) {
    return "no outstanding query";
  }
  if (word.length > view.maxAnswerLen) {
    return `answer longer than ${view.maxAnswerLen} symbols`;
  }
  for (const symbol of word) {
    if (!view.alphabet.includes(symbol)) {
      return `symbol ${JSON.stringify(symbol)} is not in the alphabet`;
    }
  }
  return null;
}
