/**
 * Wire protocol for live loopscope sessions.
 *
 * The same message vocabulary travels over two transports: newline
 * delimited JSON on a TCP socket and a WebSocket at /ws.  Client
 * messages are hello, answer, stop, and get_report; everything else
 * comes from the server.
 */

export const STOP_TOKEN = "!";

export interface ClientHello {
  type: "hello";
  scenario_id?: string;
  spec?: unknown;
  input?: Record<string, unknown>;
}

export interface ClientAnswer {
  type: "answer";
  seq: number;
  word: string;
}

export interface ClientStop {
  type: "stop";
}

export interface ClientGetReport {
  type: "get_report";
}

export type ClientMessage = ClientHello | ClientAnswer | ClientStop | ClientGetReport;

export interface HelloAck {
  type: "hello_ack";
  session: string;
  alphabet: string[];
  max_answer_len: number;
}

export interface SegmentMessage {
  type: "segment";
  steps_since_last_query: number;
}

export interface QueryMessage {
  type: "query";
  session: string;
  seq: number;
  prompt: string;
  issued_at: number;
}

export interface HaltMessage {
  type: "halt";
  output: string;
}

export interface AbortMessage {
  type: "abort";
  reason?: string;
}

export interface ReportReadyMessage {
  type: "report_ready";
  report_id: string;
}

export interface SessionReport {
  kind: string;
  session_id: string;
  real_flags: boolean[];
  conclusive: boolean;
  decisive?: number[] | null;
  notes?: string[];
  [key: string]: unknown;
}

export interface ReportMessage {
  type: "report";
  report: SessionReport;
}

export interface ErrorMessage {
  type: "error";
  reason: string;
}

export type ServerMessage =
  | HelloAck
  | SegmentMessage
  | QueryMessage
  | HaltMessage
  | AbortMessage
  | ReportReadyMessage
  | ReportMessage
  | ErrorMessage;

/** Any message that may appear in a session transcript. */
export type TranscriptMessage = ServerMessage | ClientMessage;

const SERVER_TYPES = new Set([
  "hello_ack", "segment", "query", "halt", "abort",
  "report_ready", "report", "error",
]);

export function isServerMessage(message: TranscriptMessage): message is ServerMessage {
  return SERVER_TYPES.has(message.type);
}

/** Decode one JSON line into a transcript message, or null if malformed. */
export function decodeLine(line: string): TranscriptMessage | null {
  let parsed: unknown;
  try {
    parsed = JSON.parse(line);
  } catch {
    return null;
  }
  if (typeof parsed !== "object" || parsed === null) return null;
  const message = parsed as { type?: unknown };
  if (typeof message.type !== "string") return null;
  return parsed as TranscriptMessage;
}

export function encodeLine(message: ClientMessage): string {
  return JSON.stringify(message) + "\n";
}
