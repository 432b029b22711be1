/**
 * Session client: drives one live session over a pluggable transport.
 *
 * The client validates answers locally against the acknowledged answer
 * space, but never advances the view on its own: every state change is
 * a reaction to a server message, so the view always equals
 * viewFromTranscript(transcript).
 */

import { ClientMessage, ServerMessage, SessionReport, TranscriptMessage } from "./protocol.js";
import { SessionView, canStop, initialView, reduceView, validateAnswer } from "./view.js";

export interface Transport {
  send(message: ClientMessage): void;
  onMessage(handler: (message: ServerMessage) => void): void;
  close(): void;
}

export type ViewListener = (view: SessionView) => void;

export class SessionClient {
  private transport: Transport;
  private listeners: ViewListener[] = [];

  view: SessionView = initialView();
  /** Every message that crossed the wire, both directions, in order. */
  transcript: TranscriptMessage[] = [];

  constructor(transport: Transport) {
    this.transport = transport;
    transport.onMessage((message) => this.receive(message));
  }

  onChange(listener: ViewListener): void {
    this.listeners.push(listener);
  }

  private receive(message: ServerMessage): void {
    this.transcript.push(message);
    this.view = reduceView(this.view, message);
    for (const listener of this.listeners) {
      listener(this.view);
    }
  }

  private send(message: ClientMessage): void {
    this.transcript.push(message);
    this.transport.send(message);
  }

  hello(options: { scenarioId?: string; spec?: unknown; input?: Record<string, unknown> }): void {
    this.send({
      type: "hello",
      ...(options.scenarioId !== undefined ? { scenario_id: options.scenarioId } : {}),
      ...(options.spec !== undefined ? { spec: options.spec } : {}),
      input: options.input ?? {},
    });
  }

  /** Send an answer to the outstanding query; throws if it is invalid. */
  answer(word: string): void {
    const problem = validateAnswer(this.view, word);
    if (problem !== null) {
      throw new Error(problem);
    }
    const pending = this.view.pending;
    if (pending === null) {
      throw new Error("no outstanding query");
    }
    this.send({ type: "answer", seq: pending.seq, word });
  }

  /** Emergency stop: valid in any unfinished state, aborts with no output. */
  stop(): void {
    if (!canStop(this.view)) {
      throw new Error("session is not running");
    }
    this.send({ type: "stop" });
  }

  getReport(): void {
    this.send({ type: "get_report" });
  }

  close(): void {
    this.transport.close();
  }
}

export function latestReport(client: SessionClient): SessionReport | null {
  return client.view.report;
}
