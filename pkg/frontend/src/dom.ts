/**
 * HTML rendering for the session view.
 *
 * Rendering is a pure function from view to markup string, so it can be
 * tested without a DOM; main.ts assigns the result to a container.
 */

import { SessionView, StripEntry, canAnswer, canStop } from "./view.js";

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function renderStripEntry(entry: StripEntry): string {
  if (entry.kind === "segment") {
    return `<span class="segment" title="${entry.steps} steps">${"&#9605;".repeat(Math.max(1, Math.min(entry.steps, 12)))}</span>`;
  }
  return `<span class="query-marker" data-seq="${entry.seq}">?${entry.seq}</span>`;
}

function renderOutcome(view: SessionView): string {
  if (view.outcome === null) return "";
  if (view.outcome.kind === "halt") {
    return `<div class="banner halt">Halted with output &quot;${escapeHtml(view.outcome.output)}&quot;</div>`;
  }
  const reason = view.outcome.reason ? ` (${escapeHtml(view.outcome.reason)})` : "";
  return `<div class="banner abort">Aborted${reason} &mdash; no output</div>`;
}

function renderReport(view: SessionView): string {
  if (view.report === null) return "";
  const flags = view.report.real_flags
    .map((real, i) => `<li>query ${i}: ${real ? "real" : "not real"}</li>`)
    .join("");
  const decisive = view.report.decisive == null
    ? ""
    : `<p>Decisive points: ${view.report.decisive.length ? view.report.decisive.join(", ") : "none"}</p>`;
  const notes = (view.report.notes ?? [])
    .map((note) => `<p class="note">${escapeHtml(note)}</p>`)
    .join("");
  return `<section class="report">
    <h2>Session report</h2>
    <p>Conclusive: ${view.report.conclusive ? "yes" : "no"}</p>
    <ul>${flags}</ul>
    ${decisive}${notes}
  </section>`;
}

export function render(view: SessionView): string {
  const status = view.connection === "idle"
    ? "not connected"
    : view.connection === "finished"
      ? "finished"
      : view.pending !== null
        ? `awaiting answer to query ${view.pending.seq}`
        : "running";
  const prompt = view.pending === null
    ? ""
    : `<div class="prompt">Prompt: <code>${escapeHtml(view.pending.prompt)}</code></div>`;
  const answerDisabled = canAnswer(view) ? "" : " disabled";
  const stopDisabled = canStop(view) ? "" : " disabled";
  const errors = view.errors
    .map((reason) => `<p class="error">${escapeHtml(reason)}</p>`)
    .join("");
  const alphabet = view.alphabet.length
    ? `<p class="alphabet">Alphabet {${view.alphabet.map(escapeHtml).join(", ")}}, answers up to ${view.maxAnswerLen} symbols</p>`
    : "";
  return `<main>
    <p class="status">${escapeHtml(status)}</p>
    ${alphabet}
    <div class="strip">${view.strip.map(renderStripEntry).join("")}</div>
    ${prompt}
    <form id="answer-form">
      <input id="answer-input" type="text"${answerDisabled}>
      <button id="answer-send" type="submit"${answerDisabled}>Answer</button>
      <button id="stop-button" type="button"${stopDisabled}>Emergency stop</button>
    </form>
    ${renderOutcome(view)}
    ${view.reportReady && view.report === null ? '<button id="report-button" type="button">Fetch report</button>' : ""}
    ${renderReport(view)}
    ${errors}
  </main>`;
}
