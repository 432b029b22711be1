/**
 * Browser entry point: connect the session client to a WebSocket and
 * render into #app.  The service address comes from the page query
 * string (?addr=host:port, the NDJSON socket address; the WebSocket
 * listens on the next port) and defaults to 127.0.0.1:8787.
 */

import { SessionClient, Transport } from "./client.js";
import { render } from "./dom.js";
import { ClientMessage, ServerMessage, decodeLine, isServerMessage } from "./protocol.js";

const DEFAULT_ADDR = "127.0.0.1:8787";

export function websocketUrl(addr: string): string {
  const colon = addr.lastIndexOf(":");
  const host = colon === -1 ? addr : addr.slice(0, colon);
  const port = colon === -1 ? 8787 : Number(addr.slice(colon + 1));
  return `ws://${host || "127.0.0.1"}:${port + 1}/ws`;
}

class WebSocketTransport implements Transport {
  private socket: WebSocket;
  private handlers: ((message: ServerMessage) => void)[] = [];
  private queue: string[] = [];

  constructor(url: string) {
    this.socket = new WebSocket(url);
    this.socket.onopen = () => {
      for (const line of this.queue) this.socket.send(line);
      this.queue = [];
    };
    this.socket.onmessage = (event) => {
      const message = decodeLine(String(event.data));
      if (message !== null && isServerMessage(message)) {
        for (const handler of this.handlers) handler(message);
      }
    };
  }

  send(message: ClientMessage): void {
    const line = JSON.stringify(message);
    if (this.socket.readyState === WebSocket.OPEN) {
      this.socket.send(line);
    } else {
      this.queue.push(line);
    }
  }

  onMessage(handler: (message: ServerMessage) => void): void {
    this.handlers.push(handler);
  }

  close(): void {
    this.socket.close();
  }
}

function mount(container: HTMLElement): void {
  const params = new URLSearchParams(window.location.search);
  const addr = params.get("addr") ?? DEFAULT_ADDR;
  const scenarioId = params.get("scenario") ?? "route-involved";
  const client = new SessionClient(new WebSocketTransport(websocketUrl(addr)));

  const redraw = () => {
    container.innerHTML = render(client.view);
    const form = container.querySelector<HTMLFormElement>("#answer-form");
    const input = container.querySelector<HTMLInputElement>("#answer-input");
    const stop = container.querySelector<HTMLButtonElement>("#stop-button");
    const report = container.querySelector<HTMLButtonElement>("#report-button");
    form?.addEventListener("submit", (event) => {
      event.preventDefault();
      if (input === null) return;
      try {
        client.answer(input.value);
        input.value = "";
      } catch (e) {
        window.alert(String(e));
      }
    });
    stop?.addEventListener("click", () => client.stop());
    report?.addEventListener("click", () => client.getReport());
  };

  client.onChange(redraw);
  redraw();
  client.hello({ scenarioId });
}

if (typeof document !== "undefined") {
  const container = document.getElementById("app");
  if (container !== null) {
    mount(container);
  }
}
