/**
 * Connection plumbing: endpoint selection from the page URL and a small
 * reconnecting WebSocket wrapper.
 *
 * The session endpoint defaults to ws://127.0.0.1:7472/ and can be
 * overridden per page load with ?host=...&port=... query parameters.
 */

export const DEFAULT_HOST = "127.0.0.1";
export const DEFAULT_PORT = 7472;

export interface Endpoint {
  host: string;
  port: number;
  url: string;
}

/** Resolve the session endpoint from a URL query string ("?host=..&port=.."). */
export function parseEndpoint(
  search: string,
  defaultHost: string = DEFAULT_HOST,
  defaultPort: number = DEFAULT_PORT,
): Endpoint {
  const params = new URLSearchParams(search.startsWith("?") ? search.slice(1) : search);
  let host = params.get("host") ?? defaultHost;
  if (host.trim() === "") {
    host = defaultHost;
  }
  let port = defaultPort;
  const rawPort = params.get("port");
  if (rawPort !== null) {
    const parsed = Number.parseInt(rawPort, 10);
    if (Number.isInteger(parsed) && parsed >= 1 && parsed <= 65535) {
      port = parsed;
    }
  }
  return { host, port, url: `ws://${host}:${port}/` };
}

export interface LinkHandlers {
  onOpen: () => void;
  onText: (text: string) => void;
  onClose: () => void;
}

const RECONNECT_MIN_MS = 1000;
const RECONNECT_MAX_MS = 5000;

/**
 * WebSocket wrapper that redials after a drop with a gentle backoff.
 * Browser-only (uses the global WebSocket); tests drive ConsoleStore with
 * their own socket instead.
 */
export class SessionLink {
  private ws: WebSocket | null = null;
  private closedByUser = false;
  private retryDelay = RECONNECT_MIN_MS;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly url: string,
    private readonly handlers: LinkHandlers,
  ) {
    this.dial();
  }

  private dial(): void {
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.retryDelay = RECONNECT_MIN_MS;
      this.handlers.onOpen();
    };
    ws.onmessage = (ev: MessageEvent) => {
      if (typeof ev.data === "string") {
        this.handlers.onText(ev.data);
      }
    };
    ws.onclose = () => {
      this.ws = null;
      this.handlers.onClose();
      if (!this.closedByUser) {
        this.retryTimer = setTimeout(() => this.dial(), this.retryDelay);
        this.retryDelay = Math.min(this.retryDelay * 2, RECONNECT_MAX_MS);
      }
    };
    ws.onerror = () => {
      // onclose follows; nothing to do here.
    };
  }

  get connected(): boolean {
    return this.ws !== null && this.ws.readyState === WebSocket.OPEN;
  }

  /** Send one text frame; false when the socket is not open. */
  send(text: string): boolean {
    if (!this.connected || this.ws === null) {
      return false;
    }
    this.ws.send(text);
    return true;
  }

  close(): void {
    this.closedByUser = true;
    if (this.retryTimer !== null) {
      clearTimeout(this.retryTimer);
      this.retryTimer = null;
    }
    this.ws?.close();
    this.ws = null;
  }
}
