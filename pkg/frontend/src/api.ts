/** Typed client for the nl2api HTTP service.
 *
 * The whole UI talks to the backend through this module, and the module
 * only ever issues GET /health and POST /ask. Keeping that guarantee in
 * one place lets the tests intercept fetch and assert no other endpoint
 * is touched.
 */

export type Dialect = "REST" | "GRAPHQL";

export const DIALECTS: readonly Dialect[] = ["REST", "GRAPHQL"];

export interface HealthReport {
  status: string;
  version: string;
  mode: string;
  corpus_entries: number;
  models: string[];
  strategies: string[];
}

export interface AskRequest {
  question: string;
  strategy: string;
  model: string;
  dialect: Dialect;
}

export interface ResultSummary {
  count: number;
  ids: Array<number | string>;
  truncated: boolean;
  status: number | null;
  warning: string | null;
}

export interface AskResponse {
  question: string;
  strategy: string;
  model: string;
  dialect: Dialect;
  query: string | null;
  valid: boolean;
  notes: string[];
  results: ResultSummary | null;
}

/** Failure talking to the service.
 *
 * `status` is the HTTP status code, or null when the request never got
 * an HTTP response at all (network down, CORS, refused connection).
 * Only those transport-level failures are worth retrying blindly.
 */
export class ServiceError extends Error {
  readonly status: number | null;

  constructor(message: string, status: number | null) {
    super(message);
    this.name = "ServiceError";
    this.status = status;
  }

  get retryable(): boolean {
    return this.status === null;
  }
}

/** The slice of the fetch response the client relies on. Narrow on
 * purpose so tests can stub it with a plain object. */
export interface FetchResponseLike {
  ok: boolean;
  status: number;
  text(): Promise<string>;
}

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<FetchResponseLike>;

function defaultFetch(url: string, init?: RequestInit): Promise<FetchResponseLike> {
  // Calling fetch unbound would lose its `this` in browsers.
  return globalThis.fetch(url, init);
}

function asRecord(value: unknown, what: string): Record<string, unknown> {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    throw new ServiceError(`service sent a malformed ${what} payload`, null);
  }
  return value as Record<string, unknown>;
}

function stringList(value: unknown): string[] {
  if (!Array.isArray(value)) {
    return [];
  }
  return value.filter((item): item is string => typeof item === "string");
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl = "", fetchFn: FetchLike = defaultFetch) {
    // Trailing slashes would double up when the paths are appended.
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn;
  }

  async health(): Promise<HealthReport> {
    const payload = asRecord(await this.request("/health"), "health");
    return {
      status: String(payload.status ?? ""),
      version: String(payload.version ?? ""),
      mode: String(payload.mode ?? ""),
      corpus_entries: Number(payload.corpus_entries ?? 0),
      models: stringList(payload.models),
      strategies: stringList(payload.strategies),
    };
  }

  async ask(request: AskRequest): Promise<AskResponse> {
    const payload = asRecord(
      await this.request("/ask", {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(request),
      }),
      "ask",
    );
    return {
      question: String(payload.question ?? request.question),
      strategy: String(payload.strategy ?? request.strategy),
      model: String(payload.model ?? request.model),
      dialect: (payload.dialect as Dialect) ?? request.dialect,
      query: typeof payload.query === "string" ? payload.query : null,
      valid: payload.valid === true,
      notes: stringList(payload.notes),
      results: this.parseResults(payload.results),
    };
  }

  private parseResults(value: unknown): ResultSummary | null {
    if (value === null || value === undefined) {
      return null;
    }
    const record = asRecord(value, "result");
    const ids = Array.isArray(record.ids)
      ? record.ids.filter(
          (id): id is number | string =>
            typeof id === "number" || typeof id === "string",
        )
      : [];
    return {
      count: Number(record.count ?? ids.length),
      ids,
      truncated: record.truncated === true,
      status: typeof record.status === "number" ? record.status : null,
      warning: typeof record.warning === "string" ? record.warning : null,
    };
  }

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    let response: FetchResponseLike;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (cause) {
      const reason = cause instanceof Error ? cause.message : String(cause);
      throw new ServiceError(`cannot reach the service: ${reason}`, null);
    }
    const text = await response.text();
    if (!response.ok) {
      throw new ServiceError(this.errorMessage(text, response.status), response.status);
    }
    try {
      return JSON.parse(text) as unknown;
    } catch {
      throw new ServiceError("service sent a response that is not JSON", null);
    }
  }

  /** Error bodies are {"error": "..."}; anything else falls back to the
   * bare status code so the user still sees something actionable. */
  private errorMessage(text: string, status: number): string {
    try {
      const body: unknown = JSON.parse(text);
      if (typeof body === "object" && body !== null && !Array.isArray(body)) {
        const message = (body as Record<string, unknown>).error;
        if (typeof message === "string" && message.length > 0) {
          return message;
        }
      }
    } catch {
      // fall through to the generic message
    }
    return `service returned HTTP ${status}`;
  }
}
