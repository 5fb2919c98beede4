/**
 * Typed client for the curation service HTTP API.
 *
 * The service is the single source of truth; this module never caches.
 * Every non-2xx response is surfaced as an ApiError carrying the service's
 * `detail` message so the UI can show it as-is.
 */

export interface ClassState {
  label_id: number;
  label_name: string;
  /** [dataset row index, utterance text] pairs, shortlist order. */
  candidates: Array<[number, string]>;
  selections: number[];
  short_class: boolean;
  status: "pending" | "done";
}

export interface SessionState {
  format_version: number;
  session_id: string;
  dataset_path: string;
  fingerprint: string;
  candidates_per_class: number;
  picks_per_class: number;
  seed: number;
  created_at: string;
  note: string | null;
  progress: { done: number; total: number };
  classes: Record<string, ClassState>;
}

export interface CandidateRow {
  row_index: number;
  text: string;
}

export interface CurationManifest {
  fingerprint: string;
  picks_per_class: number;
  selections: Record<string, number[]>;
  note: string | null;
  created_at: string;
}

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export class CurationClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    // Bind late so a test can swap globalThis.fetch before the first call.
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  async createSession(
    datasetPath: string,
    options: {
      candidatesPerClass?: number;
      picksPerClass?: number;
      seed?: number;
    } = {},
  ): Promise<{ session_id: string }> {
    const body: Record<string, unknown> = { dataset_path: datasetPath };
    if (options.candidatesPerClass !== undefined) {
      body.candidates_per_class = options.candidatesPerClass;
    }
    if (options.picksPerClass !== undefined) {
      body.picks_per_class = options.picksPerClass;
    }
    if (options.seed !== undefined) {
      body.seed = options.seed;
    }
    return this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async getSession(sessionId: string): Promise<SessionState> {
    return this.request(`/sessions/${sessionId}`);
  }

  async getCandidates(
    sessionId: string,
    labelId: number,
  ): Promise<CandidateRow[]> {
    return this.request(`/sessions/${sessionId}/classes/${labelId}/candidates`);
  }

  async putSelection(
    sessionId: string,
    labelId: number,
    indices: number[],
  ): Promise<ClassState> {
    return this.request(`/sessions/${sessionId}/classes/${labelId}/selection`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ indices }),
    });
  }

  async getManifest(sessionId: string): Promise<CurationManifest> {
    return this.request(`/sessions/${sessionId}/manifest`);
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, `service unreachable: ${String(err)}`);
    }
    const body: unknown = await resp.json().catch(() => null);
    if (!resp.ok) {
      const detail =
        body !== null &&
        typeof body === "object" &&
        typeof (body as { detail?: unknown }).detail === "string"
          ? (body as { detail: string }).detail
          : resp.statusText || `status ${resp.status}`;
      throw new ApiError(resp.status, detail);
    }
    return body as T;
  }
}
