/**
 * In-memory stand-in for the curation service, exposed as a fetch().
 *
 * Mirrors the real endpoints, validation messages, and JSON shapes so the
 * UI tests exercise the same contract the live service enforces:
 * exactly-k distinct selections drawn from the shortlist, manifest only
 * once every class is done, last submission wins.
 */

import type {
  ClassState,
  CurationManifest,
  FetchLike,
  SessionState,
} from "../src/api.js";

export interface FixtureClassSpec {
  name: string;
  candidates: Array<[number, string]>;
  selections?: number[];
  shortClass?: boolean;
}

export interface FixtureSpec {
  sessionId?: string;
  picksPerClass?: number;
  classes: FixtureClassSpec[];
}

interface LoggedCall {
  method: string;
  path: string;
}

export class FixtureService {
  readonly session: SessionState;
  readonly calls: LoggedCall[] = [];

  constructor(spec: FixtureSpec) {
    const picks = spec.picksPerClass ?? 3;
    const classes: Record<string, ClassState> = {};
    spec.classes.forEach((cls, labelId) => {
      classes[String(labelId)] = {
        label_id: labelId,
        label_name: cls.name,
        candidates: cls.candidates.map(([row, text]) => [row, text]),
        selections: [...(cls.selections ?? [])],
        short_class: cls.shortClass ?? false,
        status: (cls.selections?.length ?? 0) > 0 ? "done" : "pending",
      };
    });
    this.session = {
      format_version: 1,
      session_id: spec.sessionId ?? "fixture01",
      dataset_path: "data/fixture.csv",
      fingerprint: "fixturefingerprint",
      candidates_per_class: Math.max(
        ...spec.classes.map((c) => c.candidates.length),
      ),
      picks_per_class: picks,
      seed: 0,
      created_at: "2026-01-01T00:00:00+00:00",
      note: null,
      classes,
      progress: { done: 0, total: spec.classes.length },
    };
    this.refreshProgress();
  }

  callsTo(method: string, pathSuffix: string): LoggedCall[] {
    return this.calls.filter(
      (c) => c.method === method && c.path.endsWith(pathSuffix),
    );
  }

  /** fetch-compatible entry point; bind this to the client under test. */
  readonly fetch: FetchLike = async (input, init) => {
    const url = new URL(input, "http://fixture");
    const method = (init?.method ?? "GET").toUpperCase();
    this.calls.push({ method, path: url.pathname });
    return this.route(method, url.pathname, init);
  };

  private route(
    method: string,
    path: string,
    init?: RequestInit,
  ): Response {
    const sid = this.session.session_id;

    let m = path.match(/^\/sessions\/([A-Za-z0-9]+)$/);
    if (m && method === "GET") {
      if (m[1] !== sid) return jsonError(404, `unknown session ${m[1]}`);
      this.refreshProgress();
      return json(200, structuredClone(this.session));
    }

    m = path.match(/^\/sessions\/([A-Za-z0-9]+)\/classes\/(\d+)\/candidates$/);
    if (m && method === "GET") {
      if (m[1] !== sid) return jsonError(404, `unknown session ${m[1]}`);
      const state = this.session.classes[m[2]!];
      if (!state) return jsonError(404, `unknown class id ${m[2]}`);
      return json(
        200,
        state.candidates.map(([row, text]) => ({ row_index: row, text })),
      );
    }

    m = path.match(/^\/sessions\/([A-Za-z0-9]+)\/classes\/(\d+)\/selection$/);
    if (m && method === "PUT") {
      if (m[1] !== sid) return jsonError(404, `unknown session ${m[1]}`);
      const state = this.session.classes[m[2]!];
      if (!state) return jsonError(404, `unknown class id ${m[2]}`);
      const body = JSON.parse(String(init?.body ?? "{}")) as {
        indices?: unknown;
      };
      if (!Array.isArray(body.indices)) {
        return jsonError(422, "indices must be a list");
      }
      const indices = body.indices.map((i) => Number(i));
      if (new Set(indices).size !== indices.length) {
        return jsonError(400, "selection indices must be distinct");
      }
      const k = this.session.picks_per_class;
      if (indices.length !== k) {
        return jsonError(
          400,
          `exactly ${k} selections required for class ` +
            `'${state.label_name}', got ${indices.length}`,
        );
      }
      const rows = new Set(state.candidates.map(([row]) => row));
      const foreign = indices.filter((i) => !rows.has(i));
      if (foreign.length > 0) {
        return jsonError(
          400,
          `rows [${foreign.join(", ")}] are not candidates of class ` +
            `'${state.label_name}'`,
        );
      }
      state.selections = indices;
      state.status = "done";
      this.refreshProgress();
      return json(200, structuredClone(state));
    }

    m = path.match(/^\/sessions\/([A-Za-z0-9]+)\/manifest$/);
    if (m && method === "GET") {
      if (m[1] !== sid) return jsonError(404, `unknown session ${m[1]}`);
      const pending = Object.values(this.session.classes)
        .filter((c) => c.status === "pending")
        .map((c) => c.label_name);
      if (pending.length > 0) {
        return jsonError(
          409,
          `classes still pending selection: [${pending.join(", ")}]`,
        );
      }
      const selections: Record<string, number[]> = {};
      for (const state of Object.values(this.session.classes)) {
        selections[state.label_name] = [...state.selections];
      }
      const manifest: CurationManifest = {
        fingerprint: this.session.fingerprint,
        picks_per_class: this.session.picks_per_class,
        selections,
        note: this.session.note,
        created_at: this.session.created_at,
      };
      return json(200, manifest);
    }

    return jsonError(404, `no route for ${method} ${path}`);
  }

  private refreshProgress(): void {
    const states = Object.values(this.session.classes);
    this.session.progress = {
      done: states.filter((c) => c.status === "done").length,
      total: states.length,
    };
  }
}

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function jsonError(status: number, detail: string): Response {
  return json(status, { detail });
}

/** Three small classes with odd candidate texts; picks_per_class = 2. */
export function defaultFixture(): FixtureService {
  return new FixtureService({
    picksPerClass: 2,
    classes: [
      {
        name: "activate_card",
        candidates: [
          [4, "How do I activate my card?"],
          [9, "  padded   whitespace  stays  "],
          [17, '<b>not &amp; markup</b> "quoted"'],
          [23, "activate, please – café über 中文"],
        ],
      },
      {
        name: "lost_card",
        candidates: [
          [2, "I lost my card yesterday"],
          [8, "card gone missing"],
          [31, "misplaced my card somewhere"],
        ],
      },
      {
        name: "refunds",
        candidates: [
          [5, "where is my refund"],
          [12, "refund still not here"],
          [40, "money back please"],
        ],
        shortClass: true,
      },
    ],
  });
}
