/** Thin typed client for the selection service.
 *
 * Every state-affecting call (all POSTs, plus the adequacy read, which
 * assesses on first use) is recorded as a StagedCall. Replaying the
 * record against a fresh service reproduces the session byte for byte,
 * which is how the client's idempotence is tested.
 */

import type {
  AdequacyPayload,
  CatalogGroup,
  DrawPayload,
  RankingPayload,
  SessionSnapshot,
  StagedCall,
  UploadResult,
} from "./types.js";
import type { StagedLabelBody } from "./labelqueue.js";
import type { StagedDecision } from "./viewmodel.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(`${code}: ${message}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class Client {
  readonly staged: StagedCall[] = [];

  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(
    method: "GET" | "POST",
    path: string,
    body: string | null,
    record: boolean,
  ): Promise<T> {
    if (record) {
      this.staged.push({ method, path, body });
    }
    const response = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: body === null ? {} : { "content-type": "application/json" },
      body: body ?? undefined,
    });
    const text = await response.text();
    if (!response.ok) {
      let code = "Error";
      let message = text;
      try {
        const doc = JSON.parse(text);
        code = doc.code ?? code;
        message = doc.message ?? message;
      } catch {
        /* non-JSON error body; keep raw text */
      }
      throw new ApiError(response.status, code, message);
    }
    return JSON.parse(text) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>("POST", path, JSON.stringify(body), true);
  }

  /** Raw dataset text goes up verbatim so the content address is stable. */
  uploadDataset(raw: string): Promise<UploadResult> {
    return this.request<UploadResult>("POST", "/datasets", raw, true);
  }

  catalog(datasetId: string, release: string): Promise<{ release: string; groups: CatalogGroup[] }> {
    const query = encodeURIComponent(release);
    return this.request("GET", `/datasets/${datasetId}/catalog?release=${query}`, null, false);
  }

  createSession(datasetId: string): Promise<SessionSnapshot> {
    return this.post("/sessions", { dataset_id: datasetId });
  }

  getSession(sessionId: string): Promise<SessionSnapshot> {
    return this.request("GET", `/sessions/${sessionId}`, null, false);
  }

  scope(
    sessionId: string,
    targetRelease: string,
    deselectedGroups: string[],
  ): Promise<SessionSnapshot> {
    return this.post(`/sessions/${sessionId}/scope`, {
      target_release: targetRelease,
      deselected_groups: deselectedGroups,
    });
  }

  postLabels(sessionId: string, body: StagedLabelBody): Promise<SessionSnapshot> {
    return this.post(`/sessions/${sessionId}/labels`, body);
  }

  train(sessionId: string, config: Record<string, unknown> = {}): Promise<SessionSnapshot> {
    return this.post(`/sessions/${sessionId}/train`, { config });
  }

  ranking(sessionId: string): Promise<RankingPayload> {
    return this.request("GET", `/sessions/${sessionId}/ranking`, null, false);
  }

  draw(sessionId: string, k: number, seed: number): Promise<DrawPayload> {
    return this.post(`/sessions/${sessionId}/verification/draw`, { k, seed });
  }

  /** Recorded even though it is a GET: the first read performs the
   * assessment, so replays must include it to reach the same state. */
  adequacy(sessionId: string): Promise<AdequacyPayload> {
    return this.request("GET", `/sessions/${sessionId}/adequacy`, null, true);
  }

  decide(
    sessionId: string,
    decision: "accept" | "iterate" | "abort",
    staged?: StagedDecision,
  ): Promise<SessionSnapshot> {
    const body: Record<string, unknown> = { decision };
    if (decision === "accept" && staged) {
      body.cutoff_rank = staged.cutoff_rank;
      if (staged.allow_override) {
        body.allow_override = true;
      }
    }
    return this.post(`/sessions/${sessionId}/decision`, body);
  }

  posttest(
    sessionId: string,
    reflection: string,
    improvementNotes: string,
  ): Promise<SessionSnapshot> {
    return this.post(`/sessions/${sessionId}/posttest`, {
      reflection,
      improvement_notes: improvementNotes,
    });
  }

  /** Export as raw text so equality checks compare exact bytes. */
  async exportText(sessionId: string): Promise<string> {
    const response = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/export`, {
      method: "GET",
    });
    const text = await response.text();
    if (!response.ok) {
      throw new ApiError(response.status, "Error", text);
    }
    return text;
  }
}

/** Re-issue a staged call sequence against another service instance. */
export async function replay_staged(
  baseUrl: string,
  staged: readonly StagedCall[],
  fetchImpl: FetchLike = (input, init) => fetch(input, init),
): Promise<void> {
  for (const call of staged) {
    const response = await fetchImpl(baseUrl + call.path, {
      method: call.method,
      headers: call.body === null ? {} : { "content-type": "application/json" },
      body: call.body ?? undefined,
    });
    if (!response.ok) {
      const text = await response.text();
      throw new ApiError(response.status, "ReplayFailed", `${call.method} ${call.path}: ${text}`);
    }
    await response.text();
  }
}
