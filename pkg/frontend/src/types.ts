/** Wire types for the selection service HTTP API.
 *
 * These mirror the JSON the service emits; the client performs no
 * numeric work on them beyond coordinate mapping for the curve.
 */

export interface RankingEntry {
  rank: number;
  test_id: string;
  score: number;
}

export interface OverlayDot {
  test_id: string;
  rank: number;
  label: string;
}

export interface RankingPayload {
  entries: RankingEntry[];
  overlay: OverlayDot[];
}

export interface IntervalPayload {
  low_rank: number;
  high_rank: number;
}

export interface AdequacyReportPayload {
  pair_overlap: number;
  pair_auc: number;
  separated: boolean;
  interval_d: IntervalPayload | null;
  verdict: string;
  warning?: string | null;
}

export interface AdequacyPayload {
  report: AdequacyReportPayload;
  iteration: number;
  max_iterations: number;
  decision_options: string[];
}

export interface DrawnTest {
  test_id: string;
  rank: number;
  title: string;
  snippet: string;
}

export interface DrawPayload {
  test_ids: string[];
  seed: number;
  requested_k: number;
  tests: DrawnTest[];
}

export interface LabelWire {
  test_id: string;
  label: string;
  role: string;
}

export interface SessionSnapshot {
  id: string;
  state: string;
  dataset_ref: string | null;
  scope: { target_release: string; deselected_groups: string[] } | null;
  labels: LabelWire[];
  iteration: number;
  max_iterations: number;
  suite_size: number | null;
  training_meta: {
    epochs_run: number;
    final_loss: number;
    n_in: number;
    n_out: number;
  } | null;
  reports: AdequacyReportPayload[];
  selection: unknown | null;
  reflection: string | null;
  improvement_notes: string | null;
  audit_length: number;
}

export interface CatalogGroup {
  name: string;
  kind: string;
  source: string;
}

export interface UploadResult {
  dataset_id: string;
  validation: { issues: { code: string; test_id: string | null; detail: string }[]; corrupt: boolean };
}

/** One recorded API call; replaying the sequence rebuilds the session. */
export interface StagedCall {
  method: "GET" | "POST";
  path: string;
  body: string | null;
}
