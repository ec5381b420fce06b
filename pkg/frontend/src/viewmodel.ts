/** Pure view-model builders for the ranked-curve screen.
 *
 * Everything here is a deterministic transform of service payloads:
 * the service stays the single source of truth for scores, overlap and
 * the decision interval, and this module only arranges them for
 * rendering. That keeps the whole screen snapshot-testable without a
 * live backend.
 */

import type { AdequacyPayload, RankingPayload } from "./types.js";

export interface CurvePoint {
  rank: number;
  score: number;
}

export interface CurveDot {
  rank: number;
  label: "in" | "out";
}

/** UI-side decision inputs: the candidate cutoff and the override toggle. */
export interface DecisionState {
  cutoff_rank: number | null;
  override: boolean;
}

export interface StagedDecision {
  cutoff_rank: number;
  allow_override: boolean;
}

export interface CurveViewModel {
  points: CurvePoint[];
  dots: CurveDot[];
  /* band rendered only when the verdict is adequate */
  interval: [number, number] | null;
  cutoff_rank: number | null;
  verdict: string;
  /* banner text when the verdict is anything but adequate */
  banner: string | null;
  cutoff_enabled: boolean;
  override: boolean;
  warning: string | null;
  /* inline error state; the curve frame still renders */
  error: string | null;
  decision_options: string[];
  staged_decision: StagedDecision | null;
}

export type CutoffResult =
  | { ok: true; view: CurveViewModel }
  | { ok: false; reason: string };

function errorView(message: string): CurveViewModel {
  return {
    points: [],
    dots: [],
    interval: null,
    cutoff_rank: null,
    verdict: "error",
    banner: message,
    cutoff_enabled: false,
    override: false,
    warning: null,
    error: message,
    decision_options: [],
    staged_decision: null,
  };
}

function isFiniteNumber(value: unknown): value is number {
  return typeof value === "number" && Number.isFinite(value);
}

/** Build the curve view from the ranking and adequacy endpoint payloads.
 *
 * Malformed payloads produce an inline error view rather than a blank
 * screen or an exception; in-labels are the green class, out-labels the
 * red class, and the interval band appears only for an adequate verdict.
 */
export function build_curve_view(
  ranking: RankingPayload | null | undefined,
  adequacy: AdequacyPayload | null | undefined,
  decision: DecisionState,
): CurveViewModel {
  if (!ranking || !Array.isArray(ranking.entries) || ranking.entries.length === 0) {
    return errorView("ranking payload missing or empty");
  }
  const points: CurvePoint[] = [];
  for (const entry of ranking.entries) {
    if (!entry || !isFiniteNumber(entry.rank) || !isFiniteNumber(entry.score)) {
      return errorView("ranking entry missing rank or score");
    }
    points.push({ rank: entry.rank, score: entry.score });
  }
  const ranks = new Set(points.map((p) => p.rank));

  const dots: CurveDot[] = [];
  for (const dot of ranking.overlay ?? []) {
    if (!dot || !isFiniteNumber(dot.rank) || (dot.label !== "in" && dot.label !== "out")) {
      return errorView("overlay dot missing rank or label");
    }
    if (!ranks.has(dot.rank)) {
      return errorView(`overlay dot at rank ${dot.rank} is outside the curve`);
    }
    dots.push({ rank: dot.rank, label: dot.label });
  }

  const report = adequacy?.report;
  if (!report || typeof report.verdict !== "string") {
    return errorView("adequacy payload missing report");
  }
  const verdict = report.verdict;
  const raw = report.interval_d;
  let interval: [number, number] | null = null;
  if (verdict === "adequate" && raw) {
    if (!isFiniteNumber(raw.low_rank) || !isFiniteNumber(raw.high_rank)) {
      return errorView("interval payload malformed");
    }
    interval = [raw.low_rank, raw.high_rank];
  }

  const single = points.length === 1;
  const override = decision.override;
  let cutoff: number | null;
  if (single) {
    cutoff = 1; // degenerate curve: the only possible cutoff
  } else if (decision.cutoff_rank === null) {
    cutoff = null;
  } else {
    cutoff = Math.min(Math.max(1, Math.round(decision.cutoff_rank)), points.length);
  }

  return {
    points,
    dots,
    interval,
    cutoff_rank: cutoff,
    verdict,
    banner: verdict === "adequate" ? null : verdict,
    cutoff_enabled: single || interval !== null || override,
    override,
    warning:
      override && interval === null
        ? `override enabled with verdict ${verdict}`
        : null,
    error: null,
    decision_options: adequacy?.decision_options ?? [],
    staged_decision: null,
  };
}

/** Place the cutoff marker, staging the decision payload on success.
 *
 * Candidates inside the decision interval pass as-is; anything else
 * needs the override toggle and comes back with an explicit warning.
 * Rejection reasons mirror the service error codes.
 */
export function place_cutoff(
  view: CurveViewModel,
  candidate_rank: number,
  override: boolean,
): CutoffResult {
  if (view.error !== null) {
    return { ok: false, reason: view.error };
  }
  const n = view.points.length;
  if (n === 0) {
    return { ok: false, reason: "no ranking loaded" };
  }
  if (!Number.isInteger(candidate_rank) || candidate_rank < 1 || candidate_rank > n) {
    return { ok: false, reason: `PayloadInvalid: cutoff_rank must be in [1, ${n}]` };
  }
  if (n === 1) {
    // single-point curve: rank 1 is the only cutoff and always placeable
    return {
      ok: true,
      view: {
        ...view,
        cutoff_rank: 1,
        cutoff_enabled: true,
        warning: null,
        staged_decision: { cutoff_rank: 1, allow_override: override },
      },
    };
  }
  const interval = view.interval;
  const inside =
    interval !== null && candidate_rank >= interval[0] && candidate_rank < interval[1];
  if (inside) {
    return {
      ok: true,
      view: {
        ...view,
        cutoff_rank: candidate_rank,
        warning: null,
        staged_decision: { cutoff_rank: candidate_rank, allow_override: false },
      },
    };
  }
  if (!override) {
    if (interval !== null) {
      return { ok: false, reason: "CutoffOutsideInterval: outside decision interval" };
    }
    return {
      ok: false,
      reason: `InadequateRanking: verdict ${view.verdict}; enable override to place a cutoff`,
    };
  }
  const warning =
    interval !== null
      ? "override in effect: cutoff outside the decision interval"
      : `override in effect: verdict ${view.verdict}`;
  return {
    ok: true,
    view: {
      ...view,
      cutoff_rank: candidate_rank,
      cutoff_enabled: true,
      override: true,
      warning,
      staged_decision: { cutoff_rank: candidate_rank, allow_override: true },
    },
  };
}
