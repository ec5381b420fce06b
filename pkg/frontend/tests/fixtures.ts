/** Canned payloads and a small dataset for the client tests. */

import type { AdequacyPayload, RankingPayload } from "../src/types.js";

export const NON_TEXT_GROUPS = [
  "hist_fail_rate",
  "n_changed_requirements",
  "n_defects",
  "n_requirements",
  "tags",
];

function testCase(id: string, description: string): Record<string, unknown> {
  return {
    id,
    title: "Check",
    description,
    requirement_ids: [],
    defect_ids: [],
    tags: [],
    history: [
      { release: "r1", executed: true, verdict: "pass", revealed_defect_ids: [] },
    ],
  };
}

/** Ten tests in two text families; the crash family is the in class. */
export function flowDatasetJson(): string {
  const doc = {
    schema_version: 1,
    project: "mini",
    releases: ["r1", "r2"],
    tests: [
      testCase("T_c1", "crash overflow alpha"),
      testCase("T_c2", "crash overflow beta"),
      testCase("T_c3", "crash overflow gamma"),
      testCase("T_c4", "crash overflow delta"),
      testCase("T_m1", "calm steady epsilon"),
      testCase("T_m2", "calm steady zeta"),
      testCase("T_m3", "calm steady eta"),
      testCase("T_m4", "calm steady theta"),
      testCase("T_x1", "crash overflow iota"),
      testCase("T_x2", "calm steady kappa"),
    ],
    requirements: [],
    defects: [],
  };
  return JSON.stringify(doc);
}

export const CRASH_IDS = new Set(["T_c1", "T_c2", "T_c3", "T_c4", "T_x1"]);

/** A 14-test ranking with verification dots at ranks 2, 5, 9 and 14. */
export function separatedRanking(): RankingPayload {
  const entries = Array.from({ length: 14 }, (_, i) => ({
    rank: i + 1,
    test_id: `T${String(i + 1).padStart(2, "0")}`,
    score: Number((1 - i * 0.05).toFixed(4)),
  }));
  return {
    entries,
    overlay: [
      { test_id: "T02", rank: 2, label: "in" },
      { test_id: "T05", rank: 5, label: "in" },
      { test_id: "T09", rank: 9, label: "out" },
      { test_id: "T14", rank: 14, label: "out" },
    ],
  };
}

export function adequatePayload(): AdequacyPayload {
  return {
    report: {
      pair_overlap: 0.0,
      pair_auc: 1.0,
      separated: true,
      interval_d: { low_rank: 5, high_rank: 9 },
      verdict: "adequate",
    },
    iteration: 1,
    max_iterations: 5,
    decision_options: ["accept", "iterate", "abort"],
  };
}

export function inadequatePayload(): AdequacyPayload {
  return {
    report: {
      pair_overlap: 0.5,
      pair_auc: 0.5,
      separated: false,
      interval_d: null,
      verdict: "inadequate",
    },
    iteration: 1,
    max_iterations: 5,
    decision_options: ["iterate", "abort", "accept"],
  };
}

export function singlePointRanking(): RankingPayload {
  return {
    entries: [{ rank: 1, test_id: "T01", score: 0.7 }],
    overlay: [],
  };
}

export function marginalPayload(): AdequacyPayload {
  return {
    report: {
      pair_overlap: 0.05,
      pair_auc: 0.95,
      separated: false,
      interval_d: null,
      verdict: "marginal",
    },
    iteration: 1,
    max_iterations: 5,
    decision_options: ["iterate", "abort", "accept"],
  };
}
