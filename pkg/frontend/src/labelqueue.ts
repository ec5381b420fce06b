/** The verification labeling queue.
 *
 * A draw hands back k tests; the human works through them one binary
 * call at a time. Every action yields the updated queue plus the exact
 * body to POST to /labels, so the interaction is replayable.
 */

import type { DrawPayload, DrawnTest } from "./types.js";

export interface CompletedLabel {
  test_id: string;
  label: "in" | "out";
}

export interface LabelQueue {
  pending: DrawnTest[];
  completed: CompletedLabel[];
  /* adequacy refresh unlocks once every drawn test is labeled */
  refresh_enabled: boolean;
}

export interface StagedLabelBody {
  entries: { test_id: string; label: string; role?: string }[];
  relabel?: boolean;
}

export type LabelFlowResult =
  | { ok: true; queue: LabelQueue; staged: StagedLabelBody }
  | { ok: false; code: "UnknownTestId"; reason: string };

export function queue_from_draw(draw: DrawPayload): LabelQueue {
  return {
    pending: [...draw.tests],
    completed: [],
    refresh_enabled: draw.tests.length === 0,
  };
}

/** Label one pending test; ids not pending (including ones already
 * completed) are rejected as UnknownTestId. */
export function label_flow(
  queue: LabelQueue,
  test_id: string,
  label: "in" | "out",
): LabelFlowResult {
  const index = queue.pending.findIndex((t) => t.test_id === test_id);
  if (index < 0) {
    return {
      ok: false,
      code: "UnknownTestId",
      reason: `UnknownTestId: '${test_id}' is not awaiting a label`,
    };
  }
  const pending = queue.pending.filter((t) => t.test_id !== test_id);
  const completed = [...queue.completed, { test_id, label }];
  return {
    ok: true,
    queue: { pending, completed, refresh_enabled: pending.length === 0 },
    staged: { entries: [{ test_id, label, role: "verification" }] },
  };
}

/** The explicit change-label affordance: replaces a completed entry and
 * stages a relabel body instead of a fresh label. */
export function relabel_flow(
  queue: LabelQueue,
  test_id: string,
  label: "in" | "out",
): LabelFlowResult {
  const index = queue.completed.findIndex((c) => c.test_id === test_id);
  if (index < 0) {
    return {
      ok: false,
      code: "UnknownTestId",
      reason: `UnknownTestId: '${test_id}' has no label to change`,
    };
  }
  const completed = queue.completed.map((c) =>
    c.test_id === test_id ? { test_id, label } : c,
  );
  return {
    ok: true,
    queue: { ...queue, completed },
    staged: { entries: [{ test_id, label }], relabel: true },
  };
}
