/** Single-page client for one selection session.
 *
 * The page walks the same workflow the service enforces: load data,
 * scope features, label training tests, train, verify by labeling a
 * random draw, read adequacy, place the cutoff, decide, reflect. All
 * judgment stays server-side; this file only wires DOM events to the
 * pure modules and renders their output.
 */

import { ApiError, Client } from "./api.js";
import {
  label_flow,
  queue_from_draw,
  relabel_flow,
  type LabelQueue,
} from "./labelqueue.js";
import {
  build_curve_view,
  place_cutoff,
  type CurveViewModel,
  type DecisionState,
} from "./viewmodel.js";
import type {
  AdequacyPayload,
  RankingPayload,
  SessionSnapshot,
} from "./types.js";

const client = new Client("");

interface AppState {
  datasetId: string | null;
  snapshot: SessionSnapshot | null;
  ranking: RankingPayload | null;
  adequacy: AdequacyPayload | null;
  queue: LabelQueue | null;
  decision: DecisionState;
  view: CurveViewModel | null;
  exportText: string | null;
  trainingBatch: { test_id: string; label: string }[];
}

const state: AppState = {
  datasetId: null,
  snapshot: null,
  ranking: null,
  adequacy: null,
  queue: null,
  decision: { cutoff_rank: null, override: false },
  view: null,
  exportText: null,
  trainingBatch: [],
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function flash(message: string, isError = false): void {
  const bar = el<HTMLElement>("statusbar");
  bar.textContent = message;
  bar.className = isError ? "status error" : "status";
}

async function guarded(action: () => Promise<void>): Promise<void> {
  try {
    await action();
  } catch (err) {
    if (err instanceof ApiError) {
      flash(`${err.message}`, true);
    } else {
      flash(String(err), true);
    }
  }
}

function sessionId(): string {
  if (!state.snapshot) {
    throw new Error("no session yet");
  }
  return state.snapshot.id;
}

async function refreshSnapshot(): Promise<void> {
  if (state.snapshot) {
    state.snapshot = await client.getSession(state.snapshot.id);
  }
}

/* ---------- rendering ---------- */

function renderHeader(): void {
  const s = state.snapshot;
  el<HTMLElement>("session-badge").textContent = s
    ? `${s.id} [${s.state}] iteration ${s.iteration}/${s.max_iterations}`
    : "no session";
}

function show(id: string, visible: boolean): void {
  el<HTMLElement>(id).classList.toggle("hidden", !visible);
}

function renderPanels(): void {
  const s = state.snapshot;
  const stateName = s?.state ?? "";
  show("panel-scope", stateName === "DataLoaded");
  show(
    "panel-training",
    stateName === "FeaturesScoped" ||
      stateName === "TrainingLabeled" ||
      stateName === "Iterating",
  );
  show(
    "panel-verification",
    stateName === "Trained" || stateName === "VerificationLabeled",
  );
  show(
    "panel-curve",
    state.ranking !== null &&
      (stateName === "Trained" ||
        stateName === "VerificationLabeled" ||
        stateName === "Assessed"),
  );
  show("panel-decision", stateName === "Assessed");
  show("panel-posttest", stateName === "Accepted" || stateName === "Aborted");
  show("panel-export", state.exportText !== null);
  show("panel-history", (s?.reports.length ?? 0) > 0);
}

function renderTrainingBatch(): void {
  const list = el<HTMLUListElement>("training-batch");
  list.replaceChildren(
    ...state.trainingBatch.map((entry) => {
      const item = document.createElement("li");
      item.textContent = `${entry.test_id}: ${entry.label}`;
      return item;
    }),
  );
}

function renderQueue(): void {
  const pendingList = el<HTMLUListElement>("queue-pending");
  const completedList = el<HTMLUListElement>("queue-completed");
  const queue = state.queue;
  if (!queue) {
    pendingList.replaceChildren();
    completedList.replaceChildren();
    el<HTMLButtonElement>("btn-adequacy").disabled = true;
    return;
  }
  pendingList.replaceChildren(
    ...queue.pending.map((test) => {
      const item = document.createElement("li");
      const head = document.createElement("strong");
      head.textContent = `#${test.rank} ${test.test_id} ${test.title}`;
      const snippet = document.createElement("p");
      snippet.textContent = test.snippet;
      const inBtn = document.createElement("button");
      inBtn.textContent = "in";
      inBtn.addEventListener("click", () => applyLabel(test.test_id, "in"));
      const outBtn = document.createElement("button");
      outBtn.textContent = "out";
      outBtn.className = "out";
      outBtn.addEventListener("click", () => applyLabel(test.test_id, "out"));
      item.append(head, snippet, inBtn, outBtn);
      return item;
    }),
  );
  completedList.replaceChildren(
    ...queue.completed.map((done) => {
      const item = document.createElement("li");
      item.textContent = `${done.test_id} = ${done.label} `;
      const flip = document.createElement("button");
      flip.textContent = "change label";
      flip.addEventListener("click", () =>
        applyRelabel(done.test_id, done.label === "in" ? "out" : "in"),
      );
      item.append(flip);
      return item;
    }),
  );
  el<HTMLButtonElement>("btn-adequacy").disabled = !queue.refresh_enabled;
}

const CURVE_W = 720;
const CURVE_H = 260;
const PAD = 30;

function xFor(rank: number, n: number): number {
  if (n <= 1) {
    return CURVE_W / 2;
  }
  return PAD + ((rank - 1) / (n - 1)) * (CURVE_W - 2 * PAD);
}

function yFor(score: number): number {
  return CURVE_H - PAD - score * (CURVE_H - 2 * PAD);
}

function renderCurve(): void {
  const svg = el<HTMLElement>("curve-svg");
  const view = state.view;
  svg.replaceChildren();
  const banner = el<HTMLElement>("curve-banner");
  const warning = el<HTMLElement>("curve-warning");
  if (!view) {
    banner.textContent = "";
    warning.textContent = "";
    return;
  }
  banner.textContent = view.error ?? view.banner ?? "";
  banner.className = view.error ? "banner error" : view.banner ? "banner" : "banner hidden";
  warning.textContent = view.warning ?? "";
  warning.className = view.warning ? "banner warn" : "banner hidden";

  const ns = "http://www.w3.org/2000/svg";
  const n = view.points.length;
  if (view.interval) {
    const band = document.createElementNS(ns, "rect");
    const x0 = xFor(view.interval[0], n);
    const x1 = xFor(view.interval[1], n);
    band.setAttribute("x", String(Math.min(x0, x1)));
    band.setAttribute("y", String(PAD / 2));
    band.setAttribute("width", String(Math.abs(x1 - x0)));
    band.setAttribute("height", String(CURVE_H - PAD));
    band.setAttribute("class", "band");
    svg.append(band);
  }
  if (n > 0) {
    const line = document.createElementNS(ns, "polyline");
    line.setAttribute(
      "points",
      view.points.map((p) => `${xFor(p.rank, n)},${yFor(p.score)}`).join(" "),
    );
    line.setAttribute("class", "curve");
    svg.append(line);
  }
  const scoreAt = new Map(view.points.map((p) => [p.rank, p.score]));
  for (const dot of view.dots) {
    const circle = document.createElementNS(ns, "circle");
    circle.setAttribute("cx", String(xFor(dot.rank, n)));
    circle.setAttribute("cy", String(yFor(scoreAt.get(dot.rank) ?? 0)));
    circle.setAttribute("r", "5");
    circle.setAttribute("class", dot.label === "in" ? "dot-in" : "dot-out");
    svg.append(circle);
  }
  if (view.cutoff_rank !== null && n > 0) {
    const marker = document.createElementNS(ns, "line");
    const x = xFor(view.cutoff_rank, n);
    marker.setAttribute("x1", String(x));
    marker.setAttribute("x2", String(x));
    marker.setAttribute("y1", String(PAD / 2));
    marker.setAttribute("y2", String(CURVE_H - PAD / 2));
    marker.setAttribute("class", "cutoff");
    svg.append(marker);
  }

  const slider = el<HTMLInputElement>("cutoff-slider");
  const numeric = el<HTMLInputElement>("cutoff-numeric");
  slider.min = "1";
  slider.max = String(Math.max(1, n));
  slider.disabled = !view.cutoff_enabled;
  numeric.disabled = !view.cutoff_enabled;
  if (view.cutoff_rank !== null) {
    slider.value = String(view.cutoff_rank);
    numeric.value = String(view.cutoff_rank);
  }
}

function renderDecision(): void {
  const box = el<HTMLElement>("decision-buttons");
  box.replaceChildren();
  const options = state.adequacy?.decision_options ?? [];
  for (const option of options) {
    const btn = document.createElement("button");
    btn.textContent = option;
    btn.addEventListener("click", () => guarded(() => decide(option)));
    box.append(btn);
  }
  el<HTMLElement>("override-row").classList.toggle(
    "hidden",
    state.view === null || state.view.verdict === "adequate",
  );
}

function renderHistory(): void {
  const list = el<HTMLUListElement>("adequacy-history");
  const reports = state.snapshot?.reports ?? [];
  list.replaceChildren(
    ...reports.map((report, index) => {
      const item = document.createElement("li");
      const interval = report.interval_d
        ? ` D=[${report.interval_d.low_rank}, ${report.interval_d.high_rank})`
        : "";
      item.textContent = `round ${index + 1}: ${report.verdict}, overlap ${report.pair_overlap.toFixed(4)}${interval}`;
      return item;
    }),
  );
}

function renderExport(): void {
  el<HTMLPreElement>("export-view").textContent = state.exportText ?? "";
}

function renderAll(): void {
  renderHeader();
  renderPanels();
  renderTrainingBatch();
  renderQueue();
  renderCurve();
  renderDecision();
  renderHistory();
  renderExport();
}

/* ---------- actions ---------- */

async function rebuildView(): Promise<void> {
  if (!state.snapshot) {
    return;
  }
  if (state.ranking && state.adequacy) {
    state.view = build_curve_view(state.ranking, state.adequacy, state.decision);
  }
}

async function uploadDataset(raw: string): Promise<void> {
  const result = await client.uploadDataset(raw);
  state.datasetId = result.dataset_id;
  const issues = result.validation.issues;
  const verdict = result.validation.corrupt ? "corrupt" : "ok";
  flash(`dataset ${result.dataset_id}: ${verdict}, ${issues.length} issues`);
  el<HTMLElement>("dataset-badge").textContent = `${result.dataset_id} (${verdict})`;
  el<HTMLButtonElement>("btn-create-session").disabled = result.validation.corrupt;
}

async function createSession(): Promise<void> {
  if (!state.datasetId) {
    flash("upload a dataset first", true);
    return;
  }
  state.snapshot = await client.createSession(state.datasetId);
  flash(`session ${state.snapshot.id} created`);
  renderAll();
}

async function loadCatalog(): Promise<void> {
  const release = el<HTMLInputElement>("scope-release").value.trim();
  if (!state.datasetId || !release) {
    flash("dataset and target release required", true);
    return;
  }
  const catalog = await client.catalog(state.datasetId, release);
  const box = el<HTMLElement>("scope-groups");
  box.replaceChildren(
    ...catalog.groups.map((group) => {
      const row = document.createElement("label");
      const check = document.createElement("input");
      check.type = "checkbox";
      check.checked = true;
      check.value = group.name;
      check.className = "group-check";
      row.append(check, ` ${group.name} (${group.kind}, ${group.source})`);
      return row;
    }),
  );
  flash(`catalog loaded: ${catalog.groups.length} groups`);
}

async function submitScope(): Promise<void> {
  const release = el<HTMLInputElement>("scope-release").value.trim();
  const deselected = Array.from(
    document.querySelectorAll<HTMLInputElement>(".group-check"),
  )
    .filter((check) => !check.checked)
    .map((check) => check.value);
  state.snapshot = await client.scope(sessionId(), release, deselected);
  flash(`scope set on ${release}`);
  renderAll();
}

function addTrainingRow(): void {
  const idInput = el<HTMLInputElement>("training-id");
  const labelInput = el<HTMLSelectElement>("training-label");
  const testId = idInput.value.trim();
  if (!testId) {
    flash("test id required", true);
    return;
  }
  state.trainingBatch.push({ test_id: testId, label: labelInput.value });
  idInput.value = "";
  renderTrainingBatch();
}

async function submitTrainingBatch(): Promise<void> {
  if (state.trainingBatch.length === 0) {
    flash("add at least one label", true);
    return;
  }
  const entries = state.trainingBatch.map((entry) => ({
    ...entry,
    role: "training",
  }));
  state.snapshot = await client.postLabels(sessionId(), { entries });
  state.trainingBatch = [];
  flash("training labels recorded");
  renderAll();
}

async function train(): Promise<void> {
  state.snapshot = await client.train(sessionId(), {});
  state.ranking = await client.ranking(sessionId());
  state.adequacy = null;
  state.view = null;
  state.queue = null;
  flash(`trained; suite has ${state.snapshot.suite_size} tests`);
  renderAll();
}

async function drawVerification(): Promise<void> {
  const k = Number(el<HTMLInputElement>("draw-k").value);
  const seed = Number(el<HTMLInputElement>("draw-seed").value);
  const draw = await client.draw(sessionId(), k, seed);
  state.queue = queue_from_draw(draw);
  flash(`drew ${draw.tests.length} tests for verification`);
  renderAll();
}

async function applyLabel(testId: string, label: "in" | "out"): Promise<void> {
  await guarded(async () => {
    if (!state.queue) {
      return;
    }
    const result = label_flow(state.queue, testId, label);
    if (!result.ok) {
      flash(result.reason, true);
      return;
    }
    state.snapshot = await client.postLabels(sessionId(), result.staged);
    state.queue = result.queue;
    state.ranking = await client.ranking(sessionId());
    renderAll();
  });
}

async function applyRelabel(testId: string, label: "in" | "out"): Promise<void> {
  await guarded(async () => {
    if (!state.queue) {
      return;
    }
    const result = relabel_flow(state.queue, testId, label);
    if (!result.ok) {
      flash(result.reason, true);
      return;
    }
    state.snapshot = await client.postLabels(sessionId(), result.staged);
    state.queue = result.queue;
    state.ranking = await client.ranking(sessionId());
    renderAll();
  });
}

async function readAdequacy(): Promise<void> {
  state.adequacy = await client.adequacy(sessionId());
  await refreshSnapshot();
  const low = state.adequacy.report.interval_d?.low_rank ?? null;
  state.decision = { cutoff_rank: low, override: false };
  await rebuildView();
  flash(`adequacy: ${state.adequacy.report.verdict}`);
  renderAll();
}

function moveCutoff(candidate: number): void {
  if (!state.view) {
    return;
  }
  const override = el<HTMLInputElement>("override-toggle").checked;
  const placed = place_cutoff(state.view, candidate, override);
  if (!placed.ok) {
    flash(placed.reason, true);
    return;
  }
  state.view = placed.view;
  state.decision = { cutoff_rank: candidate, override };
  flash(`cutoff at rank ${candidate}`);
  renderCurve();
}

async function decide(option: string): Promise<void> {
  if (option === "accept") {
    const staged = state.view?.staged_decision;
    if (!staged) {
      flash("place the cutoff first", true);
      return;
    }
    state.snapshot = await client.decide(sessionId(), "accept", staged);
    flash("selection accepted");
  } else if (option === "iterate" || option === "abort") {
    state.snapshot = await client.decide(sessionId(), option);
    state.ranking = null;
    state.adequacy = null;
    state.view = null;
    state.queue = null;
    flash(`decision: ${option}`);
  }
  renderAll();
}

async function submitPosttest(): Promise<void> {
  const reflection = el<HTMLTextAreaElement>("posttest-reflection").value;
  const notes = el<HTMLTextAreaElement>("posttest-notes").value;
  state.snapshot = await client.posttest(sessionId(), reflection, notes);
  if (state.snapshot.selection) {
    state.exportText = await client.exportText(sessionId());
  }
  flash("reflection recorded");
  renderAll();
}

/* ---------- wiring ---------- */

function boot(): void {
  el<HTMLButtonElement>("btn-upload").addEventListener("click", () =>
    guarded(async () => {
      const fileInput = el<HTMLInputElement>("dataset-file");
      const pasted = el<HTMLTextAreaElement>("dataset-paste").value.trim();
      const file = fileInput.files?.[0];
      const raw = file ? await file.text() : pasted;
      if (!raw) {
        flash("paste dataset JSON or choose a file", true);
        return;
      }
      await uploadDataset(raw);
    }),
  );
  el<HTMLButtonElement>("btn-create-session").addEventListener("click", () =>
    guarded(createSession),
  );
  el<HTMLButtonElement>("btn-catalog").addEventListener("click", () =>
    guarded(loadCatalog),
  );
  el<HTMLButtonElement>("btn-scope").addEventListener("click", () =>
    guarded(submitScope),
  );
  el<HTMLButtonElement>("btn-training-add").addEventListener("click", addTrainingRow);
  el<HTMLButtonElement>("btn-training-submit").addEventListener("click", () =>
    guarded(submitTrainingBatch),
  );
  el<HTMLButtonElement>("btn-train").addEventListener("click", () => guarded(train));
  el<HTMLButtonElement>("btn-draw").addEventListener("click", () =>
    guarded(drawVerification),
  );
  el<HTMLButtonElement>("btn-adequacy").addEventListener("click", () =>
    guarded(readAdequacy),
  );
  el<HTMLInputElement>("cutoff-slider").addEventListener("change", (event) =>
    moveCutoff(Number((event.target as HTMLInputElement).value)),
  );
  el<HTMLButtonElement>("btn-cutoff-apply").addEventListener("click", () =>
    moveCutoff(Number(el<HTMLInputElement>("cutoff-numeric").value)),
  );
  el<HTMLInputElement>("override-toggle").addEventListener("change", () => {
    state.decision = {
      ...state.decision,
      override: el<HTMLInputElement>("override-toggle").checked,
    };
    void rebuildView().then(renderAll);
  });
  el<HTMLButtonElement>("btn-posttest").addEventListener("click", () =>
    guarded(submitPosttest),
  );
  renderAll();
}

document.addEventListener("DOMContentLoaded", boot);
