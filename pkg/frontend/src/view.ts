/**
 * DOM rendering for the console: outcome cards with per-objective
 * bars, the IA numeric+slider input, the status strip with an entropy
 * sparkline, and the final recommendation card. Pure functions from
 * data to elements; all state lives in the controller.
 */

import { PendingQuery, Recommendation, StatusBlock } from "./types.js";

type Attrs = Record<string, string>;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
  attrs: Attrs = {},
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  return node;
}

const fmt = (x: number): string =>
  Math.abs(x) >= 1000 || (x !== 0 && Math.abs(x) < 0.001)
    ? x.toExponential(2)
    : x.toFixed(3);

/** Display mode for objective values; "raw" shows server values as-is,
 *  "normalized" rescales each objective by the largest magnitude shown. */
export type ValueMode = "raw" | "normalized";

// ---------------------------------------------------------------------------
// outcome cards

function objectiveRows(
  values: number[],
  labels: string[],
  scale: number[],
  mode: ValueMode,
  highlightDim: number | null = null,
): HTMLElement {
  const rows = el("div", "objectives");
  values.forEach((v, k) => {
    const row = el("div", k === highlightDim ? "objective adjustable" : "objective");
    row.appendChild(el("span", "objective-label", labels[k]));
    const ratio = scale[k] > 0 ? Math.abs(v) / scale[k] : 0;
    const bar = el("div", "bar");
    const fill = el("div", "bar-fill");
    fill.style.width = `${Math.round(Math.min(1, ratio) * 100)}%`;
    bar.appendChild(fill);
    row.appendChild(bar);
    const shown = mode === "raw" ? v : scale[k] > 0 ? v / scale[k] : 0;
    row.appendChild(el("span", "objective-value", fmt(shown)));
    rows.appendChild(row);
  });
  return rows;
}

function outcomeCard(
  title: string,
  values: number[],
  labels: string[],
  scale: number[],
  mode: ValueMode,
  highlightDim: number | null = null,
): HTMLElement {
  const card = el("div", "card outcome-card");
  card.appendChild(el("h3", "", title));
  card.appendChild(objectiveRows(values, labels, scale, mode, highlightDim));
  return card;
}

/** Per-objective display scale: the largest magnitude across both
 *  outcomes, so bars of the same objective are comparable. */
function displayScale(a: number[], b: number[]): number[] {
  return a.map((v, k) => Math.max(Math.abs(v), Math.abs(b[k])) || 1);
}

// ---------------------------------------------------------------------------
// query views

export interface QueryView {
  root: HTMLElement;
  /** Reads the answer, or null when the current input is invalid. */
  readAnswer(): string | number | null;
  setBusy(busy: boolean): void;
  showError(message: string): void;
  onSubmit(handler: () => void): void;
}

/** Two outcome cards and an A/B choice; submit stays disabled until the
 *  decision maker picks a side. */
export function renderPSQuery(query: PendingQuery, mode: ValueMode): QueryView {
  const root = el("div", "query ps-query", "", { "data-kind": "PS", "data-query-id": query.id });
  root.appendChild(el("p", "instruction", query.instruction));

  const scale = displayScale(query.outcome_a, query.outcome_b);
  const pair = el("div", "outcome-pair");
  pair.appendChild(outcomeCard("Outcome A", query.outcome_a, query.labels, scale, mode));
  pair.appendChild(outcomeCard("Outcome B", query.outcome_b, query.labels, scale, mode));
  root.appendChild(pair);

  const choices = el("div", "choices");
  const mk = (value: string, caption: string): HTMLInputElement => {
    const lab = el("label", "choice");
    const input = el("input", "", "", { type: "radio", name: "ps-choice", value });
    lab.appendChild(input);
    lab.appendChild(el("span", "", caption));
    choices.appendChild(lab);
    return input;
  };
  const a = mk("A", "Prefer A");
  const b = mk("B", "Prefer B");
  root.appendChild(choices);

  const submit = el("button", "submit", "Submit preference", { disabled: "" });
  const error = el("p", "inline-error", "", { hidden: "" });
  root.appendChild(submit);
  root.appendChild(error);

  const refresh = () => {
    submit.disabled = !(a.checked || b.checked);
  };
  a.addEventListener("change", refresh);
  b.addEventListener("change", refresh);

  return {
    root,
    readAnswer: () => (a.checked ? "A" : b.checked ? "B" : null),
    setBusy(busy) {
      submit.disabled = busy || !(a.checked || b.checked);
      a.disabled = busy;
      b.disabled = busy;
    },
    showError(message) {
      error.textContent = message;
      error.hidden = message === "";
    },
    onSubmit(handler) {
      submit.addEventListener("click", handler);
    },
  };
}

/** Fixed outcome A next to outcome B with one adjustable objective: a
 *  numeric field (authoritative) plus a coarse slider spanning ±3
 *  standard deviations of recent adjustments. */
export function renderIAQuery(
  query: PendingQuery,
  recentAnswers: number[],
  mode: ValueMode,
): QueryView {
  const dim = query.dim as number;
  const root = el("div", "query ia-query", "", { "data-kind": "IA", "data-query-id": query.id });
  root.appendChild(el("p", "instruction", query.instruction));

  const scale = displayScale(query.outcome_a, query.outcome_b);
  const pair = el("div", "outcome-pair");
  pair.appendChild(outcomeCard("Outcome A (reference)", query.outcome_a, query.labels, scale, mode));
  pair.appendChild(outcomeCard("Outcome B", query.outcome_b, query.labels, scale, mode, dim));
  root.appendChild(pair);

  const sigma = stddev(recentAnswers);
  const span = sigma > 0 ? 3 * sigma : 1;
  const controls = el("div", "ia-controls");
  const field = el("input", "ia-field", "", {
    type: "text",
    inputmode: "decimal",
    placeholder: "adjustment",
    "aria-label": `adjustment for ${query.labels[dim]}`,
  });
  const slider = el("input", "ia-slider", "", {
    type: "range",
    min: String(-span),
    max: String(span),
    step: String(span / 50),
    value: "0",
  });
  controls.appendChild(field);
  controls.appendChild(slider);
  root.appendChild(controls);

  const submit = el("button", "submit", "Submit adjustment", { disabled: "" });
  const error = el("p", "inline-error", "", { hidden: "" });
  root.appendChild(submit);
  root.appendChild(error);

  const parse = (): number | null => {
    const text = field.value.trim();
    if (text === "") return null;
    const v = Number(text);
    return Number.isFinite(v) ? v : null;
  };
  const refresh = () => {
    submit.disabled = parse() === null;
  };
  field.addEventListener("input", refresh);
  // the slider is ergonomics only: it writes into the field, and the
  // typed value always wins
  slider.addEventListener("input", () => {
    field.value = slider.value;
    refresh();
  });

  return {
    root,
    readAnswer: parse,
    setBusy(busy) {
      submit.disabled = busy || parse() === null;
      field.disabled = busy;
      slider.disabled = busy;
    },
    showError(message) {
      error.textContent = message;
      error.hidden = message === "";
    },
    onSubmit(handler) {
      submit.addEventListener("click", handler);
    },
  };
}

function stddev(xs: number[]): number {
  if (xs.length < 2) return 0;
  const mean = xs.reduce((s, x) => s + x, 0) / xs.length;
  return Math.sqrt(
    xs.reduce((s, x) => s + (x - mean) ** 2, 0) / (xs.length - 1),
  );
}

// ---------------------------------------------------------------------------
// status strip and terminal cards

function sparkline(history: number[], width = 120, height = 24): SVGElement {
  const svg = document.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  svg.setAttribute("class", "sparkline");
  if (history.length >= 2) {
    const lo = Math.min(...history);
    const hi = Math.max(...history);
    const spanY = hi - lo || 1;
    const pts = history
      .map((h, i) => {
        const x = (i / (history.length - 1)) * (width - 2) + 1;
        const y = height - 2 - ((h - lo) / spanY) * (height - 4);
        return `${x.toFixed(1)},${y.toFixed(1)}`;
      })
      .join(" ");
    const line = document.createElementNS("http://www.w3.org/2000/svg", "polyline");
    line.setAttribute("points", pts);
    line.setAttribute("fill", "none");
    line.setAttribute("stroke", "currentColor");
    svg.appendChild(line);
  }
  return svg;
}

export function renderStatusStrip(
  status: StatusBlock,
  entropyHistory: number[],
): HTMLElement {
  const strip = el("div", "status-strip");
  const item = (label: string, value: string, cls = "") => {
    const box = el("div", `status-item ${cls}`.trim());
    box.appendChild(el("span", "status-label", label));
    box.appendChild(el("span", "status-value", value));
    strip.appendChild(box);
  };
  item("spent", fmt(status.spent), "status-spent");
  item("remaining", fmt(status.remaining), "status-remaining");
  item("evaluations", String(status.n_eval), "status-n-eval");
  item("comparisons", String(status.n_ps), "status-n-ps");
  item("adjustments", String(status.n_ia), "status-n-ia");
  item("entropy", fmt(status.entropy), "status-entropy");
  const spark = el("div", "status-item status-sparkline");
  spark.appendChild(el("span", "status-label", "entropy trend"));
  spark.appendChild(sparkline(entropyHistory));
  strip.appendChild(spark);
  return strip;
}

export function renderRecommendation(
  rec: Recommendation,
  title = "Current recommendation",
): HTMLElement {
  const card = el("div", "card recommendation-card");
  card.appendChild(el("h3", "", title));
  const scale = rec.f.map((v) => Math.abs(v) || 1);
  card.appendChild(objectiveRows(rec.f, rec.labels, scale, "raw"));
  return card;
}

export function renderComputing(): HTMLElement {
  const box = el("div", "computing");
  box.appendChild(el("span", "spinner"));
  box.appendChild(el("span", "", "optimizer is computing…"));
  return box;
}

export function renderFinished(
  rec: Recommendation | null,
  error: string | null,
): HTMLElement {
  const box = el("div", "finished");
  if (error !== null) {
    box.appendChild(el("p", "inline-error", `run failed: ${error}`));
  } else if (rec) {
    box.appendChild(renderRecommendation(rec, "Final recommendation"));
  }
  return box;
}
