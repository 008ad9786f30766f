/**
 * The console controller: polls the session, renders whatever the
 * optimizer is waiting on, and shepherds exactly one answer per query
 * id to the server. All document state hangs off the root element the
 * controller owns.
 */

import { ApiClient, ConflictError, NetworkError, NotFoundError, ValidationError } from "./api.js";
import { PendingQuery, PendingResponse } from "./types.js";
import {
  QueryView,
  ValueMode,
  renderComputing,
  renderFinished,
  renderIAQuery,
  renderPSQuery,
  renderRecommendation,
  renderStatusStrip,
} from "./view.js";

export interface ConsoleOptions {
  /** poll interval in ms (default 1000) */
  pollMs?: number;
}

export class DMConsole {
  private readonly pollMs: number;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private pollInFlight = false;
  private submitInFlight = false;
  private stopped = false;

  private currentQuery: PendingQuery | null = null;
  private view: QueryView | null = null;
  private readonly answeredIds = new Set<string>();
  private readonly entropyHistory: number[] = [];
  private readonly recentIA: number[] = [];
  private mode: ValueMode = "raw";
  private finished = false;

  private readonly statusHost: HTMLElement;
  private readonly queryHost: HTMLElement;
  private readonly footerHost: HTMLElement;

  constructor(
    root: HTMLElement,
    private readonly api: ApiClient,
    public readonly sessionId: string,
    opts: ConsoleOptions = {},
  ) {
    this.pollMs = opts.pollMs ?? 1000;
    root.textContent = "";
    root.className = "dm-console";

    const header = document.createElement("div");
    header.className = "console-header";
    const title = document.createElement("h2");
    title.textContent = `Session ${sessionId}`;
    header.appendChild(title);
    header.appendChild(this.buildModeToggle());
    root.appendChild(header);

    this.statusHost = document.createElement("div");
    this.statusHost.className = "status-host";
    this.queryHost = document.createElement("div");
    this.queryHost.className = "query-host";
    this.footerHost = document.createElement("div");
    this.footerHost.className = "footer-host";
    root.appendChild(this.statusHost);
    root.appendChild(this.queryHost);
    root.appendChild(this.footerHost);
    this.queryHost.appendChild(renderComputing());
  }

  private buildModeToggle(): HTMLElement {
    const label = document.createElement("label");
    label.className = "mode-toggle";
    const box = document.createElement("input");
    box.type = "checkbox";
    box.addEventListener("change", () => {
      this.mode = box.checked ? "normalized" : "raw";
      if (this.currentQuery && this.view) {
        const kept = this.view.readAnswer();
        this.renderQuery(this.currentQuery, kept);
      }
    });
    label.appendChild(box);
    const caption = document.createElement("span");
    caption.textContent = "normalized values";
    label.appendChild(caption);
    return label;
  }

  start(): void {
    this.stopped = false;
    const tick = async () => {
      if (this.stopped) return;
      await this.pollOnce();
      if (!this.stopped && !this.finished) {
        this.timer = setTimeout(tick, this.pollMs);
      }
    };
    void tick();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
  }

  /** One poll of /pending; safe to call concurrently (extra calls no-op). */
  async pollOnce(): Promise<void> {
    if (this.pollInFlight || this.finished) return;
    this.pollInFlight = true;
    try {
      const pending = await this.api.getPending(this.sessionId);
      this.applyPending(pending);
    } catch (err) {
      if (err instanceof NetworkError) {
        this.setStatusNote("connection lost; retrying…");
      } else {
        throw err;
      }
    } finally {
      this.pollInFlight = false;
    }
  }

  private applyPending(pending: PendingResponse): void {
    this.renderStatus(pending);

    if (pending.state === "finished") {
      this.finished = true;
      this.stop();
      void this.showResult();
      return;
    }

    const query = pending.query;
    if (query === null || this.answeredIds.has(query.id)) {
      // nothing actionable; show the spinner unless we already do
      if (this.currentQuery !== null || this.queryHost.childElementCount === 0) {
        this.currentQuery = null;
        this.view = null;
        this.queryHost.textContent = "";
        this.queryHost.appendChild(renderComputing());
      }
      return;
    }
    if (this.currentQuery?.id === query.id) {
      return; // same query; keep the view (and any half-typed input)
    }
    this.renderQuery(query, null);
  }

  private renderQuery(query: PendingQuery, keep: string | number | null): void {
    this.currentQuery = query;
    this.queryHost.textContent = "";
    const view =
      query.kind === "PS"
        ? renderPSQuery(query, this.mode)
        : renderIAQuery(query, this.recentIA, this.mode);
    this.view = view;
    if (keep !== null) restoreAnswer(view, keep);
    view.onSubmit(() => void this.submitCurrent());
    this.queryHost.appendChild(view.root);
  }

  private async submitCurrent(): Promise<void> {
    const query = this.currentQuery;
    const view = this.view;
    if (!query || !view || this.submitInFlight) return;
    if (this.answeredIds.has(query.id)) return; // no double-submit, ever
    const answer = view.readAnswer();
    if (answer === null) return;

    this.submitInFlight = true;
    view.setBusy(true);
    view.showError("");
    try {
      await this.api.submitAnswer(this.sessionId, {
        query_id: query.id,
        answer,
      });
      this.answeredIds.add(query.id);
      if (query.kind === "IA" && typeof answer === "number") {
        this.recentIA.push(answer);
      }
      this.currentQuery = null;
      this.view = null;
      this.queryHost.textContent = "";
      this.queryHost.appendChild(renderComputing());
    } catch (err) {
      if (err instanceof ConflictError) {
        // someone (another tab?) answered it first: treat as answered
        this.answeredIds.add(query.id);
        view.showError("this query was already answered");
        view.setBusy(true);
      } else if (err instanceof ValidationError) {
        view.showError(err.message);
        view.setBusy(false);
      } else if (err instanceof NotFoundError) {
        view.showError("query expired; waiting for the next one");
        view.setBusy(true);
        this.currentQuery = null; // next poll replaces the view
      } else if (err instanceof NetworkError) {
        view.showError("network failure; your input is preserved — retry");
        view.setBusy(false);
      } else {
        throw err;
      }
    } finally {
      this.submitInFlight = false;
    }
  }

  private renderStatus(pending: PendingResponse): void {
    const h = this.entropyHistory;
    if (h.length === 0 || h[h.length - 1] !== pending.status.entropy) {
      h.push(pending.status.entropy);
    }
    this.statusHost.textContent = "";
    this.statusHost.appendChild(renderStatusStrip(pending.status, h));
    if (pending.status.recommendation && pending.state !== "finished") {
      this.statusHost.appendChild(
        renderRecommendation(pending.status.recommendation),
      );
    }
  }

  private setStatusNote(text: string): void {
    let note = this.statusHost.querySelector(".status-note");
    if (!note) {
      note = document.createElement("p");
      note.className = "status-note";
      this.statusHost.appendChild(note);
    }
    note.textContent = text;
  }

  private async showResult(): Promise<void> {
    this.queryHost.textContent = "";
    try {
      const result = await this.api.getResult(this.sessionId);
      this.footerHost.textContent = "";
      this.footerHost.appendChild(
        renderFinished(result.recommendation, result.error),
      );
    } catch (err) {
      if (err instanceof NetworkError) {
        this.setStatusNote("connection lost before the result arrived");
      } else {
        throw err;
      }
    }
  }
}

function restoreAnswer(view: QueryView, answer: string | number): void {
  const root = view.root;
  if (typeof answer === "string") {
    const radio = root.querySelector<HTMLInputElement>(
      `input[type=radio][value=${answer === "A" ? "A" : "B"}]`,
    );
    if (radio) {
      radio.checked = true;
      radio.dispatchEvent(new Event("change"));
    }
  } else {
    const field = root.querySelector<HTMLInputElement>("input.ia-field");
    if (field) {
      field.value = String(answer);
      field.dispatchEvent(new Event("input"));
    }
  }
}
