/**
 * Page bootstrap: recover the session from the URL (?session=...) or
 * show a small create-session form, then hand the page to DMConsole.
 * The session id is the only state that survives a reload.
 */

import { ApiClient } from "./api.js";
import { DMConsole } from "./console.js";

export interface BootOptions {
  pollMs?: number;
  /** service origin; defaults to ?service=... or the page's own origin */
  serviceBase?: string;
}

const PROBLEMS = ["dtlz2-3", "dtlz2-5", "wfg4-3", "wfg9-3"];

export function boot(
  root: HTMLElement,
  location: Location,
  history: History,
  opts: BootOptions = {},
): DMConsole | null {
  const params = new URLSearchParams(location.search);
  const base = opts.serviceBase ?? params.get("service") ?? location.origin;
  const api = new ApiClient(base);
  const sessionId = params.get("session");
  if (sessionId) {
    const console_ = new DMConsole(root, api, sessionId, {
      pollMs: opts.pollMs,
    });
    console_.start();
    return console_;
  }
  renderCreateForm(root, api, (id) => {
    const url = new URL(location.href);
    url.searchParams.set("session", id);
    history.replaceState(null, "", url.toString());
    const console_ = new DMConsole(root, api, id, { pollMs: opts.pollMs });
    console_.start();
  });
  return null;
}

function renderCreateForm(
  root: HTMLElement,
  api: ApiClient,
  onCreated: (id: string) => void,
): void {
  root.textContent = "";
  const form = document.createElement("form");
  form.className = "create-form";

  const heading = document.createElement("h2");
  heading.textContent = "Start a session";
  form.appendChild(heading);

  const problem = document.createElement("select");
  problem.name = "problem";
  for (const name of PROBLEMS) {
    const opt = document.createElement("option");
    opt.value = name;
    opt.textContent = name;
    problem.appendChild(opt);
  }
  form.appendChild(labeled("problem", problem));

  const budget = document.createElement("input");
  budget.name = "budget";
  budget.type = "number";
  budget.value = "500";
  budget.min = "1";
  form.appendChild(labeled("budget", budget));

  const policy = document.createElement("select");
  policy.name = "policy";
  for (const name of ["QUIVER", "FixedSchedule", "PSOnly", "IAOnly"]) {
    const opt = document.createElement("option");
    opt.value = name;
    opt.textContent = name;
    policy.appendChild(opt);
  }
  form.appendChild(labeled("policy", policy));

  const seed = document.createElement("input");
  seed.name = "seed";
  seed.type = "number";
  seed.value = "0";
  form.appendChild(labeled("seed", seed));

  const submit = document.createElement("button");
  submit.type = "submit";
  submit.textContent = "Create session";
  form.appendChild(submit);

  const error = document.createElement("p");
  error.className = "inline-error";
  error.hidden = true;
  form.appendChild(error);

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    submit.disabled = true;
    error.hidden = true;
    api
      .createSession({
        problem: problem.value,
        budget: Number(budget.value),
        policy: policy.value,
        dm: "human",
        seed: Number(seed.value),
      })
      .then((resp) => onCreated(resp.id))
      .catch((err) => {
        error.textContent = err instanceof Error ? err.message : String(err);
        error.hidden = false;
        submit.disabled = false;
      });
  });

  root.appendChild(form);
}

function labeled(caption: string, control: HTMLElement): HTMLElement {
  const label = document.createElement("label");
  label.className = "form-row";
  const span = document.createElement("span");
  span.textContent = caption;
  label.appendChild(span);
  label.appendChild(control);
  return label;
}
