/**
 * Protocol types for the session service (schema v1), plus structural
 * validators. Every response the console receives is passed through a
 * validator before use, so a server drift from the documented schema
 * surfaces as a SchemaError naming the offending field instead of a
 * silent wrong render.
 */

export type SessionState =
  | "idle"
  | "computing"
  | "awaiting_answer"
  | "finished";

export const SESSION_STATES: readonly SessionState[] = [
  "idle",
  "computing",
  "awaiting_answer",
  "finished",
];

export type QueryKind = "PS" | "IA";

export interface CreateSessionRequest {
  problem: string;
  budget?: number;
  policy?: string;
  dm?: "human" | "synthetic";
  seed?: number;
  query_timeout?: number;
}

export interface CreateSessionResponse {
  id: string;
  state: SessionState;
}

export interface Recommendation {
  f: number[];
  labels: string[];
  x?: number[];
}

export interface StatusBlock {
  spent: number;
  remaining: number;
  budget: number;
  n_eval: number;
  n_ps: number;
  n_ia: number;
  entropy: number;
  entropy_min: number;
  recommendation: Recommendation | null;
}

export interface PendingQuery {
  id: string;
  kind: QueryKind;
  outcome_a: number[];
  outcome_b: number[];
  dim: number | null;
  labels: string[];
  instruction: string;
}

export interface PendingResponse {
  state: SessionState;
  query: PendingQuery | null;
  status: StatusBlock;
}

export interface AnswerRequest {
  query_id: string;
  answer: string | number;
}

export interface AnswerResponse {
  accepted: boolean;
  state: SessionState;
}

export interface ResultResponse {
  id: string;
  state: SessionState;
  error: string | null;
  recommendation: Recommendation | null;
  regret: number | null;
  spend: Record<string, number>;
  counts: { n_eval: number; n_ps: number; n_ia: number };
  entropy: Record<string, number>;
  status?: StatusBlock;
}

export interface TraceStep {
  step: number;
  kind: string;
  cost: number;
  cumulative_spend: number;
  entropy: number;
  payload: Record<string, unknown>;
}

export interface TraceResponse {
  run: string;
  config: Record<string, unknown>;
  steps: TraceStep[];
  result: Record<string, unknown> | null;
  complete: boolean;
}

/** Raised when a response body does not match the documented schema. */
export class SchemaError extends Error {
  constructor(public readonly path: string, detail: string) {
    super(`schema violation at ${path}: ${detail}`);
    this.name = "SchemaError";
  }
}

// ---------------------------------------------------------------------------
// tiny structural checkers

function fail(path: string, detail: string): never {
  throw new SchemaError(path, detail);
}

function obj(v: unknown, path: string): Record<string, unknown> {
  if (typeof v !== "object" || v === null || Array.isArray(v)) {
    fail(path, `expected object, got ${v === null ? "null" : typeof v}`);
  }
  return v as Record<string, unknown>;
}

function num(v: unknown, path: string): number {
  if (typeof v !== "number" || !Number.isFinite(v)) {
    fail(path, `expected finite number, got ${JSON.stringify(v)}`);
  }
  return v;
}

function int(v: unknown, path: string): number {
  if (!Number.isInteger(num(v, path))) fail(path, "expected integer");
  return v as number;
}

function str(v: unknown, path: string): string {
  if (typeof v !== "string") fail(path, `expected string, got ${typeof v}`);
  return v;
}

function bool(v: unknown, path: string): boolean {
  if (typeof v !== "boolean") fail(path, `expected boolean, got ${typeof v}`);
  return v;
}

function numArray(v: unknown, path: string): number[] {
  if (!Array.isArray(v)) fail(path, "expected array");
  return (v as unknown[]).map((x, i) => num(x, `${path}[${i}]`));
}

function strArray(v: unknown, path: string): string[] {
  if (!Array.isArray(v)) fail(path, "expected array");
  return (v as unknown[]).map((x, i) => str(x, `${path}[${i}]`));
}

function sessionState(v: unknown, path: string): SessionState {
  const s = str(v, path);
  if (!SESSION_STATES.includes(s as SessionState)) {
    fail(path, `unknown session state ${JSON.stringify(s)}`);
  }
  return s as SessionState;
}

// ---------------------------------------------------------------------------
// response validators

export function validateCreateSession(body: unknown): CreateSessionResponse {
  const o = obj(body, "$");
  const id = str(o.id, "$.id");
  if (id.length === 0) fail("$.id", "empty session id");
  return { id, state: sessionState(o.state, "$.state") };
}

function validateRecommendation(
  v: unknown,
  path: string,
): Recommendation | null {
  if (v === null || v === undefined) return null;
  const o = obj(v, path);
  const rec: Recommendation = {
    f: numArray(o.f, `${path}.f`),
    labels: strArray(o.labels, `${path}.labels`),
  };
  if (rec.f.length !== rec.labels.length) {
    fail(path, `f has ${rec.f.length} entries but labels has ${rec.labels.length}`);
  }
  if (o.x !== undefined && o.x !== null) {
    rec.x = numArray(o.x, `${path}.x`);
  }
  return rec;
}

export function validateStatus(v: unknown, path = "$.status"): StatusBlock {
  const o = obj(v, path);
  return {
    spent: num(o.spent, `${path}.spent`),
    remaining: num(o.remaining, `${path}.remaining`),
    budget: num(o.budget, `${path}.budget`),
    n_eval: int(o.n_eval, `${path}.n_eval`),
    n_ps: int(o.n_ps, `${path}.n_ps`),
    n_ia: int(o.n_ia, `${path}.n_ia`),
    entropy: num(o.entropy, `${path}.entropy`),
    entropy_min: num(o.entropy_min, `${path}.entropy_min`),
    recommendation: validateRecommendation(
      o.recommendation,
      `${path}.recommendation`,
    ),
  };
}

export function validateQuery(v: unknown, path = "$.query"): PendingQuery {
  const o = obj(v, path);
  const kind = str(o.kind, `${path}.kind`);
  if (kind !== "PS" && kind !== "IA") {
    fail(`${path}.kind`, `expected "PS" or "IA", got ${JSON.stringify(kind)}`);
  }
  const q: PendingQuery = {
    id: str(o.id, `${path}.id`),
    kind: kind as QueryKind,
    outcome_a: numArray(o.outcome_a, `${path}.outcome_a`),
    outcome_b: numArray(o.outcome_b, `${path}.outcome_b`),
    dim: o.dim === null || o.dim === undefined
      ? null
      : int(o.dim, `${path}.dim`),
    labels: strArray(o.labels, `${path}.labels`),
    instruction: str(o.instruction, `${path}.instruction`),
  };
  const m = q.labels.length;
  if (q.outcome_a.length !== m || q.outcome_b.length !== m) {
    fail(path, "outcome vectors and labels disagree on length");
  }
  if (q.kind === "IA") {
    if (q.dim === null) fail(`${path}.dim`, "IA query without a dimension");
    if (q.dim < 0 || q.dim >= m) {
      fail(`${path}.dim`, `dimension ${q.dim} out of range for ${m} objectives`);
    }
  }
  return q;
}

export function validatePending(body: unknown): PendingResponse {
  const o = obj(body, "$");
  const state = sessionState(o.state, "$.state");
  const query = o.query === null || o.query === undefined
    ? null
    : validateQuery(o.query);
  if (state === "awaiting_answer" && query === null) {
    fail("$.query", "state is awaiting_answer but no query was sent");
  }
  return { state, query, status: validateStatus(o.status) };
}

export function validateAnswer(body: unknown): AnswerResponse {
  const o = obj(body, "$");
  return {
    accepted: bool(o.accepted, "$.accepted"),
    state: sessionState(o.state, "$.state"),
  };
}

export function validateResult(body: unknown): ResultResponse {
  const o = obj(body, "$");
  const state = sessionState(o.state, "$.state");
  const spendObj = obj(o.spend, "$.spend");
  const spend: Record<string, number> = {};
  for (const [k, v] of Object.entries(spendObj)) {
    spend[k] = num(v, `$.spend.${k}`);
  }
  num(spend.total, "$.spend.total");
  const countsObj = obj(o.counts, "$.counts");
  const entropyObj = obj(o.entropy, "$.entropy");
  const entropy: Record<string, number> = {};
  for (const [k, v] of Object.entries(entropyObj)) {
    entropy[k] = num(v, `$.entropy.${k}`);
  }
  num(entropy.initial, "$.entropy.initial");
  const res: ResultResponse = {
    id: str(o.id, "$.id"),
    state,
    error: o.error === null || o.error === undefined
      ? null
      : str(o.error, "$.error"),
    recommendation: validateRecommendation(o.recommendation, "$.recommendation"),
    regret: o.regret === null || o.regret === undefined
      ? null
      : num(o.regret, "$.regret"),
    spend,
    counts: {
      n_eval: int(countsObj.n_eval, "$.counts.n_eval"),
      n_ps: int(countsObj.n_ps, "$.counts.n_ps"),
      n_ia: int(countsObj.n_ia, "$.counts.n_ia"),
    },
    entropy,
  };
  if (o.status !== undefined && o.status !== null) {
    res.status = validateStatus(o.status);
  }
  if (state === "finished" && res.error === null && !res.recommendation) {
    fail("$.recommendation", "finished session without a recommendation");
  }
  return res;
}

export function validateTrace(body: unknown): TraceResponse {
  const o = obj(body, "$");
  if (!Array.isArray(o.steps)) fail("$.steps", "expected array");
  const steps = (o.steps as unknown[]).map((s, i) => {
    const so = obj(s, `$.steps[${i}]`);
    return {
      step: int(so.step, `$.steps[${i}].step`),
      kind: str(so.kind, `$.steps[${i}].kind`),
      cost: num(so.cost, `$.steps[${i}].cost`),
      cumulative_spend: num(so.cumulative_spend, `$.steps[${i}].cumulative_spend`),
      entropy: num(so.entropy, `$.steps[${i}].entropy`),
      payload: obj(so.payload ?? {}, `$.steps[${i}].payload`),
    };
  });
  return {
    run: str(o.run, "$.run"),
    config: obj(o.config, "$.config"),
    steps,
    result: o.result === null || o.result === undefined
      ? null
      : obj(o.result, "$.result"),
    complete: bool(o.complete, "$.complete"),
  };
}

// ---------------------------------------------------------------------------
// error-body validators (the three documented error shapes)

export interface FieldError {
  loc: (string | number)[];
  msg: string;
  type: string;
}

/** 404 and 409 bodies: {"detail": "<message>"} */
export function validateDetailError(body: unknown): string {
  const o = obj(body, "$");
  return str(o.detail, "$.detail");
}

/** 422 bodies: {"detail": [{loc, msg, type}, ...]} */
export function validateFieldErrors(body: unknown): FieldError[] {
  const o = obj(body, "$");
  if (!Array.isArray(o.detail)) fail("$.detail", "expected array");
  return (o.detail as unknown[]).map((e, i) => {
    const eo = obj(e, `$.detail[${i}]`);
    if (!Array.isArray(eo.loc)) fail(`$.detail[${i}].loc`, "expected array");
    const loc = (eo.loc as unknown[]).map((p, j) => {
      if (typeof p !== "string" && typeof p !== "number") {
        fail(`$.detail[${i}].loc[${j}]`, "expected string or number");
      }
      return p as string | number;
    });
    return {
      loc,
      msg: str(eo.msg, `$.detail[${i}].msg`),
      type: str(eo.type, `$.detail[${i}].type`),
    };
  });
}
