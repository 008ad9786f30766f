/**
 * HTTP client for the session service. Network failures are retried
 * with exponential backoff (the request body is immutable, so a retry
 * never loses the user's input); HTTP error statuses are mapped to
 * typed errors carrying the documented body shape.
 */

import {
  AnswerRequest,
  AnswerResponse,
  CreateSessionRequest,
  CreateSessionResponse,
  FieldError,
  PendingResponse,
  ResultResponse,
  TraceResponse,
  validateAnswer,
  validateCreateSession,
  validateDetailError,
  validateFieldErrors,
  validatePending,
  validateResult,
  validateTrace,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

/** 404: unknown session or query id. */
export class NotFoundError extends ApiError {
  constructor(public readonly detail: string) {
    super(404, detail);
    this.name = "NotFoundError";
  }
}

/** 409: this query id was already answered. */
export class ConflictError extends ApiError {
  constructor(public readonly detail: string) {
    super(409, detail);
    this.name = "ConflictError";
  }
}

/** 422: the request body failed validation; per-field details. */
export class ValidationError extends ApiError {
  constructor(public readonly errors: FieldError[]) {
    super(
      422,
      errors.map((e) => `${e.loc.join(".")}: ${e.msg}`).join("; ") ||
        "validation failed",
    );
    this.name = "ValidationError";
  }
}

/** Network-level failure that persisted through all retries. */
export class NetworkError extends Error {
  constructor(public readonly cause_: unknown) {
    super(`network failure: ${String(cause_)}`);
    this.name = "NetworkError";
  }
}

export interface ClientOptions {
  /** attempts per request, network failures only (default 4) */
  retries?: number;
  /** first backoff delay in ms, doubled per attempt (default 250) */
  backoffMs?: number;
  fetchImpl?: typeof fetch;
}

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

export class ApiClient {
  private readonly retries: number;
  private readonly backoffMs: number;
  private readonly fetchImpl: typeof fetch;

  constructor(
    public readonly base: string,
    opts: ClientOptions = {},
  ) {
    this.retries = opts.retries ?? 4;
    this.backoffMs = opts.backoffMs ?? 250;
    this.fetchImpl = opts.fetchImpl ?? fetch;
  }

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    let lastFailure: unknown;
    for (let attempt = 0; attempt < this.retries; attempt++) {
      if (attempt > 0) await sleep(this.backoffMs * 2 ** (attempt - 1));
      let resp: Response;
      try {
        resp = await this.fetchImpl(`${this.base}${path}`, {
          headers: { "content-type": "application/json" },
          ...init,
        });
      } catch (err) {
        lastFailure = err; // connection refused, DNS, aborted socket...
        continue;
      }
      if (resp.ok) return resp.json();
      const body = await resp.json().catch(() => ({}));
      switch (resp.status) {
        case 404:
          throw new NotFoundError(validateDetailError(body));
        case 409:
          throw new ConflictError(validateDetailError(body));
        case 422:
          throw new ValidationError(validateFieldErrors(body));
        default:
          throw new ApiError(resp.status, `unexpected status ${resp.status}`);
      }
    }
    throw new NetworkError(lastFailure);
  }

  createSession(req: CreateSessionRequest): Promise<CreateSessionResponse> {
    return this.request("/sessions", {
      method: "POST",
      body: JSON.stringify(req),
    }).then(validateCreateSession);
  }

  getPending(sessionId: string): Promise<PendingResponse> {
    return this.request(`/sessions/${sessionId}/pending`).then(
      validatePending,
    );
  }

  submitAnswer(sessionId: string, req: AnswerRequest): Promise<AnswerResponse> {
    return this.request(`/sessions/${sessionId}/answers`, {
      method: "POST",
      body: JSON.stringify(req),
    }).then(validateAnswer);
  }

  getResult(sessionId: string): Promise<ResultResponse> {
    return this.request(`/sessions/${sessionId}/result`).then(validateResult);
  }

  getTrace(sessionId: string): Promise<TraceResponse> {
    return this.request(`/sessions/${sessionId}/trace`).then(validateTrace);
  }
}
