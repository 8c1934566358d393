/**
 * Session state and the operator workflows, kept free of DOM concerns so
 * they run under node tests against a live server.
 */

import { ApiError, ConsoleApi, Metrics, QueryOutcome, QueryOverrides } from "./api.js";

export interface HistoryEntry {
  query: string;
  outcome: QueryOutcome;
}

export interface SessionState {
  userId: string;
  overrides: QueryOverrides;
  history: HistoryEntry[]; // append-only within a session
}

export function createSession(userId: string): SessionState {
  return { userId, overrides: {}, history: [] };
}

/** Client-side pre-validation mirroring the server's 400/422 rules. */
export function validateOverrides(overrides: QueryOverrides): string | null {
  const { k, fetch_k: fetchK, threshold } = overrides;
  if (k !== undefined && (!Number.isInteger(k) || k < 1)) {
    return "k must be a positive integer";
  }
  if (fetchK !== undefined && (!Number.isInteger(fetchK) || fetchK < 1)) {
    return "fetch_k must be a positive integer";
  }
  if (k !== undefined && fetchK !== undefined && k > fetchK) {
    return "k must not exceed fetch_k";
  }
  if (threshold !== undefined && (threshold < 0 || threshold > 1)) {
    return "threshold must be in [0, 1]";
  }
  return null;
}

export function appendHistory(state: SessionState, query: string, outcome: QueryOutcome): SessionState {
  return { ...state, history: [...state.history, { query, outcome }] };
}

export async function runQuery(api: ConsoleApi, state: SessionState, query: string): Promise<SessionState> {
  const problem = validateOverrides(state.overrides);
  if (problem) {
    throw new ApiError(0, problem);
  }
  const outcome = await api.query(state.userId, query, state.overrides);
  return appendHistory(state, query, outcome);
}

/**
 * The hint-chip flow: persist the widened grant set, then re-issue the
 * query; the new outcome is appended to the history.
 */
export async function grantAndRequery(
  api: ConsoleApi,
  state: SessionState,
  currentGrants: string[],
  hintId: string,
  query: string,
): Promise<SessionState> {
  const widened = currentGrants.includes(hintId) ? currentGrants : [...currentGrants, hintId];
  await api.putPermissions(state.userId, widened);
  const outcome = await api.query(state.userId, query, state.overrides);
  return appendHistory(state, query, outcome);
}

// -- permission matrix ------------------------------------------------------

export interface MatrixState {
  users: string[];
  adapters: string[];
  grants: Record<string, string[]>;
}

export function createMatrix(users: string[], adapters: string[]): MatrixState {
  const grants: Record<string, string[]> = {};
  for (const user of users) {
    grants[user] = [];
  }
  return { users, adapters, grants };
}

export function hasGrant(matrix: MatrixState, user: string, adapter: string): boolean {
  return (matrix.grants[user] ?? []).includes(adapter);
}

function withCell(matrix: MatrixState, user: string, adapter: string, granted: boolean): MatrixState {
  const current = matrix.grants[user] ?? [];
  const next = granted
    ? current.includes(adapter)
      ? current
      : [...current, adapter]
    : current.filter((a) => a !== adapter);
  return { ...matrix, grants: { ...matrix.grants, [user]: next } };
}

/**
 * Optimistic toggle: flip the cell locally, PUT the new vector, roll back
 * on any non-2xx. Returns the settled matrix plus the error, if any.
 */
export async function toggleCell(
  api: ConsoleApi,
  matrix: MatrixState,
  user: string,
  adapter: string,
): Promise<{ matrix: MatrixState; error: ApiError | null }> {
  const granted = !hasGrant(matrix, user, adapter);
  const optimistic = withCell(matrix, user, adapter, granted);
  try {
    await api.putPermissions(user, optimistic.grants[user]);
    return { matrix: optimistic, error: null };
  } catch (err) {
    const error = err instanceof ApiError ? err : new ApiError(0, String(err));
    return { matrix, error };
  }
}

// -- metrics polling ---------------------------------------------------------

export interface PollerState {
  failures: number;
  bannerVisible: boolean;
  last: Metrics | null;
}

export const POLL_FAILURE_BANNER_AFTER = 3;

export function createPoller(): PollerState {
  return { failures: 0, bannerVisible: false, last: null };
}

/** One poll step with backoff accounting; pure in, pure out. */
export async function pollOnce(api: ConsoleApi, state: PollerState): Promise<PollerState> {
  try {
    const metrics = await api.metrics();
    return { failures: 0, bannerVisible: false, last: metrics };
  } catch {
    const failures = state.failures + 1;
    return {
      failures,
      bannerVisible: failures >= POLL_FAILURE_BANNER_AFTER,
      last: state.last,
    };
  }
}

/** Backoff delay for the next poll after `failures` consecutive errors. */
export function nextPollDelay(baseMs: number, failures: number): number {
  return baseMs * Math.min(2 ** failures, 8);
}
