/**
 * DOM wiring for the operator console. All state flows through the /v1
 * API; this file only reads inputs, calls the workflows in state.ts, and
 * repaints with the helpers in render.ts.
 */

import { ApiError, ConsoleApi } from "./api.js";
import { matrixHtml, metricsChartHtml, outcomeHtml } from "./render.js";
import {
  MatrixState,
  PollerState,
  SessionState,
  createMatrix,
  createPoller,
  createSession,
  grantAndRequery,
  nextPollDelay,
  pollOnce,
  runQuery,
  toggleCell,
  validateOverrides,
} from "./state.js";

const api = new ConsoleApi("");
let session: SessionState = createSession("demo-user");
let matrix: MatrixState = createMatrix([], []);
let poller: PollerState = createPoller();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function showError(message: string): void {
  const banner = el<HTMLElement>("error-banner");
  banner.textContent = message;
  banner.hidden = false;
  window.setTimeout(() => {
    banner.hidden = true;
  }, 6000);
}

function readOverrides(): void {
  const num = (id: string) => {
    const raw = el<HTMLInputElement>(id).value.trim();
    return raw === "" ? undefined : Number(raw);
  };
  session = {
    ...session,
    userId: el<HTMLInputElement>("user-id").value.trim() || "demo-user",
    overrides: {
      k: num("override-k"),
      fetch_k: num("override-fetch-k"),
      threshold: num("override-threshold"),
      hints_enabled: el<HTMLInputElement>("override-hints").checked,
    },
  };
}

function knownGrants(): string[] {
  return matrix.grants[session.userId] ?? [];
}

function repaintHistory(): void {
  const panel = el<HTMLElement>("history");
  panel.innerHTML = session.history
    .map((entry) => outcomeHtml(entry.query, entry.outcome))
    .reverse()
    .join("");
  for (const chip of panel.querySelectorAll<HTMLButtonElement>(".hint-chip")) {
    chip.addEventListener("click", () => onHintChip(chip.dataset.hintId ?? ""));
  }
}

function repaintMatrix(): void {
  el<HTMLElement>("matrix-panel").innerHTML = matrixHtml(matrix.users, matrix.adapters, matrix.grants);
  for (const cell of document.querySelectorAll<HTMLButtonElement>(".matrix .cell")) {
    cell.addEventListener("click", () => onToggleCell(cell.dataset.user ?? "", cell.dataset.adapter ?? ""));
  }
}

function trackParticipants(): void {
  // the matrix grows from observed ids: the session user plus every
  // adapter the server has mentioned in active sets or hints
  const latest = session.history[session.history.length - 1];
  if (!latest) {
    return;
  }
  const seen = new Set(matrix.adapters);
  for (const a of latest.outcome.active) {
    seen.add(a.id);
  }
  for (const h of latest.outcome.hints) {
    seen.add(h.id);
  }
  const users = matrix.users.includes(session.userId)
    ? matrix.users
    : [...matrix.users, session.userId];
  matrix = {
    users,
    adapters: [...seen].sort(),
    grants: { ...matrix.grants, [session.userId]: knownGrants() },
  };
}

async function onSubmitQuery(): Promise<void> {
  readOverrides();
  const text = el<HTMLInputElement>("query-text").value;
  const problem = validateOverrides(session.overrides);
  if (problem) {
    showError(problem);
    return;
  }
  try {
    session = await runQuery(api, session, text);
    trackParticipants();
    repaintHistory();
    repaintMatrix();
  } catch (err) {
    showError(err instanceof ApiError ? `${err.status}: ${err.message}` : String(err));
  }
}

async function onHintChip(hintId: string): Promise<void> {
  if (!api.hasAdminToken()) {
    promptForToken();
    if (!api.hasAdminToken()) {
      return;
    }
  }
  const latest = session.history[session.history.length - 1];
  if (!latest || !hintId) {
    return;
  }
  try {
    session = await grantAndRequery(api, session, knownGrants(), hintId, latest.query);
    matrix = {
      ...matrix,
      grants: {
        ...matrix.grants,
        [session.userId]: [...new Set([...knownGrants(), hintId])],
      },
    };
    trackParticipants();
    repaintHistory();
    repaintMatrix();
  } catch (err) {
    if (err instanceof ApiError && err.status === 401) {
      api.setAdminToken(null);
      promptForToken();
    } else {
      showError(String(err));
    }
  }
}

async function onToggleCell(user: string, adapter: string): Promise<void> {
  if (!api.hasAdminToken()) {
    promptForToken();
    if (!api.hasAdminToken()) {
      return;
    }
  }
  const settled = await toggleCell(api, matrix, user, adapter);
  matrix = settled.matrix;
  repaintMatrix();
  if (settled.error) {
    if (settled.error.status === 401) {
      api.setAdminToken(null);
      promptForToken();
    } else {
      showError(`${settled.error.status}: ${settled.error.message}`);
    }
  }
}

function promptForToken(): void {
  const token = window.prompt("admin token (X-Admin-Token):", "");
  api.setAdminToken(token && token.trim() !== "" ? token.trim() : null);
}

async function pollMetrics(): Promise<void> {
  poller = await pollOnce(api, poller);
  el<HTMLElement>("poll-banner").hidden = !poller.bannerVisible;
  if (poller.last) {
    el<HTMLElement>("metrics-panel").innerHTML = metricsChartHtml(poller.last);
  }
  const base = Number(el<HTMLInputElement>("poll-interval").value) || 2000;
  window.setTimeout(pollMetrics, nextPollDelay(base, poller.failures));
}

export function boot(): void {
  el<HTMLButtonElement>("submit-query").addEventListener("click", () => void onSubmitQuery());
  el<HTMLInputElement>("query-text").addEventListener("keydown", (event) => {
    if (event.key === "Enter") {
      void onSubmitQuery();
    }
  });
  el<HTMLButtonElement>("set-token").addEventListener("click", promptForToken);
  repaintMatrix();
  void pollMetrics();
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  boot();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", boot);
}
