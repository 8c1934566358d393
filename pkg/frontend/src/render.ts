/**
 * Pure rendering helpers: server payloads in, display data or HTML out.
 * The data embedded in the markup is exactly what the server sent: ids
 * and weights are never filtered, reordered, or recomputed here.
 */

import { ActiveAdapter, Hint, Metrics, QueryOutcome } from "./api.js";

export interface WeightBar {
  id: string;
  weight: number; // raw server value
  percent: number; // weight * 100, for the bar width
}

export function weightBars(active: ActiveAdapter[]): WeightBar[] {
  return active.map((entry) => ({
    id: entry.id,
    weight: entry.weight,
    percent: entry.weight * 100,
  }));
}

function escapeHtml(value: string): string {
  return value
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function weightBarsHtml(active: ActiveAdapter[]): string {
  if (active.length === 0) {
    return '<p class="empty">no adapters active; base model answered</p>';
  }
  return weightBars(active)
    .map(
      (bar) => `
      <div class="weight-row">
        <span class="weight-id">${escapeHtml(bar.id)}</span>
        <div class="weight-track">
          <div class="weight-fill" style="width: ${bar.percent}%"></div>
        </div>
        <span class="weight-value">${bar.percent.toFixed(1)}%</span>
      </div>`,
    )
    .join("");
}

export function hintChipsHtml(hints: Hint[]): string {
  if (hints.length === 0) {
    return "";
  }
  return hints
    .map((hint) => {
      const description = hint.metadata["description"] ?? "";
      return `<button class="hint-chip" data-hint-id="${escapeHtml(hint.id)}" title="${escapeHtml(
        description,
      )}">🔒 ${escapeHtml(hint.id)}: grant &amp; re-query</button>`;
    })
    .join("");
}

export function outcomeHtml(query: string, outcome: QueryOutcome): string {
  return `
    <article class="outcome">
      <p class="query-text">“${escapeHtml(query)}”</p>
      <p class="trace">${escapeHtml(outcome.trace)}</p>
      <div class="weights">${weightBarsHtml(outcome.active)}</div>
      <div class="hints">${hintChipsHtml(outcome.hints)}</div>
      <p class="timing">ttft ${outcome.timing.ttft_ms.toFixed(2)} ms
        (embed ${outcome.timing.embed_ms.toFixed(2)}, retrieve ${outcome.timing.retrieve_ms.toFixed(2)})</p>
    </article>`;
}

export function matrixHtml(
  users: string[],
  adapters: string[],
  grants: Record<string, string[]>,
): string {
  const header = adapters.map((a) => `<th>${escapeHtml(a)}</th>`).join("");
  const rows = users
    .map((user) => {
      const cells = adapters
        .map((adapter) => {
          const on = (grants[user] ?? []).includes(adapter);
          return `<td><button class="cell ${on ? "on" : "off"}" data-user="${escapeHtml(
            user,
          )}" data-adapter="${escapeHtml(adapter)}">${on ? "✓" : "·"}</button></td>`;
        })
        .join("");
      return `<tr><th>${escapeHtml(user)}</th>${cells}</tr>`;
    })
    .join("");
  return `<table class="matrix"><thead><tr><th></th>${header}</tr></thead><tbody>${rows}</tbody></table>`;
}

export interface MetricsSeries {
  activeCount: string;
  counts: number[]; // one per TTFT bucket, in label order
  total: number;
}

export function metricsSeries(metrics: Metrics): MetricsSeries[] {
  return Object.keys(metrics.ttft_ms_histogram)
    .sort((a, b) => Number(a) - Number(b))
    .map((activeCount) => {
      const counts = metrics.ttft_ms_histogram[activeCount];
      return { activeCount, counts, total: counts.reduce((s, c) => s + c, 0) };
    });
}

export function metricsChartHtml(metrics: Metrics): string {
  const series = metricsSeries(metrics);
  if (series.length === 0) {
    return '<p class="empty">no queries recorded yet</p>';
  }
  const peak = Math.max(...series.flatMap((s) => s.counts), 1);
  const groups = series
    .map((s) => {
      const bars = s.counts
        .map((count, bin) => {
          const height = (count / peak) * 100;
          const label = metrics.ttft_ms_bucket_labels[bin] ?? String(bin);
          return `<div class="chart-bar" style="height: ${height}%" title="${escapeHtml(
            label,
          )}: ${count}"></div>`;
        })
        .join("");
      return `<div class="chart-group"><div class="chart-bars">${bars}</div><span class="chart-label">${escapeHtml(
        s.activeCount,
      )}</span></div>`;
    })
    .join("");
  return `<div class="chart">${groups}</div>`;
}
