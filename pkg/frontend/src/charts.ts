/** SVG line charts: series on a [0,1] y-axis, guide rules, lifecycle markers. */

import type { Marker, Point } from './state.js';

export interface ChartSeries {
  name: string;
  color: string;
  points: Point[];
}

export interface ChartSpec {
  title: string;
  series: ChartSeries[];
  /** horizontal dashed rules, e.g. the 0.85 / 0.95 phase thresholds */
  guides?: number[];
  markers?: Marker[];
  width?: number;
  height?: number;
}

const PAD = { left: 34, right: 10, top: 18, bottom: 18 };

export function renderLineChart(spec: ChartSpec): string {
  const width = spec.width ?? 460;
  const height = spec.height ?? 180;
  const plotW = width - PAD.left - PAD.right;
  const plotH = height - PAD.top - PAD.bottom;

  const iters = spec.series.flatMap((s) => s.points.map((p) => p.iter));
  const maxIter = Math.max(1, ...iters);
  const minIter = Math.min(maxIter, ...(iters.length ? iters : [0]));
  const spanIter = Math.max(1, maxIter - minIter);

  const x = (iter: number) => PAD.left + ((iter - minIter) / spanIter) * plotW;
  const y = (value: number) => PAD.top + (1 - clamp01(value)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg class="chart" viewBox="0 0 ${width} ${height}" role="img" aria-label="${escapeXml(spec.title)}">`,
  );
  parts.push(`<text x="${PAD.left}" y="12" class="chart-title">${escapeXml(spec.title)}</text>`);
  parts.push(
    `<rect x="${PAD.left}" y="${PAD.top}" width="${plotW}" height="${plotH}" class="chart-frame"/>`,
  );
  for (const tick of [0, 0.5, 1]) {
    parts.push(
      `<text x="${PAD.left - 6}" y="${y(tick) + 3}" text-anchor="end" class="chart-tick">${tick}</text>`,
    );
  }
  for (const guide of spec.guides ?? []) {
    parts.push(
      `<line class="chart-guide" data-guide="${guide}" x1="${PAD.left}" x2="${PAD.left + plotW}" ` +
        `y1="${y(guide)}" y2="${y(guide)}" stroke-dasharray="4 3"/>`,
    );
  }
  for (const marker of spec.markers ?? []) {
    if (marker.iter < minIter || marker.iter > maxIter) continue;
    const mx = x(marker.iter);
    parts.push(
      `<line class="chart-marker" data-kind="${marker.kind}" x1="${mx}" x2="${mx}" ` +
        `y1="${PAD.top}" y2="${PAD.top + plotH}"/>`,
    );
    parts.push(
      `<title>${escapeXml(`${marker.label} @ ${marker.iter}`)}</title>`,
    );
  }
  for (const series of spec.series) {
    if (series.points.length === 0) continue;
    const path = series.points.map((p) => `${x(p.iter).toFixed(1)},${y(p.value).toFixed(1)}`);
    parts.push(
      `<polyline class="chart-line" data-series="${escapeXml(series.name)}" fill="none" ` +
        `stroke="${series.color}" stroke-width="1.6" points="${path.join(' ')}"/>`,
    );
  }
  const legendY = height - 4;
  let legendX = PAD.left;
  for (const series of spec.series) {
    parts.push(
      `<text x="${legendX}" y="${legendY}" fill="${series.color}" class="chart-legend">` +
        `${escapeXml(series.name)}</text>`,
    );
    legendX += series.name.length * 7 + 18;
  }
  parts.push('</svg>');
  return parts.join('');
}

function clamp01(value: number): number {
  return Math.min(1, Math.max(0, value));
}

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}
