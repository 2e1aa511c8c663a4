/** Answer-path table rendering: one row per path, expandable CVSS details. */

import { escapeXml } from './charts.js';
import type { PathRow } from './types.js';

export interface TableOptions {
  emptyMessage?: string;
}

export function renderPathTable(rows: PathRow[], options: TableOptions = {}): string {
  if (rows.length === 0) {
    const message = options.emptyMessage ?? 'No paths retrieved yet.';
    return `<div class="table-empty">${escapeXml(message)}</div>`;
  }
  const body = rows
    .map((row, index) => {
      const route = row.states.map(escapeXml).join(' → ');
      const details = row.steps
        .map(
          (step) =>
            `<li><code>${escapeXml(step.vuln)}</code> on ${escapeXml(step.host)} ` +
            `<span class="cvss">${escapeXml(step.cvss)}</span></li>`,
        )
        .join('');
      return (
        `<tr class="path-row${row.is_answer ? ' answer' : ''}" data-row="${index}">` +
        `<td><details><summary>${route}</summary><ul class="steps">${details}</ul></details></td>` +
        `<td class="num">${row.length}</td>` +
        `<td class="num">${fmt(row.likelihood)}</td>` +
        `<td class="num">${fmt(row.impact)}</td>` +
        `<td class="num risk">${fmt(row.risk)}</td>` +
        `</tr>`
      );
    })
    .join('');
  return (
    '<table class="paths"><thead><tr>' +
    '<th>Path</th><th>Steps</th><th>Likelihood</th><th>Impact</th><th>Risk</th>' +
    `</tr></thead><tbody>${body}</tbody></table>`
  );
}

function fmt(value: number): string {
  return value.toFixed(3);
}
