/** Query form helpers: preset texts and inline parse-error rendering. */

import { escapeXml } from './charts.js';
import type { QueryRejected } from './types.js';

/** Preset picker entries; Q1/Q7 are run server-side as analyses, the rest are
 * plain feature boxes. The picker only fills the text box. */
export const PRESET_QUERIES: Record<string, string> = {
  Q2: 'impact = 1',
  Q3: 'likelihood = 1',
  Q4: 'risk = 1',
  Q5: 'impact > 0.9 AND likelihood < 0.3',
  Q6: 'impact < 0.3 AND likelihood > 0.9',
};

/** Inline error markup: message plus a caret under the failing position. */
export function renderQueryError(query: string, rejection: QueryRejected): string {
  const message = `<div class="query-error-message">${escapeXml(rejection.detail)}</div>`;
  if (rejection.position === undefined || rejection.position < 0) {
    return message;
  }
  const caret = `${' '.repeat(rejection.position)}^`;
  return (
    message +
    `<pre class="query-error-caret">${escapeXml(query)}\n${escapeXml(caret)}</pre>`
  );
}
