/** Wire types of the session service (HTTP/JSON + NDJSON event stream). */

/** One NDJSON line: either an iteration record or a lifecycle event. */
export interface EventRecord {
  seq: number;
  iter: number;
  /** present on lifecycle events only */
  event?: LifecycleKind;
  query?: string;
  /** iteration-record fields */
  new_paths?: number;
  total_paths?: number;
  stability?: { likelihood: number; impact: number } | null;
  phase?: Phase;
  precision?: number | null;
  recall?: number | null;
  steering_active?: boolean;
  converged?: boolean;
}

export type LifecycleKind =
  | 'started'
  | 'query_accepted'
  | 'steering_activated'
  | 'breakdown'
  | 'retrained'
  | 'converged'
  | 'completed'
  | 'stopped';

export type Phase = 'early' | 'mature' | 'definitive';

export interface PathStep {
  host: string;
  vuln: string;
  cvss: string;
}

export interface PathRow {
  states: string[];
  vulns: string[];
  steps: PathStep[];
  likelihood: number;
  impact: number;
  risk: number;
  length: number;
  is_answer: boolean;
}

export interface Snapshot {
  session: string;
  state: string;
  iter: number;
  total_paths: number;
  phase: Phase;
  stability: { likelihood: number; impact: number } | null;
  query: string | null;
  steering_active: boolean;
  converged: boolean;
  precision_history: Array<[number, number | null]>;
  answers: PathRow[];
  paths: PathRow[];
}

export interface SessionStatus {
  id: string;
  state: string;
  iter: number;
  total_paths?: number;
  query?: string | null;
  steering_active?: boolean;
  converged?: boolean;
}

export interface QueryAccepted {
  query: string;
  applies_at_iteration: number;
}

export interface QueryRejected {
  detail: string;
  position?: number;
}

export function isLifecycle(record: EventRecord): boolean {
  return typeof record.event === 'string';
}
