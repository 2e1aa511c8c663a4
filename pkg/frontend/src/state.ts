/** Session view state: chart series, phase, lifecycle markers.
 *
 * Every number shown in the UI comes from service payloads; the reducer only
 * orders, deduplicates, and buckets them. Records may arrive more than once
 * (reconnect replays); `seq` deduplicates.
 */

import type { EventRecord, LifecycleKind, Phase } from './types.js';
import { isLifecycle } from './types.js';

export interface Point {
  iter: number;
  value: number;
}

export interface Marker {
  iter: number;
  kind: LifecycleKind;
  label: string;
}

export interface SessionView {
  lastSeq: number;
  lastIter: number;
  phase: Phase;
  stabilityLikelihood: Point[];
  stabilityImpact: Point[];
  precision: Point[];
  recall: Point[];
  markers: Marker[];
  steeringActive: boolean;
  converged: boolean;
  totalPaths: number;
  activeQuery: string | null;
  finished: boolean;
}

export function emptyView(): SessionView {
  return {
    lastSeq: -1,
    lastIter: 0,
    phase: 'early',
    stabilityLikelihood: [],
    stabilityImpact: [],
    precision: [],
    recall: [],
    markers: [],
    steeringActive: false,
    converged: false,
    totalPaths: 0,
    activeQuery: null,
    finished: false,
  };
}

const MARKER_LABELS: Record<LifecycleKind, string> = {
  started: 'started',
  query_accepted: 'query accepted',
  steering_activated: 'steering active',
  breakdown: 'precision breakdown',
  retrained: 'retrained',
  converged: 'converged',
  completed: 'completed',
  stopped: 'stopped',
};

/** Apply one record; returns false for duplicates (already-seen seq). */
export function applyRecord(view: SessionView, record: EventRecord): boolean {
  if (typeof record.seq === 'number' && record.seq <= view.lastSeq) {
    return false;
  }
  if (typeof record.seq === 'number') {
    view.lastSeq = record.seq;
  }
  view.lastIter = Math.max(view.lastIter, record.iter ?? 0);

  if (isLifecycle(record)) {
    const kind = record.event as LifecycleKind;
    view.markers.push({ iter: record.iter, kind, label: MARKER_LABELS[kind] ?? kind });
    if (kind === 'query_accepted') {
      view.activeQuery = record.query ?? view.activeQuery;
      view.steeringActive = false;
      view.converged = false;
    }
    if (kind === 'steering_activated') view.steeringActive = true;
    if (kind === 'converged') view.converged = true;
    if (kind === 'completed' || kind === 'stopped') view.finished = true;
    return true;
  }

  // iteration record: series stay ordered because iterations only grow
  if (record.stability) {
    view.stabilityLikelihood.push({ iter: record.iter, value: record.stability.likelihood });
    view.stabilityImpact.push({ iter: record.iter, value: record.stability.impact });
  }
  if (record.precision !== null && record.precision !== undefined) {
    view.precision.push({ iter: record.iter, value: record.precision });
  }
  if (record.recall !== null && record.recall !== undefined) {
    view.recall.push({ iter: record.iter, value: record.recall });
  }
  if (record.phase) view.phase = record.phase;
  if (typeof record.total_paths === 'number') view.totalPaths = record.total_paths;
  if (typeof record.steering_active === 'boolean') view.steeringActive = record.steering_active;
  if (typeof record.converged === 'boolean' && record.converged) view.converged = true;
  return true;
}

export function applyAll(view: SessionView, records: EventRecord[]): number {
  let applied = 0;
  for (const record of records) {
    if (applyRecord(view, record)) applied += 1;
  }
  return applied;
}

/** Steering lifecycle summary for the status strip. */
export function steeringStatus(view: SessionView): string {
  if (view.activeQuery === null) return 'no query';
  if (view.converged) return 'converged';
  if (view.steeringActive) return 'steering active';
  return 'awaiting training';
}
