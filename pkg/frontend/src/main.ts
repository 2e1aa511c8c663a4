/** Dashboard wiring: connect to a session, stream events, render at >= 1 Hz. */

import { ApiClient } from './api.js';
import { renderLineChart } from './charts.js';
import { PRESET_QUERIES, renderQueryError } from './form.js';
import { applyRecord, emptyView, steeringStatus, type SessionView } from './state.js';
import { EventStream } from './stream.js';
import { renderPathTable } from './table.js';

const RENDER_INTERVAL_MS = 250; // at least 1 Hz while events flow

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class Dashboard {
  private api: ApiClient | null = null;
  private stream: EventStream | null = null;
  private view: SessionView = emptyView();
  private sessionId = '';
  private dirty = false;
  private tableSort = 'risk';

  constructor() {
    el<HTMLButtonElement>('connect').addEventListener('click', () => void this.connect());
    el<HTMLButtonElement>('btn-start').addEventListener('click', () => void this.control('start'));
    el<HTMLButtonElement>('btn-pause').addEventListener('click', () => void this.control('pause'));
    el<HTMLButtonElement>('btn-stop').addEventListener('click', () => void this.control('stop'));
    el<HTMLButtonElement>('submit-query').addEventListener('click', () => void this.submitQuery());
    el<HTMLButtonElement>('refresh-paths').addEventListener('click', () => void this.refreshPaths());
    const presets = el<HTMLSelectElement>('preset');
    for (const [name, text] of Object.entries(PRESET_QUERIES)) {
      const option = document.createElement('option');
      option.value = text;
      option.textContent = `${name}: ${text}`;
      presets.appendChild(option);
    }
    presets.addEventListener('change', () => {
      if (presets.value) el<HTMLInputElement>('query').value = presets.value;
    });
    el<HTMLSelectElement>('sort').addEventListener('change', (event) => {
      this.tableSort = (event.target as HTMLSelectElement).value;
      void this.refreshPaths();
    });
    setInterval(() => this.renderIfDirty(), RENDER_INTERVAL_MS);
  }

  private async connect(): Promise<void> {
    const baseUrl = el<HTMLInputElement>('base-url').value.replace(/\/$/, '');
    this.sessionId = el<HTMLInputElement>('session-id').value.trim();
    this.api = new ApiClient(baseUrl);
    this.stream?.stop();
    this.view = emptyView();
    try {
      await this.api.sessionStatus(this.sessionId);
    } catch (error) {
      el('banner').textContent = `cannot connect: ${(error as Error).message}`;
      el('banner').className = 'banner error';
      return;
    }
    el('banner').textContent = `connected to ${this.sessionId}`;
    el('banner').className = 'banner ok';
    this.stream = new EventStream({
      baseUrl,
      sessionId: this.sessionId,
      onRecord: (record) => {
        if (applyRecord(this.view, record)) this.dirty = true;
      },
      onStatus: (status) => {
        el('stream-status').textContent = `stream: ${status}`;
      },
    });
    void this.stream.run();
    void this.refreshPaths();
  }

  private async control(verb: 'start' | 'pause' | 'stop'): Promise<void> {
    if (!this.api) return;
    try {
      await this.api[verb](this.sessionId);
    } catch (error) {
      el('banner').textContent = (error as Error).message;
      el('banner').className = 'banner error';
    }
  }

  private async submitQuery(): Promise<void> {
    if (!this.api) return;
    const query = el<HTMLInputElement>('query').value;
    const errorBox = el('query-error');
    const result = await this.api.submitQuery(this.sessionId, query);
    if (result.ok) {
      errorBox.innerHTML = '';
      el('banner').textContent =
        `query accepted, applies at iteration ${result.accepted.applies_at_iteration}`;
      el('banner').className = 'banner ok';
    } else {
      errorBox.innerHTML = renderQueryError(query, result.rejected);
    }
  }

  private async refreshPaths(): Promise<void> {
    if (!this.api) return;
    try {
      const snapshot = await this.api.snapshot(this.sessionId, this.tableSort, 100);
      el('answer-table').innerHTML = renderPathTable(snapshot.answers, {
        emptyMessage:
          snapshot.query === null
            ? 'No query active; submit one to partition answers.'
            : 'No answers yet for the active query.',
      });
      el('all-table').innerHTML = renderPathTable(snapshot.paths);
    } catch (error) {
      el('answer-table').innerHTML =
        `<div class="banner error">${(error as Error).message}</div>`;
    }
  }

  private renderIfDirty(): void {
    if (!this.dirty) return;
    this.dirty = false;
    const view = this.view;
    el('phase-badge').textContent = view.phase;
    el('phase-badge').className = `badge phase-${view.phase}`;
    el('steering-status').textContent = steeringStatus(view);
    el('total-paths').textContent = `${view.totalPaths} paths @ iteration ${view.lastIter}`;
    el('stability-chart').innerHTML = renderLineChart({
      title: 'stability (phase guides at 0.85 / 0.95)',
      series: [
        { name: 'likelihood', color: '#2563eb', points: view.stabilityLikelihood },
        { name: 'impact', color: '#dc2626', points: view.stabilityImpact },
      ],
      guides: [0.85, 0.95],
      markers: view.markers.filter((m) => m.kind === 'query_accepted'),
    });
    el('precision-chart').innerHTML = renderLineChart({
      title: 'precision / recall with steering lifecycle',
      series: [
        { name: 'precision', color: '#16a34a', points: view.precision },
        { name: 'recall', color: '#9333ea', points: view.recall },
      ],
      markers: view.markers.filter((m) =>
        ['query_accepted', 'steering_activated', 'breakdown', 'retrained', 'converged'].includes(
          m.kind,
        ),
      ),
    });
    if (view.finished) {
      el('stream-status').textContent = 'stream: ended (session finished)';
      void this.refreshPaths();
    }
  }
}

new Dashboard();
