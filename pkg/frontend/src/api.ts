/** Thin client over the session service endpoints. */

import type { QueryAccepted, QueryRejected, SessionStatus, Snapshot } from './types.js';

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly payload: unknown,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch.bind(globalThis),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    const payload = await response.json().catch(() => null);
    if (!response.ok) {
      const detail =
        payload && typeof payload === 'object' && 'detail' in payload
          ? String((payload as { detail: unknown }).detail)
          : `request failed: ${response.status}`;
      throw new ApiError(detail, response.status, payload);
    }
    return payload as T;
  }

  listSessions(): Promise<SessionStatus[]> {
    return this.request('/sessions');
  }

  sessionStatus(id: string): Promise<SessionStatus> {
    return this.request(`/sessions/${id}`);
  }

  start(id: string): Promise<{ state: string }> {
    return this.request(`/sessions/${id}/start`, { method: 'POST' });
  }

  pause(id: string): Promise<{ state: string }> {
    return this.request(`/sessions/${id}/pause`, { method: 'POST' });
  }

  stop(id: string): Promise<{ state: string }> {
    return this.request(`/sessions/${id}/stop`, { method: 'POST' });
  }

  async submitQuery(
    id: string,
    query: string,
  ): Promise<{ ok: true; accepted: QueryAccepted } | { ok: false; rejected: QueryRejected }> {
    try {
      const accepted = await this.request<QueryAccepted>(`/sessions/${id}/query`, {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify({ query }),
      });
      return { ok: true, accepted };
    } catch (error) {
      if (error instanceof ApiError && error.status === 400) {
        const payload = (error.payload ?? {}) as QueryRejected;
        return { ok: false, rejected: { detail: error.message, position: payload.position } };
      }
      throw error;
    }
  }

  snapshot(id: string, sort = 'risk', limit = 50): Promise<Snapshot> {
    return this.request(`/sessions/${id}/snapshot?sort=${sort}&limit=${limit}`);
  }
}
