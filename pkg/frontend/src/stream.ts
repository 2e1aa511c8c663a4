/** Long-lived NDJSON event stream with resume-on-reconnect.
 *
 * Delivery is at-least-once: on reconnect the stream is re-requested from the
 * last seen iteration and the view's seq-based dedup drops replays.
 */

import { NdjsonParser } from './ndjson.js';
import type { EventRecord } from './types.js';

export interface StreamOptions {
  baseUrl: string;
  sessionId: string;
  onRecord: (record: EventRecord) => void;
  onStatus?: (status: 'connecting' | 'open' | 'retrying' | 'ended' | 'error') => void;
  fetchImpl?: typeof fetch;
  retryDelayMs?: number;
  maxRetries?: number;
}

export class EventStream {
  private lastIter = 0;
  private stopped = false;
  private retries = 0;
  private readonly fetchImpl: typeof fetch;
  private readonly retryDelayMs: number;
  private readonly maxRetries: number;

  constructor(private readonly options: StreamOptions) {
    this.fetchImpl = options.fetchImpl ?? fetch.bind(globalThis);
    this.retryDelayMs = options.retryDelayMs ?? 1000;
    this.maxRetries = options.maxRetries ?? 20;
  }

  /** URL of the next connection attempt (resumes from the last seen iteration). */
  nextUrl(): string {
    const from = this.lastIter > 0 ? this.lastIter : 0;
    return `${this.options.baseUrl}/sessions/${this.options.sessionId}/events?from=${from}`;
  }

  stop(): void {
    this.stopped = true;
  }

  async run(): Promise<void> {
    while (!this.stopped) {
      this.options.onStatus?.(this.retries > 0 ? 'retrying' : 'connecting');
      let endedCleanly = false;
      try {
        const response = await this.fetchImpl(this.nextUrl());
        if (!response.ok || response.body === null) {
          throw new Error(`stream request failed: ${response.status}`);
        }
        this.options.onStatus?.('open');
        this.retries = 0;
        endedCleanly = await this.consume(response.body);
      } catch {
        endedCleanly = false;
      }
      if (this.stopped || endedCleanly) {
        this.options.onStatus?.('ended');
        return;
      }
      this.retries += 1;
      if (this.retries > this.maxRetries) {
        this.options.onStatus?.('error');
        return;
      }
      await sleep(this.retryDelayMs);
    }
  }

  /** Returns true when the server closed the stream after a terminal event. */
  private async consume(body: ReadableStream<Uint8Array>): Promise<boolean> {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    const parser = new NdjsonParser<EventRecord>();
    let sawTerminal = false;
    for (;;) {
      const { done, value } = await reader.read();
      const chunk = value ? decoder.decode(value, { stream: !done }) : '';
      const records = done ? [...parser.push(chunk), ...parser.flush()] : parser.push(chunk);
      for (const record of records) {
        if (typeof record.iter === 'number') {
          this.lastIter = Math.max(this.lastIter, record.iter);
        }
        if (record.event === 'completed' || record.event === 'stopped') {
          sawTerminal = true;
        }
        this.options.onRecord(record);
      }
      if (done) {
        return sawTerminal;
      }
      if (this.stopped) {
        await reader.cancel();
        return true;
      }
    }
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
