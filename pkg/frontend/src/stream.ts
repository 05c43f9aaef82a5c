/** Live event delivery: NDJSON stream with a polling fallback.
 *
 * The server's stream endpoint emits one JSON event per line and closes
 * when the run reaches a terminal state. When streaming is unavailable
 * (proxy buffering, older servers), the watcher polls the incremental
 * events endpoint with the same cursor semantics, so consumers see an
 * identical ordered feed either way.
 */

import { ApiClient } from './api.js';
import type { EventRecord } from './types.js';

export interface WatchOptions {
  fromSeq?: number;
  pollIntervalMs?: number;
  /** Force polling; used when the environment lacks streaming bodies. */
  disableStream?: boolean;
}

export interface RunWatcher {
  /** Resolves when the run reaches a terminal or suspended state. */
  done: Promise<void>;
  stop(): void;
}

const TERMINAL = new Set(['complete', 'failed', 'aborted']);

export async function readNdjsonStream(
  baseUrl: string,
  runId: string,
  fromSeq: number,
  onEvent: (event: EventRecord) => void,
  signal?: AbortSignal,
): Promise<void> {
  const response = await fetch(
    `${baseUrl}/runs/${runId}/stream?from=${fromSeq}`,
    { signal },
  );
  if (!response.ok || !response.body) {
    throw new Error(`stream unavailable: ${response.status}`);
  }
  const reader = response.body.getReader();
  const decoder = new TextDecoder();
  let buffer = '';
  for (;;) {
    const { done, value } = await reader.read();
    if (done) break;
    buffer += decoder.decode(value, { stream: true });
    let newline = buffer.indexOf('\n');
    while (newline >= 0) {
      const line = buffer.slice(0, newline).trim();
      buffer = buffer.slice(newline + 1);
      if (line) onEvent(JSON.parse(line) as EventRecord);
      newline = buffer.indexOf('\n');
    }
  }
  if (buffer.trim()) onEvent(JSON.parse(buffer) as EventRecord);
}

export function watchRun(
  client: ApiClient,
  runId: string,
  onEvent: (event: EventRecord) => void,
  options: WatchOptions = {},
): RunWatcher {
  const controller = new AbortController();
  let cursor = options.fromSeq ?? 0;
  const interval = options.pollIntervalMs ?? 250;
  let stopped = false;

  const deliver = (event: EventRecord) => {
    if (event.seq > cursor) {
      cursor = event.seq;
      onEvent(event);
    }
  };

  const poll = async (): Promise<void> => {
    for (;;) {
      if (stopped) return;
      const { events } = await client.fetchEvents(runId, cursor);
      events.forEach(deliver);
      const snapshot = await client.fetchRun(runId);
      if (TERMINAL.has(snapshot.status) ||
          snapshot.status === 'awaiting_human') {
        // One final sweep so nothing between fetch and snapshot is lost.
        const tail = await client.fetchEvents(runId, cursor);
        tail.events.forEach(deliver);
        return;
      }
      await new Promise((resolve) => setTimeout(resolve, interval));
    }
  };

  const run = async (): Promise<void> => {
    if (!options.disableStream) {
      try {
        await readNdjsonStream(
          client.baseUrl, runId, cursor, deliver, controller.signal,
        );
        return;
      } catch {
        if (stopped) return;
        // fall through to polling
      }
    }
    await poll();
  };

  return {
    done: run(),
    stop: () => {
      stopped = true;
      controller.abort();
    },
  };
}
