/** Console wiring: goal form, live run view, pending-action handlers.
 *
 * The server is the only source of truth; after every acknowledged
 * mutation and every event batch the run snapshot is refetched and the
 * view re-rendered from scratch.
 */

import {
  ApiClient,
  ConflictError,
  NotFoundError,
  RequestRejectedError,
  ServerUnreachableError,
  ValidationError,
} from './api.js';
import { watchRun, type RunWatcher } from './stream.js';
import { deriveRunView, type EventRecord } from './types.js';
import { renderBanner, renderRunView } from './view.js';

export interface ConsoleApp {
  submit(goalText: string, seed?: number): Promise<void>;
  refresh(): Promise<void>;
  stop(): void;
  readonly runId: string | null;
}

export function mountConsole(
  doc: Document,
  container: HTMLElement,
  client: ApiClient,
  options: { pollIntervalMs?: number; disableStream?: boolean } = {},
): ConsoleApp {
  let runId: string | null = null;
  let events: EventRecord[] = [];
  let watcher: RunWatcher | null = null;
  let banner: { kind: 'error' | 'info'; message: string } | null = null;

  const viewSlot = doc.createElement('div');
  viewSlot.className = 'view-slot';
  container.appendChild(viewSlot);

  function showBanner(kind: 'error' | 'info', message: string): void {
    banner = { kind, message };
    void render();
  }

  async function act(action: () => Promise<unknown>): Promise<void> {
    try {
      await action();
      banner = null;
      if (runId !== null) watch(false);
    } catch (error) {
      if (error instanceof ValidationError) {
        showBanner('error', `invalid input: ${error.message}`);
        return;
      }
      if (error instanceof ConflictError) {
        showBanner('error', `out of date: ${error.message}`);
      } else if (error instanceof NotFoundError) {
        showBanner('error', `not found: ${error.message}`);
      } else if (error instanceof RequestRejectedError) {
        showBanner('error', `rejected: ${error.message}`);
      } else if (error instanceof ServerUnreachableError) {
        showBanner('error', `server unreachable: ${error.message}`);
        return;
      } else {
        throw error;
      }
    }
    await render();
  }

  async function render(): Promise<void> {
    viewSlot.textContent = '';
    if (banner) {
      viewSlot.appendChild(renderBanner(doc, banner.kind, banner.message));
    }
    if (runId === null) return;
    let snapshot;
    try {
      snapshot = await client.fetchRun(runId);
    } catch (error) {
      if (error instanceof NotFoundError) {
        viewSlot.appendChild(
          renderBanner(doc, 'error', `unknown run: ${runId}`),
        );
        return;
      }
      if (error instanceof ServerUnreachableError) {
        viewSlot.appendChild(
          renderBanner(doc, 'error', 'server unreachable'),
        );
        return;
      }
      throw error;
    }
    const view = deriveRunView(snapshot, events);
    viewSlot.appendChild(
      renderRunView(doc, view, {
        onApprove: () =>
          void act(() => client.postFeedback(runId!, 'approve')),
        onRevise: (critique) =>
          void act(() => {
            const parts = critique.split('=');
            const critiques: [string, string][] =
              critique.trim() === ''
                ? []
                : [[parts[0].trim(), parts.slice(1).join('=').trim()]];
            return client.postFeedback(runId!, 'revise', critiques);
          }),
        onChoose: (nodeId, optionId) =>
          void act(() => client.postChoice(runId!, nodeId, optionId)),
      }),
    );
  }

  function watch(reset: boolean): void {
    watcher?.stop();
    if (reset) events = [];
    const fromSeq = events.length > 0 ? events[events.length - 1].seq : 0;
    watcher = watchRun(
      client,
      runId!,
      (event) => {
        events.push(event);
        void render();
      },
      {
        fromSeq,
        pollIntervalMs: options.pollIntervalMs,
        disableStream: options.disableStream,
      },
    );
    void watcher.done.then(() => render(), () => render());
  }

  return {
    get runId() {
      return runId;
    },
    async submit(goalText: string, seed = 0): Promise<void> {
      await act(async () => {
        const submitted = await client.submitGoal(goalText, seed);
        runId = submitted.runId;
        watch();
      });
    },
    async refresh(): Promise<void> {
      await render();
    },
    stop(): void {
      watcher?.stop();
    },
  };
}

/** Browser entry point: reads the server URL from the query string. */
export function bootstrap(doc: Document): ConsoleApp | null {
  const container = doc.getElementById('app');
  if (!container) return null;
  const params = new URLSearchParams(doc.location?.search ?? '');
  const base = params.get('server') ?? 'http://127.0.0.1:8000';
  const client = new ApiClient(base);
  const app = mountConsole(doc, container, client);

  const form = doc.getElementById('goal-form');
  form?.addEventListener('submit', (event) => {
    event.preventDefault();
    const input = doc.getElementById('goal-text') as HTMLInputElement | null;
    if (input) void app.submit(input.value);
  });
  return app;
}
