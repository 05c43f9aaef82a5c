/** Typed client for the orchestrator HTTP API.
 *
 * The console mutates server state through exactly three endpoints: goal
 * submission, feedback and branch choice; everything else is a read.
 * Failures surface as typed errors and never throw raw fetch rejections
 * at the caller.
 */

import type {
  EventRecord,
  RegistryEntry,
  RunSnapshot,
} from './types.js';

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
    this.name = new.target.name;
  }
}

export class NotFoundError extends ApiError {}

export class ConflictError extends ApiError {}

export class RequestRejectedError extends ApiError {}

export class ServerUnreachableError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'ServerUnreachableError';
  }
}

export class ValidationError extends Error {
  constructor(message: string) {
    super(message);
    this.name = 'ValidationError';
  }
}

export type Critique = [stepId: string, comment: string];

async function parseDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: string };
    return body.detail ?? response.statusText;
  } catch {
    return response.statusText;
  }
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await fetch(`${this.baseUrl}${path}`, init);
    } catch (error) {
      throw new ServerUnreachableError(
        `cannot reach ${this.baseUrl}: ${String(error)}`,
      );
    }
    if (response.status === 404) {
      throw new NotFoundError(await parseDetail(response), 404);
    }
    if (response.status === 409) {
      throw new ConflictError(await parseDetail(response), 409);
    }
    if (!response.ok) {
      throw new RequestRejectedError(
        await parseDetail(response),
        response.status,
      );
    }
    return response;
  }

  private post(path: string, body: unknown): Promise<Response> {
    return this.request(path, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    });
  }

  async submitGoal(
    goalText: string,
    seed = 0,
  ): Promise<{ runId: string; status: string }> {
    if (!goalText.trim()) {
      throw new ValidationError('goal text must be non-empty');
    }
    const response = await this.post('/goals', {
      goal_text: goalText,
      seed,
    });
    const body = (await response.json()) as {
      run_id: string;
      status: string;
    };
    return { runId: body.run_id, status: body.status };
  }

  async fetchRun(runId: string): Promise<RunSnapshot> {
    const response = await this.request(`/runs/${runId}`);
    return (await response.json()) as RunSnapshot;
  }

  async fetchEvents(
    runId: string,
    fromSeq = 0,
  ): Promise<{ events: EventRecord[]; headSeq: number }> {
    const response = await this.request(
      `/runs/${runId}/events?from=${fromSeq}`,
    );
    const body = (await response.json()) as {
      events: EventRecord[];
      head_seq: number;
    };
    return { events: body.events, headSeq: body.head_seq };
  }

  async postFeedback(
    runId: string,
    verdict: 'approve' | 'revise',
    critiques: Critique[] = [],
    suggestedSteps?: string[],
  ): Promise<{ status: string }> {
    // Mirror of the server invariant, enforced before any network call.
    if (verdict === 'revise' && critiques.length === 0) {
      throw new ValidationError('a revise verdict needs critiques');
    }
    const response = await this.post(`/runs/${runId}/feedback`, {
      verdict,
      critiques,
      suggested_steps: suggestedSteps ?? null,
    });
    return (await response.json()) as { status: string };
  }

  async postChoice(
    runId: string,
    nodeId: string,
    optionId: string,
  ): Promise<{ status: string }> {
    const response = await this.post(`/runs/${runId}/choice`, {
      node_id: nodeId,
      option_id: optionId,
    });
    return (await response.json()) as { status: string };
  }

  async fetchRegistry(): Promise<RegistryEntry[]> {
    const response = await this.request('/registry');
    const body = (await response.json()) as { entries: RegistryEntry[] };
    return body.entries;
  }

  async health(): Promise<Record<string, unknown>> {
    const response = await this.request('/health');
    return (await response.json()) as Record<string, unknown>;
  }
}
