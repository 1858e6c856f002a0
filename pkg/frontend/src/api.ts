/** Typed client for the annotation service HTTP/JSON API. */

export interface SentenceTask {
  task_token: string;
  sentence_id: string;
  tokens: string[];
  flagged: boolean;
  /** Per-token trigger probabilities; absent in blind mode and cold start. */
  suggestions?: number[];
}

export interface CompleteSignal {
  complete: true;
}

export type NextResponse = SentenceTask | CompleteSignal;

export interface SubmitOutcome {
  status: "committed" | "awaiting_consensus" | "retrain_started";
  requeued?: boolean;
}

export interface SessionStatus {
  session_id: string;
  mode: "assisted" | "blind";
  labeled_count: number;
  queue_size: number;
  since_last_retrain: number;
  retrain_batch: number;
  retrain_count: number;
  retrain_running: boolean;
  reviewers_required: number;
}

/** Error envelope the service returns with 4xx/5xx responses. */
export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export function isComplete(response: NextResponse): response is CompleteSignal {
  return (response as CompleteSignal).complete === true;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly sessionId: string,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, init);
    const body = await response.json();
    if (!response.ok) {
      throw new ApiError(
        body.error ?? "unknown",
        body.message ?? response.statusText,
        response.status,
      );
    }
    return body as T;
  }

  nextTask(): Promise<NextResponse> {
    return this.request(`/sessions/${this.sessionId}/next`);
  }

  submit(taskToken: string, labels: number[], reviewer = "r1"): Promise<SubmitOutcome> {
    return this.request(`/sessions/${this.sessionId}/submit`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ task_token: taskToken, labels, reviewer }),
    });
  }

  status(): Promise<SessionStatus> {
    return this.request(`/sessions/${this.sessionId}/status`);
  }

  exportUrl(): string {
    return `${this.baseUrl}/sessions/${this.sessionId}/export`;
  }
}
