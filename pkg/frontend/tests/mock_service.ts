/** In-memory stand-in for the annotation service, speaking its wire format. */

export interface MockSentence {
  id: string;
  tokens: string[];
  suggestions?: number[];
}

export interface MockOptions {
  mode?: "assisted" | "blind";
  retrainBatch?: number;
  /** Force the next submit to fail with a network error. */
  failNextSubmit?: boolean;
}

export class MockService {
  queue: MockSentence[];
  mode: "assisted" | "blind";
  retrainBatch: number;
  labeledCount = 0;
  sinceLastRetrain = 0;
  retrainCount = 0;
  failNextSubmit: boolean;
  submissions: { sentenceId: string; labels: number[] }[] = [];
  private tokens = new Map<string, string>();
  private serial = 0;

  constructor(sentences: MockSentence[], options: MockOptions = {}) {
    this.queue = [...sentences];
    this.mode = options.mode ?? "assisted";
    this.retrainBatch = options.retrainBatch ?? 50;
    this.failNextSubmit = options.failNextSubmit ?? false;
  }

  /** A fetch-compatible function; install with vi.stubGlobal("fetch", ...). */
  fetch = async (url: string, init?: RequestInit): Promise<Response> => {
    const path = new URL(url, "http://mock").pathname;
    if (path.endsWith("/next")) return json(this.next());
    if (path.endsWith("/status")) return json(this.status());
    if (path.endsWith("/submit")) {
      if (this.failNextSubmit) {
        this.failNextSubmit = false;
        throw new TypeError("NetworkError: connection refused");
      }
      const body = JSON.parse(String(init?.body));
      return this.submit(body.task_token, body.labels);
    }
    return json({ error: "not_found", message: `no route ${path}` }, 404);
  };

  private next(): object {
    const head = this.queue[0];
    if (!head) return { complete: true };
    const token = `tok-${this.serial++}`;
    this.tokens.set(token, head.id);
    const task: Record<string, unknown> = {
      task_token: token,
      sentence_id: head.id,
      tokens: head.tokens,
      flagged: false,
    };
    if (this.mode === "assisted" && head.suggestions) {
      task.suggestions = head.suggestions;
    }
    return task;
  }

  private submit(token: string, labels: number[]): Response {
    const sentenceId = this.tokens.get(token);
    const head = this.queue[0];
    if (!sentenceId || !head || head.id !== sentenceId) {
      return json({ error: "bad_token", message: "unknown task token" }, 400);
    }
    if (labels.length !== head.tokens.length) {
      return json({ error: "bad_labels", message: "length mismatch" }, 400);
    }
    this.tokens.delete(token);
    this.queue.shift();
    this.submissions.push({ sentenceId, labels });
    this.labeledCount += 1;
    this.sinceLastRetrain += 1;
    if (this.sinceLastRetrain >= this.retrainBatch) {
      this.sinceLastRetrain = 0;
      this.retrainCount += 1;
      return json({ status: "retrain_started" });
    }
    return json({ status: "committed" });
  }

  private status(): object {
    return {
      session_id: "mock",
      mode: this.mode,
      labeled_count: this.labeledCount,
      queue_size: this.queue.length,
      since_last_retrain: this.sinceLastRetrain,
      retrain_batch: this.retrainBatch,
      retrain_count: this.retrainCount,
      retrain_running: false,
      reviewers_required: 1,
    };
  }
}

function json(body: object, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export function sentences(n: number, length = 4): MockSentence[] {
  return Array.from({ length: n }, (_, i) => ({
    id: `s${i}`,
    tokens: Array.from({ length }, (_, j) => `w${i}-${j}`),
  }));
}
