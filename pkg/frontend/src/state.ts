/** View state and transitions for the annotation screen.
 *
 * The store is the single owner of labels: the view renders from it and
 * every input path (click or keyboard) funnels through the same methods,
 * so both produce identical transitions by construction.
 */

import { ApiClient, SentenceTask, isComplete } from "./api.js";

export const SUGGESTION_THRESHOLD = 0.5;

export type Phase = "loading" | "task" | "complete";

export interface ViewState {
  phase: Phase;
  task: SentenceTask | null;
  /** Per-token working labels; length always equals the token count. */
  working: boolean[];
  /** Keyboard cursor over the displayed tokens. */
  cursor: number;
  labeledCount: number;
  untilRetrain: number | null;
  retrainBanner: boolean;
  connected: boolean;
  /** Non-null when the last submit failed and should be retried. */
  submitError: string | null;
  exportUrl: string;
}

type Listener = (state: ViewState) => void;

export class AnnotationStore {
  private state: ViewState;
  private listeners: Listener[] = [];

  constructor(private readonly api: ApiClient) {
    this.state = {
      phase: "loading",
      task: null,
      working: [],
      cursor: 0,
      labeledCount: 0,
      untilRetrain: null,
      retrainBanner: false,
      connected: true,
      submitError: null,
      exportUrl: api.exportUrl(),
    };
  }

  get current(): ViewState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    listener(this.state);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private update(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  /** Fetch the next task; initialize working labels from suggestions. */
  async loadNext(): Promise<ViewState> {
    this.update({ phase: "loading", submitError: null });
    try {
      const [response, status] = await Promise.all([
        this.api.nextTask(),
        this.api.status(),
      ]);
      const counters = {
        labeledCount: status.labeled_count,
        untilRetrain: status.retrain_batch - status.since_last_retrain,
        connected: true,
      };
      if (isComplete(response)) {
        this.update({ ...counters, phase: "complete", task: null, working: [] });
      } else {
        this.update({
          ...counters,
          phase: "task",
          task: response,
          working: initialLabels(response),
          cursor: 0,
        });
      }
    } catch (error) {
      this.update({ connected: false, submitError: describe(error) });
    }
    return this.state;
  }

  /** Flip one token's working label; out-of-range indices are ignored. */
  toggle(index: number): ViewState {
    if (this.state.phase !== "task") return this.state;
    if (index < 0 || index >= this.state.working.length) {
      console.warn(`toggle index ${index} out of range`);
      return this.state;
    }
    const working = [...this.state.working];
    working[index] = !working[index];
    this.update({ working });
    return this.state;
  }

  moveCursor(delta: number): ViewState {
    if (this.state.phase !== "task") return this.state;
    const last = this.state.working.length - 1;
    const cursor = Math.min(last, Math.max(0, this.state.cursor + delta));
    this.update({ cursor });
    return this.state;
  }

  toggleAtCursor(): ViewState {
    return this.toggle(this.state.cursor);
  }

  /** Post the working labels; on failure keep them editable for retry. */
  async submit(): Promise<ViewState> {
    const task = this.state.task;
    if (this.state.phase !== "task" || task === null) return this.state;
    const labels = this.state.working.map((on) => (on ? 1 : 0));
    try {
      const outcome = await this.api.submit(task.task_token, labels);
      this.update({
        retrainBanner: outcome.status === "retrain_started",
        connected: true,
        submitError: null,
      });
      await this.loadNext();
    } catch (error) {
      this.update({ connected: false, submitError: describe(error) });
    }
    return this.state;
  }
}

/** Suggested triggers (p >= threshold) pre-selected; otherwise all off. */
export function initialLabels(task: SentenceTask): boolean[] {
  if (task.suggestions) {
    return task.suggestions.map((p) => p >= SUGGESTION_THRESHOLD);
  }
  return task.tokens.map(() => false);
}

function describe(error: unknown): string {
  return error instanceof Error ? error.message : String(error);
}
