/** DOM rendering and event wiring.
 *
 * `render` is a pure state -> markup function; `mount` attaches it to a
 * root element and routes clicks and keyboard input to the store.  Both
 * input paths call the same store methods, so they cannot diverge.
 */

import { AnnotationStore, SUGGESTION_THRESHOLD, ViewState } from "./state.js";

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function tokenSpan(state: ViewState, index: number): string {
  const task = state.task!;
  const classes = ["token"];
  if (state.working[index]) classes.push("selected");
  if (index === state.cursor) classes.push("cursor");
  // Suggestion styling exists only when the wire payload carries
  // suggestions; blind sessions therefore never render any of it.
  const suggested =
    task.suggestions !== undefined &&
    task.suggestions[index] >= SUGGESTION_THRESHOLD;
  if (suggested) classes.push("suggested");
  return (
    `<span class="${classes.join(" ")}" data-index="${index}">` +
    `${escapeHtml(task.tokens[index])}</span>`
  );
}

export function render(state: ViewState): string {
  const counters =
    `<div class="counters">labeled <strong>${state.labeledCount}</strong>` +
    (state.untilRetrain !== null
      ? ` &middot; ${state.untilRetrain} until next retrain`
      : "") +
    `</div>`;
  const banner = state.retrainBanner
    ? `<div class="retrain-banner" role="status">model retraining on the ` +
      `labeled pool&hellip; you can keep annotating</div>`
    : "";
  const offline = !state.connected
    ? `<div class="error" role="alert">connection problem: ` +
      `${escapeHtml(state.submitError ?? "request failed")} ` +
      `<button data-action="retry">retry</button></div>`
    : "";

  if (state.phase === "complete") {
    return (
      `${counters}${banner}` +
      `<div class="complete"><p>All sentences are labeled.</p>` +
      `<a class="export" href="${state.exportUrl}" download>download JSONL export</a>` +
      `</div>`
    );
  }
  if (state.phase === "loading" || state.task === null) {
    return `${counters}${offline}<div class="loading">loading&hellip;</div>`;
  }

  const tokens = state.task.tokens
    .map((_, i) => tokenSpan(state, i))
    .join(" ");
  const flagged = state.task.flagged
    ? `<div class="flagged">flagged for re-review after a reviewer conflict</div>`
    : "";
  return (
    `${counters}${banner}${offline}${flagged}` +
    `<div class="sentence" data-sentence-id="${escapeHtml(state.task.sentence_id)}">${tokens}</div>` +
    `<div class="controls">` +
    `<button data-action="submit">submit</button>` +
    `<span class="hint">arrows move &middot; space toggles &middot; enter submits</span>` +
    `</div>`
  );
}

export function mount(root: HTMLElement, store: AnnotationStore): () => void {
  const unsubscribe = store.subscribe((state) => {
    root.innerHTML = render(state);
  });

  const onClick = (event: Event) => {
    const target = event.target as HTMLElement;
    const index = target.dataset.index;
    if (index !== undefined) {
      store.toggle(Number(index));
      return;
    }
    if (target.dataset.action === "submit") void store.submit();
    if (target.dataset.action === "retry") void store.submit();
  };

  const onKeydown = (event: KeyboardEvent) => {
    switch (event.key) {
      case "ArrowLeft":
        store.moveCursor(-1);
        break;
      case "ArrowRight":
        store.moveCursor(1);
        break;
      case " ":
        event.preventDefault();
        store.toggleAtCursor();
        break;
      case "Enter":
        void store.submit();
        break;
      default:
        return;
    }
  };

  root.addEventListener("click", onClick);
  root.ownerDocument.addEventListener("keydown", onKeydown);
  return () => {
    unsubscribe();
    root.removeEventListener("click", onClick);
    root.ownerDocument.removeEventListener("keydown", onKeydown);
  };
}
