/**
 * Minimal browser shell for the review workflow.
 *
 * Configuration comes from the query string: ?endpoint=URL&token=TOKEN
 * &worker=ID&duration=SECONDS. All state transitions live in ReviewSession;
 * this file only wires DOM controls to it.
 */
import { AuditApiClient, FetchTransport } from "./api";
import { ReviewSession } from "./review";
import { ERROR_KINDS, ErrorKind, Task } from "./schemas";

const HELP_TEXT: Record<ErrorKind, string> = {
  multiple_occurrences: "The event happens more than once; the span is ambiguous.",
  no_occurrence: "The described event never happens in the video.",
  duplicate_query: "Another query of this video describes the same event.",
  unclear_query: "The query is vague or ambiguous (e.g. 'the game continues').",
  inaccurate_segment: "Span boundaries include or cut off parts of the event.",
  info_leakage: "The query reveals its temporal position (e.g. 'ending credits').",
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = ""
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text) node.textContent = text;
  return node;
}

function render(root: HTMLElement, session: ReviewSession, video: HTMLVideoElement): void {
  root.replaceChildren();
  const task = session.state.task;
  const progress = el("p", {}, `done ${session.state.queue.done} / fetched ${session.state.queue.fetched}`);
  root.append(progress);
  if (task === null) {
    root.append(el("p", {}, "Queue drained."));
    return;
  }
  root.append(el("h3", {}, `Task ${task.task_id}`));
  if (task.video_group.length > 0) {
    // same-video queries shown together to surface duplicates
    const group = el("div", { class: "video-group" });
    group.append(el("strong", {}, "Other queries of this video:"));
    for (const annId of task.video_group) group.append(el("div", {}, annId));
    root.append(group);
  }

  const checklist = el("fieldset");
  checklist.append(el("legend", {}, "Error categories"));
  for (const kind of ERROR_KINDS) {
    const label = el("label", { title: HELP_TEXT[kind] });
    const box = el("input", { type: "checkbox" });
    box.addEventListener("change", () => {
      session.toggleKind(kind);
      submit.disabled = !session.canSubmit();
    });
    label.append(box, el("span", {}, kind));
    checklist.append(label);
  }
  root.append(checklist);

  const query = el("textarea", { placeholder: "rewritten query (leave empty to keep)" });
  query.addEventListener("input", () => {
    session.setQueryDraft(query.value);
    submit.disabled = !session.canSubmit();
  });
  root.append(query);

  const markIn = el("button", {}, "set IN at playhead");
  const markOut = el("button", {}, "set OUT at playhead");
  markIn.addEventListener("click", () => {
    session.state.timeline?.setIn(video.currentTime);
    session.markSpanEdited();
    submit.disabled = !session.canSubmit();
  });
  markOut.addEventListener("click", () => {
    session.state.timeline?.setOut(video.currentTime);
    session.markSpanEdited();
    submit.disabled = !session.canSubmit();
  });
  const discard = el("button", {}, "discard record");
  discard.addEventListener("click", () => {
    session.setDiscarded(true);
    submit.disabled = !session.canSubmit();
  });
  root.append(markIn, markOut, discard);

  const submit = el("button", {}, "submit review");
  submit.disabled = !session.canSubmit();
  submit.addEventListener("click", async () => {
    try {
      await session.submitReview();
      await session.loadNext("review");
    } catch {
      // rollback already applied; surface the error
    }
    render(root, session, video);
    if (session.state.lastError) {
      root.prepend(el("p", { class: "error" }, session.state.lastError));
    }
  });
  root.append(submit);

  // keyboard nudging on the 0.1 s grid
  document.onkeydown = (event) => {
    if (event.key === "[") session.state.timeline?.nudgeIn(event.shiftKey ? 10 : 1);
    if (event.key === "]") session.state.timeline?.nudgeOut(event.shiftKey ? 10 : 1);
  };
}

export async function start(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const endpoint = params.get("endpoint") ?? "http://127.0.0.1:8000";
  const token = params.get("token") ?? "";
  const worker = params.get("worker") ?? "annotator";
  const fallbackDuration = Number(params.get("duration") ?? "60");

  const video = document.querySelector("video") ?? document.body.appendChild(el("video"));
  const root = document.getElementById("app") ?? document.body.appendChild(el("div", { id: "app" }));

  const client = new AuditApiClient(new FetchTransport(endpoint), token);
  const session = new ReviewSession(
    client,
    (_task: Task) => (video.duration > 0 ? video.duration : fallbackDuration),
    worker
  );
  await session.loadNext("review");
  render(root, session, video as HTMLVideoElement);
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  void start();
}
