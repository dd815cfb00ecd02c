/**
 * Diagnose-then-refine view state and submission flows.
 *
 * One active task per session. Submission is disabled until the diagnosis
 * is complete: either explicitly no-error, or at least one error kind plus
 * a correction (rewritten query, refined span, or discard). The queue
 * advances optimistically and rolls back if the server rejects.
 */
import { ApiError, AuditApiClient } from "./api";
import { Correction, ErrorKind, ReviewRequest, Task, ValidateRequest } from "./schemas";
import { TimelineSpan } from "./timeline";

export interface QueueProgress {
  done: number;
  fetched: number;
}

export interface ReviewViewState {
  task: Task | null;
  playbackPosition: number;
  timeline: TimelineSpan | null;
  selectedKinds: Set<ErrorKind>;
  queryDraft: string;
  discarded: boolean;
  spanEdited: boolean;
  queue: QueueProgress;
  batchStatus: string | null;
  lastError: string | null;
}

export class ReviewSession {
  readonly state: ReviewViewState = {
    task: null,
    playbackPosition: 0,
    timeline: null,
    selectedKinds: new Set<ErrorKind>(),
    queryDraft: "",
    discarded: false,
    spanEdited: false,
    queue: { done: 0, fetched: 0 },
    batchStatus: null,
    lastError: null,
  };

  constructor(
    private readonly client: AuditApiClient,
    private readonly videoDuration: (task: Task) => number,
    readonly workerId: string
  ) {}

  /** Fetch the next task for a phase; null when the queue is drained. */
  async loadNext(phase: "review" | "validate"): Promise<Task | null> {
    const task = await this.client.assignNext(phase);
    if (task !== null && phase === "validate" && task.reviewer_id === this.workerId) {
      // server already filters self-reviewed tasks; refuse to show one anyway
      throw new Error(`self-reviewed task ${task.task_id} offered for validation`);
    }
    this.state.task = task;
    this.state.playbackPosition = 0;
    this.state.selectedKinds = new Set();
    this.state.discarded = false;
    this.state.spanEdited = false;
    this.state.queryDraft = "";
    this.state.lastError = null;
    this.state.timeline = task === null ? null : new TimelineSpan(this.videoDuration(task));
    if (task !== null) {
      this.state.queue.fetched += 1;
    }
    return task;
  }

  seek(position: number): void {
    const duration = this.state.timeline?.duration ?? 0;
    this.state.playbackPosition = Math.min(Math.max(0, position), duration);
  }

  toggleKind(kind: ErrorKind): void {
    if (this.state.selectedKinds.has(kind)) {
      this.state.selectedKinds.delete(kind);
    } else {
      this.state.selectedKinds.add(kind);
    }
  }

  setQueryDraft(text: string): void {
    this.state.queryDraft = text;
  }

  markSpanEdited(): void {
    this.state.spanEdited = true;
  }

  setDiscarded(value: boolean): void {
    this.state.discarded = value;
  }

  private hasCorrection(): boolean {
    return this.state.discarded || this.state.queryDraft.trim() !== "" || this.state.spanEdited;
  }

  /** Mirrors the server rule: errors diagnosed -> a correction is required. */
  canSubmit(): boolean {
    if (this.state.task === null) return false;
    if (this.state.selectedKinds.size === 0) return true; // no_error path
    return this.hasCorrection();
  }

  buildReviewRequest(): ReviewRequest {
    if (!this.canSubmit()) {
      throw new Error("diagnosis incomplete: errors selected but no correction provided");
    }
    if (this.state.selectedKinds.size === 0) {
      return { diagnosis: "no_error", correction: null };
    }
    const correction: Correction = {
      new_query: this.state.queryDraft.trim() === "" ? null : this.state.queryDraft.trim(),
      new_span: this.state.spanEdited && this.state.timeline ? this.state.timeline.toSpan() : null,
      discarded: this.state.discarded,
    };
    return {
      diagnosis: [...this.state.selectedKinds].sort() as ErrorKind[],
      correction,
    };
  }

  /**
   * Submit the current review; advances the queue optimistically and rolls
   * the view back when the server rejects the submission.
   */
  async submitReview(): Promise<Task | null> {
    const task = this.state.task;
    if (task === null) {
      throw new Error("no task loaded");
    }
    const request = this.buildReviewRequest();
    const snapshot = this.snapshot();
    this.state.queue.done += 1; // optimistic advance
    this.state.task = null;
    try {
      return await this.client.submitReview(task.task_id, request);
    } catch (error) {
      this.restore(snapshot); // rollback, keep drafts for the annotator
      this.state.lastError = error instanceof ApiError ? error.detail : String(error);
      throw error;
    }
  }

  async submitValidation(verdict: "correct" | "incorrect", reason?: string): Promise<Task | null> {
    const task = this.state.task;
    if (task === null) {
      throw new Error("no task loaded");
    }
    if (verdict === "incorrect" && (reason === undefined || reason.trim() === "")) {
      throw new Error("an incorrect verdict needs a reason");
    }
    const request: ValidateRequest = { verdict, reason: reason ?? null };
    const snapshot = this.snapshot();
    this.state.queue.done += 1;
    this.state.task = null;
    try {
      return await this.client.submitValidation(task.task_id, request);
    } catch (error) {
      this.restore(snapshot);
      this.state.lastError = error instanceof ApiError ? error.detail : String(error);
      throw error;
    }
  }

  private snapshot() {
    return {
      task: this.state.task,
      timeline: this.state.timeline,
      selectedKinds: new Set(this.state.selectedKinds),
      queryDraft: this.state.queryDraft,
      discarded: this.state.discarded,
      spanEdited: this.state.spanEdited,
      done: this.state.queue.done,
    };
  }

  private restore(snap: ReturnType<ReviewSession["snapshot"]>) {
    this.state.task = snap.task;
    this.state.timeline = snap.timeline;
    this.state.selectedKinds = snap.selectedKinds;
    this.state.queryDraft = snap.queryDraft;
    this.state.discarded = snap.discarded;
    this.state.spanEdited = snap.spanEdited;
    this.state.queue.done = snap.done;
  }
}
