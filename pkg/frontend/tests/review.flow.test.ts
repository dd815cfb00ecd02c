/**
 * Review and validation flows replayed against the recorded service
 * exchanges: the UI-built submissions must match what the live service
 * accepted, byte for byte on the wire.
 */
import { beforeEach, describe, expect, it } from "vitest";

import { AuditApiClient } from "../src/api";
import { ReviewSession } from "../src/review";
import type { Task } from "../src/schemas";
import { loadRecording, RejectingTransport, ReplayTransport } from "./helpers";

const DURATIONS: Record<string, number> = { v1: 30, v2: 60 };

function durationFor(task: Task): number {
  // recorded dataset: a10x -> v1 v1 v2
  return task.annotation_id === "a103" ? DURATIONS.v2! : DURATIONS.v1!;
}

function reviewExchangesOnly() {
  // start replay after the batch was created (seq 3 onward)
  return loadRecording().filter((e) => e.seq >= 3);
}

describe("review flow over recorded exchanges", () => {
  let transport: ReplayTransport;
  let session: ReviewSession;

  beforeEach(() => {
    transport = new ReplayTransport(reviewExchangesOnly());
    session = new ReviewSession(new AuditApiClient(transport, "tok-alice"), durationFor, "alice");
  });

  it("planted duplicate produces a duplicate_query submission with a correction", async () => {
    const recorded = loadRecording();

    // task 1: a101 is clean
    let task = await session.loadNext("review");
    expect(task?.annotation_id).toBe("a101");
    expect(session.canSubmit()).toBe(true); // no_error path
    await session.submitReview();

    // task 2: a102 duplicates a101; same-video queries are surfaced together
    task = await session.loadNext("review");
    expect(task?.annotation_id).toBe("a102");
    expect(task?.video_group).toContain("a101");

    session.toggleKind("duplicate_query");
    expect(session.canSubmit()).toBe(false); // error selected, correction missing
    session.setQueryDraft("person opens the door a second time before leaving");
    session.state.timeline!.setIn(12.0);
    session.state.timeline!.setOut(18.0);
    session.markSpanEdited();
    expect(session.canSubmit()).toBe(true);

    const request = session.buildReviewRequest();
    expect(request.diagnosis).toEqual(["duplicate_query"]);
    await session.submitReview();

    // the wire body must equal what the live service accepted
    const recordedBody = recorded.find(
      (e) => e.path === "/tasks/batch-0001:a102/review"
    )!.request_body;
    const sentBody = transport.sent.find((s) => s.path.endsWith("a102/review"))!.body;
    expect(sentBody).toEqual(recordedBody);

    // task 3: a103 clean, drain the queue
    task = await session.loadNext("review");
    expect(task?.annotation_id).toBe("a103");
    await session.submitReview();
    expect(await session.loadNext("review")).toBeNull();
    expect(session.state.queue.done).toBe(3);
  });

  it("no-error submissions match the recorded wire bodies", async () => {
    await session.loadNext("review");
    await session.submitReview();
    const recordedBody = loadRecording().find(
      (e) => e.path === "/tasks/batch-0001:a101/review"
    )!.request_body;
    expect(transport.sent.find((s) => s.path.endsWith("a101/review"))!.body).toEqual(recordedBody);
  });

  it("refuses to build a request when diagnosis is incomplete", async () => {
    await session.loadNext("review");
    session.toggleKind("inaccurate_segment");
    expect(session.canSubmit()).toBe(false);
    expect(() => session.buildReviewRequest()).toThrow(/diagnosis incomplete/);
  });
});

describe("validate flow over recorded exchanges", () => {
  it("submits verdicts for tasks reviewed by someone else", async () => {
    const transport = new ReplayTransport(loadRecording().filter((e) => e.seq >= 10));
    const session = new ReviewSession(new AuditApiClient(transport, "tok-bob"), durationFor, "bob");

    let validated = 0;
    while ((await session.loadNext("validate")) !== null) {
      expect(session.state.task!.reviewer_id).not.toBe("bob");
      await session.submitValidation("correct");
      validated += 1;
    }
    expect(validated).toBe(3);

    const recordedBody = loadRecording().find(
      (e) => e.path === "/tasks/batch-0001:a101/validate"
    )!.request_body;
    expect(transport.sent.find((s) => s.path.endsWith("a101/validate"))!.body).toEqual(recordedBody);
  });

  it("requires a reason for incorrect verdicts", async () => {
    const transport = new ReplayTransport(loadRecording().filter((e) => e.seq >= 10));
    const session = new ReviewSession(new AuditApiClient(transport, "tok-bob"), durationFor, "bob");
    await session.loadNext("validate");
    await expect(session.submitValidation("incorrect")).rejects.toThrow(/needs a reason/);
  });
});

describe("optimistic queue advance", () => {
  it("rolls back the view when the server rejects", async () => {
    const replay = new ReplayTransport(reviewExchangesOnly());
    const session = new ReviewSession(new AuditApiClient(replay, "tok-alice"), durationFor, "alice");
    const task = await session.loadNext("review");
    session.toggleKind("unclear_query");
    session.setQueryDraft("a person opens the front door");

    const rejecting = new ReviewSession(
      new AuditApiClient(new RejectingTransport(), "tok-alice"),
      durationFor,
      "alice"
    );
    rejecting.state.task = task;
    rejecting.state.timeline = session.state.timeline;
    rejecting.toggleKind("unclear_query");
    rejecting.setQueryDraft("a person opens the front door");

    await expect(rejecting.submitReview()).rejects.toThrow(/409/);
    expect(rejecting.state.task).toEqual(task); // rolled back
    expect(rejecting.state.queryDraft).toBe("a person opens the front door");
    expect(rejecting.state.queue.done).toBe(0);
    expect(rejecting.state.lastError).toMatch(/not under review/);
  });
});
