import { describe, expect, it, vi } from "vitest";

import { AlignmentReviewQueue, LineReviewQueue, MemoryDrafts } from "../src/queue.js";
import type { AlignmentEntry, LineRecord } from "../src/models.js";

function line(id: string, pred: string): LineRecord {
  return {
    id,
    page_id: "p",
    bbox: null,
    gt_text: null,
    pred_text: pred,
    status: "predicted",
    origin: "real",
    parent_id: null,
  };
}

function fakeLineApi(lines: LineRecord[], failures = 0) {
  const submitted: Array<{ id: string; text: string; requestId: string }> = [];
  let remainingFailures = failures;
  return {
    submitted,
    api: {
      listLines: async () => lines,
      submitTranscription: async (id: string, text: string, requestId: string) => {
        if (remainingFailures > 0) {
          remainingFailures -= 1;
          throw new Error("boom");
        }
        submitted.push({ id, text, requestId });
        return { ...lines.find((l) => l.id === id)!, gt_text: text, status: "corrected" };
      },
    } as any,
  };
}

describe("LineReviewQueue", () => {
  it("accepting the prediction submits it unchanged and advances", async () => {
    const { api, submitted } = fakeLineApi([line("a", "bona domna"), line("b", "jorn")]);
    const queue = new LineReviewQueue(api, new MemoryDrafts());
    await queue.load();
    expect(queue.textFor(queue.current()!)).toBe("bona domna");
    const result = await queue.submit(queue.textFor(queue.current()!));
    expect(result.ok).toBe(true);
    expect(submitted[0]).toMatchObject({ id: "a", text: "bona domna" });
    expect(queue.current()!.id).toBe("b");
  });

  it("normalizes submissions to NFC", async () => {
    const { api, submitted } = fakeLineApi([line("a", "")]);
    const queue = new LineReviewQueue(api, new MemoryDrafts());
    await queue.load();
    await queue.submit("jọrn"); // decomposed dot-below
    expect(submitted[0].text).toBe("jọrn");
  });

  it("keeps the draft and does not advance when the API fails", async () => {
    const { api, submitted } = fakeLineApi([line("a", "pred")], 1);
    const drafts = new MemoryDrafts();
    const queue = new LineReviewQueue(api, drafts);
    await queue.load();
    const failed = await queue.submit("edited text");
    expect(failed.ok).toBe(false);
    expect(queue.current()!.id).toBe("a"); // no advance
    expect(drafts.get("line:a")).toBe("edited text"); // work preserved
    const retried = await queue.submit("edited text");
    expect(retried.ok).toBe(true);
    expect(submitted).toHaveLength(1);
  });

  it("reuses the same request id across retries of one submission", async () => {
    const { api, submitted } = fakeLineApi([line("a", "x")], 1);
    const spy = vi.spyOn(api, "submitTranscription");
    const queue = new LineReviewQueue(api, new MemoryDrafts());
    await queue.load();
    await queue.submit("t");
    await queue.submit("t");
    expect(spy).toHaveBeenCalledTimes(2);
    expect(spy.mock.calls[0][2]).toBe(spy.mock.calls[1][2]);
    expect(submitted).toHaveLength(1);
  });

  it("requires explicit confirmation for an empty submission", async () => {
    const { api, submitted } = fakeLineApi([line("a", "noise")]);
    const queue = new LineReviewQueue(api, new MemoryDrafts());
    await queue.load();
    const first = await queue.submit("");
    expect(first.ok).toBe(false);
    expect(first.needsConfirmation).toBe(true);
    expect(submitted).toHaveLength(0);
    const confirmed = await queue.submit("", true);
    expect(confirmed.ok).toBe(true);
    expect(submitted[0].text).toBe("");
  });
});

function entry(id: string, candidates: Array<[string, number]>): AlignmentEntry {
  return {
    gloss_id: id,
    headword: id,
    gram: {},
    sub_entries: [],
    status: "pending",
    candidates: candidates.map(([lemma, score]) => ({ lemma, score })),
  };
}

function fakeAlignApi(entries: AlignmentEntry[], failures = 0) {
  const decisions: Array<{ glossId: string; body: any; requestId: string }> = [];
  let remainingFailures = failures;
  return {
    decisions,
    api: {
      listAlignments: async () => entries,
      submitDecision: async (glossId: string, body: any, requestId: string) => {
        if (remainingFailures > 0) {
          remainingFailures -= 1;
          throw new Error("busy");
        }
        decisions.push({ glossId, body, requestId });
        return { gloss_id: glossId, ...body };
      },
    } as any,
  };
}

describe("AlignmentReviewQueue", () => {
  it("accepting the top candidate posts it and removes the item", async () => {
    const { api, decisions } = fakeAlignApi([
      entry("g1", [["aver", 1.0], ["avars", 0.6]]),
      entry("g2", [["jorn", 0.9]]),
    ]);
    const queue = new AlignmentReviewQueue(api);
    await queue.load();
    const result = await queue.acceptTop();
    expect(result.ok).toBe(true);
    expect(decisions[0].body).toMatchObject({ accept: "aver" });
    expect(queue.items).toHaveLength(1);
    expect(queue.current()!.gloss_id).toBe("g2");
  });

  it("new lemma requires documentation", async () => {
    const { api, decisions } = fakeAlignApi([entry("g1", [])]);
    const queue = new AlignmentReviewQueue(api);
    await queue.load();
    const missing = await queue.createNew("novel", "  ");
    expect(missing.ok).toBe(false);
    expect(decisions).toHaveLength(0);
    const done = await queue.createNew("novel", "coined during review");
    expect(done.ok).toBe(true);
    expect(decisions[0].body.new).toMatchObject({ lemma: "novel" });
  });

  it("reject posts a reject decision", async () => {
    const { api, decisions } = fakeAlignApi([entry("g1", [["x", 0.6]])]);
    const queue = new AlignmentReviewQueue(api);
    await queue.load();
    await queue.reject();
    expect(decisions[0].body).toMatchObject({ reject: true });
  });

  it("failed decisions keep the item and reuse the request id", async () => {
    const { api, decisions } = fakeAlignApi([entry("g1", [["x", 0.8]])], 1);
    const spy = vi.spyOn(api, "submitDecision");
    const queue = new AlignmentReviewQueue(api);
    await queue.load();
    const failed = await queue.acceptTop();
    expect(failed.ok).toBe(false);
    expect(queue.items).toHaveLength(1);
    await queue.acceptTop();
    expect(spy.mock.calls[0][2]).toBe(spy.mock.calls[1][2]);
    expect(decisions).toHaveLength(1);
  });
});
