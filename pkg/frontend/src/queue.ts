// Review-queue state machines for both human loops.
//
// The queues own everything the keyboard flow needs: the current item,
// local draft text that survives a failed submission, and the stable
// request ids that make retries idempotent on the server.  All project
// mutations go through the API client, never anywhere else.

import { freshRequestId, WorkbenchApi } from "./api.js";
import type { AlignmentEntry, DecisionBody, LineRecord } from "./models.js";

export interface DraftStore {
  get(key: string): string | null;
  set(key: string, value: string): void;
  remove(key: string): void;
}

/** In-memory fallback used in tests and when localStorage is unavailable. */
export class MemoryDrafts implements DraftStore {
  private map = new Map<string, string>();
  get(key: string): string | null {
    return this.map.has(key) ? this.map.get(key)! : null;
  }
  set(key: string, value: string): void {
    this.map.set(key, value);
  }
  remove(key: string): void {
    this.map.delete(key);
  }
}

export interface SubmitResult {
  ok: boolean;
  /** empty text needs an explicit second confirmation */
  needsConfirmation?: boolean;
  error?: string;
}

export class LineReviewQueue {
  items: LineRecord[] = [];
  position = 0;
  /** request id per line, reused across retries of the same submission */
  private requestIds = new Map<string, string>();

  constructor(
    private api: WorkbenchApi,
    private drafts: DraftStore = new MemoryDrafts(),
  ) {}

  async load(status: string = "predicted"): Promise<number> {
    this.items = await this.api.listLines(status);
    this.position = 0;
    return this.items.length;
  }

  current(): LineRecord | null {
    return this.items[this.position] ?? null;
  }

  remaining(): number {
    return this.items.length - this.position;
  }

  /** Editable text for an item: local draft first, then the prediction. */
  textFor(line: LineRecord): string {
    return this.drafts.get(`line:${line.id}`) ?? line.pred_text ?? "";
  }

  saveDraft(line: LineRecord, text: string): void {
    this.drafts.set(`line:${line.id}`, text);
  }

  async submit(text: string, confirmEmpty = false): Promise<SubmitResult> {
    const line = this.current();
    if (!line) return { ok: false, error: "queue is empty" };
    const normalized = text.normalize("NFC");
    if (normalized.trim() === "" && !confirmEmpty) {
      return { ok: false, needsConfirmation: true };
    }
    const key = `line:${line.id}`;
    const requestId = this.requestIds.get(line.id) ?? freshRequestId();
    this.requestIds.set(line.id, requestId);
    try {
      const updated = await this.api.submitTranscription(line.id, normalized, requestId);
      this.items[this.position] = updated;
      this.drafts.remove(key);
      this.requestIds.delete(line.id);
      this.position += 1;
      return { ok: true };
    } catch (err) {
      // keep the operator's work: draft stays local, queue does not move
      this.drafts.set(key, text);
      return { ok: false, error: err instanceof Error ? err.message : String(err) };
    }
  }

  skip(): void {
    if (this.position < this.items.length) this.position += 1;
  }
}

export class AlignmentReviewQueue {
  items: AlignmentEntry[] = [];
  position = 0;
  private requestIds = new Map<string, string>();

  constructor(private api: WorkbenchApi) {}

  async load(): Promise<number> {
    this.items = await this.api.listAlignments("pending");
    this.position = 0;
    return this.items.length;
  }

  current(): AlignmentEntry | null {
    return this.items[this.position] ?? null;
  }

  remaining(): number {
    return this.items.length - this.position;
  }

  private async decide(glossId: string, body: DecisionBody): Promise<SubmitResult> {
    const requestId = this.requestIds.get(glossId) ?? freshRequestId();
    this.requestIds.set(glossId, requestId);
    try {
      await this.api.submitDecision(glossId, body, requestId);
      this.requestIds.delete(glossId);
      this.items.splice(this.position, 1); // resolved items leave the queue
      return { ok: true };
    } catch (err) {
      return { ok: false, error: err instanceof Error ? err.message : String(err) };
    }
  }

  async accept(lemma: string): Promise<SubmitResult> {
    const entry = this.current();
    if (!entry) return { ok: false, error: "queue is empty" };
    return this.decide(entry.gloss_id, { accept: lemma });
  }

  async acceptTop(): Promise<SubmitResult> {
    const entry = this.current();
    if (!entry) return { ok: false, error: "queue is empty" };
    if (!entry.candidates.length) {
      return { ok: false, error: "no candidates; create a new lemma instead" };
    }
    return this.decide(entry.gloss_id, { accept: entry.candidates[0].lemma });
  }

  async reject(): Promise<SubmitResult> {
    const entry = this.current();
    if (!entry) return { ok: false, error: "queue is empty" };
    return this.decide(entry.gloss_id, { reject: true });
  }

  async createNew(lemma: string, documentation: string): Promise<SubmitResult> {
    const entry = this.current();
    if (!entry) return { ok: false, error: "queue is empty" };
    if (!lemma.trim()) return { ok: false, error: "new lemma needs a form" };
    if (!documentation.trim()) {
      // undocumented project lemmas are not allowed into the lexicon
      return { ok: false, error: "new lemma needs documentation" };
    }
    return this.decide(entry.gloss_id, {
      new: { lemma: lemma.normalize("NFC"), documentation },
    });
  }

  skip(): void {
    if (this.position < this.items.length) this.position += 1;
  }
}
