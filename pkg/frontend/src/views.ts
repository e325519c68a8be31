// DOM layer: renders the two review surfaces and wires the keyboard flow.
// Enter = accept/next (the throughput path); everything else is clicks.

import { WorkbenchApi } from "./api.js";
import { AlignmentReviewQueue, LineReviewQueue, MemoryDrafts } from "./queue.js";
import type { DraftStore } from "./queue.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

function banner(root: HTMLElement, text: string, kind: "error" | "info"): void {
  const existing = root.querySelector(".banner");
  existing?.remove();
  if (!text) return;
  root.prepend(el("div", { class: `banner ${kind}` }, text));
}

export class LineReviewView {
  private queue: LineReviewQueue;
  private empty_pending = false;

  constructor(
    private root: HTMLElement,
    private api: WorkbenchApi,
    queue?: LineReviewQueue,
  ) {
    this.queue = queue ?? new LineReviewQueue(api, localDrafts());
  }

  async start(): Promise<void> {
    await this.queue.load();
    this.render();
  }

  private render(): void {
    this.root.replaceChildren();
    const line = this.queue.current();
    if (!line) {
      this.root.append(el("p", { class: "done" }, "No lines waiting for correction."));
      return;
    }
    const image = el("img", {
      class: "line-image",
      src: this.api.lineImageUrl(line.id),
      alt: `line ${line.id}`,
    });
    const input = el("input", {
      class: "line-text",
      type: "text",
      spellcheck: "false",
      value: "",
    });
    input.value = this.queue.textFor(line);
    input.addEventListener("input", () => {
      this.queue.saveDraft(line, input.value);
      this.empty_pending = false;
    });
    input.addEventListener("keydown", (event) => {
      if (event.key === "Enter") {
        event.preventDefault();
        void this.submit(input.value);
      }
    });
    const submit = el("button", { class: "primary" }, "Accept (Enter)");
    submit.addEventListener("click", () => void this.submit(input.value));
    const skip = el("button", {}, "Skip");
    skip.addEventListener("click", () => {
      this.queue.skip();
      this.render();
    });
    this.root.append(
      el("div", { class: "counter" }, `${this.queue.remaining()} lines left`),
      el("div", { class: "line-card" }, image, input),
      el("div", { class: "actions" }, submit, skip),
    );
    input.focus();
  }

  private async submit(text: string): Promise<void> {
    const result = await this.queue.submit(text, this.empty_pending);
    if (result.ok) {
      this.empty_pending = false;
      this.render();
      return;
    }
    if (result.needsConfirmation) {
      this.empty_pending = true; // next Enter confirms the blank line
      banner(this.root, "Submit an empty transcription? Press Enter again to confirm.", "info");
      return;
    }
    banner(this.root, `Submission failed (${result.error}); your text is kept locally.`, "error");
  }
}

export class AlignmentReviewView {
  private queue: AlignmentReviewQueue;

  constructor(private root: HTMLElement, api: WorkbenchApi, queue?: AlignmentReviewQueue) {
    this.queue = queue ?? new AlignmentReviewQueue(api);
  }

  async start(): Promise<void> {
    await this.queue.load();
    this.render();
  }

  private render(): void {
    this.root.replaceChildren();
    const entry = this.queue.current();
    if (!entry) {
      this.root.append(el("p", { class: "done" }, "No alignments waiting for review."));
      return;
    }
    const gram = Object.entries(entry.gram)
      .map(([k, v]) => `${k}: ${v}`)
      .join(", ");
    const head = el(
      "div",
      { class: "gloss-head" },
      el("span", { class: "headword" }, entry.headword),
      el("span", { class: "gram" }, gram || "no grammatical description"),
      el("span", { class: "gloss-id" }, entry.gloss_id),
    );
    const subs = el(
      "ul",
      { class: "sub-entries" },
      ...entry.sub_entries.map((s) =>
        el("li", {}, `${s.form} (${Object.values(s.gram).join(" ") || "—"})`),
      ),
    );
    const candidates = el("ol", { class: "candidates" });
    entry.candidates.forEach((candidate, index) => {
      const button = el(
        "button",
        { class: index === 0 ? "primary" : "" },
        `${candidate.lemma}  (${candidate.score.toFixed(2)})`,
      );
      button.addEventListener("click", () => void this.act(this.queue.accept(candidate.lemma)));
      candidates.append(el("li", {}, button));
    });
    const reject = el("button", {}, "Reject all");
    reject.addEventListener("click", () => void this.act(this.queue.reject()));

    const lemmaInput = el("input", { type: "text", placeholder: "new lemma" });
    const docInput = el("input", {
      type: "text",
      placeholder: "documentation (required)",
      class: "doc-field",
    });
    const create = el("button", {}, "Create new lemma");
    create.addEventListener("click", () =>
      void this.act(this.queue.createNew(lemmaInput.value, docInput.value)),
    );

    this.root.append(
      el("div", { class: "counter" }, `${this.queue.remaining()} entries left`),
      head,
      subs,
      el("h3", {}, "Candidates"),
      candidates,
      el("div", { class: "actions" }, reject),
      el("div", { class: "new-lemma" }, lemmaInput, docInput, create),
    );

    this.root.onkeydown = (event) => {
      if (event.key === "Enter" && event.target !== lemmaInput && event.target !== docInput) {
        event.preventDefault();
        void this.act(this.queue.acceptTop());
      }
    };
  }

  private async act(pending: Promise<{ ok: boolean; error?: string }>): Promise<void> {
    const result = await pending;
    if (result.ok) {
      this.render();
    } else {
      banner(this.root, result.error ?? "action failed", "error");
    }
  }
}

function localDrafts(): DraftStore {
  try {
    const probe = "__scriptorium_probe__";
    localStorage.setItem(probe, "1");
    localStorage.removeItem(probe);
    return {
      get: (key: string) => localStorage.getItem(key),
      set: (key: string, value: string) => localStorage.setItem(key, value),
      remove: (key: string) => localStorage.removeItem(key),
    };
  } catch {
    return new MemoryDrafts();
  }
}
