// Entry point: two tabs, one per human loop.

import { WorkbenchApi } from "./api.js";
import { AlignmentReviewView, LineReviewView } from "./views.js";

function activate(tab: "lines" | "alignments"): void {
  const api = new WorkbenchApi("");
  const panel = document.getElementById("panel")!;
  panel.replaceChildren();
  document.querySelectorAll("nav button").forEach((b) => b.classList.remove("active"));
  document.getElementById(`tab-${tab}`)!.classList.add("active");
  if (tab === "lines") {
    void new LineReviewView(panel, api).start();
  } else {
    void new AlignmentReviewView(panel, api).start();
  }
}

export function boot(): void {
  document.getElementById("tab-lines")!.addEventListener("click", () => activate("lines"));
  document
    .getElementById("tab-alignments")!
    .addEventListener("click", () => activate("alignments"));
  activate("lines");
}

if (typeof document !== "undefined" && document.getElementById("panel")) {
  boot();
}
