// Wire types mirroring the workbench JSON API.

export type LineStatus = "unseen" | "predicted" | "corrected" | "validated";

export interface LineRecord {
  id: string;
  page_id: string;
  bbox: number[] | null;
  gt_text: string | null;
  pred_text: string | null;
  status: LineStatus;
  origin: "real" | "synthetic";
  parent_id: string | null;
}

export interface Candidate {
  lemma: string;
  score: number;
}

export interface SubEntry {
  id: string;
  form: string;
  gram: Record<string, string>;
}

export interface AlignmentEntry {
  gloss_id: string;
  headword: string;
  gram: Record<string, string>;
  sub_entries: SubEntry[];
  status: "pending" | "resolved";
  candidates: Candidate[];
  decision?: DecisionRecord;
}

export interface DecisionRecord {
  gloss_id: string;
  action: "accept" | "new" | "reject";
  lemma: string | null;
  documentation: string;
  reviewer: string;
  timestamp: number;
}

export type DecisionBody =
  | { accept: string }
  | { new: { lemma: string; documentation: string } }
  | { reject: true };
