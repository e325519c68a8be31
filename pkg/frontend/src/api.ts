// Thin client over the workbench JSON API.
//
// Every mutating call carries a request_id; retrying a failed submission
// reuses the same id, so the server can deduplicate double submissions
// (e.g. Enter pressed twice around a network hiccup).

import type { AlignmentEntry, DecisionBody, DecisionRecord, LineRecord } from "./models.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

let counter = 0;

export function freshRequestId(): string {
  counter += 1;
  return `ui-${Date.now().toString(36)}-${counter.toString(36)}-${Math.random()
    .toString(36)
    .slice(2, 8)}`;
}

async function parseOrThrow(response: Response): Promise<any> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      detail = body.detail ?? JSON.stringify(body);
    } catch {
      // non-JSON error body: keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return response.json();
}

export class WorkbenchApi {
  constructor(
    private base: string = "",
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async get(path: string): Promise<any> {
    const response = await this.fetchFn(`${this.base}${path}`);
    return parseOrThrow(response);
  }

  private async post(path: string, body: unknown): Promise<any> {
    const response = await this.fetchFn(`${this.base}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return parseOrThrow(response);
  }

  listLines(status?: string): Promise<LineRecord[]> {
    const query = status ? `?status=${encodeURIComponent(status)}` : "";
    return this.get(`/api/lines${query}`);
  }

  lineImageUrl(id: string): string {
    return `${this.base}/api/lines/${encodeURIComponent(id)}/image`;
  }

  /**
   * Submit a corrected transcription.  The text is NFC-normalized here,
   * client-side, so the store never sees decomposed input.
   */
  submitTranscription(
    id: string,
    text: string,
    requestId: string,
  ): Promise<LineRecord> {
    return this.post(`/api/lines/${encodeURIComponent(id)}/transcription`, {
      text: text.normalize("NFC"),
      request_id: requestId,
    });
  }

  listAlignments(status?: "pending" | "resolved"): Promise<AlignmentEntry[]> {
    const query = status ? `?status=${status}` : "";
    return this.get(`/api/alignments${query}`);
  }

  submitDecision(
    glossId: string,
    body: DecisionBody,
    requestId: string,
  ): Promise<DecisionRecord> {
    return this.post(`/api/alignments/${encodeURIComponent(glossId)}/decision`, {
      ...body,
      request_id: requestId,
    });
  }
}
