// Wire types for the annotation service JSON API. The server is authoritative:
// the UI renders exactly the item it is sent and never sees generator
// provenance (model, strategy, or the prompted level).

export interface Progress {
  completed: number;
  total: number;
}

export interface ItemView {
  status: "item";
  question_id: string;
  topic: string;
  display_text: string;
  current_item: string;
  options: string[];
  text_required_if: string | null;
  progress: Progress;
}

export interface AllDoneView {
  status: "all_done";
  progress: Progress;
}

export interface SessionCompleteView {
  status: "session_complete";
  progress: Progress;
}

export type NextView = ItemView | AllDoneView;
export type SubmitView = ItemView | SessionCompleteView;

export interface SubmitPayload {
  question_id: string;
  item: string;
  response: string;
  rephrase_text?: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }

  get outOfOrder(): boolean {
    return this.status === 409;
  }
}
