import { ApiError, NextView, SubmitPayload, SubmitView } from "./types.js";

async function parseOrThrow<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      detail = body.detail ?? body.error ?? detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class AnnotationApi {
  constructor(
    private readonly annotator: string,
    private readonly baseUrl: string = "",
  ) {}

  async next(): Promise<NextView> {
    const response = await fetch(
      `${this.baseUrl}/api/annotators/${encodeURIComponent(this.annotator)}/next`,
    );
    return parseOrThrow<NextView>(response);
  }

  async submit(payload: SubmitPayload): Promise<SubmitView> {
    const response = await fetch(
      `${this.baseUrl}/api/annotators/${encodeURIComponent(this.annotator)}/responses`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
      },
    );
    return parseOrThrow<SubmitView>(response);
  }
}
