import { ApiError, ItemView, NextView, SubmitPayload, SubmitView } from "./types.js";

export interface AnnotationClient {
  next(): Promise<NextView>;
  submit(payload: SubmitPayload): Promise<SubmitView>;
}

// Rubric item wording shown to the expert. The option set itself always comes
// from the server; the UI never decides which item is next.
const ITEM_PROMPTS: Record<string, string> = {
  Understandable: "Could you understand what the question is asking?",
  TopicRelated: "Is the question related to the topic given above?",
  Grammatical: "Is the question grammatically well-formed?",
  Clear: "Is it clear what the question asks for?",
  Rephrase: "Could you rephrase the question to make it clearer and error-free?",
  Answerable: "Can students answer the question with the information or context provided within?",
  Central: "Do you think being able to answer the question is important to work on the topic given above?",
  WouldYouUseIt: "If you were a teacher teaching the course topic, would you use this question or the rephrased version in the course?",
  BloomsLevel: "What is the cognitive skill associated with the question?",
};

function optionLabel(option: string): string {
  return option.replace(/_/g, " ");
}

export class AnnotationWizard {
  private view: ItemView | null = null;
  private pendingItem: string | null = null;
  private keyHandler: ((event: KeyboardEvent) => void) | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: AnnotationClient,
    private readonly doc: Document = document,
  ) {}

  async start(): Promise<void> {
    if (!this.keyHandler) {
      this.keyHandler = (event) => this.onKey(event);
      this.doc.addEventListener("keydown", this.keyHandler);
    }
    await this.loadNext();
  }

  stop(): void {
    if (this.keyHandler) {
      this.doc.removeEventListener("keydown", this.keyHandler);
      this.keyHandler = null;
    }
  }

  private async loadNext(): Promise<void> {
    this.renderStatus("Loading…");
    let view: NextView;
    try {
      view = await this.api.next();
    } catch (error) {
      this.renderError(error, () => this.loadNext());
      return;
    }
    if (view.status === "all_done") {
      this.view = null;
      this.renderAllDone(view.progress.total);
      return;
    }
    this.view = view;
    this.renderItem(view);
  }

  private async choose(option: string): Promise<void> {
    const view = this.view;
    if (!view || this.pendingItem === view.current_item) {
      return; // optimistic lock: one in-flight submit per item
    }
    let rephraseText: string | undefined;
    if (view.text_required_if !== null && option === view.text_required_if) {
      const box = this.root.querySelector<HTMLTextAreaElement>("#rephrase-text");
      rephraseText = box?.value.trim();
      if (!rephraseText) {
        this.flagRephraseRequired();
        return;
      }
    }
    this.pendingItem = view.current_item;
    this.setButtonsDisabled(true);
    let reply: SubmitView;
    try {
      reply = await this.api.submit({
        question_id: view.question_id,
        item: view.current_item,
        response: option,
        ...(rephraseText !== undefined ? { rephrase_text: rephraseText } : {}),
      });
    } catch (error) {
      this.pendingItem = null;
      if (error instanceof ApiError && error.outOfOrder) {
        await this.loadNext(); // stale client: resume at the server's cursor
        return;
      }
      this.renderError(error, () => this.loadNext());
      return;
    }
    this.pendingItem = null;
    if (reply.status === "session_complete") {
      await this.loadNext(); // auto-advance to the next question
      return;
    }
    this.view = reply;
    this.renderItem(reply);
  }

  private onKey(event: KeyboardEvent): void {
    const view = this.view;
    if (!view) {
      return;
    }
    const target = event.target as HTMLElement | null;
    if (target && (target.tagName === "TEXTAREA" || target.tagName === "INPUT")) {
      return;
    }
    const key = event.key.toLowerCase();
    const options = view.options;
    let choice: string | undefined;
    if (/^[1-9]$/.test(key)) {
      choice = options[Number(key) - 1];
    } else if (key === "y" && options.includes("yes")) {
      choice = "yes";
    } else if (key === "n" && options.includes("no")) {
      choice = "no";
    } else if (key === "m") {
      choice = options.find((o) => o === "maybe" || o === "more_or_less");
    }
    if (choice) {
      event.preventDefault();
      void this.choose(choice);
    }
  }

  private renderItem(view: ItemView): void {
    const pct = view.progress.total
      ? Math.round((100 * view.progress.completed) / view.progress.total)
      : 0;
    const needsTextbox = view.text_required_if !== null;
    this.root.innerHTML = `
      <header class="bar">
        <span class="progress" data-role="progress">${view.progress.completed} / ${view.progress.total} (${pct}%)</span>
      </header>
      <main class="card">
        <p class="topic">Topic: <strong data-role="topic"></strong></p>
        <blockquote class="question" data-role="question"></blockquote>
        <p class="prompt" data-role="prompt"></p>
        ${needsTextbox
          ? `<textarea id="rephrase-text" rows="3"
               placeholder="Rephrased question (required when answering '${optionLabel(view.text_required_if!)}')"></textarea>
             <p class="hint hidden" data-role="rephrase-hint">Enter the rephrased question first.</p>`
          : ""}
        <div class="options" data-role="options"></div>
        <p class="keys">Keys: ${view.options.map((o, i) => `${i + 1}=${optionLabel(o)}`).join("  ")}</p>
      </main>
    `;
    const topicEl = this.root.querySelector("[data-role=topic]")!;
    topicEl.textContent = view.topic;
    const questionEl = this.root.querySelector("[data-role=question]")!;
    questionEl.textContent = view.display_text;
    const promptEl = this.root.querySelector("[data-role=prompt]")!;
    promptEl.textContent = ITEM_PROMPTS[view.current_item] ?? view.current_item;
    const optionsEl = this.root.querySelector("[data-role=options]")!;
    for (const option of view.options) {
      const button = this.doc.createElement("button");
      button.type = "button";
      button.dataset.option = option;
      button.textContent = optionLabel(option);
      button.addEventListener("click", () => void this.choose(option));
      optionsEl.appendChild(button);
    }
  }

  private renderAllDone(total: number): void {
    this.root.innerHTML = `
      <main class="card done">
        <h2>All done</h2>
        <p data-role="done">You have completed all ${total} questions (100%). Thank you!</p>
      </main>
    `;
  }

  private renderStatus(message: string): void {
    this.root.innerHTML = `<main class="card"><p data-role="status"></p></main>`;
    this.root.querySelector("[data-role=status]")!.textContent = message;
  }

  private renderError(error: unknown, retry: () => void): void {
    const message = error instanceof Error ? error.message : String(error);
    this.root.innerHTML = `
      <main class="card error">
        <p>Server error:</p>
        <pre data-role="error"></pre>
        <button type="button" data-role="retry">Retry</button>
      </main>
    `;
    this.root.querySelector("[data-role=error]")!.textContent = message;
    this.root
      .querySelector("[data-role=retry]")!
      .addEventListener("click", () => retry());
  }

  private flagRephraseRequired(): void {
    const hint = this.root.querySelector("[data-role=rephrase-hint]");
    hint?.classList.remove("hidden");
    this.root.querySelector<HTMLTextAreaElement>("#rephrase-text")?.focus();
  }

  private setButtonsDisabled(disabled: boolean): void {
    this.root
      .querySelectorAll<HTMLButtonElement>("[data-role=options] button")
      .forEach((button) => {
        button.disabled = disabled;
      });
  }
}
