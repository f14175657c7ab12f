// End-to-end walkthrough: the real wizard in a DOM drives the real Python
// annotation service over HTTP through three complete sessions (full-yes,
// Understandable=no, Clear=more_or_less + rephrase). The persisted records
// must validate and match the expected server-side records exactly.

import { ChildProcess, spawn, spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { AnnotationApi } from "../src/api.js";
import { AnnotationWizard } from "../src/wizard.js";

const PYTHON = process.env.BLOOMQ_PYTHON ?? "python3";
const PORT = 8765 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;

const QUESTIONS = [
  {
    question_id: "e2e-q1",
    run_id: "e2e-run",
    model_id: "hidden-model",
    strategy: "PS2",
    topic: "linear regression",
    intended_level: "apply",
    text: "How would you fit a line to noisy sensor data?",
    raw_response: "QUESTION: How would you fit a line to noisy sensor data?",
    parse_flag: "clean",
    created_at: "2024-01-01T00:00:00+00:00",
  },
  {
    question_id: "e2e-q2",
    run_id: "e2e-run",
    model_id: "hidden-model",
    strategy: "PS3",
    topic: "decision trees",
    intended_level: "analyze",
    text: "Why might a deep tree overfit a small dataset?",
    raw_response: "QUESTION: Why might a deep tree overfit a small dataset?",
    parse_flag: "clean",
    created_at: "2024-01-01T00:00:00+00:00",
  },
  {
    question_id: "e2e-q3",
    run_id: "e2e-run",
    model_id: "hidden-model",
    strategy: "PS5",
    topic: "prompt engineering",
    intended_level: "create",
    text: "Design prompt variants and things for the task?",
    raw_response: "QUESTION: Design prompt variants and things for the task?",
    parse_flag: "clean",
    created_at: "2024-01-01T00:00:00+00:00",
  },
];

let serviceDir: string;
let annotationsPath: string;
let service: ChildProcess;

async function waitForHealth(): Promise<void> {
  for (let attempt = 0; attempt < 100; attempt++) {
    try {
      const response = await fetch(`${BASE}/api/health`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
  throw new Error("annotation service never became healthy");
}

beforeAll(async () => {
  serviceDir = mkdtempSync(join(tmpdir(), "bloomq-e2e-"));
  const questionsPath = join(serviceDir, "questions.jsonl");
  annotationsPath = join(serviceDir, "annotations.jsonl");
  writeFileSync(
    questionsPath,
    QUESTIONS.map((q) => JSON.stringify(q)).join("\n") + "\n",
  );
  service = spawn(
    PYTHON,
    [
      "-m", "bloomq.cli", "serve",
      "--questions", questionsPath,
      "--annotators", "e2e",
      "--port", String(PORT),
      "--out", annotationsPath,
    ],
    { stdio: ["ignore", "pipe", "pipe"], cwd: serviceDir },
  );
  await waitForHealth();
});

afterAll(() => {
  service?.kill();
});

function visibleButtons(root: HTMLElement): HTMLButtonElement[] {
  return [...root.querySelectorAll<HTMLButtonElement>("[data-role=options] button")];
}

async function settle(root: HTMLElement, timeoutMs = 5000): Promise<void> {
  // wait until the wizard has rendered choices or a terminal screen
  const started = Date.now();
  while (Date.now() - started < timeoutMs) {
    if (
      visibleButtons(root).length > 0 ||
      root.querySelector("[data-role=done]") ||
      root.querySelector("[data-role=error]")
    ) {
      return;
    }
    await new Promise((resolve) => setTimeout(resolve, 15));
  }
  throw new Error(`wizard never settled; html: ${root.innerHTML}`);
}

async function clickOption(root: HTMLElement, option: string): Promise<void> {
  await settle(root);
  const before = root.querySelector("[data-role=options]");
  const button = visibleButtons(root).find((b) => b.dataset.option === option);
  if (!button) {
    throw new Error(`option ${option} not rendered; html: ${root.innerHTML}`);
  }
  button.click();
  // Wait until the wizard re-renders (the options container is replaced on
  // every render) or reaches a terminal screen.
  const started = Date.now();
  while (Date.now() - started < 5000) {
    const after = root.querySelector("[data-role=options]");
    if (
      after !== before ||
      root.querySelector("[data-role=done]") ||
      root.querySelector("[data-role=error]")
    ) {
      return;
    }
    await new Promise((resolve) => setTimeout(resolve, 15));
  }
  throw new Error(`no re-render after choosing ${option}; html: ${root.innerHTML}`);
}

function currentPrompt(root: HTMLElement): string {
  return root.querySelector("[data-role=prompt]")?.textContent ?? "";
}

const NA = "NA";

const EXPECTED_BY_QUESTION: Record<string, { responses: Record<string, string>; rephrased_text: string | null }> = {};

describe("scripted browser walkthrough", () => {
  it("completes full-yes, not-understandable, and rephrase paths", async () => {
    document.body.innerHTML = '<div id="app"></div>';
    const root = document.getElementById("app")!;
    const wizard = new AnnotationWizard(root, new AnnotationApi("e2e", BASE));
    await wizard.start();
    await settle(root);

    // Path 1: full-yes with BloomsLevel=apply.
    const q1 = root.querySelector("[data-role=question]")!.textContent!;
    const firstId = QUESTIONS.find((q) => q.text === q1)!.question_id;
    for (const option of ["yes", "yes", "yes", "yes", "yes", "yes", "yes", "apply"]) {
      await clickOption(root, option);
    }
    EXPECTED_BY_QUESTION[firstId] = {
      responses: {
        Understandable: "yes", TopicRelated: "yes", Grammatical: "yes",
        Clear: "yes", Rephrase: NA, Answerable: "yes", Central: "yes",
        WouldYouUseIt: "yes", BloomsLevel: "apply",
      },
      rephrased_text: null,
    };

    // Path 2: Understandable=no stops immediately.
    await settle(root);
    const q2 = root.querySelector("[data-role=question]")!.textContent!;
    const secondId = QUESTIONS.find((q) => q.text === q2)!.question_id;
    expect(currentPrompt(root)).toContain("understand what the question");
    await clickOption(root, "no");
    EXPECTED_BY_QUESTION[secondId] = {
      responses: {
        Understandable: "no", TopicRelated: NA, Grammatical: NA, Clear: NA,
        Rephrase: NA, Answerable: NA, Central: NA, WouldYouUseIt: NA,
        BloomsLevel: NA,
      },
      rephrased_text: null,
    };

    // Path 3: Clear=more_or_less with a rephrase, then continue to the end.
    await settle(root);
    const q3 = root.querySelector("[data-role=question]")!.textContent!;
    const thirdId = QUESTIONS.find((q) => q.text === q3)!.question_id;
    await clickOption(root, "yes"); // Understandable
    await clickOption(root, "yes"); // TopicRelated
    await clickOption(root, "yes"); // Grammatical
    await clickOption(root, "more_or_less"); // Clear
    await settle(root);
    expect(currentPrompt(root)).toContain("rephrase");
    const box = root.querySelector<HTMLTextAreaElement>("#rephrase-text")!;
    const rephrased = "Design three prompt variants for a summarization task?";
    box.value = rephrased;
    await clickOption(root, "yes"); // Rephrase, with text
    await settle(root);
    expect(root.querySelector("[data-role=question]")!.textContent).toBe(rephrased);
    await clickOption(root, "yes"); // Answerable
    await clickOption(root, "yes"); // Central
    await clickOption(root, "maybe"); // WouldYouUseIt
    await clickOption(root, "create"); // BloomsLevel
    EXPECTED_BY_QUESTION[thirdId] = {
      responses: {
        Understandable: "yes", TopicRelated: "yes", Grammatical: "yes",
        Clear: "more_or_less", Rephrase: "yes", Answerable: "yes",
        Central: "yes", WouldYouUseIt: "maybe", BloomsLevel: "create",
      },
      rephrased_text: rephrased,
    };

    await settle(root);
    expect(root.querySelector("[data-role=done]")).not.toBeNull();
    wizard.stop();

    // The persisted records match the expected server-side records exactly.
    const lines = readFileSync(annotationsPath, "utf-8").trim().split("\n");
    expect(lines).toHaveLength(3);
    const persisted = lines.map((line) => JSON.parse(line));
    for (const record of persisted) {
      expect(record.annotator_id).toBe("human:e2e");
      const expected = EXPECTED_BY_QUESTION[record.question_id];
      expect(expected).toBeDefined();
      expect(record.responses).toEqual(expected.responses);
      expect(record.rephrased_text).toBe(expected.rephrased_text);
    }
    expect(Object.keys(EXPECTED_BY_QUESTION).sort()).toEqual(
      persisted.map((r) => r.question_id).sort(),
    );

    // And they pass the dataset validator.
    const validation = spawnSync(PYTHON, ["-m", "bloomq.cli", "validate", annotationsPath], {
      encoding: "utf-8",
    });
    expect(validation.status, validation.stderr).toBe(0);
    expect(validation.stdout).toContain("3 annotation records ok");
  });
});
