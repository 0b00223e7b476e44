// End-to-end annotator session against the real Python annotation service:
// spawn the backend with a fixture study, drive the DOM app through one
// annotator's six items, then verify the service export reflects every
// submission and no rendered payload leaked the strategy identity.

import { ChildProcess, spawn } from "node:child_process";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { AnnotationApp } from "../src/app.js";

const PORT = 8477 + Math.floor(Math.random() * 400);
const BASE = `http://127.0.0.1:${PORT}`;
const ANNOTATOR = "ann-01";

const STRATEGY_MARKERS = [
  "source_strategy",
  "source_run",
  "feedback_scoring",
  "feedback_dcot_scoring",
  "Feedback->Scoring",
  "Feedback_dCoT->Scoring",
  "gold_score",
  "run-0",
  "run-1",
  "run-2",
];

let service: ChildProcess;
const postedPayloads: Array<Record<string, unknown>> = [];

async function until(check: () => boolean, timeoutMs = 10_000): Promise<void> {
  const started = Date.now();
  while (!check()) {
    if (Date.now() - started > timeoutMs) {
      throw new Error("condition not reached in time");
    }
    await new Promise((resolve) => setTimeout(resolve, 25));
  }
}

async function waitForService(): Promise<void> {
  const started = Date.now();
  for (;;) {
    try {
      const response = await fetch(`${BASE}/api/statements`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() - started > 45_000) {
      throw new Error("annotation service did not come up");
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
}

beforeAll(async () => {
  // vitest runs with cwd at the frontend project root
  const script = join(process.cwd(), "tests", "serve_study.py");
  service = spawn("python3", [script, String(PORT)], {
    stdio: ["ignore", "inherit", "inherit"],
  });
  await waitForService();
}, 60_000);

afterAll(() => {
  service?.kill();
});

function spyFetch(input: string, init?: RequestInit): Promise<Response> {
  if (init?.method === "POST" && typeof init.body === "string") {
    postedPayloads.push(JSON.parse(init.body));
  }
  return fetch(input, init);
}

function assertNoStrategyLeak(where: string): void {
  const html = document.body.innerHTML;
  for (const marker of STRATEGY_MARKERS) {
    expect(html, `${where} leaked "${marker}"`).not.toContain(marker);
  }
}

describe("annotator session", () => {
  it("completes a six-item session end to end", async () => {
    document.body.innerHTML = '<main id="app"></main>';
    const root = document.getElementById("app")!;
    const app = new AnnotationApp(root, new ApiClient(BASE, spyFetch));
    app.start();

    // login view: token entry
    const token = root.querySelector<HTMLInputElement>("#token-input")!;
    token.value = ANNOTATOR;
    root.querySelector<HTMLButtonElement>("#start-button")!.click();
    await until(() => root.querySelector(".item-view") !== null);

    const chosen: Record<string, Record<string, number>> = {};
    for (let itemIndex = 0; itemIndex < 6; itemIndex += 1) {
      assertNoStrategyLeak(`item screen ${itemIndex + 1}`);
      expect(root.querySelector(".essay")!.textContent).toContain("Student essay");
      expect(root.querySelector(".feedback")!.textContent).toContain("cite the passage");
      expect(root.querySelector(".essay-prompt")!.textContent).toContain("Explain why");
      expect(root.querySelector("#progress")!.textContent).toBe(`${itemIndex}/6`);

      const fieldsets = Array.from(root.querySelectorAll<HTMLFieldSetElement>(".statement"));
      expect(fieldsets).toHaveLength(5);
      const submit = root.querySelector<HTMLButtonElement>("#submit-button")!;
      expect(submit.disabled).toBe(true);

      const answers: Record<string, number> = {};
      fieldsets.forEach((fieldset, statementIndex) => {
        const value = 1 + ((itemIndex + statementIndex) % 7);
        const radio = fieldset.querySelector<HTMLInputElement>(
          `input[value="${value}"]`,
        )!;
        radio.click();
        answers[radio.name] = value;
      });
      chosen[`screen-${itemIndex}`] = answers;
      await until(() => !root.querySelector<HTMLButtonElement>("#submit-button")!.disabled);
      root.querySelector<HTMLButtonElement>("#submit-button")!.click();
      await until(
        () =>
          root.querySelector(".done-view") !== null ||
          root.querySelector("#progress")?.textContent === `${itemIndex + 1}/6`,
      );
    }

    await until(() => root.querySelector(".done-view") !== null);
    expect(root.querySelector("#progress")!.textContent).toBe("6/6");
    assertNoStrategyLeak("completion screen");

    // every submitted payload carries exactly five integers in 1..7
    expect(postedPayloads).toHaveLength(6);
    for (const payload of postedPayloads) {
      const keys = Object.keys(payload).filter((key) => key !== "item_id").sort();
      expect(keys).toEqual(["s1", "s2", "s3", "s4", "s5"]);
      for (const key of keys) {
        const value = payload[key];
        expect(Number.isInteger(value)).toBe(true);
        expect(value as number).toBeGreaterThanOrEqual(1);
        expect(value as number).toBeLessThanOrEqual(7);
      }
    }

    // the service export reflects all six submissions
    const exportBody = (await (await fetch(`${BASE}/api/export`)).json()) as {
      records: Array<Record<string, unknown>>;
    };
    const mine = exportBody.records.filter((r) => r.annotator_id === ANNOTATOR);
    expect(mine).toHaveLength(6);
    const byItem = new Map(mine.map((r) => [r.item_id as string, r]));
    for (const payload of postedPayloads) {
      const record = byItem.get(payload.item_id as string)!;
      expect(record).toBeDefined();
      for (const key of ["s1", "s2", "s3", "s4", "s5"]) {
        expect(record[key]).toBe(payload[key]);
      }
    }
  }, 90_000);

  it("shows the login view again for an unknown token", async () => {
    document.body.innerHTML = '<main id="app"></main>';
    const root = document.getElementById("app")!;
    const app = new AnnotationApp(root, new ApiClient(BASE, spyFetch));
    app.start();
    const token = root.querySelector<HTMLInputElement>("#token-input")!;
    token.value = "nobody";
    root.querySelector<HTMLButtonElement>("#start-button")!.click();
    await until(() => root.querySelector(".error") !== null);
    expect(root.querySelector(".error")!.textContent).toContain("Unknown annotator token");
  }, 30_000);

  it("keeps answers and shows an inline error when the server rejects", async () => {
    const statements = {
      statements: [1, 2, 3, 4, 5].map((i) => ({ key: `s${i}`, text: `Statement ${i}.` })),
      scale: { min: 1, max: 7, labels: { "1": "I strongly disagree", "7": "I fully agree" } },
    };
    const items = {
      items: [
        {
          item_id: "item-x",
          essay_prompt: "Prompt.",
          essay: "Essay body.",
          feedback: "Feedback body.",
          answers: null,
        },
      ],
    };
    let rejectNext = true;
    const fakeFetch = async (input: string, init?: RequestInit): Promise<Response> => {
      if (init?.method === "POST") {
        if (rejectNext) {
          rejectNext = false;
          return new Response("{}", { status: 422 });
        }
        return new Response("{}", { status: 200 });
      }
      if (input.endsWith("/api/statements")) {
        return new Response(JSON.stringify(statements), { status: 200 });
      }
      if (input.endsWith("/items")) {
        return new Response(JSON.stringify(items), { status: 200 });
      }
      return new Response(JSON.stringify({ completed: 0, total: 1 }), { status: 200 });
    };

    document.body.innerHTML = '<main id="app"></main>';
    const root = document.getElementById("app")!;
    const app = new AnnotationApp(root, new ApiClient("", fakeFetch));
    app.start();
    root.querySelector<HTMLInputElement>("#token-input")!.value = "ann-01";
    root.querySelector<HTMLButtonElement>("#start-button")!.click();
    await until(() => root.querySelector(".item-view") !== null);

    for (const fieldset of Array.from(root.querySelectorAll(".statement"))) {
      fieldset.querySelector<HTMLInputElement>('input[value="4"]')!.click();
    }
    await until(() => !root.querySelector<HTMLButtonElement>("#submit-button")!.disabled);
    root.querySelector<HTMLButtonElement>("#submit-button")!.click();
    await until(
      () => root.querySelector<HTMLElement>("#submit-error")?.style.display === "block",
    );
    expect(root.querySelector("#submit-error")!.textContent).toContain("rejected");
    // answers preserved after the rejection
    for (const fieldset of Array.from(root.querySelectorAll(".statement"))) {
      expect(fieldset.querySelector<HTMLInputElement>('input[value="4"]')!.checked).toBe(true);
    }
    // retry succeeds
    root.querySelector<HTMLButtonElement>("#submit-button")!.click();
    await until(() => root.querySelector(".done-view") !== null);
  }, 30_000);
});
