// Single-page annotation flow: token entry, one item per screen (forward-only
// with a revisit list at the end), five Likert selectors per item, progress
// from the service. The UI only ever sees what the service sends annotators:
// essay prompt, essay, feedback. No strategy identity, no gold scores.

import { Answers, ApiClient, ItemView, StatementsPayload } from "./api.js";

type View = "login" | "item" | "done" | "error";

export class AnnotationApp {
  private annotatorId = "";
  private statements: StatementsPayload | null = null;
  private items: ItemView[] = [];
  private current = 0;
  private draft: Answers = {};
  private lastError = "";

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {}

  start(): void {
    this.renderLogin();
  }

  /** Begin a session for the given annotator token. */
  async begin(annotatorId: string): Promise<void> {
    this.annotatorId = annotatorId.trim();
    if (!this.annotatorId) {
      this.renderLogin("Enter your annotator token.");
      return;
    }
    try {
      this.statements = await this.api.statements();
      const listing = await this.api.items(this.annotatorId);
      this.items = listing.items;
    } catch (err) {
      const status = (err as { status?: number }).status;
      if (status === 404) {
        this.renderLogin("Unknown annotator token.");
      } else {
        this.renderError(`Could not load your items. ${String(err)}`, () =>
          this.begin(this.annotatorId),
        );
      }
      return;
    }
    this.current = this.items.findIndex((item) => item.answers === null);
    if (this.current === -1) {
      await this.renderDone();
    } else {
      this.draft = {};
      await this.renderItem();
    }
  }

  private clear(): void {
    this.root.textContent = "";
  }

  private el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    className?: string,
    text?: string,
  ): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    if (className) node.className = className;
    if (text !== undefined) node.textContent = text;
    return node;
  }

  private renderLogin(message = ""): void {
    this.clear();
    const box = this.el("div", "login");
    box.appendChild(this.el("h1", "title", "Essay feedback annotation"));
    box.appendChild(
      this.el(
        "p",
        "intro",
        "Enter the annotator token you received to start or resume your session.",
      ),
    );
    if (message) box.appendChild(this.el("p", "error", message));
    const input = this.el("input", "token-input");
    input.id = "token-input";
    input.setAttribute("placeholder", "annotator token");
    const button = this.el("button", "start-button", "Start");
    button.id = "start-button";
    button.addEventListener("click", () => void this.begin(input.value));
    box.appendChild(input);
    box.appendChild(button);
    this.root.appendChild(box);
  }

  private renderError(message: string, retry: () => void): void {
    this.clear();
    const box = this.el("div", "error-view");
    box.appendChild(this.el("p", "error", message));
    const button = this.el("button", "retry-button", "Retry");
    button.id = "retry-button";
    button.addEventListener("click", retry);
    box.appendChild(button);
    this.root.appendChild(box);
  }

  private async progressLine(): Promise<string> {
    const progress = await this.api.progress(this.annotatorId);
    return `${progress.completed}/${progress.total}`;
  }

  private async renderItem(): Promise<void> {
    const item = this.items[this.current];
    this.clear();
    const view = this.el("div", "item-view");

    const header = this.el("div", "header");
    header.appendChild(this.el("h1", "title", "Essay feedback annotation"));
    const progress = this.el("span", "progress");
    progress.id = "progress";
    progress.textContent = await this.progressLine();
    header.appendChild(progress);
    view.appendChild(header);

    view.appendChild(this.el("h2", "", "Essay prompt"));
    view.appendChild(this.el("blockquote", "essay-prompt", item.essay_prompt));
    view.appendChild(this.el("h2", "", "Student essay"));
    view.appendChild(this.el("blockquote", "essay", item.essay));
    view.appendChild(this.el("h2", "", "Feedback"));
    view.appendChild(this.el("blockquote", "feedback", item.feedback));

    const scale = this.statements!.scale;
    const form = this.el("div", "statements");
    for (const statement of this.statements!.statements) {
      const row = this.el("fieldset", "statement");
      row.appendChild(this.el("legend", "", statement.text));
      const options = this.el("div", "options");
      for (let value = scale.min; value <= scale.max; value += 1) {
        const label = this.el("label", "option");
        const radio = this.el("input");
        radio.type = "radio";
        radio.name = statement.key;
        radio.value = String(value);
        if (this.draft[statement.key] === value) radio.checked = true;
        radio.addEventListener("change", () => {
          this.draft[statement.key] = value;
          this.syncSubmitState();
        });
        label.appendChild(radio);
        const caption = scale.labels[String(value)];
        label.appendChild(
          this.el("span", "", caption ? `${value} (${caption})` : String(value)),
        );
        options.appendChild(label);
      }
      row.appendChild(options);
      form.appendChild(row);
    }
    view.appendChild(form);

    const error = this.el("p", "error");
    error.id = "submit-error";
    error.style.display = "none";
    view.appendChild(error);

    const submit = this.el("button", "submit-button", "Submit and continue");
    submit.id = "submit-button";
    submit.addEventListener("click", () => void this.submitCurrent());
    view.appendChild(submit);

    this.root.appendChild(view);
    this.syncSubmitState();
  }

  private allAnswered(): boolean {
    const keys = this.statements!.statements.map((s) => s.key);
    return keys.every((key) => typeof this.draft[key] === "number");
  }

  private syncSubmitState(): void {
    const submit = this.root.querySelector<HTMLButtonElement>("#submit-button");
    if (submit) submit.disabled = !this.allAnswered();
  }

  private async submitCurrent(): Promise<void> {
    if (!this.allAnswered()) return;
    const item = this.items[this.current];
    const answers: Answers = {};
    for (const statement of this.statements!.statements) {
      answers[statement.key] = this.draft[statement.key];
    }
    try {
      await this.api.submit(this.annotatorId, item.item_id, answers);
    } catch (err) {
      const error = this.root.querySelector<HTMLElement>("#submit-error");
      if (error) {
        error.textContent = `The server rejected the submission (${String(err)}). Your answers are preserved; adjust and retry.`;
        error.style.display = "block";
      }
      return;
    }
    item.answers = answers;
    const next = this.items.findIndex((candidate) => candidate.answers === null);
    this.draft = {};
    if (next === -1) {
      await this.renderDone();
    } else {
      this.current = next;
      await this.renderItem();
    }
  }

  private async renderDone(): Promise<void> {
    this.clear();
    const view = this.el("div", "done-view");
    view.appendChild(this.el("h1", "title", "All items annotated"));
    const progress = this.el("p", "progress");
    progress.id = "progress";
    progress.textContent = await this.progressLine();
    view.appendChild(progress);
    view.appendChild(
      this.el(
        "p",
        "",
        "Thank you. You can revisit any item below to correct a submission.",
      ),
    );
    const list = this.el("ul", "revisit-list");
    this.items.forEach((item, index) => {
      const entry = this.el("li");
      const button = this.el("button", "revisit-button", `Revisit item ${index + 1}`);
      button.addEventListener("click", () => {
        this.current = index;
        this.draft = { ...(item.answers ?? {}) };
        void this.renderItem();
      });
      entry.appendChild(button);
      list.appendChild(entry);
    });
    view.appendChild(list);
    this.root.appendChild(view);
  }
}
