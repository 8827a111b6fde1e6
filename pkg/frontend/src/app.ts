/**
 * Page wiring: task polling, mode switching between the coarse question
 * and the five-step wizard, selection plumbing, and inline error display.
 */

import { AnnotationApi, CommandRow, HttpApi } from "./api.js";
import { CoarseController } from "./coarse.js";
import { SentenceRow, SpanTriple } from "./offsets.js";
import { captureSelection, highlightSpans, renderDocument } from "./selection.js";
import { ValidationError, WizardController, wordCounterState } from "./wizard.js";

interface Elements {
  text: HTMLElement;
  status: HTMLElement;
  stepLabel: HTMLElement;
  controls: HTMLElement;
}

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function button(label: string, onClick: () => void): HTMLButtonElement {
  const b = document.createElement("button");
  b.textContent = label;
  b.addEventListener("click", onClick);
  return b;
}

export class App {
  private api: AnnotationApi;
  private ui: Elements;
  private sentences: SentenceRow[] = [];
  private selection: SpanTriple[] = [];
  private commandVocab: CommandRow[] = [];

  constructor(api?: AnnotationApi) {
    const params = new URLSearchParams(window.location.search);
    this.api =
      api ??
      new HttpApi(
        params.get("service") ?? "",
        params.get("token") ?? localStorage.getItem("cpk_token") ?? "",
      );
    this.ui = {
      text: el("tutorial-text"),
      status: el("status"),
      stepLabel: el("step-label"),
      controls: el("controls"),
    };
    this.ui.text.addEventListener("mouseup", () => {
      const spans = captureSelection(this.ui.text, this.sentences);
      if (spans === null) {
        this.ui.text.classList.add("selection-ignored");
        setTimeout(() => this.ui.text.classList.remove("selection-ignored"), 400);
        return;
      }
      this.selection = spans;
      this.setStatus(`${spans.length} span(s) selected`);
    });
  }

  private setStatus(message: string, isError = false): void {
    this.ui.status.textContent = message;
    this.ui.status.classList.toggle("error", isError);
  }

  async start(kind: "coarse" | "fine"): Promise<void> {
    if (kind === "coarse") {
      await this.runCoarse();
    } else {
      await this.runFine();
    }
  }

  private async runCoarse(): Promise<void> {
    const task = await this.api.nextTask("coarse");
    if (!task) {
      this.setStatus("no coarse tasks left");
      return;
    }
    this.sentences = await this.api.sentences(task.doc_id);
    renderDocument(this.ui.text, task.clean_text, this.sentences);
    const controller = new CoarseController(this.api, task);
    this.ui.stepLabel.textContent = "Is this a single text-based tutorial?";
    this.ui.controls.replaceChildren(
      button("Yes (click the title first)", async () => {
        controller.setTitleSelection(this.selection);
        try {
          const status = await controller.submit(true);
          this.setStatus(`judgment stored (${status})`);
          await this.runCoarse();
        } catch (error) {
          this.setStatus(String(error), true);
        }
      }),
      button("No", async () => {
        const status = await controller.submit(false);
        this.setStatus(`judgment stored (${status})`);
        await this.runCoarse();
      }),
    );
  }

  private async runFine(): Promise<void> {
    const task = await this.api.nextTask("fine");
    if (!task) {
      this.setStatus("no documents waiting for annotation");
      return;
    }
    const wizard = new WizardController(this.api, task);
    this.sentences = await wizard.loadSentences();
    renderDocument(this.ui.text, task.clean_text, this.sentences);
    this.commandVocab = await this.api.commands();
    this.renderStep(wizard);
  }

  private renderStep(wizard: WizardController): void {
    const step = wizard.step;
    this.ui.stepLabel.textContent = `Step: ${step}`;
    const advance = async (work: () => Promise<void>) => {
      try {
        await work();
        this.selection = [];
        if (wizard.step === "done") {
          this.setStatus(`session ${wizard.outcome ?? "closed"}`);
          await this.runFine();
        } else {
          this.renderStep(wizard);
        }
      } catch (error) {
        this.setStatus(String(error), error instanceof ValidationError);
      }
    };

    if (step === "quality_filter") {
      this.ui.controls.replaceChildren(
        button("Good quality, annotate it", () => advance(() => wizard.qualityFilter(true))),
        button("Low quality, skip it", () => advance(() => wizard.qualityFilter(false))),
      );
    } else if (step === "title_select") {
      this.ui.controls.replaceChildren(
        button("Use selection as title", () => advance(() => wizard.selectTitle(this.selection))),
      );
    } else if (step === "goal_select") {
      this.ui.controls.replaceChildren(
        button("Use selection as goal", () => advance(() => wizard.selectGoal(this.selection))),
      );
    } else if (step === "goal_summarize") {
      const input = document.createElement("input");
      input.placeholder = "summarize the goal";
      const counter = document.createElement("span");
      const submit = button("Save goal summary", () =>
        advance(() => wizard.summarizeGoal(input.value)),
      );
      input.addEventListener("input", () => {
        const state = wordCounterState(input.value);
        counter.textContent = state.display;
        submit.disabled = state.blocked;
      });
      submit.disabled = true;
      this.ui.controls.replaceChildren(input, counter, submit);
    } else if (step === "action_annotate") {
      const command = document.createElement("input");
      command.placeholder = "command (e.g. File > Open)";
      command.setAttribute("list", "command-vocab");
      const datalist = document.createElement("datalist");
      datalist.id = "command-vocab";
      for (const row of this.commandVocab) {
        const option = document.createElement("option");
        option.value = row.command;
        datalist.appendChild(option);
      }
      const usage = document.createElement("input");
      usage.placeholder = "what is it used for?";
      const counter = document.createElement("span");
      const add = button("Add action", () =>
        advance(async () => {
          await wizard.addAction({
            command: command.value,
            usage: usage.value,
            spans: this.selection,
          });
          command.value = "";
          usage.value = "";
        }),
      );
      usage.addEventListener("input", () => {
        const state = wordCounterState(usage.value);
        counter.textContent = state.display;
        add.disabled = state.blocked;
      });
      add.disabled = true;
      const finish = button("Finish tutorial", () => advance(() => wizard.finish()));
      this.ui.controls.replaceChildren(command, datalist, usage, counter, add, finish);
    } else {
      this.ui.controls.replaceChildren();
    }
  }

  /** Re-render a stored span set; exposed for the review view. */
  showSpans(cleanText: string, spans: SpanTriple[]): string {
    return highlightSpans(this.ui.text, cleanText, this.sentences, spans);
  }
}

declare global {
  interface Window {
    cpkApp: App;
  }
}

if (typeof document !== "undefined" && document.getElementById("tutorial-text")) {
  const app = new App();
  window.cpkApp = app;
  const params = new URLSearchParams(window.location.search);
  void app.start(params.get("kind") === "coarse" ? "coarse" : "fine");
}
