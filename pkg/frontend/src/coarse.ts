/**
 * Coarse filtering flow: answer the single-tutorial question and, on a
 * "yes", click the title to verify it. The title click is a selection of
 * the title text mapped to spans like any other selection.
 */

import { AnnotationApi, CoarseTask } from "./api.js";
import { SpanTriple } from "./offsets.js";

export class CoarseController {
  titleSpan: SpanTriple[] = [];

  constructor(
    private api: AnnotationApi,
    readonly task: CoarseTask,
  ) {}

  setTitleSelection(spans: SpanTriple[]): void {
    this.titleSpan = spans;
  }

  /** "No" submits immediately; "yes" requires a clicked title. */
  canSubmit(isTutorial: boolean): boolean {
    return !isTutorial || this.titleSpan.length > 0;
  }

  async submit(isTutorial: boolean): Promise<string> {
    if (!this.canSubmit(isTutorial)) {
      throw new Error("click the tutorial title before submitting a yes");
    }
    const response = await this.api.submitJudgment({
      doc_id: this.task.doc_id,
      is_single_text_tutorial: isTutorial,
      title_span: isTutorial ? this.titleSpan : undefined,
    });
    return response.status;
  }
}
