/**
 * Coarse filtering flow: answer the single-tutorial question and, on a
 * "yes", click the title to verify it. The title click is a selection of
 * the title text mapped to spans like any other selection.
 */
export class CoarseController {
    constructor(api, task) {
        this.api = api;
        this.task = task;
        this.titleSpan = [];
    }
    setTitleSelection(spans) {
        this.titleSpan = spans;
    }
    /** "No" submits immediately; "yes" requires a clicked title. */
    canSubmit(isTutorial) {
        return !isTutorial || this.titleSpan.length > 0;
    }
    async submit(isTutorial) {
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
