/**
 * Five-step fine-annotation state machine.
 *
 * Mirrors the server's step order and validation so nothing leaves the
 * client that the service would reject: word caps are enforced before
 * submit, steps advance strictly in order, and a version conflict reloads
 * the session state and replays the attempted step once.
 */
import { ApiError, } from "./api.js";
import { MAX_SUMMARY_WORDS, countWords, } from "./offsets.js";
export const STEP_ORDER = [
    "quality_filter",
    "title_select",
    "goal_select",
    "goal_summarize",
    "action_annotate",
    "done",
];
export class ValidationError extends Error {
}
export class WizardController {
    constructor(api, task) {
        this.api = api;
        this.sentences = [];
        this.actions = [];
        this.closed = false;
        this.outcome = null;
        this.sessionId = task.session_id;
        this.docId = task.doc_id;
        this.cleanText = task.clean_text;
        this.step = task.step;
        this.version = task.version;
    }
    async loadSentences() {
        this.sentences = await this.api.sentences(this.docId);
        return this.sentences;
    }
    expectStep(step) {
        if (this.step !== step) {
            throw new ValidationError(`step ${step} not allowed; wizard is at ${this.step}`);
        }
    }
    applyState(state) {
        this.step = state.step;
        this.version = state.version;
        this.closed = state.closed;
        this.outcome = state.outcome;
    }
    /**
     * Submit one step. On a version conflict the session is reloaded: if the
     * server already moved past this step (our earlier write won but the
     * response was lost), the fresh state is adopted without a duplicate
     * write; if the server is still at this step, the submit is replayed
     * once with the fresh version.
     */
    async submit(body) {
        try {
            this.applyState(await this.api.advance(this.sessionId, body));
        }
        catch (error) {
            if (error instanceof ApiError && error.code === "version_conflict") {
                const fresh = await this.api.getSession(this.sessionId);
                this.applyState(fresh);
                if (fresh.step !== body.step) {
                    return; // the step already landed; nothing to replay
                }
                this.applyState(await this.api.advance(this.sessionId, {
                    ...body,
                    expected_version: this.version,
                }));
                return;
            }
            throw error;
        }
    }
    /** Step 1: keep or reject the tutorial for quality. */
    async qualityFilter(keep) {
        this.expectStep("quality_filter");
        await this.submit({
            expected_version: this.version,
            step: "quality_filter",
            keep,
        });
    }
    /** Step 2: the selected title spans. */
    async selectTitle(titleSpan) {
        this.expectStep("title_select");
        if (titleSpan.length === 0) {
            throw new ValidationError("select the tutorial title first");
        }
        await this.submit({
            expected_version: this.version,
            step: "title_select",
            title_span: titleSpan,
        });
    }
    /** Step 3: the sentences describing the goal. */
    async selectGoal(goalSpans) {
        this.expectStep("goal_select");
        if (goalSpans.length === 0) {
            throw new ValidationError("select at least one goal sentence");
        }
        await this.submit({
            expected_version: this.version,
            step: "goal_select",
            goal_spans: goalSpans,
        });
    }
    /** Step 4: free-text goal summary, capped at ten words. */
    async summarizeGoal(summary) {
        this.expectStep("goal_summarize");
        const words = countWords(summary);
        if (words === 0) {
            throw new ValidationError("goal summary must not be empty");
        }
        if (words > MAX_SUMMARY_WORDS) {
            throw new ValidationError(`goal summary has ${words} words; limit is ${MAX_SUMMARY_WORDS}`);
        }
        await this.submit({
            expected_version: this.version,
            step: "goal_summarize",
            summary,
        });
    }
    /** Step 5, repeated: add one action in usage order. */
    async addAction(action) {
        this.expectStep("action_annotate");
        if (!action.command.trim()) {
            throw new ValidationError("pick a command");
        }
        const words = countWords(action.usage);
        if (words === 0) {
            throw new ValidationError("describe the usage");
        }
        if (words > MAX_SUMMARY_WORDS) {
            throw new ValidationError(`usage has ${words} words; limit is ${MAX_SUMMARY_WORDS}`);
        }
        if (action.spans.length === 0) {
            throw new ValidationError("select the action text");
        }
        await this.submit({
            expected_version: this.version,
            step: "action_annotate",
            action,
        });
        this.actions.push(action);
    }
    /** Step 5 exit: finalize the record. */
    async finish() {
        this.expectStep("action_annotate");
        if (this.actions.length === 0) {
            throw new ValidationError("annotate at least one action before finishing");
        }
        await this.submit({
            expected_version: this.version,
            step: "action_annotate",
            finish: true,
        });
    }
}
/** Disable-submit helper the view binds to the usage/summary inputs. */
export function wordCounterState(text) {
    const words = countWords(text);
    return {
        words,
        display: `${words}/${MAX_SUMMARY_WORDS}`,
        blocked: words === 0 || words > MAX_SUMMARY_WORDS,
    };
}
