import assert from "node:assert/strict";
import { test } from "node:test";
import { WizardController, ValidationError, wordCounterState } from "../src/wizard.js";
import { CoarseController } from "../src/coarse.js";
import { FixtureService, simpleSentences } from "./fixture_service.js";
const TEXT = "Create A Glow Effect. in this tutorial you will add glow to a portrait. " +
    "go to file > open and load the base image. grab the brush tool and paint soft light.";
function makeService() {
    return new FixtureService("doc-1", TEXT, simpleSentences(TEXT));
}
async function startWizard(service) {
    const task = (await service.nextTask("fine"));
    const wizard = new WizardController(service, task);
    await wizard.loadSentences();
    return wizard;
}
function sentenceSpan(service, index) {
    const row = simpleSentences(TEXT)[index];
    return [[row.index, row.char_start, row.char_end]];
}
test("scripted five-step session finalizes the intended record", async () => {
    const service = makeService();
    const wizard = await startWizard(service);
    await wizard.qualityFilter(true);
    await wizard.selectTitle(sentenceSpan(service, 0));
    await wizard.selectGoal(sentenceSpan(service, 1));
    await wizard.summarizeGoal("add glow to a portrait");
    await wizard.addAction({
        command: "File > Open",
        usage: "open the base image",
        spans: sentenceSpan(service, 2),
    });
    await wizard.addAction({
        command: "Brush Tool",
        usage: "paint soft light",
        spans: sentenceSpan(service, 3),
    });
    await wizard.finish();
    assert.equal(wizard.step, "done");
    assert.equal(wizard.outcome, "finalized");
    assert.equal(service.finalized.length, 1);
    const record = service.finalized[0];
    assert.equal(record.doc_id, "doc-1");
    assert.deepEqual(record.title_span, sentenceSpan(service, 0));
    assert.deepEqual(record.goal_spans, sentenceSpan(service, 1));
    assert.equal(record.goal_summary, "add glow to a portrait");
    assert.deepEqual(record.actions.map((a) => a.command), ["File > Open", "Brush Tool"]);
    assert.deepEqual(record.actions[0].spans, sentenceSpan(service, 2));
});
test("eleven-word summary is blocked client-side before any request", async () => {
    const service = makeService();
    const wizard = await startWizard(service);
    await wizard.qualityFilter(true);
    await wizard.selectTitle(sentenceSpan(service, 0));
    await wizard.selectGoal(sentenceSpan(service, 1));
    const calls = service.advanceCalls;
    const eleven = "one two three four five six seven eight nine ten eleven";
    await assert.rejects(() => wizard.summarizeGoal(eleven), ValidationError);
    assert.equal(service.advanceCalls, calls); // never reached the service
    const state = wordCounterState(eleven);
    assert.equal(state.display, "11/10");
    assert.ok(state.blocked);
});
test("ten-word summary passes the client gate", async () => {
    const service = makeService();
    const wizard = await startWizard(service);
    await wizard.qualityFilter(true);
    await wizard.selectTitle(sentenceSpan(service, 0));
    await wizard.selectGoal(sentenceSpan(service, 1));
    await wizard.summarizeGoal("one two three four five six seven eight nine ten");
    assert.equal(wizard.step, "action_annotate");
});
test("eleven-word usage blocked client-side", async () => {
    const service = makeService();
    const wizard = await startWizard(service);
    await wizard.qualityFilter(true);
    await wizard.selectTitle(sentenceSpan(service, 0));
    await wizard.selectGoal(sentenceSpan(service, 1));
    await wizard.summarizeGoal("short goal");
    const calls = service.advanceCalls;
    await assert.rejects(() => wizard.addAction({
        command: "Brush Tool",
        usage: "one two three four five six seven eight nine ten eleven",
        spans: sentenceSpan(service, 3),
    }), ValidationError);
    assert.equal(service.advanceCalls, calls);
});
test("steps are enforced in order client-side", async () => {
    const service = makeService();
    const wizard = await startWizard(service);
    await assert.rejects(() => wizard.summarizeGoal("too early"), ValidationError);
    await assert.rejects(() => wizard.addAction({
        command: "Brush Tool",
        usage: "paint",
        spans: sentenceSpan(service, 3),
    }), ValidationError);
});
test("low-quality choice closes the session as rejected", async () => {
    const service = makeService();
    const wizard = await startWizard(service);
    await wizard.qualityFilter(false);
    assert.equal(wizard.step, "done");
    assert.equal(wizard.outcome, "rejected");
    assert.equal(service.finalized.length, 0);
});
test("finish requires at least one action", async () => {
    const service = makeService();
    const wizard = await startWizard(service);
    await wizard.qualityFilter(true);
    await wizard.selectTitle(sentenceSpan(service, 0));
    await wizard.selectGoal(sentenceSpan(service, 1));
    await wizard.summarizeGoal("goal words");
    await assert.rejects(() => wizard.finish(), ValidationError);
});
test("version conflict syncs when the write already landed", async () => {
    const service = makeService();
    const wizard = await startWizard(service);
    // Our quality_filter write succeeded but the response was lost.
    await service.advance(wizard.sessionId, {
        expected_version: 0,
        step: "quality_filter",
        keep: true,
    });
    assert.equal(wizard.version, 0); // stale
    await wizard.qualityFilter(true); // conflict -> reload -> already applied
    assert.equal(wizard.step, "title_select");
    assert.equal(wizard.version, 1);
    await wizard.selectTitle(sentenceSpan(service, 0)); // flow continues
    assert.equal(wizard.step, "goal_select");
});
test("version conflict replays when the server is still on this step", async () => {
    const service = makeService();
    const wizard = await startWizard(service);
    await wizard.qualityFilter(true);
    await wizard.selectTitle(sentenceSpan(service, 0));
    await wizard.selectGoal(sentenceSpan(service, 1));
    await wizard.summarizeGoal("short goal");
    // A second tab added an action; our version is now stale but the server
    // is still at action_annotate, so the add is replayed with the fresh
    // version.
    await service.advance(wizard.sessionId, {
        expected_version: wizard.version,
        step: "action_annotate",
        action: {
            command: "File > Open",
            usage: "open the base image",
            spans: sentenceSpan(service, 2),
        },
    });
    await wizard.addAction({
        command: "Brush Tool",
        usage: "paint soft light",
        spans: sentenceSpan(service, 3),
    });
    await wizard.finish();
    assert.deepEqual(service.finalized[0].actions.map((a) => a.command), ["File > Open", "Brush Tool"]);
});
test("coarse yes requires a clicked title", async () => {
    const service = makeService();
    const task = (await service.nextTask("coarse"));
    const controller = new CoarseController(service, task);
    assert.ok(!controller.canSubmit(true));
    assert.ok(controller.canSubmit(false));
    await assert.rejects(() => controller.submit(true));
    controller.setTitleSelection(sentenceSpan(service, 0));
    assert.ok(controller.canSubmit(true));
    const status = await controller.submit(true);
    assert.equal(status, "pending");
    assert.equal(service.judgments.length, 1);
    assert.deepEqual(service.judgments[0].title_span, sentenceSpan(service, 0));
});
