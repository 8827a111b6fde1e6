import assert from "node:assert/strict";
import { test } from "node:test";

import {
  countWords,
  rangeToSpans,
  scalarSlice,
  scalarToUtf16,
  spansToText,
  utf16ToScalar,
  withinWordLimit,
} from "../src/offsets.js";
import { simpleSentences } from "./fixture_service.js";

test("utf16/scalar round trip on multi-byte text", () => {
  // Astral emoji are two UTF-16 units but one scalar; CJK stays one unit.
  const text = "открой 😀 файл 桃 now";
  const scalars = Array.from(text);
  for (let scalar = 0; scalar <= scalars.length; scalar += 1) {
    const utf16 = scalarToUtf16(text, scalar);
    assert.equal(utf16ToScalar(text, utf16), scalar);
    assert.equal(text.slice(0, utf16), scalars.slice(0, scalar).join(""));
  }
});

test("scalarSlice slices by code points", () => {
  const text = "ab😀cd";
  assert.equal(scalarSlice(text, 2, 3), "😀");
  assert.equal(scalarSlice(text, 3, 5), "cd");
});

test("selection spanning two sentences splits into two spans", () => {
  const text = "first sentence here. second sentence there.";
  const sentences = simpleSentences(text);
  assert.equal(sentences.length, 2);
  const spans = rangeToSpans(sentences, 6, 28);
  assert.deepEqual(spans, [
    [0, 6, 20],
    [1, 21, 28],
  ]);
});

test("full-sentence selection maps to the sentence bounds", () => {
  const text = "first sentence here. second sentence there.";
  const sentences = simpleSentences(text);
  const spans = rangeToSpans(sentences, 0, sentences[0].char_end);
  assert.deepEqual(spans, [[0, 0, 20]]);
});

test("selection round trip is exact on multi-byte content", () => {
  const text = "открой файл 😀 сейчас. рисуй 桃 кистью дальше.";
  const sentences = simpleSentences(text);
  for (let start = 0; start < 20; start += 3) {
    for (let end = start + 1; end <= Array.from(text).length; end += 5) {
      const spans = rangeToSpans(sentences, start, end);
      const joined = spansToText(text, spans);
      const direct = spans
        .map(([, s, e]) => Array.from(text).slice(s, e).join(""))
        .join(" ");
      assert.equal(joined, direct);
    }
  }
});

test("word counting and the ten word limit", () => {
  assert.equal(countWords("make a wooden text effect"), 5);
  assert.equal(countWords("  "), 0);
  assert.equal(countWords("re-color the image"), 3); // hyphenated counts once
  assert.ok(withinWordLimit("one two three four five six seven eight nine ten"));
  assert.ok(!withinWordLimit("one two three four five six seven eight nine ten eleven"));
});
