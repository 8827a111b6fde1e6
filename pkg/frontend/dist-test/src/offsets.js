/**
 * Offset math shared by selection capture and highlight rendering.
 *
 * The backend measures character offsets in Unicode scalar values (code
 * points) of the clean text, while DOM APIs hand out UTF-16 code unit
 * offsets. Everything here is pure so the conversions can be tested
 * without a browser.
 */
/** Count Unicode scalars before a UTF-16 offset. */
export function utf16ToScalar(text, utf16Offset) {
    let scalars = 0;
    let i = 0;
    while (i < utf16Offset && i < text.length) {
        const code = text.codePointAt(i);
        i += code > 0xffff ? 2 : 1;
        scalars += 1;
    }
    return scalars;
}
/** UTF-16 offset of the scalar index; inverse of utf16ToScalar. */
export function scalarToUtf16(text, scalarOffset) {
    let i = 0;
    for (let seen = 0; seen < scalarOffset && i < text.length; seen += 1) {
        const code = text.codePointAt(i);
        i += code > 0xffff ? 2 : 1;
    }
    return i;
}
/** Slice by scalar offsets (the coordinate system spans are stored in). */
export function scalarSlice(text, start, end) {
    return text.slice(scalarToUtf16(text, start), scalarToUtf16(text, end));
}
/**
 * Split a scalar range into per-sentence spans, clipped to sentence
 * bounds. A selection across two sentences becomes two spans; whitespace
 * between sentences is dropped.
 */
export function rangeToSpans(sentences, startScalar, endScalar) {
    const spans = [];
    for (const sentence of sentences) {
        const start = Math.max(startScalar, sentence.char_start);
        const end = Math.min(endScalar, sentence.char_end);
        if (start < end) {
            spans.push([sentence.index, start, end]);
        }
    }
    return spans;
}
/** The exact text a span set covers; used for round-trip verification. */
export function spansToText(cleanText, spans) {
    return spans.map(([, start, end]) => scalarSlice(cleanText, start, end)).join(" ");
}
/** Whitespace word count; hyphenated tokens count once. */
export function countWords(text) {
    const trimmed = text.trim();
    return trimmed === "" ? 0 : trimmed.split(/\s+/).length;
}
export const MAX_SUMMARY_WORDS = 10;
export function withinWordLimit(text) {
    return countWords(text) <= MAX_SUMMARY_WORDS;
}
