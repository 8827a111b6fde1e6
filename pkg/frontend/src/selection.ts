/**
 * DOM selection capture and highlight rendering for the tutorial text.
 *
 * The document is rendered one text node per sentence inside positioned
 * spans, so mapping a DOM selection back to clean-text offsets is a walk
 * from (node, UTF-16 offset) to (sentence, scalar offset). All arithmetic
 * lives in offsets.ts; this module only touches the DOM.
 */

import {
  SentenceRow,
  SpanTriple,
  rangeToSpans,
  scalarToUtf16,
  utf16ToScalar,
} from "./offsets.js";

const SENTENCE_ATTR = "data-sentence-index";

/** Render clean text into the container, one span per sentence. */
export function renderDocument(
  container: HTMLElement,
  cleanText: string,
  sentences: SentenceRow[],
): void {
  container.textContent = "";
  let cursorScalar = 0;
  const utf16 = (scalar: number) => scalarToUtf16(cleanText, scalar);
  for (const sentence of sentences) {
    if (sentence.char_start > cursorScalar) {
      container.appendChild(
        document.createTextNode(
          cleanText.slice(utf16(cursorScalar), utf16(sentence.char_start)),
        ),
      );
    }
    const span = document.createElement("span");
    span.setAttribute(SENTENCE_ATTR, String(sentence.index));
    span.setAttribute("data-char-start", String(sentence.char_start));
    span.textContent = cleanText.slice(
      utf16(sentence.char_start),
      utf16(sentence.char_end),
    );
    container.appendChild(span);
    cursorScalar = sentence.char_end;
  }
}

function sentenceSpanOf(node: Node): HTMLElement | null {
  let current: Node | null = node;
  while (current) {
    if (current instanceof HTMLElement && current.hasAttribute(SENTENCE_ATTR)) {
      return current;
    }
    current = current.parentNode;
  }
  return null;
}

/** Scalar offset into the clean text for one DOM selection endpoint. */
function endpointToScalar(node: Node, utf16Offset: number): number | null {
  const span = sentenceSpanOf(node);
  if (span === null || node.nodeType !== Node.TEXT_NODE) {
    return null;
  }
  const charStart = Number(span.getAttribute("data-char-start"));
  const text = node.textContent ?? "";
  return charStart + utf16ToScalar(text, utf16Offset);
}

/**
 * Current selection as per-sentence spans, or null when the selection is
 * outside the tutorial container (callers show a visual cue and ignore).
 */
export function captureSelection(
  container: HTMLElement,
  sentences: SentenceRow[],
): SpanTriple[] | null {
  const selection = window.getSelection();
  if (!selection || selection.rangeCount === 0 || selection.isCollapsed) {
    return null;
  }
  const range = selection.getRangeAt(0);
  if (!container.contains(range.startContainer) || !container.contains(range.endContainer)) {
    return null;
  }
  const start = endpointToScalar(range.startContainer, range.startOffset);
  const end = endpointToScalar(range.endContainer, range.endOffset);
  if (start === null || end === null || start >= end) {
    return null;
  }
  return rangeToSpans(sentences, start, end);
}

/** Re-render stored spans as <mark> highlights; returns highlighted text
 * so callers can verify the offset round trip. */
export function highlightSpans(
  container: HTMLElement,
  cleanText: string,
  sentences: SentenceRow[],
  spans: SpanTriple[],
): string {
  renderDocument(container, cleanText, sentences);
  const pieces: string[] = [];
  for (const [sentenceIndex, startScalar, endScalar] of spans) {
    const span = container.querySelector<HTMLElement>(
      `[${SENTENCE_ATTR}="${sentenceIndex}"]`,
    );
    if (!span || !span.firstChild) continue;
    const sentence = sentences.find((s) => s.index === sentenceIndex)!;
    const text = span.textContent ?? "";
    const localStart = scalarToUtf16(text, startScalar - sentence.char_start);
    const localEnd = scalarToUtf16(text, endScalar - sentence.char_start);
    const node = span.firstChild as Text;
    const target = node.splitText(localStart);
    target.splitText(localEnd - localStart);
    const mark = document.createElement("mark");
    mark.textContent = target.textContent;
    span.replaceChild(mark, target);
    pieces.push(mark.textContent ?? "");
  }
  return pieces.join(" ");
}
