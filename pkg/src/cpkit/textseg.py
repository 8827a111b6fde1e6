"""Rule-based sentence segmentation and tokenization.

Every downstream stage (fingerprinting, labeling, training, extraction)
shares this segmenter and tokenizer so that character offsets and token
streams line up across the whole toolkit.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

# Words that end with "." without ending a sentence. Extendable via the
# `abbreviations` argument of split_sentences.
DEFAULT_ABBREVIATIONS = frozenset(
    {
        "e.g.",
        "i.e.",
        "etc.",
        "px.",
        "approx.",
        "vs.",
        "fig.",
        "no.",
        "mr.",
        "mrs.",
        "dr.",
        "st.",
        "min.",
        "max.",
        "sec.",
    }
)

_TERMINALS = ".!?"


@dataclass(frozen=True)
class Sentence:
    """One sentence of a document's clean text.

    ``char_start``/``char_end`` are Unicode scalar offsets into the clean
    text; ``tokens`` are the lowercased tokens of that slice.
    """

    index: int
    char_start: int
    char_end: int
    tokens: tuple[str, ...] = field(default=())

    def slice(self, clean_text: str) -> str:
        return clean_text[self.char_start : self.char_end]


def _keep_leading_hash(chunk: str) -> bool:
    # "#003200" style color codes stay whole.
    return chunk[0] == "#" and len(chunk) > 1 and chunk[1].isalnum()


def tokenize(text: str) -> list[str]:
    """Lowercase and split ``text`` into tokens.

    Whitespace separates chunks; leading/trailing punctuation of a chunk
    is detached into single-character tokens while interior punctuation
    ("ctrl+c", "pixels/inch", "control-j", "#003200") stays attached.
    """
    tokens: list[str] = []
    for chunk in text.lower().split():
        lead: list[str] = []
        while chunk and not chunk[0].isalnum() and not _keep_leading_hash(chunk):
            lead.append(chunk[0])
            chunk = chunk[1:]
        trail: list[str] = []
        while chunk and not chunk[-1].isalnum():
            trail.append(chunk[-1])
            chunk = chunk[:-1]
        tokens.extend(lead)
        if chunk:
            tokens.append(chunk)
        tokens.extend(reversed(trail))
    return tokens


def _word_ending_at(text: str, punct_index: int) -> str:
    """The whitespace-delimited word whose last character is text[punct_index]."""
    start = punct_index
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    return text[start : punct_index + 1]


def _is_split_point(text: str, i: int, abbreviations: frozenset[str]) -> bool:
    """Whether the terminal character at ``i`` ends a sentence."""
    j = i + 1
    while j < len(text) and text[j] in _TERMINALS:
        j = j + 1  # treat "?!" / "..." runs as one terminal
    if j < len(text) and not text[j].isspace():
        return False  # mid-token (decimals, version numbers, urls)
    k = j
    while k < len(text) and text[k].isspace() and text[k] != "\n":
        k += 1
    if k >= len(text) or text[k] == "\n":
        return False  # paragraph / text end handled by the caller
    if not (text[k].isalnum() or text[k] in "\"'(#"):
        return False
    word = _word_ending_at(text, i).lower()
    if word in abbreviations:
        return False
    # Keyboard-shortcut punctuation ("ctrl + .") never ends a sentence.
    prev = text[:i].rstrip()
    if word in _TERMINALS and prev.endswith("+"):
        return False
    return True


def split_sentences(
    clean_text: str,
    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS,
) -> list[Sentence]:
    """Segment clean text into sentences.

    Splits after runs of ``.!?`` that are followed by whitespace and more
    content, except after known abbreviations; paragraph breaks (newlines)
    always split. Every non-whitespace character lands in exactly one
    sentence.
    """
    sentences: list[Sentence] = []
    n = len(clean_text)
    start = 0
    while start < n:
        while start < n and clean_text[start].isspace():
            start += 1
        if start >= n:
            break
        end = start
        cut = -1
        while end < n:
            ch = clean_text[end]
            if ch == "\n":
                cut = end
                break
            if ch in _TERMINALS:
                run_end = end
                while run_end + 1 < n and clean_text[run_end + 1] in _TERMINALS:
                    run_end += 1
                if _is_split_point(clean_text, end, abbreviations):
                    cut = run_end + 1
                    break
                end = run_end
            end += 1
        if cut == -1:
            cut = n
        # Trim trailing whitespace out of the sentence span.
        span_end = cut
        while span_end > start and clean_text[span_end - 1].isspace():
            span_end -= 1
        tokens = tuple(tokenize(clean_text[start:span_end]))
        if tokens:
            sentences.append(
                Sentence(
                    index=len(sentences),
                    char_start=start,
                    char_end=span_end,
                    tokens=tokens,
                )
            )
        start = max(cut, span_end, start + 1)
    return sentences


_WS_RUN = re.compile(r"[ \t\r\f\v]+")


def normalize_whitespace(text: str) -> str:
    """Collapse space runs, preserving single-newline paragraph breaks."""
    lines = [_WS_RUN.sub(" ", line).strip() for line in text.split("\n")]
    return "\n".join(line for line in lines if line)
