"""Tutorial page collection: crawling, main-content extraction, storage.

The crawler walks allowlisted domains breadth-first through an injected
fetcher and retains pages containing the configured keyword. Main content
comes out of raw HTML via a text-density heuristic: the page is cut into
blocks at block-level tags, each block is scored by word count and link
density, and contiguous high-density runs survive while navigation,
footers and script/style noise are dropped.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
import urllib.request
from dataclasses import dataclass, field
from html.parser import HTMLParser
from pathlib import Path
from typing import Callable, Iterator
from urllib.parse import urldefrag, urljoin, urlparse

from .textseg import normalize_whitespace

log = logging.getLogger(__name__)

Fetcher = Callable[[str], bytes]


@dataclass(frozen=True)
class Document:
    id: str
    url: str
    domain: str
    raw_html: bytes
    clean_text: str
    title_guess: str | None = None
    fetched_at: float = 0.0


@dataclass(frozen=True)
class ExtractionConfig:
    """Density-heuristic knobs; defaults favor article prose."""

    min_block_words: int = 15
    max_link_density: float = 0.33


@dataclass(frozen=True)
class CrawlConfig:
    allowlist: tuple[str, ...]
    keyword: str = "photoshop"
    max_depth: int = 2
    max_pages_per_domain: int = 1000
    politeness_delay: float = 0.0
    seeds: tuple[str, ...] = ()
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.politeness_delay < 0:
            raise ValueError("politeness_delay must be >= 0")


def content_id(raw_html: bytes) -> str:
    return hashlib.sha256(raw_html).hexdigest()


_SKIP_TAGS = {
    "script",
    "style",
    "noscript",
    "template",
    "svg",
    "iframe",
    "nav",
    "footer",
    "header",
    "aside",
    "form",
    "button",
    "select",
}

_BLOCK_TAGS = {
    "p",
    "div",
    "section",
    "article",
    "main",
    "li",
    "ul",
    "ol",
    "h1",
    "h2",
    "h3",
    "h4",
    "h5",
    "h6",
    "br",
    "table",
    "tr",
    "td",
    "th",
    "blockquote",
    "pre",
    "figure",
    "figcaption",
    "dl",
    "dt",
    "dd",
    "hr",
    "body",
}


class _Block:
    __slots__ = ("parts", "link_words")

    def __init__(self):
        self.parts: list[str] = []
        self.link_words = 0

    @property
    def text(self) -> str:
        return normalize_whitespace("".join(self.parts))

    @property
    def words(self) -> int:
        return len("".join(self.parts).split())

    @property
    def link_density(self) -> float:
        words = self.words
        return self.link_words / words if words else 0.0


class _ContentParser(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.blocks: list[_Block] = [_Block()]
        self.title_parts: list[str] = []
        self.h1_parts: list[str] = []
        self._skip_depth = 0
        self._anchor_depth = 0
        self._in_title = False
        self._in_h1 = False
        self._seen_h1 = False

    def _break_block(self):
        if self.blocks[-1].parts:
            self.blocks.append(_Block())

    def handle_starttag(self, tag, attrs):
        if tag in _SKIP_TAGS:
            self._skip_depth += 1
            return
        if self._skip_depth:
            return
        if tag == "title":
            self._in_title = True
        if tag == "h1" and not self._seen_h1:
            self._in_h1 = True
        if tag == "a":
            self._anchor_depth += 1
        if tag in _BLOCK_TAGS:
            self._break_block()

    def handle_endtag(self, tag):
        if tag in _SKIP_TAGS:
            self._skip_depth = max(0, self._skip_depth - 1)
            return
        if self._skip_depth:
            return
        if tag == "title":
            self._in_title = False
        if tag == "h1" and self._in_h1:
            self._in_h1 = False
            self._seen_h1 = True
        if tag == "a":
            self._anchor_depth = max(0, self._anchor_depth - 1)
        if tag in _BLOCK_TAGS:
            self._break_block()

    def handle_startendtag(self, tag, attrs):
        if self._skip_depth:
            return
        if tag in _BLOCK_TAGS:
            self._break_block()

    def handle_data(self, data):
        if self._skip_depth:
            return
        if self._in_title:
            self.title_parts.append(data)
            return
        if self._in_h1:
            self.h1_parts.append(data)
        block = self.blocks[-1]
        block.parts.append(data)
        if self._anchor_depth:
            block.link_words += len(data.split())


def extract_main_content(
    raw_html: bytes, config: ExtractionConfig = ExtractionConfig()
) -> tuple[str, str | None]:
    """Extract (clean_text, title_guess) from raw HTML.

    Blocks pass when they hold at least ``min_block_words`` words at a link
    density of at most ``max_link_density``; a short block wedged between
    two passing neighbors is kept so headings and one-line steps survive.
    Unparseable input yields ("", None).
    """
    try:
        html = raw_html.decode("utf-8", errors="replace")
        parser = _ContentParser()
        parser.feed(html)
        parser.close()
    except Exception:
        log.warning("unparseable HTML input, returning empty text")
        return "", None

    blocks = [b for b in parser.blocks if b.text]
    passing = [
        b.words >= config.min_block_words and b.link_density <= config.max_link_density
        for b in blocks
    ]
    kept: list[str] = []
    for i, block in enumerate(blocks):
        keep = passing[i]
        if (
            not keep
            and block.words > 0
            and block.link_density <= config.max_link_density
            and 0 < i < len(blocks) - 1
            and passing[i - 1]
            and passing[i + 1]
        ):
            keep = True
        if keep:
            kept.append(block.text)

    title = normalize_whitespace("".join(parser.title_parts)) or normalize_whitespace(
        "".join(parser.h1_parts)
    )
    return "\n".join(kept), (title or None)


class _LinkParser(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.hrefs: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag == "a":
            for name, value in attrs:
                if name == "href" and value:
                    self.hrefs.append(value)


def extract_links(base_url: str, raw_html: bytes) -> list[str]:
    parser = _LinkParser()
    try:
        parser.feed(raw_html.decode("utf-8", errors="replace"))
        parser.close()
    except Exception:
        return []
    links = []
    for href in parser.hrefs:
        absolute = urldefrag(urljoin(base_url, href)).url
        if urlparse(absolute).scheme in ("http", "https"):
            links.append(absolute)
    return links


def _domain_of(url: str, allowlist: tuple[str, ...]) -> str | None:
    netloc = urlparse(url).netloc.lower()
    for domain in allowlist:
        d = domain.lower()
        if netloc == d or netloc.endswith("." + d):
            return domain
    return None


def url_fetcher(timeout: float = 20.0) -> Fetcher:
    """Real HTTP fetcher (used by the CLI; tests inject fixtures)."""

    def fetch(url: str) -> bytes:
        request = urllib.request.Request(url, headers={"User-Agent": "cpkit/0.1"})
        with urllib.request.urlopen(request, timeout=timeout) as response:
            return response.read()

    return fetch


def crawl(config: CrawlConfig, fetcher: Fetcher) -> Iterator[Document]:
    """Breadth-first crawl of the allowlisted domains.

    Yields a Document for every reachable page whose extracted text (title
    included) contains the keyword, case-insensitively. Fetch failures are
    logged and skipped; URLs outside the allowlist are never fetched.
    """
    seeds = list(config.seeds) or [f"https://{d}/" for d in config.allowlist]
    queue: list[tuple[str, int]] = []
    seen: set[str] = set()
    for seed in seeds:
        url = urldefrag(seed).url
        if _domain_of(url, config.allowlist) is not None and url not in seen:
            queue.append((url, 0))
            seen.add(url)
    pages_per_domain: dict[str, int] = {}
    last_fetch: dict[str, float] = {}
    keyword = config.keyword.lower()

    while queue:
        url, depth = queue.pop(0)
        domain = _domain_of(url, config.allowlist)
        if domain is None:
            continue
        if pages_per_domain.get(domain, 0) >= config.max_pages_per_domain:
            continue
        if config.politeness_delay > 0:
            elapsed = time.monotonic() - last_fetch.get(domain, 0.0)
            if elapsed < config.politeness_delay:
                time.sleep(config.politeness_delay - elapsed)
        try:
            raw = fetcher(url)
        except Exception as exc:
            log.warning("fetch failed for %s: %s", url, exc)
            continue
        finally:
            last_fetch[domain] = time.monotonic()
        pages_per_domain[domain] = pages_per_domain.get(domain, 0) + 1

        clean_text, title = extract_main_content(raw, config.extraction)
        haystack = (clean_text + "\n" + (title or "")).lower()
        if clean_text and keyword in haystack:
            yield Document(
                id=content_id(raw),
                url=url,
                domain=domain,
                raw_html=raw,
                clean_text=clean_text,
                title_guess=title,
                fetched_at=time.time(),
            )
        if depth < config.max_depth:
            for link in extract_links(url, raw):
                if link in seen:
                    continue
                seen.add(link)
                if _domain_of(link, config.allowlist) is not None:
                    queue.append((link, depth + 1))


class DocumentStore:
    """On-disk corpus: one directory per domain with a metadata JSONL file
    and raw HTML blobs keyed by content hash."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._index: dict[str, tuple[str, dict]] = {}
        self._load()

    def _load(self) -> None:
        for meta_path in sorted(self.root.glob("*/documents.jsonl")):
            domain = meta_path.parent.name
            with open(meta_path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    meta = json.loads(line)
                    self._index[meta["id"]] = (domain, meta)

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._index

    def ids(self) -> list[str]:
        return sorted(self._index)

    def add(self, doc: Document) -> bool:
        """Store a document; returns False if its id is already present."""
        if doc.id in self._index:
            return False
        domain_dir = self.root / (doc.domain or "unknown")
        blobs = domain_dir / "blobs"
        blobs.mkdir(parents=True, exist_ok=True)
        (blobs / f"{doc.id}.html").write_bytes(doc.raw_html)
        meta = {
            "id": doc.id,
            "url": doc.url,
            "domain": doc.domain,
            "title_guess": doc.title_guess,
            "fetched_at": doc.fetched_at,
            "clean_text": doc.clean_text,
        }
        with open(domain_dir / "documents.jsonl", "a", encoding="utf-8") as fh:
            fh.write(json.dumps(meta, ensure_ascii=False) + "\n")
        self._index[doc.id] = (doc.domain or "unknown", meta)
        return True

    def _to_document(self, meta: dict, domain: str, load_html: bool) -> Document:
        raw = b""
        if load_html:
            blob = self.root / domain / "blobs" / f"{meta['id']}.html"
            raw = blob.read_bytes() if blob.exists() else b""
        return Document(
            id=meta["id"],
            url=meta["url"],
            domain=meta["domain"],
            raw_html=raw,
            clean_text=meta["clean_text"],
            title_guess=meta.get("title_guess"),
            fetched_at=meta.get("fetched_at", 0.0),
        )

    def get(self, doc_id: str, load_html: bool = False) -> Document:
        if doc_id not in self._index:
            raise KeyError(doc_id)
        domain, meta = self._index[doc_id]
        return self._to_document(meta, domain, load_html)

    def iter_documents(self, load_html: bool = False) -> Iterator[Document]:
        for doc_id in self.ids():
            yield self.get(doc_id, load_html)

    def update_clean_text(self, doc_id: str, clean_text: str, title_guess: str | None) -> None:
        """Rewrite extraction output for one document (re-clean pass)."""
        domain, meta = self._index[doc_id]
        meta = dict(meta, clean_text=clean_text, title_guess=title_guess)
        self._index[doc_id] = (domain, meta)
        meta_path = self.root / domain / "documents.jsonl"
        rows = [m for d, m in (self._index[i] for i in self.ids()) if d == domain]
        tmp = meta_path.with_suffix(".jsonl.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        tmp.replace(meta_path)
