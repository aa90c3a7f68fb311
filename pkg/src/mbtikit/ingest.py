"""Forum corpus ingestion: HTML post extraction, the 50-character
length filter, the per-section recency cap, and JSONL persistence.

Live scraping sits behind the ``Fetcher`` interface so every downstream
stage can run from committed fixture pages alone.
"""

from __future__ import annotations

import json
import logging
import time
import urllib.robotparser
from dataclasses import dataclass, field
from html.parser import HTMLParser
from pathlib import Path
from typing import Iterable, Optional, Protocol

from .types import MbtiType, parse_type

log = logging.getLogger(__name__)

DEFAULT_MIN_CHARS = 50
DEFAULT_POST_CAP = 5000


class CorpusFormatError(ValueError):
    """A corpus file line violates the JSONL schema."""


@dataclass(frozen=True)
class RawPost:
    body: str
    section_label: MbtiType
    post_index: int  # recency rank within its section, 0 = most recent
    source_url: str = ""


@dataclass
class Corpus:
    posts: list[RawPost] = field(default_factory=list)

    @property
    def post_count(self) -> int:
        return len(self.posts)

    @property
    def word_count(self) -> int:
        return sum(len(p.body.split()) for p in self.posts)


def corpus_stats(corpus: Corpus) -> tuple[int, int]:
    """(post count, whitespace-delimited word count over raw bodies)."""
    return corpus.post_count, corpus.word_count


class _PostExtractor(HTMLParser):
    """Pulls post bodies out of a thread page.

    Post content lives in ``<article class="post">`` inside a
    ``class="message"`` element. Quoted replies (``<blockquote>``) and
    signatures (``class="signature"``) repeat other users' language and
    are dropped.
    """

    _VOID_TAGS = frozenset(
        {"br", "hr", "img", "input", "meta", "link", "area", "base", "col",
         "embed", "source", "track", "wbr"}
    )

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.bodies: list[str] = []
        # stack entries: (tag, role) where role is one of
        # "post" | "message" | "skip" | None
        self._stack: list[tuple[str, str | None]] = []
        self._buf: list[str] = []

    @staticmethod
    def _classes(attrs) -> set[str]:
        for name, value in attrs:
            if name == "class" and value:
                return set(value.split())
        return set()

    def _depth(self, role: str) -> bool:
        return any(r == role for _, r in self._stack)

    def handle_starttag(self, tag, attrs):
        if tag in self._VOID_TAGS:
            if tag == "br" and self._depth("message") and not self._depth("skip"):
                self._buf.append(" ")
            return
        classes = self._classes(attrs)
        role = None
        if tag == "blockquote" or "signature" in classes:
            role = "skip"
        elif tag == "article" and "post" in classes:
            role = "post"
        elif self._depth("post") and "message" in classes:
            role = "message"
        self._stack.append((tag, role))

    def handle_endtag(self, tag):
        # pop to the nearest matching open tag, tolerating bad nesting
        for i in range(len(self._stack) - 1, -1, -1):
            if self._stack[i][0] == tag:
                closed = self._stack[i:]
                del self._stack[i:]
                if any(r == "post" for _, r in closed):
                    body = " ".join("".join(self._buf).split())
                    self._buf.clear()
                    if body:
                        self.bodies.append(body)
                return

    def handle_data(self, data):
        if self._depth("message") and not self._depth("skip"):
            self._buf.append(data)


def extract_posts(html_page: str, section_label: MbtiType) -> list[RawPost]:
    """Extract post bodies in page order with recency indices.

    Malformed markup yields an empty list and a logged diagnostic,
    never an exception.
    """
    parser = _PostExtractor()
    try:
        parser.feed(html_page)
        parser.close()
    except Exception as exc:  # html.parser rarely raises, but be safe
        log.warning("failed to parse page for %s: %s", section_label, exc)
        return []
    return [
        RawPost(body=body, section_label=section_label, post_index=i)
        for i, body in enumerate(parser.bodies)
    ]


def filter_posts(
    posts: Iterable[RawPost], min_chars: int = DEFAULT_MIN_CHARS
) -> list[RawPost]:
    """Keep posts whose raw body is strictly longer than ``min_chars``
    ("over 50 characters"). Order preserved."""
    return [p for p in posts if len(p.body) > min_chars]


def cap_recent(posts: Iterable[RawPost], n: int = DEFAULT_POST_CAP) -> list[RawPost]:
    """Keep the ``n`` most recent posts (smallest recency indices) of a
    single section; fewer than ``n`` means keep all."""
    return sorted(posts, key=lambda p: p.post_index)[:n]


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for p in corpus.posts:
            fh.write(
                json.dumps(
                    {
                        "type": p.section_label.letters,
                        "body": p.body,
                        "idx": p.post_index,
                        "url": p.source_url,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_corpus(path: str | Path) -> Corpus:
    path = Path(path)
    posts: list[RawPost] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: invalid JSON: {exc}")
            for key in ("type", "body", "idx"):
                if key not in rec:
                    raise CorpusFormatError(
                        f"{path}:{lineno}: missing field {key!r}"
                    )
            try:
                label = parse_type(rec["type"])
            except ValueError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: {exc}")
            posts.append(
                RawPost(
                    body=rec["body"],
                    section_label=label,
                    post_index=int(rec["idx"]),
                    source_url=rec.get("url", ""),
                )
            )
    return Corpus(posts=posts)


class Fetcher(Protocol):
    """Source of raw thread-listing pages for a forum section."""

    def fetch(self, section: MbtiType, page: int) -> Optional[str]:
        """Return the HTML of 1-based ``page`` or None past the end."""
        ...


class FixtureFetcher:
    """Reads pages from files named ``{type}_page{n}.html`` in a
    directory. The tests (and offline runs) use this exclusively."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    def fetch(self, section: MbtiType, page: int) -> Optional[str]:
        path = self.directory / f"{section.letters.lower()}_page{page}.html"
        if not path.exists():
            return None
        return path.read_text(encoding="utf-8")


class HttpFetcher:
    """Rate-limited HTTP pager honoring robots exclusion.

    Default one request per second; never used by the test suite.
    """

    def __init__(self, base_url: str, delay: float = 1.0, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.delay = delay
        self.timeout = timeout
        self._last_request = 0.0
        self._robots = urllib.robotparser.RobotFileParser()
        try:
            self._robots.set_url(self.base_url + "/robots.txt")
            self._robots.read()
        except Exception:
            log.warning("could not read robots.txt from %s", self.base_url)

    def _url(self, section: MbtiType, page: int) -> str:
        return f"{self.base_url}/forums/{section.letters.lower()}/page-{page}"

    def fetch(self, section: MbtiType, page: int) -> Optional[str]:
        import requests

        url = self._url(section, page)
        if not self._robots.can_fetch("*", url):
            log.warning("robots.txt disallows %s", url)
            return None
        wait = self.delay - (time.monotonic() - self._last_request)
        if wait > 0:
            time.sleep(wait)
        self._last_request = time.monotonic()
        resp = requests.get(url, timeout=self.timeout)
        if resp.status_code == 404:
            return None
        resp.raise_for_status()
        return resp.text


def scrape_section(
    fetcher: Fetcher,
    section: MbtiType,
    max_posts: int = DEFAULT_POST_CAP,
    min_chars: int = DEFAULT_MIN_CHARS,
) -> list[RawPost]:
    """Page through one section: extract, length-filter, cap."""
    collected: list[RawPost] = []
    page = 1
    next_index = 0
    while len(collected) < max_posts:
        html = fetcher.fetch(section, page)
        if html is None:
            break
        posts = extract_posts(html, section)
        if not posts:
            break
        reindexed = [
            RawPost(
                body=p.body,
                section_label=p.section_label,
                post_index=next_index + i,
                source_url=p.source_url,
            )
            for i, p in enumerate(posts)
        ]
        next_index += len(posts)
        collected.extend(filter_posts(reindexed, min_chars))
        page += 1
    return cap_recent(collected, max_posts)
