"""Posts, source annotations and predictions: parsing, labeling, splits, coverage."""

from __future__ import annotations

import csv
import enum
import functools
import io
import json
import logging
import re
import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Mapping, NamedTuple, Sequence

import numpy as np
import orjson

log = logging.getLogger(__name__)

__all__ = [
    "Label",
    "BinaryClass",
    "VolkovaCategory",
    "Factualness",
    "Bias",
    "MBFC_FLAGS",
    "Post",
    "MonthKey",
    "SourceAnnotation",
    "LabeledPost",
    "PredictionRecord",
    "DomainList",
    "FormatConfig",
    "ParseStats",
    "iter_archive",
    "parse_archive",
    "serialize_posts",
    "extract_domain",
    "label_posts",
    "build_dataset",
    "measure_coverage",
    "read_annotations",
    "write_annotations",
    "read_non_news",
    "read_predictions",
    "write_predictions",
]


class _Ordinal(str, enum.Enum):
    """String enum parsed leniently from table cells ("Very Low" -> very_low)."""

    @classmethod
    def parse(cls, text: str | None):
        key = (text or "").strip().lower().replace(" ", "_").replace("-", "_")
        if not key:
            return cls("unlabeled")
        return cls(key)

    def __str__(self) -> str:
        return self.value


class Label(_Ordinal):
    CREDIBLE = "credible"
    DECEPTIVE = "deceptive"


class BinaryClass(_Ordinal):
    CREDIBLE = "credible"
    DECEPTIVE = "deceptive"
    UNLABELED = "unlabeled"


class VolkovaCategory(_Ordinal):
    VERIFIED = "verified"
    PROPAGANDA = "propaganda"
    SATIRE = "satire"
    CLICKBAIT = "clickbait"
    CONSPIRACY = "conspiracy"
    HOAX = "hoax"
    UNLABELED = "unlabeled"


class Factualness(_Ordinal):
    VERY_LOW = "very_low"
    LOW = "low"
    MIXED = "mixed"
    MOSTLY = "mostly"
    HIGH = "high"
    VERY_HIGH = "very_high"
    UNLABELED = "unlabeled"


class Bias(_Ordinal):
    EXTREME_LEFT = "extreme_left"
    LEFT = "left"
    CENTER_LEFT = "center_left"
    CENTER = "center"
    CENTER_RIGHT = "center_right"
    RIGHT = "right"
    EXTREME_RIGHT = "extreme_right"
    UNLABELED = "unlabeled"


MBFC_FLAGS = ("questionable", "satire", "conspiracy", "retired")


class Post(NamedTuple):
    id: str
    author: str
    community: str
    created: int
    domain: str
    score: int
    removed: bool
    title: str = ""

    @property
    def month(self) -> MonthKey:
        return MonthKey.from_timestamp(self.created)


@dataclass(frozen=True, order=True, slots=True)
class MonthKey:
    """A calendar month in UTC. Orders chronologically."""

    year: int
    month: int

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise ValueError(f"month out of range: {self.month}")

    @classmethod
    def from_timestamp(cls, ts: float) -> MonthKey:
        t = time.gmtime(ts)
        return cls(t.tm_year, t.tm_mon)

    @classmethod
    def from_index(cls, index: int) -> MonthKey:
        year, m = divmod(index, 12)
        return cls(year, m + 1)

    @property
    def index(self) -> int:
        """Months since year 0; consecutive months differ by exactly 1."""
        return self.year * 12 + self.month - 1

    def shift(self, months: int) -> MonthKey:
        return MonthKey.from_index(self.index + months)

    def succ(self) -> MonthKey:
        return self.shift(1)

    def pred(self) -> MonthKey:
        return self.shift(-1)

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


_DECEPTIVE_CATEGORIES = frozenset(
    {
        VolkovaCategory.PROPAGANDA,
        VolkovaCategory.SATIRE,
        VolkovaCategory.CLICKBAIT,
        VolkovaCategory.CONSPIRACY,
        VolkovaCategory.HOAX,
    }
)


@dataclass(frozen=True, slots=True)
class SourceAnnotation:
    domain: str
    binary_class: BinaryClass = BinaryClass.UNLABELED
    volkova_category: VolkovaCategory = VolkovaCategory.UNLABELED
    mbfc_factualness: Factualness = Factualness.UNLABELED
    mbfc_bias: Bias = Bias.UNLABELED
    mbfc_flags: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.domain:
            raise ValueError("annotation domain must be non-empty")
        cat = self.volkova_category
        if cat is VolkovaCategory.VERIFIED and self.binary_class is not BinaryClass.CREDIBLE:
            raise ValueError(f"{self.domain}: verified source must be credible")
        if cat in _DECEPTIVE_CATEGORIES and self.binary_class is not BinaryClass.DECEPTIVE:
            raise ValueError(f"{self.domain}: {cat} source must be deceptive")
        unknown = set(self.mbfc_flags) - set(MBFC_FLAGS)
        if unknown:
            raise ValueError(f"{self.domain}: unknown MBFC flags {sorted(unknown)}")

    @property
    def is_volkova_labeled(self) -> bool:
        return self.volkova_category is not VolkovaCategory.UNLABELED

    @property
    def is_mbfc_labeled(self) -> bool:
        return (
            self.mbfc_factualness is not Factualness.UNLABELED
            or self.mbfc_bias is not Bias.UNLABELED
            or bool(self.mbfc_flags)
        )


@dataclass(frozen=True, slots=True)
class LabeledPost:
    post: Post
    true_class: Label
    annotation: SourceAnnotation

    @property
    def id(self) -> str:
        return self.post.id


@dataclass(frozen=True, slots=True)
class PredictionRecord:
    post_id: str
    p_deceptive: float
    predicted_class: Label

    @classmethod
    def from_probability(cls, post_id: str, p_deceptive: float, threshold: float = 0.5):
        if not 0.0 <= p_deceptive <= 1.0:
            raise ValueError(f"p_deceptive out of [0, 1] for {post_id!r}: {p_deceptive}")
        cls_ = Label.DECEPTIVE if p_deceptive >= threshold else Label.CREDIBLE
        return cls(post_id, float(p_deceptive), cls_)

    def true_class_confidence(self, true_class: Label) -> float:
        if true_class is Label.DECEPTIVE:
            return self.p_deceptive
        return 1.0 - self.p_deceptive


@dataclass(frozen=True)
class DomainList:
    entries: frozenset[str]
    kind: str = "non_news"

    def __post_init__(self):
        if any(not e for e in self.entries):
            raise ValueError("domain list entries must be non-empty")

    def __contains__(self, domain: object) -> bool:
        return domain in self.entries

    def __len__(self) -> int:
        return len(self.entries)


# --------------------------------------------------------------------------
# Archive parsing


_SCHEME = re.compile(r"[A-Za-z][A-Za-z0-9+.\-]*:")


@functools.lru_cache(maxsize=1 << 16)
def _canonical_host(scheme: str, netloc: str) -> str:
    scheme = scheme.lstrip()
    if scheme and not _SCHEME.fullmatch(scheme):
        return ""
    host = netloc.partition("?")[0].partition("#")[0].rpartition("@")[2]
    if host.startswith("["):
        host = host[1 : host.find("]")] if "]" in host else ""
    else:
        host = host.partition(":")[0]
    host = host.strip().lower().rstrip(".")
    if not host or any(c.isspace() for c in host):
        return ""
    if host.startswith("www."):
        host = host[4:]
    return host


def extract_domain(url: str) -> str:
    """Canonical source domain of ``url``.

    Lowercases the host, strips a single leading ``www.`` and drops
    userinfo, port, path and query. Returns ``""`` when no host is present.

    >>> extract_domain("http://WWW.Breitbart.com/x")
    'breitbart.com'
    >>> extract_domain("not a url")
    ''
    """
    parts = url.split("/", 3)
    if len(parts) < 3 or parts[1]:
        return ""
    return _canonical_host(parts[0], parts[2])


@dataclass
class FormatConfig:
    """Record field names for each Post attribute.

    ``removed`` names a field whose non-null value marks the post as removed.
    """

    id: str = "id"
    author: str = "author"
    community: str = "subreddit"
    created: str = "created_utc"
    url: str = "url"
    score: str = "score"
    removed: str = "removed_by_category"
    title: str = "title"

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str]) -> FormatConfig:
        unknown = set(mapping) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown format fields: {sorted(unknown)}")
        return cls(**mapping)

    @classmethod
    def load(cls, path) -> FormatConfig:
        with open(path, encoding="utf-8") as fh:
            return cls.from_mapping(json.load(fh))


@dataclass
class ParseStats:
    lines: int = 0
    posts: int = 0
    skipped: int = 0
    bytes: int = 0
    skip_reasons: dict[str, int] = field(default_factory=dict)

    def skip(self, reason: str) -> None:
        self.skipped += 1
        self.skip_reasons[reason] = self.skip_reasons.get(reason, 0) + 1

    @property
    def skip_rate(self) -> float:
        return self.skipped / self.lines if self.lines else 0.0

    def merge(self, other: ParseStats) -> None:
        self.lines += other.lines
        self.posts += other.posts
        self.bytes += other.bytes
        self.skipped += other.skipped
        for k, v in other.skip_reasons.items():
            self.skip_reasons[k] = self.skip_reasons.get(k, 0) + v


class _BadRecord(ValueError):
    pass


def _as_int(value) -> int:
    if type(value) is int:
        return value
    if isinstance(value, bool):
        raise _BadRecord("bool")
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            raise _BadRecord("non-finite")
        return int(value)
    if isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            return _as_int(float(value))
    raise _BadRecord(type(value).__name__)


def _to_post(rec, cfg: FormatConfig) -> Post:
    if type(rec) is not dict:
        raise _BadRecord("not an object")
    try:
        pid = rec[cfg.id]
        community = rec[cfg.community]
        created = _as_int(rec[cfg.created])
    except KeyError as exc:
        raise _BadRecord(f"missing {exc.args[0]}") from None
    except (TypeError, ValueError) as exc:
        raise _BadRecord("bad created") from exc
    if type(pid) is not str or not pid:
        raise _BadRecord("bad id")
    if type(community) is not str or not community:
        raise _BadRecord("bad community")
    if created <= 0:
        raise _BadRecord("bad created")
    author = rec.get(cfg.author) or ""
    url = rec.get(cfg.url) or ""
    title = rec.get(cfg.title) or ""
    if type(author) is not str or type(url) is not str or type(title) is not str:
        raise _BadRecord("bad string field")
    score = rec.get(cfg.score) or 0
    if type(score) is not int:
        try:
            score = _as_int(score)
        except (TypeError, ValueError) as exc:
            raise _BadRecord("bad score") from exc
    return Post(
        pid,
        author,
        community,
        created,
        extract_domain(url) if url else "",
        score,
        rec.get(cfg.removed) is not None,
        title,
    )


def iter_archive(
    stream: IO[bytes],
    config: FormatConfig | None = None,
    stats: ParseStats | None = None,
    *,
    block_bytes: int = 1 << 20,
) -> Iterator[Post]:
    """Yield posts from a newline-delimited JSON byte stream, in input order.

    Malformed or invalid records are skipped and tallied in ``stats``; blank
    lines are ignored. Posts repeating an earlier id are skipped as
    duplicates. I/O errors on the stream propagate.
    """
    cfg = config or FormatConfig()
    stats = stats if stats is not None else ParseStats()
    seen: set[str] = set()
    loads = orjson.loads
    while True:
        raw = stream.readlines(block_bytes)
        if not raw:
            break
        block = []
        for line in raw:
            stats.bytes += len(line)
            if line.isspace():
                continue
            stats.lines += 1
            try:
                post = _to_post(loads(line), cfg)
            except orjson.JSONDecodeError:
                stats.skip("invalid json")
                continue
            except _BadRecord as exc:
                stats.skip(str(exc))
                continue
            if post.id in seen:
                stats.skip("duplicate id")
                continue
            seen.add(post.id)
            block.append(post)
        stats.posts += len(block)
        yield from block


def parse_archive(
    stream: IO[bytes], config: FormatConfig | None = None
) -> tuple[list[Post], ParseStats]:
    stats = ParseStats()
    posts = list(iter_archive(stream, config, stats))
    if stats.skipped:
        log.info("skipped %d of %d archive lines: %s", stats.skipped, stats.lines, stats.skip_reasons)
    return posts, stats


def serialize_posts(posts: Iterable[Post], stream: IO[bytes], config: FormatConfig | None = None) -> None:
    """Write posts as NDJSON that :func:`parse_archive` reads back unchanged."""
    cfg = config or FormatConfig()
    for p in posts:
        rec = {
            cfg.id: p.id,
            cfg.author: p.author,
            cfg.community: p.community,
            cfg.created: p.created,
            cfg.url: f"https://{p.domain}/" if p.domain else "",
            cfg.score: p.score,
            cfg.removed: "moderator" if p.removed else None,
            cfg.title: p.title,
        }
        stream.write(json.dumps(rec, ensure_ascii=False).encode("utf-8") + b"\n")


# --------------------------------------------------------------------------
# Tables


ANNOTATION_COLUMNS = ("domain", "binary_class", "volkova_category", "mbfc_factualness", "mbfc_bias", "mbfc_flags")


def read_annotations(fh: IO[str]) -> dict[str, SourceAnnotation]:
    reader = csv.DictReader(fh)
    missing = set(ANNOTATION_COLUMNS) - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"annotation table missing columns: {sorted(missing)}")
    table = {}
    for row in reader:
        domain = extract_domain("//" + row["domain"].strip()) or row["domain"].strip().lower()
        flags = frozenset(f.strip().lower() for f in (row["mbfc_flags"] or "").split(";") if f.strip())
        table[domain] = SourceAnnotation(
            domain=domain,
            binary_class=BinaryClass.parse(row["binary_class"]),
            volkova_category=VolkovaCategory.parse(row["volkova_category"]),
            mbfc_factualness=Factualness.parse(row["mbfc_factualness"]),
            mbfc_bias=Bias.parse(row["mbfc_bias"]),
            mbfc_flags=flags,
        )
    return table


def write_annotations(annotations: Iterable[SourceAnnotation], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(ANNOTATION_COLUMNS)
    for a in sorted(annotations, key=lambda a: a.domain):
        writer.writerow(
            [a.domain, a.binary_class, a.volkova_category, a.mbfc_factualness, a.mbfc_bias, ";".join(sorted(a.mbfc_flags))]
        )


def read_non_news(fh: IO[str]) -> DomainList:
    entries = set()
    for line in fh:
        line = line.split("#", 1)[0].strip().lower()
        if line:
            entries.add(line[4:] if line.startswith("www.") else line)
    return DomainList(frozenset(entries))


def read_predictions(fh: IO[str], threshold: float = 0.5) -> dict[str, PredictionRecord]:
    reader = csv.DictReader(fh)
    if not {"post_id", "p_deceptive"} <= set(reader.fieldnames or ()):
        raise ValueError("prediction file needs columns post_id,p_deceptive")
    out = {}
    for row in reader:
        rec = PredictionRecord.from_probability(row["post_id"], float(row["p_deceptive"]), threshold)
        out[rec.post_id] = rec
    return out


def write_predictions(predictions: Iterable[PredictionRecord], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["post_id", "p_deceptive"])
    for p in predictions:
        writer.writerow([p.post_id, repr(p.p_deceptive)])


# --------------------------------------------------------------------------
# Labeling and dataset construction


@dataclass
class LabelStats:
    labeled: int = 0
    dropped: int = 0


def label_posts(
    posts: Iterable[Post],
    annotations: Mapping[str, SourceAnnotation],
    stats: LabelStats | None = None,
) -> list[LabeledPost]:
    """Propagate each source's binary class to the posts linking to it.

    Posts whose domain has no binary class are dropped and counted in
    ``stats.dropped``.
    """
    stats = stats if stats is not None else LabelStats()
    out = []
    for post in posts:
        ann = annotations.get(post.domain) if post.domain else None
        if ann is None or ann.binary_class is BinaryClass.UNLABELED:
            stats.dropped += 1
            continue
        out.append(LabeledPost(post, Label(ann.binary_class.value), ann))
    stats.labeled += len(out)
    return out


def build_dataset(
    labeled: Sequence[LabeledPost], seed: int, test_fraction: float = 0.2
) -> tuple[list[LabeledPost], list[LabeledPost]]:
    """Balance the classes by down-sampling, then split stratified by class.

    The majority class is down-sampled without replacement to exactly the
    minority size. Each class contributes ``round(test_fraction * size)``
    posts to the test set. Both returned lists are sorted by post id.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    by_class = {c: sorted((lp for lp in labeled if lp.true_class is c), key=lambda lp: lp.id) for c in Label}
    if any(not v for v in by_class.values()):
        raise ValueError("cannot stratify single-class data")
    rng = np.random.default_rng(seed)
    keep = min(len(v) for v in by_class.values())
    train, test = [], []
    for c in (Label.CREDIBLE, Label.DECEPTIVE):
        members = by_class[c]
        chosen = rng.choice(len(members), size=keep, replace=False)
        n_test = int(round(test_fraction * keep))
        test.extend(members[i] for i in chosen[:n_test])
        train.extend(members[i] for i in chosen[n_test:])
    train.sort(key=lambda lp: lp.id)
    test.sort(key=lambda lp: lp.id)
    return train, test


# --------------------------------------------------------------------------
# Coverage


def _is_labeled(ann: SourceAnnotation | None, family: str) -> bool:
    if ann is None:
        return False
    if family == "volkova":
        return ann.is_volkova_labeled
    if family == "mbfc":
        return ann.is_mbfc_labeled
    if family == "binary":
        return ann.binary_class is not BinaryClass.UNLABELED
    if family == "any":
        return ann.binary_class is not BinaryClass.UNLABELED or ann.is_volkova_labeled or ann.is_mbfc_labeled
    raise ValueError(f"unknown annotation family {family!r}")


def measure_coverage(
    posts: Iterable[Post],
    annotations: Mapping[str, SourceAnnotation],
    non_news: DomainList | Iterable[str] = (),
    family: str = "any",
) -> dict[MonthKey, float]:
    """Fraction of potential news links per month that carry a label.

    A potential news link is a post with a non-empty domain that is not on
    the non-news list. ``family`` selects which labels count: ``"volkova"``,
    ``"mbfc"``, ``"binary"`` or ``"any"``. Months without potential news
    links are omitted.
    """
    excluded = non_news if isinstance(non_news, DomainList) else DomainList(frozenset(non_news))
    potential: dict[MonthKey, int] = defaultdict(int)
    labeled: dict[MonthKey, int] = defaultdict(int)
    for post in posts:
        if not post.domain or post.domain in excluded:
            continue
        m = post.month
        potential[m] += 1
        if _is_labeled(annotations.get(post.domain), family):
            labeled[m] += 1
    return {m: labeled[m] / n for m, n in sorted(potential.items())}


def read_archive_path(path, config: FormatConfig | None = None) -> tuple[list[Post], ParseStats]:
    """Parse an archive file; ``.gz`` files are decompressed on the fly."""
    path = str(path)
    if path.endswith(".gz"):
        import gzip

        with gzip.open(path, "rb") as fh:
            return parse_archive(io.BufferedReader(fh), config)
    with open(path, "rb") as fh:
        return parse_archive(fh, config)
