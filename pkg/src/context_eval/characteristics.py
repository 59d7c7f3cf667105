"""Community and author context characteristics.

Counts are accumulated per (entity, month) into a dense matrix whose columns
follow ``<family>.<label>.count``; fractions are derived afterwards by
dividing by ``general.links``. Author vectors are rolling sums over the
current and preceding months.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from collections.abc import Mapping
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .core import (
    MBFC_FLAGS,
    Bias,
    BinaryClass,
    DomainList,
    Factualness,
    MonthKey,
    Post,
    SourceAnnotation,
    VolkovaCategory,
)

__all__ = [
    "FAMILIES",
    "GENERAL_COLUMNS",
    "GINI_COLUMN",
    "count_columns",
    "frac_columns",
    "CharacteristicVector",
    "CharacteristicTable",
    "AcceptanceScore",
    "gini",
    "aggregate_community",
    "aggregate_rolling",
    "aggregate_author_rolling",
    "normalize_scores",
    "entity_profile",
    "write_dump",
    "read_dump",
]

GENERAL_COLUMNS = (
    "general.posts",
    "general.linkposts",
    "general.removed",
    "general.links",
    "general.potential_news_links",
)
GINI_COLUMN = "gini.links_per_contributor"

# label families that partition the links (each link has exactly one label)
FAMILIES: dict[str, tuple[str, ...]] = {
    "binary_class": tuple(c.value for c in BinaryClass),
    "volkova_category": tuple(c.value for c in VolkovaCategory),
    "mbfc_factualness": tuple(c.value for c in Factualness),
    "mbfc_bias": tuple(c.value for c in Bias),
}
# MBFC flags are multi-label: a link may carry several or none
FLAG_FAMILY = "mbfc_flag"


def count_columns() -> list[str]:
    cols = list(GENERAL_COLUMNS)
    for fam, labels in FAMILIES.items():
        cols += [f"{fam}.{lab}.count" for lab in labels]
    cols += [f"{FLAG_FAMILY}.{flag}.count" for flag in MBFC_FLAGS]
    return cols


def frac_columns() -> list[str]:
    cols = []
    for fam, labels in FAMILIES.items():
        cols += [f"{fam}.{lab}.frac" for lab in labels]
    cols += [f"{FLAG_FAMILY}.{flag}.frac" for flag in MBFC_FLAGS]
    return cols


_COUNT_COLS = count_columns()
_COUNT_INDEX = {c: i for i, c in enumerate(_COUNT_COLS)}


def is_self_reference(domain: str) -> bool:
    """True for the reddit host itself, which self posts link back to."""
    return domain == "reddit.com" or domain.endswith(".reddit.com")


@dataclass(frozen=True)
class CharacteristicVector:
    entity_kind: str
    entity: str
    month: MonthKey
    values: dict[str, float]

    @property
    def key(self) -> tuple[str, str, MonthKey]:
        return (self.entity_kind, self.entity, self.month)

    def __getitem__(self, name: str) -> float:
        return self.values[name]


class CharacteristicTable(Mapping):
    """Characteristic vectors for one entity kind, stored as a dense matrix.

    Maps ``(entity, MonthKey)`` to :class:`CharacteristicVector`. Rows are
    sorted by entity then month.
    """

    def __init__(self, entity_kind: str, keys: Sequence[tuple[str, MonthKey]], columns: Sequence[str], values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (len(keys), len(columns)):
            raise ValueError(f"value matrix shape {values.shape} does not match keys/columns")
        self.entity_kind = entity_kind
        self.keys_ = list(keys)
        self.columns = list(columns)
        self.values = values
        self._rows = {k: i for i, k in enumerate(self.keys_)}
        self._cols = {c: i for i, c in enumerate(self.columns)}

    def __getitem__(self, key: tuple[str, MonthKey]) -> CharacteristicVector:
        row = self.values[self._rows[key]]
        return CharacteristicVector(self.entity_kind, key[0], key[1], dict(zip(self.columns, row.tolist())))

    def __iter__(self) -> Iterator[tuple[str, MonthKey]]:
        return iter(self.keys_)

    def __len__(self) -> int:
        return len(self.keys_)

    def __contains__(self, key) -> bool:
        return key in self._rows

    def row(self, key: tuple[str, MonthKey]) -> np.ndarray:
        """Row for ``key``; an all-zero row when the key is absent."""
        i = self._rows.get(key)
        if i is None:
            return np.zeros(len(self.columns))
        return self.values[i]

    def rows(self, keys: Iterable[tuple[str, MonthKey]]) -> np.ndarray:
        idx = np.array([self._rows.get(k, -1) for k in keys], dtype=np.int64)
        out = np.zeros((len(idx), len(self.columns)))
        hit = idx >= 0
        out[hit] = self.values[idx[hit]]
        return out

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self._cols[name]]

    def col_index(self, name: str) -> int:
        return self._cols[name]

    def value(self, key: tuple[str, MonthKey], name: str) -> float:
        i = self._rows.get(key)
        return 0.0 if i is None else float(self.values[i, self._cols[name]])


@dataclass(frozen=True, slots=True)
class AcceptanceScore:
    post_id: str
    normalized_score: float
    defined: bool = True


def gini(links_per_contributor) -> float:
    """Gini coefficient of non-negative contributor activity counts.

    Uses the population mean-absolute-difference form, evaluated in
    O(n log n) through the sorted-rank identity.

    >>> gini([3, 1])
    0.25
    """
    x = np.sort(np.asarray(links_per_contributor, dtype=np.float64))
    n = x.size
    if n == 0:
        raise ValueError("undefined Gini: empty input")
    if x[0] < 0:
        raise ValueError("undefined Gini: negative values")
    total = x.sum()
    if total <= 0:
        raise ValueError("undefined Gini: all-zero input")
    ranks = 2.0 * np.arange(1, n + 1) - n - 1
    return float(np.dot(ranks, x) / (n * total))


# --------------------------------------------------------------------------
# Aggregation


def _domain_columns(ann: SourceAnnotation | None) -> tuple[int, ...]:
    if ann is None:
        labels = {fam: "unlabeled" for fam in FAMILIES}
        flags: Iterable[str] = ()
    else:
        labels = {
            "binary_class": ann.binary_class.value,
            "volkova_category": ann.volkova_category.value,
            "mbfc_factualness": ann.mbfc_factualness.value,
            "mbfc_bias": ann.mbfc_bias.value,
        }
        flags = sorted(ann.mbfc_flags)
    cols = [_COUNT_INDEX[f"{fam}.{lab}.count"] for fam, lab in labels.items()]
    cols += [_COUNT_INDEX[f"{FLAG_FAMILY}.{f}.count"] for f in flags]
    return tuple(cols)


@dataclass
class _Monthly:
    entities: list[str]
    entity_codes: np.ndarray  # per post
    month_idx: np.ndarray  # per post
    is_link: np.ndarray  # per post
    keys: np.ndarray  # sorted unique combined keys
    row_of_post: np.ndarray
    counts: np.ndarray


_SHIFT = 1 << 20  # > any month index we will see


def _monthly_counts(
    posts: Sequence[Post],
    annotations: Mapping[str, SourceAnnotation],
    entity_of,
    non_news: DomainList | Iterable[str],
) -> _Monthly:
    non_news_set = non_news.entries if isinstance(non_news, DomainList) else frozenset(non_news)
    codes: dict[str, int] = {}
    dom_cache: dict[str, tuple[int, ...]] = {}
    i_posts, i_linkposts, i_removed, i_links, i_potential = (_COUNT_INDEX[c] for c in GENERAL_COLUMNS)

    n = len(posts)
    ent = np.empty(n, dtype=np.int64)
    mon = np.empty(n, dtype=np.int64)
    is_link = np.zeros(n, dtype=bool)
    post_of_pair: list[int] = []
    col_of_pair: list[int] = []
    for i, p in enumerate(posts):
        name = entity_of(p)
        ent[i] = codes.setdefault(name, len(codes))
        mon[i] = MonthKey.from_timestamp(p.created).index
        cols = [i_posts]
        if p.removed:
            cols.append(i_removed)
        d = p.domain
        if d:
            cols.append(i_linkposts)
            if not is_self_reference(d):
                is_link[i] = True
                cols.append(i_links)
                if d not in non_news_set:
                    cols.append(i_potential)
                dc = dom_cache.get(d)
                if dc is None:
                    dc = dom_cache[d] = _domain_columns(annotations.get(d))
                cols.extend(dc)
        post_of_pair.extend([i] * len(cols))
        col_of_pair.extend(cols)

    combined = ent * _SHIFT + mon
    keys, row_of_post = np.unique(combined, return_inverse=True)
    counts = np.zeros((len(keys), len(_COUNT_COLS)))
    np.add.at(counts, (row_of_post[np.asarray(post_of_pair, dtype=np.int64)], np.asarray(col_of_pair, dtype=np.int64)), 1.0)
    entities = [None] * len(codes)
    for name, c in codes.items():
        entities[c] = name
    return _Monthly(entities, ent, mon, is_link, keys, row_of_post.reshape(-1), counts)


def _fractions(counts: np.ndarray) -> np.ndarray:
    links = counts[:, _COUNT_INDEX["general.links"]]
    safe = np.where(links > 0, links, 1.0)
    out = []
    for col in frac_columns():
        c = counts[:, _COUNT_INDEX[col[: -len(".frac")] + ".count"]]
        out.append(np.where(links > 0, c / safe, 0.0))
    return np.column_stack(out) if out else np.zeros((len(counts), 0))


def _sort_rows(entities: list[str], keys: np.ndarray) -> tuple[list[tuple[str, MonthKey]], np.ndarray]:
    """Decode combined keys and order them by (entity name, month)."""
    decoded = [(entities[k // _SHIFT], int(k % _SHIFT)) for k in keys.tolist()]
    order = sorted(range(len(decoded)), key=decoded.__getitem__)
    return [(decoded[i][0], MonthKey.from_index(decoded[i][1])) for i in order], np.asarray(order, dtype=np.int64)


def aggregate_community(
    posts: Sequence[Post],
    annotations: Mapping[str, SourceAnnotation],
    non_news: DomainList | Iterable[str] = (),
) -> CharacteristicTable:
    """Monthly characteristic vectors per community.

    Includes the Gini coefficient of links per contributing author; months
    without links get a Gini of 0.
    """
    posts = list(posts)
    m = _monthly_counts(posts, annotations, lambda p: p.community, non_news)

    # links per (row, author) for the inequality measure
    gini_vals = np.zeros(len(m.keys))
    link_rows = m.row_of_post[m.is_link]
    if link_rows.size:
        authors: dict[str, int] = {}
        author_codes = np.fromiter(
            (authors.setdefault(p.author, len(authors)) for p, lk in zip(posts, m.is_link) if lk),
            dtype=np.int64,
            count=int(m.is_link.sum()),
        )
        pairs, per_pair = np.unique(link_rows * (len(authors) + 1) + author_codes, return_counts=True)
        pair_rows = pairs // (len(authors) + 1)
        bounds = np.flatnonzero(np.diff(pair_rows)) + 1
        for seg_rows, seg in zip(np.split(pair_rows, bounds), np.split(per_pair, bounds)):
            gini_vals[seg_rows[0]] = gini(seg)

    keys, order = _sort_rows(m.entities, m.keys)
    counts = m.counts[order]
    values = np.column_stack([counts, _fractions(counts), gini_vals[order]])
    return CharacteristicTable("community", keys, _COUNT_COLS + frac_columns() + [GINI_COLUMN], values)


def aggregate_rolling(
    posts: Sequence[Post],
    annotations: Mapping[str, SourceAnnotation],
    entity: str = "author",
    window: int = 6,
    non_news: DomainList | Iterable[str] = (),
) -> CharacteristicTable:
    """Per-entity count vectors summed over the month and the ``window - 1`` before it.

    A vector exists for every month whose window contains at least one post,
    so activity keeps contributing for ``window - 1`` months after it stops.
    ``window=1`` gives plain monthly vectors (without the Gini column).
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if entity not in ("author", "community"):
        raise ValueError(f"entity must be 'author' or 'community', not {entity!r}")
    posts = list(posts)
    entity_of = (lambda p: p.author) if entity == "author" else (lambda p: p.community)
    m = _monthly_counts(posts, annotations, entity_of, non_news)
    columns = _COUNT_COLS + frac_columns()
    if not len(m.keys):
        return CharacteristicTable(entity, [], columns, np.zeros((0, len(columns))))

    out_keys = np.unique((m.keys[:, None] + np.arange(window)[None, :]).ravel())
    prefix = np.vstack([np.zeros((1, m.counts.shape[1])), np.cumsum(m.counts, axis=0)])
    upper = np.searchsorted(m.keys, out_keys, side="right")
    lower = np.searchsorted(m.keys, out_keys - window, side="right")
    # prefix sums of small integers are exact in float64
    counts = prefix[upper] - prefix[lower]

    keys, order = _sort_rows(m.entities, out_keys)
    counts = counts[order]
    return CharacteristicTable(entity, keys, columns, np.column_stack([counts, _fractions(counts)]))


def aggregate_author_rolling(
    posts: Sequence[Post],
    annotations: Mapping[str, SourceAnnotation],
    window: int = 6,
    non_news: DomainList | Iterable[str] = (),
) -> CharacteristicTable:
    """Author vectors over the post month and the five months before it (by default)."""
    return aggregate_rolling(posts, annotations, "author", window, non_news)


def normalize_scores(posts: Iterable[Post]) -> list[AcceptanceScore]:
    """Scores relative to the median score of the post's community-month.

    Groups whose median is not positive yield entries with ``defined=False``
    and a NaN score. Output follows input order.
    """
    posts = list(posts)
    groups: dict[tuple[str, int], list[int]] = defaultdict(list)
    for p in posts:
        groups[(p.community, MonthKey.from_timestamp(p.created).index)].append(p.score)
    medians = {k: float(np.median(v)) for k, v in groups.items()}
    out = []
    for p in posts:
        med = medians[(p.community, MonthKey.from_timestamp(p.created).index)]
        if med > 0:
            out.append(AcceptanceScore(p.id, p.score / med))
        else:
            out.append(AcceptanceScore(p.id, float("nan"), defined=False))
    return out


def entity_profile(
    table: CharacteristicTable,
    entity: str,
    months: Iterable[MonthKey],
    weight_column: str = "general.links",
) -> np.ndarray:
    """One row per entity: the link-weighted mean of its vectors over ``months``.

    Falls back to an unweighted mean when every month has zero weight.
    """
    rows = table.rows((entity, mo) for mo in sorted(set(months)))
    if not len(rows):
        return np.zeros(len(table.columns))
    w = rows[:, table.col_index(weight_column)]
    if w.sum() > 0:
        return w @ rows / w.sum()
    return rows.mean(axis=0)


# --------------------------------------------------------------------------
# Dump


DUMP_COLUMNS = ("entity_kind", "entity", "year", "month", "characteristic", "value")


def _fmt(v: float) -> str:
    return str(int(v)) if v.is_integer() else repr(v)


def write_dump(tables: Iterable[CharacteristicTable], fh: IO[str]) -> int:
    """Write tables in long CSV form, sorted, omitting zero values.

    Returns the number of data rows written.
    """
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(DUMP_COLUMNS)
    n = 0
    for table in sorted(tables, key=lambda t: t.entity_kind):
        col_order = sorted(range(len(table.columns)), key=table.columns.__getitem__)
        names = [table.columns[j] for j in col_order]
        vals = table.values[:, col_order]
        for (entity, month), row in zip(table.keys_, vals.tolist()):
            y, mo = f"{month.year:04d}", f"{month.month:02d}"
            for name, v in zip(names, row):
                if v != 0.0:
                    writer.writerow((table.entity_kind, entity, y, mo, name, _fmt(v)))
                    n += 1
    return n


def read_dump(fh: IO[str]) -> dict[str, CharacteristicTable]:
    """Inverse of :func:`write_dump`; omitted values read back as zero."""
    reader = csv.reader(fh)
    header = next(reader, None)
    if tuple(header or ()) != DUMP_COLUMNS:
        raise ValueError(f"not a characteristic dump (header {header!r})")
    schema = {
        "community": _COUNT_COLS + frac_columns() + [GINI_COLUMN],
        "author": _COUNT_COLS + frac_columns(),
    }
    cells: dict[str, dict[tuple[str, MonthKey], dict[str, float]]] = defaultdict(dict)
    for kind, entity, y, mo, name, v in reader:
        key = (entity, MonthKey(int(y), int(mo)))
        cells[kind].setdefault(key, {})[name] = float(v)
    tables = {}
    for kind, rows in cells.items():
        cols = schema.get(kind) or sorted({c for r in rows.values() for c in r})
        col_idx = {c: j for j, c in enumerate(cols)}
        keys = sorted(rows)
        values = np.zeros((len(keys), len(cols)))
        for i, k in enumerate(keys):
            for c, v in rows[k].items():
                values[i, col_idx[c]] = v
        tables[kind] = CharacteristicTable(kind, keys, cols, values)
    return tables
