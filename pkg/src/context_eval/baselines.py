"""History-based and random reference predictors."""

from __future__ import annotations

import csv
import enum
import hashlib
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

from .characteristics import CharacteristicTable
from .core import Label, LabeledPost, MonthKey

__all__ = [
    "Baseline",
    "BaselinePrediction",
    "uniform_draw",
    "history_probability",
    "author_history_baseline",
    "community_history_baseline",
    "fifty_fifty_baseline",
    "run_baselines",
    "write_baselines",
    "read_baselines",
]

FALLBACK_P = 0.5
_DECEPTIVE = "binary_class.deceptive.count"
_CREDIBLE = "binary_class.credible.count"


class Baseline(str, enum.Enum):
    AUTHOR_HISTORY = "author_history"
    COMMUNITY_HISTORY = "community_history"
    FIFTY_FIFTY = "fifty_fifty"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True, slots=True)
class BaselinePrediction:
    post_id: str
    baseline: Baseline
    p_deceptive: float
    sampled_class: Label

    @property
    def predicted_class(self) -> Label:
        return self.sampled_class


def uniform_draw(seed: int, stream: str, post_id: str) -> float:
    """Uniform [0, 1) value determined only by (seed, stream, post_id).

    Each post gets its own counter-based draw, so results do not depend on
    evaluation order or on how work is split across workers.
    """
    digest = hashlib.blake2b(f"{seed}\x1f{stream}\x1f{post_id}".encode(), digest_size=8).digest()
    return (int.from_bytes(digest, "big") >> 11) * 2.0**-53


def history_probability(deceptive: float, credible: float) -> float:
    total = deceptive + credible
    return deceptive / total if total > 0 else FALLBACK_P


def _predict(post_id: str, baseline: Baseline, p: float, seed: int) -> BaselinePrediction:
    u = uniform_draw(seed, baseline.value, post_id)
    return BaselinePrediction(post_id, baseline, p, Label.DECEPTIVE if u < p else Label.CREDIBLE)


def author_history_baseline(post: LabeledPost, author_vector, seed: int = 0) -> BaselinePrediction:
    """Coin flip biased by the author's deceptive share of labeled news links.

    ``author_vector`` is the author's rolling vector at the post's month (a
    mapping with ``binary_class.*.count`` entries) or None for no history.
    """
    if author_vector is None:
        p = FALLBACK_P
    else:
        p = history_probability(author_vector[_DECEPTIVE], author_vector[_CREDIBLE])
    return _predict(post.id, Baseline.AUTHOR_HISTORY, p, seed)


def community_history_baseline(post: LabeledPost, community_vector, seed: int = 0) -> BaselinePrediction:
    """Coin flip biased by the community's deceptive share in the post's month."""
    if community_vector is None:
        p = FALLBACK_P
    else:
        p = history_probability(community_vector[_DECEPTIVE], community_vector[_CREDIBLE])
    return _predict(post.id, Baseline.COMMUNITY_HISTORY, p, seed)


def fifty_fifty_baseline(post: LabeledPost, seed: int = 0) -> BaselinePrediction:
    return _predict(post.id, Baseline.FIFTY_FIFTY, FALLBACK_P, seed)


def _table_probabilities(table: CharacteristicTable, keys) -> list[float]:
    rows = table.rows(keys)
    dec = rows[:, table.col_index(_DECEPTIVE)]
    cred = rows[:, table.col_index(_CREDIBLE)]
    return [history_probability(d, c) for d, c in zip(dec.tolist(), cred.tolist())]


def run_baselines(
    test: Sequence[LabeledPost],
    author_table: CharacteristicTable,
    community_table: CharacteristicTable,
    seed: int = 0,
) -> dict[Baseline, list[BaselinePrediction]]:
    """All three baselines for every test post, in test-set order."""
    months = [MonthKey.from_timestamp(lp.post.created) for lp in test]
    p_author = _table_probabilities(author_table, ((lp.post.author, m) for lp, m in zip(test, months)))
    p_comm = _table_probabilities(community_table, ((lp.post.community, m) for lp, m in zip(test, months)))
    return {
        Baseline.AUTHOR_HISTORY: [_predict(lp.id, Baseline.AUTHOR_HISTORY, p, seed) for lp, p in zip(test, p_author)],
        Baseline.COMMUNITY_HISTORY: [_predict(lp.id, Baseline.COMMUNITY_HISTORY, p, seed) for lp, p in zip(test, p_comm)],
        Baseline.FIFTY_FIFTY: [fifty_fifty_baseline(lp, seed) for lp in test],
    }


def write_baselines(predictions: Iterable[BaselinePrediction], fh: IO[str]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["post_id", "baseline", "p_deceptive", "sampled_class"])
    for p in predictions:
        writer.writerow([p.post_id, p.baseline.value, repr(p.p_deceptive), p.sampled_class.value])


def read_baselines(fh: IO[str]) -> dict[Baseline, list[BaselinePrediction]]:
    out: dict[Baseline, list[BaselinePrediction]] = {b: [] for b in Baseline}
    for row in csv.DictReader(fh):
        b = Baseline(row["baseline"])
        out[b].append(BaselinePrediction(row["post_id"], b, float(row["p_deceptive"]), Label(row["sampled_class"])))
    return out
