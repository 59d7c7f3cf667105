"""Overall and per-group performance, characteristic correlations, acceptance deciles."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .characteristics import AcceptanceScore, CharacteristicTable, entity_profile
from .core import Label, LabeledPost, MonthKey
from .stats import KdeCurve, kde, pearson_columns

__all__ = [
    "SUBSETS",
    "MetricBundle",
    "GroupReport",
    "CorrelationEntry",
    "confusion_metrics",
    "metrics",
    "align_predictions",
    "true_class_confidence",
    "rank_bins",
    "group_metrics",
    "f1_kde",
    "wordcloud_data",
    "correlate_confidence",
    "group_characteristics",
    "correlate_group_metrics",
    "decile_assignments",
    "acceptance_decile_analysis",
]

SUBSETS = ("all", "credible", "deceptive")


@dataclass(frozen=True)
class MetricBundle:
    """Binary metrics with Deceptive as the positive class."""

    precision: float
    recall: float
    f1: float
    macro_f1: float
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def support(self) -> dict[str, int]:
        return {"deceptive": self.tp + self.fn, "credible": self.tn + self.fp}

    @property
    def accuracy(self) -> float:
        n = self.tp + self.fp + self.fn + self.tn
        return (self.tp + self.tn) / n if n else 0.0

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "macro_f1": self.macro_f1,
            "accuracy": self.accuracy,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
        }


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def confusion_metrics(y_true, y_pred) -> MetricBundle:
    """Metrics from boolean arrays (True = deceptive)."""
    t = np.asarray(y_true, dtype=bool)
    p = np.asarray(y_pred, dtype=bool)
    if t.shape != p.shape:
        raise ValueError("truth and prediction lengths differ")
    tp = int(np.sum(t & p))
    fp = int(np.sum(~t & p))
    fn = int(np.sum(t & ~p))
    tn = int(np.sum(~t & ~p))
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    # the negative class scored the same way
    prec_n = tn / (tn + fn) if tn + fn else 0.0
    rec_n = tn / (tn + fp) if tn + fp else 0.0
    f1 = _f1(prec, rec)
    return MetricBundle(prec, rec, f1, (f1 + _f1(prec_n, rec_n)) / 2, tp, fp, fn, tn)


def metrics(truths: Sequence[LabeledPost], predictions: Sequence) -> MetricBundle:
    """Precision, recall, F1 and macro-F1 for aligned truths and predictions.

    ``predictions[i].post_id`` must equal ``truths[i].id`` for every i.
    """
    if not truths:
        raise ValueError("metrics of an empty test set")
    if len(truths) != len(predictions):
        raise ValueError(f"{len(truths)} truths but {len(predictions)} predictions")
    for t, p in zip(truths, predictions):
        if t.id != p.post_id:
            raise ValueError(f"post id mismatch: {t.id!r} vs {p.post_id!r}")
    return confusion_metrics(
        [t.true_class is Label.DECEPTIVE for t in truths],
        [p.predicted_class is Label.DECEPTIVE for p in predictions],
    )


def align_predictions(test: Sequence[LabeledPost], predictions: Mapping[str, object]) -> list:
    """Predictions reordered to follow ``test``; raises KeyError on gaps."""
    try:
        return [predictions[lp.id] for lp in test]
    except KeyError as exc:
        raise KeyError(f"no prediction for test post {exc.args[0]!r}") from None


def true_class_confidence(test: Sequence[LabeledPost], predictions: Sequence) -> np.ndarray:
    p = np.array([pr.p_deceptive for pr in predictions], dtype=np.float64)
    dec = np.array([lp.true_class is Label.DECEPTIVE for lp in test])
    return np.where(dec, p, 1.0 - p)


def rank_bins(values: Sequence[float], tiebreak: Sequence, n_bins: int) -> np.ndarray:
    """1-based bin of each item after ranking by (value, tiebreak).

    Bins are contiguous in rank order and differ in size by at most one;
    larger bins come first.
    """
    order = sorted(range(len(values)), key=lambda i: (values[i], tiebreak[i]))
    bins = np.empty(len(values), dtype=np.int64)
    for b, chunk in enumerate(np.array_split(np.asarray(order, dtype=np.int64), n_bins), start=1):
        bins[chunk] = b
    return bins


# --------------------------------------------------------------------------
# Groups


@dataclass(frozen=True)
class GroupReport:
    key: str
    metrics: MetricBundle
    n_posts: int
    quartile: int


def _group_key(lp: LabeledPost, key: str) -> str:
    if key == "community":
        return lp.post.community
    if key == "author":
        return lp.post.author
    raise ValueError(f"group key must be 'community' or 'author', not {key!r}")


def group_metrics(
    test: Sequence[LabeledPost],
    predictions: Sequence,
    key: str = "community",
    min_group_size: int = 1,
) -> list[GroupReport]:
    """Per-group metrics with F1 quartiles (1 = lowest F1), sorted by group key."""
    if len(test) != len(predictions):
        raise ValueError("test set and predictions differ in length")
    members: dict[str, list[int]] = defaultdict(list)
    for i, lp in enumerate(test):
        members[_group_key(lp, key)].append(i)
    truth = np.array([lp.true_class is Label.DECEPTIVE for lp in test])
    pred = np.array([p.predicted_class is Label.DECEPTIVE for p in predictions])
    names, bundles = [], []
    for name in sorted(members):
        idx = members[name]
        if len(idx) < min_group_size:
            continue
        names.append(name)
        bundles.append(confusion_metrics(truth[idx], pred[idx]))
    quartiles = rank_bins([b.f1 for b in bundles], names, 4) if names else []
    return [
        GroupReport(n, b, len(members[n]), int(q)) for n, b, q in zip(names, bundles, quartiles)
    ]


def f1_kde(reports: Sequence[GroupReport], grid_size: int = 512) -> KdeCurve:
    return kde([r.metrics.f1 for r in reports], grid_size)


def wordcloud_data(reports: Sequence[GroupReport]) -> list[dict]:
    return [
        {"community": r.key, "n_posts": r.n_posts, "f1": r.metrics.f1, "quartile": r.quartile}
        for r in reports
    ]


# --------------------------------------------------------------------------
# Correlations


@dataclass(frozen=True)
class CorrelationEntry:
    characteristic: str
    subset: str
    r: float
    p_value: float
    n: int
    target: str = "confidence"
    decile: int | None = None
    reported: bool = False

    @property
    def defined(self) -> bool:
        return not math.isnan(self.r)

    @property
    def sig_05(self) -> bool:
        return self.defined and self.p_value < 0.05

    @property
    def sig_01(self) -> bool:
        return self.defined and self.p_value < 0.01


def _subset_masks(test: Sequence[LabeledPost]) -> dict[str, np.ndarray]:
    dec = np.array([lp.true_class is Label.DECEPTIVE for lp in test], dtype=bool)
    return {"all": np.ones(len(test), dtype=bool), "credible": ~dec, "deceptive": dec}


def correlate_confidence(
    test: Sequence[LabeledPost],
    predictions: Sequence,
    author_table: CharacteristicTable,
    community_table: CharacteristicTable,
    threshold: float = 0.25,
) -> list[CorrelationEntry]:
    """Correlate every characteristic with true-class confidence.

    Each post is joined to its author's rolling vector and its community's
    vector at the post's month. Characteristics are named ``author.<col>``
    and ``community.<col>``; an entry is ``reported`` when the largest |r|
    over the three subsets reaches ``threshold``.
    """
    months = [MonthKey.from_timestamp(lp.post.created) for lp in test]
    y = true_class_confidence(test, predictions)
    blocks = [
        ("author", author_table, author_table.rows((lp.post.author, m) for lp, m in zip(test, months))),
        ("community", community_table, community_table.rows((lp.post.community, m) for lp, m in zip(test, months))),
    ]
    masks = _subset_masks(test)
    out: list[CorrelationEntry] = []
    for prefix, table, X in blocks:
        per_subset = {s: pearson_columns(X[m], y[m]) for s, m in masks.items()}
        for j, col in enumerate(table.columns):
            rs = [per_subset[s][0][j] for s in SUBSETS]
            finite = [abs(v) for v in rs if not math.isnan(v)]
            flag = bool(finite) and bool(max(finite) >= threshold)
            for s in SUBSETS:
                r, p = per_subset[s][0][j], per_subset[s][1][j]
                out.append(CorrelationEntry(f"{prefix}.{col}", s, float(r), float(p), int(masks[s].sum()), reported=flag))
    return out


def group_characteristics(
    test: Sequence[LabeledPost],
    table: CharacteristicTable,
    key: str = "community",
) -> tuple[list[str], list[str], np.ndarray]:
    """One characteristic row per group.

    Each group's vectors are averaged over the months in which it has test
    posts, weighted by monthly link count. A derived column
    ``test.deceptive.frac`` holds the deceptive share of the group's test
    posts. Returns (group names, column names, matrix).
    """
    months: dict[str, set[MonthKey]] = defaultdict(set)
    dec: dict[str, list[bool]] = defaultdict(list)
    for lp in test:
        g = _group_key(lp, key)
        months[g].add(MonthKey.from_timestamp(lp.post.created))
        dec[g].append(lp.true_class is Label.DECEPTIVE)
    names = sorted(months)
    rows = [np.append(entity_profile(table, g, months[g]), np.mean(dec[g])) for g in names]
    matrix = np.vstack(rows) if rows else np.zeros((0, len(table.columns) + 1))
    return names, list(table.columns) + ["test.deceptive.frac"], matrix


def correlate_group_metrics(
    reports: Sequence[GroupReport],
    group_names: Sequence[str],
    columns: Sequence[str],
    characteristics: np.ndarray,
    threshold: float = 0.3,
    prefix: str = "",
) -> list[CorrelationEntry]:
    """Correlate group characteristics with group F1, precision and recall.

    ``characteristics`` rows follow ``group_names``; only groups present in
    ``reports`` are used. An entry is ``reported`` when |r| exceeds
    ``threshold`` for at least one metric.
    """
    row_of = {g: i for i, g in enumerate(group_names)}
    used = [r for r in reports if r.key in row_of]
    if len(used) < 3:
        raise ValueError("undefined correlation: need at least 3 groups")
    X = np.asarray(characteristics)[[row_of[r.key] for r in used]]
    targets = {
        "f1": np.array([r.metrics.f1 for r in used]),
        "precision": np.array([r.metrics.precision for r in used]),
        "recall": np.array([r.metrics.recall for r in used]),
    }
    res = {t: pearson_columns(X, y) for t, y in targets.items()}
    out = []
    for j, col in enumerate(columns):
        finite = [abs(res[t][0][j]) for t in targets if not math.isnan(res[t][0][j])]
        flag = bool(finite) and bool(max(finite) > threshold)
        for t in targets:
            out.append(
                CorrelationEntry(prefix + col, "all", float(res[t][0][j]), float(res[t][1][j]), len(used), target=t, reported=flag)
            )
    return out


def decile_assignments(
    test: Sequence[LabeledPost],
    scores: Mapping[str, AcceptanceScore],
    n_bins: int = 10,
    per_community: bool = False,
) -> dict[str, int]:
    """Decile (1 = least accepted) of each test post with a defined score.

    Ranks by normalized score with ties broken by post id. With
    ``per_community`` the ranking is done within each community.
    """
    usable = [lp for lp in test if lp.id in scores and scores[lp.id].defined]
    groups: dict[str, list[LabeledPost]] = defaultdict(list)
    for lp in usable:
        groups[lp.post.community if per_community else ""].append(lp)
    out = {}
    for members in groups.values():
        vals = [scores[lp.id].normalized_score for lp in members]
        ids = [lp.id for lp in members]
        for pid, b in zip(ids, rank_bins(vals, ids, n_bins).tolist()):
            out[pid] = b
    return out


def acceptance_decile_analysis(
    test: Sequence[LabeledPost],
    predictions: Sequence,
    scores: Mapping[str, AcceptanceScore] | Iterable[AcceptanceScore],
    n_bins: int = 10,
    per_community: bool = False,
) -> list[CorrelationEntry]:
    """Correlation of normalized score and true-class confidence per decile and subset."""
    if not isinstance(scores, Mapping):
        scores = {s.post_id: s for s in scores}
    deciles = decile_assignments(test, scores, n_bins, per_community)
    conf = true_class_confidence(test, predictions)
    dec = np.array([lp.true_class is Label.DECEPTIVE for lp in test])
    bins = np.array([deciles.get(lp.id, 0) for lp in test])
    x = np.array([scores[lp.id].normalized_score if bins[i] else np.nan for i, lp in enumerate(test)])
    out = []
    for d in range(1, n_bins + 1):
        in_bin = bins == d
        for s, mask in (("all", in_bin), ("credible", in_bin & ~dec), ("deceptive", in_bin & dec)):
            r, p = pearson_columns(x[mask][:, None], conf[mask])
            out.append(CorrelationEntry("normalized_score", s, float(r[0]), float(p[0]), int(mask.sum()), decile=d))
    return out
