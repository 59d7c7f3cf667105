"""Synthetic corpora with known latent structure.

Every author has a persistent tendency to post deceptive links and every
community a mix parameter that steers which authors call it home. Model
confidence in the true class is drawn as ``Phi(loc + shift + scale * z)``
where ``z`` can be coupled to a latent characteristic (Gaussian copula)
and to post acceptance above a score quantile.
"""

from __future__ import annotations

import calendar
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import special

from ._io import atomic_open
from .core import (
    Bias,
    BinaryClass,
    DomainList,
    Factualness,
    FormatConfig,
    Label,
    MonthKey,
    Post,
    PredictionRecord,
    SourceAnnotation,
    VolkovaCategory,
    serialize_posts,
    write_annotations,
    write_predictions,
)

__all__ = ["SynthConfig", "SynthCorpus", "generate", "write_corpus", "NON_NEWS_DOMAINS"]

NON_NEWS_DOMAINS = ("reddit.com", "v.redd.it", "i.redd.it", "imgur.com", "youtube.com", "facebook.com", "instagram.com")
_DECEPTIVE_CATS = ("propaganda", "satire", "clickbait", "conspiracy", "hoax")
_FLAGS_FOR = {"propaganda": ("questionable",), "satire": ("satire",), "conspiracy": ("conspiracy", "questionable"), "hoax": ("questionable",)}


@dataclass
class SynthConfig:
    n_communities: int = 40
    n_authors: int = 1000
    n_posts: int = 20_000
    start_year: int = 2016
    start_month: int = 1
    months: int = 12
    author_tendency: tuple[float, float] = (2.0, 5.0)
    # overrides the Beta draw with a constant tendency for every author
    author_tendency_value: float | None = None
    community_mix: tuple[float, float] = (2.0, 5.0)
    score_lognormal: tuple[float, float] = (2.0, 1.2)
    community_score_spread: float = 0.5
    activity_sigma: float = 1.0
    home_share: float = 0.8
    news_share: float = 0.7
    labeled_share: float = 0.7
    removed_share: float = 0.05
    confidence_loc: float = 0.55
    confidence_scale: float = 0.6
    # None = confidence independent of everything latent
    confidence_rho: float | None = None
    confidence_target: str = "author_tendency"
    hard_community_fraction: float = 0.0
    hard_community_shift: float = -1.5
    acceptance_coupling: float = 0.0
    acceptance_quantile: float = 0.8
    n_domains: int = 30
    seed: int = 0

    def validate(self) -> None:
        for name in ("n_communities", "n_authors", "n_posts", "months", "n_domains"):
            if getattr(self, name) <= 0:
                raise ValueError(f"infeasible config: {name} must be positive")
        if not 1 <= self.start_month <= 12:
            raise ValueError("infeasible config: start_month must be 1-12")
        for name in ("author_tendency", "community_mix"):
            if min(getattr(self, name)) <= 0:
                raise ValueError(f"infeasible config: {name} Beta parameters must be positive")
        if self.score_lognormal[1] <= 0 or self.confidence_scale <= 0 or self.activity_sigma < 0:
            raise ValueError("infeasible config: scale parameters must be positive")
        if self.confidence_rho is not None and not -1.0 <= self.confidence_rho <= 1.0:
            raise ValueError("infeasible config: confidence_rho must lie in [-1, 1]")
        if self.confidence_target not in ("author_tendency", "community_mix"):
            raise ValueError(f"unknown confidence_target {self.confidence_target!r}")
        if self.author_tendency_value is not None and not 0.0 <= self.author_tendency_value <= 1.0:
            raise ValueError("infeasible config: author_tendency_value must lie in [0, 1]")
        for name in ("home_share", "news_share", "labeled_share", "removed_share", "hard_community_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"infeasible config: {name} must lie in [0, 1]")
        if not 0.0 < self.acceptance_quantile < 1.0:
            raise ValueError("infeasible config: acceptance_quantile must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> SynthConfig:
        d = dict(d)
        for k in ("author_tendency", "community_mix", "score_lognormal"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


@dataclass
class SynthCorpus:
    posts: list[Post]
    annotations: dict[str, SourceAnnotation]
    non_news: DomainList
    predictions: list[PredictionRecord]
    manifest: dict = field(default_factory=dict)


def _domain_universe(n: int) -> tuple[list[SourceAnnotation], list[SourceAnnotation], list[SourceAnnotation], list[str]]:
    cred, dec, mbfc_only, unlisted = [], [], [], []
    cred_fact = (Factualness.MOSTLY, Factualness.HIGH, Factualness.VERY_HIGH)
    cred_bias = (Bias.LEFT, Bias.CENTER_LEFT, Bias.CENTER, Bias.CENTER_RIGHT)
    dec_fact = (Factualness.VERY_LOW, Factualness.LOW, Factualness.MIXED)
    dec_bias = (Bias.EXTREME_LEFT, Bias.RIGHT, Bias.EXTREME_RIGHT, Bias.CENTER_RIGHT)
    for k in range(n):
        cred.append(
            SourceAnnotation(
                f"credible-news-{k:02d}.com", BinaryClass.CREDIBLE, VolkovaCategory.VERIFIED,
                cred_fact[k % 3], cred_bias[k % 4],
            )
        )
        cat = _DECEPTIVE_CATS[k % 5]
        dec.append(
            SourceAnnotation(
                f"deceptive-news-{k:02d}.com", BinaryClass.DECEPTIVE, VolkovaCategory(cat),
                dec_fact[k % 3], dec_bias[k % 4], frozenset(_FLAGS_FOR.get(cat, ())),
            )
        )
        mbfc_only.append(
            SourceAnnotation(f"regional-news-{k:02d}.com", mbfc_factualness=(Factualness.MIXED, Factualness.HIGH)[k % 2], mbfc_bias=Bias.CENTER)
        )
        unlisted.append(f"unlisted-news-{k:02d}.com")
    return cred, dec, mbfc_only, unlisted


def generate(config: SynthConfig) -> SynthCorpus:
    """Generate a corpus; identical configs give identical corpora."""
    config.validate()
    cfg = config
    root = np.random.SeedSequence(cfg.seed)
    ss_global, ss_authors = root.spawn(2)
    g = np.random.default_rng(ss_global)

    communities = [f"sub_{j:03d}" for j in range(cfg.n_communities)]
    authors = [f"user_{i:05d}" for i in range(cfg.n_authors)]
    mix = g.beta(*cfg.community_mix, size=cfg.n_communities)
    score_shift = g.normal(0.0, cfg.community_score_spread, size=cfg.n_communities)
    n_hard = int(round(cfg.hard_community_fraction * cfg.n_communities))
    hard = np.zeros(cfg.n_communities, dtype=bool)
    hard[g.choice(cfg.n_communities, size=n_hard, replace=False)] = True
    conf_shift = np.where(hard, cfg.hard_community_shift, 0.0)

    if cfg.author_tendency_value is None:
        tendency = g.beta(*cfg.author_tendency, size=cfg.n_authors)
        # Gaussian-copula scores of the latent tendencies
        tendency_z = special.ndtri(special.betainc(cfg.author_tendency[0], cfg.author_tendency[1], tendency))
    else:
        tendency = np.full(cfg.n_authors, float(cfg.author_tendency_value))
        tendency_z = np.zeros(cfg.n_authors)
    mix_z = special.ndtri(special.betainc(cfg.community_mix[0], cfg.community_mix[1], mix))
    tendency_z = np.clip(tendency_z, -8.0, 8.0)
    mix_z = np.clip(mix_z, -8.0, 8.0)

    # authors gravitate to communities whose mix resembles their tendency
    affinity = np.exp(-0.5 * ((tendency[:, None] - mix[None, :]) / 0.15) ** 2) + 1e-3
    affinity /= affinity.sum(axis=1, keepdims=True)
    home = np.array([g.choice(cfg.n_communities, p=row) for row in affinity])
    activity = g.lognormal(0.0, cfg.activity_sigma, size=cfg.n_authors)
    per_author = g.multinomial(cfg.n_posts, activity / activity.sum())

    cred, dec, mbfc_only, unlisted = _domain_universe(cfg.n_domains)
    annotations = {a.domain: a for a in cred + dec + mbfc_only}
    month_keys = [MonthKey(cfg.start_year, cfg.start_month).shift(k) for k in range(cfg.months)]
    month_start = np.array([calendar.timegm((m.year, m.month, 1, 0, 0, 0)) for m in month_keys], dtype=np.int64)
    month_len = np.array([calendar.monthrange(m.year, m.month)[1] * 86400 for m in month_keys], dtype=np.int64)
    score_mu, score_sigma = cfg.score_lognormal
    z_q = float(special.ndtri(cfg.acceptance_quantile))
    rho = cfg.confidence_rho or 0.0

    raw = []  # (created, author idx, seq, post fields..., p_deceptive | None)
    for i, ss in enumerate(ss_authors.spawn(cfg.n_authors)):
        k = int(per_author[i])
        if k == 0:
            continue
        r = np.random.default_rng(ss)
        mon = r.integers(0, cfg.months, size=k)
        created = month_start[mon] + (r.random(k) * month_len[mon]).astype(np.int64)
        created = np.maximum(created, month_start[mon] + 1)
        comm = np.where(r.random(k) < cfg.home_share, home[i], r.integers(0, cfg.n_communities, size=k))
        is_news = r.random(k) < cfg.news_share
        is_labeled = is_news & (r.random(k) < cfg.labeled_share)
        is_dec = r.random(k) < tendency[i]
        dom_pick = r.integers(0, cfg.n_domains, size=k)
        mbfc_pick = r.random(k) < 0.5
        nn_pick = r.integers(0, len(NON_NEWS_DOMAINS), size=k)
        zeta = r.standard_normal(k)
        removed = r.random(k) < cfg.removed_share
        eps = r.standard_normal(k)

        latent = tendency_z[i] if cfg.confidence_target == "author_tendency" else mix_z[comm]
        z = rho * latent + np.sqrt(1.0 - rho * rho) * eps
        z = z + cfg.acceptance_coupling * np.maximum(0.0, zeta - z_q)
        conf = special.ndtr(cfg.confidence_loc + conf_shift[comm] + cfg.confidence_scale * z)
        scores = np.rint(np.exp(score_mu + score_shift[comm] + score_sigma * zeta)).astype(np.int64)

        for t in range(k):
            p_dec = None
            if is_labeled[t]:
                src = dec if is_dec[t] else cred
                domain = src[dom_pick[t]].domain
                c = float(conf[t])
                p_dec = c if is_dec[t] else 1.0 - c
            elif is_news[t]:
                domain = mbfc_only[dom_pick[t]].domain if mbfc_pick[t] else unlisted[dom_pick[t]]
            else:
                domain = NON_NEWS_DOMAINS[nn_pick[t]]
            raw.append((int(created[t]), i, t, communities[comm[t]], domain, int(scores[t]), bool(removed[t]), p_dec))

    raw.sort(key=lambda x: (x[0], x[1], x[2]))
    width = max(7, len(str(len(raw))))
    posts, predictions = [], []
    for n, (created, i, t, comm, domain, score, removed, p_dec) in enumerate(raw):
        pid = f"p{n:0{width}d}"
        posts.append(Post(pid, authors[i], comm, created, domain, score, removed, f"post {n}"))
        if p_dec is not None:
            predictions.append(PredictionRecord.from_probability(pid, p_dec))

    manifest = {
        "config": _jsonable(asdict(cfg)),
        "authors": {
            a: {"tendency": float(tendency[i]), "home": communities[home[i]], "activity": float(activity[i]), "n_posts": int(per_author[i])}
            for i, a in enumerate(authors)
        },
        "communities": {
            c: {"mix": float(mix[j]), "score_shift": float(score_shift[j]), "hard": bool(hard[j]), "confidence_shift": float(conf_shift[j])}
            for j, c in enumerate(communities)
        },
    }
    return SynthCorpus(posts, annotations, DomainList(frozenset(NON_NEWS_DOMAINS)), predictions, manifest)


def _jsonable(d):
    if isinstance(d, dict):
        return {k: _jsonable(v) for k, v in d.items()}
    if isinstance(d, (list, tuple)):
        return [_jsonable(v) for v in d]
    return d


def _atomic_write(path: Path, writer, binary: bool = False) -> None:
    with atomic_open(path, binary) as fh:
        writer(fh)


def write_corpus(corpus: SynthCorpus, directory, format_config: FormatConfig | None = None) -> dict[str, Path]:
    """Write archive, annotation table, non-news list, predictions and manifest."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "archive": out / "archive.ndjson",
        "annotations": out / "annotations.csv",
        "non_news": out / "non_news.txt",
        "predictions": out / "predictions.csv",
        "manifest": out / "manifest.json",
    }
    _atomic_write(paths["archive"], lambda fh: serialize_posts(corpus.posts, fh, format_config), binary=True)
    _atomic_write(paths["annotations"], lambda fh: write_annotations(corpus.annotations.values(), fh))
    _atomic_write(
        paths["non_news"],
        lambda fh: fh.write("# domains that never host news\n" + "".join(d + "\n" for d in sorted(corpus.non_news.entries))),
    )
    _atomic_write(paths["predictions"], lambda fh: write_predictions(corpus.predictions, fh))
    _atomic_write(paths["manifest"], lambda fh: json.dump(corpus.manifest, fh, indent=1, sort_keys=True))
    return paths


def true_labels(corpus: SynthCorpus) -> dict[str, Label]:
    """Ground-truth class of each labeled synthetic post."""
    out = {}
    for p in corpus.posts:
        ann = corpus.annotations.get(p.domain)
        if ann is not None and ann.binary_class is not BinaryClass.UNLABELED:
            out[p.id] = Label(ann.binary_class.value)
    return out
