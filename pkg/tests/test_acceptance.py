"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

The lines are printed in the terminal summary under "acceptance criteria".
"""

import hashlib
import io
import json
import random
import time
from collections import defaultdict

import numpy as np

from conftest import ACCEPTANCE_LINES
from context_eval import characteristics as ch
from context_eval.baselines import Baseline, run_baselines
from context_eval.cli import main
from context_eval.core import Label, MonthKey, build_dataset, label_posts, measure_coverage, parse_archive
from context_eval.evaluation import (
    acceptance_decile_analysis,
    align_predictions,
    correlate_confidence,
    f1_kde,
    group_metrics,
    metrics,
)
from context_eval.stats import kde, pearson
from context_eval.synth import SynthConfig, generate
from oracles import pearson_direct, pearson_p_quad
from util import ANNOTATIONS, post, ts


def record(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _test_posts(corpus):
    return sorted(label_posts(corpus.posts, corpus.annotations), key=lambda lp: lp.id)


def _pred_map(corpus):
    return {p.post_id: p for p in corpus.predictions}


# 1 -----------------------------------------------------------------------


def test_criterion_1_gini_oracle():
    rng = np.random.default_rng(1)
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(1000):
        n = int(rng.integers(1, 201))
        x = rng.integers(0, int(rng.choice([2, 10, 1000, 10**6])), size=n)
        if x.sum() == 0:
            x[rng.integers(n)] = 1
        xf = x.astype(np.float64)
        oracle = np.abs(xf[:, None] - xf[None, :]).sum() / (2.0 * n * n * xf.mean())
        worst = max(worst, abs(ch.gini(x) - oracle))
    elapsed = time.perf_counter() - t0
    record(1, "gini vs O(n^2) pairwise oracle", worst <= 1e-9 and elapsed < 5.0, f"max abs err {worst:.2e} (tol 1e-9), {elapsed:.2f}s (limit 5s)")


# 2 -----------------------------------------------------------------------


def test_criterion_2_pearson_oracle():
    rng = np.random.default_rng(2)
    worst_r = worst_p = 0.0
    for _ in range(1000):
        n = int(rng.integers(3, 501))
        rho = rng.uniform(-0.99, 0.99) * rng.choice([1.0, 0.1, 0.01])
        x = rng.normal(size=n)
        y = rho * x + np.sqrt(1 - rho * rho) * rng.normal(size=n)
        r, p = pearson(x, y)
        worst_r = max(worst_r, abs(r - pearson_direct(x.tolist(), y.tolist())))
        worst_p = max(worst_p, abs(p - pearson_p_quad(r, n)))
    record(2, "pearson r and p vs direct formula and integrated t-CDF", worst_r <= 1e-12 and worst_p <= 1e-6, f"max |dr| {worst_r:.2e} (tol 1e-12), max |dp| {worst_p:.2e} (tol 1e-6)")


# 3 -----------------------------------------------------------------------


def test_criterion_3_rolling_equivalence():
    corpus = generate(SynthConfig(n_posts=10_000, n_authors=400, n_communities=20, months=18, seed=3))
    rolling = ch.aggregate_author_rolling(corpus.posts, corpus.annotations, 6, corpus.non_news)
    monthly = ch.aggregate_rolling(corpus.posts, corpus.annotations, "author", 1, corpus.non_news)
    counts = ch.count_columns()
    idx = [rolling.col_index(c) for c in counts]
    fidx = [rolling.col_index(c) for c in ch.frac_columns()]
    links = counts.index("general.links")
    mismatches = 0
    for author, month in rolling:
        total = np.zeros(len(counts))
        for k in range(6):
            total += monthly.row((author, month.shift(-k)))[idx]
        row = rolling.row((author, month))
        mismatches += int(not np.array_equal(row[idx], total))
        denom = total[links]
        expect = np.array([total[counts.index(c[:-5] + ".count")] / denom if denom else 0.0 for c in ch.frac_columns()])
        mismatches += int(not np.array_equal(row[fidx], expect))
    record(3, "author rolling vectors == sum of six monthly vectors", mismatches == 0, f"{len(rolling)} author-months, {mismatches} mismatches")


# 4 -----------------------------------------------------------------------


def test_criterion_4_baseline_statistics():
    corpus = generate(SynthConfig(n_posts=80_000, n_authors=1000, n_communities=40, author_tendency=(0.5, 0.5), community_mix=(2, 2), seed=4))
    labeled = label_posts(corpus.posts, corpus.annotations)
    _, test = build_dataset(labeled, seed=4, test_fraction=0.5)
    author = ch.aggregate_author_rolling(corpus.posts, corpus.annotations, 6, corpus.non_news)
    community = ch.aggregate_community(corpus.posts, corpus.annotations, corpus.non_news)
    out = run_baselines(test, author, community, seed=4)
    m = {b: metrics(test, out[b]) for b in Baseline}
    fifty = m[Baseline.FIFTY_FIFTY]
    ok_fifty = len(test) >= 10_000 and abs(fifty.accuracy - 0.5) <= 0.03 and abs(fifty.f1 - 0.5) <= 0.03

    # analytic expectation of the author baseline given its per-post probabilities
    q = np.array([p.p_deceptive for p in out[Baseline.AUTHOR_HISTORY]])
    dec = np.array([lp.true_class is Label.DECEPTIVE for lp in test])
    mu_t, var_t = q[dec].sum(), (q[dec] * (1 - q[dec])).sum()
    mu_f, var_f = q[~dec].sum(), (q[~dec] * (1 - q[~dec])).sum()
    exp_prec = mu_t / (mu_t + mu_f)
    sd_prec = np.sqrt(mu_f**2 * var_t + mu_t**2 * var_f) / (mu_t + mu_f) ** 2
    exp_rec, sd_rec = mu_t / dec.sum(), np.sqrt(var_t) / dec.sum()
    a = m[Baseline.AUTHOR_HISTORY]
    ok_author = abs(a.precision - exp_prec) <= 3 * sd_prec and abs(a.recall - exp_rec) <= 3 * sd_rec
    c = m[Baseline.COMMUNITY_HISTORY]
    ok_order = a.precision > c.precision > fifty.precision
    record(
        4,
        "baseline statistics",
        ok_fifty and ok_author and ok_order,
        f"n={len(test)}; 50/50 acc {fifty.accuracy:.3f} f1 {fifty.f1:.3f}; author P {a.precision:.3f} (exp {exp_prec:.3f}+-{3 * sd_prec:.3f}) "
        f"R {a.recall:.3f} (exp {exp_rec:.3f}+-{3 * sd_rec:.3f}); precision author {a.precision:.3f} > community {c.precision:.3f} > random {fifty.precision:.3f}",
    )


# 5 -----------------------------------------------------------------------


def _planted_r(rho):
    corpus = generate(SynthConfig(n_posts=40_000, n_authors=200, author_tendency=(1, 1), confidence_rho=rho, seed=1))
    test = _test_posts(corpus)
    preds = align_predictions(test, _pred_map(corpus))
    author = ch.aggregate_author_rolling(corpus.posts, corpus.annotations, 6, corpus.non_news)
    community = ch.aggregate_community(corpus.posts, corpus.annotations, corpus.non_news)
    entries = correlate_confidence(test, preds, author, community)
    e = next(e for e in entries if e.characteristic == "author.binary_class.deceptive.frac" and e.subset == "all")
    return e, len(test)


def test_criterion_5_planted_correlation():
    t0 = time.perf_counter()
    planted, n = _planted_r(0.4)
    null, _ = _planted_r(0.0)
    elapsed = time.perf_counter() - t0
    ok = abs(planted.r - 0.4) <= 0.1 and planted.p_value < 0.01 and abs(null.r) < 0.05 and n >= 10_000 and elapsed < 60
    record(5, "planted correlation recovery", ok, f"n={n}; rho=0.4 -> r={planted.r:.3f} p={planted.p_value:.1e}; rho=0 -> r={null.r:.4f}; {elapsed:.1f}s (limit 60s)")


# 6 -----------------------------------------------------------------------


def test_criterion_6_decile_concentration():
    corpus = generate(SynthConfig(n_posts=60_000, n_authors=2000, n_communities=40, acceptance_coupling=1.0, acceptance_quantile=0.8, seed=0))
    test = _test_posts(corpus)
    preds = align_predictions(test, _pred_map(corpus))
    scores = {s.post_id: s for s in ch.normalize_scores(corpus.posts)}
    entries = [e for e in acceptance_decile_analysis(test, preds, scores) if e.subset == "all"]
    by = {e.decile: e for e in entries}
    top = all(by[d].sig_05 and by[d].r > 0 for d in (9, 10))
    low = not any(by[d].sig_05 for d in range(1, 8))
    detail = " ".join(f"d{d}:{by[d].r:+.3f}{'*' if by[d].sig_05 else ''}" for d in range(1, 11))
    record(6, "acceptance decile concentration", top and low, f"n/decile={by[1].n}; {detail} (* = p<.05)")


# 7 -----------------------------------------------------------------------


def test_criterion_7_normalization_identities():
    corpus = generate(SynthConfig(n_posts=30_000, n_authors=1500, n_communities=60, seed=7))
    scores = {s.post_id: s for s in ch.normalize_scores(corpus.posts)}
    groups = defaultdict(list)
    for p in corpus.posts:
        groups[(p.community, p.month)].append(p)
    median_hits = median_bad = 0
    for members in groups.values():
        med = float(np.median([p.score for p in members]))
        if med <= 0:
            continue
        for p in members:
            if p.score == med:
                median_hits += 1
                median_bad += scores[p.id].normalized_score != 1.0

    test = _test_posts(corpus)
    preds = align_predictions(test, _pred_map(corpus))
    rng = np.random.default_rng(7)
    integrals = [f1_kde(group_metrics(test, preds, "community")).integral()]
    for _ in range(200):
        a, b = rng.uniform(0.2, 5, size=2)
        integrals.append(kde(rng.beta(a, b, size=int(rng.integers(2, 500)))).integral())

    tables = [
        ch.aggregate_community(corpus.posts, corpus.annotations, corpus.non_news),
        ch.aggregate_author_rolling(corpus.posts, corpus.annotations, 6, corpus.non_news),
    ]
    worst_sum = 0.0
    for t in tables:
        positive = t.column("general.links") > 0
        for fam, labels in ch.FAMILIES.items():
            s = sum(t.column(f"{fam}.{lab}.frac") for lab in labels)
            worst_sum = max(worst_sum, float(np.abs(s[positive] - 1.0).max()))
    ok = median_hits > 0 and median_bad == 0 and all(0.95 <= v <= 1.05 for v in integrals) and worst_sum <= 1e-9
    record(
        7,
        "normalization identities",
        ok,
        f"{median_hits} median-score posts, {median_bad} != 1.0; KDE integrals in [{min(integrals):.4f}, {max(integrals):.4f}]; max |sum frac - 1| {worst_sum:.1e}",
    )


# 8 -----------------------------------------------------------------------


def _pushshift_records(n, seed=0):
    # shaped like real submission dumps: many fields besides the ones parsed
    rng = random.Random(seed)
    for i in range(n):
        yield {
            "all_awardings": [], "archived": False, "author": f"user_{rng.randrange(50000)}", "author_created_utc": 1400000000 + rng.randrange(10**8),
            "author_flair_css_class": None, "author_flair_richtext": [], "author_flair_text": None, "author_flair_type": "text",
            "author_fullname": f"t2_{rng.randrange(10**9):x}", "can_gild": True, "contest_mode": False, "created_utc": 1500000000 + i * 13,
            "domain": "example.com", "edited": False, "gilded": 0, "gildings": {}, "hidden": False, "id": f"{i:x}", "is_crosspostable": True,
            "is_original_content": False, "is_reddit_media_domain": False, "is_self": False, "is_video": False, "link_flair_richtext": [],
            "link_flair_text": None, "link_flair_type": "text", "locked": False, "media": None, "media_embed": {}, "name": f"t3_{i:x}",
            "num_comments": rng.randrange(500), "num_crossposts": 0, "over_18": False, "parent_whitelist_status": "all_ads",
            "permalink": f"/r/politics/comments/{i:x}/a_headline_about_the_news/", "pinned": False, "removed_by_category": None,
            "retrieved_on": 1600000000, "score": rng.randrange(-5, 5000), "secure_media": None, "selftext": "", "send_replies": True,
            "spoiler": False, "stickied": False, "subreddit": "politics", "subreddit_id": "t5_2cneq", "subreddit_subscribers": 5000000,
            "subreddit_type": "public", "thumbnail": "default", "title": "A headline about something that happened in the news today",
            "total_awards_received": 0, "upvote_ratio": 0.97, "url": f"https://www.site{rng.randrange(3000)}.com/2017/08/{i}/article-slug",
            "whitelist_status": "all_ads",
        }


def _parse_rate(data):
    best = 0.0
    for _ in range(3):
        t0 = time.perf_counter()
        _, stats = parse_archive(io.BytesIO(data))
        best = max(best, len(data) / (time.perf_counter() - t0) / 1e6)
    assert stats.skipped == 0
    return best


def _bundle(out):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted((out / "report").iterdir())}


def test_criterion_8_determinism_and_throughput(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"version": 1, "synth": {"n_posts": 100_000, "n_authors": 5000, "n_communities": 100}}))
    times, bundles, codes = [], [], []
    for name in ("a", "b"):
        out = tmp_path / name
        t0 = time.perf_counter()
        codes.append(main(["synth", "--config", str(cfg), "--out", str(out), "--seed", "8"]))
        codes.append(main(["pipeline", "--config", str(cfg), "--out", str(out), "--seed", "8"]))
        times.append(time.perf_counter() - t0)
        bundles.append(_bundle(out))
    n_posts = json.loads((tmp_path / "a" / "logs" / "ingest.json").read_text())["counts"]["posts"]

    shaped = b"".join(json.dumps(r).encode() + b"\n" for r in _pushshift_records(40_000))
    compact = (tmp_path / "a" / "synth" / "archive.ndjson").read_bytes()
    rate_shaped, rate_compact = _parse_rate(shaped), _parse_rate(compact)
    ok = codes == [0, 0, 0, 0] and n_posts == 100_000 and bundles[0] == bundles[1] and max(times) < 120 and rate_shaped >= 50
    record(
        8,
        "determinism and throughput",
        ok,
        f"{n_posts} posts; bundles identical={bundles[0] == bundles[1]}; synth->report {times[0]:.1f}s / {times[1]:.1f}s (limit 120s); "
        f"parse {rate_shaped:.0f} MB/s on {len(shaped) / 40_000:.0f}-byte records, {rate_compact:.0f} MB/s on {len(compact) / n_posts:.0f}-byte records (min 50)",
    )


# 9 -----------------------------------------------------------------------


def test_criterion_9_coverage_fixture():
    non_news = {"imgur.com", "youtube.com"}
    # month: (labeled-by-binary, labeled-by-mbfc-only, unlabeled news, non-news, self posts, empty)
    plan = {
        (2017, 1): ["good.com"] * 3 + ["bad.com"] * 1 + ["regional.com"] * 2 + ["x.com"] * 2 + ["imgur.com"] * 2,
        (2017, 2): ["funny.com"] * 1 + ["y.com"] * 4 + ["youtube.com"] * 5 + [""] * 3,
        (2017, 3): ["imgur.com"] * 4 + [""] * 2,
        (2017, 4): ["regional.com"] * 5,
    }
    posts = [post(f"{y}{m}-{i}", when=ts(y, m, 1 + i % 27), domain=d) for (y, m), doms in plan.items() for i, d in enumerate(doms)]
    expected = {
        "binary": {MonthKey(2017, 1): 4 / 8, MonthKey(2017, 2): 1 / 5, MonthKey(2017, 4): 0.0},
        "volkova": {MonthKey(2017, 1): 4 / 8, MonthKey(2017, 2): 1 / 5, MonthKey(2017, 4): 0.0},
        "mbfc": {MonthKey(2017, 1): 6 / 8, MonthKey(2017, 2): 1 / 5, MonthKey(2017, 4): 1.0},
        "any": {MonthKey(2017, 1): 6 / 8, MonthKey(2017, 2): 1 / 5, MonthKey(2017, 4): 1.0},
    }
    got = {fam: measure_coverage(posts, ANNOTATIONS, non_news, fam) for fam in expected}
    ok = got == expected
    record(9, "coverage on hand-counted fixture", ok, "; ".join(f"{fam}: " + ", ".join(f"{m}={v:.3f}" for m, v in got[fam].items()) for fam in got))
