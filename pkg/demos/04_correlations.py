"""Which characteristics track model confidence, and where acceptance matters."""

from context_eval import characteristics as ch
from context_eval.core import label_posts
from context_eval.evaluation import acceptance_decile_analysis, align_predictions, correlate_confidence
from context_eval.synth import SynthConfig, generate

# confidence is tied to each author's latent deceptive tendency with rho = 0.4,
# and nudged upward for posts above the 80th acceptance percentile
corpus = generate(
    SynthConfig(n_posts=40_000, n_authors=400, author_tendency=(1, 1), confidence_rho=0.4, acceptance_coupling=1.0, seed=1)
)
test = sorted(label_posts(corpus.posts, corpus.annotations), key=lambda lp: lp.id)
preds = align_predictions(test, {p.post_id: p for p in corpus.predictions})
author = ch.aggregate_author_rolling(corpus.posts, corpus.annotations, 6, corpus.non_news)
community = ch.aggregate_community(corpus.posts, corpus.annotations, corpus.non_news)

entries = correlate_confidence(test, preds, author, community, threshold=0.25)
print("characteristics with |r| >= 0.25 in some subset")
rows = {}
for e in entries:
    if e.reported:
        rows.setdefault(e.characteristic, {})[e.subset] = e
for name, subsets in sorted(rows.items()):
    cells = "  ".join(f"{s}: {subsets[s].r:+.2f}{'‡' if subsets[s].sig_01 else '†' if subsets[s].sig_05 else ''}" for s in ("all", "credible", "deceptive"))
    print(f"  {name:45s} {cells}")

scores = {s.post_id: s for s in ch.normalize_scores(corpus.posts)}
print("\nacceptance decile vs true-class confidence (all posts)")
for e in acceptance_decile_analysis(test, preds, scores):
    if e.subset == "all":
        print(f"  decile {e.decile:2d}  n={e.n:5d}  r={e.r:+.3f}{' *' if e.sig_05 else ''}")
