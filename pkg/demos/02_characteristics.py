"""Community and author characteristic vectors, contributor inequality and acceptance scores."""

import numpy as np

from context_eval import characteristics as ch
from context_eval.synth import SynthConfig, generate

corpus = generate(SynthConfig(n_posts=20_000, n_authors=800, n_communities=25, seed=7))

community = ch.aggregate_community(corpus.posts, corpus.annotations, corpus.non_news)
author = ch.aggregate_author_rolling(corpus.posts, corpus.annotations, window=6, non_news=corpus.non_news)
print(f"{len(community)} community-months, {len(author)} author-months, {len(community.columns)} columns")

key = next(iter(community))
vec = community[key]
print(f"\n{key[0]} in {key[1]}:")
for col in ("general.posts", "general.links", "binary_class.deceptive.frac", "mbfc_factualness.high.frac", ch.GINI_COLUMN):
    print(f"  {col:32s} {vec[col]:.3f}")

# Gini of links per contributor: 0 when everyone posts equally
print("\ngini([5, 5, 5, 5]) =", ch.gini([5, 5, 5, 5]))
print("gini([1, 0, 0, 0]) =", ch.gini([1, 0, 0, 0]))
print("community gini, median over months:", float(np.median(community.column(ch.GINI_COLUMN))))

scores = ch.normalize_scores(corpus.posts)
vals = np.array([s.normalized_score for s in scores if s.defined])
print(f"\nnormalized scores: median {np.median(vals):.2f}, 99th pct {np.percentile(vals, 99):.1f}, undefined {sum(not s.defined for s in scores)}")
