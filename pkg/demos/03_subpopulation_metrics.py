"""Overall and per-community performance against the three naive baselines."""

import numpy as np

from context_eval import characteristics as ch
from context_eval.baselines import Baseline, run_baselines
from context_eval.core import build_dataset, label_posts
from context_eval.evaluation import align_predictions, f1_kde, group_metrics, metrics
from context_eval.synth import SynthConfig, generate

# a fifth of the communities are built so the model struggles there
corpus = generate(SynthConfig(n_posts=60_000, n_authors=2000, n_communities=60, hard_community_fraction=0.2, seed=3))
labeled = label_posts(corpus.posts, corpus.annotations)
_, test = build_dataset(labeled, seed=3, test_fraction=0.5)

model = align_predictions(test, {p.post_id: p for p in corpus.predictions})
author = ch.aggregate_author_rolling(corpus.posts, corpus.annotations, 6, corpus.non_news)
community = ch.aggregate_community(corpus.posts, corpus.annotations, corpus.non_news)
baselines = run_baselines(test, author, community, seed=3)

print(f"{'predictor':18s} precision recall  f1    macro-f1")
for name, preds in [("model", model)] + [(b.value, baselines[b]) for b in Baseline]:
    m = metrics(test, preds)
    print(f"{name:18s} {m.precision:.3f}     {m.recall:.3f}   {m.f1:.3f} {m.macro_f1:.3f}")

reports = group_metrics(test, model, "community", min_group_size=20)
f1 = np.array([r.metrics.f1 for r in reports])
print(f"\n{len(reports)} communities; share with F1 < 0.4: {np.mean(f1 < 0.4):.2f}")
for q in range(1, 5):
    members = [r for r in reports if r.quartile == q]
    print(f"quartile {q}: F1 {min(r.metrics.f1 for r in members):.2f}-{max(r.metrics.f1 for r in members):.2f} ({len(members)} communities)")

curve = f1_kde(reports)
print(f"\nF1 density peaks at {curve.grid[np.argmax(curve.density)]:.2f} (bandwidth {curve.bandwidth:.3f})")
