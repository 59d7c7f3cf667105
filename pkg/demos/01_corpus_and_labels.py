"""Generate a synthetic archive, parse it back, label posts and build a balanced split."""

import io

from context_eval.core import LabelStats, build_dataset, label_posts, measure_coverage, parse_archive, serialize_posts
from context_eval.synth import SynthConfig, generate

corpus = generate(SynthConfig(n_posts=20_000, n_authors=800, n_communities=25, seed=42))

# the archive format is newline-delimited JSON, as in monthly submission dumps
buf = io.BytesIO()
serialize_posts(corpus.posts, buf)
buf.seek(0)
posts, stats = parse_archive(buf)
print(f"parsed {stats.posts} posts from {stats.bytes / 1e6:.1f} MB, skipped {stats.skipped}")

lstats = LabelStats()
labeled = label_posts(posts, corpus.annotations, lstats)
print(f"labeled {lstats.labeled}, dropped {lstats.dropped} (no binary label)")

train, test = build_dataset(labeled, seed=42, test_fraction=0.2)
print(f"train {len(train)}  test {len(test)}")

print("\nmonthly coverage of potential news links")
print("month     volkova  mbfc")
vol = measure_coverage(posts, corpus.annotations, corpus.non_news, "volkova")
mbfc = measure_coverage(posts, corpus.annotations, corpus.non_news, "mbfc")
for month in vol:
    print(f"{month}   {vol[month]:.3f}   {mbfc[month]:.3f}")
