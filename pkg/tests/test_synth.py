import hashlib

import numpy as np
import pytest
from scipy import stats

from context_eval.core import Label, label_posts, parse_archive, read_annotations, read_predictions
from context_eval.synth import SynthConfig, generate, true_labels, write_corpus


def _digest(directory):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(directory.iterdir())}


def test_same_seed_gives_identical_files(tmp_path):
    cfg = SynthConfig(n_posts=3000, n_authors=150, seed=8)
    write_corpus(generate(cfg), tmp_path / "a")
    write_corpus(generate(cfg), tmp_path / "b")
    assert _digest(tmp_path / "a") == _digest(tmp_path / "b")
    write_corpus(generate(SynthConfig(n_posts=3000, n_authors=150, seed=9)), tmp_path / "c")
    assert _digest(tmp_path / "a") != _digest(tmp_path / "c")


def test_files_round_trip_with_zero_skips(tmp_path):
    corpus = generate(SynthConfig(n_posts=4000, n_authors=200, seed=1))
    paths = write_corpus(corpus, tmp_path)
    with open(paths["archive"], "rb") as fh:
        posts, st = parse_archive(fh)
    assert st.skipped == 0 and posts == corpus.posts
    with open(paths["annotations"]) as fh:
        assert read_annotations(fh) == corpus.annotations
    with open(paths["predictions"]) as fh:
        assert read_predictions(fh) == {p.post_id: p for p in corpus.predictions}


def test_zero_tendency_gives_no_deceptive_posts():
    corpus = generate(SynthConfig(n_posts=5000, n_authors=100, author_tendency_value=0.0, seed=2))
    labels = true_labels(corpus)
    assert labels and Label.DECEPTIVE not in set(labels.values())


def test_predictions_cover_exactly_the_labeled_posts():
    corpus = generate(SynthConfig(n_posts=3000, n_authors=100, seed=3))
    assert {p.post_id for p in corpus.predictions} == set(true_labels(corpus))
    assert all(0.0 <= p.p_deceptive <= 1.0 for p in corpus.predictions)


def test_manifest_records_latents():
    corpus = generate(SynthConfig(n_posts=2000, n_authors=50, n_communities=10, hard_community_fraction=0.3, seed=4))
    m = corpus.manifest
    assert len(m["authors"]) == 50 and len(m["communities"]) == 10
    assert sum(c["hard"] for c in m["communities"].values()) == 3
    assert sum(a["n_posts"] for a in m["authors"].values()) == 2000


@pytest.mark.parametrize(
    "change",
    [
        {"months": 0},
        {"n_authors": 0},
        {"author_tendency": (0.0, 1.0)},
        {"confidence_rho": 1.5},
        {"labeled_share": 2.0},
        {"confidence_target": "nothing"},
    ],
)
def test_infeasible_configs(change):
    with pytest.raises(ValueError):
        generate(SynthConfig(**change))


def test_author_fractions_converge_to_tendencies():
    # KS distance between empirical and manifest tendencies shrinks with posts per author
    distances = []
    for n_posts in (4000, 40000):
        corpus = generate(SynthConfig(n_posts=n_posts, n_authors=200, activity_sigma=0.0, labeled_share=1.0, news_share=1.0, seed=6))
        dec, tot = {}, {}
        for lp in label_posts(corpus.posts, corpus.annotations):
            a = lp.post.author
            tot[a] = tot.get(a, 0) + 1
            dec[a] = dec.get(a, 0) + (lp.true_class is Label.DECEPTIVE)
        emp = np.array([dec[a] / tot[a] for a in sorted(tot)])
        latent = np.array([corpus.manifest["authors"][a]["tendency"] for a in sorted(tot)])
        distances.append(stats.ks_2samp(emp, latent).statistic)
        assert np.corrcoef(emp, latent)[0, 1] > (0.8 if n_posts == 4000 else 0.97)
    assert distances[1] < distances[0]
    assert distances[1] < 0.1


def test_hard_communities_have_low_f1():
    from context_eval.evaluation import align_predictions, group_metrics

    corpus = generate(SynthConfig(n_posts=40000, n_communities=100, n_authors=2000, hard_community_fraction=0.2, seed=0))
    test = sorted(label_posts(corpus.posts, corpus.annotations), key=lambda lp: lp.id)
    preds = align_predictions(test, {p.post_id: p for p in corpus.predictions})
    reports = group_metrics(test, preds, "community")
    share = np.mean([r.metrics.f1 < 0.4 for r in reports])
    assert abs(share - 0.2) <= 0.05
