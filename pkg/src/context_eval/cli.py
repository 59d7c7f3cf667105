"""Command-line pipeline: ingest -> label -> characterize -> baselines -> evaluate -> correlate -> report.

Every stage reads artifacts from earlier stages under ``--out`` and writes
its own atomically, plus a JSON run log under ``<out>/logs``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import shutil
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import baselines as bl
from . import characteristics as ch
from . import core
from . import evaluation as ev
from ._io import atomic_open
from .synth import SynthConfig, generate, write_corpus

log = logging.getLogger("context_eval")

STAGES = ("ingest", "label", "characterize", "baselines", "evaluate", "correlate", "report")
REPORT_FILES = (
    "group_metrics.csv",
    "correlations_confidence.csv",
    "correlations_groups.csv",
    "acceptance_deciles.csv",
    "kde_f1.csv",
    "quartile_wordcloud.json",
    "metrics.json",
)
CONFIG_VERSION = 1

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MISSING = 2
EXIT_PARSE = 3


class MissingArtifact(Exception):
    def __init__(self, path: Path):
        super().__init__(f"missing required file: {path}")
        self.path = path


class ParseFailure(Exception):
    pass


@dataclass
class RunConfig:
    archives: list[str] = field(default_factory=list)
    annotations: str | None = None
    non_news: str | None = None
    predictions: str | None = None
    format: str | None = None
    seed: int = 0
    threads: int = 0
    out: str = "out"
    test_fraction: float = 0.2
    r_threshold: float = 0.25
    group_r_threshold: float = 0.3
    decision_threshold: float = 0.5
    min_group_size: int = 1
    max_skip_rate: float = 0.1
    author_months: int = 6
    community_months: int = 1
    per_community_deciles: bool = False
    synth: dict = field(default_factory=dict)

    def validate(self) -> None:
        if not 0.0 <= self.r_threshold <= 1.0 or not 0.0 <= self.group_r_threshold <= 1.0:
            raise ValueError("r thresholds must lie in [0, 1]")
        if not 0.0 < self.decision_threshold < 1.0:
            raise ValueError("decision threshold must lie in (0, 1)")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.min_group_size < 1:
            raise ValueError("min_group_size must be >= 1")
        if not 0.0 <= self.max_skip_rate <= 1.0:
            raise ValueError("max_skip_rate must lie in [0, 1]")
        if self.author_months < 1 or self.community_months < 1:
            raise ValueError("windows must be >= 1 month")

    @classmethod
    def load(cls, path: str | None) -> RunConfig:
        if path is None:
            return cls()
        base = Path(path).resolve().parent
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        version = raw.pop("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ValueError(f"unsupported config version {version}")
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")

        def resolve(p):
            return None if p is None else str((base / p) if not Path(p).is_absolute() else Path(p))

        for key in ("annotations", "non_news", "predictions", "format", "out"):
            if key in raw:
                raw[key] = resolve(raw[key])
        if "archives" in raw:
            raw["archives"] = [resolve(p) for p in raw["archives"]]
        return cls(**raw)


class Workspace:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.work = self.out / "work"
        self.report = self.out / "report"
        self.logs = self.out / "logs"
        self.synth = self.out / "synth"

    # inputs fall back to the synthetic corpus when not configured
    def input(self, name: str) -> Path:
        value = getattr(self.cfg, name)
        if value:
            return Path(value)
        return self.synth / {"annotations": "annotations.csv", "non_news": "non_news.txt", "predictions": "predictions.csv"}[name]

    def archives(self) -> list[Path]:
        if self.cfg.archives:
            return [Path(p) for p in self.cfg.archives]
        return [self.synth / "archive.ndjson"]

    def w(self, name: str) -> Path:
        return self.work / name


def require(*paths: Path) -> None:
    for p in paths:
        if not p.is_file():
            raise MissingArtifact(p)


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _write_csv(path: Path, header, rows) -> int:
    n = 0
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
            n += 1
    return n


def _write_json(path: Path, obj) -> None:
    with atomic_open(path) as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, allow_nan=False)
        fh.write("\n")


# --------------------------------------------------------------------------
# Loading shared artifacts


def _load_posts(ws: Workspace) -> list[core.Post]:
    path = ws.w("posts.ndjson")
    require(path)
    with open(path, "rb") as fh:
        posts, _ = core.parse_archive(fh)
    return posts


def _load_annotations(ws: Workspace) -> dict[str, core.SourceAnnotation]:
    path = ws.input("annotations")
    require(path)
    with open(path, encoding="utf-8", newline="") as fh:
        return core.read_annotations(fh)


def _load_non_news(ws: Workspace) -> core.DomainList:
    path = ws.input("non_news")
    if ws.cfg.non_news is None and not path.is_file():
        return core.DomainList(frozenset())
    require(path)
    with open(path, encoding="utf-8") as fh:
        return core.read_non_news(fh)


def _load_split(ws: Workspace, posts, annotations) -> tuple[list[core.LabeledPost], list[core.LabeledPost]]:
    path = ws.w("split.csv")
    require(path)
    which = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            which[row["post_id"]] = row["split"]
    labeled = core.label_posts((p for p in posts if p.id in which), annotations)
    train = [lp for lp in labeled if which[lp.id] == "train"]
    test = [lp for lp in labeled if which[lp.id] == "test"]
    return sorted(train, key=lambda lp: lp.id), sorted(test, key=lambda lp: lp.id)


def _load_predictions(ws: Workspace) -> dict[str, core.PredictionRecord]:
    path = ws.input("predictions")
    require(path)
    with open(path, encoding="utf-8", newline="") as fh:
        return core.read_predictions(fh, ws.cfg.decision_threshold)


def _load_tables(ws: Workspace) -> dict[str, ch.CharacteristicTable]:
    path = ws.w("characteristics.csv")
    require(path)
    with open(path, encoding="utf-8", newline="") as fh:
        return ch.read_dump(fh)


# --------------------------------------------------------------------------
# Stages


def _parse_one(args) -> tuple[list[core.Post], core.ParseStats]:
    path, fmt = args
    return core.read_archive_path(path, fmt)


def stage_synth(ws: Workspace) -> dict:
    params = dict(ws.cfg.synth)
    params["seed"] = ws.cfg.seed
    corpus = generate(SynthConfig.from_dict(params))
    paths = write_corpus(corpus, ws.synth)
    return {"posts": len(corpus.posts), "predictions": len(corpus.predictions), "files": sorted(str(p) for p in paths.values())}


def stage_ingest(ws: Workspace) -> dict:
    paths = ws.archives()
    require(*paths)
    fmt = core.FormatConfig.load(ws.cfg.format) if ws.cfg.format else None
    workers = ws.cfg.threads or os.cpu_count() or 1
    jobs = [(p, fmt) for p in paths]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_parse_one, jobs))
    else:
        results = [_parse_one(j) for j in jobs]
    stats = core.ParseStats()
    posts, seen = [], set()
    for file_posts, file_stats in results:
        stats.merge(file_stats)
        for p in file_posts:
            if p.id in seen:
                stats.skip("duplicate id")
                stats.posts -= 1
                continue
            seen.add(p.id)
            posts.append(p)
    counts = {"files": len(paths), "lines": stats.lines, "posts": stats.posts, "skipped": stats.skipped, "skip_reasons": stats.skip_reasons, "bytes": stats.bytes}
    if stats.skip_rate > ws.cfg.max_skip_rate:
        raise ParseFailure(f"skip rate {stats.skip_rate:.3f} exceeds {ws.cfg.max_skip_rate}: {stats.skip_reasons}")
    with atomic_open(ws.w("posts.ndjson"), binary=True) as fh:
        core.serialize_posts(posts, fh)
    return counts


def stage_label(ws: Workspace) -> dict:
    posts = _load_posts(ws)
    annotations = _load_annotations(ws)
    non_news = _load_non_news(ws)
    lstats = core.LabelStats()
    labeled = core.label_posts(posts, annotations, lstats)
    train, test = core.build_dataset(labeled, ws.cfg.seed, ws.cfg.test_fraction)
    rows = [(lp.id, "train", lp.true_class.value) for lp in train] + [(lp.id, "test", lp.true_class.value) for lp in test]
    rows.sort()
    _write_csv(ws.w("split.csv"), ("post_id", "split", "true_class"), rows)
    cov_rows = []
    for family in ("any", "binary", "volkova", "mbfc"):
        for m, v in core.measure_coverage(posts, annotations, non_news, family).items():
            cov_rows.append((m.year, m.month, family, v))
    _write_csv(ws.w("coverage.csv"), ("year", "month", "family", "coverage"), cov_rows)
    return {"posts": len(posts), "labeled": lstats.labeled, "dropped": lstats.dropped, "train": len(train), "test": len(test)}


def stage_characterize(ws: Workspace) -> dict:
    posts = _load_posts(ws)
    annotations = _load_annotations(ws)
    non_news = _load_non_news(ws)
    community = ch.aggregate_community(posts, annotations, non_news)
    author = ch.aggregate_author_rolling(posts, annotations, ws.cfg.author_months, non_news)
    with atomic_open(ws.w("characteristics.csv")) as fh:
        n_rows = ch.write_dump([community, author], fh)
    scores = ch.normalize_scores(posts)
    _write_csv(
        ws.w("acceptance_scores.csv"),
        ("post_id", "normalized_score", "defined"),
        sorted((s.post_id, s.normalized_score, int(s.defined)) for s in scores),
    )
    return {"community_vectors": len(community), "author_vectors": len(author), "dump_rows": n_rows, "undefined_scores": sum(not s.defined for s in scores)}


def stage_baselines(ws: Workspace) -> dict:
    posts = _load_posts(ws)
    annotations = _load_annotations(ws)
    _, test = _load_split(ws, posts, annotations)
    tables = _load_tables(ws)
    community = tables["community"]
    if ws.cfg.community_months > 1:
        community = ch.aggregate_rolling(posts, annotations, "community", ws.cfg.community_months, _load_non_news(ws))
    preds = bl.run_baselines(test, tables["author"], community, ws.cfg.seed)
    with atomic_open(ws.w("baselines.csv")) as fh:
        bl.write_baselines((p for b in bl.Baseline for p in preds[b]), fh)
    return {"test": len(test)}


def _group_rows(predictor: str, kind: str, reports):
    for r in reports:
        m = r.metrics
        yield (predictor, kind, r.key, r.n_posts, m.precision, m.recall, m.f1, m.macro_f1, m.tp, m.fp, m.fn, m.tn, r.quartile)


def stage_evaluate(ws: Workspace) -> dict:
    pred_path = ws.input("predictions")
    require(pred_path)
    posts = _load_posts(ws)
    annotations = _load_annotations(ws)
    train, test = _load_split(ws, posts, annotations)
    require(ws.w("baselines.csv"))
    model = ev.align_predictions(test, _load_predictions(ws))
    with open(ws.w("baselines.csv"), encoding="utf-8", newline="") as fh:
        base = bl.read_baselines(fh)
    predictors = {"model": model}
    for b in bl.Baseline:
        predictors[b.value] = ev.align_predictions(test, {p.post_id: p for p in base[b]})

    summary = {"n_train": len(train), "n_test": len(test), "overall": {}}
    rows = []
    community_reports = {}
    for name, preds in predictors.items():
        summary["overall"][name] = ev.metrics(test, preds).as_dict()
        for kind in ("community", "author"):
            reports = ev.group_metrics(test, preds, kind, ws.cfg.min_group_size)
            if kind == "community":
                community_reports[name] = reports
            rows.extend(_group_rows(name, kind, reports))
    _write_csv(
        ws.w("group_metrics.csv"),
        ("predictor", "group_kind", "group", "n_posts", "precision", "recall", "f1", "macro_f1", "tp", "fp", "fn", "tn", "quartile"),
        rows,
    )
    reports = community_reports["model"]
    try:
        curve = ev.f1_kde(reports)
        kde_rows = zip(curve.grid.tolist(), curve.density.tolist())
        summary["kde_bandwidth"] = curve.bandwidth
    except ValueError as exc:
        log.warning("no F1 KDE: %s", exc)
        kde_rows = []
    _write_csv(ws.w("kde_f1.csv"), ("grid", "density"), kde_rows)
    _write_json(ws.w("quartile_wordcloud.json"), ev.wordcloud_data(reports))
    low = [r for r in reports if r.metrics.f1 < 0.4]
    summary["community_share_f1_below_0.4"] = len(low) / len(reports) if reports else 0.0
    _write_json(ws.w("metrics.json"), summary)
    return {"test": len(test), "groups": len(reports)}


def _corr_rows(entries):
    for e in entries:
        yield (
            e.characteristic, e.subset, e.target, "" if e.decile is None else e.decile,
            e.r, e.p_value, e.n, int(e.sig_05), int(e.sig_01), int(e.reported),
        )


_CORR_HEADER = ("characteristic", "subset", "target", "decile", "r", "p_value", "n", "sig_05", "sig_01", "reported")


def stage_correlate(ws: Workspace) -> dict:
    pred_path = ws.input("predictions")
    require(pred_path, ws.w("acceptance_scores.csv"))
    posts = _load_posts(ws)
    annotations = _load_annotations(ws)
    _, test = _load_split(ws, posts, annotations)
    tables = _load_tables(ws)
    model = ev.align_predictions(test, _load_predictions(ws))

    conf = ev.correlate_confidence(test, model, tables["author"], tables["community"], ws.cfg.r_threshold)
    _write_csv(ws.w("correlations_confidence.csv"), _CORR_HEADER, _corr_rows(conf))

    group_entries = []
    for kind in ("community", "author"):
        reports = ev.group_metrics(test, model, kind, ws.cfg.min_group_size)
        names, cols, matrix = ev.group_characteristics(test, tables[kind], kind)
        try:
            group_entries += ev.correlate_group_metrics(reports, names, cols, matrix, ws.cfg.group_r_threshold, prefix=f"{kind}.")
        except ValueError as exc:
            log.warning("skipping %s group correlations: %s", kind, exc)
    _write_csv(ws.w("correlations_groups.csv"), _CORR_HEADER, _corr_rows(group_entries))

    scores = {}
    with open(ws.w("acceptance_scores.csv"), encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            defined = row["defined"] == "1"
            scores[row["post_id"]] = ch.AcceptanceScore(row["post_id"], float(row["normalized_score"]) if defined else float("nan"), defined)
    deciles = ev.acceptance_decile_analysis(test, model, scores, per_community=ws.cfg.per_community_deciles)
    _write_csv(ws.w("acceptance_deciles.csv"), _CORR_HEADER, _corr_rows(deciles))
    return {
        "confidence_entries": len(conf),
        "confidence_reported": sum(e.reported for e in conf) // 3,
        "group_entries": len(group_entries),
        "decile_entries": len(deciles),
    }


def stage_report(ws: Workspace) -> dict:
    sources = [ws.w(name) for name in REPORT_FILES]
    require(*sources)
    ws.report.mkdir(parents=True, exist_ok=True)
    digests = {}
    for src in sources:
        dst = ws.report / src.name
        with atomic_open(dst, binary=True) as out, open(src, "rb") as inp:
            shutil.copyfileobj(inp, out)
        digests[src.name] = hashlib.sha256(dst.read_bytes()).hexdigest()
    _write_json(ws.report / "bundle.json", {"files": digests})
    return {"files": len(digests)}


STAGE_FUNCS = {
    "synth": stage_synth,
    "ingest": stage_ingest,
    "label": stage_label,
    "characterize": stage_characterize,
    "baselines": stage_baselines,
    "evaluate": stage_evaluate,
    "correlate": stage_correlate,
    "report": stage_report,
}


def run_stage(name: str, ws: Workspace) -> int:
    t0 = time.perf_counter()
    entry = {"stage": name}
    try:
        entry["counts"] = STAGE_FUNCS[name](ws)
        entry["status"] = "ok"
        code = EXIT_OK
    except MissingArtifact as exc:
        print(f"context-eval {name}: {exc}", file=sys.stderr)
        entry.update(status="missing", missing=str(exc.path))
        code = EXIT_MISSING
    except ParseFailure as exc:
        print(f"context-eval {name}: {exc}", file=sys.stderr)
        entry.update(status="parse_failure", error=str(exc))
        code = EXIT_PARSE
    entry["seconds"] = round(time.perf_counter() - t0, 4)
    _write_json(ws.logs / f"{name}.json", entry)
    log.info("%s finished in %.2fs (%s)", name, entry["seconds"], entry["status"])
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="context-eval", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=("synth", *STAGES, "pipeline"), help="stage to run; 'pipeline' runs every stage after synth in order")
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int, help="worker processes (default: available CPUs)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--min-group-size", type=int)
    parser.add_argument("--r-threshold", type=float, help="|r| inclusion threshold for post-level correlations")
    parser.add_argument("--group-r-threshold", type=float, help="|r| inclusion threshold for group-level correlations")
    parser.add_argument("--decision-threshold", type=float)
    parser.add_argument("--predictions", help="prediction CSV (post_id,p_deceptive)")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("CONTEXT_EVAL_LOG", "WARNING").upper(),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config)
    except (OSError, ValueError, TypeError) as exc:
        print(f"context-eval: bad config: {exc}", file=sys.stderr)
        return EXIT_ERROR
    overrides = {
        "seed": args.seed,
        "threads": args.threads,
        "out": args.out,
        "min_group_size": args.min_group_size,
        "r_threshold": args.r_threshold,
        "group_r_threshold": args.group_r_threshold,
        "decision_threshold": args.decision_threshold,
        "predictions": args.predictions,
    }
    for k, v in overrides.items():
        if v is not None:
            setattr(cfg, k, v)
    try:
        cfg.validate()
    except ValueError as exc:
        print(f"context-eval: {exc}", file=sys.stderr)
        return EXIT_ERROR
    ws = Workspace(cfg)
    names = STAGES if args.command == "pipeline" else (args.command,)
    for name in names:
        code = run_stage(name, ws)
        if code != EXIT_OK:
            return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
