"""Small builders shared by the test modules."""

import calendar

from context_eval.core import (
    Bias,
    BinaryClass,
    Factualness,
    Post,
    SourceAnnotation,
    VolkovaCategory,
)


def ts(year: int, month: int, day: int = 1, hour: int = 12) -> int:
    return calendar.timegm((year, month, day, hour, 0, 0))


def post(pid, author="alice", community="news", when=None, domain="example.com", score=1, removed=False, title=""):
    return Post(pid, author, community, when if when is not None else ts(2017, 1), domain, score, removed, title)


def ann(domain, binary="unlabeled", volkova="unlabeled", fact="unlabeled", bias="unlabeled", flags=()):
    return SourceAnnotation(
        domain,
        BinaryClass(binary),
        VolkovaCategory(volkova),
        Factualness(fact),
        Bias(bias),
        frozenset(flags),
    )


CREDIBLE = ann("good.com", "credible", "verified", "high", "center")
DECEPTIVE = ann("bad.com", "deceptive", "hoax", "very_low", "extreme_right", ("questionable",))
SATIRE = ann("funny.com", "deceptive", "satire", "low", "left", ("satire",))
MBFC_ONLY = ann("regional.com", fact="mixed", bias="center_left")
ANNOTATIONS = {a.domain: a for a in (CREDIBLE, DECEPTIVE, SATIRE, MBFC_ONLY)}
