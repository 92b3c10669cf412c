"""Ranked-retrieval metrics and the experiment protocols.

Average precision of a length-N ranking is sum(P(r) * rel(r)) / min(R, N)
by default, where R is the number of relevant images in the collection for
the query; the literal-R denominator is available via ``denominator``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidInputError
from .query import QuerySpec, region_query, whole_image_query
from .store import InvertedIndex

DEFAULT_CUTOFF = 20


@dataclass(frozen=True)
class Ranking:
    query_id: str
    image_ids: tuple[str, ...]  # rank 1 first
    relevance: tuple[int, ...]  # binary, parallel to image_ids
    relevant_total: int  # R: relevant images in the collection

    def __post_init__(self):
        if len(self.image_ids) != len(self.relevance):
            raise InvalidInputError("relevance must parallel image_ids")
        if any(r not in (0, 1) for r in self.relevance):
            raise InvalidInputError("relevance values must be 0 or 1")
        if self.relevant_total < 0:
            raise InvalidInputError("relevant_total must be >= 0")

    @property
    def cutoff(self) -> int:
        return len(self.image_ids)


def precision_at(ranking: Ranking, r: int) -> float:
    """Fraction of the top-r results that are relevant."""
    if not 1 <= r <= ranking.cutoff:
        raise InvalidInputError(f"rank {r} out of range 1..{ranking.cutoff}")
    return sum(ranking.relevance[:r]) / r


def average_precision(ranking: Ranking, denominator: str = "min") -> float:
    """aveP = sum over ranks of P(r)*rel(r), divided by min(R, N) (default)
    or by R (``denominator="literal"``); 0 when R = 0."""
    if ranking.relevant_total == 0:
        return 0.0
    if denominator == "min":
        denom = min(ranking.relevant_total, ranking.cutoff)
    elif denominator == "literal":
        denom = ranking.relevant_total
    else:
        raise InvalidInputError(f"unknown denominator mode {denominator!r}")
    if denom == 0:
        return 0.0
    total = 0.0
    hits = 0
    for r, rel in enumerate(ranking.relevance, start=1):
        if rel:
            hits += 1
            total += hits / r
    return total / denom


def mean_average_precision(rankings: list[Ranking], denominator: str = "min") -> float:
    if not rankings:
        raise InvalidInputError("need at least one ranking")
    return sum(average_precision(r, denominator) for r in rankings) / len(rankings)


@dataclass(frozen=True)
class EvalRow:
    category: str
    map_score: float
    precision: float
    n_queries: int
    cutoff: int


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[EvalRow, ...]
    protocol: str
    config: dict = field(default_factory=dict)

    def to_tsv(self) -> str:
        lines = ["category\tmap\tprecision\tn_queries\tcutoff"]
        for row in self.rows:
            lines.append(
                f"{row.category}\t{row.map_score:.6f}\t{row.precision:.6f}"
                f"\t{row.n_queries}\t{row.cutoff}"
            )
        return "\n".join(lines) + "\n"

    def format_table(self) -> str:
        """Human-readable table with percentages to two decimals."""
        width = max([len("Category")] + [len(r.category) for r in self.rows])
        out = [f"{'Category':<{width}}  {'MAP (%)':>8}  {'Precision (%)':>13}"]
        for row in self.rows:
            out.append(
                f"{row.category:<{width}}  {row.map_score * 100:>8.2f}"
                f"  {row.precision * 100:>13.2f}"
            )
        return "\n".join(out)

    def write(self, run_dir: str | Path) -> Path:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "report.tsv").write_text(self.to_tsv())
        (run_dir / "report.txt").write_text(self.format_table() + "\n")
        (run_dir / "config.json").write_text(
            json.dumps({"protocol": self.protocol, **self.config}, indent=2, sort_keys=True)
        )
        return run_dir / "report.tsv"


def _precision_at_cutoff(ranking: Ranking) -> float:
    # precision regardless of rank information, evaluated at the cutoff
    return precision_at(ranking, ranking.cutoff) if ranking.cutoff else 0.0


def run_whole_image_protocol(
    index: InvertedIndex,
    category: str,
    cutoff: int = DEFAULT_CUTOFF,
    denominator: str = "min",
) -> EvalRow:
    """For every image tagged ``category``, retrieve the top ``cutoff`` by
    whole-image query (source excluded), mark same-tag results relevant, and
    average aveP and precision over the queries."""
    members = index.tag_search(category)
    if not members:
        raise InvalidInputError(f"no images tagged {category!r}")
    rankings = []
    for source in members:
        results = whole_image_query(source, index, limit=cutoff)
        ids = tuple(r.image_id for r in results)
        rel = tuple(1 if index.tag_of(i) == category else 0 for i in ids)
        rankings.append(
            Ranking(
                query_id=source,
                image_ids=ids,
                relevance=rel,
                relevant_total=len(members) - 1,
            )
        )
    return EvalRow(
        category=category,
        map_score=mean_average_precision(rankings, denominator),
        precision=sum(_precision_at_cutoff(r) for r in rankings) / len(rankings),
        n_queries=len(rankings),
        cutoff=cutoff,
    )


def run_whole_image_report(
    index: InvertedIndex,
    categories: list[str] | None = None,
    cutoff: int = DEFAULT_CUTOFF,
    denominator: str = "min",
) -> EvalReport:
    if categories is None:
        categories = [t for t in index.tags() if t != "untagged"]
    rows = tuple(
        run_whole_image_protocol(index, c, cutoff, denominator) for c in categories
    )
    return EvalReport(
        rows=rows,
        protocol="whole-image",
        config={"cutoff": cutoff, "denominator": denominator, "relevance_rule": "tag"},
    )


def run_region_protocol(
    index: InvertedIndex,
    queries: list[QuerySpec],
    relevance_rule: str = "tag",
    relevant_sets: dict[str, set[str]] | None = None,
    cutoff: int = DEFAULT_CUTOFF,
    denominator: str = "min",
    group_label: str = "region",
) -> EvalReport:
    """Evaluate region queries, judging results either by the source image's
    category tag or by explicitly supplied per-query relevant sets (keyed by
    source image id, as in subtype experiments)."""
    if not queries:
        raise InvalidInputError("need at least one query")
    if relevance_rule not in ("tag", "explicit"):
        raise InvalidInputError(f"unknown relevance rule {relevance_rule!r}")
    if relevance_rule == "explicit" and relevant_sets is None:
        raise InvalidInputError("explicit relevance requires relevant_sets")
    per_category: dict[str, list[Ranking]] = {}
    for spec in queries:
        spec = QuerySpec(
            source_image=spec.source_image,
            rects=spec.rects,
            limit=cutoff,
            negative_weight=spec.negative_weight,
            exclude_source=spec.exclude_source,
        )
        results = region_query(spec, index)
        ids = tuple(r.image_id for r in results)
        if relevance_rule == "tag":
            category = index.tag_of(spec.source_image)
            relevant = set(index.tag_search(category))
            relevant.discard(spec.source_image)
        else:
            if spec.source_image not in relevant_sets:
                raise InvalidInputError(
                    f"no relevant set supplied for {spec.source_image}"
                )
            category = group_label
            relevant = set(relevant_sets[spec.source_image])
            relevant.discard(spec.source_image)
        rel = tuple(1 if i in relevant else 0 for i in ids)
        # pad judgement to the cutoff: absent ranks are non-relevant
        if len(ids) < cutoff:
            rel = rel + (0,) * (cutoff - len(ids))
            ids = ids + tuple(f"<none:{n}>" for n in range(cutoff - len(ids)))
        per_category.setdefault(category, []).append(
            Ranking(
                query_id=spec.source_image,
                image_ids=ids,
                relevance=rel,
                relevant_total=len(relevant),
            )
        )
    rows = []
    for category in sorted(per_category):
        rankings = per_category[category]
        rows.append(
            EvalRow(
                category=category,
                map_score=mean_average_precision(rankings, denominator),
                precision=sum(_precision_at_cutoff(r) for r in rankings)
                / len(rankings),
                n_queries=len(rankings),
                cutoff=cutoff,
            )
        )
    return EvalReport(
        rows=tuple(rows),
        protocol="region",
        config={
            "cutoff": cutoff,
            "denominator": denominator,
            "relevance_rule": relevance_rule,
        },
    )
