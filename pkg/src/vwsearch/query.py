"""Region-scoped positive/negative queries over the inverted index.

Visual words falling inside the user's positive rectangles are what the
result must contain; words inside negative rectangles count against it.
Score = |matched positive words| - lambda * |matched negative words| over
distinct word indices; ties break by tf*idf cosine with the source
descriptor, then by image id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import InvalidInputError, InvalidQueryError, NotFoundError
from .encoder import ImageDescriptor, descriptor_cosine
from .store import InvertedIndex

POSITIVE = "positive"
NEGATIVE = "negative"


@dataclass(frozen=True)
class Rect:
    """Closed axis-aligned rectangle in image coordinates."""

    x0: float
    y0: float
    x1: float
    y1: float
    polarity: str = POSITIVE

    def __post_init__(self):
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise InvalidInputError("rect requires x0 <= x1 and y0 <= y1")
        if self.polarity not in (POSITIVE, NEGATIVE):
            raise InvalidInputError(f"unknown polarity {self.polarity!r}")

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1


@dataclass(frozen=True)
class QuerySpec:
    source_image: str
    rects: tuple[Rect, ...]
    limit: int = 20
    negative_weight: float = 1.0
    exclude_source: bool = True

    def __post_init__(self):
        if self.limit < 1:
            raise InvalidInputError("limit must be >= 1")
        if self.negative_weight < 0:
            raise InvalidInputError("negative_weight must be >= 0")
        object.__setattr__(self, "rects", tuple(self.rects))


@dataclass(frozen=True)
class RankedResult:
    image_id: str
    score: float
    matched_positive: frozenset[int]
    matched_negative: frozenset[int]


def words_in_rects(
    desc: ImageDescriptor, rects: list[Rect] | tuple[Rect, ...], polarity: str
) -> set[int]:
    """Word indices with at least one occurrence location inside the union of
    the given-polarity rectangles (closed containment)."""
    selected = [r for r in rects if r.polarity == polarity]
    out: set[int] = set()
    for occ in desc.occurrences:
        for x, y in occ.locations:
            if any(r.contains(x, y) for r in selected):
                out.add(occ.index)
                break
    return out


def region_query(spec: QuerySpec, index: InvertedIndex) -> list[RankedResult]:
    """Rank corpus images against the words selected by the spec's rects.

    Candidates come only from the postings of the positive words (never a
    full scan); the returned order is fully deterministic.
    """
    if not index.has_image(spec.source_image):
        raise NotFoundError(spec.source_image)
    src = index.descriptor(spec.source_image)
    positive = words_in_rects(src, spec.rects, POSITIVE)
    if not positive:
        raise InvalidQueryError("no positive visual words selected")
    negative = words_in_rects(src, spec.rects, NEGATIVE)
    return rank_candidates(
        index,
        src,
        positive,
        negative,
        limit=spec.limit,
        negative_weight=spec.negative_weight,
        exclude_source=spec.exclude_source,
    )


def rank_candidates(
    index: InvertedIndex,
    src: ImageDescriptor,
    positive: set[int],
    negative: set[int],
    limit: int,
    negative_weight: float = 1.0,
    exclude_source: bool = True,
    hard_negative: bool = False,
    pad_results: bool = False,
) -> list[RankedResult]:
    candidates: set[str] = set()
    for w in positive:
        candidates.update(index.postings(w))
    if exclude_source:
        candidates.discard(src.image_id)
    scored = []
    for image_id in candidates:
        words = index.words_of(image_id)
        mp = frozenset(positive & words)
        mn = frozenset(negative & words)
        if hard_negative and mn:
            continue
        score = len(mp) - negative_weight * len(mn)
        cosine = descriptor_cosine(src, index.descriptor(image_id))
        scored.append((score, cosine, image_id, mp, mn))
    scored.sort(key=lambda t: (-t[0], -t[1], t[2]))
    out = [
        RankedResult(image_id=i, score=s, matched_positive=mp, matched_negative=mn)
        for s, _, i, mp, mn in scored[:limit]
    ]
    if pad_results and len(out) < limit:
        # fill remaining ranks with zero-match images in deterministic order
        present = candidates | ({src.image_id} if exclude_source else set())
        empty = frozenset()
        for image_id in index.images():
            if len(out) >= limit:
                break
            if image_id in present:
                continue
            out.append(
                RankedResult(
                    image_id=image_id,
                    score=0.0,
                    matched_positive=empty,
                    matched_negative=empty,
                )
            )
    return out


FULL_IMAGE_RECT = Rect(-math.inf, -math.inf, math.inf, math.inf, POSITIVE)


def whole_image_query(
    source_image: str, index: InvertedIndex, limit: int = 20, exclude_source: bool = True
) -> list[RankedResult]:
    """Query with every visual word of the source image as positive.

    Unlike region_query, ranks below the last match are padded with
    zero-score images (id order) so evaluation cutoffs always see a full
    list; with no negative words this preserves score-descending order.
    """
    if not index.has_image(source_image):
        raise NotFoundError(source_image)
    src = index.descriptor(source_image)
    positive = words_in_rects(src, (FULL_IMAGE_RECT,), POSITIVE)
    if not positive:
        raise InvalidQueryError("source image has no visual words")
    return rank_candidates(
        index,
        src,
        positive,
        set(),
        limit=limit,
        exclude_source=exclude_source,
        pad_results=True,
    )
