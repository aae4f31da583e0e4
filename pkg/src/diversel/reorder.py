"""Rearrange selected segments before prompt assembly.

Three schemes: original-document order ("index"), descending relevance
("sort"), and m:n interleaving that alternates relevance-ranked groups
between the front and the back of the prompt so the strongest items sit
at both extremes. Interleave(1, 0) is exactly the sort scheme.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .corpus import Segment
from .errors import ParameterError
from .selection import SelectionResult


class OrderingKind(enum.Enum):
    INDEX_SORT = "index"
    SCORE_SORT = "sort"
    INTERLEAVE = "interleave"


@dataclass(frozen=True)
class OrderingScheme:
    kind: OrderingKind
    m: int = 1
    n: int = 0

    def __post_init__(self):
        if self.kind is OrderingKind.INTERLEAVE:
            if self.m < 1:
                raise ParameterError(f"interleave m must be >= 1, got {self.m}")
            if self.n < 0:
                raise ParameterError(f"interleave n must be >= 0, got {self.n}")

    def label(self) -> str:
        if self.kind is OrderingKind.INTERLEAVE:
            return f"{self.m}:{self.n}"
        return self.kind.value


def parse_scheme(spec: str) -> OrderingScheme:
    """Parse a CLI ordering string: "index", "sort", or "m:n" like "2:1"."""
    spec = spec.strip()
    if spec == "index":
        return OrderingScheme(OrderingKind.INDEX_SORT)
    if spec == "sort":
        return OrderingScheme(OrderingKind.SCORE_SORT)
    if ":" in spec:
        left, _, right = spec.partition(":")
        try:
            return OrderingScheme(OrderingKind.INTERLEAVE, m=int(left), n=int(right))
        except ValueError as exc:
            raise ParameterError(f"bad ordering scheme {spec!r}") from exc
    raise ParameterError(
        f"bad ordering scheme {spec!r}; expected 'index', 'sort', or 'm:n'")


def _score_ranked(picks: SelectionResult) -> list[int]:
    # Rank by pure relevance, not by the greedy step score: step scores mix
    # relevance with the diversity penalty and are not comparable across steps.
    by_index = sorted(picks.picks, key=lambda p: p.index)
    ranked = sorted(by_index, key=lambda p: -p.reward)
    return [p.index for p in ranked]


def order(picks: SelectionResult, segments: list[Segment],
          scheme: OrderingScheme) -> list[int]:
    """Permute the picked segment indices according to the scheme.

    INDEX_SORT sorts by (document first-appearance order, seg_index);
    SCORE_SORT by descending relevance to the query; INTERLEAVE walks the
    score-ranked list appending alternating groups of m to the front list
    and n to the back list, then emits front + reversed(back).
    """
    for p in picks.picks:
        if not 0 <= p.index < len(segments):
            raise ParameterError(f"pick index {p.index} out of range")

    if scheme.kind is OrderingKind.INDEX_SORT:
        doc_rank: dict[str, int] = {}
        for seg in segments:
            if seg.doc_id not in doc_rank:
                doc_rank[seg.doc_id] = len(doc_rank)
        return sorted(picks.indices,
                      key=lambda i: (doc_rank[segments[i].doc_id],
                                     segments[i].seg_index))

    ranked = _score_ranked(picks)
    if scheme.kind is OrderingKind.SCORE_SORT:
        return ranked

    front: list[int] = []
    back: list[int] = []
    pos = 0
    to_front = True
    while pos < len(ranked):
        take = scheme.m if to_front else scheme.n
        group = ranked[pos:pos + take]
        if to_front:
            front.extend(group)
        else:
            back.extend(group)
        pos += take
        to_front = not to_front
    return front + back[::-1]
