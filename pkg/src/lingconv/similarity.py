"""Benchmark centroids and similarity scoring against pure-U.S. writing.

The mean pairwise cosine of a unit vector against a benchmark set equals its
dot product with the arithmetic mean of the set's unit vectors, so each
field-year benchmark collapses to one centroid and scoring is a single dot
product per publication.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .corpus import PanelCell, PublicationRecord
from .detector import GenAIFlag
from .errors import BenchmarkTooSmall, ZeroVector
from .vecstore import VectorStore, l2_normalize

logger = logging.getLogger(__name__)

VARIANTS = ("AllUS", "NonGenAI_US", "Top10Journal_US", "Fixed2021_US")

BENCHMARK_COUNTRY = "US"
DEFAULT_MIN_MEMBERS = 20


@dataclass
class BenchmarkSpec:
    variant: str = "AllUS"
    min_members: int = DEFAULT_MIN_MEMBERS
    fixed_year: int = 2021
    top_quantile: float = 0.9

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown benchmark variant {self.variant!r}")

    def benchmark_year(self, pub_year: int) -> int:
        return self.fixed_year if self.variant == "Fixed2021_US" else pub_year


@dataclass
class BenchmarkCentroid:
    field: str
    year: int
    variant: str
    n_members: int
    centroid: np.ndarray
    n_zero_members: int = 0

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.centroid))

    @property
    def degenerate(self) -> bool:
        return self.norm < 1e-12


@dataclass
class SimilarityScore:
    pub_id: str
    field: str
    year: int
    variant: str
    value: float


def top_journal_threshold(journal_ifs: Iterable[float], quantile: float = 0.9) -> float:
    """Nearest-rank quantile over distinct journal impact factors."""
    values = sorted(set(journal_ifs))
    if not values:
        raise ValueError("no journals")
    rank = max(1, math.ceil(quantile * len(values)))
    return values[rank - 1]


def select_benchmark(
    records: list[PublicationRecord],
    spec: BenchmarkSpec,
    field_code: str,
    year: int,
    flags: Optional[dict[str, GenAIFlag]] = None,
    if_thresholds: Optional[dict[str, float]] = None,
) -> list[str]:
    """Pub ids of the pure-U.S. benchmark members for one field-year.

    All variants require every author affiliation to be U.S.; NonGenAI_US
    drops flagged publications, Top10Journal_US keeps only journals at or
    above the within-field 90th-percentile impact factor.
    """
    bench_year = spec.benchmark_year(year)
    if spec.variant == "NonGenAI_US" and flags is None:
        raise ValueError("NonGenAI_US requires flags")
    members = []
    for rec in records:
        if rec.year != bench_year or field_code not in rec.scopus_fields:
            continue
        if not rec.is_pure(BENCHMARK_COUNTRY):
            continue
        if spec.variant == "NonGenAI_US":
            flag = flags.get(rec.id)
            if flag is not None and flag.flagged_any_field:
                continue
        if spec.variant == "Top10Journal_US":
            threshold = (if_thresholds or {}).get(field_code)
            if threshold is None:
                raise ValueError(f"no impact-factor threshold for field {field_code!r}")
            if rec.journal_if < threshold:
                continue
        members.append(rec.id)
    return sorted(members)


def field_if_thresholds(
    records: list[PublicationRecord], quantile: float = 0.9
) -> dict[str, float]:
    """Within-field nearest-rank impact-factor cut over distinct journals."""
    by_field: dict[str, dict[str, float]] = {}
    for rec in records:
        for fld in rec.scopus_fields:
            by_field.setdefault(fld, {})[rec.journal_id] = rec.journal_if
    return {
        fld: top_journal_threshold(journals.values(), quantile)
        for fld, journals in by_field.items()
    }


def build_centroid(
    member_ids: list[str],
    store: VectorStore,
    field_code: str,
    year: int,
    variant: str,
    min_members: int = DEFAULT_MIN_MEMBERS,
) -> BenchmarkCentroid:
    """Mean of members' unit vectors, accumulated in 64-bit over sorted ids.

    Zero-vector members are excluded from the mean but counted and reported.
    """
    acc = np.zeros(store.dim, dtype=np.float64)
    n = 0
    n_zero = 0
    for pub_id in sorted(member_ids):
        try:
            acc += l2_normalize(store.get(pub_id))
            n += 1
        except ZeroVector:
            n_zero += 1
            logger.warning("zero vector excluded from benchmark: %s", pub_id)
    if n < min_members:
        raise BenchmarkTooSmall(
            f"benchmark ({field_code}, {year}, {variant}) has {n} members "
            f"< minimum {min_members}"
        )
    centroid = acc / n
    result = BenchmarkCentroid(
        field=field_code,
        year=year,
        variant=variant,
        n_members=n,
        centroid=centroid,
        n_zero_members=n_zero,
    )
    if result.degenerate:
        logger.warning(
            "degenerate benchmark centroid for (%s, %s, %s)", field_code, year, variant
        )
    return result


def score_publication(
    pub_id: str, pub_vector, centroid: BenchmarkCentroid
) -> SimilarityScore:
    value = float(l2_normalize(pub_vector) @ centroid.centroid)
    return SimilarityScore(
        pub_id=pub_id,
        field=centroid.field,
        year=centroid.year,
        variant=centroid.variant,
        value=value,
    )


@dataclass
class ScoreReport:
    centroids: dict[tuple[str, int], BenchmarkCentroid] = field(default_factory=dict)
    too_small: list[tuple[str, int, str]] = field(default_factory=list)
    missing_vector: list[str] = field(default_factory=list)


def score_corpus(
    cells: list[PanelCell],
    records: list[PublicationRecord],
    store: VectorStore,
    spec: BenchmarkSpec,
    flags: Optional[dict[str, GenAIFlag]] = None,
) -> tuple[dict[tuple[str, str], float], ScoreReport]:
    """Score every (pub, field) appearing in the panel against its matched
    benchmark centroid. Cells whose benchmark is too small or whose vector is
    missing are dropped and reported."""
    report = ScoreReport()
    if_thresholds = None
    if spec.variant == "Top10Journal_US":
        if_thresholds = field_if_thresholds(records, spec.top_quantile)

    needed = sorted({(c.detailed_field_code, c.year) for c in cells})
    attempted = set()
    for fld, year in needed:
        key = (fld, spec.benchmark_year(year))
        if key in attempted:
            continue
        attempted.add(key)
        members = select_benchmark(
            records, spec, fld, year, flags=flags, if_thresholds=if_thresholds
        )
        members = [m for m in members if m in store]
        try:
            report.centroids[key] = build_centroid(
                members, store, fld, key[1], spec.variant, spec.min_members
            )
        except BenchmarkTooSmall as exc:
            logger.warning("%s", exc)
            report.too_small.append((fld, key[1], spec.variant))

    scores: dict[tuple[str, str], float] = {}
    for c in sorted(cells, key=lambda c: (c.pub_id, c.detailed_field_code)):
        key = (c.pub_id, c.detailed_field_code)
        if key in scores:
            continue
        centroid = report.centroids.get(
            (c.detailed_field_code, spec.benchmark_year(c.year))
        )
        if centroid is None:
            continue
        if c.pub_id not in store:
            report.missing_vector.append(c.pub_id)
            continue
        scores[key] = score_publication(c.pub_id, store.get(c.pub_id), centroid).value
    return scores, report
