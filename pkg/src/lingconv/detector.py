"""Field-stratified lexical detection of GenAI-assisted publications.

Marker stems are kept per detailed field when their relative document
frequency rose enough between a base and an end year; publications are then
flagged when enough distinct retained stems appear in their title+abstract
under any of their assigned fields.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional

from .corpus import PublicationRecord
from .errors import MissingBaseYear

_TOKEN_RE = re.compile(r"[a-z]+")


@dataclass(frozen=True)
class StemPattern:
    stem: str
    prefix_match: bool

    def __post_init__(self):
        if not self.stem or any(ch.isspace() for ch in self.stem):
            raise ValueError(f"bad stem {self.stem!r}")

    def matches(self, token: str) -> bool:
        if self.prefix_match:
            return token.startswith(self.stem)
        return token == self.stem

    @classmethod
    def parse(cls, entry: str) -> "StemPattern":
        entry = entry.strip().lower()
        if entry.endswith("*"):
            return cls(stem=entry[:-1], prefix_match=True)
        return cls(stem=entry, prefix_match=False)


def load_vocabulary(path=None) -> list[StemPattern]:
    """Load stem patterns, one per line, trailing ``*`` marking prefix match.

    Without a path, the bundled 65-term vocabulary is used.
    """
    if path is None:
        text = (
            resources.files("lingconv.data").joinpath("vocabulary.txt").read_text()
        )
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    patterns = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            patterns.append(StemPattern.parse(line))
    return patterns


def tokenize_normalize(text: str) -> list[str]:
    """Lowercase and split into maximal runs of ASCII letters."""
    return _TOKEN_RE.findall(text.lower())


def match_stems(tokens: Iterable[str], patterns: Iterable[StemPattern]) -> set[str]:
    """Stems (not tokens) matched at least once; set semantics."""
    unique = set(tokens)
    matched = set()
    for pat in patterns:
        if pat.prefix_match:
            if any(tok.startswith(pat.stem) for tok in unique):
                matched.add(pat.stem)
        elif pat.stem in unique:
            matched.add(pat.stem)
    return matched


@dataclass
class TermFrequencyTable:
    """Per (field, year): publication totals and per-stem hit counts.

    In "document" mode hits count publications containing the stem at least
    once; in "token" mode hits count token occurrences and totals count
    tokens.
    """

    mode: str = "document"
    doc_totals: dict = field(default_factory=dict)  # (field, year) -> int
    hits: dict = field(default_factory=dict)  # (field, year, stem) -> int

    def rel_freq(self, fld: str, year: int, stem: str) -> float:
        total = self.doc_totals.get((fld, year), 0)
        if total == 0:
            return 0.0
        return self.hits.get((fld, year, stem), 0) / total

    def merge(self, other: "TermFrequencyTable") -> "TermFrequencyTable":
        if other.mode != self.mode:
            raise ValueError("cannot merge tables with different modes")
        for key, n in other.doc_totals.items():
            self.doc_totals[key] = self.doc_totals.get(key, 0) + n
        for key, n in other.hits.items():
            self.hits[key] = self.hits.get(key, 0) + n
        return self


@dataclass
class MarkerSet:
    """Per-field retained stem patterns plus the filter configuration."""

    threshold_fold: float
    min_support: int
    by_field: dict[str, set[StemPattern]] = field(default_factory=dict)

    def patterns_for(self, fld: str) -> set[StemPattern]:
        return self.by_field.get(fld, set())


@dataclass
class GenAIFlag:
    pub_id: str
    distinct_hits: int
    flagged_any_field: bool
    flagged_strict: bool
    hit_stems: set[str]


def compute_frequencies(
    corpus: Iterable[tuple[PublicationRecord, list[str]]],
    vocabulary: list[StemPattern],
    mode: str = "document",
) -> TermFrequencyTable:
    """Count vocabulary usage per (detailed field, year) stratum.

    A publication cross-listed in several fields contributes to every
    assigned field-year.
    """
    if mode not in ("document", "token"):
        raise ValueError(f"unknown frequency mode {mode!r}")
    table = TermFrequencyTable(mode=mode)
    for record, fields in corpus:
        tokens = tokenize_normalize(record.text)
        if mode == "document":
            matched = match_stems(tokens, vocabulary)
            increment = {stem: 1 for stem in matched}
            total = 1
        else:
            increment = defaultdict(int)
            for tok in tokens:
                for pat in vocabulary:
                    if pat.matches(tok):
                        increment[pat.stem] += 1
            total = len(tokens)
        for fld in fields:
            key = (fld, record.year)
            table.doc_totals[key] = table.doc_totals.get(key, 0) + total
            for stem, n in increment.items():
                k = (fld, record.year, stem)
                table.hits[k] = table.hits.get(k, 0) + n
    return table


def filter_markers(
    table: TermFrequencyTable,
    vocabulary: list[StemPattern],
    base_year: int = 2021,
    end_year: int = 2024,
    threshold_fold: float = 4.0,
    min_support: int = 30,
) -> MarkerSet:
    """Keep stems whose relative frequency grew by at least ``threshold_fold``
    between base and end year within each field.

    Stems unseen in the base year qualify via the zero-base rule (end-year
    hits >= min_support); min_support also floors end-year hits generally.
    threshold_fold=4 is the baseline (a 300% increase), 3 and 5 the looser
    and stricter variants.
    """
    fields = {fld for (fld, _year) in table.doc_totals}
    by_pattern = {p.stem: p for p in vocabulary}
    result = MarkerSet(threshold_fold=threshold_fold, min_support=min_support)
    for fld in sorted(fields):
        if (fld, base_year) not in table.doc_totals:
            raise MissingBaseYear(f"field {fld!r} has no year-{base_year} stratum")
        if (fld, end_year) not in table.doc_totals:
            continue
        kept = set()
        for stem, pat in by_pattern.items():
            end_hits = table.hits.get((fld, end_year, stem), 0)
            if end_hits < min_support:
                continue
            base = table.rel_freq(fld, base_year, stem)
            end = table.rel_freq(fld, end_year, stem)
            if base == 0.0 or end / base >= threshold_fold:
                kept.add(pat)
        if kept:
            result.by_field[fld] = kept
    return result


def flag_publication(
    record: PublicationRecord,
    fields: list[str],
    marker_sets: MarkerSet,
    min_distinct: int = 1,
) -> GenAIFlag:
    """Flag under the any-field rule: the publication counts as GenAI-assisted
    if any assigned field's retained markers reach ``min_distinct`` distinct
    stems in its title+abstract."""
    tokens = tokenize_normalize(record.text)
    best = 0
    all_hits: set[str] = set()
    for fld in fields:
        matched = match_stems(tokens, marker_sets.patterns_for(fld))
        all_hits |= matched
        best = max(best, len(matched))
    return GenAIFlag(
        pub_id=record.id,
        distinct_hits=best,
        flagged_any_field=best >= 1,
        flagged_strict=best >= 2,
        hit_stems=all_hits,
    )


def flag_corpus(
    corpus: Iterable[tuple[PublicationRecord, list[str]]],
    marker_sets: MarkerSet,
    min_distinct: int = 1,
) -> dict[str, GenAIFlag]:
    flags = {}
    for record, fields in corpus:
        flags[record.id] = flag_publication(record, fields, marker_sets, min_distinct)
    return flags


def effective_flag(flag: GenAIFlag, min_distinct: int) -> Optional[bool]:
    """Treatment assignment under a strictness mode.

    min_distinct=1: flagged vs not. min_distinct=2: records with exactly one
    hit are excluded from both groups (None)."""
    if min_distinct == 1:
        return flag.flagged_any_field
    if flag.flagged_strict:
        return True
    if flag.distinct_hits == 1:
        return None
    return False
