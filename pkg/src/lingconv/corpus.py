"""Corpus parsing, country/field metadata, and publication-country-field panel expansion.

The unit of analysis downstream is the publication x country x field cell:
every publication is repeated once per distinct non-English-speaking author
country and once per non-excluded detailed field of its journal.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional

import pandas as pd

from .errors import EmptyPanel, MalformedRecord, MissingCountry, UnknownFieldCode

logger = logging.getLogger(__name__)

#: Core English-speaking countries; publications authored exclusively by these
#: never enter the panel.
ENGLISH_CORE = frozenset({"US", "GB", "CA", "AU", "NZ", "IE"})

AGGREGATED_GROUPS = ("LifeSci", "PhysSci", "EngTech", "SocSci", "Excluded")

DEFAULT_YEAR_RANGE = (2021, 2024)


@dataclass
class PublicationRecord:
    id: str
    title: str
    abstract: str
    year: int
    journal_id: str
    journal_if: float
    scopus_fields: list[str]
    author_countries: list[str]

    @property
    def n_authors(self) -> int:
        return len(self.author_countries)

    @property
    def text(self) -> str:
        return f"{self.title} {self.abstract}".strip()

    @property
    def has_text(self) -> bool:
        return bool(self.title) or bool(self.abstract)

    def is_pure(self, country: str) -> bool:
        return bool(self.author_countries) and all(
            c == country for c in self.author_countries
        )


@dataclass
class CountryMeta:
    country_code: str
    is_english_core: bool
    cli_score: Optional[float] = None
    cli_components: Optional[tuple[float, float, float]] = None
    continent: Optional[str] = None


@dataclass
class PanelCell:
    pub_id: str
    country_code: str
    detailed_field_code: str
    aggregated_group: str
    year: int
    journal_id: str
    journal_if: float
    n_authors: int
    has_eng_coauthor: bool
    genai_flag: bool = False
    similarity: Optional[float] = None

    @property
    def fe_keys(self) -> tuple[str, str, str, int, str]:
        """(country, detailed field, journal, year, journal x year)."""
        jxt = f"{self.journal_id}#{self.year}"
        return (
            self.country_code,
            self.detailed_field_code,
            self.journal_id,
            self.year,
            jxt,
        )


_REQUIRED_KEYS = ("id", "year", "journal_id")


def parse_record(line: str, line_number: int | None = None) -> PublicationRecord:
    """Parse one newline-delimited JSON corpus record.

    Missing title/abstract are normalized to empty strings; records missing
    both are still returned here and excluded later by the analysis filter.
    """
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"invalid JSON: {exc}", line_number) from exc
    if not isinstance(obj, dict):
        raise MalformedRecord("record is not an object", line_number)
    for key in _REQUIRED_KEYS:
        if obj.get(key) in (None, ""):
            raise MalformedRecord(f"missing required key {key!r}", line_number)
    try:
        year = int(obj["year"])
    except (TypeError, ValueError):
        raise MalformedRecord(f"bad year {obj.get('year')!r}", line_number)
    countries = [str(c) for c in obj.get("author_countries", [])]
    return PublicationRecord(
        id=str(obj["id"]),
        title=str(obj.get("title") or ""),
        abstract=str(obj.get("abstract") or ""),
        year=year,
        journal_id=str(obj["journal_id"]),
        journal_if=float(obj.get("journal_if", 0.0)),
        scopus_fields=[str(f) for f in obj.get("scopus_fields", [])],
        author_countries=countries,
    )


def read_corpus(
    path,
    strict: bool = False,
    year_range: tuple[int, int] = DEFAULT_YEAR_RANGE,
) -> Iterator[PublicationRecord]:
    """Stream records from a newline-delimited corpus file.

    Records that fail to parse, fall outside ``year_range``, or lack both
    title and abstract are skipped with a warning (or abort in strict mode).
    """
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = parse_record(line, line_number=i)
            except MalformedRecord as exc:
                if strict:
                    raise
                logger.warning("skipping malformed record: %s", exc)
                continue
            if not (year_range[0] <= rec.year <= year_range[1]):
                logger.warning(
                    "skipping record %s: year %d outside range", rec.id, rec.year
                )
                continue
            if not rec.has_text:
                logger.warning("skipping record %s: no title and no abstract", rec.id)
                continue
            yield rec


def _parse_optional_float(value: str) -> Optional[float]:
    value = value.strip()
    if value in ("", "NA", "na", "None"):
        return None
    return float(value)


def load_country_meta(path) -> dict[str, CountryMeta]:
    """Load country metadata from delimited text with a header row.

    Expected columns: country_code, is_english_core, cli_score, cnl, col, lp
    and optionally continent. If the composite cli_score is absent but all
    three components are present, the composite is their unweighted mean.
    """
    table: dict[str, CountryMeta] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            code = row["country_code"].strip()
            is_core = row["is_english_core"].strip().lower() in ("true", "1", "yes")
            cli = _parse_optional_float(row.get("cli_score", ""))
            comps = None
            parts = [
                _parse_optional_float(row.get(k, "")) for k in ("cnl", "col", "lp")
            ]
            if all(p is not None for p in parts):
                comps = (parts[0], parts[1], parts[2])
                for p in comps:
                    if not 0.0 <= p <= 1.0:
                        raise ValueError(
                            f"CLI component out of [0,1] for {code}: {comps}"
                        )
                if cli is None:
                    cli = sum(comps) / 3.0
            table[code] = CountryMeta(
                country_code=code,
                is_english_core=is_core,
                cli_score=cli,
                cli_components=comps,
                continent=(row.get("continent") or "").strip() or None,
            )
    return table


def load_field_map(path) -> dict[str, str]:
    """Load the detailed-field to aggregated-group mapping."""
    mapping: dict[str, str] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            group = row["aggregated_group"].strip()
            if group not in AGGREGATED_GROUPS:
                raise UnknownFieldCode(
                    f"unknown aggregated group {group!r} for {row['detailed_code']!r}"
                )
            mapping[row["detailed_code"].strip()] = group
    return mapping


def map_fields(
    scopus_fields: Iterable[str], field_map: dict[str, str]
) -> list[tuple[str, str]]:
    """Resolve detailed codes to (code, aggregated group), dropping Excluded.

    Duplicates collapse; order of first appearance is preserved.
    """
    seen = set()
    out = []
    for code in scopus_fields:
        if code in seen:
            continue
        seen.add(code)
        try:
            group = field_map[code]
        except KeyError:
            raise UnknownFieldCode(f"no aggregated group for field code {code!r}")
        if group == "Excluded":
            continue
        out.append((code, group))
    return out


def expand_panel(
    record: PublicationRecord,
    meta: dict[str, CountryMeta],
    field_map: dict[str, str],
) -> list[PanelCell]:
    """Expand one publication into its publication x country x field cells.

    One cell per (distinct non-English-core country) x (non-excluded field).
    Publications authored only from English-core countries yield no cells.
    """
    for code in record.author_countries:
        if code not in meta:
            raise MissingCountry(f"record {record.id}: unknown country {code!r}")
    has_eng = any(meta[c].is_english_core for c in record.author_countries)
    countries = sorted(
        {c for c in record.author_countries if not meta[c].is_english_core}
    )
    fields = sorted(map_fields(record.scopus_fields, field_map))
    return [
        PanelCell(
            pub_id=record.id,
            country_code=country,
            detailed_field_code=code,
            aggregated_group=group,
            year=record.year,
            journal_id=record.journal_id,
            journal_if=record.journal_if,
            n_authors=record.n_authors,
            has_eng_coauthor=has_eng,
        )
        for country in countries
        for code, group in fields
    ]


def build_panel(
    records: Iterable[PublicationRecord],
    meta: dict[str, CountryMeta],
    field_map: dict[str, str],
) -> list[PanelCell]:
    """Expand all records and return cells in canonical order."""
    cells: list[PanelCell] = []
    for rec in records:
        cells.extend(expand_panel(rec, meta, field_map))
    cells.sort(key=lambda c: (c.pub_id, c.country_code, c.detailed_field_code))
    return cells


def attach(
    cells: list[PanelCell],
    flags: Optional[dict[str, bool]] = None,
    scores: Optional[dict[tuple[str, str], float]] = None,
) -> list[PanelCell]:
    """Return cells with GenAI flags and (pub, field)-keyed similarity attached."""
    out = []
    for c in cells:
        c2 = replace(c)
        if flags is not None:
            c2.genai_flag = flags.get(c.pub_id, False)
        if scores is not None:
            c2.similarity = scores.get((c.pub_id, c.detailed_field_code))
        out.append(c2)
    return out


def cells_to_frame(cells: list[PanelCell]) -> pd.DataFrame:
    if not cells:
        raise EmptyPanel("no panel cells")
    return pd.DataFrame(
        {
            "pub_id": [c.pub_id for c in cells],
            "country": [c.country_code for c in cells],
            "field": [c.detailed_field_code for c in cells],
            "group": [c.aggregated_group for c in cells],
            "year": [c.year for c in cells],
            "journal": [c.journal_id for c in cells],
            "journal_if": [c.journal_if for c in cells],
            "n_authors": [c.n_authors for c in cells],
            "has_eng_coauthor": [c.has_eng_coauthor for c in cells],
            "genai": [c.genai_flag for c in cells],
            "similarity": [c.similarity for c in cells],
        }
    )


def descriptive_stats(
    cells: list[PanelCell], meta: Optional[dict[str, CountryMeta]] = None
) -> pd.DataFrame:
    """Summary table over the panel: moments for continuous variables, shares
    for binary indicators (GenAI, years, continents, aggregated fields)."""
    if not cells:
        raise EmptyPanel("descriptive_stats on empty panel")
    df = cells_to_frame(cells)
    rows = []

    def moments(name, series):
        rows.append(
            {
                "variable": name,
                "mean": series.mean(),
                "sd": series.std(ddof=1) if len(series) > 1 else 0.0,
                "min": series.min(),
                "max": series.max(),
            }
        )

    def share(name, mask):
        rows.append(
            {
                "variable": name,
                "mean": float(mask.mean()),
                "sd": None,
                "min": None,
                "max": None,
            }
        )

    if df["similarity"].notna().any():
        moments("similarity", df["similarity"].dropna().astype(float))
    moments("journal_if", df["journal_if"])
    moments("n_authors", df["n_authors"])
    share("genai_share", df["genai"])
    for year in sorted(df["year"].unique()):
        share(f"year_{year}", df["year"] == year)
    if meta is not None:
        continents = df["country"].map(
            lambda c: (meta[c].continent or "Unknown") if c in meta else "Unknown"
        )
        for cont in sorted(continents.unique()):
            share(f"continent_{cont}", continents == cont)
    for group in sorted(df["group"].unique()):
        share(f"field_{group}", df["group"] == group)
    return pd.DataFrame(rows)
