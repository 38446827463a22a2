"""Synthetic corpora, panels, and vector stores with known ground truth.

All randomness flows from a Philox counter-based generator seeded
explicitly, so every fixture is reproducible from (params, seed) alone.
Generation is single-threaded by design.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .corpus import PanelCell, PublicationRecord
from .detector import StemPattern
from .vecstore import VectorStore

PRNG_ALGORITHM = "philox4x64"


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


@dataclass
class DGPParams:
    n_journals: int = 50
    n_countries: int = 12
    n_fields: int = 6
    pubs_per_year: int = 500
    years: tuple[int, ...] = (2021, 2022, 2023, 2024)
    # regression truth: level effect, per-year interaction effects, covariates
    delta0: float = 0.0
    beta: dict = field(default_factory=lambda: {2021: 0.0, 2023: 0.0015, 2024: 0.0040})
    gamma_authors: float = 0.0002
    gamma_eng: float = 0.001
    fe_scale: float = 0.01
    noise_sd: float = 0.03
    base_similarity: float = 0.82
    genai_prob: dict = field(
        default_factory=lambda: {2021: 0.02, 2022: 0.03, 2023: 0.08, 2024: 0.12}
    )
    seed: int = 0

    def __post_init__(self):
        if self.noise_sd <= 0:
            raise ValueError("noise sd must be positive")
        for p in self.genai_prob.values():
            if not 0.0 <= p <= 1.0:
                raise ValueError("GenAI probability outside [0,1]")


@dataclass
class GroundTruth:
    params: DGPParams
    fe_values: dict  # dimension -> level -> effect
    flags: dict  # pub_id -> bool


def gen_panel(params: DGPParams) -> tuple[list[PanelCell], GroundTruth]:
    """Draw a panel directly at the cell level from the event-study DGP.

    y = delta0*GenAI + sum_tau beta_tau*GenAI*1{t=tau} + g1*Authors + g2*Eng
        + country + field + journal + year + journal-year effects + noise.
    """
    rng = make_rng(params.seed)
    journals = [f"J{i:04d}" for i in range(params.n_journals)]
    countries = [f"C{i:02d}" for i in range(params.n_countries)]
    fields = [f"F{i:02d}" for i in range(params.n_fields)]

    fe_values = {
        "country": {c: rng.normal(0, params.fe_scale) for c in countries},
        "field": {f: rng.normal(0, params.fe_scale) for f in fields},
        "journal": {j: rng.normal(0, params.fe_scale) for j in journals},
        "year": {y: rng.normal(0, params.fe_scale) for y in params.years},
        "journal_x_year": {
            f"{j}#{y}": rng.normal(0, params.fe_scale)
            for j in journals
            for y in params.years
        },
    }

    cells: list[PanelCell] = []
    flags: dict[str, bool] = {}
    pub_idx = 0
    for year in params.years:
        for _ in range(params.pubs_per_year):
            pub_id = f"P{pub_idx:07d}"
            pub_idx += 1
            journal = journals[rng.integers(0, params.n_journals)]
            country = countries[rng.integers(0, params.n_countries)]
            fld = fields[rng.integers(0, params.n_fields)]
            n_authors = int(rng.integers(1, 15))
            has_eng = bool(rng.random() < 0.3)
            genai = bool(rng.random() < params.genai_prob.get(year, 0.0))
            flags[pub_id] = genai

            y_val = (
                params.base_similarity
                + params.delta0 * genai
                + params.beta.get(year, 0.0) * genai
                + params.gamma_authors * n_authors
                + params.gamma_eng * has_eng
                + fe_values["country"][country]
                + fe_values["field"][fld]
                + fe_values["journal"][journal]
                + fe_values["year"][year]
                + fe_values["journal_x_year"][f"{journal}#{year}"]
                + rng.normal(0, params.noise_sd)
            )
            cells.append(
                PanelCell(
                    pub_id=pub_id,
                    country_code=country,
                    detailed_field_code=fld,
                    aggregated_group="PhysSci",
                    year=year,
                    journal_id=journal,
                    journal_if=float(rng.uniform(0.5, 20.0)),
                    n_authors=n_authors,
                    has_eng_coauthor=has_eng,
                    genai_flag=genai,
                    similarity=float(y_val),
                )
            )
    truth = GroundTruth(params=params, fe_values=fe_values, flags=flags)
    return cells, truth


@dataclass
class CorpusParams:
    n_pubs_per_field_year: int = 25
    years: tuple[int, ...] = (2021, 2022, 2023, 2024)
    fields: tuple[str, ...] = ("Chemistry", "Computer Science", "Medicine")
    n_journals: int = 20
    countries: tuple[str, ...] = ("US", "GB", "DE", "FR", "CH", "KR", "SA", "JP")
    #: probability a post-2022 record is GenAI-assisted (gets markers injected)
    assisted_rate: dict = field(default_factory=lambda: {2023: 0.2, 2024: 0.35})
    #: pre-period background rate of marker usage
    base_marker_rate: float = 0.01
    markers_per_assisted: int = 2
    seed: int = 0


#: Marker-free phrase bank; no token shares a prefix with any bundled stem.
_PHRASES = (
    "we study the behavior of materials under pressure",
    "a randomized trial was conducted across many sites",
    "results were measured using standard laboratory methods",
    "the sample includes observations from several regions",
    "our findings suggest a stable pattern over time",
    "data were collected from public registries",
    "the model predicts outcomes with reasonable accuracy",
    "we report estimates from a panel of firms",
)

#: Injected marker words, each matching one bundled vocabulary stem.
_MARKER_WORDS = ("delve", "groundbreaking", "intricate", "meticulous", "pivotal",
                 "showcases", "underscores", "unveils", "tapestry", "multifaceted")


def gen_text_corpus(params: CorpusParams) -> tuple[list[PublicationRecord], dict[str, bool]]:
    """Synthetic records whose titles/abstracts exercise the marker filter.

    Designated assisted records carry exactly ``markers_per_assisted``
    distinct marker words; background records carry one marker word at the
    base rate and none otherwise."""
    rng = make_rng(params.seed)
    journals = [f"J{i:03d}" for i in range(params.n_journals)]
    journal_if = {j: float(rng.uniform(0.5, 25.0)) for j in journals}
    records: list[PublicationRecord] = []
    assisted: dict[str, bool] = {}
    pub_idx = 0
    for year in params.years:
        for fld in params.fields:
            for _ in range(params.n_pubs_per_field_year):
                pub_id = f"S{pub_idx:06d}"
                pub_idx += 1
                is_assisted = bool(
                    rng.random() < params.assisted_rate.get(year, 0.0)
                )
                phrases = [
                    _PHRASES[rng.integers(0, len(_PHRASES))] for _ in range(3)
                ]
                if is_assisted:
                    marker_ids = rng.choice(
                        len(_MARKER_WORDS),
                        size=params.markers_per_assisted,
                        replace=False,
                    )
                    words = [_MARKER_WORDS[i] for i in marker_ids]
                    phrases.append("this work uses " + " and ".join(words))
                elif rng.random() < params.base_marker_rate:
                    words = [_MARKER_WORDS[rng.integers(0, len(_MARKER_WORDS))]]
                    phrases.append("this work uses " + words[0])
                journal = journals[rng.integers(0, params.n_journals)]
                n_authors = int(rng.integers(1, 8))
                # roughly a third of records are pure-U.S. so every field-year
                # has benchmark members; the rest draw per-author countries
                if rng.random() < 0.35:
                    author_countries = ["US"] * n_authors
                else:
                    author_countries = [
                        params.countries[rng.integers(0, len(params.countries))]
                        for _ in range(n_authors)
                    ]
                records.append(
                    PublicationRecord(
                        id=pub_id,
                        title=phrases[0].capitalize(),
                        abstract=". ".join(phrases[1:]).capitalize() + ".",
                        year=year,
                        journal_id=journal,
                        journal_if=journal_if[journal],
                        scopus_fields=[fld],
                        author_countries=author_countries,
                    )
                )
                assisted[pub_id] = is_assisted
    return records, assisted


def gen_vectors(
    pub_targets: dict[str, float], dim: int = 768, seed: int = 0
) -> tuple[VectorStore, np.ndarray]:
    """Vector per publication with an exact cosine target to a fixed
    direction: v = cos(theta)*c + sin(theta)*r with r orthogonal to c.

    Targets must lie strictly inside (-1, 1). Returns the store and the
    centroid direction c."""
    rng = make_rng(seed)
    c = rng.normal(size=dim)
    c /= np.linalg.norm(c)
    store = VectorStore(
        dim=dim,
        manifest={
            "generator": "lingconv.synth.gen_vectors",
            "prng": PRNG_ALGORITHM,
            "seed": seed,
        },
    )
    for pub_id in sorted(pub_targets):
        target = pub_targets[pub_id]
        if not -1.0 < target < 1.0:
            raise ValueError(f"target for {pub_id!r} outside (-1, 1): {target}")
        r = rng.normal(size=dim)
        r -= (r @ c) * c
        r /= np.linalg.norm(r)
        v = target * c + np.sqrt(1.0 - target * target) * r
        store.add(pub_id, v.astype(np.float32))
    return store, c


def write_synth_dataset(out_dir, corpus_params: CorpusParams, dim: int = 768) -> dict:
    """Emit a complete synthetic dataset in the pipeline's input formats:
    corpus.jsonl, countries.csv, field_map.csv, vectors.emb1, truth.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records, assisted = gen_text_corpus(corpus_params)

    corpus_path = out_dir / "corpus.jsonl"
    with open(corpus_path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "id": rec.id,
                        "title": rec.title,
                        "abstract": rec.abstract,
                        "year": rec.year,
                        "journal_id": rec.journal_id,
                        "journal_if": rec.journal_if,
                        "scopus_fields": rec.scopus_fields,
                        "author_countries": rec.author_countries,
                    },
                    sort_keys=True,
                )
                + "\n"
            )

    meta_rows = {
        "US": ("true", 1.0, "Americas"),
        "GB": ("true", 1.0, "Europe"),
        "CA": ("true", 1.0, "Americas"),
        "AU": ("true", 1.0, "Oceania"),
        "NZ": ("true", 1.0, "Oceania"),
        "IE": ("true", 1.0, "Europe"),
        "DE": ("false", 0.42, "Europe"),
        "FR": ("false", 0.38, "Europe"),
        "CH": ("false", 0.40, "Europe"),
        "KR": ("false", 0.06, "Asia"),
        "SA": ("false", 0.05, "Asia"),
        "JP": ("false", 0.07, "Asia"),
    }
    countries_path = out_dir / "countries.csv"
    with open(countries_path, "w", encoding="utf-8") as fh:
        fh.write("country_code,is_english_core,cli_score,cnl,col,lp,continent\n")
        for code in sorted(set(corpus_params.countries) | set(meta_rows)):
            core, cli, continent = meta_rows[code]
            fh.write(f"{code},{core},{cli},,,,{continent}\n")

    field_map_path = out_dir / "field_map.csv"
    groups = {"Chemistry": "PhysSci", "Computer Science": "EngTech",
              "Medicine": "LifeSci", "Physics": "PhysSci",
              "Economics": "SocSci", "Multidisciplinary": "Excluded"}
    with open(field_map_path, "w", encoding="utf-8") as fh:
        fh.write("detailed_code,aggregated_group\n")
        for fld in sorted(set(corpus_params.fields) | set(groups)):
            fh.write(f"{fld},{groups.get(fld, 'PhysSci')}\n")

    # similarity targets: assisted records drift toward the benchmark post-2022
    rng = make_rng(corpus_params.seed + 1)
    targets = {}
    for rec in records:
        base = 0.82 + rng.normal(0, 0.01)
        if assisted[rec.id] and rec.year >= 2023:
            base += 0.004 * (rec.year - 2022)
        targets[rec.id] = float(np.clip(base, -0.99, 0.99))
    store, _ = gen_vectors(targets, dim=dim, seed=corpus_params.seed + 2)
    from .vecstore import write_store

    vectors_path = out_dir / "vectors.emb1"
    write_store(store, vectors_path)

    truth_path = out_dir / "truth.json"
    with open(truth_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "prng": PRNG_ALGORITHM,
                "seed": corpus_params.seed,
                "assisted": assisted,
                "similarity_targets": targets,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
    return {
        "corpus": str(corpus_path),
        "countries": str(countries_path),
        "field_map": str(field_map_path),
        "vectors": str(vectors_path),
        "truth": str(truth_path),
    }
