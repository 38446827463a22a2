"""End-to-end orchestration: detection, scoring, panel assembly, subsample
splits, estimation, and report emission.

Every stage is deterministic given (inputs, config); expensive stage outputs
are cached on disk keyed by a content hash of both so reruns are cheap and
byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional

import pandas as pd

from . import corpus as corpus_mod
from . import detector as det
from . import hdfe
from . import similarity as sim
from . import vecstore
from .errors import AllMissing, DegenerateSplit, LingconvError, MissingCLI

logger = logging.getLogger(__name__)

CACHE_ENV_VAR = "LINGCONV_CACHE"

SUBSAMPLE_RULES = (
    "All",
    "DomesticOnly",
    "InternationalOnly",
    "Domestic_CLI_Close",
    "Domestic_CLI_Distant",
    "Intl_WithEngCoauthor",
    "Intl_NoEngCoauthor",
    "HighImpactJournal",
    "LowImpactJournal",
)


@dataclass
class RunConfig:
    corpus_path: str
    country_meta_path: str
    field_map_path: str
    vector_store_path: str
    vocabulary_path: Optional[str] = None
    output_dir: str = "out"
    threshold_fold: float = 4.0
    min_distinct: int = 1
    min_support: int = 30
    freq_mode: str = "document"
    base_year: int = 2021
    end_year: int = 2024
    benchmark_variant: str = "AllUS"
    min_benchmark: int = 20
    reference_year: int = 2022
    subsample: str = "All"
    seed: int = 0
    strict_parse: bool = False
    partitions: int = 1
    cache_dir: Optional[str] = None

    def __post_init__(self):
        if self.threshold_fold not in (3.0, 4.0, 5.0):
            raise ValueError("threshold_fold must be one of 3, 4, 5")
        if self.min_distinct not in (1, 2):
            raise ValueError("min_distinct must be 1 or 2")
        if self.benchmark_variant not in sim.VARIANTS:
            raise ValueError(f"unknown benchmark variant {self.benchmark_variant!r}")
        base_rule = self.subsample.split(":", 1)[0]
        if base_rule not in SUBSAMPLE_RULES and base_rule != "ByAggregatedField":
            raise ValueError(f"unknown subsample rule {self.subsample!r}")
        if self.partitions < 1:
            raise ValueError("partitions must be >= 1")

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))

    def validate_paths(self) -> None:
        for name in ("corpus_path", "country_meta_path", "field_map_path",
                     "vector_store_path"):
            p = getattr(self, name)
            if not Path(p).exists():
                raise FileNotFoundError(f"{name}: {p}")
        if self.vocabulary_path and not Path(self.vocabulary_path).exists():
            raise FileNotFoundError(f"vocabulary_path: {self.vocabulary_path}")

    def config_hash(self) -> str:
        payload = asdict(self)
        # partitions and cache location affect scheduling, never results
        payload.pop("partitions")
        payload.pop("cache_dir")
        payload.pop("output_dir")
        for name in ("corpus_path", "country_meta_path", "field_map_path",
                     "vector_store_path", "vocabulary_path"):
            p = payload.pop(name)
            payload[name + "_digest"] = _file_digest(p) if p else None
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def resolve_cache_dir(self) -> Optional[Path]:
        override = os.environ.get(CACHE_ENV_VAR)
        chosen = override or self.cache_dir
        return Path(chosen) if chosen else None


def _file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _partition(items: list, n: int) -> list[list]:
    if n <= 1:
        return [items]
    size = (len(items) + n - 1) // n
    return [items[i : i + size] for i in range(0, len(items), size)]


def median_split_cli(country_scores: dict[str, float]) -> dict[str, str]:
    """Close/Distant assignment at the lower-median of distinct CLI scores;
    countries at or above the median are Close."""
    if not country_scores:
        raise AllMissing("no countries with CLI scores")
    if len(country_scores) < 2:
        raise DegenerateSplit("cannot split a single country at its median")
    distinct = sorted(set(country_scores.values()))
    median = distinct[(len(distinct) - 1) // 2]
    return {
        c: ("Close" if s >= median else "Distant") for c, s in country_scores.items()
    }


def split_subsample(
    cells: list[corpus_mod.PanelCell],
    rule: str,
    meta: dict[str, corpus_mod.CountryMeta],
    pub_countries: dict[str, set[str]],
) -> list[corpus_mod.PanelCell]:
    """Retain the cells selected by a heterogeneity subsample rule.

    ``pub_countries`` maps pub_id to the distinct author countries of the
    publication (all countries, English-core included).
    """
    if rule == "All":
        return list(cells)
    if rule.startswith("ByAggregatedField:"):
        group = rule.split(":", 1)[1]
        return [c for c in cells if c.aggregated_group == group]

    def domestic(c):
        return len(pub_countries[c.pub_id]) == 1

    if rule == "DomesticOnly":
        return [c for c in cells if domestic(c)]
    if rule == "InternationalOnly":
        return [c for c in cells if not domestic(c)]
    if rule in ("Domestic_CLI_Close", "Domestic_CLI_Distant"):
        domestic_cells = [c for c in cells if domestic(c)]
        countries = sorted({c.country_code for c in domestic_cells})
        scores = {}
        for code in countries:
            cli = meta[code].cli_score if code in meta else None
            if cli is None:
                raise MissingCLI(f"country {code} has no CLI score")
            scores[code] = cli
        side = "Close" if rule.endswith("Close") else "Distant"
        assignment = median_split_cli(scores)
        return [c for c in domestic_cells if assignment[c.country_code] == side]
    if rule in ("Intl_WithEngCoauthor", "Intl_NoEngCoauthor"):
        intl = [c for c in cells if not domestic(c)]
        want = rule == "Intl_WithEngCoauthor"
        return [c for c in intl if c.has_eng_coauthor == want]
    if rule in ("HighImpactJournal", "LowImpactJournal"):
        medians = _field_if_medians(cells)
        want_high = rule == "HighImpactJournal"
        return [
            c
            for c in cells
            if (c.journal_if >= medians[c.detailed_field_code]) == want_high
        ]
    raise ValueError(f"unknown subsample rule {rule!r}")


def _field_if_medians(cells) -> dict[str, float]:
    """Lower-median impact factor over distinct journals within each field."""
    by_field: dict[str, dict[str, float]] = {}
    for c in cells:
        by_field.setdefault(c.detailed_field_code, {})[c.journal_id] = c.journal_if
    out = {}
    for fld, journals in by_field.items():
        distinct = sorted(set(journals.values()))
        out[fld] = distinct[(len(distinct) - 1) // 2]
    return out


@dataclass
class ReportBundle:
    output_dir: Path
    files: dict[str, Path] = field(default_factory=dict)
    coef_tables: dict[str, pd.DataFrame] = field(default_factory=dict)
    plot_data: Optional[pd.DataFrame] = None
    manifest: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


class _Cache:
    """Content-addressed stage cache with atomic publication."""

    def __init__(self, root: Optional[Path]):
        self.root = root
        if root is not None:
            root.mkdir(parents=True, exist_ok=True)

    def path(self, stage: str, key: str, suffix: str) -> Optional[Path]:
        if self.root is None:
            return None
        return self.root / f"{stage}-{key[:16]}{suffix}"

    def load_text(self, stage: str, key: str, suffix: str) -> Optional[str]:
        p = self.path(stage, key, suffix)
        if p is not None and p.exists():
            return p.read_text(encoding="utf-8")
        return None

    def store_text(self, stage: str, key: str, suffix: str, text: str) -> None:
        p = self.path(stage, key, suffix)
        if p is None:
            return
        tmp = p.with_name(p.name + f".tmp{os.getpid()}")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, p)


def _flags_to_frame(flags: dict[str, det.GenAIFlag]) -> pd.DataFrame:
    rows = [
        {
            "pub_id": f.pub_id,
            "distinct_hits": f.distinct_hits,
            "flagged_any_field": f.flagged_any_field,
            "flagged_strict": f.flagged_strict,
            "hit_stems": ";".join(sorted(f.hit_stems)),
        }
        for f in sorted(flags.values(), key=lambda f: f.pub_id)
    ]
    return pd.DataFrame(
        rows,
        columns=["pub_id", "distinct_hits", "flagged_any_field",
                 "flagged_strict", "hit_stems"],
    )


def _markers_to_frame(markers: det.MarkerSet, table: det.TermFrequencyTable,
                      base_year: int, end_year: int) -> pd.DataFrame:
    rows = []
    fields = sorted({fld for (fld, _y) in table.doc_totals})
    stems = sorted({stem for (_f, _y, stem) in table.hits})
    for fld in fields:
        kept_stems = {p.stem for p in markers.patterns_for(fld)}
        for stem in stems:
            base = table.rel_freq(fld, base_year, stem)
            end = table.rel_freq(fld, end_year, stem)
            fold = end / base if base > 0 else float("inf") if end > 0 else 0.0
            rows.append(
                {"field": fld, "stem": stem, "fold_change": fold,
                 "kept": stem in kept_stems}
            )
    return pd.DataFrame(rows, columns=["field", "stem", "fold_change", "kept"])


def detect_stage(records, config: RunConfig) -> tuple[det.MarkerSet, dict, pd.DataFrame]:
    """Frequencies (partition-and-merge), marker filtering, and flags."""
    vocabulary = det.load_vocabulary(config.vocabulary_path)
    pairs = [(rec, rec.scopus_fields) for rec in records]
    table = det.TermFrequencyTable(mode=config.freq_mode)
    for chunk in _partition(pairs, config.partitions):
        table.merge(det.compute_frequencies(chunk, vocabulary, mode=config.freq_mode))
    markers = det.filter_markers(
        table,
        vocabulary,
        base_year=config.base_year,
        end_year=config.end_year,
        threshold_fold=config.threshold_fold,
        min_support=config.min_support,
    )
    flags: dict[str, det.GenAIFlag] = {}
    for chunk in _partition(pairs, config.partitions):
        flags.update(det.flag_corpus(chunk, markers, config.min_distinct))
    marker_frame = _markers_to_frame(markers, table, config.base_year, config.end_year)
    return markers, flags, marker_frame


def score_stage(cells, records, store, config: RunConfig, flags):
    spec = sim.BenchmarkSpec(
        variant=config.benchmark_variant, min_members=config.min_benchmark
    )
    scores: dict[tuple[str, str], float] = {}
    report = sim.ScoreReport()
    for chunk in _partition(cells, config.partitions):
        part_scores, part_report = sim.score_corpus(
            chunk, records, store, spec, flags=flags
        )
        scores.update(part_scores)
        report.centroids.update(part_report.centroids)
        for entry in part_report.too_small:
            if entry not in report.too_small:
                report.too_small.append(entry)
        report.missing_vector.extend(
            m for m in part_report.missing_vector if m not in report.missing_vector
        )
    return scores, report


def _apply_strictness(cells, flags, min_distinct):
    """Assign treatment per strictness mode; under min_distinct=2, single-hit
    records leave the sample entirely."""
    kept = []
    for c in cells:
        flag = flags.get(c.pub_id)
        if flag is None:
            continue
        assignment = det.effective_flag(flag, min_distinct)
        if assignment is None:
            continue
        c.genai_flag = assignment
        kept.append(c)
    return kept


def run_pipeline(config: RunConfig) -> ReportBundle:
    """Execute parse -> detect -> score -> panel -> subsample -> fit -> report."""
    config.validate_paths()
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bundle = ReportBundle(output_dir=out_dir)
    cache = _Cache(config.resolve_cache_dir())
    key = config.config_hash()
    timings: dict[str, float] = {}

    def timed(name):
        class _T:
            def __enter__(self_inner):
                self_inner.t0 = time.perf_counter()

            def __exit__(self_inner, *exc):
                timings[name] = time.perf_counter() - self_inner.t0

        return _T()

    with timed("parse"):
        records = list(
            corpus_mod.read_corpus(config.corpus_path, strict=config.strict_parse)
        )
        meta = corpus_mod.load_country_meta(config.country_meta_path)
        field_map = corpus_mod.load_field_map(config.field_map_path)

    with timed("detect"):
        import io

        cached = cache.load_text("flags", key, ".csv")
        cached_markers = cache.load_text("markers", key, ".csv")
        markers_frame = (
            pd.read_csv(io.StringIO(cached_markers), float_precision="round_trip")
            if cached_markers is not None
            else None
        )
        if cached is not None:
            flags_frame = pd.read_csv(io.StringIO(cached), dtype={"pub_id": str})
            flags = {
                row.pub_id: det.GenAIFlag(
                    pub_id=row.pub_id,
                    distinct_hits=int(row.distinct_hits),
                    flagged_any_field=bool(row.flagged_any_field),
                    flagged_strict=bool(row.flagged_strict),
                    hit_stems=set(
                        str(row.hit_stems).split(";")
                        if isinstance(row.hit_stems, str) and row.hit_stems
                        else []
                    ),
                )
                for row in flags_frame.itertuples()
            }
        else:
            _markers, flags, markers_frame = detect_stage(records, config)
            flags_frame = _flags_to_frame(flags)
            cache.store_text("flags", key, ".csv", flags_frame.to_csv(index=False))
            cache.store_text(
                "markers", key, ".csv",
                markers_frame.to_csv(index=False, float_format="%.17g"),
            )

    with timed("score"):
        store = vecstore.read_store(config.vector_store_path)
        panel_cells = corpus_mod.build_panel(
            (r for r in records if r.has_text), meta, field_map
        )
        scores, score_report = score_stage(panel_cells, records, store, config, flags)

    with timed("panel"):
        cells = corpus_mod.attach(panel_cells, scores=scores)
        dropped_no_score = [c for c in cells if c.similarity is None]
        cells = [c for c in cells if c.similarity is not None]
        cells = _apply_strictness(cells, flags, config.min_distinct)
        for c in dropped_no_score[:20]:
            bundle.warnings.append(
                f"no benchmark score for ({c.pub_id}, {c.detailed_field_code})"
            )
        if len(dropped_no_score) > 20:
            bundle.warnings.append(
                f"... {len(dropped_no_score) - 20} more cells without scores"
            )

    with timed("fit"):
        pub_countries = {
            rec.id: set(rec.author_countries) for rec in records
        }
        selected = split_subsample(cells, config.subsample, meta, pub_countries)
        plot_rows = []
        fit = None
        if selected:
            frame = corpus_mod.cells_to_frame(selected)
            try:
                fit = hdfe.fit_event_study(frame, reference_year=config.reference_year)
            except LingconvError as exc:
                bundle.warnings.append(f"fit failed for {config.subsample}: {exc}")
                fit = None
            if fit is not None:
                coef_frame = fit.params
                bundle.coef_tables[config.subsample] = coef_frame
                plot_rows.append(
                    {
                        "subsample": config.subsample,
                        "year": config.reference_year,
                        "estimate": 0.0,
                        "ci_low": 0.0,
                        "ci_high": 0.0,
                        "n_obs": fit.n_obs,
                    }
                )
                for row in fit.params.itertuples():
                    if not row.term.startswith("genai_x_"):
                        continue
                    plot_rows.append(
                        {
                            "subsample": config.subsample,
                            "year": int(row.term.rsplit("_", 1)[1]),
                            "estimate": row.estimate,
                            "ci_low": row.ci_low,
                            "ci_high": row.ci_high,
                            "n_obs": fit.n_obs,
                        }
                    )
        else:
            bundle.warnings.append(f"empty subsample under rule {config.subsample}")
        bundle.plot_data = (
            pd.DataFrame(
                sorted(plot_rows, key=lambda r: r["year"]),
                columns=["subsample", "year", "estimate", "ci_low", "ci_high", "n_obs"],
            )
            if plot_rows
            else pd.DataFrame(
                columns=["subsample", "year", "estimate", "ci_low", "ci_high", "n_obs"]
            )
        )

    with timed("report"):
        _write_outputs(
            bundle, config, key, flags, markers_frame, scores, score_report,
            cells, meta, fit,
        )
        _write_manifest(bundle, config, key, timings)
    return bundle


def _float_fmt(x) -> str:
    return repr(float(x))


def _write_outputs(bundle, config, key, flags, markers_frame, scores,
                   score_report, cells, meta, fit):
    out = bundle.output_dir

    flags_frame = _flags_to_frame(flags)
    flags_path = out / "flags.csv"
    flags_frame.to_csv(flags_path, index=False)
    bundle.files["flags"] = flags_path

    if markers_frame is not None:
        markers_path = out / "markers.csv"
        markers_frame.to_csv(markers_path, index=False, float_format="%.17g")
        bundle.files["markers"] = markers_path

    score_rows = [
        {"pub_id": pid, "detailed_field": fld, "variant": config.benchmark_variant,
         "similarity": _float_fmt(value)}
        for (pid, fld), value in sorted(scores.items())
    ]
    scores_path = out / "scores.csv"
    pd.DataFrame(
        score_rows, columns=["pub_id", "detailed_field", "variant", "similarity"]
    ).to_csv(scores_path, index=False)
    bundle.files["scores"] = scores_path

    if score_report is not None:
        bench_rows = [
            {
                "field": c.field,
                "year": c.year,
                "variant": c.variant,
                "n_members": c.n_members,
                "centroid_norm": _float_fmt(c.norm),
            }
            for c in sorted(
                score_report.centroids.values(), key=lambda c: (c.field, c.year)
            )
        ]
        bench_path = out / "benchmarks.csv"
        pd.DataFrame(
            bench_rows,
            columns=["field", "year", "variant", "n_members", "centroid_norm"],
        ).to_csv(bench_path, index=False)
        bundle.files["benchmarks"] = bench_path

    if cells:
        stats = corpus_mod.descriptive_stats(cells, meta)
        stats_path = out / "descriptive_stats.csv"
        stats.to_csv(stats_path, index=False, float_format="%.17g")
        bundle.files["descriptive_stats"] = stats_path

    if fit is not None:
        coef_path = out / f"coefficients_{config.subsample.replace(':', '_')}.csv"
        fit.params.to_csv(coef_path, index=False, float_format="%.17g")
        bundle.files["coefficients"] = coef_path
        fit_manifest = {
            "n_obs": fit.n_obs,
            "n_clusters": fit.n_clusters,
            "iterations": fit.iterations,
            "tol": hdfe.DEFAULT_TOL,
            "dof_convention": fit.dof_convention,
            "k_model": fit.k_model,
            "k_absorbed": fit.k_absorbed,
            "dropped_columns": fit.dropped_columns,
        }
        fit_manifest_path = out / "fit_manifest.json"
        fit_manifest_path.write_text(
            json.dumps(fit_manifest, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        bundle.files["fit_manifest"] = fit_manifest_path

    plot_path = out / "plot_data.csv"
    bundle.plot_data.to_csv(plot_path, index=False, float_format="%.17g")
    bundle.files["plot_data"] = plot_path


def _write_manifest(bundle, config, key, timings):
    """Two files: a deterministic manifest (config hash, digests) and a
    separate run log carrying wall-clock timings."""
    manifest = {
        "config_hash": key,
        "subsample": config.subsample,
        "benchmark_variant": config.benchmark_variant,
        "threshold_fold": config.threshold_fold,
        "min_distinct": config.min_distinct,
        "warnings": bundle.warnings,
        "files": {
            name: {"path": path.name, "sha256": _file_digest(path)}
            for name, path in sorted(bundle.files.items())
        },
    }
    manifest_path = bundle.output_dir / "manifest.json"
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    bundle.manifest = manifest
    bundle.files["manifest"] = manifest_path

    log_path = bundle.output_dir / "run_log.json"
    log_path.write_text(
        json.dumps({"timings_s": timings}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def emit_report(bundle: ReportBundle, fmt: str = "delimited") -> list[Path]:
    """Re-emit coefficient tables and plot data in the requested format.

    Both formats carry identical numeric content.
    """
    out = bundle.output_dir
    written = []
    if fmt == "delimited":
        path = out / "report_plot_data.csv"
        bundle.plot_data.to_csv(path, index=False, float_format="%.17g")
        written.append(path)
        for name, table in bundle.coef_tables.items():
            p = out / f"report_coefficients_{name.replace(':', '_')}.csv"
            table.to_csv(p, index=False, float_format="%.17g")
            written.append(p)
    elif fmt == "structured":
        payload = {
            "plot_data": bundle.plot_data.to_dict(orient="records"),
            "coefficients": {
                name: table.to_dict(orient="records")
                for name, table in bundle.coef_tables.items()
            },
        }
        path = out / "report.json"
        path.write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        written.append(path)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return written
