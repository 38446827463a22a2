"""Command-line entry point.

Subcommands: detect, score, panel, fit, report, run, synth. Exit codes:
0 ok, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import detector as det
from . import hdfe
from . import pipeline as pipe
from . import similarity as sim
from . import synth
from . import vecstore
from .errors import (
    LingconvError,
    NoConvergence,
    RankDeficient,
    TooFewClusters,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


def _add_config_args(parser: argparse.ArgumentParser, *, need_vectors=True):
    parser.add_argument("--corpus", required=False, help="corpus .jsonl path")
    parser.add_argument("--countries", required=False, help="country metadata csv")
    parser.add_argument("--field-map", required=False, help="field mapping csv")
    if need_vectors:
        parser.add_argument("--vectors", required=False, help="EMB1 vector store")
    parser.add_argument("--vocabulary", default=None, help="marker vocabulary file")
    parser.add_argument("--config", default=None, help="JSON config file (RunConfig)")
    parser.add_argument("--output", default="out", help="output directory")
    parser.add_argument("--threshold-fold", type=float, default=4.0,
                        choices=[3.0, 4.0, 5.0])
    parser.add_argument("--min-distinct", type=int, default=1, choices=[1, 2])
    parser.add_argument("--min-support", type=int, default=30)
    parser.add_argument("--variant", default="AllUS", choices=list(sim.VARIANTS))
    parser.add_argument("--reference-year", type=int, default=2022)
    parser.add_argument("--subsample", default="All")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--strict-parse", action="store_true")
    parser.add_argument("--partitions", type=int, default=1)
    parser.add_argument("--cache-dir", default=None)


def _build_config(args, *, need_vectors=True) -> pipe.RunConfig:
    if args.config:
        config = pipe.RunConfig.from_file(args.config)
        overrides = {}
        if args.output != "out":
            overrides["output_dir"] = args.output
        if overrides:
            config = dataclasses.replace(config, **overrides)
        return config
    required = ["corpus", "countries", "field_map"]
    if need_vectors:
        required.append("vectors")
    missing = [name for name in required if getattr(args, name.replace("-", "_")) is None]
    if missing:
        raise SystemExit2(f"missing required arguments: {missing} (or use --config)")
    return pipe.RunConfig(
        corpus_path=args.corpus,
        country_meta_path=args.countries,
        field_map_path=args.field_map,
        vector_store_path=getattr(args, "vectors", "") or "",
        vocabulary_path=args.vocabulary,
        output_dir=args.output,
        threshold_fold=args.threshold_fold,
        min_distinct=args.min_distinct,
        min_support=args.min_support,
        benchmark_variant=args.variant,
        reference_year=args.reference_year,
        subsample=args.subsample,
        seed=args.seed,
        strict_parse=args.strict_parse,
        partitions=args.partitions,
        cache_dir=args.cache_dir,
    )


class SystemExit2(Exception):
    """Usage error surfaced with exit code 1."""


def cmd_run(args) -> int:
    config = _build_config(args)
    bundle = pipe.run_pipeline(config)
    pipe.emit_report(bundle, "delimited")
    pipe.emit_report(bundle, "structured")
    print(f"wrote {len(bundle.files)} files to {bundle.output_dir}")
    return EXIT_OK


def cmd_detect(args) -> int:
    config = _build_config(args, need_vectors=False)
    records = list(
        corpus_mod.read_corpus(config.corpus_path, strict=config.strict_parse)
    )
    _markers, flags, markers_frame = pipe.detect_stage(records, config)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    pipe._flags_to_frame(flags).to_csv(out / "flags.csv", index=False)
    markers_frame.to_csv(out / "markers.csv", index=False, float_format="%.17g")
    n_flagged = sum(f.flagged_any_field for f in flags.values())
    print(f"flagged {n_flagged}/{len(flags)} publications")
    return EXIT_OK


def cmd_score(args) -> int:
    config = _build_config(args)
    records = list(
        corpus_mod.read_corpus(config.corpus_path, strict=config.strict_parse)
    )
    meta = corpus_mod.load_country_meta(config.country_meta_path)
    field_map = corpus_mod.load_field_map(config.field_map_path)
    store = vecstore.read_store(config.vector_store_path)
    _markers, flags, _mf = pipe.detect_stage(records, config)
    cells = corpus_mod.build_panel(records, meta, field_map)
    scores, report = pipe.score_stage(cells, records, store, config, flags)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "scores.csv", "w", encoding="utf-8") as fh:
        fh.write("pub_id,detailed_field,variant,similarity\n")
        for (pid, fld), value in sorted(scores.items()):
            fh.write(f"{pid},{fld},{config.benchmark_variant},{value!r}\n")
    print(f"scored {len(scores)} (pub, field) pairs; "
          f"{len(report.too_small)} benchmarks too small")
    return EXIT_OK


def cmd_panel(args) -> int:
    config = _build_config(args, need_vectors=False)
    records = list(
        corpus_mod.read_corpus(config.corpus_path, strict=config.strict_parse)
    )
    meta = corpus_mod.load_country_meta(config.country_meta_path)
    field_map = corpus_mod.load_field_map(config.field_map_path)
    cells = corpus_mod.build_panel(records, meta, field_map)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus_mod.cells_to_frame(cells).to_csv(out / "panel.csv", index=False)
    print(f"panel: {len(cells)} cells from {len(records)} records")
    return EXIT_OK


def cmd_fit(args) -> int:
    import pandas as pd

    frame = pd.read_csv(args.panel, dtype={"pub_id": str})
    fit = hdfe.fit_event_study(frame, reference_year=args.reference_year)
    fit.params.to_csv(sys.stdout, index=False, float_format="%.10g")
    return EXIT_OK


def cmd_report(args) -> int:
    config = _build_config(args)
    bundle = pipe.run_pipeline(config)
    pipe.emit_report(bundle, args.format)
    return EXIT_OK


def cmd_synth(args) -> int:
    params = synth.CorpusParams(
        n_pubs_per_field_year=args.size,
        seed=args.seed,
    )
    paths = synth.write_synth_dataset(args.output, params, dim=args.dim)
    print(json.dumps(paths, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lingconv",
        description="GenAI text detection, similarity scoring, and event-study "
        "estimation over publication corpora",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="end-to-end pipeline")
    _add_config_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("detect", help="marker filtering and flagging only")
    _add_config_args(p, need_vectors=False)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("score", help="similarity scoring only")
    _add_config_args(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("panel", help="panel expansion only")
    _add_config_args(p, need_vectors=False)
    p.set_defaults(func=cmd_panel)

    p = sub.add_parser("fit", help="estimate the event study from a panel csv")
    p.add_argument("panel", help="panel csv (from the panel subcommand)")
    p.add_argument("--reference-year", type=int, default=2022)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="run and emit reports in one format")
    _add_config_args(p)
    p.add_argument("--format", default="delimited",
                   choices=["delimited", "structured"])
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="generate a synthetic test dataset")
    p.add_argument("--output", default="synth_out")
    p.add_argument("--size", type=int, default=25,
                   help="publications per field-year")
    p.add_argument("--dim", type=int, default=768)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except SystemExit2 as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NoConvergence, RankDeficient, TooFewClusters) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (LingconvError, FileNotFoundError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
