"""Command-line entry point mirroring ExtractionConfig."""

from __future__ import annotations

import argparse
import json
import sys

from .extract import DEFAULT_MODEL, ExtractionConfig, ModelLoadFailure, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-extract",
        description="Batch-compute document embeddings into an EMB1 store",
    )
    parser.add_argument("--corpus", required=True, help="corpus .jsonl path")
    parser.add_argument("--output", required=True, help="output .emb1 path")
    parser.add_argument("--model", default=DEFAULT_MODEL,
                        help="encoder model identifier or local path")
    parser.add_argument("--max-length", type=int, default=512,
                        help="max subword tokens (fixed at 512)")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--exclude-special-tokens", action="store_true",
                        help="drop sequence delimiters from the mean pool")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = ExtractionConfig(
            corpus_path=args.corpus,
            output_path=args.output,
            model_id=args.model,
            max_length=args.max_length,
            batch_size=args.batch_size,
            device=args.device,
            include_special_tokens=not args.exclude_special_tokens,
        )
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        manifest = extract(config)
    except ModelLoadFailure as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(
        {k: manifest[k] for k in ("dim", "n_vectors", "model")}, indent=2
    ))
    if manifest["skipped_missing_text"]:
        print(f"skipped {len(manifest['skipped_missing_text'])} records "
              "missing both title and abstract", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
