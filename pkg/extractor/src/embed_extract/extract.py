"""Batch embedding extraction with a pretrained scientific-text encoder.

Each corpus record's title and abstract are concatenated (missing fields
become empty strings), tokenized to at most ``max_length`` subword
tokens, and mean-pooled over the encoder's final hidden states with the
attention mask excluding padding, yielding one fixed-dimension vector
per publication. Inference only; no gradients, no fine-tuning.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import emb1

logger = logging.getLogger(__name__)

DEFAULT_MODEL = "allenai/scibert_scivocab_uncased"


class ModelLoadFailure(Exception):
    """The encoder or its tokenizer could not be loaded."""


class TokenizationFailure(Exception):
    """A single record could not be tokenized (skipped and manifested)."""


@dataclass
class ExtractionConfig:
    corpus_path: str
    output_path: str
    model_id: str = DEFAULT_MODEL
    max_length: int = 512
    batch_size: int = 32
    device: str = "cpu"
    #: include sequence-delimiter tokens in the mean pool (whole-sequence
    #: average); disable for sensitivity checks
    include_special_tokens: bool = True

    def __post_init__(self):
        if self.max_length != 512:
            raise ValueError("max sequence length is fixed at 512")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


def _load_model(config: ExtractionConfig):
    try:
        import torch
        from transformers import AutoModel, AutoTokenizer

        tokenizer = AutoTokenizer.from_pretrained(config.model_id)
        model = AutoModel.from_pretrained(config.model_id)
    except Exception as exc:  # transformers raises a mix of OSError/ValueError
        raise ModelLoadFailure(f"cannot load {config.model_id!r}: {exc}") from exc
    model.eval()
    model.to(config.device)
    return tokenizer, model


def _read_corpus(path):
    """Yield (id, title, abstract) from newline-delimited JSON records."""
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                pub_id = str(obj["id"])
            except (json.JSONDecodeError, KeyError) as exc:
                logger.warning("skipping malformed line %d: %s", line_number, exc)
                continue
            yield pub_id, obj.get("title") or "", obj.get("abstract") or ""


def _document_text(title: str, abstract: str) -> str:
    return " ".join(part for part in (title, abstract) if part)


def _pool(hidden, mask):
    """Mean over unmasked positions; mask is (batch, seq) of 0/1."""
    import torch

    weights = mask.unsqueeze(-1).to(hidden.dtype)
    summed = (hidden * weights).sum(dim=1)
    counts = weights.sum(dim=1).clamp(min=1.0)
    return summed / counts


def extract(config: ExtractionConfig) -> dict:
    """Embed the corpus and write the EMB1 store plus its manifest.

    Returns the manifest. Records missing both title and abstract are
    skipped and listed; per-record tokenization failures likewise.
    """
    import torch

    tokenizer, model = _load_model(config)
    hidden_dim = model.config.hidden_size

    documents: list[tuple[str, str]] = []
    skipped_empty: list[str] = []
    for pub_id, title, abstract in _read_corpus(config.corpus_path):
        text = _document_text(title, abstract)
        if not text:
            skipped_empty.append(pub_id)
            continue
        documents.append((pub_id, text))
    # fixed batch composition: documents are processed in sorted-id order
    documents.sort(key=lambda item: item[0])

    vectors: dict[str, np.ndarray] = {}
    failed_tokenize: list[str] = []
    with torch.inference_mode():
        for start in range(0, len(documents), config.batch_size):
            batch = documents[start : start + config.batch_size]
            texts = [text for (_pid, text) in batch]
            try:
                encoded = tokenizer(
                    texts,
                    truncation=True,
                    max_length=config.max_length,
                    padding=True,
                    return_tensors="pt",
                    return_special_tokens_mask=True,
                )
            except Exception:
                # retry one by one so a single bad record cannot sink the batch
                for pub_id, text in batch:
                    try:
                        single = tokenizer(
                            [text],
                            truncation=True,
                            max_length=config.max_length,
                            padding=True,
                            return_tensors="pt",
                            return_special_tokens_mask=True,
                        )
                    except Exception:
                        failed_tokenize.append(pub_id)
                        continue
                    vectors[pub_id] = _embed_batch(
                        model, single, config
                    )[0]
                continue
            pooled = _embed_batch(model, encoded, config)
            for (pub_id, _text), vec in zip(batch, pooled):
                vectors[pub_id] = vec

    manifest = {
        "format": "EMB1",
        "dim": int(hidden_dim),
        "model": config.model_id,
        "max_length": config.max_length,
        "pooling": "mean_final_hidden",
        "include_special_tokens": config.include_special_tokens,
        "n_vectors": len(vectors),
        "skipped_missing_text": sorted(skipped_empty),
        "failed_tokenization": sorted(failed_tokenize),
    }
    emb1.write_store(config.output_path, vectors, hidden_dim, manifest)
    return manifest


def _embed_batch(model, encoded, config: ExtractionConfig) -> np.ndarray:
    import torch

    special = encoded.pop("special_tokens_mask")
    encoded = {k: v.to(config.device) for k, v in encoded.items()}
    output = model(**encoded)
    mask = encoded["attention_mask"]
    if not config.include_special_tokens:
        mask = mask * (1 - special.to(mask.device))
    pooled = _pool(output.last_hidden_state, mask)
    return pooled.cpu().to(dtype=torch.float32).numpy()
