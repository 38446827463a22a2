"""Fixtures for the extractor tests.

The pretrained encoder is not downloadable in every environment, so the
suite runs against a small randomly initialized BERT saved locally with
the same 768-dim hidden size the production model uses. Everything under
test (tokenize, truncate, masked mean pool, EMB1 serialization) is
independent of the weight values.
"""

import json
import string

import pytest
import torch
from transformers import BertConfig, BertModel, BertTokenizerFast


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("tiny_bert")
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    vocab += list(string.ascii_lowercase)
    vocab += [f"##{ch}" for ch in string.ascii_lowercase]
    vocab += ["the", "of", "acid", "data", "study", "model", "results",
              "methods", "clinical", "neural", "##ing", "##ed", "##s"]
    (root / "vocab.txt").write_text("\n".join(vocab) + "\n")
    tokenizer = BertTokenizerFast(vocab_file=str(root / "vocab.txt"),
                                  do_lower_case=True)
    tokenizer.save_pretrained(root)

    torch.manual_seed(0)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=768,
        num_hidden_layers=2,
        num_attention_heads=12,
        intermediate_size=256,
        max_position_embeddings=512,
    )
    BertModel(config).save_pretrained(root)
    return str(root)


@pytest.fixture()
def corpus_file(tmp_path):
    def write(records):
        path = tmp_path / "corpus.jsonl"
        with open(path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec) + "\n")
        return str(path)

    return write
