"""BERT embedding exporter for the terminology alignment pipeline."""

__version__ = "0.1.0"

from .exporter import build_vocab, embed_texts, random_bert, write_embeddings  # noqa: F401
