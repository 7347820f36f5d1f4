"""BERT sentence embeddings written in the pipeline's embedding file format.

The exporter talks to the alignment pipeline only through files:

    embedding file   line 1 `n d`, then n lines `id<TAB>v1 v2 ... vd`
    KB file          `E<TAB>id<TAB>kind<TAB>surface` entity lines
    candidate file   `C<TAB>id<TAB>surface[<TAB>gold]` lines

Texts are tokenized per character against a vocab built from the input
corpus (no external tokenizer assets needed), encoded with a BERT model,
and mean-pooled over non-padding positions. Without a model directory a
randomly initialized, seeded BERT encoder is used, which keeps the tool
self-contained for offline runs while producing the exact file layout a
pretrained checkpoint would.
"""

from __future__ import annotations

import numpy as np
import torch
from transformers import BertConfig, BertModel

PAD, UNK, CLS, SEP = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
SPECIALS = [PAD, UNK, CLS, SEP]
MAX_CHARS = 126  # leaves room for [CLS]/[SEP] within 128 positions


def build_vocab(texts: list[str]) -> dict[str, int]:
    """Character vocabulary over the corpus, specials first."""
    chars = sorted({ch for t in texts for ch in t})
    return {tok: i for i, tok in enumerate(SPECIALS + chars)}


def encode_batch(texts: list[str], vocab: dict[str, int]) -> tuple[torch.Tensor, torch.Tensor]:
    """(input_ids, attention_mask) for a batch, char-level with [CLS]/[SEP]."""
    rows = []
    for t in texts:
        ids = [vocab[CLS]] + [vocab.get(ch, vocab[UNK]) for ch in t[:MAX_CHARS]] + [vocab[SEP]]
        rows.append(ids)
    width = max(len(r) for r in rows)
    input_ids = torch.full((len(rows), width), vocab[PAD], dtype=torch.long)
    mask = torch.zeros((len(rows), width), dtype=torch.long)
    for i, r in enumerate(rows):
        input_ids[i, : len(r)] = torch.tensor(r, dtype=torch.long)
        mask[i, : len(r)] = 1
    return input_ids, mask


def random_bert(vocab_size: int, hidden_size: int = 768, seed: int = 0) -> BertModel:
    """Seeded randomly-initialized BERT encoder (offline stand-in)."""
    config = BertConfig(
        vocab_size=vocab_size,
        hidden_size=hidden_size,
        num_hidden_layers=2,
        num_attention_heads=max(1, hidden_size // 64),
        intermediate_size=2 * hidden_size,
        max_position_embeddings=MAX_CHARS + 2,
    )
    torch.manual_seed(seed)
    model = BertModel(config)
    model.eval()
    return model


def load_bert(model_dir: str) -> BertModel:
    model = BertModel.from_pretrained(model_dir)
    model.eval()
    return model


def embed_texts(model: BertModel, vocab: dict[str, int], texts: list[str],
                batch_size: int = 32) -> np.ndarray:
    """Mean-pooled last-hidden-state rows, one per input text, in order."""
    if not texts:
        raise ValueError("no texts to embed")
    out = []
    with torch.no_grad():
        for start in range(0, len(texts), batch_size):
            batch = texts[start : start + batch_size]
            input_ids, mask = encode_batch(batch, vocab)
            hidden = model(input_ids=input_ids, attention_mask=mask).last_hidden_state
            m = mask.unsqueeze(-1).to(hidden.dtype)
            pooled = (hidden * m).sum(dim=1) / m.sum(dim=1)
            out.append(pooled.to(torch.float64).numpy())
    return np.concatenate(out, axis=0)


def write_embeddings(h: np.ndarray, path) -> None:
    """Embedding file format: `n d` header, then `id<TAB>values` rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{h.shape[0]} {h.shape[1]}\n")
        for i in range(h.shape[0]):
            fh.write(f"{i}\t" + " ".join(f"{x:.17g}" for x in h[i]) + "\n")


# input readers for the pipeline's text formats ------------------------------

def _data_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            yield lineno, line


def read_surfaces(path) -> list[str]:
    """One surface per line, in order."""
    return [line for _, line in _data_lines(path)]


def read_kb_surfaces(path) -> list[str]:
    """Entity surfaces from a KB file, in entity-id order."""
    surfaces = []
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        if parts[0] == "E":
            if len(parts) != 4 or int(parts[1]) != len(surfaces):
                raise ValueError(f"{path}:{lineno}: bad entity line")
            surfaces.append(parts[3])
        elif parts[0] != "T":
            raise ValueError(f"{path}:{lineno}: unknown line tag {parts[0]!r}")
    if not surfaces:
        raise ValueError(f"{path}: no entity lines")
    return surfaces


def read_candidate_surfaces(path) -> list[str]:
    """Candidate surfaces from a candidate file, in candidate-id order."""
    surfaces = []
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        if parts[0] != "C" or len(parts) not in (3, 4) or int(parts[1]) != len(surfaces):
            raise ValueError(f"{path}:{lineno}: bad candidate line")
        surfaces.append(parts[2])
    if not surfaces:
        raise ValueError(f"{path}: no candidate lines")
    return surfaces
