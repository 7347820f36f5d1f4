"""Command-line embedding exporter.

Reads surfaces from a plain text file, a KB file, or a candidate file,
embeds them with BERT, and writes the embedding text format consumed by
the alignment pipeline's file-init mode. Exit codes: 0 success, 2 usage
error, 3 data error.
"""

from __future__ import annotations

import argparse
import sys

from .exporter import (build_vocab, embed_texts, load_bert, random_bert,
                       read_candidate_surfaces, read_kb_surfaces, read_surfaces,
                       write_embeddings)

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bert-export",
                                     description="Export BERT embeddings for pipeline init")
    src = parser.add_mutually_exclusive_group(required=True)
    src.add_argument("--surfaces", help="text file, one surface per line")
    src.add_argument("--kb", help="KB file; entity surfaces in id order")
    src.add_argument("--candidates", help="candidate file; surfaces in id order")
    parser.add_argument("--out", required=True, help="embedding file to write")
    parser.add_argument("--model-dir", help="pretrained BERT directory; random init if omitted")
    parser.add_argument("--hidden-size", type=int, default=768,
                        help="embedding width for random init (default 768)")
    parser.add_argument("--seed", type=int, default=0, help="random-init seed")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--vocab-from", help="extra text file whose characters join the vocab, "
                        "so several exports share one id space")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        if args.surfaces:
            texts = read_surfaces(args.surfaces)
        elif args.kb:
            texts = read_kb_surfaces(args.kb)
        else:
            texts = read_candidate_surfaces(args.candidates)
        vocab_texts = list(texts)
        if args.vocab_from:
            vocab_texts += read_surfaces(args.vocab_from)
        vocab = build_vocab(vocab_texts)
        if args.model_dir:
            model = load_bert(args.model_dir)
        else:
            model = random_bert(len(vocab), hidden_size=args.hidden_size, seed=args.seed)
        h = embed_texts(model, vocab, texts, batch_size=args.batch_size)
        write_embeddings(h, args.out)
    except (OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(f"wrote {h.shape[0]} x {h.shape[1]} embeddings to {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
