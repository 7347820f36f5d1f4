"""Command-line pipeline driver.

Subcommands: gen, split, train-sem, train-gcn, train-fuse, align, eval,
ablate, sweep. Exit codes: 0 success, 2 config/usage error, 3 data error,
4 numeric failure. Every run writes a manifest (sorted key=value lines
plus a config hash and the seed) next to its outputs, so any report can
be reproduced from its manifest alone.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import asdict, fields, replace

from .checkpoint import load_checkpoint
from .evaluate import SplitConfig, hits_at_k, median, run_ablation, save_report, split_dataset
from .kb import KbError, load_candidates, load_kb, save_alignments, save_candidates, save_kb
from .linalg import NumericError, format_float, make_rng
from .pipeline import (PipelineConfig, TrainedPipeline, VARIANTS, align_top1,
                       alignment_target_ids, evaluate_candidates, load_fusion, load_gcn,
                       load_scorer, save_fusion, save_gcn, save_scorer,
                       train_pipeline, train_stage_fusion, train_stage_gcn,
                       train_stage_semantic)
from .synth import SynthConfig, generate

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

_BOOL_FIELDS = {"use_semantic", "use_structure"}


class ConfigError(ValueError):
    pass


def load_config(path: str | None, overrides: dict) -> PipelineConfig:
    """Line-oriented `key = value` config file; explicit flags win."""
    values: dict = {}
    known = {f.name: f.type for f in fields(PipelineConfig)}
    if path:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, _, val = line.partition("=")
                key, val = key.strip(), val.strip()
                if key not in known:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = val
    values.update({k: v for k, v in overrides.items() if v is not None})
    coerced: dict = {}
    defaults = PipelineConfig()
    for key, val in values.items():
        if isinstance(val, str):
            target = type(getattr(defaults, key))
            if target is bool or key in _BOOL_FIELDS:
                coerced[key] = val.lower() in ("1", "true", "yes")
            else:
                coerced[key] = target(val)
        else:
            coerced[key] = val
    try:
        return replace(defaults, **coerced)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def save_config(cfg: PipelineConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, val in sorted(asdict(cfg).items()):
            fh.write(f"{key} = {val}\n")


def write_manifest(path, cfg: PipelineConfig, extra: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key, val in sorted(asdict(cfg).items()):
            fh.write(f"{key} = {val}\n")
        fh.write(f"config_hash = {cfg.hash()}\n")
        for key, val in sorted((extra or {}).items()):
            fh.write(f"{key} = {val}\n")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--d-embed", type=int, dest="d_embed")
    p.add_argument("--d-se", type=int, dest="d_se")
    p.add_argument("--gcn-layers", type=int, dest="gcn_layers")
    p.add_argument("--gamma", type=float)
    p.add_argument("--moment", type=int, choices=(1, 2))
    p.add_argument("--k-neg", type=int, dest="k_neg")
    p.add_argument("--lr-sem", type=float, dest="lr_sem")
    p.add_argument("--lr-gcn", type=float, dest="lr_gcn")
    p.add_argument("--lr-fus", type=float, dest="lr_fus")
    p.add_argument("--epochs-sem", type=int, dest="epochs_sem")
    p.add_argument("--epochs-gcn", type=int, dest="epochs_gcn")
    p.add_argument("--epochs-fus", type=int, dest="epochs_fus")
    p.add_argument("--init-mode", choices=("char_ngram", "random", "file"), dest="init_mode")
    p.add_argument("--entity-embeddings", dest="entity_embeddings")
    p.add_argument("--train-embeddings", dest="train_embeddings")
    p.add_argument("--eval-embeddings", dest="eval_embeddings")


_CFG_KEYS = [
    "seed", "d_embed", "d_se", "gcn_layers", "gamma", "moment", "k_neg",
    "lr_sem", "lr_gcn", "lr_fus", "epochs_sem", "epochs_gcn", "epochs_fus",
    "init_mode", "entity_embeddings", "train_embeddings", "eval_embeddings",
]


def _config_from(args) -> PipelineConfig:
    overrides = {k: getattr(args, k, None) for k in _CFG_KEYS}
    return load_config(getattr(args, "config", None), overrides)


def _load_staged_pipeline(args, kb) -> TrainedPipeline:
    cfg = _config_from(args)
    scorer = load_scorer(os.path.join(args.ckpt_dir, "sem.ckpt"))
    gcn = load_gcn(os.path.join(args.ckpt_dir, "gcn.ckpt"))
    fusion = load_fusion(os.path.join(args.ckpt_dir, "fusion.ckpt"))
    from .graph import build_entity_adjacency, normalize
    from .pipeline import initial_embeddings
    from .gcn import gcn_forward
    ent_h0 = initial_embeddings(cfg, scorer, kb.surfaces(), "entity").h
    ent_out = gcn_forward(gcn, normalize(build_entity_adjacency(kb)), ent_h0)
    return TrainedPipeline(config=cfg, kb=kb, target_ids=alignment_target_ids(kb),
                           scorer=scorer, gcn=gcn, fusion=fusion, ent_out=ent_out)


def cmd_gen(args) -> int:
    cfg = SynthConfig(n_standards=args.standards, syn_min=args.synonyms,
                      syn_max=args.synonyms, hyponym_fanout=args.fanout, seed=args.seed)
    kb, _ = generate(cfg)
    save_kb(kb, args.out)
    print(f"wrote {kb.n_entities} entities, {len(kb.triples)} triples to {args.out}")
    return EXIT_OK


def cmd_split(args) -> int:
    kb_full = load_kb(args.kb)
    cfg = SplitConfig(min_synonyms=args.min_synonyms, seed=args.seed)
    kb, train, valid, test = split_dataset(kb_full, cfg, make_rng(cfg.seed))
    os.makedirs(args.out_dir, exist_ok=True)
    save_kb(kb, os.path.join(args.out_dir, "structure_kb.tsv"))
    for name, cs in (("train", train), ("valid", valid), ("test", test)):
        save_candidates(cs, os.path.join(args.out_dir, f"{name}.tsv"))
    print(f"structure KB: {kb.n_entities} entities; "
          f"train/valid/test = {len(train)}/{len(valid)}/{len(test)}")
    return EXIT_OK


def cmd_train_sem(args) -> int:
    cfg = _config_from(args)
    kb = load_kb(args.kb)
    train_cs = load_candidates(args.train, kb)
    scorer, history = train_stage_semantic(kb, train_cs, cfg)
    os.makedirs(args.ckpt_dir, exist_ok=True)
    save_scorer(scorer, os.path.join(args.ckpt_dir, "sem.ckpt"))
    write_manifest(os.path.join(args.ckpt_dir, "manifest_sem.txt"), cfg)
    if history:
        print(f"semantic: {len(history)} epochs, loss {history[0]:.4f} -> {history[-1]:.4f}")
    return EXIT_OK


def cmd_train_gcn(args) -> int:
    cfg = _config_from(args)
    kb = load_kb(args.kb)
    train_cs = load_candidates(args.train, kb)
    scorer = load_scorer(os.path.join(args.ckpt_dir, "sem.ckpt"))
    gcn, _, _, history = train_stage_gcn(kb, train_cs, cfg, scorer)
    save_gcn(gcn, os.path.join(args.ckpt_dir, "gcn.ckpt"))
    write_manifest(os.path.join(args.ckpt_dir, "manifest_gcn.txt"), cfg)
    if history:
        print(f"gcn: {len(history)} epochs, loss {history[0]:.4f} -> {history[-1]:.4f}")
    return EXIT_OK


def cmd_train_fuse(args) -> int:
    cfg = _config_from(args)
    kb = load_kb(args.kb)
    train_cs = load_candidates(args.train, kb)
    scorer = load_scorer(os.path.join(args.ckpt_dir, "sem.ckpt"))
    gcn = load_gcn(os.path.join(args.ckpt_dir, "gcn.ckpt"))
    from .graph import build_candidate_adjacency, build_entity_adjacency, normalize
    from .gcn import gcn_forward
    from .pipeline import initial_embeddings
    ent_out = gcn_forward(gcn, normalize(build_entity_adjacency(kb)),
                          initial_embeddings(cfg, scorer, kb.surfaces(), "entity").h)
    cand_out = gcn_forward(gcn, normalize(build_candidate_adjacency(len(train_cs))),
                           initial_embeddings(cfg, scorer, train_cs.surfaces(), "train").h)
    fusion, history = train_stage_fusion(kb, train_cs, cfg, scorer, ent_out, cand_out)
    save_fusion(fusion, os.path.join(args.ckpt_dir, "fusion.ckpt"))
    write_manifest(os.path.join(args.ckpt_dir, "manifest_fusion.txt"), cfg)
    if history:
        print(f"fusion: {len(history)} epochs, loss {history[0]:.4f} -> {history[-1]:.4f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    kb = load_kb(args.kb)
    pipe = _load_staged_pipeline(args, kb)
    cand_cs = load_candidates(args.candidates, kb)
    report = evaluate_candidates(pipe, cand_cs)
    save_report(report, args.report)
    write_manifest(args.report + ".manifest", pipe.config,
                   {"report": args.report, "candidates": args.candidates})
    print("HITS@1/5/10 = {:.2f} / {:.2f} / {:.2f}".format(
        report.hits[1], report.hits[5], report.hits[10]))
    return EXIT_OK


def cmd_align(args) -> int:
    kb = load_kb(args.kb)
    pipe = _load_staged_pipeline(args, kb)
    cand_cs = load_candidates(args.candidates, kb)
    pairs = align_top1(pipe, cand_cs)
    save_alignments(pairs, args.out)
    write_manifest(args.out + ".manifest", pipe.config, {"candidates": args.candidates})
    print(f"wrote {len(pairs.positives)} alignment pairs to {args.out}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    kb_full = load_kb(args.kb)
    cfg = _config_from(args)
    seeds = [int(s) for s in args.seeds.split(",")]
    variants = args.variants.split(",")
    for v in variants:
        if v not in VARIANTS:
            raise ConfigError(f"unknown variant {v!r}; choose from {VARIANTS}")
    split_cfg = SplitConfig(seed=cfg.seed)
    workdir = os.path.dirname(os.path.abspath(args.out)) or "."
    rows = run_ablation(kb_full, split_cfg, cfg, variants, seeds, workdir=workdir)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(f"# seeds={args.seeds} config={cfg.hash()}\n")
        fh.write("variant\thits@1\thits@5\thits@10\n")
        for variant, hits in rows:
            fh.write(f"{variant}\t{format_float(hits[1])}\t{format_float(hits[5])}"
                     f"\t{format_float(hits[10])}\n")
            print(f"{variant}: {hits[1]:.2f} / {hits[5]:.2f} / {hits[10]:.2f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    kb_full = load_kb(args.kb)
    cfg = _config_from(args)
    fractions = [int(f) for f in args.fractions.split(",")]
    for f in fractions:
        if not 1 <= f <= 100:
            raise ConfigError(f"fraction {f} out of range 1..100")
    split_cfg = SplitConfig(seed=cfg.seed)
    kb, train, _valid, test = split_dataset(kb_full, split_cfg, make_rng(split_cfg.seed))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("fraction\thits@1\thits@5\thits@10\n")
        for frac in fractions:
            n = max(1, len(train) * frac // 100)
            sub = load_truncated(train, n)
            pipe = train_pipeline(kb, sub, cfg)
            report = evaluate_candidates(pipe, test)
            fh.write(f"{frac}\t{format_float(report.hits[1])}"
                     f"\t{format_float(report.hits[5])}\t{format_float(report.hits[10])}\n")
            print(f"{frac}%: {report.hits[1]:.2f} / {report.hits[5]:.2f} / {report.hits[10]:.2f}")
    return EXIT_OK


def load_truncated(cs, n: int):
    from .kb import Candidate, CandidateSet
    items = [Candidate(i, c.surface, c.gold) for i, c in enumerate(cs.items[:n])]
    return CandidateSet(items)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="termalign",
                                     description="Terminology KB enrichment pipeline")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen", help="generate a synthetic terminology KB")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--standards", type=int, default=100)
    p.add_argument("--synonyms", type=int, default=5)
    p.add_argument("--fanout", type=int, default=10)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("split", help="split a KB into structure KB + candidate sets")
    p.add_argument("--kb", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--min-synonyms", type=int, default=3)
    p.set_defaults(func=cmd_split)

    for name, func, needs_train in (("train-sem", cmd_train_sem, True),
                                    ("train-gcn", cmd_train_gcn, True),
                                    ("train-fuse", cmd_train_fuse, True)):
        p = sub.add_parser(name, help=f"train stage: {name.split('-')[1]}")
        p.add_argument("--kb", required=True)
        p.add_argument("--train", required=needs_train)
        p.add_argument("--ckpt-dir", required=True)
        _add_config_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("eval", help="rank candidates and report Hits@k")
    p.add_argument("--kb", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--ckpt-dir", required=True)
    p.add_argument("--report", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("align", help="write top-1 alignment pairs")
    p.add_argument("--kb", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--ckpt-dir", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("ablate", help="run ablation variants over seeds")
    p.add_argument("--kb", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seeds", default="1,2,3,4,5")
    p.add_argument("--variants", default=",".join(VARIANTS[:4]))
    _add_config_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("sweep", help="train on fractions of the training set")
    p.add_argument("--kb", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fractions", default="5,10,20,50,75")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (KbError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
