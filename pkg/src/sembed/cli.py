"""Command-line entry point: ``sembed {train,eval,report,compare,synth}``.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import datasets, encoder
from .config import ENCODER_KEYS, RunConfig, load_config_file, parse_overrides, resolve_seed
from .errors import CheckpointError, InputError, ParseError, SembedError
from .evaluation import (
    EncoderEmbedder,
    EvalReport,
    KnnConfig,
    StaticEmbedder,
    classify_dataset,
    embedding_similarity_score,
    pairwise_cosine_report,
)
from .pooling import PoolingStrategy
from .reporting import csv_table, markdown_table, pairs_csv, pairs_markdown, report_csv, report_markdown
from .static_embed import load_vectors
from .tokenizer import build_vocab
from .trainer import Setup, train_nli, train_sts, train_two_step, write_loss_trace

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"sembed: error: {msg}", file=sys.stderr)


def _run_config(args) -> RunConfig:
    raw = load_config_file(args.config) if getattr(args, "config", None) else {}
    raw.update(parse_overrides(getattr(args, "set", None)))
    return RunConfig.from_raw(raw, seed=getattr(args, "seed", None))


def _announce_seed(seed: int) -> None:
    print(f"root seed: {seed}", file=sys.stderr)


# --- train ------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = _run_config(args)
    setup = Setup.parse(args.setup)
    _announce_seed(cfg.seed)
    nli_path = args.nli or cfg.paths.get("nli")
    sts_path = args.sts or cfg.paths.get("sts")
    out_path = args.out or cfg.paths.get("out")
    init_path = args.init or cfg.paths.get("init")
    if out_path is None:
        raise UsageError("train requires --out")
    if setup in (Setup.NLI, Setup.TWO_STEP) and not nli_path:
        raise UsageError(f"--setup {setup.value} requires --nli")
    if setup in (Setup.STS, Setup.TWO_STEP) and not sts_path:
        raise UsageError(f"--setup {setup.value} requires --sts")
    triplets = datasets.load_triplets(nli_path) if nli_path else []
    pairs = datasets.load_scored_pairs(sts_path) if sts_path else []

    if init_path:
        try:
            model, ckpt_cfg = encoder.load_checkpoint(init_path)
        except OSError as exc:
            raise UsageError(f"cannot read --init checkpoint: {exc.strerror}") from None
        mismatched = [
            k for k in ENCODER_KEYS
            if k in cfg.explicit and getattr(cfg.encoder, k) != getattr(ckpt_cfg, k)
        ]
        if mismatched:
            detail = ", ".join(f"{k}: config {getattr(cfg.encoder, k)} vs checkpoint {getattr(ckpt_cfg, k)}" for k in mismatched)
            raise UsageError(f"--init checkpoint does not match config ({detail})")
        if model.vocab is None:
            raise UsageError("--init checkpoint carries no vocabulary")
    else:
        corpus = [t for ex in triplets for t in (ex.anchor, ex.positive, ex.negative)]
        corpus += [t for p in pairs for t in (p.sentence1, p.sentence2)]
        vocab = build_vocab(corpus, cfg.encoder.vocab_size)
        model = encoder.init(cfg.encoder, vocab)

    train_cfg = cfg.train
    try:
        if setup is Setup.NLI:
            result = train_nli(model, triplets, train_cfg)
            trained, losses = result.model, result.losses
        elif setup is Setup.STS:
            result = train_sts(model, pairs, train_cfg)
            trained, losses = result.model, result.losses
        else:
            two = train_two_step(model, triplets, pairs, train_cfg)
            trained, losses = two.model, two.nli_losses + two.sts_losses
    except InputError as exc:
        raise UsageError(str(exc)) from None

    encoder.save_checkpoint(trained, trained.config, out_path)
    loss_csv = args.loss_csv or cfg.paths.get("loss_csv") or f"{out_path}.loss.csv"
    write_loss_trace(loss_csv, losses)
    final = losses[-1] if losses else float("nan")
    print(f"trained setup={setup.value} steps={len(losses)} final_loss={final:.6f} checkpoint={out_path}")
    return EXIT_OK


# --- eval / report ----------------------------------------------------------


def _embedder(args):
    if bool(args.model) == bool(args.wordvecs):
        raise UsageError("pass exactly one of --model or --wordvecs")
    if args.model:
        try:
            model, _ = encoder.load_checkpoint(args.model)
        except OSError as exc:
            raise UsageError(f"cannot read --model: {exc.strerror}") from None
        if model.vocab is None:
            raise UsageError("checkpoint carries no vocabulary; cannot embed text")
        return EncoderEmbedder(model, PoolingStrategy.parse(args.pooling))
    return StaticEmbedder(load_vectors(args.wordvecs, args.buckets))


def _emit(text_md: str, text_csv: str, args) -> None:
    sys.stdout.write(text_md)
    if args.md:
        Path(args.md).write_text(text_md, encoding="utf-8")
    if args.csv:
        Path(args.csv).write_text(text_csv, encoding="utf-8")


def cmd_eval(args) -> int:
    cfg = _run_config(args)
    _announce_seed(cfg.seed)
    if args.task == "sts":
        if not args.data:
            raise UsageError("eval sts requires --data")
        pairs = datasets.load_scored_pairs(args.data)
        embedder = _embedder(args)
        report = EvalReport(embedding_similarity=embedding_similarity_score(embedder, pairs))
    else:
        missing = [f"--{n}" for n in ("train", "val", "test") if not getattr(args, n)]
        if missing:
            raise UsageError(f"eval cls requires {', '.join(missing)}")
        splits = [datasets.load_labeled(getattr(args, n)) for n in ("train", "val", "test")]
        embedder = _embedder(args)
        acc, k = classify_dataset(embedder, *splits, cfg=cfg.knn)
        report = EvalReport(accuracy=acc, chosen_k=k)
    _emit(report_markdown(report), report_csv(report), args)
    return EXIT_OK


def cmd_report_pairs(args) -> int:
    pairs = datasets.load_text_pairs(args.pairs)
    rows = pairwise_cosine_report(_embedder(args), pairs)
    _emit(pairs_markdown(rows), pairs_csv(rows), args)
    return EXIT_OK


# --- compare ----------------------------------------------------------------


def _load_manifest(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read manifest: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
    if not isinstance(doc, dict) or not isinstance(doc.get("models"), list) or not doc["models"]:
        raise UsageError("manifest must be an object with a non-empty 'models' list")
    base = Path(path).parent

    def resolve(p):
        return str(base / p) if p is not None else None

    models = []
    for i, entry in enumerate(doc["models"]):
        name = entry.get("name") or f"model{i + 1}"
        if bool(entry.get("model")) == bool(entry.get("wordvecs")):
            raise UsageError(f"manifest model {name!r}: give exactly one of 'model' or 'wordvecs'")
        if entry.get("wordvecs"):
            models.append((name, "avg", None, resolve(entry["wordvecs"]), resolve(entry.get("buckets"))))
            continue
        poolings = entry.get("pooling", "mean")
        for pooling in [poolings] if isinstance(poolings, str) else poolings:
            models.append((name, str(PoolingStrategy.parse(pooling)), resolve(entry["model"]), None, None))
    classification = []
    for ds in doc.get("classification", []):
        missing = [k for k in ("name", "train", "val", "test") if k not in ds]
        if missing:
            raise UsageError(f"manifest classification entry missing {missing}")
        classification.append((ds["name"], resolve(ds["train"]), resolve(ds["val"]), resolve(ds["test"])))
    knn = doc.get("knn", {})
    knn_cfg = KnnConfig(p=float(knn.get("p", 2.0)), k_grid=tuple(knn.get("k_grid", KnnConfig().k_grid)))
    return {"models": models, "sts": resolve(doc.get("sts")), "classification": classification, "knn": knn_cfg}


def _cell_error(exc: Exception) -> str:
    return f"error: {type(exc).__name__}"


def cmd_compare(args) -> int:
    seed = resolve_seed(args.seed, None)
    _announce_seed(seed)
    manifest = _load_manifest(args.manifest)
    sts_pairs = datasets.load_scored_pairs(manifest["sts"]) if manifest["sts"] else None
    cls_data = [
        (name, [datasets.load_labeled(p) for p in paths])
        for name, *paths in manifest["classification"]
    ]
    headers = ["Model", "Pooling"]
    if sts_pairs is not None:
        headers.append("Embedding Similarity")
    headers += [name for name, _ in cls_data]
    csv_headers = list(headers) + [f"{name} k" for name, _ in cls_data]

    rows, csv_rows, failed = [], [], False
    for name, pooling, ckpt, wordvecs, buckets in manifest["models"]:
        row, ks = [name, pooling], []
        try:
            if ckpt:
                model, _ = encoder.load_checkpoint(ckpt)
                if model.vocab is None:
                    raise InputError("checkpoint carries no vocabulary")
                embedder = EncoderEmbedder(model, pooling)
            else:
                embedder = StaticEmbedder(load_vectors(wordvecs, buckets))
        except (SembedError, OSError, ValueError) as exc:
            _err(f"{name}/{pooling}: {exc}")
            cell = _cell_error(exc)
            n = len(headers) - 2
            rows.append(row + [cell] * n)
            csv_rows.append(row + [cell] * n + [cell] * len(cls_data))
            failed = True
            continue
        if sts_pairs is not None:
            try:
                row.append(embedding_similarity_score(embedder, sts_pairs))
            except (SembedError, ValueError) as exc:
                _err(f"{name}/{pooling} similarity: {exc}")
                row.append(_cell_error(exc))
                failed = True
        for ds_name, splits in cls_data:
            try:
                acc, k = classify_dataset(embedder, *splits, cfg=manifest["knn"])
                row.append(acc)
                ks.append(k)
            except (SembedError, ValueError) as exc:
                _err(f"{name}/{pooling} {ds_name}: {exc}")
                row.append(_cell_error(exc))
                ks.append(_cell_error(exc))
                failed = True
        rows.append(row)
        csv_rows.append(row + ks)

    md = markdown_table(headers, rows)
    sys.stdout.write(md)
    if args.md:
        Path(args.md).write_text(md, encoding="utf-8")
    if args.csv:
        Path(args.csv).write_text(csv_table(csv_headers, csv_rows), encoding="utf-8")
    return EXIT_FAIL if failed else EXIT_OK


# --- synth ------------------------------------------------------------------


def cmd_synth(args) -> int:
    seed = resolve_seed(args.seed, None)
    _announce_seed(seed)
    spec = datasets.SynthSpec(
        num_topics=args.topics,
        words_per_topic=args.words_per_topic,
        n_triplets=args.triplets,
        n_pairs=args.pairs,
        n_labeled=args.labeled,
        seed=seed,
    )
    data = datasets.synth_generate(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_test = int(round(args.sts_test_fraction * len(data.pairs)))
    cut = len(data.pairs) - n_test
    datasets.dump_jsonl(data.triplets, out / "nli.jsonl")
    datasets.dump_jsonl(data.pairs[:cut], out / "sts_train.jsonl")
    datasets.dump_jsonl(data.pairs[cut:], out / "sts_test.jsonl")
    datasets.dump_jsonl(data.labeled.train, out / "cls_train.jsonl")
    datasets.dump_jsonl(data.labeled.validation, out / "cls_val.jsonl")
    datasets.dump_jsonl(data.labeled.test, out / "cls_test.jsonl")
    print(
        f"wrote {len(data.triplets)} triplets, {cut}+{n_test} scored pairs, "
        f"{len(data.labeled.train)}/{len(data.labeled.validation)}/{len(data.labeled.test)} labeled texts to {out}"
    )
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
    p.add_argument("--seed", type=int, help="root seed (overrides config and $SEMBED_SEED)")


def _add_source_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", help="encoder checkpoint")
    p.add_argument("--wordvecs", help="text word-vector file")
    p.add_argument("--buckets", help="optional n-gram bucket file for --wordvecs")
    p.add_argument("--pooling", default="mean", help="cls, mean or max (encoder models only)")
    p.add_argument("--csv", help="also write CSV here")
    p.add_argument("--md", help="also write markdown here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sembed", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train an encoder (nli, sts or two-step)")
    train.add_argument("--setup", required=True, choices=[s.value for s in Setup])
    train.add_argument("--nli", help="JSONL triplets (anchor, positive, negative)")
    train.add_argument("--sts", help="JSONL scored pairs (sentence1, sentence2, score)")
    train.add_argument("--out", help="checkpoint to write")
    train.add_argument("--init", help="start from this checkpoint instead of a fresh encoder")
    train.add_argument("--loss-csv", help="loss trace CSV (default: <out>.loss.csv)")
    _add_config_flags(train)
    train.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="embedding similarity (sts) or KNN accuracy (cls)")
    ev.add_argument("task", choices=["sts", "cls"])
    ev.add_argument("--data", help="scored pairs for sts")
    ev.add_argument("--train")
    ev.add_argument("--val")
    ev.add_argument("--test")
    _add_source_flags(ev)
    _add_config_flags(ev)
    ev.set_defaults(func=cmd_eval)

    report = sub.add_parser("report", help="per-pair cosine tables")
    report_sub = report.add_subparsers(dest="report_kind", required=True)
    pairs = report_sub.add_parser("pairs", help="cosine of each sentence pair")
    pairs.add_argument("--pairs", required=True, help="JSONL with sentence1/sentence2")
    _add_source_flags(pairs)
    pairs.set_defaults(func=cmd_report_pairs)

    compare = sub.add_parser("compare", help="model x pooling x metric table from a JSON manifest")
    compare.add_argument("--manifest", required=True)
    compare.add_argument("--csv")
    compare.add_argument("--md")
    compare.add_argument("--seed", type=int)
    compare.set_defaults(func=cmd_compare)

    synth = sub.add_parser("synth", help="write a synthetic topic corpus as JSONL files")
    synth.add_argument("--out-dir", required=True)
    synth.add_argument("--topics", type=int, default=2)
    synth.add_argument("--words-per-topic", type=int, default=12)
    synth.add_argument("--triplets", type=int, default=512)
    synth.add_argument("--pairs", type=int, default=500)
    synth.add_argument("--labeled", type=int, default=300)
    synth.add_argument("--sts-test-fraction", type=float, default=0.2)
    synth.add_argument("--seed", type=int)
    synth.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE
    except (InputError, CheckpointError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    except (SembedError, OSError) as exc:
        _err(str(exc))
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
