"""``linecomp`` command-line interface.

Subcommands: synth, prep, train, eval, complete, bench, parse.
Exit codes: 0 success, 1 user error, 2 data error, 3 training divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import random
import sys
from pathlib import Path

import torch

from . import __version__
from .asdl import default_grammar, format_actions, load_grammar, to_sexpr
from .codecs import MODES, build_codec, load_codec, save_codec
from .decode import bench_inference, complete_line, format_bench_table
from .errors import Diverged, LexError, LinecompError, ParseError
from .metrics import evaluate, format_table
from .neural import (
    ARCHS,
    ModelConfig,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .pycorpus import (
    LineCategory,
    detokenize,
    extract_samples,
    format_line,
    corpus_stats,
    parse_line,
    read_manifest,
    tokenize_file,
    INDENT_TOKEN,
    flatten,
)
from .pyparse import line_to_actions, parse_statement

log = logging.getLogger("linecomp")

EXIT_OK, EXIT_USER, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3
DEFAULT_SEED = 1234


class UserError(Exception):
    """Bad flags, missing paths or inconsistent artifacts."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USER, f"{self.prog}: error: {message}\n")


def _sha256(*chunks: bytes) -> str:
    h = hashlib.sha256()
    for c in chunks:
        h.update(hashlib.sha256(c).digest())
    return h.hexdigest()


def _dump_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _config_of(args, keys) -> dict:
    out = {}
    for k in keys:
        v = getattr(args, k, None)
        out[k] = list(v) if isinstance(v, (list, tuple)) else v
    return out


# ---------------------------------------------------------------- corpus


def _load_prepared(data_dir):
    d = Path(data_dir)
    corpus_file = d / "corpus.jsonl"
    if not corpus_file.exists():
        raise UserError(f"{d} is not a prepared data directory (run `linecomp prep`)")
    files = []
    for raw in corpus_file.read_text(encoding="utf-8").splitlines():
        rec = json.loads(raw)
        files.append((rec["split"], rec["file"], [parse_line(t) for t in rec["lines"]]))
    return files


def _data_hash(data_dir) -> str:
    d = Path(data_dir)
    parts = [(d / "corpus.jsonl").read_bytes()]
    codec_dir = d / "codec"
    for p in sorted(codec_dir.iterdir()):
        parts.append(p.name.encode() + b"\0" + p.read_bytes())
    return _sha256(*parts)


def cmd_synth(args):
    from .synth import generate_corpus, write_corpus

    texts = generate_corpus(args.files, args.seed, distinct_first_lines=not args.shared_first_lines)
    manifest = write_corpus(args.out, texts, args.valid_fraction)
    print(f"wrote {len(texts)} files and {manifest}")
    return EXIT_OK


def cmd_prep(args):
    manifest = Path(args.manifest)
    if not manifest.exists():
        raise UserError(f"manifest {manifest} not found")
    if args.mode == "syntax" and args.grammar and not Path(args.grammar).exists():
        raise UserError(f"grammar {args.grammar} not found")
    grammar_text = Path(args.grammar).read_text(encoding="utf-8") if args.grammar else None
    grammar = load_grammar(grammar_text) if grammar_text else default_grammar()
    records = read_manifest(manifest)
    base = manifest.parent
    raw_inputs = []
    kept = []  # (split, name, lines)
    lex_fail = parse_fail = too_long = 0
    for split, rel in records:
        path = base / rel
        if not path.exists():
            raise UserError(f"manifest entry {rel} does not exist")
        text = path.read_text(encoding="utf-8")
        raw_inputs.append(rel.encode() + b"\0" + text.encode("utf-8"))
        try:
            lines = tokenize_file(text)
        except LexError as exc:
            log.warning("skipping %s: %s", rel, exc)
            lex_fail += 1
            continue
        if not lines:
            continue
        try:
            n_actions = sum(len(ln.indent) + len(line_to_actions(ln, grammar)) for ln in lines) + 1
        except ParseError as exc:
            # Dropped from every mode so the three configurations see the same files.
            log.warning("skipping %s: %s", rel, exc)
            parse_fail += 1
            continue
        if n_actions > args.max_len:
            log.warning("dropping %s: %d actions exceed max length %d", rel, n_actions, args.max_len)
            too_long += 1
            continue
        kept.append([split, rel, lines])
    if not any(s == "train" for s, _, _ in kept):
        raise LinecompError("no usable training files")
    if not any(s == "valid" for s, _, _ in kept):
        train_idx = [i for i, (s, _, _) in enumerate(kept) if s == "train"]
        n_valid = max(1, round(0.1 * len(train_idx))) if len(train_idx) > 1 else 0
        for i in random.Random(args.seed).sample(train_idx, n_valid):
            kept[i][0] = "valid"
    train_files = [lines for s, _, lines in kept if s == "train"]
    codec = build_codec(args.mode, train_files, vocab_cap=args.vocab_cap,
                        bpe_merges=args.bpe_merges, grammar=grammar, grammar_text=grammar_text)
    for s, rel, lines in kept:
        n = len(codec.encode_file(lines))
        if n - 1 > args.max_len:
            raise LinecompError(f"{rel}: {n} {args.mode} symbols exceed max length {args.max_len}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "corpus.jsonl", "w", encoding="utf-8") as fh:
        for s, rel, lines in kept:
            fh.write(json.dumps({"split": s, "file": rel, "lines": [format_line(l) for l in lines]},
                                sort_keys=True) + "\n")
    save_codec(codec, out / "codec")
    stats = corpus_stats([lines for _, _, lines in kept], grammar).as_dict()
    counts = {s: sum(1 for k, _, _ in kept if k == s) for s in ("train", "valid", "test")}
    info = {
        "config": _config_of(args, ["manifest", "mode", "vocab_cap", "bpe_merges", "grammar",
                                    "seed", "max_len", "out"]),
        "input_hash": _sha256(*raw_inputs),
        "data_hash": _data_hash(out),
        "splits": counts,
        "skipped": {"lex_errors": lex_fail, "parse_errors": parse_fail, "too_long": too_long},
        "stats": stats,
        "symbols": codec.size,
        "version": __version__,
    }
    _dump_json(out / "prep.json", info)
    print(f"files: train {counts['train']}  valid {counts['valid']}  test {counts['test']}  "
          f"(skipped: {lex_fail} lex, {parse_fail} parse, {too_long} too long)")
    print("| #files | avg lines/file | avg tokens/stmt | avg actions/stmt | symbols |")
    print("|---|---|---|---|---|")
    print(f"| {stats['n_files']} | {stats['avg_lines_per_file']:.2f} | "
          f"{stats['avg_tokens_per_statement']:.2f} | {stats['avg_actions_per_statement']:.2f} | "
          f"{codec.size} |")
    return EXIT_OK


# ------------------------------------------------------------------ train


def cmd_train(args):
    files = _load_prepared(args.data)
    codec = load_codec(Path(args.data) / "codec", args.grammar)
    train_seqs = [codec.encode_file(l) for s, _, l in files if s == "train"]
    valid_seqs = [codec.encode_file(l) for s, _, l in files if s == "valid"]
    overrides = {k: getattr(args, k) for k in ("d_model", "d_embed", "d_ff", "n_heads", "n_layers",
                                                "max_len", "gru_hidden", "dropout_keep")
                 if getattr(args, k) is not None}
    mcfg = ModelConfig(arch=args.arch, vocab_size=codec.size, pad_id=codec.pad_id, **overrides)
    tcfg = TrainConfig(lr=args.lr, batch_size=args.batch_size, epochs=args.epochs,
                       patience=args.patience, seed=args.seed, stop_below=args.stop_below)
    torch.use_deterministic_algorithms(True)

    def report(entry):
        msg = f"epoch {entry['epoch']}: train {entry['train_loss']:.4f}"
        if "valid_loss" in entry:
            msg += f"  valid {entry['valid_loss']:.4f}"
        log.info(msg)

    try:
        model, tlog = train(train_seqs, mcfg, tcfg, valid_seqs or None, callback=report)
    except Diverged:
        raise
    extra = {f"exp.train.{k}": v for k, v in tcfg.to_dict().items()}
    extra.update({
        "exp.mode": codec.mode,
        "exp.arch": args.arch,
        "exp.data": args.data,
        "exp.grammar": args.grammar or "",
        "exp.data_hash": _data_hash(args.data),
        "exp.version": __version__,
        "exp.best_epoch": tlog.best_epoch,
    })
    save_checkpoint(args.checkpoint, model, extra)
    log_path = Path(args.log) if args.log else Path(str(args.checkpoint) + ".log.json")
    _dump_json(log_path, {"config": extra, "epochs": tlog.epochs, "best_epoch": tlog.best_epoch,
                          "best_valid": tlog.best_valid if valid_seqs else None,
                          "stopped_early": tlog.stopped_early})
    final = tlog.epochs[-1]
    print(f"trained {len(tlog.epochs)} epochs; final train loss {final['train_loss']:.4f}"
          + (f"; best valid {tlog.best_valid:.4f} (epoch {tlog.best_epoch})" if valid_seqs else ""))
    return EXIT_OK


# ------------------------------------------------------------ eval / bench


def _open_model(ckpt, data_override=None, grammar=None):
    if not Path(ckpt).exists():
        raise UserError(f"checkpoint {ckpt} not found")
    model, config = load_checkpoint(ckpt)
    data = data_override or config.get("exp.data")
    if not data:
        raise UserError(f"{ckpt} records no data directory; pass --data")
    codec = load_codec(Path(data) / "codec", grammar or config.get("exp.grammar") or None)
    if codec.size != model.cfg.vocab_size:
        raise UserError(f"{ckpt}: model has {model.cfg.vocab_size} symbols, codec in {data} has {codec.size}")
    return model, codec, config, data


def _samples(data, split, limit=None):
    files = _load_prepared(data)
    chosen = [(n, l) for s, n, l in files if s == split]
    if not chosen and split == "test":
        chosen = [(n, l) for s, n, l in files if s == "valid"]
    out = []
    for name, lines in chosen:
        out.extend(extract_samples(lines, file_id=name))
    return out[:limit] if limit else out


def cmd_eval(args):
    reports = {}
    for ckpt in args.checkpoint:
        model, codec, config, data = _open_model(ckpt, args.data, args.grammar)
        samples = _samples(data, args.split, args.limit)
        cfg = {
            "checkpoint": ckpt,
            "checkpoint_hash": _sha256(Path(ckpt).read_bytes()),
            "data": data,
            "data_hash": _data_hash(data),
            "split": args.split,
            "beam": args.beam,
            "max_target_len": args.max_target_len,
            "limit": args.limit,
            "mode": codec.mode,
            "model": {k: v for k, v in sorted(config.items())},
        }
        rep = evaluate(samples, model, codec, args.beam, args.max_target_len, cfg)
        reports[Path(ckpt).stem] = rep
        h = rep.headline()
        print(f"{ckpt}: " + "  ".join(f"{k} {v:.2f}" for k, v in h.items())
              + f"  (n={rep.n_samples}, failures={rep.n_failures})")
    if args.report:
        if len(reports) == 1:
            Path(args.report).write_text(next(iter(reports.values())).to_json(), encoding="utf-8")
        else:
            _dump_json(args.report, {k: r.to_dict() for k, r in reports.items()})
    if args.table:
        table = format_table(reports)
        if args.table == "-":
            print(table)
        else:
            Path(args.table).write_text(table + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_bench(args):
    models, contexts, meta = {}, {}, {}
    for ckpt in args.checkpoint:
        model, codec, config, data = _open_model(ckpt, args.data, args.grammar)
        name = Path(ckpt).stem
        samples = _samples(data, args.split, args.samples)
        ctxs = []
        for s in samples:
            c = codec.encode_context(s.context)
            if len(c) + args.max_target_len <= model.cfg.max_len:
                ctxs.append(c)
        models[name] = (model, codec)
        contexts[name] = ctxs
        meta[name] = {"checkpoint": ckpt, "checkpoint_hash": _sha256(Path(ckpt).read_bytes())}
    results = bench_inference(models, contexts, args.beam, args.max_target_len)
    table = format_bench_table(results)
    print(table)
    if args.report:
        _dump_json(args.report, {"config": {"beam": args.beam, "samples": args.samples,
                                            "max_target_len": args.max_target_len,
                                            "threads": torch.get_num_threads(), "models": meta},
                                 "results": [r.as_dict() for r in results], "table": table})
    return EXIT_OK


# ------------------------------------------------------- complete / parse


def _context_tokens(source_text):
    lines = tokenize_file(source_text) if source_text.strip() else []
    ctx = flatten(lines)
    # The line after a block header is indented one level further.
    if lines and lines[-1].category is LineCategory.CompoundHeader:
        ctx.append(INDENT_TOKEN)
    return lines, ctx


def _candidates(model, codec, source_text, args):
    _, ctx = _context_tokens(source_text)
    ids = codec.encode_context(ctx)
    room = min(args.max_target_len, model.cfg.max_len - len(ids))
    if room <= 0:
        raise LinecompError("context is longer than the model's maximum input length")
    return complete_line(model, codec, ids, args.beam, room), ctx


def _indent_level(ctx):
    level = 0
    for t in ctx:
        if t.text == "<indent>":
            level += 1
        elif t.text == "<dedent>":
            level -= 1
    return level


def cmd_complete(args):
    model, codec, _, _ = _open_model(args.checkpoint, args.data, args.grammar)
    if args.input and args.input != "-":
        p = Path(args.input)
        if not p.exists():
            raise UserError(f"input {p} not found")
        source = p.read_text(encoding="utf-8")
    elif args.interactive:
        source = ""
    else:
        source = sys.stdin.read()
    if not args.interactive:
        cands, _ = _candidates(model, codec, source, args)
        for i, c in enumerate(cands, 1):
            flag = "" if c.finished else "  (unfinished)"
            print(f"{i}. {c.score:9.4f}  {detokenize(c.tokens, source=True)}{flag}")
        return EXIT_OK
    print("Interactive completion: pick a number, type a replacement line, or press Enter to quit.")
    while True:
        try:
            cands, ctx = _candidates(model, codec, source, args)
        except LinecompError as exc:
            print(f"error: {exc}")
            return EXIT_DATA
        for i, c in enumerate(cands, 1):
            print(f"  {i}. {c.score:9.4f}  {detokenize(c.tokens, source=True)}")
        try:
            answer = input("> ")
        except EOFError:
            break
        if not answer.strip():
            break
        if answer.strip().isdigit() and 1 <= int(answer) <= len(cands):
            line = "    " * _indent_level(ctx) + detokenize(cands[int(answer) - 1].tokens, source=True)
        else:
            line = answer
        candidate_source = source + line + "\n"
        try:
            tokenize_file(candidate_source)
        except LexError as exc:
            print(f"error: {exc}")
            continue
        source = candidate_source
        print(source, end="")
    return EXIT_OK


def cmd_parse(args):
    grammar = load_grammar(Path(args.grammar).read_text(encoding="utf-8")) if args.grammar else default_grammar()
    text = sys.stdin.read() if args.input in (None, "-") else Path(args.input).read_text(encoding="utf-8")
    status = EXIT_OK
    for ln in tokenize_file(text):
        try:
            tree = parse_statement(ln, grammar)
        except ParseError as exc:
            print(f"# error on line {ln.source_span[0]}: {exc}")
            status = EXIT_DATA
            continue
        print(to_sexpr(tree))
        if args.actions:
            print("  " + format_actions(line_to_actions(ln, grammar)))
    return status


# ------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="linecomp", description="Full-line code completion toolkit.")
    p.add_argument("--version", action="version", version=f"linecomp {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a synthetic toy corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--files", type=int, default=10)
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--valid-fraction", type=float, default=0.0)
    s.add_argument("--shared-first-lines", action="store_true")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("prep", help="tokenize a corpus and build the symbol vocabulary")
    s.add_argument("manifest")
    s.add_argument("--out", required=True)
    s.add_argument("--mode", choices=MODES, default="token")
    s.add_argument("--vocab-cap", type=int, default=80_000)
    s.add_argument("--bpe-merges", type=int, default=30_000)
    s.add_argument("--grammar")
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--max-len", type=int, default=1500)
    s.set_defaults(func=cmd_prep)

    s = sub.add_parser("train", help="train a language model")
    s.add_argument("--data", required=True)
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--arch", choices=ARCHS, default="transformer")
    s.add_argument("--grammar")
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--epochs", type=int, default=10)
    s.add_argument("--lr", type=float, default=2.5e-4)
    s.add_argument("--batch-size", type=int)
    s.add_argument("--patience", type=int, default=3)
    s.add_argument("--stop-below", type=float)
    s.add_argument("--log")
    for name, typ in (("d-model", int), ("d-embed", int), ("d-ff", int), ("n-heads", int),
                      ("n-layers", int), ("max-len", int), ("gru-hidden", int),
                      ("dropout-keep", float)):
        s.add_argument(f"--{name}", type=typ)
    s.set_defaults(func=cmd_train)

    def decoding(s):
        s.add_argument("--beam", type=int, default=5)
        s.add_argument("--max-target-len", type=int, default=100)
        s.add_argument("--grammar")
        s.add_argument("--data")

    s = sub.add_parser("eval", help="evaluate checkpoints on held-out completions")
    s.add_argument("--checkpoint", required=True, nargs="+")
    s.add_argument("--split", choices=("test", "valid", "train"), default="test")
    s.add_argument("--limit", type=int)
    s.add_argument("--report")
    s.add_argument("--table", help="write a comparison table to this path ('-' for stdout)")
    decoding(s)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("complete", help="complete the next line of a code prefix")
    s.add_argument("input", nargs="?")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--interactive", action="store_true")
    decoding(s)
    s.set_defaults(func=cmd_complete)

    s = sub.add_parser("bench", help="time per-line inference")
    s.add_argument("--checkpoint", required=True, nargs="+")
    s.add_argument("--split", choices=("test", "valid", "train"), default="test")
    s.add_argument("--samples", type=int, default=20)
    s.add_argument("--report")
    decoding(s)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("parse", help="print the AST (and actions) of each logical line")
    s.add_argument("input", nargs="?")
    s.add_argument("--grammar")
    s.add_argument("--actions", action="store_true")
    s.set_defaults(func=cmd_parse)
    return p


def _apply_thread_cap():
    value = os.environ.get("LINECOMP_THREADS")
    if value:
        try:
            n = int(value)
        except ValueError:
            raise UserError(f"LINECOMP_THREADS must be an integer, got {value!r}") from None
        if n < 1:
            raise UserError("LINECOMP_THREADS must be at least 1")
        torch.set_num_threads(n)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        _apply_thread_cap()
        if getattr(args, "beam", 1) < 1:
            raise UserError("--beam must be at least 1")
        return args.func(args)
    except UserError as exc:
        print(f"linecomp: error: {exc}", file=sys.stderr)
        return EXIT_USER
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"linecomp: error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Diverged as exc:
        print(f"linecomp: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (LinecompError, ValueError, UnicodeDecodeError) as exc:
        print(f"linecomp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
