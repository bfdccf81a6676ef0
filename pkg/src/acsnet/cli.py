"""Command-line entry points for reproducible experiments.

Every command reads an optional flat `key = value` config file, applies
`--key value` overrides, and echoes the full effective configuration
next to its outputs. All randomness flows from the seeds in the config,
so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import kernels
from .bench import run_benchmarks
from .decoder import DecoderConfig, Vocab
from .encoder import EncoderConfig
from .errors import ConfigError, ContractError, NumericError, StateError
from .halting import HaltingConfig
from .lm import read_text_corpus, write_text_corpus
from .model import (
    LmConfig,
    ModelConfig,
    build_lm,
    build_model,
    load_lm,
    load_model,
    save_lm,
    save_model,
)
from .numerics import load_checkpoint
from .search import (
    BeamConfig,
    beam_decode,
    read_transcripts,
    streaming_decode,
    write_transcripts,
)
from .tasks import (
    SPLITS,
    TaskConfig,
    generate_corpus,
    label_error_rate,
    read_corpus,
    write_corpus,
)
from .training import TrainConfig, train, train_lm, write_report
from .viz import alignment_svg, alignment_table

# name -> (type, default, help); bool options parse "true/false/1/0".
OPTIONS: dict[str, tuple[type, object, str]] = {
    # task
    "vocab_size": (int, 8, "labels in the vocabulary (specials excluded)"),
    "input_dim": (int, 8, "frame feature dimension"),
    "frames_min": (int, 4, "min frames per label"),
    "frames_max": (int, 8, "max frames per label"),
    "noise_std": (float, 0.1, "frame noise standard deviation"),
    "labels_min": (int, 3, "min labels per utterance"),
    "labels_max": (int, 8, "max labels per utterance"),
    "n_train": (int, 2000, "training utterances"),
    "n_dev": (int, 200, "development utterances"),
    "n_test": (int, 200, "test utterances"),
    "bigram": (bool, False, "deterministic-successor label sequences"),
    "max_frames": (int, 1000, "drop and regenerate longer utterances"),
    "data_seed": (int, 0, "corpus master seed"),
    # model
    "enc_layers": (int, 3, "encoder layers"),
    "enc_units": (int, 32, "encoder units per layer (per direction)"),
    "enc_downsample": (str, "011", "per-layer downsample mask, e.g. 011"),
    "enc_bidirectional": (bool, False, "bidirectional encoder (offline)"),
    "halt_epsilon": (float, 0.01, "halting threshold offset"),
    "halt_kernel_width": (int, 3, "halting conv window (odd)"),
    "halt_channels": (int, 16, "halting conv channels"),
    "dec_units": (int, 32, "decoder units"),
    "dec_embed": (int, 16, "symbol embedding dimension"),
    "window": (int, 0, "bidirectional context window w"),
    "model_seed": (int, 0, "parameter init seed"),
    # training
    "epochs": (int, 30, "max training epochs"),
    "lr": (float, 1e-3, "Adam learning rate"),
    "lr_decay": (float, 0.95, "per-epoch exponential learning-rate decay"),
    "weight_decay": (float, 0.0, "L2 weight decay (0 = off)"),
    "clip_first": (float, 2.0, "gradient clip norm before the switch"),
    "clip_rest": (float, 1.0, "gradient clip norm after the switch"),
    "clip_switch": (int, 20, "epoch after which the clip norm switches"),
    "batch_size": (int, 1, "utterances per optimizer step"),
    "patience": (int, 5, "early-stopping patience (epochs)"),
    "scale_activations": (bool, True, "scale halting mass to target length"),
    "train_seed": (int, 0, "training shuffle seed"),
}


def _parse_value(name: str, raw: str):
    typ = OPTIONS[name][0]
    if typ is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    try:
        return typ(raw)
    except ValueError:
        raise ConfigError(f"{name}: expected {typ.__name__}, got {raw!r}") \
            from None


def load_config_file(path) -> dict:
    """Flat `key = value` lines; # starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in OPTIONS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _parse_value(key, raw)
    return values


def effective_config(args) -> dict:
    cfg = {name: default for name, (_, default, _) in OPTIONS.items()}
    if getattr(args, "config", None):
        cfg.update(load_config_file(args.config))
    for name in OPTIONS:
        v = getattr(args, name, None)
        if v is not None:
            cfg[name] = v
    return cfg


def echo_config(cfg: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for k in sorted(cfg):
            f.write(f"{k} = {cfg[k]}\n")


def _task_config(cfg: dict) -> TaskConfig:
    return TaskConfig(
        vocab_size=cfg["vocab_size"], input_dim=cfg["input_dim"],
        frames_per_label=(cfg["frames_min"], cfg["frames_max"]),
        noise_std=cfg["noise_std"],
        labels_per_utt=(cfg["labels_min"], cfg["labels_max"]),
        n_train=cfg["n_train"], n_dev=cfg["n_dev"], n_test=cfg["n_test"],
        bigram=cfg["bigram"], max_frames=cfg["max_frames"],
        seed=cfg["data_seed"])


def _model_config(cfg: dict, vocab_size: int) -> ModelConfig:
    mask = tuple(c == "1" for c in cfg["enc_downsample"])
    enc = EncoderConfig(input_dim=cfg["input_dim"], layers=cfg["enc_layers"],
                        units=cfg["enc_units"], downsample=mask,
                        bidirectional=cfg["enc_bidirectional"])
    halt = HaltingConfig(epsilon=cfg["halt_epsilon"],
                         kernel_width=cfg["halt_kernel_width"],
                         channels=cfg["halt_channels"])
    dec = DecoderConfig(vocab_size=vocab_size, context_dim=enc.output_dim,
                        units=cfg["dec_units"], embed_dim=cfg["dec_embed"],
                        window=cfg["window"])
    return ModelConfig(enc, halt, dec)


def _train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        epochs=cfg["epochs"], lr=cfg["lr"], lr_decay=cfg["lr_decay"],
        weight_decay=cfg["weight_decay"], clip_first=cfg["clip_first"],
        clip_rest=cfg["clip_rest"], clip_switch_epoch=cfg["clip_switch"],
        batch_size=cfg["batch_size"], patience=cfg["patience"],
        scale_activations=cfg["scale_activations"], seed=cfg["train_seed"])


def _ensure_outdir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") \
            from None
    return out


def _check_corpus_vocab(records, vocab: Vocab, path) -> None:
    limit = len(vocab)
    for r in records:
        for v in r.labels:
            if not 4 <= v < limit:
                raise ConfigError(
                    f"{path}: utterance {r.utt_id} has label id {v} outside "
                    f"the vocabulary (size {limit}); corpus/vocab mismatch")


# -- commands -------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    cfg = effective_config(args)
    out = _ensure_outdir(args.out)
    splits, vocab, stats = generate_corpus(_task_config(cfg))
    vocab.save(out / "vocab.txt")
    for split in SPLITS:
        write_corpus(splits[split], out / f"{split}.jsonl")
    for split in ("train", "dev"):
        write_text_corpus([r.labels for r in splits[split]], vocab,
                          out / f"lm_{split}.txt")
    echo_config(cfg, out / "config.echo.txt")
    n_frames = {s: sum(r.frames.shape[0] for r in splits[s]) for s in SPLITS}
    for split in SPLITS:
        print(f"{split}: {len(splits[split])} utterances, "
              f"{n_frames[split]} frames "
              f"({stats['discarded'][split]} regenerated over max_frames)")
    print(f"vocabulary: {len(vocab)} symbols (incl. 4 specials) "
          f"-> {out / 'vocab.txt'}")
    return 0


def _load_split(data_dir, split) -> list:
    path = Path(data_dir) / f"{split}.jsonl"
    if not path.exists():
        raise ConfigError(f"missing corpus file {path}")
    return read_corpus(path)


def cmd_train(args) -> int:
    cfg = effective_config(args)
    out = _ensure_outdir(args.out)
    vocab = Vocab.load(Path(args.data) / "vocab.txt")
    train_recs = _load_split(args.data, "train")
    dev_recs = _load_split(args.data, "dev")
    _check_corpus_vocab(train_recs, vocab, "train.jsonl")
    _check_corpus_vocab(dev_recs, vocab, "dev.jsonl")
    model = build_model(_model_config(cfg, len(vocab)), seed=cfg["model_seed"])
    if args.resume:
        model.params.load_values(load_checkpoint(args.resume))
        print(f"resumed parameters from {args.resume}")
    tcfg = _train_config(cfg)
    echo_config(cfg, out / "config.echo.txt")

    def log(row):
        print(f"epoch {row.epoch:3d}  lr {row.lr:.5f}  clip {row.clip:.1f}  "
              f"train {row.train_loss:.4f}  dev {row.dev_loss:.4f}  "
              f"dev LER {row.dev_ler:.4f}")

    report, _ = train(model, train_recs, dev_recs, tcfg, log=log)
    save_model(model, out / "model.ckpt")
    write_report(report, out / "report.jsonl")
    print(f"best dev loss {min(r.dev_loss for r in report):.4f} after "
          f"{len(report)} epochs -> {out / 'model.ckpt'}")
    return 0


def cmd_train_lm(args) -> int:
    cfg = effective_config(args)
    out = _ensure_outdir(args.out)
    vocab = Vocab.load(Path(args.data) / "vocab.txt")
    text = args.text or Path(args.data) / "lm_train.txt"
    dev_text = Path(args.data) / "lm_dev.txt"
    train_seqs = read_text_corpus(text, vocab)
    dev_seqs = (read_text_corpus(dev_text, vocab) if dev_text.exists()
                else train_seqs[: max(1, len(train_seqs) // 10)])
    lm = build_lm(LmConfig(vocab_size=len(vocab), units=cfg["dec_units"],
                           embed_dim=cfg["dec_embed"]),
                  seed=cfg["model_seed"])
    echo_config(cfg, out / "config.echo.txt")
    report = train_lm(lm, train_seqs, dev_seqs, _train_config(cfg))
    save_lm(lm, out / "lm.ckpt")
    write_report(report, out / "report.jsonl")
    print(f"LM dev loss {min(r.dev_loss for r in report):.4f} after "
          f"{len(report)} epochs -> {out / 'lm.ckpt'}")
    return 0


def cmd_decode(args) -> int:
    model = load_model(args.ckpt)
    if args.online and model.cfg.encoder.bidirectional:
        raise ConfigError("--online requires a unidirectional encoder "
                          "checkpoint (this one is bidirectional)")
    lm = load_lm(args.lm) if args.lm else None
    if lm is not None and lm.cfg.vocab_size != model.cfg.decoder.vocab_size:
        raise ConfigError("LM and model vocabulary sizes differ")
    if args.gamma > 0 and lm is None:
        raise ConfigError("--gamma > 0 needs --lm")
    vocab = Vocab.load(args.vocab) if args.vocab else None
    if vocab is not None and len(vocab) != model.cfg.decoder.vocab_size:
        raise ConfigError("vocab file size does not match the checkpoint")
    records = read_corpus(args.corpus)
    cfg = BeamConfig(width=args.beam, nbest=args.nbest, gamma=args.gamma,
                     window=args.window)
    rows = []
    for rec in records:
        if args.online:
            result, _ = streaming_decode(model, rec.frames, cfg, lm=lm)
        else:
            result = beam_decode(model, rec.frames, cfg, lm=lm)
        rows.append((rec.utt_id, result.hypotheses))
    write_transcripts(args.out, rows, vocab=vocab)
    mode = "online" if args.online else "offline"
    echo = Path(str(args.out) + ".config.txt")
    echo_config({"ckpt": args.ckpt, "corpus": args.corpus, "beam": args.beam,
                 "nbest": args.nbest, "gamma": args.gamma,
                 "window": args.window if args.window is not None
                 else model.cfg.decoder.window,
                 "mode": mode, "lm": args.lm or ""}, echo)
    print(f"decoded {len(rows)} utterances ({mode}, beam {args.beam}, "
          f"gamma {args.gamma}) -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    records = read_corpus(args.refs)
    vocab = Vocab.load(args.vocab)
    hyps = read_transcripts(args.hyp)
    missing = [r.utt_id for r in records if r.utt_id not in hyps]
    if missing:
        print("missing hypotheses for utterances:", file=sys.stderr)
        for utt in missing:
            print(f"  {utt}", file=sys.stderr)
        return 1
    refs_syms = [[vocab.symbol(i) for i in r.labels] for r in records]
    hyp_syms = [hyps[r.utt_id] for r in records]
    per_utt = [label_error_rate([r], [h]) if r else float("nan")
               for r, h in zip(refs_syms, hyp_syms)]
    rate = label_error_rate(refs_syms, hyp_syms)
    if args.per_utt:
        for rec, utt_rate in zip(records, per_utt):
            print(f"{rec.utt_id}\t{utt_rate:.4f}")
    print(f"LER {rate:.4f} over {len(records)} utterances "
          f"({sum(len(r) for r in refs_syms)} reference labels)")
    return 0


def cmd_inspect_alignment(args) -> int:
    from .search import decode_contexts

    model = load_model(args.ckpt)
    records = {r.utt_id: r for r in read_corpus(args.corpus)}
    if args.utt not in records:
        raise ContractError(f"utterance {args.utt!r} not in {args.corpus}")
    rec = records[args.utt]
    trace, ctx = decode_contexts(model, rec.frames)
    print(f"utterance {args.utt}: {rec.frames.shape[0]} frames -> "
          f"{len(trace.activations)} encoder steps, "
          f"{len(trace.segments)} segments")
    print(alignment_table(trace))
    if rec.bounds:
        from .viz import boundary_alignment

        hits, total = boundary_alignment(trace, rec.bounds,
                                         model.cfg.encoder.factor)
        print(f"boundary diagnostics: {hits}/{total} inferred ends within "
              "±1 encoder step of the true label boundaries")
    if args.svg:
        svg = alignment_svg(trace, 1.0 - model.cfg.halting.epsilon)
        Path(args.svg).write_text(svg, encoding="utf-8")
        print(f"wrote {args.svg}")
    return 0


def cmd_bench(args) -> int:
    print(run_benchmarks(repeats=args.repeats))
    return 0


# -- argument plumbing -----------------------------------------------------------

def _add_config_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    group = p.add_argument_group("config overrides")
    for name, (_, default, help_txt) in OPTIONS.items():
        group.add_argument(f"--{name}", type=str, default=None, metavar="V",
                           help=f"{help_txt} (default {default})")


def _coerce_overrides(args) -> None:
    for name in OPTIONS:
        raw = getattr(args, name, None)
        if raw is not None:
            setattr(args, name, _parse_value(name, raw))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="acsnet",
        description="Adaptive-halting sequence transduction experiments "
                    f"(kernel backend: {kernels.backend_name()})")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate synthetic corpora")
    g.add_argument("--out", required=True, help="output directory")
    _add_config_options(g)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train an ACS model")
    t.add_argument("--data", required=True, help="corpus directory")
    t.add_argument("--out", required=True, help="output directory")
    t.add_argument("--resume", help="checkpoint to resume parameters from")
    _add_config_options(t)
    t.set_defaults(func=cmd_train)

    tl = sub.add_parser("train-lm", help="train the label language model")
    tl.add_argument("--data", required=True, help="corpus directory")
    tl.add_argument("--out", required=True, help="output directory")
    tl.add_argument("--text", help="label text corpus (default "
                                   "<data>/lm_train.txt)")
    _add_config_options(tl)
    tl.set_defaults(func=cmd_train_lm)

    d = sub.add_parser("decode", help="decode a corpus to transcripts")
    d.add_argument("--ckpt", required=True)
    d.add_argument("--corpus", required=True)
    d.add_argument("--out", required=True, help="transcript file")
    d.add_argument("--vocab", help="vocab file (symbols in the output)")
    d.add_argument("--beam", type=int, default=1)
    d.add_argument("--nbest", type=int, default=1)
    d.add_argument("--gamma", type=float, default=0.0)
    d.add_argument("--window", type=int, default=None,
                   help="context window (default: as trained)")
    d.add_argument("--lm", help="LM checkpoint for joint scoring")
    mode = d.add_mutually_exclusive_group()
    mode.add_argument("--online", action="store_true",
                      help="streaming decode (unidirectional only)")
    mode.add_argument("--offline", action="store_true",
                      help="batch decode (default)")
    d.set_defaults(func=cmd_decode)

    e = sub.add_parser("eval", help="score transcripts against references")
    e.add_argument("--refs", required=True, help="reference corpus jsonl")
    e.add_argument("--hyp", required=True, help="transcript file")
    e.add_argument("--vocab", required=True)
    e.add_argument("--per-utt", action="store_true", dest="per_utt")
    e.set_defaults(func=cmd_eval)

    i = sub.add_parser("inspect-alignment",
                       help="dump the halting trace of one utterance")
    i.add_argument("--ckpt", required=True)
    i.add_argument("--corpus", required=True)
    i.add_argument("--utt", required=True)
    i.add_argument("--svg", help="write the activation curve as SVG")
    i.set_defaults(func=cmd_inspect_alignment)

    b = sub.add_parser("bench", help="benchmark kernel backends")
    b.add_argument("--repeats", type=int, default=5)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _coerce_overrides(args)
        return args.func(args)
    except (ConfigError, ContractError, StateError, NumericError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
