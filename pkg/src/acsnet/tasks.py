"""Synthetic corpora with ASR-like structure, plus the label error rate.

Each vocabulary label owns a fixed prototype vector; an utterance renders
its label sequence as consecutive runs of noisy copies of the prototypes,
with per-label run lengths drawn uniformly from a configured range. True
run boundaries are stored for diagnostics only; training never sees them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .decoder import SPECIALS, Vocab
from .errors import ConfigError, ContractError

SPLITS = ("train", "dev", "test")


@dataclass(frozen=True)
class TaskConfig:
    vocab_size: int = 8            # labels, excluding the special tokens
    input_dim: int = 8
    frames_per_label: tuple[int, int] = (4, 8)
    noise_std: float = 0.1
    labels_per_utt: tuple[int, int] = (3, 8)
    n_train: int = 2000
    n_dev: int = 200
    n_test: int = 200
    bigram: bool = False
    max_frames: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ConfigError("need at least 2 labels")
        if self.frames_per_label[0] < 1 or \
                self.frames_per_label[0] > self.frames_per_label[1]:
            raise ConfigError("bad frames-per-label range")
        if self.labels_per_utt[0] < 1 or \
                self.labels_per_utt[0] > self.labels_per_utt[1]:
            raise ConfigError("bad labels-per-utterance range")
        if self.noise_std < 0:
            raise ConfigError("noise std must be >= 0")
        if self.max_frames < self.frames_per_label[1]:
            raise ConfigError("max_frames below a single label's run")


@dataclass
class CorpusRecord:
    utt_id: str
    frames: np.ndarray        # (T, input_dim)
    labels: list[int]         # vocab ids (specials excluded)
    bounds: list[int]         # cumulative frame count after each label


def label_symbols(vocab_size: int) -> list[str]:
    return [chr(ord("a") + i) if i < 26 else f"u{i}"
            for i in range(vocab_size)]


def make_vocab(cfg: TaskConfig) -> Vocab:
    return Vocab.from_labels(label_symbols(cfg.vocab_size))


def _task_rng(cfg: TaskConfig, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((cfg.seed,) + key))


def prototypes(cfg: TaskConfig) -> np.ndarray:
    """(vocab_size, input_dim) label prototype vectors."""
    rng = _task_rng(cfg, 1)
    return rng.uniform(-1.0, 1.0, size=(cfg.vocab_size, cfg.input_dim))


def successor_map(cfg: TaskConfig) -> np.ndarray:
    """Deterministic bigram chain: label v is always followed by succ[v]."""
    rng = _task_rng(cfg, 2)
    return rng.permutation(cfg.vocab_size)


def _render(cfg: TaskConfig, protos: np.ndarray, succ: np.ndarray,
            split_idx: int, utt_idx: int, attempt: int) -> CorpusRecord:
    rng = _task_rng(cfg, 3, split_idx, utt_idx, attempt)
    n_labels = int(rng.integers(cfg.labels_per_utt[0],
                                cfg.labels_per_utt[1] + 1))
    if cfg.bigram:
        labels = [int(rng.integers(cfg.vocab_size))]
        while len(labels) < n_labels:
            labels.append(int(succ[labels[-1]]))
    else:
        labels = [int(v) for v in rng.integers(cfg.vocab_size,
                                               size=n_labels)]
    runs = [int(rng.integers(cfg.frames_per_label[0],
                             cfg.frames_per_label[1] + 1))
            for _ in labels]
    frames = np.concatenate([
        protos[v] + cfg.noise_std * rng.standard_normal((k, cfg.input_dim))
        for v, k in zip(labels, runs)])
    bounds = list(np.cumsum(runs).astype(int))
    n_specials = len(SPECIALS)
    return CorpusRecord(f"{SPLITS[split_idx]}-{utt_idx:05d}", frames,
                        [v + n_specials for v in labels], bounds)


def generate_corpus(cfg: TaskConfig
                    ) -> tuple[dict[str, list[CorpusRecord]], Vocab, dict]:
    """Build disjoint train/dev/test splits; utterances longer than
    max_frames are discarded and regenerated with a fresh sub-seed.

    Returns (splits, vocab, stats) where stats counts the regenerations.
    """
    protos = prototypes(cfg)
    succ = successor_map(cfg)
    sizes = (cfg.n_train, cfg.n_dev, cfg.n_test)
    splits: dict[str, list[CorpusRecord]] = {}
    discarded = {s: 0 for s in SPLITS}
    for split_idx, (split, n) in enumerate(zip(SPLITS, sizes)):
        records = []
        for utt_idx in range(n):
            attempt = 0
            while True:
                rec = _render(cfg, protos, succ, split_idx, utt_idx, attempt)
                if rec.frames.shape[0] <= cfg.max_frames:
                    break
                discarded[split] += 1
                attempt += 1
            records.append(rec)
        splits[split] = records
    return splits, make_vocab(cfg), {"discarded": discarded}


# -- corpus files (JSON lines) -------------------------------------------------

def write_corpus(records: list[CorpusRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps({
                "id": r.utt_id,
                "frames": [[float(x) for x in row] for row in r.frames],
                "labels": list(r.labels),
                "bounds": list(r.bounds),
            }) + "\n")


def read_corpus(path) -> list[CorpusRecord]:
    records = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            obj = json.loads(line)
            records.append(CorpusRecord(
                obj["id"],
                np.asarray(obj["frames"], dtype=np.float64),
                [int(v) for v in obj["labels"]],
                [int(b) for b in obj.get("bounds", [])]))
    return records


# -- metric -------------------------------------------------------------------

def edit_distance(ref, hyp) -> int:
    """Levenshtein distance (substitutions + insertions + deletions)."""
    n, m = len(ref), len(hyp)
    prev = list(range(m + 1))
    for i in range(1, n + 1):
        cur = [i] + [0] * m
        for j in range(1, m + 1):
            sub = prev[j - 1] + (ref[i - 1] != hyp[j - 1])
            cur[j] = min(sub, prev[j] + 1, cur[j - 1] + 1)
        prev = cur
    return prev[m]


def label_error_rate(refs: list[list], hyps: list[list]) -> float:
    """Total edit distance over total reference length."""
    if not refs:
        raise ContractError("empty reference set")
    if len(refs) != len(hyps):
        raise ContractError(f"{len(refs)} references vs {len(hyps)} "
                            "hypotheses")
    total_ref = sum(len(r) for r in refs)
    if total_ref == 0:
        raise ContractError("references contain no labels")
    dist = sum(edit_distance(r, h) for r, h in zip(refs, hyps))
    return dist / total_ref
