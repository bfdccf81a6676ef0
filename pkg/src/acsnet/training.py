"""Teacher-forced training with length-matched halting segmentation.

The halting scan yields an activation-dependent segment count, but the
cross-entropy loss needs exactly one prediction per ground-truth label.
During training the activations are therefore rescaled so their total
mass equals the target length L, and the scan is forced to exactly L
segments: a segment also closes when only just enough steps remain for
the outstanding segments, and the final segment always runs to the last
step. Inference never applies any of this (L is unknown there).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .decoder import PAD, SOS, decode_step, window_contexts, zero_state
from .errors import ConfigError, ContractError, NumericError
from .halting import pool_segment, segment
from .lm import lm_step
from .lm import zero_state as lm_zero_state
from .model import LmModel, Model
from .numerics import (
    AdamState,
    ParamStore,
    Tensor,
    adam_step,
    clamp_max,
    clamp_min,
    clip_global_norm,
    concat,
    global_grad_norm,
    no_grad,
    reciprocal,
    reshape,
    take,
    tsum,
)
from .search import greedy_decode
from .tasks import CorpusRecord, label_error_rate

# Scaled activations are clamped below this to keep them inside (0, 1);
# forced remainders are clamped above it to stay positive.
DELTA = 1e-6


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    lr: float = 1e-3
    lr_decay: float = 0.95
    weight_decay: float = 0.0
    clip_first: float = 2.0
    clip_rest: float = 1.0
    clip_switch_epoch: int = 20
    batch_size: int = 1
    patience: int = 5
    scale_activations: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.lr <= 0 or self.lr_decay <= 0:
            raise ConfigError("learning rate and decay must be positive")
        if self.clip_first <= 0 or self.clip_rest <= 0:
            raise ConfigError("clip values must be positive")
        if self.batch_size < 1 or self.patience < 1:
            raise ConfigError("batch size and patience must be >= 1")

    def clip_for_epoch(self, epoch: int) -> float:
        return (self.clip_first if epoch <= self.clip_switch_epoch
                else self.clip_rest)

    def lr_for_epoch(self, epoch: int) -> float:
        return self.lr * self.lr_decay ** (epoch - 1)


def scale_activations_to_length(a: Tensor, L: int,
                                delta: float = DELTA) -> Tensor:
    """Rescale activations so their total mass equals L, clamped into
    (0, 1 - delta). Differentiable through both the values and the sum."""
    if L < 1:
        raise ContractError(f"target length must be >= 1, got {L}")
    total = float(a.data.sum())
    if not total > 0:
        raise NumericError("activation mass is zero; cannot scale")
    factor = reciprocal(tsum(a)) * float(L)
    return clamp_max(a * factor, 1.0 - delta)


def forced_boundaries(a: np.ndarray, epsilon: float, L: int) -> list[int]:
    """Segment end indices for exactly L segments over T' >= L steps.

    The usual threshold close applies; additionally a segment closes when
    deferring would leave fewer steps than outstanding segments, and the
    final segment absorbs everything to the last step.
    """
    T = len(a)
    if T < L:
        raise ContractError(
            f"cannot fit {L} segments into {T} encoder steps; the "
            "utterance is too short for its label sequence")
    ends: list[int] = []
    prior = 0.0
    k = 0
    for j in range(T):
        if k == L - 1:
            break
        if prior + a[j] >= 1.0 - epsilon or T - 1 - j == L - 1 - k:
            ends.append(j)
            k += 1
            prior = 0.0
        else:
            prior += a[j]
    ends.append(T - 1)
    return ends


def _segment_probs(a: Tensor, start: int, end: int,
                   delta: float = DELTA) -> Tensor:
    """Halting probabilities for one segment of the scaled activations:
    earlier steps keep their activation, the closer takes the remainder."""
    if end == start:
        return Tensor(np.ones(1))
    earlier = take(a, slice(start, end))
    rem = clamp_min(1.0 - tsum(earlier), delta)
    return concat([earlier, reshape(rem, (1,))])


def sequence_loss(logps: list[Tensor], targets: list[int]) -> Tensor:
    """Mean negative log-probability of the targets; PAD positions are
    excluded from both the sum and the denominator."""
    if len(logps) != len(targets):
        raise ContractError(
            f"{len(logps)} predictions for {len(targets)} targets "
            "(length matching failed upstream)")
    acc = None
    denom = 0
    for logp, y in zip(logps, targets):
        if y == PAD:
            continue
        term = take(logp, y)
        acc = term if acc is None else acc + term
        denom += 1
    if acc is None:
        raise ContractError("no non-padding targets to score")
    return acc * (-1.0 / denom)


def utterance_loss(model: Model, frames: np.ndarray, labels: list[int],
                   scale: bool = True) -> tuple[Tensor, dict]:
    """Full teacher-forced pipeline for one utterance; returns the loss
    and segmentation bookkeeping for the epoch report."""
    L = len(labels)
    if L < 1:
        raise ContractError("utterance has no labels")
    eps = model.cfg.halting.epsilon
    w = model.cfg.decoder.window
    states = model.encode(frames)
    acts = model.activations(states)
    if scale:
        acts = scale_activations_to_length(acts, L)
    raw_count = len(segment(acts.data, eps, flush=True).segments)
    ends = forced_boundaries(acts.data, eps, L)
    contexts = []
    start = 0
    for end in ends:
        probs = _segment_probs(acts, start, end)
        contexts.append(pool_segment(states, probs, start, end))
        start = end + 1
    assert len(contexts) == L
    state = zero_state(model.cfg.decoder)
    y_prev = SOS
    logps = []
    for i in range(L):
        state, logp = decode_step(model.params, model.cfg.decoder, state,
                                  y_prev, window_contexts(contexts, i, w))
        logps.append(logp)
        y_prev = labels[i]
    loss = sequence_loss(logps, labels)
    return loss, {"raw_count": raw_count, "target_len": L}


@dataclass
class EpochStats:
    epoch: int
    lr: float
    clip: float
    train_loss: float
    dev_loss: float
    dev_ler: float
    grad_norm_mean: float
    grad_norm_max: float
    seg_mismatch_mean: float
    seg_exact_frac: float


def evaluate_loss(model: Model, records: list[CorpusRecord],
                  scale: bool = True) -> float:
    with no_grad():
        losses = [utterance_loss(model, r.frames, r.labels, scale)[0].item()
                  for r in records]
    return float(np.mean(losses))


def evaluate_ler(model: Model, records: list[CorpusRecord]) -> float:
    hyps = [list(greedy_decode(model, r.frames).best.ids) for r in records]
    return label_error_rate([r.labels for r in records], hyps)


def _apply_weight_decay(params: ParamStore, wd: float) -> None:
    for _, p in params.items():
        g = wd * p.data
        if p.grad is None:
            p.grad = g
        else:
            p.grad += g


def train(model: Model, train_recs: list[CorpusRecord],
          dev_recs: list[CorpusRecord], cfg: TrainConfig,
          log=None) -> tuple[list[EpochStats], dict[str, np.ndarray]]:
    """Train to early stopping; restores and returns the best (dev loss)
    parameter values alongside the per-epoch report."""
    if not train_recs or not dev_recs:
        raise ContractError("training needs nonempty train and dev sets")
    adam = AdamState(lr=cfg.lr)
    best_loss = np.inf
    best_values = model.params.copy_values()
    bad_epochs = 0
    report: list[EpochStats] = []
    for epoch in range(1, cfg.epochs + 1):
        adam.lr = cfg.lr_for_epoch(epoch)
        clip = cfg.clip_for_epoch(epoch)
        rng = np.random.default_rng(
            np.random.SeedSequence((cfg.seed, 77, epoch)))
        order = rng.permutation(len(train_recs))
        losses = []
        norms = []
        mismatches = []
        for lo in range(0, len(order), cfg.batch_size):
            batch = order[lo:lo + cfg.batch_size]
            model.params.zero_grad()
            for idx in batch:
                rec = train_recs[idx]
                loss, info = utterance_loss(model, rec.frames, rec.labels,
                                            cfg.scale_activations)
                if not np.isfinite(loss.data):
                    raise NumericError(
                        f"training diverged: non-finite loss at epoch "
                        f"{epoch}, utterance {rec.utt_id}")
                (loss * (1.0 / len(batch))).backward()
                losses.append(loss.item())
                mismatches.append(info["raw_count"] - info["target_len"])
            if cfg.weight_decay > 0:
                _apply_weight_decay(model.params, cfg.weight_decay)
            norms.append(global_grad_norm(model.params))
            clip_global_norm(model.params, clip)
            adam_step(model.params, adam)
        dev_loss = evaluate_loss(model, dev_recs, cfg.scale_activations)
        if not np.isfinite(dev_loss):
            raise NumericError(f"training diverged: non-finite dev loss at "
                               f"epoch {epoch}")
        dev_ler = evaluate_ler(model, dev_recs)
        mis = np.abs(mismatches)
        stats = EpochStats(
            epoch, adam.lr, clip, float(np.mean(losses)), dev_loss, dev_ler,
            float(np.mean(norms)), float(np.max(norms)), float(mis.mean()),
            float((mis == 0).mean()))
        report.append(stats)
        if log is not None:
            log(stats)
        if dev_loss < best_loss:
            best_loss = dev_loss
            best_values = model.params.copy_values()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                break
    model.params.load_values(best_values)
    return report, best_values


def write_report(report: list[EpochStats], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for row in report:
            f.write(json.dumps(asdict(row)) + "\n")


# -- language model training ---------------------------------------------------

def lm_sequence_loss(lm: LmModel, seq: list[int], eos: int) -> Tensor:
    """Next-symbol cross-entropy over [SOS] + seq -> seq + [EOS]."""
    state = lm_zero_state(lm.cfg)
    inputs = [SOS] + list(seq)
    targets = list(seq) + [eos]
    logps = []
    for y in inputs:
        state, logp = lm_step(lm.params, lm.cfg, state, y)
        logps.append(logp)
    return sequence_loss(logps, targets)


def train_lm(lm: LmModel, train_seqs: list[list[int]],
             dev_seqs: list[list[int]], cfg: TrainConfig, eos: int = 3,
             log=None) -> list[EpochStats]:
    """Train the LM on label text only; early stop on dev loss."""
    if not train_seqs or not dev_seqs:
        raise ContractError("LM training needs nonempty train and dev sets")
    adam = AdamState(lr=cfg.lr)
    best_loss = np.inf
    best_values = lm.params.copy_values()
    bad_epochs = 0
    report: list[EpochStats] = []
    for epoch in range(1, cfg.epochs + 1):
        adam.lr = cfg.lr_for_epoch(epoch)
        clip = cfg.clip_for_epoch(epoch)
        rng = np.random.default_rng(
            np.random.SeedSequence((cfg.seed, 78, epoch)))
        order = rng.permutation(len(train_seqs))
        losses = []
        norms = []
        for lo in range(0, len(order), cfg.batch_size):
            batch = order[lo:lo + cfg.batch_size]
            lm.params.zero_grad()
            for idx in batch:
                loss = lm_sequence_loss(lm, train_seqs[idx], eos)
                if not np.isfinite(loss.data):
                    raise NumericError(f"LM training diverged at epoch "
                                       f"{epoch}")
                (loss * (1.0 / len(batch))).backward()
                losses.append(loss.item())
            norms.append(global_grad_norm(lm.params))
            clip_global_norm(lm.params, clip)
            adam_step(lm.params, adam)
        with no_grad():
            dev_loss = float(np.mean([lm_sequence_loss(lm, s, eos).item()
                                      for s in dev_seqs]))
        stats = EpochStats(epoch, adam.lr, clip, float(np.mean(losses)),
                           dev_loss, float("nan"), float(np.mean(norms)),
                           float(np.max(norms)), 0.0, 1.0)
        report.append(stats)
        if log is not None:
            log(stats)
        if dev_loss < best_loss:
            best_loss = dev_loss
            best_values = lm.params.copy_values()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                break
    lm.params.load_values(best_values)
    return report
