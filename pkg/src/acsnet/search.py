"""Greedy, beam and streaming decoding over alignment-driven output steps.

Halting is purely encoder-side, so every hypothesis in a beam shares the
same segmentation and context sequence; the beam expands synchronously,
one output step per emitted context, and all final hypotheses have equal
length. Scores are per-symbol joint log-probabilities
logp_asr + gamma * logp_lm, summed over the sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decoder import SOS, decode_step, window_contexts, zero_state
from .encoder import StreamingEncoder
from .errors import ConfigError, ContractError
from .halting import (
    ContextSequence,
    HaltingStream,
    HaltingTrace,
    pool_contexts,
    segment,
)
from .lm import lm_step
from .lm import zero_state as lm_zero_state
from .model import LmModel, Model
from .numerics import Tensor, no_grad


@dataclass(frozen=True)
class BeamConfig:
    width: int = 8
    nbest: int = 1
    gamma: float = 0.0
    window: int | None = None  # None: the model's trained window

    def __post_init__(self):
        if self.width < 1:
            raise ConfigError(f"beam width must be >= 1, got {self.width}")
        if not 1 <= self.nbest <= self.width:
            raise ConfigError("nbest must be in [1, width]")
        if self.gamma < 0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")


@dataclass
class Hypothesis:
    ids: tuple[int, ...]
    score: float
    dec_state: Tensor
    lm_state: Tensor | None = None


@dataclass
class DecodeResult:
    hypotheses: list[Hypothesis]   # n-best, scores non-increasing
    trace: HaltingTrace
    contexts: ContextSequence

    @property
    def best(self) -> Hypothesis:
        return self.hypotheses[0]


def _effective_window(model: Model, cfg: BeamConfig) -> int:
    trained = model.cfg.decoder.window
    if cfg.window is None:
        return trained
    if cfg.window > trained:
        raise ConfigError(
            f"decode window {cfg.window} exceeds the window {trained} the "
            "model was trained with")
    return cfg.window


def _expand_step(model: Model, lm: LmModel | None, cfg: BeamConfig,
                 beam: list[Hypothesis], ctx_window: Tensor, width: int,
                 start_id: int) -> list[Hypothesis]:
    """One synchronous beam step over the shared context window."""
    dcfg = model.cfg.decoder
    candidates: list[Hypothesis] = []
    for hyp in beam:
        y_prev = hyp.ids[-1] if hyp.ids else start_id
        state, logp = decode_step(model.params, dcfg, hyp.dec_state, y_prev,
                                  ctx_window)
        joint = logp.data
        lm_state = hyp.lm_state
        if lm is not None:
            lm_state, lm_logp = lm_step(lm.params, lm.cfg, hyp.lm_state,
                                        y_prev)
            if cfg.gamma > 0:
                joint = joint + cfg.gamma * lm_logp.data
        for v in range(dcfg.vocab_size):
            candidates.append(
                Hypothesis(hyp.ids + (v,), hyp.score + float(joint[v]),
                           state, lm_state))
    candidates.sort(key=lambda h: (-h.score, h.ids))
    return candidates[:width]


def _initial_beam(model: Model, lm: LmModel | None) -> list[Hypothesis]:
    return [Hypothesis((), 0.0, zero_state(model.cfg.decoder),
                       lm_zero_state(lm.cfg) if lm is not None else None)]


def decode_contexts(model: Model, frames: np.ndarray
                    ) -> tuple[HaltingTrace, ContextSequence]:
    """Batch encoder + halting pass; pending tails are force-closed so
    every encoder state contributes to exactly one context."""
    with no_grad():
        states = model.encode(frames)
        acts = model.activations(states)
    trace = segment(acts.data, model.cfg.halting.epsilon, flush=True)
    ctx = pool_contexts(states.data, trace,
                        lookahead=model.cfg.halting.lookahead)
    return trace, ctx


def beam_decode(model: Model, frames: np.ndarray, cfg: BeamConfig,
                lm: LmModel | None = None, start_id: int = SOS
                ) -> DecodeResult:
    """Synchronous beam search; returns the n best hypotheses."""
    trace, ctx = decode_contexts(model, frames)
    w_eff = _effective_window(model, cfg)
    w_struct = model.cfg.decoder.window
    contexts = [Tensor(c) for c in ctx.contexts]
    with no_grad():
        beam = _initial_beam(model, lm)
        for i in range(len(contexts)):
            win = window_contexts(contexts, i, w_struct, limit=w_eff)
            beam = _expand_step(model, lm, cfg, beam, win, cfg.width,
                                start_id)
    return DecodeResult(beam[:cfg.nbest], trace, ctx)


def greedy_decode(model: Model, frames: np.ndarray, gamma: float = 0.0,
                  lm: LmModel | None = None, window: int | None = None,
                  start_id: int = SOS) -> DecodeResult:
    """Beam of width one: argmax joint symbol per context, fed back."""
    cfg = BeamConfig(width=1, nbest=1, gamma=gamma, window=window)
    return beam_decode(model, frames, cfg, lm=lm, start_id=start_id)


# -- streaming ----------------------------------------------------------------

@dataclass
class SymbolEmission:
    position: int
    symbol: int
    frame_index: int  # frames consumed when the symbol was committed
    at_flush: bool


class StreamingDecoder:
    """Incremental decoding: frames in, committed symbols out.

    Output step i is decoded as soon as context i + w exists (or at the
    final flush). With width 1 each decoded symbol is committed
    immediately; wider beams commit the longest common prefix of the
    beam and finalize the rest at flush. The final transcript equals the
    batch decode of the same frames bit for bit.
    """

    def __init__(self, model: Model, cfg: BeamConfig,
                 lm: LmModel | None = None, start_id: int = SOS):
        if model.cfg.encoder.bidirectional:
            raise ConfigError("streaming decode requires a unidirectional "
                              "encoder (offline checkpoints are batch-only)")
        self.model = model
        self.cfg = cfg
        self.lm = lm
        self._w_eff = _effective_window(model, cfg)
        self._enc = StreamingEncoder(model.params, model.cfg.encoder)
        self._halt = HaltingStream(model.params, model.cfg.halting,
                                   counters=model.counters)
        self._contexts: list[Tensor] = []
        self._ctx_meta: list = []
        self._start_id = start_id
        self._beam = _initial_beam(model, lm)
        self._next_step = 0
        self._committed = 0
        self._frames = 0
        self._finished = False

    def _advance(self, final: bool) -> list[SymbolEmission]:
        n = len(self._contexts)
        w_struct = self.model.cfg.decoder.window
        out: list[SymbolEmission] = []
        with no_grad():
            while self._next_step < n and (
                    final or self._next_step + self._w_eff < n):
                i = self._next_step
                win = window_contexts(self._contexts, i, w_struct,
                                      limit=self._w_eff)
                self._beam = _expand_step(self.model, self.lm, self.cfg,
                                          self._beam, win, self.cfg.width,
                                          self._start_id)
                self._next_step += 1
                out.extend(self._commit(final))
        return out

    def _commit(self, final: bool) -> list[SymbolEmission]:
        if final:
            agreed = len(self._beam[0].ids)
        else:
            agreed = 0
            first = self._beam[0].ids
            while agreed < len(first) and all(
                    h.ids[agreed] == first[agreed] for h in self._beam):
                agreed += 1
        out = []
        while self._committed < agreed:
            out.append(SymbolEmission(self._committed,
                                      self._beam[0].ids[self._committed],
                                      self._frames, final))
            self._committed += 1
        return out

    def push(self, frame: np.ndarray) -> list[SymbolEmission]:
        if self._finished:
            raise ContractError("push() after finish()")
        self._frames += 1
        for state in self._enc.push(frame):
            for emitted in self._halt.push(state):
                self._contexts.append(Tensor(emitted.context))
                self._ctx_meta.append(emitted)
        return self._advance(final=False)

    def finish(self) -> tuple[DecodeResult, list[SymbolEmission]]:
        """Flush everything; the result matches the batch decode."""
        if self._finished:
            raise ContractError("finish() called twice")
        self._finished = True
        tail_states = self._enc.finish()
        for state in tail_states:
            for emitted in self._halt.push(state):
                self._contexts.append(Tensor(emitted.context))
                self._ctx_meta.append(emitted)
        for emitted in self._halt.finish():
            self._contexts.append(Tensor(emitted.context))
            self._ctx_meta.append(emitted)
        emissions = self._advance(final=True)
        trace = segment(self._halt.activations,
                        self.model.cfg.halting.epsilon, flush=True)
        ctx = ContextSequence(
            (np.stack([c.data for c in self._contexts])
             if self._contexts else np.zeros((0, 0))),
            [m.end for m in self._ctx_meta],
            [m.emit_step for m in self._ctx_meta])
        result = DecodeResult(self._beam[:self.cfg.nbest], trace, ctx)
        return result, emissions


def streaming_decode(model: Model, frames: np.ndarray, cfg: BeamConfig,
                     lm: LmModel | None = None, start_id: int = SOS
                     ) -> tuple[DecodeResult, list[SymbolEmission]]:
    """Feed frames one by one through a StreamingDecoder."""
    dec = StreamingDecoder(model, cfg, lm=lm, start_id=start_id)
    emissions: list[SymbolEmission] = []
    for t in range(frames.shape[0]):
        emissions.extend(dec.push(frames[t]))
    result, tail = dec.finish()
    return result, emissions + tail


def tune_gamma(model: Model, lm: LmModel, dev_recs, cfg: BeamConfig,
               grid: list[float] | None = None) -> tuple[float, dict]:
    """Grid-search the LM weight on a development set by label error
    rate; ties go to the smaller gamma."""
    from .tasks import label_error_rate

    if grid is None:
        grid = [round(0.1 * i, 1) for i in range(11)]
    refs = [r.labels for r in dev_recs]
    scores: dict[float, float] = {}
    for gamma in grid:
        c = BeamConfig(width=cfg.width, nbest=1, gamma=gamma,
                       window=cfg.window)
        hyps = [list(beam_decode(model, r.frames, c, lm=lm).best.ids)
                for r in dev_recs]
        scores[gamma] = label_error_rate(refs, hyps)
    best = min(grid, key=lambda g: (scores[g], g))
    return best, scores


# -- transcript files ---------------------------------------------------------

def write_transcripts(path, rows, vocab=None) -> None:
    """rows: (utt_id, list of DecodeResult hypotheses). Top-1 lines are
    `utt<TAB>symbols<TAB>score`; n-best adds a rank column after the id."""
    with open(path, "w", encoding="utf-8") as f:
        for utt_id, hyps in rows:
            for rank, hyp in enumerate(hyps, start=1):
                syms = " ".join(
                    vocab.symbol(i) if vocab is not None else str(i)
                    for i in hyp.ids)
                if len(hyps) == 1:
                    f.write(f"{utt_id}\t{syms}\t{hyp.score!r}\n")
                else:
                    f.write(f"{utt_id}\t{rank}\t{syms}\t{hyp.score!r}\n")


def read_transcripts(path) -> dict[str, list[str]]:
    """Top-1 symbol sequences by utterance id."""
    out: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) == 4:  # ranked line
                utt_id, rank, syms, _ = parts
                if int(rank) != 1:
                    continue
            elif len(parts) == 3:
                utt_id, syms, _ = parts
            else:
                raise ContractError(f"malformed transcript line: {line!r}")
            out[utt_id] = syms.split() if syms else []
    return out
