"""Halting layer and accumulate-and-halt segmentation.

Per encoder step a windowed convolution, ReLU, scalar projection and
sigmoid produce an activation in (0, 1). Scanning left to right, a
segment closes at the first step whose running activation sum reaches
1 - epsilon; the closing step's probability is the remainder that tops
the segment's mass up to exactly 1. Each segment is pooled into one
context vector with the probabilities as weights.

Batch and streaming entry points share the scanner and the per-step
kernel, so their outputs are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, ContractError, StateError
from .numerics import ParamStore, Tensor, make_op


@dataclass(frozen=True)
class HaltingConfig:
    epsilon: float = 0.01
    kernel_width: int = 3
    channels: int = 16

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if self.kernel_width < 1 or self.kernel_width % 2 == 0:
            raise ConfigError("kernel width must be a positive odd integer "
                              f"(window centred on each step), got "
                              f"{self.kernel_width}")
        if self.channels < 1:
            raise ConfigError("need at least one conv channel")

    @property
    def lookahead(self) -> int:
        """Future steps the centred window needs: (width - 1) / 2."""
        return (self.kernel_width - 1) // 2


def init_halting_params(store: ParamStore, cfg: HaltingConfig,
                        state_dim: int, prefix: str = "halt") -> None:
    store.add(f"{prefix}/K", (cfg.kernel_width, cfg.channels, state_dim))
    store.add(f"{prefix}/kb", (cfg.channels,))
    store.add(f"{prefix}/w", (cfg.channels,))
    store.add(f"{prefix}/b", (1,))


def halting_activations(params: ParamStore, cfg: HaltingConfig,
                        states: Tensor, prefix: str = "halt",
                        counters: dict | None = None) -> Tensor:
    """Per-step halting activations over encoder states (T', d) -> (T',)."""
    if states.data.ndim != 2 or states.data.shape[0] < 1:
        raise ContractError("states must be a nonempty (T', d) array")
    K = params[f"{prefix}/K"]
    kb = params[f"{prefix}/kb"]
    w = params[f"{prefix}/w"]
    b = params[f"{prefix}/b"]
    kern = kernels.active()
    a, E = kern.halting_seq_forward(states.data, K.data, kb.data, w.data,
                                    b.data)
    if counters is not None:
        counters["halting_evals"] = counters.get("halting_evals", 0) + len(a)

    def bwd(da):
        dH, dK, dkb, dw, db = kern.halting_seq_backward(
            da, states.data, E, a, K.data, w.data)
        states._accumulate(dH)
        K._accumulate(dK)
        kb._accumulate(dkb)
        w._accumulate(dw)
        b._accumulate(db)

    return make_op(a, (states, K, kb, w, b), bwd)


# -- segmentation -------------------------------------------------------------

@dataclass
class Segment:
    """One pondering interval: steps start..end inclusive."""

    start: int
    end: int
    probs: np.ndarray  # halting probabilities over the steps, sum == 1
    remainder: float   # probability assigned to the closing step
    forced: bool = False  # closed by end-of-stream flush, not the threshold

    def __len__(self) -> int:
        return self.end - self.start + 1


@dataclass
class HaltingTrace:
    activations: np.ndarray
    probs: np.ndarray           # per step; within segments these follow
    segments: list[Segment]     # the remainder rule, pending steps keep a_j
    pending: tuple[int, int] | None = None  # inclusive tail range, if any

    def segment_of(self, j: int) -> int | None:
        for i, seg in enumerate(self.segments):
            if seg.start <= j <= seg.end:
                return i
        return None


def close_probs(tail: list[float]) -> np.ndarray:
    """Probabilities for a segment closed at its last buffered step: all
    earlier steps keep their activation, the closer takes the remainder."""
    p = np.array(tail, dtype=np.float64)
    prior = 0.0
    for v in tail[:-1]:
        prior += v
    p[-1] = 1.0 - prior
    return p


class SegmentScanner:
    """Accumulate-and-halt state machine shared by batch and streaming."""

    def __init__(self, epsilon: float):
        if not 0.0 < epsilon < 1.0:
            raise ConfigError(f"epsilon must be in (0, 1), got {epsilon}")
        self.epsilon = epsilon
        self.start = 0
        self.prior = 0.0
        self.buf: list[float] = []
        self.next_index = 0

    def feed(self, a_j: float) -> Segment | None:
        """Consume one activation; returns the segment it closes, if any."""
        if not 0.0 < a_j < 1.0:
            raise ContractError(
                f"activation {a_j} at step {self.next_index} is outside (0, 1)")
        j = self.next_index
        self.next_index += 1
        self.buf.append(a_j)
        if self.prior + a_j >= 1.0 - self.epsilon:
            seg = Segment(self.start, j, close_probs(self.buf),
                          remainder=1.0 - self.prior)
            self.start = j + 1
            self.prior = 0.0
            self.buf = []
            return seg
        self.prior += a_j
        return None

    def flush(self) -> Segment | None:
        """Force-close the pending tail (end of stream), if nonempty."""
        if not self.buf:
            return None
        probs = close_probs(self.buf)
        seg = Segment(self.start, self.next_index - 1, probs,
                      remainder=float(probs[-1]), forced=True)
        self.start = self.next_index
        self.prior = 0.0
        self.buf = []
        return seg


def segment(activations, epsilon: float, flush: bool = False) -> HaltingTrace:
    """Partition an activation sequence into halting segments.

    Without `flush`, trailing steps whose sum never reaches 1 - epsilon
    are reported as a pending tail; with `flush` they are force-closed
    into a final segment by the remainder rule.
    """
    a = np.asarray(activations, dtype=np.float64)
    if a.ndim != 1 or a.shape[0] < 1:
        raise ContractError("activations must be a nonempty 1-D sequence")
    scanner = SegmentScanner(epsilon)
    segments: list[Segment] = []
    probs = a.copy()
    for v in a:
        seg = scanner.feed(float(v))
        if seg is not None:
            segments.append(seg)
    if flush:
        seg = scanner.flush()
        if seg is not None:
            segments.append(seg)
    pending = None
    if scanner.buf:
        pending = (scanner.start, len(a) - 1)
    for seg in segments:
        probs[seg.end] = seg.probs[-1]
    return HaltingTrace(a, probs, segments, pending)


# -- context pooling ----------------------------------------------------------

def weighted_sum(rows, weights) -> np.ndarray:
    """Sum of weights[j] * rows[j] accumulated in index order."""
    acc = weights[0] * np.asarray(rows[0], dtype=np.float64)
    for j in range(1, len(weights)):
        acc = acc + weights[j] * np.asarray(rows[j], dtype=np.float64)
    return acc


@dataclass
class ContextSequence:
    contexts: np.ndarray        # (n, d)
    ends: list[int]             # halting step of each segment
    emit_steps: list[int]       # encoder step the context became available


def pool_segment(states: Tensor, seg_probs: Tensor, start: int,
                 end: int) -> Tensor:
    """Differentiable context for one segment: sum_j p_j h_j."""
    rows = states.data[start:end + 1]
    out = weighted_sum(rows, seg_probs.data)

    def bwd(g):
        dH = np.zeros_like(states.data)
        dp = np.empty_like(seg_probs.data)
        for j in range(len(dp)):
            dH[start + j] = seg_probs.data[j] * g
            dp[j] = rows[j] @ g
        states._accumulate(dH)
        seg_probs._accumulate(dp)

    return make_op(out, (states, seg_probs), bwd)


def pool_contexts(states: np.ndarray, trace: HaltingTrace,
                  lookahead: int = 0) -> ContextSequence:
    """Pool every complete segment of the trace into a context vector."""
    T = states.shape[0]
    if trace.segments and trace.segments[-1].end >= T:
        raise ContractError("trace indexes past the state sequence")
    contexts = []
    ends = []
    emits = []
    for seg in trace.segments:
        contexts.append(weighted_sum(states[seg.start:seg.end + 1],
                                     seg.probs))
        ends.append(seg.end)
        emits.append(min(seg.end + lookahead, T - 1))
    ctx = (np.stack(contexts) if contexts
           else np.zeros((0, states.shape[1])))
    return ContextSequence(ctx, ends, emits)


# -- streaming ----------------------------------------------------------------

@dataclass
class EmittedContext:
    index: int                 # output position i
    context: np.ndarray
    end: int                   # halting step N_i
    emit_step: int             # encoder step it became available
    forced: bool


class HaltingStream:
    """Incremental halting layer + segmentation over arriving states.

    The centred convolution needs `lookahead` future states, so the
    activation for step j is computed once state j + lookahead arrives
    (or at finish, with zero padding on the right).
    """

    def __init__(self, params: ParamStore, cfg: HaltingConfig,
                 prefix: str = "halt", counters: dict | None = None):
        self.cfg = cfg
        self._K = params[f"{prefix}/K"].data
        self._kb = params[f"{prefix}/kb"].data
        self._w = params[f"{prefix}/w"].data
        self._b = params[f"{prefix}/b"].data
        self._kern = kernels.active()
        self._counters = counters
        self._states: list[np.ndarray] = []
        self._scanner = SegmentScanner(cfg.epsilon)
        self._seg_states: list[np.ndarray] = []
        self._activations: list[float] = []
        self._n_emitted = 0
        self._next_a = 0  # first step without a computed activation
        self._finished = False

    def _window(self, j: int, T: int | None) -> np.ndarray:
        kw = self.cfg.kernel_width
        la = self.cfg.lookahead
        d = self._states[0].shape[0]
        win = np.zeros((kw, d))
        for k in range(kw):
            idx = j + k - la
            if 0 <= idx < (len(self._states) if T is None else T):
                win[k] = self._states[idx]
        return win

    def _step(self, j: int, T: int | None) -> EmittedContext | None:
        a_j, _ = self._kern.halting_step(self._window(j, T), self._K,
                                         self._kb, self._w, self._b)
        if self._counters is not None:
            self._counters["halting_evals"] = \
                self._counters.get("halting_evals", 0) + 1
        self._activations.append(float(a_j))
        self._seg_states.append(self._states[j])
        seg = self._scanner.feed(float(a_j))
        if seg is None:
            return None
        ctx = weighted_sum(self._seg_states, seg.probs)
        self._seg_states = []
        emit_at = min(seg.end + self.cfg.lookahead,
                      len(self._states) - 1 if T is None else T - 1)
        out = EmittedContext(self._n_emitted, ctx, seg.end, emit_at,
                             seg.forced)
        self._n_emitted += 1
        return out

    def push(self, state: np.ndarray) -> list[EmittedContext]:
        """Consume one encoder state; returns any contexts it completes."""
        if self._finished:
            raise StateError("push() after finish()")
        self._states.append(np.asarray(state, dtype=np.float64))
        out = []
        while self._next_a + self.cfg.lookahead < len(self._states):
            emitted = self._step(self._next_a, None)
            self._next_a += 1
            if emitted is not None:
                out.append(emitted)
        return out

    def finish(self) -> list[EmittedContext]:
        """Compute the right-edge activations and flush the pending tail."""
        if self._finished:
            raise StateError("finish() called twice")
        self._finished = True
        T = len(self._states)
        out = []
        while self._next_a < T:
            emitted = self._step(self._next_a, T)
            self._next_a += 1
            if emitted is not None:
                out.append(emitted)
        seg = self._scanner.flush()
        if seg is not None:
            ctx = weighted_sum(self._seg_states, seg.probs)
            self._seg_states = []
            out.append(EmittedContext(self._n_emitted, ctx, seg.end, T - 1,
                                      True))
            self._n_emitted += 1
        return out

    @property
    def activations(self) -> np.ndarray:
        return np.array(self._activations)
