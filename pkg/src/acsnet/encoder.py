"""Pyramidal recurrent encoder with optional bidirectional variant.

Upper layers marked for downsampling consume concatenated pairs of the
previous layer's states, halving time resolution per marked layer;
odd-length layer inputs are padded with one zero state on the right.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, ContractError
from .numerics import ParamStore, Tensor, concat, make_op, reshape, sigmoid, take, tanh


@dataclass(frozen=True)
class EncoderConfig:
    input_dim: int
    layers: int = 3
    units: int = 32
    downsample: tuple[bool, ...] = (False, True, True)
    bidirectional: bool = False

    def __post_init__(self):
        if self.layers < 1:
            raise ConfigError("encoder needs at least one layer")
        if self.input_dim < 1 or self.units < 1:
            raise ConfigError("encoder dimensions must be positive")
        if len(self.downsample) != self.layers:
            raise ConfigError("downsample mask length must equal layer count")
        if self.downsample[0]:
            raise ConfigError("the first layer never downsamples")

    @property
    def factor(self) -> int:
        """Total time-resolution reduction, 2 per downsampling layer."""
        return 2 ** sum(self.downsample)

    @property
    def output_dim(self) -> int:
        return self.units * (2 if self.bidirectional else 1)

    def layer_input_dim(self, i: int) -> int:
        d = self.input_dim if i == 0 else self.units
        return 2 * d if self.downsample[i] else d


def output_length(T: int, cfg: EncoderConfig) -> int:
    """Length law: T' follows the per-layer halving chain of T."""
    n = T
    for ds in cfg.downsample:
        if ds:
            n = (n + 1) // 2
    return n


def _directions(cfg: EncoderConfig) -> tuple[str, ...]:
    return ("f", "b") if cfg.bidirectional else ("f",)


def init_encoder_params(store: ParamStore, cfg: EncoderConfig,
                        prefix: str = "enc") -> None:
    for d in _directions(cfg):
        for i in range(cfg.layers):
            din = cfg.layer_input_dim(i)
            store.add(f"{prefix}/{d}/l{i}/W", (3 * cfg.units, din))
            store.add(f"{prefix}/{d}/l{i}/U", (3 * cfg.units, cfg.units))
            store.add(f"{prefix}/{d}/l{i}/b", (3 * cfg.units,))


def gru_sequence(x: Tensor, W: Tensor, U: Tensor, b: Tensor) -> Tensor:
    """Fused GRU-over-sequence op: one tape node per layer."""
    k = kernels.active()
    dh = U.data.shape[1]
    h0 = np.zeros(dh)
    H, Z, R, N = k.gru_seq_forward(x.data, h0, W.data, U.data, b.data)

    def bwd(dH):
        dX, _, dW, dU, db = k.gru_seq_backward(
            dH, x.data, H, h0, Z, R, N, W.data, U.data, b.data)
        x._accumulate(dX)
        W._accumulate(dW)
        U._accumulate(dU)
        b._accumulate(db)

    return make_op(H, (x, W, U, b), bwd)


def gru_cell_tensor(x: Tensor, h: Tensor, W: Tensor, U: Tensor,
                    b: Tensor) -> Tensor:
    """Single GRU step composed from primitive tape ops (decoder/LM use)."""
    dh = U.data.shape[1]
    gi = (W @ x) + b
    z = sigmoid(gi[:dh] + (take(U, slice(0, dh)) @ h))
    r = sigmoid(gi[dh:2 * dh] + (take(U, slice(dh, 2 * dh)) @ h))
    n = tanh(gi[2 * dh:] + (take(U, slice(2 * dh, 3 * dh)) @ (r * h)))
    return (1.0 - z) * h + z * n


def _pair_adjacent(h: Tensor) -> Tensor:
    """(T, d) -> (ceil(T/2), 2d); odd T gets one zero state on the right."""
    T, d = h.data.shape
    if T % 2 == 1:
        h = concat([h, Tensor(np.zeros((1, d)))], axis=0)
    return reshape(h, ((T + 1) // 2, 2 * d))


def _pyramid(params: ParamStore, cfg: EncoderConfig, direction: str,
             x: Tensor, prefix: str) -> Tensor:
    h = x
    for i in range(cfg.layers):
        if cfg.downsample[i]:
            h = _pair_adjacent(h)
        h = gru_sequence(h,
                         params[f"{prefix}/{direction}/l{i}/W"],
                         params[f"{prefix}/{direction}/l{i}/U"],
                         params[f"{prefix}/{direction}/l{i}/b"])
    return h


def encode(params: ParamStore, cfg: EncoderConfig, frames: np.ndarray,
           prefix: str = "enc") -> Tensor:
    """Frames (T, input_dim) -> encoder states (T', output_dim)."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise ContractError(f"frames must be a nonempty (T, d) array, "
                            f"got shape {frames.shape}")
    if frames.shape[1] != cfg.input_dim:
        raise ContractError(f"frame dimension {frames.shape[1]} != "
                            f"configured input_dim {cfg.input_dim}")
    if not np.isfinite(frames).all():
        raise ContractError("frames contain non-finite entries")
    x = Tensor(frames)
    fwd = _pyramid(params, cfg, "f", x, prefix)
    if not cfg.bidirectional:
        return fwd
    bwd = _pyramid(params, cfg, "b", take(x, slice(None, None, -1)), prefix)
    return concat([fwd, take(bwd, slice(None, None, -1))], axis=1)


class StreamingEncoder:
    """Incremental unidirectional pyramid; emits top-layer states.

    Bit-identical to `encode`: every state comes from the same cell
    routine on the same inputs, and odd tails are zero-padded at finish
    exactly where the batch pass pads them.
    """

    def __init__(self, params: ParamStore, cfg: EncoderConfig,
                 prefix: str = "enc"):
        if cfg.bidirectional:
            raise ConfigError("streaming requires a unidirectional encoder")
        self.cfg = cfg
        self._kern = kernels.active()
        self._layers = []
        for i in range(cfg.layers):
            self._layers.append((
                params[f"{prefix}/f/l{i}/W"].data,
                params[f"{prefix}/f/l{i}/U"].data,
                params[f"{prefix}/f/l{i}/b"].data,
            ))
        self._h = [np.zeros(cfg.units) for _ in range(cfg.layers)]
        self._pending: list[np.ndarray | None] = [None] * cfg.layers
        self._finished = False

    def _feed(self, layer: int, x: np.ndarray) -> list[np.ndarray]:
        if layer == self.cfg.layers:
            return [x]
        if self.cfg.downsample[layer]:
            if self._pending[layer] is None:
                self._pending[layer] = x
                return []
            x = np.concatenate([self._pending[layer], x])
            self._pending[layer] = None
        W, U, b = self._layers[layer]
        self._h[layer] = self._kern.gru_cell(x, self._h[layer], W, U, b)
        return self._feed(layer + 1, self._h[layer])

    def push(self, frame: np.ndarray) -> list[np.ndarray]:
        """Consume one frame; returns any newly available top states."""
        if self._finished:
            raise ContractError("push() after finish()")
        frame = np.asarray(frame, dtype=np.float64)
        if frame.shape != (self.cfg.input_dim,):
            raise ContractError(f"frame shape {frame.shape} != "
                                f"({self.cfg.input_dim},)")
        return self._feed(0, frame)

    def finish(self) -> list[np.ndarray]:
        """Flush odd pair buffers with zero padding, bottom-up."""
        if self._finished:
            raise ContractError("finish() called twice")
        self._finished = True
        out: list[np.ndarray] = []
        for i in range(self.cfg.layers):
            if self.cfg.downsample[i] and self._pending[i] is not None:
                x = np.concatenate(
                    [self._pending[i], np.zeros_like(self._pending[i])])
                self._pending[i] = None
                W, U, b = self._layers[i]
                self._h[i] = self._kern.gru_cell(x, self._h[i], W, U, b)
                out.extend(self._feed(i + 1, self._h[i]))
        return out
