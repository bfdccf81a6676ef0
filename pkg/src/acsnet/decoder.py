"""Symbol vocabulary and the recurrent decoder.

Each output step consumes the previous symbol's embedding plus a window
of context vectors (the current one and up to `window` neighbours on
each side, zero vectors where the window leaves the sequence) and
produces log-probabilities over the vocabulary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import gru_cell_tensor
from .errors import ConfigError, ContractError
from .numerics import ParamStore, Tensor, concat, log_softmax, take

PAD, UNK, SOS, EOS = 0, 1, 2, 3
SPECIALS = ("<PAD>", "<UNK>", "<SOS>", "<EOS>")


class Vocab:
    """Dense string-to-id table; ids 0..3 are the reserved specials."""

    def __init__(self, symbols: list[str]):
        if tuple(symbols[:4]) != SPECIALS:
            raise ContractError(f"first four symbols must be {SPECIALS}")
        if len(set(symbols)) != len(symbols):
            raise ContractError("vocabulary symbols must be unique")
        self.symbols = list(symbols)
        self.index = {s: i for i, s in enumerate(symbols)}

    @classmethod
    def from_labels(cls, labels: list[str]) -> "Vocab":
        return cls(list(SPECIALS) + list(labels))

    def __len__(self) -> int:
        return len(self.symbols)

    def id(self, symbol: str) -> int:
        try:
            return self.index[symbol]
        except KeyError:
            raise ContractError(f"unknown symbol {symbol!r}") from None

    def symbol(self, i: int) -> str:
        if not 0 <= i < len(self.symbols):
            raise ContractError(f"symbol id {i} out of range")
        return self.symbols[i]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for s in self.symbols:
                f.write(s + "\n")

    @classmethod
    def load(cls, path) -> "Vocab":
        with open(path, encoding="utf-8") as f:
            symbols = [line.rstrip("\n") for line in f if line.rstrip("\n")]
        return cls(symbols)


@dataclass(frozen=True)
class DecoderConfig:
    vocab_size: int
    context_dim: int
    units: int = 32
    embed_dim: int = 16
    window: int = 0

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ConfigError("decoder needs a vocabulary of at least 2")
        if min(self.context_dim, self.units, self.embed_dim) < 1:
            raise ConfigError("decoder dimensions must be positive")
        if not 0 <= self.window <= 2:
            raise ConfigError(f"context window must be in [0, 2], "
                              f"got {self.window}")

    @property
    def input_dim(self) -> int:
        return self.embed_dim + (2 * self.window + 1) * self.context_dim


def init_decoder_params(store: ParamStore, cfg: DecoderConfig,
                        prefix: str = "dec") -> None:
    store.add(f"{prefix}/emb", (cfg.vocab_size, cfg.embed_dim))
    store.add(f"{prefix}/W", (3 * cfg.units, cfg.input_dim))
    store.add(f"{prefix}/U", (3 * cfg.units, cfg.units))
    store.add(f"{prefix}/b", (3 * cfg.units,))
    store.add(f"{prefix}/oW", (cfg.vocab_size, cfg.units))
    store.add(f"{prefix}/ob", (cfg.vocab_size,))


def embed(params: ParamStore, cfg: DecoderConfig, y: int,
          prefix: str = "dec") -> Tensor:
    """Trainable embedding row for a symbol id."""
    if not 0 <= y < cfg.vocab_size:
        raise ContractError(f"symbol id {y} out of range [0, {cfg.vocab_size})")
    return take(params[f"{prefix}/emb"], y)


def zero_state(cfg: DecoderConfig) -> Tensor:
    return Tensor(np.zeros(cfg.units))


def window_contexts(contexts: list[Tensor], i: int, w: int,
                    limit: int | None = None) -> Tensor:
    """Concatenate contexts i-w .. i+w, zero vectors where out of range.

    `limit` (decode-time narrowing, <= w) additionally zeroes the slots
    farther than `limit` from the centre while keeping the layout the
    model was trained with.
    """
    n = len(contexts)
    if not 0 <= i < n:
        raise ContractError(f"output index {i} out of range [0, {n})")
    if limit is None:
        limit = w
    if w == 0:
        return contexts[i]
    d = contexts[i].data.shape[0]
    parts = []
    for k in range(i - w, i + w + 1):
        if 0 <= k < n and abs(k - i) <= limit:
            parts.append(contexts[k])
        else:
            parts.append(Tensor(np.zeros(d)))
    return concat(parts)


def decode_step(params: ParamStore, cfg: DecoderConfig, state: Tensor,
                y_prev: int, ctx_window: Tensor,
                prefix: str = "dec") -> tuple[Tensor, Tensor]:
    """One output step: (state, y_prev, context window) -> (state', logp)."""
    if ctx_window.data.shape[0] != cfg.input_dim - cfg.embed_dim:
        raise ContractError(
            f"context window dim {ctx_window.data.shape[0]} != "
            f"{cfg.input_dim - cfg.embed_dim} required by window={cfg.window}")
    x = concat([embed(params, cfg, y_prev, prefix), ctx_window])
    state = gru_cell_tensor(x, state,
                            params[f"{prefix}/W"],
                            params[f"{prefix}/U"],
                            params[f"{prefix}/b"])
    logits = (params[f"{prefix}/oW"] @ state) + params[f"{prefix}/ob"]
    return state, log_softmax(logits)
