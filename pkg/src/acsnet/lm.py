"""Recurrent language model over output symbols, fused at decode time.

The LM is trained separately on label text only and never sees acoustic
features; during search its log-probability is interpolated with the
decoder's per symbol: score = logp_asr + gamma * logp_lm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import gru_cell_tensor
from .errors import ConfigError, ContractError
from .numerics import ParamStore, Tensor, log_softmax, take


@dataclass(frozen=True)
class LmConfig:
    vocab_size: int
    units: int = 32
    embed_dim: int = 16

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ConfigError("LM needs a vocabulary of at least 2")
        if min(self.units, self.embed_dim) < 1:
            raise ConfigError("LM dimensions must be positive")


def init_lm_params(store: ParamStore, cfg: LmConfig,
                   prefix: str = "lm") -> None:
    store.add(f"{prefix}/emb", (cfg.vocab_size, cfg.embed_dim))
    store.add(f"{prefix}/W", (3 * cfg.units, cfg.embed_dim))
    store.add(f"{prefix}/U", (3 * cfg.units, cfg.units))
    store.add(f"{prefix}/b", (3 * cfg.units,))
    store.add(f"{prefix}/oW", (cfg.vocab_size, cfg.units))
    store.add(f"{prefix}/ob", (cfg.vocab_size,))


def zero_state(cfg: LmConfig) -> Tensor:
    return Tensor(np.zeros(cfg.units))


def lm_step(params: ParamStore, cfg: LmConfig, state: Tensor, y_prev: int,
            prefix: str = "lm") -> tuple[Tensor, Tensor]:
    """Consume the previous symbol; return (state', log-probs over vocab)."""
    if not 0 <= y_prev < cfg.vocab_size:
        raise ContractError(f"symbol id {y_prev} out of range "
                            f"[0, {cfg.vocab_size})")
    x = take(params[f"{prefix}/emb"], y_prev)
    state = gru_cell_tensor(x, state,
                            params[f"{prefix}/W"],
                            params[f"{prefix}/U"],
                            params[f"{prefix}/b"])
    logits = (params[f"{prefix}/oW"] @ state) + params[f"{prefix}/ob"]
    return state, log_softmax(logits)


def joint_score(logp_asr: float, logp_lm: float, gamma: float) -> float:
    """Log-linear interpolation of decoder and LM log-probabilities."""
    if gamma < 0:
        raise ContractError(f"gamma must be non-negative, got {gamma}")
    return logp_asr + gamma * logp_lm


# -- text corpus files ---------------------------------------------------------
# One label sequence per line, symbols space-separated, same vocabulary
# file as the decoder.

def write_text_corpus(seqs: list[list[int]], vocab, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for seq in seqs:
            f.write(" ".join(vocab.symbol(i) for i in seq) + "\n")


def read_text_corpus(path, vocab) -> list[list[int]]:
    seqs = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                seqs.append([vocab.id(s) for s in line.split()])
    return seqs
