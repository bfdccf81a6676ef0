"""Model bundles: parameter store + architecture configs + persistence.

Checkpoints hold parameters only (see `numerics.params` for the binary
format); the architecture travels in a JSON sidecar written next to the
checkpoint, so a checkpoint can be validated against decode-time flags.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .decoder import DecoderConfig, init_decoder_params
from .encoder import EncoderConfig, encode, init_encoder_params
from .errors import ConfigError
from .halting import HaltingConfig, halting_activations, init_halting_params
from .lm import LmConfig, init_lm_params
from .numerics import ParamStore, Tensor, init_uniform, load_checkpoint, save_checkpoint

INIT_RANGE = (-0.1, 0.1)


@dataclass(frozen=True)
class ModelConfig:
    encoder: EncoderConfig
    halting: HaltingConfig
    decoder: DecoderConfig

    def __post_init__(self):
        if self.decoder.context_dim != self.encoder.output_dim:
            raise ConfigError(
                f"decoder context_dim {self.decoder.context_dim} != encoder "
                f"output_dim {self.encoder.output_dim}")

    def to_dict(self) -> dict:
        return {
            "encoder": {
                "input_dim": self.encoder.input_dim,
                "layers": self.encoder.layers,
                "units": self.encoder.units,
                "downsample": list(self.encoder.downsample),
                "bidirectional": self.encoder.bidirectional,
            },
            "halting": {
                "epsilon": self.halting.epsilon,
                "kernel_width": self.halting.kernel_width,
                "channels": self.halting.channels,
            },
            "decoder": {
                "vocab_size": self.decoder.vocab_size,
                "context_dim": self.decoder.context_dim,
                "units": self.decoder.units,
                "embed_dim": self.decoder.embed_dim,
                "window": self.decoder.window,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        enc = dict(d["encoder"])
        enc["downsample"] = tuple(enc["downsample"])
        return cls(EncoderConfig(**enc), HaltingConfig(**d["halting"]),
                   DecoderConfig(**d["decoder"]))


@dataclass
class Model:
    cfg: ModelConfig
    params: ParamStore
    counters: dict = field(default_factory=dict)

    def encode(self, frames: np.ndarray) -> Tensor:
        return encode(self.params, self.cfg.encoder, frames)

    def activations(self, states: Tensor) -> Tensor:
        return halting_activations(self.params, self.cfg.halting, states,
                                   counters=self.counters)


def build_model(cfg: ModelConfig, seed: int = 0) -> Model:
    store = ParamStore()
    init_encoder_params(store, cfg.encoder)
    init_halting_params(store, cfg.halting, cfg.encoder.output_dim)
    init_decoder_params(store, cfg.decoder)
    init_uniform(store, INIT_RANGE[0], INIT_RANGE[1], seed)
    return Model(cfg, store)


def _sidecar(ckpt_path) -> Path:
    return Path(ckpt_path).with_suffix(".json")


def save_model(model: Model, ckpt_path) -> None:
    save_checkpoint(model.params, ckpt_path)
    with open(_sidecar(ckpt_path), "w", encoding="utf-8") as f:
        json.dump({"kind": "acs", "config": model.cfg.to_dict()}, f, indent=1)


def load_model(ckpt_path) -> Model:
    with open(_sidecar(ckpt_path), encoding="utf-8") as f:
        meta = json.load(f)
    if meta.get("kind") != "acs":
        raise ConfigError(f"{ckpt_path}: not an acs model checkpoint")
    cfg = ModelConfig.from_dict(meta["config"])
    model = build_model(cfg, seed=0)
    model.params.load_values(load_checkpoint(ckpt_path))
    return model


@dataclass
class LmModel:
    cfg: LmConfig
    params: ParamStore


def build_lm(cfg: LmConfig, seed: int = 0) -> LmModel:
    store = ParamStore()
    init_lm_params(store, cfg)
    init_uniform(store, INIT_RANGE[0], INIT_RANGE[1], seed)
    return LmModel(cfg, store)


def save_lm(lm: LmModel, ckpt_path) -> None:
    save_checkpoint(lm.params, ckpt_path)
    with open(_sidecar(ckpt_path), "w", encoding="utf-8") as f:
        json.dump({"kind": "lm", "config": {
            "vocab_size": lm.cfg.vocab_size,
            "units": lm.cfg.units,
            "embed_dim": lm.cfg.embed_dim,
        }}, f, indent=1)


def load_lm(ckpt_path) -> LmModel:
    with open(_sidecar(ckpt_path), encoding="utf-8") as f:
        meta = json.load(f)
    if meta.get("kind") != "lm":
        raise ConfigError(f"{ckpt_path}: not an LM checkpoint")
    lm = build_lm(LmConfig(**meta["config"]), seed=0)
    lm.params.load_values(load_checkpoint(ckpt_path))
    return lm
