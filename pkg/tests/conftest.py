"""Shared helpers: finite-difference oracles and tiny model builders."""

import numpy as np
import pytest

import acsnet.kernels as kernels
from acsnet.decoder import DecoderConfig
from acsnet.encoder import EncoderConfig
from acsnet.halting import HaltingConfig
from acsnet.model import Model, ModelConfig, build_model


def fd_gradient(f, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar f() with respect to x,
    perturbing x in place."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + step
        fp = f()
        x[idx] = orig - step
        fm = f()
        x[idx] = orig
        g[idx] = (fp - fm) / (2.0 * step)
    return g


def rel_error(got: np.ndarray, want: np.ndarray) -> float:
    """Max abs difference over the max gradient magnitude."""
    scale = max(np.abs(got).max(), np.abs(want).max(), 1e-10)
    return float(np.abs(got - want).max() / scale)


def micro_model(seed: int = 0, window: int = 0, vocab_size: int = 7,
                bidirectional: bool = False) -> Model:
    """Every width <= 4; suitable for exhaustive finite differences."""
    enc = EncoderConfig(input_dim=3, layers=3, units=4,
                        downsample=(False, True, True),
                        bidirectional=bidirectional)
    halt = HaltingConfig(epsilon=0.01, kernel_width=3, channels=2)
    dec = DecoderConfig(vocab_size=vocab_size, context_dim=enc.output_dim,
                        units=4, embed_dim=3, window=window)
    return build_model(ModelConfig(enc, halt, dec), seed=seed)


def small_model(seed: int = 0, window: int = 0, vocab_size: int = 8,
                input_dim: int = 4, bidirectional: bool = False) -> Model:
    enc = EncoderConfig(input_dim=input_dim, layers=3, units=8,
                        downsample=(False, True, True),
                        bidirectional=bidirectional)
    halt = HaltingConfig(epsilon=0.01, kernel_width=3, channels=4)
    dec = DecoderConfig(vocab_size=vocab_size, context_dim=enc.output_dim,
                        units=8, embed_dim=4, window=window)
    return build_model(ModelConfig(enc, halt, dec), seed=seed)


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    """Run the test under every available kernel backend."""
    prev = kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(prev)
