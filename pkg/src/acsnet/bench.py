"""Micro-benchmarks comparing the kernel backends.

Times the hot kernels (GRU sequence forward/backward, halting layer) and
one full training step, for every available backend.
"""

from __future__ import annotations

import time

import numpy as np

from . import kernels
from .decoder import DecoderConfig
from .encoder import EncoderConfig
from .halting import HaltingConfig
from .model import ModelConfig, build_model
from .training import utterance_loss


def _time(fn, repeats: int) -> float:
    """Best-of-N wall time in milliseconds."""
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, (time.perf_counter() - t0) * 1e3)
    return best


def _bench_kernels(repeats: int) -> dict[str, float]:
    rng = np.random.default_rng(0)
    T, din, dh = 256, 32, 32
    X = rng.uniform(-1, 1, (T, din))
    h0 = np.zeros(dh)
    W = rng.uniform(-0.1, 0.1, (3 * dh, din))
    U = rng.uniform(-0.1, 0.1, (3 * dh, dh))
    b = rng.uniform(-0.1, 0.1, 3 * dh)
    k = kernels.active()
    H, Z, R, N = k.gru_seq_forward(X, h0, W, U, b)
    dH = rng.uniform(-1, 1, (T, dh))

    C, kw = 16, 3
    K = rng.uniform(-0.1, 0.1, (kw, C, dh))
    kb = rng.uniform(-0.1, 0.1, C)
    w = rng.uniform(-0.1, 0.1, C)
    bb = rng.uniform(-0.1, 0.1, 1)
    a, E = k.halting_seq_forward(H, K, kb, w, bb)
    da = rng.uniform(-1, 1, T)

    return {
        f"gru_seq_forward (T={T}, d={dh})":
            _time(lambda: k.gru_seq_forward(X, h0, W, U, b), repeats),
        f"gru_seq_backward (T={T}, d={dh})":
            _time(lambda: k.gru_seq_backward(dH, X, H, h0, Z, R, N, W, U, b),
                  repeats),
        f"halting_seq fwd+bwd (T={T}, C={C})":
            _time(lambda: (k.halting_seq_forward(H, K, kb, w, bb),
                           k.halting_seq_backward(da, H, E, a, K, w)),
                  repeats),
    }


def _bench_train_step(repeats: int) -> dict[str, float]:
    rng = np.random.default_rng(1)
    cfg = ModelConfig(
        EncoderConfig(input_dim=8),
        HaltingConfig(),
        DecoderConfig(vocab_size=12, context_dim=32, window=1))
    model = build_model(cfg, seed=0)
    frames = rng.uniform(-1, 1, (48, 8))
    labels = [4, 5, 6, 7, 8, 9]

    def step():
        model.params.zero_grad()
        loss, _ = utterance_loss(model, frames, labels)
        loss.backward()

    return {"train step (48 frames, 6 labels)": _time(step, repeats)}


def run_benchmarks(repeats: int = 5) -> str:
    """Run every benchmark on every backend; returns a formatted table."""
    names = kernels.available_backends()
    results: dict[str, dict[str, float]] = {n: {} for n in names}
    prev = kernels.backend_name()
    try:
        for name in names:
            kernels.use_backend(name)
            results[name].update(_bench_kernels(repeats))
            results[name].update(_bench_train_step(repeats))
    finally:
        kernels.use_backend(prev)

    rows = list(results[names[0]])
    width = max(len(r) for r in rows) + 2
    header = f"{'benchmark':<{width}}" + "".join(f"{n:>12}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    lines = [header, "-" * len(header)]
    for row in rows:
        line = f"{row:<{width}}"
        for n in names:
            line += f"{results[n][row]:>10.3f}ms"
        if len(names) == 2:
            a, b = (results[n][row] for n in names)
            fast, slow = min(a, b), max(a, b)
            line += f"{slow / fast:>9.1f}x"
        lines.append(line)
    lines.append(f"(best of {repeats}; active backend: {prev})")
    return "\n".join(lines)
