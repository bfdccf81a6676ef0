"""Vocabulary, context windows, and the decode step."""

import numpy as np
import numpy.testing as npt
import pytest

from acsnet.decoder import (
    EOS,
    PAD,
    SOS,
    UNK,
    DecoderConfig,
    Vocab,
    decode_step,
    embed,
    init_decoder_params,
    window_contexts,
    zero_state,
)
from acsnet.errors import ConfigError, ContractError
from acsnet.numerics import ParamStore, Tensor, init_uniform, tsum
from conftest import fd_gradient, rel_error

rng = np.random.default_rng(41)


def _decoder(cfg, seed=0):
    store = ParamStore()
    init_decoder_params(store, cfg)
    init_uniform(store, -0.3, 0.3, seed)
    return store


def test_vocab_specials_and_ids():
    v = Vocab.from_labels(["a", "b", "c"])
    assert (PAD, UNK, SOS, EOS) == (0, 1, 2, 3)
    assert v.id("<PAD>") == 0 and v.id("a") == 4
    assert v.symbol(6) == "c"
    assert len(v) == 7
    with pytest.raises(ContractError):
        v.id("zz")
    with pytest.raises(ContractError):
        v.symbol(7)


def test_vocab_file_roundtrip(tmp_path):
    v = Vocab.from_labels(["a", "b"])
    path = tmp_path / "vocab.txt"
    v.save(path)
    lines = path.read_text().splitlines()
    assert lines[:4] == ["<PAD>", "<UNK>", "<SOS>", "<EOS>"]
    loaded = Vocab.load(path)
    assert loaded.symbols == v.symbols


def test_vocab_rejects_bad_tables():
    with pytest.raises(ContractError):
        Vocab(["<PAD>", "<UNK>", "<SOS>", "<EOS>", "a", "a"])
    with pytest.raises(ContractError):
        Vocab(["<SOS>", "<UNK>", "<PAD>", "<EOS>", "a"])


def test_window_zero_is_the_context_itself():
    contexts = [Tensor(rng.uniform(-1, 1, 4)) for _ in range(3)]
    out = window_contexts(contexts, 1, 0)
    assert out is contexts[1]


def test_window_boundary_zero_fill():
    c = Tensor(rng.uniform(-1, 1, 4))
    out = window_contexts([c], 0, 1)
    npt.assert_array_equal(out.data,
                           np.concatenate([np.zeros(4), c.data, np.zeros(4)]))


def test_window_mid_sequence():
    contexts = [Tensor(rng.uniform(-1, 1, 3)) for _ in range(5)]
    out = window_contexts(contexts, 2, 1)
    npt.assert_array_equal(
        out.data, np.concatenate([contexts[1].data, contexts[2].data,
                                  contexts[3].data]))


def test_window_limit_narrows():
    contexts = [Tensor(rng.uniform(-1, 1, 3)) for _ in range(5)]
    out = window_contexts(contexts, 2, 2, limit=1)
    npt.assert_array_equal(
        out.data, np.concatenate([np.zeros(3), contexts[1].data,
                                  contexts[2].data, contexts[3].data,
                                  np.zeros(3)]))


def test_window_out_of_range_index():
    contexts = [Tensor(np.zeros(2))]
    with pytest.raises(ContractError):
        window_contexts(contexts, 1, 1)
    with pytest.raises(ContractError):
        window_contexts(contexts, -1, 1)


def test_config_validation():
    with pytest.raises(ConfigError):
        DecoderConfig(vocab_size=1, context_dim=4)
    with pytest.raises(ConfigError):
        DecoderConfig(vocab_size=4, context_dim=4, window=3)


def test_decode_step_distribution():
    cfg = DecoderConfig(vocab_size=6, context_dim=4, units=5, embed_dim=3)
    store = _decoder(cfg, seed=1)
    state = zero_state(cfg)
    state, logp = decode_step(store, cfg, state, SOS,
                              Tensor(rng.uniform(-1, 1, 4)))
    p = np.exp(logp.data)
    assert abs(p.sum() - 1.0) < 1e-12
    assert (p > 0).all()


def test_decode_step_zero_output_layer_uniform():
    cfg = DecoderConfig(vocab_size=5, context_dim=3, units=4, embed_dim=2)
    store = _decoder(cfg, seed=2)
    store["dec/oW"].data[:] = 0.0
    store["dec/ob"].data[:] = 0.0
    _, logp = decode_step(store, cfg, zero_state(cfg), SOS,
                          Tensor(rng.uniform(-1, 1, 3)))
    npt.assert_allclose(np.exp(logp.data), np.full(5, 0.2), rtol=1e-14)


def test_decode_step_dimension_check():
    cfg = DecoderConfig(vocab_size=5, context_dim=3, units=4, embed_dim=2,
                        window=1)
    store = _decoder(cfg)
    with pytest.raises(ContractError):
        decode_step(store, cfg, zero_state(cfg), SOS, Tensor(np.zeros(3)))


def test_embed_contract_and_sparsity():
    cfg = DecoderConfig(vocab_size=4, context_dim=2, units=3, embed_dim=2)
    store = _decoder(cfg, seed=3)
    with pytest.raises(ContractError):
        embed(store, cfg, 4)
    with pytest.raises(ContractError):
        embed(store, cfg, -1)
    npt.assert_array_equal(embed(store, cfg, 2).data,
                           store["dec/emb"].data[2])
    store.zero_grad()
    tsum(embed(store, cfg, 2) * 3.0).backward()
    g = store["dec/emb"].grad
    assert (g[2] != 0).all()
    others = np.delete(g, 2, axis=0)
    npt.assert_array_equal(others, np.zeros_like(others))


def test_decode_step_gradients_fd():
    cfg = DecoderConfig(vocab_size=3, context_dim=2, units=3, embed_dim=2)
    store = _decoder(cfg, seed=4)
    ctxv = rng.uniform(-1, 1, 2)
    statev = rng.uniform(-0.5, 0.5, 3)

    def loss_value():
        state, logp = decode_step(store, cfg, Tensor(statev), 1,
                                  Tensor(ctxv))
        return take_target(logp)

    def take_target(logp):
        return float(-logp.data[2])

    store.zero_grad()
    state, logp = decode_step(store, cfg, Tensor(statev), 1, Tensor(ctxv))
    (logp[2] * -1.0).backward()
    for name, p in store.items():
        want = fd_gradient(loss_value, p.data)
        got = p.grad if p.grad is not None else np.zeros_like(p.data)
        assert rel_error(got, want) < 1e-4, name
