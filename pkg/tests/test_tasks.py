"""Synthetic corpus generation and the label error rate."""

from functools import lru_cache

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acsnet.errors import ConfigError, ContractError
from acsnet.tasks import (
    CorpusRecord,
    TaskConfig,
    edit_distance,
    generate_corpus,
    label_error_rate,
    prototypes,
    read_corpus,
    successor_map,
    write_corpus,
)

rng = np.random.default_rng(71)


def tiny_cfg(**kw):
    base = dict(vocab_size=5, input_dim=4, n_train=12, n_dev=4, n_test=4,
                labels_per_utt=(2, 4), seed=0)
    base.update(kw)
    return TaskConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        tiny_cfg(vocab_size=1)
    with pytest.raises(ConfigError):
        tiny_cfg(frames_per_label=(0, 4))
    with pytest.raises(ConfigError):
        tiny_cfg(noise_std=-1.0)
    with pytest.raises(ConfigError):
        tiny_cfg(max_frames=4, frames_per_label=(4, 8))


def test_corpus_determinism():
    a, vocab_a, _ = generate_corpus(tiny_cfg())
    b, vocab_b, _ = generate_corpus(tiny_cfg())
    assert vocab_a.symbols == vocab_b.symbols
    for split in ("train", "dev", "test"):
        for ra, rb in zip(a[split], b[split]):
            assert ra.utt_id == rb.utt_id
            assert ra.labels == rb.labels
            npt.assert_array_equal(ra.frames, rb.frames)
    c, _, _ = generate_corpus(tiny_cfg(seed=1))
    assert not np.array_equal(a["train"][0].frames, c["train"][0].frames)


def test_zero_noise_fixed_runs():
    cfg = tiny_cfg(noise_std=0.0, frames_per_label=(3, 3))
    splits, vocab, _ = generate_corpus(cfg)
    protos = prototypes(cfg)
    for rec in splits["train"]:
        assert rec.frames.shape[0] == 3 * len(rec.labels)
        start = 0
        for v, bound in zip(rec.labels, rec.bounds):
            run = rec.frames[start:bound]
            assert bound - start == 3
            for row in run:
                npt.assert_array_equal(row, protos[v - 4])
            start = bound


def test_empirical_mean_law_of_large_numbers():
    cfg = tiny_cfg(noise_std=0.5, n_train=400, labels_per_utt=(4, 8),
                   vocab_size=3)
    splits, _, _ = generate_corpus(cfg)
    protos = prototypes(cfg)
    frames_by_label = {v: [] for v in range(3)}
    for rec in splits["train"]:
        start = 0
        for v, bound in zip(rec.labels, rec.bounds):
            frames_by_label[v - 4].extend(rec.frames[start:bound])
            start = bound
    for v, frames in frames_by_label.items():
        frames = np.stack(frames)
        n = frames.shape[0]
        assert n > 1000
        err = np.abs(frames.mean(axis=0) - protos[v])
        assert (err < 3 * 0.5 / np.sqrt(n) + 1e-3).all()


def test_bigram_structure():
    cfg = tiny_cfg(bigram=True, labels_per_utt=(5, 5), n_train=40)
    splits, _, _ = generate_corpus(cfg)
    succ = successor_map(cfg)
    for rec in splits["train"]:
        labels = [v - 4 for v in rec.labels]
        for prev, nxt in zip(labels, labels[1:]):
            assert succ[prev] == nxt


def test_labels_exclude_specials_and_bounds_consistent():
    splits, vocab, _ = generate_corpus(tiny_cfg())
    for split in splits.values():
        for rec in split:
            assert all(4 <= v < len(vocab) for v in rec.labels)
            assert rec.bounds[-1] == rec.frames.shape[0]
            assert all(b2 > b1 for b1, b2 in zip(rec.bounds, rec.bounds[1:]))


def test_max_frames_filter_regenerates():
    cfg = tiny_cfg(labels_per_utt=(4, 6), frames_per_label=(4, 8),
                   max_frames=30, n_train=60)
    splits, _, stats = generate_corpus(cfg)
    assert all(r.frames.shape[0] <= 30 for r in splits["train"])
    assert stats["discarded"]["train"] > 0


def test_split_ids_disjoint():
    splits, _, _ = generate_corpus(tiny_cfg())
    ids = [r.utt_id for split in splits.values() for r in split]
    assert len(set(ids)) == len(ids)


def test_corpus_file_roundtrip(tmp_path):
    splits, _, _ = generate_corpus(tiny_cfg())
    path = tmp_path / "train.jsonl"
    write_corpus(splits["train"], path)
    loaded = read_corpus(path)
    assert len(loaded) == len(splits["train"])
    for a, b in zip(splits["train"], loaded):
        assert a.utt_id == b.utt_id and a.labels == b.labels
        assert a.bounds == b.bounds
        npt.assert_array_equal(a.frames, b.frames)
    # byte determinism
    path2 = tmp_path / "again.jsonl"
    write_corpus(splits["train"], path2)
    assert path.read_bytes() == path2.read_bytes()


# -- metric ---------------------------------------------------------------------

def oracle_distance(a, b):
    """Independent memoized recursive Levenshtein."""
    a, b = tuple(a), tuple(b)

    @lru_cache(maxsize=None)
    def rec(i, j):
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        if a[i] == b[j]:
            return rec(i + 1, j + 1)
        return 1 + min(rec(i + 1, j), rec(i, j + 1), rec(i + 1, j + 1))

    return rec(0, 0)


def test_edit_distance_examples():
    assert edit_distance("abc", "abc") == 0
    assert edit_distance("abcd", "abxd") == 1
    assert edit_distance("abc", "ab") == 1
    assert edit_distance([], [1, 2]) == 2


def test_ler_examples():
    assert label_error_rate([[1, 2, 3, 4]], [[1, 2, 3, 4]]) == 0.0
    assert label_error_rate([[1, 2, 3, 4]], [[1, 9, 3, 4]]) == 0.25
    assert label_error_rate([[1, 2, 3]], [[1, 2]]) == pytest.approx(1 / 3)


def test_ler_contract_errors():
    with pytest.raises(ContractError):
        label_error_rate([], [])
    with pytest.raises(ContractError):
        label_error_rate([[1]], [[1], [2]])
    with pytest.raises(ContractError):
        label_error_rate([[], []], [[], []])


@settings(max_examples=200, deadline=None, derandomize=True)
@given(st.lists(st.integers(0, 3), max_size=8),
       st.lists(st.integers(0, 3), max_size=8))
def test_edit_distance_matches_oracle(a, b):
    assert edit_distance(a, b) == oracle_distance(a, b)


@settings(max_examples=100, deadline=None, derandomize=True)
@given(st.lists(st.integers(0, 2), max_size=6),
       st.lists(st.integers(0, 2), max_size=6),
       st.lists(st.integers(0, 2), max_size=6))
def test_edit_distance_triangle_inequality(a, m, b):
    assert edit_distance(a, b) <= edit_distance(a, m) + edit_distance(m, b)


def test_ler_zero_iff_equal():
    refs = [[1, 2], [3]]
    assert label_error_rate(refs, [[1, 2], [3]]) == 0.0
    assert label_error_rate(refs, [[1, 2], [4]]) > 0.0
