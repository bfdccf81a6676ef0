"""Named trainable parameters and the binary checkpoint format."""

from __future__ import annotations

import struct
from typing import Iterator

import numpy as np

from ..errors import ConfigError, ContractError
from .tensor import Tensor

_MAGIC = b"ACSN"
_VERSION = 1


class ParamStore:
    """Unique-named float64 parameters, each with a gradient slot."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, shape: tuple[int, ...]) -> Tensor:
        if name in self._params:
            raise ContractError(f"duplicate parameter name {name!r}")
        t = Tensor(np.zeros(shape, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return sorted(self._params)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        for name in self.names():
            yield name, self._params[name]

    def n_entries(self) -> int:
        return sum(p.data.size for p in self._params.values())

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = None

    def flat_grad(self) -> np.ndarray:
        """All gradients concatenated in name order (zeros where unset)."""
        parts = []
        for _, p in self.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            parts.append(g.ravel())
        return np.concatenate(parts) if parts else np.zeros(0)

    def copy_values(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self._params.items()}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        for name, arr in values.items():
            p = self._params[name]
            if p.data.shape != arr.shape:
                raise ContractError(
                    f"shape mismatch for {name!r}: "
                    f"{p.data.shape} vs {arr.shape}")
            p.data = np.array(arr, dtype=np.float64, copy=True)


def init_uniform(store: ParamStore, lo: float, hi: float, seed: int) -> ParamStore:
    """Fill every parameter i.i.d. uniform on [lo, hi], deterministically.

    Parameters are visited in sorted-name order so the result depends only
    on (names, shapes, seed).
    """
    if not lo < hi:
        raise ConfigError(f"init range is empty: lo={lo} >= hi={hi}")
    rng = np.random.default_rng(np.random.PCG64(seed))
    for _, p in store.items():
        p.data = rng.uniform(lo, hi, size=p.data.shape)
    return store


# -- checkpoint format -------------------------------------------------------
# magic "ACSN", uint32 version, uint32 param count, then per parameter
# (sorted by name): uint32 name length + UTF-8 name, uint32 ndim,
# ndim x uint64 dims, float64 little-endian data. Round-trips bit-exactly.

def save_checkpoint(store: ParamStore, path) -> None:
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<II", _VERSION, len(store)))
        for name, p in store.items():
            raw = name.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<I", p.data.ndim))
            f.write(struct.pack(f"<{p.data.ndim}Q", *p.data.shape))
            f.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != _MAGIC:
            raise ContractError(f"{path}: not a checkpoint file")
        version, count = struct.unpack("<II", f.read(8))
        if version != _VERSION:
            raise ContractError(f"{path}: unsupported checkpoint version {version}")
        out: dict[str, np.ndarray] = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<I", f.read(4))
            name = f.read(nlen).decode("utf-8")
            (ndim,) = struct.unpack("<I", f.read(4))
            shape = struct.unpack(f"<{ndim}Q", f.read(8 * ndim))
            n = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(f.read(8 * n), dtype="<f8").reshape(shape)
            out[name] = np.array(data, dtype=np.float64, copy=True)
    return out
