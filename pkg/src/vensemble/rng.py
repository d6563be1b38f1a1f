"""Deterministic random streams keyed by ``(master_seed, stream_id)``.

Bulk draws (data, plans) use numpy's counter-based Philox generator seeded
through ``SeedSequence``.  Tree nodes need a few uniforms each and must not
depend on the order in which nodes are grown, so they read from a keyed
BLAKE2b counter stream instead: ``uniforms = PRF(learner_key, node_path, block)``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def _label_words(label: str) -> tuple[int, ...]:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 32, 4))


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_id: str = ""

    def __post_init__(self) -> None:
        if not 0 <= int(self.master_seed) <= _MASK64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "master_seed", int(self.master_seed))

    def child(self, label: str) -> SeedSpec:
        stream = f"{self.stream_id}/{label}" if self.stream_id else label
        return SeedSpec(self.master_seed, stream)

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.master_seed, spawn_key=_label_words(self.stream_id))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self.seed_sequence()))

    def key(self) -> bytes:
        """32-byte key for the node-level counter stream."""
        return hashlib.sha256(
            self.master_seed.to_bytes(8, "little") + b"\x00" + self.stream_id.encode("utf-8")
        ).digest()


def counter_uniforms(key: bytes, path: bytes, count: int) -> np.ndarray:
    """``count`` uniforms in [0, 1) addressed by ``(key, path)``; no hidden state."""
    out = bytearray()
    block = 0
    need = 8 * count
    while len(out) < need:
        h = hashlib.blake2b(path + block.to_bytes(4, "little"), key=key, digest_size=64)
        out += h.digest()
        block += 1
    words = np.frombuffer(bytes(out[:need]), dtype="<u8")
    return (words >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
