"""Counter-based random streams keyed by a master seed and a label path.

Every stream is a Philox generator whose 128-bit key is a hash of
``(seed, label_1, ..., label_k)``. Deriving a child never consumes
randomness from the parent, so results do not depend on the order in
which sub-streams are created or on how trials are spread over workers.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np

Label = Union[int, str]

_MAX_SEED = 2**64 - 1


def _label_bytes(label: Label) -> bytes:
    # type tag keeps the int 7 and the string "7" apart
    if isinstance(label, (bool, np.bool_)):
        raise TypeError("boolean labels are ambiguous")
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError(f"integer labels must be nonnegative, got {label}")
        return b"i" + int(label).to_bytes(16, "little")
    if isinstance(label, str):
        return b"s" + label.encode("utf-8")
    raise TypeError(f"unsupported label type {type(label).__name__}")


def _derive(key: bytes, label: Label) -> bytes:
    return hashlib.blake2b(key + _label_bytes(label), digest_size=16).digest()


@dataclass(frozen=True)
class Rng:
    """Reproducible random stream handle.

    ``Rng(seed).generator()`` always returns a generator in the same
    state, so passing one ``Rng`` to two consumers gives them the same
    numbers. Use :meth:`child` to hand out independent sub-streams.
    """

    seed: int
    path: tuple = ()
    _key: bytes = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool):
            raise TypeError("seed must be an integer")
        if not 0 <= int(self.seed) <= _MAX_SEED:
            raise ValueError("seed must be a 64-bit unsigned integer")
        key = hashlib.blake2b(int(self.seed).to_bytes(8, "little"), digest_size=16).digest()
        for label in self.path:
            key = _derive(key, label)
        object.__setattr__(self, "_key", key)

    def child(self, *labels: Label) -> "Rng":
        """Independent sub-stream identified by ``labels`` under this stream."""
        key = self._key
        for label in labels:
            key = _derive(key, label)
        out = object.__new__(Rng)
        object.__setattr__(out, "seed", self.seed)
        object.__setattr__(out, "path", self.path + tuple(labels))
        object.__setattr__(out, "_key", key)
        return out

    def generator(self) -> np.random.Generator:
        """A fresh numpy generator positioned at the start of this stream."""
        words = np.frombuffer(self._key, dtype="<u8")
        return np.random.Generator(np.random.Philox(key=words))


def as_generator(rng: Any) -> Any:
    """Accept an :class:`Rng`, a numpy ``Generator`` or a duck-typed stub."""
    if isinstance(rng, Rng):
        return rng.generator()
    return rng
