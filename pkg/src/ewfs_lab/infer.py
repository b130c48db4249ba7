"""Decoders mapping measured friend bitstrings to +-1 outcomes.

These realise the observer-side observables: each decoder assigns +1 to
one friend branch and -1 to the other, with different robustness to
readout noise.  Deterministic decoders also expose a diagonal +-1
valuation over basis states for exact (sampling-free) expectations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .qsim import RngStream


class DecoderError(ValueError):
    """Raised for invalid decoder construction or use."""


@dataclass(frozen=True)
class SignSingle:
    """+1 if the bit at ``position`` reads 0, else -1."""

    position: int
    register_size: int

    def __post_init__(self):
        if not 0 <= self.position < self.register_size:
            raise DecoderError(
                f"position {self.position} outside register of {self.register_size}"
            )


@dataclass(frozen=True)
class RandomSingle:
    """SignSingle at a uniformly drawn position; consumes the rng per call."""

    register_size: int


@dataclass(frozen=True)
class MajorityVote:
    """+1 if the Hamming weight is below n/2, else -1; n must be odd."""

    register_size: int

    def __post_init__(self):
        if self.register_size % 2 == 0:
            raise DecoderError(
                f"majority vote needs an odd register (got {self.register_size}); "
                "even registers would need a tie-break that biases the marginals"
            )


@dataclass(frozen=True)
class ZeroVsRest:
    """+1 only on the all-zeros string; any other bitstring decodes to -1."""

    register_size: int


@dataclass(frozen=True)
class HammingThreshold:
    """+1 if the Hamming weight is strictly below ``threshold``, else -1."""

    register_size: int
    threshold: int

    def __post_init__(self):
        if not 0 < self.threshold <= self.register_size:
            raise DecoderError(
                f"threshold {self.threshold} outside (0, {self.register_size}]"
            )


Decoder = Union[SignSingle, RandomSingle, MajorityVote, ZeroVsRest, HammingThreshold]

#: Decoder factory names accepted by configs and the command line.
DECODER_NAMES = ("majority_vote", "random_single", "sign_single",
                 "zero_vs_rest", "hamming_threshold")


def make_decoder(name: str, register_size: int, *, position: int = 0,
                 threshold: int | None = None) -> Decoder:
    """Instantiate a decoder by name for a register of ``register_size``."""
    if name == "majority_vote":
        return MajorityVote(register_size)
    if name == "random_single":
        return RandomSingle(register_size)
    if name == "sign_single":
        return SignSingle(position, register_size)
    if name == "zero_vs_rest":
        return ZeroVsRest(register_size)
    if name == "hamming_threshold":
        t = threshold if threshold is not None else default_hamming_threshold(register_size)
        return HammingThreshold(register_size, t)
    raise DecoderError(f"unknown decoder {name!r} (expected one of {DECODER_NAMES})")


def default_hamming_threshold(register_size: int) -> int:
    """ceil(n/3): weight below a third of the register reads as branch 0."""
    return max(1, math.ceil(register_size / 3))


def default_peek_strategy(friend_kind) -> str:
    """The natural decoder for each friend family's branch structure."""
    from .ewfs import Dicke, Ghz, RandomUnitary

    if isinstance(friend_kind, Ghz):
        return "majority_vote"
    if isinstance(friend_kind, RandomUnitary):
        return "zero_vs_rest"
    if isinstance(friend_kind, Dicke):
        return "hamming_threshold"
    raise DecoderError(f"no default decoder for {friend_kind!r}")


def decode_batch(decoder: Decoder, bits: np.ndarray,
                 rng: RngStream | None = None) -> np.ndarray:
    """Vectorised decode of a (shots, n) bit matrix into +-1 values."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 2 or bits.shape[1] != decoder.register_size:
        raise DecoderError(
            f"bit matrix shape {bits.shape} does not match register size "
            f"{decoder.register_size}"
        )
    if isinstance(decoder, SignSingle):
        return (1 - 2 * bits[:, decoder.position].astype(np.int8)).astype(np.int8)
    if isinstance(decoder, RandomSingle):
        if rng is None:
            raise DecoderError("RandomSingle decoding requires an rng")
        pos = rng.gen.integers(0, decoder.register_size, size=bits.shape[0])
        picked = bits[np.arange(bits.shape[0]), pos]
        return (1 - 2 * picked.astype(np.int8)).astype(np.int8)
    weights = bits.sum(axis=1)
    if isinstance(decoder, MajorityVote):
        return np.where(weights < decoder.register_size / 2, 1, -1).astype(np.int8)
    if isinstance(decoder, ZeroVsRest):
        return np.where(weights == 0, 1, -1).astype(np.int8)
    if isinstance(decoder, HammingThreshold):
        return np.where(weights < decoder.threshold, 1, -1).astype(np.int8)
    raise DecoderError(f"unknown decoder {decoder!r}")


def decode(decoder: Decoder, bits, rng: RngStream | None = None) -> int:
    """Decode one bitstring (sequence of 0/1, bit j = register qubit j)."""
    row = np.asarray(bits, dtype=np.uint8).reshape(1, -1)
    return int(decode_batch(decoder, row, rng)[0])


def decoder_as_diagonal(decoder: Decoder) -> np.ndarray:
    """The +-1 valuation over all 2^n basis states of a deterministic decoder.

    Index z is read little-endian (bit j of z = register qubit j), matching
    :func:`decode` on the corresponding bitstring.  RandomSingle has no
    diagonal form and is rejected; exact-expectation paths therefore never
    consume randomness.
    """
    if isinstance(decoder, RandomSingle):
        raise DecoderError("RandomSingle has no deterministic diagonal form")
    n = decoder.register_size
    zs = np.arange(2 ** n, dtype=np.int64)
    if isinstance(decoder, SignSingle):
        return (1 - 2 * ((zs >> decoder.position) & 1)).astype(np.int8)
    weights = np.zeros(zs.shape, dtype=np.int64)
    for b in range(n):
        weights += (zs >> b) & 1
    if isinstance(decoder, MajorityVote):
        return np.where(weights < n / 2, 1, -1).astype(np.int8)
    if isinstance(decoder, ZeroVsRest):
        return np.where(weights == 0, 1, -1).astype(np.int8)
    if isinstance(decoder, HammingThreshold):
        return np.where(weights < decoder.threshold, 1, -1).astype(np.int8)
    raise DecoderError(f"unknown decoder {decoder!r}")
