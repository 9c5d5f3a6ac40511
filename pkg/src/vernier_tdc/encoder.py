"""Arbiter bank, thermometer codes and priority encoding.

The delayed start edge is the arbiter's data input and the delayed stop edge
its clock, so a stage reads 1 when start got there first.  Simultaneous edges
read 0.  Encoding takes the length of the leading run of ones; any one after
the first zero is reported as a bubble, never corrected.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class ThermometerCode:
    """Sampler outputs, ``bits[0]`` being stage 1."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.bits) < 1:
            raise ValueError("a thermometer code needs at least one bit")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"thermometer bits must be 0/1, got {self.bits!r}")

    @classmethod
    def from_string(cls, text: str) -> "ThermometerCode":
        text = text.strip()
        if not text or set(text) - {"0", "1"}:
            raise ValueError(f"not a bit string: {text!r}")
        return cls(tuple(int(c) for c in text))

    @classmethod
    def canonical(cls, value: int, n: int) -> "ThermometerCode":
        """``value`` ones followed by zeros, ``n`` bits in total."""
        if not 0 <= value <= n:
            raise ValueError(f"value {value} outside [0, {n}]")
        return cls((1,) * value + (0,) * (n - value))

    def __len__(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


def code_width(n_stages: int) -> int:
    """Binary word width able to hold values 0..n_stages."""
    return max(1, int(n_stages).bit_length())


@dataclass(frozen=True)
class BinaryCode:
    value: int
    width: int
    overrange: bool = False
    underrange: bool = False
    bubble: bool = False

    def __post_init__(self):
        if self.value < 0 or self.value >= 2**self.width:
            raise ValueError(f"value {self.value} does not fit in {self.width} bits")

    @property
    def bits(self) -> str:
        """MSB-first bit string padded to ``width``."""
        return format(self.value, f"0{self.width}b")

    @property
    def flags(self) -> tuple[str, ...]:
        names = ("underrange", "overrange", "bubble")
        return tuple(n for n in names if getattr(self, n))

    def with_underrange(self) -> "BinaryCode":
        return replace(self, value=0, overrange=False, underrange=True)


def arbiter_sample(data_edge: int, clock_edge: int) -> int:
    """1 iff the data edge strictly precedes the clock edge."""
    return 1 if data_edge < clock_edge else 0


def sample_bank(start_taps, stop_taps) -> ThermometerCode:
    start_taps = list(start_taps)
    stop_taps = list(stop_taps)
    if len(start_taps) != len(stop_taps):
        raise ValueError(
            f"tap count mismatch: {len(start_taps)} start vs {len(stop_taps)} stop"
        )
    if not start_taps:
        raise ValueError("sampler bank needs at least one stage")
    return ThermometerCode(tuple(arbiter_sample(a, b) for a, b in zip(start_taps, stop_taps)))


def leading_ones(code: ThermometerCode) -> tuple[int, bool]:
    """Length of the initial run of ones, and whether a one follows a zero."""
    count = 0
    for b in code.bits:
        if not b:
            break
        count += 1
    bubble = any(code.bits[count:])
    return count, bubble


def priority_encode(code: ThermometerCode) -> BinaryCode:
    n = len(code)
    value, bubble = leading_ones(code)
    return BinaryCode(value=value, width=code_width(n), overrange=value == n, bubble=bubble)


def sample_bank_batch(start_taps: np.ndarray, stop_taps: np.ndarray) -> np.ndarray:
    """Row-wise :func:`sample_bank` over ``(n, N)`` tap arrays, as a bool matrix."""
    start_taps = np.asarray(start_taps)
    stop_taps = np.asarray(stop_taps)
    if start_taps.shape != stop_taps.shape:
        raise ValueError(f"tap shape mismatch: {start_taps.shape} vs {stop_taps.shape}")
    return start_taps < stop_taps


def leading_ones_batch(bits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`leading_ones` over the rows of a bool matrix."""
    bits = np.asarray(bits, dtype=bool)
    n = bits.shape[1]
    zeros = ~bits
    first_zero = np.where(zeros.any(axis=1), zeros.argmax(axis=1), n)
    bubble = bits.sum(axis=1) > first_zero
    return first_zero.astype(np.int64), bubble
