"""Integer femtosecond timebase, seeded randomness and delay-line propagation.

Every instant and duration in the package is a plain ``int`` counting
femtoseconds.  Arrays of times are ``numpy.int64``.  Values outside the
signed 64-bit range raise :class:`TimeOverflowError` instead of wrapping.

Randomness
----------
All random draws go through :func:`make_rng`, i.e. numpy's ``PCG64`` bit
generator, and Gaussian variates come from ``Generator.standard_normal``
(numpy's ziggurat sampler) scaled by sigma and rounded half-to-even to whole
femtoseconds.  Independent streams are derived with :func:`sub_seed`.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

import numpy as np

FS_PER_PS = 1000
FS_PER_NS = 1_000_000

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1
UINT64_MAX = 2**64 - 1

_PS_PATTERN = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)$")


class TimeOverflowError(OverflowError):
    """A time value left the signed 64-bit femtosecond range."""


class ConfigurationError(ValueError):
    """Invalid model parameters."""


def check_time(value: int) -> int:
    """Return ``value`` as an int after checking it fits the int64 timebase."""
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, (int, np.integer)):
        raise TypeError(f"time must be an integer number of femtoseconds, got {value!r}")
    value = int(value)
    if not INT64_MIN <= value <= INT64_MAX:
        raise TimeOverflowError(f"{value} fs is outside the int64 timebase")
    return value


def time_from_ps(text: str) -> int:
    """Parse a decimal picosecond string into exact femtoseconds.

    At most three fractional digits are accepted, anything finer would not
    be representable.

    >>> time_from_ps("102.7")
    102700
    """
    text = str(text).strip()
    if not _PS_PATTERN.match(text):
        raise ValueError(f"not a decimal picosecond value: {text!r}")
    try:
        value = Decimal(text)
    except InvalidOperation as exc:  # pragma: no cover - guarded by the regex
        raise ValueError(f"not a decimal picosecond value: {text!r}") from exc
    fs = value * FS_PER_PS
    if fs != fs.to_integral_value():
        raise ValueError(f"{text!r} has more than 3 fractional picosecond digits")
    return check_time(int(fs))


def format_ps(t: int) -> str:
    """Render femtoseconds as the shortest exact picosecond string."""
    t = check_time(t)
    sign = "-" if t < 0 else ""
    whole, frac = divmod(abs(t), FS_PER_PS)
    if frac == 0:
        return f"{sign}{whole}"
    return f"{sign}{whole}.{frac:03d}".rstrip("0")


def as_duration(value) -> int:
    """Coerce an ``int`` (fs) or a picosecond string into femtoseconds."""
    if isinstance(value, str):
        return time_from_ps(value)
    return check_time(value)


def check_seed(seed) -> int:
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed <= UINT64_MAX:
        raise ValueError(f"seed {seed} is outside the unsigned 64-bit range")
    return seed


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for ``seed``."""
    return np.random.Generator(np.random.PCG64(check_seed(seed)))


def sub_seed(base: int, index: int) -> int:
    """Deterministic child seed for stream ``index`` under ``base``.

    Uses ``numpy.random.SeedSequence(base, spawn_key=(index,))`` and takes the
    first 64-bit word of its generated state.
    """
    if index < 0:
        raise ValueError("stream index must be non-negative")
    ss = np.random.SeedSequence(check_seed(base), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def gaussian_fs(rng: np.random.Generator, sigma: int, size) -> np.ndarray:
    """Zero-mean Gaussian offsets with std ``sigma`` fs, rounded to whole fs."""
    if sigma == 0:
        return np.zeros(size, dtype=np.int64)
    return np.rint(rng.standard_normal(size) * sigma).astype(np.int64)


@dataclass(frozen=True)
class DelayLineSpec:
    """Nominal description of a chain of identical delay elements.

    All durations are integer femtoseconds.  ``mismatch_sigma`` is the std of
    the static per-stage offset drawn once per realized line, ``jitter_sigma``
    the std of the random per-edge, per-stage delay noise.
    """

    n_stages: int
    nominal_stage_delay: int
    mismatch_sigma: int = 0
    jitter_sigma: int = 0

    def __post_init__(self):
        if isinstance(self.n_stages, bool) or not isinstance(self.n_stages, (int, np.integer)):
            raise ConfigurationError(f"n_stages must be an integer, got {self.n_stages!r}")
        if self.n_stages < 1:
            raise ConfigurationError(f"n_stages must be >= 1, got {self.n_stages}")
        if check_time(self.nominal_stage_delay) <= 0:
            raise ConfigurationError(
                f"nominal_stage_delay must be > 0 fs, got {self.nominal_stage_delay}"
            )
        if check_time(self.mismatch_sigma) < 0:
            raise ConfigurationError("mismatch_sigma must be >= 0")
        if check_time(self.jitter_sigma) < 0:
            raise ConfigurationError("jitter_sigma must be >= 0")


@dataclass(frozen=True)
class DelayLineInstance:
    """Realized per-stage delays (fs) of one chain."""

    stage_delays: tuple[int, ...]

    def __post_init__(self):
        if len(self.stage_delays) == 0:
            raise ConfigurationError("a delay line needs at least one stage")
        for i, d in enumerate(self.stage_delays, start=1):
            if check_time(d) <= 0:
                raise ConfigurationError(
                    f"stage {i} realized a non-positive delay ({d} fs)"
                )

    @property
    def n_stages(self) -> int:
        return len(self.stage_delays)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.stage_delays, dtype=np.int64)

    def cumulative(self) -> np.ndarray:
        """Tap offsets relative to the input edge, tap 1 first."""
        if sum(self.stage_delays) > INT64_MAX:
            raise TimeOverflowError("total line delay exceeds the int64 timebase")
        return np.cumsum(self.as_array())


def realize_delay_line(spec: DelayLineSpec, seed: int) -> DelayLineInstance:
    """Draw the static mismatch of one delay line.

    Stages are numbered from 1 in error messages, matching tap numbering.

    With ``mismatch_sigma == 0`` the seed is ignored and the nominal vector is
    returned.
    """
    check_seed(seed)
    nominal = np.full(spec.n_stages, spec.nominal_stage_delay, dtype=np.int64)
    if spec.mismatch_sigma == 0:
        delays = nominal
    else:
        offsets = gaussian_fs(make_rng(seed), spec.mismatch_sigma, spec.n_stages)
        delays = nominal + offsets
    bad = np.flatnonzero(delays <= 0)
    if bad.size:
        i = int(bad[0])
        raise ConfigurationError(
            f"stage {i + 1} realized a non-positive delay ({int(delays[i])} fs); "
            "reduce mismatch_sigma"
        )
    return DelayLineInstance(tuple(int(d) for d in delays))


def _checked_add(edges: np.ndarray, increments: np.ndarray) -> np.ndarray:
    """``edges[..., None] + cumsum(increments)`` with an int64 range guard."""
    edges = np.asarray(edges, dtype=np.int64)
    bound = (
        float(np.abs(edges.astype(float)).max(initial=0))
        + float(np.abs(np.asarray(increments, dtype=float)).sum(axis=-1).max(initial=0))
    )
    # float bound is conservative to within a few fs at 2**63
    if bound >= float(INT64_MAX) - 4096:
        raise TimeOverflowError("tap times would overflow the int64 timebase")
    return edges[..., None] + np.cumsum(increments, axis=-1)


def tap_times(line: DelayLineInstance, edge: int, jitter_sigma: int = 0, seed: int = 0) -> list[int]:
    """Arrival time of ``edge`` at each tap of ``line``, tap 1 first.

    Jitter is drawn fresh for every stage from ``make_rng(seed)``; with
    ``jitter_sigma == 0`` the result is exact and the seed unused.
    """
    edge = check_time(edge)
    if check_time(jitter_sigma) < 0:
        raise ValueError("jitter_sigma must be >= 0")
    increments = line.as_array()
    if jitter_sigma:
        increments = increments + gaussian_fs(make_rng(seed), jitter_sigma, line.n_stages)
    return [int(t) for t in _checked_add(np.array(edge), increments)]


def check_time_pairs(X) -> np.ndarray:
    """Validate an ``(n, 2)`` array of ``[t_start, t_stop]`` femtosecond pairs.

    Float input is accepted only when every entry is integral; the result is
    ``int64``.
    """
    arr = np.asarray(X)
    if arr.ndim == 1 and arr.shape == (2,):
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected an (n_samples, 2) array of start/stop times, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError("at least one start/stop pair is required")
    if arr.dtype == object:
        vals = arr.ravel().tolist()
        for v in vals:
            check_time(v)
        return np.array(vals, dtype=np.int64).reshape(arr.shape)
    if np.issubdtype(arr.dtype, np.floating):
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise ValueError("times must be whole femtoseconds")
        if np.any(np.abs(arr) >= 2.0**63):
            raise TimeOverflowError("time outside the int64 timebase")
        return arr.astype(np.int64)
    if not np.issubdtype(arr.dtype, np.integer):
        raise TypeError(f"times must be integers, got dtype {arr.dtype}")
    if arr.dtype == np.uint64 and np.any(arr > INT64_MAX):
        raise TimeOverflowError("time outside the int64 timebase")
    return arr.astype(np.int64)
