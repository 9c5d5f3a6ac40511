"""Vernier delay-line and single-line flash TDC models.

Both converters follow the scikit-learn estimator protocol.  ``fit`` realizes
the delay lines (drawing static mismatch from ``random_state``) and the
fitted object converts ``(n_samples, 2)`` arrays of ``[t_start, t_stop]``
femtosecond pairs:

>>> tdc = VernierTDC(n_stages=8).fit()
>>> tdc.predict([[0, 110_000]]).tolist()
[4]

Seeds
-----
A single conversion driven by seed ``s`` draws start-line jitter from
``sub_seed(s, 0)`` and stop-line jitter from ``sub_seed(s, 1)``.  A batch
with seed ``s`` gives row ``i`` the conversion seed ``sub_seed(s, i)``.  When
no seed is passed, ``sub_seed(random_state, 2)`` is used.  The slow/start line
mismatch comes from ``sub_seed(random_state, 0)`` and the fast line's from
``sub_seed(random_state, 1)``.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import (
    ConfigurationError,
    DelayLineInstance,
    DelayLineSpec,
    _checked_add,
    as_duration,
    check_seed,
    check_time,
    check_time_pairs,
    gaussian_fs,
    make_rng,
    realize_delay_line,
    sub_seed,
)
from .encoder import BinaryCode, ThermometerCode, code_width, leading_ones_batch

CSV_HEADER = ("t_start_fs", "t_stop_fs", "code", "bits", "flags", "dt_est_fs")


@dataclass(frozen=True)
class TdcMetrics:
    lsb: int
    full_scale_range: int
    n_codes: int


@dataclass(frozen=True)
class ConversionResult:
    t_start: int
    t_stop: int
    code: BinaryCode
    thermometer: ThermometerCode
    delta_t_estimate: int

    @property
    def flags(self) -> tuple[str, ...]:
        return self.code.flags

    @property
    def underrange(self) -> bool:
        return self.code.underrange

    @property
    def overrange(self) -> bool:
        return self.code.overrange

    @property
    def bubble(self) -> bool:
        return self.code.bubble

    def to_row(self) -> list:
        """Fields in :data:`CSV_HEADER` order; no flags renders as ``-``."""
        return [
            self.t_start,
            self.t_stop,
            self.code.value,
            self.code.bits,
            "|".join(self.flags) or "-",
            self.delta_t_estimate,
        ]


def midpoint_estimate(value, lsb: int):
    """Bin-midpoint interval ``(value + 1/2) * lsb``, truncated to whole fs.

    Works on ints and int64 arrays alike.  Exact whenever ``lsb`` is even.
    """
    return ((2 * value + 1) * lsb) // 2


class _DelayLineTDC(TransformerMixin, BaseEstimator):
    """Shared conversion machinery; subclasses supply the two tap vectors."""

    def _check_common(self):
        if isinstance(self.n_stages, bool) or not isinstance(self.n_stages, (int, np.integer)):
            raise ConfigurationError(f"n_stages must be an integer, got {self.n_stages!r}")
        if self.n_stages < 1:
            raise ConfigurationError(f"n_stages must be >= 1, got {self.n_stages}")
        check_seed(self.random_state)

    def fit(self, X=None, y=None):
        """Realize the delay lines.  ``X`` and ``y`` are ignored."""
        self._realize()
        self.n_stages_ = int(self.n_stages)
        self.lsb_ = self.metrics().lsb
        return self

    def metrics(self) -> TdcMetrics:
        lsb = self._lsb()
        return TdcMetrics(lsb=lsb, full_scale_range=self.n_stages * lsb, n_codes=self.n_stages + 1)

    @property
    def jittered(self) -> bool:
        return as_duration(self.jitter_sigma) > 0

    def _default_seed(self) -> int:
        return sub_seed(self.random_state, 2)

    def _jitter(self, seeds, line_index):
        sigma = as_duration(self.jitter_sigma)
        return np.stack(
            [gaussian_fs(make_rng(sub_seed(s, line_index)), sigma, self.n_stages_) for s in seeds]
        )

    def _taps(self, X: np.ndarray, conversion_seeds):
        """Start and stop tap matrices, each ``(n, N)`` int64."""
        start_inc = self._start_delays()[None, :]
        stop_inc = self._stop_delays()
        if stop_inc is not None:
            stop_inc = stop_inc[None, :]
        if self.jittered:
            start_inc = start_inc + self._jitter(conversion_seeds, 0)
            if stop_inc is not None:
                stop_inc = stop_inc + self._jitter(conversion_seeds, 1)
        start = _checked_add(X[:, 0], start_inc)
        if stop_inc is None:
            stop = np.broadcast_to(X[:, 1:2], start.shape)
        else:
            stop = _checked_add(X[:, 1], stop_inc)
        return start, stop

    def _convert(self, X, seed=None, single=False):
        check_is_fitted(self, "lsb_")
        X = check_time_pairs(X)
        if seed is None:
            seed = self._default_seed()
        seed = check_seed(seed)
        if not self.jittered:
            conversion_seeds = None
        elif single:
            conversion_seeds = [seed]
        else:
            conversion_seeds = [sub_seed(seed, i) for i in range(X.shape[0])]
        start, stop = self._taps(X, conversion_seeds)
        bits = start < stop
        codes, bubble = leading_ones_batch(bits)
        underrange = X[:, 1] < X[:, 0]
        codes = np.where(underrange, 0, codes)
        overrange = codes == self.n_stages_
        return X, bits, codes, bubble, underrange, overrange

    def predict(self, X, seed=None) -> np.ndarray:
        """Output code for each ``[t_start, t_stop]`` row."""
        return self._convert(X, seed)[2]

    def transform(self, X, seed=None) -> np.ndarray:
        """Thermometer code of each row as a ``(n, N)`` uint8 matrix."""
        return self._convert(X, seed)[1].astype(np.uint8)

    def delta_t_estimate(self, X, seed=None) -> np.ndarray:
        return midpoint_estimate(self.predict(X, seed), self.lsb_)

    def convert(self, t_start: int, t_stop: int, seed=None) -> ConversionResult:
        """Full conversion of one start/stop pair."""
        t_start, t_stop = check_time(t_start), check_time(t_stop)
        _, bits, codes, bubble, under, over = self._convert(
            [[t_start, t_stop]], seed, single=True
        )
        value = int(codes[0])
        code = BinaryCode(
            value=value,
            width=code_width(self.n_stages_),
            overrange=bool(over[0]),
            underrange=bool(under[0]),
            bubble=bool(bubble[0]),
        )
        return ConversionResult(
            t_start=t_start,
            t_stop=t_stop,
            code=code,
            thermometer=ThermometerCode(tuple(int(b) for b in bits[0])),
            delta_t_estimate=int(midpoint_estimate(value, self.lsb_)),
        )

    def event_trace(self, t_start: int, t_stop: int, seed=None):
        """Replay one conversion as a discrete-event simulation.

        Edges advance one stage per event through a time-ordered queue; each
        arbiter latches when its clock (stop) edge arrives.  At equal times
        the clock event is processed first, so a tie reads 0.  Jitter uses the
        same streams as :meth:`convert`.

        Returns ``(events, thermometer)`` where events are
        ``(time_fs, "start" | "stop", stage)`` tuples in processing order.
        """
        check_is_fitted(self, "lsb_")
        t_start, t_stop = check_time(t_start), check_time(t_stop)
        if seed is None:
            seed = self._default_seed()
        start_inc = [int(d) for d in self._start_delays()]
        stop_inc = self._stop_delays()
        stop_inc = None if stop_inc is None else [int(d) for d in stop_inc]
        if self.jittered:
            sigma = as_duration(self.jitter_sigma)
            j = gaussian_fs(make_rng(sub_seed(seed, 0)), sigma, self.n_stages_)
            start_inc = [d + int(x) for d, x in zip(start_inc, j)]
            if stop_inc is not None:
                j = gaussian_fs(make_rng(sub_seed(seed, 1)), sigma, self.n_stages_)
                stop_inc = [d + int(x) for d, x in zip(stop_inc, j)]

        # (time, priority, line, stage); stop sorts before start on ties
        queue = [(t_start + start_inc[0], 1, "start", 1)]
        if stop_inc is None:
            for k in range(1, self.n_stages_ + 1):
                queue.append((t_stop, 0, "stop", k))
        else:
            queue.append((t_stop + stop_inc[0], 0, "stop", 1))
        heapq.heapify(queue)

        arrived = [False] * (self.n_stages_ + 1)
        bits = [0] * self.n_stages_
        events = []
        while queue:
            t, prio, line, k = heapq.heappop(queue)
            events.append((t, line, k))
            if line == "start":
                arrived[k] = True
                if k < self.n_stages_:
                    heapq.heappush(queue, (t + start_inc[k], 1, "start", k + 1))
            else:
                bits[k - 1] = 1 if arrived[k] else 0
                if stop_inc is not None and k < self.n_stages_:
                    heapq.heappush(queue, (t + stop_inc[k], 0, "stop", k + 1))
        return events, ThermometerCode(tuple(bits))


class VernierTDC(_DelayLineTDC):
    """Two-line Vernier TDC.

    The start edge runs down the slow line (``tau_slow`` per stage), the stop
    edge down the fast line (``tau_fast``); arbiter ``k`` compares the two
    stage-``k`` taps.  The resolution is ``tau_slow - tau_fast``.

    Durations may be given as int femtoseconds or picosecond strings.

    Parameters
    ----------
    n_stages : int, default=64
    tau_slow : int or str, default="102.7"
    tau_fast : int or str, default="77.7"
    mismatch_sigma : int or str, default=0
        Std of the static per-stage delay offset, applied to both lines.
    jitter_sigma : int or str, default=0
        Std of the per-edge, per-stage delay noise, applied to both lines.
    random_state : int, default=0
        Unsigned 64-bit seed for mismatch and default jitter streams.
    """

    def __init__(
        self,
        n_stages=64,
        tau_slow="102.7",
        tau_fast="77.7",
        mismatch_sigma=0,
        jitter_sigma=0,
        random_state=0,
    ):
        self.n_stages = n_stages
        self.tau_slow = tau_slow
        self.tau_fast = tau_fast
        self.mismatch_sigma = mismatch_sigma
        self.jitter_sigma = jitter_sigma
        self.random_state = random_state

    def line_specs(self) -> tuple[DelayLineSpec, DelayLineSpec]:
        self._check_common()
        kw = dict(
            n_stages=int(self.n_stages),
            mismatch_sigma=as_duration(self.mismatch_sigma),
            jitter_sigma=as_duration(self.jitter_sigma),
        )
        slow = DelayLineSpec(nominal_stage_delay=as_duration(self.tau_slow), **kw)
        fast = DelayLineSpec(nominal_stage_delay=as_duration(self.tau_fast), **kw)
        if slow.nominal_stage_delay <= fast.nominal_stage_delay:
            raise ConfigurationError(
                f"tau_slow ({slow.nominal_stage_delay} fs) must exceed "
                f"tau_fast ({fast.nominal_stage_delay} fs)"
            )
        return slow, fast

    def _lsb(self) -> int:
        slow, fast = self.line_specs()
        return slow.nominal_stage_delay - fast.nominal_stage_delay

    def _realize(self):
        slow, fast = self.line_specs()
        self.slow_line_: DelayLineInstance = realize_delay_line(slow, sub_seed(self.random_state, 0))
        self.fast_line_: DelayLineInstance = realize_delay_line(fast, sub_seed(self.random_state, 1))

    def _start_delays(self):
        return self.slow_line_.as_array()

    def _stop_delays(self):
        return self.fast_line_.as_array()


class FlashTDC(_DelayLineTDC):
    """Single delay line sampled by the undelayed stop edge.

    Resolution is one stage delay ``tau``.

    Parameters
    ----------
    n_stages : int, default=64
    tau : int or str, default="102.7"
    mismatch_sigma, jitter_sigma : int or str, default=0
    random_state : int, default=0
    """

    def __init__(self, n_stages=64, tau="102.7", mismatch_sigma=0, jitter_sigma=0, random_state=0):
        self.n_stages = n_stages
        self.tau = tau
        self.mismatch_sigma = mismatch_sigma
        self.jitter_sigma = jitter_sigma
        self.random_state = random_state

    def line_spec(self) -> DelayLineSpec:
        self._check_common()
        return DelayLineSpec(
            n_stages=int(self.n_stages),
            nominal_stage_delay=as_duration(self.tau),
            mismatch_sigma=as_duration(self.mismatch_sigma),
            jitter_sigma=as_duration(self.jitter_sigma),
        )

    def _lsb(self) -> int:
        return self.line_spec().nominal_stage_delay

    def _realize(self):
        self.line_: DelayLineInstance = realize_delay_line(
            self.line_spec(), sub_seed(self.random_state, 0)
        )

    def _start_delays(self):
        return self.line_.as_array()

    def _stop_delays(self):
        return None


def ideal_code(tdc, delta_t) -> int:
    """Noise-free code for interval ``delta_t``: #{k in 1..N : k*lsb < delta_t}.

    Closed form, meant as a reference for the event-level converters.
    """
    m = tdc.metrics()
    delta_t = check_time(delta_t)
    if delta_t <= 0:
        return 0
    return min(tdc.n_stages, (delta_t - 1) // m.lsb)


def vernier_convert(tdc: VernierTDC, t_start: int, t_stop: int, seed=None) -> ConversionResult:
    """Convert with a Vernier TDC, fitting a fresh copy if needed."""
    if not hasattr(tdc, "lsb_"):
        tdc = VernierTDC(**tdc.get_params()).fit()
    return tdc.convert(t_start, t_stop, seed)


def flash_convert(tdc: FlashTDC, t_start: int, t_stop: int, seed=None) -> ConversionResult:
    """Convert with a flash TDC, fitting a fresh copy if needed."""
    if not hasattr(tdc, "lsb_"):
        tdc = FlashTDC(**tdc.get_params()).fit()
    return tdc.convert(t_start, t_stop, seed)
