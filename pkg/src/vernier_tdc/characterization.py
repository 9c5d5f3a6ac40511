"""Transfer curves, code transition points, DNL/INL and single-shot precision."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from sklearn.utils.validation import check_is_fitted

from .core import check_seed, check_time

_CHUNK = 1 << 16


@dataclass(frozen=True)
class TransferCurve:
    delta_t: np.ndarray
    codes: np.ndarray

    def __post_init__(self):
        if len(self.delta_t) != len(self.codes):
            raise ValueError("delta_t and codes differ in length")
        if np.any(np.diff(self.delta_t) <= 0):
            raise ValueError("delta_t must be strictly increasing")

    def rows(self):
        return zip(self.delta_t.tolist(), self.codes.tolist())


@dataclass(frozen=True)
class NonlinearityReport:
    lsb: int
    transitions: list[int]
    dnl: list[float]
    inl: list[float]
    dnl_peak: float
    inl_peak: float

    def to_dict(self) -> dict:
        return {
            "lsb_fs": self.lsb,
            "transitions_fs": list(self.transitions),
            "dnl": list(self.dnl),
            "inl": list(self.inl),
            "dnl_peak": self.dnl_peak,
            "inl_peak": self.inl_peak,
        }


@dataclass(frozen=True)
class PrecisionReport:
    delta_t: int
    n_trials: int
    code_mean: float
    code_std: float
    histogram: dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "delta_t_fs": self.delta_t,
            "n_trials": self.n_trials,
            "code_mean": self.code_mean,
            "code_std": self.code_std,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
        }


def _require_noiseless(tdc):
    check_is_fitted(tdc, "lsb_")
    if tdc.jittered:
        raise ValueError(
            "transfer sweeps need a jitter-free TDC; use single_shot for jittered ones"
        )


def _codes_at(tdc, delta_t: np.ndarray) -> np.ndarray:
    """Codes for intervals measured from ``t_start = 0``."""
    out = np.empty(len(delta_t), dtype=np.int64)
    for lo in range(0, len(delta_t), _CHUNK):
        chunk = delta_t[lo:lo + _CHUNK]
        X = np.column_stack([np.zeros_like(chunk), chunk])
        out[lo:lo + _CHUNK] = tdc.predict(X)
    return out


def sweep_transfer(tdc, t_min: int, t_max: int, step: int) -> TransferCurve:
    """Convert every grid interval ``t_min, t_min + step, ... <= t_max``."""
    _require_noiseless(tdc)
    t_min, t_max, step = check_time(t_min), check_time(t_max), check_time(step)
    if step < 1:
        raise ValueError("step must be at least 1 fs")
    if t_min >= t_max:
        raise ValueError(f"empty sweep: t_min={t_min} fs is not below t_max={t_max} fs")
    grid = np.arange(t_min, t_max + 1, step, dtype=np.int64)
    return TransferCurve(grid, _codes_at(tdc, grid))


def find_transitions(curve: TransferCurve) -> list[int]:
    """``T_k`` = first grid interval whose code is at least ``k``.

    Covers ``k = 1 .. max code``.  A decreasing code anywhere is an error.
    """
    codes = curve.codes
    if np.any(np.diff(codes) < 0):
        raise ValueError("transfer curve is not monotone")
    if len(codes) == 0 or codes.max() <= 0:
        return []
    ks = np.arange(1, int(codes.max()) + 1)
    idx = np.searchsorted(codes, ks, side="left")
    return [int(t) for t in curve.delta_t[idx]]


def measure_transitions(tdc, t_min=None, t_max=None, coarse_step=None) -> list[int]:
    """Transition points to 1 fs: coarse sweep, then bisect every code change.

    Defaults cover ``[0, full range + 2 LSB]`` (widened to the realized line
    skew when mismatch is present) with a coarse step of LSB/10.
    """
    _require_noiseless(tdc)
    lsb = tdc.lsb_
    if t_min is None:
        t_min = 0
    if t_max is None:
        t_max = _default_t_max(tdc)
    if coarse_step is None:
        coarse_step = max(1, lsb // 10)
    coarse = sweep_transfer(tdc, t_min, t_max, coarse_step)
    codes, grid = coarse.codes, coarse.delta_t
    if np.any(np.diff(codes) < 0):
        raise ValueError("transfer curve is not monotone")

    transitions = []
    for k in range(1, int(codes.max(initial=0)) + 1):
        hi_idx = int(np.searchsorted(codes, k, side="left"))
        hi = int(grid[hi_idx])
        if hi_idx == 0:
            transitions.append(hi)
            continue
        lo = int(grid[hi_idx - 1])
        # invariant: code(lo) < k <= code(hi)
        while hi - lo > 1:
            mid = lo + (hi - lo) // 2
            if tdc.predict([[0, mid]])[0] >= k:
                hi = mid
            else:
                lo = mid
        transitions.append(hi)
    return transitions


def _default_t_max(tdc) -> int:
    lsb = tdc.lsb_
    t_max = tdc.metrics().full_scale_range + 2 * lsb
    start = np.cumsum(tdc._start_delays())
    stop = tdc._stop_delays()
    skew = start - (np.cumsum(stop) if stop is not None else 0)
    return int(max(t_max, int(skew.max()) + 2 * lsb))


def dnl_inl(transitions, lsb: int) -> NonlinearityReport:
    """Edge-based nonlinearity in LSB units.

    ``dnl_k = (T_{k+1} - T_k)/lsb - 1`` for consecutive transitions and
    ``inl_k = (T_k - T_1)/lsb - (k - 1)``.
    """
    t = [check_time(x) for x in transitions]
    if len(t) < 2:
        raise ValueError(f"need at least 2 transitions, got {len(t)}")
    if lsb <= 0:
        raise ValueError("lsb must be positive")
    dnl = [(t[k + 1] - t[k]) / lsb - 1 for k in range(len(t) - 1)]
    inl = [(t[k] - t[0]) / lsb - k for k in range(len(t))]
    return NonlinearityReport(
        lsb=int(lsb),
        transitions=t,
        dnl=dnl,
        inl=inl,
        dnl_peak=max(abs(x) for x in dnl),
        inl_peak=max(abs(x) for x in inl),
    )


def characterize(tdc, coarse_step=None):
    """Coarse transfer curve plus the 1 fs nonlinearity report."""
    _require_noiseless(tdc)
    lsb = tdc.lsb_
    step = coarse_step or max(1, lsb // 10)
    curve = sweep_transfer(tdc, -lsb, _default_t_max(tdc), step)
    transitions = measure_transitions(tdc, coarse_step=step)
    return curve, dnl_inl(transitions, lsb)


def single_shot(tdc, delta_t: int, n_trials: int, seed: int) -> PrecisionReport:
    """Repeat one interval ``n_trials`` times; trial ``i`` uses ``sub_seed(seed, i)``."""
    check_is_fitted(tdc, "lsb_")
    delta_t = check_time(delta_t)
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    seed = check_seed(seed)
    X = np.zeros((n_trials, 2), dtype=np.int64)
    X[:, 1] = delta_t
    codes = tdc.predict(X, seed=seed)
    hist = Counter(int(c) for c in codes)
    return PrecisionReport(
        delta_t=delta_t,
        n_trials=int(n_trials),
        code_mean=float(codes.mean()),
        code_std=float(codes.std()),
        histogram=dict(sorted(hist.items())),
    )

