"""Flat ``key = value`` run configuration.

Lines are ``key = value``; ``#`` starts a comment.  Times are picosecond
decimal strings with at most three fractional digits, lengths are mm.
Unknown keys are rejected.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .core import ConfigurationError, check_seed, time_from_ps
from .tdc import FlashTDC, VernierTDC
from .tofpet import DetectorGeometry


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise ValueError("must be >= 1")
    return value


def _nonneg_ps(text):
    value = time_from_ps(text)
    if value < 0:
        raise ValueError("must be >= 0")
    return value


def _optional_ps(text):
    return None if text.lower() in ("", "auto") else time_from_ps(text)


def _architecture(text):
    if text not in ("vernier", "flash"):
        raise ValueError("must be 'vernier' or 'flash'")
    return text


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise ValueError("must be > 0")
    return value


def _positions(text):
    return "uniform" if text == "uniform" else float(text)


def _seed(text):
    return check_seed(int(text, 0))


# key -> (parser, default text, help)
SCHEMA = {
    "architecture": (_architecture, "vernier", "vernier | flash"),
    "n_stages": (_positive_int, "64", "delay stages per line"),
    "tau_slow_ps": (time_from_ps, "102.7", "vernier start-line stage delay (ps)"),
    "tau_fast_ps": (time_from_ps, "77.7", "vernier stop-line stage delay (ps)"),
    "tau_ps": (time_from_ps, "102.7", "flash stage delay (ps)"),
    "mismatch_sigma_ps": (_nonneg_ps, "0", "static per-stage delay std (ps)"),
    "jitter_sigma_ps": (_nonneg_ps, "0", "per-edge per-stage jitter std (ps)"),
    "seed": (_seed, "0", "unsigned 64-bit seed"),
    "sweep_step_ps": (_optional_ps, "auto", "coarse sweep step (ps), auto = LSB/10"),
    "precision_dt_ps": (_optional_ps, "auto", "single-shot interval (ps), auto = mid-range"),
    "precision_trials": (_positive_int, "10000", "single-shot trial count"),
    "n_events": (_positive_int, "10000", "tof: annihilation events"),
    "separation_mm": (_positive_float, "800", "tof: detector separation (mm)"),
    "speed_of_light_mm_per_ns": (_positive_float, "299.792458", "tof: c (mm/ns)"),
    "positions": (_positions, "uniform", "tof: 'uniform' or a fixed position (mm)"),
    "arrival_noise_ps": (_nonneg_ps, "0", "tof: detector arrival-time noise std (ps)"),
    "histogram_bins": (_positive_int, "50", "tof: error histogram bins"),
}


@dataclass
class RunConfig:
    architecture: str
    n_stages: int
    tau_slow_ps: int
    tau_fast_ps: int
    tau_ps: int
    mismatch_sigma_ps: int
    jitter_sigma_ps: int
    seed: int
    sweep_step_ps: int | None
    precision_dt_ps: int | None
    precision_trials: int
    n_events: int
    separation_mm: float
    speed_of_light_mm_per_ns: float
    positions: str | float
    arrival_noise_ps: int
    histogram_bins: int

    def build_tdc(self, jitter=True):
        """Unfitted TDC estimator; all ``*_ps`` values are already in fs."""
        common = dict(
            n_stages=self.n_stages,
            mismatch_sigma=self.mismatch_sigma_ps,
            jitter_sigma=self.jitter_sigma_ps if jitter else 0,
            random_state=self.seed,
        )
        if self.architecture == "vernier":
            return VernierTDC(tau_slow=self.tau_slow_ps, tau_fast=self.tau_fast_ps, **common)
        return FlashTDC(tau=self.tau_ps, **common)

    def geometry(self) -> DetectorGeometry:
        return DetectorGeometry(self.separation_mm, self.speed_of_light_mm_per_ns)


assert set(SCHEMA) == {f.name for f in fields(RunConfig)}


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(None, f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(key, f"unknown config key {key!r} (line {lineno})")
        if key in raw:
            raise ConfigError(key, f"duplicate config key {key!r} (line {lineno})")
        raw[key] = value
    for key, value in (overrides or {}).items():
        raw[key] = str(value)

    values = {}
    for key, (parser, default, _) in SCHEMA.items():
        text_value = raw.get(key, default)
        try:
            values[key] = parser(text_value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(key, f"invalid value {text_value!r} for {key}: {exc}") from None
    cfg = RunConfig(**values)
    try:
        cfg.build_tdc().metrics()
    except ConfigurationError as exc:
        key = "tau_slow_ps" if cfg.architecture == "vernier" else "tau_ps"
        raise ConfigError(key, str(exc)) from None
    return cfg


def load_config(path, overrides: dict | None = None) -> RunConfig:
    text = "" if path is None else Path(path).read_text(encoding="utf-8")
    return parse_config(text, overrides)


def schema_help() -> str:
    lines = ["config keys (key = value, '#' comments):"]
    for key, (_, default, desc) in SCHEMA.items():
        lines.append(f"  {key:<26} {desc} [default: {default}]")
    return "\n".join(lines)
