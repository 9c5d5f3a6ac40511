"""Exit criteria.  Each test is one criterion; conftest prints a PASS/FAIL line per test."""
import time

import numpy as np
import pytest

from vernier_tdc.characterization import characterize, measure_transitions
from vernier_tdc.cli import main
from vernier_tdc.encoder import ThermometerCode, priority_encode
from vernier_tdc.tdc import VernierTDC, ideal_code
from vernier_tdc.tofpet import DetectorGeometry, displacement, run_experiment

pytestmark = pytest.mark.acceptance

DESIGN = dict(tau_slow="102.7", tau_fast="77.7")
C_ROUND = DetectorGeometry(800.0, 300.0)  # c = 3e8 m/s


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.2f}s > {self.seconds}s"


def test_ac1_lsb_reproduction():
    """102.7 ps / 77.7 ps lines resolve exactly 25 ps, nominally and measured."""
    with Budget(1.0):
        tdc = VernierTDC(n_stages=64, **DESIGN).fit()
        assert tdc.metrics().lsb == 25_000
        spacing = set(np.diff(measure_transitions(tdc)).tolist())
        assert spacing == {25_000}


def test_ac2_figure_encoder_case():
    """Thermometer 11111000 encodes to 5, binary 101, no bubble."""
    with Budget(1.0):
        code = priority_encode(ThermometerCode.from_string("11111000"))
        assert code.value == 5
        assert format(code.value, "b") == "101"
        # 8-stage bank -> 4-bit word; its significant bits are the figure's 101
        assert code.bits == "0101" and code.bits.lstrip("0") == "101"
        assert not code.bubble


def test_ac3_transient_scenario_code_59():
    """Start at 2.5 ns, stop at 4 ns, N = 64 -> code 59."""
    with Budget(1.0):
        tdc = VernierTDC(n_stages=64, **DESIGN).fit()
        r = tdc.convert(2_500_000, 4_000_000)
        assert r.code.value == 59
        assert not r.flags


def test_ac4_tof_benchmark():
    """66 ps at c = 3e8 m/s maps to 9.90 mm, within 1 cm +-5 %."""
    with Budget(1.0):
        d = displacement(66_000, C_ROUND)
        assert abs(d - 9.90) <= 0.01
        assert abs(d - 10.0) <= 0.5


def test_ac5_oracle_equivalence():
    """>= 1e5 random zero-noise cases: event-level codes equal the ideal code."""
    rng = np.random.default_rng(20240501)
    n_configs, per_config = 2000, 50
    checked = 0
    with Budget(30.0):
        for _ in range(n_configs):
            n = int(rng.integers(1, 129))
            tau_fast = int(rng.integers(1, 200_001))
            lsb = int(rng.integers(1, 60_001))
            tdc = VernierTDC(n_stages=n, tau_slow=tau_fast + lsb, tau_fast=tau_fast).fit()
            span = (n + 2) * lsb
            dts = np.concatenate([
                rng.integers(-span, span + 1, 30),
                rng.integers(-2, n + 3, 15) * lsb,  # exact LSB multiples incl. 0 and negatives
                rng.integers(-span, 0, 5),
            ])
            t0 = rng.integers(-(10**12), 10**12, len(dts))
            codes = tdc.predict(np.column_stack([t0, t0 + dts]))
            k = np.arange(1, n + 1)
            brute = (k[None, :] * lsb < dts[:, None]).sum(axis=1)
            ideal = [ideal_code(tdc, int(d)) for d in dts]
            assert codes.tolist() == ideal == brute.tolist()
            checked += len(dts)
    assert checked >= 100_000


def test_ac6_ideal_linearity():
    """Default 102.7/77.7 ps configuration: every DNL and INL entry is exactly zero."""
    with Budget(10.0):
        _, report = characterize(VernierTDC(n_stages=64, **DESIGN).fit())
        assert len(report.transitions) == 64
        assert all(x == 0.0 for x in report.dnl)
        assert all(x == 0.0 for x in report.inl)
        assert report.dnl_peak == 0.0 and report.inl_peak == 0.0


def test_ac7_quantization_bound():
    """1e4 uniform events: max error <= c*LSB/4 + slack <= 1.88 mm; 2x LSB doubles the bound."""
    slack = C_ROUND.mm_per_fs * 1.0
    with Budget(30.0):
        fine = run_experiment(C_ROUND, VernierTDC(n_stages=64, **DESIGN), 10_000, seed=7).summary
        assert fine["n_overrange"] == 0
        assert fine["quantization_bound_mm"] == pytest.approx(1.875)
        assert fine["max_abs_err_mm"] <= fine["quantization_bound_mm"] + slack
        assert fine["max_abs_err_mm"] <= 1.88

        # same 1.6 ns window, 50 ps LSB
        coarse_tdc = VernierTDC(n_stages=32, tau_slow="127.7", tau_fast="77.7")
        coarse = run_experiment(C_ROUND, coarse_tdc, 10_000, seed=7).summary
        assert coarse["quantization_bound_mm"] == pytest.approx(2 * fine["quantization_bound_mm"])
        assert coarse["max_abs_err_mm"] <= coarse["quantization_bound_mm"] + slack
        assert coarse["max_abs_err_mm"] > fine["quantization_bound_mm"] + slack


def _snapshot(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def test_ac8_cli_determinism(tmp_path, capsys):
    """Each subcommand re-run with the same config and seed writes identical bytes."""
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "n_stages = 32\nmismatch_sigma_ps = 2.5\njitter_sigma_ps = 1\n"
        "precision_trials = 2000\nn_events = 3000\nseed = 12345\n"
    )
    runs = {
        "info": ["info"],
        "convert": ["convert", "100", "612.345"],
        "characterize": ["characterize"],
        "tof": ["tof"],
    }
    with Budget(30.0):
        for name, argv in runs.items():
            results = []
            for rep in range(2):
                out = tmp_path / f"{name}{rep}"
                code = main(argv + ["--config", str(cfg), "--out", str(out)])
                stdout = capsys.readouterr().out
                results.append((code, stdout, _snapshot(out)))
            assert results[0][0] in (0, 2)
            assert results[0][2], f"{name} wrote no files"
            assert results[0] == results[1], name
