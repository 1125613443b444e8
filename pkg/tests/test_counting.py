import numpy as np
import pytest

from qdbiphoton.analysis import fit, fringe_amplitude
from qdbiphoton.counting import (
    CSV_HEADER,
    SweepConfig,
    SweepFormatError,
    SweepResult,
    run_product_sweep,
    run_single_photon_sweep,
    run_sweep,
)
from qdbiphoton.source import SourceModel

LAM = 885.0


def entangled_closed_form(d, b):
    return 0.5 + (1 - b) * np.cos(4 * np.pi * d / LAM) / 2


def mixed_closed_form(d, b):
    return (1 - b) * (3 + np.cos(4 * np.pi * d / LAM)) / 4 + b / 2


class TestSweepConfig:
    @pytest.mark.parametrize("kwargs", [
        {"n_points": 1}, {"pairs_per_point": 0}, {"jitter_lambda": -0.01}, {"n_sweeps": 0},
        {"d_start_nm": 10, "d_end_nm": 10}, {"lambda_bar_nm": -1}, {"seed": -4},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SweepConfig(**kwargs)


class TestRunSweep:
    def test_deterministic(self):
        cfg = SweepConfig(seed=42)
        a = run_sweep(SourceModel(b=0.37), cfg)
        b = run_sweep(SourceModel(b=0.37), cfg)
        assert a.to_csv() == b.to_csv()

    def test_different_seeds_differ(self):
        a = run_sweep(SourceModel(b=0.37), SweepConfig(seed=1))
        b = run_sweep(SourceModel(b=0.37), SweepConfig(seed=2))
        assert not np.array_equal(a.counts_vv, b.counts_vv)

    def test_point_streams_independent_of_grid_extent(self):
        # point i draws from (seed, stream, i) only: truncating the grid keeps the overlap identical
        full = run_sweep(SourceModel(b=0.2), SweepConfig(d_end_nm=1350.0, n_points=80, seed=5))
        short_cfg = SweepConfig(d_end_nm=full.retardation_nm[39], n_points=40, seed=5)
        short = run_sweep(SourceModel(b=0.2), short_cfg)
        np.testing.assert_array_equal(full.counts_vv[:40], short.counts_vv)

    def test_constructive_fringe_high_count_limit(self):
        cfg = SweepConfig(jitter_lambda=0.0, pairs_per_point=1e9, n_sweeps=1, seed=0)
        res = run_sweep(SourceModel(z=1.0, b=0.0), cfg)
        assert res.retardation_nm[0] == 0.0
        assert res.intensity_norm[0] == pytest.approx(1.0, abs=1e-12)

    def test_mixed_stays_above_floor(self):
        res = run_sweep(SourceModel(z=0.0, b=0.0), SweepConfig(jitter_lambda=0.0, seed=3))
        tol = 5 * res.intensity_sigma
        assert np.all(res.intensity_norm >= 0.5 - tol)
        assert np.all(res.intensity_norm <= 1.0 + tol)

    def test_rows_sorted_and_counts_non_negative(self):
        res = run_sweep(SourceModel(b=0.5), SweepConfig(seed=9))
        assert np.all(np.diff(res.retardation_nm) > 0)
        assert res.counts_vv.min() >= 0 and res.counts_vh.min() >= 0
        assert np.all((res.intensity_norm >= 0) & (res.intensity_norm <= 1))

    def test_zero_counts_are_missing(self):
        res = run_sweep(SourceModel(b=0.0), SweepConfig(pairs_per_point=1e-9, n_sweeps=1, seed=0))
        assert np.all(np.isnan(res.intensity_norm[(res.counts_vv + res.counts_vh) == 0]))
        assert not res.valid.any() or res.valid.sum() == np.count_nonzero(res.counts_vv + res.counts_vh)

    def test_coverage_of_closed_form(self):
        # jitter 0, 1e6 pairs: |I - closed form| <= 3 sigma at >= 99% of points over 100 seeds
        hits = total = 0
        for seed in range(100):
            cfg = SweepConfig(jitter_lambda=0.0, pairs_per_point=1e6, n_sweeps=1, seed=seed, n_points=40)
            res = run_sweep(SourceModel(z=1.0, b=0.37), cfg)
            dev = np.abs(res.intensity_norm - entangled_closed_form(res.retardation_nm, 0.37))
            hits += int(np.sum(dev <= 3 * res.intensity_sigma))
            total += len(res)
        assert hits / total >= 0.99

    def test_total_counts_concentrate(self):
        for model in (SourceModel(z=1.0, b=0.37), SourceModel(z=0.0, b=0.1)):
            cfg = SweepConfig(seed=4, n_sweeps=3)
            res = run_sweep(model, cfg)
            total = int((res.counts_vv + res.counts_vh).sum())
            expected = cfg.n_sweeps * cfg.n_points * cfg.pairs_per_point / 2
            assert abs(total - expected) < 5 * np.sqrt(expected)

    def test_jitter_degrades_amplitude_monotonically(self):
        amps = {}
        for jitter in (0.0, 0.03, 0.06):
            vals = [fringe_amplitude(fit(run_sweep(SourceModel(b=0.0), SweepConfig(jitter_lambda=jitter, seed=s))))
                    for s in range(50)]
            amps[jitter] = np.mean(vals)
        assert amps[0.06] <= amps[0.03] <= amps[0.0]

    def test_mixed_closed_form_coverage(self):
        res = run_sweep(SourceModel(z=0.0, b=0.37), SweepConfig(jitter_lambda=0.0, pairs_per_point=1e6, seed=2))
        dev = np.abs(res.intensity_norm - mixed_closed_form(res.retardation_nm, 0.37))
        assert np.mean(dev <= 4 * res.intensity_sigma) >= 0.97


class TestSinglePhotonSweep:
    def test_peak_at_zero_delay(self):
        res = run_single_photon_sweep(SweepConfig(jitter_lambda=0.0, seed=1, d_end_nm=885.0, n_points=81))
        assert res.intensity_norm[0] >= 1 - 3 * res.intensity_sigma[0] - 0.02
        assert res.intensity_norm.max() == 1.0

    def test_dark_half_wave(self):
        cfg = SweepConfig(jitter_lambda=0.0, seed=1, d_start_nm=0.0, d_end_nm=885.0, n_points=3,
                          pairs_per_point=1e8, n_sweeps=1)
        res = run_single_photon_sweep(cfg)
        assert res.retardation_nm[1] == pytest.approx(442.5)
        assert res.counts_vv[1] == 0
        assert res.intensity_norm[1] == 0.0

    def test_underlying_period_is_lambda(self):
        res = run_single_photon_sweep(SweepConfig(jitter_lambda=0.0, seed=2, pairs_per_point=1e6))
        assert fit(res).params["period_nm"] == pytest.approx(LAM, rel=2e-3)

    def test_all_zero_sweep_rejected(self):
        cfg = SweepConfig(pairs_per_point=1e-12, n_sweeps=1, seed=0)
        with pytest.raises(ValueError, match="all-zero"):
            run_single_photon_sweep(cfg)


class TestProductSweep:
    def test_matches_squared_single_curve(self):
        res = run_product_sweep(SweepConfig(jitter_lambda=0.0, pairs_per_point=1e7, seed=3))
        expected = (1 + np.cos(2 * np.pi * res.retardation_nm / LAM)) ** 2 / 4
        assert np.max(np.abs(res.intensity_norm - expected)) < 5e-3

    def test_channels_independent(self):
        res = run_product_sweep(SweepConfig(seed=3))
        assert not np.array_equal(res.counts_vv, res.counts_vh)


class TestCsv:
    def test_header_and_rows(self, tmp_path):
        res = run_sweep(SourceModel(b=0.37), SweepConfig(seed=7, n_points=80))
        path = tmp_path / "s.csv"
        text = res.to_csv(path)
        lines = text.splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        assert len(lines) == 81
        assert path.read_text() == text

    def test_round_trip_exact(self, tmp_path):
        res = run_sweep(SourceModel(b=0.37), SweepConfig(seed=7))
        path = tmp_path / "s.csv"
        res.to_csv(path)
        back = SweepResult.from_csv(path)
        np.testing.assert_array_equal(back.retardation_nm, res.retardation_nm)
        np.testing.assert_array_equal(back.counts_vv, res.counts_vv)
        np.testing.assert_array_equal(back.intensity_norm, res.intensity_norm)
        np.testing.assert_array_equal(back.intensity_sigma, res.intensity_sigma)
        assert back.lambda_bar_nm == pytest.approx(LAM, rel=1e-12)

    def test_precision_at_least_12_digits(self):
        res = run_sweep(SourceModel(b=0.37), SweepConfig(seed=7))
        row = res.to_csv().splitlines()[2].split(",")
        mantissa = row[4].lstrip("0.").replace(".", "").split("e")[0]
        assert len(mantissa) >= 12

    def test_missing_written_as_empty(self):
        res = SweepResult([0.0, 1.0], [0, 3], [0, 1], [np.nan, 0.75], [np.nan, 0.2])
        second = res.to_csv().splitlines()[1]
        assert second.endswith(",0,0,,")

    @pytest.mark.parametrize("body,line", [
        ("retardation_nm,phi_rad,counts_vv,counts_vh,intensity_norm,intensity_sigma\n0,0,1,1,0.5\n", 2),
        ("retardation_nm,phi_rad,counts_vv,counts_vh,intensity_norm,intensity_sigma\n0,0,1,1,0.5,0.1\n1,0.1,x,1,0.5,0.1\n", 3),
        ("retardation_nm,phi_rad,counts_vv,counts_vh,intensity_norm,intensity_sigma\n"
         "5,0.1,1,1,0.5,0.1\n4,0.1,1,1,0.5,0.1\n", 3),
        ("d,phi\n1,2\n", 1),
    ])
    def test_malformed_cites_line(self, tmp_path, body, line):
        path = tmp_path / "bad.csv"
        path.write_text(body)
        with pytest.raises(SweepFormatError) as info:
            SweepResult.from_csv(path, lambda_bar_nm=LAM)
        assert info.value.line == line
        assert f"line {line}" in str(info.value)
