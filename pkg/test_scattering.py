"""
Tests for the multiple-scattering series and the intensity output.
"""

import numpy as np
import pytest
from scipy.special import j1

from angular import build_level_scheme
from exceptions import NFSInputError
from models import FieldRecord, HyperfineConfig, Polarization, SampleConfig, SwitchingEvent, SwitchSequence, TimeGrid
from scattering import CSV_HEADER, ScatteringService, scattering_service
from switching import BACK_TO_Z, BEAM_PARALLEL, SwitchingService, switching_service

NS = 1e-9
TAU = switching_service.constants.tau_s
GRID = TimeGrid(t_end=300 * NS, dt=0.1 * NS)
STORE_AT_8NS = SwitchSequence(events=(SwitchingEvent(time=8 * NS, rotation=BEAM_PARALLEL),))


def unsplit_service() -> ScatteringService:
    """Service for a sample without hyperfine field"""
    scheme = build_level_scheme(HyperfineConfig(field_magnitude_tesla=0.0, g_factor_ground=0.18, g_factor_excited=-0.1))
    return ScatteringService(SwitchingService(scheme=scheme))


class TestFirstOrder:
    """Test the closed-form single-scattering field"""

    def test_unperturbed_beat(self):
        """I1 = cos^2(Omega0 t) exp(-t / tau), unit at t = 0"""
        rec = scattering_service.first_order_field(switching_service.initial_amplitudes(), GRID)
        t = GRID.times()
        intensity = scattering_service.intensity_series(rec)
        expected = np.cos(switching_service.scheme.omega0 * t) ** 2 * np.exp(-t / TAU)
        assert intensity[0, 1] == pytest.approx(1.0, abs=1e-14)
        assert np.allclose(intensity[:, 1], expected, atol=1e-13)

    def test_first_minimum_at_8ns(self):
        rec = scattering_service.first_order_field(switching_service.initial_amplitudes(), GRID)
        intensity = scattering_service.intensity_series(rec)[:, 1]
        window = GRID.times() < 16 * NS
        t_min = GRID.times()[window][np.argmin(intensity[window])]
        assert t_min / NS == pytest.approx(8.0, abs=0.1)
        minima = scattering_service.unperturbed_beat_minima(switching_service.scheme, 2)
        assert minima[0] / NS == pytest.approx(8.0) and minima[1] / NS == pytest.approx(24.0)

    def test_suppressed_after_switch(self):
        """First-order emission vanishes after storing at 8 ns"""
        states = switching_service.propagate(STORE_AT_8NS)
        rec = scattering_service.first_order_field(states, GRID)
        after = GRID.times() >= 8 * NS
        assert np.max(scattering_service.intensity_series(rec)[after, 1]) < 1e-20

    def test_grid_before_amplitudes(self):
        stored = switching_service.propagate(STORE_AT_8NS)[1]
        with pytest.raises(NFSInputError):
            scattering_service.first_order_field(stored, GRID)

    def test_pi_window_is_pi_pure(self):
        """Between the pi release and the second store the first order carries no sigma light"""
        sequence, _ = switching_service.four_switch_plan(Polarization.SIGMA)
        rec = scattering_service.first_order_field(switching_service.propagate(sequence), GRID)
        t2, t3 = sequence.times[1], sequence.times[2]
        window = (GRID.times() > t2) & (GRID.times() < t3)
        table = scattering_service.intensity_series(rec)[window]
        assert np.max(table[:, 2]) < 1e-4 * np.max(table[:, 3])

    def test_pure_delta_m_zero_has_no_pi(self):
        rec = scattering_service.first_order_field(switching_service.initial_amplitudes(), GRID)
        assert np.all(scattering_service.intensity_series(rec)[:, 3] == 0.0)


class TestSeries:
    """Test the order-by-order solution"""

    @pytest.mark.parametrize("xi,bound", [(0.1, 0.1), (1e-3, 1e-3)])
    def test_thin_limit(self, xi, bound):
        """The series approaches the first order as the sample thins"""
        first = scattering_service.first_order_field(switching_service.initial_amplitudes(), GRID)
        series = scattering_service.solve_series(SampleConfig(xi=xi), grid=GRID)
        deviation = np.max(np.abs(series.e_sigma - first.e_sigma))
        assert series.converged
        assert deviation < bound * np.max(np.abs(first.e_sigma))

    def test_second_order_without_splitting(self):
        """Unsplit line: E2 = (xi / tau) t exp(-t / 2 tau) / 2"""
        service = unsplit_service()
        xi = 2.0
        rec = service.solve_series(SampleConfig(xi=xi), grid=GRID, max_order=2)
        t = GRID.times()
        expected = xi / TAU * t * np.exp(-t / (2 * TAU)) / 2
        assert np.allclose(rec.orders[1][:, 0], expected, rtol=1e-9, atol=1e-12)

    def test_bessel_solution_without_splitting(self):
        """The summed series reproduces the single-line thick-sample response"""
        xi = 5.0
        rec = unsplit_service().solve_series(SampleConfig(xi=xi), grid=GRID)
        t = GRID.times()[1:]
        x = xi * t / TAU
        expected = -np.exp(-t / (2 * TAU)) * j1(2 * np.sqrt(x)) / np.sqrt(x)
        assert rec.converged
        assert np.allclose(rec.e_sigma[1:], expected, atol=1e-5)

    @pytest.mark.parametrize("service", [unsplit_service(), scattering_service])
    def test_long_record_stays_finite(self, service):
        """Records thousands of lifetimes long decay to zero without overflow"""
        grid = TimeGrid(t_end=400e-6, dt=0.1e-6)
        rec = service.solve_series(SampleConfig(xi=5.0), STORE_AT_8NS, grid, max_order=4)
        assert np.all(np.isfinite(rec.e_sigma)) and np.all(np.isfinite(rec.e_pi))
        assert all(np.all(np.isfinite(term)) for term in rec.orders)
        assert abs(rec.e_sigma[-1]) < 1e-12 * np.max(np.abs(rec.e_sigma))

    def test_dynamical_beat(self):
        """At xi = 5 the beat peaks are modulated by a nonmonotonic envelope"""
        rec = scattering_service.solve_series(SampleConfig(xi=5.0), grid=GRID)
        intensity = scattering_service.intensity_series(rec)[:, 1]
        peak_index = [int(round(16 * n / 0.1)) for n in range(1, 19)]
        peaks = intensity[peak_index]
        assert rec.converged
        assert any(b > a for a, b in zip(peaks, peaks[1:]))

    def test_higher_orders_survive_suppression(self):
        """After storing at 8 ns only higher orders radiate, weakly"""
        stored = scattering_service.solve_series(SampleConfig(xi=5.0), STORE_AT_8NS, GRID)
        free = scattering_service.solve_series(SampleConfig(xi=5.0), grid=GRID)
        after = GRID.times() > 8 * NS
        stored_i = scattering_service.intensity_series(stored)[after, 1]
        free_i = scattering_service.intensity_series(free)[after, 1]
        assert 0.0 < np.max(stored_i) < 0.01 * np.max(free_i)

    def test_order_ratios_decrease(self):
        rec = scattering_service.solve_series(SampleConfig(xi=5.0), grid=GRID)
        ratios = scattering_service.order_ratios(rec)
        assert len(ratios) == rec.truncation_order - 1
        tail = ratios[2:]
        assert all(b <= a * 1.05 for a, b in zip(tail, tail[1:]))
        assert ratios[-1] < 1.0

    def test_grid_refinement(self):
        """Halving dt leaves the intensity unchanged to 0.1 %"""
        coarse = scattering_service.solve_series(SampleConfig(xi=5.0), grid=TimeGrid(t_end=300 * NS, dt=0.1 * NS))
        fine = scattering_service.solve_series(SampleConfig(xi=5.0), grid=TimeGrid(t_end=300 * NS, dt=0.05 * NS))
        i_coarse = scattering_service.intensity_series(coarse)[:, 1]
        i_fine = scattering_service.intensity_series(fine)[::2, 1]
        assert np.max(np.abs(i_coarse - i_fine)) < 1e-3 * np.max(i_fine)

    def test_causality(self):
        """A switch at 100 ns does not touch the field before it"""
        sequence = SwitchSequence(events=(SwitchingEvent(time=100 * NS, rotation=BEAM_PARALLEL),))
        switched = scattering_service.solve_series(SampleConfig(xi=5.0), sequence, GRID)
        free = scattering_service.solve_series(SampleConfig(xi=5.0), grid=GRID)
        before = GRID.times() < 100 * NS
        assert np.allclose(switched.e_sigma[before], free.e_sigma[before], rtol=1e-7, atol=1e-7)

    def test_envelope_bound(self):
        """First-order intensity never exceeds exp(-t / tau)"""
        rec = scattering_service.first_order_field(switching_service.initial_amplitudes(), GRID)
        t = GRID.times()
        assert np.all(scattering_service.intensity_series(rec)[:, 1] <= np.exp(-t / TAU) + 1e-15)

    def test_non_convergence_flagged(self):
        rec = scattering_service.solve_series(SampleConfig(xi=5.0), grid=GRID, max_order=2)
        assert not rec.converged
        assert rec.residual > 1e-8
        assert rec.truncation_order == 2

    def test_release_switch_restores_emission(self):
        sequence = SwitchSequence(events=(SwitchingEvent(time=8 * NS, rotation=BEAM_PARALLEL),
                                          SwitchingEvent(time=40 * NS, rotation=BACK_TO_Z)))
        rec = scattering_service.solve_series(SampleConfig(xi=1.0), sequence, GRID)
        intensity = scattering_service.intensity_series(rec)[:, 1]
        t = GRID.times()
        assert np.max(intensity[t > 40 * NS]) > 10 * np.max(intensity[(t > 8 * NS) & (t < 40 * NS)])

    def test_invalid_arguments(self):
        with pytest.raises(NFSInputError):
            scattering_service.solve_series(SampleConfig(xi=1.0), grid=GRID, max_order=0)
        with pytest.raises(NFSInputError):
            scattering_service.solve_series(SampleConfig(xi=1.0), grid=TimeGrid(t_start=1 * NS, t_end=10 * NS))


class TestIntensityOutput:
    """Test the intensity table and CSV"""

    def test_zero_field(self):
        grid = TimeGrid(t_end=1 * NS, dt=0.5 * NS)
        zeros = np.zeros(grid.samples, dtype=complex)
        rec = FieldRecord(grid=grid, e_sigma=zeros, e_pi=zeros, truncation_order=1)
        table = ScatteringService.intensity_series(rec)
        assert np.all(table[:, 1:] == 0.0)

    def test_total_is_sum(self):
        rec = scattering_service.solve_series(SampleConfig(xi=1.0), grid=GRID)
        table = scattering_service.intensity_series(rec)
        assert np.allclose(table[:, 1], table[:, 2] + table[:, 3])

    def test_csv(self, tmp_path):
        rec = scattering_service.first_order_field(switching_service.initial_amplitudes(), GRID)
        path = tmp_path / "intensity.csv"
        scattering_service.write_intensity_csv(rec, path)
        lines = path.read_text().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == GRID.samples + 1
        first = [float(v) for v in lines[1].split(",")]
        assert first[0] == 0.0 and first[1] == pytest.approx(1.0)
