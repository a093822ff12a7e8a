import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rondeau.analysis import (FitError, InsufficientDataError, digitize,
                              dft_micromotion, dft_stroboscopic, fit_biexponential,
                              fit_power_law, half_frequency_contrast, lifetime,
                              phase_diagram, pi_shift_mirror, spectral_slope,
                              symbol_dft)
from rondeau.dephasing import DephasingParams, model_signal
from rondeau.evolution import SignalTrace
from rondeau.sequences import MonopoleSpec, SymbolStream, sample_rmd


def strobo_trace(values, block_duration=1.0):
    """Trace of purely stroboscopic samples at t = 0, T, 2T, ..."""
    values = np.asarray(values, dtype=float)
    m = values.size - 1
    return SignalTrace(
        times=block_duration * np.arange(m + 1),
        values=values,
        cycle_index=np.maximum(np.arange(m + 1) - 1, 0),
        pulse_index=np.where(np.arange(m + 1) == 0, 0, 13),
        block_duration=block_duration,
        num_cycles=m,
    )


def model_trace(stream, spec, epsilon=0.0, gamma_0=0.0, **kwargs):
    params = DephasingParams(spec=spec.with_gamma(math.pi + epsilon),
                             epsilon=epsilon, gamma_0=gamma_0)
    return model_signal(stream, params, **kwargs)


class TestSymbolDft:
    def test_constant_stream_is_dc_line(self):
        spectrum = symbol_dft(SymbolStream.from_text("++++"))
        assert np.allclose(spectrum.amplitudes, [1.0, 0.0, 0.0, 0.0], atol=1e-15)

    def test_alternating_stream_peaks_at_pi(self):
        spectrum = symbol_dft(SymbolStream.from_text("+-+-"))
        assert spectrum.omegas[2] == pytest.approx(math.pi)
        assert np.allclose(spectrum.amplitudes, [0.0, 0.0, 1.0, 0.0], atol=1e-15)

    def test_mirror_symmetry_of_real_sequences(self):
        spectrum = symbol_dft(sample_rmd(1, 64, seed=8))
        amps = spectrum.amplitudes
        assert np.allclose(amps[1:], amps[1:][::-1], atol=1e-12)

    def test_empty_stream_rejected(self):
        with pytest.raises(InsufficientDataError):
            symbol_dft(SymbolStream.from_text(""))


class TestMicromotionDft:
    def test_alternating_signs_peak_at_pi(self, short_spec):
        # an all-plus drive flips sign every cycle at the half-period samples
        trace = model_trace(SymbolStream.from_text("+" * 8), short_spec)
        spectrum = dft_micromotion(trace, short_spec)
        assert spectrum.amplitudes[4] == pytest.approx(1.0)
        assert np.allclose(np.delete(spectrum.amplitudes, 4), 0.0, atol=1e-15)

    def test_constant_signs_give_dc_line(self, short_spec):
        # alternating drive symbols cancel the (-1)^cycle factor exactly
        trace = model_trace(SymbolStream.from_text("+-" * 4), short_spec)
        spectrum = dft_micromotion(trace, short_spec)
        assert spectrum.amplitudes[0] == pytest.approx(1.0)

    def test_requires_enough_cycles(self, short_spec):
        trace = model_trace(SymbolStream.from_text("+-+"), short_spec)
        with pytest.raises(InsufficientDataError):
            dft_micromotion(trace, short_spec)

    def test_digitize_tie_break(self):
        assert list(digitize(np.array([-0.5, 0.0, 0.5]))) == [-1.0, 1.0, 1.0]


class TestStroboscopicDft:
    def test_period_doubled_signal_single_line(self, short_spec):
        trace = model_trace(sample_rmd(0, 8, seed=1), short_spec)
        spectrum = dft_stroboscopic(trace, short_spec)
        assert spectrum.amplitudes[4] == pytest.approx(1.0)

    def test_constant_signal_dc_line(self):
        trace = strobo_trace(np.ones(9))
        spectrum = dft_stroboscopic(trace)
        assert spectrum.amplitudes[0] == pytest.approx(1.0)
        assert np.allclose(spectrum.amplitudes[1:], 0.0, atol=1e-15)

    @given(seed=st.integers(min_value=0, max_value=10**6))
    @settings(max_examples=10, deadline=None)
    def test_parseval_both_kinds(self, seed):
        from rondeau.analysis import half_period_samples, samples_nearest

        spec = MonopoleSpec(pulses_per_block=12, kick_plus=8, kick_minus=4, tau=0.05)
        stream = sample_rmd(0, 16, seed=seed)
        trace = model_trace(stream, spec, epsilon=0.05, gamma_0=0.02)
        m = 16
        strobo = samples_nearest(trace, spec.block_duration * np.arange(m))
        micro = digitize(half_period_samples(trace, spec))
        for spectrum, samples in (
            (dft_stroboscopic(trace, spec), strobo),
            (dft_micromotion(trace, spec), micro),
        ):
            total = np.sum(spectrum.amplitudes**2)
            assert total == pytest.approx(np.sum(np.abs(samples) ** 2) / m)


class TestPiShiftMirror:
    def test_exact_for_perfect_kicks(self, short_spec):
        stream = sample_rmd(2, 32, seed=13)
        trace = model_trace(stream, short_spec)
        micro = dft_micromotion(trace, short_spec).amplitudes
        mirrored = pi_shift_mirror(symbol_dft(stream).amplitudes)
        assert np.abs(micro - mirrored).max() < 1e-12

    def test_requires_even_grid(self):
        with pytest.raises(ValueError):
            pi_shift_mirror(np.ones(7))


class TestLifetime:
    def test_argmin_example(self):
        trace = strobo_trace([1.0, 0.5, 0.3, 0.2])
        fit = lifetime(trace)
        assert fit.lifetime == pytest.approx(2.0)
        assert fit.rate == pytest.approx(0.5)

    def test_dense_exponential_recovers_rate(self):
        times_rate = 0.37
        values = np.exp(-times_rate * 0.05 * np.arange(400))
        trace = strobo_trace(values, block_duration=0.05)
        fit = lifetime(trace)
        assert abs(fit.lifetime - 1.0 / times_rate) <= 0.05

    def test_zero_initial_sample_rejected(self):
        with pytest.raises(ValueError):
            lifetime(strobo_trace([0.0, 0.1, 0.2]))

    def test_tie_breaks_toward_earlier(self):
        target = 1.0 / math.e
        trace = strobo_trace([1.0, target + 0.1, target - 0.1, target + 0.1])
        assert lifetime(trace).lifetime == pytest.approx(1.0)

    def test_first_crossing_variant(self):
        values = [1.0, 0.5, 0.36, 0.6, 0.2]
        assert lifetime(strobo_trace(values)).lifetime == pytest.approx(2.0)
        assert lifetime(strobo_trace(values),
                        method="first-crossing").lifetime == pytest.approx(2.0)
        # the two definitions split when the envelope dips early and recovers
        bumpy = [1.0, 0.2, 0.5, 0.37, 0.2]
        assert lifetime(strobo_trace(bumpy)).lifetime == pytest.approx(3.0)
        assert lifetime(strobo_trace(bumpy),
                        method="first-crossing").lifetime == pytest.approx(1.0)

    def test_crossed_flag(self):
        fit = lifetime(strobo_trace([1.0, 0.9, 0.8]))
        assert not fit.crossed


class TestFitPowerLaw:
    def test_exact_square_law(self):
        xs = np.linspace(1.0, 5.0, 7)
        fit = fit_power_law(xs, xs**2)
        assert fit.exponent == pytest.approx(2.0, abs=1e-12)
        assert fit.stderr == pytest.approx(0.0, abs=1e-10)

    def test_prefactor_free_slope(self):
        xs = np.array([1.0, 2.0, 4.0])
        fit = fit_power_law(xs, 3.0 * xs)
        assert fit.exponent == pytest.approx(1.0, abs=1e-12)
        assert fit.prefactor == pytest.approx(3.0)

    def test_rejects_nonpositive_data(self):
        with pytest.raises(ValueError):
            fit_power_law([1.0, 2.0, 3.0], [1.0, -2.0, 3.0])

    def test_rejects_short_input(self):
        with pytest.raises(ValueError):
            fit_power_law([1.0, 2.0], [1.0, 2.0])


class TestSpectralSlope:
    def test_recovers_synthetic_envelope(self):
        m = 720
        omegas = 2 * np.pi * np.arange(m) / m
        x = np.minimum(omegas, 2 * np.pi - omegas)
        amps = np.where(x > 0, x**1.5, 1.0)
        fit = spectral_slope(omegas, amps, side="low")
        assert fit.exponent == pytest.approx(1.5, abs=1e-9)
        pi_amps = np.abs(np.pi - omegas) ** 2 + 1e-300
        fit = spectral_slope(omegas, pi_amps, side="pi")
        assert fit.exponent == pytest.approx(2.0, abs=1e-6)


class TestFitBiexponential:
    def test_single_exponential_recovered(self):
        times = np.arange(200) * 0.5
        trace = strobo_trace(2.0 * np.exp(-times / 7.0), block_duration=0.5)
        fit = fit_biexponential(trace, noise_floor=1e-3)
        assert (fit.amp_fast + fit.amp_slow) == pytest.approx(2.0, rel=0.01)
        slow = fit.tau_slow if fit.amp_slow > fit.amp_fast else fit.tau_fast
        assert slow == pytest.approx(7.0, rel=0.01)

    def test_two_components_with_noise(self):
        rng = np.random.Generator(np.random.PCG64(5))
        times = np.arange(400) * 0.25
        clean = 1.5 * np.exp(-times / 2.0) + 0.8 * np.exp(-times / 30.0)
        noisy = clean * (1.0 + 0.01 * rng.standard_normal(times.size))
        fit = fit_biexponential(strobo_trace(noisy, block_duration=0.25),
                                noise_floor=1e-4)
        assert fit.amp_fast == pytest.approx(1.5, rel=0.05)
        assert fit.tau_fast == pytest.approx(2.0, rel=0.05)
        assert fit.amp_slow == pytest.approx(0.8, rel=0.05)
        assert fit.tau_slow == pytest.approx(30.0, rel=0.05)

    def test_floor_crossing_matches_analytic(self):
        times = np.arange(100) * 1.0
        trace = strobo_trace(np.exp(-times / 10.0))
        fit = fit_biexponential(trace, noise_floor=0.01)
        # single exponential: crossing at -tau * ln(floor / amplitude)
        assert fit.floor_crossing == pytest.approx(10.0 * math.log(100.0), rel=0.01)

    def test_requires_enough_samples(self):
        with pytest.raises(InsufficientDataError):
            fit_biexponential(strobo_trace([1.0, 0.5, 0.4]), noise_floor=0.1)


class TestPhaseDiagram:
    def build_sweep(self, spec, gammas, cycles=16):
        sweep = []
        for i, gamma in enumerate(gammas):
            for r in range(2):
                stream = sample_rmd(0, cycles, seed=10 * i + r)
                sweep.append((gamma, model_trace(stream, spec,
                                                 epsilon=gamma - math.pi)))
        return sweep

    def test_perfect_kick_column_peaks_at_half_frequency(self, short_spec):
        diagram = phase_diagram(self.build_sweep(short_spec, [math.pi]))
        row = diagram.intensity[0]
        peak_index = int(np.argmax(row))
        assert diagram.nu_grid[peak_index] == pytest.approx(
            math.pi / short_spec.block_duration)

    def test_row_normalization(self, short_spec):
        diagram = phase_diagram(self.build_sweep(short_spec, [0.9 * math.pi, math.pi]))
        assert diagram.intensity.shape == (2, 16)
        assert np.allclose(diagram.intensity.max(axis=1), 1.0)

    def test_global_normalization(self, short_spec):
        diagram = phase_diagram(self.build_sweep(short_spec, [0.9 * math.pi, math.pi]),
                                normalization="global")
        assert diagram.intensity.max() == pytest.approx(1.0)

    def test_inconsistent_traces_rejected(self, short_spec):
        a = model_trace(sample_rmd(0, 16, seed=1), short_spec)
        b = model_trace(sample_rmd(0, 32, seed=2), short_spec)
        with pytest.raises(ValueError):
            phase_diagram([(math.pi, a), (math.pi, b)])

    def test_contrast_metric(self):
        row = np.full(120, 0.01)
        row[60] = 1.0
        assert half_frequency_contrast(row) == pytest.approx(100.0)
