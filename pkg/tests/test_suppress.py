"""Tests for band-gain interpolation, spectral gain application, smoothing."""

import numpy as np
import pytest

from aecnet import dsp
from aecnet.suppress import BandGains, BinGains, GainSmoother, apply_gains, \
    interpolate_gains
from oracles import reference_band_interp


class TestInterpolation:
    def test_matches_loop_reference(self, rng, clock, layout):
        for _ in range(5):
            g = rng.uniform(0.0, 1.0, size=layout.num_bands)
            ours = interpolate_gains(BandGains(g=g), layout, clock.num_bins)
            ref = reference_band_interp(g, layout.edges, clock.num_bins)
            assert np.allclose(ours.gains, ref, atol=1e-12)

    def test_flat_gains_stay_flat(self, clock, layout):
        out = interpolate_gains(np.full(22, 0.37), layout, clock.num_bins)
        assert np.allclose(out.gains, 0.37, atol=1e-15)

    def test_band_edges_hit_knots_exactly(self, rng, clock, layout):
        g = rng.uniform(0.0, 1.0, size=22)
        out = interpolate_gains(BandGains(g=g), layout, clock.num_bins)
        for k in range(layout.num_bands):
            edge = layout.edges[k]
            assert out.gains[edge] == pytest.approx(g[k], abs=1e-12)

    def test_midpoint_arithmetic(self, clock, layout):
        # band with gain 0.2 followed by 0.8: halfway across reads 0.5
        g = np.zeros(22)
        g[4], g[5] = 0.2, 0.8
        out = interpolate_gains(BandGains(g=g), layout, clock.num_bins)
        lo, hi = layout.edges[4], layout.edges[5]
        width = hi - lo
        if width % 2 == 0:
            assert out.gains[lo + width // 2] == pytest.approx(0.5, abs=1e-12)
        frac = np.arange(width) / width
        expect = (1.0 - frac) * 0.2 + frac * 0.8
        assert np.allclose(out.gains[lo:hi], expect, atol=1e-12)

    def test_piecewise_linear_within_bands(self, rng, clock, layout):
        g = rng.uniform(size=22)
        out = interpolate_gains(BandGains(g=g), layout, clock.num_bins).gains
        for k in range(layout.num_bands - 1):
            lo, hi = layout.edges[k], layout.edges[k + 1]
            seg = out[lo : hi + 1]
            second_diff = np.diff(seg, n=2)
            assert np.allclose(second_diff, 0.0, atol=1e-12)

    def test_last_band_extends_its_value(self, clock, layout):
        g = np.linspace(0.0, 1.0, 22)
        out = interpolate_gains(BandGains(g=g), layout, clock.num_bins).gains
        last_lo = layout.edges[-2]
        assert np.allclose(out[last_lo:], g[-1], atol=1e-12)

    def test_bounded_by_band_extremes(self, rng, clock, layout):
        g = rng.uniform(0.1, 0.9, size=22)
        out = interpolate_gains(BandGains(g=g), layout, clock.num_bins).gains
        assert np.all(out >= g.min() - 1e-12)
        assert np.all(out <= g.max() + 1e-12)

    def test_frame_index_threaded_through(self, layout):
        out = interpolate_gains(BandGains(g=np.ones(22), frame_index=97), layout)
        assert out.derived_from == 97

    def test_accepts_bare_array(self, rng, clock, layout):
        g = rng.uniform(size=22)
        a = interpolate_gains(g, layout, clock.num_bins)
        b = interpolate_gains(BandGains(g=g), layout, clock.num_bins)
        assert np.array_equal(a.gains, b.gains)


class TestApplyGains:
    def test_identity_and_zero(self, rng, clock):
        bins = rng.normal(size=clock.num_bins) + 1j * rng.normal(size=clock.num_bins)
        spec = dsp.SpectrumBlock(bins=bins, frame_index=3)
        same = apply_gains(spec, BinGains(gains=np.ones(clock.num_bins)))
        assert np.array_equal(same.bins, bins)
        gone = apply_gains(spec, BinGains(gains=np.zeros(clock.num_bins)))
        assert np.all(gone.bins == 0.0)

    def test_magnitude_scaled_phase_untouched(self, rng, clock):
        bins = rng.normal(size=clock.num_bins) + 1j * rng.normal(size=clock.num_bins)
        gains = rng.uniform(0.05, 1.0, size=clock.num_bins)
        out = apply_gains(dsp.SpectrumBlock(bins=bins, frame_index=0),
                          BinGains(gains=gains))
        assert np.allclose(np.abs(out.bins), gains * np.abs(bins), atol=1e-9)
        assert np.allclose(np.angle(out.bins), np.angle(bins), atol=1e-9)

    def test_band_energy_contract_for_flat_gains(self, rng, clock, layout):
        bins = rng.normal(size=clock.num_bins) + 1j * rng.normal(size=clock.num_bins)
        spec = dsp.SpectrumBlock(bins=bins, frame_index=0)
        out = apply_gains(spec, BinGains(gains=np.full(clock.num_bins, 0.6)))
        e_in = dsp.band_energies(spec, layout)
        e_out = dsp.band_energies(out, layout)
        assert np.allclose(e_out, 0.36 * e_in, rtol=1e-12)


class TestGainSmoother:
    def test_starts_open(self):
        sm = GainSmoother()
        assert np.all(sm.state == 1.0)

    def test_rises_faster_than_it_falls(self):
        sm = GainSmoother()
        sm.state[:] = 0.5
        up = sm.smooth(np.ones(22))[0] - 0.5
        sm.state[:] = 0.5
        down = 0.5 - sm.smooth(np.zeros(22))[0]
        assert up > down

    def test_converges_to_constant_target(self):
        sm = GainSmoother()
        target = np.full(22, 0.2)
        for _ in range(60):
            out = sm.smooth(target)
        assert np.allclose(out, 0.2, atol=1e-6)

    def test_one_pole_recursion(self):
        sm = GainSmoother(rise=0.6, fall=0.4)
        target = np.full(22, 0.0)
        out = sm.smooth(target)
        # falling from 1.0 toward 0.0 with coefficient 0.4
        assert np.allclose(out, 0.6, atol=1e-12)
        out = sm.smooth(np.full(22, 1.0))
        # rising with coefficient 0.6 from 0.6
        assert np.allclose(out, 0.6 + 0.6 * 0.4, atol=1e-12)

    def test_returned_array_is_a_copy(self):
        sm = GainSmoother()
        out = sm.smooth(np.zeros(22))
        out[:] = 123.0
        assert np.all(sm.state != 123.0)

    def test_reset(self):
        sm = GainSmoother()
        sm.smooth(np.zeros(22))
        sm.reset()
        assert np.all(sm.state == 1.0)
