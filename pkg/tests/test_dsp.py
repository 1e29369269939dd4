import numpy as np
import pytest

from aecnet import dsp
from aecnet.errors import ConfigurationError, WavFormatError


class TestAudioClock:
    def test_defaults(self, clock):
        assert clock.sample_rate == 16000
        assert clock.hop == 160
        assert clock.window == 320
        assert clock.fft_size == 512
        assert clock.num_bins == 257

    def test_window_must_be_twice_hop(self):
        with pytest.raises(ConfigurationError):
            dsp.AudioClock(hop=160, window=400)

    def test_fft_must_cover_window(self):
        with pytest.raises(ConfigurationError):
            dsp.AudioClock(hop=320, window=640, fft_size=512)


class TestSineWindow:
    def test_overlap_squares_sum_to_one(self):
        w = dsp.sine_window(320)
        np.testing.assert_allclose(w[:160] ** 2 + w[160:] ** 2, 1.0, atol=1e-12)

    def test_symmetric(self):
        w = dsp.sine_window(320)
        np.testing.assert_allclose(w, w[::-1], atol=1e-12)


class TestFrameStream:
    def test_320_samples_make_two_frames(self, rng, clock):
        x = rng.standard_normal(320)
        frames = dsp.frame_stream(x, clock)
        assert len(frames) == 2
        assert frames[0].index == 0 and frames[1].index == 1
        w = dsp.sine_window(320)
        np.testing.assert_allclose(frames[0].samples, x * w)
        # frame 1 holds the last hop then zero padding
        np.testing.assert_allclose(frames[1].samples[:160], x[160:] * w[:160])
        np.testing.assert_allclose(frames[1].samples[160:], 0.0)

    def test_zero_input_gives_zero_frames(self, clock):
        frames = dsp.frame_stream(np.zeros(1600), clock)
        assert len(frames) == 10
        for f in frames:
            np.testing.assert_array_equal(f.samples, 0.0)

    def test_impulse_at_zero(self, clock):
        x = np.zeros(320)
        x[0] = 1.0
        frames = dsp.frame_stream(x, clock)
        w = dsp.sine_window(320)
        assert frames[0].samples[0] == pytest.approx(w[0])
        np.testing.assert_array_equal(frames[1].samples, 0.0)

    def test_empty_input(self, clock):
        assert dsp.frame_stream(np.zeros(0), clock) == []

    def test_frame_count_is_ceil(self, rng, clock):
        for n in (1, 159, 160, 161, 1600, 1601):
            frames = dsp.frame_stream(rng.standard_normal(n), clock)
            assert len(frames) == -(-n // clock.hop)


class TestFft:
    def test_zero_frame(self, clock):
        spec = dsp.fft(dsp.FrameBuffer(np.zeros(320)), clock)
        np.testing.assert_array_equal(spec.bins, 0.0)
        assert len(spec.bins) == 257

    def test_1khz_sine_hits_bin_32(self, clock):
        t = np.arange(512) / 16000.0
        frame = dsp.FrameBuffer(np.sin(2 * np.pi * 1000.0 * t)[:320])
        spec = dsp.fft(frame, clock)
        power = np.abs(spec.bins) ** 2
        assert np.argmax(power) == 32

    def test_roundtrip(self, rng, clock):
        x = rng.standard_normal(320)
        back = dsp.ifft(dsp.fft(dsp.FrameBuffer(x, index=4), clock), clock)
        assert back.index == 4
        assert np.sqrt(np.mean((back.samples - x) ** 2)) < 1e-9

    def test_size_mismatch_rejected(self, clock):
        with pytest.raises(ConfigurationError):
            dsp.fft(dsp.FrameBuffer(np.zeros(100)), clock)
        with pytest.raises(ConfigurationError):
            dsp.ifft(dsp.SpectrumBlock(np.zeros(100, dtype=complex)), clock)

    def test_parseval(self, rng, clock):
        x = rng.standard_normal(320)
        spec = dsp.fft(dsp.FrameBuffer(x), clock)
        frame_e = float(np.sum(x ** 2))
        spec_e = dsp.spectrum_energy(spec, clock) / clock.fft_size
        assert spec_e == pytest.approx(frame_e, rel=1e-9)


class TestOverlapAdd:
    def test_zero_frames(self, clock):
        assert dsp.overlap_add([], clock).size == 0

    def test_perfect_reconstruction(self, rng, clock):
        x = rng.standard_normal(16000)
        out = dsp.overlap_add(dsp.frame_stream(x, clock), clock)
        assert out.shape == (16000,)
        body = slice(clock.hop, 16000)
        err = np.sqrt(np.mean((out[body] - x[body]) ** 2))
        assert err / np.sqrt(np.mean(x[body] ** 2)) < 1e-6

    def test_single_grain(self, clock):
        w = dsp.sine_window(320)
        frame = dsp.FrameBuffer(np.ones(320), index=2)
        out = dsp.overlap_add([frame], clock)
        np.testing.assert_allclose(out[320:480], w[:160])
        np.testing.assert_array_equal(out[:320], 0.0)


class TestBandLayout:
    def test_default_edges(self, layout):
        assert layout.num_bands == 22
        assert len(layout.edges) == 23
        assert layout.edges[0] == 0
        assert layout.edges[-1] == 256
        assert np.all(np.diff(layout.edges) > 0)

    def test_bad_edges_rejected(self):
        with pytest.raises(ConfigurationError):
            dsp.BandLayout(edges=np.arange(10))
        bad = np.array([0] + list(range(1, 22)) + [21])  # not increasing at end
        with pytest.raises(ConfigurationError):
            dsp.BandLayout(edges=bad)

    def test_triangular_weights_partition_unity(self, layout, clock):
        idx, frac = layout.bin_to_band(clock.num_bins)
        assert idx.min() >= 0 and idx.max() == layout.num_bands - 1
        assert np.all(frac >= 0.0) and np.all(frac < 1.0 + 1e-12)
        # weight into band idx plus weight into idx+1 is 1 for every bin
        np.testing.assert_allclose((1.0 - frac) + frac, 1.0)

    def test_band_edge_bins_belong_fully(self, layout, clock):
        idx, frac = layout.bin_to_band(clock.num_bins)
        for k, edge in enumerate(layout.edges[:-1]):
            assert idx[edge] == k
            assert frac[edge] == 0.0


class TestBandEnergies:
    def test_zero_spectrum(self, layout, clock):
        spec = dsp.SpectrumBlock(np.zeros(257, dtype=complex))
        np.testing.assert_array_equal(dsp.band_energies(spec, layout), 0.0)

    def test_single_bin_at_edge_fully_in_band(self, layout):
        bins = np.zeros(257, dtype=complex)
        edge = layout.edges[5]
        bins[edge] = 3.0
        e = dsp.band_energies(dsp.SpectrumBlock(bins), layout)
        assert e[5] == pytest.approx(9.0)
        assert np.sum(e) == pytest.approx(9.0)

    def test_total_energy_conserved(self, rng, layout):
        bins = rng.standard_normal(257) + 1j * rng.standard_normal(257)
        e = dsp.band_energies(dsp.SpectrumBlock(bins), layout)
        assert np.all(e >= 0.0)
        assert np.sum(e) == pytest.approx(float(np.sum(np.abs(bins) ** 2)), rel=1e-9)


class TestWavIo:
    def test_roundtrip(self, rng, tmp_path):
        x = np.clip(rng.standard_normal(4321) * 0.2, -1, 1)
        path = tmp_path / "t.wav"
        dsp.write_wav(str(path), x)
        back = dsp.read_wav(str(path))
        assert back.shape == x.shape
        assert np.max(np.abs(back - x)) <= 1.0 / 32768.0

    def test_rejects_stereo(self, tmp_path):
        import wave
        path = tmp_path / "stereo.wav"
        with wave.open(str(path), "wb") as wf:
            wf.setnchannels(2)
            wf.setsampwidth(2)
            wf.setframerate(16000)
            wf.writeframes(b"\x00" * 64)
        with pytest.raises(WavFormatError, match="stereo.wav"):
            dsp.read_wav(str(path))

    def test_rejects_wrong_rate(self, tmp_path):
        import wave
        path = tmp_path / "rate.wav"
        with wave.open(str(path), "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(2)
            wf.setframerate(8000)
            wf.writeframes(b"\x00" * 64)
        with pytest.raises(WavFormatError, match="8000"):
            dsp.read_wav(str(path))

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.wav"
        path.write_bytes(b"this is not audio")
        with pytest.raises(WavFormatError, match="bad.wav"):
            dsp.read_wav(str(path))
