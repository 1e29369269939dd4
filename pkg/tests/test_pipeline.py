"""Tests for the streaming session and the file-to-file wrapper."""

import resource

import numpy as np
import pytest
from scipy.signal import fftconvolve

from aecnet import dsp, rnn
from aecnet.errors import ConfigurationError, StreamError
from aecnet.mdf import FilterConfig, MdfFilter
from aecnet.pipeline import (ALGORITHMIC_DELAY, AecSession, RunReport,
                             process_files)

HOP = dsp.HOP


def make_echo_pair(rng, seconds=1.0, scale=0.3):
    n = int(seconds * dsp.SAMPLE_RATE)
    far = rng.standard_normal(n) * scale
    rir = np.array([0.7, 0.25, -0.1, 0.05])
    mic = fftconvolve(far, rir)[:n]
    return far, mic


def run_session(session, far, mic):
    """Push everything; return the concatenated emitted stream."""
    n_frames = len(far) // HOP
    chunks = []
    for l in range(n_frames):
        sl = slice(l * HOP, (l + 1) * HOP)
        chunks.append(session.push(far[sl], mic[sl]).out_frame)
    chunks.append(session.flush())
    return np.concatenate(chunks)


def biased_model(vad_far_bias, gain_bias=0.0):
    """Zero model with pinned VAD/gain heads, for gate plumbing tests."""
    weights = rnn.zero_weights()
    weights["vad_far_dense"].bias[:] = vad_far_bias
    weights["gain_dense"].bias[:] = gain_bias
    return weights


class TestStreamBasics:
    def test_silence_in_silence_out(self):
        session = AecSession()
        for _ in range(20):
            res = session.push(np.zeros(HOP), np.zeros(HOP))
            assert np.all(res.out_frame == 0.0)
        assert np.all(session.flush() == 0.0)

    def test_latency_exactly_one_hop(self):
        """An impulse on the mic channel reappears 160 samples later."""
        n = HOP * 8
        mic = np.zeros(n)
        mic[400] = 1.0
        out = run_session(AecSession(), np.zeros(n), mic)
        peak = int(np.argmax(np.abs(out)))
        assert peak == 400 + ALGORITHMIC_DELAY
        assert out[peak] == pytest.approx(1.0, abs=1e-9)
        rest = np.delete(out, peak)
        assert np.max(np.abs(rest)) < 1e-9

    def test_bypass_equals_delayed_filter_output(self, rng):
        far, mic = make_echo_pair(rng, seconds=1.0)
        session = AecSession()
        out = run_session(session, far, mic)

        filt = MdfFilter(FilterConfig())
        err = np.concatenate([
            filt.process(far[l * HOP:(l + 1) * HOP],
                         mic[l * HOP:(l + 1) * HOP]).error_frame
            for l in range(len(far) // HOP)
        ])
        # leading hop reconstructs the silent pre-history (FFT dust only)
        assert np.max(np.abs(out[:ALGORITHMIC_DELAY])) < 1e-12
        resid = out[ALGORITHMIC_DELAY:] - err
        rel = np.linalg.norm(resid) / np.linalg.norm(err)
        assert rel < 1e-6

    def test_causality(self, rng):
        far, mic = make_echo_pair(rng, seconds=0.5)
        full = run_session(AecSession(), far, mic)
        cut = 20 * HOP
        prefix = run_session(AecSession(), far[:cut], mic[:cut])
        # everything but the flush tail must agree with the longer run
        assert np.array_equal(prefix[:cut], full[:cut])

    def test_deterministic(self, rng):
        far, mic = make_echo_pair(rng, seconds=0.5)
        weights = rnn.random_weights(seed=3)
        a = run_session(AecSession(weights), far, mic)
        b = run_session(AecSession(weights), far, mic)
        assert np.array_equal(a, b)

    def test_frame_result_fields(self, rng):
        far, mic = make_echo_pair(rng, seconds=0.2)
        session = AecSession(rnn.random_weights(seed=4))
        for l in range(len(far) // HOP):
            sl = slice(l * HOP, (l + 1) * HOP)
            res = session.push(far[sl], mic[sl])
            assert res.out_frame.shape == (HOP,)
            assert res.band_gains.shape == (22,)
            assert 0.0 <= res.vad_near <= 1.0
            assert 0.0 <= res.vad_far <= 1.0
            assert np.isfinite(res.erle_instant)
            assert res.proc_micros >= 0.0


class TestErrors:
    def test_wrong_hop_poisons_session(self):
        session = AecSession()
        with pytest.raises(StreamError):
            session.push(np.zeros(HOP + 1), np.zeros(HOP + 1))
        with pytest.raises(StreamError, match="poisoned"):
            session.push(np.zeros(HOP), np.zeros(HOP))

    def test_non_finite_input_poisons_session(self):
        session = AecSession()
        bad = np.zeros(HOP)
        bad[7] = np.nan
        with pytest.raises(StreamError):
            session.push(bad, np.zeros(HOP))
        with pytest.raises(StreamError, match="poisoned"):
            session.push(np.zeros(HOP), np.zeros(HOP))

    def test_wrong_clock_rejected(self):
        with pytest.raises(ConfigurationError):
            AecSession(clock=dsp.AudioClock(hop=80, window=160, fft_size=256))


class TestGating:
    def test_soft_gate_holds_when_far_quiet(self, rng):
        # vad_far pinned near 0: the gate never releases, gains stay unity
        session = AecSession(biased_model(vad_far_bias=-10.0, gain_bias=-10.0))
        mic = rng.standard_normal(HOP * 30) * 0.2
        for l in range(30):
            res = session.push(np.zeros(HOP), mic[l * HOP:(l + 1) * HOP])
            assert np.allclose(res.band_gains, 1.0)

    def test_soft_gate_releases_after_five_active_frames(self, rng):
        # vad_far pinned near 1: release on the fifth frame, then the
        # suppressor's (tiny) gains take over through the smoother
        session = AecSession(biased_model(vad_far_bias=10.0, gain_bias=-10.0))
        far, mic = make_echo_pair(rng, seconds=0.3)
        seen = []
        for l in range(len(far) // HOP):
            sl = slice(l * HOP, (l + 1) * HOP)
            seen.append(session.push(far[sl], mic[sl]).band_gains.mean())
        assert np.allclose(seen[:4], 1.0)
        assert seen[4] < 0.7
        assert seen[8] < seen[4]

    def test_hard_gate_passthrough_when_far_quiet(self, rng):
        session = AecSession(biased_model(vad_far_bias=-10.0, gain_bias=-10.0),
                             hard_gate=True)
        mic = rng.standard_normal(HOP * 10) * 0.2
        for l in range(10):
            res = session.push(np.zeros(HOP), mic[l * HOP:(l + 1) * HOP])
            assert np.allclose(res.band_gains, 1.0)

    def test_hard_gate_has_no_engage_delay(self, rng):
        session = AecSession(biased_model(vad_far_bias=10.0, gain_bias=-10.0),
                             hard_gate=True)
        far, mic = make_echo_pair(rng, seconds=0.1)
        res = session.push(far[:HOP], mic[:HOP])
        assert res.band_gains.mean() < 0.7  # suppressing from frame one


class TestSoak:
    def test_no_allocation_growth(self, rng):
        session = AecSession(rnn.random_weights(seed=9))
        far, mic = make_echo_pair(rng, seconds=0.5)
        hops = len(far) // HOP

        def spin(n_frames):
            for i in range(n_frames):
                l = i % hops
                sl = slice(l * HOP, (l + 1) * HOP)
                session.push(far[sl], mic[sl])

        spin(300)   # let caches, pools, and lazy imports settle
        before = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
        spin(2000)
        after = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
        grown_kb = after - before
        assert grown_kb < 4096, f"peak RSS grew {grown_kb} kb over 2000 frames"


class TestProcessFiles:
    @pytest.fixture()
    def wav_pair(self, rng, tmp_path):
        far, mic = make_echo_pair(rng, seconds=1.0)
        far_path = tmp_path / "far.wav"
        mic_path = tmp_path / "mic.wav"
        dsp.write_wav(far_path, far)
        dsp.write_wav(mic_path, mic)
        return far_path, mic_path

    def test_report_and_output_length(self, wav_pair, tmp_path):
        far_path, mic_path = wav_pair
        out_path = tmp_path / "out.wav"
        report = process_files(far_path, mic_path, out_path)
        assert isinstance(report, RunReport)
        assert not report.padded
        assert not report.nn_enabled
        assert report.frames == 100
        assert report.samples == 16000
        assert len(dsp.read_wav(out_path)) == 16000
        assert np.isfinite(report.erle_mean_db)
        assert report.rt.count == 100
        text = "\n".join(report.lines())
        assert "frames processed" in text
        assert "mean ERLE" in text

    def test_identical_runs_identical_bytes(self, wav_pair, tmp_path):
        far_path, mic_path = wav_pair
        a, b = tmp_path / "a.wav", tmp_path / "b.wav"
        process_files(far_path, mic_path, a)
        process_files(far_path, mic_path, b)
        assert a.read_bytes() == b.read_bytes()

    def test_output_aligned_with_mic(self, rng, tmp_path):
        # an impulse in the mic (far silent) lands at the same sample
        # index in the output file: file mode hides the stream latency
        n = 16000
        mic = np.zeros(n)
        mic[5000] = 0.9
        far_path, mic_path = tmp_path / "far.wav", tmp_path / "mic.wav"
        dsp.write_wav(far_path, np.zeros(n))
        dsp.write_wav(mic_path, mic)
        out_path = tmp_path / "out.wav"
        process_files(far_path, mic_path, out_path)
        out = dsp.read_wav(out_path)
        assert int(np.argmax(np.abs(out))) == 5000

    def test_shorter_input_padded_and_flagged(self, rng, tmp_path):
        far, mic = make_echo_pair(rng, seconds=1.0)
        far_path, mic_path = tmp_path / "far.wav", tmp_path / "mic.wav"
        dsp.write_wav(far_path, far)
        dsp.write_wav(mic_path, mic[:12000])
        report = process_files(far_path, mic_path, tmp_path / "out.wav")
        assert report.padded
        assert report.samples == 16000
        assert len(dsp.read_wav(tmp_path / "out.wav")) == 16000

    def test_gain_dump_csv(self, wav_pair, tmp_path):
        far_path, mic_path = wav_pair
        csv_path = tmp_path / "gains.csv"
        process_files(far_path, mic_path, tmp_path / "out.wav",
                      weights=rnn.random_weights(seed=6),
                      dump_gains_path=csv_path)
        lines = csv_path.read_text().strip().splitlines()
        assert len(lines) == 101  # header + one row per frame
        header = lines[0].split(",")
        assert header[0] == "frame"
        assert header[1] == "g_0"
        assert header[22] == "g_21"
        assert header[23:] == ["vad_near", "vad_far"]
        first = lines[1].split(",")
        assert len(first) == 25

    def test_empty_input_rejected(self, tmp_path):
        silent = tmp_path / "empty.wav"
        dsp.write_wav(silent, np.zeros(0))
        with pytest.raises(ConfigurationError):
            process_files(silent, silent, tmp_path / "out.wav")

    def test_nn_run_costs_more_than_bypass(self, wav_pair, tmp_path):
        far_path, mic_path = wav_pair
        bypass = process_files(far_path, mic_path, tmp_path / "a.wav")
        full = process_files(far_path, mic_path, tmp_path / "b.wav",
                             weights=rnn.random_weights(seed=7))
        assert full.rt.mean_micros > bypass.rt.mean_micros
