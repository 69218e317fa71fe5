import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose
from scipy import signal

from kcsc.exceptions import ConfigError, DataFileError
from kcsc.stf_ingest import (
    MultichannelRecording, StftConfig, bandpass, bandpass_gain, frame_count, load_recording,
    stft_tensor,
)

RATE = 250.0


def tone(freq, samples, rate=RATE, channels=1):
    t = np.arange(samples) / rate
    return np.tile(np.sin(2 * np.pi * freq * t), (channels, 1))


class FrameCountTests(SimpleTestCase):

    def test_centered_and_uncentered(self):
        self.assertEqual(frame_count(250000, 1024, 512, centered=True), 490)
        self.assertEqual(frame_count(250000, 1024, 512, centered=False), 487)
        self.assertEqual(frame_count(100, 1024, 512, centered=False), 0)

    def test_tensor_shape_matches_frame_count(self):
        rec = MultichannelRecording(np.random.default_rng(0).standard_normal((3, 20000)), RATE)
        tensor = stft_tensor(rec, StftConfig())
        self.assertEqual(tensor.shape, (3, 82, frame_count(20000, 1024, 512)))
        uncentered = stft_tensor(rec, StftConfig(centered=False))
        self.assertEqual(uncentered.shape[2], frame_count(20000, 1024, 512, centered=False))

    def test_full_length_recording_shape(self):
        rec = MultichannelRecording(np.zeros((2, 250000)), RATE)
        self.assertEqual(stft_tensor(rec, StftConfig()).shape, (2, 82, 490))


class StftTests(SimpleTestCase):

    def test_single_tone_energy_in_main_lobe(self):
        rec = MultichannelRecording(tone(10.0, 5000), RATE)
        tensor = stft_tensor(rec, StftConfig(crop_high=125.0))
        interior = tensor[0, :, 2:-2] ** 2
        peak = int(np.argmax(interior.sum(axis=1)))
        self.assertEqual(peak, int(round(10.0 * 1024 / RATE)))
        lobe = interior[peak - 1:peak + 2].sum()
        self.assertLess((interior.sum() - lobe) / interior.sum(), 0.01)

    def test_power_is_squared_magnitude(self):
        rec = MultichannelRecording(np.random.default_rng(1).standard_normal((1, 4000)), RATE)
        magnitude = stft_tensor(rec, StftConfig())
        power = stft_tensor(rec, StftConfig(output='power'))
        assert_allclose(power, magnitude ** 2)
        self.assertTrue(np.all(magnitude >= 0))

    def test_energy_matches_windowed_signal(self):
        samples = np.random.default_rng(2).standard_normal((1, 20000))
        rec = MultichannelRecording(samples, RATE)
        power = stft_tensor(rec, StftConfig(window=64, crop_high=RATE / 2.0, output='power'))[0]
        self.assertEqual(power.shape[0], 33)
        two_sided = power[0].sum() + 2.0 * power[1:-1].sum() + power[-1].sum()
        window = signal.get_window('hann', 64)
        # Half-overlapping Hann frames weight every sample by sum(w^2) / hop on average.
        expected = 64 * np.sum(samples ** 2) * np.sum(window ** 2) / 32
        self.assertAlmostEqual(two_sided / expected, 1.0, delta=0.02)

    def test_config_validation(self):
        with self.assertRaises(ConfigError):
            StftConfig(overlap=1.0).validate(RATE)
        with self.assertRaises(ConfigError):
            StftConfig(band_high=200.0).validate(RATE)
        with self.assertRaises(ConfigError):
            StftConfig(output='phase').validate(RATE)
        with self.assertRaises(ConfigError):
            MultichannelRecording(np.zeros((1, 10)), -1.0)
        with self.assertRaises(DataFileError):
            MultichannelRecording(np.array([[np.nan, 1.0]]), RATE)


class BandpassTests(SimpleTestCase):

    def test_gain_profile(self):
        freqs = np.array([0.0, 0.75, 1.0, 10.0, 20.0, 20.25, 21.0])
        assert_allclose(bandpass_gain(freqs, 1.0, 20.0), [0.0, 0.5, 1.0, 1.0, 1.0, 0.5, 0.0], atol=1e-12)

    def test_passes_in_band_and_removes_out_of_band(self):
        inside = tone(5.0, 5000)
        outside = tone(50.0, 5000)
        filtered = bandpass(MultichannelRecording(inside + outside, RATE), 1.0, 20.0)
        assert_allclose(filtered.data, inside, atol=1e-10)

    def test_rejects_band_above_nyquist(self):
        with self.assertRaises(ConfigError):
            bandpass(MultichannelRecording(tone(5.0, 500), RATE), 1.0, 200.0)


class LoadRecordingTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)

    def test_csv_needs_rate(self):
        path = self.dir / 'rec.csv'
        np.savetxt(path, np.arange(12.0).reshape(6, 2), delimiter=',')
        with self.assertRaises(ConfigError):
            load_recording(path)
        rec = load_recording(path, RATE)
        self.assertEqual((rec.channels, rec.samples), (2, 6))
        assert_allclose(rec.data[1], [1, 3, 5, 7, 9, 11])

    def test_raw_with_header(self):
        data = np.arange(12, dtype='<f4')
        path = self.dir / 'rec.raw'
        data.tofile(path)
        (self.dir / 'rec.json').write_text(json.dumps({'channels': 3, 'rate': 128, 'dtype': 'f32'}))
        rec = load_recording(path)
        self.assertEqual(rec.rate, 128.0)
        assert_allclose(rec.data[0], [0, 3, 6, 9])

    def test_raw_errors(self):
        path = self.dir / 'rec.raw'
        np.arange(10, dtype='<f4').tofile(path)
        with self.assertRaises(DataFileError):
            load_recording(path)
        (self.dir / 'rec.json').write_text(json.dumps({'channels': 3, 'rate': 128}))
        with self.assertRaises(DataFileError):
            load_recording(path)
        with self.assertRaises(DataFileError):
            load_recording(self.dir / 'missing.raw')
