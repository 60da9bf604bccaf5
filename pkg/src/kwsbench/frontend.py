"""WAV decoding and the 101 x 40 MFCC front-end.

The 20 Hz / 4 kHz band limits are applied in the mel filterbank (filters
only cover that range) rather than by a separate time-domain filter.
"""
from dataclasses import dataclass

import numpy as np
import scipy.fft
from numpy.lib.stride_tricks import sliding_window_view
from scipy.io import wavfile

from .errors import WavDecodeError

CLIP_SAMPLES = 16000


@dataclass(frozen=True)
class PcmBuffer:
    samples: np.ndarray
    sample_rate_hz: int = 16000

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float32)
        if samples.ndim != 1:
            raise ValueError(f"expected mono samples, got shape {samples.shape}")
        object.__setattr__(self, "samples", samples)


@dataclass(frozen=True)
class MfccConfig:
    sample_rate_hz: int = 16000
    window_ms: float = 30
    shift_ms: float = 10
    n_mfcc: int = 40
    n_frames: int = 101
    band_low_hz: float = 20.0
    band_high_hz: float = 4000.0
    n_mels: int = 40
    fft_size: int = 512
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.window_samples > self.fft_size:
            raise ValueError(f"window of {self.window_samples} samples exceeds fft_size {self.fft_size}")
        if not 0 <= self.band_low_hz < self.band_high_hz <= self.sample_rate_hz / 2:
            raise ValueError(f"bad band limits {self.band_low_hz}..{self.band_high_hz} Hz")
        if self.n_mfcc > self.n_mels:
            raise ValueError("n_mfcc cannot exceed n_mels")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")
        expected = 1 + self.clip_samples // self.shift_samples
        if self.n_frames != expected:
            raise ValueError(f"n_frames={self.n_frames} but centered framing yields {expected}")

    @property
    def window_samples(self):
        return int(round(self.sample_rate_hz * self.window_ms / 1000))

    @property
    def shift_samples(self):
        return int(round(self.sample_rate_hz * self.shift_ms / 1000))

    @property
    def clip_samples(self):
        return self.sample_rate_hz


def fit_length(samples, length=CLIP_SAMPLES):
    """Zero-pad at the end or truncate to exactly ``length`` samples."""
    samples = np.asarray(samples, dtype=np.float32)
    if samples.shape[0] >= length:
        return samples[:length].copy()
    return np.concatenate([samples, np.zeros(length - samples.shape[0], np.float32)])


def load_wav(path, sample_rate_hz=16000):
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise WavDecodeError("container", f"{path}: {exc}") from None
    if rate != sample_rate_hz:
        raise WavDecodeError("sample_rate", f"{rate} Hz (need {sample_rate_hz})")
    if data.ndim != 1:
        raise WavDecodeError("channel_count", f"{data.shape[1]} channels (need mono)")
    if data.dtype == np.int16:
        samples = data.astype(np.float32) / 32768.0
    elif data.dtype == np.float32:
        if not np.isfinite(data).all():
            raise WavDecodeError("samples", "non-finite float samples")
        samples = np.clip(data, -1.0, 1.0)
    else:
        raise WavDecodeError("codec", f"{data.dtype} samples (need PCM16 or float32)")
    return PcmBuffer(fit_length(samples, sample_rate_hz), rate)


def write_wav(path, samples, sample_rate_hz=16000, pcm16=True):
    samples = np.asarray(samples, dtype=np.float32)
    if pcm16:
        data = np.clip(np.round(samples * 32767.0), -32768, 32767).astype(np.int16)
    else:
        data = samples
    wavfile.write(path, sample_rate_hz, data)


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: MfccConfig):
    """(n_mels, fft_size // 2 + 1) triangular filters spanning the band limits."""
    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.band_low_hz), hz_to_mel(cfg.band_high_hz),
                                  cfg.n_mels + 2))
    freqs = np.arange(cfg.fft_size // 2 + 1) * cfg.sample_rate_hz / cfg.fft_size
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lower) / (center - lower)
    falling = (upper - freqs) / (upper - center)
    return np.maximum(0.0, np.minimum(rising, falling))


def hann(n):
    # periodic form, as used for spectral analysis
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def frames(samples, cfg: MfccConfig):
    """Centered, Hann-windowed frames of shape (n_frames, window_samples)."""
    win = cfg.window_samples
    padded = np.pad(np.asarray(samples, dtype=np.float64), win // 2, mode="reflect")
    framed = sliding_window_view(padded, win)[:: cfg.shift_samples]
    return framed[: cfg.n_frames] * hann(win)


def mel_energies(pcm: PcmBuffer, cfg: MfccConfig = MfccConfig()):
    """Mel filterbank outputs of the magnitude spectrum, (n_frames, n_mels), float64."""
    if pcm.sample_rate_hz != cfg.sample_rate_hz:
        raise ValueError(f"buffer rate {pcm.sample_rate_hz} != config rate {cfg.sample_rate_hz}")
    samples = fit_length(pcm.samples, cfg.clip_samples)
    spectrum = np.abs(np.fft.rfft(frames(samples, cfg), n=cfg.fft_size, axis=1))
    return spectrum @ mel_filterbank(cfg).T


def extract_mfcc(pcm: PcmBuffer, cfg: MfccConfig = MfccConfig()):
    log_mel = np.log(np.maximum(mel_energies(pcm, cfg), cfg.log_floor))
    coeffs = scipy.fft.dct(log_mel, type=2, norm="ortho", axis=1)[:, : cfg.n_mfcc]
    return coeffs.astype(np.float32)
