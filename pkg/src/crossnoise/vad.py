"""Energy-gate voice activity detection and noise-only signal estimation.

A frame is speech when its energy exceeds a low percentile of all frame
energies (the noise floor) by a fixed margin. Noise-only frames are then
concatenated into a noise estimate whose power feeds the clean-power
subtraction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from crossnoise import _backend
from crossnoise.errors import ClampWarning, InsufficientNoise, InvalidInput, TooShort
from crossnoise.signal_core import Waveform, power

ENERGY_FLOOR = 1e-12
CLAMP_FRACTION = 1e-6


@dataclass(frozen=True)
class VadConfig:
    frame_ms: float = 25.0
    hop_ms: float = 10.0
    floor_percentile: float = 5.0
    threshold_db_above_floor: float = 6.0
    min_noise_frames: int = 5

    def __post_init__(self):
        if not (self.frame_ms > 0 and self.hop_ms > 0):
            raise InvalidInput("frame_ms and hop_ms must be positive")
        if self.hop_ms > self.frame_ms:
            raise InvalidInput(f"hop_ms ({self.hop_ms}) exceeds frame_ms ({self.frame_ms})")
        if not 0 <= self.floor_percentile <= 100:
            raise InvalidInput(f"floor_percentile must lie in [0, 100], got {self.floor_percentile}")
        if not math.isfinite(self.threshold_db_above_floor):
            raise InvalidInput("threshold_db_above_floor must be finite")
        if int(self.min_noise_frames) != self.min_noise_frames or self.min_noise_frames < 1:
            raise InvalidInput(f"min_noise_frames must be an integer >= 1, got {self.min_noise_frames}")

    def frame_geometry(self, sample_rate_hz):
        """Frame length and hop in samples for the given rate."""
        frame_len = max(1, int(round(self.frame_ms * sample_rate_hz / 1000.0)))
        hop = max(1, int(round(self.hop_ms * sample_rate_hz / 1000.0)))
        return frame_len, min(hop, frame_len)


@dataclass(frozen=True, eq=False)
class VadMask:
    """Per-frame labels; ``speech[i]`` is True when frame ``i`` holds speech."""

    speech: np.ndarray
    frame_len_samples: int
    hop_samples: int
    total_samples: int

    def __post_init__(self):
        speech = np.asarray(self.speech, dtype=bool)
        expected = num_frames(self.total_samples, self.frame_len_samples, self.hop_samples)
        if speech.shape != (expected,):
            raise InvalidInput(f"mask has {speech.shape[0]} frames, geometry implies {expected}")
        object.__setattr__(self, "speech", speech)

    @property
    def n_frames(self):
        return self.speech.shape[0]

    @property
    def n_noise_frames(self):
        return int(self.n_frames - np.count_nonzero(self.speech))


def num_frames(total_samples, frame_len, hop):
    if total_samples < frame_len:
        return 0
    return (total_samples - frame_len) // hop + 1


@dataclass(frozen=True, eq=False)
class NoiseEstimate:
    noise: Waveform
    power: float
    source_id: str
    noise_fraction: float


@dataclass(frozen=True)
class CleanPower:
    """Clean-speech power estimate; ``clamped`` marks the degenerate P_n >= P_y path."""

    value: float
    clamped: bool = False


def frame_energies(w: Waveform, cfg: VadConfig = VadConfig()) -> np.ndarray:
    """Per-frame energy in dB (rectangular window, partial tail frame dropped)."""
    frame_len, hop = cfg.frame_geometry(w.sample_rate_hz)
    if len(w) < frame_len:
        raise TooShort(f"waveform has {len(w)} samples, one frame needs {frame_len}")
    ms = _backend.frame_mean_squares(w.samples, frame_len, hop)
    return 10.0 * np.log10(ms + ENERGY_FLOOR)


def detect_speech(w: Waveform, cfg: VadConfig = VadConfig()) -> VadMask:
    energies = frame_energies(w, cfg)
    floor = np.percentile(energies, cfg.floor_percentile)
    frame_len, hop = cfg.frame_geometry(w.sample_rate_hz)
    return VadMask(
        speech=energies > floor + cfg.threshold_db_above_floor,
        frame_len_samples=frame_len,
        hop_samples=hop,
        total_samples=len(w),
    )


def noise_sample_index(mask: VadMask) -> np.ndarray:
    """Sample indices of the hop-length slices that open each noise frame."""
    starts = np.flatnonzero(~mask.speech) * mask.hop_samples
    return (starts[:, None] + np.arange(mask.hop_samples)).ravel()


def extract_noise(
    w: Waveform, mask: VadMask, source_id: str, min_noise_frames: int = VadConfig.min_noise_frames
) -> NoiseEstimate:
    """Concatenate the noise-labelled parts of ``w`` into a noise estimate.

    Each noise frame contributes only its leading hop of samples, so
    overlapping frames never count a sample twice.
    """
    if mask.total_samples != len(w):
        raise InvalidInput(f"mask covers {mask.total_samples} samples, waveform has {len(w)}")
    if mask.n_noise_frames < min_noise_frames:
        raise InsufficientNoise(
            f"{source_id}: {mask.n_noise_frames} noise frames, need at least {min_noise_frames}"
        )
    noise = w.with_samples(w.samples[noise_sample_index(mask)])
    return NoiseEstimate(
        noise=noise,
        power=power(noise),
        source_id=source_id,
        noise_fraction=mask.n_noise_frames / mask.n_frames,
    )


def estimate_noise(w: Waveform, source_id: str, cfg: VadConfig = VadConfig()) -> NoiseEstimate:
    return extract_noise(w, detect_speech(w, cfg), source_id, cfg.min_noise_frames)


def estimate_clean_power(noisy_power: float, noise_power: float) -> CleanPower:
    """Clean power as noisy power minus noise power (speech and noise uncorrelated).

    When the noise power reaches the noisy power the result is clamped to a
    tiny fraction of the noisy power and a :class:`ClampWarning` is issued.
    """
    if not noisy_power > 0:
        raise InvalidInput(f"noisy power must be positive, got {noisy_power!r}")
    if noise_power < 0:
        raise InvalidInput(f"noise power must be non-negative, got {noise_power!r}")
    diff = noisy_power - noise_power
    if diff > 0:
        return CleanPower(diff)
    warnings.warn(
        f"noise power {noise_power:.6g} >= noisy power {noisy_power:.6g}; clean power clamped",
        ClampWarning,
        stacklevel=2,
    )
    return CleanPower(CLAMP_FRACTION * noisy_power, clamped=True)
