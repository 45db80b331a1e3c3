"""Power, SNR, noise tiling and mixing on mono float64 waveforms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from crossnoise import _backend
from crossnoise.errors import InvalidInput, RateMismatch


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono sample buffer. Samples are stored as a read-only float64 array."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64, copy=True)
        if samples.ndim != 1:
            raise InvalidInput(f"waveform must be 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise InvalidInput("waveform contains NaN or Inf samples")
        rate = int(self.sample_rate_hz)
        if rate <= 0 or rate != self.sample_rate_hz:
            raise InvalidInput(f"sample rate must be a positive integer, got {self.sample_rate_hz!r}")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", rate)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_s(self):
        return len(self) / self.sample_rate_hz

    def with_samples(self, samples):
        return Waveform(samples, self.sample_rate_hz)


def power(w: Waveform) -> float:
    """Mean squared amplitude, accumulated with compensated summation."""
    if len(w) == 0:
        raise InvalidInput("power of an empty waveform is undefined")
    return _backend.sum_squares(w.samples) / len(w)


def snr_db(signal_power: float, noise_power: float) -> float:
    if not (signal_power > 0 and math.isfinite(signal_power)):
        raise InvalidInput(f"signal power must be positive and finite, got {signal_power!r}")
    if not (noise_power > 0 and math.isfinite(noise_power)):
        raise InvalidInput(f"noise power must be positive and finite, got {noise_power!r}")
    return 10.0 * math.log10(signal_power / noise_power)


def tile_to_length(noise: Waveform, target_len: int) -> Waveform:
    """Repeat ``noise`` end-to-end (no crossfade) and cut to ``target_len`` samples."""
    if len(noise) == 0:
        raise InvalidInput("cannot tile an empty noise signal")
    if target_len < 1:
        raise InvalidInput(f"target length must be >= 1, got {target_len}")
    if target_len == len(noise):
        return noise
    return noise.with_samples(np.resize(noise.samples, target_len))


def add_scaled(base: Waveform, addend: Waveform, alpha: float) -> Waveform:
    """Return ``base + alpha * addend`` sample-wise."""
    if not math.isfinite(alpha):
        raise InvalidInput(f"alpha must be finite, got {alpha!r}")
    if len(base) != len(addend):
        raise InvalidInput(f"length mismatch: {len(base)} vs {len(addend)}")
    if base.sample_rate_hz != addend.sample_rate_hz:
        raise InvalidInput(f"sample rate mismatch: {base.sample_rate_hz} vs {addend.sample_rate_hz}")
    return base.with_samples(base.samples + alpha * addend.samples)


def _check_rates(a: Waveform, b: Waveform):
    if a.sample_rate_hz != b.sample_rate_hz:
        raise RateMismatch(f"sample rates differ: {a.sample_rate_hz} Hz vs {b.sample_rate_hz} Hz")


def noise_gain_for_snr(clean_power: float, noise_power: float, target_snr_db: float) -> float:
    """Gain that puts noise of ``noise_power`` at ``target_snr_db`` below ``clean_power``."""
    if not math.isfinite(target_snr_db):
        raise InvalidInput(f"target SNR must be finite, got {target_snr_db!r}")
    if clean_power <= 0:
        raise InvalidInput("clean signal is silent")
    if noise_power <= 0:
        raise InvalidInput("noise signal is silent")
    return math.sqrt(clean_power / (noise_power * 10.0 ** (target_snr_db / 10.0)))


def scale_noise_to_snr(clean: Waveform, noise: Waveform, target_snr_db: float):
    """Tile ``noise`` to the length of ``clean`` and scale it to the target SNR.

    Returns ``(scaled_noise, beta)``. Powers are measured on the tiled noise, so
    ``snr_db(power(clean), power(scaled_noise))`` hits the target.
    """
    if len(clean) == 0:
        raise InvalidInput("clean signal is empty")
    if len(noise) == 0:
        raise InvalidInput("noise signal is empty")
    _check_rates(clean, noise)
    adapted = tile_to_length(noise, len(clean))
    beta = noise_gain_for_snr(power(clean), power(adapted), target_snr_db)
    return adapted.with_samples(beta * adapted.samples), beta


def mix_at_snr(clean: Waveform, noise: Waveform, target_snr_db: float):
    """Add ``noise`` to ``clean`` at ``target_snr_db``. Returns ``(noisy, beta)``.

    No clipping or peak normalisation is applied.
    """
    scaled, beta = scale_noise_to_snr(clean, noise, target_snr_db)
    return clean.with_samples(clean.samples + scaled.samples), beta
