"""WAV reading/writing and atomic file output."""

from __future__ import annotations

import contextlib
import io
import logging
import os
import tempfile
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from crossnoise.errors import CorpusIOError, FormatError, InvalidInput, NotMono
from crossnoise.signal_core import Waveform

log = logging.getLogger(__name__)

BIT_DEPTHS = (16, 32, 64)


@contextlib.contextmanager
def atomic_path(path):
    """Yield a temporary path next to ``path``; rename it into place on success."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    os.close(fd)
    try:
        yield Path(tmp)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def write_bytes_atomic(path, data: bytes):
    with atomic_path(path) as tmp:
        tmp.write_bytes(data)


def write_text_atomic(path, text: str):
    write_bytes_atomic(path, text.encode("utf-8"))


def save_array_atomic(path, arr):
    buf = io.BytesIO()
    np.save(buf, np.asarray(arr, dtype=np.float64), allow_pickle=False)
    write_bytes_atomic(path, buf.getvalue())


def load_array(path):
    try:
        return np.load(path, allow_pickle=False)
    except FileNotFoundError as exc:
        raise CorpusIOError(f"{path}: no such file") from exc


def read_wav(path) -> Waveform:
    """Read a mono WAV (16-bit PCM or 32/64-bit float) as float64 in [-1, 1]."""
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError as exc:
        raise CorpusIOError(f"{path}: no such file") from exc
    except OSError as exc:
        raise CorpusIOError(f"{path}: {exc}") from exc
    except ValueError as exc:
        raise FormatError(f"{path}: not a readable WAV file ({exc})") from exc
    if data.ndim != 1:
        raise NotMono(f"{path}: expected mono audio, got {data.shape[1]} channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise FormatError(f"{path}: unsupported sample format {data.dtype}")
    try:
        return Waveform(samples, rate)
    except InvalidInput as exc:
        raise FormatError(f"{path}: {exc}") from exc


def encode_samples(samples, bit_depth):
    """Convert float64 samples to the on-disk dtype. Returns ``(data, n_clipped)``."""
    if bit_depth == 32:
        return samples.astype(np.float32), 0
    if bit_depth == 64:
        return samples.astype(np.float64), 0
    if bit_depth == 16:
        scaled = np.round(samples * 32768.0)
        clipped = int(np.count_nonzero((scaled > 32767) | (scaled < -32768)))
        return np.clip(scaled, -32768, 32767).astype(np.int16), clipped
    raise InvalidInput(f"bit depth must be one of {BIT_DEPTHS}, got {bit_depth}")


def write_wav(path, w: Waveform, bit_depth=32) -> int:
    """Write ``w`` atomically. 16-bit output is hard-clipped; returns the clip count."""
    data, clipped = encode_samples(w.samples, bit_depth)
    if clipped:
        log.warning("clipped=%d path=%s bit_depth=16", clipped, path)
    buf = io.BytesIO()
    wavfile.write(buf, w.sample_rate_hz, data)
    write_bytes_atomic(path, buf.getvalue())
    return clipped


def component_paths(wav_path):
    """Sidecar paths holding the exact clean and noise components of ``wav_path``."""
    wav_path = Path(wav_path)
    stem = wav_path.with_suffix("")
    return stem.with_name(stem.name + ".clean.npy"), stem.with_name(stem.name + ".noise.npy")
