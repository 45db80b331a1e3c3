"""Manifests, SNR settings, synthetic test signals and noisy-corpus construction."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from crossnoise.audio_io import component_paths, read_wav, save_array_atomic, write_text_atomic, write_wav
from crossnoise.augmenter import Group
from crossnoise.errors import DuplicateId, FormatError, InvalidInput, RateMismatch
from crossnoise.signal_core import Waveform, power, scale_noise_to_snr, snr_db
from crossnoise.vad import VadMask, num_frames

log = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")


# -- manifests ---------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    utterance_id: str
    speaker_id: str
    group: Group
    split: Optional[str] = None
    true_snr_db: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "group", Group(self.group))
        if self.split is not None and self.split not in SPLITS:
            raise InvalidInput(f"split must be one of {SPLITS}, got {self.split!r}")
        if not self.utterance_id or "/" in self.utterance_id or "\\" in self.utterance_id:
            raise InvalidInput(f"utterance_id must be a non-empty file-safe name, got {self.utterance_id!r}")

    def to_dict(self):
        d = {
            "path": self.path,
            "utterance_id": self.utterance_id,
            "speaker_id": self.speaker_id,
            "group": self.group.value,
        }
        if self.split is not None:
            d["split"] = self.split
        if self.true_snr_db is not None:
            d["true_snr_db"] = self.true_snr_db
        return d

    def resolve(self, base_dir) -> Path:
        p = Path(self.path)
        return p if p.is_absolute() else Path(base_dir) / p


def _entry_from_record(rec, lineno):
    if not isinstance(rec, dict):
        raise FormatError("entry must be a JSON object", line=lineno)
    missing = [k for k in ("path", "utterance_id", "speaker_id", "group") if k not in rec]
    if missing:
        raise FormatError(f"missing field(s) {', '.join(missing)}", line=lineno)
    unknown = set(rec) - {"path", "utterance_id", "speaker_id", "group", "split", "true_snr_db"}
    if unknown:
        raise FormatError(f"unknown field(s) {', '.join(sorted(unknown))}", line=lineno)
    snr = rec.get("true_snr_db")
    if snr is not None and (isinstance(snr, bool) or not isinstance(snr, (int, float))):
        raise FormatError("true_snr_db must be a number", line=lineno)
    try:
        return ManifestEntry(
            path=str(rec["path"]),
            utterance_id=str(rec["utterance_id"]),
            speaker_id=str(rec["speaker_id"]),
            group=rec["group"],
            split=rec.get("split"),
            true_snr_db=None if snr is None else float(snr),
        )
    except ValueError as exc:
        raise FormatError(str(exc), line=lineno) from exc


def parse_manifest(text):
    entries, seen = [], set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON ({exc.msg})", line=lineno) from exc
        entry = _entry_from_record(rec, lineno)
        if entry.utterance_id in seen:
            raise DuplicateId(f"line {lineno}: duplicate utterance_id {entry.utterance_id!r}")
        seen.add(entry.utterance_id)
        entries.append(entry)
    return entries


def load_manifest(path, check_paths=False):
    """Read a JSON Lines manifest. Relative entry paths are relative to the manifest."""
    path = Path(path)
    entries = parse_manifest(path.read_text(encoding="utf-8"))
    if check_paths:
        for e in entries:
            if not e.resolve(path.parent).is_file():
                raise FormatError(f"{e.utterance_id}: audio file {e.path} not found")
    return entries


def dump_manifest(entries):
    return "".join(json.dumps(e.to_dict()) + "\n" for e in entries)


def write_manifest(path, entries):
    write_text_atomic(path, dump_manifest(entries))


# -- SNR settings ------------------------------------------------------------


@dataclass(frozen=True)
class SnrSetting:
    name: str
    healthy_snr_db: float
    pathological_snr_db: float

    def snr_for(self, group):
        return self.healthy_snr_db if Group(group) is Group.HEALTHY else self.pathological_snr_db


SETTINGS = {
    "A": SnrSetting("A", 20.0, 20.0),
    "B": SnrSetting("B", 40.0, 40.0),
    "C": SnrSetting("C", 20.0, 40.0),
}


# -- synthetic signals -------------------------------------------------------

KINDS = ("white", "tone", "speechlike")


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic signal with a known clean/noise decomposition.

    ``speechlike`` alternates silent gaps and amplitude-modulated tone bursts,
    starting with a gap. ``noise_snr_db`` adds stationary noise of
    ``noise_kind`` at that SNR relative to the clean part.
    """

    kind: str
    duration_s: float
    sample_rate_hz: int = 16000
    seed: int = 0
    amplitude: float = 0.5
    tone_hz: float = 220.0
    burst_s: float = 0.5
    gap_s: float = 0.5
    mod_hz: float = 4.0
    mod_depth: float = 0.3
    noise_snr_db: Optional[float] = None
    noise_kind: str = "white"
    noise_tone_hz: float = 120.0
    min_segment_ms: float = 25.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not (self.duration_s > 0 and math.isfinite(self.duration_s)):
            raise InvalidInput(f"duration must be positive, got {self.duration_s!r}")
        if self.sample_rate_hz <= 0:
            raise InvalidInput("sample rate must be positive")
        if self.n_samples < 1:
            raise InvalidInput("duration is shorter than one sample")
        if not self.amplitude > 0:
            raise InvalidInput("amplitude must be positive")
        if not 0 <= self.mod_depth < 1:
            raise InvalidInput("mod_depth must lie in [0, 1)")
        if self.noise_kind not in ("white", "tone"):
            raise InvalidInput(f"noise_kind must be 'white' or 'tone', got {self.noise_kind!r}")
        if self.kind == "speechlike":
            min_s = self.min_segment_ms / 1000.0
            if self.burst_s <= min_s or self.gap_s <= min_s:
                raise InvalidInput(f"burst and gap must each exceed one VAD frame ({self.min_segment_ms} ms)")

    @property
    def n_samples(self):
        return int(round(self.duration_s * self.sample_rate_hz))


@dataclass(frozen=True, eq=False)
class SyntheticSignal:
    waveform: Waveform
    clean: Waveform
    noise: Waveform
    gate: np.ndarray  # per-sample: True inside a burst
    bursts: tuple = field(default=())  # (start, stop) sample ranges

    @property
    def noise_only_fraction(self):
        return 1.0 - float(np.count_nonzero(self.gate)) / self.gate.shape[0]

    def frame_mask(self, frame_len, hop):
        """Ground-truth frame labels: a frame is speech if it touches any burst sample."""
        n = num_frames(self.gate.shape[0], frame_len, hop)
        csum = np.concatenate([[0], np.cumsum(self.gate, dtype=np.int64)])
        starts = np.arange(n) * hop
        speech = (csum[starts + frame_len] - csum[starts]) > 0
        return VadMask(speech, frame_len, hop, self.gate.shape[0])


def _stationary_noise(spec, rng, n):
    if spec.noise_kind == "white":
        return rng.standard_normal(n)
    t = np.arange(n) / spec.sample_rate_hz
    phase = rng.uniform(0, 2 * np.pi)
    return np.sin(2 * np.pi * spec.noise_tone_hz * t + phase)


def generate_synthetic(spec: SynthSpec) -> SyntheticSignal:
    rng = np.random.default_rng(spec.seed)
    n, fs = spec.n_samples, spec.sample_rate_hz
    t = np.arange(n) / fs

    if spec.kind == "white":
        noise = spec.amplitude * rng.standard_normal(n)
        clean = np.zeros(n)
        gate = np.zeros(n, dtype=bool)
        bursts = ()
    elif spec.kind == "tone":
        clean = spec.amplitude * np.sin(2 * np.pi * spec.tone_hz * t)
        noise = np.zeros(n)
        gate = np.ones(n, dtype=bool)
        bursts = ((0, n),)
    else:
        gap, burst = int(round(spec.gap_s * fs)), int(round(spec.burst_s * fs))
        gate = np.zeros(n, dtype=bool)
        bursts = []
        start = gap
        while start < n:
            stop = min(start + burst, n)
            gate[start:stop] = True
            bursts.append((start, stop))
            start = stop + gap
        bursts = tuple(bursts)
        envelope = 1.0 + spec.mod_depth * np.sin(2 * np.pi * spec.mod_hz * t + rng.uniform(0, 2 * np.pi))
        carrier = np.sin(2 * np.pi * spec.tone_hz * t) + 0.5 * np.sin(2 * np.pi * 2 * spec.tone_hz * t)
        clean = np.where(gate, spec.amplitude / 1.25 * envelope * carrier, 0.0)
        noise = np.zeros(n)

    clean_w = Waveform(clean, fs)
    if spec.noise_snr_db is not None:
        if spec.kind == "white" or not np.any(clean):
            raise InvalidInput("noise_snr_db needs a non-silent clean signal")
        raw = Waveform(_stationary_noise(spec, rng, n), fs)
        noise = scale_noise_to_snr(clean_w, raw, spec.noise_snr_db)[0].samples
    noise_w = Waveform(noise, fs)
    return SyntheticSignal(
        waveform=Waveform(clean + noise, fs),
        clean=clean_w,
        noise=noise_w,
        gate=gate,
        bursts=bursts,
    )


# -- noisy corpus ------------------------------------------------------------


@dataclass(frozen=True)
class MixedFile:
    entry: ManifestEntry
    beta: float
    noise_offset: int
    achieved_snr_db: float
    clipped: int = 0


def _mix_one(entry, clean, noise, offset, snr, out_dir, bit_depth, keep_components):
    rotated = noise.with_samples(np.roll(noise.samples, -offset))
    scaled, beta = scale_noise_to_snr(clean, rotated, snr)
    noisy = clean.with_samples(clean.samples + scaled.samples)
    wav_path = out_dir / f"{entry.utterance_id}.wav"
    clipped = write_wav(wav_path, noisy, bit_depth)
    if keep_components:
        clean_path, noise_path = component_paths(wav_path)
        save_array_atomic(clean_path, clean.samples)
        save_array_atomic(noise_path, scaled.samples)
    out = ManifestEntry(
        path=wav_path.name,
        utterance_id=entry.utterance_id,
        speaker_id=entry.speaker_id,
        group=entry.group,
        split=entry.split,
        true_snr_db=float(snr),
    )
    achieved = snr_db(power(clean), power(scaled))
    return MixedFile(out, beta, int(offset), achieved, clipped)


def build_noisy_corpus(
    entries,
    noise_healthy: Waveform,
    noise_pathological: Waveform,
    setting: SnrSetting,
    out_dir,
    seed: int,
    base_dir=".",
    bit_depth=32,
    keep_components=False,
    threads=1,
):
    """Mix every clean entry with its group's noise at the setting's SNR.

    Each file starts reading its noise at a seeded random circular offset.
    All inputs are read and validated before anything is written. Writes
    ``<utterance_id>.wav`` files and ``manifest.jsonl`` into ``out_dir`` and
    returns one :class:`MixedFile` per entry, in input order.
    """
    out_dir = Path(out_dir)
    noises = {Group.HEALTHY: noise_healthy, Group.PATHOLOGICAL: noise_pathological}
    for g, nz in noises.items():
        if len(nz) == 0 or power(nz) == 0:
            raise InvalidInput(f"{g.value} noise is empty or silent")
    if noise_healthy.sample_rate_hz != noise_pathological.sample_rate_hz:
        raise RateMismatch(
            f"noise rates differ: {noise_healthy.sample_rate_hz} vs {noise_pathological.sample_rate_hz} Hz"
        )
    rate = noise_healthy.sample_rate_hz

    cleans = []
    for e in entries:
        w = read_wav(e.resolve(base_dir))
        if w.sample_rate_hz != rate:
            raise RateMismatch(f"{e.utterance_id}: {w.sample_rate_hz} Hz, noise is {rate} Hz")
        cleans.append(w)

    rng = np.random.default_rng(seed)
    offsets = [int(rng.integers(len(noises[e.group]))) for e in entries]

    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [
        (e, c, noises[e.group], off, setting.snr_for(e.group), out_dir, bit_depth, keep_components)
        for e, c, off in zip(entries, cleans, offsets)
    ]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(lambda job: _mix_one(*job), jobs))
    write_manifest(out_dir / "manifest.jsonl", [r.entry for r in results])
    return results
