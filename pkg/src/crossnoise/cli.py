"""Command-line interface: ``crossnoise {synth,mix,augment,verify}``.

Exit codes: 0 success (or verification passed), 1 runtime failure or failed
verification, 2 usage/configuration error. Logs go to stderr as key=value
lines; reports go to files.
"""

from __future__ import annotations

import argparse
import contextlib
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.io import wavfile

from crossnoise import __version__
from crossnoise.audio_io import BIT_DEPTHS, atomic_path, component_paths, encode_samples, read_wav
from crossnoise.corpus import (
    KINDS,
    SETTINGS,
    ManifestEntry,
    SynthSpec,
    build_noisy_corpus,
    dump_manifest,
    generate_synthetic,
    load_manifest,
)
from crossnoise.errors import CrossNoiseError, InvalidInput
from crossnoise.pipeline import MissingComponents, default_threads, run_augment, verify_run
from crossnoise.vad import VadConfig
from crossnoise.verifier import ORACLE, PRACTICAL, STANDARD

log = logging.getLogger("crossnoise")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    vad: VadConfig = field(default_factory=VadConfig)
    seed: int = 0
    epoch: int = 0
    setting: Optional[str] = None
    bit_depth: int = 32
    keep_components: bool = False
    threads: Optional[int] = None
    log_level: str = "INFO"


def load_config(path) -> RunConfig:
    """Read a JSON config document whose keys mirror :class:`RunConfig`."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError("config must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = set(doc) - known
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    try:
        vad = VadConfig(**doc.pop("vad", {}))
        cfg = RunConfig(vad=vad, **doc)
    except (TypeError, InvalidInput) as exc:
        raise UsageError(f"invalid config: {exc}") from exc
    if cfg.setting is not None and cfg.setting not in SETTINGS:
        raise UsageError(f"setting must be one of {sorted(SETTINGS)}")
    if cfg.bit_depth not in BIT_DEPTHS:
        raise UsageError(f"bit_depth must be one of {BIT_DEPTHS}")
    return cfg


class KeyValueFormatter(logging.Formatter):
    def format(self, record):
        msg = record.getMessage()
        if "=" not in msg.split(" ", 1)[0]:
            msg = f"msg={json.dumps(msg)}"
        return f"level={record.levelname} logger={record.name} {msg}"


def setup_logging(level):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(KeyValueFormatter())
    root = logging.getLogger("crossnoise")
    root.handlers[:] = [handler]
    root.setLevel(level.upper())
    root.propagate = False


def _global_options(parser, suppress):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="JSON run configuration")
    parser.add_argument("--seed", type=int, default=d, help="random seed (u64)")
    parser.add_argument("--threads", type=int, default=d, help="worker threads (default: CPU count)")
    parser.add_argument("--log-level", default=d, choices=["DEBUG", "INFO", "WARNING", "ERROR"])


def build_parser():
    parser = argparse.ArgumentParser(prog="crossnoise", description="Cross-group noise augmentation toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_options(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write synthetic test signals with ground truth")
    _global_options(p, suppress=True)
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--duration", type=float, default=4.0, help="seconds")
    p.add_argument("--rate", type=int, default=16000)
    p.add_argument("--amplitude", type=float, default=0.5)
    p.add_argument("--tone-hz", type=float, default=220.0)
    p.add_argument("--burst-ms", type=float, default=500.0)
    p.add_argument("--gap-ms", type=float, default=500.0)
    p.add_argument("--noise-snr", type=float, default=None, help="add stationary noise at this SNR (dB)")
    p.add_argument("--noise-kind", choices=["white", "tone"], default="white")
    p.add_argument("--count", type=int, default=1, help="with N > 1, --out is a directory and a manifest is written")
    p.add_argument("--bit-depth", type=int, choices=BIT_DEPTHS, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("mix", help="build a noisy corpus at an SNR setting")
    _global_options(p, suppress=True)
    p.add_argument("--manifest", required=True, help="clean corpus manifest (JSON Lines)")
    p.add_argument("--noise-healthy", required=True)
    p.add_argument("--noise-pathological", required=True)
    p.add_argument("--setting", choices=sorted(SETTINGS), default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--keep-components", action="store_true", default=None)
    p.add_argument("--bit-depth", type=int, choices=BIT_DEPTHS, default=None)

    p = sub.add_parser("augment", help="cross-inject estimated noise between groups")
    _global_options(p, suppress=True)
    p.add_argument("--manifest", required=True, help="noisy corpus manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--epoch", type=int, default=None)
    p.add_argument("--bit-depth", type=int, choices=BIT_DEPTHS, default=None)

    p = sub.add_parser("verify", help="check SNR-matching residuals of an augment run")
    _global_options(p, suppress=True)
    p.add_argument("--augment-dir", required=True, help="output directory of 'augment'")
    p.add_argument("--mode", choices=[ORACLE, PRACTICAL, STANDARD], default=PRACTICAL)
    p.add_argument("--report", required=True, help="JSON report path")
    p.add_argument("--tolerance", type=float, default=None, help="dB; default 1e-9 oracle, 2 practical")
    return parser


def _resolve_config(args):
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    for name in ("seed", "threads", "log_level", "epoch", "setting", "bit_depth", "keep_components"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if cfg.threads is None:
        cfg.threads = default_threads()
    if cfg.threads < 1:
        raise UsageError("--threads must be >= 1")
    if cfg.epoch < 0:
        raise UsageError("--epoch must be non-negative")
    return cfg


def _distinct_roots(inputs, out_dir):
    out = Path(out_dir).resolve()
    for p in inputs:
        if Path(p).resolve().parent == out:
            raise UsageError(f"output directory {out_dir} must differ from the input location of {p}")


# -- subcommands -------------------------------------------------------------


def _synth_specs(args, cfg):
    base = dict(
        kind=args.kind,
        duration_s=args.duration,
        sample_rate_hz=args.rate,
        amplitude=args.amplitude,
        tone_hz=args.tone_hz,
        burst_s=args.burst_ms / 1000.0,
        gap_s=args.gap_ms / 1000.0,
        noise_snr_db=args.noise_snr,
        noise_kind=args.noise_kind,
        min_segment_ms=cfg.vad.frame_ms,
    )
    if args.count == 1:
        return [SynthSpec(seed=cfg.seed, **base)]
    specs = []
    for i in range(args.count):
        ss = np.random.SeedSequence([cfg.seed % 2**64, i])
        seed = int(ss.generate_state(1, dtype=np.uint64)[0])
        gain_db = np.random.default_rng(ss).uniform(-6.0, 6.0)
        specs.append(SynthSpec(seed=seed, **{**base, "amplitude": args.amplitude * 10 ** (gain_db / 20)}))
    return specs


def _encode_wav(w, bit_depth):
    data, _ = encode_samples(w.samples, bit_depth)
    buf = io.BytesIO()
    wavfile.write(buf, w.sample_rate_hz, data)
    return buf.getvalue()


def cmd_synth(args, cfg):
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    try:
        specs = _synth_specs(args, cfg)
    except InvalidInput as exc:
        raise UsageError(str(exc)) from exc

    out = Path(args.out)
    if args.count == 1:
        out.parent.mkdir(parents=True, exist_ok=True)
        wav_paths = [out]
    else:
        out.mkdir(parents=True, exist_ok=True)
        wav_paths = [out / f"synth_{i:03d}.wav" for i in range(args.count)]

    files = {}
    for spec, wav_path in zip(specs, wav_paths):
        sig = generate_synthetic(spec)
        clean_path, noise_path = component_paths(wav_path)
        truth = {
            "spec": {f.name: getattr(spec, f.name) for f in fields(spec)},
            "bursts": [list(b) for b in sig.bursts],
            "noise_only_fraction": sig.noise_only_fraction,
        }
        files[wav_path] = _encode_wav(sig.waveform, cfg.bit_depth)
        files[clean_path] = _npy_bytes(sig.clean.samples)
        files[noise_path] = _npy_bytes(sig.noise.samples)
        files[wav_path.with_suffix(".truth.json")] = (json.dumps(truth, indent=1, sort_keys=True) + "\n").encode()
    if args.count > 1:
        n_healthy = math.ceil(args.count / 2)
        entries = [
            ManifestEntry(p.name, p.stem, p.stem, "healthy" if i < n_healthy else "pathological")
            for i, p in enumerate(wav_paths)
        ]
        files[out / "manifest.jsonl"] = dump_manifest(entries).encode()

    # stage every file before renaming any, so a failure leaves nothing behind
    with contextlib.ExitStack() as stack:
        for path, data in files.items():
            stack.enter_context(atomic_path(path)).write_bytes(data)
    log.info("event=synth files=%d out=%s", len(wav_paths), out)
    return EXIT_OK


def _npy_bytes(arr):
    buf = io.BytesIO()
    np.save(buf, np.asarray(arr, dtype=np.float64), allow_pickle=False)
    return buf.getvalue()


def cmd_mix(args, cfg):
    if cfg.setting is None:
        raise UsageError("an SNR setting is required (--setting or config 'setting')")
    setting = SETTINGS[cfg.setting]
    _distinct_roots([args.manifest, args.noise_healthy, args.noise_pathological], args.out)
    entries = load_manifest(args.manifest)
    noise_h = read_wav(args.noise_healthy)
    noise_p = read_wav(args.noise_pathological)
    results = build_noisy_corpus(
        entries,
        noise_h,
        noise_p,
        setting,
        args.out,
        seed=cfg.seed,
        base_dir=Path(args.manifest).parent,
        bit_depth=cfg.bit_depth,
        keep_components=cfg.keep_components,
        threads=cfg.threads,
    )
    print(f"setting {setting.name}: {len(results)} files")
    for group in ("healthy", "pathological"):
        snrs = [r.achieved_snr_db for r in results if r.entry.group.value == group]
        if snrs:
            print(f"  {group:<13} n={len(snrs):<4} achieved_snr_db mean={np.mean(snrs):.1f} "
                  f"min={min(snrs):.6f} max={max(snrs):.6f}")
    clipped = sum(r.clipped for r in results)
    if clipped:
        log.warning("event=clipping total_clipped_samples=%d", clipped)
    return EXIT_OK


def cmd_augment(args, cfg):
    _distinct_roots([args.manifest], args.out)
    run = run_augment(
        args.manifest, args.out, seed=cfg.seed, epoch=cfg.epoch, cfg=cfg.vad, bit_depth=cfg.bit_depth, threads=cfg.threads
    )
    print(f"augmented {len(run.outcomes)} utterances, skipped {len(run.skipped)}")
    return EXIT_OK


def cmd_verify(args, cfg):
    try:
        doc = verify_run(args.augment_dir, args.mode, args.tolerance)
    except MissingComponents as exc:
        raise UsageError(str(exc)) from exc
    report = Path(args.report)
    with atomic_path(report) as tmp:
        tmp.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    s = doc["summary"]
    print(f"mode={doc['mode']} pairs={s['count']} max_abs_residual_db={s['max_abs_residual']:.3e} "
          f"passed={doc['passed']}")
    return EXIT_OK if doc["passed"] else EXIT_FAIL


COMMANDS = {"synth": cmd_synth, "mix": cmd_mix, "augment": cmd_augment, "verify": cmd_verify}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        setup_logging(cfg.log_level)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"crossnoise: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CrossNoiseError, OSError, ValueError) as exc:
        log.error("event=failed command=%s error=%s detail=%s", args.command, type(exc).__name__, json.dumps(str(exc)))
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
