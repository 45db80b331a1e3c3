"""Corpus-level augmentation and verification runs.

``run_augment`` estimates noise and clean power for every utterance of a
noisy manifest, draws a pairing plan and writes the augmented corpus.
``verify_run`` re-reads such an output directory and computes condition
reports in oracle, practical or standard mode.
"""

from __future__ import annotations

import json
import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from crossnoise.audio_io import component_paths, load_array, read_wav, save_array_atomic, write_text_atomic, write_wav
from crossnoise.augmenter import Group, PairingPlan, Utterance, augment_utterance, cross_noise_scale, make_pairing
from crossnoise.corpus import ManifestEntry, load_manifest, write_manifest
from crossnoise.errors import ClampWarning, CrossNoiseError, InsufficientNoise, MissingEstimate, RateMismatch
from crossnoise.signal_core import Waveform, power
from crossnoise.vad import NoiseEstimate, VadConfig, estimate_clean_power, estimate_noise
from crossnoise.verifier import (
    ORACLE,
    PRACTICAL,
    STANDARD,
    check_pair_oracle,
    check_pair_practical,
    check_pair_standard,
    summarize,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MAX_SKIP_FRACTION = 0.5
TRUTH_MODE = "practical_vs_truth"


class PipelineFailed(CrossNoiseError):
    pass


class MissingComponents(MissingEstimate):
    """Oracle verification needs the clean/noise sidecars written by ``mix --keep-components``."""


def default_threads():
    return os.cpu_count() or 1


def _parallel_map(fn, items, threads):
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(fn, items))


def estimate_utterance(entry: ManifestEntry, waveform: Waveform, cfg: VadConfig) -> Utterance:
    """Attach a VAD noise estimate and clean-power estimate. Raises InsufficientNoise."""
    est = estimate_noise(waveform, entry.utterance_id, cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ClampWarning)
        clean = estimate_clean_power(power(waveform), est.power)
    for w in caught:
        log.warning("event=clamp utterance=%s msg=%r", entry.utterance_id, str(w.message))
    return Utterance(
        id=entry.utterance_id,
        group=entry.group,
        waveform=waveform,
        noise_estimate=est,
        clean_power=clean.value,
        clean_power_clamped=clean.clamped,
    )


def _estimate_or_skip(args):
    entry, path, cfg = args
    waveform = read_wav(path)
    if len(waveform) == 0 or power(waveform) == 0:
        log.warning("event=skip utterance=%s reason=silent", entry.utterance_id)
        return None, {"utterance_id": entry.utterance_id, "reason": "Silent", "detail": "zero signal power"}
    try:
        return estimate_utterance(entry, waveform, cfg), None
    except InsufficientNoise as exc:
        log.warning("event=skip utterance=%s reason=insufficient_noise detail=%r", entry.utterance_id, str(exc))
        return None, {"utterance_id": entry.utterance_id, "reason": "InsufficientNoise", "detail": str(exc)}


@dataclass
class AugmentRun:
    plan: PairingPlan
    utterances: dict
    outcomes: dict
    skipped: list = field(default_factory=list)


def estimates_document(manifest_path, cfg, utterances, outcomes, sources):
    utts = {}
    for uid, u in utterances.items():
        o = outcomes[uid]
        utts[uid] = {
            "group": u.group.value,
            "source": str(sources[uid]),
            "noisy_power": power(u.waveform),
            "noise_power": u.noise_estimate.power,
            "noise_fraction": u.noise_estimate.noise_fraction,
            "noise_file": f"estimates/{uid}.npy",
            "clean_power": u.clean_power,
            "clean_power_clamped": u.clean_power_clamped,
            "donor": o.donor_id,
            "alpha": o.alpha,
        }
    doc = {
        "schema_version": SCHEMA_VERSION,
        "source_manifest": str(Path(manifest_path).resolve()),
        "vad": asdict(cfg),
        "utterances": utts,
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def run_augment(manifest_path, out_dir, seed, epoch, cfg=VadConfig(), bit_depth=32, threads=1) -> AugmentRun:
    """Estimate, pair and augment a noisy corpus; write results into ``out_dir``.

    Outputs: augmented ``<id>.wav`` files, ``manifest.jsonl``, ``plan.json``,
    ``estimates.json``, ``estimates/<id>.npy`` noise estimates and
    ``skipped.json``. Raises :class:`PipelineFailed` (after writing only the
    skip report) when more than half the utterances are skipped.
    """
    manifest_path = Path(manifest_path)
    out_dir = Path(out_dir)
    entries = load_manifest(manifest_path)
    base = manifest_path.parent
    sources = {e.utterance_id: e.resolve(base).resolve() for e in entries}

    results = _parallel_map(_estimate_or_skip, [(e, sources[e.utterance_id], cfg) for e in entries], threads)
    rates = {u.waveform.sample_rate_hz for u, _ in results if u is not None}
    if len(rates) > 1:
        raise RateMismatch(f"mixed sample rates in corpus: {sorted(rates)}")
    skipped = [s for _, s in results if s is not None]
    utterances = {u.id: u for u, _ in results if u is not None}

    out_dir.mkdir(parents=True, exist_ok=True)
    skip_doc = {"schema_version": SCHEMA_VERSION, "total": len(entries), "skipped": skipped}
    write_text_atomic(out_dir / "skipped.json", json.dumps(skip_doc, indent=1, sort_keys=True) + "\n")
    if not entries or len(skipped) > MAX_SKIP_FRACTION * len(entries):
        raise PipelineFailed(f"{len(skipped)} of {len(entries)} utterances skipped")

    healthy = [e.utterance_id for e in entries if e.utterance_id in utterances and e.group is Group.HEALTHY]
    patho = [e.utterance_id for e in entries if e.utterance_id in utterances and e.group is Group.PATHOLOGICAL]
    try:
        plan = make_pairing(healthy, patho, seed, epoch)
    except CrossNoiseError as exc:
        raise PipelineFailed(f"cannot build pairing plan: {exc}") from exc

    def apply(assignment):
        receiver_id, donor_id = assignment
        donor = utterances[donor_id]
        return augment_utterance(utterances[receiver_id], donor.noise_estimate, donor.clean_power)

    outcomes = dict(zip((r for r, _ in plan.assignments), _parallel_map(apply, plan.assignments, threads)))

    (out_dir / "estimates").mkdir(exist_ok=True)
    by_id = {e.utterance_id: e for e in entries}
    out_entries = []
    for receiver_id, _ in plan.assignments:
        e = by_id[receiver_id]
        write_wav(out_dir / f"{receiver_id}.wav", outcomes[receiver_id].augmented, bit_depth)
        save_array_atomic(out_dir / "estimates" / f"{receiver_id}.npy", utterances[receiver_id].noise_estimate.noise.samples)
        out_entries.append(ManifestEntry(f"{receiver_id}.wav", e.utterance_id, e.speaker_id, e.group, e.split))
    write_text_atomic(out_dir / "estimates.json", estimates_document(manifest_path, cfg, utterances, outcomes, sources))
    write_text_atomic(out_dir / "plan.json", plan.to_json())
    write_manifest(out_dir / "manifest.jsonl", out_entries)
    log.info(
        "event=augment utterances=%d skipped=%d seed=%d epoch=%d", len(outcomes), len(skipped), seed, epoch
    )
    return AugmentRun(plan=plan, utterances=utterances, outcomes=outcomes, skipped=skipped)


# -- verification ------------------------------------------------------------


def load_augment_dir(aug_dir):
    """Rebuild utterances (with estimates) and the plan from an augment output dir."""
    aug_dir = Path(aug_dir)
    try:
        doc = json.loads((aug_dir / "estimates.json").read_text(encoding="utf-8"))
        plan = PairingPlan.from_json((aug_dir / "plan.json").read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise MissingEstimate(f"{aug_dir}: not an augment output directory ({exc.filename} missing)") from exc
    utterances, sources = {}, {}
    for uid, rec in doc["utterances"].items():
        waveform = read_wav(rec["source"])
        noise = Waveform(load_array(aug_dir / rec["noise_file"]), waveform.sample_rate_hz)
        est = NoiseEstimate(noise, power(noise), uid, rec["noise_fraction"])
        utterances[uid] = Utterance(
            uid, rec["group"], waveform, est, rec["clean_power"], rec["clean_power_clamped"]
        )
        sources[uid] = Path(rec["source"])
    return utterances, plan, sources


def plan_pairs(plan: PairingPlan, utterances):
    """Unique (healthy_id, pathological_id) pairs implied by the plan, in plan order."""
    pairs, seen = [], set()
    for r, d in plan.assignments:
        pair = (r, d) if utterances[r].group is Group.HEALTHY else (d, r)
        if pair not in seen:
            seen.add(pair)
            pairs.append(pair)
    return pairs


def load_components(source):
    clean_path, noise_path = component_paths(source)
    if not (clean_path.is_file() and noise_path.is_file()):
        raise MissingComponents(f"{source}: component sidecars not found (mix with --keep-components)")
    fs = read_wav(source).sample_rate_hz
    return Waveform(load_array(clean_path), fs), Waveform(load_array(noise_path), fs)


def _practical_report(u_h, u_p):
    out_h = augment_utterance(u_h, u_p.noise_estimate, u_p.clean_power)
    out_p = augment_utterance(u_p, u_h.noise_estimate, u_h.clean_power)
    return check_pair_practical(u_h, u_p, out_h, out_p), (out_h.alpha, out_p.alpha)


def _oracle_report(ids, comps, mode=ORACLE, injected=None, alphas=None):
    (s_h, n_h), (s_p, n_p) = comps[ids[0]], comps[ids[1]]
    if alphas is None:
        alphas = (cross_noise_scale(power(s_h), power(s_p)), cross_noise_scale(power(s_p), power(s_h)))
    nhat_p, nhat_h = injected if injected is not None else (n_p, n_h)
    return check_pair_oracle(s_h, n_h, nhat_p, alphas[0], s_p, n_p, nhat_h, alphas[1], ids=ids, mode=mode)


def verify_run(aug_dir, mode, tolerance=None):
    """Condition reports for every healthy/pathological pair in an augment run.

    Returns the JSON-ready report document. ``passed`` is true when the
    largest absolute residual is within ``tolerance`` (standard mode passes
    unless a tolerance is given). In practical mode, if the source corpus
    kept its components, residuals against the true components are added
    under ``truth_referenced`` and gated by the same tolerance.
    """
    if tolerance is None:
        tolerance = {ORACLE: 1e-9, PRACTICAL: 2.0, STANDARD: float("inf")}[mode]
    utterances, plan, sources = load_augment_dir(aug_dir)
    pairs = plan_pairs(plan, utterances)

    truth = None
    if mode == ORACLE:
        comps = {uid: load_components(sources[uid]) for uid in utterances}
        reports = [_oracle_report(ids, comps) for ids in pairs]
    elif mode == PRACTICAL:
        reports, alphas = [], []
        for h, p in pairs:
            rep, a = _practical_report(utterances[h], utterances[p])
            reports.append(rep)
            alphas.append(a)
        try:
            comps = {uid: load_components(sources[uid]) for uid in utterances}
        except MissingComponents:
            comps = None
        if comps is not None:
            truth_reports = [
                _oracle_report(
                    ids,
                    comps,
                    mode=TRUTH_MODE,
                    injected=(utterances[ids[1]].noise_estimate.noise, utterances[ids[0]].noise_estimate.noise),
                    alphas=a,
                )
                for ids, a in zip(pairs, alphas)
            ]
            truth = {"pairs": [r.to_dict() for r in truth_reports], "summary": summarize(truth_reports)}
    elif mode == STANDARD:
        reports = [check_pair_standard(utterances[h], utterances[p]) for h, p in pairs]
    else:
        raise ValueError(f"unknown mode {mode!r}")

    summary = summarize(reports)
    worst = summary["max_abs_residual"]
    if truth is not None:
        worst = max(worst, truth["summary"]["max_abs_residual"])
    doc = {
        "schema_version": SCHEMA_VERSION,
        "mode": mode,
        "tolerance": tolerance if tolerance != float("inf") else None,
        "pairs": [r.to_dict() for r in reports],
        "summary": summary,
        "passed": bool(worst <= tolerance),
    }
    if truth is not None:
        doc["truth_referenced"] = truth
    return doc
