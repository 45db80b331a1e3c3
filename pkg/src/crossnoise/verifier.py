"""Residuals of the three SNR-matching conditions for an augmented pair.

For a healthy/pathological pair after augmentation the conditions are

1. SNR of healthy vs its own noise == SNR of pathological vs injected healthy noise
2. SNR of healthy vs injected pathological noise == SNR of pathological vs its own noise
3. SNR of healthy vs its total noise == SNR of pathological vs its total noise

Each residual is the left side minus the right side, in dB.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from crossnoise.errors import InvalidInput, MissingEstimate
from crossnoise.signal_core import Waveform, power, snr_db, tile_to_length

ORACLE = "oracle"
PRACTICAL = "practical"
STANDARD = "standard"

CONDITIONS = ("c1", "c2", "c3")


@dataclass(frozen=True)
class ConditionReport:
    healthy_id: str
    pathological_id: str
    snr_h_own: float
    snr_p_cross: float
    snr_h_cross: float
    snr_p_own: float
    snr_h_total: float
    snr_p_total: float
    residual_c1: float
    residual_c2: float
    residual_c3: float
    mode: str
    # Total noise taken as the summed waveform instead of the summed powers.
    snr_h_total_waveform: Optional[float] = None
    snr_p_total_waveform: Optional[float] = None
    residual_c3_waveform: Optional[float] = None
    degraded: bool = False

    @property
    def pair(self):
        return (self.healthy_id, self.pathological_id)

    @property
    def residuals(self):
        return (self.residual_c1, self.residual_c2, self.residual_c3)

    @property
    def max_abs_residual(self):
        return max(abs(r) for r in self.residuals)

    def to_dict(self):
        return asdict(self)


def _report(ids, mode, s_h, n_h, inj_h, s_p, n_p, inj_p, degraded=False, **waveform_totals):
    snr_h_own = snr_db(s_h, n_h)
    snr_p_cross = snr_db(s_p, inj_p)
    snr_h_cross = snr_db(s_h, inj_h)
    snr_p_own = snr_db(s_p, n_p)
    snr_h_total = snr_db(s_h, n_h + inj_h)
    snr_p_total = snr_db(s_p, n_p + inj_p)
    return ConditionReport(
        healthy_id=str(ids[0]),
        pathological_id=str(ids[1]),
        snr_h_own=snr_h_own,
        snr_p_cross=snr_p_cross,
        snr_h_cross=snr_h_cross,
        snr_p_own=snr_p_own,
        snr_h_total=snr_h_total,
        snr_p_total=snr_p_total,
        residual_c1=snr_h_own - snr_p_cross,
        residual_c2=snr_h_cross - snr_p_own,
        residual_c3=snr_h_total - snr_p_total,
        mode=mode,
        degraded=degraded,
        **waveform_totals,
    )


def _same_length(a: Waveform, b: Waveform, what):
    if len(a) != len(b):
        raise InvalidInput(f"{what}: lengths differ ({len(a)} vs {len(b)})")


def check_pair_oracle(
    s_h: Waveform,
    n_h: Waveform,
    nhat_p: Waveform,
    alpha_h: float,
    s_p: Waveform,
    n_p: Waveform,
    nhat_h: Waveform,
    alpha_p: float,
    ids=("healthy", "pathological"),
    mode=ORACLE,
) -> ConditionReport:
    """Residuals from known clean and noise components.

    ``nhat_p`` is the noise injected into the healthy utterance and ``nhat_h``
    the one injected into the pathological utterance. Injected noises shorter
    than their receiver are tiled first. The primary third residual sums noise
    powers; the waveform-sum variant keeps the cross term.
    """
    _same_length(s_h, n_h, "healthy clean/noise")
    _same_length(s_p, n_p, "pathological clean/noise")
    inj_h = tile_to_length(nhat_p, len(s_h))
    inj_p = tile_to_length(nhat_h, len(s_p))
    inj_h = inj_h.with_samples(alpha_h * inj_h.samples)
    inj_p = inj_p.with_samples(alpha_p * inj_p.samples)

    p_s_h, p_s_p = power(s_h), power(s_p)
    snr_h_wave = snr_db(p_s_h, power(n_h.with_samples(n_h.samples + inj_h.samples)))
    snr_p_wave = snr_db(p_s_p, power(n_p.with_samples(n_p.samples + inj_p.samples)))
    return _report(
        ids,
        mode,
        p_s_h,
        power(n_h),
        power(inj_h),
        p_s_p,
        power(n_p),
        power(inj_p),
        snr_h_total_waveform=snr_h_wave,
        snr_p_total_waveform=snr_p_wave,
        residual_c3_waveform=snr_h_wave - snr_p_wave,
    )


def check_pair_practical(y_h, y_p, outcome_h, outcome_p) -> ConditionReport:
    """Residuals from estimated quantities only.

    Clean powers come from the utterances, own-noise powers from their VAD
    noise estimates, and injected-noise powers from the donor estimate tiled to
    the receiver and scaled by the applied alpha.
    """
    for u in (y_h, y_p):
        if u.noise_estimate is None or u.clean_power is None:
            raise MissingEstimate(f"{u.id}: noise estimate and clean power are required")
    if outcome_h.receiver_id != y_h.id or outcome_p.receiver_id != y_p.id:
        raise InvalidInput("outcomes do not belong to the given utterances")
    if outcome_h.donor_id != y_p.id or outcome_p.donor_id != y_h.id:
        raise InvalidInput("outcomes are not a reciprocal pair")

    inj_h = tile_to_length(y_p.noise_estimate.noise, len(y_h.waveform))
    inj_p = tile_to_length(y_h.noise_estimate.noise, len(y_p.waveform))
    return _report(
        (y_h.id, y_p.id),
        PRACTICAL,
        y_h.clean_power,
        y_h.noise_estimate.power,
        power(inj_h.with_samples(outcome_h.alpha * inj_h.samples)),
        y_p.clean_power,
        y_p.noise_estimate.power,
        power(inj_p.with_samples(outcome_p.alpha * inj_p.samples)),
        degraded=y_h.clean_power_clamped or y_p.clean_power_clamped,
    )


@dataclass(frozen=True)
class DisparityReport:
    """Estimated SNRs of an un-augmented pair and their gap (healthy minus pathological)."""

    healthy_id: str
    pathological_id: str
    snr_h: float
    snr_p: float
    gap: float
    mode: str = STANDARD
    degraded: bool = False

    def to_dict(self):
        return asdict(self)


def check_pair_standard(y_h, y_p) -> DisparityReport:
    for u in (y_h, y_p):
        if u.noise_estimate is None or u.clean_power is None:
            raise MissingEstimate(f"{u.id}: noise estimate and clean power are required")
    snr_h = snr_db(y_h.clean_power, y_h.noise_estimate.power)
    snr_p = snr_db(y_p.clean_power, y_p.noise_estimate.power)
    return DisparityReport(
        healthy_id=y_h.id,
        pathological_id=y_p.id,
        snr_h=snr_h,
        snr_p=snr_p,
        gap=snr_h - snr_p,
        degraded=y_h.clean_power_clamped or y_p.clean_power_clamped,
    )


def _stats(values):
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    return {
        "mean": mean,
        "std": math.sqrt(var),
        "max_abs": max(abs(v) for v in values),
    }


def summarize(reports) -> dict:
    """Per-condition mean, std, max |residual|, plus pair and degraded counts.

    Sums are exact (``math.fsum``) so the result does not depend on input order.
    """
    reports = list(reports)
    if not reports:
        raise InvalidInput("cannot summarise an empty report list")
    out = {"count": len(reports), "degraded": sum(1 for r in reports if r.degraded)}
    if isinstance(reports[0], DisparityReport):
        out["gap"] = _stats([r.gap for r in reports])
        out["snr_h"] = _stats([r.snr_h for r in reports])
        out["snr_p"] = _stats([r.snr_p for r in reports])
        out["max_abs_residual"] = out["gap"]["max_abs"]
        return out
    for c in CONDITIONS:
        out[c] = _stats([getattr(r, f"residual_{c}") for r in reports])
    wave = [r.residual_c3_waveform for r in reports if r.residual_c3_waveform is not None]
    if wave:
        out["c3_waveform"] = _stats(wave)
    out["max_abs_residual"] = max(out[c]["max_abs"] for c in CONDITIONS)
    return out


def residual_matrix(reports):
    """Residuals as an (n_pairs, 3) array, convenient for assertions."""
    return np.array([r.residuals for r in reports], dtype=np.float64)
