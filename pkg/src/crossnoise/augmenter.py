"""Cross-group noise augmentation.

Each utterance receives the noise estimate of an utterance from the other
group, scaled by the square root of the ratio of the two clean powers. With
that scale both utterances end up with the same SNR against each noise and
against the total noise.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from crossnoise.errors import InvalidInput, MissingEstimate, RateMismatch
from crossnoise.signal_core import Waveform, add_scaled, tile_to_length
from crossnoise.vad import NoiseEstimate


class Group(str, enum.Enum):
    HEALTHY = "healthy"
    PATHOLOGICAL = "pathological"

    @property
    def other(self):
        return Group.PATHOLOGICAL if self is Group.HEALTHY else Group.HEALTHY


@dataclass(eq=False)
class Utterance:
    id: str
    group: Group
    waveform: Waveform
    noise_estimate: Optional[NoiseEstimate] = None
    clean_power: Optional[float] = None
    clean_power_clamped: bool = False

    def __post_init__(self):
        self.group = Group(self.group)
        if self.clean_power is not None and not self.clean_power > 0:
            raise InvalidInput(f"{self.id}: clean power must be positive, got {self.clean_power!r}")


@dataclass(frozen=True, eq=False)
class AugmentationOutcome:
    augmented: Waveform
    alpha: float
    receiver_id: str
    donor_id: str
    donor_noise_power: float
    receiver_clean_power: float


def cross_noise_scale(receiver_clean_power: float, donor_clean_power: float) -> float:
    """Gain for donor noise injected into the receiver: sqrt(P_receiver / P_donor)."""
    for name, p in (("receiver", receiver_clean_power), ("donor", donor_clean_power)):
        if not (p > 0 and math.isfinite(p)):
            raise InvalidInput(f"{name} clean power must be positive and finite, got {p!r}")
    return math.sqrt(receiver_clean_power / donor_clean_power)


def augment_utterance(
    receiver: Utterance, donor_noise: NoiseEstimate, donor_clean_power: float
) -> AugmentationOutcome:
    """Add the donor's noise estimate, tiled to the receiver's length and scaled."""
    if receiver.clean_power is None:
        raise MissingEstimate(f"{receiver.id}: no clean power estimate")
    if len(donor_noise.noise) == 0 or not donor_noise.power > 0:
        raise InvalidInput(f"donor {donor_noise.source_id}: noise estimate is empty or silent")
    if donor_noise.noise.sample_rate_hz != receiver.waveform.sample_rate_hz:
        raise RateMismatch(
            f"receiver {receiver.id} at {receiver.waveform.sample_rate_hz} Hz, "
            f"donor {donor_noise.source_id} at {donor_noise.noise.sample_rate_hz} Hz"
        )
    alpha = cross_noise_scale(receiver.clean_power, donor_clean_power)
    tiled = tile_to_length(donor_noise.noise, len(receiver.waveform))
    return AugmentationOutcome(
        augmented=add_scaled(receiver.waveform, tiled, alpha),
        alpha=alpha,
        receiver_id=receiver.id,
        donor_id=donor_noise.source_id,
        donor_noise_power=donor_noise.power,
        receiver_clean_power=receiver.clean_power,
    )


@dataclass(frozen=True)
class PairingPlan:
    epoch: int
    seed: int
    assignments: tuple  # of (receiver_id, donor_id)

    def donor_of(self, receiver_id):
        return dict(self.assignments)[receiver_id]

    def to_json(self):
        doc = {
            "epoch": self.epoch,
            "seed": self.seed,
            "assignments": [list(a) for a in self.assignments],
        }
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        return cls(
            epoch=int(doc["epoch"]),
            seed=int(doc["seed"]),
            assignments=tuple((str(r), str(d)) for r, d in doc["assignments"]),
        )


def plan_rng(seed: int, epoch: int) -> np.random.Generator:
    """Generator keyed by (seed, epoch) through numpy's SeedSequence hash."""
    if epoch < 0:
        raise InvalidInput(f"epoch must be non-negative, got {epoch}")
    return np.random.default_rng(np.random.SeedSequence([seed % 2**64, epoch]))


def make_pairing(healthy_ids, pathological_ids, seed: int, epoch: int) -> PairingPlan:
    """Draw, for every utterance, a donor from the other group (with replacement).

    Healthy receivers are listed first, then pathological ones, each in input order.
    """
    healthy_ids = [str(i) for i in healthy_ids]
    pathological_ids = [str(i) for i in pathological_ids]
    if not healthy_ids or not pathological_ids:
        raise InvalidInput("both groups need at least one utterance")
    all_ids = healthy_ids + pathological_ids
    if len(set(all_ids)) != len(all_ids):
        raise InvalidInput("utterance ids must be unique across both groups")

    rng = plan_rng(seed, epoch)
    h_donors = rng.integers(0, len(pathological_ids), size=len(healthy_ids))
    p_donors = rng.integers(0, len(healthy_ids), size=len(pathological_ids))
    assignments = [(r, pathological_ids[d]) for r, d in zip(healthy_ids, h_donors)]
    assignments += [(r, healthy_ids[d]) for r, d in zip(pathological_ids, p_donors)]
    return PairingPlan(epoch=epoch, seed=seed, assignments=tuple(assignments))
