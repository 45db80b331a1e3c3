"""Suppress noise disparity between two groups of speech recordings.

Noise estimated from one group's recordings is injected into the other
group's recordings with gains chosen so that both groups share the same
SNRs against every noise component.
"""

__version__ = "0.1.0"

from crossnoise._backend import BACKEND
from crossnoise.augmenter import (
    AugmentationOutcome,
    Group,
    PairingPlan,
    Utterance,
    augment_utterance,
    cross_noise_scale,
    make_pairing,
)
from crossnoise.corpus import (
    SETTINGS,
    ManifestEntry,
    SnrSetting,
    SynthSpec,
    build_noisy_corpus,
    generate_synthetic,
    load_manifest,
    write_manifest,
)
from crossnoise.errors import (
    ClampWarning,
    CorpusIOError,
    DuplicateId,
    FormatError,
    InsufficientNoise,
    InvalidInput,
    MissingEstimate,
    NotMono,
    RateMismatch,
    TooShort,
)
from crossnoise.signal_core import Waveform, add_scaled, mix_at_snr, power, snr_db, tile_to_length
from crossnoise.vad import (
    NoiseEstimate,
    VadConfig,
    VadMask,
    detect_speech,
    estimate_clean_power,
    estimate_noise,
    extract_noise,
    frame_energies,
)
from crossnoise.verifier import ConditionReport, check_pair_oracle, check_pair_practical, summarize
