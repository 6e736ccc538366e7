"""Signal-cue refinement of phone-level forced alignments.

Group-delay syllable boundaries and sub-band spectral flux are used to
correct an initial alignment, which is then exported as integer duration
targets for non-autoregressive TTS training.
"""

from hybridseg.alignment import (
    AlignmentTier,
    LabeledInterval,
    PhoneClassTable,
    Syllable,
    classify,
    parse_label_file,
    syllabify,
    write_label_file,
)
from hybridseg.dsp import (
    CepstraSequence,
    FrameContour,
    FrameSpec,
    Waveform,
    frame_signal,
    magnitude_spectrogram,
    mel_cepstra,
    short_term_energy,
)
from hybridseg.groupdelay import (
    GdBoundaries,
    GdConfig,
    detect_syllable_boundaries,
    gd_boundaries_for_waveform,
    min_phase_group_delay,
)
from hybridseg.metrics import boundary_diff, dtw_align, mcd
from hybridseg.pipeline import (
    DurationTargets,
    HybridConfig,
    export_durations,
    hybrid_segment,
    redistribute_phones,
    snap_syllable_boundaries,
)
from hybridseg.sbsf import BandSpec, SbsfConfig, refine_boundary, refine_tier, subband_spectral_flux

__version__ = "0.1.0"
