"""Audio-to-score alignment: learned frame similarity + dynamic time warping."""

from sialign._core import (  # noqa: F401
    AudioBuffer,
    FeatureMatrix,
    NoteEvent,
    ScoreTrack,
    SialignError,
    align_files,
    chroma,
    chroma_dtw_baseline,
    contrastive_loss,
    cqt_magnitude,
    dtw_align,
    evaluate_time_map,
    extract,
    generate_corpus,
    harmonic_salience,
    load_wav,
    log_compress,
    pair_distance,
    parse_midi,
    path_to_time_map,
    salience_cross_entropy,
    save_wav,
    stft_magnitude,
    synthesize,
    warp_tempo,
    write_midi,
)

__all__ = [
    "AudioBuffer",
    "FeatureMatrix",
    "NoteEvent",
    "ScoreTrack",
    "SialignError",
    "align_files",
    "chroma",
    "chroma_dtw_baseline",
    "contrastive_loss",
    "cqt_magnitude",
    "dtw_align",
    "evaluate_time_map",
    "extract",
    "generate_corpus",
    "harmonic_salience",
    "load_wav",
    "log_compress",
    "pair_distance",
    "parse_midi",
    "path_to_time_map",
    "salience_cross_entropy",
    "save_wav",
    "stft_magnitude",
    "synthesize",
    "warp_tempo",
    "write_midi",
]
