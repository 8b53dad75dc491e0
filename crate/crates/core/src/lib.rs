//! Query-by-example audio matching on magnitude spectrograms.
//!
//! A snippet is located inside a longer recording by sliding its
//! max+1-normalized spectrogram over the recording's spectrogram and taking
//! the window with the smallest sum of absolute differences. Normalizing
//! both sides makes the comparison insensitive to playback volume.

pub mod audio_io;
pub mod catalog;
pub mod cli;
pub mod matcher;
pub mod spectro;

pub use audio_io::{gen_tone, load_audio, save_wav, trim, AudioBuffer, AudioError, ToneSegment};
pub use catalog::{
    build_catalog, load_catalog, query_catalog, save_catalog, Catalog, CatalogError, TrackEntry,
};
pub use matcher::{
    error_curve, match_segment, ErrorCurve, MatchConfig, MatchError, MatchResult, TimeMapping,
};
pub use spectro::{normalize, stft_magnitude, SpectroConfig, SpectroError, SpectrogramMatrix};
