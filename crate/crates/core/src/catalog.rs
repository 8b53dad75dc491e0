//! Precomputed spectrogram catalogs: building, persistence and ranked queries.
//!
//! On-disk layout (all integers little-endian):
//!
//! ```text
//! header   "SPMC" | version u32 = 1 | window_len u32 | hop u32 | bins u32 | track_count u32
//! track    name_len u32 | name (UTF-8) | sample_rate u32 | source_samples u64 | frames u32
//!          | frames * bins magnitudes, row-major f32
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::audio_io::{self, AudioBuffer};
use crate::matcher::{self, ErrorCurve, MatchConfig, MatchError, MatchResult};
use crate::spectro::{self, SpectroConfig, SpectroError, SpectrogramMatrix};

pub const MAGIC: [u8; 4] = *b"SPMC";
pub const VERSION: u32 = 1;
/// Magic, version, three config fields and the track count.
pub const HEADER_LEN: usize = 24;
/// Per-track metadata excluding the name bytes.
pub const TRACK_META_LEN: usize = 20;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unexpected end of catalog at byte offset {offset} while reading {what}")]
    Truncated { offset: usize, what: &'static str },
    #[error("bad magic {0:?}, not a catalog file")]
    BadMagic([u8; 4]),
    #[error("unsupported catalog version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt catalog at byte offset {offset}: {reason}")]
    Corrupt { offset: usize, reason: String },
    #[error("no usable recordings")]
    EmptyCorpus,
    #[error("no track is at least as long as the {query_frames}-frame query")]
    NoEligibleTrack { query_frames: usize },
    #[error("query audio too short: {0}")]
    AudioTooShort(SpectroError),
    #[error("duplicate track name {0:?}")]
    DuplicateName(String),
    #[error("track {0:?} has an empty name")]
    EmptyName(usize),
    #[error("track {name:?} was computed with {found:?}, catalog uses {expected:?}")]
    ConfigMismatch {
        name: String,
        expected: SpectroConfig,
        found: SpectroConfig,
    },
    #[error(transparent)]
    Match(#[from] MatchError),
}

pub type Result<T> = std::result::Result<T, CatalogError>;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackEntry {
    pub name: String,
    pub matrix: SpectrogramMatrix,
}

impl TrackEntry {
    pub fn duration_seconds(&self) -> f64 {
        self.matrix.source_duration_seconds()
    }

    pub fn sample_rate(&self) -> u32 {
        self.matrix.sample_rate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    config: SpectroConfig,
    tracks: Vec<TrackEntry>,
}

impl Catalog {
    /// Checks that names are nonempty and unique and that every matrix uses `config`.
    pub fn new(config: SpectroConfig, tracks: Vec<TrackEntry>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for (i, t) in tracks.iter().enumerate() {
            if t.name.is_empty() {
                return Err(CatalogError::EmptyName(i));
            }
            if !seen.insert(t.name.as_str()) {
                return Err(CatalogError::DuplicateName(t.name.clone()));
            }
            if t.matrix.config() != config {
                return Err(CatalogError::ConfigMismatch {
                    name: t.name.clone(),
                    expected: config,
                    found: t.matrix.config(),
                });
            }
        }
        Ok(Self { config, tracks })
    }

    pub fn config(&self) -> SpectroConfig {
        self.config
    }

    pub fn tracks(&self) -> &[TrackEntry] {
        &self.tracks
    }

    pub fn track(&self, name: &str) -> Option<&TrackEntry> {
        self.tracks.iter().find(|t| t.name == name)
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    /// Exact size of the serialized catalog in bytes.
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN
            + self
                .tracks
                .iter()
                .map(|t| TRACK_META_LEN + t.name.len() + t.matrix.data().len() * 4)
                .sum::<usize>()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&MAGIC);
        put_u32(&mut out, VERSION);
        put_u32(&mut out, self.config.window_len() as u32);
        put_u32(&mut out, self.config.hop() as u32);
        put_u32(&mut out, self.config.bins() as u32);
        put_u32(&mut out, self.tracks.len() as u32);
        for t in &self.tracks {
            put_u32(&mut out, t.name.len() as u32);
            out.extend_from_slice(t.name.as_bytes());
            put_u32(&mut out, t.matrix.sample_rate());
            out.extend_from_slice(&(t.matrix.source_samples() as u64).to_le_bytes());
            put_u32(&mut out, t.matrix.frames() as u32);
            for &v in t.matrix.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, offset: 0 };
        let magic: [u8; 4] = r.take(4, "magic")?.try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(CatalogError::BadMagic(magic));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(CatalogError::UnsupportedVersion(version));
        }
        let cfg_offset = r.offset;
        let window_len = r.u32("window length")? as usize;
        let hop = r.u32("hop")? as usize;
        let bins = r.u32("bin count")? as usize;
        let config =
            SpectroConfig::new(window_len, hop, bins).map_err(|e| CatalogError::Corrupt {
                offset: cfg_offset,
                reason: e.to_string(),
            })?;
        let count = r.u32("track count")? as usize;

        let mut tracks = Vec::new();
        for _ in 0..count {
            let name_offset = r.offset;
            let name_len = r.u32("track name length")? as usize;
            let name = std::str::from_utf8(r.take(name_len, "track name")?)
                .map_err(|e| CatalogError::Corrupt {
                    offset: name_offset,
                    reason: format!("track name is not UTF-8: {e}"),
                })?
                .to_owned();
            let sample_rate = r.u32("sample rate")?;
            let source_samples = r.u64("source sample count")? as usize;
            let frames = r.u32("frame count")? as usize;
            let data_offset = r.offset;
            let byte_len = frames
                .checked_mul(bins)
                .and_then(|n| n.checked_mul(4))
                .ok_or(CatalogError::Corrupt {
                    offset: data_offset,
                    reason: "frame count overflows".into(),
                })?;
            let raw = r.take(byte_len, "magnitudes")?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect();
            let matrix =
                SpectrogramMatrix::from_parts(data, frames, config, sample_rate, source_samples)
                    .map_err(|e| CatalogError::Corrupt {
                        offset: data_offset,
                        reason: format!("track {name:?}: {e}"),
                    })?;
            tracks.push(TrackEntry { name, matrix });
        }
        if r.offset != bytes.len() {
            return Err(CatalogError::Corrupt {
                offset: r.offset,
                reason: format!("{} trailing bytes", bytes.len() - r.offset),
            });
        }
        Catalog::new(config, tracks)
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self
            .offset
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or(CatalogError::Truncated {
                offset: self.bytes.len(),
                what,
            })?;
        let s = &self.bytes[self.offset..end];
        self.offset = end;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }
}

pub fn save_catalog(catalog: &Catalog, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, catalog.to_bytes()).map_err(|source| CatalogError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<Catalog> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| CatalogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Catalog::from_bytes(&bytes)
}

/// A file skipped while building, or a track skipped while querying.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub subject: String,
    pub reason: String,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WARN {}: {}", self.subject, self.reason)
    }
}

#[derive(Debug, Clone)]
pub struct BuildOutcome {
    pub catalog: Catalog,
    pub warnings: Vec<Warning>,
}

fn is_wav(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

/// Computes one spectrogram per WAV file in `dir`, ordered by file name.
///
/// Files that cannot be decoded or are shorter than one window are skipped
/// and reported as warnings. Magnitudes are rounded to 32-bit floats so an
/// in-memory catalog is identical to one loaded back from disk.
pub fn build_catalog(dir: impl AsRef<Path>, config: SpectroConfig) -> Result<BuildOutcome> {
    let dir = dir.as_ref();
    let read_dir = std::fs::read_dir(dir).map_err(|source| CatalogError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files = Vec::new();
    for entry in read_dir {
        let entry = entry.map_err(|source| CatalogError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = entry.path();
        if is_wav(&path) {
            files.push(path);
        }
    }
    files.sort();

    let computed: Vec<(PathBuf, std::result::Result<TrackEntry, String>)> = files
        .into_par_iter()
        .map(|path| {
            let entry = compute_entry(&path, &config);
            (path, entry)
        })
        .collect();

    let mut tracks: Vec<TrackEntry> = Vec::new();
    let mut warnings = Vec::new();
    for (path, entry) in computed {
        let subject = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        match entry {
            Ok(t) if tracks.iter().any(|o| o.name == t.name) => warnings.push(Warning {
                subject,
                reason: format!("duplicate track name {:?}", t.name),
            }),
            Ok(t) => tracks.push(t),
            Err(reason) => warnings.push(Warning { subject, reason }),
        }
    }
    if tracks.is_empty() {
        return Err(CatalogError::EmptyCorpus);
    }
    tracks.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(BuildOutcome {
        catalog: Catalog::new(config, tracks)?,
        warnings,
    })
}

fn compute_entry(path: &Path, config: &SpectroConfig) -> std::result::Result<TrackEntry, String> {
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .filter(|s| !s.is_empty())
        .ok_or_else(|| "file name is not valid UTF-8".to_string())?
        .to_owned();
    let audio = audio_io::load_audio(path).map_err(|e| e.to_string())?;
    let matrix = spectro::stft_magnitude(&audio, config).map_err(|e| e.to_string())?;
    Ok(TrackEntry {
        name,
        matrix: matrix.quantized_f32(),
    })
}

#[derive(Debug, Clone)]
pub struct RankedMatch {
    pub name: String,
    pub result: MatchResult,
    pub curve: ErrorCurve,
}

#[derive(Debug, Clone)]
pub struct QueryOutcome {
    /// Ascending by best error, ties by name.
    pub ranked: Vec<RankedMatch>,
    pub warnings: Vec<Warning>,
}

/// Matches `query` against every track long enough to hold it.
///
/// The query spectrogram is rounded to 32-bit precision, like the stored
/// tracks, before comparison.
pub fn query_catalog(
    catalog: &Catalog,
    query: &AudioBuffer,
    cfg: &MatchConfig,
) -> Result<QueryOutcome> {
    if catalog.is_empty() {
        return Err(CatalogError::EmptyCorpus);
    }
    let segment = spectro::stft_magnitude(query, &catalog.config)
        .map_err(CatalogError::AudioTooShort)?
        .quantized_f32();
    query_catalog_spectrogram(catalog, &segment, cfg)
}

/// [`query_catalog`] for a precomputed query spectrogram.
pub fn query_catalog_spectrogram(
    catalog: &Catalog,
    segment: &SpectrogramMatrix,
    cfg: &MatchConfig,
) -> Result<QueryOutcome> {
    if catalog.is_empty() {
        return Err(CatalogError::EmptyCorpus);
    }
    let mut warnings = Vec::new();
    let mut eligible = Vec::new();
    for t in &catalog.tracks {
        if t.matrix.frames() < segment.frames() {
            warnings.push(Warning {
                subject: t.name.clone(),
                reason: format!(
                    "track has {} frames, shorter than the {}-frame query",
                    t.matrix.frames(),
                    segment.frames()
                ),
            });
        } else if t.matrix.sample_rate() != segment.sample_rate() {
            warnings.push(Warning {
                subject: t.name.clone(),
                reason: format!(
                    "track sample rate {} Hz differs from query rate {} Hz",
                    t.matrix.sample_rate(),
                    segment.sample_rate()
                ),
            });
        } else {
            eligible.push(t);
        }
    }
    if eligible.is_empty() {
        return Err(CatalogError::NoEligibleTrack {
            query_frames: segment.frames(),
        });
    }

    let mut ranked = eligible
        .par_iter()
        .map(|t| {
            let curve = matcher::error_curve(&t.matrix, segment, cfg)?;
            let result = MatchResult::from_curve(&curve).expect("eligible track has a window");
            Ok(RankedMatch {
                name: t.name.clone(),
                result,
                curve,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| {
        a.result
            .best_error
            .total_cmp(&b.result.best_error)
            .then_with(|| a.name.cmp(&b.name))
    });
    Ok(QueryOutcome { ranked, warnings })
}
