//! Sliding-window spectrogram comparison.
//!
//! A query spectrogram is normalized once, every same-length window of the
//! full track is normalized on its own, and the sum of absolute differences
//! between the two gives one point of the error curve. The lowest point is
//! the match.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::spectro::{MatrixView, SpectrogramMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("segment has {segment} frames but the full track only {full}")]
    SegmentTooLong { segment: usize, full: usize },
    #[error("matrix shapes differ: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("window index {index} outside 1..={count}")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("spectrograms were computed differently: {0}")]
    ConfigMismatch(String),
    #[error("step must be at least 1")]
    InvalidStep,
    #[error("segment has no frames")]
    EmptySegment,
}

pub type Result<T> = std::result::Result<T, MatchError>;

/// How a window index is turned into a time in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeMapping {
    /// Linear map of indices `1..=n` onto `[0, duration]`. Reproduces the
    /// reference plots but places a true start `t` at `t * D / (D - S)`.
    PaperRescale,
    /// Start time of the window: `(i - 1) * step * hop / sample_rate`.
    #[default]
    ExactStart,
}

impl fmt::Display for TimeMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimeMapping::PaperRescale => "paper-rescale",
            TimeMapping::ExactStart => "exact-start",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    step: usize,
    time_mapping: TimeMapping,
    normalize: bool,
}

impl MatchConfig {
    pub fn new(step: usize) -> Result<Self> {
        if step == 0 {
            return Err(MatchError::InvalidStep);
        }
        Ok(Self {
            step,
            ..Self::default()
        })
    }

    pub fn with_time_mapping(mut self, mapping: TimeMapping) -> Self {
        self.time_mapping = mapping;
        self
    }

    /// Disables max+1 normalization (raw magnitudes are compared).
    pub fn with_normalize(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn time_mapping(&self) -> TimeMapping {
        self.time_mapping
    }

    pub fn normalize(&self) -> bool {
        self.normalize
    }
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            step: 1,
            time_mapping: TimeMapping::ExactStart,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub time: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    pub points: Vec<CurvePoint>,
    pub segment_frames: usize,
    pub mapping_used: TimeMapping,
}

impl ErrorCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.error)
    }

    /// Writes `time_s,error` CSV with six decimals and LF line endings.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(b"time_s,error\n")?;
        for p in &self.points {
            writeln!(out, "{:.6},{:.6}", p.time, p.error)?;
        }
        out.flush()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    pub best_time: f64,
    pub best_error: f64,
    /// 1-based window index.
    pub best_index: usize,
    /// `best_error / median(errors)`; near 1 means a flat curve.
    pub contrast: f64,
}

impl MatchResult {
    /// Lowest point of the curve, earliest on ties.
    ///
    /// When the median error is zero at least half of the windows match
    /// exactly, and the contrast is reported as 0.
    pub fn from_curve(curve: &ErrorCurve) -> Option<MatchResult> {
        let (best_pos, best) =
            curve
                .points
                .iter()
                .enumerate()
                .fold(None::<(usize, &CurvePoint)>, |acc, (i, p)| match acc {
                    Some((_, b)) if b.error <= p.error => acc,
                    _ => Some((i, p)),
                })?;
        let med = median(curve.errors().collect());
        let contrast = if med > 0.0 { best.error / med } else { 0.0 };
        Some(MatchResult {
            best_time: best.time,
            best_error: best.error,
            best_index: best_pos + 1,
            contrast,
        })
    }
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    match n {
        0 => 0.0,
        _ if n % 2 == 1 => values[n / 2],
        _ => (values[n / 2 - 1] + values[n / 2]) / 2.0,
    }
}

/// Window `index` (1-based) covering frames `start_frame..start_frame + rows`.
#[derive(Debug, Clone, Copy)]
pub struct FrameWindow<'a> {
    pub index: usize,
    pub start_frame: usize,
    pub view: MatrixView<'a>,
}

/// `floor((full - segment) / step) + 1`, or 0 when the segment does not fit.
pub fn window_count(full_frames: usize, segment_frames: usize, step: usize) -> usize {
    if segment_frames > full_frames || step == 0 {
        0
    } else {
        (full_frames - segment_frames) / step + 1
    }
}

/// Every complete `segment_frames`-long window of `full`, advancing by `step` frames.
pub fn sliding_windows(
    full: &SpectrogramMatrix,
    segment_frames: usize,
    step: usize,
) -> Result<Vec<FrameWindow<'_>>> {
    if step == 0 {
        return Err(MatchError::InvalidStep);
    }
    if segment_frames == 0 {
        return Err(MatchError::EmptySegment);
    }
    if segment_frames > full.frames() {
        return Err(MatchError::SegmentTooLong {
            segment: segment_frames,
            full: full.frames(),
        });
    }
    let count = window_count(full.frames(), segment_frames, step);
    Ok((0..count)
        .map(|i| FrameWindow {
            index: i + 1,
            start_frame: i * step,
            view: full.frames_view(i * step, segment_frames),
        })
        .collect())
}

/// Sum of absolute entry-wise differences.
pub fn sad_error(a: MatrixView<'_>, b: MatrixView<'_>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(MatchError::ShapeMismatch {
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .sum())
}

/// Maps index `i` of `n` linearly onto `[0, duration]`.
pub fn rescale_index(i: usize, n: usize, duration: f64) -> Result<f64> {
    if i == 0 || i > n {
        return Err(MatchError::IndexOutOfRange { index: i, count: n });
    }
    if n == 1 {
        return Ok(0.0);
    }
    Ok((i - 1) as f64 / (n - 1) as f64 * duration)
}

/// Start time in seconds of window `i` (1-based).
pub fn exact_start_time(i: usize, step: usize, hop: usize, sample_rate: u32) -> Result<f64> {
    if i == 0 {
        return Err(MatchError::IndexOutOfRange { index: i, count: 0 });
    }
    Ok(((i - 1) * step * hop) as f64 / sample_rate as f64)
}

fn check_compatible(full: &SpectrogramMatrix, segment: &SpectrogramMatrix) -> Result<()> {
    if full.config() != segment.config() {
        return Err(MatchError::ConfigMismatch(format!(
            "{:?} vs {:?}",
            full.config(),
            segment.config()
        )));
    }
    if full.sample_rate() != segment.sample_rate() {
        return Err(MatchError::ConfigMismatch(format!(
            "sample rate {} Hz vs {} Hz",
            full.sample_rate(),
            segment.sample_rate()
        )));
    }
    Ok(())
}

/// Error of the (normalized) segment against every window of the full track.
pub fn error_curve(
    full: &SpectrogramMatrix,
    segment: &SpectrogramMatrix,
    cfg: &MatchConfig,
) -> Result<ErrorCurve> {
    check_compatible(full, segment)?;
    let windows = sliding_windows(full, segment.frames(), cfg.step)?;
    let n = windows.len();
    let seg_frames = segment.frames();

    let query: Vec<f64> = if cfg.normalize {
        let denom = segment.max() + 1.0;
        segment.data().iter().map(|&v| v / denom).collect()
    } else {
        segment.data().to_vec()
    };

    // Window maxima from per-frame maxima; identical to a max over the window.
    let frame_max: Vec<f64> = (0..full.frames())
        .map(|f| full.row(f).iter().copied().fold(0.0, f64::max))
        .collect();

    let errors: Vec<f64> = windows
        .par_iter()
        .map(|w| {
            let data = w.view.data();
            if cfg.normalize {
                let max = frame_max[w.start_frame..w.start_frame + seg_frames]
                    .iter()
                    .copied()
                    .fold(0.0, f64::max);
                let denom = max + 1.0;
                query
                    .iter()
                    .zip(data)
                    .map(|(q, v)| (q - v / denom).abs())
                    .sum()
            } else {
                query.iter().zip(data).map(|(q, v)| (q - v).abs()).sum()
            }
        })
        .collect();

    let duration = full.source_duration_seconds();
    let hop = full.config().hop();
    let points = errors
        .into_iter()
        .enumerate()
        .map(|(k, error)| {
            let i = k + 1;
            let time = match cfg.time_mapping {
                TimeMapping::PaperRescale => rescale_index(i, n, duration),
                TimeMapping::ExactStart => exact_start_time(i, cfg.step, hop, full.sample_rate()),
            }?;
            Ok(CurvePoint { time, error })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ErrorCurve {
        points,
        segment_frames: seg_frames,
        mapping_used: cfg.time_mapping,
    })
}

/// Best window of `full` for `segment`.
pub fn match_segment(
    full: &SpectrogramMatrix,
    segment: &SpectrogramMatrix,
    cfg: &MatchConfig,
) -> Result<MatchResult> {
    let curve = error_curve(full, segment, cfg)?;
    Ok(MatchResult::from_curve(&curve).expect("curve has at least one window"))
}
