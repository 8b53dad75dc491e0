//! Magnitude short-time Fourier transforms and max+1 normalization.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::audio_io::AudioBuffer;

#[derive(Debug, Error, PartialEq)]
pub enum SpectroError {
    #[error("invalid spectrogram configuration: {0}")]
    InvalidConfig(String),
    #[error("audio has {samples} samples, fewer than one {window_len}-sample window")]
    AudioTooShort { samples: usize, window_len: usize },
    #[error("matrix data length {len} does not equal {frames} frames x {bins} bins")]
    BadShape {
        len: usize,
        frames: usize,
        bins: usize,
    },
}

pub type Result<T> = std::result::Result<T, SpectroError>;

/// Frame length, hop and number of retained low-frequency bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpectroConfig {
    window_len: usize,
    hop: usize,
    bins: usize,
}

impl SpectroConfig {
    pub const DEFAULT_WINDOW_LEN: usize = 4096;
    pub const DEFAULT_HOP: usize = 512;
    pub const DEFAULT_BINS: usize = 1024;

    /// Requires `0 < hop <= window_len` and `0 < bins <= window_len / 2`.
    pub fn new(window_len: usize, hop: usize, bins: usize) -> Result<Self> {
        if window_len < 2 {
            return Err(SpectroError::InvalidConfig(format!(
                "window length {window_len} must be at least 2"
            )));
        }
        if hop == 0 || hop > window_len {
            return Err(SpectroError::InvalidConfig(format!(
                "hop {hop} must satisfy 0 < hop <= window length {window_len}"
            )));
        }
        if bins == 0 || bins > window_len / 2 {
            return Err(SpectroError::InvalidConfig(format!(
                "bins {bins} must satisfy 0 < bins <= window length / 2 ({})",
                window_len / 2
            )));
        }
        Ok(Self {
            window_len,
            hop,
            bins,
        })
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Number of complete frames in `num_samples` samples (trailing partial frame dropped).
    pub fn frame_count(&self, num_samples: usize) -> usize {
        if num_samples < self.window_len {
            0
        } else {
            (num_samples - self.window_len) / self.hop + 1
        }
    }
}

impl Default for SpectroConfig {
    fn default() -> Self {
        Self {
            window_len: Self::DEFAULT_WINDOW_LEN,
            hop: Self::DEFAULT_HOP,
            bins: Self::DEFAULT_BINS,
        }
    }
}

/// Borrowed row-major matrix.
#[derive(Debug, Clone, Copy)]
pub struct MatrixView<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
}

impl<'a> MatrixView<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Option<Self> {
        (rows.checked_mul(cols) == Some(data.len())).then_some(Self { data, rows, cols })
    }

    pub fn data(&self) -> &'a [f64] {
        self.data
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Global maximum; 0 for an empty matrix.
    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// Frames x bins magnitude matrix plus the timing metadata of its source.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramMatrix {
    data: Vec<f64>,
    frames: usize,
    config: SpectroConfig,
    sample_rate: u32,
    source_samples: usize,
}

impl SpectrogramMatrix {
    /// Assembles a matrix from row-major magnitudes; entries must be non-negative.
    pub fn from_parts(
        data: Vec<f64>,
        frames: usize,
        config: SpectroConfig,
        sample_rate: u32,
        source_samples: usize,
    ) -> Result<Self> {
        if frames.checked_mul(config.bins) != Some(data.len()) {
            return Err(SpectroError::BadShape {
                len: data.len(),
                frames,
                bins: config.bins,
            });
        }
        if sample_rate == 0 {
            return Err(SpectroError::InvalidConfig("sample rate is zero".into()));
        }
        if data.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(SpectroError::InvalidConfig(
                "magnitudes must be non-negative".into(),
            ));
        }
        Ok(Self {
            data,
            frames,
            config,
            sample_rate,
            source_samples,
        })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.config.bins
    }

    pub fn config(&self) -> SpectroConfig {
        self.config
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn source_samples(&self) -> usize {
        self.source_samples
    }

    pub fn source_duration_seconds(&self) -> f64 {
        self.source_samples as f64 / self.sample_rate as f64
    }

    pub fn frame_hop_seconds(&self) -> f64 {
        self.config.hop as f64 / self.sample_rate as f64
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        let b = self.config.bins;
        &self.data[frame * b..(frame + 1) * b]
    }

    pub fn view(&self) -> MatrixView<'_> {
        MatrixView {
            data: &self.data,
            rows: self.frames,
            cols: self.config.bins,
        }
    }

    /// Rows `[start, start + count)` as a view.
    pub fn frames_view(&self, start: usize, count: usize) -> MatrixView<'_> {
        let b = self.config.bins;
        MatrixView {
            data: &self.data[start * b..(start + count) * b],
            rows: count,
            cols: b,
        }
    }

    pub fn max(&self) -> f64 {
        self.view().max()
    }

    /// Copy of frames `[start, start + count)`; source metadata describes the
    /// samples those frames cover.
    pub fn slice_frames(&self, start: usize, count: usize) -> SpectrogramMatrix {
        assert!(
            start + count <= self.frames,
            "frame slice {start}+{count} exceeds {} frames",
            self.frames
        );
        let covered = if count == 0 {
            0
        } else {
            (count - 1) * self.config.hop + self.config.window_len
        };
        SpectrogramMatrix {
            data: self.frames_view(start, count).data.to_vec(),
            frames: count,
            config: self.config,
            sample_rate: self.sample_rate,
            source_samples: covered,
        }
    }

    /// Rounds every magnitude through 32-bit float, the catalog's storage precision.
    pub fn quantized_f32(&self) -> SpectrogramMatrix {
        SpectrogramMatrix {
            data: self.data.iter().map(|&v| v as f32 as f64).collect(),
            ..self.clone()
        }
    }

    pub fn scaled(&self, gain: f64) -> SpectrogramMatrix {
        SpectrogramMatrix {
            data: self.data.iter().map(|&v| v * gain).collect(),
            ..self.clone()
        }
    }
}

/// Rectangular-window STFT magnitudes of DFT bins `1..=bins` for each
/// complete frame, in ascending frequency.
///
/// For real input, bin `k` mirrors bin `window_len - k`, so this is the same
/// information as taking the top `bins` outputs of the full transform.
pub fn stft_magnitude(audio: &AudioBuffer, config: &SpectroConfig) -> Result<SpectrogramMatrix> {
    let samples = audio.samples();
    let frames = config.frame_count(samples.len());
    if frames == 0 {
        return Err(SpectroError::AudioTooShort {
            samples: samples.len(),
            window_len: config.window_len,
        });
    }

    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(config.window_len);
    let bins = config.bins;
    let mut data = vec![0.0; frames * bins];
    data.par_chunks_mut(bins).enumerate().for_each_init(
        || {
            (
                vec![Complex::new(0.0, 0.0); config.window_len],
                vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()],
            )
        },
        |(buf, scratch), (frame, row)| {
            let start = frame * config.hop;
            for (dst, &s) in buf
                .iter_mut()
                .zip(&samples[start..start + config.window_len])
            {
                *dst = Complex::new(s, 0.0);
            }
            fft.process_with_scratch(buf, scratch);
            for (out, c) in row.iter_mut().zip(&buf[1..=bins]) {
                *out = c.norm();
            }
        },
    );

    Ok(SpectrogramMatrix {
        data,
        frames,
        config: *config,
        sample_rate: audio.sample_rate(),
        source_samples: samples.len(),
    })
}

/// Divides every entry by the global maximum plus one.
pub fn normalize(m: &SpectrogramMatrix) -> SpectrogramMatrix {
    let denom = m.max() + 1.0;
    SpectrogramMatrix {
        data: m.data.iter().map(|&v| v / denom).collect(),
        ..m.clone()
    }
}
