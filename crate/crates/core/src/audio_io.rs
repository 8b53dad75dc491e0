//! Audio buffers, WAV decoding/encoding, trimming and test-tone synthesis.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Seek};
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("frequency {frequency} Hz is at or above the Nyquist limit of {nyquist} Hz")]
    AliasedFrequency { frequency: f64, nyquist: f64 },
    #[error("invalid tone segment: {0}")]
    InvalidTone(String),
    #[error("invalid sample rate: {0}")]
    InvalidSampleRate(u32),
    #[error("buffers differ in {0}")]
    Incompatible(&'static str),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, AudioError>;

/// Mono sample sequence with its sample rate.
///
/// Decoded buffers always hold samples in `[-1.0, 1.0]`. Buffers built in
/// memory (for example by [`AudioBuffer::with_gain`]) may exceed that range;
/// [`save_wav`] clamps on the way out.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidSampleRate(sample_rate));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Sample-index range `[start, end)` as a new buffer. Bounds are clamped.
    pub fn slice_samples(&self, start: usize, end: usize) -> AudioBuffer {
        let end = end.min(self.samples.len());
        let start = start.min(end);
        AudioBuffer {
            samples: self.samples[start..end].to_vec(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn with_gain(&self, gain: f64) -> AudioBuffer {
        AudioBuffer {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Sample-wise sum of two buffers of equal rate and length.
    pub fn mix(&self, other: &AudioBuffer) -> Result<AudioBuffer> {
        if self.sample_rate != other.sample_rate {
            return Err(AudioError::Incompatible("sample rate"));
        }
        if self.samples.len() != other.samples.len() {
            return Err(AudioError::Incompatible("length"));
        }
        Ok(AudioBuffer {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a + b)
                .collect(),
            sample_rate: self.sample_rate,
        })
    }

    /// Concatenates `other` after `self`.
    pub fn concat(&self, other: &AudioBuffer) -> Result<AudioBuffer> {
        if self.sample_rate != other.sample_rate {
            return Err(AudioError::Incompatible("sample rate"));
        }
        let mut samples = Vec::with_capacity(self.len() + other.len());
        samples.extend_from_slice(&self.samples);
        samples.extend_from_slice(&other.samples);
        Ok(AudioBuffer {
            samples,
            sample_rate: self.sample_rate,
        })
    }
}

/// Decodes a PCM WAV file (integer or IEEE float) and mixes it down to mono.
pub fn load_audio(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(AudioError::FileNotFound(path.to_path_buf()));
    }
    let file = std::fs::File::open(path).map_err(|source| AudioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_wav(std::io::BufReader::new(file))
}

/// Decodes WAV bytes from any seekable reader.
pub fn decode_wav<R: Read + Seek>(reader: R) -> Result<AudioBuffer> {
    let mut wav = hound::WavReader::new(reader).map_err(map_hound)?;
    let spec = wav.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(AudioError::UnsupportedFormat(format!(
            "{} channels (only mono and stereo are accepted)",
            spec.channels
        )));
    }
    if spec.sample_rate == 0 {
        return Err(AudioError::CorruptHeader("sample rate is zero".into()));
    }

    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(AudioError::UnsupportedFormat(format!(
                    "{}-bit float samples",
                    spec.bits_per_sample
                )));
            }
            wav.samples::<f32>()
                .map(|s| s.map(|v| clamp_unit(v as f64)))
                .collect::<std::result::Result<_, _>>()
                .map_err(map_hound)?
        }
        hound::SampleFormat::Int => {
            let bits = spec.bits_per_sample;
            if !(8..=32).contains(&bits) {
                return Err(AudioError::UnsupportedFormat(format!(
                    "{bits}-bit integer samples"
                )));
            }
            let scale = (1u64 << (bits - 1)) as f64;
            wav.samples::<i32>()
                .map(|s| s.map(|v| clamp_unit(v as f64 / scale)))
                .collect::<std::result::Result<_, _>>()
                .map_err(map_hound)?
        }
    };

    let samples = match spec.channels {
        1 => interleaved,
        _ => interleaved
            .chunks_exact(2)
            .map(|frame| (frame[0] + frame[1]) / 2.0)
            .collect(),
    };
    AudioBuffer::new(samples, spec.sample_rate)
}

// NaN decodes as silence.
fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-1.0, 1.0)
    }
}

fn map_hound(err: hound::Error) -> AudioError {
    match err {
        hound::Error::Unsupported => {
            AudioError::UnsupportedFormat("codec is not PCM integer or IEEE float".into())
        }
        hound::Error::TooWide => AudioError::UnsupportedFormat("sample width too large".into()),
        hound::Error::FormatError(msg) => AudioError::CorruptHeader(msg.to_string()),
        hound::Error::InvalidSampleFormat => {
            AudioError::CorruptHeader("sample format does not match header".into())
        }
        hound::Error::UnfinishedSample => AudioError::CorruptHeader("truncated sample data".into()),
        hound::Error::IoError(e) => AudioError::CorruptHeader(e.to_string()),
    }
}

/// Writes a 16-bit PCM mono WAV file. Samples outside `[-1, 1]` are clamped.
pub fn save_wav(audio: &AudioBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source: std::io::Error| AudioError::Io {
        path: path.to_path_buf(),
        source,
    };
    let from_hound = |e: hound::Error| match e {
        hound::Error::IoError(source) => io_err(source),
        other => io_err(std::io::Error::other(other)),
    };
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(from_hound)?;
    for &s in &audio.samples {
        writer.write_sample(quantize_i16(s)).map_err(from_hound)?;
    }
    writer.finalize().map_err(from_hound)
}

fn quantize_i16(s: f64) -> i16 {
    (clamp_unit(s) * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Trims with the zero conventions of the matcher's front end:
/// `(0, 0)` keeps everything, `(0, e)` keeps `[0, e)`, `(s, 0)` keeps
/// `[s, duration)` and `(s, e)` keeps `[s, e)`. Boundaries round to the
/// nearest sample; an end past the buffer clamps to its length.
pub fn trim(audio: &AudioBuffer, start: f64, end: f64) -> Result<AudioBuffer> {
    if !start.is_finite() || !end.is_finite() || start < 0.0 || end < 0.0 {
        return Err(AudioError::InvalidRange(format!(
            "start {start} and end {end} must be finite and non-negative"
        )));
    }
    let sr = audio.sample_rate as f64;
    let len = audio.samples.len();
    let to_index = |t: f64| ((t * sr).round() as usize).min(len);

    let (lo, hi) = match (start == 0.0, end == 0.0) {
        (true, true) => return Ok(audio.clone()),
        (true, false) => (0, to_index(end)),
        (false, true) => (to_index(start), len),
        (false, false) => {
            if start > end {
                return Err(AudioError::InvalidRange(format!(
                    "start {start} s is after end {end} s"
                )));
            }
            (to_index(start), to_index(end))
        }
    };
    if start > 0.0 && start >= audio.duration_seconds() {
        return Err(AudioError::InvalidRange(format!(
            "start {start} s is not before the buffer end ({:.6} s)",
            audio.duration_seconds()
        )));
    }
    Ok(audio.slice_samples(lo, hi))
}

/// One constant-pitch sine segment of a synthesized melody.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneSegment {
    pub frequency: f64,
    pub duration: f64,
    pub amplitude: f64,
}

impl ToneSegment {
    pub fn new(frequency: f64, duration: f64, amplitude: f64) -> Self {
        Self {
            frequency,
            duration,
            amplitude,
        }
    }
}

impl fmt::Display for ToneSegment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.frequency, self.duration, self.amplitude)
    }
}

/// Concatenated sine segments; each segment restarts at phase zero.
pub fn gen_tone(segments: &[ToneSegment], sample_rate: u32) -> Result<AudioBuffer> {
    if sample_rate == 0 {
        return Err(AudioError::InvalidSampleRate(sample_rate));
    }
    if segments.is_empty() {
        return Err(AudioError::InvalidTone("no segments given".into()));
    }
    let sr = sample_rate as f64;
    let nyquist = sr / 2.0;
    let mut samples = Vec::new();
    for seg in segments {
        if !seg.frequency.is_finite() || seg.frequency < 0.0 {
            return Err(AudioError::InvalidTone(format!(
                "frequency in {seg} must be non-negative"
            )));
        }
        if seg.frequency >= nyquist {
            return Err(AudioError::AliasedFrequency {
                frequency: seg.frequency,
                nyquist,
            });
        }
        if !seg.duration.is_finite() || seg.duration <= 0.0 {
            return Err(AudioError::InvalidTone(format!(
                "duration in {seg} must be positive"
            )));
        }
        if !(0.0..=1.0).contains(&seg.amplitude) {
            return Err(AudioError::InvalidTone(format!(
                "amplitude in {seg} must lie in [0, 1]"
            )));
        }
        let n = (seg.duration * sr).round() as usize;
        let w = 2.0 * PI * seg.frequency / sr;
        samples.extend((0..n).map(|i| seg.amplitude * (w * i as f64).sin()));
    }
    AudioBuffer::new(samples, sample_rate)
}
