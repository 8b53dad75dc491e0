//! `specmatch` command-line interface.
//!
//! Exit codes: 0 success (or MATCH), 1 invalid arguments or I/O failure,
//! 2 nothing to compare (empty corpus, no eligible track, segment too long),
//! 3 best candidate judged NO-MATCH.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::audio_io::{self, AudioError, ToneSegment};
use crate::catalog::{self, CatalogError};
use crate::matcher::{self, MatchConfig, MatchError, MatchResult, TimeMapping};
use crate::spectro::{self, SpectroConfig, SpectroError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_NOTHING_TO_MATCH: i32 = 2;
pub const EXIT_NO_MATCH: i32 = 3;

pub const DEFAULT_CONTRAST_THRESHOLD: f64 = 0.7;

#[derive(Debug, Parser)]
#[command(
    name = "specmatch",
    version,
    about = "Find where an audio snippet occurs in a catalog of recordings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Precompute spectrograms for every WAV file in a directory.
    BuildDb(BuildArgs),
    /// Rank catalog tracks by how well they contain the query.
    Match(MatchArgs),
    /// Write the error curve of one segment slid across one recording.
    Curve(CurveArgs),
    /// Synthesize a melody of sine tones into a 16-bit WAV file.
    GenTone(GenArgs),
}

#[derive(Debug, Args)]
struct BuildArgs {
    dir: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = SpectroConfig::DEFAULT_WINDOW_LEN)]
    window: usize,
    #[arg(long, default_value_t = SpectroConfig::DEFAULT_HOP)]
    hop: usize,
    #[arg(long, default_value_t = SpectroConfig::DEFAULT_BINS)]
    bins: usize,
}

#[derive(Debug, Args)]
struct CurveOptions {
    /// Window stride in frames.
    #[arg(long, default_value_t = 1)]
    step: usize,
    /// Map window indices linearly onto [0, duration] instead of reporting start times.
    #[arg(long)]
    paper_rescale: bool,
    /// Compare raw magnitudes without max+1 normalization.
    #[arg(long)]
    no_normalize: bool,
}

impl CurveOptions {
    fn match_config(&self) -> Result<MatchConfig, String> {
        let mapping = if self.paper_rescale {
            TimeMapping::PaperRescale
        } else {
            TimeMapping::ExactStart
        };
        Ok(MatchConfig::new(self.step)
            .map_err(|e| e.to_string())?
            .with_time_mapping(mapping)
            .with_normalize(!self.no_normalize))
    }
}

#[derive(Debug, Args)]
struct MatchArgs {
    query: PathBuf,
    #[arg(long)]
    db: PathBuf,
    #[command(flatten)]
    curve: CurveOptions,
    /// Query trim start in seconds (0 = beginning).
    #[arg(long, default_value_t = 0.0)]
    start: f64,
    /// Query trim end in seconds (0 = end of file).
    #[arg(long, default_value_t = 0.0)]
    end: f64,
    /// Write one error-curve CSV per track into this directory.
    #[arg(long)]
    curves_out: Option<PathBuf>,
    /// Contrast (min / median error) at or above which the best track is NO-MATCH.
    #[arg(long, default_value_t = DEFAULT_CONTRAST_THRESHOLD)]
    threshold: f64,
}

#[derive(Debug, Args)]
struct CurveArgs {
    full: PathBuf,
    segment: PathBuf,
    #[command(flatten)]
    curve: CurveOptions,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Comma-separated freq:duration:amplitude triples, e.g. "440:0.5:1.0,494:0.5:1.0".
    #[arg(long)]
    spec: String,
    #[arg(long, default_value_t = 44100)]
    rate: u32,
    #[arg(short, long)]
    output: PathBuf,
}

/// Runs the CLI with `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_FAILURE
            } else {
                EXIT_OK
            };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::BuildDb(a) => cmd_build(&a, out, err),
        Command::Match(a) => cmd_match(&a, out, err),
        Command::Curve(a) => cmd_curve(&a, out),
        Command::GenTone(a) => cmd_gen(&a),
    };
    match result {
        Ok(code) => code,
        Err(Failure { code, message }) => {
            let _ = writeln!(err, "error: {message}");
            code
        }
    }
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_FAILURE,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<AudioError> for Failure {
    fn from(e: AudioError) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<CatalogError> for Failure {
    fn from(e: CatalogError) -> Self {
        let code = match e {
            CatalogError::EmptyCorpus
            | CatalogError::NoEligibleTrack { .. }
            | CatalogError::AudioTooShort(_)
            | CatalogError::Match(MatchError::SegmentTooLong { .. }) => EXIT_NOTHING_TO_MATCH,
            _ => EXIT_FAILURE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<MatchError> for Failure {
    fn from(e: MatchError) -> Self {
        let code = match e {
            MatchError::SegmentTooLong { .. } => EXIT_NOTHING_TO_MATCH,
            _ => EXIT_FAILURE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<SpectroError> for Failure {
    fn from(e: SpectroError) -> Self {
        let code = match e {
            SpectroError::AudioTooShort { .. } => EXIT_NOTHING_TO_MATCH,
            _ => EXIT_FAILURE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<i32, Failure>;

fn cmd_build(args: &BuildArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let config = SpectroConfig::new(args.window, args.hop, args.bins)?;
    let built = catalog::build_catalog(&args.dir, config)?;
    for w in &built.warnings {
        writeln!(err, "{w}")?;
    }
    catalog::save_catalog(&built.catalog, &args.output)?;
    for t in built.catalog.tracks() {
        writeln!(
            out,
            "{}\t{:.6}\t{}",
            t.name,
            t.duration_seconds(),
            t.matrix.frames()
        )?;
    }
    Ok(EXIT_OK)
}

fn verdict(result: &MatchResult, threshold: f64) -> &'static str {
    if result.contrast < threshold {
        "MATCH"
    } else {
        "NO-MATCH"
    }
}

fn cmd_match(args: &MatchArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let cfg = args.curve.match_config().map_err(Failure::usage)?;
    if !(args.threshold.is_finite() && args.threshold > 0.0) {
        return Err(Failure::usage(format!(
            "threshold {} must be a positive number",
            args.threshold
        )));
    }
    let catalog = catalog::load_catalog(&args.db)?;
    let query = audio_io::load_audio(&args.query)?;
    let query = audio_io::trim(&query, args.start, args.end)?;
    let outcome = catalog::query_catalog(&catalog, &query, &cfg)?;
    for w in &outcome.warnings {
        writeln!(err, "{w}")?;
    }

    if let Some(dir) = &args.curves_out {
        std::fs::create_dir_all(dir)?;
        for m in &outcome.ranked {
            write_curve(&m.curve, &dir.join(format!("{}.csv", m.name)))?;
        }
    }

    writeln!(
        out,
        "rank\ttrack\tbest_time_s\tbest_error\tcontrast\tverdict"
    )?;
    for (rank, m) in outcome.ranked.iter().enumerate() {
        writeln!(
            out,
            "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}",
            rank + 1,
            m.name,
            m.result.best_time,
            m.result.best_error,
            m.result.contrast,
            verdict(&m.result, args.threshold)
        )?;
    }
    let best = &outcome.ranked[0].result;
    Ok(if verdict(best, args.threshold) == "MATCH" {
        EXIT_OK
    } else {
        EXIT_NO_MATCH
    })
}

fn write_curve(curve: &matcher::ErrorCurve, path: &Path) -> Result<(), Failure> {
    let file = File::create(path)
        .map_err(|e| Failure::usage(format!("cannot create {}: {e}", path.display())))?;
    curve.write_csv(BufWriter::new(file))?;
    Ok(())
}

fn cmd_curve(args: &CurveArgs, out: &mut dyn Write) -> CmdResult {
    let cfg = args.curve.match_config().map_err(Failure::usage)?;
    let config = SpectroConfig::default();
    let full = audio_io::load_audio(&args.full)?;
    let segment = audio_io::load_audio(&args.segment)?;
    let full = spectro::stft_magnitude(&full, &config)?;
    let segment = spectro::stft_magnitude(&segment, &config)?;
    let curve = matcher::error_curve(&full, &segment, &cfg)?;
    write_curve(&curve, &args.output)?;
    let best = MatchResult::from_curve(&curve).expect("curve has at least one window");
    writeln!(out, "min={:.6} at t={:.6}", best.best_error, best.best_time)?;
    Ok(EXIT_OK)
}

/// Parses `freq:duration:amplitude` triples separated by commas.
pub fn parse_tone_spec(spec: &str) -> Result<Vec<ToneSegment>, String> {
    if spec.trim().is_empty() {
        return Err("tone spec is empty".into());
    }
    spec.split(',')
        .map(|triple| {
            let triple = triple.trim();
            let parts: Vec<&str> = triple.split(':').collect();
            let bad = |why: &str| format!("malformed tone triple {triple:?}: {why}");
            if parts.len() != 3 {
                return Err(bad("expected freq:duration:amplitude"));
            }
            let num = |s: &str, what: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(&format!("{what} {s:?} is not a number")))
            };
            Ok(ToneSegment::new(
                num(parts[0], "frequency")?,
                num(parts[1], "duration")?,
                num(parts[2], "amplitude")?,
            ))
        })
        .collect()
}

fn cmd_gen(args: &GenArgs) -> CmdResult {
    let segments = parse_tone_spec(&args.spec).map_err(Failure::usage)?;
    let audio = audio_io::gen_tone(&segments, args.rate)?;
    audio_io::save_wav(&audio, &args.output)?;
    Ok(EXIT_OK)
}
