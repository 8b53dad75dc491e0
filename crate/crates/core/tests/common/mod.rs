#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specmatch::{gen_tone, AudioBuffer, ToneSegment};

pub const SR: u32 = 44100;
pub const HOP: usize = 512;

/// C major scale, C4..C5.
pub const SCALE: [f64; 8] = [
    261.63, 293.66, 329.63, 349.23, 392.00, 440.00, 493.88, 523.25,
];

/// Pseudo-random note sequence over the eight scale pitches, `total` seconds long.
/// Durations are drawn from {0.25, 0.375, 0.5, 0.75} s.
pub fn melody_notes(seed: u64, total: f64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let durations: [f64; 4] = [0.25, 0.375, 0.5, 0.75];
    let mut notes = Vec::new();
    let mut t = 0.0;
    let mut prev = usize::MAX;
    while t < total - 1e-9 {
        let mut p = rng.gen_range(0..SCALE.len());
        if p == prev {
            p = (p + 1) % SCALE.len();
        }
        prev = p;
        let d = durations[rng.gen_range(0..durations.len())].min(total - t);
        notes.push((SCALE[p], d));
        t += d;
    }
    notes
}

/// Renders notes as sine segments; `harmonics` lists extra (multiple, relative amplitude).
pub fn render(
    notes: &[(f64, f64)],
    amplitude: f64,
    harmonics: &[(f64, f64)],
    sr: u32,
) -> AudioBuffer {
    let segs = |mult: f64, rel: f64| -> Vec<ToneSegment> {
        notes
            .iter()
            .map(|&(f, d)| ToneSegment::new(f * mult, d, amplitude * rel))
            .collect()
    };
    let mut out = gen_tone(&segs(1.0, 1.0), sr).unwrap();
    for &(mult, rel) in harmonics {
        out = out.mix(&gen_tone(&segs(mult, rel), sr).unwrap()).unwrap();
    }
    out
}

/// Per-note rounding can overshoot by a few samples; the result is cut to `total`.
pub fn melody(seed: u64, total: f64, sr: u32) -> AudioBuffer {
    let a = render(&melody_notes(seed, total), 0.9, &[], sr);
    a.slice_samples(0, (total * sr as f64).round() as usize)
}

pub fn white_noise(seed: u64, seconds: f64, amplitude: f64, sr: u32) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (seconds * sr as f64).round() as usize;
    AudioBuffer::new(
        (0..n)
            .map(|_| rng.gen_range(-amplitude..=amplitude))
            .collect(),
        sr,
    )
    .unwrap()
}

/// Query slice starting on the hop grid closest to `start` seconds.
pub fn frame_aligned_slice(
    audio: &AudioBuffer,
    start: f64,
    seconds: f64,
    hop: usize,
) -> (AudioBuffer, usize) {
    let sr = audio.sample_rate() as f64;
    let frame = (start * sr / hop as f64).round() as usize;
    let lo = frame * hop;
    let hi = lo + (seconds * sr).round() as usize;
    (audio.slice_samples(lo, hi), frame)
}

/// Direct O(N^2) DFT magnitudes of `frame` at the requested bins.
pub fn direct_dft_magnitudes(frame: &[f64], bins: impl IntoIterator<Item = usize>) -> Vec<f64> {
    let n = frame.len();
    bins.into_iter()
        .map(|k| {
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for (t, &x) in frame.iter().enumerate() {
                // reduce k*t mod n before the trig call to keep the angle small
                let phase = 2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                re += x * phase.cos();
                im -= x * phase.sin();
            }
            re.hypot(im)
        })
        .collect()
}

pub fn random_frame(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Local minima of `errors` (strictly below both neighbours, or edge points below their one neighbour).
pub fn local_minima(errors: &[f64]) -> Vec<usize> {
    (0..errors.len())
        .filter(|&i| {
            let left = i == 0 || errors[i] < errors[i - 1];
            let right = i + 1 == errors.len() || errors[i] < errors[i + 1];
            left && right
        })
        .collect()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
