mod common;

use common::{frame_aligned_slice, local_minima, median, melody, white_noise, HOP, SR};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specmatch::matcher::{rescale_index, sad_error, window_count};
use specmatch::spectro::{MatrixView, SpectrogramMatrix};
use specmatch::{
    error_curve, match_segment, stft_magnitude, MatchConfig, SpectroConfig, TimeMapping,
};

fn spectrogram(audio: &specmatch::AudioBuffer) -> SpectrogramMatrix {
    stft_magnitude(audio, &SpectroConfig::default()).unwrap()
}

fn view(d: &[f64], rows: usize, cols: usize) -> MatrixView<'_> {
    MatrixView::new(d, rows, cols).unwrap()
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<f64> {
    (0..rows * cols).map(|_| rng.gen_range(0.0..10.0)).collect()
}

#[test]
fn sad_matches_nested_loop_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let a = random_matrix(&mut rng, 8, 8);
    let b = random_matrix(&mut rng, 8, 8);
    let mut brute = 0.0;
    for r in 0..8 {
        for c in 0..8 {
            brute += (a[r * 8 + c] - b[r * 8 + c]).abs();
        }
    }
    let got = sad_error(
        MatrixView::new(&a, 8, 8).unwrap(),
        MatrixView::new(&b, 8, 8).unwrap(),
    )
    .unwrap();
    assert!((got - brute).abs() <= 1e-9 * brute);
}

/// 22 s melody at a rate where 10 s falls on the hop grid.
#[test]
fn exact_start_finds_ten_seconds_exactly() {
    let sr = 25600;
    let full_audio = melody(11, 22.0, sr);
    let full = spectrogram(&full_audio);
    let start_frame = 10 * sr as usize / HOP;
    assert_eq!(start_frame * HOP, 10 * sr as usize);
    let query_frames = SpectroConfig::default().frame_count(2 * sr as usize);
    let query = full.slice_frames(start_frame, query_frames);

    let r = match_segment(&full, &query, &MatchConfig::default()).unwrap();
    assert_eq!(r.best_time, 10.0);
    assert!(r.best_error <= 1e-4);
    assert_eq!(r.best_index, start_frame + 1);

    // same result when the query comes from the audio rather than the matrix
    let audio_query = full_audio.slice_samples(10 * sr as usize, 12 * sr as usize);
    let r2 = match_segment(&full, &spectrogram(&audio_query), &MatchConfig::default()).unwrap();
    assert_eq!(r2.best_time, 10.0);
    assert!(r2.best_error <= 1e-4);
}

#[test]
fn paper_rescale_shifts_minimum_to_eleven_seconds() {
    let sr = 25600;
    let full = spectrogram(&melody(11, 22.0, sr));
    let query_frames = SpectroConfig::default().frame_count(2 * sr as usize);
    let query = full.slice_frames(10 * sr as usize / HOP, query_frames);
    let cfg = MatchConfig::default().with_time_mapping(TimeMapping::PaperRescale);
    let curve = error_curve(&full, &query, &cfg).unwrap();
    let r = specmatch::MatchResult::from_curve(&curve).unwrap();
    // true start t appears at t * D / (D - S) = 10 * 22 / 20
    let one_step = 22.0 / (curve.len() - 1) as f64;
    assert!((r.best_time - 11.0).abs() <= one_step, "{}", r.best_time);
    assert_eq!(curve.points[0].time, 0.0);
    assert_eq!(curve.points.last().unwrap().time, 22.0);
}

#[test]
fn step_ten_curve_has_expected_length_and_axis() {
    let full = spectrogram(&melody(2, 6.0, SR));
    let query = full.slice_frames(100, 60);
    let cfg = MatchConfig::new(10).unwrap();
    let curve = error_curve(&full, &query, &cfg).unwrap();
    assert_eq!(curve.len(), (full.frames() - 60) / 10 + 1);
    assert_eq!(curve.segment_frames, 60);
    assert_eq!(curve.points[1].time, 10.0 * 512.0 / 44100.0);
    let r = specmatch::MatchResult::from_curve(&curve).unwrap();
    assert_eq!(r.best_index, 11);
    assert_eq!(r.best_error, 0.0);
}

#[test]
fn white_noise_query_gives_flat_curve() {
    let full = spectrogram(&melody(5, 12.0, SR));
    let query = spectrogram(&white_noise(1, 1.0, 0.5, SR));
    let r = match_segment(&full, &query, &MatchConfig::default()).unwrap();
    assert!(r.contrast >= 0.7, "contrast {}", r.contrast);
}

#[test]
fn two_motif_placements_give_two_minima() {
    let filler_a = melody(21, 2.0, SR);
    let motif = common::render(
        &[(659.25, 0.5), (587.33, 0.25), (783.99, 0.5), (698.46, 0.75)],
        0.9,
        &[],
        SR,
    );
    let filler_b = melody(22, 8.0, SR);
    let filler_c = melody(23, 4.0, SR);
    let full_audio = filler_a
        .concat(&motif)
        .unwrap()
        .concat(&filler_b)
        .unwrap()
        .concat(&motif)
        .unwrap()
        .concat(&filler_c)
        .unwrap();
    let full = spectrogram(&full_audio);
    let query = spectrogram(&motif);
    let curve = error_curve(&full, &query, &MatchConfig::default()).unwrap();
    let errors: Vec<f64> = curve.errors().collect();
    let med = median(&errors);
    let minima = local_minima(&errors);
    for offset in [2.0, 12.0] {
        let hit = minima
            .iter()
            .any(|&i| (curve.points[i].time - offset).abs() <= 0.2 && errors[i] < 0.5 * med);
        assert!(hit, "no minimum near {offset}");
    }
}

#[test]
fn no_normalize_changes_only_magnitudes() {
    let full = spectrogram(&melody(4, 5.0, SR));
    let query = full.slice_frames(40, 50);
    let a = error_curve(&full, &query, &MatchConfig::default()).unwrap();
    let b = error_curve(&full, &query, &MatchConfig::default().with_normalize(false)).unwrap();
    assert_eq!(a.len(), b.len());
    for (p, q) in a.points.iter().zip(&b.points) {
        assert_eq!(p.time, q.time);
    }
    assert_ne!(a.points[0].error, b.points[0].error);
}

#[test]
fn aligned_query_from_audio_at_44100() {
    let full_audio = melody(9, 8.0, SR);
    let (query, frame) = frame_aligned_slice(&full_audio, 3.0, 2.0, HOP);
    let r = match_segment(
        &spectrogram(&full_audio),
        &spectrogram(&query),
        &MatchConfig::default(),
    )
    .unwrap();
    assert_eq!(r.best_index, frame + 1);
    assert_eq!(r.best_error, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sad_is_a_metric(seed in any::<u64>(), rows in 1usize..6, cols in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, rows, cols);
        let b = random_matrix(&mut rng, rows, cols);
        let c = random_matrix(&mut rng, rows, cols);
        let v = |d| view(d, rows, cols);
        let ab = sad_error(v(&a), v(&b)).unwrap();
        let ba = sad_error(v(&b), v(&a)).unwrap();
        let bc = sad_error(v(&b), v(&c)).unwrap();
        let ac = sad_error(v(&a), v(&c)).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(sad_error(v(&a), v(&a)).unwrap(), 0.0);
        prop_assert_eq!(ab, ba);
        prop_assert!(ac <= ab + bc + 1e-9);
    }

    #[test]
    fn curve_length_formula(full_frames in 1usize..60, seg in 1usize..60, step in 1usize..12) {
        prop_assume!(seg <= full_frames);
        let bins = 3;
        let cfg = SpectroConfig::new(6, 1, bins).unwrap();
        let data: Vec<f64> = (0..full_frames * bins).map(|i| (i % 7) as f64).collect();
        let full = SpectrogramMatrix::from_parts(data, full_frames, cfg, 100, full_frames + 5).unwrap();
        let query = full.slice_frames(0, seg);
        for mapping in [TimeMapping::ExactStart, TimeMapping::PaperRescale] {
            let mc = MatchConfig::new(step).unwrap().with_time_mapping(mapping);
            let curve = error_curve(&full, &query, &mc).unwrap();
            prop_assert_eq!(curve.len(), (full_frames - seg) / step + 1);
            prop_assert_eq!(curve.len(), window_count(full_frames, seg, step));
            prop_assert!(curve.points.windows(2).all(|w| w[0].time < w[1].time));
            prop_assert!(curve.errors().all(|e| e >= 0.0));
            if mapping == TimeMapping::PaperRescale {
                prop_assert_eq!(curve.points[0].time, 0.0);
                if curve.len() > 1 {
                    prop_assert_eq!(curve.points.last().unwrap().time, full.source_duration_seconds());
                }
            }
        }
    }

    #[test]
    fn rescale_endpoints(n in 2usize..5000, duration in 0.1f64..1000.0) {
        prop_assert_eq!(rescale_index(1, n, duration).unwrap(), 0.0);
        prop_assert_eq!(rescale_index(n, n, duration).unwrap(), duration);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn best_index_invariant_under_gain(
        seed in 0u64..1000,
        c1 in 0.25f64..4.0,
        c2 in 0.25f64..4.0,
        start in 5usize..120,
    ) {
        let full = spectrogram(&melody(seed, 4.0, SR));
        prop_assume!(full.max() >= 100.0);
        let query = full.slice_frames(start, 40);
        let cfg = MatchConfig::default();
        let base = match_segment(&full, &query, &cfg).unwrap();
        let scaled = match_segment(&full.scaled(c1), &query.scaled(c2), &cfg).unwrap();
        prop_assert_eq!(base.best_index, scaled.best_index);
    }
}
