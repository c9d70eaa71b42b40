use proptest::prelude::*;
use shortphd::detector::{
    classify, detection_probability, insert_off_topic, insertion_config, normal_cdf, score_phd, score_short_phd,
    ClassStats, DetectorError, FailureKind, Label, OffTopicSet, ShortPhdOptions,
};
use shortphd::embedding::{FileDirectoryProvider, SyntheticDouble};
use shortphd::phd::EstimatorConfig;

fn words(n: usize, tag: &str) -> String {
    (0..n).map(|i| format!("{tag}{i}")).collect::<Vec<_>>().join(" ")
}

fn double(location: &str) -> SyntheticDouble {
    SyntheticDouble::parse(location, "test-double", None).unwrap()
}

fn quick() -> EstimatorConfig {
    EstimatorConfig { outer_restarts: 3, ..EstimatorConfig::default() }
}

#[test]
fn every_builtin_piece_contributes() {
    let provider = double("cube:3:16");
    let text = words(60, "w");
    let oci = OffTopicSet::builtin();
    let s = score_short_phd(&text, &oci, &provider, &quick(), ShortPhdOptions::default()).unwrap();
    assert_eq!(s.per_insertion.len(), 12);
    assert!(s.failures.is_empty());
    let pieces: Vec<usize> = s.per_insertion.iter().map(|p| p.piece).collect();
    assert_eq!(pieces, (0..12).collect::<Vec<_>>());
    let mean = s.per_insertion.iter().map(|p| p.dimension).sum::<f64>() / 12.0;
    assert!((s.score - mean).abs() < 1e-12);
}

#[test]
fn each_insertion_is_the_phd_of_the_concatenation() {
    let provider = double("cube:2:8");
    let text = words(50, "t");
    let oci = OffTopicSet::builtin().truncated(4).unwrap();
    let s = score_short_phd(&text, &oci, &provider, &quick(), ShortPhdOptions::default()).unwrap();
    for (score, piece) in s.per_insertion.iter().zip(oci.pieces()) {
        let joined = insert_off_topic(piece, &text).unwrap();
        assert_eq!(joined, format!("{piece}\n{text}"));
        let direct = score_phd(&joined, &provider, &insertion_config(&quick(), piece)).unwrap();
        assert_eq!(score.dimension, direct);
    }
}

#[test]
fn repeated_piece_repeats_its_dimension() {
    let provider = double("cube:3:16");
    let p = words(40, "p");
    let q = words(40, "q");
    let oci = OffTopicSet::new(vec![p.clone(), q, p], "t").unwrap();
    let s = score_short_phd(&words(30, "x"), &oci, &provider, &quick(), ShortPhdOptions::default()).unwrap();
    assert_eq!(s.per_insertion[0].dimension, s.per_insertion[2].dimension);
    assert_ne!(s.per_insertion[0].dimension, s.per_insertion[1].dimension);
}

#[test]
fn square_double_scores_near_two() {
    let provider = double("cube:2:16");
    let text = words(1000, "s");
    let s = score_short_phd(&text, &OffTopicSet::builtin(), &provider, &quick(), ShortPhdOptions { with_baseline: true })
        .unwrap();
    assert!((s.score - 2.0).abs() < 0.25, "{}", s.score);
    let baseline = s.baseline_phd.unwrap();
    assert_eq!(baseline, score_phd(&text, &provider, &quick()).unwrap());
    assert!((baseline - 2.0).abs() < 0.25, "{baseline}");
}

#[test]
fn short_pieces_are_skipped_and_recorded() {
    let provider = double("cube:2:8");
    // 10 words of input: only pieces of 32+ words reach a usable cloud.
    let oci = OffTopicSet::builtin();
    let s = score_short_phd(&words(10, "z"), &oci, &provider, &quick(), ShortPhdOptions::default()).unwrap();
    assert!(!s.per_insertion.is_empty() && !s.failures.is_empty());
    assert_eq!(s.per_insertion.len() + s.failures.len(), 12);
    assert!(s.failures.iter().all(|f| f.kind == FailureKind::TooShort));
    let mean = s.per_insertion.iter().map(|p| p.dimension).sum::<f64>() / s.per_insertion.len() as f64;
    assert!((s.score - mean).abs() < 1e-12);
}

#[test]
fn all_failures_surface() {
    let provider = double("cube:2:8");
    let oci = OffTopicSet::new(vec!["a b c".into(), "d e".into()], "t").unwrap();
    let err = score_short_phd("x y", &oci, &provider, &quick(), ShortPhdOptions::default()).unwrap_err();
    assert!(matches!(&err, DetectorError::AllInsertionsFailed(f) if f.len() == 2));
    assert!(err.is_too_short());

    let dir = tempfile::tempdir().unwrap();
    let missing = FileDirectoryProvider::new(dir.path(), "m", None);
    let err = score_short_phd(&words(50, "y"), &oci, &missing, &quick(), ShortPhdOptions::default()).unwrap_err();
    assert!(err.is_provider_error() && !err.is_too_short());

    assert_eq!(
        score_short_phd("", &oci, &provider, &quick(), ShortPhdOptions::default()),
        Err(DetectorError::EmptyText)
    );
}

#[test]
fn insertion_scores_do_not_depend_on_thread_count() {
    let provider = double("sphere:2:12");
    let text = words(45, "r");
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            score_short_phd(&text, &OffTopicSet::builtin(), &provider, &quick(), ShortPhdOptions::default()).unwrap()
        })
    };
    assert_eq!(run(1), run(6));
}

/// Composite Simpson integral of the standard normal density from 0 to x.
fn cdf_oracle(x: f64) -> f64 {
    let steps = 20_000;
    let h = x / steps as f64;
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut acc = pdf(0.0) + pdf(x);
    for i in 1..steps {
        acc += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 + acc * h / 3.0
}

#[test]
fn cdf_matches_numerical_integral() {
    for x in [-4.0, -2.5, -1.0, -0.3, 0.0, 0.5, 0.79, 1.2, 2.0, 3.7] {
        assert!((normal_cdf(x) - cdf_oracle(x)).abs() < 1e-10, "{x}");
    }
}

#[test]
fn table_statistics_reproduce_published_probabilities() {
    // (human mean, human std, machine mean, machine std, published value)
    let cases = [
        (10.17, 1.49, 8.84, 0.79, 0.78),
        (10.70, 1.01, 8.93, 1.54, 0.83),
        (10.26, 0.79, 9.23, 0.67, 0.84),
        (10.81, 0.85, 9.23, 1.00, 0.88),
    ];
    for (mh, sh, mm, sm, published) in cases {
        let p = detection_probability(&ClassStats::new(mh, sh, 1), &ClassStats::new(mm, sm, 1)).unwrap();
        let z = (mh - mm) / (sh * sh + sm * sm).sqrt();
        assert!((p - cdf_oracle(z)).abs() < 1e-10);
        assert!((p - published).abs() <= 0.01, "{p} vs {published}");
    }
}

proptest! {
    #[test]
    fn cdf_symmetry(x in -8.0f64..8.0) {
        prop_assert!((normal_cdf(x) + normal_cdf(-x) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn probability_monotone(
        mh in 5.0f64..15.0, mm in 5.0f64..15.0, sh in 0.1f64..3.0, sm in 0.1f64..3.0, step in 0.01f64..1.0,
    ) {
        let p = |mh, sh, mm, sm| {
            detection_probability(&ClassStats::new(mh, sh, 1), &ClassStats::new(mm, sm, 1)).unwrap()
        };
        let base = p(mh, sh, mm, sm);
        prop_assert!((0.0..=1.0).contains(&base));
        prop_assert!(p(mh + step, sh, mm, sm) >= base);
        prop_assert!(p(mh, sh, mm + step, sm) <= base);
        if mh > mm {
            prop_assert!(p(mh, sh + step, mm, sm) <= base);
            prop_assert!(p(mh, sh, mm, sm + step) <= base);
            // Strict once Φ is away from its rounding to 1.
            if mh - mm > 0.05 && base < 0.999 {
                prop_assert!(p(mh, sh + step, mm, sm) < base);
                prop_assert!(p(mh, sh, mm, sm + step) < base);
            }
        }
    }

    #[test]
    fn decision_monotone(score in -10.0f64..30.0, bump in 0.0f64..5.0, threshold in 0.0f64..20.0) {
        if classify(score, threshold).label == Label::HumanWritten {
            prop_assert_eq!(classify(score + bump, threshold).label, Label::HumanWritten);
        }
    }
}
