use maskset::corpus::{Clip, Corpus, LabelState, LabelTable, Split};
use maskset::metrics::lwlrap;
use maskset::netcore::{predict_clip, train, Capacity, ModelParams, TrainConfig};
use maskset::relabel::{score_split, score_trainset};
use maskset::sweep::{
    emit_curves, read_curve_csv, CorpusSize, Curve, OperatingPoint, SeedOutcome, SweepResult, DEFAULT_GRID,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two classes on opposite sides of the plane x0 = x1, four patches a clip.
fn separable_corpus() -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 40;
    let ids: Vec<String> = (0..n).map(|i| format!("t{i:02}")).collect();
    let mut labels = LabelTable::new(ids.clone(), 2, LabelState::ImplicitNegative).unwrap();
    let mut clips = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        let c = i % 2;
        labels.set(i, c, LabelState::ExplicitPositive);
        labels.set(i, 1 - c, LabelState::ExplicitNegative);
        let mut data = Vec::new();
        for _ in 0..4 {
            let (hi, lo) = (rng.random_range(1.0..2.0f32), rng.random_range(0.0..0.5f32));
            data.extend(if c == 0 { [hi, lo] } else { [lo, hi] });
        }
        clips.push(Clip::new(id.clone(), Split::Train, 2, data).unwrap());
    }
    Corpus::new(clips, labels, None, None).unwrap()
}

#[test]
fn separable_toy_reaches_perfect_lwlrap() {
    let corpus = separable_corpus();
    let cfg = TrainConfig { learning_rate: 0.05, epochs: 50, batch_size: 8, seed: 1, ..Default::default() };
    for cap in [Capacity::Linear, Capacity::Hidden] {
        let model = train(&corpus, &corpus.labels, &cfg, cap).unwrap();
        let scores = score_split(&model, &corpus, Split::Train).unwrap();
        let r = lwlrap(&scores, &corpus.labels).unwrap();
        assert_eq!(r.macro_mean, 1.0, "{cap}");
    }
}

#[test]
fn zero_teacher_scores_one_half() {
    let corpus = separable_corpus();
    for cap in [Capacity::Linear, Capacity::Hidden] {
        let zero = ModelParams::zeros(cap, 2, 2, 5);
        let s = score_trainset(&zero, &corpus).unwrap();
        assert!(s.values().iter().all(|&v| v == 0.5));
    }
}

#[test]
fn single_clip_scores_equal_predict_clip() {
    let full = separable_corpus();
    let one = Corpus::new(vec![full.clips[3].clone()], full.labels.select_rows(&[3]), None, None).unwrap();
    let cfg = TrainConfig { epochs: 2, seed: 9, ..Default::default() };
    let model = train(&full, &full.labels, &cfg, Capacity::Hidden).unwrap();
    let s = score_trainset(&model, &one).unwrap();
    assert_eq!(s.n_clips(), 1);
    assert_eq!(s.row(0), predict_clip(&model, &one.clips[0]).unwrap().as_slice());
}

#[test]
fn default_grid_gives_one_csv_row_per_point() {
    let points = DEFAULT_GRID
        .iter()
        .map(|&f| {
            OperatingPoint::from_outcomes(
                f,
                vec![SeedOutcome { seed: 1, eval: None, flags: Default::default(), error: Some("skipped".into()) }],
            )
        })
        .collect();
    let result = SweepResult {
        curves: vec![Curve { size: CorpusSize::Large, capacity: Capacity::Linear, points }],
    };
    let dir = tempfile::tempdir().unwrap();
    emit_curves(&result, dir.path()).unwrap();
    let rows = read_curve_csv(&dir.path().join("large_linear.csv")).unwrap();
    assert_eq!(rows.len(), 18);
    for (row, f) in rows.iter().zip(DEFAULT_GRID) {
        assert_eq!(row[0], f);
        assert!(row[1..].iter().all(|v| v.is_nan()));
    }
}
