use std::collections::HashSet;

use maskset::corpus::{class_priors, Clip, Corpus, LabelState, LabelTable, Split};
use maskset::metrics::{dprime, dprime_per_class, lwlrap};
use maskset::netcore::Capacity;
use maskset::relabel::{discard_count, enhance, ScoreMatrix};
use maskset::sweep::{best_operating_point, CorpusSize, Curve, Metric, OperatingPoint, SeedOutcome, SeedStats};
use proptest::prelude::*;

const STATES: [LabelState; 4] = [
    LabelState::ExplicitPositive,
    LabelState::ExplicitNegative,
    LabelState::ImplicitNegative,
    LabelState::Ignored,
];

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("c{i:03}")).collect()
}

#[derive(Debug, Clone)]
struct Case {
    n: usize,
    c: usize,
    scores: Vec<f64>,
    states: Vec<usize>,
}

impl Case {
    fn scores(&self) -> ScoreMatrix {
        ScoreMatrix::new(ids(self.n), self.c, self.scores.clone()).unwrap()
    }

    fn labels(&self) -> LabelTable {
        let mut t = LabelTable::new(ids(self.n), self.c, LabelState::ImplicitNegative).unwrap();
        for (i, &s) in self.states.iter().enumerate() {
            t.set(i / self.c, i % self.c, STATES[s]);
        }
        t
    }
}

/// Scores come from a coarse grid so ties are common.
fn case(max_states: usize) -> impl Strategy<Value = Case> {
    (1usize..30, 1usize..6).prop_flat_map(move |(n, c)| {
        (
            prop::collection::vec((0u32..20).prop_map(|k| k as f64 / 20.0), n * c),
            prop::collection::vec(0..max_states, n * c),
        )
            .prop_map(move |(scores, states)| Case { n, c, scores, states })
    })
}

fn brute_auc(pos: &[f64], neg: &[f64]) -> Option<f64> {
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut twice = 0u64;
    for p in pos {
        for q in neg {
            twice += if p > q { 2 } else if p == q { 1 } else { 0 };
        }
    }
    Some(twice as f64 / (2 * pos.len() * neg.len()) as f64)
}

fn ignored(labels: &LabelTable) -> HashSet<(usize, usize)> {
    let mut out = HashSet::new();
    for r in 0..labels.n_clips() {
        for c in 0..labels.n_classes() {
            if labels.get(r, c) == LabelState::Ignored {
                out.insert((r, c));
            }
        }
    }
    out
}

fn point(fraction: f64, mean: f64) -> OperatingPoint {
    let mut p = OperatingPoint::from_outcomes(
        fraction,
        vec![SeedOutcome { seed: 1, eval: None, flags: Default::default(), error: Some("x".into()) }],
    );
    // Means are set directly; only the failure flag and the mean matter here.
    p.dprime = SeedStats { mean, min: mean, max: mean };
    p.lwlrap = SeedStats { mean, min: mean, max: mean };
    if !mean.is_nan() {
        p.outcomes[0].error = None;
        p.outcomes[0].eval = Some(maskset::metrics::EvalResult {
            per_class_dprime: vec![],
            macro_dprime: mean,
            per_class_lwlrap: vec![],
            macro_lwlrap: mean,
            pooled_lwlrap: mean,
            n_eval_pos: vec![],
            n_eval_neg: vec![],
            n_undefined_dprime: 0,
            n_skipped_clips: 0,
        });
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn flags_nest_and_match_counts(case in case(3), a in 0u32..=100, b in 0u32..=100) {
        let (lo, hi) = (a.min(b) as f64 / 100.0, a.max(b) as f64 / 100.0);
        let (s, l) = (case.scores(), case.labels());
        let (t_lo, e_lo) = enhance(&l, &s, lo, "t").unwrap();
        let (_, e_hi) = enhance(&l, &s, hi, "t").unwrap();
        let (f_lo, f_hi) = (ignored(&e_lo.labels), ignored(&e_hi.labels));
        prop_assert!(f_lo.is_subset(&f_hi));
        for c in 0..case.c {
            let n = (0..case.n).filter(|&r| l.get(r, c) == LabelState::ImplicitNegative).count();
            let flagged = f_lo.iter().filter(|&&(_, cc)| cc == c).count();
            prop_assert_eq!(t_lo.n_implicit[c], n);
            prop_assert!(flagged <= discard_count(lo, n));
            prop_assert_eq!(flagged, t_lo.counts[c]);
        }
        for r in 0..case.n {
            for c in 0..case.c {
                if l.get(r, c).is_explicit() {
                    prop_assert_eq!(e_hi.labels.get(r, c), l.get(r, c));
                }
            }
        }
    }

    #[test]
    fn dprime_matches_filter_then_pair_count(case in case(3)) {
        let (s, l) = (case.scores(), case.labels());
        let expected: Vec<Option<f64>> = (0..case.c)
            .map(|c| {
                let pick = |want| (0..case.n).filter(|&r| l.get(r, c) == want).map(|r| s.get(r, c)).collect::<Vec<_>>();
                brute_auc(&pick(LabelState::ExplicitPositive), &pick(LabelState::ExplicitNegative)).map(dprime)
            })
            .collect();
        match dprime_per_class(&s, &l) {
            Ok(d) => {
                for (got, want) in d.per_class.iter().zip(&expected) {
                    match (got, want) {
                        (Some(g), Some(w)) => prop_assert!((g - w).abs() < 1e-12),
                        (None, None) => {}
                        _ => prop_assert!(false, "definedness differs"),
                    }
                }
            }
            Err(_) => prop_assert!(expected.iter().all(Option::is_none)),
        }
    }

    #[test]
    fn class_permutation_permutes_per_class(case in case(3), rot in 0usize..6) {
        let k = rot % case.c;
        let perm: Vec<usize> = (0..case.c).map(|c| (c + k) % case.c).collect();
        let s = case.scores();
        let l = case.labels();
        let mut pv = vec![0.0; case.n * case.c];
        let mut pl = LabelTable::new(ids(case.n), case.c, LabelState::ImplicitNegative).unwrap();
        for r in 0..case.n {
            for c in 0..case.c {
                pv[r * case.c + perm[c]] = s.get(r, c);
                pl.set(r, perm[c], l.get(r, c));
            }
        }
        let ps = ScoreMatrix::new(ids(case.n), case.c, pv).unwrap();
        if let (Ok(a), Ok(b)) = (dprime_per_class(&s, &l), dprime_per_class(&ps, &pl)) {
            for c in 0..case.c {
                prop_assert_eq!(a.per_class[c], b.per_class[perm[c]]);
            }
            prop_assert!((a.macro_mean - b.macro_mean).abs() < 1e-12);
        }
        // Tie order depends on class index, so only tie-free cases keep lωlrap exact.
        let distinct = (0..case.n).all(|r| {
            let row = s.row(r);
            (0..case.c).all(|i| (i + 1..case.c).all(|j| row[i] != row[j]))
        });
        if distinct {
            if let (Ok(a), Ok(b)) = (lwlrap(&s, &l), lwlrap(&ps, &pl)) {
                for c in 0..case.c {
                    prop_assert_eq!(a.per_class[c], b.per_class[perm[c]]);
                }
                prop_assert!((a.macro_mean - b.macro_mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lwlrap_bounded_and_perfect_when_positives_lead(case in case(3)) {
        let (s, l) = (case.scores(), case.labels());
        if let Ok(r) = lwlrap(&s, &l) {
            prop_assert!((0.0..=1.0).contains(&r.macro_mean));
            prop_assert!((0.0..=1.0).contains(&r.label_weighted));
        }
        let lifted: Vec<f64> = case
            .scores
            .iter()
            .zip(&case.states)
            .map(|(&v, &st)| if st == 0 { 0.5 + 0.5 * v } else { 0.45 * v })
            .collect();
        let top = ScoreMatrix::new(ids(case.n), case.c, lifted).unwrap();
        if let Ok(r) = lwlrap(&top, &l) {
            prop_assert_eq!(r.macro_mean, 1.0);
            prop_assert_eq!(r.label_weighted, 1.0);
        }
    }

    #[test]
    fn dprime_antisymmetric(k in 0u32..=1024) {
        let a = k as f64 / 1024.0;
        prop_assert!((dprime(a) + dprime(1.0 - a)).abs() < 1e-9);
        prop_assert!(dprime(a).abs() <= dprime(1.0));
    }

    #[test]
    fn best_point_matches_linear_scan(means in prop::collection::vec(prop::option::of(0u8..5), 1..12)) {
        let points: Vec<OperatingPoint> = means
            .iter()
            .enumerate()
            .map(|(i, m)| point(i as f64 * 0.5, m.map_or(f64::NAN, |v| v as f64 / 4.0)))
            .collect();
        let curve = Curve { size: CorpusSize::Large, capacity: Capacity::Linear, points };
        let mut oracle: Option<(usize, u8)> = None;
        for (i, m) in means.iter().enumerate() {
            if let Some(v) = *m {
                if oracle.is_none_or(|(_, b)| v > b) {
                    oracle = Some((i, v));
                }
            }
        }
        for metric in [Metric::Dprime, Metric::Lwlrap] {
            match (best_operating_point(&curve, metric), oracle) {
                (Ok(p), Some((i, _))) => prop_assert_eq!(p.fraction_percent, i as f64 * 0.5),
                (Err(_), None) => {}
                (got, want) => prop_assert!(false, "got {:?}, want {:?}", got.map(|p| p.fraction_percent), want),
            }
        }
    }

    #[test]
    fn priors_match_brute_count(case in case(4)) {
        let l = case.labels();
        let clips = ids(case.n).into_iter().map(|id| Clip::new(id, Split::Train, 1, vec![0.0]).unwrap()).collect();
        let corpus = Corpus::new(clips, l.clone(), None, None).unwrap();
        let priors = class_priors(&corpus).unwrap();
        for c in 0..case.c {
            let k = case.states.iter().skip(c).step_by(case.c).filter(|&&s| s == 0).count();
            prop_assert_eq!(priors[c], k as f64 / case.n as f64);
        }
        prop_assert_eq!(&corpus.class_priors, &priors);
    }
}

#[test]
fn single_point_curve_is_its_own_best() {
    let curve = Curve { size: CorpusSize::Small, capacity: Capacity::Hidden, points: vec![point(0.0, 0.7)] };
    assert_eq!(best_operating_point(&curve, Metric::Dprime).unwrap().fraction_percent, 0.0);
}
