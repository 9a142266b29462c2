//! ROC AUC, d′ and lωlrap with per-class and macro aggregation.
//!
//! d′ only looks at explicitly rated clips of each class. lωlrap ranks the
//! classes of every clip and credits each explicit positive with the
//! precision of the ranking down to it; per-class values are then averaged
//! with equal weight across classes.

use std::f64::consts::SQRT_2;
use std::path::Path;

use crate::corpus::{LabelState, LabelTable};
use crate::error::{Error, Result};
use crate::fmt::sig9;
use crate::relabel::ScoreMatrix;

/// Clamp applied to the AUC before the probit transform.
pub const DPRIME_AUC_EPS: f64 = 1e-6;

/// Counts of positive-over-negative wins and ties, from sorted negatives.
pub fn auc_counts(pos: &[f64], neg: &[f64]) -> (u64, u64) {
    let mut sorted = neg.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut wins = 0u64;
    let mut ties = 0u64;
    for &p in pos {
        let below = sorted.partition_point(|&n| n < p);
        let at_or_below = sorted.partition_point(|&n| n <= p);
        wins += below as u64;
        ties += (at_or_below - below) as u64;
    }
    (wins, ties)
}

/// Mann–Whitney estimate of the ROC AUC: `(wins + ties / 2) / (|pos| |neg|)`.
/// `None` when either side is empty.
pub fn roc_auc(pos: &[f64], neg: &[f64]) -> Option<f64> {
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let (wins, ties) = auc_counts(pos, neg);
    Some((wins as f64 + 0.5 * ties as f64) / (pos.len() as f64 * neg.len() as f64))
}

fn poly(coeffs: &[f64; 8], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Inverse standard normal CDF (Wichura's AS241, double precision).
pub fn inv_norm_cdf(q: f64) -> Result<f64> {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        133.141_667_891_784_377_45,
        1_971.590_950_306_551_442_7,
        13_731.693_765_509_461_125,
        45_921.953_931_549_871_457,
        67_265.770_927_008_700_853,
        33_430.575_583_588_128_105,
        2_509.080_928_730_122_672_7,
    ];
    const B: [f64; 8] = [
        1.0,
        42.313_330_701_600_911_252,
        687.187_007_492_057_908_3,
        5_394.196_021_424_751_107_7,
        21_213.794_301_586_595_867,
        39_307.895_800_092_710_61,
        28_729.085_735_721_942_674,
        5_226.495_278_852_545_925,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        0.241_780_725_177_450_611_77,
        0.022_723_844_989_269_184_583_3,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        0.689_767_334_985_100_004_55,
        0.148_103_976_427_480_074_59,
        0.015_198_666_563_616_457_196_6,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        0.296_560_571_828_504_891_23,
        0.026_532_189_526_576_123_093,
        0.001_242_660_947_388_078_438_6,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        0.599_832_206_555_887_937_69,
        0.136_929_880_922_735_805_31,
        0.014_875_361_290_850_614_852_5,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];

    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("inverse normal CDF needs q in (0, 1), got {q}")));
    }
    let d = q - 0.5;
    if d.abs() <= 0.425 {
        let r = 0.180625 - d * d;
        return Ok(d * poly(&A, r) / poly(&B, r));
    }
    let tail = if d < 0.0 { q } else { 1.0 - q };
    let mut r = (-tail.ln()).sqrt();
    let z = if r <= 5.0 {
        r -= 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        poly(&E, r) / poly(&F, r)
    };
    Ok(if d < 0.0 { -z } else { z })
}

/// `√2 · Φ⁻¹(auc)`, with the AUC clamped to `[ε, 1 − ε]`.
pub fn dprime(auc: f64) -> f64 {
    let a = auc.clamp(DPRIME_AUC_EPS, 1.0 - DPRIME_AUC_EPS);
    SQRT_2 * inv_norm_cdf(a).expect("clamped AUC lies in (0, 1)")
}

/// Pairs each score row with its label row by clip id.
fn aligned_rows<'a>(
    scores: &'a ScoreMatrix,
    labels: &'a LabelTable,
) -> Result<Vec<(&'a [f64], &'a [LabelState])>> {
    if scores.n_classes() != labels.n_classes() {
        return Err(Error::Shape(format!(
            "scores have {} classes, labels {}",
            scores.n_classes(),
            labels.n_classes()
        )));
    }
    scores
        .clip_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let r = labels
                .row_of(id)
                .ok_or_else(|| Error::Shape(format!("no labels for scored clip `{id}`")))?;
            Ok((scores.row(i), labels.row(r)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DprimeResult {
    pub per_class: Vec<Option<f64>>,
    pub macro_mean: f64,
    pub n_pos: Vec<usize>,
    pub n_neg: Vec<usize>,
    pub n_undefined: usize,
}

/// Per-class d′ from explicitly rated clips only.
pub fn dprime_per_class(scores: &ScoreMatrix, labels: &LabelTable) -> Result<DprimeResult> {
    let rows = aligned_rows(scores, labels)?;
    let c_n = scores.n_classes();
    let mut per_class = Vec::with_capacity(c_n);
    let (mut n_pos, mut n_neg) = (Vec::with_capacity(c_n), Vec::with_capacity(c_n));
    for c in 0..c_n {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (s, l) in &rows {
            match l[c] {
                LabelState::ExplicitPositive => pos.push(s[c]),
                LabelState::ExplicitNegative => neg.push(s[c]),
                _ => {}
            }
        }
        n_pos.push(pos.len());
        n_neg.push(neg.len());
        per_class.push(roc_auc(&pos, &neg).map(dprime));
    }
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::Evaluation(
            "d′ is undefined for every class (no class has both explicit positives and explicit negatives)".into(),
        ));
    }
    let macro_mean = defined.iter().sum::<f64>() / defined.len() as f64;
    Ok(DprimeResult {
        n_undefined: c_n - defined.len(),
        per_class,
        macro_mean,
        n_pos,
        n_neg,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LwlrapResult {
    /// `None` for classes with no positive label in the evaluated clips.
    pub per_class: Vec<Option<f64>>,
    /// Unweighted mean over classes with a value.
    pub macro_mean: f64,
    /// Mean over every (clip, positive label) pair.
    pub label_weighted: f64,
    pub n_skipped_clips: usize,
}

/// Ranking precision for each positive class of one clip, as `(class,
/// precision)`. Classes are ranked by descending score, ties by ascending
/// class index.
pub fn clip_precisions(scores: &[f64], positive: &[bool]) -> Vec<(usize, f64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut out = Vec::new();
    for (rank0, &c) in order.iter().enumerate() {
        if positive[c] {
            hits += 1;
            out.push((c, hits as f64 / (rank0 + 1) as f64));
        }
    }
    out
}

pub fn lwlrap(scores: &ScoreMatrix, labels: &LabelTable) -> Result<LwlrapResult> {
    let rows = aligned_rows(scores, labels)?;
    let c_n = scores.n_classes();
    let mut sums = vec![0.0; c_n];
    let mut counts = vec![0usize; c_n];
    let mut skipped = 0;
    let mut positive = vec![false; c_n];
    for (s, l) in &rows {
        for (p, st) in positive.iter_mut().zip(l.iter()) {
            *p = *st == LabelState::ExplicitPositive;
        }
        if !positive.contains(&true) {
            skipped += 1;
            continue;
        }
        for (c, prec) in clip_precisions(s, &positive) {
            sums[c] += prec;
            counts[c] += 1;
        }
    }
    let per_class: Vec<Option<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| (n > 0).then(|| s / n as f64))
        .collect();
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    let total: usize = counts.iter().sum();
    if defined.is_empty() {
        return Err(Error::Evaluation("no evaluated clip has a positive label".into()));
    }
    Ok(LwlrapResult {
        macro_mean: defined.iter().sum::<f64>() / defined.len() as f64,
        label_weighted: sums.iter().sum::<f64>() / total as f64,
        per_class,
        n_skipped_clips: skipped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub per_class_dprime: Vec<Option<f64>>,
    pub macro_dprime: f64,
    pub per_class_lwlrap: Vec<Option<f64>>,
    pub macro_lwlrap: f64,
    pub pooled_lwlrap: f64,
    pub n_eval_pos: Vec<usize>,
    pub n_eval_neg: Vec<usize>,
    pub n_undefined_dprime: usize,
    pub n_skipped_clips: usize,
}

pub fn evaluate(scores: &ScoreMatrix, labels: &LabelTable) -> Result<EvalResult> {
    let d = dprime_per_class(scores, labels)?;
    let l = lwlrap(scores, labels)?;
    Ok(EvalResult {
        per_class_dprime: d.per_class,
        macro_dprime: d.macro_mean,
        per_class_lwlrap: l.per_class,
        macro_lwlrap: l.macro_mean,
        pooled_lwlrap: l.label_weighted,
        n_eval_pos: d.n_pos,
        n_eval_neg: d.n_neg,
        n_undefined_dprime: d.n_undefined,
        n_skipped_clips: l.n_skipped_clips,
    })
}

const REPORT_HEADER: &str = "class_id,n_pos,n_neg_explicit,dprime,lwlrap";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), sig9)
}

/// Writes the per-class CSV report (with a trailing `macro` row) and a
/// `key=value` summary next to it.
pub fn write_eval_report(result: &EvalResult, csv_path: &Path, summary_path: &Path) -> Result<()> {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for c in 0..result.per_class_dprime.len() {
        out.push_str(&format!(
            "{c},{},{},{},{}\n",
            result.n_eval_pos[c],
            result.n_eval_neg[c],
            opt(result.per_class_dprime[c]),
            opt(result.per_class_lwlrap[c]),
        ));
    }
    out.push_str(&format!(
        "macro,{},{},{},{}\n",
        result.n_eval_pos.iter().sum::<usize>(),
        result.n_eval_neg.iter().sum::<usize>(),
        sig9(result.macro_dprime),
        sig9(result.macro_lwlrap)
    ));
    crate::corpus::write_text(csv_path, &out)?;
    let summary = format!(
        "macro_dprime={}\nmacro_lwlrap={}\npooled_lwlrap={}\nn_classes={}\nn_undefined_dprime={}\nn_skipped_clips={}\n",
        sig9(result.macro_dprime),
        sig9(result.macro_lwlrap),
        sig9(result.pooled_lwlrap),
        result.per_class_dprime.len(),
        result.n_undefined_dprime,
        result.n_skipped_clips,
    );
    crate::corpus::write_text(summary_path, &summary)
}

/// Reads a report written by [`write_eval_report`].
pub fn read_eval_report(csv_path: &Path, summary_path: &Path) -> Result<EvalResult> {
    use crate::fmt::parse_opt;
    let text = crate::corpus::read_text_file(csv_path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == REPORT_HEADER => {}
        _ => return Err(Error::parse(csv_path, 1, "bad report header")),
    }
    let mut r = EvalResult {
        per_class_dprime: vec![],
        macro_dprime: f64::NAN,
        per_class_lwlrap: vec![],
        macro_lwlrap: f64::NAN,
        pooled_lwlrap: f64::NAN,
        n_eval_pos: vec![],
        n_eval_neg: vec![],
        n_undefined_dprime: 0,
        n_skipped_clips: 0,
    };
    for (i, line) in lines {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::parse(csv_path, i + 1, format!("malformed row `{line}`"));
        if f.len() != 5 {
            return Err(bad());
        }
        if f[0] == "macro" {
            r.macro_dprime = parse_opt(f[3]).ok_or_else(bad)?;
            r.macro_lwlrap = parse_opt(f[4]).ok_or_else(bad)?;
            continue;
        }
        r.n_eval_pos.push(f[1].parse().map_err(|_| bad())?);
        r.n_eval_neg.push(f[2].parse().map_err(|_| bad())?);
        r.per_class_dprime.push(parse_opt(f[3]));
        r.per_class_lwlrap.push(parse_opt(f[4]));
    }
    let summary = crate::config::read_key_values(summary_path)?;
    let get = |k: &str| -> Result<&str> {
        summary
            .iter()
            .find(|(key, _)| key == k)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::parse(summary_path, 1, format!("missing key `{k}`")))
    };
    r.pooled_lwlrap = parse_opt(get("pooled_lwlrap")?).unwrap_or(f64::NAN);
    r.n_undefined_dprime = get("n_undefined_dprime")?.parse().unwrap_or(0);
    r.n_skipped_clips = get("n_skipped_clips")?.parse().unwrap_or(0);
    Ok(r)
}
