//! Operating-point selection and per-class breakdowns by class prior.

use std::fmt;
use std::path::Path;

use super::{Curve, OperatingPoint};
use crate::corpus::write_text;
use crate::error::{Error, Result};
use crate::fmt::sig9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Dprime,
    Lwlrap,
}

impl Metric {
    fn mean(self, p: &OperatingPoint) -> f64 {
        match self {
            Metric::Dprime => p.dprime.mean,
            Metric::Lwlrap => p.lwlrap.mean,
        }
    }
}

/// The point with the highest seed-mean metric; ties go to the smaller
/// fraction. Points where every seed failed are skipped.
pub fn best_operating_point(curve: &Curve, metric: Metric) -> Result<&OperatingPoint> {
    let mut best: Option<&OperatingPoint> = None;
    for p in curve.points.iter().filter(|p| !p.all_failed()) {
        let m = metric.mean(p);
        if m.is_nan() {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                m > metric.mean(b)
                    || (m == metric.mean(b) && p.fraction_percent < b.fraction_percent)
            }
        };
        if better {
            best = Some(p);
        }
    }
    best.ok_or_else(|| {
        Error::Evaluation(format!(
            "no usable operating point on the {} {} curve",
            curve.size, curve.capacity
        ))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PriorGroup {
    Small,
    Medium,
    Large,
}

impl PriorGroup {
    pub const LARGE_ABOVE: f64 = 0.01;
    pub const SMALL_BELOW: f64 = 0.00325;

    /// Boundary values fall in `Medium`.
    pub fn of(prior: f64) -> PriorGroup {
        if prior > Self::LARGE_ABOVE {
            PriorGroup::Large
        } else if prior < Self::SMALL_BELOW {
            PriorGroup::Small
        } else {
            PriorGroup::Medium
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PriorGroup::Small => "small",
            PriorGroup::Medium => "medium",
            PriorGroup::Large => "large",
        }
    }
}

impl fmt::Display for PriorGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassRow {
    pub class: usize,
    pub prior: f64,
    pub group: PriorGroup,
    pub baseline_dprime: Option<f64>,
    pub best_dprime: Option<f64>,
    pub baseline_lwlrap: Option<f64>,
    pub best_lwlrap: Option<f64>,
}

impl ClassRow {
    pub fn dprime_delta(&self) -> Option<f64> {
        Some(self.best_dprime? - self.baseline_dprime?)
    }

    pub fn lwlrap_delta(&self) -> Option<f64> {
        Some(self.best_lwlrap? - self.baseline_lwlrap?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupStats {
    pub group: PriorGroup,
    pub n_classes: usize,
    /// Classes whose lwlrap strictly improved over the baseline.
    pub n_improved: usize,
    /// `100 · n_improved / n_classes`; NaN for an empty group.
    pub percent_improved: f64,
    /// Mean lwlrap gain over the improved classes; NaN if none improved.
    pub mean_improvement: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub baseline_percent: f64,
    pub best_percent: f64,
    pub rows: Vec<ClassRow>,
    pub groups: Vec<GroupStats>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

pub fn per_class_report(
    baseline: &OperatingPoint,
    best: &OperatingPoint,
    priors: &[f64],
) -> Result<GroupReport> {
    let c = priors.len();
    for (name, len) in [
        ("baseline d'", baseline.per_class_dprime.len()),
        ("best d'", best.per_class_dprime.len()),
        ("baseline lwlrap", baseline.per_class_lwlrap.len()),
        ("best lwlrap", best.per_class_lwlrap.len()),
    ] {
        if len != c {
            return Err(Error::Shape(format!("{name} has {len} classes, priors have {c}")));
        }
    }
    let rows: Vec<ClassRow> = (0..c)
        .map(|k| ClassRow {
            class: k,
            prior: priors[k],
            group: PriorGroup::of(priors[k]),
            baseline_dprime: baseline.per_class_dprime[k],
            best_dprime: best.per_class_dprime[k],
            baseline_lwlrap: baseline.per_class_lwlrap[k],
            best_lwlrap: best.per_class_lwlrap[k],
        })
        .collect();
    let groups = [PriorGroup::Large, PriorGroup::Medium, PriorGroup::Small]
        .into_iter()
        .map(|g| {
            let members: Vec<&ClassRow> = rows.iter().filter(|r| r.group == g).collect();
            let gains: Vec<f64> = members
                .iter()
                .filter_map(|r| r.lwlrap_delta())
                .filter(|d| *d > 0.0)
                .collect();
            GroupStats {
                group: g,
                n_classes: members.len(),
                n_improved: gains.len(),
                percent_improved: 100.0 * gains.len() as f64 / members.len() as f64,
                mean_improvement: mean(gains.into_iter()),
            }
        })
        .collect();
    Ok(GroupReport {
        baseline_percent: baseline.fraction_percent,
        best_percent: best.fraction_percent,
        rows,
        groups,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), sig9)
}

/// Writes `groups.csv` and the per-class scatter table `classes.csv`.
pub fn write_group_report(report: &GroupReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut g = String::from("group,n_classes,n_improved,percent_improved,mean_improvement\n");
    for s in &report.groups {
        g.push_str(&format!(
            "{},{},{},{},{}\n",
            s.group,
            s.n_classes,
            s.n_improved,
            sig9(s.percent_improved),
            sig9(s.mean_improvement)
        ));
    }
    write_text(&dir.join("groups.csv"), g)?;
    let mut c = String::from(
        "class_id,prior,group,baseline_dprime,best_dprime,dprime_delta,baseline_lwlrap,best_lwlrap,lwlrap_delta\n",
    );
    for r in &report.rows {
        c.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.class,
            sig9(r.prior),
            r.group,
            opt(r.baseline_dprime),
            opt(r.best_dprime),
            opt(r.dprime_delta()),
            opt(r.baseline_lwlrap),
            opt(r.best_lwlrap),
            opt(r.lwlrap_delta()),
        ));
    }
    write_text(&dir.join("classes.csv"), c)
}
