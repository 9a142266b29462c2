use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use maskset::config::RunConfig;
use maskset::corpus::{generate_synthetic, load_corpus, load_labels, save_corpus, save_labels, Corpus, Split};
use maskset::metrics::{evaluate, write_eval_report};
use maskset::netcore::{load_checkpoint, save_checkpoint, train, Capacity};
use maskset::relabel::{
    enhance, export_audit, load_scores, save_scores, save_thresholds, score_split, EnhancedLabelSet,
};
use maskset::sweep::{
    best_operating_point, load_sweep, per_class_report, run_sweep, write_group_report, CorpusSize,
    Metric,
};
use maskset::Error;

const RESULTS_ENV: &str = "MASKSET_RESULTS_DIR";
const RESOLVED: &str = "resolved.cfg";

/// Teacher-student missing-label pipeline.
#[derive(Parser, Debug)]
#[command(name = "maskset", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Config file of `section.key = value` lines.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus with injected missing labels.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Output corpus directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Generator seed (overrides synth.seed).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a model on the corpus labels, or on enhanced labels with --mask.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        /// Output directory for model.mpm.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Enhanced labels file; its ignored cells are masked out of the loss.
        #[arg(long, value_name = "FILE")]
        mask: Option<PathBuf>,
        /// Training seed (overrides train.seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Model capacity (overrides train.capacity).
        #[arg(long, value_name = "linear|hidden")]
        capacity: Option<Capacity>,
    },
    /// Score one split of the corpus with a trained model.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Output directory for scores.csv.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value = "train", value_name = "train|eval")]
        split: String,
    },
    /// Compute per-class thresholds and write the enhanced labels.
    Enhance {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        /// Teacher scores on the train split.
        #[arg(long, value_name = "FILE")]
        scores: PathBuf,
        /// Percentage of implicit negatives to ignore per class.
        #[arg(long, value_name = "F")]
        fraction: f64,
        /// Output directory for labels.csv and thresholds.csv.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Teacher name recorded with the labels.
        #[arg(long, default_value = "teacher")]
        teacher: String,
    },
    /// Evaluate a model on the eval split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Output directory for eval.csv and summary.txt.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Run the discard-fraction sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        /// Results root; defaults to $MASKSET_RESULTS_DIR, then ./results.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Comma-separated discard percentages; must include 0.
        #[arg(long, value_name = "CSV")]
        grid: Option<String>,
        /// Comma-separated seeds.
        #[arg(long, value_name = "CSV", conflicts_with = "seed")]
        seeds: Option<String>,
        /// Single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated capacities.
        #[arg(long, value_name = "linear|hidden")]
        capacity: Option<String>,
        #[arg(long, value_name = "N")]
        workers: Option<usize>,
        /// Also sweep a train subsample at this ratio.
        #[arg(long, value_name = "R")]
        subsample: Option<f64>,
    },
    /// List the highest-scoring ignored cells per class for review.
    Audit {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        /// Enhanced labels file.
        #[arg(long, value_name = "FILE")]
        labels: PathBuf,
        /// Teacher scores the labels were derived from.
        #[arg(long, value_name = "FILE")]
        scores: PathBuf,
        /// Output directory for audit.csv.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value_t = 20, value_name = "K")]
        top_k: usize,
    },
    /// Per-class improvement grouped by class prior, baseline vs. best point.
    Report {
        #[command(flatten)]
        common: Common,
        /// Sweep results root.
        #[arg(long, value_name = "DIR")]
        results: PathBuf,
        #[arg(long, value_name = "DIR")]
        corpus: PathBuf,
        /// Output directory for groups.csv and classes.csv.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value = "large", value_name = "large|small")]
        size: String,
        #[arg(long, default_value = "linear", value_name = "linear|hidden")]
        capacity: Capacity,
        /// Metric used to pick the best point.
        #[arg(long, default_value = "lwlrap", value_name = "lwlrap|dprime")]
        metric: String,
    },
}

fn resolve(common: &Common, overrides: &[(&str, Option<String>)]) -> maskset::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_file(p).map_err(|e| match e {
            Error::Config { .. } => e,
            other => Error::Config { field: p.display().to_string(), reason: other.to_string() },
        })?,
        None => RunConfig::default(),
    };
    for (k, v) in overrides {
        if let Some(v) = v {
            cfg.set(k, v)?;
        }
    }
    Ok(cfg)
}

fn prepare_out(dir: &Path, cfg: &RunConfig) -> maskset::Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    fs::write(dir.join(RESOLVED), cfg.to_text()).map_err(|e| Error::Io {
        path: dir.join(RESOLVED),
        source: e,
    })
}

fn injected_cells(corpus: &Corpus) -> Option<HashSet<(String, usize)>> {
    let ids = corpus.labels.clip_ids();
    corpus
        .injection_log
        .as_ref()
        .map(|log| log.iter().map(|c| (ids[c.row].clone(), c.class)).collect())
}

fn run(command: Command) -> maskset::Result<ExitCode> {
    match command {
        Command::Synth { common, out, seed } => {
            let cfg = resolve(&common, &[("synth.seed", seed.map(|s| s.to_string()))])?;
            let corpus = generate_synthetic(&cfg.synth)?;
            prepare_out(&out, &cfg)?;
            save_corpus(&corpus, &out)?;
        }
        Command::Train { common, corpus, out, mask, seed, capacity } => {
            let cfg = resolve(
                &common,
                &[
                    ("train.seed", seed.map(|s| s.to_string())),
                    ("train.capacity", capacity.map(|c| c.to_string())),
                ],
            )?;
            let corpus = load_corpus(&corpus)?;
            let labels = match &mask {
                Some(p) => load_labels(p, corpus.labels.clip_ids(), corpus.n_classes())?,
                None => corpus.labels.clone(),
            };
            let model = train(&corpus, &labels, &cfg.train, cfg.capacity)?;
            prepare_out(&out, &cfg)?;
            let meta = [("seed".to_string(), cfg.train.seed.to_string())];
            save_checkpoint(&model, &out.join("model.mpm"), &meta)?;
        }
        Command::Score { common, corpus, model, out, split } => {
            let cfg = resolve(&common, &[])?;
            let split = Split::parse(&split)
                .ok_or_else(|| Error::Config { field: "split".into(), reason: format!("`{split}` is not train or eval") })?;
            let corpus = load_corpus(&corpus)?;
            let scores = score_split(&load_checkpoint(&model)?, &corpus, split)?;
            prepare_out(&out, &cfg)?;
            save_scores(&scores, &out.join("scores.csv"))?;
        }
        Command::Enhance { common, corpus, scores, fraction, out, teacher } => {
            let cfg = resolve(&common, &[])?;
            if !(0.0..=100.0).contains(&fraction) {
                return Err(Error::Config { field: "fraction".into(), reason: format!("{fraction}% not in [0, 100]") });
            }
            let corpus = load_corpus(&corpus)?;
            let scores = load_scores(&scores)?;
            let (thresholds, enhanced) = enhance(&corpus.labels, &scores, fraction / 100.0, &teacher)?;
            prepare_out(&out, &cfg)?;
            save_labels(&enhanced.labels, &out.join("labels.csv"))?;
            save_thresholds(&thresholds, &out.join("thresholds.csv"))?;
        }
        Command::Eval { common, corpus, model, out } => {
            let cfg = resolve(&common, &[])?;
            let corpus = load_corpus(&corpus)?;
            let scores = score_split(&load_checkpoint(&model)?, &corpus, Split::Eval)?;
            let result = evaluate(&scores, &corpus.labels)?;
            prepare_out(&out, &cfg)?;
            write_eval_report(&result, &out.join("eval.csv"), &out.join("summary.txt"))?;
            println!("macro_dprime={:.6} macro_lwlrap={:.6}", result.macro_dprime, result.macro_lwlrap);
        }
        Command::Sweep { common, corpus, out, grid, seeds, seed, capacity, workers, subsample } => {
            let cfg = resolve(
                &common,
                &[
                    ("sweep.grid", grid),
                    ("sweep.seeds", seeds.or(seed.map(|s| s.to_string()))),
                    ("sweep.capacities", capacity),
                    ("sweep.workers", workers.map(|w| w.to_string())),
                    ("sweep.subsample", subsample.map(|r| r.to_string())),
                    ("sweep.sizes", subsample.map(|_| "large,small".to_string())),
                ],
            )?;
            let root = out
                .or_else(|| std::env::var_os(RESULTS_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("results"));
            let corpus = load_corpus(&corpus)?;
            prepare_out(&root, &cfg)?;
            let mut sweep_cfg = cfg.sweep.clone();
            sweep_cfg.train = cfg.train.clone();
            let result = run_sweep(&corpus, &sweep_cfg, Some(&root))?;
            for curve in &result.curves {
                for p in &curve.points {
                    println!(
                        "{} {} {:>6}%  d'={:.4}  lwlrap={:.4}",
                        curve.size, curve.capacity, p.fraction_percent, p.dprime.mean, p.lwlrap.mean
                    );
                }
            }
            let failed = result.n_failed();
            if failed > 0 {
                eprintln!("{failed} sweep point(s) failed; see the `failed` markers under {}", root.display());
                return Ok(ExitCode::from(1));
            }
        }
        Command::Audit { common, corpus, labels, scores, out, top_k } => {
            let cfg = resolve(&common, &[])?;
            let corpus = load_corpus(&corpus)?;
            let enhanced = EnhancedLabelSet {
                labels: load_labels(&labels, corpus.labels.clip_ids(), corpus.n_classes())?,
                fraction: f64::NAN,
                teacher: String::new(),
            };
            let scores = load_scores(&scores)?;
            prepare_out(&out, &cfg)?;
            export_audit(&enhanced, &scores, top_k, injected_cells(&corpus).as_ref(), &out.join("audit.csv"))?;
        }
        Command::Report { common, results, corpus, out, size, capacity, metric } => {
            let cfg = resolve(&common, &[])?;
            let size: CorpusSize = size.parse()?;
            let metric = match metric.as_str() {
                "lwlrap" => Metric::Lwlrap,
                "dprime" => Metric::Dprime,
                m => return Err(Error::Config { field: "metric".into(), reason: format!("`{m}` is not lwlrap or dprime") }),
            };
            let corpus = load_corpus(&corpus)?;
            let sweep = load_sweep(&results)?;
            let curve = sweep.curve(size, capacity).ok_or_else(|| {
                Error::Evaluation(format!("no {size} {capacity} curve under {}", results.display()))
            })?;
            let baseline = curve
                .baseline()
                .ok_or_else(|| Error::Evaluation("curve has no 0% baseline point".into()))?;
            let best = best_operating_point(curve, metric)?;
            let report = per_class_report(baseline, best, &corpus.class_priors)?;
            prepare_out(&out, &cfg)?;
            write_group_report(&report, &out)?;
            println!("best fraction {}%", best.fraction_percent);
            for g in &report.groups {
                println!(
                    "{:>6}: {}/{} classes improved, mean gain {:.4}",
                    g.group, g.n_improved, g.n_classes, g.mean_improvement
                );
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
