use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;

use cftrack_core::eval::{
    aggregate_by_attribute, eval_sequence, load_dataset, load_sequence, mean_curves, read_results,
    write_attributes, write_precision_curve, write_results, write_success_curve, write_summary,
    SummaryRow,
};
use cftrack_core::features::ColorNameTable;
use cftrack_core::{run_frames, BoundingBox, EvalCurves, FrameRecord, GateKind, Sequence, TrackerConfig, Variant};

#[derive(Parser)]
#[command(name = "cftrack", version, about = "Correlation-filter tracker and OPE benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track one sequence and write its per-frame result file.
    Track {
        /// Sequence directory (img/ plus groundtruth_rect.txt).
        #[arg(long)]
        seq: PathBuf,
        /// JSON config; omitted fields take the defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_variant)]
        variant: Option<Variant>,
        #[arg(long)]
        out: PathBuf,
        /// Start from the first ground-truth box (the default).
        #[arg(long, conflicts_with = "init")]
        gt_init: bool,
        /// Start from an explicit 0-based "x,y,w,h" box.
        #[arg(long, value_parser = parse_box)]
        init: Option<BoundingBox>,
    },
    /// One-pass evaluation over every sequence of a dataset.
    Bench {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_delimiter = ',', value_parser = parse_variant, default_value = "MDRCF")]
        variants: Vec<Variant>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Run each variant once per confidence gate (psmd, psr, apce).
        #[arg(long, value_delimiter = ',', value_parser = parse_gate)]
        gates: Vec<GateKind>,
        #[arg(long)]
        psr_threshold: Option<f64>,
        #[arg(long)]
        apce_threshold: Option<f64>,
        /// Score existing result files with a matching config hash instead of tracking.
        #[arg(long)]
        reuse: bool,
    },
    /// Write the built-in color-name table in the binary table format.
    CnTable {
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse()
        .map_err(|_| format!("unknown variant {s:?}; valid variants: {}", Variant::names().join(", ")))
}

fn parse_gate(s: &str) -> Result<GateKind, String> {
    s.parse().map_err(|e: cftrack_core::Error| e.to_string())
}

fn parse_box(s: &str) -> Result<BoundingBox, String> {
    let v: Vec<f64> = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("not a number: {t:?}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, w, h] if w > 0.0 && h > 0.0 => Ok(BoundingBox::new(x, y, w, h)),
        _ => Err("expected x,y,w,h with positive size".into()),
    }
}

fn load_config(path: Option<&Path>) -> anyhow::Result<TrackerConfig> {
    match path {
        Some(p) => TrackerConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(TrackerConfig::default()),
    }
}

fn track(
    seq_dir: &Path,
    config: Option<&Path>,
    variant: Option<Variant>,
    out: &Path,
    init: Option<BoundingBox>,
) -> anyhow::Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(v) = variant {
        cfg.variant = v;
    }
    cfg.validate()?;
    let seq = load_sequence(seq_dir).with_context(|| format!("loading {}", seq_dir.display()))?;
    let start = match init {
        Some(b) => b,
        None => seq.initial_box()?,
    };
    let records = run_frames(seq.images(), start, &cfg)?;
    write_results(out, &records, &cfg.hash())?;
    let preds: Vec<BoundingBox> = records.iter().map(|r| r.bbox).collect();
    match eval_sequence(&preds, &seq.ground_truth) {
        Ok(c) => println!(
            "{} {}: {} frames, precision@20 {:.4}, AUC {:.4}",
            seq.name,
            cfg.variant,
            records.len(),
            c.precision_at_20,
            c.auc
        ),
        Err(_) => println!("{} {}: {} frames", seq.name, cfg.variant, records.len()),
    }
    Ok(())
}

struct Job<'a> {
    label: String,
    config: &'a TrackerConfig,
    sequence: &'a Sequence,
}

struct BenchArgs {
    dataset: PathBuf,
    variants: Vec<Variant>,
    out: PathBuf,
    config: Option<PathBuf>,
    jobs: Option<usize>,
    gates: Vec<GateKind>,
    psr_threshold: Option<f64>,
    apce_threshold: Option<f64>,
    reuse: bool,
}

fn run_job(job: &Job<'_>, out: &Path, reuse: bool) -> anyhow::Result<Vec<FrameRecord>> {
    let path = out.join(&job.label).join(format!("{}.csv", job.sequence.name));
    let hash = job.config.hash();
    if reuse && path.is_file() {
        let stored = read_results(&path, Some(&hash))?;
        if stored.hash_warning.is_none() && stored.records.len() == job.sequence.len() {
            info!("{} {}: reusing {}", job.label, job.sequence.name, path.display());
            return Ok(stored.records);
        }
        warn!("{}: stale results, tracking again", path.display());
    }
    info!("{} {}: tracking {} frames", job.label, job.sequence.name, job.sequence.len());
    let records = run_frames(job.sequence.images(), job.sequence.initial_box()?, job.config)
        .with_context(|| format!("{} on {}", job.label, job.sequence.name))?;
    write_results(&path, &records, &hash)?;
    Ok(records)
}

fn bench(args: BenchArgs) -> anyhow::Result<()> {
    let base = load_config(args.config.as_deref())?;
    let sequences = load_dataset(&args.dataset)
        .with_context(|| format!("loading dataset {}", args.dataset.display()))?;
    if args.variants.is_empty() {
        bail!("no variants given");
    }

    let mut configs: Vec<(String, TrackerConfig)> = Vec::new();
    for v in &args.variants {
        let mut cfg = TrackerConfig {
            variant: *v,
            ..base.clone()
        };
        if let Some(t) = args.psr_threshold {
            cfg.psr_threshold = t;
        }
        if let Some(t) = args.apce_threshold {
            cfg.apce_threshold = t;
        }
        if args.gates.is_empty() {
            configs.push((v.name().to_string(), cfg));
        } else {
            for g in &args.gates {
                let gated = TrackerConfig {
                    gate: (*g).into(),
                    ..cfg.clone()
                };
                configs.push((format!("{}+{}", v.name(), g.name()), gated));
            }
        }
    }
    for (_, cfg) in &configs {
        cfg.validate()?;
    }

    let jobs: Vec<Job<'_>> = configs
        .iter()
        .flat_map(|(label, cfg)| {
            sequences.iter().map(move |s| Job {
                label: label.clone(),
                config: cfg,
                sequence: s,
            })
        })
        .collect();
    let threads = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let results: Vec<anyhow::Result<Vec<FrameRecord>>> =
        pool.install(|| jobs.par_iter().map(|j| run_job(j, &args.out, args.reuse)).collect());

    let mut summary = Vec::new();
    let mut attributes = Vec::new();
    let mut per_sequence = Vec::new();
    for (ci, (label, _)) in configs.iter().enumerate() {
        let mut curves: Vec<EvalCurves> = Vec::with_capacity(sequences.len());
        let mut frames = 0;
        for (si, seq) in sequences.iter().enumerate() {
            let records = results[ci * sequences.len() + si]
                .as_ref()
                .map_err(|e| anyhow::anyhow!("{e:#}"))?;
            let preds: Vec<BoundingBox> = records.iter().map(|r| r.bbox).collect();
            let c = eval_sequence(&preds, &seq.ground_truth)
                .with_context(|| format!("scoring {} on {}", label, seq.name))?;
            frames += seq.ground_truth.iter().filter(|g| g.is_some()).count();
            per_sequence.push(vec![
                label.clone(),
                seq.name.clone(),
                c.precision_at_20.to_string(),
                c.success_at_half.to_string(),
                c.auc.to_string(),
            ]);
            curves.push(c);
        }
        let mean = mean_curves(&curves.iter().collect::<Vec<_>>())?;
        let dir = args.out.join(label);
        write_precision_curve(&dir.join("precision_curve.csv"), &mean)?;
        write_success_curve(&dir.join("success_curve.csv"), &mean)?;
        attributes.push((label.clone(), aggregate_by_attribute(&curves, &sequences)?));
        println!(
            "{label}: {} sequences, precision@20 {:.4}, success@0.5 {:.4}, AUC {:.4}",
            sequences.len(),
            mean.precision_at_20,
            mean.success_at_half,
            mean.auc
        );
        summary.push(SummaryRow {
            tracker: label.clone(),
            sequences: sequences.len(),
            frames,
            curves: mean,
        });
    }
    write_summary(&args.out.join("summary.csv"), &summary)?;
    write_attributes(&args.out.join("attributes.csv"), &attributes)?;
    write_sequence_table(&args.out.join("sequences.csv"), &per_sequence)?;
    Ok(())
}

fn write_sequence_table(path: &Path, rows: &[Vec<String>]) -> anyhow::Result<()> {
    let mut text = String::from("tracker,sequence,precision_at_20,success_at_0.5,auc\n");
    for r in rows {
        text.push_str(&r.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Track {
            seq,
            config,
            variant,
            out,
            gt_init: _,
            init,
        } => track(&seq, config.as_deref(), variant, &out, init),
        Command::Bench {
            dataset,
            variants,
            out,
            config,
            jobs,
            gates,
            psr_threshold,
            apce_threshold,
            reuse,
        } => bench(BenchArgs {
            dataset,
            variants,
            out,
            config,
            jobs,
            gates,
            psr_threshold,
            apce_threshold,
            reuse,
        }),
        Command::CnTable { out } => ColorNameTable::builtin()
            .write(&out)
            .with_context(|| format!("writing {}", out.display())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
