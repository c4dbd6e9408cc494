use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use bugtriage::corpus::{load_events, write_events};
use bugtriage::metrics::{compare_policies, sweep_alpha, write_sweep_csv};
use bugtriage::pipeline::{prepare, train, Models, Prepared};
use bugtriage::simulator::{write_daily_csv, write_outcomes, RunMeta};
use bugtriage::solver::{solve, Variant};
use bugtriage::synth::{generate, SynthParams};
use bugtriage::{AssignmentInstance, BugRecord, Day, MetricsReport, PipelineConfig, PolicyKind, SimOutput, Workbench};

/// Replays a bug history day by day under different triage policies.
#[derive(Parser, Debug)]
#[command(name = "bugtriage", version)]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    command: Command,
}

/// Every flag can also be set through the matching `BUGTRIAGE_*` variable.
#[derive(Args, Debug)]
struct Opts {
    /// JSON pipeline config; flags override its fields.
    #[arg(long, global = true, env = "BUGTRIAGE_CONFIG")]
    config: Option<PathBuf>,
    /// Bug history, one JSON record per line.
    #[arg(long, global = true, env = "BUGTRIAGE_DATA")]
    data: Option<PathBuf>,
    /// Last day of the training phase.
    #[arg(long, global = true, env = "BUGTRIAGE_BOUNDARY", allow_negative_numbers = true)]
    boundary: Option<Day>,
    #[arg(long, global = true, env = "BUGTRIAGE_POLICY")]
    policy: Option<PolicyKind>,
    /// Suitability weight of the combined score.
    #[arg(long, global = true, env = "BUGTRIAGE_ALPHA")]
    alpha: Option<f64>,
    #[arg(long, global = true, env = "BUGTRIAGE_SEED")]
    seed: Option<u64>,
    /// Capacity ceiling in days; derived from training data when absent.
    #[arg(long = "L", global = true, env = "BUGTRIAGE_L")]
    horizon: Option<f64>,
    /// Output directory (or file, for `generate`).
    #[arg(long, global = true, env = "BUGTRIAGE_OUT", default_value = "out")]
    out: PathBuf,
    /// Candidate topic counts, comma separated.
    #[arg(long, global = true, env = "BUGTRIAGE_TOPICS", value_delimiter = ',')]
    topics: Option<Vec<usize>>,
    /// SVM regularization constant.
    #[arg(long = "C", global = true, env = "BUGTRIAGE_C")]
    svm_c: Option<f64>,
    /// Reuse artifacts written by `train` instead of retraining.
    #[arg(long, global = true, env = "BUGTRIAGE_MODELS")]
    models: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Schema-check a bug history.
    Validate {
        /// Defaults to --data.
        file: Option<PathBuf>,
    },
    /// Clean the history and write the kept records and a summary.
    Prepare,
    /// Fit the vocabulary, classifier, topic model and cost matrix.
    Train,
    /// Replay one policy.
    Simulate,
    /// Replay every policy and write the comparison table.
    Report,
    /// Replay one policy over a range of alpha values.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
        alphas: Vec<f64>,
    },
    /// Solve a standalone assignment instance.
    Solve {
        instance: PathBuf,
        #[arg(long, default_value = "dabt", value_parser = parse_variant)]
        variant: Variant,
    },
    /// Write a synthetic bug history.
    Generate {
        #[arg(long)]
        bugs: Option<usize>,
    },
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    match s.to_ascii_lowercase().as_str() {
        "dabt" => Ok(Variant::Dabt),
        "rabt" => Ok(Variant::Rabt),
        _ => Err(format!("unknown variant {s:?} (expected dabt or rabt)")),
    }
}

impl Opts {
    fn pipeline_config(&self) -> Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => {
                let Some(boundary_day) = self.boundary else {
                    bail!("--boundary is required without --config");
                };
                PipelineConfig {
                    boundary_day,
                    ..Default::default()
                }
            }
        };
        if let Some(b) = self.boundary {
            config.boundary_day = b;
        }
        if let Some(p) = self.policy {
            config.policy = p;
        }
        if let Some(a) = self.alpha {
            config.alpha = a;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if self.horizon.is_some() {
            config.horizon = self.horizon;
        }
        if let Some(t) = &self.topics {
            config.topic_grid = t.clone();
        }
        if let Some(c) = self.svm_c {
            config.svm_c = c;
        }
        config.validate()?;
        Ok(config)
    }

    fn records(&self) -> Result<Vec<BugRecord>> {
        let Some(path) = &self.data else {
            bail!("--data is required");
        };
        Ok(load_events(path)?)
    }

    fn workbench(&self, config: &PipelineConfig) -> Result<Workbench> {
        let records = self.records()?;
        match &self.models {
            None => Ok(Workbench::build(&records, config)?),
            Some(dir) => {
                let prepared = prepare(&records, config)?;
                let models = Models::load(dir).with_context(|| format!("loading models from {}", dir.display()))?;
                if models.developers != prepared.cleaned.summary.active_developers {
                    bail!("models in {} were trained on a different developer set", dir.display());
                }
                Ok(Workbench::from_parts(&records, prepared, models)?)
            }
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RunSummary<'a> {
    meta: &'a RunMeta,
    report: &'a MetricsReport,
}

fn write_run(dir: &Path, run: &SimOutput, report: &MetricsReport) -> Result<()> {
    let name = run.meta.policy.name();
    let mut out = create(&dir.join(format!("{name}_assignments.jsonl")))?;
    write_outcomes(&run.outcomes, &mut out)?;
    out.flush()?;
    let mut out = create(&dir.join(format!("{name}_daily.csv")))?;
    write_daily_csv(&run.samples, &run.meta.developers, &mut out)?;
    out.flush()?;
    write_json(
        &dir.join(format!("{name}_metrics.json")),
        &RunSummary {
            meta: &run.meta,
            report,
        },
    )
}

fn write_prepared(dir: &Path, prepared: &Prepared) -> Result<()> {
    let cleaned = &prepared.cleaned;
    let mut out = create(&dir.join("cleaned.jsonl"))?;
    write_events(&cleaned.kept, &mut out)?;
    out.flush()?;
    write_json(&dir.join("dataset_summary.json"), &cleaned.summary)?;
    write_json(&dir.join("developers.json"), &cleaned.developers)?;
    let mut out = create(&dir.join("cleaning_log.csv"))?;
    cleaned.summary.write_cleaning_log(&mut out)?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let opts = &cli.opts;
    match cli.command {
        Command::Validate { file } => {
            let Some(path) = file.or_else(|| opts.data.clone()) else {
                bail!("validate needs a file");
            };
            let records = load_events(&path)?;
            let first = records.iter().map(|r| r.reported_at).min().unwrap_or(0);
            let last = records.iter().map(bugtriage::corpus::last_known_day).max().unwrap_or(0);
            println!("{}: {} records, days {first}..={last}", path.display(), records.len());
        }
        Command::Prepare => {
            let config = opts.pipeline_config()?;
            let prepared = prepare(&opts.records()?, &config)?;
            write_prepared(&opts.out, &prepared)?;
            for s in &prepared.cleaned.summary.steps {
                println!("{:<24} {:>6} (train {}, test {})", s.step, s.kept, s.training, s.testing);
            }
            println!("horizon {} days", prepared.horizon);
        }
        Command::Train => {
            let config = opts.pipeline_config()?;
            let prepared = prepare(&opts.records()?, &config)?;
            let models = train(&prepared, &config)?;
            write_prepared(&opts.out, &prepared)?;
            models.save(&opts.out)?;
            println!(
                "{} developers, {} terms, {} topics",
                models.developers.len(),
                models.vocabulary.len(),
                models.topics.k
            );
        }
        Command::Simulate => {
            let config = opts.pipeline_config()?;
            let bench = opts.workbench(&config)?;
            let run = bench.simulate(config.policy, config.alpha, config.precedence_mode)?;
            let report = bench.report(&run);
            write_run(&opts.out, &run, &report)?;
            println!(
                "{} alpha={}: {} assigned, {:.2}% overdue, {:.2} mean fixing days",
                config.policy, config.alpha, report.n_assigned, report.pct_overdue, report.mean_fixing_days
            );
        }
        Command::Report => {
            let config = opts.pipeline_config()?;
            let bench = opts.workbench(&config)?;
            let mut reports = Vec::new();
            for policy in PolicyKind::ALL {
                let run = bench.simulate(policy, config.alpha, config.precedence_mode)?;
                let report = bench.report(&run);
                write_run(&opts.out, &run, &report)?;
                reports.push((policy.name().to_string(), report));
            }
            let table = compare_policies(&reports);
            let mut out = create(&opts.out.join("report.csv"))?;
            table.write_csv(&mut out)?;
            out.flush()?;
            let text = table.to_text();
            fs::write(opts.out.join("report.txt"), &text)?;
            print!("{text}");
        }
        Command::Sweep { alphas } => {
            let config = opts.pipeline_config()?;
            let bench = opts.workbench(&config)?;
            let points = sweep_alpha(&alphas, |alpha| {
                let run = bench.simulate(config.policy, alpha, config.precedence_mode)?;
                Ok(bench.report(&run))
            })?;
            let mut out = create(&opts.out.join("sweep.csv"))?;
            write_sweep_csv(&points, &mut out)?;
            out.flush()?;
            for p in &points {
                println!("alpha {:.2}: accuracy {:.2}%, overdue {:.2}%", p.alpha, p.accuracy_pct, p.pct_overdue);
            }
        }
        Command::Solve { instance, variant } => {
            let text = fs::read_to_string(&instance).with_context(|| format!("reading {}", instance.display()))?;
            let instance: AssignmentInstance =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", instance.display()))?;
            let solution = solve(&instance, variant)?;
            for a in &solution.assignments {
                println!("bug {} -> developer {}", a.bug_id, a.dev_id);
            }
            println!("objective {:?}", solution.objective_value);
            println!("nodes {}", solution.node_count);
        }
        Command::Generate { bugs } => {
            let defaults = SynthParams::default();
            let params = SynthParams {
                seed: opts.seed.unwrap_or(defaults.seed),
                n_bugs: bugs.unwrap_or(defaults.n_bugs),
                ..defaults
            };
            let records = generate(&params);
            let mut out = create(&opts.out)?;
            write_events(&records, &mut out)?;
            out.flush()?;
            println!(
                "{} records to {} (training phase ends on day {})",
                records.len(),
                opts.out.display(),
                params.boundary_day()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
