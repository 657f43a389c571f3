use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qloop_core::adjudicator::{classify, verify, Taxonomy};
use qloop_core::episode::{Campaign, CampaignConfig, EpisodeEvent, EpisodeRecord, EpisodeSpec, Repository};
use qloop_core::prompt::Variant;
use qloop_core::registry::{bundled_instances, find, load_instances, validate, ProblemInstance, Tolerance};
use qloop_core::report::{self, Table, DEFAULT_TAIL_FRACTION};
use qloop_core::sandbox::{ExecutionResult, ExitStatus, ParseFailure};
use qloop_core::solvers::solve_reference;
use qloop_core::stats::{compare_turns, duration_report, SampleUnit};

const DEFAULT_OUT: &str = "qloop-out";

/// Generate-execute-verify loop for model-written quantum solver scripts.
#[derive(Debug, Parser)]
#[command(name = "qloop", version)]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check an instance file against the family schemas.
    Validate {
        /// Instance file; the bundled instances when omitted.
        #[arg(long)]
        instances: Option<PathBuf>,
    },
    /// Compute classical reference values.
    Solve {
        /// Instance file; the bundled instances when omitted.
        #[arg(long)]
        instances: Option<PathBuf>,
        /// Instance id to solve (repeatable); every instance when omitted.
        #[arg(long = "instance")]
        ids: Vec<String>,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Run a single episode of a campaign configuration.
    Episode {
        #[command(flatten)]
        campaign: CampaignArgs,
        /// Instance id.
        #[arg(long)]
        instance: String,
        /// Model id; the first configured model when omitted.
        #[arg(long)]
        model: Option<String>,
        #[arg(long, default_value = "standard")]
        variant: Variant,
        /// 1-based repetition index.
        #[arg(long, default_value_t = 1)]
        repetition: usize,
        /// Rerun even if a complete record exists.
        #[arg(long)]
        force: bool,
    },
    /// Run every planned episode of a campaign that is not yet complete.
    Campaign {
        #[command(flatten)]
        campaign: CampaignArgs,
    },
    /// Assign a failure cause to the streams of a failed run.
    Classify {
        /// File with the run's standard error.
        #[arg(long)]
        stderr: Option<PathBuf>,
        /// File with the run's standard output.
        #[arg(long)]
        stdout: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        exit_code: i32,
        /// The run hit its time limit.
        #[arg(long)]
        timed_out: bool,
        /// Taxonomy file; the bundled one when omitted.
        #[arg(long)]
        taxonomy: Option<PathBuf>,
    },
    /// Tables and plot data from an episode repository.
    Report {
        kind: ReportKind,
        /// Episode repository root.
        #[arg(long, default_value = "qloop-out/repo")]
        repository: PathBuf,
        /// Restrict to one campaign hash.
        #[arg(long)]
        campaign: Option<String>,
        /// Directory for CSV output.
        #[arg(long, default_value = "qloop-out/reports")]
        out: PathBuf,
        /// Turns reported by `success`, and the comparison turns of `stats`
        /// (the first against each later one).
        #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
        turns: Vec<usize>,
        /// Share of the least common failures shown as Other.
        #[arg(long, default_value_t = DEFAULT_TAIL_FRACTION)]
        tail: f64,
        /// Sample unit of the turn comparisons.
        #[arg(long, value_enum, default_value = "episode")]
        unit: Unit,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportKind {
    Success,
    Stats,
    Causes,
    Durations,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Unit {
    Episode,
    Instance,
}

/// Campaign config file plus command-line overrides.
#[derive(Debug, Args)]
struct CampaignArgs {
    /// Campaign configuration file.
    #[arg(long)]
    config: PathBuf,
    /// I: instances per family.
    #[arg(long)]
    instances_per_family: Option<usize>,
    /// R: repetitions per instance, model and variant.
    #[arg(long)]
    repetitions: Option<usize>,
    /// T: turn budget.
    #[arg(long)]
    turns: Option<usize>,
    /// Feedback variants to run (repeatable).
    #[arg(long = "variants")]
    variants: Vec<Variant>,
    /// Only run these model ids (repeatable).
    #[arg(long = "only-model")]
    only_models: Vec<String>,
    /// Parallel episodes.
    #[arg(long)]
    jobs: Option<usize>,
    /// Episode repository root.
    #[arg(long)]
    repository: Option<PathBuf>,
    /// Multiply every instance timeout.
    #[arg(long)]
    timeout_scale: Option<f64>,
}

impl CampaignArgs {
    fn load(&self) -> Result<CampaignConfig> {
        let mut c = CampaignConfig::load(&self.config)?;
        if c.repository == CampaignConfig::default().repository {
            c.repository = Path::new(DEFAULT_OUT).join("repo");
        }
        if let Some(v) = self.instances_per_family {
            c.instances_per_family = v;
        }
        if let Some(v) = self.repetitions {
            c.repetitions = v;
        }
        if let Some(v) = self.turns {
            c.turns = v;
        }
        if !self.variants.is_empty() {
            c.variants = self.variants.clone();
        }
        if !self.only_models.is_empty() {
            for id in &self.only_models {
                if !c.models.iter().any(|m| &m.id == id) {
                    bail!("model {id:?} is not in {}", self.config.display());
                }
            }
            c.models.retain(|m| self.only_models.contains(&m.id));
        }
        if let Some(v) = self.jobs {
            c.jobs = v;
        }
        if let Some(v) = &self.repository {
            c.repository = v.clone();
        }
        if let Some(v) = self.timeout_scale {
            c.runner.timeout_scale = v;
        }
        Ok(c)
    }
}

fn instances(path: Option<&Path>) -> Result<Vec<ProblemInstance>> {
    Ok(match path {
        Some(p) => load_instances(p)?,
        None => bundled_instances(),
    })
}

fn cmd_validate(path: Option<&Path>) -> Result<()> {
    let all = instances(path)?;
    let mut bad = 0;
    for inst in &all {
        let v = validate(inst);
        if v.is_empty() {
            println!("ok       {}", inst.id);
        } else {
            bad += 1;
            for x in v {
                println!("invalid  {}: {x}", inst.id);
            }
        }
    }
    if bad > 0 {
        bail!("{bad} of {} instances are invalid", all.len());
    }
    println!("{} instances valid", all.len());
    Ok(())
}

fn cmd_solve(path: Option<&Path>, ids: &[String], json: bool) -> Result<()> {
    let all = instances(path)?;
    let chosen: Vec<&ProblemInstance> = if ids.is_empty() {
        all.iter().collect()
    } else {
        ids.iter().map(|id| find(&all, id)).collect::<Result<_, _>>()?
    };
    for inst in chosen {
        let r = solve_reference(inst).with_context(|| format!("solving {}", inst.id))?;
        if json {
            println!("{}", serde_json::json!({ "instance": inst.id, "value": r.value, "meta": r.meta }));
        } else {
            let extra = [
                r.meta.n_qubits.map(|n| format!("{n} qubits")),
                r.meta.iterations.map(|n| format!("{n} iterations")),
            ]
            .into_iter()
            .flatten()
            .collect::<Vec<_>>()
            .join(", ");
            println!(
                "{:<24} {:>16.10}  [{}; {extra}; {:.3} s]",
                inst.id, r.value, r.meta.solver, r.meta.wall_time_s
            );
        }
    }
    Ok(())
}

fn describe(r: &EpisodeRecord) -> String {
    let outcome = if r.excluded() {
        format!("excluded after {} infrastructure errors", r.infrastructure_errors.len())
    } else if let Some(t) = r.success_turn {
        format!("success at turn {t}")
    } else {
        format!("no success in {} turns", r.turns.len())
    };
    format!("{} {} {} rep{}: {outcome}", r.instance_id, r.model_id, r.variant, r.repetition)
}

fn cmd_episode(args: &CampaignArgs, instance: &str, model: Option<&str>, variant: Variant, rep: usize, force: bool) -> Result<()> {
    let mut config = args.load()?;
    config.select = Some(vec![instance.to_string()]);
    config.instances_per_family = 1;
    config.variants = vec![variant];
    config.repetitions = config.repetitions.max(rep);
    if let Some(m) = model {
        if !config.models.iter().any(|c| c.id == m) {
            bail!("model {m:?} is not in {}", args.config.display());
        }
        config.models.retain(|c| c.id == m);
    } else {
        config.models.truncate(1);
    }
    let campaign = Campaign::prepare(config)?;
    let spec = EpisodeSpec { instance: 0, model: 0, variant, repetition: rep };
    let (path, record, ran) = campaign.run_one(&spec, force)?;
    if !ran {
        println!("already complete (use --force to rerun)");
    }
    println!("{}", describe(&record));
    for t in &record.turns {
        let cause = t.cause.as_ref().map_or("pass".to_string(), |c| match &c.matched_keyword {
            Some(k) => format!("{} ({k})", c.category),
            None => c.category.to_string(),
        });
        println!("  turn {:>2}: {cause}", t.turn);
    }
    println!("record: {}", path.display());
    Ok(())
}

fn cmd_campaign(args: &CampaignArgs) -> Result<()> {
    let config = args.load()?;
    let campaign = Campaign::prepare(config)?;
    let planned = campaign.plan().len();
    println!("campaign {} ({planned} episodes planned) in {}", campaign.hash(), campaign.directory().display());
    let done = AtomicUsize::new(0);
    let summary = campaign.run(&|e| {
        let n = done.fetch_add(1, Ordering::Relaxed) + 1;
        match e {
            EpisodeEvent::Skipped { .. } => log::debug!("[{n}/{planned}] skipped"),
            EpisodeEvent::Finished { dir, success_turn, status } => {
                log::info!("[{n}/{planned}] {} {status:?} success_turn={success_turn:?}", dir.display())
            }
            EpisodeEvent::Failed { dir, error } => log::error!("[{n}/{planned}] {}: {error}", dir.display()),
        }
    })?;
    println!(
        "{} new episodes, {} already complete, {} excluded",
        summary.new_episodes, summary.skipped, summary.invalid
    );
    let records = campaign.records()?;
    let ts: Vec<usize> = [1, 5, 10].into_iter().filter(|&t| t <= campaign.config.turns).collect();
    print!("{}", report::success_table(&records, &ts).to_text());
    if !summary.failed.is_empty() {
        for f in &summary.failed {
            eprintln!("failed: {f}");
        }
        bail!("{} episodes failed; rerun to resume", summary.failed.len());
    }
    Ok(())
}

fn read_opt(path: Option<&PathBuf>) -> Result<String> {
    path.map_or(Ok(String::new()), |p| fs::read_to_string(p).with_context(|| format!("reading {}", p.display())))
}

fn cmd_classify(
    stderr: Option<&PathBuf>,
    stdout: Option<&PathBuf>,
    exit_code: i32,
    timed_out: bool,
    taxonomy: Option<&Path>,
) -> Result<()> {
    let tax = match taxonomy {
        Some(p) => Taxonomy::load(p)?,
        None => Taxonomy::bundled(),
    };
    let exec = ExecutionResult {
        exit_status: if timed_out { ExitStatus::Killed(9) } else { ExitStatus::Code(exit_code) },
        stdout: read_opt(stdout)?,
        stderr: read_opt(stderr)?,
        duration_s: 0.0,
        timed_out,
    };
    // The verdict only needs to be a failure; its content does not affect the cause.
    let verdict = verify(Err(&ParseFailure::NoResultLine), 0.0, &Tolerance::default())?;
    let cause = classify(&tax, Some(&exec), &verdict)?;
    let entry = tax.entry(cause.category);
    println!(
        "{}\t{}\t{}",
        cause.category,
        cause.matched_keyword.as_deref().unwrap_or("-"),
        entry.map_or("", |e| e.explanation.as_str())
    );
    Ok(())
}

fn emit(out: &Path, name: &str, table: &Table) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(name);
    fs::write(&path, table.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_report(
    kind: ReportKind,
    repo: &Path,
    campaign: Option<&str>,
    out: &Path,
    turns: &[usize],
    tail: f64,
    unit: Unit,
) -> Result<()> {
    if !repo.is_dir() {
        bail!("repository {} does not exist", repo.display());
    }
    let root = match campaign {
        Some(h) => Repository::new(repo).campaign_dir(h),
        None => repo.to_path_buf(),
    };
    let records: Vec<EpisodeRecord> = Repository::load_all(&root)?.into_iter().map(|(_, r)| r).collect();
    if records.is_empty() {
        bail!("no episode records under {}", root.display());
    }
    match kind {
        ReportKind::Success => {
            let t = report::success_table(&records, turns);
            print!("{}", t.to_text());
            emit(out, "success.csv", &t)?;
            emit(out, "success_series.csv", &report::success_series(&records, turns))?;
        }
        ReportKind::Stats => {
            let Some((&first, rest)) = turns.split_first() else {
                bail!("--turns must name at least two turns");
            };
            if rest.is_empty() {
                bail!("--turns must name at least two turns");
            }
            let unit = match unit {
                Unit::Episode => SampleUnit::Episode,
                Unit::Instance => SampleUnit::Instance,
            };
            let mut all = qloop_core::stats::ComparisonTable::default();
            for &t in rest {
                let c = compare_turns(&records, first, t, unit)?;
                all.rows.extend(c.rows);
                all.notes.extend(c.notes);
            }
            print!("{}", report::comparison_table(&all).to_text());
            for n in &all.notes {
                println!("note: {n}");
            }
            emit(out, "stats.csv", &report::comparison_csv(&all.rows))?;
        }
        ReportKind::Causes => {
            let t = report::causes_table(&records, tail)?;
            print!("{}", t.to_text());
            emit(out, "causes.csv", &t)?;
            emit(out, "failure_histogram.csv", &report::failure_histogram(&records))?;
        }
        ReportKind::Durations => {
            let rows = duration_report(&records)?;
            print!("{}", report::duration_summary(&rows).to_text());
            emit(out, "durations.csv", &report::duration_series(&rows))?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Validate { instances } => cmd_validate(instances.as_deref()),
        Command::Solve { instances, ids, json } => cmd_solve(instances.as_deref(), ids, *json),
        Command::Episode { campaign, instance, model, variant, repetition, force } => {
            cmd_episode(campaign, instance, model.as_deref(), *variant, *repetition, *force)
        }
        Command::Campaign { campaign } => cmd_campaign(campaign),
        Command::Classify { stderr, stdout, exit_code, timed_out, taxonomy } => {
            cmd_classify(stderr.as_ref(), stdout.as_ref(), *exit_code, *timed_out, taxonomy.as_deref())
        }
        Command::Report { kind, repository, campaign, out, turns, tail, unit } => {
            cmd_report(*kind, repository, campaign.as_deref(), out, turns, *tail, *unit)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
