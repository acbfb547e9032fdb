use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bpre::config::{load_model, load_plan};
use bpre::harness::{Batch, Campaign, ExperimentPlan, ReportFormat, Section};
use bpre::inference::{confidence_interval, estimate_mu, CiMethod};
use bpre::stats::{ks_distance, standardize_increment, tail_ratio, StandardizedSample, TailSide};
use bpre::{EnvironmentModel, SimCaps};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

const SEED_VAR: &str = "BPRE_SEED";

#[derive(Parser)]
#[command(
    name = "bpre",
    version,
    about = "Branching processes in random environment: simulation, inference and Monte Carlo checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate replicates and write ln Z and S at generations n0 and n0+n as CSV.
    Simulate(SimulateArgs),
    /// KS distance of Z_{n0,n} to N(0,1).
    Ks(StatArgs),
    /// Empirical tail ratio P(Z_{n0,n} >= x) / (1 - Phi(x)), both tails.
    TailRatio(StatArgs),
    /// Moderate deviation scaling y(n,t) = ln P(Z_{n0,n}/a_n >= t) / a_n².
    Mdp(MdpArgs),
    /// Coverage of the confidence intervals for mu.
    Coverage(CampaignArgs),
    /// Harmonic and log moments of W_N.
    Probes(ProbeArgs),
    /// Every section of the campaign.
    Report(CampaignArgs),
    /// Confidence interval for mu from two observed log population sizes.
    Ci(CiArgs),
}

#[derive(Args)]
struct CampaignArgs {
    /// Experiment plan (TOML or JSON). Defaults to the built-in campaign.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Master seed; overrides BPRE_SEED and the plan.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Does not affect results.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Also write SVG plots.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct StatArgs {
    #[command(flatten)]
    campaign: CampaignArgs,
    /// CSV written by `simulate`; computes records from it instead of simulating.
    #[arg(long, conflicts_with = "plan")]
    input: Option<PathBuf>,
    /// Environment model of the input CSV (default: built-in two-atom model).
    #[arg(long, requires = "input")]
    model: Option<PathBuf>,
    /// Tail thresholds for --input mode.
    #[arg(long, value_delimiter = ',', requires = "input")]
    x: Option<Vec<f64>>,
}

#[derive(Args)]
struct MdpArgs {
    #[command(flatten)]
    campaign: CampaignArgs,
    /// a_n = n^a_exponent, with a_exponent in (0, 0.5).
    #[arg(long)]
    a_exponent: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    t: Option<Vec<f64>>,
}

#[derive(Args)]
struct ProbeArgs {
    #[command(flatten)]
    campaign: CampaignArgs,
    /// Harmonic orders a for E[W_N^-a].
    #[arg(long, value_delimiter = ',')]
    a: Option<Vec<f64>>,
    /// Powers p for E[|ln W_N|^p].
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<f64>>,
    #[arg(long)]
    burn_in: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Environment model (TOML or JSON). Defaults to the built-in two-atom model.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    n0: usize,
    #[arg(long, default_value_t = 1000)]
    replicates: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    exact_cap: Option<u64>,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Normal,
    Mdp,
}

#[derive(Args)]
struct CiArgs {
    /// ln Z_{n0}
    #[arg(long, allow_hyphen_values = true)]
    lnz0: f64,
    /// ln Z_{n0+n}
    #[arg(long, allow_hyphen_values = true)]
    lnz1: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    kappa: f64,
    #[arg(long, value_enum, default_value = "normal")]
    method: MethodArg,
}

#[derive(Debug, Serialize, Deserialize)]
struct SimRow {
    replicate: usize,
    n0: usize,
    n: usize,
    #[serde(rename = "ln_Z_n0")]
    ln_z_n0: f64,
    #[serde(rename = "ln_Z_n0n")]
    ln_z_n0n: f64,
    #[serde(rename = "S_n0")]
    s_n0: f64,
    #[serde(rename = "S_n0n")]
    s_n0n: f64,
    exact_upto: usize,
}

#[derive(Serialize)]
struct TailEntry {
    x: f64,
    side: &'static str,
    ratio: f64,
    se: f64,
}

#[derive(Serialize)]
struct SkippedTail {
    x: f64,
    side: &'static str,
    reason: String,
}

#[derive(Serialize)]
struct StatRecord {
    n0: usize,
    n: usize,
    #[serde(rename = "M")]
    m: usize,
    ks: f64,
    tail: Vec<TailEntry>,
    skipped: Vec<SkippedTail>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => simulate(args),
        Command::Ks(args) => stat(args, Section::BerryEsseen),
        Command::TailRatio(args) => stat(args, Section::TailRatio),
        Command::Mdp(args) => {
            let mut plan = resolve_plan(&args.campaign)?;
            if let Some(a) = args.a_exponent {
                plan.mdp.a_exponent = a;
            }
            if let Some(t) = args.t {
                plan.mdp.t_grid = t;
            }
            campaign(&plan, &args.campaign, &[Section::Mdp])
        }
        Command::Coverage(args) => campaign(&resolve_plan(&args)?, &args, &[Section::Coverage]),
        Command::Probes(args) => {
            let mut plan = resolve_plan(&args.campaign)?;
            if let Some(a) = args.a {
                plan.probes.a_grid = a;
            }
            if let Some(p) = args.p {
                plan.probes.p_grid = p;
            }
            if let Some(n) = args.burn_in {
                plan.probes.burn_in = n;
            }
            campaign(&plan, &args.campaign, &[Section::Probes])
        }
        Command::Report(args) => campaign(&resolve_plan(&args)?, &args, &Section::ALL),
        Command::Ci(args) => ci(args),
    }
}

/// --seed, then BPRE_SEED, then the seed in the plan.
fn resolve_seed(flag: Option<u64>) -> Result<Option<u64>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(SEED_VAR) {
        Ok(v) => {
            Ok(Some(v.trim().parse().with_context(|| {
                format!("{SEED_VAR}={v:?} is not a u64")
            })?))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => bail!("{SEED_VAR}: {e}"),
    }
}

fn resolve_plan(args: &CampaignArgs) -> Result<ExperimentPlan> {
    let mut plan = match &args.plan {
        Some(path) => load_plan(path)?,
        None => ExperimentPlan::default_campaign(),
    };
    if let Some(seed) = resolve_seed(args.seed)? {
        plan.master_seed = seed;
    }
    plan.validate()?;
    Ok(plan)
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()?;
    Ok(pool.install(f))
}

fn formats(args: &CampaignArgs) -> Vec<ReportFormat> {
    let mut f = vec![ReportFormat::Json, ReportFormat::Csv];
    if args.svg {
        f.push(ReportFormat::Svg);
    }
    f
}

fn write_out(report: &bpre::harness::ExperimentReport, args: &CampaignArgs) -> Result<()> {
    let paths = bpre::harness::write_report(report, &args.out_dir, &formats(args))
        .with_context(|| format!("writing report to {}", args.out_dir.display()))?;
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn campaign(plan: &ExperimentPlan, args: &CampaignArgs, sections: &[Section]) -> Result<()> {
    let report = in_pool(args.threads, || Campaign::run(plan, sections)?.report())??;
    write_out(&report, args)
}

fn stat(args: StatArgs, section: Section) -> Result<()> {
    let records = match &args.input {
        Some(input) => {
            let model = match &args.model {
                Some(path) => load_model(path)?,
                None => EnvironmentModel::two_atom(),
            };
            let x_grid = args
                .x
                .clone()
                .unwrap_or_else(|| ExperimentPlan::default_campaign().x_grid);
            records_from_csv(input, &model, &x_grid)?
        }
        None => {
            let plan = resolve_plan(&args.campaign)?;
            let (report, records) = in_pool(args.campaign.threads, || -> Result<_> {
                let campaign = Campaign::run(&plan, &[section])?;
                let mut records = Vec::new();
                for &n0 in &plan.n0_grid {
                    for &n in &plan.n_grid {
                        records.push(record(&campaign.standardized(n0, n)?, &plan.x_grid)?);
                    }
                }
                Ok((campaign.report()?, records))
            })??;
            write_out(&report, &args.campaign)?;
            records
        }
    };
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &records)?;
    writeln!(out)?;
    Ok(())
}

fn record(sample: &StandardizedSample, x_grid: &[f64]) -> Result<StatRecord> {
    let mut tail = Vec::new();
    let mut skipped = Vec::new();
    for &x in x_grid {
        for (side, name) in [(TailSide::Upper, "upper"), (TailSide::Lower, "lower")] {
            match tail_ratio(sample, x, side) {
                Ok(r) => tail.push(TailEntry {
                    x,
                    side: name,
                    ratio: r.ratio,
                    se: r.se,
                }),
                Err(e @ bpre::Error::InsufficientTail { .. }) => skipped.push(SkippedTail {
                    x,
                    side: name,
                    reason: e.to_string(),
                }),
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(StatRecord {
        n0: sample.n0,
        n: sample.n,
        m: sample.len(),
        ks: ks_distance(sample),
        tail,
        skipped,
    })
}

fn records_from_csv(
    path: &Path,
    model: &EnvironmentModel,
    x_grid: &[f64],
) -> Result<Vec<StatRecord>> {
    let moments = model.moments()?;
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cells: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for row in reader.deserialize() {
        let row: SimRow = row.with_context(|| format!("parsing {}", path.display()))?;
        let z = standardize_increment(
            row.ln_z_n0n - row.ln_z_n0,
            row.n,
            moments.mu,
            moments.sigma(),
        );
        cells.entry((row.n0, row.n)).or_default().push(z);
    }
    if cells.is_empty() {
        bail!("{} has no rows", path.display());
    }
    // The simulate CSV does not carry its seed.
    let seed = 0;
    cells
        .into_iter()
        .map(|((n0, n), values)| {
            let sample = StandardizedSample::new(
                values,
                n0,
                n,
                moments.mu,
                moments.sigma(),
                seed,
                model.model_id(),
            )?;
            record(&sample, x_grid)
        })
        .collect()
}

fn simulate(args: SimulateArgs) -> Result<()> {
    if args.n == 0 {
        bail!("--n must be positive");
    }
    let model = match &args.model {
        Some(path) => load_model(path)?,
        None => EnvironmentModel::two_atom(),
    };
    let caps = match args.exact_cap {
        Some(cap) => SimCaps::with_exact_cap(cap),
        None => SimCaps::default(),
    };
    caps.validate()?;
    let seed = resolve_seed(args.seed)?.unwrap_or(ExperimentPlan::DEFAULT_SEED);
    let (n0, n) = (args.n0, args.n);
    let batch = in_pool(args.threads, || {
        Batch::simulate(&model, &caps, seed, args.replicates, [n0, n0 + n])
    })??;
    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(
            std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        ),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut writer = csv::Writer::from_writer(sink);
    let (z0, z1) = (batch.ln_z(n0)?, batch.ln_z(n0 + n)?);
    let (s0, s1) = (batch.s(n0)?, batch.s(n0 + n)?);
    for (r, summary) in batch.summaries().iter().enumerate() {
        writer.serialize(SimRow {
            replicate: r,
            n0,
            n,
            ln_z_n0: z0[r],
            ln_z_n0n: z1[r],
            s_n0: s0[r],
            s_n0n: s1[r],
            exact_upto: summary.exact_upto,
        })?;
    }
    writer.flush()?;
    Ok(())
}

fn ci(args: CiArgs) -> Result<()> {
    let (method, name) = match args.method {
        MethodArg::Normal => (CiMethod::NormalQuantile, "normal"),
        MethodArg::Mdp => (CiMethod::MdpWidth, "mdp"),
    };
    let mu_hat = estimate_mu(args.lnz0, args.lnz1, args.n)?;
    let ci = confidence_interval(mu_hat, args.sigma, args.n, args.kappa, method)?;
    let out = json!({
        "mu_hat": ci.mu_hat,
        "a_n": ci.a_n,
        "b_n": ci.b_n,
        "delta_n": ci.delta_n,
        "method": name,
        "warnings": ci.warnings,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}
