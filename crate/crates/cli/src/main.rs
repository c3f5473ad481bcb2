//! Command-line driver: separability criteria, witness scans, the
//! factorized qutrit demo, and bath-table generation.
//!
//! Exit codes: 0 = separable / nothing fired, 10 = entangled / fired,
//! 2 = usage or input error. Output files are written atomically and
//! are byte-identical for identical configuration and seed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use dephase::criteria::{self, CriteriaReport};
use dephase::linalg::CMat;
use dephase::model::{self, PureDephasingModel};
use dephase::nv::{self, Branch, NvConfig};
use dephase::witness::{self, ProtocolConfig};

const EXIT_FIRED: u8 = 10;

#[derive(Parser)]
#[command(
    name = "dephase",
    version,
    about = "Pure-dephasing qudit-environment entanglement: criteria, witness protocol, qutrit demo"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate both separability criteria classes for a state at time t
    Criteria(CriteriaArgs),
    /// Run the witness protocol and write trace/difference CSVs
    Witness(WitnessArgs),
    /// Factorized qutrit demo: polarization sweep, difference CSVs
    NvDemo(NvDemoArgs),
    /// Generate a deterministic random bath table
    GenSpins(GenSpinsArgs),
}

/// Model source: explicit files or the built-in qutrit/bath setup.
#[derive(Args)]
struct SourceArgs {
    /// Model file (JSON; see README for the schema)
    #[arg(long, conflicts_with = "nv")]
    model: Option<PathBuf>,
    /// Initial environment state file (JSON density matrix)
    #[arg(long, requires = "model", conflicts_with = "nv")]
    r0: Option<PathBuf>,
    /// Use the qutrit/spin-bath model (dense path; capped bath size)
    #[arg(long)]
    nv: bool,
    /// Bath table for --nv (default: bundled fourteen-spin bath)
    #[arg(long, requires = "nv")]
    table: Option<PathBuf>,
    /// Uniform bath polarization for --nv (default: table values)
    #[arg(long, requires = "nv", allow_hyphen_values = true)]
    p: Option<f64>,
    /// Magnetic field along z in T for --nv
    #[arg(long, default_value_t = 0.02)]
    b_z: f64,
    /// Force the dense route for --nv; refuses baths beyond the
    /// dimension cap instead of using the factorized evaluation
    #[arg(long, requires = "nv")]
    dense: bool,
}

impl SourceArgs {
    fn nv_config(&self) -> Result<NvConfig> {
        let spins = match &self.table {
            Some(path) => nv::load_spin_table(path)
                .with_context(|| format!("loading bath table {}", path.display()))?,
            None => nv::demo_bath(),
        };
        let mut cfg = NvConfig::new(self.b_z, spins)?;
        if let Some(p) = self.p {
            cfg = cfg.with_uniform_polarization(p)?;
        }
        Ok(cfg)
    }

    /// Dense model and initial environment state, whichever the source.
    fn load_dense(&self) -> Result<(PureDephasingModel, CMat)> {
        if self.nv {
            let cfg = self.nv_config()?;
            let model = nv::build_dense_model(&cfg)?;
            let r0 = nv::dense_initial_env(&cfg)?;
            Ok((model, r0))
        } else {
            let model_path = self
                .model
                .as_ref()
                .ok_or_else(|| anyhow::anyhow!("either --model or --nv is required"))?;
            let r0_path = self
                .r0
                .as_ref()
                .ok_or_else(|| anyhow::anyhow!("--r0 is required with --model"))?;
            let model = model::load_model(model_path)
                .with_context(|| format!("loading model {}", model_path.display()))?;
            let r0 = model::load_density(r0_path)
                .with_context(|| format!("loading initial state {}", r0_path.display()))?;
            Ok((model, r0))
        }
    }
}

/// Inclusive time grid (start, stop, steps).
#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 0.0)]
    grid_start: f64,
    #[arg(long, default_value_t = 3.0)]
    grid_stop: f64,
    #[arg(long, default_value_t = 300)]
    grid_steps: usize,
}

impl GridArgs {
    fn build(&self) -> Result<Vec<f64>> {
        if self.grid_steps < 2 {
            bail!("--grid-steps must be at least 2, got {}", self.grid_steps);
        }
        if !(self.grid_start >= 0.0 && self.grid_stop > self.grid_start) {
            bail!(
                "need 0 <= --grid-start < --grid-stop, got [{}, {}]",
                self.grid_start,
                self.grid_stop
            );
        }
        let n = self.grid_steps;
        Ok((0..n)
            .map(|i| {
                self.grid_start + (self.grid_stop - self.grid_start) * i as f64 / (n - 1) as f64
            })
            .collect())
    }
}

#[derive(Args)]
struct CriteriaArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Evolution time at which the state is classified
    #[arg(long)]
    t: f64,
    /// Frobenius tolerance for both criteria classes
    #[arg(long, default_value_t = criteria::DEFAULT_CRITERIA_TOL)]
    tol: f64,
    /// Also scan all pairs/quadruples, not just the canonical sets
    #[arg(long)]
    exhaustive: bool,
    /// Report file (JSON); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WitnessArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Preparation time before the test superposition is excited
    #[arg(long)]
    tau: f64,
    #[command(flatten)]
    grid: GridArgs,
    /// Firing threshold on |coherence difference|
    #[arg(long, default_value_t = witness::DEFAULT_FIRING_THRESHOLD)]
    threshold: f64,
    /// Output directory for CSVs and the report
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct NvDemoArgs {
    /// Uniform bath polarizations to sweep, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.4, 0.7, 1.0], allow_hyphen_values = true)]
    p_list: Vec<f64>,
    /// Preparation time (µs)
    #[arg(long, default_value_t = 3.0)]
    tau: f64,
    /// Magnetic field along z (T)
    #[arg(long, default_value_t = 0.02)]
    b_z: f64,
    #[command(flatten)]
    grid: GridArgs,
    /// Bath table (default: bundled fourteen-spin bath)
    #[arg(long)]
    table: Option<PathBuf>,
    /// Output directory for the difference CSVs
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GenSpinsArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    count: usize,
    /// Inner shell radius (nm)
    #[arg(long, default_value_t = 0.4)]
    r_min: f64,
    /// Outer shell radius (nm)
    #[arg(long, default_value_t = 0.8)]
    r_max: f64,
    /// Polarization assigned to every generated nucleus
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    p: f64,
    /// Output table path
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("DEPHASE_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon_thread_pool(n);
        }
    }
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Criteria(args) => cmd_criteria(args),
        Command::Witness(args) => cmd_witness(args),
        Command::NvDemo(args) => cmd_nv_demo(args),
        Command::GenSpins(args) => cmd_gen_spins(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn rayon_thread_pool(n: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    Ok(())
}

/// Writes through a temp file in the target directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(dir) => tempfile::NamedTempFile::new_in(dir)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    tmp.write_all(bytes)?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[derive(Serialize)]
struct CriteriaOutput {
    #[serde(flatten)]
    report: CriteriaReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    class_one_exhaustive: Option<Vec<criteria::ClassOneEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    class_two_exhaustive: Option<Vec<criteria::ClassTwoEntry>>,
}

fn cmd_criteria(args: CriteriaArgs) -> Result<u8> {
    let output = if args.source.nv && !args.source.dense {
        if args.exhaustive {
            bail!("--exhaustive needs the dense route; add --dense (bath must fit the cap)");
        }
        let cfg = args.source.nv_config()?;
        CriteriaOutput {
            class_one_exhaustive: None,
            class_two_exhaustive: None,
            report: nv::factorized_criteria(&cfg, args.t, args.tol)?,
        }
    } else {
        let (model, r0) = args.source.load_dense()?;
        CriteriaOutput {
            class_one_exhaustive: args
                .exhaustive
                .then(|| criteria::class_one_check_exhaustive(&model, &r0, args.t, args.tol))
                .transpose()?,
            class_two_exhaustive: args
                .exhaustive
                .then(|| criteria::class_two_check_exhaustive(&model, args.t))
                .transpose()?,
            report: criteria::separability_verdict(&model, &r0, args.t, args.tol)?,
        }
    };
    let verdict = output.report.verdict;
    let text = serde_json::to_string_pretty(&output)?;
    match &args.out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => print_stdout(&text)?,
    }
    Ok(if verdict.is_entangled() { EXIT_FIRED } else { 0 })
}

/// Prints without panicking when the consumer closes the pipe early.
fn print_stdout(text: &str) -> Result<()> {
    use std::io::Write as _;
    match writeln!(std::io::stdout(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

#[derive(Serialize)]
struct WitnessSummary {
    tau: f64,
    firing_threshold: f64,
    fired_pairs: Vec<(usize, usize)>,
    implied_entangled: Vec<(usize, usize)>,
    diffs: Vec<witness::TraceDiff>,
}

fn cmd_witness(args: WitnessArgs) -> Result<u8> {
    let grid = args.grid.build()?;
    let report = if args.source.nv && !args.source.dense {
        let cfg = args.source.nv_config()?;
        nv::factorized_witness_scan(&cfg, args.tau, &grid, args.threshold)?
    } else {
        let (model, r0) = args.source.load_dense()?;
        let mut cfg = ProtocolConfig::standard(model.n_sys(), args.tau, grid)?;
        cfg.firing_threshold = args.threshold;
        witness::witness_scan(&model, &r0, &cfg)?
    };

    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    for trace in &report.traces {
        let mut buf = Vec::new();
        witness::write_trace_csv(&mut buf, trace)?;
        let name = format!(
            "trace_prep{}_coh_{}_{}.csv",
            trace.prep, trace.pair.0, trace.pair.1
        );
        write_atomic(&args.out_dir.join(name), &buf)?;
    }
    let mut buf = Vec::new();
    witness::write_differences_csv(&mut buf, &report)?;
    write_atomic(&args.out_dir.join("differences.csv"), &buf)?;

    let summary = WitnessSummary {
        tau: args.tau,
        firing_threshold: report.firing_threshold,
        fired_pairs: report.fired_pairs.clone(),
        implied_entangled: report.implied_entangled.clone(),
        diffs: report.diffs.clone(),
    };
    write_atomic(
        &args.out_dir.join("witness_report.json"),
        serde_json::to_string_pretty(&summary)?.as_bytes(),
    )?;

    Ok(if report.fired_pairs.is_empty() { 0 } else { EXIT_FIRED })
}

fn branch_tag(b: Branch) -> &'static str {
    match b {
        Branch::MinusOne => "m1",
        Branch::Zero => "0",
        Branch::PlusOne => "p1",
    }
}

fn cmd_nv_demo(args: NvDemoArgs) -> Result<u8> {
    if args.p_list.is_empty() {
        bail!("--p-list must name at least one polarization");
    }
    let spins = match &args.table {
        Some(path) => nv::load_spin_table(path)
            .with_context(|| format!("loading bath table {}", path.display()))?,
        None => nv::demo_bath(),
    };
    let grid = args.grid.build()?;
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    for &p in &args.p_list {
        let cfg = NvConfig::new(args.b_z, spins.clone())?.with_uniform_polarization(p)?;
        let diffs = nv::demo_differences(&cfg, args.tau, &grid)?;
        for &coherence in &nv::DEMO_COHERENCES {
            let mut buf = Vec::new();
            buf.extend_from_slice(b"t,k,q,i,j,re_diff,im_diff\n");
            for diff in diffs.iter().filter(|d| d.coherence == coherence) {
                let (k, q) = diff.prep_pair;
                for (t, v) in diff.times.iter().zip(&diff.values) {
                    writeln!(
                        buf,
                        "{},{},{},{},{},{},{}",
                        t,
                        k.label(),
                        q.label(),
                        coherence.0.label(),
                        coherence.1.label(),
                        v.re,
                        v.im
                    )?;
                }
            }
            let name = format!(
                "diff_p{}_coh_{}_{}.csv",
                p,
                branch_tag(coherence.0),
                branch_tag(coherence.1)
            );
            write_atomic(&args.out_dir.join(name), &buf)?;
        }
    }
    Ok(0)
}

fn cmd_gen_spins(args: GenSpinsArgs) -> Result<u8> {
    if args.p.abs() > 1.0 || args.p.is_nan() {
        bail!("polarization {} outside [-1, 1]", args.p);
    }
    let mut spins = nv::random_spins(args.seed, args.count, args.r_min, args.r_max)?;
    for spin in &mut spins {
        spin.polarization = args.p;
    }
    let mut buf = Vec::new();
    nv::write_spin_table(&mut buf, &spins)?;
    write_atomic(&args.out, &buf)?;
    Ok(0)
}
