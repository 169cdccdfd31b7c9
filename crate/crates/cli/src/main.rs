//! Command-line driver: instance generation, single solves, series and
//! walk certification, and batch sweeps summarized with ledger columns.
//!
//! Output discipline: every number the driver emits traces either to a
//! cost-ledger counter or to a computed state distance, and no sampled
//! quantity is reported without the seed that produced it.  Runs are
//! deterministic given (arguments, config, seeds) — byte-identical files
//! on repetition.
//!
//! Exit codes: 0 when every requested check or cell succeeded, 1 when the
//! run completed but a numerical target was missed (a failed solve, an
//! uncertified bound, a failed sweep cell), 2 for unusable input.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qlsp_core::approx::{chebyshev_series, fourier_grid};
use qlsp_core::error::{Error, Result};
use qlsp_core::lcu::AmplifyPolicy;
use qlsp_core::ledger::CostLedger;
use qlsp_core::problem::{generate_instance, load_instance, SparseHermitianInstance};
use qlsp_core::simcore::walk::WalkOperator;
use qlsp_core::solver::{solve_chebyshev, solve_fourier};
use qlsp_core::vtaa::{solve_vtaa_with, InnerKind};

/// Largest instance the generator will emit; past this the dense
/// eigendecompositions behind validation stop being interactive.
const MAX_GENERATE_N: usize = 64;

/// Fixed summary columns; the scaling regressions read these by name.
const CSV_HEADER: &str = "method,n,d,kappa,epsilon,seed,error,pa_queries,pb_uses,\
                          walk_steps,evolution_uses,evolution_time_total,aa_rounds,\
                          p_succ,t_avg,predicted_cost";

/// Desk-scale driver for sparse quantum linear-system solvers.
#[derive(Parser)]
#[command(name = "qlsp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random d-sparse Hermitian instance file with spectrum
    /// spanning ±[1/κ, 1].
    Generate {
        /// Dimension (≤ 64).
        #[arg(long)]
        n: usize,
        /// Column sparsity.
        #[arg(long)]
        d: usize,
        /// Condition number promise.
        #[arg(long)]
        kappa: f64,
        /// Generation seed; the same seed writes a byte-identical file.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Destination path for the instance JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one instance and emit the result record as JSON.
    Solve {
        /// Instance file produced by `generate` (or by hand).
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        /// Target error ‖|x̃⟩ − |x⟩‖, in (0, 1/2).
        #[arg(long)]
        epsilon: f64,
        /// Success handling for the decomposition methods; the
        /// variable-time pipeline postselects exactly and ignores this.
        #[arg(long, value_enum, default_value_t = Policy::PostselectExact)]
        policy: Policy,
        /// Seed for sampled policies; recorded in the record either way.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Inner inverse family for the variable-time method.
        #[arg(long, value_enum, default_value_t = Inner::Chebyshev)]
        inner: Inner,
        /// Write the result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build both 1/x decompositions at (κ, ε) and report their certified
    /// scan errors.
    VerifySeries {
        #[arg(long)]
        kappa: f64,
        #[arg(long)]
        epsilon: f64,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the walk against the Chebyshev block identity on an instance.
    WalkCheck {
        #[arg(long)]
        instance: PathBuf,
        /// Largest walk power checked (every power from 1 up is scanned).
        #[arg(long, default_value_t = 50)]
        max_power: u64,
        /// Pass threshold on the worst block deviation.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Run a sweep config: one result JSON per cell plus a summary CSV.
    Sweep {
        /// Sweep configuration JSON.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: the config's out_dir, else "results").
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Method {
    Fourier,
    Chebyshev,
    Vtaa,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Fourier => "fourier",
            Method::Chebyshev => "chebyshev",
            Method::Vtaa => "vtaa",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Policy {
    #[default]
    PostselectExact,
    Sample,
    Amplify,
}

impl Policy {
    fn to_amplify(self, seed: u64) -> AmplifyPolicy {
        match self {
            Policy::PostselectExact => AmplifyPolicy::PostselectExact,
            Policy::Sample => AmplifyPolicy::Sample { seed },
            Policy::Amplify => AmplifyPolicy::Amplify { seed },
        }
    }

    fn name(self) -> &'static str {
        match self {
            Policy::PostselectExact => "postselect-exact",
            Policy::Sample => "sample",
            Policy::Amplify => "amplify",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Inner {
    #[default]
    Chebyshev,
    Fourier,
}

impl Inner {
    fn kind(self) -> InnerKind {
        match self {
            Inner::Chebyshev => InnerKind::Chebyshev,
            Inner::Fourier => InnerKind::Fourier,
        }
    }
}

/// Everything one solve reports.  `detail` carries the full method report
/// (decomposition sizes, stage schedules); the top level holds the fields
/// shared by every method.
#[derive(Serialize)]
struct ResultRecord {
    method: &'static str,
    policy: &'static str,
    seed: u64,
    n: usize,
    d: usize,
    kappa: f64,
    epsilon: f64,
    succeeded: bool,
    /// Exact success probability of the flagged block, never sampled.
    success_prob: f64,
    /// ‖|x̃⟩ − |x⟩‖ against the dense ground truth (no phase alignment).
    error_vs_truth: Option<f64>,
    error_aligned: Option<f64>,
    fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_avg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    predicted_cost: Option<f64>,
    x_tilde: Option<Vec<(f64, f64)>>,
    ledger: CostLedger,
    detail: serde_json::Value,
}

fn run_solve(
    inst: &SparseHermitianInstance,
    method: Method,
    epsilon: f64,
    policy: Policy,
    seed: u64,
    inner: Inner,
) -> Result<ResultRecord> {
    match method {
        Method::Fourier | Method::Chebyshev => {
            let amplify = policy.to_amplify(seed);
            let outcome = match method {
                Method::Fourier => solve_fourier(inst, epsilon, amplify)?,
                Method::Chebyshev => solve_chebyshev(inst, epsilon, amplify)?,
                Method::Vtaa => unreachable!(),
            };
            let r = &outcome.report;
            Ok(ResultRecord {
                method: method.name(),
                policy: policy.name(),
                seed,
                n: r.n,
                d: r.d,
                kappa: r.kappa,
                epsilon: r.epsilon,
                succeeded: r.succeeded,
                success_prob: r.success_probability,
                error_vs_truth: r.error_unaligned,
                error_aligned: r.error_aligned,
                fidelity: r.fidelity,
                t_avg: None,
                predicted_cost: None,
                x_tilde: outcome
                    .state
                    .as_ref()
                    .map(|s| s.amplitudes().iter().map(|z| (z.re, z.im)).collect()),
                ledger: r.ledger,
                detail: serde_json::to_value(r)?,
            })
        }
        Method::Vtaa => {
            let outcome = solve_vtaa_with(inst, epsilon, inner.kind())?;
            let r = &outcome.report;
            Ok(ResultRecord {
                method: method.name(),
                // The pipeline postselects the flag exactly; sampling
                // policies do not apply to the variable-time method.
                policy: Policy::PostselectExact.name(),
                seed,
                n: r.n,
                d: r.d,
                kappa: r.kappa,
                epsilon: r.epsilon,
                succeeded: r.succeeded,
                success_prob: r.p_succ,
                error_vs_truth: r.error_unaligned,
                error_aligned: r.error_aligned,
                fidelity: r.fidelity,
                t_avg: Some(r.t_avg),
                predicted_cost: Some(r.predicted_cost),
                x_tilde: Some(
                    outcome.state.amplitudes().iter().map(|z| (z.re, z.im)).collect(),
                ),
                ledger: r.ledger,
                detail: serde_json::to_value(r)?,
            })
        }
    }
}

/// Certified scan report for one decomposition family.
#[derive(Serialize)]
struct SeriesSide {
    alpha: f64,
    terms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_order: Option<u64>,
    /// Measured sup of |h(x) − 1/x| over the dense certification scan.
    max_error: f64,
}

#[derive(Serialize)]
struct SeriesReport {
    kappa: f64,
    epsilon: f64,
    fourier: SeriesSide,
    chebyshev: SeriesSide,
    certified: bool,
}

fn run_verify_series(kappa: f64, epsilon: f64) -> Result<SeriesReport> {
    let grid = fourier_grid(kappa, epsilon)?;
    let series = chebyshev_series(kappa, epsilon)?;
    let certified = grid.max_error <= epsilon && series.max_error <= epsilon;
    Ok(SeriesReport {
        kappa,
        epsilon,
        fourier: SeriesSide {
            alpha: grid.alpha,
            terms: grid.term_count(),
            max_order: None,
            max_error: grid.max_error,
        },
        chebyshev: SeriesSide {
            alpha: series.alpha,
            terms: series.coeffs.len() as u64,
            max_order: Some(series.max_order()),
            max_error: series.max_error,
        },
        certified,
    })
}

#[derive(Serialize)]
struct WalkReport {
    n: usize,
    d: usize,
    kappa: f64,
    max_power: u64,
    worst_deviation: f64,
    tol: f64,
    passed: bool,
}

fn run_walk_check(instance: &Path, max_power: u64, tol: f64) -> Result<WalkReport> {
    let inst = load_instance(instance)?;
    let mut ledger = CostLedger::default();
    let walk = WalkOperator::build_walk(&inst, &mut ledger)?;
    let mut worst = 0.0_f64;
    for n_pow in 1..=max_power {
        worst = worst.max(walk.walk_power_block_check(n_pow)?);
    }
    Ok(WalkReport {
        n: inst.n,
        d: inst.d,
        kappa: inst.kappa,
        max_power,
        worst_deviation: worst,
        tol,
        passed: worst <= tol,
    })
}

/// One sweep source: either a file on disk or a generation recipe keyed by
/// the cell seed.
#[derive(Clone, Deserialize)]
#[serde(untagged)]
enum InstanceSpec {
    File { path: PathBuf },
    Generated { n: usize, d: usize, kappa: f64 },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepConfig {
    methods: Vec<Method>,
    epsilons: Vec<f64>,
    seeds: Vec<u64>,
    instances: Vec<InstanceSpec>,
    #[serde(default)]
    policy: Policy,
    #[serde(default)]
    inner: Inner,
    #[serde(default)]
    out_dir: Option<PathBuf>,
}

struct Cell {
    idx: usize,
    spec: InstanceSpec,
    method: Method,
    epsilon: f64,
    seed: u64,
}

impl Cell {
    fn file_name(&self) -> String {
        let Cell { idx, method, epsilon, seed, .. } = self;
        let kappa = match &self.spec {
            InstanceSpec::Generated { kappa, .. } => format!("{kappa}"),
            InstanceSpec::File { .. } => "file".into(),
        };
        format!("c{idx:03}-{}-k{kappa}-e{epsilon}-s{seed}.json", method.name())
    }
}

fn blank_if_none(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Run one cell: materialize the instance, solve, write the result file,
/// and return the summary row plus the success flag.  Failures are
/// captured into the row and the result file; they never abort the sweep.
fn run_cell(cell: &Cell, out_dir: &Path, policy: Policy, inner: Inner) -> (String, bool) {
    let identity = |n: &str, d: &str, kappa: &str| {
        format!("{},{n},{d},{kappa},{},{}", cell.method.name(), cell.epsilon, cell.seed)
    };
    let fail = |msg: String, ident: String| {
        let body = serde_json::json!({
            "method": cell.method.name(),
            "epsilon": cell.epsilon,
            "seed": cell.seed,
            "error": msg,
        });
        let path = out_dir.join(cell.file_name());
        if let Err(e) = write_json(&path, &body) {
            eprintln!("qlsp: cell {}: result write failed: {e}", cell.idx);
        }
        eprintln!("qlsp: cell {} failed: {msg}", cell.idx);
        (format!("{ident},,,,,,,,,,"), false)
    };

    let inst = match &cell.spec {
        InstanceSpec::File { path } => match load_instance(path) {
            Ok(inst) => inst,
            Err(e) => {
                return fail(format!("{}: {e}", path.display()), identity("", "", ""));
            }
        },
        InstanceSpec::Generated { n, d, kappa } => {
            let mut rng = ChaCha8Rng::seed_from_u64(cell.seed);
            match generate_instance(*n, *d, *kappa, &mut rng) {
                Ok(inst) => inst,
                Err(e) => {
                    return fail(
                        format!("generation: {e}"),
                        identity(&n.to_string(), &d.to_string(), &kappa.to_string()),
                    );
                }
            }
        }
    };
    let ident = identity(&inst.n.to_string(), &inst.d.to_string(), &inst.kappa.to_string());

    let record = match run_solve(&inst, cell.method, cell.epsilon, policy, cell.seed, inner) {
        Ok(record) => record,
        Err(e) => return fail(e.to_string(), ident),
    };
    let path = out_dir.join(cell.file_name());
    if let Err(e) = write_json(&path, &record) {
        return fail(format!("result write failed: {e}"), ident);
    }

    let l = &record.ledger;
    let row = format!(
        "{ident},{},{},{},{},{},{},{},{},{},{}",
        blank_if_none(record.error_vs_truth),
        l.pa_queries,
        l.pb_uses,
        l.walk_steps,
        l.evolution_uses,
        l.evolution_time_total,
        l.aa_rounds,
        record.success_prob,
        blank_if_none(record.t_avg),
        blank_if_none(record.predicted_cost),
    );
    (row, record.succeeded)
}

fn run_sweep(config_path: &Path, out_dir_flag: Option<PathBuf>) -> Result<bool> {
    let text = std::fs::read_to_string(config_path)?;
    let config: SweepConfig =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("sweep config: {e}")))?;
    let out_dir = out_dir_flag
        .or(config.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    std::fs::create_dir_all(&out_dir)?;

    let mut cells = Vec::new();
    for spec in &config.instances {
        for &method in &config.methods {
            for &epsilon in &config.epsilons {
                for &seed in &config.seeds {
                    cells.push(Cell {
                        idx: cells.len(),
                        spec: spec.clone(),
                        method,
                        epsilon,
                        seed,
                    });
                }
            }
        }
    }

    let results: Vec<(String, bool)> = cells
        .par_iter()
        .map(|cell| run_cell(cell, &out_dir, config.policy, config.inner))
        .collect();

    let mut summary = String::from(CSV_HEADER);
    summary.push('\n');
    for (row, _) in &results {
        summary.push_str(row);
        summary.push('\n');
    }
    let summary_path = out_dir.join("summary.csv");
    std::fs::write(&summary_path, summary)?;

    let failed = results.iter().filter(|(_, ok)| !ok).count();
    eprintln!(
        "qlsp: sweep wrote {} cells to {} ({failed} failed)",
        results.len(),
        out_dir.display()
    );
    Ok(failed == 0)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut writer = std::io::BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, value)?;
    use std::io::Write;
    writer.write_all(b"\n")?;
    Ok(())
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(path) => write_json(path, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

/// Returns whether every numerical target of the command was met.
fn run(command: Command) -> Result<bool> {
    match command {
        Command::Generate { n, d, kappa, seed, out } => {
            if n > MAX_GENERATE_N {
                return Err(Error::Config(format!(
                    "n = {n} exceeds the generator cap {MAX_GENERATE_N}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inst = generate_instance(n, d, kappa, &mut rng)?;
            inst.save(&out)?;
            eprintln!("qlsp: wrote instance (n={n}, d={d}, kappa={kappa}) to {}", out.display());
            Ok(true)
        }
        Command::Solve { instance, method, epsilon, policy, seed, inner, out } => {
            let inst = load_instance(&instance)?;
            let record = run_solve(&inst, method, epsilon, policy, seed, inner)?;
            let ok = record.succeeded;
            emit(out.as_deref(), &record)?;
            Ok(ok)
        }
        Command::VerifySeries { kappa, epsilon, out } => {
            let report = run_verify_series(kappa, epsilon)?;
            let ok = report.certified;
            emit(out.as_deref(), &report)?;
            Ok(ok)
        }
        Command::WalkCheck { instance, max_power, tol } => {
            let report = run_walk_check(&instance, max_power, tol)?;
            let ok = report.passed;
            emit(None, &report)?;
            Ok(ok)
        }
        Command::Sweep { config, out_dir } => run_sweep(&config, out_dir),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("qlsp: {e}");
            // A certification error is a completed run that missed its
            // bound; everything else is unusable input or a broken state.
            ExitCode::from(match e {
                Error::Certification(_) => 1,
                _ => 2,
            })
        }
    }
}
