//! Command-line front end of the `mimo-pilot` binary.
//!
//! Everything except process exit lives here so the commands can be driven
//! in-process from tests: [`run`] takes the argument list and output sinks
//! and returns the exit code (0 success, 1 runtime failure, 2 usage error).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::estimators::EstimationMethod;
use crate::harness::{
    bench_csv, run_bench, run_experiment, sample_drop, ExperimentId, ExperimentPlan, MetricReport, Scheme,
};
use crate::ppa::{
    objective_value, ppa_allocate, unconstrained_optimum, AllocationObjective, InterferenceProfile, ObjectiveForm,
    PowerBounds, UserGroups,
};
use crate::refsolver::{solve, ConstrainedProblem};
use crate::scenario::{load_beta_fixture, parse_beta_csv, BetaSlice, SystemConfig};
use crate::Error;

/// Three-user large-scale coefficients, bundled for `fixture-check`.
pub const TABLE_FIXTURE: &str = include_str!("../fixtures/table_ia.csv");

/// Relative gap allowed between the grouping allocator and the reference
/// solver in `allocate --check`.
pub const CHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "mimo-pilot", version, about = "Pilot power allocation for multi-cell massive MIMO uplinks")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// key = value system configuration file
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config file
    #[arg(long, global = true, env = "MIMO_PILOT_SEED", value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true, default_value_t = 0, value_name = "N")]
    pub jobs: usize,
    /// Write output here instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte-Carlo check of the closed forms on a two-cell setting
    Validate {
        #[arg(long, value_parser = parse_method)]
        method: Option<EstimationMethod>,
        /// Small-scale trials per antenna count
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
    /// Allocate the target cell's pilot powers for one drop
    Allocate {
        #[arg(long, value_parser = parse_method, default_value = "ls")]
        method: EstimationMethod,
        #[arg(long, value_parser = parse_scheme, default_value = "ppa")]
        scheme: Scheme,
        /// Large-scale coefficients CSV; a drop is generated when absent
        #[arg(long, value_name = "PATH")]
        fixture: Option<PathBuf>,
        /// Cross-check against the reference solver
        #[arg(long)]
        check: bool,
    },
    /// Produce a figure data set as CSV
    Figure {
        /// 3, 4a, 4b, 5a or 5b
        #[arg(value_parser = parse_figure)]
        id: ExperimentId,
        /// Reuse factors, e.g. 1,3,7
        #[arg(long, value_parser = parse_gamma_list)]
        gamma: Option<GammaList>,
        /// 100 drops x 100 small-scale trials instead of the desk counts
        #[arg(long)]
        paper_scale: bool,
        #[arg(long, value_parser = parse_scheme)]
        scheme: Option<Scheme>,
        #[arg(long, value_parser = parse_method)]
        method: Option<EstimationMethod>,
    },
    /// Time the grouping allocator against the reference solver
    Bench {
        #[arg(long, value_parser = parse_method, default_value = "ls")]
        method: EstimationMethod,
        /// Largest user count; K runs from 2
        #[arg(long, default_value_t = 10)]
        max_users: usize,
        /// Drops per user count
        #[arg(long, default_value_t = 5)]
        instances: usize,
    },
    /// Sanity-check a large-scale fixture (default: the bundled table)
    FixtureCheck {
        #[arg(long, value_name = "PATH")]
        fixture: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GammaList(pub Vec<u32>);

fn parse_method(s: &str) -> Result<EstimationMethod, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_figure(s: &str) -> Result<ExperimentId, String> {
    match s.parse::<ExperimentId>() {
        Ok(ExperimentId::Validate) => Err("use the validate subcommand".into()),
        Ok(id) => Ok(id),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_gamma_list(s: &str) -> Result<GammaList, String> {
    let mut v = s
        .split(',')
        .map(|t| match t.trim().parse::<u32>() {
            Ok(g @ (1 | 3 | 7)) => Ok(g),
            _ => Err(format!("reuse factor '{}' is not one of 1, 3, 7", t.trim())),
        })
        .collect::<Result<Vec<_>, _>>()?;
    v.sort_unstable();
    v.dedup();
    Ok(GammaList(v))
}

/// Failure of a command, split by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::Runtime(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            e.exit_code()
        }
    }
}

/// Config from `--config` (or defaults), with the seed override applied.
pub fn resolve_config(common: &CommonArgs, base: SystemConfig) -> Result<SystemConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => {
            if !path.is_file() {
                return Err(CliError::Usage(format!("config file {} does not exist", path.display())));
            }
            SystemConfig::load(path)?
        }
        None => base,
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn emit(common: &CommonArgs, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &common.out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Runtime(Error::Io(e))),
        None => stdout.write_all(text.as_bytes()).map_err(|e| CliError::Runtime(Error::Io(e))),
    }
}

/// Writes the report's CSV to `path`.
pub fn emit_csv(report: &MetricReport, path: &Path) -> crate::Result<()> {
    fs::write(path, report.to_csv()?)?;
    Ok(())
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let common = &cli.common;
    match &cli.command {
        Command::Validate { method, trials } => {
            let cfg = resolve_config(common, SystemConfig::default())?;
            let mut plan = ExperimentPlan::desk(ExperimentId::Validate);
            plan.n_small = (*trials).max(2);
            plan.jobs = common.jobs;
            if let Some(m) = method {
                plan.methods = vec![*m];
            }
            let report = run_experiment(&plan, &cfg)?;
            emit(common, &report.to_csv()?, stdout)?;
            let mut failed = 0;
            for r in &report.validation {
                let ok = r.relative_error() <= 0.03 && r.within_sigmas(3.0);
                failed += usize::from(!ok);
                let _ = writeln!(
                    stderr,
                    "{} {} M={} {} user {}: mc {} closed {} rel {:.4} {}",
                    if ok { "PASS" } else { "FAIL" },
                    r.quantity,
                    r.antennas,
                    r.method,
                    r.user + 1,
                    r.monte_carlo,
                    r.closed_form,
                    r.relative_error(),
                    if r.std_error.is_nan() { String::new() } else { format!("se {}", r.std_error) },
                );
            }
            if failed > 0 {
                return Err(Error::Statistics(format!("{failed} closed-form checks failed")).into());
            }
            Ok(())
        }
        Command::Allocate {
            method,
            scheme,
            fixture,
            check,
        } => {
            if common.config.is_none() {
                return Err(CliError::Usage("allocate needs --config PATH".into()));
            }
            let cfg = resolve_config(common, SystemConfig::default())?;
            cfg.validate()?;
            let beta = match fixture {
                Some(p) => load_beta_fixture(p)?.target_slice(),
                None => sample_drop(&cfg, 0)?.target_slice(),
            };
            let text = allocate_text(&cfg, &beta, *method, *scheme, *check)?;
            emit(common, &text.body, stdout)?;
            if text.check_failed {
                return Err(Error::Statistics("allocation is worse than the reference solver".into()).into());
            }
            Ok(())
        }
        Command::Figure {
            id,
            gamma,
            paper_scale,
            scheme,
            method,
        } => {
            let cfg = resolve_config(common, SystemConfig::default())?;
            let mut plan = if *paper_scale { ExperimentPlan::paper_scale(*id) } else { ExperimentPlan::desk(*id) };
            plan.jobs = common.jobs;
            if let Some(GammaList(g)) = gamma {
                plan.gammas = g.clone();
            }
            if let Some(s) = scheme {
                plan.schemes = vec![*s];
            }
            if let Some(m) = method {
                plan.methods = vec![*m];
            }
            let report = run_experiment(&plan, &cfg)?;
            emit(common, &report.to_csv()?, stdout)
        }
        Command::Bench {
            method,
            max_users,
            instances,
        } => {
            if *max_users < 2 || *instances == 0 {
                return Err(CliError::Usage("bench needs --max-users >= 2 and --instances >= 1".into()));
            }
            let cfg = resolve_config(common, SystemConfig::default())?;
            let rows = run_bench(&cfg, *method, *max_users, *instances)?;
            emit(common, &bench_csv(&rows), stdout)
        }
        Command::FixtureCheck { fixture } => {
            let real = match fixture {
                Some(p) => load_beta_fixture(p)?,
                None => parse_beta_csv(TABLE_FIXTURE)?,
            };
            let beta = real.target_slice();
            let mut out = format!("cells {} users {}\n", beta.cells(), beta.users());
            for k in 0..beta.users() {
                let cross: f64 = (1..beta.cells()).map(|l| beta.get(l, k)).sum();
                out.push_str(&format!(
                    "user {}: own {} other-cell sum {} ratio {}\n",
                    k + 1,
                    beta.own(k),
                    cross,
                    cross / beta.own(k)
                ));
            }
            emit(common, &out, stdout)
        }
    }
}

/// Rendered `allocate` output.
pub struct AllocateText {
    pub body: String,
    pub check_failed: bool,
}

fn join(v: impl IntoIterator<Item = String>) -> String {
    v.into_iter().collect::<Vec<_>>().join(",")
}

fn groups_text(g: &UserGroups) -> String {
    let ids = |v: &[usize]| join(v.iter().map(|k| (k + 1).to_string()));
    format!("free: {}\nat_min: {}\nat_max: {}\n", ids(&g.free), ids(&g.at_min), ids(&g.at_max))
}

/// Allocation of one drop as `key: value` lines. Users are numbered from 1.
pub fn allocate_text(
    cfg: &SystemConfig,
    beta: &BetaSlice,
    method: EstimationMethod,
    scheme: Scheme,
    check: bool,
) -> crate::Result<AllocateText> {
    if beta.cells() != cfg.cells || beta.users() != cfg.users {
        return Err(Error::Config(format!(
            "coefficients are {} cells x {} users but the config has {} x {}",
            beta.cells(),
            beta.users(),
            cfg.cells,
            cfg.users
        )));
    }
    let p = cfg.total_pilot_power;
    let profile = InterferenceProfile::equal_power(beta, p)?;
    let bounds = PowerBounds::from_config(cfg)?;
    let reference = |form| -> crate::Result<Vec<f64>> {
        Ok(solve(&ConstrainedProblem {
            objective: AllocationObjective {
                method,
                profile: &profile,
                antennas: cfg.antennas,
                form,
            },
            budget: p,
            lower: bounds.min,
            upper: bounds.max,
            start: unconstrained_optimum(method, &profile.weights(), p),
        })?
        .rho)
    };
    let mut body = format!("method: {method}\nscheme: {scheme}\n");
    let rho = match scheme {
        Scheme::Ppa => {
            let a = ppa_allocate(method, &profile, p, bounds)?;
            body.push_str(&groups_text(&a.groups));
            body.push_str(&format!("repaired: {}\n", if a.repaired { "yes" } else { "no" }));
            a.rho
        }
        Scheme::Eppa => crate::ppa::equal_allocation(cfg.users, p),
        Scheme::Ref => reference(ObjectiveForm::Exact)?,
    };
    let objective = objective_value(method, &rho, &profile, cfg.antennas, ObjectiveForm::Exact);
    body.push_str(&format!("rho: {}\nobjective: {objective}\n", join(rho.iter().map(f64::to_string))));
    let mut check_failed = false;
    if check {
        // the grouping allocator minimizes the relaxed objective, so it is
        // compared with the reference solver on that same objective
        let form = ObjectiveForm::Surrogate;
        let ours = objective_value(method, &rho, &profile, cfg.antennas, form);
        let theirs = objective_value(method, &reference(form)?, &profile, cfg.antennas, form);
        let gap = (ours - theirs) / theirs;
        check_failed = gap > CHECK_TOLERANCE;
        body.push_str(&format!(
            "check_objective: {ours}\nreference_objective: {theirs}\nrelative_gap: {gap}\ncheck: {}\n",
            if check_failed { "fail" } else { "pass" }
        ));
    }
    Ok(AllocateText { body, check_failed })
}
