//! Seeded Monte-Carlo experiments behind the figure data sets.
//!
//! Every experiment draws `n_large` large-scale drops. For each drop the
//! target cell's pilot powers are set by each scheme (the other cells stay
//! at equal power), and the per-drop quantity is averaged over the target
//! users. Curves report the mean and standard error of that quantity across
//! drops; CDF experiments keep the per-drop values.
//!
//! Drops run on a dedicated thread pool. Each drop reads only its own
//! counter-keyed random streams and results are reduced in drop order, so
//! reports are bit-identical for any worker count.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::airlink::{pilot_phase, sample_channels, SinrMomentAccumulator};
use crate::estimators::{estimate, EstimationMethod};
use crate::metrics::{
    achievable_rate, exp_rcee_closed, exp_rcee_eppa_high_power, exp_rcee_limit, rcee_sample, sinr_closed, sinr_limit,
};
use crate::ppa::{
    asymptotic_groups, equal_allocation, equal_fractions, ppa_allocate, unconstrained_optimum, AllocationObjective,
    InterferenceProfile, ObjectiveForm, PowerBounds,
};
use crate::refsolver::{solve, ConstrainedProblem};
use crate::rng::{trial_id, Purpose};
use crate::scenario::{build_layout, drop_users, large_scale, BetaSlice, LargeScaleRealization, PowerMatrix, SystemConfig};
use crate::stats::Estimate;
use crate::{db_to_linear, Error, Result};

pub use crate::rng::seed_schedule;
pub use crate::stats::EmpiricalCdf;

/// Right-continuous empirical CDF of the samples.
pub fn empirical_cdf(samples: &[f64]) -> Result<EmpiricalCdf> {
    EmpiricalCdf::new(samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentId {
    Validate,
    Fig3,
    Fig4a,
    Fig4b,
    Fig5a,
    Fig5b,
}

impl ExperimentId {
    pub const FIGURES: [ExperimentId; 5] = [Self::Fig3, Self::Fig4a, Self::Fig4b, Self::Fig5a, Self::Fig5b];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Validate => "validate",
            Self::Fig3 => "fig3",
            Self::Fig4a => "fig4a",
            Self::Fig4b => "fig4b",
            Self::Fig5a => "fig5a",
            Self::Fig5b => "fig5b",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    /// Accepts `3`, `fig3`, `4a`, `fig4a`, ... and `validate`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        let t = t.strip_prefix("fig").unwrap_or(&t);
        Ok(match t {
            "validate" => Self::Validate,
            "3" => Self::Fig3,
            "4a" => Self::Fig4a,
            "4b" => Self::Fig4b,
            "5a" => Self::Fig5a,
            "5b" => Self::Fig5b,
            _ => return Err(Error::Parse(format!("unknown experiment '{s}' (expected 3, 4a, 4b, 5a, 5b or validate)"))),
        })
    }
}

/// How the target cell's pilot powers are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// User-grouping allocation.
    Ppa,
    /// Equal power P/K.
    Eppa,
    /// Reference solver on the exact objective.
    Ref,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Ppa => "ppa",
            Self::Eppa => "eppa",
            Self::Ref => "ref",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ppa" => Ok(Self::Ppa),
            "eppa" => Ok(Self::Eppa),
            "ref" => Ok(Self::Ref),
            _ => Err(Error::Parse(format!("unknown scheme '{s}' (expected ppa, eppa or ref)"))),
        }
    }
}

/// Target-cell powers for one scheme. Other cells are at `P/K`.
pub fn scheme_allocation(
    scheme: Scheme,
    method: EstimationMethod,
    cfg: &SystemConfig,
    beta: &BetaSlice,
) -> Result<Vec<f64>> {
    let p = cfg.total_pilot_power;
    match scheme {
        Scheme::Eppa => Ok(equal_allocation(beta.users(), p)),
        Scheme::Ppa => {
            let profile = InterferenceProfile::equal_power(beta, p)?;
            Ok(ppa_allocate(method, &profile, p, PowerBounds::from_config(cfg)?)?.rho)
        }
        Scheme::Ref => {
            let profile = InterferenceProfile::equal_power(beta, p)?;
            let bounds = PowerBounds::from_config(cfg)?;
            let problem = ConstrainedProblem {
                objective: AllocationObjective {
                    method,
                    profile: &profile,
                    antennas: cfg.antennas,
                    form: ObjectiveForm::Exact,
                },
                budget: p,
                lower: bounds.min,
                upper: bounds.max,
                start: unconstrained_optimum(method, &profile.weights(), p),
            };
            Ok(solve(&problem)?.rho)
        }
    }
}

/// Full power matrix: target row from `target`, other rows at `P/K`.
pub fn power_matrix(cfg: &SystemConfig, cells: usize, target: &[f64]) -> PowerMatrix {
    PowerMatrix::uniform(cells, target.len(), cfg.equal_power()).with_target(target)
}

/// Large-scale realization of drop `index` under `cfg` (layout from
/// `cfg.reuse`).
pub fn sample_drop(cfg: &SystemConfig, index: usize) -> Result<LargeScaleRealization> {
    let layout = build_layout(cfg)?;
    let mut placement = seed_schedule(cfg.seed, index as u64, Purpose::Placement);
    let positions = drop_users(cfg, &layout, &mut placement);
    let mut shadowing = seed_schedule(cfg.seed, index as u64, Purpose::Shadowing);
    large_scale(cfg, &layout, &positions, &mut shadowing)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub id: ExperimentId,
    /// Antenna grid (fig3, fig5a, validate).
    pub antennas: Vec<usize>,
    /// Pilot budget grid in dB (fig4b).
    pub power_db: Vec<f64>,
    pub gammas: Vec<u32>,
    pub n_large: usize,
    pub n_small: usize,
    pub methods: Vec<EstimationMethod>,
    pub schemes: Vec<Scheme>,
    /// Worker threads; 0 lets the pool pick.
    pub jobs: usize,
}

/// Desk-scale antenna grid.
pub const DESK_ANTENNAS: [usize; 7] = [8, 16, 32, 64, 128, 256, 512];

impl ExperimentPlan {
    /// Desk-scale plan: 20 drops, 50 small-scale trials per drop.
    pub fn desk(id: ExperimentId) -> Self {
        let mut plan = Self {
            id,
            antennas: DESK_ANTENNAS.to_vec(),
            power_db: (0..=10).map(|i| 10.0 * i as f64).collect(),
            gammas: vec![1, 3, 7],
            n_large: 20,
            n_small: 50,
            methods: EstimationMethod::ALL.to_vec(),
            schemes: vec![Scheme::Ppa, Scheme::Eppa],
            jobs: 0,
        };
        match id {
            ExperimentId::Validate => {
                plan.antennas = vec![2, 8, 64];
                plan.gammas = vec![1];
                plan.n_large = 1;
                plan.n_small = 10_000;
            }
            ExperimentId::Fig5a => plan.gammas = vec![3],
            _ => {}
        }
        plan
    }

    /// The published counts: 100 drops with 100 small-scale trials each.
    pub fn paper_scale(id: ExperimentId) -> Self {
        let mut plan = Self::desk(id);
        if id != ExperimentId::Validate {
            plan.n_large = 100;
            plan.n_small = 100;
        }
        plan
    }

    pub fn check(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.into()));
        if self.n_large == 0 || self.n_small == 0 {
            return fail("drop and trial counts must be at least 1");
        }
        if self.gammas.is_empty() || self.methods.is_empty() || self.schemes.is_empty() {
            return fail("reuse set, methods and schemes must be non-empty");
        }
        if self.gammas.iter().any(|g| ![1, 3, 7].contains(g)) {
            return fail("reuse factors must be 1, 3 or 7");
        }
        let sorted_unique = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        let ants: Vec<f64> = self.antennas.iter().map(|&m| m as f64).collect();
        let gam: Vec<f64> = self.gammas.iter().map(|&g| g as f64).collect();
        if !sorted_unique(&gam) {
            return fail("reuse set must be sorted without repeats");
        }
        match self.id {
            ExperimentId::Fig3 | ExperimentId::Fig5a | ExperimentId::Validate => {
                if ants.is_empty() || !sorted_unique(&ants) || self.antennas[0] < 2 {
                    return fail("antenna grid must be non-empty, sorted, and start at M >= 2");
                }
            }
            ExperimentId::Fig4b => {
                if self.power_db.is_empty() || !sorted_unique(&self.power_db) {
                    return fail("power grid must be non-empty and sorted");
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// One point of a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    /// M or P in dB, depending on the experiment.
    pub x: f64,
    pub scheme: Scheme,
    pub method: EstimationMethod,
    pub gamma: u32,
    pub mean: f64,
    pub std_error: f64,
    pub closed_form: Option<f64>,
    pub asymptote: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfSeries {
    pub scheme: Scheme,
    pub method: EstimationMethod,
    pub gamma: u32,
    pub cdf: EmpiricalCdf,
}

/// Monte-Carlo check of one closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    /// `exp_rcee` or `sinr`.
    pub quantity: &'static str,
    pub antennas: usize,
    pub method: EstimationMethod,
    pub user: usize,
    pub monte_carlo: f64,
    /// NaN when no standard error is available.
    pub std_error: f64,
    pub closed_form: f64,
}

impl ValidationRow {
    pub fn relative_error(&self) -> f64 {
        (self.monte_carlo - self.closed_form).abs() / self.closed_form.abs()
    }

    pub fn within_sigmas(&self, k: f64) -> bool {
        self.std_error.is_nan() || (self.monte_carlo - self.closed_form).abs() <= k * self.std_error
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub id: ExperimentId,
    pub curves: Vec<CurvePoint>,
    pub cdfs: Vec<CdfSeries>,
    pub validation: Vec<ValidationRow>,
}

impl MetricReport {
    pub fn curve(&self, x: f64, scheme: Scheme, method: EstimationMethod, gamma: u32) -> Option<&CurvePoint> {
        self.curves
            .iter()
            .find(|c| c.x == x && c.scheme == scheme && c.method == method && c.gamma == gamma)
    }

    pub fn cdf(&self, scheme: Scheme, method: EstimationMethod, gamma: u32) -> Option<&EmpiricalCdf> {
        self.cdfs
            .iter()
            .find(|c| c.scheme == scheme && c.method == method && c.gamma == gamma)
            .map(|c| &c.cdf)
    }

    /// CSV header for this report's layout.
    pub fn csv_header(&self) -> &'static str {
        match self.id {
            ExperimentId::Fig3 => "M,scheme,method,gamma,mean_exp_rcee,stderr,closed_form",
            ExperimentId::Fig4b => "P_dB,scheme,method,gamma,mean_exp_rcee,stderr,closed_form,asymptote",
            ExperimentId::Fig5a => "M,scheme,method,gamma,mean_min_rate,stderr,asymptote",
            ExperimentId::Fig4a | ExperimentId::Fig5b => "scheme,method,gamma,value,cdf",
            ExperimentId::Validate => "quantity,M,method,user,monte_carlo,stderr,closed_form,rel_error",
        }
    }

    /// Header row then one LF-terminated row per record. Floats use the
    /// shortest decimal that round-trips.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(self.csv_header().split(','))?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        match self.id {
            ExperimentId::Fig4a | ExperimentId::Fig5b => {
                for s in &self.cdfs {
                    for (v, c) in s.cdf.steps() {
                        w.write_record([
                            s.scheme.to_string(),
                            s.method.to_string(),
                            s.gamma.to_string(),
                            v.to_string(),
                            c.to_string(),
                        ])?;
                    }
                }
            }
            ExperimentId::Validate => {
                for r in &self.validation {
                    let se = if r.std_error.is_nan() { String::new() } else { r.std_error.to_string() };
                    w.write_record([
                        r.quantity.to_string(),
                        r.antennas.to_string(),
                        r.method.to_string(),
                        (r.user + 1).to_string(),
                        r.monte_carlo.to_string(),
                        se,
                        r.closed_form.to_string(),
                        r.relative_error().to_string(),
                    ])?;
                }
            }
            id => {
                for c in &self.curves {
                    let mut rec = vec![
                        c.x.to_string(),
                        c.scheme.to_string(),
                        c.method.to_string(),
                        c.gamma.to_string(),
                        c.mean.to_string(),
                        c.std_error.to_string(),
                    ];
                    match id {
                        ExperimentId::Fig3 => rec.push(opt(c.closed_form)),
                        ExperimentId::Fig4b => {
                            rec.push(opt(c.closed_form));
                            rec.push(opt(c.asymptote));
                        }
                        _ => rec.push(opt(c.asymptote)),
                    }
                    w.write_record(rec)?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Runs `work(i)` for `i in 0..n` on a pool of `jobs` threads and returns
/// the results in index order.
pub fn ordered_parallel<T, F>(jobs: usize, n: usize, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(&work).collect::<Vec<_>>())
        .into_iter()
        .collect()
}

fn mean_and_error(values: &[f64]) -> (f64, f64) {
    match values.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (values[0], 0.0),
        _ => {
            let e = Estimate::from_samples(values).expect("two or more samples");
            (e.mean, e.std_error)
        }
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    s / n as f64
}

/// Every (scheme, method) combination in plan order.
fn combos(plan: &ExperimentPlan) -> Vec<(Scheme, EstimationMethod)> {
    plan.schemes
        .iter()
        .flat_map(|&s| plan.methods.iter().map(move |&m| (s, m)))
        .collect()
}

pub fn run_experiment(plan: &ExperimentPlan, cfg: &SystemConfig) -> Result<MetricReport> {
    plan.check()?;
    cfg.validate()?;
    match plan.id {
        ExperimentId::Validate => run_validate(plan, cfg),
        ExperimentId::Fig3 => run_fig3(plan, cfg),
        ExperimentId::Fig4a => run_limit_cdf(plan, cfg),
        ExperimentId::Fig4b => run_fig4b(plan, cfg),
        ExperimentId::Fig5a => run_fig5a(plan, cfg),
        ExperimentId::Fig5b => run_rate_cdf(plan, cfg),
    }
}

fn with_reuse(cfg: &SystemConfig, gamma: u32) -> SystemConfig {
    SystemConfig { reuse: gamma, ..cfg.clone() }
}

/// Per-drop allocations for every combo.
fn drop_allocations(
    combos: &[(Scheme, EstimationMethod)],
    cfg: &SystemConfig,
    beta: &BetaSlice,
) -> Result<Vec<Vec<f64>>> {
    combos.iter().map(|&(s, m)| scheme_allocation(s, m, cfg, beta)).collect()
}

/// Mean RCEE expectation against M: closed form and Monte Carlo with the
/// same channels and noise shared by every scheme.
fn run_fig3(plan: &ExperimentPlan, cfg: &SystemConfig) -> Result<MetricReport> {
    let combos = combos(plan);
    let mut curves = Vec::new();
    for &gamma in &plan.gammas {
        let cfg = with_reuse(cfg, gamma);
        // per drop: [M][combo] -> (mc mean, closed form)
        let per_drop = ordered_parallel(plan.jobs, plan.n_large, |d| {
            let real = sample_drop(&cfg, d)?;
            let beta = real.target_slice();
            let allocs = drop_allocations(&combos, &cfg, &beta)?;
            let powers: Vec<PowerMatrix> = allocs.iter().map(|a| power_matrix(&cfg, beta.cells(), a)).collect();
            plan.antennas
                .iter()
                .enumerate()
                .map(|(mi, &m)| {
                    let mut sums = vec![0.0; combos.len()];
                    for t in 0..plan.n_small {
                        let trial = trial_id(d as u64, ((mi as u64) << 24) | t as u64);
                        let channels = sample_channels(&beta, m, &mut seed_schedule(cfg.seed, trial, Purpose::Channel))?;
                        for (c, &(_, method)) in combos.iter().enumerate() {
                            let mut noise = seed_schedule(cfg.seed, trial, Purpose::PilotNoise);
                            let obs = pilot_phase(&channels, &powers[c], cfg.pilot_length, Some(&mut noise))?;
                            let est = estimate(method, &obs, &beta)?;
                            for k in 0..beta.users() {
                                sums[c] += rcee_sample(channels.get(0, k), est.get(k))?;
                            }
                        }
                    }
                    let scale = 1.0 / (plan.n_small * beta.users()) as f64;
                    combos
                        .iter()
                        .enumerate()
                        .map(|(c, &(_, method))| {
                            let cf = (0..beta.users())
                                .map(|k| {
                                    exp_rcee_closed(method, m, &powers[c].column(k), &beta.column(k))
                                        .map(|v| v.expect_finite("closed form at M >= 2"))
                                })
                                .sum::<Result<f64>>()?
                                / beta.users() as f64;
                            Ok((sums[c] * scale, cf))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for (mi, &m) in plan.antennas.iter().enumerate() {
            for (c, &(scheme, method)) in combos.iter().enumerate() {
                let mc: Vec<f64> = per_drop.iter().map(|d| d[mi][c].0).collect();
                let (mc_mean, se) = mean_and_error(&mc);
                curves.push(CurvePoint {
                    x: m as f64,
                    scheme,
                    method,
                    gamma,
                    mean: mc_mean,
                    std_error: se,
                    closed_form: Some(mean(per_drop.iter().map(|d| d[mi][c].1))),
                    asymptote: None,
                });
            }
        }
    }
    Ok(MetricReport {
        id: plan.id,
        curves,
        cdfs: Vec::new(),
        validation: Vec::new(),
    })
}

/// Per-drop user average of some per-user quantity, gathered into CDFs.
fn cdf_experiment<F>(plan: &ExperimentPlan, cfg: &SystemConfig, per_user_mean: F) -> Result<MetricReport>
where
    F: Fn(&SystemConfig, &BetaSlice, &PowerMatrix, EstimationMethod) -> f64 + Sync,
{
    let combos = combos(plan);
    let mut cdfs = Vec::new();
    for &gamma in &plan.gammas {
        let cfg = with_reuse(cfg, gamma);
        let per_drop = ordered_parallel(plan.jobs, plan.n_large, |d| {
            let beta = sample_drop(&cfg, d)?.target_slice();
            let allocs = drop_allocations(&combos, &cfg, &beta)?;
            Ok(combos
                .iter()
                .zip(&allocs)
                .map(|(&(_, method), a)| per_user_mean(&cfg, &beta, &power_matrix(&cfg, beta.cells(), a), method))
                .collect::<Vec<_>>())
        })?;
        for (c, &(scheme, method)) in combos.iter().enumerate() {
            let values: Vec<f64> = per_drop.iter().map(|d| d[c]).collect();
            cdfs.push(CdfSeries {
                scheme,
                method,
                gamma,
                cdf: EmpiricalCdf::new(&values)?,
            });
        }
    }
    Ok(MetricReport {
        id: plan.id,
        curves: Vec::new(),
        cdfs,
        validation: Vec::new(),
    })
}

/// CDF over drops of the user-averaged large-array RCEE limit.
fn run_limit_cdf(plan: &ExperimentPlan, cfg: &SystemConfig) -> Result<MetricReport> {
    cdf_experiment(plan, cfg, |_, beta, powers, method| {
        mean((0..beta.users()).map(|k| exp_rcee_limit(method, &powers.column(k), &beta.column(k))))
    })
}

/// CDF over drops of the user-averaged rate with the large-array SINR.
fn run_rate_cdf(plan: &ExperimentPlan, cfg: &SystemConfig) -> Result<MetricReport> {
    cdf_experiment(plan, cfg, |cfg, beta, powers, _| {
        mean((0..beta.users()).map(|k| {
            let s = sinr_limit(&powers.column(k), &beta.column(k)).finite().unwrap_or(f64::INFINITY);
            achievable_rate(cfg, s)
        }))
    })
}

/// Mean RCEE expectation at the configured M against the pilot budget, with
/// the high-power limit of each scheme.
fn run_fig4b(plan: &ExperimentPlan, cfg: &SystemConfig) -> Result<MetricReport> {
    let combos = combos(plan);
    let mut curves = Vec::new();
    for &gamma in &plan.gammas {
        let base = with_reuse(cfg, gamma);
        let per_drop = ordered_parallel(plan.jobs, plan.n_large, |d| {
            let beta = sample_drop(&base, d)?.target_slice();
            let asym = combos
                .iter()
                .map(|&(scheme, method)| high_power_limit(scheme, method, &base, &beta))
                .collect::<Result<Vec<_>>>()?;
            let values = plan
                .power_db
                .iter()
                .map(|&p_db| {
                    let cfg = SystemConfig {
                        total_pilot_power: db_to_linear(p_db),
                        ..base.clone()
                    };
                    let allocs = drop_allocations(&combos, &cfg, &beta)?;
                    combos
                        .iter()
                        .zip(&allocs)
                        .map(|(&(_, method), a)| {
                            let p = power_matrix(&cfg, beta.cells(), a);
                            let v = (0..beta.users())
                                .map(|k| {
                                    exp_rcee_closed(method, cfg.antennas, &p.column(k), &beta.column(k))
                                        .map(|v| v.expect_finite("closed form at M >= 2"))
                                })
                                .sum::<Result<f64>>()?;
                            Ok(v / beta.users() as f64)
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((values, asym))
        })?;
        for (pi, &p_db) in plan.power_db.iter().enumerate() {
            for (c, &(scheme, method)) in combos.iter().enumerate() {
                let vals: Vec<f64> = per_drop.iter().map(|d| d.0[pi][c]).collect();
                let (m, se) = mean_and_error(&vals);
                curves.push(CurvePoint {
                    x: p_db,
                    scheme,
                    method,
                    gamma,
                    mean: m,
                    std_error: se,
                    closed_form: Some(m),
                    asymptote: per_drop.iter().map(|d| d.1[c]).collect::<Option<Vec<f64>>>().map(mean),
                });
            }
        }
    }
    Ok(MetricReport {
        id: plan.id,
        curves,
        cdfs: Vec::new(),
        validation: Vec::new(),
    })
}

/// User-averaged M → ∞, P → ∞ limit of a scheme; `None` for the reference
/// solver, which has no closed-form limit.
fn high_power_limit(
    scheme: Scheme,
    method: EstimationMethod,
    cfg: &SystemConfig,
    beta: &BetaSlice,
) -> Result<Option<f64>> {
    let users = beta.users();
    Ok(match scheme {
        Scheme::Eppa => Some(mean((0..users).map(|k| exp_rcee_eppa_high_power(method, &beta.column(k))))),
        Scheme::Ppa => {
            let g = asymptotic_groups(method, beta, &equal_fractions(beta.cells(), users), cfg.mu)?;
            Some(mean((0..users).map(|k| g.exp_rcee(k))))
        }
        Scheme::Ref => None,
    })
}

/// Mean over drops of the minimum user rate against M.
fn run_fig5a(plan: &ExperimentPlan, cfg: &SystemConfig) -> Result<MetricReport> {
    let combos = combos(plan);
    let mut curves = Vec::new();
    for &gamma in &plan.gammas {
        let cfg = with_reuse(cfg, gamma);
        let per_drop = ordered_parallel(plan.jobs, plan.n_large, |d| {
            let beta = sample_drop(&cfg, d)?.target_slice();
            let allocs = drop_allocations(&combos, &cfg, &beta)?;
            let powers: Vec<PowerMatrix> = allocs.iter().map(|a| power_matrix(&cfg, beta.cells(), a)).collect();
            let min_rate = |f: &dyn Fn(usize) -> f64| (0..beta.users()).map(f).fold(f64::INFINITY, f64::min);
            let limits: Vec<f64> = powers
                .iter()
                .map(|p| {
                    min_rate(&|k| {
                        achievable_rate(&cfg, sinr_limit(&p.column(k), &beta.column(k)).finite().unwrap_or(f64::INFINITY))
                    })
                })
                .collect();
            let values: Vec<Vec<f64>> = plan
                .antennas
                .iter()
                .map(|&m| {
                    powers
                        .iter()
                        .map(|p| min_rate(&|k| achievable_rate(&cfg, sinr_closed(m, p, &beta, cfg.data_power, k))))
                        .collect()
                })
                .collect();
            Ok((values, limits))
        })?;
        for (mi, &m) in plan.antennas.iter().enumerate() {
            for (c, &(scheme, method)) in combos.iter().enumerate() {
                let vals: Vec<f64> = per_drop.iter().map(|d| d.0[mi][c]).collect();
                let (mean_v, se) = mean_and_error(&vals);
                curves.push(CurvePoint {
                    x: m as f64,
                    scheme,
                    method,
                    gamma,
                    mean: mean_v,
                    std_error: se,
                    closed_form: Some(mean_v),
                    asymptote: Some(mean(per_drop.iter().map(|d| d.1[c]))),
                });
            }
        }
    }
    Ok(MetricReport {
        id: plan.id,
        curves,
        cdfs: Vec::new(),
        validation: Vec::new(),
    })
}

/// Two-cell, two-user setting used by the closed-form checks.
pub fn synthetic_two_cell() -> (BetaSlice, PowerMatrix, f64) {
    let beta = BetaSlice::from_rows(&[vec![1.0, 0.6], vec![0.3, 0.2]]).expect("valid rows");
    let powers = PowerMatrix::from_rows(&[vec![2.0, 4.0], vec![1.5, 1.0]]).expect("valid rows");
    (beta, powers, 10.0)
}

/// Monte-Carlo check of the RCEE expectation at every M of the plan and of
/// the SINR at each M, on [`synthetic_two_cell`].
fn run_validate(plan: &ExperimentPlan, cfg: &SystemConfig) -> Result<MetricReport> {
    let (beta, powers, data_power) = synthetic_two_cell();
    let users = beta.users();
    let mut validation = Vec::new();
    for (mi, &m) in plan.antennas.iter().enumerate() {
        let trials = ordered_parallel(plan.jobs, plan.n_small, |t| {
            let trial = trial_id(mi as u64, t as u64);
            let ch = sample_channels(&beta, m, &mut seed_schedule(cfg.seed, trial, Purpose::Channel))?;
            let mut noise = seed_schedule(cfg.seed, trial, Purpose::PilotNoise);
            let obs = pilot_phase(&ch, &powers, users, Some(&mut noise))?;
            let ests = EstimationMethod::ALL
                .iter()
                .map(|&method| estimate(method, &obs, &beta))
                .collect::<Result<Vec<_>>>()?;
            Ok((ch, ests))
        })?;
        for (mx, &method) in EstimationMethod::ALL.iter().enumerate() {
            if !plan.methods.contains(&method) {
                continue;
            }
            for k in 0..users {
                let samples = trials
                    .iter()
                    .map(|(ch, ests)| rcee_sample(ch.get(0, k), ests[mx].get(k)))
                    .collect::<Result<Vec<_>>>()?;
                let (mc, se) = mean_and_error(&samples);
                let cf = exp_rcee_closed(method, m, &powers.column(k), &beta.column(k))?.expect_finite("M >= 2");
                validation.push(ValidationRow {
                    quantity: "exp_rcee",
                    antennas: m,
                    method,
                    user: k,
                    monte_carlo: mc,
                    std_error: se,
                    closed_form: cf,
                });
                let mut acc = SinrMomentAccumulator::new(k, beta.cells(), users);
                for (ch, ests) in &trials {
                    acc.push(ch, &ests[mx]);
                }
                validation.push(ValidationRow {
                    quantity: "sinr",
                    antennas: m,
                    method,
                    user: k,
                    monte_carlo: acc.finish(data_power)?.sinr,
                    std_error: f64::NAN,
                    closed_form: sinr_closed(m, &powers, &beta, data_power, k),
                });
            }
        }
    }
    Ok(MetricReport {
        id: plan.id,
        curves: Vec::new(),
        cdfs: Vec::new(),
        validation,
    })
}

/// One row of the allocator timing comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub users: usize,
    pub ppa_us: f64,
    pub ref_us: f64,
}

impl BenchRow {
    pub fn speedup(&self) -> f64 {
        self.ref_us / self.ppa_us
    }
}

/// Mean wall-clock time per call of the grouping allocator and the
/// reference solver on drops with K = 2..=`max_users` users. Each K uses
/// `instances` drops; μ is clamped into the admissible range for that K.
pub fn run_bench(cfg: &SystemConfig, method: EstimationMethod, max_users: usize, instances: usize) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for k in 2..=max_users {
        let cfg = SystemConfig {
            users: k,
            pilot_length: k,
            mu: cfg.mu.clamp(1.5, (k as f64 + 1.0) / 2.0),
            ..cfg.clone()
        };
        let mut ppa_time = 0.0;
        let mut ref_time = 0.0;
        for i in 0..instances {
            let beta = sample_drop(&cfg, i)?.target_slice();
            let profile = InterferenceProfile::equal_power(&beta, cfg.total_pilot_power)?;
            let bounds = PowerBounds::from_config(&cfg)?;
            let reps = 200;
            let start = Instant::now();
            for _ in 0..reps {
                std::hint::black_box(ppa_allocate(method, std::hint::black_box(&profile), cfg.total_pilot_power, bounds)?);
            }
            ppa_time += start.elapsed().as_secs_f64() / reps as f64;
            let start = Instant::now();
            std::hint::black_box(scheme_allocation(Scheme::Ref, method, &cfg, &beta)?);
            ref_time += start.elapsed().as_secs_f64();
        }
        rows.push(BenchRow {
            users: k,
            ppa_us: ppa_time / instances as f64 * 1e6,
            ref_us: ref_time / instances as f64 * 1e6,
        });
    }
    Ok(rows)
}

/// `K,ppa_us,ref_us,speedup`
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("K,ppa_us,ref_us,speedup\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.users, r.ppa_us, r.ref_us, r.speedup());
    }
    out
}
