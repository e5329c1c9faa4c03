//! Pilot power allocation for the target cell.
//!
//! The problem is to minimize the mean RCEE expectation over the K target
//! users subject to `Σ ρ_k = P` and `ρ_min <= ρ_k <= ρ_max`, with the other
//! cells' pilot powers held fixed. Dropping the box constraint (and using the
//! MMSE upper bound in place of the exact MMSE expression) gives a
//! closed-form Lagrangian optimum in terms of the per-user weights
//! `w_k = υ_k / β_00k`:
//!
//! - LS: `ρ_k = sqrt(w_k) / λ`, `λ = Σ sqrt(w) / P`
//! - MMSE: `ρ_k = sqrt(w_k) / λ - w_k`, `λ = Σ sqrt(w) / (P + Σ w)`
//!
//! [`ppa_allocate`] then handles the box by repeatedly pinning the worst
//! violator to its bound and re-solving the closed form on the remaining
//! users with the remaining budget.

use crate::estimators::EstimationMethod;
use crate::metrics::{exp_rcee_bound_mmse, exp_rcee_from_parts};
use crate::refsolver::Objective;
use crate::scenario::{BetaSlice, PowerMatrix, SystemConfig};
use crate::{Error, Result};

/// Relative slack when testing the box, so a value sitting on a bound up to
/// rounding is not treated as a violation.
const BOX_SLACK: f64 = 1e-12;

/// Per-user interference `υ_k = Σ_{l≠0} ρ_lk β_0lk + 1` and own gain
/// `β_00k`, with the other cells' powers fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceProfile {
    upsilon: Vec<f64>,
    own_gain: Vec<f64>,
}

impl InterferenceProfile {
    /// Uses rows 1.. of `powers`; the target row is ignored.
    pub fn new(beta: &BetaSlice, powers: &PowerMatrix) -> Result<Self> {
        if beta.cells() != powers.cells() || beta.users() != powers.users() {
            return Err(Error::Domain("beta and power shapes differ".into()));
        }
        let upsilon = (0..beta.users())
            .map(|k| (1..beta.cells()).map(|l| powers.get(l, k) * beta.get(l, k)).sum::<f64>() + 1.0)
            .collect();
        Self::from_parts(upsilon, (0..beta.users()).map(|k| beta.own(k)).collect())
    }

    /// Other cells at equal power `P/K`.
    pub fn equal_power(beta: &BetaSlice, total_power: f64) -> Result<Self> {
        let p = PowerMatrix::uniform(beta.cells(), beta.users(), total_power / beta.users() as f64);
        Self::new(beta, &p)
    }

    /// Noise-free profile `υ̇_k = P Σ_{l≠0} δ_lk β_0lk` with `δ_lk = ρ_lk / P`.
    pub fn noise_free(beta: &BetaSlice, fractions: &PowerMatrix, total_power: f64) -> Result<Self> {
        let upsilon = (0..beta.users())
            .map(|k| total_power * (1..beta.cells()).map(|l| fractions.get(l, k) * beta.get(l, k)).sum::<f64>())
            .collect();
        Self::from_parts(upsilon, (0..beta.users()).map(|k| beta.own(k)).collect())
    }

    pub fn from_parts(upsilon: Vec<f64>, own_gain: Vec<f64>) -> Result<Self> {
        if upsilon.len() != own_gain.len() || upsilon.is_empty() {
            return Err(Error::Domain("interference and gain vectors must be non-empty and equal length".into()));
        }
        if upsilon.iter().chain(&own_gain).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Domain("interference and gains must be positive and finite".into()));
        }
        Ok(Self { upsilon, own_gain })
    }

    pub fn users(&self) -> usize {
        self.upsilon.len()
    }

    pub fn upsilon(&self, k: usize) -> f64 {
        self.upsilon[k]
    }

    pub fn own_gain(&self, k: usize) -> f64 {
        self.own_gain[k]
    }

    /// `υ_k / β_00k`
    pub fn weight(&self, k: usize) -> f64 {
        self.upsilon[k] / self.own_gain[k]
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.users()).map(|k| self.weight(k)).collect()
    }
}

/// `[ρ_min, ρ_max]` box for one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBounds {
    pub min: f64,
    pub max: f64,
}

impl PowerBounds {
    /// `ρ_min = P/(2K)`, `ρ_max = μP/K` with μ in `[3/2, (K+1)/2]`.
    pub fn from_mu(users: usize, total_power: f64, mu: f64) -> Result<Self> {
        let hi = (users as f64 + 1.0) / 2.0;
        if !(1.5..=hi).contains(&mu) {
            return Err(Error::Config(format!("mu = {mu} outside [1.5, {hi}] for K = {users}")));
        }
        let k = users as f64;
        Self::explicit(users, total_power, total_power / (2.0 * k), mu * total_power / k)
    }

    pub fn from_config(cfg: &SystemConfig) -> Result<Self> {
        Self::from_mu(cfg.users, cfg.total_pilot_power, cfg.mu)
    }

    /// Any box with `K ρ_min <= P <= K ρ_max`.
    pub fn explicit(users: usize, total_power: f64, min: f64, max: f64) -> Result<Self> {
        let k = users as f64;
        let ok = users > 0
            && total_power > 0.0
            && min >= 0.0
            && min <= max
            && k * min <= total_power * (1.0 + BOX_SLACK)
            && k * max >= total_power * (1.0 - BOX_SLACK);
        if !ok {
            return Err(Error::Infeasible(format!(
                "box [{min}, {max}] cannot hold budget {total_power} over {users} users"
            )));
        }
        Ok(Self { min, max })
    }

    fn below(&self, rho: f64) -> bool {
        rho < self.min * (1.0 - BOX_SLACK)
    }

    fn above(&self, rho: f64) -> bool {
        rho > self.max * (1.0 + BOX_SLACK)
    }
}

/// Partition of the target users produced by the grouping loop.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UserGroups {
    /// Users whose power comes from the closed form.
    pub free: Vec<usize>,
    pub at_min: Vec<usize>,
    pub at_max: Vec<usize>,
}

impl UserGroups {
    pub fn total(&self) -> usize {
        self.free.len() + self.at_min.len() + self.at_max.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotAllocation {
    pub rho: Vec<f64>,
    pub groups: UserGroups,
    pub method: EstimationMethod,
    /// Number of users pinned to a bound.
    pub pins: usize,
    /// The grouping loop left a pin that the optimality conditions reject,
    /// so the result was replaced by the clipped Lagrangian solution.
    pub repaired: bool,
}

/// Closed-form optimum of the relaxed (box-free) problem over the given
/// weights. MMSE entries can come out negative for very uneven weights.
pub fn unconstrained_optimum(method: EstimationMethod, weights: &[f64], total_power: f64) -> Vec<f64> {
    if weights.windows(2).all(|w| w[0] == w[1]) {
        return equal_allocation(weights.len(), total_power);
    }
    let root_sum: f64 = weights.iter().map(|w| w.sqrt()).sum();
    match method {
        EstimationMethod::Ls => {
            let lambda = root_sum / total_power;
            weights.iter().map(|w| w.sqrt() / lambda).collect()
        }
        EstimationMethod::Mmse => {
            let lambda = root_sum / (total_power + weights.iter().sum::<f64>());
            weights.iter().map(|w| w.sqrt() / lambda - w).collect()
        }
    }
}

/// Equal allocation `P/K`.
pub fn equal_allocation(users: usize, total_power: f64) -> Vec<f64> {
    vec![total_power / users as f64; users]
}

fn argmax_by(users: &[usize], key: impl Fn(usize) -> f64) -> Option<usize> {
    users.iter().copied().fold(None, |best, k| match best {
        Some(b) if key(b) >= key(k) => Some(b),
        _ => Some(k),
    })
}

/// User-grouping allocation.
///
/// Starting from the closed-form optimum over all users, each pass finds
/// the worst user below `ρ_min` and the worst above `ρ_max`. The one with
/// the larger distance to its bound is pinned (ties pin the low one, and a
/// low violator is pinned whenever there is no high violator), its power is
/// taken out of the budget and the closed form is re-solved over the users
/// still free. Stops when every free user is inside the box, after at most
/// K passes.
///
/// A pin that would leave the remaining users unable to share the remaining
/// budget inside the box is skipped in favour of the other violator. If both
/// are ruled out, the free users are finished with [`clipped_lagrangian`].
pub fn ppa_allocate(
    method: EstimationMethod,
    profile: &InterferenceProfile,
    total_power: f64,
    bounds: PowerBounds,
) -> Result<PilotAllocation> {
    let users = profile.users();
    PowerBounds::explicit(users, total_power, bounds.min, bounds.max)?;
    let weights = profile.weights();

    let mut rho = unconstrained_optimum(method, &weights, total_power);
    let mut groups = UserGroups {
        free: (0..users).collect(),
        ..UserGroups::default()
    };
    let mut budget = total_power;
    let mut pins = 0;

    for _ in 0..users {
        let low: Vec<usize> = groups.free.iter().copied().filter(|&k| bounds.below(rho[k])).collect();
        let high: Vec<usize> = groups.free.iter().copied().filter(|&k| bounds.above(rho[k])).collect();
        if low.is_empty() && high.is_empty() {
            break;
        }
        let worst_low = argmax_by(&low, |k| (rho[k] - bounds.min).abs());
        let worst_high = argmax_by(&high, |k| (rho[k] - bounds.max).abs());
        let n = groups.free.len() as f64;
        // a pin must leave the remaining users a feasible budget
        let can_pin_low = budget - bounds.min <= (n - 1.0) * bounds.max * (1.0 + BOX_SLACK);
        let can_pin_high = budget - bounds.max >= (n - 1.0) * bounds.min * (1.0 - BOX_SLACK);
        let worst_low = worst_low.filter(|_| can_pin_low);
        let worst_high = worst_high.filter(|_| can_pin_high);
        let pin_low = match (worst_low, worst_high) {
            (Some(a), Some(b)) => (rho[a] - bounds.min).abs() >= (rho[b] - bounds.max).abs(),
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => {
                let w: Vec<f64> = groups.free.iter().map(|&k| weights[k]).collect();
                let filled = clipped_lagrangian(method, &w, budget, bounds);
                for (&k, r) in groups.free.iter().zip(filled) {
                    rho[k] = r;
                }
                let free = std::mem::take(&mut groups.free);
                regroup(&mut groups, free, &rho, bounds);
                break;
            }
        };
        let (user, value) = if pin_low {
            let k = worst_low.expect("low violator present");
            groups.at_min.push(k);
            (k, bounds.min)
        } else {
            let k = worst_high.expect("high violator present");
            groups.at_max.push(k);
            (k, bounds.max)
        };
        rho[user] = value;
        budget -= value;
        groups.free.retain(|&k| k != user);
        pins += 1;

        if !groups.free.is_empty() {
            let w: Vec<f64> = groups.free.iter().map(|&k| weights[k]).collect();
            for (&k, r) in groups.free.iter().zip(unconstrained_optimum(method, &w, budget)) {
                rho[k] = r;
            }
        }
    }
    // A greedy pin can outlive its reason: an early ρ_max pin stays even
    // after later ρ_min pins shrink the budget below what that user needs.
    let repaired = !pins_consistent(method, &weights, &rho, &groups);
    if repaired {
        rho = clipped_lagrangian(method, &weights, total_power, bounds);
        groups = UserGroups::default();
        regroup(&mut groups, (0..users).collect(), &rho, bounds);
    }
    groups.at_min.sort_unstable();
    groups.at_max.sort_unstable();
    Ok(PilotAllocation {
        rho,
        groups,
        method,
        pins,
        repaired,
    })
}

fn regroup(groups: &mut UserGroups, users: Vec<usize>, rho: &[f64], bounds: PowerBounds) {
    for k in users {
        if rho[k] == bounds.min {
            groups.at_min.push(k);
        } else if rho[k] == bounds.max {
            groups.at_max.push(k);
        } else {
            groups.free.push(k);
        }
    }
}

/// Marginal decrease of the relaxed objective per unit of pilot power.
fn marginal(method: EstimationMethod, w: f64, rho: f64) -> f64 {
    match method {
        EstimationMethod::Ls => w / (rho * rho),
        EstimationMethod::Mmse => w / ((w + rho) * (w + rho)),
    }
}

/// KKT check of the final grouping: no user at ρ_max may value power less
/// than a free user, and none at ρ_min more.
fn pins_consistent(method: EstimationMethod, weights: &[f64], rho: &[f64], groups: &UserGroups) -> bool {
    const TOLERANCE: f64 = 1e-9;
    let m = |k: usize| marginal(method, weights[k], rho[k]);
    let free = groups.free.iter().map(|&k| m(k));
    let hi = groups.at_max.iter().map(|&k| m(k)).chain(free.clone()).fold(f64::INFINITY, f64::min);
    let lo = groups.at_min.iter().map(|&k| m(k)).chain(free).fold(0.0, f64::max);
    lo <= hi * (1.0 + TOLERANCE)
}

/// Exact optimum of the relaxed objective over the box: the Lagrangian
/// form clipped to `[min, max]`, with λ set by bisection so the powers sum
/// to the budget.
pub fn clipped_lagrangian(method: EstimationMethod, weights: &[f64], total_power: f64, bounds: PowerBounds) -> Vec<f64> {
    let at = |inv_lambda: f64| -> Vec<f64> {
        weights
            .iter()
            .map(|w| {
                let r = match method {
                    EstimationMethod::Ls => w.sqrt() * inv_lambda,
                    EstimationMethod::Mmse => w.sqrt() * inv_lambda - w,
                };
                r.clamp(bounds.min, bounds.max)
            })
            .collect()
    };
    let sum = |v: &[f64]| v.iter().sum::<f64>();
    // the powers grow with 1/λ; bracket then bisect on it
    let (mut lo, mut hi) = (0.0, 1.0);
    while sum(&at(hi)) < total_power && hi < 1e300 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sum(&at(mid)) < total_power {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(hi)
}

/// Convenience wrapper: profile from the other cells' powers, bounds and
/// budget from the config.
pub fn allocate_for(
    method: EstimationMethod,
    cfg: &SystemConfig,
    beta: &BetaSlice,
    powers: &PowerMatrix,
) -> Result<PilotAllocation> {
    let profile = InterferenceProfile::new(beta, powers)?;
    ppa_allocate(method, &profile, cfg.total_pilot_power, PowerBounds::from_config(cfg)?)
}

/// Which per-user expression the objective averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveForm {
    /// Exact closed-form expectation.
    Exact,
    /// LS exact form, MMSE upper bound (the relaxed problem's objective).
    Surrogate,
}

fn per_user(method: EstimationMethod, form: ObjectiveForm, antennas: usize, upsilon: f64, s: f64) -> f64 {
    match (method, form) {
        (EstimationMethod::Mmse, ObjectiveForm::Surrogate) => {
            let m = antennas as f64;
            m * upsilon / ((m - 1.0) * (upsilon + s))
        }
        _ => exp_rcee_from_parts(method, antennas, upsilon, s)
            .expect("antennas >= 2")
            .expect_finite("objective term"),
    }
}

/// d/ds of the per-user expression, s = ρβ.
fn per_user_slope(method: EstimationMethod, form: ObjectiveForm, antennas: usize, upsilon: f64, s: f64) -> f64 {
    let c = antennas as f64 / (antennas as f64 - 1.0);
    match (method, form) {
        (EstimationMethod::Ls, _) => -c * upsilon / (s * s),
        (EstimationMethod::Mmse, ObjectiveForm::Exact) => upsilon * ((c - 2.0) * upsilon - c * s) / (upsilon + s).powi(3),
        (EstimationMethod::Mmse, ObjectiveForm::Surrogate) => -c * upsilon / (upsilon + s).powi(2),
    }
}

/// Mean per-user RCEE expectation of a target-cell allocation.
pub fn objective_value(
    method: EstimationMethod,
    rho: &[f64],
    profile: &InterferenceProfile,
    antennas: usize,
    form: ObjectiveForm,
) -> f64 {
    assert!(antennas >= 2, "objective needs M >= 2");
    assert_eq!(rho.len(), profile.users());
    rho.iter()
        .enumerate()
        .map(|(k, r)| per_user(method, form, antennas, profile.upsilon(k), r * profile.own_gain(k)))
        .sum::<f64>()
        / rho.len() as f64
}

/// Gradient of [`objective_value`] with respect to the target powers.
pub fn objective_gradient(
    method: EstimationMethod,
    rho: &[f64],
    profile: &InterferenceProfile,
    antennas: usize,
    form: ObjectiveForm,
    grad: &mut [f64],
) {
    let inv_k = 1.0 / rho.len() as f64;
    for (k, (g, r)) in grad.iter_mut().zip(rho).enumerate() {
        let b = profile.own_gain(k);
        *g = inv_k * b * per_user_slope(method, form, antennas, profile.upsilon(k), r * b);
    }
}

/// The allocation objective as a [`refsolver::Objective`](Objective).
#[derive(Debug, Clone)]
pub struct AllocationObjective<'a> {
    pub method: EstimationMethod,
    pub profile: &'a InterferenceProfile,
    pub antennas: usize,
    pub form: ObjectiveForm,
}

impl Objective for AllocationObjective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        objective_value(self.method, x, self.profile, self.antennas, self.form)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        objective_gradient(self.method, x, self.profile, self.antennas, self.form, grad)
    }
}

/// `α = ρ_min K / P`.
pub const ALPHA: f64 = 0.5;

/// Reference budget for the noise-free grouping; any positive value gives
/// the same partition.
pub const ASYMPTOTIC_REFERENCE_POWER: f64 = 1e6;

/// User groups and constants of the joint M → ∞, P → ∞ limit.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticGroups {
    pub method: EstimationMethod,
    pub groups: UserGroups,
    pub users: usize,
    pub alpha: f64,
    pub mu: f64,
    /// `Σ_{l≠0} δ_lk β_0lk` per user.
    pub scaled_interference: Vec<f64>,
    pub own_gain: Vec<f64>,
    /// `1 - (α |min| + μ |max|) / K`, the budget share left to free users.
    pub free_share: f64,
    /// `Σ_{k free} sqrt(I_k / β_00k)`
    pub root_sum: f64,
    /// `Σ_{k free} I_k / β_00k`
    pub weight_sum: f64,
}

/// Default power fractions of the other cells: equal power, `δ_lk = 1/K`.
pub fn equal_fractions(cells: usize, users: usize) -> PowerMatrix {
    PowerMatrix::uniform(cells, users, 1.0 / users as f64)
}

/// Runs the grouping loop on the noise-free objective at
/// [`ASYMPTOTIC_REFERENCE_POWER`]. The fractions' target row is ignored.
pub fn asymptotic_groups(
    method: EstimationMethod,
    beta: &BetaSlice,
    fractions: &PowerMatrix,
    mu: f64,
) -> Result<AsymptoticGroups> {
    asymptotic_groups_at(method, beta, fractions, mu, ASYMPTOTIC_REFERENCE_POWER)
}

/// [`asymptotic_groups`] at an explicit reference budget.
pub fn asymptotic_groups_at(
    method: EstimationMethod,
    beta: &BetaSlice,
    fractions: &PowerMatrix,
    mu: f64,
    reference_power: f64,
) -> Result<AsymptoticGroups> {
    if (1..fractions.cells()).any(|l| (0..fractions.users()).any(|k| !(fractions.get(l, k) > 0.0 && fractions.get(l, k) < 1.0))) {
        return Err(Error::Domain("power fractions of other cells must lie in (0, 1)".into()));
    }
    let users = beta.users();
    let profile = InterferenceProfile::noise_free(beta, fractions, reference_power)?;
    let bounds = PowerBounds::from_mu(users, reference_power, mu)?;
    let alloc = ppa_allocate(method, &profile, reference_power, bounds)?;
    let scaled_interference: Vec<f64> = (0..users).map(|k| profile.upsilon(k) / reference_power).collect();
    let own_gain: Vec<f64> = (0..users).map(|k| beta.own(k)).collect();
    let k = users as f64;
    let free_share = 1.0 - (ALPHA * alloc.groups.at_min.len() as f64 + mu * alloc.groups.at_max.len() as f64) / k;
    let root_sum = alloc.groups.free.iter().map(|&u| (scaled_interference[u] / own_gain[u]).sqrt()).sum();
    let weight_sum = alloc.groups.free.iter().map(|&u| scaled_interference[u] / own_gain[u]).sum();
    Ok(AsymptoticGroups {
        method,
        groups: alloc.groups,
        users,
        alpha: ALPHA,
        mu,
        scaled_interference,
        own_gain,
        free_share,
        root_sum,
        weight_sum,
    })
}

/// Limit of `I/(a β)` (LS) or `I/(I + a β)` (MMSE) for a user pinned at
/// power `a P`.
pub fn pinned_limit(method: EstimationMethod, scaled_interference: f64, own_gain: f64, budget_fraction: f64) -> f64 {
    let s = budget_fraction * own_gain;
    match method {
        EstimationMethod::Ls => scaled_interference / s,
        EstimationMethod::Mmse => scaled_interference / (scaled_interference + s),
    }
}

impl AsymptoticGroups {
    /// `I_k Σ_{free} sqrt(I/β)`
    pub fn phi(&self, k: usize) -> f64 {
        self.scaled_interference[k] * self.root_sum
    }

    /// `sqrt(β_00k I_k)`
    pub fn psi(&self, k: usize) -> f64 {
        (self.own_gain[k] * self.scaled_interference[k]).sqrt()
    }

    /// Limit of the RCEE expectation for user k as M → ∞ then P → ∞.
    /// Users pinned to a bound hold the fixed budget share `α/K` or `μ/K`.
    pub fn exp_rcee(&self, k: usize) -> f64 {
        let kf = self.users as f64;
        let (i, b) = (self.scaled_interference[k], self.own_gain[k]);
        if self.groups.at_min.contains(&k) {
            pinned_limit(self.method, i, b, self.alpha / kf)
        } else if self.groups.at_max.contains(&k) {
            pinned_limit(self.method, i, b, self.mu / kf)
        } else {
            let denom = match self.method {
                EstimationMethod::Ls => self.free_share,
                EstimationMethod::Mmse => self.free_share + self.weight_sum,
            };
            self.phi(k) / (denom * self.psi(k))
        }
    }
}

pub fn exp_rcee_asymptotic(groups: &AsymptoticGroups, k: usize) -> f64 {
    groups.exp_rcee(k)
}

/// Mean per-user M → ∞ limit of an allocation, for a fixed profile.
pub fn mean_limit(method: EstimationMethod, rho: &[f64], profile: &InterferenceProfile) -> f64 {
    rho.iter()
        .enumerate()
        .map(|(k, r)| crate::metrics::exp_rcee_limit_from_parts(method, profile.upsilon(k), r * profile.own_gain(k)))
        .sum::<f64>()
        / rho.len() as f64
}

/// MMSE upper bound for a single user; re-exported for the objective tests.
pub fn surrogate_mmse(antennas: usize, rho_col: &[f64], beta_col: &[f64]) -> Result<f64> {
    exp_rcee_bound_mmse(antennas, rho_col, beta_col)
}
