//! RCEE, its expectation, SINR and achievable rate.
//!
//! Per-user formulas take the pilot-k column of powers and large-scale
//! coefficients, `rho_col[l] = ρ_lk` and `beta_col[l] = β_0lk`, with index 0
//! the target cell. Two per-user scalars appear everywhere:
//!
//! - interference `υ = Σ_{l≠0} ρ_lk β_0lk + 1`
//! - signal `s = ρ_0k β_00k`

use std::fmt;

use num_complex::Complex64;

use crate::airlink::norm_sqr;
use crate::estimators::EstimationMethod;
use crate::scenario::{BetaSlice, PowerMatrix, SystemConfig};
use crate::stats::Estimate;
use crate::{Error, Result};

/// A value that may be +∞. Used where infinity is part of the result
/// (single-antenna RCEE expectation, interference-free SINR limit).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    Infinite,
}

impl ExtReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtReal::Infinite)
    }

    /// Panics on the infinite marker.
    pub fn expect_finite(self, what: &str) -> f64 {
        self.finite().unwrap_or_else(|| panic!("{what} is infinite"))
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::Infinite => f.write_str("inf"),
        }
    }
}

fn check_column(rho_col: &[f64], beta_col: &[f64]) {
    assert!(!rho_col.is_empty(), "empty power column");
    assert_eq!(rho_col.len(), beta_col.len(), "power and beta columns differ in length");
}

/// `Σ_{l≠0} ρ_lk β_0lk + 1`
pub fn interference(rho_col: &[f64], beta_col: &[f64]) -> f64 {
    check_column(rho_col, beta_col);
    rho_col[1..].iter().zip(&beta_col[1..]).map(|(r, b)| r * b).sum::<f64>() + 1.0
}

/// `ρ_0k β_00k`
pub fn signal(rho_col: &[f64], beta_col: &[f64]) -> f64 {
    check_column(rho_col, beta_col);
    rho_col[0] * beta_col[0]
}

/// `Λ = ‖h - ĥ‖² / ‖h‖²`
pub fn rcee_sample(h: &[Complex64], h_hat: &[Complex64]) -> Result<f64> {
    if h.len() != h_hat.len() {
        return Err(Error::Domain("channel and estimate lengths differ".into()));
    }
    let denom = norm_sqr(h);
    if denom <= 0.0 {
        return Err(Error::Domain("RCEE of a zero channel".into()));
    }
    let err: f64 = h.iter().zip(h_hat).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(err / denom)
}

/// Closed-form E{Λ} from the per-user interference and signal scalars.
///
/// - M = 1: infinite for both estimators.
/// - LS: `M υ / ((M-1) s)`
/// - MMSE: `υ (υ + M s/(M-1)) / (υ + s)²`
pub fn exp_rcee_from_parts(method: EstimationMethod, antennas: usize, upsilon: f64, signal: f64) -> Result<ExtReal> {
    match antennas {
        0 => Err(Error::Domain("antenna count must be at least 1".into())),
        1 => Ok(ExtReal::Infinite),
        m => {
            let ratio = m as f64 / (m as f64 - 1.0);
            Ok(ExtReal::Finite(match method {
                EstimationMethod::Ls => ratio * upsilon / signal,
                EstimationMethod::Mmse => upsilon * (upsilon + ratio * signal) / (upsilon + signal).powi(2),
            }))
        }
    }
}

/// Closed-form expectation of the RCEE for one target user.
pub fn exp_rcee_closed(method: EstimationMethod, antennas: usize, rho_col: &[f64], beta_col: &[f64]) -> Result<ExtReal> {
    exp_rcee_from_parts(method, antennas, interference(rho_col, beta_col), signal(rho_col, beta_col))
}

/// Upper bound `M υ / ((M-1)(υ + s))` on the MMSE expectation.
pub fn exp_rcee_bound_mmse(antennas: usize, rho_col: &[f64], beta_col: &[f64]) -> Result<f64> {
    if antennas < 2 {
        return Err(Error::Domain(format!("MMSE bound needs M >= 2, got {antennas}")));
    }
    let upsilon = interference(rho_col, beta_col);
    let s = signal(rho_col, beta_col);
    let m = antennas as f64;
    Ok(m * upsilon / ((m - 1.0) * (upsilon + s)))
}

/// M → ∞ limit from the per-user scalars: LS `υ/s`, MMSE `υ/(υ+s)`.
pub fn exp_rcee_limit_from_parts(method: EstimationMethod, upsilon: f64, signal: f64) -> f64 {
    match method {
        EstimationMethod::Ls => upsilon / signal,
        EstimationMethod::Mmse => upsilon / (upsilon + signal),
    }
}

/// M → ∞ limit of the RCEE expectation; also the almost-sure limit of Λ.
pub fn exp_rcee_limit(method: EstimationMethod, rho_col: &[f64], beta_col: &[f64]) -> f64 {
    exp_rcee_limit_from_parts(method, interference(rho_col, beta_col), signal(rho_col, beta_col))
}

/// Large-array limit with equal powers P/K everywhere.
pub fn exp_rcee_eppa_limit(method: EstimationMethod, beta_col: &[f64], users: usize, total_power: f64) -> f64 {
    let noise = users as f64 / total_power;
    let others: f64 = beta_col[1..].iter().sum();
    match method {
        EstimationMethod::Ls => (others + noise) / beta_col[0],
        EstimationMethod::Mmse => (others + noise) / (others + beta_col[0] + noise),
    }
}

/// Equal-power limit as both M and P grow without bound.
pub fn exp_rcee_eppa_high_power(method: EstimationMethod, beta_col: &[f64]) -> f64 {
    let others: f64 = beta_col[1..].iter().sum();
    match method {
        EstimationMethod::Ls => others / beta_col[0],
        EstimationMethod::Mmse => others / (others + beta_col[0]),
    }
}

/// Exact MRC effective SINR of target user k (same for LS and MMSE):
///
/// `M ρ_0k β_00k² / (M Σ_{l≠0} ρ_lk β_0lk² + (Σ_l ρ_lk β_0lk + 1)(1/ρ_u + Σ_l Σ_n β_0ln))`
pub fn sinr_closed(antennas: usize, powers: &PowerMatrix, beta: &BetaSlice, data_power: f64, k: usize) -> f64 {
    let m = antennas as f64;
    let contamination: f64 = (1..beta.cells()).map(|l| powers.get(l, k) * beta.get(l, k).powi(2)).sum();
    let pilot_total: f64 = (0..beta.cells()).map(|l| powers.get(l, k) * beta.get(l, k)).sum::<f64>() + 1.0;
    m * powers.get(0, k) * beta.own(k).powi(2)
        / (m * contamination + pilot_total * (1.0 / data_power + beta.total()))
}

/// M → ∞ SINR: `ρ_0k β_00k² / Σ_{l≠0} ρ_lk β_0lk²`. Infinite without
/// co-channel interferers.
pub fn sinr_limit(rho_col: &[f64], beta_col: &[f64]) -> ExtReal {
    check_column(rho_col, beta_col);
    let denom: f64 = rho_col[1..].iter().zip(&beta_col[1..]).map(|(r, b)| r * b * b).sum();
    if denom == 0.0 {
        ExtReal::Infinite
    } else {
        ExtReal::Finite(rho_col[0] * beta_col[0].powi(2) / denom)
    }
}

/// Achievable uplink rate in bits/s.
pub fn achievable_rate(cfg: &SystemConfig, sinr: f64) -> f64 {
    cfg.rate_prefactor() * (1.0 + sinr).log2()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSummary {
    pub min: f64,
    pub mean: f64,
}

/// Minimum and mean of the per-user rates of the target cell.
pub fn rate_summary(rates: &[f64]) -> Result<RateSummary> {
    if rates.is_empty() {
        return Err(Error::Statistics("rate summary of no users".into()));
    }
    Ok(RateSummary {
        min: rates.iter().copied().fold(f64::INFINITY, f64::min),
        mean: rates.iter().sum::<f64>() / rates.len() as f64,
    })
}

/// RCEE figures for one target user.
#[derive(Debug, Clone)]
pub struct RceeReport {
    pub user: usize,
    pub method: EstimationMethod,
    pub samples: Vec<f64>,
    pub monte_carlo: Option<Estimate>,
    pub closed_form: ExtReal,
    /// Only meaningful for MMSE with M >= 2.
    pub upper_bound: Option<f64>,
    pub limit: f64,
}

impl RceeReport {
    pub fn new(
        method: EstimationMethod,
        antennas: usize,
        powers: &PowerMatrix,
        beta: &BetaSlice,
        user: usize,
        samples: Vec<f64>,
    ) -> Result<Self> {
        let rho = powers.column(user);
        let b = beta.column(user);
        let monte_carlo = if samples.len() >= 2 { Some(Estimate::from_samples(&samples)?) } else { None };
        Ok(Self {
            user,
            method,
            monte_carlo,
            samples,
            closed_form: exp_rcee_closed(method, antennas, &rho, &b)?,
            upper_bound: match method {
                EstimationMethod::Mmse if antennas >= 2 => Some(exp_rcee_bound_mmse(antennas, &rho, &b)?),
                _ => None,
            },
            limit: exp_rcee_limit(method, &rho, &b),
        })
    }
}

/// SINR and rate figures for the target cell.
#[derive(Debug, Clone)]
pub struct RateReport {
    pub sinr_closed: Vec<f64>,
    pub sinr_monte_carlo: Option<Vec<f64>>,
    pub sinr_limit: Vec<ExtReal>,
    pub rates: Vec<f64>,
    pub summary: RateSummary,
}

impl RateReport {
    pub fn closed_form(cfg: &SystemConfig, antennas: usize, powers: &PowerMatrix, beta: &BetaSlice) -> Result<Self> {
        let users = beta.users();
        let sinr_closed: Vec<f64> = (0..users)
            .map(|k| sinr_closed(antennas, powers, beta, cfg.data_power, k))
            .collect();
        let rates: Vec<f64> = sinr_closed.iter().map(|&s| achievable_rate(cfg, s)).collect();
        Ok(Self {
            sinr_limit: (0..users).map(|k| sinr_limit(&powers.column(k), &beta.column(k))).collect(),
            summary: rate_summary(&rates)?,
            sinr_closed,
            sinr_monte_carlo: None,
            rates,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use EstimationMethod::{Ls, Mmse};

    #[test]
    fn rcee_sample_trivial_cases() {
        let h = vec![Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.3)];
        assert_eq!(rcee_sample(&h, &h).unwrap(), 0.0);
        let zero = vec![Complex64::new(0.0, 0.0); 2];
        assert_eq!(rcee_sample(&h, &zero).unwrap(), 1.0);
        let double: Vec<Complex64> = h.iter().map(|x| x * 2.0).collect();
        assert!((rcee_sample(&h, &double).unwrap() - 1.0).abs() < 1e-15);
        assert!(rcee_sample(&zero, &h).is_err());
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(exp_rcee_closed(Ls, 2, &[1.0], &[1.0]).unwrap(), ExtReal::Finite(2.0));
        assert_eq!(exp_rcee_closed(Mmse, 2, &[1.0], &[1.0]).unwrap(), ExtReal::Finite(0.75));
        assert!(exp_rcee_closed(Ls, 1, &[1.0], &[1.0]).unwrap().is_infinite());
        assert!(exp_rcee_closed(Mmse, 1, &[1.0], &[1.0]).unwrap().is_infinite());
        assert!(exp_rcee_closed(Ls, 0, &[1.0], &[1.0]).is_err());
    }

    #[test]
    fn bound_examples() {
        assert_eq!(exp_rcee_bound_mmse(2, &[1.0], &[1.0]).unwrap(), 1.0);
        assert!(exp_rcee_bound_mmse(1, &[1.0], &[1.0]).is_err());
        let rho = [1.0, 0.5, 2.0];
        let beta = [0.8, 0.1, 0.05];
        let m = 1_000_000;
        let bound = exp_rcee_bound_mmse(m, &rho, &beta).unwrap();
        let lim = exp_rcee_limit(Mmse, &rho, &beta);
        assert!((bound / lim - 1.0).abs() < 1e-5);
        // interference free, huge SNR
        let b = exp_rcee_bound_mmse(8, &[1e12], &[1.0]).unwrap();
        assert!(b < 1e-11);
    }

    #[test]
    fn limit_examples() {
        let rho = [1.0, 1.0];
        let beta = [1.0, 0.1];
        assert!((exp_rcee_limit(Ls, &rho, &beta) - 1.1).abs() < 1e-15);
        assert!((exp_rcee_limit(Mmse, &rho, &beta) - 1.1 / 2.1).abs() < 1e-15);
        assert!((exp_rcee_limit(Mmse, &rho, &beta) - 0.5238).abs() < 1e-4);
    }

    #[test]
    fn eppa_limit_examples() {
        // Σβ_l = 0.1 split over two interferers, K/P = 0.001
        let beta = [1.0, 0.06, 0.04];
        assert!((exp_rcee_eppa_limit(Ls, &beta, 1, 1000.0) - 0.101).abs() < 1e-15);
        let mmse = exp_rcee_eppa_limit(Mmse, &beta, 1, 1000.0);
        assert!((mmse - 0.101 / 1.101).abs() < 1e-15);
        assert!((mmse - 0.09173).abs() < 1e-5);
        // equals the general limit at ρ = P/K
        let p = 1000.0 * 4.0;
        let rho = [p / 4.0; 3];
        for m in [Ls, Mmse] {
            let a = exp_rcee_eppa_limit(m, &beta, 4, p);
            let b = exp_rcee_limit(m, &rho, &beta);
            assert!((a - b).abs() <= 1e-14 * b);
            let hi = exp_rcee_eppa_limit(m, &beta, 4, 1e15);
            assert!((hi - exp_rcee_eppa_high_power(m, &beta)).abs() < 1e-12);
        }
    }

    #[test]
    fn ls_closed_form_is_scaled_limit() {
        let rho = [3.0, 1.0, 2.0];
        let beta = [0.7, 0.2, 0.05];
        for m in [2, 3, 10, 200] {
            let cf = exp_rcee_closed(Ls, m, &rho, &beta).unwrap().expect_finite("ls");
            let lim = exp_rcee_limit(Ls, &rho, &beta) * m as f64 / (m as f64 - 1.0);
            assert!((cf - lim).abs() <= 1e-12 * lim);
        }
    }

    #[test]
    fn sinr_examples() {
        let beta = BetaSlice::from_rows(&[vec![1.0]]).unwrap();
        let p = PowerMatrix::uniform(1, 1, 1.0);
        assert!((sinr_closed(100, &p, &beta, 1.0, 0) - 25.0).abs() < 1e-12);

        let beta = BetaSlice::from_rows(&[vec![1.0], vec![0.1]]).unwrap();
        let p = PowerMatrix::uniform(2, 1, 1.0);
        let lim = sinr_limit(&[1.0, 1.0], &[1.0, 0.1]).expect_finite("sinr");
        assert!((lim - 100.0).abs() < 1e-9);
        let big = sinr_closed(100_000_000, &p, &beta, 1.0, 0);
        assert!((big / 100.0 - 1.0).abs() < 1e-4, "{big}");
    }

    #[test]
    fn sinr_limit_cases() {
        assert!(sinr_limit(&[1.0], &[1.0]).is_infinite());
        let eq = sinr_limit(&[5.0, 5.0, 5.0], &[1.0, 0.2, 0.1]).expect_finite("sir");
        assert!((eq - 1.0 / (0.04 + 0.01)).abs() < 1e-12);
    }

    #[test]
    fn rate_examples() {
        let cfg = SystemConfig {
            bandwidth: 20e6,
            reuse: 3,
            slot_fraction: 3.0 / 7.0,
            useful_symbol: 66.7,
            symbol_interval: 71.4,
            ..SystemConfig::default()
        };
        assert_eq!(achievable_rate(&cfg, 0.0), 0.0);
        let r = achievable_rate(&cfg, 25.0);
        let hand = 20e6 / 3.0 * (3.0 / 7.0) * (66.7 / 71.4) * 26f64.log2();
        assert!((r - hand).abs() < 1e-6);
        assert!((r / 1.2546e7 - 1.0).abs() < 1e-4, "{r}");
        let six = SystemConfig { reuse: 7, ..cfg.clone() };
        let one = SystemConfig { reuse: 1, ..cfg };
        assert!((achievable_rate(&one, 25.0) / achievable_rate(&six, 25.0) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn rate_summary_examples() {
        let s = rate_summary(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.min, s.mean), (1.0, 2.0));
        let s = rate_summary(&[4.0; 5]).unwrap();
        assert_eq!(s.min, s.mean);
        assert!(rate_summary(&[]).is_err());
    }

    #[test]
    fn reports_assemble() {
        let beta = BetaSlice::from_rows(&[vec![1.0, 0.5], vec![0.1, 0.2]]).unwrap();
        let p = PowerMatrix::uniform(2, 2, 10.0);
        let r = RceeReport::new(Mmse, 8, &p, &beta, 1, vec![0.1, 0.2, 0.3]).unwrap();
        assert!(r.closed_form.expect_finite("cf") < r.upper_bound.unwrap());
        assert!((r.monte_carlo.unwrap().mean - 0.2).abs() < 1e-15);
        let cfg = SystemConfig::default();
        let rr = RateReport::closed_form(&cfg, 8, &p, &beta).unwrap();
        assert_eq!(rr.rates.len(), 2);
        assert!(rr.sinr_closed.iter().all(|s| *s >= 0.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn column() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
            (1usize..7).prop_flat_map(|cells| {
                (
                    proptest::collection::vec(1e-3f64..1e4, cells),
                    proptest::collection::vec(1e-5f64..10.0, cells),
                )
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(2000))]

            #[test]
            fn mmse_strictly_below_bound((rho, beta) in column(), m in 2usize..2000) {
                let cf = exp_rcee_closed(Mmse, m, &rho, &beta).unwrap().expect_finite("mmse");
                let bound = exp_rcee_bound_mmse(m, &rho, &beta).unwrap();
                prop_assert!(cf < bound);
                prop_assert!(cf >= 0.0);
            }

            #[test]
            fn ls_monotone_in_powers((rho, beta) in column(), m in 2usize..500, f in 1.01f64..3.0) {
                let base = exp_rcee_closed(Ls, m, &rho, &beta).unwrap().expect_finite("ls");
                let mut up = rho.clone();
                up[0] *= f;
                prop_assert!(exp_rcee_closed(Ls, m, &up, &beta).unwrap().expect_finite("ls") < base);
                for l in 1..rho.len() {
                    let mut other = rho.clone();
                    other[l] *= f;
                    prop_assert!(exp_rcee_closed(Ls, m, &other, &beta).unwrap().expect_finite("ls") > base);
                }
            }

            #[test]
            fn ls_scaling_identity((rho, beta) in column(), m in 2usize..10_000) {
                let cf = exp_rcee_closed(Ls, m, &rho, &beta).unwrap().expect_finite("ls");
                let lim = exp_rcee_limit(Ls, &rho, &beta) * m as f64 / (m as f64 - 1.0);
                prop_assert!((cf - lim).abs() <= 1e-12 * lim);
            }
        }
    }
}
