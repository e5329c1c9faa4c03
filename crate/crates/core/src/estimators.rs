//! LS and MMSE channel estimates for the target cell's users.
//!
//! With uncorrelated Rayleigh fading the MMSE estimate collapses to a
//! per-user scalar times the LS estimate:
//! `ĥ_MMSE = ρ_0k β_00k / (Σ_l ρ_lk β_0lk + 1) · ĥ_LS`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::airlink::PilotObservation;
use crate::scenario::{BetaSlice, PowerMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimationMethod {
    Ls,
    Mmse,
}

impl EstimationMethod {
    pub const ALL: [EstimationMethod; 2] = [EstimationMethod::Ls, EstimationMethod::Mmse];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimationMethod::Ls => "ls",
            EstimationMethod::Mmse => "mmse",
        }
    }
}

impl fmt::Display for EstimationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ls" => Ok(EstimationMethod::Ls),
            "mmse" => Ok(EstimationMethod::Mmse),
            other => Err(Error::Parse(format!("unknown estimation method `{other}` (expected ls or mmse)"))),
        }
    }
}

/// Estimates ĥ_{00k} for every target user.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub method: EstimationMethod,
    h_hat: Vec<Vec<Complex64>>,
}

impl ChannelEstimate {
    pub fn get(&self, k: usize) -> &[Complex64] {
        &self.h_hat[k]
    }

    pub fn users(&self) -> usize {
        self.h_hat.len()
    }
}

/// `ĥ_LS = Y s_k / sqrt(ρ_0k)`.
pub fn estimate_ls(obs: &PilotObservation, target_powers: &[f64]) -> Result<ChannelEstimate> {
    let h_hat = target_powers
        .iter()
        .enumerate()
        .map(|(k, &rho)| {
            if !(rho > 0.0 && rho.is_finite()) {
                return Err(Error::Domain(format!("target user {k} has pilot power {rho}")));
            }
            let scale = 1.0 / rho.sqrt();
            Ok(obs.despread(k).into_iter().map(|y| y * scale).collect())
        })
        .collect::<Result<_>>()?;
    Ok(ChannelEstimate {
        method: EstimationMethod::Ls,
        h_hat,
    })
}

/// `ρ_0k β_00k / (Σ_l ρ_lk β_0lk + 1)`.
pub fn mmse_coefficient(powers: &PowerMatrix, beta: &BetaSlice, k: usize) -> f64 {
    let total: f64 = (0..beta.cells()).map(|l| powers.get(l, k) * beta.get(l, k)).sum();
    powers.get(0, k) * beta.own(k) / (total + 1.0)
}

/// MMSE estimate using the scalar reduction. β is assumed known at the BS;
/// the powers are taken from the observation.
pub fn estimate_mmse(obs: &PilotObservation, beta: &BetaSlice) -> Result<ChannelEstimate> {
    let powers = obs.powers();
    let ls = estimate_ls(obs, powers.target_row())?;
    let h_hat = ls
        .h_hat
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            let c = mmse_coefficient(powers, beta, k);
            v.into_iter().map(|x| x * c).collect()
        })
        .collect();
    Ok(ChannelEstimate {
        method: EstimationMethod::Mmse,
        h_hat,
    })
}

pub fn estimate(method: EstimationMethod, obs: &PilotObservation, beta: &BetaSlice) -> Result<ChannelEstimate> {
    match method {
        EstimationMethod::Ls => estimate_ls(obs, obs.powers().target_row()),
        EstimationMethod::Mmse => estimate_mmse(obs, beta),
    }
}

/// Matrix-form MMSE `E{h ĥ_LSᴴ} (E{ĥ_LS ĥ_LSᴴ})⁻¹ ĥ_LS` for small M.
/// Debug path used to check the scalar reduction against explicit
/// covariances (analytic or sample).
pub fn mmse_matrix_form(
    cross_cov: &DMatrix<Complex64>,
    ls_cov: &DMatrix<Complex64>,
    ls_estimate: &[Complex64],
) -> Result<Vec<Complex64>> {
    let inv = ls_cov
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Domain("LS covariance is singular".into()))?;
    let v = DVector::from_column_slice(ls_estimate);
    Ok((cross_cov * inv * v).iter().copied().collect())
}

/// Analytic covariances for user k: `E{h ĥ_LSᴴ} = β_00k I` and
/// `E{ĥ_LS ĥ_LSᴴ} = (Σ_l ρ_lk β_0lk + 1)/ρ_0k · I`.
pub fn analytic_covariances(
    powers: &PowerMatrix,
    beta: &BetaSlice,
    k: usize,
    antennas: usize,
) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let total: f64 = (0..beta.cells()).map(|l| powers.get(l, k) * beta.get(l, k)).sum();
    let cross = DMatrix::from_diagonal_element(antennas, antennas, Complex64::new(beta.own(k), 0.0));
    let ls = DMatrix::from_diagonal_element(antennas, antennas, Complex64::new((total + 1.0) / powers.get(0, k), 0.0));
    (cross, ls)
}
