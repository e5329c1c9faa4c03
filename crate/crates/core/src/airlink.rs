//! Small-scale channels, the pilot phase and data-phase SINR moments.
//!
//! Channels are those seen by the target BS (index 0): `h[l][k]` is the
//! M-vector from user k of cell l. All cells reuse the same orthonormal
//! pilot book, so user k's pilot is contaminated by user k of every other
//! cell.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::estimators::ChannelEstimate;
use crate::rng::RngStream;
use crate::scenario::{BetaSlice, PowerMatrix};
use crate::stats::{Accumulator, Estimate};
use crate::{Error, Result};

/// One CN(0, 1) draw: two independent N(0, 1/2) components.
pub fn complex_gaussian(rng: &mut RngStream) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `aᴴ b`
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Channel vectors from every user of every cell to the target BS.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    antennas: usize,
    cells: usize,
    users: usize,
    h: Vec<Vec<Complex64>>,
    beta: BetaSlice,
}

impl ChannelRealization {
    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// h_{0lk}
    pub fn get(&self, l: usize, k: usize) -> &[Complex64] {
        &self.h[l * self.users + k]
    }

    /// Large-scale coefficients the realization was drawn with.
    pub fn beta(&self) -> &BetaSlice {
        &self.beta
    }
}

/// `h_{0lk} = sqrt(β_{0lk}) g` with `g ~ CN(0, I_M)`, drawn cell-major.
pub fn sample_channels(beta: &BetaSlice, antennas: usize, rng: &mut RngStream) -> Result<ChannelRealization> {
    if antennas == 0 {
        return Err(Error::Domain("antenna count must be at least 1".into()));
    }
    let (cells, users) = (beta.cells(), beta.users());
    let h = (0..cells)
        .flat_map(|l| (0..users).map(move |k| (l, k)))
        .map(|(l, k)| {
            let amp = beta.get(l, k).sqrt();
            (0..antennas).map(|_| complex_gaussian(rng) * amp).collect()
        })
        .collect();
    Ok(ChannelRealization {
        antennas,
        cells,
        users,
        h,
        beta: beta.clone(),
    })
}

/// Orthonormal pilot sequences: rows of the τ×τ identity, one per user.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBook {
    length: usize,
    sequences: Vec<Vec<Complex64>>,
}

impl PilotBook {
    pub fn identity(length: usize, users: usize) -> Result<Self> {
        if length < users {
            return Err(Error::Config(format!("pilot length {length} < user count {users}")));
        }
        let sequences = (0..users)
            .map(|k| {
                let mut s = vec![Complex64::new(0.0, 0.0); length];
                s[k] = Complex64::new(1.0, 0.0);
                s
            })
            .collect();
        Ok(Self { length, sequences })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn sequence(&self, k: usize) -> &[Complex64] {
        &self.sequences[k]
    }

    /// max |s_aᴴ s_b - δ_ab| over all pairs.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (a, sa) in self.sequences.iter().enumerate() {
            for (b, sb) in self.sequences.iter().enumerate() {
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((inner(sa, sb) - target).norm());
            }
        }
        worst
    }
}

/// Received pilot matrix at the target BS, stored column-major (M×τ).
#[derive(Debug, Clone, PartialEq)]
pub struct PilotObservation {
    antennas: usize,
    y: Vec<Complex64>,
    book: PilotBook,
    powers: PowerMatrix,
}

impl PilotObservation {
    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn book(&self) -> &PilotBook {
        &self.book
    }

    pub fn powers(&self) -> &PowerMatrix {
        &self.powers
    }

    /// Column t of Y.
    pub fn column(&self, t: usize) -> &[Complex64] {
        &self.y[t * self.antennas..(t + 1) * self.antennas]
    }

    /// `Y s_k`, the despread observation for pilot k.
    pub fn despread(&self, k: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.antennas];
        for (t, s) in self.book.sequence(k).iter().enumerate() {
            if *s == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (o, y) in out.iter_mut().zip(self.column(t)) {
                *o += y * s;
            }
        }
        out
    }
}

/// `Y = Σ_l Σ_k sqrt(ρ_lk) h_{0lk} s_kᴴ + N`. With `noise = None` the
/// noise matrix is zero.
pub fn pilot_phase(
    channels: &ChannelRealization,
    powers: &PowerMatrix,
    pilot_length: usize,
    noise: Option<&mut RngStream>,
) -> Result<PilotObservation> {
    let (m, cells, users) = (channels.antennas, channels.cells, channels.users);
    if powers.cells() != cells || powers.users() != users {
        return Err(Error::Domain("power matrix shape does not match the channels".into()));
    }
    let book = PilotBook::identity(pilot_length, users)?;
    let mut y = match noise {
        Some(rng) => (0..m * pilot_length).map(|_| complex_gaussian(rng)).collect(),
        None => vec![Complex64::new(0.0, 0.0); m * pilot_length],
    };
    for l in 0..cells {
        for k in 0..users {
            let rho = powers.get(l, k);
            if !(rho.is_finite() && rho >= 0.0) {
                return Err(Error::Domain(format!("pilot power {rho} for cell {l} user {k}")));
            }
            let amp = rho.sqrt();
            let h = channels.get(l, k);
            for (t, s) in book.sequence(k).iter().enumerate() {
                if *s == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let coeff = s.conj() * amp;
                for (yi, hi) in y[t * m..(t + 1) * m].iter_mut().zip(h) {
                    *yi += hi * coeff;
                }
            }
        }
    }
    Ok(PilotObservation {
        antennas: m,
        y,
        book,
        powers: powers.clone(),
    })
}

/// Monte-Carlo estimates of the four moments behind the effective SINR of
/// target user k, together with the assembled SINR.
#[derive(Debug, Clone)]
pub struct SinrMoments {
    pub user: usize,
    /// E{ĥᴴ h_{00k}}, complex mean.
    pub gain_mean: Complex64,
    /// |E{ĥᴴ h_{00k}}|²
    pub signal: f64,
    /// E{|ĥᴴ h_{0ln}|²} laid out `[cell][user]`; entries with n = k are the
    /// same-pilot terms, the others the cross-user terms.
    pub cross: Vec<Estimate>,
    /// E{‖ĥ‖²}
    pub noise: Estimate,
    pub sinr: f64,
    users: usize,
}

impl SinrMoments {
    /// E{|ĥᴴ h_{0ln}|²} for n != k.
    pub fn cross_user(&self, l: usize, n: usize) -> Estimate {
        assert_ne!(n, self.user);
        self.cross[l * self.users + n]
    }

    /// E{|ĥᴴ h_{0lk}|²}, the same-pilot term.
    pub fn same_pilot(&self, l: usize) -> Estimate {
        self.cross[l * self.users + self.user]
    }
}

/// Streaming accumulator for [`SinrMoments`].
#[derive(Debug, Clone)]
pub struct SinrMomentAccumulator {
    user: usize,
    cells: usize,
    users: usize,
    gain_re: Accumulator,
    gain_im: Accumulator,
    cross: Vec<Accumulator>,
    noise: Accumulator,
}

impl SinrMomentAccumulator {
    pub fn new(user: usize, cells: usize, users: usize) -> Self {
        Self {
            user,
            cells,
            users,
            gain_re: Accumulator::default(),
            gain_im: Accumulator::default(),
            cross: vec![Accumulator::default(); cells * users],
            noise: Accumulator::default(),
        }
    }

    pub fn push(&mut self, channels: &ChannelRealization, estimate: &ChannelEstimate) {
        let h_hat = estimate.get(self.user);
        let gain = inner(h_hat, channels.get(0, self.user));
        self.gain_re.push(gain.re);
        self.gain_im.push(gain.im);
        for l in 0..self.cells {
            for n in 0..self.users {
                self.cross[l * self.users + n].push(inner(h_hat, channels.get(l, n)).norm_sqr());
            }
        }
        self.noise.push(norm_sqr(h_hat));
    }

    /// Assembles `ρ_u 𝔄 / (ρ_u Σ_{l,n} E|ĥᴴh_ln|² - ρ_u 𝔄 + 𝔇)`.
    pub fn finish(&self, data_power: f64) -> Result<SinrMoments> {
        let gain_mean = Complex64::new(self.gain_re.finish()?.mean, self.gain_im.finish()?.mean);
        let signal = gain_mean.norm_sqr();
        let cross = self.cross.iter().map(Accumulator::finish).collect::<Result<Vec<_>>>()?;
        let noise = self.noise.finish()?;
        let total: f64 = cross.iter().map(|e| e.mean).sum();
        let sinr = data_power * signal / (data_power * total - data_power * signal + noise.mean);
        Ok(SinrMoments {
            user: self.user,
            gain_mean,
            signal,
            cross,
            noise,
            sinr,
            users: self.users,
        })
    }
}

/// Moment estimates over an ensemble of (channels, estimate) pairs drawn
/// under one configuration with one estimator.
pub fn empirical_sinr_terms<'a, I>(ensemble: I, user: usize, data_power: f64) -> Result<SinrMoments>
where
    I: IntoIterator<Item = (&'a ChannelRealization, &'a ChannelEstimate)>,
{
    let mut acc: Option<SinrMomentAccumulator> = None;
    for (ch, est) in ensemble {
        acc.get_or_insert_with(|| SinrMomentAccumulator::new(user, ch.cells(), ch.users()))
            .push(ch, est);
    }
    acc.ok_or_else(|| Error::Statistics("empty ensemble".into()))?
        .finish(data_power)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{estimate_ls, estimate_mmse};
    use crate::rng::{seed_schedule, Purpose};

    fn beta(rows: &[&[f64]]) -> BetaSlice {
        BetaSlice::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn unit_beta_mean_power() {
        let b = beta(&[&[1.0]]);
        let ch = sample_channels(&b, 100_000, &mut seed_schedule(1, 0, Purpose::Channel)).unwrap();
        let p = norm_sqr(ch.get(0, 0)) / 100_000.0;
        assert!((p - 1.0).abs() < 0.02, "{p}");
    }

    #[test]
    fn expected_norm_is_m_beta() {
        let b = beta(&[&[2.0]]);
        let mut acc = Accumulator::default();
        for t in 0..10_000 {
            let ch = sample_channels(&b, 8, &mut seed_schedule(2, t, Purpose::Channel)).unwrap();
            acc.push(norm_sqr(ch.get(0, 0)));
        }
        assert!((acc.mean() / 16.0 - 1.0).abs() < 0.02, "{}", acc.mean());
    }

    #[test]
    fn zero_antennas_rejected() {
        assert!(sample_channels(&beta(&[&[1.0]]), 0, &mut seed_schedule(0, 0, Purpose::Channel)).is_err());
    }

    #[test]
    fn pilot_book_is_orthonormal() {
        let book = PilotBook::identity(12, 10).unwrap();
        assert!(book.orthonormality_error() <= 1e-12);
        assert!(PilotBook::identity(3, 4).is_err());
    }

    #[test]
    fn noiseless_single_cell_despreads_exactly() {
        let b = beta(&[&[0.7, 1.3]]);
        let ch = sample_channels(&b, 6, &mut seed_schedule(3, 0, Purpose::Channel)).unwrap();
        let powers = PowerMatrix::uniform(1, 2, 1.0);
        let obs = pilot_phase(&ch, &powers, 3, None).unwrap();
        for k in 0..2 {
            assert_eq!(obs.despread(k), ch.get(0, k));
        }
    }

    #[test]
    fn noiseless_two_cells_contaminate() {
        let b = beta(&[&[1.0, 1.0], &[0.3, 0.2]]);
        let ch = sample_channels(&b, 4, &mut seed_schedule(4, 0, Purpose::Channel)).unwrap();
        let powers = PowerMatrix::uniform(2, 2, 1.0);
        let obs = pilot_phase(&ch, &powers, 2, None).unwrap();
        for k in 0..2 {
            let expect: Vec<Complex64> = ch.get(0, k).iter().zip(ch.get(1, k)).map(|(a, b)| a + b).collect();
            let got = obs.despread(k);
            for (g, e) in got.iter().zip(&expect) {
                assert!((g - e).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn despread_noise_is_unit_covariance() {
        let b = beta(&[&[1.0]]);
        let ch = sample_channels(&b, 16, &mut seed_schedule(5, 0, Purpose::Channel)).unwrap();
        let zero = PowerMatrix::uniform(1, 1, 0.0);
        let mut acc = Accumulator::default();
        for t in 0..10_000 {
            let obs = pilot_phase(&ch, &zero, 1, Some(&mut seed_schedule(5, t, Purpose::PilotNoise))).unwrap();
            acc.push(norm_sqr(&obs.despread(0)));
        }
        assert!((acc.mean() / 16.0 - 1.0).abs() < 0.02, "{}", acc.mean());
    }

    #[test]
    fn negative_power_rejected() {
        let b = beta(&[&[1.0]]);
        let ch = sample_channels(&b, 2, &mut seed_schedule(6, 0, Purpose::Channel)).unwrap();
        let mut p = PowerMatrix::uniform(1, 1, 1.0);
        p.set(0, 0, -1.0);
        assert!(pilot_phase(&ch, &p, 1, None).is_err());
    }

    fn ensemble(
        b: &BetaSlice,
        powers: &PowerMatrix,
        m: usize,
        trials: u64,
        noise: bool,
        seed: u64,
    ) -> Vec<(ChannelRealization, ChannelEstimate, ChannelEstimate)> {
        (0..trials)
            .map(|t| {
                let ch = sample_channels(b, m, &mut seed_schedule(seed, t, Purpose::Channel)).unwrap();
                let mut rng = seed_schedule(seed, t, Purpose::PilotNoise);
                let obs = pilot_phase(&ch, powers, powers.users(), noise.then_some(&mut rng)).unwrap();
                let ls = estimate_ls(&obs, powers.target_row()).unwrap();
                let mmse = estimate_mmse(&obs, b).unwrap();
                (ch, ls, mmse)
            })
            .collect()
    }

    #[test]
    fn exact_estimate_signal_term() {
        let b = beta(&[&[1.5]]);
        let p = PowerMatrix::uniform(1, 1, 1.0);
        let m = 8;
        let ens = ensemble(&b, &p, m, 4000, false, 7);
        let mom = empirical_sinr_terms(ens.iter().map(|(c, l, _)| (c, l)), 0, 1.0).unwrap();
        let ratio = mom.signal / (m as f64 * 1.5).powi(2);
        assert!((ratio - 1.0).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn moments_match_closed_forms() {
        // two cells, two users; closed forms for the LS noise and same-pilot terms
        let b = beta(&[&[1.0, 0.6], &[0.25, 0.4]]);
        let p = PowerMatrix::from_rows(&[vec![2.0, 1.5], vec![1.0, 0.8]]).unwrap();
        let m = 8;
        let ens = ensemble(&b, &p, m, 10_000, true, 8);
        let mom = empirical_sinr_terms(ens.iter().map(|(c, l, _)| (c, l)), 0, 1.0).unwrap();
        let (mf, rho_j) = (m as f64, 2.0);
        let total = 2.0 * 1.0 + 1.0 * 0.25 + 1.0;
        let d = mf / rho_j * total;
        assert!(mom.noise.relative_error(d) < 0.03, "D {} vs {d}", mom.noise.mean);
        let c1 = (mf * 0.25 * total + mf * mf * 1.0 * 0.25 * 0.25) / rho_j;
        assert!(mom.same_pilot(1).relative_error(c1) < 0.03, "C {} vs {c1}", mom.same_pilot(1).mean);
        let b_term = mf * 0.4 / rho_j * total;
        assert!(mom.cross_user(1, 1).relative_error(b_term) < 0.03);
    }

    #[test]
    fn empty_or_single_ensemble_is_error() {
        let none: Vec<(ChannelRealization, ChannelEstimate)> = Vec::new();
        assert!(empirical_sinr_terms(none.iter().map(|(c, e)| (c, e)), 0, 1.0).is_err());
        let b = beta(&[&[1.0]]);
        let p = PowerMatrix::uniform(1, 1, 1.0);
        let ens = ensemble(&b, &p, 2, 1, true, 9);
        assert!(empirical_sinr_terms(ens.iter().map(|(c, l, _)| (c, l)), 0, 1.0).is_err());
    }
}
