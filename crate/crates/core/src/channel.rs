//! Small-scale fading draws, the end-to-end gain through the selected and
//! phase-shifted elements, path loss and the link budget.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CorrelationSqrt, SelectionSet};

/// Deterministic random stream for trial `trial` of a run seeded with `seed`.
///
/// Every trial gets its own ChaCha stream, so a trial's draws depend only on
/// `(seed, trial)` and never on how trials are scheduled.
pub fn substream(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// One `CN(0, 1)` draw: independent `N(0, 1/2)` real and imaginary parts.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Paired i.i.d. fading vectors of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// BS → surface
    pub h_f: Vec<Complex64>,
    /// surface → user
    pub h_u: Vec<Complex64>,
}

/// Draws `h_f` then `h_u`, each entry real part first.
pub fn sample_channels<R: Rng + ?Sized>(rng: &mut R, m: usize) -> ChannelRealization {
    let h_f = (0..m).map(|_| complex_normal(rng)).collect();
    let h_u = (0..m).map(|_| complex_normal(rng)).collect();
    ChannelRealization { h_f, h_u }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PhaseConfig {
    /// Fixed per-element phases in radians, wrapped into `[0, 2π)`.
    Fixed(Vec<f64>),
    /// Each element's phase cancels the phase of its own contribution.
    Coherent,
}

impl PhaseConfig {
    pub fn fixed(phases: Vec<f64>) -> Result<Self> {
        if let Some(p) = phases.iter().find(|p| !p.is_finite()) {
            return Err(Error::Domain {
                func: "PhaseConfig::fixed",
                detail: format!("phase {p} is not finite"),
            });
        }
        Ok(Self::Fixed(phases.into_iter().map(|p| p.rem_euclid(TAU)).collect()))
    }

    pub fn zeros(n: usize) -> Self {
        Self::Fixed(vec![0.0; n])
    }

    /// Gain of one trial from effective channels at the selected elements.
    pub fn gain(&self, a_u: &[Complex64], a_f: &[Complex64]) -> Result<f64> {
        match self {
            Self::Fixed(phases) => equivalent_gain_static(a_u, a_f, phases),
            Self::Coherent => equivalent_gain_coherent(a_u, a_f),
        }
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `S J^{1/2} h`: correlated fading seen by the selected elements.
pub fn effective_channel(sqrt_j: &CorrelationSqrt, h: &[Complex64], sel: &SelectionSet) -> Result<Vec<Complex64>> {
    let m = sqrt_j.dim();
    check_len(m, h.len())?;
    sel.check_bound(m)?;
    let s = sqrt_j.as_matrix();
    Ok(sel
        .indices()
        .iter()
        .map(|&r| (0..m).map(|c| h[c] * s[(r, c)]).sum())
        .collect())
}

/// `|Σ conj(a_u[m]) e^{jφ_m} a_f[m]|²`
pub fn equivalent_gain_static(a_u: &[Complex64], a_f: &[Complex64], phases: &[f64]) -> Result<f64> {
    check_len(a_u.len(), a_f.len())?;
    check_len(a_u.len(), phases.len())?;
    let h: Complex64 = a_u
        .iter()
        .zip(a_f)
        .zip(phases)
        .map(|((u, f), &p)| u.conj() * Complex64::from_polar(1.0, p) * f)
        .sum();
    Ok(h.norm_sqr())
}

/// `(Σ |a_u[m]| |a_f[m]|)²`, the largest gain any phase vector achieves.
pub fn equivalent_gain_coherent(a_u: &[Complex64], a_f: &[Complex64]) -> Result<f64> {
    check_len(a_u.len(), a_f.len())?;
    let s: f64 = a_u.iter().zip(a_f).map(|(u, f)| u.norm() * f.norm()).sum();
    Ok(s * s)
}

/// Indices of the `m_o` largest products `|a_u[m]| |a_f[m]|`, lowest index
/// first among ties, returned in increasing order.
///
/// Under coherent phases the gain is the squared sum of these nonnegative
/// products, so this set maximises it over all subsets of size `m_o`.
pub fn select_top_products(a_u_full: &[Complex64], a_f_full: &[Complex64], m_o: usize) -> Result<SelectionSet> {
    check_len(a_u_full.len(), a_f_full.len())?;
    let products: Vec<f64> = a_u_full
        .iter()
        .zip(a_f_full)
        .map(|(u, f)| u.norm() * f.norm())
        .collect();
    top_indices(&products, m_o)
}

pub(crate) fn top_indices(products: &[f64], m_o: usize) -> Result<SelectionSet> {
    let m = products.len();
    let mask = top_mask(products, m_o)?;
    let chosen = (0..m).filter(|&i| mask[i]).collect();
    SelectionSet::new(chosen, m)
}

/// Membership mask of the `m_o` largest values, lower index first on ties.
pub(crate) fn top_mask(products: &[f64], m_o: usize) -> Result<Vec<bool>> {
    let m = products.len();
    if m_o == 0 || m_o > m {
        return Err(Error::InvalidSelection(format!(
            "cannot activate {m_o} of {m} elements"
        )));
    }
    let mut scratch = products.to_vec();
    let (_, &mut cutoff, _) = scratch.select_nth_unstable_by(m_o - 1, |a, b| b.total_cmp(a));
    let above = products.iter().filter(|p| p.total_cmp(&cutoff).is_gt()).count();
    let mut ties_left = m_o - above;
    Ok(products
        .iter()
        .map(|p| match p.total_cmp(&cutoff) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Equal if ties_left > 0 => {
                ties_left -= 1;
                true
            }
            _ => false,
        })
        .collect())
}

/// Coherent gain over every element of a conventional surface.
pub fn ris_baseline_gain(sqrt_r: &CorrelationSqrt, h_u: &[Complex64], h_f: &[Complex64]) -> Result<f64> {
    let all = SelectionSet::all(sqrt_r.dim());
    let a_u = effective_channel(sqrt_r, h_u, &all)?;
    let a_f = effective_channel(sqrt_r, h_f, &all)?;
    equivalent_gain_coherent(&a_u, &a_f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Leg {
    /// BS → surface
    Forward,
    /// surface → user
    User,
}

/// Large-scale path loss `L_k = sqrt(ρ d_k^{-α})` for both legs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLoss {
    pub rho: f64,
    pub alpha: f64,
    pub d_f: f64,
    pub d_u: f64,
}

impl PathLoss {
    pub fn new(rho: f64, alpha: f64, d_f: f64, d_u: f64) -> Result<Self> {
        for (name, v) in [("rho", rho), ("alpha", alpha), ("d_f", d_f), ("d_u", d_u)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain {
                    func: "PathLoss::new",
                    detail: format!("{name} must be positive, got {v}"),
                });
            }
        }
        Ok(Self { rho, alpha, d_f, d_u })
    }

    pub fn factor(&self, leg: Leg) -> f64 {
        let d = match leg {
            Leg::Forward => self.d_f,
            Leg::User => self.d_u,
        };
        (self.rho * d.powf(-self.alpha)).sqrt()
    }

    /// `L_f · L_u`
    pub fn combined(&self) -> f64 {
        self.factor(Leg::Forward) * self.factor(Leg::User)
    }
}

pub fn path_loss_factor(pl: &PathLoss, leg: Leg) -> f64 {
    pl.factor(leg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Transmit SNR `P/σ²`, linear.
    pub gamma_bar: f64,
    pub pathloss: PathLoss,
    /// Target rate in bits/s/Hz.
    pub rate_target: f64,
}

impl LinkBudget {
    pub fn new(gamma_bar: f64, pathloss: PathLoss, rate_target: f64) -> Result<Self> {
        if !(gamma_bar > 0.0) || !(rate_target > 0.0) {
            return Err(Error::Domain {
                func: "LinkBudget::new",
                detail: format!("need gamma_bar > 0 and rate_target > 0, got {gamma_bar}, {rate_target}"),
            });
        }
        Ok(Self {
            gamma_bar,
            pathloss,
            rate_target,
        })
    }

    pub fn from_db(snr_db: f64, pathloss: PathLoss, rate_target: f64) -> Result<Self> {
        Self::new(db_to_linear(snr_db), pathloss, rate_target)
    }

    /// `R̄ = 2^R − 1`
    pub fn rate_threshold(&self) -> f64 {
        self.rate_target.exp2() - 1.0
    }

    /// `γ̄ L_f L_u`, the factor turning channel gain into received SNR.
    pub fn snr_scale(&self) -> f64 {
        self.gamma_bar * self.pathloss.combined()
    }

    /// Gain below which the link is in outage: `R̄ / (γ̄ L_f L_u)`.
    pub fn gain_threshold(&self) -> f64 {
        self.rate_threshold() / self.snr_scale()
    }

    pub fn received_snr(&self, gain: f64) -> f64 {
        self.snr_scale() * gain
    }

    /// Instantaneous capacity `log₂(1 + γ)` for a channel gain.
    pub fn capacity(&self, gain: f64) -> f64 {
        self.received_snr(gain).ln_1p() / std::f64::consts::LN_2
    }
}

pub fn received_snr(budget: &LinkBudget, gain: f64) -> f64 {
    budget.received_snr(gain)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}
