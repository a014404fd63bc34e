//! Closed-form statistics of the equivalent channel gain: Gamma moment
//! matching from the selected correlation submatrix, outage probability,
//! ergodic-capacity bound and their high-SNR asymptotes.
//!
//! Also houses the rank-one exponential-mixture sampler, an independent
//! route to the exact law of the static-mode gain used as a test oracle.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::Exp1;

use crate::channel::{complex_normal, substream, LinkBudget};
use crate::error::{Error, Result};
use crate::geometry::{CorrelationMatrix, CorrelationSqrt, SelectionSet};
use crate::special::{ln_gamma_unchecked, reg_lower_inc_gamma};

/// `tr(J̃ᵖ) = Σ λᵢᵖ` over the symmetric eigenvalues.
pub fn trace_power(jt: &CorrelationMatrix, p: u32) -> f64 {
    jt.eigenvalues().iter().map(|l| l.powi(p as i32)).sum()
}

/// Gamma law with shape `k` and scale `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFit {
    pub shape_k: f64,
    pub scale_theta: f64,
}

impl GammaFit {
    pub fn new(shape_k: f64, scale_theta: f64) -> Result<Self> {
        if !(shape_k > 0.0 && shape_k.is_finite() && scale_theta > 0.0 && scale_theta.is_finite()) {
            return Err(Error::Domain {
                func: "GammaFit::new",
                detail: format!("need k > 0 and theta > 0, got {shape_k}, {scale_theta}"),
            });
        }
        Ok(Self { shape_k, scale_theta })
    }

    /// Matches mean `t2` and variance `t4`: `k = t2²/t4`, `θ = t4/t2`.
    pub fn from_traces(t2: f64, t4: f64) -> Result<Self> {
        if !(t4 > 0.0) || !(t2 > 0.0) {
            return Err(Error::DegenerateSubmatrix);
        }
        Self::new(t2 * t2 / t4, t4 / t2)
    }

    pub fn mean(&self) -> f64 {
        self.shape_k * self.scale_theta
    }

    pub fn variance(&self) -> f64 {
        self.shape_k * self.scale_theta * self.scale_theta
    }

    pub fn ln_pdf(&self, g: f64) -> f64 {
        let (k, th) = (self.shape_k, self.scale_theta);
        if g < 0.0 {
            return f64::NEG_INFINITY;
        }
        if g == 0.0 {
            return match k.partial_cmp(&1.0) {
                Some(std::cmp::Ordering::Less) => f64::INFINITY,
                Some(std::cmp::Ordering::Equal) => -th.ln(),
                _ => f64::NEG_INFINITY,
            };
        }
        (k - 1.0) * g.ln() - g / th - k * th.ln() - ln_gamma_unchecked(k)
    }

    pub fn pdf(&self, g: f64) -> f64 {
        self.ln_pdf(g).exp()
    }

    pub fn cdf(&self, g: f64) -> f64 {
        if g <= 0.0 {
            return 0.0;
        }
        reg_lower_inc_gamma(self.shape_k, g / self.scale_theta).expect("shape validated at construction")
    }

    /// Inverse CDF by bisection on a bracket grown from the mean.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Domain {
                func: "GammaFit::quantile",
                detail: format!("p = {p}, need 0 <= p < 1"),
            });
        }
        if p == 0.0 {
            return Ok(0.0);
        }
        let mut hi = self.mean() + self.variance().sqrt();
        while self.cdf(hi) < p {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Moment-matched Gamma law of the gain for a selected submatrix.
pub fn gamma_fit(jt: &CorrelationMatrix) -> Result<GammaFit> {
    GammaFit::from_traces(trace_power(jt, 2), trace_power(jt, 4))
}

pub fn gamma_pdf(fit: &GammaFit, g: f64) -> f64 {
    fit.pdf(g)
}

pub fn gamma_cdf(fit: &GammaFit, g: f64) -> f64 {
    fit.cdf(g)
}

/// `P(G ≤ R̄ / (γ̄ L_f L_u))` under the Gamma law.
pub fn outage_probability(fit: &GammaFit, budget: &LinkBudget) -> f64 {
    fit.cdf(budget.gain_threshold())
}

/// Leading high-SNR term `(x/θ)ᵏ / (k Γ(k))` at the outage threshold `x`.
pub fn outage_asymptotic(fit: &GammaFit, budget: &LinkBudget) -> f64 {
    let k = fit.shape_k;
    let z = budget.gain_threshold() / fit.scale_theta;
    (k * z.ln() - k.ln() - ln_gamma_unchecked(k)).exp()
}

/// Jensen upper bound `log₂(1 + γ̄ L_f L_u tr(J̃²))`.
pub fn ergodic_capacity_bound(jt: &CorrelationMatrix, budget: &LinkBudget) -> f64 {
    ergodic_capacity_bound_from_trace(trace_power(jt, 2), budget)
}

pub fn ergodic_capacity_bound_from_trace(trace2: f64, budget: &LinkBudget) -> f64 {
    (budget.snr_scale() * trace2).ln_1p() / std::f64::consts::LN_2
}

/// High-SNR form of the bound, `log₂(γ̄ L_f L_u tr(J̃²))`.
pub fn ergodic_capacity_asymptotic(jt: &CorrelationMatrix, budget: &LinkBudget) -> f64 {
    ergodic_capacity_asymptotic_from_trace(trace_power(jt, 2), budget)
}

pub fn ergodic_capacity_asymptotic_from_trace(trace2: f64, budget: &LinkBudget) -> f64 {
    (budget.snr_scale() * trace2).log2()
}

/// Exact first two moments of the static-mode gain `|h_uᴴ A h_f|²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Moments of the gain for fixed phases on a selected submatrix.
///
/// With `C = A Aᴴ`, the mean is `tr C`. Given `h_u` the gain is exponential
/// with mean `h_uᴴ C h_u`, so `E[G²] = 2(tr²C + tr C²)` and the variance is
/// `tr²C + 2 tr C²`. For zero phases `tr C = tr(J̃²)` and `tr C² = tr(J̃⁴)`.
pub fn exact_gain_moments(jt: &CorrelationMatrix, phases: &[f64]) -> Result<GainMoments> {
    let n = jt.dim();
    if phases.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: phases.len(),
        });
    }
    let j = jt.as_matrix().map(|v| Complex64::new(v, 0.0));
    let rotated = DMatrix::from_fn(n, n, |a, b| {
        Complex64::from_polar(1.0, phases[a] - phases[b]) * j[(a, b)]
    });
    // C is similar to (Φ J̃ Φᴴ) J̃
    let c = &rotated * &j;
    let tr_c = c.trace().re;
    let tr_c2 = (&c * &c).trace().re;
    Ok(GainMoments {
        mean: tr_c,
        variance: tr_c * tr_c + 2.0 * tr_c2,
    })
}

/// Draws the static-mode gain through its rank-one structure: given `h_u`,
/// `G = ζ |w|²` with `ζ = ‖Aᴴ h_u‖²` and `|w|² ~ Exp(1)`.
#[derive(Debug, Clone)]
pub struct MixtureSampler {
    rows: DMatrix<f64>,
    phases: Vec<f64>,
}

impl MixtureSampler {
    pub fn new(sqrt_j: &CorrelationSqrt, sel: &SelectionSet, phases: &[f64]) -> Result<Self> {
        if phases.len() != sel.len() {
            return Err(Error::DimensionMismatch {
                expected: sel.len(),
                found: phases.len(),
            });
        }
        Ok(Self {
            rows: sqrt_j.selected_rows(sel)?,
            phases: phases.to_vec(),
        })
    }

    /// Nonzero eigenvalue `‖Aᴴ h_u‖²` of `B = Aᴴ h_u h_uᴴ A`.
    pub fn rank_one_eigenvalue(&self, h_u: &[Complex64]) -> f64 {
        let (m_o, m) = self.rows.shape();
        // Φᴴ S J^{1/2} h_u
        let v: Vec<Complex64> = (0..m_o)
            .map(|r| {
                let a: Complex64 = (0..m).map(|c| h_u[c] * self.rows[(r, c)]).sum();
                a * Complex64::from_polar(1.0, -self.phases[r])
            })
            .collect();
        // J^{1/2} Sᵀ v
        (0..m)
            .map(|c| (0..m_o).map(|r| v[r] * self.rows[(r, c)]).sum::<Complex64>().norm_sqr())
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let m = self.rows.ncols();
        let h_u: Vec<Complex64> = (0..m).map(|_| complex_normal(rng)).collect();
        let e: f64 = rng.sample(Exp1);
        self.rank_one_eigenvalue(&h_u) * e
    }

    /// `n` draws, draw `t` from `substream(seed, t)`.
    pub fn samples(&self, n: usize, seed: u64) -> Vec<f64> {
        (0..n as u64).map(|t| self.sample(&mut substream(seed, t))).collect()
    }
}

pub fn sample_gain_exponential_mixture<R: Rng + ?Sized>(
    rng: &mut R,
    sqrt_j: &CorrelationSqrt,
    sel: &SelectionSet,
    phases: &[f64],
) -> Result<f64> {
    Ok(MixtureSampler::new(sqrt_j, sel, phases)?.sample(rng))
}
