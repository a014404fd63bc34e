//! Monte-Carlo trial engine and the estimators built on its gain samples.
//!
//! Trial `t` of a run draws its fading from `substream(seed, t)`. Trials are
//! processed in fixed chunks aligned to the trial index, one dense product
//! per chunk, so results are bit-identical for any number of workers.

use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::analysis::GammaFit;
use crate::channel::{sample_channels, substream, top_mask, LinkBudget, PhaseConfig};
use crate::error::{Error, Result};
use crate::geometry::{psd_sqrt, CorrelationMatrix, CorrelationSqrt, Kernel, SelectionSet, SurfaceGeometry};

/// Outage points with fewer hits than this are flagged unreliable.
pub const MIN_RELIABLE_HITS: usize = 50;

const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum SimulationMode {
    /// Fixed selection with fixed or coherent phases.
    Static {
        selection: SelectionSet,
        phases: PhaseConfig,
    },
    /// Per-trial top-`m_o` selection with coherent phases.
    AdaptiveFris { m_o: usize },
    /// Conventional surface: `m_rx × m_rz` always-on elements over the same
    /// aperture, coherent phases.
    RisBaseline { m_rx: usize, m_rz: usize },
}

impl fmt::Display for SimulationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Static { selection, phases } => {
                let p = match phases {
                    PhaseConfig::Coherent => "coherent",
                    PhaseConfig::Fixed(v) if v.iter().all(|&x| x == 0.0) => "zero",
                    PhaseConfig::Fixed(_) => "fixed",
                };
                write!(f, "static(M_o={},{p})", selection.len())
            }
            Self::AdaptiveFris { m_o } => write!(f, "fris(M_o={m_o})"),
            Self::RisBaseline { m_rx, m_rz } => write!(f, "ris({m_rx}x{m_rz})"),
        }
    }
}

#[derive(Debug, Clone)]
enum GainRule {
    Fixed(Vec<Complex64>),
    Coherent,
    TopProducts(usize),
}

/// A mode prepared against a geometry: the rows of the correlation square
/// root each trial needs and the rule turning them into a gain.
#[derive(Debug, Clone)]
pub struct GainEngine {
    factor: DMatrix<f64>,
    rule: GainRule,
    clamped_count: usize,
}

impl GainEngine {
    pub fn new(geom: &SurfaceGeometry, kernel: Kernel, mode: &SimulationMode) -> Result<Self> {
        match mode {
            SimulationMode::RisBaseline { m_rx, m_rz } => {
                let ris = geom.with_grid(*m_rx, *m_rz)?;
                let sqrt = psd_sqrt(&CorrelationMatrix::build(&ris, kernel), None)?;
                Self::from_sqrt(&sqrt, mode)
            }
            _ => {
                let sqrt = psd_sqrt(&CorrelationMatrix::build(geom, kernel), None)?;
                Self::from_sqrt(&sqrt, mode)
            }
        }
    }

    /// Prepares `mode` on an existing square root. For the baseline mode the
    /// square root must be that of the baseline grid.
    pub fn from_sqrt(sqrt: &CorrelationSqrt, mode: &SimulationMode) -> Result<Self> {
        let m = sqrt.dim();
        let (factor, rule) = match mode {
            SimulationMode::Static { selection, phases } => {
                let rule = match phases {
                    PhaseConfig::Fixed(p) => {
                        if p.len() != selection.len() {
                            return Err(Error::DimensionMismatch {
                                expected: selection.len(),
                                found: p.len(),
                            });
                        }
                        GainRule::Fixed(p.iter().map(|&x| Complex64::from_polar(1.0, x)).collect())
                    }
                    PhaseConfig::Coherent => GainRule::Coherent,
                };
                (sqrt.selected_rows(selection)?, rule)
            }
            SimulationMode::AdaptiveFris { m_o } => {
                if *m_o == 0 || *m_o > m {
                    return Err(Error::InvalidSelection(format!(
                        "cannot activate {m_o} of {m} elements"
                    )));
                }
                (sqrt.as_matrix().clone(), GainRule::TopProducts(*m_o))
            }
            SimulationMode::RisBaseline { m_rx, m_rz } => {
                if m_rx * m_rz != m {
                    return Err(Error::DimensionMismatch {
                        expected: m_rx * m_rz,
                        found: m,
                    });
                }
                (sqrt.as_matrix().clone(), GainRule::Coherent)
            }
        };
        Ok(Self {
            factor,
            rule,
            clamped_count: sqrt.clamped_count(),
        })
    }

    /// Length of each fading vector drawn per trial.
    pub fn num_elements(&self) -> usize {
        self.factor.ncols()
    }

    pub fn clamped_count(&self) -> usize {
        self.clamped_count
    }

    /// Gain samples for trials `0..n`. `workers = None` uses the global pool.
    pub fn run(&self, n: usize, seed: u64, workers: Option<usize>) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::EmptySamples);
        }
        let starts: Vec<usize> = (0..n).step_by(CHUNK).collect();
        let job = |&start: &usize| self.run_chunk(start, (start + CHUNK).min(n), seed);
        let chunks = run_parallel(&starts, job, workers)?;
        Ok(chunks.into_iter().flatten().collect())
    }

    fn run_chunk(&self, start: usize, end: usize, seed: u64) -> Vec<f64> {
        let m = self.num_elements();
        let b = end - start;
        let mut h = DMatrix::<f64>::zeros(m, 4 * b);
        for (i, t) in (start..end).enumerate() {
            let r = sample_channels(&mut substream(seed, t as u64), m);
            for (row, (f, u)) in r.h_f.iter().zip(&r.h_u).enumerate() {
                h[(row, 4 * i)] = f.re;
                h[(row, 4 * i + 1)] = f.im;
                h[(row, 4 * i + 2)] = u.re;
                h[(row, 4 * i + 3)] = u.im;
            }
        }
        let y = &self.factor * h;
        let rows = y.nrows();
        let mut products = vec![0.0; rows];
        (0..b)
            .map(|i| {
                let a_f = |r: usize| Complex64::new(y[(r, 4 * i)], y[(r, 4 * i + 1)]);
                let a_u = |r: usize| Complex64::new(y[(r, 4 * i + 2)], y[(r, 4 * i + 3)]);
                match &self.rule {
                    GainRule::Fixed(rot) => (0..rows)
                        .map(|r| a_u(r).conj() * rot[r] * a_f(r))
                        .sum::<Complex64>()
                        .norm_sqr(),
                    GainRule::Coherent => {
                        let s: f64 = (0..rows).map(|r| a_u(r).norm() * a_f(r).norm()).sum();
                        s * s
                    }
                    GainRule::TopProducts(m_o) => {
                        for (r, p) in products.iter_mut().enumerate() {
                            *p = a_u(r).norm() * a_f(r).norm();
                        }
                        let mask = top_mask(&products, *m_o).expect("m_o validated at construction");
                        let s: f64 = products.iter().zip(&mask).filter(|(_, &on)| on).map(|(p, _)| p).sum();
                        s * s
                    }
                }
            })
            .collect()
    }
}

#[cfg(feature = "parallel")]
fn run_parallel<T, F>(items: &[usize], job: F, workers: Option<usize>) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    match workers {
        None => Ok(items.par_iter().map(job).collect()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(|| items.par_iter().map(job).collect()))
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn run_parallel<T, F>(items: &[usize], job: F, _workers: Option<usize>) -> Result<Vec<T>>
where
    F: Fn(&usize) -> T,
{
    Ok(items.iter().map(job).collect())
}

/// `n` gain samples of `mode` on `geom`, trial `t` drawn from `(seed, t)`.
pub fn run_trials(
    geom: &SurfaceGeometry,
    kernel: Kernel,
    mode: &SimulationMode,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    GainEngine::new(geom, kernel, mode)?.run(n, seed, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult {
    pub estimate: f64,
    pub std_error: f64,
    pub trials: usize,
    /// Samples in outage; `None` for mean estimators.
    pub hits: Option<usize>,
    pub mode: Option<String>,
    pub seed: Option<u64>,
}

impl EstimatorResult {
    pub fn tagged(mut self, mode: &SimulationMode, seed: u64) -> Self {
        self.mode = Some(mode.to_string());
        self.seed = Some(seed);
        self
    }

    pub fn is_reliable(&self) -> bool {
        self.hits.is_none_or(|h| h >= MIN_RELIABLE_HITS)
    }
}

fn nonempty(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        Err(Error::EmptySamples)
    } else {
        Ok(())
    }
}

/// Fraction of samples at or below `threshold`, binomial standard error.
pub fn estimate_outage_at(samples: &[f64], threshold: f64) -> Result<EstimatorResult> {
    nonempty(samples)?;
    let n = samples.len();
    let hits = samples.iter().filter(|&&g| g <= threshold).count();
    let p = hits as f64 / n as f64;
    Ok(EstimatorResult {
        estimate: p,
        std_error: (p * (1.0 - p) / n as f64).sqrt(),
        trials: n,
        hits: Some(hits),
        mode: None,
        seed: None,
    })
}

pub fn estimate_outage(samples: &[f64], budget: &LinkBudget) -> Result<EstimatorResult> {
    estimate_outage_at(samples, budget.gain_threshold())
}

/// Mean of `log₂(1 + γ̄ L_f L_u G)` with its standard error.
pub fn estimate_ergodic_capacity(samples: &[f64], budget: &LinkBudget) -> Result<EstimatorResult> {
    nonempty(samples)?;
    let caps: Vec<f64> = samples.iter().map(|&g| budget.capacity(g)).collect();
    let stats = sample_stats(&caps)?;
    Ok(EstimatorResult {
        estimate: stats.mean,
        std_error: stats.se_mean,
        trials: caps.len(),
        hits: None,
        mode: None,
        seed: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub se_mean: f64,
    /// Standard error of the sample variance from the fourth central moment.
    pub se_variance: f64,
}

pub fn sample_stats(samples: &[f64]) -> Result<SampleStats> {
    nonempty(samples)?;
    let n = samples.len();
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    if n == 1 {
        return Ok(SampleStats {
            n,
            mean,
            variance: 0.0,
            se_mean: 0.0,
            se_variance: 0.0,
        });
    }
    let (m2, m4) = samples.iter().fold((0.0, 0.0), |(a, b), &x| {
        let d = x - mean;
        let d2 = d * d;
        (a + d2, b + d2 * d2)
    });
    let variance = m2 / (nf - 1.0);
    let mu4 = m4 / nf;
    let var_of_var = ((mu4 - variance * variance * (nf - 3.0) / (nf - 1.0)) / nf).max(0.0);
    Ok(SampleStats {
        n,
        mean,
        variance,
        se_mean: (variance / nf).sqrt(),
        se_variance: var_of_var.sqrt(),
    })
}

/// Right-continuous empirical CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        nonempty(samples)?;
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::Numerical("NaN in sample set".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted_samples(&self) -> &[f64] {
        &self.sorted
    }

    /// `#{samples ≤ g} / n`
    pub fn eval(&self, g: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= g) as f64 / self.sorted.len() as f64
    }
}

pub fn empirical_cdf(samples: &[f64]) -> Result<EmpiricalCdf> {
    EmpiricalCdf::new(samples)
}

/// One-sample Kolmogorov–Smirnov distance to the fitted Gamma law.
pub fn ks_statistic(samples: &[f64], fit: &GammaFit) -> Result<f64> {
    let ecdf = EmpiricalCdf::new(samples)?;
    let n = ecdf.len() as f64;
    Ok(ecdf
        .sorted_samples()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = fit.cdf(x);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max))
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = EmpiricalCdf::new(a)?;
    let b = EmpiricalCdf::new(b)?;
    let (sa, sb) = (a.sorted_samples(), b.sorted_samples());
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let x = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= x {
            i += 1;
        }
        while j < sb.len() && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Single-column sample dump with `#`-prefixed metadata lines.
pub fn write_samples_csv<W: Write>(mut out: W, samples: &[f64], meta: &[(String, String)]) -> Result<()> {
    for (k, v) in meta {
        writeln!(out, "# {k}: {v}")?;
    }
    writeln!(out, "g")?;
    for s in samples {
        writeln!(out, "{s:.16e}")?;
    }
    Ok(())
}
