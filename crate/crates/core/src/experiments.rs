//! Config-driven experiment pipelines behind the `fris` command line:
//! JSON configuration, built-in presets, and the `dist`, `outage`,
//! `capacity` and `sweep-m` runs with their CSV output.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    ergodic_capacity_asymptotic_from_trace, ergodic_capacity_bound_from_trace, gamma_fit, outage_asymptotic,
    outage_probability, trace_power, GammaFit,
};
use crate::channel::{LinkBudget, PathLoss, PhaseConfig};
use crate::error::{Error, Result};
use crate::geometry::{psd_sqrt, CorrelationMatrix, Kernel, SelectionSet, SurfaceGeometry};
use crate::montecarlo::{
    estimate_ergodic_capacity, estimate_outage, ks_statistic, sample_stats, EmpiricalCdf, EstimatorResult, GainEngine,
    SimulationMode,
};

pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;
pub const DEFAULT_TRIALS: usize = 100_000;
pub const DEFAULT_SEED: u64 = 42;
const DIST_GRID_POINTS: usize = 200;
const DIST_UPPER_QUANTILE: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub m_x: usize,
    pub m_z: usize,
    /// Aperture width in wavelengths.
    #[serde(default = "default_aperture")]
    pub w_x: f64,
    #[serde(default = "default_aperture")]
    pub w_z: f64,
    #[serde(default = "default_carrier")]
    pub carrier_frequency_hz: f64,
}

fn default_aperture() -> f64 {
    3.0
}

fn default_carrier() -> f64 {
    2.4e9
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossConfig {
    pub rho: f64,
    pub alpha: f64,
    pub d_f: f64,
    pub d_u: f64,
}

impl Default for PathLossConfig {
    fn default() -> Self {
        Self {
            rho: 10.0,
            alpha: 2.1,
            d_f: 20.0,
            d_u: 40.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedPhases {
    Zero,
    Coherent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhaseSpec {
    Named(NamedPhases),
    Values(Vec<f64>),
}

impl Default for PhaseSpec {
    fn default() -> Self {
        Self::Named(NamedPhases::Zero)
    }
}

/// Simulation mode as written in a config file.
///
/// A static mode selects a `grid: [k_x, k_z]` uniform subgrid, an explicit
/// `indices` list, or every element when neither is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeConfig {
    Static {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid: Option<[usize; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        indices: Option<Vec<usize>>,
        #[serde(default)]
        phases: PhaseSpec,
    },
    AdaptiveFris {
        m_o: usize,
    },
    RisBaseline {
        m_rx: usize,
        m_rz: usize,
    },
}

impl ModeConfig {
    /// Resolves against a geometry.
    pub fn resolve(&self, geom: &SurfaceGeometry) -> Result<SimulationMode> {
        Ok(match self {
            Self::Static { grid, indices, phases } => {
                let selection = match (grid, indices) {
                    (Some(_), Some(_)) => {
                        return Err(Error::Config("static mode takes `grid` or `indices`, not both".into()))
                    }
                    (Some([kx, kz]), None) => SelectionSet::uniform_grid(geom, *kx, *kz)?,
                    (None, Some(idx)) => SelectionSet::new(idx.clone(), geom.num_elements())?,
                    (None, None) => SelectionSet::all(geom.num_elements()),
                };
                let phases = match phases {
                    PhaseSpec::Named(NamedPhases::Zero) => PhaseConfig::zeros(selection.len()),
                    PhaseSpec::Named(NamedPhases::Coherent) => PhaseConfig::Coherent,
                    PhaseSpec::Values(v) => {
                        if v.len() != selection.len() {
                            return Err(Error::Config(format!(
                                "static mode has {} phases for {} selected elements",
                                v.len(),
                                selection.len()
                            )));
                        }
                        PhaseConfig::fixed(v.clone())?
                    }
                };
                SimulationMode::Static { selection, phases }
            }
            Self::AdaptiveFris { m_o } => {
                if *m_o == 0 || *m_o > geom.num_elements() {
                    return Err(Error::Config(format!(
                        "adaptive_fris m_o = {m_o} must lie in 1..={}",
                        geom.num_elements()
                    )));
                }
                SimulationMode::AdaptiveFris { m_o: *m_o }
            }
            Self::RisBaseline { m_rx, m_rz } => {
                if *m_rx == 0 || *m_rz == 0 {
                    return Err(Error::Config("ris_baseline grid must be at least 1x1".into()));
                }
                SimulationMode::RisBaseline {
                    m_rx: *m_rx,
                    m_rz: *m_rz,
                }
            }
        })
    }
}

fn default_rate() -> f64 {
    0.1
}

fn default_snr_grid() -> Vec<f64> {
    (0..=8).map(|i| 5.0 * i as f64).collect()
}

fn default_modes() -> Vec<ModeConfig> {
    vec![ModeConfig::Static {
        grid: None,
        indices: None,
        phases: PhaseSpec::default(),
    }]
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// Complete experiment description. Only `geometry` is required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub kernel: Kernel,
    #[serde(default)]
    pub pathloss: PathLossConfig,
    #[serde(default = "default_rate")]
    pub rate_target: f64,
    #[serde(default = "default_snr_grid")]
    pub snr_grid_db: Vec<f64>,
    #[serde(default = "default_modes")]
    pub modes: Vec<ModeConfig>,
    /// `(m_x, m_z)` grid densities for `sweep-m`, all over the same aperture.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep_grid: Vec<[usize; 2]>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

/// Parses and validates a JSON config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let g = &self.geometry;
        if !(g.carrier_frequency_hz > 0.0 && g.carrier_frequency_hz.is_finite()) {
            return bad(format!(
                "geometry.carrier_frequency_hz must be positive, got {}",
                g.carrier_frequency_hz
            ));
        }
        let geom = self.surface().map_err(|e| Error::Config(format!("geometry: {e}")))?;
        self.path_loss().map_err(|e| Error::Config(format!("pathloss: {e}")))?;
        if !(self.rate_target > 0.0 && self.rate_target.is_finite()) {
            return bad(format!("rate_target must be positive, got {}", self.rate_target));
        }
        if self.snr_grid_db.is_empty() {
            return bad("snr_grid_db must not be empty".into());
        }
        if self.snr_grid_db.iter().any(|v| !v.is_finite()) {
            return bad("snr_grid_db entries must be finite".into());
        }
        if let Some(w) = self.snr_grid_db.windows(2).find(|w| w[0] >= w[1]) {
            return bad(format!(
                "snr_grid_db must be strictly increasing ({} then {})",
                w[0], w[1]
            ));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.modes.is_empty() {
            return bad("modes must not be empty".into());
        }
        for (i, m) in self.modes.iter().enumerate() {
            if let ModeConfig::AdaptiveFris { .. } = m {
                // adaptive modes are checked per grid in sweeps
                if !self.sweep_grid.is_empty() {
                    continue;
                }
            }
            m.resolve(&geom)
                .map_err(|e| Error::Config(format!("modes[{i}]: {e}")))?;
        }
        for [mx, mz] in &self.sweep_grid {
            geom.with_grid(*mx, *mz)
                .map_err(|e| Error::Config(format!("sweep_grid entry [{mx}, {mz}]: {e}")))?;
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.geometry.carrier_frequency_hz
    }

    pub fn surface(&self) -> Result<SurfaceGeometry> {
        let g = &self.geometry;
        SurfaceGeometry::new(g.m_x, g.m_z, g.w_x, g.w_z, self.wavelength())
    }

    pub fn path_loss(&self) -> Result<PathLoss> {
        let p = self.pathloss;
        PathLoss::new(p.rho, p.alpha, p.d_f, p.d_u)
    }

    pub fn budget(&self, snr_db: f64) -> Result<LinkBudget> {
        LinkBudget::from_db(snr_db, self.path_loss()?, self.rate_target)
    }

    /// SHA-256 of the canonical JSON form, ignoring `output_path`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_path = None;
        let canon = serde_json::to_string(&c).expect("config serialises");
        Sha256::digest(canon.as_bytes()).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig2,
    Fig3a,
    Fig3b,
    Fig3c,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig2" => Ok(Self::Fig2),
            "fig3a" => Ok(Self::Fig3a),
            "fig3b" => Ok(Self::Fig3b),
            "fig3c" => Ok(Self::Fig3c),
            other => Err(Error::Config(format!(
                "unknown preset `{other}` (fig2, fig3a, fig3b, fig3c)"
            ))),
        }
    }
}

fn fris(m_o: usize) -> ModeConfig {
    ModeConfig::AdaptiveFris { m_o }
}

fn ris(side: usize) -> ModeConfig {
    ModeConfig::RisBaseline { m_rx: side, m_rz: side }
}

impl Preset {
    /// Desk-scale versions of the reference figures on the 20×20, 3λ×3λ,
    /// 2.4 GHz surface.
    pub fn config(self) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            geometry: GeometryConfig {
                m_x: 20,
                m_z: 20,
                w_x: 3.0,
                w_z: 3.0,
                carrier_frequency_hz: 2.4e9,
            },
            kernel: Kernel::Spherical,
            pathloss: PathLossConfig::default(),
            rate_target: 0.1,
            snr_grid_db: default_snr_grid(),
            modes: Vec::new(),
            sweep_grid: Vec::new(),
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            output_path: None,
        };
        match self {
            Self::Fig2 => {
                cfg.modes = vec![ModeConfig::Static {
                    grid: Some([12, 12]),
                    indices: None,
                    phases: PhaseSpec::default(),
                }];
            }
            Self::Fig3a => {
                cfg.modes = vec![fris(36), fris(144), fris(324), ris(6), ris(12), ris(18)];
                cfg.trials = 1_000_000;
            }
            Self::Fig3b => {
                cfg.modes = vec![fris(16), fris(36), fris(64), ris(4), ris(6), ris(8)];
            }
            Self::Fig3c => {
                cfg.modes = vec![fris(36), fris(64), ris(6), ris(8)];
                cfg.snr_grid_db = vec![40.0];
                cfg.sweep_grid = (3..=10).map(|s| [2 * s, 2 * s]).collect();
            }
        }
        cfg
    }
}

/// Execution knobs that never change results.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub workers: Option<usize>,
}

/// Metadata lines, column header and rows of a CSV artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    fn new(command: &str, cfg: &ExperimentConfig, header: &[&str]) -> Self {
        let meta = vec![
            ("generator".to_string(), format!("fris {}", env!("CARGO_PKG_VERSION"))),
            ("command".to_string(), command.to_string()),
            ("config_sha256".to_string(), cfg.hash()),
            ("seed".to_string(), cfg.seed.to_string()),
            ("trials".to_string(), cfg.trials.to_string()),
        ];
        Self {
            meta,
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push_meta(&mut self, key: &str, value: String) {
        self.meta.push((key.to_string(), value));
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "{}", self.header.join(","));
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.join(","));
        }
        out
    }
}

/// Full-precision float field.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn prepare(cfg: &ExperimentConfig) -> Result<(SurfaceGeometry, CorrelationMatrix)> {
    cfg.validate()?;
    let geom = cfg.surface()?;
    let j = CorrelationMatrix::build(&geom, cfg.kernel);
    Ok((geom, j))
}

/// Samples for every mode of a geometry; the surface square root is shared.
fn sample_modes(
    geom: &SurfaceGeometry,
    j: &CorrelationMatrix,
    kernel: Kernel,
    modes: &[SimulationMode],
    trials: usize,
    seed: u64,
    opts: RunOptions,
) -> Result<Vec<Vec<f64>>> {
    let sqrt = psd_sqrt(j, None)?;
    modes
        .iter()
        .map(|mode| {
            let engine = match mode {
                SimulationMode::RisBaseline { .. } => GainEngine::new(geom, kernel, mode)?,
                _ => GainEngine::from_sqrt(&sqrt, mode)?,
            };
            engine.run(trials, seed, opts.workers)
        })
        .collect()
}

/// Uniform subgrid of `m_o` elements used for the analytical curve of an
/// adaptive mode: the factor pair closest to square that fits the grid.
pub fn analytical_selection(geom: &SurfaceGeometry, m_o: usize) -> Option<SelectionSet> {
    let mut pairs: Vec<(usize, usize)> = (1..=m_o)
        .filter(|&k| m_o.is_multiple_of(k))
        .map(|k| (k, m_o / k))
        .collect();
    pairs.sort_by_key(|&(a, b)| a.abs_diff(b));
    pairs
        .into_iter()
        .find(|&(kx, kz)| kx <= geom.m_x() && kz <= geom.m_z())
        .and_then(|(kx, kz)| SelectionSet::uniform_grid(geom, kx, kz).ok())
}

/// Correlation submatrix behind the analytical columns of a mode.
pub fn analytical_submatrix(
    geom: &SurfaceGeometry,
    j: &CorrelationMatrix,
    kernel: Kernel,
    mode: &SimulationMode,
) -> Result<Option<CorrelationMatrix>> {
    Ok(match mode {
        SimulationMode::Static { selection, .. } => Some(j.principal_submatrix(selection)?),
        SimulationMode::AdaptiveFris { m_o } => match analytical_selection(geom, *m_o) {
            Some(sel) => Some(j.principal_submatrix(&sel)?),
            None => None,
        },
        SimulationMode::RisBaseline { m_rx, m_rz } => {
            Some(CorrelationMatrix::build(&geom.with_grid(*m_rx, *m_rz)?, kernel))
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistRow {
    pub g: f64,
    pub analytical_pdf: f64,
    pub analytical_cdf: f64,
    pub empirical_cdf: f64,
}

#[derive(Debug, Clone)]
pub struct DistReport {
    pub mode: SimulationMode,
    pub fit: GammaFit,
    pub ks: f64,
    pub clamped_count: usize,
    pub samples: Vec<f64>,
    pub rows: Vec<DistRow>,
    pub table: CsvTable,
}

/// Analytical Gamma PDF/CDF against the empirical CDF of the first static mode.
pub fn cmd_dist(cfg: &ExperimentConfig, opts: RunOptions) -> Result<DistReport> {
    let (geom, j) = prepare(cfg)?;
    let mode = cfg
        .modes
        .iter()
        .find(|m| matches!(m, ModeConfig::Static { .. }))
        .ok_or_else(|| Error::Config("dist needs a static mode in `modes`".into()))?
        .resolve(&geom)?;
    let SimulationMode::Static { selection, .. } = &mode else {
        unreachable!("static config resolves to a static mode")
    };
    let fit = gamma_fit(&j.principal_submatrix(selection)?)?;
    let sqrt = psd_sqrt(&j, None)?;
    let samples = GainEngine::from_sqrt(&sqrt, &mode)?.run(cfg.trials, cfg.seed, opts.workers)?;
    let ks = ks_statistic(&samples, &fit)?;
    let ecdf = EmpiricalCdf::new(&samples)?;
    let upper = fit.quantile(DIST_UPPER_QUANTILE)?;
    let rows: Vec<DistRow> = (0..DIST_GRID_POINTS)
        .map(|i| {
            let g = upper * i as f64 / (DIST_GRID_POINTS - 1) as f64;
            DistRow {
                g,
                analytical_pdf: fit.pdf(g),
                analytical_cdf: fit.cdf(g),
                empirical_cdf: ecdf.eval(g),
            }
        })
        .collect();

    let stats = sample_stats(&samples)?;
    let mut table = CsvTable::new("dist", cfg, &["g", "analytical_pdf", "analytical_cdf", "empirical_cdf"]);
    table.push_meta("mode", mode.to_string());
    table.push_meta("k", fmt_f64(fit.shape_k));
    table.push_meta("theta", fmt_f64(fit.scale_theta));
    table.push_meta("ks_statistic", fmt_f64(ks));
    table.push_meta("sample_mean", fmt_f64(stats.mean));
    table.push_meta("sample_variance", fmt_f64(stats.variance));
    table.push_meta("clamped_eigenvalues", sqrt.clamped_count().to_string());
    table.rows = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.g),
                fmt_f64(r.analytical_pdf),
                fmt_f64(r.analytical_cdf),
                fmt_f64(r.empirical_cdf),
            ]
        })
        .collect();
    Ok(DistReport {
        mode,
        fit,
        ks,
        clamped_count: sqrt.clamped_count(),
        samples,
        rows,
        table,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutageRow {
    pub snr_db: f64,
    pub mode: String,
    /// `NaN` when no analytical selection exists for the mode.
    pub analytical: f64,
    pub asymptotic: f64,
    pub monte_carlo: EstimatorResult,
}

#[derive(Debug, Clone)]
pub struct OutageReport {
    pub rows: Vec<OutageRow>,
    pub fits: Vec<(String, Option<GammaFit>)>,
    pub table: CsvTable,
}

fn resolve_modes(cfg: &ExperimentConfig, geom: &SurfaceGeometry) -> Result<Vec<SimulationMode>> {
    cfg.modes.iter().map(|m| m.resolve(geom)).collect()
}

/// Analytical, asymptotic and Monte-Carlo outage per SNR point and mode.
pub fn cmd_outage(cfg: &ExperimentConfig, opts: RunOptions) -> Result<OutageReport> {
    let (geom, j) = prepare(cfg)?;
    let modes = resolve_modes(cfg, &geom)?;
    let samples = sample_modes(&geom, &j, cfg.kernel, &modes, cfg.trials, cfg.seed, opts)?;
    let mut fits = Vec::new();
    for mode in &modes {
        let fit = match analytical_submatrix(&geom, &j, cfg.kernel, mode)? {
            Some(jt) => Some(gamma_fit(&jt)?),
            None => None,
        };
        fits.push((mode.to_string(), fit));
    }
    let mut rows = Vec::new();
    for &snr_db in &cfg.snr_grid_db {
        let budget = cfg.budget(snr_db)?;
        for ((mode, s), (_, fit)) in modes.iter().zip(&samples).zip(&fits) {
            rows.push(OutageRow {
                snr_db,
                mode: mode.to_string(),
                analytical: fit.map_or(f64::NAN, |f| outage_probability(&f, &budget)),
                asymptotic: fit.map_or(f64::NAN, |f| outage_asymptotic(&f, &budget)),
                monte_carlo: estimate_outage(s, &budget)?.tagged(mode, cfg.seed),
            });
        }
    }
    let mut table = CsvTable::new(
        "outage",
        cfg,
        &[
            "snr_db",
            "mode",
            "analytical",
            "asymptotic",
            "monte_carlo",
            "std_error",
            "hits",
            "reliable",
        ],
    );
    for (name, fit) in &fits {
        if let Some(f) = fit {
            table.push_meta(
                &format!("fit {name}"),
                format!("k={} theta={}", fmt_f64(f.shape_k), fmt_f64(f.scale_theta)),
            );
        }
    }
    table.rows = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.snr_db),
                r.mode.clone(),
                fmt_f64(r.analytical),
                fmt_f64(r.asymptotic),
                fmt_f64(r.monte_carlo.estimate),
                fmt_f64(r.monte_carlo.std_error),
                r.monte_carlo.hits.unwrap_or(0).to_string(),
                if r.monte_carlo.is_reliable() {
                    "yes"
                } else {
                    "unreliable"
                }
                .to_string(),
            ]
        })
        .collect();
    Ok(OutageReport { rows, fits, table })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityRow {
    pub snr_db: f64,
    pub mode: String,
    pub bound: f64,
    pub asymptotic: f64,
    pub monte_carlo: EstimatorResult,
}

#[derive(Debug, Clone)]
pub struct CapacityReport {
    pub rows: Vec<CapacityRow>,
    pub table: CsvTable,
}

/// Jensen bound, its asymptote and the Monte-Carlo ergodic capacity.
pub fn cmd_capacity(cfg: &ExperimentConfig, opts: RunOptions) -> Result<CapacityReport> {
    let (geom, j) = prepare(cfg)?;
    let modes = resolve_modes(cfg, &geom)?;
    let samples = sample_modes(&geom, &j, cfg.kernel, &modes, cfg.trials, cfg.seed, opts)?;
    let traces: Vec<Option<f64>> = modes
        .iter()
        .map(|m| Ok(analytical_submatrix(&geom, &j, cfg.kernel, m)?.map(|jt| trace_power(&jt, 2))))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for &snr_db in &cfg.snr_grid_db {
        let budget = cfg.budget(snr_db)?;
        for ((mode, s), t2) in modes.iter().zip(&samples).zip(&traces) {
            rows.push(CapacityRow {
                snr_db,
                mode: mode.to_string(),
                bound: t2.map_or(f64::NAN, |t| ergodic_capacity_bound_from_trace(t, &budget)),
                asymptotic: t2.map_or(f64::NAN, |t| ergodic_capacity_asymptotic_from_trace(t, &budget)),
                monte_carlo: estimate_ergodic_capacity(s, &budget)?.tagged(mode, cfg.seed),
            });
        }
    }
    let mut table = CsvTable::new(
        "capacity",
        cfg,
        &["snr_db", "mode", "bound", "asymptotic", "monte_carlo", "std_error"],
    );
    table.rows = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.snr_db),
                r.mode.clone(),
                fmt_f64(r.bound),
                fmt_f64(r.asymptotic),
                fmt_f64(r.monte_carlo.estimate),
                fmt_f64(r.monte_carlo.std_error),
            ]
        })
        .collect();
    Ok(CapacityReport { rows, table })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub m_x: usize,
    pub m_z: usize,
    pub mode: String,
    pub capacity: EstimatorResult,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub table: CsvTable,
}

/// Ergodic capacity across grid densities at a fixed aperture.
///
/// Adaptive modes are re-run on each density (skipped where `m_o` exceeds
/// the grid). Baseline modes have a layout independent of the sweep, so
/// their samples are drawn once and repeated on every row.
pub fn cmd_sweep_m(cfg: &ExperimentConfig, opts: RunOptions) -> Result<SweepReport> {
    cfg.validate()?;
    if cfg.sweep_grid.is_empty() {
        return Err(Error::Config("sweep-m needs a non-empty `sweep_grid`".into()));
    }
    let base = cfg.surface()?;
    let mut baseline = Vec::new();
    for m in &cfg.modes {
        if let ModeConfig::RisBaseline { .. } = m {
            let mode = m.resolve(&base)?;
            let s = GainEngine::new(&base, cfg.kernel, &mode)?.run(cfg.trials, cfg.seed, opts.workers)?;
            baseline.push((mode, s));
        }
    }
    let mut per_grid = Vec::new();
    for &[mx, mz] in &cfg.sweep_grid {
        let geom = base.with_grid(mx, mz)?;
        let sqrt = psd_sqrt(&CorrelationMatrix::build(&geom, cfg.kernel), None)?;
        let mut runs = Vec::new();
        for m in &cfg.modes {
            if let ModeConfig::AdaptiveFris { m_o } = m {
                if *m_o > geom.num_elements() {
                    continue;
                }
                let mode = m.resolve(&geom)?;
                let s = GainEngine::from_sqrt(&sqrt, &mode)?.run(cfg.trials, cfg.seed, opts.workers)?;
                runs.push((mode, s));
            }
        }
        per_grid.push((mx, mz, runs));
    }
    let mut rows = Vec::new();
    for &snr_db in &cfg.snr_grid_db {
        let budget = cfg.budget(snr_db)?;
        for (mx, mz, runs) in &per_grid {
            for (mode, s) in runs.iter().chain(baseline.iter()) {
                rows.push(SweepRow {
                    snr_db,
                    m_x: *mx,
                    m_z: *mz,
                    mode: mode.to_string(),
                    capacity: estimate_ergodic_capacity(s, &budget)?.tagged(mode, cfg.seed),
                });
            }
        }
    }
    let mut table = CsvTable::new(
        "sweep-m",
        cfg,
        &["snr_db", "m_x", "m_z", "m", "mode", "monte_carlo", "std_error"],
    );
    table.rows = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.snr_db),
                r.m_x.to_string(),
                r.m_z.to_string(),
                (r.m_x * r.m_z).to_string(),
                r.mode.clone(),
                fmt_f64(r.capacity.estimate),
                fmt_f64(r.capacity.std_error),
            ]
        })
        .collect();
    Ok(SweepReport { rows, table })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(r#"{"geometry": {"m_x": 20, "m_z": 20}}"#).unwrap();
        assert_eq!(cfg.kernel, Kernel::Spherical);
        assert_eq!(cfg.trials, 100_000);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.rate_target, 0.1);
        assert_eq!(cfg.pathloss, PathLossConfig::default());
        // c / 2.4 GHz = 0.12491 m, quoted as 0.125 m
        assert!((cfg.wavelength() - 0.125).abs() < 1e-3);
        assert!((cfg.wavelength() - 0.124_913_524_166_666_7).abs() < 1e-15);
        assert_eq!(cfg.modes.len(), 1);
    }

    #[test]
    fn snr_grid_must_increase() {
        let err = parse_config(r#"{"geometry": {"m_x": 4, "m_z": 4}, "snr_grid_db": [10, 10]}"#).unwrap_err();
        assert!(
            matches!(&err, Error::Config(m) if m.contains("strictly increasing")),
            "{err}"
        );
        assert!(parse_config(r#"{"geometry": {"m_x": 4, "m_z": 4}, "snr_grid_db": []}"#).is_err());
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = parse_config(r#"{"geometry": {"m_x": 4, "m_z": 4}, "trails": 5}"#).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("trails")), "{err}");
        let err = parse_config(r#"{"geometry": {"m_x": 4, "m_z": 4, "depth": 1}}"#).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("depth")), "{err}");
        let err = parse_config(
            r#"{"geometry": {"m_x": 4, "m_z": 4}, "modes": [{"kind": "adaptive_fris", "m_o": 3, "x": 1}]}"#,
        )
        .unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains('x')), "{err}");
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse_config("{\n  \"geometry\": {\"m_x\": 4,\n}").unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("line")), "{err}");
    }

    #[test]
    fn mode_validation() {
        let ok = r#"{"geometry": {"m_x": 4, "m_z": 4}, "modes": [
            {"kind": "static", "grid": [2, 2]},
            {"kind": "static", "indices": [0, 5], "phases": [0.0, 1.0]},
            {"kind": "static", "phases": "coherent"},
            {"kind": "adaptive_fris", "m_o": 3},
            {"kind": "ris_baseline", "m_rx": 2, "m_rz": 2}]}"#;
        let cfg = parse_config(ok).unwrap();
        let geom = cfg.surface().unwrap();
        assert_eq!(
            cfg.modes[2].resolve(&geom).unwrap(),
            SimulationMode::Static {
                selection: SelectionSet::all(16),
                phases: PhaseConfig::Coherent
            }
        );
        for bad in [
            r#"{"geometry": {"m_x": 4, "m_z": 4}, "modes": [{"kind": "adaptive_fris", "m_o": 17}]}"#,
            r#"{"geometry": {"m_x": 4, "m_z": 4}, "modes": [{"kind": "static", "grid": [5, 1]}]}"#,
            r#"{"geometry": {"m_x": 4, "m_z": 4}, "modes": [{"kind": "static", "indices": [0, 1], "phases": [0.0]}]}"#,
            r#"{"geometry": {"m_x": 4, "m_z": 4}, "modes": []}"#,
            r#"{"geometry": {"m_x": 0, "m_z": 4}}"#,
            r#"{"geometry": {"m_x": 4, "m_z": 4}, "trials": 0}"#,
            r#"{"geometry": {"m_x": 4, "m_z": 4}, "pathloss": {"rho": -1, "alpha": 2, "d_f": 1, "d_u": 1}}"#,
        ] {
            assert!(matches!(parse_config(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn presets_validate() {
        for p in ["fig2", "fig3a", "fig3b", "fig3c"] {
            let preset: Preset = p.parse().unwrap();
            preset.config().validate().unwrap();
        }
        assert!("fig9".parse::<Preset>().is_err());
    }

    #[test]
    fn hash_ignores_output_path() {
        let mut a = Preset::Fig2.config();
        let h = a.hash();
        a.output_path = Some("x.csv".into());
        assert_eq!(a.hash(), h);
        a.seed += 1;
        assert_ne!(a.hash(), h);
        assert_eq!(h.len(), 64);
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = Preset::Fig3c.config();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }

    #[test]
    fn analytical_selection_shapes() {
        let g = SurfaceGeometry::new(20, 20, 3.0, 3.0, 0.125).unwrap();
        assert_eq!(analytical_selection(&g, 36).unwrap().len(), 36);
        assert_eq!(
            analytical_selection(&g, 16).unwrap(),
            SelectionSet::uniform_grid(&g, 4, 4).unwrap()
        );
        let thin = SurfaceGeometry::new(2, 50, 3.0, 3.0, 0.125).unwrap();
        assert_eq!(analytical_selection(&thin, 36).unwrap().len(), 36);
        assert_eq!(analytical_selection(&thin, 37).unwrap().len(), 37);
        assert!(analytical_selection(&thin, 53).is_none());
    }
}
