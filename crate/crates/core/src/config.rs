//! Run configuration, read from a single TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{ManifoldKind, ManifoldSpec};

pub const DEFAULT_CELLS_PER_WAVELENGTH: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaRule {
    /// `covering.gamma` as given.
    Fixed,
    /// `γ = 4κ_δ`.
    FourKappa,
    /// `γ = 4κ_δ` for the shared covering, plus the per-domain
    /// `4κ_δ / ‖φ‖²_{L²(Ω)}` reclassification for the corollary rows.
    PerDomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HRule {
    /// `covering.h` as given.
    Fixed,
    /// `h = 8·max inradius`, snapped up to the grid.
    #[serde(rename = "section-4")]
    EightInradius,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    pub kind: ManifoldKind,
    pub side_lengths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    /// Explicit eigenvalue targets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    /// Every admissible eigenvalue in `[min, max]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_range: Option<LambdaRange>,
    #[serde(default)]
    pub lambda_window: f64,
    #[serde(default = "default_seeds")]
    pub seeds_per_eigenvalue: u32,
    #[serde(default)]
    pub base_seed: u64,
}

fn default_seeds() -> u32 {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolutionConfig {
    #[serde(default = "default_cpw")]
    pub cells_per_wavelength: f64,
    /// Overrides the wavelength rule with a fixed cell count per axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed: Option<usize>,
}

fn default_cpw() -> f64 {
    DEFAULT_CELLS_PER_WAVELENGTH
}

impl Default for ResolutionConfig {
    fn default() -> Self {
        ResolutionConfig {
            cells_per_wavelength: DEFAULT_CELLS_PER_WAVELENGTH,
            fixed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoveringConfig {
    #[serde(default = "default_gamma_rule")]
    pub gamma_rule: GammaRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Defaults to `16√n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default = "default_h_rule")]
    pub h_rule: HRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

fn default_gamma_rule() -> GammaRule {
    GammaRule::FourKappa
}

fn default_h_rule() -> HRule {
    HRule::EightInradius
}

impl Default for CoveringConfig {
    fn default() -> Self {
        CoveringConfig {
            gamma_rule: GammaRule::FourKappa,
            gamma: None,
            delta: None,
            h_rule: HRule::EightInradius,
            h: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Nodal points sampled per run for the mean-value defect.
    #[serde(default = "default_nodal_points")]
    pub nodal_points: usize,
    /// Ball radii (units of `1/√λ`) for the max-point profile.
    #[serde(default = "default_profile_radii")]
    pub profile_radii: usize,
    #[serde(default = "default_profile_max")]
    pub profile_max_radius: f64,
}

fn default_nodal_points() -> usize {
    48
}

fn default_profile_radii() -> usize {
    32
}

fn default_profile_max() -> f64 {
    8.0
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            nodal_points: default_nodal_points(),
            profile_radii: default_profile_radii(),
            profile_max_radius: default_profile_max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_jobs() -> usize {
    1
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            jobs: default_jobs(),
        }
    }
}

/// Windows applied by `scan` to the ensemble regressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcceptanceConfig {
    pub fat_slope_min: f64,
    pub fat_slope_max: f64,
    /// Frozen band for `inrad*·√λ`; the default 3-torus scan spans 2.23–2.73.
    pub fat_product_min: f64,
    pub fat_product_max: f64,
    /// Largest allowed max/min of the per-λ theorem constant.
    pub theorem_spread: f64,
    pub trend_p_value: f64,
    pub trend_slope: f64,
    pub sum_slope_slack: f64,
    pub rayleigh_tolerance: f64,
    pub mean_value_bound: f64,
    pub mean_value_quantile: f64,
    pub profile_slope_slack: f64,
}

impl Default for AcceptanceConfig {
    fn default() -> Self {
        AcceptanceConfig {
            fat_slope_min: -0.60,
            fat_slope_max: -0.40,
            fat_product_min: 2.0,
            fat_product_max: 3.0,
            theorem_spread: 2.0,
            trend_p_value: 0.05,
            trend_slope: 0.1,
            sum_slope_slack: 0.3,
            rayleigh_tolerance: 0.03,
            mean_value_bound: 1.0 / 3.0 + 0.05,
            mean_value_quantile: 0.95,
            profile_slope_slack: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifold: ManifoldConfig,
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub resolution: ResolutionConfig,
    #[serde(default)]
    pub covering: CoveringConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub acceptance: AcceptanceConfig,
}

impl RunConfig {
    /// Unit 3-torus, admissible `λ = 4π²k` for `k = 1..=20`, five seeds.
    pub fn default_torus_scan() -> Self {
        let four_pi2 = 4.0 * std::f64::consts::PI.powi(2);
        RunConfig {
            manifold: ManifoldConfig {
                kind: ManifoldKind::Torus,
                side_lengths: vec![1.0; 3],
            },
            ensemble: EnsembleConfig {
                lambdas: None,
                lambda_range: Some(LambdaRange {
                    min: four_pi2 * 0.5,
                    max: four_pi2 * 20.5,
                }),
                lambda_window: 0.0,
                seeds_per_eigenvalue: 5,
                base_seed: 0,
            },
            resolution: ResolutionConfig::default(),
            covering: CoveringConfig::default(),
            analysis: AnalysisConfig::default(),
            output: OutputConfig::default(),
            acceptance: AcceptanceConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Config(format!("key `{}`: {}", e.path(), e.inner().message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn manifold(&self) -> Result<ManifoldSpec> {
        ManifoldSpec::new(self.manifold.kind, self.manifold.side_lengths.clone())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.manifold()?;
        match (&self.ensemble.lambdas, &self.ensemble.lambda_range) {
            (Some(_), Some(_)) => return bad("give either ensemble.lambdas or ensemble.lambda_range".into()),
            (None, None) => return bad("ensemble needs lambdas or lambda_range".into()),
            (Some(l), None) if l.is_empty() || l.iter().any(|v| !(*v > 0.0)) => {
                return bad("ensemble.lambdas must be positive".into())
            }
            (None, Some(r)) if !(r.min > 0.0 && r.max >= r.min) => {
                return bad("ensemble.lambda_range needs 0 < min ≤ max".into())
            }
            _ => {}
        }
        if !(self.ensemble.lambda_window >= 0.0) {
            return bad("ensemble.lambda_window must be non-negative".into());
        }
        if self.ensemble.seeds_per_eigenvalue == 0 {
            return bad("ensemble.seeds_per_eigenvalue must be positive".into());
        }
        if !(self.resolution.cells_per_wavelength > 0.0) {
            return bad("resolution.cells_per_wavelength must be positive".into());
        }
        if self.resolution.fixed == Some(0) {
            return bad("resolution.fixed must be positive".into());
        }
        match (self.covering.gamma_rule, self.covering.gamma) {
            (GammaRule::Fixed, None) => return bad("covering.gamma required with gamma_rule = \"fixed\"".into()),
            (_, Some(g)) if !(g > 1.0) => return bad("covering.gamma must exceed 1".into()),
            _ => {}
        }
        if let Some(d) = self.covering.delta {
            if !(d > 1.0) {
                return bad("covering.delta must exceed 1".into());
            }
        }
        match (self.covering.h_rule, self.covering.h) {
            (HRule::Fixed, None) => return bad("covering.h required with h_rule = \"fixed\"".into()),
            (_, Some(h)) if !(h > 0.0) => return bad("covering.h must be positive".into()),
            _ => {}
        }
        if self.output.jobs == 0 {
            return bad("output.jobs must be positive".into());
        }
        if self.analysis.profile_radii == 0 || !(self.analysis.profile_max_radius > 0.0) {
            return bad("analysis profile parameters must be positive".into());
        }
        Ok(())
    }

    /// Eigenvalue targets in increasing order.
    pub fn lambdas(&self) -> Result<Vec<f64>> {
        let m = self.manifold()?;
        let mut v = match (&self.ensemble.lambdas, &self.ensemble.lambda_range) {
            (Some(l), _) => l.clone(),
            (None, Some(r)) => m.eigenvalues_in(r.min, r.max),
            (None, None) => Vec::new(),
        };
        v.sort_by(f64::total_cmp);
        Ok(v)
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.ensemble.seeds_per_eigenvalue as u64)
            .map(|j| self.ensemble.base_seed + j)
            .collect()
    }
}
