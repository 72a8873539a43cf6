//! End-to-end analysis of one eigenfunction and ensemble scans.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{self, DomainBounds, FatDomainPoint, Regression, ScalingSummary, StabilitySummary};
use crate::config::{GammaRule, HRule, RunConfig};
use crate::covering::{self, build_covering, CoveringHeader, CubeCovering, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::nodal::{self, decompose, fmt_f64, NodalDecomposition};
use crate::rayleigh::{self, DomainDensities, SpecialCubeReport};
use crate::sampling::{resolution_for, sample, SampledField};
use crate::spectral::{enumerate_eigenspace, random_eigenfunction, EigenfunctionSpec, ManifoldSpec};

/// Range of `1 − fraction` used for the max-point profile exponent.
pub const PROFILE_FIT_RANGE: (f64, f64) = (1e-4, 0.2);

/// Deterministic file stem of an ensemble member.
pub fn spec_stem(lambda: f64, seed: u64) -> String {
    format!("ef_lambda{lambda:.6}_seed{seed}")
}

pub fn unix_timestamp() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Grid resolution the configuration assigns to an eigenfunction.
pub fn resolution_of(cfg: &RunConfig, manifold: &ManifoldSpec, lambda: f64) -> usize {
    cfg.resolution
        .fixed
        .unwrap_or_else(|| resolution_for(manifold, lambda, cfg.resolution.cells_per_wavelength))
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Check {
    /// `None` when the check does not apply.
    pub pass: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    fn pass(margin: Option<f64>) -> Self {
        Check {
            pass: Some(true),
            margin,
            detail: None,
        }
    }

    fn fail(margin: Option<f64>, detail: String) -> Self {
        Check {
            pass: Some(false),
            margin,
            detail: Some(detail),
        }
    }

    fn skipped(detail: &str) -> Self {
        Check {
            pass: None,
            margin: None,
            detail: Some(detail.into()),
        }
    }

    fn from_bool(ok: bool, margin: f64, detail: impl FnOnce() -> String) -> Self {
        if ok {
            Check::pass(Some(margin))
        } else {
            Check::fail(Some(margin), detail())
        }
    }

    pub fn failed(&self) -> bool {
        self.pass == Some(false)
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Checks {
    pub mass_bound: Check,
    pub star_domain: Check,
    pub special_cube: Check,
    pub mean_value_defect: Check,
    pub eigen_identity: Check,
    /// Informational: every domain keeps τ ≥ 1/4 − slack under its
    /// tailored γ.
    pub corollary_1_4_tau: Check,
}

impl Checks {
    /// Names of the failed pointwise assertions.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for (name, c) in [
            ("mass_bound", &self.mass_bound),
            ("star_domain", &self.star_domain),
            ("special_cube", &self.special_cube),
            ("mean_value_defect", &self.mean_value_defect),
        ] {
            if c.failed() {
                out.push(name);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EigenIdentity {
    pub label: u32,
    pub lambda_1: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MeanValueSummary {
    pub radius: f64,
    pub sampled: usize,
    pub within_bound: usize,
    pub fraction_within: f64,
    pub max_defect: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ProfileSummary {
    pub label: u32,
    /// `(r, fraction)` with `r` in units of `1/√λ`.
    pub points: Vec<(f64, f64)>,
    /// Slope of `log(1 − fraction)` against `log r` in the fit range.
    pub slope: Option<f64>,
}

impl ProfileSummary {
    /// `(log r, log(1 − fraction))` inside the fit range.
    pub fn fit_points(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter(|(_, f)| {
                let m = 1.0 - f;
                m > PROFILE_FIT_RANGE.0 && m < PROFILE_FIT_RANGE.1
            })
            .map(|(r, f)| (r.ln(), (1.0 - f).ln()))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BoundsReport {
    pub schema_version: u32,
    pub timestamp: u64,
    pub lambda: f64,
    pub dimension: usize,
    pub manifold: ManifoldSpec,
    pub seed: Option<u64>,
    pub resolution: Vec<usize>,
    pub domain_count: usize,
    pub zero_cell_count: usize,
    pub inradius_error: f64,
    pub fat_domain_inradius: f64,
    pub fat_domain_label: u32,
    /// `Σ inrad^{2n/(n−2)}`; absent for n = 2.
    pub sum_power_statistic: Option<f64>,
    pub covering: CoveringHeader,
    pub star_domain: Option<u32>,
    pub theorem_1_3_min_ratio: Option<f64>,
    pub corollary_1_4_min_ratio: Option<f64>,
    pub eigen_identity: Vec<EigenIdentity>,
    pub mean_value: Option<MeanValueSummary>,
    pub profile: Option<ProfileSummary>,
    pub checks: Checks,
    pub rows: Vec<DomainBounds>,
}

/// Everything one analysis produces.
pub struct Analysis {
    pub field: SampledField,
    pub decomposition: NodalDecomposition,
    pub covering: CubeCovering,
    pub special_cube: Option<SpecialCubeReport>,
    pub report: BoundsReport,
}

trait Staged<T> {
    fn stage(self, name: &'static str) -> Result<T>;
}

impl<T> Staged<T> for Result<T> {
    fn stage(self, name: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(name))
    }
}

/// Sample, then analyse.
pub fn analyze_spec(spec: &EigenfunctionSpec, cfg: &RunConfig) -> Result<Analysis> {
    let res = resolution_of(cfg, spec.manifold(), spec.lambda());
    let field = sample(spec, res).stage("sample")?;
    analyze_field(field, cfg)
}

/// Decompose, cover, and check every bound on a sampled field.
pub fn analyze_field(field: SampledField, cfg: &RunConfig) -> Result<Analysis> {
    let n = field.ndim();
    let lambda = field.lambda();
    let decomposition = decompose(&field).stage("decompose")?;

    // The cube size needs the inradii first.
    let h = match cfg.covering.h_rule {
        HRule::Fixed => cfg.covering.h.expect("validated"),
        HRule::EightInradius => covering::inradius_rule_h(field.grid(), decomposition.max_inradius()),
    };
    let delta = cfg.covering.delta.unwrap_or_else(|| covering::default_delta(n));
    let provisional = cfg.covering.gamma.unwrap_or(2.0);
    let mut cover = build_covering(&field, h, provisional, delta).stage("covering")?;
    if cfg.covering.gamma_rule != GammaRule::Fixed {
        cover = cover
            .reclassify(4.0 * cover.kappa_delta() as f64)
            .stage("covering")?;
    }

    let margin = cover.mass_bound_margin();
    let mass_bound = Check::from_bool(margin >= -1e-9, margin, || {
        format!(
            "good-set mass {} below 1 − κ_δ/γ = {}",
            cover.good_set_mass(),
            cover.mass_bound_rhs()
        )
    });

    let star = covering::find_star_domain(&cover, &field, &decomposition);
    let (star_domain, star) = match star {
        Ok(l) => (Check::pass(None), Some(l)),
        Err(e @ Error::StarDomainMissing) if cover.gamma() >= 4.0 * cover.kappa_delta() as f64 => {
            (Check::fail(None, e.to_string()), None)
        }
        Err(Error::StarDomainMissing) => (Check::skipped("γ below 4κ_δ"), None),
        Err(e) => return Err(e.in_stage("covering")),
    };

    let mut eigen_identity = Vec::new();
    let mut targets: Vec<u32> = Vec::new();
    if let Some(s) = star {
        targets.push(s);
    }
    if !targets.contains(&1) {
        targets.push(1);
    }
    let mut special = None;
    let mut special_cube = Check::skipped("no star domain");
    for &label in &targets {
        let dens = DomainDensities::new(&field, &decomposition, label).stage("rayleigh")?;
        eigen_identity.push(EigenIdentity {
            label,
            lambda_1: dens.lambda_1(),
            relative_error: (dens.lambda_1() / lambda - 1.0).abs(),
        });
        if Some(label) == star {
            match rayleigh::find_special_cube_with(&dens, &field, &decomposition, &cover) {
                Ok(s) => {
                    special_cube = Check::pass(Some(s.margin));
                    special = Some(SpecialCubeReport::build(&field, &cover, &s).stage("rayleigh")?);
                }
                Err(e @ Error::SpecialCubeMissing(_)) => special_cube = Check::fail(None, e.to_string()),
                Err(e) => return Err(e.in_stage("rayleigh")),
            }
        }
    }
    let worst = eigen_identity
        .iter()
        .map(|e| e.relative_error)
        .fold(0.0, f64::max);
    let tol = cfg.acceptance.rayleigh_tolerance;
    let eigen_check = Check::from_bool(worst <= tol, tol - worst, || {
        format!("discrete λ₁ off by {:.3}% (tolerance {:.1}%)", 100.0 * worst, 100.0 * tol)
    });

    let (mean_value, mean_value_defect) = if field.spec().is_some() {
        let m = mean_value_summary(&field, cfg).stage("rayleigh")?;
        let q = cfg.acceptance.mean_value_quantile;
        let c = if m.sampled == 0 {
            Check::skipped("no sign changes on the grid")
        } else {
            Check::from_bool(m.fraction_within >= q, m.fraction_within - q, || {
                format!(
                    "only {} of {} nodal balls have defect ≤ {:.4}",
                    m.within_bound, m.sampled, m.bound
                )
            })
        };
        (Some(m), c)
    } else {
        (None, Check::skipped("no analytic eigenfunction"))
    };

    let rows = bounds::verify_theorem_1_3(&field, &decomposition, &cover);
    let tau_bad = rows.iter().filter(|r| !r.corollary_1_4_tau_ok).count();
    let corollary_1_4_tau = if tau_bad == 0 {
        Check::pass(None)
    } else {
        Check::fail(None, format!("{tau_bad} domains with τ < 1/4 under the tailored γ"))
    };
    let min_of = |it: &mut dyn Iterator<Item = f64>| it.fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))));

    let profile = profile_summary(&field, &decomposition, cfg).stage("decompose")?;
    let fat = decomposition
        .domains()
        .iter()
        .fold((0.0, 0u32), |best, d| if d.inradius > best.0 { (d.inradius, d.label) } else { best });

    let report = BoundsReport {
        schema_version: SCHEMA_VERSION,
        timestamp: unix_timestamp(),
        lambda,
        dimension: n,
        manifold: field.manifold().clone(),
        seed: field.spec().and_then(|s| s.seed()),
        resolution: field.resolution().to_vec(),
        domain_count: decomposition.domains().len(),
        zero_cell_count: decomposition.zero_cell_count(),
        inradius_error: decomposition.inradius_error(),
        fat_domain_inradius: fat.0,
        fat_domain_label: fat.1,
        sum_power_statistic: bounds::verify_sum_inequality(&decomposition).ok(),
        covering: cover.header(),
        star_domain: star,
        theorem_1_3_min_ratio: min_of(&mut rows.iter().filter_map(|r| r.theorem_1_3_ratio)),
        corollary_1_4_min_ratio: min_of(&mut rows.iter().map(|r| r.corollary_1_4_ratio)),
        eigen_identity,
        mean_value,
        profile,
        checks: Checks {
            mass_bound,
            star_domain,
            special_cube,
            mean_value_defect,
            eigen_identity: eigen_check,
            corollary_1_4_tau,
        },
        rows,
    };
    Ok(Analysis {
        field,
        decomposition,
        covering: cover,
        special_cube: special,
        report,
    })
}

fn mean_value_summary(field: &SampledField, cfg: &RunConfig) -> Result<MeanValueSummary> {
    let seed = field.spec().and_then(|s| s.seed()).unwrap_or(0) ^ 0x6d65_616e;
    let points = rayleigh::sample_nodal_points(field, cfg.analysis.nodal_points, seed)?;
    let radius = (0.5 / field.lambda().sqrt()).min(rayleigh::mean_value_radius_guard(field));
    let bound = cfg.acceptance.mean_value_bound;
    let defects: Vec<f64> = points
        .par_iter()
        .map(|p| rayleigh::mean_value_defect(field, p, radius))
        .collect::<Result<_>>()?;
    let within = defects.iter().filter(|&&d| d <= bound).count();
    Ok(MeanValueSummary {
        radius,
        sampled: defects.len(),
        within_bound: within,
        fraction_within: if defects.is_empty() {
            1.0
        } else {
            within as f64 / defects.len() as f64
        },
        max_defect: defects.iter().cloned().fold(0.0, f64::max),
        bound,
    })
}

/// Ball profile about the maximum point of the domain carrying the largest
/// |φ|, on radii geometric between 1/2 and the configured maximum (units of
/// `1/√λ`), kept inside the injectivity guard.
pub fn profile_summary(field: &SampledField, d: &NodalDecomposition, cfg: &RunConfig) -> Result<Option<ProfileSummary>> {
    let Some(dom) = d
        .domains()
        .iter()
        .max_by(|a, b| a.max_value.abs().total_cmp(&b.max_value.abs()).then(b.label.cmp(&a.label)))
    else {
        return Ok(None);
    };
    let scale = field.lambda().sqrt();
    if !(scale > 0.0) {
        return Ok(None);
    }
    let rmax = cfg
        .analysis
        .profile_max_radius
        .min(0.95 * field.manifold().injectivity_guard() * scale);
    let rmin = 0.5f64.min(rmax);
    let k = cfg.analysis.profile_radii;
    let radii: Vec<f64> = (0..k)
        .map(|i| {
            if k == 1 {
                rmax
            } else {
                rmin * (rmax / rmin).powf(i as f64 / (k - 1) as f64)
            }
        })
        .collect();
    let points = nodal::max_point_ball_profile(field, d, dom.label, &radii)?;
    let mut p = ProfileSummary {
        label: dom.label,
        points,
        slope: None,
    };
    let fit = p.fit_points();
    if fit.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = fit.into_iter().unzip();
        p.slope = bounds::linear_fit(&x, &y).ok().map(|r| r.slope);
    }
    Ok(Some(p))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serialises") + "\n"
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Paths of the reports written by [`write_reports`].
#[derive(Debug, Clone)]
pub struct ReportPaths {
    pub domains_csv: PathBuf,
    pub covering_csv: PathBuf,
    pub covering_json: PathBuf,
    pub special_cube_json: PathBuf,
    pub bounds_json: PathBuf,
    pub bounds_csv: PathBuf,
}

pub fn report_paths(dir: &Path, stem: &str) -> ReportPaths {
    let p = |suffix: &str| dir.join(format!("{stem}_{suffix}"));
    ReportPaths {
        domains_csv: p("domains.csv"),
        covering_csv: p("covering.csv"),
        covering_json: p("covering.json"),
        special_cube_json: p("special_cube.json"),
        bounds_json: p("bounds.json"),
        bounds_csv: p("bounds.csv"),
    }
}

pub fn write_reports(analysis: &Analysis, dir: &Path, stem: &str) -> Result<ReportPaths> {
    ensure_dir(dir)?;
    let paths = report_paths(dir, stem);
    analysis.decomposition.write_csv(&paths.domains_csv)?;
    analysis.covering.write_csv(&paths.covering_csv)?;
    write(&paths.covering_json, &to_json(&analysis.covering.header()))?;
    match &analysis.special_cube {
        Some(s) => s.write_json(&paths.special_cube_json)?,
        None => write(
            &paths.special_cube_json,
            &to_json(&serde_json::json!({ "schema_version": SCHEMA_VERSION, "special_cube": null })),
        )?,
    }
    write(&paths.bounds_json, &to_json(&analysis.report))?;
    write_bounds_csv(&analysis.report, &paths.bounds_csv)?;
    Ok(paths)
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn write_bounds_csv(r: &BoundsReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| nodal::csv_error(path, e))?;
    w.write_record([
        "lambda",
        "label",
        "sign",
        "volume",
        "l2_mass",
        "inradius",
        "tau",
        "gamma",
        "kappa_delta",
        "theorem_1_3_rhs_over_c",
        "theorem_1_3_ratio",
        "corollary_1_4_rhs_over_c",
        "corollary_1_4_ratio",
        "corollary_1_4_gamma",
        "corollary_1_4_tau",
        "corollary_1_4_tau_ok",
    ])
    .map_err(|e| nodal::csv_error(path, e))?;
    for row in &r.rows {
        w.write_record([
            fmt_f64(r.lambda),
            row.label.to_string(),
            row.sign.as_str().to_string(),
            fmt_f64(row.volume),
            fmt_f64(row.l2_mass),
            fmt_f64(row.inradius),
            fmt_f64(row.tau),
            fmt_f64(row.gamma),
            row.kappa_delta.to_string(),
            fmt_f64(row.theorem_1_3_rhs_over_c),
            opt(row.theorem_1_3_ratio),
            fmt_f64(row.corollary_1_4_rhs_over_c),
            fmt_f64(row.corollary_1_4_ratio),
            fmt_f64(row.corollary_1_4_gamma),
            fmt_f64(row.corollary_1_4_tau),
            row.corollary_1_4_tau_ok.to_string(),
        ])
        .map_err(|e| nodal::csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Default)]
pub struct GenOutcome {
    pub written: Vec<PathBuf>,
    /// Targets with an empty eigenspace.
    pub skipped: Vec<f64>,
}

/// Ensemble members in scan order: ascending λ, then seed.
pub fn ensemble(cfg: &RunConfig) -> Result<(Vec<EigenfunctionSpec>, Vec<f64>)> {
    let m = cfg.manifold()?;
    let mut specs = Vec::new();
    let mut skipped = Vec::new();
    for lambda in cfg.lambdas()? {
        if enumerate_eigenspace(&m, lambda, cfg.ensemble.lambda_window)?.is_empty() {
            skipped.push(lambda);
            continue;
        }
        for seed in cfg.seeds() {
            specs.push(random_eigenfunction(&m, lambda, cfg.ensemble.lambda_window, seed)?);
        }
    }
    Ok((specs, skipped))
}

/// Write one spec file per (λ, seed).
pub fn cmd_gen(cfg: &RunConfig, out: &Path) -> Result<GenOutcome> {
    ensure_dir(out)?;
    let (specs, skipped) = ensemble(cfg)?;
    let mut written = Vec::new();
    for s in specs {
        let path = out.join(format!("{}.json", spec_stem(s.lambda(), s.seed().unwrap_or(0))));
        s.write(&path)?;
        written.push(path);
    }
    Ok(GenOutcome { written, skipped })
}

/// Analyse one spec file and write its reports next to `out`.
pub fn cmd_analyze(spec_path: &Path, cfg: &RunConfig, out: &Path) -> Result<(Analysis, ReportPaths)> {
    let spec = EigenfunctionSpec::read(spec_path).stage("parse")?;
    let analysis = analyze_spec(&spec, cfg)?;
    let stem = spec_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| spec_stem(spec.lambda(), spec.seed().unwrap_or(0)));
    let paths = write_reports(&analysis, out, &stem).stage("report")?;
    Ok((analysis, paths))
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MemberSummary {
    pub stem: String,
    pub lambda: f64,
    pub seed: u64,
    pub resolution: usize,
    pub domain_count: usize,
    pub fat_domain_inradius: f64,
    pub fat_product: f64,
    pub theorem_1_3_min_ratio: Option<f64>,
    pub corollary_1_4_min_ratio: Option<f64>,
    pub sum_power_statistic: Option<f64>,
    pub good_mass: f64,
    pub mass_bound_margin: f64,
    pub special_cube_margin: Option<f64>,
    pub eigen_identity_error: f64,
    pub mean_value_fraction: Option<f64>,
    pub asymmetry_min_fraction: Option<f64>,
    pub asymmetry_constant: Option<f64>,
    pub lower_bracket_constant: Option<f64>,
    pub profile_slope: Option<f64>,
    pub failures: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct WindowCheck {
    pub value: Option<f64>,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ScanRegression {
    pub schema_version: u32,
    pub timestamp: u64,
    pub members: usize,
    pub failed_members: usize,
    pub skipped_lambdas: Vec<f64>,
    pub fat_domain: Option<ScalingSummary>,
    pub fat_domain_error: Option<String>,
    pub sum_inequality: Option<Regression>,
    pub sum_exponent: Option<f64>,
    pub sum_inequality_error: Option<String>,
    pub theorem_1_3: Option<StabilitySummary>,
    pub corollary_1_4_min: Option<f64>,
    pub profile_exponent: Option<Regression>,
    pub asymmetry_floor: Option<f64>,
    pub lower_bracket_floor: Option<f64>,
    pub windows: Vec<(String, WindowCheck)>,
}

pub struct ScanOutcome {
    pub members: Vec<MemberSummary>,
    pub regression: ScanRegression,
    pub regression_path: PathBuf,
    pub summary_path: PathBuf,
}

impl ScanOutcome {
    /// Members that failed a pointwise assertion or errored.
    pub fn failed_members(&self) -> Vec<&MemberSummary> {
        self.members
            .iter()
            .filter(|m| !m.failures.is_empty() || m.error.is_some())
            .collect()
    }
}

fn summarize(stem: String, spec: &EigenfunctionSpec, res: usize, a: Result<Analysis>) -> MemberSummary {
    let mut m = MemberSummary {
        stem,
        lambda: spec.lambda(),
        seed: spec.seed().unwrap_or(0),
        resolution: res,
        domain_count: 0,
        fat_domain_inradius: f64::NAN,
        fat_product: f64::NAN,
        theorem_1_3_min_ratio: None,
        corollary_1_4_min_ratio: None,
        sum_power_statistic: None,
        good_mass: f64::NAN,
        mass_bound_margin: f64::NAN,
        special_cube_margin: None,
        eigen_identity_error: f64::NAN,
        mean_value_fraction: None,
        asymmetry_min_fraction: None,
        asymmetry_constant: None,
        lower_bracket_constant: None,
        profile_slope: None,
        failures: Vec::new(),
        error: None,
    };
    match a {
        Err(e) => m.error = Some(e.to_string()),
        Ok(a) => {
            let r = &a.report;
            m.domain_count = r.domain_count;
            m.fat_domain_inradius = r.fat_domain_inradius;
            m.fat_product = r.fat_domain_inradius * r.lambda.sqrt();
            m.theorem_1_3_min_ratio = r.theorem_1_3_min_ratio;
            m.corollary_1_4_min_ratio = r.corollary_1_4_min_ratio;
            m.sum_power_statistic = r.sum_power_statistic;
            m.good_mass = r.covering.good_mass;
            m.mass_bound_margin = r.covering.mass_bound_margin;
            m.special_cube_margin = r.checks.special_cube.margin;
            m.eigen_identity_error = r.eigen_identity.iter().map(|e| e.relative_error).fold(0.0, f64::max);
            m.mean_value_fraction = r.mean_value.as_ref().map(|v| v.fraction_within);
            if let Some(s) = &a.special_cube {
                m.asymmetry_min_fraction = Some(s.positive_fraction.min(s.negative_fraction));
                m.asymmetry_constant = Some(s.asymmetry_constant);
                m.lower_bracket_constant = Some(s.lower_bracket_constant);
            }
            m.profile_slope = r.profile.as_ref().and_then(|p| p.slope);
            m.failures = r.checks.failures().into_iter().map(String::from).collect();
        }
    }
    m
}

/// Analyse every ensemble member with at most `jobs` concurrent analyses,
/// then fit the ensemble regressions.
pub fn cmd_scan(cfg: &RunConfig, out: &Path, jobs: usize) -> Result<ScanOutcome> {
    ensure_dir(out)?;
    let (specs, skipped) = ensemble(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let spec_dir = out.join("specs");
    ensure_dir(&spec_dir)?;
    let members: Vec<(MemberSummary, Option<ProfileSummary>)> = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                let stem = spec_stem(spec.lambda(), spec.seed().unwrap_or(0));
                let res = resolution_of(cfg, spec.manifold(), spec.lambda());
                let result = spec
                    .write(&spec_dir.join(format!("{stem}.json")))
                    .stage("gen")
                    .and_then(|_| analyze_spec(spec, cfg))
                    .and_then(|a| write_reports(&a, out, &stem).stage("report").map(|_| a));
                let profile = result.as_ref().ok().and_then(|a| a.report.profile.clone());
                (summarize(stem, spec, res, result), profile)
            })
            .collect()
    });
    let (members, profiles): (Vec<MemberSummary>, Vec<Option<ProfileSummary>>) = members.into_iter().unzip();
    let regression = regress(cfg, &members, &profiles, skipped);
    let regression_path = out.join("scan_regression.json");
    write(&regression_path, &to_json(&regression))?;
    let summary_path = out.join("scan_summary.csv");
    write_scan_csv(&members, &summary_path)?;
    Ok(ScanOutcome {
        members,
        regression,
        regression_path,
        summary_path,
    })
}

fn regress(
    cfg: &RunConfig,
    members: &[MemberSummary],
    profiles: &[Option<ProfileSummary>],
    skipped: Vec<f64>,
) -> ScanRegression {
    let ok: Vec<&MemberSummary> = members.iter().filter(|m| m.error.is_none()).collect();
    let acc = &cfg.acceptance;
    let n = cfg.manifold.side_lengths.len();
    let mut windows: Vec<(String, WindowCheck)> = Vec::new();
    let mut window = |name: &str, value: Option<f64>, pass: bool, detail: String| {
        windows.push((name.to_string(), WindowCheck { value, pass, detail }));
    };

    let fat_pts: Vec<FatDomainPoint> = ok
        .iter()
        .filter(|m| m.fat_domain_inradius.is_finite() && m.fat_domain_inradius > 0.0)
        .map(|m| FatDomainPoint {
            lambda: m.lambda,
            inradius: m.fat_domain_inradius,
        })
        .collect();
    let (fat_domain, fat_domain_error) = match bounds::verify_fat_domain_scaling(&fat_pts) {
        Ok(s) => {
            let slope = s.fit.slope;
            window(
                "fat_domain_slope",
                Some(slope),
                (acc.fat_slope_min..=acc.fat_slope_max).contains(&slope),
                format!("slope in [{}, {}]", acc.fat_slope_min, acc.fat_slope_max),
            );
            window(
                "fat_domain_band",
                Some(s.c2_over_c1),
                s.c1 >= acc.fat_product_min && s.c2 <= acc.fat_product_max,
                format!(
                    "inrad*·√λ in [{}, {}] (observed [{:.4}, {:.4}])",
                    acc.fat_product_min, acc.fat_product_max, s.c1, s.c2
                ),
            );
            (Some(s), None)
        }
        Err(e) => (None, Some(e.to_string())),
    };

    let sum_pts: Vec<(f64, f64)> = ok
        .iter()
        .filter_map(|m| m.sum_power_statistic.filter(|s| *s > 0.0).map(|s| (m.lambda, s)))
        .collect();
    let (sum_inequality, sum_exponent, sum_inequality_error) = match bounds::fit_sum_statistic(&sum_pts, n) {
        Ok((r, e)) => {
            let floor = e - acc.sum_slope_slack;
            window(
                "sum_inequality_slope",
                Some(r.slope),
                r.slope >= floor,
                format!("slope ≥ {floor}"),
            );
            (Some(r), Some(e), None)
        }
        Err(e) => (None, bounds::sum_exponent(n).ok(), Some(e.to_string())),
    };

    let thm_pts: Vec<(f64, f64)> = ok
        .iter()
        .filter_map(|m| m.theorem_1_3_min_ratio.map(|r| (m.lambda, r)))
        .collect();
    let theorem_1_3 = if bounds::lambda_span(thm_pts.iter().map(|p| p.0)).0 >= 3 {
        bounds::stability(&thm_pts).ok()
    } else {
        None
    };
    if let Some(s) = &theorem_1_3 {
        window(
            "theorem_1_3_spread",
            Some(s.max_over_min),
            s.max_over_min < acc.theorem_spread,
            format!("max/min < {}", acc.theorem_spread),
        );
        let trend_ok = s.kendall.p_value > acc.trend_p_value || s.log_slope.slope.abs() <= acc.trend_slope;
        window(
            "theorem_1_3_trend",
            Some(s.kendall.p_value),
            trend_ok,
            format!(
                "Kendall p > {} or |log slope| ≤ {} (slope {:.4})",
                acc.trend_p_value, acc.trend_slope, s.log_slope.slope
            ),
        );
    }

    let groups: Vec<Vec<(f64, f64)>> = profiles.iter().flatten().map(|p| p.fit_points()).collect();
    let profile_exponent = if n > 2 { bounds::pooled_slope(&groups).ok() } else { None };
    if let Some(r) = &profile_exponent {
        let target = 2.0 * n as f64 / (n as f64 - 2.0) - acc.profile_slope_slack;
        window("profile_exponent", Some(r.slope), r.slope >= target, format!("slope ≥ {target}"));
    }

    let min_opt = |it: &mut dyn Iterator<Item = f64>| it.fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))));
    ScanRegression {
        schema_version: SCHEMA_VERSION,
        timestamp: unix_timestamp(),
        members: members.len(),
        failed_members: members
            .iter()
            .filter(|m| !m.failures.is_empty() || m.error.is_some())
            .count(),
        skipped_lambdas: skipped,
        fat_domain,
        fat_domain_error,
        sum_inequality,
        sum_exponent,
        sum_inequality_error,
        theorem_1_3,
        corollary_1_4_min: min_opt(&mut ok.iter().filter_map(|m| m.corollary_1_4_min_ratio)),
        profile_exponent,
        asymmetry_floor: min_opt(&mut ok.iter().filter_map(|m| m.asymmetry_constant)),
        lower_bracket_floor: min_opt(&mut ok.iter().filter_map(|m| m.lower_bracket_constant)),
        windows,
    }
}

fn write_scan_csv(members: &[MemberSummary], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| nodal::csv_error(path, e))?;
    w.write_record([
        "stem",
        "lambda",
        "seed",
        "resolution",
        "domain_count",
        "fat_domain_inradius",
        "fat_product",
        "theorem_1_3_min_ratio",
        "corollary_1_4_min_ratio",
        "sum_power_statistic",
        "good_mass",
        "mass_bound_margin",
        "special_cube_margin",
        "eigen_identity_error",
        "mean_value_fraction",
        "asymmetry_min_fraction",
        "profile_slope",
        "failures",
        "error",
    ])
    .map_err(|e| nodal::csv_error(path, e))?;
    for m in members {
        w.write_record([
            m.stem.clone(),
            fmt_f64(m.lambda),
            m.seed.to_string(),
            m.resolution.to_string(),
            m.domain_count.to_string(),
            fmt_f64(m.fat_domain_inradius),
            fmt_f64(m.fat_product),
            opt(m.theorem_1_3_min_ratio),
            opt(m.corollary_1_4_min_ratio),
            opt(m.sum_power_statistic),
            fmt_f64(m.good_mass),
            fmt_f64(m.mass_bound_margin),
            opt(m.special_cube_margin),
            fmt_f64(m.eigen_identity_error),
            opt(m.mean_value_fraction),
            opt(m.asymmetry_min_fraction),
            opt(m.profile_slope),
            m.failures.join(";"),
            m.error.clone().unwrap_or_default(),
        ])
        .map_err(|e| nodal::csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Members that failed a pointwise assertion or errored; any of these makes
/// the scan fail.
pub fn scan_failures(outcome: &ScanOutcome) -> Vec<String> {
    outcome
        .failed_members()
        .iter()
        .map(|m| match &m.error {
            Some(e) => format!("{}: {e}", m.stem),
            None => format!("{}: {}", m.stem, m.failures.join(", ")),
        })
        .collect()
}

/// Ensemble regressions that fell outside their acceptance window.
pub fn window_failures(outcome: &ScanOutcome) -> Vec<String> {
    outcome
        .regression
        .windows
        .iter()
        .filter(|(_, w)| !w.pass)
        .map(|(name, w)| format!("{name}: {} ({})", w.value.map(fmt_f64).unwrap_or_default(), w.detail))
        .collect()
}
