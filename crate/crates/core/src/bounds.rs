//! Per-eigenfunction bound checks and ensemble scaling regressions.
//!
//! Constants in the bounds are outputs: every ratio below is the measured
//! quantity divided by the λ-, γ- and τ-dependence of its lower bound, so an
//! ensemble minimum is an empirical constant.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::covering::CubeCovering;
use crate::error::{Error, Result};
use crate::nodal::{NodalDecomposition, Sign};
use crate::sampling::SampledField;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainBounds {
    pub label: u32,
    pub sign: Sign,
    pub volume: f64,
    pub l2_mass: f64,
    pub inradius: f64,
    pub tau: f64,
    pub gamma: f64,
    pub kappa_delta: u64,
    /// `γ^{(2−n)/n} τ^{1/2} λ^{−1/2}`.
    pub theorem_1_3_rhs_over_c: f64,
    /// `inradius / theorem_1_3_rhs_over_c`; `None` when τ = 0.
    pub theorem_1_3_ratio: Option<f64>,
    /// `‖φ‖_{L²(Ω)}^{2(n−2)/n} / √λ`.
    pub corollary_1_4_rhs_over_c: f64,
    pub corollary_1_4_ratio: f64,
    /// `4κ_δ / ‖φ‖²_{L²(Ω)}`.
    pub corollary_1_4_gamma: f64,
    /// τ of the domain under `corollary_1_4_gamma`.
    pub corollary_1_4_tau: f64,
    /// τ under the tailored γ reaches `1/4 − 0.02`.
    pub corollary_1_4_tau_ok: bool,
    /// Theorem ratio under the tailored γ, converted to the corollary's
    /// normalisation; equals `corollary_1_4_ratio` up to rounding.
    pub corollary_1_4_from_theorem: Option<f64>,
}

/// Tolerance on the τ ≥ 1/4 hypothesis of the tailored-γ corollary.
pub const COROLLARY_TAU_SLACK: f64 = 0.02;

/// `inradius·√λ·γ^{(n−2)/n}·τ^{−1/2}`.
pub fn theorem_1_3_ratio(inradius: f64, lambda: f64, gamma: f64, tau: f64, n: usize) -> Option<f64> {
    let rhs = theorem_1_3_rhs_over_c(lambda, gamma, tau, n);
    (tau > 0.0).then(|| inradius / rhs)
}

pub fn theorem_1_3_rhs_over_c(lambda: f64, gamma: f64, tau: f64, n: usize) -> f64 {
    let nf = n as f64;
    gamma.powf((2.0 - nf) / nf) * tau.sqrt() / lambda.sqrt()
}

/// `inradius·√λ / l2_mass^{(n−2)/n}`.
pub fn corollary_1_4_ratio(inradius: f64, lambda: f64, l2_mass: f64, n: usize) -> f64 {
    inradius / corollary_1_4_rhs_over_c(lambda, l2_mass, n)
}

pub fn corollary_1_4_rhs_over_c(lambda: f64, l2_mass: f64, n: usize) -> f64 {
    let nf = n as f64;
    l2_mass.powf((nf - 2.0) / nf) / lambda.sqrt()
}

/// Theorem and corollary rows for every domain. `covering` fixes γ and the
/// good set for the theorem; the corollary re-classifies per domain with
/// `γ = 4κ_δ / ‖φ‖²_{L²(Ω)}`.
pub fn verify_theorem_1_3(
    field: &SampledField,
    decomposition: &NodalDecomposition,
    covering: &CubeCovering,
) -> Vec<DomainBounds> {
    let n = field.ndim();
    let lambda = field.lambda();
    let gamma = covering.gamma();
    let kappa = covering.kappa_delta();
    let per_cube = covering.domain_cube_masses(field, decomposition);
    decomposition
        .domains()
        .iter()
        .zip(&per_cube)
        .map(|(d, cubes)| {
            let tau = covering.tau_under(cubes, d.l2_mass, gamma);
            let g14 = 4.0 * kappa as f64 / d.l2_mass;
            let tau14 = covering.tau_under(cubes, d.l2_mass, g14);
            let c14 = corollary_1_4_ratio(d.inradius, lambda, d.l2_mass, n);
            let from_thm = theorem_1_3_ratio(d.inradius, lambda, g14, tau14, n)
                .map(|r| r * tau14.sqrt() / (4.0 * kappa as f64).powf((n as f64 - 2.0) / n as f64));
            DomainBounds {
                label: d.label,
                sign: d.sign,
                volume: d.volume,
                l2_mass: d.l2_mass,
                inradius: d.inradius,
                tau,
                gamma,
                kappa_delta: kappa,
                theorem_1_3_rhs_over_c: theorem_1_3_rhs_over_c(lambda, gamma, tau, n),
                theorem_1_3_ratio: theorem_1_3_ratio(d.inradius, lambda, gamma, tau, n),
                corollary_1_4_rhs_over_c: corollary_1_4_rhs_over_c(lambda, d.l2_mass, n),
                corollary_1_4_ratio: c14,
                corollary_1_4_gamma: g14,
                corollary_1_4_tau: tau14,
                corollary_1_4_tau_ok: tau14 >= 0.25 - COROLLARY_TAU_SLACK,
                corollary_1_4_from_theorem: from_thm,
            }
        })
        .collect()
}

/// Corollary ratios alone, `inradius·√λ / l2_mass^{(n−2)/n}` per domain.
pub fn verify_corollary_1_4(decomposition: &NodalDecomposition, lambda: f64) -> Vec<f64> {
    let n = decomposition.grid().ndim();
    decomposition
        .domains()
        .iter()
        .map(|d| corollary_1_4_ratio(d.inradius, lambda, d.l2_mass, n))
        .collect()
}

/// `Σ inrad^{2n/(n−2)}` over the domains.
pub fn verify_sum_inequality(decomposition: &NodalDecomposition) -> Result<f64> {
    sum_power_statistic(decomposition.domains().iter().map(|d| d.inradius), decomposition.grid().ndim())
}

pub fn sum_power_statistic(inradii: impl IntoIterator<Item = f64>, n: usize) -> Result<f64> {
    if n <= 2 {
        return Err(Error::SummationDimension);
    }
    let p = 2.0 * n as f64 / (n as f64 - 2.0);
    Ok(crate::grid::compensated_sum(inradii.into_iter().map(|r| r.powf(p))))
}

/// `−n/(2n−4)`: the λ-exponent of the summation lower bound.
pub fn sum_exponent(n: usize) -> Result<f64> {
    if n <= 2 {
        return Err(Error::SummationDimension);
    }
    Ok(-(n as f64) / (2.0 * n as f64 - 4.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Regression {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
}

/// Ordinary least squares `y = a + b x` with a 95% t-interval on `b`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<Regression> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::TooFewPoints { needed: 2, got: n.min(y.len()) });
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::TooFewPoints { needed: 2, got: 1 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let residual = (sse / n as f64).sqrt();
    let (ci_low, ci_high) = if n > 2 {
        let se = (sse / (n - 2) as f64 / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, (n - 2) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        (slope - t * se, slope + t * se)
    } else {
        (slope, slope)
    };
    Ok(Regression {
        slope,
        intercept,
        residual,
        ci_low,
        ci_high,
        points: n,
    })
}

/// Common slope of several groups with a free intercept per group.
pub fn pooled_slope(groups: &[Vec<(f64, f64)>]) -> Result<Regression> {
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut pts = 0;
    let mut centred = Vec::new();
    for g in groups.iter().filter(|g| g.len() >= 2) {
        let mx = g.iter().map(|p| p.0).sum::<f64>() / g.len() as f64;
        let my = g.iter().map(|p| p.1).sum::<f64>() / g.len() as f64;
        for &(x, y) in g {
            sxx += (x - mx).powi(2);
            sxy += (x - mx) * (y - my);
            centred.push((x - mx, y - my));
        }
        pts += g.len();
    }
    if !(sxx > 0.0) {
        return Err(Error::TooFewPoints { needed: 2, got: pts });
    }
    let slope = sxy / sxx;
    let sse: f64 = centred.iter().map(|(x, y)| (y - slope * x).powi(2)).sum();
    let groups_used = groups.iter().filter(|g| g.len() >= 2).count();
    let dof = pts.saturating_sub(groups_used + 1);
    let (ci_low, ci_high) = if dof > 0 {
        let se = (sse / dof as f64 / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, dof as f64).expect("dof").inverse_cdf(0.975);
        (slope - t * se, slope + t * se)
    } else {
        (slope, slope)
    };
    Ok(Regression {
        slope,
        intercept: 0.0,
        residual: (sse / pts as f64).sqrt(),
        ci_low,
        ci_high,
        points: pts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KendallTest {
    pub tau_b: f64,
    /// Two-sided p-value, normal approximation with tie correction.
    pub p_value: f64,
}

pub fn kendall(x: &[f64], y: &[f64]) -> Result<KendallTest> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return Err(Error::TooFewPoints { needed: 3, got: n.min(y.len()) });
    }
    let (mut s, mut tx, mut ty) = (0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = (x[j] - x[i]).partial_cmp(&0.0).unwrap_or(std::cmp::Ordering::Equal) as i64;
            let dy = (y[j] - y[i]).partial_cmp(&0.0).unwrap_or(std::cmp::Ordering::Equal) as i64;
            s += dx * dy;
            tx += (dx == 0) as i64;
            ty += (dy == 0) as i64;
        }
    }
    let n0 = (n * (n - 1) / 2) as f64;
    let denom = ((n0 - tx as f64) * (n0 - ty as f64)).sqrt();
    let tau_b = if denom > 0.0 { s as f64 / denom } else { 0.0 };
    let ties = |v: &[f64]| -> (f64, f64) {
        let mut sorted = v.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (mut a, mut b) = (0.0, 0.0);
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            while j < sorted.len() && sorted[j] == sorted[i] {
                j += 1;
            }
            let t = (j - i) as f64;
            a += t * (t - 1.0) * (2.0 * t + 5.0);
            b += t * (t - 1.0);
            i = j;
        }
        (a, b)
    };
    let nf = n as f64;
    let (ax, _) = ties(x);
    let (ay, _) = ties(y);
    let var = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - ax - ay) / 18.0;
    let p_value = if var > 0.0 {
        let z = s as f64 / var.sqrt();
        2.0 * (1.0 - Normal::standard().cdf(z.abs()))
    } else {
        1.0
    };
    Ok(KendallTest {
        tau_b,
        p_value: p_value.clamp(0.0, 1.0),
    })
}

/// One ensemble member's contribution to the fat-domain fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FatDomainPoint {
    pub lambda: f64,
    pub inradius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingSummary {
    pub fit: Regression,
    pub distinct_lambdas: usize,
    pub decades: f64,
    /// `min inrad*·√λ` over members.
    pub c1: f64,
    /// `max inrad*·√λ` over members.
    pub c2: f64,
    pub c2_over_c1: f64,
}

/// Distinct λ values (relative tolerance 1e−9) and their span in decades.
pub fn lambda_span(lambdas: impl IntoIterator<Item = f64>) -> (usize, f64) {
    let mut v: Vec<f64> = lambdas.into_iter().filter(|l| *l > 0.0).collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs());
    let span = match (v.first(), v.last()) {
        (Some(lo), Some(hi)) => (hi / lo).log10(),
        _ => 0.0,
    };
    (v.len(), span)
}

pub const MIN_DISTINCT_LAMBDAS: usize = 8;

fn require_span(lambdas: impl IntoIterator<Item = f64>) -> Result<(usize, f64)> {
    let (count, span) = lambda_span(lambdas);
    if count < MIN_DISTINCT_LAMBDAS || span < 1.0 - 1e-12 {
        return Err(Error::InsufficientSpan { span, count });
    }
    Ok((count, span))
}

/// Least-squares slope of `log inrad*` against `log λ` over all members.
pub fn verify_fat_domain_scaling(points: &[FatDomainPoint]) -> Result<ScalingSummary> {
    let (count, span) = require_span(points.iter().map(|p| p.lambda))?;
    let x: Vec<f64> = points.iter().map(|p| p.lambda.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.inradius.ln()).collect();
    let fit = linear_fit(&x, &y)?;
    let products: Vec<f64> = points.iter().map(|p| p.inradius * p.lambda.sqrt()).collect();
    let c1 = products.iter().cloned().fold(f64::INFINITY, f64::min);
    let c2 = products.iter().cloned().fold(0.0, f64::max);
    Ok(ScalingSummary {
        fit,
        distinct_lambdas: count,
        decades: span,
        c1,
        c2,
        c2_over_c1: c2 / c1,
    })
}

/// Slope of `log Σ inrad^{2n/(n−2)}` against `log λ`.
pub fn fit_sum_statistic(points: &[(f64, f64)], n: usize) -> Result<(Regression, f64)> {
    let exponent = sum_exponent(n)?;
    require_span(points.iter().map(|p| p.0))?;
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    Ok((linear_fit(&x, &y)?, exponent))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilitySummary {
    /// `(λ, min ratio over members at λ)`.
    pub per_lambda: Vec<(f64, f64)>,
    pub min: f64,
    pub max: f64,
    pub max_over_min: f64,
    pub kendall: KendallTest,
    pub log_slope: Regression,
}

/// Spread and trend of a per-λ minimum across the scan.
pub fn stability(points: &[(f64, f64)]) -> Result<StabilitySummary> {
    let mut per: Vec<(f64, f64)> = Vec::new();
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (l, r) in sorted {
        match per.last_mut() {
            Some(last) if (last.0 - l).abs() <= 1e-9 * l.abs() => last.1 = last.1.min(r),
            _ => per.push((l, r)),
        }
    }
    let min = per.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let max = per.iter().map(|p| p.1).fold(0.0, f64::max);
    let xs: Vec<f64> = per.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = per.iter().map(|p| p.1).collect();
    let kendall = kendall(&xs, &ys)?;
    let log_slope = linear_fit(
        &xs.iter().map(|v| v.ln()).collect::<Vec<_>>(),
        &ys.iter().map(|v| v.ln()).collect::<Vec<_>>(),
    )?;
    Ok(StabilitySummary {
        per_lambda: per,
        min,
        max,
        max_over_min: max / min,
        kendall,
        log_slope,
    })
}
