//! Local Rayleigh quotients of the zero-extended restriction ψ of the field
//! to one nodal domain, special good cubes, sign asymmetry and the
//! mean-value defect on balls centred at nodal points.

use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::covering::{CubeCovering, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::grid::{compensated_sum, PrefixSum, Region, MAX_DIM};
use crate::nodal::NodalDecomposition;
use crate::sampling::SampledField;

/// Points per axis of the midpoint lattice used for ball integrals.
pub const BALL_QUADRATURE: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalRayleigh {
    #[serde(skip)]
    pub region: Region,
    pub numerator: f64,
    pub denominator: f64,
    /// `None` when the denominator vanishes.
    pub quotient: Option<f64>,
}

impl LocalRayleigh {
    fn new(region: Region, numerator: f64, denominator: f64) -> Self {
        let quotient = (denominator > 0.0).then(|| numerator / denominator);
        LocalRayleigh {
            region,
            numerator,
            denominator,
            quotient,
        }
    }
}

/// Energy and mass densities of ψ for one domain, with summed-area tables
/// for fast region integrals.
pub struct DomainDensities {
    label: u32,
    energy: PrefixSum,
    mass: PrefixSum,
    total_energy: f64,
    total_mass: f64,
}

impl DomainDensities {
    pub fn new(field: &SampledField, decomposition: &NodalDecomposition, label: u32) -> Result<Self> {
        decomposition.domain(label)?;
        let labels = decomposition.labels();
        let energy = field.energy_density(|i| labels[i] == label);
        let vol = field.cell_volume();
        let mass: Vec<f64> = field
            .values()
            .par_iter()
            .zip(labels)
            .map(|(v, &l)| if l == label { v * v * vol } else { 0.0 })
            .collect();
        let grid = field.grid();
        Ok(DomainDensities {
            label,
            total_energy: compensated_sum(energy.iter().copied()),
            total_mass: compensated_sum(mass.iter().copied()),
            energy: PrefixSum::new(grid, &energy),
            mass: PrefixSum::new(grid, &mass),
        })
    }

    pub fn label(&self) -> u32 {
        self.label
    }

    /// Rayleigh quotient of ψ over a region (wrap multiplicity on a torus).
    pub fn over(&self, region: Region) -> LocalRayleigh {
        let num = self.energy.region_sum(&region).max(0.0);
        let den = self.mass.region_sum(&region).max(0.0);
        LocalRayleigh::new(region, num, den)
    }

    /// `∫|∇ψ|² / ∫ψ²` over the whole manifold: the discrete first Dirichlet
    /// eigenvalue estimate of the domain.
    pub fn lambda_1(&self) -> f64 {
        self.total_energy / self.total_mass
    }

    pub fn total_energy(&self) -> f64 {
        self.total_energy
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }
}

pub fn local_rayleigh(
    field: &SampledField,
    decomposition: &NodalDecomposition,
    label: u32,
    region: Region,
) -> Result<LocalRayleigh> {
    Ok(DomainDensities::new(field, decomposition, label)?.over(region))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecialCube {
    pub label: u32,
    pub cube: usize,
    pub index: Vec<usize>,
    pub quotient: f64,
    /// `κ_δ/τ · λ₁(Ω)`.
    pub rhs: f64,
    pub tau: f64,
    pub lambda_1: f64,
    pub margin: f64,
}

/// Good cube meeting the domain whose scaled cube has the smallest local
/// Rayleigh quotient, provided it is at most `κ_δ/τ · λ₁(Ω)`.
pub fn find_special_cube(
    field: &SampledField,
    decomposition: &NodalDecomposition,
    label: u32,
    covering: &CubeCovering,
) -> Result<SpecialCube> {
    let dens = DomainDensities::new(field, decomposition, label)?;
    find_special_cube_with(&dens, field, decomposition, covering)
}

pub fn find_special_cube_with(
    dens: &DomainDensities,
    field: &SampledField,
    decomposition: &NodalDecomposition,
    covering: &CubeCovering,
) -> Result<SpecialCube> {
    let label = dens.label();
    let ndim = field.ndim();
    let mut meets = vec![false; covering.cubes().len()];
    for (i, &l) in decomposition.labels().iter().enumerate() {
        if l == label {
            meets[covering.cube_of_cell(i)] = true;
        }
    }
    let tau = crate::covering::tau(covering, field, decomposition, label)?;
    let lambda_1 = dens.lambda_1();
    let rhs = if tau > 0.0 {
        covering.kappa_delta() as f64 / tau * lambda_1
    } else {
        f64::INFINITY
    };
    let best = covering
        .cubes()
        .par_iter()
        .enumerate()
        .filter(|(i, c)| c.good && meets[*i])
        .filter_map(|(i, c)| {
            dens.over(c.scaled_region(covering.delta(), ndim))
                .quotient
                .map(|q| (i, q))
        })
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    match best {
        Some((cube, q)) if tau > 0.0 && q <= rhs * (1.0 + 1e-12) => Ok(SpecialCube {
            label,
            cube,
            index: covering.cubes()[cube].index[..ndim].to_vec(),
            quotient: q,
            rhs,
            tau,
            lambda_1,
            margin: rhs - q,
        }),
        _ => Err(Error::SpecialCubeMissing(label)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Asymmetry {
    pub positive_fraction: f64,
    pub negative_fraction: f64,
    pub zero_fraction: f64,
}

/// Cell-count fractions of strictly positive, strictly negative and zero
/// cells in a region (wrap multiplicity on a torus).
pub fn asymmetry(field: &SampledField, region: Region) -> Result<Asymmetry> {
    let grid = field.grid();
    let total = region.cell_count(grid);
    if total == 0 {
        return Err(Error::Shape("empty cube region".into()));
    }
    let v = field.values();
    let (mut pos, mut neg) = (0u64, 0u64);
    region.for_each_cell(grid, |i, w| {
        if v[i] > 0.0 {
            pos += w;
        } else if v[i] < 0.0 {
            neg += w;
        }
    });
    let t = total as f64;
    Ok(Asymmetry {
        positive_fraction: pos as f64 / t,
        negative_fraction: neg as f64 / t,
        zero_fraction: (total - pos - neg) as f64 / t,
    })
}

/// Ball integrals of φ: `∫φ`, `∫φ⁺`, `∫φ⁻`, `∫|φ|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallIntegrals {
    pub integral: f64,
    pub positive: f64,
    pub negative: f64,
    pub absolute: f64,
}

impl BallIntegrals {
    /// `|∫φ| / ∫|φ|`.
    pub fn defect(&self) -> f64 {
        if self.absolute > 0.0 {
            self.integral.abs() / self.absolute
        } else {
            0.0
        }
    }

    /// The same ratio from the positive and negative parts.
    pub fn defect_from_parts(&self) -> f64 {
        let a = self.positive + self.negative;
        if a > 0.0 {
            (self.positive - self.negative).abs() / a
        } else {
            0.0
        }
    }
}

/// Largest admissible ball radius for the mean-value defect.
pub fn mean_value_radius_guard(field: &SampledField) -> f64 {
    field.manifold().min_side() / 4.0
}

pub fn ball_integrals(field: &SampledField, center: &[f64], radius: f64) -> Result<BallIntegrals> {
    let n = field.ndim();
    if center.len() != n {
        return Err(Error::Shape(format!("{}-point for a {n}-manifold", center.len())));
    }
    let guard = mean_value_radius_guard(field);
    if !(radius > 0.0) || radius > guard {
        return Err(Error::InjectivityGuard { radius, guard });
    }
    let spec = field.spec().ok_or(Error::NoAnalyticSpec)?;
    let scale = field.normalization_factor();
    let q = BALL_QUADRATURE;
    let step = 2.0 * radius / q as f64;
    let offsets: Vec<f64> = (0..q).map(|i| -radius + (i as f64 + 0.5) * step).collect();
    let periodic = field.manifold().is_periodic();
    let total = q.pow(n as u32);
    let samples: Vec<f64> = (0..total)
        .into_par_iter()
        .filter_map(|t| {
            let mut p = [0.0; MAX_DIM];
            let mut r2 = 0.0;
            let mut rest = t;
            for a in (0..n).rev() {
                let o = offsets[rest % q];
                rest /= q;
                p[a] = center[a] + o;
                r2 += o * o;
            }
            if r2 >= radius * radius {
                return None;
            }
            if periodic {
                Some(spec.evaluate_reduced(&p[..n]) * scale)
            } else {
                spec.evaluate(&p[..n]).ok().map(|v| v * scale)
            }
        })
        .collect();
    let dv = step.powi(n as i32);
    Ok(BallIntegrals {
        integral: compensated_sum(samples.iter().map(|v| v * dv)),
        positive: compensated_sum(samples.iter().map(|v| v.max(0.0) * dv)),
        negative: compensated_sum(samples.iter().map(|v| (-v).max(0.0) * dv)),
        absolute: compensated_sum(samples.iter().map(|v| v.abs() * dv)),
    })
}

/// `|∫_B φ| / ∫_B |φ|` on the ball of `radius` about a nodal point.
pub fn mean_value_defect(field: &SampledField, center: &[f64], radius: f64) -> Result<f64> {
    let value = field.evaluate(center)?;
    let tolerance = 1e-6 * field.max_abs();
    if value.abs() >= tolerance {
        return Err(Error::NotNodal {
            value: value.abs(),
            tolerance,
        });
    }
    Ok(ball_integrals(field, center, radius)?.defect())
}

/// Sign-change face pairs `(cell, axis)`: the cell and its `+1` neighbour
/// along `axis` have strictly opposite signs.
pub fn sign_change_edges(field: &SampledField) -> Vec<(usize, usize)> {
    let grid = field.grid();
    let v = field.values();
    (0..grid.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let c = grid.coords(i);
            (0..grid.ndim()).filter_map(move |a| {
                let nc = grid.neighbor(c, a, 1)?;
                (v[i] * v[grid.index(nc)] < 0.0).then_some((i, a))
            })
        })
        .collect()
}

/// Point on the nodal set along a sign-change edge, by bisection of the
/// analytic eigenfunction.
pub fn nodal_point_on_edge(field: &SampledField, cell: usize, axis: usize) -> Result<Vec<f64>> {
    let spec = field.spec().ok_or(Error::NoAnalyticSpec)?;
    let grid = field.grid();
    let start = grid.center(cell);
    let h = grid.spacing()[axis];
    let sides = &field.manifold().side_lengths;
    let at = |t: f64| {
        let mut p = start.clone();
        p[axis] += t * h;
        if field.manifold().is_periodic() {
            p[axis] = p[axis].rem_euclid(sides[axis]);
        }
        p
    };
    let f = |t: f64| spec.evaluate_reduced(&at(t));
    let (mut lo, mut hi) = (0.0, 1.0);
    let f_lo = f(lo);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(at(mid));
        }
        if (fm > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(at(0.5 * (lo + hi)))
}

/// Up to `count` nodal points from a seeded choice of sign-change edges.
pub fn sample_nodal_points(field: &SampledField, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let edges = sign_change_edges(field);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = count.min(edges.len());
    let mut picks: Vec<usize> = sample_indices(&mut rng, edges.len(), k).into_vec();
    picks.sort_unstable();
    picks
        .into_iter()
        .map(|e| nodal_point_on_edge(field, edges[e].0, edges[e].1))
        .collect()
}

/// Nodal point of a region nearest its centre, if the field changes sign
/// across a face inside it.
pub fn nodal_point_in(field: &SampledField, region: Region) -> Result<Option<Vec<f64>>> {
    let grid = field.grid();
    let v = field.values();
    let n = grid.ndim();
    let mid: Vec<f64> = (0..n)
        .map(|a| 0.5 * (region.lo[a] + region.hi[a]) as f64 * grid.spacing()[a])
        .collect();
    let mut best: Option<(f64, usize, usize)> = None;
    region.for_each_cell(grid, |i, _| {
        let c = grid.coords(i);
        for a in 0..n {
            if let Some(nc) = grid.neighbor(c, a, 1) {
                if v[i] * v[grid.index(nc)] < 0.0 {
                    let p = grid.center(i);
                    let d2: f64 = (0..n)
                        .map(|b| {
                            let mut d = p[b] - mid[b];
                            if grid.periodic() {
                                let l = grid.extent()[b];
                                d -= l * (d / l).round();
                            }
                            d * d
                        })
                        .sum();
                    if best.is_none_or(|(bd, bi, ba)| (d2, i, a) < (bd, bi, ba)) {
                        best = Some((d2, i, a));
                    }
                }
            }
        }
    });
    best.map(|(_, i, a)| nodal_point_on_edge(field, i, a)).transpose()
}

/// `(λ^{(1−n)/2})^{1−2/n} / h²`: the λ- and h-dependence of the lower end
/// of the local Rayleigh bracket.
pub fn rayleigh_lower_scale(lambda: f64, n: usize, h: f64) -> f64 {
    let nf = n as f64;
    lambda.powf((1.0 - nf) / 2.0).powf(1.0 - 2.0 / nf) / (h * h)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpecialCubeReport {
    pub schema_version: u32,
    pub label: u32,
    pub cube_index: Vec<usize>,
    pub quotient: f64,
    pub special_cube_rhs: f64,
    pub special_cube_margin: f64,
    pub tau: f64,
    pub lambda_1: f64,
    pub gamma: f64,
    pub kappa_delta: u64,
    pub positive_fraction: f64,
    pub negative_fraction: f64,
    /// `min(positive, negative)·γ²`: the empirical asymmetry constant.
    pub asymmetry_constant: f64,
    /// Quotient over the lower-bracket scale: the empirical lower constant.
    pub lower_bracket_constant: f64,
    pub nodal_point: Option<Vec<f64>>,
    pub mean_value_radius: f64,
    pub mean_value_defect: Option<f64>,
}

impl SpecialCubeReport {
    pub fn build(field: &SampledField, covering: &CubeCovering, special: &SpecialCube) -> Result<Self> {
        let ndim = field.ndim();
        let scaled = covering.cubes()[special.cube].scaled_region(covering.delta(), ndim);
        let asym = asymmetry(field, scaled)?;
        let radius = (0.5 / field.lambda().sqrt()).min(mean_value_radius_guard(field));
        let (point, defect) = if field.spec().is_some() {
            let inner = covering.cubes()[special.cube].region;
            let p = match nodal_point_in(field, inner)? {
                Some(p) => Some(p),
                None => nodal_point_in(field, scaled)?,
            };
            let d = match &p {
                Some(p) => Some(mean_value_defect(field, p, radius)?),
                None => None,
            };
            (p, d)
        } else {
            (None, None)
        };
        Ok(SpecialCubeReport {
            schema_version: SCHEMA_VERSION,
            label: special.label,
            cube_index: special.index.clone(),
            quotient: special.quotient,
            special_cube_rhs: special.rhs,
            special_cube_margin: special.margin,
            tau: special.tau,
            lambda_1: special.lambda_1,
            gamma: covering.gamma(),
            kappa_delta: covering.kappa_delta(),
            positive_fraction: asym.positive_fraction,
            negative_fraction: asym.negative_fraction,
            asymmetry_constant: asym.positive_fraction.min(asym.negative_fraction) * covering.gamma().powi(2),
            lower_bracket_constant: special.quotient / rayleigh_lower_scale(field.lambda(), ndim, covering.h()),
            nodal_point: point,
            mean_value_radius: radius,
            mean_value_defect: defect,
        })
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("report serialises") + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
