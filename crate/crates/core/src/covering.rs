//! Good/bad cube coverings.
//!
//! The fundamental domain is cut into cubes of side `h`. A cube `K` is
//! γ-good when the concentric cube `δK` carries at most γ times the L² mass
//! of `K`. On the torus `δK` lives in the universal cover: a cell reached
//! twice by the unrolled cube counts twice. On the box it is clipped.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{compensated_sum, Grid, PrefixSum, Region, MAX_DIM};
use crate::nodal::{csv_error, fmt_f64, NodalDecomposition};
use crate::sampling::SampledField;

pub const SCHEMA_VERSION: u32 = 1;

/// `16√n`.
pub fn default_delta(n: usize) -> f64 {
    16.0 * (n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    pub index: [usize; MAX_DIM],
    pub region: Region,
    pub mass_inner: f64,
    pub mass_scaled: f64,
    pub good: bool,
}

impl Cube {
    /// `δK` in unrolled cell coordinates.
    pub fn scaled_region(&self, delta: f64, ndim: usize) -> Region {
        self.region.scaled(delta, ndim)
    }
}

#[derive(Debug, Clone)]
pub struct CubeCovering {
    grid: Grid,
    h: f64,
    cells_per_cube: [usize; MAX_DIM],
    counts: [usize; MAX_DIM],
    delta: f64,
    gamma: f64,
    cubes: Vec<Cube>,
    kappa_delta: u64,
    good_mass: f64,
    /// Cube number of every cell.
    cube_of_cell: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveringHeader {
    pub schema_version: u32,
    pub h: f64,
    pub delta: f64,
    pub gamma: f64,
    pub kappa_delta: u64,
    pub good_mass: f64,
    pub mass_bound_rhs: f64,
    pub mass_bound_margin: f64,
    pub cube_count: usize,
    pub good_count: usize,
}

fn cells_for(grid: &Grid, h: f64) -> Result<[usize; MAX_DIM]> {
    let mut m = [1usize; MAX_DIM];
    for (a, (&sp, &n)) in grid.spacing().iter().zip(grid.shape()).enumerate() {
        let r = h / sp;
        let k = r.round();
        if k < 1.0 || (r - k).abs() > 1e-9 * r.max(1.0) {
            return Err(Error::CubeMisaligned);
        }
        m[a] = (k as usize).min(n);
    }
    Ok(m)
}

/// Cube side for the inner-radius rule `h = 8·r_max`, snapped up to a
/// length that is an integer number of cells on every axis.
pub fn inradius_rule_h(grid: &Grid, max_inradius: f64) -> f64 {
    let target = 8.0 * max_inradius;
    let sp = grid.spacing();
    let longest = grid.extent().into_iter().fold(0.0, f64::max);
    if !target.is_finite() || target >= longest {
        // one cube spans every axis; pick the smallest aligned length ≥ it
        return aligned_at_least(sp, longest);
    }
    aligned_at_least(sp, target.max(sp.iter().cloned().fold(0.0, f64::max)))
}

fn aligned_at_least(sp: &[f64], target: f64) -> f64 {
    let base = sp[0];
    let mut k = (target / base * (1.0 - 1e-12)).ceil().max(1.0);
    for _ in 0..100_000 {
        let h = k * base;
        if sp.iter().all(|&s| {
            let r = h / s;
            (r - r.round()).abs() <= 1e-9 * r.max(1.0)
        }) {
            return h;
        }
        k += 1.0;
    }
    k * base
}

/// Partition into cubes of side `h` and classify each as γ-good.
pub fn build_covering(field: &SampledField, h: f64, gamma: f64, delta: f64) -> Result<CubeCovering> {
    if !(gamma > 1.0) {
        return Err(Error::CoveringParameter(format!("gamma must exceed 1, got {gamma}")));
    }
    if !(delta > 1.0) || !delta.is_finite() {
        return Err(Error::CoveringParameter(format!("delta must exceed 1, got {delta}")));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::CubeMisaligned);
    }
    let grid = field.grid().clone();
    let m = cells_for(&grid, h)?;
    let shape = grid.shape3();
    let ndim = grid.ndim();
    let counts: [usize; MAX_DIM] = std::array::from_fn(|a| shape[a].div_ceil(m[a]));

    let vol = grid.cell_volume();
    let density: Vec<f64> = field.values().iter().map(|v| v * v * vol).collect();
    let ps = PrefixSum::new(&grid, &density);

    let total = counts.iter().product::<usize>();
    let cubes: Vec<Cube> = (0..total)
        .into_par_iter()
        .map(|n| {
            let index = [n / (counts[1] * counts[2]), (n / counts[2]) % counts[1], n % counts[2]];
            let mut lo = [0i64; MAX_DIM];
            let mut hi = [1i64; MAX_DIM];
            for a in 0..MAX_DIM {
                lo[a] = (index[a] * m[a]) as i64;
                hi[a] = ((index[a] + 1) * m[a]).min(shape[a]) as i64;
            }
            let region = Region::new(lo, hi);
            let mass_inner = ps.region_sum(&region).max(0.0);
            let mass_scaled = ps.region_sum(&region.scaled(delta, ndim)).max(0.0);
            Cube {
                index,
                region,
                mass_inner,
                mass_scaled,
                good: false,
            }
        })
        .collect();

    let kappa_delta = (0..ndim)
        .map(|a| {
            let mut cover = vec![0u64; shape[a]];
            for c in 0..counts[a] {
                let lo = (c * m[a]) as i64;
                let hi = ((c + 1) * m[a]).min(shape[a]) as i64;
                let mut r = Region::new([0; MAX_DIM], [1; MAX_DIM]);
                r.lo[0] = lo;
                r.hi[0] = hi;
                let s = r.scaled(delta, 1);
                for p in crate::grid::fold_interval(s.lo[0], s.hi[0], shape[a], grid.periodic()) {
                    for x in &mut cover[p.start..p.end] {
                        *x += p.weight;
                    }
                }
            }
            cover.into_iter().max().unwrap_or(0)
        })
        .product();

    let mut cube_of_cell = vec![0u32; grid.len()];
    cube_of_cell.par_iter_mut().enumerate().for_each(|(i, slot)| {
        let c = grid.coords(i);
        let idx: [usize; MAX_DIM] = std::array::from_fn(|a| c[a] / m[a]);
        *slot = ((idx[0] * counts[1] + idx[1]) * counts[2] + idx[2]) as u32;
    });

    let mut covering = CubeCovering {
        grid,
        h,
        cells_per_cube: m,
        counts,
        delta,
        gamma,
        cubes,
        kappa_delta,
        good_mass: 0.0,
        cube_of_cell,
    };
    covering.classify(gamma);
    Ok(covering)
}

impl CubeCovering {
    fn classify(&mut self, gamma: f64) {
        self.gamma = gamma;
        for c in &mut self.cubes {
            c.good = c.mass_inner == 0.0 || c.mass_scaled <= gamma * c.mass_inner;
        }
        self.good_mass = compensated_sum(self.cubes.iter().filter(|c| c.good).map(|c| c.mass_inner));
    }

    /// Same cubes and masses, classified under a different γ.
    pub fn reclassify(&self, gamma: f64) -> Result<CubeCovering> {
        if !(gamma > 1.0) {
            return Err(Error::CoveringParameter(format!("gamma must exceed 1, got {gamma}")));
        }
        let mut c = self.clone();
        c.classify(gamma);
        Ok(c)
    }

    /// Same cubes and masses with the good flags set by hand, one per cube.
    /// The covering's γ is kept but no longer describes the flags.
    pub fn with_good_flags(&self, good: &[bool]) -> Result<CubeCovering> {
        if good.len() != self.cubes.len() {
            return Err(Error::Shape(format!("{} flags for {} cubes", good.len(), self.cubes.len())));
        }
        let mut c = self.clone();
        for (cube, &g) in c.cubes.iter_mut().zip(good) {
            cube.good = g;
        }
        c.good_mass = compensated_sum(c.cubes.iter().filter(|k| k.good).map(|k| k.mass_inner));
        Ok(c)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn cells_per_cube(&self) -> &[usize] {
        &self.cells_per_cube[..self.grid.ndim()]
    }

    /// Cubes per axis.
    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.grid.ndim()]
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn cubes(&self) -> &[Cube] {
        &self.cubes
    }

    pub fn kappa_delta(&self) -> u64 {
        self.kappa_delta
    }

    pub fn cube_of_cell(&self, cell: usize) -> usize {
        self.cube_of_cell[cell] as usize
    }

    pub fn is_good_cell(&self, cell: usize) -> bool {
        self.cubes[self.cube_of_cell[cell] as usize].good
    }

    /// Indicator of the good set Γ over cells.
    pub fn good_mask(&self) -> Vec<bool> {
        (0..self.grid.len()).map(|i| self.is_good_cell(i)).collect()
    }

    /// `∫_Γ φ²`.
    pub fn good_set_mass(&self) -> f64 {
        self.good_mass
    }

    /// `1 − κ_δ/γ`.
    pub fn mass_bound_rhs(&self) -> f64 {
        1.0 - self.kappa_delta as f64 / self.gamma
    }

    /// `∫_Γ φ² − (1 − κ_δ/γ)`; non-negative whenever the inequality holds.
    pub fn mass_bound_margin(&self) -> f64 {
        self.good_mass - self.mass_bound_rhs()
    }

    pub fn total_inner_mass(&self) -> f64 {
        compensated_sum(self.cubes.iter().map(|c| c.mass_inner))
    }

    pub fn header(&self) -> CoveringHeader {
        CoveringHeader {
            schema_version: SCHEMA_VERSION,
            h: self.h,
            delta: self.delta,
            gamma: self.gamma,
            kappa_delta: self.kappa_delta,
            good_mass: self.good_mass,
            mass_bound_rhs: self.mass_bound_rhs(),
            mass_bound_margin: self.mass_bound_margin(),
            cube_count: self.cubes.len(),
            good_count: self.cubes.iter().filter(|c| c.good).count(),
        }
    }

    /// Per-cube table: index per axis, masses, good flag.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let n = self.grid.ndim();
        let mut header: Vec<String> = ["i", "j", "k"][..n].iter().map(|s| s.to_string()).collect();
        header.extend(["mass_inner", "mass_scaled", "good"].iter().map(|s| s.to_string()));
        w.write_record(&header).map_err(|e| csv_error(path, e))?;
        for c in &self.cubes {
            let mut row: Vec<String> = c.index[..n].iter().map(|i| i.to_string()).collect();
            row.push(fmt_f64(c.mass_inner));
            row.push(fmt_f64(c.mass_scaled));
            row.push(c.good.to_string());
            w.write_record(&row).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// For every domain (label − 1), the L² mass it has in each cube it
    /// meets, as `(cube, mass)` in cube order.
    pub fn domain_cube_masses(&self, field: &SampledField, decomposition: &NodalDecomposition) -> Vec<Vec<(usize, f64)>> {
        let vol = field.cell_volume();
        let mut cells: Vec<Vec<(usize, f64)>> = vec![Vec::new(); decomposition.domains().len()];
        for (i, (&l, &v)) in decomposition.labels().iter().zip(field.values()).enumerate() {
            if l != 0 {
                cells[l as usize - 1].push((self.cube_of_cell(i), v * v * vol));
            }
        }
        cells
            .into_par_iter()
            .map(|mut c| {
                c.sort_by_key(|p| p.0);
                let mut out: Vec<(usize, f64)> = Vec::new();
                let mut run: Vec<f64> = Vec::new();
                for (k, (cube, m)) in c.iter().enumerate() {
                    run.push(*m);
                    if c.get(k + 1).is_none_or(|n| n.0 != *cube) {
                        out.push((*cube, compensated_sum(run.drain(..))));
                    }
                }
                out
            })
            .collect()
    }

    /// τ of a domain, from its per-cube masses, with cubes classified
    /// under `gamma` instead of the covering's own γ.
    pub fn tau_under(&self, cube_masses: &[(usize, f64)], l2_mass: f64, gamma: f64) -> f64 {
        if !(l2_mass > 0.0) {
            return 0.0;
        }
        let good = compensated_sum(cube_masses.iter().filter_map(|&(k, m)| {
            let c = &self.cubes[k];
            (c.mass_inner == 0.0 || c.mass_scaled <= gamma * c.mass_inner).then_some(m)
        }));
        (good / l2_mass).clamp(0.0, 1.0)
    }

    /// `(∫_{Ω∩Γ} φ², ∫_{Ω∩Ξ} φ²)` for every domain, indexed by label − 1.
    pub fn domain_split(&self, field: &SampledField, decomposition: &NodalDecomposition) -> Vec<(f64, f64)> {
        let n = decomposition.domains().len();
        let mut good: Vec<Vec<f64>> = vec![Vec::new(); n];
        let mut bad: Vec<Vec<f64>> = vec![Vec::new(); n];
        let vol = field.cell_volume();
        for (i, (&l, &v)) in decomposition.labels().iter().zip(field.values()).enumerate() {
            if l == 0 {
                continue;
            }
            let m = v * v * vol;
            if self.is_good_cell(i) {
                good[l as usize - 1].push(m);
            } else {
                bad[l as usize - 1].push(m);
            }
        }
        good.into_iter()
            .zip(bad)
            .map(|(g, b)| (compensated_sum(g), compensated_sum(b)))
            .collect()
    }
}

/// `∫_{Ω∩Γ} φ² / ∫_Ω φ²`.
pub fn tau(covering: &CubeCovering, field: &SampledField, decomposition: &NodalDecomposition, label: u32) -> Result<f64> {
    let d = decomposition.domain(label)?;
    if !(d.l2_mass > 0.0) {
        return Err(Error::DegenerateDomain(label));
    }
    let vol = field.cell_volume();
    let inside = compensated_sum(
        decomposition
            .labels()
            .iter()
            .zip(field.values())
            .enumerate()
            .filter(|(i, (&l, _))| l == label && covering.is_good_cell(*i))
            .map(|(_, (_, v))| v * v * vol),
    );
    Ok((inside / d.l2_mass).clamp(0.0, 1.0))
}

/// τ for every domain, indexed by label − 1.
pub fn tau_all(covering: &CubeCovering, field: &SampledField, decomposition: &NodalDecomposition) -> Vec<f64> {
    covering
        .domain_split(field, decomposition)
        .into_iter()
        .map(|(g, b)| if g + b > 0.0 { (g / (g + b)).clamp(0.0, 1.0) } else { 0.0 })
        .collect()
}

/// A domain whose good mass is at least three times its bad mass; among
/// several, the largest L² mass (then the lowest label).
pub fn find_star_domain(covering: &CubeCovering, field: &SampledField, decomposition: &NodalDecomposition) -> Result<u32> {
    let split = covering.domain_split(field, decomposition);
    let mut best: Option<(u32, f64)> = None;
    for (i, &(g, b)) in split.iter().enumerate() {
        if g >= 3.0 * b && g > 0.0 {
            let mass = decomposition.domains()[i].l2_mass;
            match best {
                Some((_, m)) if mass <= m * (1.0 + 1e-12) => {}
                _ => best = Some((i as u32 + 1, mass)),
            }
        }
    }
    best.map(|(l, _)| l).ok_or(Error::StarDomainMissing)
}
