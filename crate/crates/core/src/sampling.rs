//! Cell-centred samplings of eigenfunctions with midpoint quadrature.
//!
//! Gradient energies use two-point differences across cell faces. Where a
//! face leaves the integration mask the function is extended by zero; the
//! crossing point is placed on the segment between the two cell centres by
//! linear interpolation of the sampled values when the outside neighbour has
//! the opposite sign, at the neighbour centre otherwise, and on the wall
//! (half a cell out) at a Dirichlet boundary.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{compensated_sum, Grid, MAX_DIM};
use crate::spectral::{EigenfunctionSpec, ManifoldKind, ManifoldSpec};

pub const MIN_RESOLUTION: usize = 8;
/// Cells per wavelength below which `sample` refuses a grid.
pub const NYQUIST_CELLS_PER_WAVELENGTH: f64 = 6.0;

#[derive(Debug, Clone)]
pub struct SampledField {
    manifold: ManifoldSpec,
    spec: Option<EigenfunctionSpec>,
    lambda: f64,
    grid: Grid,
    values: Vec<f64>,
    normalization_factor: f64,
}

/// Smallest per-axis cell count giving at least `cells_per_wavelength` cells
/// per wavelength `2π/√λ` on every axis.
pub fn resolution_for(manifold: &ManifoldSpec, lambda: f64, cells_per_wavelength: f64) -> usize {
    let lmax = manifold.side_lengths.iter().cloned().fold(0.0, f64::max);
    let cells = cells_per_wavelength * lambda.max(0.0).sqrt() * lmax / (2.0 * PI);
    ((cells * (1.0 - 1e-12)).ceil() as usize).max(MIN_RESOLUTION)
}

/// Minimum resolution accepted by [`sample`].
pub fn nyquist_minimum(manifold: &ManifoldSpec, lambda: f64) -> usize {
    resolution_for(manifold, lambda, NYQUIST_CELLS_PER_WAVELENGTH)
}

/// Sample `spec` at the centres of a `resolution`ⁿ grid and normalise to unit
/// discrete L² norm.
pub fn sample(spec: &EigenfunctionSpec, resolution: usize) -> Result<SampledField> {
    let min = nyquist_minimum(spec.manifold(), spec.lambda());
    if resolution < min {
        return Err(Error::UnderResolved {
            minimum: min,
            got: resolution,
        });
    }
    let m = spec.manifold();
    let shape = vec![resolution; m.dimension()];
    let spacing: Vec<f64> = m.side_lengths.iter().map(|l| l / resolution as f64).collect();
    let grid = Grid::new(&shape, &spacing, m.is_periodic())?;
    let values = evaluate_on_grid(spec, &grid);
    SampledField::assemble(m.clone(), Some(spec.clone()), spec.lambda(), grid, values)
}

fn evaluate_on_grid(spec: &EigenfunctionSpec, grid: &Grid) -> Vec<f64> {
    let shape = grid.shape3();
    let spacing = grid.spacing3();
    let sides = &spec.manifold().side_lengths;
    let torus = spec.manifold().kind == ManifoldKind::Torus;
    // Per mode, per axis: (cos, sin) of the axis phase (torus) or the sine
    // factor (box) at every cell centre.
    let tables: Vec<[Vec<(f64, f64)>; MAX_DIM]> = spec
        .modes()
        .iter()
        .map(|mode| {
            std::array::from_fn(|a| {
                (0..shape[a])
                    .map(|i| {
                        if a >= grid.ndim() {
                            return (1.0, 0.0);
                        }
                        let x = (i as f64 + 0.5) * spacing[a];
                        let k = mode.k[a] as f64;
                        if torus {
                            let (s, c) = (2.0 * PI * k * x / sides[a]).sin_cos();
                            (c, s)
                        } else {
                            ((PI * k * x / sides[a]).sin(), 0.0)
                        }
                    })
                    .collect()
            })
        })
        .collect();
    let plane = shape[1] * shape[2];
    let mut values = vec![0.0; grid.len()];
    values.par_chunks_mut(plane).enumerate().for_each(|(i, slab)| {
        for j in 0..shape[1] {
            for k in 0..shape[2] {
                let mut v = 0.0;
                for (mode, t) in spec.modes().iter().zip(&tables) {
                    if torus {
                        let (c0, s0) = t[0][i];
                        let (c1, s1) = t[1][j];
                        let (c2, s2) = t[2][k];
                        let (c01, s01) = (c0 * c1 - s0 * s1, s0 * c1 + c0 * s1);
                        let (c, s) = (c01 * c2 - s01 * s2, s01 * c2 + c01 * s2);
                        v += mode.cos * c + mode.sin * s;
                    } else {
                        v += mode.cos * t[0][i].0 * t[1][j].0 * t[2][k].0;
                    }
                }
                slab[j * shape[2] + k] = v;
            }
        }
    });
    values
}

impl SampledField {
    fn assemble(
        manifold: ManifoldSpec,
        spec: Option<EigenfunctionSpec>,
        lambda: f64,
        grid: Grid,
        mut values: Vec<f64>,
    ) -> Result<Self> {
        let vol = grid.cell_volume();
        let norm2 = compensated_sum(values.iter().map(|v| v * v * vol));
        if !(norm2 > 0.0) || !norm2.is_finite() {
            return Err(Error::ZeroField);
        }
        let factor = 1.0 / norm2.sqrt();
        values.iter_mut().for_each(|v| *v *= factor);
        Ok(SampledField {
            manifold,
            spec,
            lambda,
            grid,
            values,
            normalization_factor: factor,
        })
    }

    /// Normalised field from explicit cell values (test fixtures and fields
    /// that are not exact eigenfunctions). `lambda` is carried as metadata.
    pub fn from_values(manifold: &ManifoldSpec, shape: &[usize], values: Vec<f64>, lambda: f64) -> Result<Self> {
        manifold.validate()?;
        if shape.len() != manifold.dimension() {
            return Err(Error::Shape(format!(
                "{} axes for a {}-dimensional manifold",
                shape.len(),
                manifold.dimension()
            )));
        }
        let spacing: Vec<f64> = manifold
            .side_lengths
            .iter()
            .zip(shape)
            .map(|(l, &n)| l / n as f64)
            .collect();
        let grid = Grid::new(shape, &spacing, manifold.is_periodic())?;
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} values for {} cells",
                values.len(),
                grid.len()
            )));
        }
        Self::assemble(manifold.clone(), None, lambda, grid, values)
    }

    /// Normalised field from a function of the cell-centre coordinates.
    pub fn from_fn(manifold: &ManifoldSpec, shape: &[usize], lambda: f64, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let spacing: Vec<f64> = manifold
            .side_lengths
            .iter()
            .zip(shape)
            .map(|(l, &n)| l / n as f64)
            .collect();
        let grid = Grid::new(shape, &spacing, manifold.is_periodic())?;
        let values = (0..grid.len()).map(|i| f(&grid.center(i))).collect();
        Self::from_values(manifold, shape, values, lambda)
    }

    pub fn manifold(&self) -> &ManifoldSpec {
        &self.manifold
    }

    pub fn spec(&self) -> Option<&EigenfunctionSpec> {
        self.spec.as_ref()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn normalization_factor(&self) -> f64 {
        self.normalization_factor
    }

    pub fn ndim(&self) -> usize {
        self.grid.ndim()
    }

    pub fn resolution(&self) -> &[usize] {
        self.grid.shape()
    }

    pub fn spacing(&self) -> &[f64] {
        self.grid.spacing()
    }

    pub fn cell_volume(&self) -> f64 {
        self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Normalised analytic value at an arbitrary point.
    pub fn evaluate(&self, point: &[f64]) -> Result<f64> {
        let spec = self.spec.as_ref().ok_or(Error::NoAnalyticSpec)?;
        Ok(spec.evaluate(point)? * self.normalization_factor)
    }

    /// Gradient energy of each masked cell for the zero extension of the
    /// field restricted to `in_mask`. Cells outside the mask carry zero.
    pub fn energy_density(&self, in_mask: impl Fn(usize) -> bool + Sync) -> Vec<f64> {
        let grid = &self.grid;
        let vol = grid.cell_volume();
        let spacing = grid.spacing3();
        let ndim = grid.ndim();
        let v = &self.values;
        (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                if !in_mask(idx) {
                    return 0.0;
                }
                let c = grid.coords(idx);
                let psi = v[idx];
                let mut e = 0.0;
                for a in 0..ndim {
                    let w = vol / (spacing[a] * spacing[a]);
                    for dir in [-1i64, 1] {
                        match grid.neighbor(c, a, dir) {
                            Some(nc) => {
                                let j = grid.index(nc);
                                if in_mask(j) {
                                    let d = v[j] - psi;
                                    e += 0.5 * d * d * w;
                                } else if psi != 0.0 {
                                    let theta = if psi * v[j] < 0.0 { psi / (psi - v[j]) } else { 1.0 };
                                    e += psi * psi * w / theta;
                                }
                            }
                            // Dirichlet wall half a cell out
                            None => e += 2.0 * psi * psi * w,
                        }
                    }
                }
                e
            })
            .collect()
    }

    /// Σ of |∇ψ|² over the manifold for ψ the zero extension of the field
    /// restricted to `mask`.
    pub fn discrete_gradient_energy(&self, mask: &[bool]) -> f64 {
        assert_eq!(mask.len(), self.values.len(), "mask shape");
        compensated_sum(self.energy_density(|i| mask[i]))
    }

    pub fn l2_mass(&self, mask: &[bool]) -> f64 {
        assert_eq!(mask.len(), self.values.len(), "mask shape");
        let vol = self.cell_volume();
        compensated_sum(
            self.values
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|(v, _)| v * v * vol),
        )
    }

    pub fn full_mask(&self) -> Vec<bool> {
        vec![true; self.values.len()]
    }

    /// Flat little-endian f64 dump (axis-major) plus a `.hdr` text sidecar.
    pub fn write_raw(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        let hdr = raw_header_path(path);
        let mut f = std::fs::File::create(&hdr).map_err(|e| Error::io(&hdr, e))?;
        let join = |xs: &[String]| xs.join(" ");
        let text = format!(
            "resolution {}\nspacing {}\nlambda {}\ndtype f64le\norder axis-major\n",
            join(&self.resolution().iter().map(|n| n.to_string()).collect::<Vec<_>>()),
            join(&self.spacing().iter().map(|h| format!("{h:?}")).collect::<Vec<_>>()),
            self.lambda
        );
        f.write_all(text.as_bytes()).map_err(|e| Error::io(&hdr, e))
    }
}

pub fn raw_header_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".hdr");
    s.into()
}

/// (resolution, spacing, lambda, values) of a raw dump.
pub type RawDump = (Vec<usize>, Vec<f64>, f64, Vec<f64>);

/// Read a raw dump back.
pub fn read_raw(path: &Path) -> Result<RawDump> {
    let hdr = raw_header_path(path);
    let text = std::fs::read_to_string(&hdr).map_err(|e| Error::io(&hdr, e))?;
    let parse_err = |m: &str| Error::Parse {
        path: hdr.clone(),
        message: m.to_string(),
    };
    let mut resolution = None;
    let mut spacing = None;
    let mut lambda = None;
    for line in text.lines() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("resolution") => {
                resolution = Some(
                    it.map(|t| t.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| parse_err("key `resolution`"))?,
                )
            }
            Some("spacing") => {
                spacing = Some(
                    it.map(|t| t.parse::<f64>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| parse_err("key `spacing`"))?,
                )
            }
            Some("lambda") => {
                lambda = Some(
                    it.next()
                        .and_then(|t| t.parse::<f64>().ok())
                        .ok_or_else(|| parse_err("key `lambda`"))?,
                )
            }
            _ => {}
        }
    }
    let resolution = resolution.ok_or_else(|| parse_err("missing key `resolution`"))?;
    let spacing = spacing.ok_or_else(|| parse_err("missing key `spacing`"))?;
    let lambda = lambda.ok_or_else(|| parse_err("missing key `lambda`"))?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let count: usize = resolution.iter().product();
    if bytes.len() != count * 8 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!("{} bytes for {} cells", bytes.len(), count),
        });
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((resolution, spacing, lambda, values))
}
