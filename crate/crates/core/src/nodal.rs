//! Nodal domains: sign components of a sampled field, with per-domain
//! volume, L² mass, inner radius and maximum point.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::edt::{self, Outside};
use crate::error::{Error, Result};
use crate::grid::{compensated_sum, Grid, MAX_DIM};
use crate::sampling::SampledField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
}

impl Sign {
    pub fn of(v: f64) -> Option<Sign> {
        if v > 0.0 {
            Some(Sign::Positive)
        } else if v < 0.0 {
            Some(Sign::Negative)
        } else {
            None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Positive => "+",
            Sign::Negative => "-",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodalDomain {
    pub label: u32,
    pub sign: Sign,
    pub cell_count: usize,
    pub volume: f64,
    pub l2_mass: f64,
    /// Distance from `inradius_center` to the nearest cell centre outside the
    /// domain; `+∞` when the domain is the whole grid.
    pub inradius: f64,
    pub inradius_center: usize,
    pub max_point: usize,
    /// Signed value at `max_point`.
    pub max_value: f64,
}

#[derive(Debug, Clone)]
pub struct NodalDecomposition {
    grid: Grid,
    labels: Vec<u32>,
    domains: Vec<NodalDomain>,
    zero_cell_count: usize,
    /// Distance (not squared) from every signed cell to the nearest cell of
    /// another domain.
    distance: Vec<f64>,
}

/// Label the strict-sign face-connected components of `field`.
pub fn decompose(field: &SampledField) -> Result<NodalDecomposition> {
    let grid = field.grid().clone();
    let v = field.values();
    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroField);
    }
    let (raw, count) = flood_fill(&grid, v);

    // Nearest different-sign cell gives the distance to the domain's
    // complement: along a segment leaving a domain the first non-member cell
    // is always a zero or opposite-sign cell.
    let outside = if grid.periodic() { Outside::Open } else { Outside::Feature };
    let d_pos = edt::squared_distance(&grid, outside, |i| !(v[i] > 0.0));
    let d_neg = edt::squared_distance(&grid, outside, |i| !(v[i] < 0.0));
    let distance: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            if v[i] > 0.0 {
                d_pos[i].sqrt()
            } else if v[i] < 0.0 {
                d_neg[i].sqrt()
            } else {
                0.0
            }
        })
        .collect();

    let vol = grid.cell_volume();
    #[derive(Clone)]
    struct Acc {
        cells: usize,
        mass: Vec<f64>,
        best_r: (f64, usize),
        best_v: (f64, usize),
        sign: Sign,
    }
    let mut acc: Vec<Option<Acc>> = vec![None; count];
    for (i, &l) in raw.iter().enumerate() {
        if l == 0 {
            continue;
        }
        let a = acc[l as usize - 1].get_or_insert_with(|| Acc {
            cells: 0,
            mass: Vec::new(),
            best_r: (f64::NEG_INFINITY, i),
            best_v: (f64::NEG_INFINITY, i),
            sign: Sign::of(v[i]).expect("labelled cells are signed"),
        });
        a.cells += 1;
        a.mass.push(v[i] * v[i] * vol);
        if distance[i] > a.best_r.0 {
            a.best_r = (distance[i], i);
        }
        if v[i].abs() > a.best_v.0 {
            a.best_v = (v[i].abs(), i);
        }
    }
    let mut domains: Vec<NodalDomain> = acc
        .into_iter()
        .map(|a| {
            let a = a.expect("every label has cells");
            NodalDomain {
                label: 0,
                sign: a.sign,
                cell_count: a.cells,
                volume: a.cells as f64 * vol,
                l2_mass: compensated_sum(a.mass),
                inradius: a.best_r.0,
                inradius_center: a.best_r.1,
                max_point: a.best_v.1,
                max_value: v[a.best_v.1],
            }
        })
        .collect();
    // Old labels follow first-cell order, so the stable sort breaks volume
    // ties by lowest first cell.
    let mut order: Vec<usize> = (0..domains.len()).collect();
    order.sort_by(|&a, &b| domains[b].cell_count.cmp(&domains[a].cell_count));
    let mut relabel = vec![0u32; count + 1];
    for (new, &old) in order.iter().enumerate() {
        relabel[old + 1] = new as u32 + 1;
    }
    let labels: Vec<u32> = raw.par_iter().map(|&l| relabel[l as usize]).collect();
    let mut sorted: Vec<NodalDomain> = order.iter().map(|&o| domains[o].clone()).collect();
    for (i, d) in sorted.iter_mut().enumerate() {
        d.label = i as u32 + 1;
    }
    domains = sorted;
    let zero_cell_count = v.iter().filter(|&&x| x == 0.0).count();
    Ok(NodalDecomposition {
        grid,
        labels,
        domains,
        zero_cell_count,
        distance,
    })
}

/// Breadth-first labelling in linear-index order of first cells.
fn flood_fill(grid: &Grid, v: &[f64]) -> (Vec<u32>, usize) {
    let mut labels = vec![0u32; grid.len()];
    let mut next = 0u32;
    let mut queue = Vec::new();
    for seed in 0..grid.len() {
        if labels[seed] != 0 || v[seed] == 0.0 {
            continue;
        }
        next += 1;
        let positive = v[seed] > 0.0;
        labels[seed] = next;
        queue.clear();
        queue.push(seed);
        while let Some(i) = queue.pop() {
            let c = grid.coords(i);
            for a in 0..grid.ndim() {
                for dir in [-1, 1] {
                    if let Some(nc) = grid.neighbor(c, a, dir) {
                        let j = grid.index(nc);
                        if labels[j] == 0 && v[j] != 0.0 && (v[j] > 0.0) == positive {
                            labels[j] = next;
                            queue.push(j);
                        }
                    }
                }
            }
        }
    }
    (labels, next as usize)
}

impl NodalDecomposition {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Per-cell labels, `0` for exact zeros.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Domains by descending volume; `domains()[i].label == i + 1`.
    pub fn domains(&self) -> &[NodalDomain] {
        &self.domains
    }

    pub fn zero_cell_count(&self) -> usize {
        self.zero_cell_count
    }

    pub fn domain(&self, label: u32) -> Result<&NodalDomain> {
        if label == 0 {
            return Err(Error::UnknownDomain(label));
        }
        self.domains
            .get(label as usize - 1)
            .ok_or(Error::UnknownDomain(label))
    }

    pub fn mask(&self, label: u32) -> Vec<bool> {
        self.labels.iter().map(|&l| l == label).collect()
    }

    /// Distance from each cell to the complement of its own domain.
    pub fn distance_field(&self) -> &[f64] {
        &self.distance
    }

    /// Half the cell diagonal: the geometric uncertainty of a radius measured
    /// between cell centres.
    pub fn inradius_error(&self) -> f64 {
        0.5 * self.grid.spacing().iter().map(|h| h * h).sum::<f64>().sqrt()
    }

    /// Largest domain inradius.
    pub fn max_inradius(&self) -> f64 {
        self.domains.iter().map(|d| d.inradius).fold(0.0, f64::max)
    }

    /// Write the domain table as CSV.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let n = self.grid.ndim();
        let axes = ["x", "y", "z"];
        let mut header: Vec<String> = ["label", "sign", "volume", "l2_mass", "inradius", "inradius_error"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(axes[..n].iter().map(|a| format!("center_{a}")));
        header.extend(axes[..n].iter().map(|a| format!("max_{a}")));
        header.push("max_value".into());
        w.write_record(&header).map_err(|e| csv_error(path, e))?;
        let err = self.inradius_error();
        for d in &self.domains {
            let mut row = vec![
                d.label.to_string(),
                d.sign.as_str().to_string(),
                fmt_f64(d.volume),
                fmt_f64(d.l2_mass),
                fmt_f64(d.inradius),
                fmt_f64(err),
            ];
            row.extend(self.grid.center(d.inradius_center).into_iter().map(fmt_f64));
            row.extend(self.grid.center(d.max_point).into_iter().map(fmt_f64));
            row.push(fmt_f64(d.max_value));
            w.write_record(&row).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Inscribed-ball certificate: every cell centre strictly within
    /// `inradius` of the centre belongs to the domain.
    pub fn ball_inside(&self, label: u32) -> Result<bool> {
        let d = self.domain(label)?;
        let r = d.inradius;
        if !r.is_finite() {
            return Ok(true);
        }
        Ok(ball_cells(&self.grid, d.inradius_center, r)
            .into_iter()
            // cells at exactly `r` lie on the sphere; allow for the sqrt round trip
            .all(|(j, d2)| d2 >= r * r * (1.0 - 1e-12) || self.labels[j] == label))
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// Shortest representation that parses back to the same value.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// `(radius, centre cell)` of the domain's largest inscribed ball.
pub fn inner_radius(decomposition: &NodalDecomposition, label: u32) -> Result<(f64, usize)> {
    let d = decomposition.domain(label)?;
    Ok((d.inradius, d.inradius_center))
}

/// Cells whose centres lie within distance `< r` (squared distances below
/// `r²` plus a hair) of `center`'s centre, with their squared distances,
/// under the periodic metric on a torus. Each cell appears once.
pub(crate) fn ball_cells(grid: &Grid, center: usize, r: f64) -> Vec<(usize, f64)> {
    let c = grid.coords(center);
    let h = grid.spacing3();
    let shape = grid.shape3();
    let mut reach = [0i64; MAX_DIM];
    for a in 0..grid.ndim() {
        let mut k = (r / h[a]).floor() as i64 + 1;
        if grid.periodic() {
            // each cell once: stay within half a period
            k = k.min((shape[a] as i64 - 1) / 2 + (shape[a] as i64 % 2 == 0) as i64);
        }
        reach[a] = k;
    }
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for dx in -reach[0]..=reach[0] {
        for dy in -reach[1]..=reach[1] {
            for dz in -reach[2]..=reach[2] {
                let off = [dx, dy, dz];
                let d2: f64 = (0..MAX_DIM).map(|a| (off[a] as f64 * h[a]).powi(2)).sum();
                if d2 > r * r * (1.0 + 1e-12) {
                    continue;
                }
                let u = [c[0] as i64 + dx, c[1] as i64 + dy, c[2] as i64 + dz];
                if let Some(nc) = grid.resolve(u) {
                    let j = grid.index(nc);
                    if seen.insert(j) {
                        out.push((j, d2));
                    }
                }
            }
        }
    }
    out
}

/// Fraction of grid cells in the ball of radius `r/√λ` about the domain's
/// maximum point that belong to the domain, for each `r` in `radii`.
pub fn max_point_ball_profile(
    field: &SampledField,
    decomposition: &NodalDecomposition,
    label: u32,
    radii: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let d = decomposition.domain(label)?;
    let guard = field.manifold().injectivity_guard();
    let scale = field.lambda().sqrt();
    let mut rmax: f64 = 0.0;
    for &r in radii {
        if !(r > 0.0) {
            return Err(Error::InvalidEigenfunction(format!("ball radius must be positive, got {r}")));
        }
        let rho = r / scale;
        if rho >= guard {
            return Err(Error::InjectivityGuard { radius: rho, guard });
        }
        rmax = rmax.max(rho);
    }
    // one enumeration at the largest radius, then cumulative counts
    let mut cells: Vec<(f64, bool)> = ball_cells(decomposition.grid(), d.max_point, rmax)
        .into_iter()
        .map(|(j, d2)| (d2, decomposition.labels()[j] == label))
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(radii
        .iter()
        .map(|&r| {
            let rho = r / scale;
            let end = cells.partition_point(|c| c.0 <= rho * rho * (1.0 + 1e-12));
            let inside = cells[..end].iter().filter(|c| c.1).count();
            (r, inside as f64 / end.max(1) as f64)
        })
        .collect())
}
