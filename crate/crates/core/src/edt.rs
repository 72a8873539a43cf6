//! Exact squared Euclidean distance transform by separable lower envelopes
//! of parabolas, one pass per axis.
//!
//! Periodic axes run the one-dimensional pass on a doubled line and fold the
//! two copies; walled axes pad the line with a feature cell at each end.

use rayon::prelude::*;

use crate::grid::Grid;

/// What lies beyond the last cell of a non-periodic axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outside {
    /// Nothing: only in-grid features count.
    Open,
    /// The outside is a feature (Dirichlet wall one cell out).
    Feature,
}

/// Squared distance (physical units) from each cell centre to the nearest
/// feature cell centre. Cells with no reachable feature get `+∞`.
pub fn squared_distance(grid: &Grid, outside: Outside, is_feature: impl Fn(usize) -> bool + Sync) -> Vec<f64> {
    let mut d: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| if is_feature(i) { 0.0 } else { f64::INFINITY })
        .collect();
    let shape = grid.shape3();
    let strides = grid.strides();
    let spacing = grid.spacing3();
    for axis in 0..grid.ndim() {
        let n = shape[axis];
        let stride = strides[axis];
        let w2 = spacing[axis] * spacing[axis];
        let starts: Vec<usize> = (0..grid.len())
            .filter(|&i| grid.coords(i)[axis] == 0)
            .collect();
        let lines: Vec<Vec<f64>> = starts
            .par_iter()
            .map_init(LineScratch::default, |scratch, &start| {
                let line: Vec<f64> = (0..n).map(|t| d[start + t * stride]).collect();
                transform_line(&line, w2, grid.periodic(), outside, scratch)
            })
            .collect();
        for (start, line) in starts.iter().zip(lines) {
            for (t, v) in line.into_iter().enumerate() {
                d[start + t * stride] = v;
            }
        }
    }
    d
}

#[derive(Default)]
struct LineScratch {
    f: Vec<f64>,
    out: Vec<f64>,
    v: Vec<usize>,
    z: Vec<f64>,
}

fn transform_line(line: &[f64], w2: f64, periodic: bool, outside: Outside, s: &mut LineScratch) -> Vec<f64> {
    let n = line.len();
    s.f.clear();
    if periodic {
        s.f.extend_from_slice(line);
        s.f.extend_from_slice(line);
        lower_envelope(&s.f, w2, &mut s.out, &mut s.v, &mut s.z);
        (0..n).map(|i| s.out[i].min(s.out[i + n])).collect()
    } else if outside == Outside::Feature {
        s.f.push(0.0);
        s.f.extend_from_slice(line);
        s.f.push(0.0);
        lower_envelope(&s.f, w2, &mut s.out, &mut s.v, &mut s.z);
        s.out[1..=n].to_vec()
    } else {
        s.f.extend_from_slice(line);
        lower_envelope(&s.f, w2, &mut s.out, &mut s.v, &mut s.z);
        s.out.clone()
    }
}

/// `out[p] = min_q f[q] + w2 (p − q)²` over finite `f[q]`.
fn lower_envelope(f: &[f64], w2: f64, out: &mut Vec<f64>, v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let n = f.len();
    out.clear();
    out.resize(n, f64::INFINITY);
    v.clear();
    z.clear();
    let key = |q: usize| f[q] + w2 * (q * q) as f64;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        let mut boundary = f64::NEG_INFINITY;
        while let Some(&p) = v.last() {
            let s = (key(q) - key(p)) / (2.0 * w2 * (q - p) as f64);
            if s <= *z.last().expect("z tracks v") {
                v.pop();
                z.pop();
            } else {
                boundary = s;
                break;
            }
        }
        v.push(q);
        z.push(boundary);
    }
    if v.is_empty() {
        return;
    }
    let mut k = 0;
    for (p, o) in out.iter_mut().enumerate() {
        while k + 1 < v.len() && z[k + 1] < p as f64 {
            k += 1;
        }
        let dq = p as f64 - v[k] as f64;
        *o = f[v[k]] + w2 * dq * dq;
    }
}

/// Squared distance in cell units along each axis; convenience for
/// isotropic integer grids.
pub fn squared_distance_cells(
    shape: &[usize],
    periodic: bool,
    outside: Outside,
    is_feature: impl Fn(usize) -> bool + Sync,
) -> Vec<f64> {
    let spacing = vec![1.0; shape.len()];
    let grid = Grid::new(shape, &spacing, periodic).expect("valid shape");
    squared_distance(&grid, outside, is_feature)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_envelope() {
        let f = [f64::INFINITY, 0.0, f64::INFINITY, f64::INFINITY, f64::INFINITY, 0.0];
        let (mut out, mut v, mut z) = (Vec::new(), Vec::new(), Vec::new());
        lower_envelope(&f, 1.0, &mut out, &mut v, &mut z);
        assert_eq!(out, vec![1.0, 0.0, 1.0, 4.0, 1.0, 0.0]);
    }

    #[test]
    fn periodic_line_wraps() {
        // single feature at 0 on a ring of 8 cells
        let d = squared_distance_cells(&[8, 1], true, Outside::Open, |i| i == 0);
        assert_eq!(d, vec![0.0, 1.0, 4.0, 9.0, 16.0, 9.0, 4.0, 1.0]);
    }

    #[test]
    fn walls_count_as_features() {
        let d = squared_distance_cells(&[5, 7], false, Outside::Feature, |_| false);
        let row: Vec<f64> = (0..5).map(|i| d[i * 7 + 3]).collect();
        assert_eq!(row, vec![1.0, 4.0, 9.0, 4.0, 1.0]);
        assert_eq!(d[0], 1.0);
        let open = squared_distance_cells(&[5, 7], false, Outside::Open, |_| false);
        assert!(open.iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn anisotropic_spacing() {
        let grid = Grid::new(&[4, 4], &[0.5, 2.0], true).unwrap();
        let d = squared_distance(&grid, Outside::Open, |i| i == 0);
        // cell (1, 1): 0.5² + 2²
        assert_eq!(d[grid.index([1, 1, 0])], 0.25 + 4.0);
        assert_eq!(d[grid.index([2, 0, 0])], 1.0);
    }
}
