//! Uniform cell-centred grids on a flat torus or box.
//!
//! Cells are stored axis-major: the first axis varies slowest. Grids are
//! always held as three axes; a two-dimensional grid carries a trailing axis
//! of length one that never participates in neighbour or distance queries.

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    ndim: usize,
    shape: [usize; MAX_DIM],
    spacing: [f64; MAX_DIM],
    periodic: bool,
}

impl Grid {
    pub fn new(shape: &[usize], spacing: &[f64], periodic: bool) -> Result<Self> {
        let ndim = shape.len();
        if !(2..=MAX_DIM).contains(&ndim) || spacing.len() != ndim {
            return Err(Error::Shape(format!(
                "grid needs 2 or 3 axes with matching spacing, got {} and {}",
                shape.len(),
                spacing.len()
            )));
        }
        if shape.contains(&0) || spacing.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::Shape("empty axis or non-positive spacing".into()));
        }
        let mut s = [1; MAX_DIM];
        let mut h = [1.0; MAX_DIM];
        s[..ndim].copy_from_slice(shape);
        h[..ndim].copy_from_slice(spacing);
        Ok(Grid {
            ndim,
            shape: s,
            spacing: h,
            periodic,
        })
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    /// Cells per axis for the active axes.
    pub fn shape(&self) -> &[usize] {
        &self.shape[..self.ndim]
    }

    /// Cells per axis including padding axes of length one.
    pub fn shape3(&self) -> [usize; MAX_DIM] {
        self.shape
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.ndim]
    }

    pub fn spacing3(&self) -> [f64; MAX_DIM] {
        self.spacing
    }

    pub fn periodic(&self) -> bool {
        self.periodic
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// Physical side length per active axis.
    pub fn extent(&self) -> Vec<f64> {
        (0..self.ndim)
            .map(|a| self.shape[a] as f64 * self.spacing[a])
            .collect()
    }

    #[inline]
    pub fn index(&self, c: [usize; MAX_DIM]) -> usize {
        (c[0] * self.shape[1] + c[1]) * self.shape[2] + c[2]
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; MAX_DIM] {
        let c2 = idx % self.shape[2];
        let rest = idx / self.shape[2];
        [rest / self.shape[1], rest % self.shape[1], c2]
    }

    pub fn strides(&self) -> [usize; MAX_DIM] {
        [self.shape[1] * self.shape[2], self.shape[2], 1]
    }

    /// Physical coordinates of a cell centre (active axes only).
    pub fn center(&self, idx: usize) -> Vec<f64> {
        let c = self.coords(idx);
        (0..self.ndim)
            .map(|a| (c[a] as f64 + 0.5) * self.spacing[a])
            .collect()
    }

    /// Face neighbour along `axis` in direction `dir` (±1). Wraps on a
    /// periodic grid, returns `None` past a wall.
    #[inline]
    pub fn neighbor(&self, c: [usize; MAX_DIM], axis: usize, dir: i64) -> Option<[usize; MAX_DIM]> {
        let n = self.shape[axis] as i64;
        let mut x = c[axis] as i64 + dir;
        if x < 0 || x >= n {
            if !self.periodic {
                return None;
            }
            x = x.rem_euclid(n);
        }
        let mut out = c;
        out[axis] = x as usize;
        Some(out)
    }

    /// Wrap (periodic) or reject (box) an unrolled integer coordinate.
    #[inline]
    pub fn resolve(&self, c: [i64; MAX_DIM]) -> Option<[usize; MAX_DIM]> {
        let mut out = [0usize; MAX_DIM];
        for a in 0..MAX_DIM {
            let n = self.shape[a] as i64;
            let x = if self.periodic { c[a].rem_euclid(n) } else { c[a] };
            if x < 0 || x >= n {
                return None;
            }
            out[a] = x as usize;
        }
        Some(out)
    }

    /// Minimal-image displacement from cell `a` to cell `b`, in physical units.
    pub fn displacement(&self, a: usize, b: usize) -> [f64; MAX_DIM] {
        let ca = self.coords(a);
        let cb = self.coords(b);
        let mut d = [0.0; MAX_DIM];
        for ax in 0..self.ndim {
            let n = self.shape[ax] as i64;
            let mut k = cb[ax] as i64 - ca[ax] as i64;
            if self.periodic {
                k = k.rem_euclid(n);
                if 2 * k > n {
                    k -= n;
                }
            }
            d[ax] = k as f64 * self.spacing[ax];
        }
        d
    }
}

/// One piece of an unrolled axis interval folded into `[0, n)`: cells
/// `start..end` counted `weight` times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fold {
    pub weight: u64,
    pub start: usize,
    pub end: usize,
}

/// Fold the unrolled half-open interval `[lo, hi)` onto an axis of `n`
/// cells. Periodic axes keep wrap multiplicity; walls clip.
pub fn fold_interval(lo: i64, hi: i64, n: usize, periodic: bool) -> Vec<Fold> {
    let mut out = Vec::with_capacity(3);
    if hi <= lo {
        return out;
    }
    let ni = n as i64;
    if !periodic {
        let a = lo.clamp(0, ni) as usize;
        let b = hi.clamp(0, ni) as usize;
        if b > a {
            out.push(Fold {
                weight: 1,
                start: a,
                end: b,
            });
        }
        return out;
    }
    let len = hi - lo;
    let full = len / ni;
    let rem = len % ni;
    if full > 0 {
        out.push(Fold {
            weight: full as u64,
            start: 0,
            end: n,
        });
    }
    if rem > 0 {
        let a = lo.rem_euclid(ni);
        if a + rem <= ni {
            out.push(Fold {
                weight: 1,
                start: a as usize,
                end: (a + rem) as usize,
            });
        } else {
            out.push(Fold {
                weight: 1,
                start: a as usize,
                end: n,
            });
            out.push(Fold {
                weight: 1,
                start: 0,
                end: (a + rem - ni) as usize,
            });
        }
    }
    out
}

/// Summed-area table over a grid-shaped scalar array.
#[derive(Debug, Clone)]
pub struct PrefixSum {
    shape: [usize; MAX_DIM],
    periodic: bool,
    table: Vec<f64>,
}

impl PrefixSum {
    pub fn new(grid: &Grid, values: &[f64]) -> Self {
        assert_eq!(values.len(), grid.len(), "prefix sum over mismatched array");
        let [s0, s1, s2] = grid.shape3();
        let (t1, t2) = (s1 + 1, s2 + 1);
        let mut table = vec![0.0; (s0 + 1) * t1 * t2];
        let at = |i: usize, j: usize, k: usize| (i * t1 + j) * t2 + k;
        for i in 0..s0 {
            for j in 0..s1 {
                let mut row = 0.0;
                for k in 0..s2 {
                    row += values[(i * s1 + j) * s2 + k];
                    let v = row + table[at(i, j + 1, k + 1)] + table[at(i + 1, j, k + 1)]
                        - table[at(i, j, k + 1)];
                    table[at(i + 1, j + 1, k + 1)] = v;
                }
            }
        }
        PrefixSum {
            shape: grid.shape3(),
            periodic: grid.periodic(),
            table,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.table[(i * (self.shape[1] + 1) + j) * (self.shape[2] + 1) + k]
    }

    /// Sum over the in-range box `lo..hi` (no wrapping).
    #[inline]
    pub fn box_sum(&self, lo: [usize; MAX_DIM], hi: [usize; MAX_DIM]) -> f64 {
        self.at(hi[0], hi[1], hi[2]) - self.at(lo[0], hi[1], hi[2]) - self.at(hi[0], lo[1], hi[2])
            - self.at(hi[0], hi[1], lo[2])
            + self.at(lo[0], lo[1], hi[2])
            + self.at(lo[0], hi[1], lo[2])
            + self.at(hi[0], lo[1], lo[2])
            - self.at(lo[0], lo[1], lo[2])
    }

    pub fn region_sum(&self, region: &Region) -> f64 {
        self.unrolled_sum(region.lo, region.hi)
    }

    /// Sum over an unrolled box `[lo, hi)` in the universal cover (periodic:
    /// cells counted with wrap multiplicity) or clipped to the box.
    pub fn unrolled_sum(&self, lo: [i64; MAX_DIM], hi: [i64; MAX_DIM]) -> f64 {
        let folds: Vec<Vec<Fold>> = (0..MAX_DIM)
            .map(|a| fold_interval(lo[a], hi[a], self.shape[a], self.periodic))
            .collect();
        let mut total = 0.0;
        for f0 in &folds[0] {
            for f1 in &folds[1] {
                for f2 in &folds[2] {
                    let w = (f0.weight * f1.weight * f2.weight) as f64;
                    total += w * self.box_sum([f0.start, f1.start, f2.start], [f0.end, f1.end, f2.end]);
                }
            }
        }
        total
    }
}

/// Half-open box of cells in unrolled integer coordinates. On a periodic
/// grid cells outside `[0, n)` wrap (and may repeat); on a box they clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub lo: [i64; MAX_DIM],
    pub hi: [i64; MAX_DIM],
}

impl Region {
    pub fn new(lo: [i64; MAX_DIM], hi: [i64; MAX_DIM]) -> Self {
        Region { lo, hi }
    }

    /// The whole fundamental domain.
    pub fn full(grid: &Grid) -> Self {
        let s = grid.shape3();
        Region {
            lo: [0; MAX_DIM],
            hi: [s[0] as i64, s[1] as i64, s[2] as i64],
        }
    }

    /// Concentric scaling by `factor` about the region's centre, in cell
    /// boundary coordinates; a cell belongs to the result when its centre
    /// lies in the scaled half-open interval. Padding axes stay put.
    pub fn scaled(&self, factor: f64, ndim: usize) -> Self {
        let mut out = *self;
        for a in 0..ndim {
            let c = 0.5 * (self.lo[a] + self.hi[a]) as f64;
            let w = 0.5 * (self.hi[a] - self.lo[a]) as f64 * factor;
            out.lo[a] = (c - w - 0.5 - 1e-9).ceil() as i64;
            out.hi[a] = (c + w - 0.5 - 1e-9).ceil() as i64;
        }
        out
    }

    /// Per-axis folded pieces on `grid`.
    pub fn folds(&self, grid: &Grid) -> [Vec<Fold>; MAX_DIM] {
        let s = grid.shape3();
        std::array::from_fn(|a| fold_interval(self.lo[a], self.hi[a], s[a], grid.periodic()))
    }

    /// Cells counted with wrap multiplicity (after clipping on a box).
    pub fn cell_count(&self, grid: &Grid) -> u64 {
        self.folds(grid)
            .iter()
            .map(|f| f.iter().map(|p| p.weight * (p.end - p.start) as u64).sum::<u64>())
            .product()
    }

    /// Visit every cell of the region with its multiplicity.
    pub fn for_each_cell(&self, grid: &Grid, mut f: impl FnMut(usize, u64)) {
        let [f0, f1, f2] = self.folds(grid);
        for p0 in &f0 {
            for i in p0.start..p0.end {
                for p1 in &f1 {
                    for j in p1.start..p1.end {
                        for p2 in &f2 {
                            for k in p2.start..p2.end {
                                f(grid.index([i, j, k]), p0.weight * p1.weight * p2.weight);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Neumaier-compensated sum in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
