//! Independent oracles shared by the integration tests and the acceptance
//! runner. Nothing here calls into the library's labelling or distance code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        match self.rank[a].cmp(&self.rank[b]) {
            std::cmp::Ordering::Less => self.parent[a] = b,
            std::cmp::Ordering::Greater => self.parent[b] = a,
            std::cmp::Ordering::Equal => {
                self.parent[b] = a;
                self.rank[a] += 1;
            }
        }
    }
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for a in (0..shape.len().saturating_sub(1)).rev() {
        s[a] = s[a + 1] * shape[a + 1];
    }
    s
}

fn coords(shape: &[usize], mut i: usize) -> Vec<usize> {
    let mut c = vec![0; shape.len()];
    for a in (0..shape.len()).rev() {
        c[a] = i % shape[a];
        i /= shape[a];
    }
    c
}

/// Component id per cell (`None` for zeros) of strict-sign face-connected
/// components.
pub fn union_find_labels(shape: &[usize], periodic: bool, values: &[f64]) -> Vec<Option<usize>> {
    let n = values.len();
    let st = strides(shape);
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        if values[i] == 0.0 {
            continue;
        }
        let c = coords(shape, i);
        for a in 0..shape.len() {
            let next = if c[a] + 1 < shape[a] {
                i + st[a]
            } else if periodic && shape[a] > 1 {
                i - c[a] * st[a]
            } else {
                continue;
            };
            if values[next] != 0.0 && (values[next] > 0.0) == (values[i] > 0.0) {
                uf.union(i, next);
            }
        }
    }
    (0..n).map(|i| (values[i] != 0.0).then(|| uf.find(i))).collect()
}

/// Do two labellings describe the same partition (zeros matching zeros)?
pub fn same_partition(ours: &[u32], oracle: &[Option<usize>]) -> bool {
    use std::collections::HashMap;
    let mut fwd: HashMap<u32, usize> = HashMap::new();
    let mut back: HashMap<usize, u32> = HashMap::new();
    for (&l, &o) in ours.iter().zip(oracle) {
        match (l, o) {
            (0, None) => {}
            (0, Some(_)) | (_, None) => return false,
            (l, Some(o)) => {
                if *fwd.entry(l).or_insert(o) != o || *back.entry(o).or_insert(l) != l {
                    return false;
                }
            }
        }
    }
    true
}

/// Squared distance in cell units from every cell to the nearest feature,
/// by exhaustive search. Periodic axes use the minimum image.
pub fn brute_edt(shape: &[usize], periodic: bool, feature: &[bool]) -> Vec<f64> {
    let feats: Vec<Vec<usize>> = (0..feature.len())
        .filter(|&i| feature[i])
        .map(|i| coords(shape, i))
        .collect();
    (0..feature.len())
        .map(|i| {
            if feature[i] {
                return 0.0;
            }
            let c = coords(shape, i);
            let mut best = u64::MAX;
            for f in &feats {
                let mut d2 = 0u64;
                for a in 0..shape.len() {
                    let mut d = c[a].abs_diff(f[a]);
                    if periodic {
                        d = d.min(shape[a] - d);
                    }
                    d2 += (d * d) as u64;
                    if d2 >= best {
                        break;
                    }
                }
                best = best.min(d2);
            }
            if best == u64::MAX {
                f64::INFINITY
            } else {
                best as f64
            }
        })
        .collect()
}

/// Random field in {−1, 0, +1} with a smoothing bias so that components
/// come in many sizes.
pub fn random_sign_field(shape: &[usize], seed: u64, zero_rate: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    let bias: f64 = rng.random_range(0.3..0.7);
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random::<f64>() < zero_rate {
                0.0
            } else if rng.random::<f64>() < bias {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    // one sweep of majority smoothing along the last axis
    let last = *shape.last().unwrap();
    for i in 0..n {
        if v[i] != 0.0 && i % last > 0 && rng.random::<f64>() < 0.5 && v[i - 1] != 0.0 {
            v[i] = v[i - 1];
        }
    }
    v
}

/// Random feature mask with density drawn per mask.
pub fn random_mask(n: usize, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let density: f64 = rng.random_range(0.002..0.3);
    (0..n).map(|_| rng.random::<f64>() < density).collect()
}
