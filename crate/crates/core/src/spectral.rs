//! Exact Laplace eigenfunctions on flat tori and Dirichlet boxes.
//!
//! On a torus with side lengths `L` the eigenfunctions are trigonometric
//! polynomials `a cos(2π k·x/L) + b sin(2π k·x/L)` with eigenvalue
//! `4π² Σ (k_i/L_i)²`; on a box they are products `Π sin(π k_i x_i / L_i)`
//! with `k_i ≥ 1` and eigenvalue `π² Σ (k_i/L_i)²`.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when comparing analytic eigenvalues.
pub const EIGENVALUE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManifoldKind {
    Torus,
    DirichletBox,
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ManifoldKind::Torus => "torus",
            ManifoldKind::DirichletBox => "dirichlet-box",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    pub side_lengths: Vec<f64>,
}

impl ManifoldSpec {
    pub fn new(kind: ManifoldKind, side_lengths: Vec<f64>) -> Result<Self> {
        let m = ManifoldSpec { kind, side_lengths };
        m.validate()?;
        Ok(m)
    }

    pub fn torus(side_lengths: &[f64]) -> Result<Self> {
        Self::new(ManifoldKind::Torus, side_lengths.to_vec())
    }

    pub fn unit_torus(n: usize) -> Result<Self> {
        Self::new(ManifoldKind::Torus, vec![1.0; n])
    }

    pub fn dirichlet_box(side_lengths: &[f64]) -> Result<Self> {
        Self::new(ManifoldKind::DirichletBox, side_lengths.to_vec())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.side_lengths.len();
        if !(2..=3).contains(&n) {
            return Err(Error::InvalidManifold(format!("dimension must be 2 or 3, got {n}")));
        }
        if let Some(l) = self.side_lengths.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidManifold(format!("side length {l} is not positive")));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.side_lengths.len()
    }

    pub fn is_periodic(&self) -> bool {
        self.kind == ManifoldKind::Torus
    }

    pub fn volume(&self) -> f64 {
        self.side_lengths.iter().product()
    }

    pub fn min_side(&self) -> f64 {
        self.side_lengths.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Radius below which metric balls do not wrap onto themselves.
    pub fn injectivity_guard(&self) -> f64 {
        0.5 * self.min_side()
    }

    fn wave_factor(&self) -> f64 {
        match self.kind {
            ManifoldKind::Torus => 2.0 * PI,
            ManifoldKind::DirichletBox => PI,
        }
    }

    /// Analytic eigenvalue of the lattice vector `k`.
    pub fn eigenvalue_of(&self, k: &[i64]) -> f64 {
        let w = self.wave_factor();
        k.iter()
            .zip(&self.side_lengths)
            .map(|(&ki, &l)| {
                let q = w * ki as f64 / l;
                q * q
            })
            .sum()
    }

    pub fn admissible(&self, k: &[i64]) -> bool {
        k.len() == self.dimension()
            && match self.kind {
                ManifoldKind::Torus => true,
                ManifoldKind::DirichletBox => k.iter().all(|&ki| ki >= 1),
            }
    }

    /// Every distinct analytic eigenvalue in `[lo, hi]`, ascending.
    pub fn eigenvalues_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for k in self.lattice_up_to(hi) {
            let lam = self.eigenvalue_of(&k);
            if lam >= lo * (1.0 - 1e-10) && lam <= hi * (1.0 + 1e-10) && lam > 0.0 {
                out.push(lam);
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() <= EIGENVALUE_RTOL * b.abs().max(1.0));
        out
    }

    /// All admissible lattice vectors with eigenvalue at most `lambda_max`
    /// (torus: before k ↔ −k reduction).
    fn lattice_up_to(&self, lambda_max: f64) -> Vec<Vec<i64>> {
        let w = self.wave_factor();
        let bounds: Vec<i64> = self
            .side_lengths
            .iter()
            .map(|&l| (l * lambda_max.max(0.0).sqrt() / w * (1.0 + 1e-12)).floor() as i64)
            .collect();
        let ranges: Vec<(i64, i64)> = bounds
            .iter()
            .map(|&b| match self.kind {
                ManifoldKind::Torus => (-b, b),
                ManifoldKind::DirichletBox => (1, b),
            })
            .collect();
        let mut out = Vec::new();
        let mut k: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        if ranges.iter().any(|r| r.0 > r.1) {
            return out;
        }
        loop {
            if self.eigenvalue_of(&k) <= lambda_max * (1.0 + 1e-10) {
                out.push(k.clone());
            }
            let mut axis = k.len();
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if k[axis] < ranges[axis].1 {
                    k[axis] += 1;
                    for j in axis + 1..k.len() {
                        k[j] = ranges[j].0;
                    }
                    break;
                }
            }
        }
    }
}

/// Admissible lattice vectors whose eigenvalue lies within `window` of
/// `target`, reduced under k ↔ −k on the torus (the lexicographically larger
/// representative is kept) and sorted lexicographically.
pub fn enumerate_eigenspace(manifold: &ManifoldSpec, target: f64, window: f64) -> Result<Vec<Vec<i64>>> {
    manifold.validate()?;
    if !(window >= 0.0) {
        return Err(Error::InvalidEigenfunction(format!("eigenvalue window {window} is negative")));
    }
    let slack = window + 1e-10 * target.abs().max(1.0);
    let mut out: Vec<Vec<i64>> = manifold
        .lattice_up_to(target + slack)
        .into_iter()
        .filter(|k| (manifold.eigenvalue_of(k) - target).abs() <= slack)
        .filter(|k| match manifold.kind {
            ManifoldKind::Torus => {
                let neg: Vec<i64> = k.iter().map(|x| -x).collect();
                *k >= neg
            }
            ManifoldKind::DirichletBox => true,
        })
        .collect();
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub k: Vec<i64>,
    /// Cosine coefficient on the torus; product-of-sines coefficient on the box.
    pub cos: f64,
    /// Sine coefficient (torus only, zero on the box).
    pub sin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenfunctionSpec {
    manifold: ManifoldSpec,
    modes: Vec<Mode>,
    lambda: f64,
    seed: Option<u64>,
}

impl EigenfunctionSpec {
    pub fn new(manifold: ManifoldSpec, modes: Vec<Mode>, lambda: f64, seed: Option<u64>) -> Result<Self> {
        manifold.validate()?;
        let bad = |msg: String| Err(Error::InvalidEigenfunction(msg));
        if modes.is_empty() {
            return bad("modes: at least one mode required".into());
        }
        for (i, m) in modes.iter().enumerate() {
            if !manifold.admissible(&m.k) {
                return bad(format!("modes[{i}]: lattice vector {:?} not admissible on {}", m.k, manifold.kind));
            }
            if !m.cos.is_finite() || !m.sin.is_finite() {
                return bad(format!("coefficients[{i}]: non-finite coefficient"));
            }
            if manifold.kind == ManifoldKind::DirichletBox && m.sin != 0.0 {
                return bad(format!("coefficients[{i}]: box modes carry a single coefficient"));
            }
            let lam = manifold.eigenvalue_of(&m.k);
            if (lam - lambda).abs() > EIGENVALUE_RTOL * lambda.abs().max(lam.abs()) {
                return bad(format!(
                    "lambda: stored value {lambda} differs from analytic {lam} of modes[{i}]"
                ));
            }
        }
        if modes.iter().all(|m| m.cos == 0.0 && m.sin == 0.0) {
            return bad("coefficients: all coefficients are zero".into());
        }
        Ok(EigenfunctionSpec {
            manifold,
            modes,
            lambda,
            seed,
        })
    }

    /// Single mode with the given coefficients; λ taken from the lattice vector.
    pub fn single_mode(manifold: ManifoldSpec, k: Vec<i64>, cos: f64, sin: f64) -> Result<Self> {
        let lambda = manifold.eigenvalue_of(&k);
        Self::new(manifold, vec![Mode { k, cos, sin }], lambda, None)
    }

    pub fn manifold(&self) -> &ManifoldSpec {
        &self.manifold
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn dimension(&self) -> usize {
        self.manifold.dimension()
    }

    /// Evaluate at a point of the fundamental domain. Torus coordinates are
    /// reduced modulo the side lengths; box points must lie in `[0, L]`.
    pub fn evaluate(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dimension() {
            return Err(Error::Shape(format!(
                "point has {} coordinates, manifold has dimension {}",
                point.len(),
                self.dimension()
            )));
        }
        let mut x = [0.0; 3];
        for (a, (&p, &l)) in point.iter().zip(&self.manifold.side_lengths).enumerate() {
            x[a] = match self.manifold.kind {
                ManifoldKind::Torus => p.rem_euclid(l),
                ManifoldKind::DirichletBox => {
                    if !(0.0..=l).contains(&p) {
                        return Err(Error::PointOutside);
                    }
                    p
                }
            };
        }
        Ok(self.evaluate_reduced(&x[..self.dimension()]))
    }

    /// Evaluate without reduction or range checks.
    pub fn evaluate_reduced(&self, x: &[f64]) -> f64 {
        let l = &self.manifold.side_lengths;
        match self.manifold.kind {
            ManifoldKind::Torus => self
                .modes
                .iter()
                .map(|m| {
                    let phase: f64 = m
                        .k
                        .iter()
                        .zip(x)
                        .zip(l)
                        .map(|((&k, &xi), &li)| 2.0 * PI * k as f64 * xi / li)
                        .sum();
                    let (s, c) = phase.sin_cos();
                    m.cos * c + m.sin * s
                })
                .sum(),
            ManifoldKind::DirichletBox => self
                .modes
                .iter()
                .map(|m| {
                    m.cos
                        * m.k
                            .iter()
                            .zip(x)
                            .zip(l)
                            .map(|((&k, &xi), &li)| (PI * k as f64 * xi / li).sin())
                            .product::<f64>()
                })
                .sum(),
        }
    }

    pub fn to_document(&self) -> SpecDocument {
        SpecDocument {
            manifold: self.manifold.clone(),
            modes: self.modes.iter().map(|m| m.k.clone()).collect(),
            coefficients: self
                .modes
                .iter()
                .map(|m| match self.manifold.kind {
                    ManifoldKind::Torus => vec![m.cos, m.sin],
                    ManifoldKind::DirichletBox => vec![m.cos],
                })
                .collect(),
            lambda: self.lambda,
            seed: self.seed,
        }
    }

    pub fn from_document(doc: SpecDocument) -> Result<Self> {
        if doc.modes.len() != doc.coefficients.len() {
            return Err(Error::InvalidEigenfunction(format!(
                "coefficients: {} entries for {} modes",
                doc.coefficients.len(),
                doc.modes.len()
            )));
        }
        let width = match doc.manifold.kind {
            ManifoldKind::Torus => 2,
            ManifoldKind::DirichletBox => 1,
        };
        let mut modes = Vec::with_capacity(doc.modes.len());
        for (i, (k, c)) in doc.modes.into_iter().zip(doc.coefficients).enumerate() {
            if c.len() != width {
                return Err(Error::InvalidEigenfunction(format!(
                    "coefficients[{i}]: expected {width} values, got {}",
                    c.len()
                )));
            }
            modes.push(Mode {
                k,
                cos: c[0],
                sin: c.get(1).copied().unwrap_or(0.0),
            });
        }
        Self::new(doc.manifold, modes, doc.lambda, doc.seed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_document()).expect("spec serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_at(text, Path::new("<memory>"))
    }

    fn from_json_at(text: &str, path: &Path) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: SpecDocument = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: format!("key `{}`: {}", e.path(), e.inner()),
        })?;
        Self::from_document(doc).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_at(&text, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// On-disk form of an eigenfunction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    pub manifold: ManifoldSpec,
    pub modes: Vec<Vec<i64>>,
    pub coefficients: Vec<Vec<f64>>,
    pub lambda: f64,
    pub seed: Option<u64>,
}

/// Seeded Gaussian element of the eigenspace nearest to `target`.
///
/// When the window admits several eigenvalues, the one closest to `target`
/// is used so that every mode shares the stored eigenvalue.
pub fn random_eigenfunction(manifold: &ManifoldSpec, target: f64, window: f64, seed: u64) -> Result<EigenfunctionSpec> {
    let ks = enumerate_eigenspace(manifold, target, window)?;
    let lambda = ks
        .iter()
        .map(|k| manifold.eigenvalue_of(k))
        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
        .ok_or(Error::EmptyEigenspace(target))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for k in ks {
        let lam = manifold.eigenvalue_of(&k);
        if (lam - lambda).abs() > EIGENVALUE_RTOL * lambda.abs() {
            continue;
        }
        let cos: f64 = StandardNormal.sample(&mut rng);
        let sin: f64 = match manifold.kind {
            ManifoldKind::Torus if k.iter().any(|&x| x != 0) => StandardNormal.sample(&mut rng),
            _ => 0.0,
        };
        modes.push(Mode { k, cos, sin });
    }
    // Store the analytic value of the first mode so the invariant is exact.
    let lambda = manifold.eigenvalue_of(&modes[0].k);
    EigenfunctionSpec::new(manifold.clone(), modes, lambda, Some(seed))
}
