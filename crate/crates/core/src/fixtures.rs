//! Closed-form fixtures with known answers, run by `nodal-lab verify`.

use std::f64::consts::PI;

use crate::covering::build_covering;
use crate::grid::Region;
use crate::nodal::decompose;
use crate::rayleigh::{local_rayleigh, mean_value_defect};
use crate::sampling::{sample, SampledField};
use crate::spectral::{enumerate_eigenspace, EigenfunctionSpec, ManifoldSpec, Mode};
use crate::Result;

#[derive(Debug, Clone)]
pub struct FixtureResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> FixtureResult {
    FixtureResult { name, pass, detail }
}

/// `sin(2πx)` on the unit 3-torus.
pub fn slab_spec() -> EigenfunctionSpec {
    let m = ManifoldSpec::unit_torus(3).expect("unit torus");
    EigenfunctionSpec::single_mode(m, vec![1, 0, 0], 0.0, 1.0).expect("slab mode")
}

/// `sin(2πx)·sin(2πy)` on the unit 2-torus, as a sum of two cosines.
pub fn checkerboard_spec() -> EigenfunctionSpec {
    let m = ManifoldSpec::unit_torus(2).expect("unit torus");
    // sin a sin b = (cos(a − b) − cos(a + b)) / 2
    let modes = vec![
        Mode {
            k: vec![1, -1],
            cos: 0.5,
            sin: 0.0,
        },
        Mode {
            k: vec![1, 1],
            cos: -0.5,
            sin: 0.0,
        },
    ];
    EigenfunctionSpec::new(m, modes, 8.0 * PI * PI, None).expect("checkerboard modes")
}

fn run() -> Result<Vec<FixtureResult>> {
    let mut out = Vec::new();

    let t3 = ManifoldSpec::unit_torus(3)?;
    let shell = enumerate_eigenspace(&t3, 4.0 * PI * PI, 0.0)?;
    out.push(check("first torus shell has 3 modes", shell.len() == 3, format!("{} modes", shell.len())));

    let slab = sample(&slab_spec(), 32)?;
    let h = slab.spacing()[0];
    let d = decompose(&slab)?;
    let ok = d.domains().len() == 2
        && d.domains().iter().all(|x| {
            (x.volume - 0.5).abs() <= 2.0 * h && (x.inradius - 0.25).abs() <= h
        });
    out.push(check(
        "slab: 2 domains, volume 1/2, inradius 1/4",
        ok,
        format!(
            "{} domains, inradii {:?}",
            d.domains().len(),
            d.domains().iter().map(|x| x.inradius).collect::<Vec<_>>()
        ),
    ));

    let cb = sample(&checkerboard_spec(), 32)?;
    let dc = decompose(&cb)?;
    let ok = dc.domains().len() == 4 && dc.domains().iter().all(|x| (x.inradius - 0.25).abs() <= cb.spacing()[0]);
    out.push(check("checkerboard: 4 domains, inradius 1/4", ok, format!("{} domains", dc.domains().len())));

    let slab64 = sample(&slab_spec(), 64)?;
    let d64 = decompose(&slab64)?;
    let q = local_rayleigh(&slab64, &d64, 1, Region::full(slab64.grid()))?
        .quotient
        .unwrap_or(f64::NAN);
    let err = (q / (4.0 * PI * PI) - 1.0).abs();
    out.push(check("slab Rayleigh quotient = 4π² ± 2%", err < 0.02, format!("relative error {err:.2e}")));

    let b3 = ManifoldSpec::dirichlet_box(&[1.0, 1.0, 1.0])?;
    let ground = sample(&EigenfunctionSpec::single_mode(b3, vec![1, 1, 1], 1.0, 0.0)?, 64)?;
    let dg = decompose(&ground)?;
    let q = local_rayleigh(&ground, &dg, 1, Region::full(ground.grid()))?
        .quotient
        .unwrap_or(f64::NAN);
    let err = (q / (3.0 * PI * PI) - 1.0).abs();
    out.push(check("box ground state Rayleigh quotient = 3π² ± 2%", err < 0.02, format!("relative error {err:.2e}")));

    let constant = SampledField::from_values(&t3, &[16, 16, 16], vec![1.0; 4096], 0.0)?;
    let c = build_covering(&constant, 0.25, 7.5, 2.0)?;
    let ok = c
        .cubes()
        .iter()
        .all(|k| (k.mass_scaled / k.mass_inner - 8.0).abs() < 1e-9 && !k.good)
        && c.kappa_delta() == 8;
    out.push(check("constant field: scaled/inner mass = δⁿ", ok, format!("κ_δ = {}", c.kappa_delta())));

    let defect = mean_value_defect(&slab, &[0.0, 0.4, 0.6], 0.2)?;
    out.push(check("odd symmetry: mean-value defect 0", defect < 1e-6, format!("defect {defect:.2e}")));

    Ok(out)
}

/// Run every fixture; an error inside a fixture counts as its failure.
pub fn run_all() -> Vec<FixtureResult> {
    match run() {
        Ok(v) => v,
        Err(e) => vec![check("fixtures", false, e.to_string())],
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_fixtures_pass() {
        for r in super::run_all() {
            assert!(r.pass, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn checkerboard_matches_product_form() {
        let s = super::checkerboard_spec();
        for p in [[0.1, 0.3], [0.25, 0.25], [0.7, 0.45]] {
            let want = (2.0 * super::PI * p[0]).sin() * (2.0 * super::PI * p[1]).sin();
            assert!((s.evaluate(&p).unwrap() - want).abs() < 1e-14);
        }
    }
}
