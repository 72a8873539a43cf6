use std::f64::consts::PI;

use nodal_lab::covering::{build_covering, default_delta, find_star_domain, inradius_rule_h, tau, tau_all, CubeCovering};
use nodal_lab::nodal::decompose;
use nodal_lab::sampling::{sample, SampledField};
use nodal_lab::spectral::{random_eigenfunction, EigenfunctionSpec, ManifoldSpec};
use nodal_lab::Error;
use proptest::prelude::*;

fn slab(n: usize) -> SampledField {
    let m = ManifoldSpec::unit_torus(3).unwrap();
    sample(&EigenfunctionSpec::single_mode(m, vec![1, 0, 0], 0.0, 1.0).unwrap(), n).unwrap()
}

/// Mass of the δ-scaled cube by walking unrolled cell indices one at a time
/// and folding each back by hand.
fn oracle_scaled_mass(f: &SampledField, lo: [usize; 3], m: usize, delta: f64) -> f64 {
    let n = f.resolution()[0] as i64;
    let vol = f.cell_volume();
    let half = 0.5 * m as f64 * delta;
    let axis_cells = |l: usize| -> Vec<usize> {
        let c = l as f64 + 0.5 * m as f64;
        let mut out = Vec::new();
        for u in (c - half).floor() as i64 - 2..=(c + half).ceil() as i64 + 2 {
            let centre = u as f64 + 0.5;
            if centre >= c - half - 1e-9 && centre < c + half - 1e-9 {
                out.push(u.rem_euclid(n) as usize);
            }
        }
        out
    };
    let (xs, ys, zs) = (axis_cells(lo[0]), axis_cells(lo[1]), axis_cells(lo[2]));
    let mut total = 0.0;
    for &i in &xs {
        for &j in &ys {
            for &k in &zs {
                let v = f.values()[f.grid().index([i, j, k])];
                total += v * v * vol;
            }
        }
    }
    total
}

#[test]
fn per_cube_masses_match_direct_summation() {
    let f = slab(32);
    let gamma = 8.0 * 1.1;
    let c = build_covering(&f, 0.125, gamma, 2.0).unwrap();
    assert_eq!(c.counts(), &[8, 8, 8]);
    for cube in c.cubes() {
        let lo = [cube.index[0] * 4, cube.index[1] * 4, cube.index[2] * 4];
        let mut inner = 0.0;
        for i in lo[0]..lo[0] + 4 {
            for j in lo[1]..lo[1] + 4 {
                for k in lo[2]..lo[2] + 4 {
                    let v = f.values()[f.grid().index([i, j, k])];
                    inner += v * v * f.cell_volume();
                }
            }
        }
        let scaled = oracle_scaled_mass(&f, lo, 4, 2.0);
        assert!((cube.mass_inner - inner).abs() < 1e-12);
        assert!((cube.mass_scaled - scaled).abs() < 1e-12);
        assert_eq!(cube.good, cube.mass_inner == 0.0 || scaled <= gamma * inner);
    }
}

#[test]
fn wrapping_counts_multiplicity() {
    // δK larger than the torus: 2 cubes of 8 cells per axis, δ = 3 gives a
    // 24-cell window that covers every cell 3 times per axis
    let m = ManifoldSpec::unit_torus(3).unwrap();
    let f = SampledField::from_values(&m, &[16, 16, 16], vec![1.0; 4096], 0.0).unwrap();
    let c = build_covering(&f, 0.5, 100.0, 3.0).unwrap();
    for cube in c.cubes() {
        assert!((cube.mass_scaled - 27.0 * cube.mass_inner).abs() < 1e-9);
        assert!((cube.mass_scaled - 27.0 / 8.0).abs() < 1e-9);
    }
    assert_eq!(c.kappa_delta(), 27);
}

#[test]
fn kappa_is_ceil_delta_cubed_on_the_torus() {
    let m = ManifoldSpec::unit_torus(3).unwrap();
    let f = SampledField::from_values(&m, &[32, 32, 32], vec![1.0; 32768], 0.0).unwrap();
    for (delta, want) in [(2.0, 8), (3.0, 27), (4.0, 64), (2.5, 27)] {
        let c = build_covering(&f, 0.125, 1000.0, delta).unwrap();
        assert!(delta * 0.125 <= 1.0);
        assert_eq!(c.kappa_delta(), want, "δ = {delta}");
    }
}

#[test]
fn all_good_and_no_good() {
    let f = slab(32);
    let d = decompose(&f).unwrap();
    let c = build_covering(&f, 0.125, 1e15, 2.0).unwrap();
    assert!((c.good_set_mass() - 1.0).abs() < 1e-9);
    assert!(tau_all(&c, &f, &d).iter().all(|&t| t == 1.0));
    assert_eq!(find_star_domain(&c, &f, &d).unwrap(), 1);
    let none = c.with_good_flags(&vec![false; c.cubes().len()]).unwrap();
    assert_eq!(tau(&none, &f, &d, 1).unwrap(), 0.0);
    assert!(matches!(find_star_domain(&none, &f, &d), Err(Error::StarDomainMissing)));
    assert!(c.with_good_flags(&[true]).is_err());
}

#[test]
fn tau_of_hand_built_covering() {
    // good: every cube with an even first index
    let f = slab(32);
    let d = decompose(&f).unwrap();
    let base = build_covering(&f, 0.125, 2.0, 2.0).unwrap();
    let flags: Vec<bool> = base.cubes().iter().map(|k| k.index[0] % 2 == 0).collect();
    let c = base.with_good_flags(&flags).unwrap();
    let vol = f.cell_volume();
    for dom in d.domains() {
        let (mut good, mut all) = (0.0, 0.0);
        for (i, (&l, &v)) in d.labels().iter().zip(f.values()).enumerate() {
            if l == dom.label {
                all += v * v * vol;
                if (f.grid().coords(i)[0] / 4) % 2 == 0 {
                    good += v * v * vol;
                }
            }
        }
        let t = tau(&c, &f, &d, dom.label).unwrap();
        assert!((t - good / all).abs() < 1e-12);
        // sin² is symmetric about the slab's mid-plane, which swaps good
        // and bad strips: exactly half
        assert!((t - 0.5).abs() < 1e-9);
    }
    assert!(matches!(tau(&c, &f, &d, 5), Err(Error::UnknownDomain(5))));
}

#[test]
fn symmetric_slab_picks_lower_label() {
    let f = slab(32);
    let d = decompose(&f).unwrap();
    let c = build_covering(&f, 0.125, 4.0 * 8.0, 2.0).unwrap();
    let split = c.domain_split(&f, &d);
    assert!((split[0].0 - split[1].0).abs() < 1e-12);
    assert_eq!(find_star_domain(&c, &f, &d).unwrap(), 1);
}

#[test]
fn default_delta_and_inradius_rule() {
    assert!((default_delta(3) - 16.0 * 3f64.sqrt()).abs() < 1e-15);
    let f = slab(32);
    let d = decompose(&f).unwrap();
    let h = inradius_rule_h(f.grid(), d.max_inradius());
    // 8 · 1/4 exceeds the side: one cube
    assert_eq!(h, 1.0);
    let c = build_covering(&f, h, 4.0, default_delta(3)).unwrap();
    assert_eq!(c.cubes().len(), 1);
    // δK wraps ~28 times per axis: far more than γ = 4 times the mass
    let k = &c.cubes()[0];
    assert!(!k.good);
    assert!(k.mass_scaled <= c.kappa_delta() as f64 * k.mass_inner * (1.0 + 1e-9));
}

#[test]
fn header_and_csv() {
    let f = slab(16);
    let c = build_covering(&f, 0.25, 100.0, 2.0).unwrap();
    let h = c.header();
    assert_eq!(h.cube_count, 64);
    assert_eq!(h.kappa_delta, 8);
    assert!((h.mass_bound_rhs - (1.0 - 8.0 / 100.0)).abs() < 1e-15);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.csv");
    c.write_csv(&p).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.starts_with("i,j,k,mass_inner,mass_scaled,good\n"));
    assert_eq!(text.lines().count(), 65);
}

fn random_field(seed: u64, r2: f64) -> SampledField {
    let m = ManifoldSpec::unit_torus(3).unwrap();
    sample(&random_eigenfunction(&m, 4.0 * PI * PI * r2, 0.0, seed).unwrap(), 24).unwrap()
}

fn check_mass_bound(c: &CubeCovering) -> bool {
    c.mass_bound_margin() >= -1e-9 && (0.0..=1.0 + 1e-9).contains(&c.good_set_mass())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mass_bound_on_random_fields(seed in 0u64..1000, r2 in prop::sample::select(vec![1.0, 2.0, 3.0, 5.0, 6.0]),
                              cells in prop::sample::select(vec![2usize, 3, 4, 6, 8]), delta in 1.5f64..5.0, gamma in 1.5f64..400.0) {
        let f = random_field(seed, r2);
        let c = build_covering(&f, cells as f64 / 24.0, gamma, delta).unwrap();
        prop_assert!(check_mass_bound(&c));
        prop_assert!((c.total_inner_mass() - 1.0).abs() < 1e-9);
        prop_assert!(c.kappa_delta() <= (delta.ceil() as u64 + 1).pow(3));
        // monotone in γ
        let mut last = 0.0;
        for g in [1.5, 4.0, 16.0, 64.0, 256.0, 1024.0] {
            let r = c.reclassify(g).unwrap();
            prop_assert!(check_mass_bound(&r));
            prop_assert!(r.good_set_mass() >= last - 1e-15);
            last = r.good_set_mass();
        }
        // τ is a fraction, and domain splits add up to the domain mass
        let d = decompose(&f).unwrap();
        for (dom, (g, b)) in d.domains().iter().zip(c.domain_split(&f, &d)) {
            prop_assert!((g + b - dom.l2_mass).abs() < 1e-12);
        }
        prop_assert!(tau_all(&c, &f, &d).iter().all(|t| (0.0..=1.0).contains(t)));
    }
}
