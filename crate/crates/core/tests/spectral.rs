use std::f64::consts::PI;

use nodal_lab::sampling::sample;
use nodal_lab::spectral::{enumerate_eigenspace, random_eigenfunction, EigenfunctionSpec, ManifoldSpec, Mode};
use nodal_lab::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn brute_shell(r2: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let b = (r2 as f64).sqrt() as i64 + 1;
    for a in -b..=b {
        for c in -b..=b {
            for d in -b..=b {
                let k = vec![a, c, d];
                let neg: Vec<i64> = k.iter().map(|x| -x).collect();
                if a * a + c * c + d * d == r2 && k > neg {
                    out.push(k);
                }
            }
        }
    }
    out.sort();
    out
}

#[test]
fn shells_match_exhaustive_search() {
    let t3 = ManifoldSpec::unit_torus(3).unwrap();
    for r2 in 1..=20 {
        let got = enumerate_eigenspace(&t3, 4.0 * PI * PI * r2 as f64, 0.0).unwrap();
        assert_eq!(got, brute_shell(r2), "|k|² = {r2}");
    }
}

#[test]
fn box_ground_state_and_shell() {
    let b = ManifoldSpec::dirichlet_box(&[1.0, 1.0, 1.0]).unwrap();
    assert_eq!(enumerate_eigenspace(&b, 3.0 * PI * PI, 0.0).unwrap(), vec![vec![1, 1, 1]]);
    let s = EigenfunctionSpec::single_mode(b, vec![1, 1, 1], 1.0, 0.0).unwrap();
    assert!((s.evaluate(&[0.5, 0.5, 0.5]).unwrap() - 1.0).abs() < 1e-15);
    assert!(matches!(s.evaluate(&[1.5, 0.5, 0.5]), Err(Error::PointOutside)));
}

#[test]
fn random_spec_has_one_coefficient_pair_per_mode() {
    let t3 = ManifoldSpec::unit_torus(3).unwrap();
    let lam = 4.0 * PI * PI * 6.0;
    let s = random_eigenfunction(&t3, lam, 0.0, 1).unwrap();
    let ks = enumerate_eigenspace(&t3, lam, 0.0).unwrap();
    assert_eq!(s.modes().len(), ks.len());
    assert_eq!(s.modes().iter().map(|m| m.k.clone()).collect::<Vec<_>>(), ks);
    assert_eq!(s, random_eigenfunction(&t3, lam, 0.0, 1).unwrap());
    assert_ne!(s, random_eigenfunction(&t3, lam, 0.0, 2).unwrap());
    assert!(matches!(
        random_eigenfunction(&t3, 4.0 * PI * PI * 7.0, 0.0, 1),
        Err(Error::EmptyEigenspace(_))
    ));
}

/// Phase reduced exactly in rationals before the trig call.
fn reference(modes: &[(Vec<i64>, f64, f64)], x: &[(i64, i64)]) -> f64 {
    modes
        .iter()
        .map(|(k, a, b)| {
            // x_i = p_i/q, all sharing one denominator
            let q = x[0].1;
            let num: i64 = k.iter().zip(x).map(|(ki, (p, _))| ki * p).sum::<i64>().rem_euclid(q);
            let t = 2.0 * PI * num as f64 / q as f64;
            a * t.cos() + b * t.sin()
        })
        .sum()
}

#[test]
fn two_mode_spec_matches_reference() {
    let t3 = ManifoldSpec::unit_torus(3).unwrap();
    let raw = vec![(vec![1, 2, 0], 0.7, -0.2), (vec![2, 0, -1], -1.1, 0.4)];
    let modes: Vec<Mode> = raw.iter().map(|(k, a, b)| Mode { k: k.clone(), cos: *a, sin: *b }).collect();
    let s = EigenfunctionSpec::new(t3, modes, 20.0 * PI * PI, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let q = 997;
    for _ in 0..10 {
        let x: Vec<(i64, i64)> = (0..3).map(|_| (rng.random_range(-2 * q..3 * q), q)).collect();
        let p: Vec<f64> = x.iter().map(|(a, b)| *a as f64 / *b as f64).collect();
        assert!((s.evaluate(&p).unwrap() - reference(&raw, &x)).abs() < 1e-12);
    }
}

#[test]
fn json_round_trip_is_exact() {
    let t3 = ManifoldSpec::torus(&[1.0, 0.7, 1.3]).unwrap();
    let lam = t3.eigenvalues_in(100.0, 400.0)[3];
    let s = random_eigenfunction(&t3, lam, 0.0, 11).unwrap();
    let back = EigenfunctionSpec::from_json(&s.to_json()).unwrap();
    assert_eq!(s, back);
    assert_eq!(s.to_json(), back.to_json());
}

#[test]
fn finite_difference_laplacian_residual() {
    // ‖Δ_h φ + λφ‖_∞ ≤ K λ² h² ‖φ‖_∞ with K < 1
    let t3 = ManifoldSpec::unit_torus(3).unwrap();
    let mut worst: f64 = 0.0;
    for (r2, n) in [(1.0, 16), (6.0, 24), (14.0, 32), (14.0, 64)] {
        let lam = 4.0 * PI * PI * r2;
        let f = sample(&random_eigenfunction(&t3, lam, 0.0, 5).unwrap(), n).unwrap();
        let g = f.grid();
        let h = f.spacing()[0];
        let v = f.values();
        let mut res: f64 = 0.0;
        for i in 0..g.len() {
            let c = g.coords(i);
            let mut lap = -6.0 * v[i];
            for a in 0..3 {
                for d in [-1, 1] {
                    lap += v[g.index(g.neighbor(c, a, d).unwrap())];
                }
            }
            res = res.max((lap / (h * h) + lam * v[i]).abs());
        }
        let k = res / (lam * lam * h * h * f.max_abs());
        worst = worst.max(k);
    }
    assert!(worst < 1.0, "K = {worst}");
}

#[test]
fn homogeneity_under_scaling() {
    for s in [0.5, 2.0, 3.7] {
        let a = ManifoldSpec::torus(&[1.0, 1.5, 0.8]).unwrap();
        let b = ManifoldSpec::torus(&[s, 1.5 * s, 0.8 * s]).unwrap();
        for k in [[1, 0, 0], [2, -1, 3], [0, 4, 1]] {
            let r = a.eigenvalue_of(&k) / b.eigenvalue_of(&k);
            assert!((r - s * s).abs() < 1e-12 * s * s);
        }
    }
}

proptest! {
    #[test]
    fn torus_evaluation_is_periodic(x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0, axis in 0usize..3, seed in 0u64..50) {
        let t3 = ManifoldSpec::torus(&[1.0, 2.0, 0.5]).unwrap();
        let lam = t3.eigenvalues_in(150.0, 400.0)[0];
        let s = random_eigenfunction(&t3, lam, 0.0, seed).unwrap();
        let p = [x, y, z];
        let mut q = p;
        q[axis] += t3.side_lengths[axis];
        let a = s.evaluate(&p).unwrap();
        let b = s.evaluate(&q).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    }
}
