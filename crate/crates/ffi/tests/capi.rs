use std::ffi::{CStr, CString};
use std::f64::consts::PI;
use std::ptr;

use nodal_lab_ffi::*;

fn last_error() -> String {
    let p = nl_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn slab_json() -> CString {
    CString::new(nodal_lab::fixtures::slab_spec().to_json()).unwrap()
}

#[test]
fn slab_round_trip() {
    unsafe {
        let mut spec = ptr::null_mut();
        assert_eq!(nl_spec_from_json(slab_json().as_ptr(), &mut spec), NlStatus::NL_OK);

        let mut lambda = 0.0;
        assert_eq!(nl_spec_lambda(spec, &mut lambda), NlStatus::NL_OK);
        assert!((lambda - 4.0 * PI * PI).abs() < 1e-12);

        let mut v = 0.0;
        assert_eq!(nl_spec_evaluate(spec, [0.25, 0.1, 0.9].as_ptr(), 3, &mut v), NlStatus::NL_OK);
        assert!((v - 1.0).abs() < 1e-12);

        let mut json = ptr::null_mut();
        assert_eq!(nl_spec_to_json(spec, &mut json), NlStatus::NL_OK);
        let mut again = ptr::null_mut();
        assert_eq!(nl_spec_from_json(json, &mut again), NlStatus::NL_OK);
        assert_eq!(CStr::from_ptr(json).to_str().unwrap(), nodal_lab::fixtures::slab_spec().to_json());
        nl_string_free(json);
        nl_spec_free(again);

        let mut field = ptr::null_mut();
        assert_eq!(nl_field_sample(spec, 32, &mut field), NlStatus::NL_OK);
        let mut len = 0;
        assert_eq!(nl_field_len(field, &mut len), NlStatus::NL_OK);
        assert_eq!(len, 32 * 32 * 32);
        let mut values = vec![0.0; len];
        assert_eq!(nl_field_values(field, values.as_mut_ptr(), len), NlStatus::NL_OK);
        let mass: f64 = values.iter().map(|x| x * x).sum::<f64>() / len as f64;
        assert!((mass - 1.0).abs() < 1e-12);
        assert_eq!(nl_field_values(field, values.as_mut_ptr(), 10), NlStatus::NL_INVALID_ARGUMENT);

        let mut d = ptr::null_mut();
        assert_eq!(nl_decompose(field, &mut d), NlStatus::NL_OK);
        let mut count = 0;
        assert_eq!(nl_decomposition_domain_count(d, &mut count), NlStatus::NL_OK);
        assert_eq!(count, 2);
        let mut signs = Vec::new();
        for i in 0..count {
            let mut info = NlDomainInfo::default();
            assert_eq!(nl_decomposition_domain(d, i, &mut info), NlStatus::NL_OK);
            assert_eq!(info.label as usize, i + 1);
            assert!((info.volume - 0.5).abs() < 1e-12);
            assert!((info.inradius - 0.25).abs() <= 1.0 / 32.0);
            signs.push(info.sign);
        }
        signs.sort();
        assert_eq!(signs, vec![-1, 1]);
        let mut info = NlDomainInfo::default();
        assert_eq!(nl_decomposition_domain(d, 2, &mut info), NlStatus::NL_UNKNOWN_DOMAIN);

        let mut labels = vec![0u32; len];
        assert_eq!(nl_decomposition_labels(d, labels.as_mut_ptr(), len), NlStatus::NL_OK);
        assert!(labels.iter().all(|&l| l == 1 || l == 2));

        let mut c = NlCoveringSummary::default();
        assert_eq!(nl_covering_summary(field, d, 0.125, 32.0, 2.0, &mut c), NlStatus::NL_OK);
        assert_eq!(c.cube_count, 512);
        assert_eq!(c.kappa_delta, 8);
        assert!(c.mass_bound_margin >= -1e-9);
        assert_eq!(c.star_domain, 1);
        assert_eq!(nl_covering_summary(field, d, 0.1, 32.0, 2.0, &mut c), NlStatus::NL_INVALID_ARGUMENT);

        nl_decomposition_free(d);
        nl_field_free(field);
        nl_spec_free(spec);
    }
}

#[test]
fn random_specs_are_seeded() {
    unsafe {
        let sides = [1.0, 1.0, 1.0];
        let target = 4.0 * PI * PI * 3.0;
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(nl_spec_random(NlManifoldKind::NL_TORUS, sides.as_ptr(), 3, target, 0.0, 7, &mut a), NlStatus::NL_OK);
        assert_eq!(nl_spec_random(NlManifoldKind::NL_TORUS, sides.as_ptr(), 3, target, 0.0, 7, &mut b), NlStatus::NL_OK);
        let (mut ja, mut jb) = (ptr::null_mut(), ptr::null_mut());
        nl_spec_to_json(a, &mut ja);
        nl_spec_to_json(b, &mut jb);
        assert_eq!(CStr::from_ptr(ja), CStr::from_ptr(jb));
        nl_string_free(ja);
        nl_string_free(jb);

        let mut n = 0;
        assert_eq!(nl_resolution_for(a, 16.0, &mut n), NlStatus::NL_OK);
        assert!(n >= 16);
        assert_eq!(nl_resolution_for(a, 0.0, &mut n), NlStatus::NL_INVALID_ARGUMENT);
        nl_spec_free(a);
        nl_spec_free(b);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let sides = [1.0, 1.0, 1.0];
        let mut s = ptr::null_mut();
        let st = nl_spec_random(NlManifoldKind::NL_TORUS, sides.as_ptr(), 3, 4.0 * PI * PI * 7.0, 0.0, 0, &mut s);
        assert_eq!(st, NlStatus::NL_EMPTY_EIGENSPACE);
        assert!(s.is_null());
        assert!(last_error().starts_with("no modes at target eigenvalue"), "{}", last_error());

        let bad = [1.0, -1.0, 1.0];
        let st = nl_spec_random(NlManifoldKind::NL_DIRICHLET_BOX, bad.as_ptr(), 3, 30.0, 0.0, 0, &mut s);
        assert_eq!(st, NlStatus::NL_INVALID_ARGUMENT);
        assert!(last_error().starts_with("invalid manifold"));

        assert_eq!(nl_spec_random(NlManifoldKind::NL_TORUS, ptr::null(), 3, 30.0, 0.0, 0, &mut s), NlStatus::NL_NULL_POINTER);
        assert_eq!(last_error(), "sides is null");

        let garbage = CString::new("{\"manifold\": 3}").unwrap();
        assert_eq!(nl_spec_from_json(garbage.as_ptr(), &mut s), NlStatus::NL_PARSE);

        let mut spec = ptr::null_mut();
        assert_eq!(nl_spec_from_json(slab_json().as_ptr(), &mut spec), NlStatus::NL_OK);
        let mut f = ptr::null_mut();
        assert_eq!(nl_field_sample(spec, 2, &mut f), NlStatus::NL_UNDER_RESOLVED);
        assert!(last_error().contains("Nyquist"));
        let mut v = 0.0;
        assert_eq!(nl_spec_evaluate(spec, [0.5, 0.5].as_ptr(), 2, &mut v), NlStatus::NL_INVALID_ARGUMENT);
        assert_eq!(nl_spec_lambda(spec, ptr::null_mut()), NlStatus::NL_NULL_POINTER);
        assert_eq!(nl_spec_lambda(ptr::null(), &mut v), NlStatus::NL_NULL_POINTER);
        nl_spec_free(spec);

        // freeing NULL is a no-op
        nl_spec_free(ptr::null_mut());
        nl_field_free(ptr::null_mut());
        nl_decomposition_free(ptr::null_mut());
        nl_string_free(ptr::null_mut());
    }
}

#[test]
fn errors_are_per_thread() {
    unsafe {
        let mut v = 0.0;
        assert_eq!(nl_spec_lambda(ptr::null(), &mut v), NlStatus::NL_NULL_POINTER);
    }
    let other = std::thread::spawn(|| nl_last_error().is_null()).join().unwrap();
    assert!(other);
    assert_eq!(last_error(), "spec is null");
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(nl_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
