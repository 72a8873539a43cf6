//! C ABI over `nodal-lab`.
//!
//! Objects cross the boundary as opaque handles, created by calls such as
//! `nl_spec_random` or `nl_field_sample` and released with the matching
//! `nl_*_free`. Every fallible
//! call returns an [`NlStatus`]; on anything but `NL_OK` the message is
//! available from [`nl_last_error`] on the same thread. Panics are caught at
//! the boundary and reported as `NL_PANIC`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nodal_lab::covering::{build_covering, find_star_domain};
use nodal_lab::nodal::{decompose, NodalDecomposition, Sign};
use nodal_lab::sampling::{resolution_for, sample, SampledField};
use nodal_lab::spectral::{random_eigenfunction, EigenfunctionSpec, ManifoldKind, ManifoldSpec};
use nodal_lab::Error;

/// Status codes. Stable: new codes are only ever appended.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[allow(non_camel_case_types)]
pub enum NlStatus {
    NL_OK = 0,
    NL_NULL_POINTER = 1,
    NL_INVALID_ARGUMENT = 2,
    NL_PARSE = 3,
    NL_IO = 4,
    NL_EMPTY_EIGENSPACE = 5,
    NL_UNDER_RESOLVED = 6,
    NL_ZERO_FIELD = 7,
    NL_UNKNOWN_DOMAIN = 8,
    NL_COMPUTATION = 9,
    NL_PANIC = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[allow(non_camel_case_types)]
pub enum NlManifoldKind {
    NL_TORUS = 0,
    NL_DIRICHLET_BOX = 1,
}

/// Eigenfunction specification (opaque).
pub struct NlSpec(EigenfunctionSpec);

/// Field sampled on a cell-centred grid (opaque).
pub struct NlField(SampledField);

/// Nodal decomposition of a field (opaque).
pub struct NlDecomposition(NodalDecomposition);

/// One nodal domain. `sign` is +1 or −1.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NlDomainInfo {
    pub label: u32,
    pub sign: i32,
    pub cell_count: usize,
    pub volume: f64,
    pub l2_mass: f64,
    /// `INFINITY` when the domain fills the grid.
    pub inradius: f64,
    pub max_value: f64,
}

/// Good/bad cube covering summary.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NlCoveringSummary {
    pub cube_count: usize,
    pub kappa_delta: u64,
    pub good_mass: f64,
    /// `good_mass − (1 − κ_δ/γ)`; never below −1e−9.
    pub mass_bound_margin: f64,
    /// Label of the domain with at least 3/4 of its mass on good cubes, or 0.
    pub star_domain: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', "\\0")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> NlStatus {
    match e.root() {
        Error::InvalidManifold(_)
        | Error::InvalidEigenfunction(_)
        | Error::PointOutside
        | Error::Shape(_)
        | Error::CubeMisaligned
        | Error::CoveringParameter(_)
        | Error::Config(_) => NlStatus::NL_INVALID_ARGUMENT,
        Error::Parse { .. } => NlStatus::NL_PARSE,
        Error::Io { .. } => NlStatus::NL_IO,
        Error::EmptyEigenspace(_) => NlStatus::NL_EMPTY_EIGENSPACE,
        Error::UnderResolved { .. } => NlStatus::NL_UNDER_RESOLVED,
        Error::ZeroField => NlStatus::NL_ZERO_FIELD,
        Error::UnknownDomain(_) => NlStatus::NL_UNKNOWN_DOMAIN,
        _ => NlStatus::NL_COMPUTATION,
    }
}

/// Run `f`, recording any error or panic for `nl_last_error`.
fn guard(f: impl FnOnce() -> Result<(), (NlStatus, String)>) -> NlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NlStatus::NL_OK,
        Ok(Err((s, m))) => {
            set_error(m);
            s
        }
        Err(p) => {
            let m = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {m}"));
            NlStatus::NL_PANIC
        }
    }
}

fn lib<T>(r: nodal_lab::Result<T>) -> Result<T, (NlStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (NlStatus, String) {
    (NlStatus::NL_NULL_POINTER, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (NlStatus, String) {
    (NlStatus::NL_INVALID_ARGUMENT, msg.into())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (NlStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), (NlStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (NlStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn nl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Seeded random eigenfunction at `target` (±`window`).
///
/// # Safety
/// `sides` must point to `dims` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nl_spec_random(
    kind: NlManifoldKind,
    sides: *const f64,
    dims: usize,
    target: f64,
    window: f64,
    seed: u64,
    out: *mut *mut NlSpec,
) -> NlStatus {
    guard(|| {
        let sides = slice(sides, dims, "sides")?;
        let kind = match kind {
            NlManifoldKind::NL_TORUS => ManifoldKind::Torus,
            NlManifoldKind::NL_DIRICHLET_BOX => ManifoldKind::DirichletBox,
        };
        let m = lib(ManifoldSpec::new(kind, sides.to_vec()))?;
        let s = lib(random_eigenfunction(&m, target, window, seed))?;
        put(out, Box::into_raw(Box::new(NlSpec(s))), "out")
    })
}

/// Parse a spec from its JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nl_spec_from_json(json: *const c_char, out: *mut *mut NlSpec) -> NlStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| invalid(format!("json is not UTF-8: {e}")))?;
        let s = lib(EigenfunctionSpec::from_json(text))?;
        put(out, Box::into_raw(Box::new(NlSpec(s))), "out")
    })
}

/// JSON document of a spec. Release with [`nl_string_free`].
///
/// # Safety
/// `spec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nl_spec_to_json(spec: *const NlSpec, out: *mut *mut c_char) -> NlStatus {
    guard(|| {
        let s = deref(spec, "spec")?;
        let c = CString::new(s.0.to_json()).map_err(|e| invalid(e.to_string()))?;
        put(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `spec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nl_spec_lambda(spec: *const NlSpec, out: *mut f64) -> NlStatus {
    guard(|| put(out, deref(spec, "spec")?.0.lambda(), "out"))
}

/// Value at a point given in manifold coordinates.
///
/// # Safety
/// `point` must point to `dims` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nl_spec_evaluate(spec: *const NlSpec, point: *const f64, dims: usize, out: *mut f64) -> NlStatus {
    guard(|| {
        let s = deref(spec, "spec")?;
        let p = slice(point, dims, "point")?;
        put(out, lib(s.0.evaluate(p))?, "out")
    })
}

/// # Safety
/// `spec` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nl_spec_free(spec: *mut NlSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Cells per axis that resolve `spec` at `cells_per_wavelength`.
///
/// # Safety
/// `spec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nl_resolution_for(spec: *const NlSpec, cells_per_wavelength: f64, out: *mut usize) -> NlStatus {
    guard(|| {
        let s = deref(spec, "spec")?;
        if !(cells_per_wavelength > 0.0) {
            return Err(invalid("cells_per_wavelength must be positive"));
        }
        put(out, resolution_for(s.0.manifold(), s.0.lambda(), cells_per_wavelength), "out")
    })
}

/// Sample on `resolution` cells per axis, normalised to unit L².
///
/// # Safety
/// `spec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nl_field_sample(spec: *const NlSpec, resolution: usize, out: *mut *mut NlField) -> NlStatus {
    guard(|| {
        let s = deref(spec, "spec")?;
        let f = lib(sample(&s.0, resolution))?;
        put(out, Box::into_raw(Box::new(NlField(f))), "out")
    })
}

/// Number of cells; the values are laid out with the last axis fastest.
///
/// # Safety
/// `field` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nl_field_len(field: *const NlField, out: *mut usize) -> NlStatus {
    guard(|| put(out, deref(field, "field")?.0.values().len(), "out"))
}

/// Copy up to `len` values into `buf`.
///
/// # Safety
/// `buf` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nl_field_values(field: *const NlField, buf: *mut f64, len: usize) -> NlStatus {
    guard(|| {
        let v = deref(field, "field")?.0.values();
        if len < v.len() {
            return Err(invalid(format!("buffer holds {len} values, field has {}", v.len())));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        Ok(())
    })
}

/// # Safety
/// `field` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nl_field_free(field: *mut NlField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// # Safety
/// `field` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nl_decompose(field: *const NlField, out: *mut *mut NlDecomposition) -> NlStatus {
    guard(|| {
        let f = deref(field, "field")?;
        let d = lib(decompose(&f.0))?;
        put(out, Box::into_raw(Box::new(NlDecomposition(d))), "out")
    })
}

/// # Safety
/// `d` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nl_decomposition_domain_count(d: *const NlDecomposition, out: *mut usize) -> NlStatus {
    guard(|| put(out, deref(d, "decomposition")?.0.domains().len(), "out"))
}

/// Domain `index` (0-based; domains are ordered by size, label = index + 1).
///
/// # Safety
/// `d` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nl_decomposition_domain(d: *const NlDecomposition, index: usize, out: *mut NlDomainInfo) -> NlStatus {
    guard(|| {
        let d = deref(d, "decomposition")?;
        let dom = d
            .0
            .domains()
            .get(index)
            .ok_or_else(|| (NlStatus::NL_UNKNOWN_DOMAIN, format!("no domain at index {index}")))?;
        let info = NlDomainInfo {
            label: dom.label,
            sign: if dom.sign == Sign::Positive { 1 } else { -1 },
            cell_count: dom.cell_count,
            volume: dom.volume,
            l2_mass: dom.l2_mass,
            inradius: dom.inradius,
            max_value: dom.max_value,
        };
        put(out, info, "out")
    })
}

/// Copy the per-cell labels (0 on zero cells) into `buf`.
///
/// # Safety
/// `buf` must have room for `len` labels.
#[no_mangle]
pub unsafe extern "C" fn nl_decomposition_labels(d: *const NlDecomposition, buf: *mut u32, len: usize) -> NlStatus {
    guard(|| {
        let l = deref(d, "decomposition")?.0.labels();
        if len < l.len() {
            return Err(invalid(format!("buffer holds {len} labels, grid has {}", l.len())));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(l.as_ptr(), buf, l.len());
        Ok(())
    })
}

/// # Safety
/// `d` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nl_decomposition_free(d: *mut NlDecomposition) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Cover the field with cubes of side `h`, classify them at `gamma` and
/// `delta`, and look for a star domain.
///
/// # Safety
/// `field` and `d` must be live handles from the same field; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn nl_covering_summary(
    field: *const NlField,
    d: *const NlDecomposition,
    h: f64,
    gamma: f64,
    delta: f64,
    out: *mut NlCoveringSummary,
) -> NlStatus {
    guard(|| {
        let f = deref(field, "field")?;
        let d = deref(d, "decomposition")?;
        if d.0.labels().len() != f.0.values().len() {
            return Err(invalid("decomposition does not belong to this field"));
        }
        let c = lib(build_covering(&f.0, h, gamma, delta))?;
        let star = match find_star_domain(&c, &f.0, &d.0) {
            Ok(l) => l,
            Err(Error::StarDomainMissing) => 0,
            Err(e) => return Err((status_of(&e), e.to_string())),
        };
        let s = NlCoveringSummary {
            cube_count: c.cubes().len(),
            kappa_delta: c.kappa_delta(),
            good_mass: c.good_set_mass(),
            mass_bound_margin: c.mass_bound_margin(),
            star_domain: star,
        };
        put(out, s, "out")
    })
}
