//! C interface to `latmap`.
//!
//! Models and compiled instances are opaque handles owned by the caller and
//! released with the matching `_free` function. Every fallible call returns a
//! [`LatmapStatus`]; on failure [`latmap_last_error`] describes what happened.
//! Strings handed out by the library are released with [`latmap_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use latmap::backend::{compile_2d_ising, compile_target, verify_instance, Backend, CompiledInstance, Ising2d, Mode};
use latmap::engine::{EngineOptions, Prepared};
use latmap::error::Error;
use latmap::model::{SpinModel, Term};

/// Opaque spin model.
pub struct LatmapModel(SpinModel);

/// Opaque compiled lattice instance.
pub struct LatmapInstance(CompiledInstance);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatmapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidModel = 3,
    Unsupported = 4,
    TooLarge = 5,
    VerificationFailed = 6,
    Json = 7,
    Panic = 8,
    Other = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatmapBackend {
    Lgt4d = 0,
    Lgt3dBoundary = 1,
    Lgt3d = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatmapMode {
    Direct = 0,
    Superclique = 1,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LatmapStatus {
    match e {
        Error::InvalidArgument(_) | Error::Config(_) | Error::InvalidGeometry(_) | Error::OpenLoop(_) => {
            LatmapStatus::InvalidArgument
        }
        Error::InvalidModel(_) | Error::InfiniteCoupling | Error::Frustrated(_) => LatmapStatus::InvalidModel,
        Error::Unsupported(_) | Error::EndsBound { .. } => LatmapStatus::Unsupported,
        Error::TooLarge { .. } | Error::CapExceeded(_) => LatmapStatus::TooLarge,
        Error::Verification(_) | Error::Disagreement(_) | Error::PenaltyTooLarge { .. } => LatmapStatus::VerificationFailed,
        Error::Json(_) => LatmapStatus::Json,
        _ => LatmapStatus::Other,
    }
}

enum Fail {
    Null,
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Fail {
        Fail::Lib(e)
    }
}

/// Runs `f`, converting errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LatmapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LatmapStatus::Ok,
        Ok(Err(Fail::Null)) => {
            set_error("null pointer argument".into());
            LatmapStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            LatmapStatus::Panic
        }
    }
}

unsafe fn reference<'a, T>(p: *const T) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null)
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null)
}

unsafe fn string_arg(p: *const c_char) -> Result<String, Fail> {
    if p.is_null() {
        return Err(Fail::Null);
    }
    CStr::from_ptr(p).to_str().map(str::to_owned).map_err(|_| Fail::Lib(Error::InvalidArgument("string is not UTF-8".into())))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null);
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn give_string(s: String) -> *mut c_char {
    CString::new(s).expect("JSON has no nul bytes").into_raw()
}

/// Message describing the most recent failure on this thread, or null.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn latmap_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library that has not been
/// freed.
#[no_mangle]
pub unsafe extern "C" fn latmap_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// A model of `num_spins` binary spins and no terms.
///
/// # Safety
/// `out_model` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn latmap_model_new_binary(num_spins: usize, out_model: *mut *mut LatmapModel) -> LatmapStatus {
    guard(|| {
        *out(out_model)? = Box::into_raw(Box::new(LatmapModel(SpinModel::binary(num_spins))));
        Ok(())
    })
}

/// Parses a model from its JSON form.
///
/// # Safety
/// `json` must be a nul-terminated string and `out_model` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn latmap_model_from_json(json: *const c_char, out_model: *mut *mut LatmapModel) -> LatmapStatus {
    guard(|| {
        let m = SpinModel::from_json_str(&string_arg(json)?)?;
        *out(out_model)? = Box::into_raw(Box::new(LatmapModel(m)));
        Ok(())
    })
}

/// Appends the term `-j * (-1)^(sum of support spins)`.
///
/// # Safety
/// `model` must be a live handle and `support` must point to `len` values.
#[no_mangle]
pub unsafe extern "C" fn latmap_model_add_parity(
    model: *mut LatmapModel,
    support: *const usize,
    len: usize,
    j: f64,
) -> LatmapStatus {
    guard(|| {
        let m = &mut out(model)?.0;
        let s = slice_arg(support, len)?.to_vec();
        if let Some(&bad) = s.iter().find(|&&i| i >= m.num_spins) {
            return Err(Error::InvalidArgument(format!("spin {bad} out of range")).into());
        }
        m.push(Term::parity(s, j));
        if let Err(e) = m.validate() {
            m.terms.pop();
            return Err(e.into());
        }
        Ok(())
    })
}

/// Number of spins, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn latmap_model_num_spins(model: *const LatmapModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.num_spins)
}

/// JSON form of a model; release it with `latmap_string_free`.
///
/// # Safety
/// `model` must be a live handle and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn latmap_model_to_json(model: *const LatmapModel, out_json: *mut *mut c_char) -> LatmapStatus {
    guard(|| {
        let s = reference(model)?.0.to_json_string();
        *out(out_json)? = give_string(s);
        Ok(())
    })
}

/// `ln Z(beta)` by exact enumeration.
///
/// # Safety
/// `model` must be a live handle and `out_log_z` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn latmap_log_z(model: *const LatmapModel, beta: f64, out_log_z: *mut f64) -> LatmapStatus {
    guard(|| {
        let m = &reference(model)?.0;
        *out(out_log_z)? = Prepared::new(m, &[], &EngineOptions::default())?.log_z(beta)?;
        Ok(())
    })
}

/// Releases a model.
///
/// # Safety
/// `model` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn latmap_model_free(model: *mut LatmapModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Compiles a target model onto a lattice.
///
/// # Safety
/// `target` must be a live handle, `out_instance` a valid pointer, and
/// `backend` and `mode` declared enumerators.
#[no_mangle]
pub unsafe extern "C" fn latmap_compile(
    target: *const LatmapModel,
    backend: LatmapBackend,
    mode: LatmapMode,
    out_instance: *mut *mut LatmapInstance,
) -> LatmapStatus {
    guard(|| {
        let t = &reference(target)?.0;
        let backend = match backend {
            LatmapBackend::Lgt4d => Backend::Lgt4d,
            LatmapBackend::Lgt3dBoundary => Backend::Lgt3dBoundary,
            LatmapBackend::Lgt3d => Backend::Lgt3d,
        };
        let mode = match mode {
            LatmapMode::Direct => Mode::Direct,
            LatmapMode::Superclique => Mode::Superclique,
        };
        let inst = compile_target(t, backend, mode)?;
        *out(out_instance)? = Box::into_raw(Box::new(LatmapInstance(inst)));
        Ok(())
    })
}

/// Compiles an `n` by `m` Ising grid with uniform bond `j` and field `h`,
/// and also returns its target model when `out_target` is not null.
///
/// # Safety
/// `out_instance` must be a valid pointer; `out_target` may be null.
#[no_mangle]
pub unsafe extern "C" fn latmap_compile_ising2d(
    n: usize,
    m: usize,
    j: f64,
    h: f64,
    out_instance: *mut *mut LatmapInstance,
    out_target: *mut *mut LatmapModel,
) -> LatmapStatus {
    guard(|| {
        let g = Ising2d::uniform(n, m, j, h);
        let inst = compile_2d_ising(&g)?;
        let slot = out(out_instance)?;
        if let Some(t) = out_target.as_mut() {
            *t = Box::into_raw(Box::new(LatmapModel(g.target()?)));
        }
        *slot = Box::into_raw(Box::new(LatmapInstance(inst)));
        Ok(())
    })
}

/// Lattice extents of an instance.
///
/// # Safety
/// `instance` must be a live handle and `out_dims` must point to 4 writable values.
#[no_mangle]
pub unsafe extern "C" fn latmap_instance_dims(instance: *const LatmapInstance, out_dims: *mut usize) -> LatmapStatus {
    guard(|| {
        let d = reference(instance)?.0.dims();
        if out_dims.is_null() {
            return Err(Fail::Null);
        }
        std::slice::from_raw_parts_mut(out_dims, 4).copy_from_slice(&d);
        Ok(())
    })
}

/// Declared relation `Z_instance = 2^pow2 e^(-beta offset) Z_target`.
///
/// # Safety
/// `instance` must be a live handle; the output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn latmap_instance_accounting(
    instance: *const LatmapInstance,
    out_pow2: *mut i64,
    out_offset: *mut f64,
) -> LatmapStatus {
    guard(|| {
        let a = &reference(instance)?.0.accounting;
        *out(out_pow2)? = a.pow2;
        *out(out_offset)? = a.offset;
        Ok(())
    })
}

/// The full lattice model of an instance.
///
/// # Safety
/// `instance` must be a live handle and `out_model` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn latmap_instance_model(
    instance: *const LatmapInstance,
    out_model: *mut *mut LatmapModel,
) -> LatmapStatus {
    guard(|| {
        let m = reference(instance)?.0.model()?;
        *out(out_model)? = Box::into_raw(Box::new(LatmapModel(m)));
        Ok(())
    })
}

/// JSON form of an instance; release it with `latmap_string_free`.
///
/// # Safety
/// `instance` must be a live handle and `out_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn latmap_instance_to_json(instance: *const LatmapInstance, out_json: *mut *mut c_char) -> LatmapStatus {
    guard(|| {
        let s = reference(instance)?.0.to_json_string();
        *out(out_json)? = give_string(s);
        Ok(())
    })
}

/// Parses an instance from its JSON form.
///
/// # Safety
/// `json` must be a nul-terminated string and `out_instance` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn latmap_instance_from_json(json: *const c_char, out_instance: *mut *mut LatmapInstance) -> LatmapStatus {
    guard(|| {
        let inst = CompiledInstance::from_json_str(&string_arg(json)?)?;
        *out(out_instance)? = Box::into_raw(Box::new(LatmapInstance(inst)));
        Ok(())
    })
}

/// Releases an instance.
///
/// # Safety
/// `instance` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn latmap_instance_free(instance: *mut LatmapInstance) {
    if !instance.is_null() {
        drop(Box::from_raw(instance));
    }
}

/// Checks an instance against a target at the given inverse temperatures.
/// Returns `VerificationFailed` when the check fails; `out_max_residual`
/// receives the largest residual either way, if not null.
///
/// # Safety
/// Handles must be live and `betas` must point to `num_betas` values.
#[no_mangle]
pub unsafe extern "C" fn latmap_verify(
    target: *const LatmapModel,
    instance: *const LatmapInstance,
    betas: *const f64,
    num_betas: usize,
    tol: f64,
    out_max_residual: *mut f64,
) -> LatmapStatus {
    guard(|| {
        let r = verify_instance(
            &reference(target)?.0,
            &reference(instance)?.0,
            slice_arg(betas, num_betas)?,
            tol,
            &EngineOptions::default(),
        )?;
        if let Some(x) = out_max_residual.as_mut() {
            *x = r.max_residual;
        }
        r.into_result()?;
        Ok(())
    })
}
