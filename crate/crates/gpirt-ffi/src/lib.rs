// The C surface takes raw pointers by design; every dereference is
// null-checked and panics are caught at the boundary.
#![allow(clippy::not_unsafe_ptr_arg_deref)]

//! C ABI over the core library.
//!
//! Conventions: handles are opaque pointers created by `_new`/`_load`
//! functions and released by the matching `_free`; every fallible call
//! returns a [`GpirtStatus`] and records a thread-local message readable
//! via [`gpirt_last_error_message`] when it fails. Passing a null handle
//! returns `NullArgument`; panics are caught at the boundary and surface
//! as `Internal`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use gpirt::adaptive::{select_item, update_belief, BeliefGrid};
use gpirt::gp::ThetaGrid;
use gpirt::io::chain_store;
use gpirt::io::csv_data;
use gpirt::model::{Coding, GpirtConfig, Hyperpriors, ResponseMatrix};
use gpirt::sampler::{fix_reflection, run_chain, Chain};
use gpirt::scoring::{auto_anchor, estimate_irfs, predict_prob, theta_estimates, IRFTable};
use gpirt::GpirtError;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpirtStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Input data or options were rejected.
    InvalidArgument = 3,
    /// File could not be read or written.
    IoError = 4,
    /// A numerical routine failed.
    NumericalError = 5,
    /// Unexpected internal failure.
    Internal = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &GpirtError) -> GpirtStatus {
    match err {
        GpirtError::Io(_) => GpirtStatus::IoError,
        GpirtError::NotPositiveDefinite { .. }
        | GpirtError::DegeneratePosterior
        | GpirtError::InvalidState(_) => GpirtStatus::NumericalError,
        _ => GpirtStatus::InvalidArgument,
    }
}

fn fail(err: GpirtError) -> GpirtStatus {
    let status = status_of(&err);
    set_error(&err.to_string());
    status
}

/// Run a closure, converting panics into `Internal`.
fn guarded<F: FnOnce() -> GpirtStatus>(f: F) -> GpirtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            GpirtStatus::Internal
        }
    }
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, GpirtStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(GpirtStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not UTF-8");
        GpirtStatus::InvalidUtf8
    })
}

macro_rules! require {
    ($ptr:expr) => {
        match unsafe { $ptr.as_ref() } {
            Some(r) => r,
            None => {
                set_error("null handle");
                return GpirtStatus::NullArgument;
            }
        }
    };
}

macro_rules! require_out {
    ($ptr:expr) => {
        match unsafe { $ptr.as_mut() } {
            Some(r) => r,
            None => {
                set_error("null output pointer");
                return GpirtStatus::NullArgument;
            }
        }
    };
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gpirt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn gpirt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// A loaded response matrix.
pub struct GpirtMatrix {
    inner: ResponseMatrix,
}

/// A fitted (or loaded) sampler chain.
pub struct GpirtChain {
    inner: Chain,
}

/// Posterior-mean item response functions on a grid.
pub struct GpirtIrfTable {
    inner: IRFTable,
}

/// One adaptive-testing session over a fixed response-function table.
pub struct GpirtCatSession {
    irfs: IRFTable,
    belief: BeliefGrid,
    remaining: Vec<usize>,
}

/// Load, recode, and validate a response CSV. `zero_one_coding` selects
/// the 0/1 input coding instead of -1/+1.
#[no_mangle]
pub extern "C" fn gpirt_matrix_load_csv(
    path: *const c_char,
    zero_one_coding: bool,
    out: *mut *mut GpirtMatrix,
) -> GpirtStatus {
    guarded(|| {
        let out = require_out!(out);
        let path = match unsafe { cstr_arg(path) } {
            Ok(p) => p,
            Err(status) => return status,
        };
        let coding = if zero_one_coding {
            Coding::ZeroOne
        } else {
            Coding::PlusMinus
        };
        match csv_data::load_responses_csv(Path::new(path), coding) {
            Ok(matrix) => {
                *out = Box::into_raw(Box::new(GpirtMatrix { inner: matrix }));
                GpirtStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Respondent and item counts of a matrix.
#[no_mangle]
pub extern "C" fn gpirt_matrix_dims(
    matrix: *const GpirtMatrix,
    n_respondents: *mut usize,
    n_items: *mut usize,
) -> GpirtStatus {
    let matrix = require!(matrix);
    let nr = require_out!(n_respondents);
    let ni = require_out!(n_items);
    *nr = matrix.inner.n_respondents();
    *ni = matrix.inner.n_items();
    GpirtStatus::Ok
}

#[no_mangle]
pub extern "C" fn gpirt_matrix_free(matrix: *mut GpirtMatrix) {
    if !matrix.is_null() {
        drop(unsafe { Box::from_raw(matrix) });
    }
}

/// Sampler options. Obtain defaults from [`gpirt_fit_options_default`]
/// and override fields as needed.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GpirtFitOptions {
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Polynomial degree of the prior mean: 0, 1, or 2.
    pub mean_degree: usize,
    pub grid_lower: f64,
    pub grid_upper: f64,
    pub grid_step: f64,
    pub mh_proposal_sd: f64,
}

/// Fill `out` with the default sampler options.
#[no_mangle]
pub extern "C" fn gpirt_fit_options_default(out: *mut GpirtFitOptions) -> GpirtStatus {
    let out = require_out!(out);
    let config = GpirtConfig::default();
    *out = GpirtFitOptions {
        seed: config.seed,
        iterations: config.n_iterations,
        burn_in: config.burn_in,
        thin: config.thin,
        mean_degree: config.mean_degree,
        grid_lower: config.grid.lower,
        grid_upper: config.grid.upper,
        grid_step: config.grid.step,
        mh_proposal_sd: config.mh_proposal_sd,
    };
    GpirtStatus::Ok
}

fn config_from_options(options: &GpirtFitOptions) -> Result<GpirtConfig, GpirtError> {
    let config = GpirtConfig {
        grid: ThetaGrid::new(options.grid_lower, options.grid_upper, options.grid_step)?,
        mean_degree: options.mean_degree,
        beta_prior: Hyperpriors::for_degree(options.mean_degree),
        n_iterations: options.iterations,
        burn_in: options.burn_in,
        thin: options.thin,
        seed: options.seed,
        mh_proposal_sd: options.mh_proposal_sd,
        ..GpirtConfig::default()
    };
    config.validate()?;
    Ok(config)
}

/// Run the full sampler on a matrix.
#[no_mangle]
pub extern "C" fn gpirt_fit(
    matrix: *const GpirtMatrix,
    options: *const GpirtFitOptions,
    out: *mut *mut GpirtChain,
) -> GpirtStatus {
    guarded(|| {
        let matrix = require!(matrix);
        let options = require!(options);
        let out = require_out!(out);
        let config = match config_from_options(options) {
            Ok(c) => c,
            Err(e) => return fail(e),
        };
        match run_chain(&matrix.inner, &config) {
            Ok(chain) => {
                *out = Box::into_raw(Box::new(GpirtChain { inner: chain }));
                GpirtStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Write a chain artifact.
#[no_mangle]
pub extern "C" fn gpirt_chain_save(chain: *const GpirtChain, path: *const c_char) -> GpirtStatus {
    guarded(|| {
        let chain = require!(chain);
        let path = match unsafe { cstr_arg(path) } {
            Ok(p) => p,
            Err(status) => return status,
        };
        match chain_store::write_chain(&chain.inner, Path::new(path)) {
            Ok(()) => GpirtStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Read a chain artifact.
#[no_mangle]
pub extern "C" fn gpirt_chain_load(path: *const c_char, out: *mut *mut GpirtChain) -> GpirtStatus {
    guarded(|| {
        let out = require_out!(out);
        let path = match unsafe { cstr_arg(path) } {
            Ok(p) => p,
            Err(status) => return status,
        };
        match chain_store::read_chain(Path::new(path)) {
            Ok(chain) => {
                *out = Box::into_raw(Box::new(GpirtChain { inner: chain }));
                GpirtStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Stored state count and respondent count of a chain.
#[no_mangle]
pub extern "C" fn gpirt_chain_dims(
    chain: *const GpirtChain,
    n_states: *mut usize,
    n_respondents: *mut usize,
    n_items: *mut usize,
) -> GpirtStatus {
    let chain = require!(chain);
    let ns = require_out!(n_states);
    let nr = require_out!(n_respondents);
    let ni = require_out!(n_items);
    *ns = chain.inner.n_states();
    *nr = chain.inner.respondent_ids.len();
    *ni = chain.inner.item_ids.len();
    GpirtStatus::Ok
}

fn oriented(chain: &Chain, reflect: bool) -> Result<Chain, GpirtError> {
    if !reflect {
        return Ok(chain.clone());
    }
    let anchor = auto_anchor(chain)?;
    Ok(fix_reflection(chain, &anchor)?.0)
}

/// Posterior mean and sample standard deviation of every latent score.
/// Both output buffers must hold at least the respondent count; `reflect`
/// resolves the reflective ambiguity first.
#[no_mangle]
pub extern "C" fn gpirt_chain_theta(
    chain: *const GpirtChain,
    reflect: bool,
    out_means: *mut f64,
    out_sds: *mut f64,
) -> GpirtStatus {
    guarded(|| {
        let chain = require!(chain);
        if out_means.is_null() || out_sds.is_null() {
            set_error("null output buffer");
            return GpirtStatus::NullArgument;
        }
        let oriented_chain = match oriented(&chain.inner, reflect) {
            Ok(c) => c,
            Err(e) => return fail(e),
        };
        match theta_estimates(&oriented_chain) {
            Ok((means, sds)) => {
                unsafe {
                    std::ptr::copy_nonoverlapping(means.as_ptr(), out_means, means.len());
                    std::ptr::copy_nonoverlapping(sds.as_ptr(), out_sds, sds.len());
                }
                GpirtStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub extern "C" fn gpirt_chain_free(chain: *mut GpirtChain) {
    if !chain.is_null() {
        drop(unsafe { Box::from_raw(chain) });
    }
}

/// Posterior-mean response functions of a chain; `reflect` resolves the
/// reflective ambiguity first.
#[no_mangle]
pub extern "C" fn gpirt_estimate_irfs(
    chain: *const GpirtChain,
    reflect: bool,
    out: *mut *mut GpirtIrfTable,
) -> GpirtStatus {
    guarded(|| {
        let chain = require!(chain);
        let out = require_out!(out);
        let oriented_chain = match oriented(&chain.inner, reflect) {
            Ok(c) => c,
            Err(e) => return fail(e),
        };
        match estimate_irfs(&oriented_chain) {
            Ok(irfs) => {
                *out = Box::into_raw(Box::new(GpirtIrfTable { inner: irfs }));
                GpirtStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Write a response-function table as CSV.
#[no_mangle]
pub extern "C" fn gpirt_irf_save_csv(
    irfs: *const GpirtIrfTable,
    path: *const c_char,
) -> GpirtStatus {
    guarded(|| {
        let irfs = require!(irfs);
        let path = match unsafe { cstr_arg(path) } {
            Ok(p) => p,
            Err(status) => return status,
        };
        match csv_data::write_irf_csv(&irfs.inner, Path::new(path)) {
            Ok(()) => GpirtStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Read a response-function table written by `gpirt_irf_save_csv`.
#[no_mangle]
pub extern "C" fn gpirt_irf_load_csv(
    path: *const c_char,
    out: *mut *mut GpirtIrfTable,
) -> GpirtStatus {
    guarded(|| {
        let out = require_out!(out);
        let path = match unsafe { cstr_arg(path) } {
            Ok(p) => p,
            Err(status) => return status,
        };
        match csv_data::read_irf_csv(Path::new(path)) {
            Ok(irfs) => {
                *out = Box::into_raw(Box::new(GpirtIrfTable { inner: irfs }));
                GpirtStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Item count and grid size of a table.
#[no_mangle]
pub extern "C" fn gpirt_irf_dims(
    irfs: *const GpirtIrfTable,
    n_items: *mut usize,
    grid_size: *mut usize,
) -> GpirtStatus {
    let irfs = require!(irfs);
    let ni = require_out!(n_items);
    let gs = require_out!(grid_size);
    *ni = irfs.inner.n_items();
    *gs = irfs.inner.grid().len();
    GpirtStatus::Ok
}

/// Positive-response probability for one item at a latent score, by
/// linear interpolation on the grid.
#[no_mangle]
pub extern "C" fn gpirt_irf_prob(
    irfs: *const GpirtIrfTable,
    item: usize,
    theta: f64,
    out: *mut f64,
) -> GpirtStatus {
    guarded(|| {
        let irfs = require!(irfs);
        let out = require_out!(out);
        if item >= irfs.inner.n_items() {
            set_error("item index out of range");
            return GpirtStatus::InvalidArgument;
        }
        match predict_prob(&irfs.inner, theta, item) {
            Ok(p) => {
                *out = p;
                GpirtStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

#[no_mangle]
pub extern "C" fn gpirt_irf_free(irfs: *mut GpirtIrfTable) {
    if !irfs.is_null() {
        drop(unsafe { Box::from_raw(irfs) });
    }
}

/// Open an adaptive session over a table. The belief starts at the
/// standard-normal prior and every item is available once.
#[no_mangle]
pub extern "C" fn gpirt_cat_new(
    irfs: *const GpirtIrfTable,
    out: *mut *mut GpirtCatSession,
) -> GpirtStatus {
    guarded(|| {
        let irfs = require!(irfs);
        let out = require_out!(out);
        let table = irfs.inner.clone();
        let belief = BeliefGrid::standard_normal_prior(Arc::clone(table.grid()));
        let remaining = (0..table.n_items()).collect();
        *out = Box::into_raw(Box::new(GpirtCatSession {
            irfs: table,
            belief,
            remaining,
        }));
        GpirtStatus::Ok
    })
}

/// Index of the highest-information item not yet administered.
#[no_mangle]
pub extern "C" fn gpirt_cat_select(
    session: *const GpirtCatSession,
    out_item: *mut usize,
) -> GpirtStatus {
    guarded(|| {
        let session = require!(session);
        let out = require_out!(out_item);
        match select_item(&session.remaining, &session.irfs, &session.belief) {
            Ok(item) => {
                *out = item;
                GpirtStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Record a response (+1 or -1) to an item and update the belief. The
/// item leaves the available set.
#[no_mangle]
pub extern "C" fn gpirt_cat_respond(
    session: *mut GpirtCatSession,
    item: usize,
    response: i8,
) -> GpirtStatus {
    guarded(|| {
        let session = match unsafe { session.as_mut() } {
            Some(s) => s,
            None => {
                set_error("null handle");
                return GpirtStatus::NullArgument;
            }
        };
        if !session.remaining.contains(&item) {
            set_error("item already administered or out of range");
            return GpirtStatus::InvalidArgument;
        }
        match update_belief(&session.belief, &session.irfs, item, response) {
            Ok(belief) => {
                session.belief = belief;
                session.remaining.retain(|&i| i != item);
                GpirtStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Posterior mean and standard deviation of the session belief.
#[no_mangle]
pub extern "C" fn gpirt_cat_estimate(
    session: *const GpirtCatSession,
    out_mean: *mut f64,
    out_sd: *mut f64,
) -> GpirtStatus {
    let session = require!(session);
    let mean = require_out!(out_mean);
    let sd = require_out!(out_sd);
    *mean = session.belief.posterior_mean();
    *sd = session.belief.posterior_sd();
    GpirtStatus::Ok
}

#[no_mangle]
pub extern "C" fn gpirt_cat_free(session: *mut GpirtCatSession) {
    if !session.is_null() {
        drop(unsafe { Box::from_raw(session) });
    }
}
