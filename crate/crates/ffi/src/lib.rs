//! C ABI for the camuv discovery engine.
//!
//! Data matrices and graphs are opaque handles created and released through
//! this interface. Every fallible call returns a [`CamuvStatus`]; on failure
//! a description is available from [`camuv_last_error_message`] on the same
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use camuv::{CausalGraph, DataMatrix, Error};

/// Outcome of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CamuvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    /// Degenerate data: zero variance, too few samples, singular fits.
    Data = 5,
    /// Discovery did not converge.
    NoConvergence = 6,
    BufferTooSmall = 7,
    Internal = 8,
}

/// A numeric sample matrix with named columns.
pub struct CamuvData(DataMatrix);

/// An inferred causal graph: directed parent sets and dashed pairs.
pub struct CamuvGraph(CausalGraph);

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CamuvConfig {
    /// Significance level of every independence test.
    pub alpha: f64,
    /// Largest variable set examined when searching for sinks; at least 2.
    pub max_set_size: usize,
    pub seed: u64,
    /// Rows above which independence tests subsample; 0 disables it.
    pub hsic_max_n: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> CamuvStatus {
    match err {
        Error::Io { .. } => CamuvStatus::Io,
        Error::Parse { .. } | Error::Csv(_) | Error::Json(_) | Error::Schema(_) => {
            CamuvStatus::Parse
        }
        Error::DuplicateName(_)
        | Error::NonFinite { .. }
        | Error::Dimension(_)
        | Error::InvalidConfig(_)
        | Error::Cyclic => CamuvStatus::InvalidArgument,
        Error::ZeroVariance(_)
        | Error::TooFewSamples { .. }
        | Error::RankDeficient(_)
        | Error::DegenerateBandwidth(_) => CamuvStatus::Data,
        Error::SweepCap { .. } => CamuvStatus::NoConvergence,
    }
}

struct Failure(CamuvStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CamuvStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(CamuvStatus::InvalidArgument, message.into())
}

/// Runs `f`, recording its error message and turning panics into
/// [`CamuvStatus::Internal`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CamuvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CamuvStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal error".into());
            CamuvStatus::Internal
        }
    }
}

unsafe fn data_ref<'a>(data: *const CamuvData) -> Result<&'a DataMatrix, Failure> {
    data.as_ref().map(|d| &d.0).ok_or_else(|| null("data"))
}

unsafe fn graph_ref<'a>(graph: *const CamuvGraph) -> Result<&'a CausalGraph, Failure> {
    graph.as_ref().map(|g| &g.0).ok_or_else(|| null("graph"))
}

unsafe fn slice<'a>(values: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if values.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(values, len))
}

/// Message for the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn camuv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a headered numeric CSV file, optionally standardizing each column.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn camuv_data_from_csv(
    path: *const c_char,
    standardize: bool,
    out: *mut *mut CamuvData,
) -> CamuvStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| invalid("path is not valid UTF-8"))?;
        let mut data = camuv::dataset::load_csv(path)?;
        if standardize {
            data = data.standardize()?;
        }
        *out = Box::into_raw(Box::new(CamuvData(data)));
        Ok(())
    })
}

/// Builds a matrix from `p` columns of `n` values each, stored one column
/// after another. Columns are named `x1..xp`.
///
/// # Safety
/// `values` must point to `n * p` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn camuv_data_from_values(
    values: *const f64,
    n: usize,
    p: usize,
    standardize: bool,
    out: *mut *mut CamuvData,
) -> CamuvStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n.checked_mul(p).ok_or_else(|| invalid("n * p overflows"))?;
        let values = slice(values, len, "values")?;
        let columns = if n == 0 {
            vec![Vec::new(); p]
        } else {
            values.chunks(n).map(<[f64]>::to_vec).collect()
        };
        let mut data = DataMatrix::from_columns(columns)?;
        if standardize {
            data = data.standardize()?;
        }
        *out = Box::into_raw(Box::new(CamuvData(data)));
        Ok(())
    })
}

/// # Safety
/// `data` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn camuv_data_num_rows(data: *const CamuvData) -> usize {
    data.as_ref().map_or(0, |d| d.0.n())
}

/// # Safety
/// `data` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn camuv_data_num_vars(data: *const CamuvData) -> usize {
    data.as_ref().map_or(0, |d| d.0.p())
}

/// # Safety
/// `data` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn camuv_data_free(data: *mut CamuvData) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Default configuration: alpha 0.01, sets of up to 3 variables, seed 0,
/// subsampling above 2000 rows.
#[no_mangle]
pub extern "C" fn camuv_config_default() -> CamuvConfig {
    let c = camuv::Config::default();
    CamuvConfig {
        alpha: c.alpha,
        max_set_size: c.max_set_size,
        seed: c.seed,
        hsic_max_n: c.hsic_max_n.unwrap_or(0),
    }
}

impl From<&CamuvConfig> for camuv::Config {
    fn from(c: &CamuvConfig) -> Self {
        camuv::Config {
            alpha: c.alpha,
            max_set_size: c.max_set_size,
            seed: c.seed,
            hsic_max_n: (c.hsic_max_n > 0).then_some(c.hsic_max_n),
        }
    }
}

/// Infers a causal graph. A null `config` uses the defaults.
///
/// # Safety
/// `data` must be a live handle, `config` null or valid, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn camuv_discover(
    data: *const CamuvData,
    config: *const CamuvConfig,
    out: *mut *mut CamuvGraph,
) -> CamuvStatus {
    guard(|| {
        let data = data_ref(data)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config = config
            .as_ref()
            .map_or_else(camuv::Config::default, camuv::Config::from);
        let (graph, _) = camuv::discovery::discover(data, &config)?;
        *out = Box::into_raw(Box::new(CamuvGraph(graph)));
        Ok(())
    })
}

/// # Safety
/// `graph` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn camuv_graph_num_vars(graph: *const CamuvGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.p())
}

/// Copies the parents of variable `i` into `buf` in ascending order and
/// stores their number in `len`. If `capacity` is too small, nothing is
/// copied, `len` still receives the required size and
/// [`CamuvStatus::BufferTooSmall`] is returned.
///
/// # Safety
/// `graph` must be a live handle, `len` valid, `buf` valid for `capacity`
/// elements (it may be null when `capacity` is 0).
#[no_mangle]
pub unsafe extern "C" fn camuv_graph_parents(
    graph: *const CamuvGraph,
    i: usize,
    buf: *mut usize,
    capacity: usize,
    len: *mut usize,
) -> CamuvStatus {
    guard(|| {
        let g = graph_ref(graph)?;
        if len.is_null() {
            return Err(null("len"));
        }
        let parents = g
            .parents
            .get(i)
            .ok_or_else(|| invalid(format!("variable {i} out of range")))?;
        *len = parents.len();
        if parents.len() > capacity {
            return Err(Failure(
                CamuvStatus::BufferTooSmall,
                format!("{} parents do not fit in {capacity}", parents.len()),
            ));
        }
        if !parents.is_empty() && buf.is_null() {
            return Err(null("buf"));
        }
        for (k, &j) in parents.iter().enumerate() {
            *buf.add(k) = j;
        }
        Ok(())
    })
}

/// # Safety
/// `graph` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn camuv_graph_num_dashed(graph: *const CamuvGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.dashed.len())
}

/// The `k`-th dashed pair in ascending order, with `i < j`.
///
/// # Safety
/// `graph` must be a live handle; `i` and `j` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn camuv_graph_dashed(
    graph: *const CamuvGraph,
    k: usize,
    i: *mut usize,
    j: *mut usize,
) -> CamuvStatus {
    guard(|| {
        let g = graph_ref(graph)?;
        if i.is_null() || j.is_null() {
            return Err(null("output index"));
        }
        let &(a, b) = g
            .dashed
            .iter()
            .nth(k)
            .ok_or_else(|| invalid(format!("dashed pair {k} out of range")))?;
        *i = a;
        *j = b;
        Ok(())
    })
}

/// The graph as JSON keyed by variable name. Release the string with
/// [`camuv_string_free`]. Returns null on failure.
///
/// # Safety
/// `graph` must be null or a handle from this library.
#[no_mangle]
pub unsafe extern "C" fn camuv_graph_to_json(graph: *const CamuvGraph) -> *mut c_char {
    let mut out = ptr::null_mut();
    guard(|| {
        let g = graph_ref(graph)?;
        out = CString::new(g.to_json().to_string())
            .map_err(|_| Failure(CamuvStatus::Internal, "JSON contains NUL".into()))?
            .into_raw();
        Ok(())
    });
    out
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn camuv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `graph` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn camuv_graph_free(graph: *mut CamuvGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Gamma-approximated HSIC p-value between two vectors of length `n`.
///
/// # Safety
/// `a` and `b` must point to `n` doubles each; `p_value` must be valid.
#[no_mangle]
pub unsafe extern "C" fn camuv_p_hsic(
    a: *const f64,
    b: *const f64,
    n: usize,
    p_value: *mut f64,
) -> CamuvStatus {
    guard(|| {
        let a = slice(a, n, "a")?;
        let b = slice(b, n, "b")?;
        if p_value.is_null() {
            return Err(null("p_value"));
        }
        *p_value = camuv::hsic::p_hsic(a, &[b])?.p_value;
        Ok(())
    })
}
