//! C ABI over the transport solver, prepared datasets and trained models.
//!
//! Every function returns an [`AmoslStatus`]; on failure the message is
//! available from [`amosl_last_error_message`] on the same thread. Handles
//! are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::slice;

use amosl::graph_io::{self, GraphIoError, PreparedDataset};
use amosl::ot::{self, GradMode, OtError, TransportPlan};
use amosl::tensor::Matrix;
use amosl::train::{self, Checkpoint, TrainError};

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AmoslStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Solver = 4,
    Io = 5,
    Format = 6,
    Panic = 7,
}

/// Gradient rule of [`amosl_transport_gradients`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AmoslGradMode {
    Envelope = 0,
    KktQp = 1,
}

/// Solved transport instance.
pub struct AmoslTransport {
    cost: Matrix,
    w1: Vec<f64>,
    w2: Vec<f64>,
    plan: TransportPlan,
}

/// Prepared dataset.
pub struct AmoslDataset {
    inner: PreparedDataset,
}

/// Trained model.
pub struct AmoslModel {
    inner: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(AmoslStatus, String);

impl From<OtError> for Failure {
    fn from(e: OtError) -> Self {
        let status = match e {
            OtError::IterationLimit(_) | OtError::DampedNoConvergence(_) => AmoslStatus::Solver,
            _ => AmoslStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<GraphIoError> for Failure {
    fn from(e: GraphIoError) -> Self {
        let status = match e {
            GraphIoError::Io(_) | GraphIoError::MissingFile(_) => AmoslStatus::Io,
            GraphIoError::InvalidArgument(_) => AmoslStatus::InvalidArgument,
            _ => AmoslStatus::Format,
        };
        Failure(status, e.to_string())
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        let status = match &e {
            TrainError::Io { .. } | TrainError::Stream(_) => AmoslStatus::Io,
            TrainError::Checkpoint(_) => AmoslStatus::Format,
            TrainError::Transport(_) => AmoslStatus::Solver,
            _ => AmoslStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AmoslStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            AmoslStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AmoslStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(AmoslStatus::NullPointer, format!("{what} is null"))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, needed: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len < needed {
        return Err(Failure(
            AmoslStatus::BufferTooSmall,
            format!("{what} holds {len} values, {needed} needed"),
        ));
    }
    if needed == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, needed))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn path(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Failure(AmoslStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

unsafe fn instance(
    cost: *const f64,
    n1: usize,
    n2: usize,
    w1: *const f64,
    w2: *const f64,
) -> Result<(Matrix, Vec<f64>, Vec<f64>), Failure> {
    let c = input(cost, n1 * n2, "cost")?;
    let c = Matrix::from_vec(n1, n2, c.to_vec()).map_err(|e| Failure(AmoslStatus::InvalidArgument, e.to_string()))?;
    Ok((c, input(w1, n1, "w1")?.to_vec(), input(w2, n2, "w2")?.to_vec()))
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn amosl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn amosl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Solves the partial transport problem between `w1` (length `n1`) and `w2`
/// (length `n2`) with the row-major `n1×n2` cost.
///
/// # Safety
/// Pointers must reference arrays of the stated lengths; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn amosl_transport_solve(
    cost: *const f64,
    n1: usize,
    n2: usize,
    w1: *const f64,
    w2: *const f64,
    out: *mut *mut AmoslTransport,
) -> AmoslStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (cost, w1, w2) = instance(cost, n1, n2, w1, w2)?;
        let plan = ot::solve_transport(&cost, &w1, &w2)?;
        *out = Box::into_raw(Box::new(AmoslTransport { cost, w1, w2, plan }));
        Ok(())
    })
}

/// # Safety
/// `t` must come from [`amosl_transport_solve`] or be null.
#[no_mangle]
pub unsafe extern "C" fn amosl_transport_free(t: *mut AmoslTransport) {
    if !t.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(t))));
    }
}

/// # Safety
/// `t` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn amosl_transport_value(t: *const AmoslTransport, out: *mut f64) -> AmoslStatus {
    guard(|| {
        let t = handle(t, "transport")?;
        *out.as_mut().ok_or_else(|| null("out"))? = t.plan.value;
        Ok(())
    })
}

/// Copies the row-major optimal flows into `out` (capacity `len`).
///
/// # Safety
/// `t` must be a live handle and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn amosl_transport_flows(t: *const AmoslTransport, out: *mut f64, len: usize) -> AmoslStatus {
    guard(|| {
        let t = handle(t, "transport")?;
        output(out, len, t.plan.flows.len(), "out")?.copy_from_slice(t.plan.flows.data());
        Ok(())
    })
}

/// Dual prices of the row and column capacities and of the total-mass
/// constraint.
///
/// # Safety
/// `t` must be a live handle; `rows` and `cols` must hold `n1` and `n2`
/// values; `total` must be writable.
#[no_mangle]
pub unsafe extern "C" fn amosl_transport_duals(
    t: *const AmoslTransport,
    rows: *mut f64,
    n1: usize,
    cols: *mut f64,
    n2: usize,
    total: *mut f64,
) -> AmoslStatus {
    guard(|| {
        let t = handle(t, "transport")?;
        output(rows, n1, t.plan.row_duals.len(), "rows")?.copy_from_slice(&t.plan.row_duals);
        output(cols, n2, t.plan.col_duals.len(), "cols")?.copy_from_slice(&t.plan.col_duals);
        *total.as_mut().ok_or_else(|| null("total"))? = t.plan.total_dual;
        Ok(())
    })
}

/// Gradients of the transport value with respect to the cost and both
/// weight vectors. `damping` is used only in `KktQp` mode.
///
/// # Safety
/// `t` must be a live handle; the outputs must hold `n1·n2`, `n1` and `n2`
/// values.
#[no_mangle]
pub unsafe extern "C" fn amosl_transport_gradients(
    t: *const AmoslTransport,
    mode: AmoslGradMode,
    damping: f64,
    grad_cost: *mut f64,
    grad_w1: *mut f64,
    grad_w2: *mut f64,
) -> AmoslStatus {
    guard(|| {
        let t = handle(t, "transport")?;
        let mode = match mode {
            AmoslGradMode::Envelope => GradMode::Envelope,
            AmoslGradMode::KktQp => GradMode::kkt_qp(damping)?,
        };
        let g = ot::transport_gradients(&t.plan, &t.cost, &t.w1, &t.w2, mode)?;
        let (n1, n2) = t.cost.shape();
        output(grad_cost, n1 * n2, n1 * n2, "grad_cost")?.copy_from_slice(g.cost.data());
        output(grad_w1, n1, n1, "grad_w1")?.copy_from_slice(&g.w1);
        output(grad_w2, n2, n2, "grad_w2")?.copy_from_slice(&g.w2);
        Ok(())
    })
}

/// Exhaustive optimum for small integral instances.
///
/// # Safety
/// Same layout as [`amosl_transport_solve`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn amosl_brute_force_transport(
    cost: *const f64,
    n1: usize,
    n2: usize,
    w1: *const f64,
    w2: *const f64,
    out: *mut f64,
) -> AmoslStatus {
    guard(|| {
        let (cost, w1, w2) = instance(cost, n1, n2, w1, w2)?;
        let v = ot::brute_force_transport(&cost, &w1, &w2)?;
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// Similarity matrix of the synthesized modality for row-major `n×d`
/// features, written row-major into `out` (`n·n` values).
///
/// # Safety
/// `x` must hold `n·d` values and `out` `n·n` values.
#[no_mangle]
pub unsafe extern "C" fn amosl_synthesize_modality(
    x: *const f64,
    n: usize,
    d: usize,
    seed: u64,
    out: *mut f64,
) -> AmoslStatus {
    guard(|| {
        let x = Matrix::from_vec(n, d, input(x, n * d, "x")?.to_vec())
            .map_err(|e| Failure(AmoslStatus::InvalidArgument, e.to_string()))?;
        let s = graph_io::synthesize_modality(&x, seed);
        output(out, n * n, n * n, "out")?.copy_from_slice(s.data());
        Ok(())
    })
}

/// Loads a prepared dataset file.
///
/// # Safety
/// `file` must be a NUL-terminated path and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn amosl_dataset_load(file: *const c_char, out: *mut *mut AmoslDataset) -> AmoslStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = graph_io::load_prepared(&path(file)?)?;
        *out = Box::into_raw(Box::new(AmoslDataset { inner }));
        Ok(())
    })
}

/// # Safety
/// `ds` must come from [`amosl_dataset_load`] or be null.
#[no_mangle]
pub unsafe extern "C" fn amosl_dataset_free(ds: *mut AmoslDataset) {
    if !ds.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(ds))));
    }
}

/// Number of graphs, classes and node features.
///
/// # Safety
/// `ds` must be a live handle; null outputs are skipped.
#[no_mangle]
pub unsafe extern "C" fn amosl_dataset_info(
    ds: *const AmoslDataset,
    graphs: *mut usize,
    classes: *mut usize,
    features: *mut usize,
) -> AmoslStatus {
    guard(|| {
        let ds = &handle(ds, "dataset")?.inner;
        for (p, v) in [
            (graphs, ds.graphs.len()),
            (classes, ds.num_classes),
            (features, ds.feature_dim),
        ] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Loads a model checkpoint.
///
/// # Safety
/// `file` must be a NUL-terminated path and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn amosl_model_load(file: *const c_char, out: *mut *mut AmoslModel) -> AmoslStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = train::load_checkpoint(&path(file)?)?;
        *out = Box::into_raw(Box::new(AmoslModel { inner }));
        Ok(())
    })
}

/// # Safety
/// `m` must come from [`amosl_model_load`] or be null.
#[no_mangle]
pub unsafe extern "C" fn amosl_model_free(m: *mut AmoslModel) {
    if !m.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(m))));
    }
}

/// Class probabilities of graph `index`, written into `probs` (capacity
/// `len`, at least the number of classes).
///
/// # Safety
/// Handles must be live and `probs` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn amosl_model_predict(
    m: *const AmoslModel,
    ds: *const AmoslDataset,
    index: usize,
    probs: *mut f64,
    len: usize,
) -> AmoslStatus {
    guard(|| {
        let ckpt = &handle(m, "model")?.inner;
        let ds = &handle(ds, "dataset")?.inner;
        let sample = ds.graphs.get(index).ok_or_else(|| {
            Failure(
                AmoslStatus::InvalidArgument,
                format!("graph {index} out of {}", ds.graphs.len()),
            )
        })?;
        let p = train::predict_graph(ckpt, sample)?;
        output(probs, len, p.len(), "probs")?.copy_from_slice(&p);
        Ok(())
    })
}

/// Fraction of graphs whose most probable class is their label.
///
/// # Safety
/// Handles must be live and `accuracy` writable.
#[no_mangle]
pub unsafe extern "C" fn amosl_model_evaluate(
    m: *const AmoslModel,
    ds: *const AmoslDataset,
    accuracy: *mut f64,
) -> AmoslStatus {
    guard(|| {
        let ckpt = &handle(m, "model")?.inner;
        let ds = &handle(ds, "dataset")?.inner;
        let s = train::evaluate_checkpoint(ckpt, ds)?;
        *accuracy.as_mut().ok_or_else(|| null("accuracy"))? = s.accuracy;
        Ok(())
    })
}
