//! C ABI over `seqkernels`.
//!
//! Objects cross the boundary as opaque handles created by `sqk_*` functions
//! and released with the matching `sqk_*_free`. Every fallible call returns
//! an [`SqkStatus`]; on failure a message is available from
//! [`sqk_last_error`] on the same thread. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use seqkernels::data::{parse_dataset, Dataset};
use seqkernels::gram::{build_gram, load_gram, save_gram, GramMatrix};
use seqkernels::kernels::structure_kernel;
use seqkernels::{Error, KernelConfig, Sequence, SequenceKernel, StructureKernel, SymbolKernel};

/// Result codes of all fallible calls.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Domain = 4,
    Format = 5,
    Io = 6,
    Numerical = 7,
    Unsupported = 8,
    Panic = 9,
}

/// A set of sequences.
pub struct SqkDataset(Dataset);
/// A sequence kernel configuration.
pub struct SqkKernel(SequenceKernel);
/// A Gram matrix with its ids and provenance.
pub struct SqkGram(GramMatrix);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> SqkStatus {
    match err {
        Error::Dimension { .. } => SqkStatus::Dimension,
        Error::Domain(_) | Error::UndefinedNormalization => SqkStatus::Domain,
        Error::Unsupported(_) => SqkStatus::Unsupported,
        Error::InvalidInput(_) | Error::Stratification(_) => SqkStatus::InvalidArgument,
        Error::Format { .. } | Error::Json(_) => SqkStatus::Format,
        Error::Io(_) => SqkStatus::Io,
        Error::Numerical(_) => SqkStatus::Numerical,
    }
}

enum Failure {
    Null(&'static str),
    Invalid(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type FfiResult<T> = std::result::Result<T, Failure>;

fn guard(f: impl FnOnce() -> FfiResult<()>) -> SqkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SqkStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            SqkStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_error(msg);
            SqkStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            SqkStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> FfiResult<&'a T> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &'static str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sqk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next `sqk_*` call on the same thread.
#[no_mangle]
pub extern "C" fn sqk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a SEQT file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqk_dataset_load(path: *const c_char, out: *mut *mut SqkDataset) -> SqkStatus {
    guard(|| {
        let path = c_str(path, "path")?;
        put(out, SqkDataset(parse_dataset(path)?))
    })
}

/// Builds an unlabeled dataset from `n_seqs` sequences of `dim`-dimensional
/// symbols. `lengths[k]` is the symbol count of sequence k and `values`
/// holds all symbols back to back, `dim` values each.
///
/// # Safety
/// `lengths` must point to `n_seqs` values and `values` to
/// `dim * sum(lengths)` values.
#[no_mangle]
pub unsafe extern "C" fn sqk_dataset_from_values(
    n_seqs: usize,
    lengths: *const usize,
    dim: usize,
    values: *const f64,
    out: *mut *mut SqkDataset,
) -> SqkStatus {
    guard(|| {
        if n_seqs == 0 {
            return Err(Failure::Invalid("dataset needs at least one sequence".into()));
        }
        let lengths = std::slice::from_raw_parts(deref(lengths, "lengths")?, n_seqs);
        let total = lengths
            .iter()
            .try_fold(0usize, |acc, &l| acc.checked_add(l))
            .and_then(|t| t.checked_mul(dim))
            .ok_or_else(|| Failure::Invalid("sequence sizes overflow".into()))?;
        let values: &[f64] = if total == 0 {
            &[]
        } else {
            std::slice::from_raw_parts(deref(values, "values")?, total)
        };
        let mut seqs = Vec::with_capacity(n_seqs);
        let mut offset = 0;
        for (k, &len) in lengths.iter().enumerate() {
            let chunk = values[offset..offset + len * dim].to_vec();
            offset += len * dim;
            seqs.push(Sequence::new(k.to_string(), dim, chunk)?);
        }
        put(out, SqkDataset(Dataset::new(seqs, Default::default())?))
    })
}

/// Number of sequences (0 for NULL).
///
/// # Safety
/// `d` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn sqk_dataset_len(d: *const SqkDataset) -> usize {
    d.as_ref().map_or(0, |d| d.0.len())
}

/// # Safety
/// `d` must be NULL or a handle from `sqk_dataset_*`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sqk_dataset_free(d: *mut SqkDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

unsafe fn kernel_out(k: SequenceKernel, out: *mut *mut SqkKernel) -> FfiResult<()> {
    k.validate()?;
    put(out, SqkKernel(k))
}

/// rbf symbol kernel with bandwidth `sigma` times the path structure kernel.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqk_kernel_path(sigma: f64, chv: f64, cd: f64, normalize: bool, out: *mut *mut SqkKernel) -> SqkStatus {
    guard(|| {
        let cfg = KernelConfig::new(SymbolKernel::Rbf { sigma }, StructureKernel::Path { chv, cd });
        kernel_out(cfg.normalized(normalize).into(), out)
    })
}

/// rbf symbol kernel times the exponential structure kernel of width `alpha`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqk_kernel_exponential(sigma: f64, alpha: f64, normalize: bool, out: *mut *mut SqkKernel) -> SqkStatus {
    guard(|| {
        let cfg = KernelConfig::new(SymbolKernel::Rbf { sigma }, StructureKernel::Exponential { alpha });
        kernel_out(cfg.normalized(normalize).into(), out)
    })
}

/// Global alignment kernel with Gaussian local similarity of bandwidth `sigma`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqk_kernel_global_alignment(sigma: f64, normalize: bool, out: *mut *mut SqkKernel) -> SqkStatus {
    guard(|| kernel_out(SequenceKernel::GlobalAlignment { sigma, normalize }, out))
}

/// Any kernel from its JSON description (as stored in Gram files).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqk_kernel_from_json(json: *const c_char, out: *mut *mut SqkKernel) -> SqkStatus {
    guard(|| {
        let k: SequenceKernel = serde_json::from_str(c_str(json, "json")?).map_err(Error::from)?;
        kernel_out(k, out)
    })
}

/// # Safety
/// `k` must be NULL or a handle from `sqk_kernel_*`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sqk_kernel_free(k: *mut SqkKernel) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

/// Kernel value between sequences `i` and `j` (0-based) of a dataset.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqk_kernel_eval(
    k: *const SqkKernel,
    d: *const SqkDataset,
    i: usize,
    j: usize,
    out: *mut f64,
) -> SqkStatus {
    guard(|| {
        let k = deref(k, "kernel")?;
        let d = deref(d, "dataset")?;
        let n = d.0.len();
        if i >= n || j >= n {
            return Err(Failure::Invalid(format!("index ({i}, {j}) out of range for {n} sequences")));
        }
        let v = k.0.eval(&d.0.sequences[i], &d.0.sequences[j])?;
        *out.as_mut().ok_or(Failure::Null("out"))? = v;
        Ok(())
    })
}

/// Path structure kernel value at 1-based positions (i, j).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqk_path_structure_value(i: usize, j: usize, chv: f64, cd: f64, out: *mut f64) -> SqkStatus {
    guard(|| {
        let v = structure_kernel(i, j, &StructureKernel::Path { chv, cd })?;
        *out.as_mut().ok_or(Failure::Null("out"))? = v;
        Ok(())
    })
}

/// Gram matrix of a dataset under a kernel.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sqk_gram_build(k: *const SqkKernel, d: *const SqkDataset, out: *mut *mut SqkGram) -> SqkStatus {
    guard(|| {
        let k = deref(k, "kernel")?;
        let d = deref(d, "dataset")?;
        put(out, SqkGram(build_gram(&d.0.sequences, &k.0)?))
    })
}

/// Side length of the Gram matrix (0 for NULL).
///
/// # Safety
/// `g` must be NULL or a live Gram handle.
#[no_mangle]
pub unsafe extern "C" fn sqk_gram_size(g: *const SqkGram) -> usize {
    g.as_ref().map_or(0, |g| g.0.len())
}

/// Copies the matrix row-major into `buf`, which must hold `size * size`
/// values (`buf_len` is checked).
///
/// # Safety
/// `buf` must point to `buf_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sqk_gram_values(g: *const SqkGram, buf: *mut f64, buf_len: usize) -> SqkStatus {
    guard(|| {
        let g = deref(g, "gram")?;
        let n = g.0.len();
        if buf_len < n * n {
            return Err(Failure::Invalid(format!("buffer holds {buf_len} values, need {}", n * n)));
        }
        if n == 0 {
            return Ok(());
        }
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        let out = std::slice::from_raw_parts_mut(buf, n * n);
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = g.0.values[(i, j)];
            }
        }
        Ok(())
    })
}

/// Writes the binary Gram file format.
///
/// # Safety
/// `g` must be live; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sqk_gram_save(g: *const SqkGram, path: *const c_char) -> SqkStatus {
    guard(|| {
        let g = deref(g, "gram")?;
        save_gram(&g.0, c_str(path, "path")?)?;
        Ok(())
    })
}

/// Reads a binary Gram file.
///
/// # Safety
/// `path` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqk_gram_load(path: *const c_char, out: *mut *mut SqkGram) -> SqkStatus {
    guard(|| put(out, SqkGram(load_gram(c_str(path, "path")?)?)))
}

/// Eigenvalue check: `pass` is set when the smallest eigenvalue is at least
/// `-tol * max(1, largest)`. Any of the out pointers may be NULL.
///
/// # Safety
/// `g` must be live; non-NULL out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn sqk_gram_check_psd(
    g: *const SqkGram,
    tol: f64,
    min_eig: *mut f64,
    max_eig: *mut f64,
    pass: *mut bool,
) -> SqkStatus {
    guard(|| {
        let g = deref(g, "gram")?;
        let r = g.0.check_psd(tol)?;
        if let Some(p) = min_eig.as_mut() {
            *p = r.min_eig;
        }
        if let Some(p) = max_eig.as_mut() {
            *p = r.max_eig;
        }
        if let Some(p) = pass.as_mut() {
            *p = r.pass;
        }
        Ok(())
    })
}

/// # Safety
/// `g` must be NULL or a handle from `sqk_gram_*`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sqk_gram_free(g: *mut SqkGram) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}
