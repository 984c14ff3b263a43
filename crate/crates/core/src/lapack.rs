//! Thin FFI onto the system BLAS/LAPACK (OpenBLAS) for the dense kernels:
//! matrix products, Cholesky, symmetric-definite generalized eigenproblems
//! and one nonsymmetric eigensolve for spectral radii.
//!
//! All matrices are column-major with leading dimension equal to the row
//! count, which is what [`crate::dense::Dense`] guarantees.
//!
//! The library is loaded with dlopen on first use rather than linked at
//! startup. OpenBLAS selects its kernels in an ELF constructor by CPUID
//! model detection, which fails inside VMs that mask the model string and
//! silently drops to a generic (pre-AVX) dgemm, a 4-5x throughput loss.
//! Deferring the load lets us pick the core type from the instruction sets
//! that are actually available before the constructor runs. An explicit
//! OPENBLAS_CORETYPE in the environment wins.

use crate::dense::Dense;
use crate::error::{Error, Result};
use libloading::Library;
use std::ffi::c_char;
use std::sync::OnceLock;

#[allow(clippy::type_complexity)]
type GemmFn = unsafe extern "C" fn(
    *const c_char,
    *const c_char,
    *const i32,
    *const i32,
    *const i32,
    *const f64,
    *const f64,
    *const i32,
    *const f64,
    *const i32,
    *const f64,
    *mut f64,
    *const i32,
);
type PotrfFn = unsafe extern "C" fn(*const c_char, *const i32, *mut f64, *const i32, *mut i32);
type PotrsFn = unsafe extern "C" fn(
    *const c_char,
    *const i32,
    *const i32,
    *const f64,
    *const i32,
    *mut f64,
    *const i32,
    *mut i32,
);
type TrsmFn = unsafe extern "C" fn(
    *const c_char,
    *const c_char,
    *const c_char,
    *const c_char,
    *const i32,
    *const i32,
    *const f64,
    *const f64,
    *const i32,
    *mut f64,
    *const i32,
);
type SygstFn = unsafe extern "C" fn(
    *const i32,
    *const c_char,
    *const i32,
    *mut f64,
    *const i32,
    *const f64,
    *const i32,
    *mut i32,
);
type SyevdFn = unsafe extern "C" fn(
    *const c_char,
    *const c_char,
    *const i32,
    *mut f64,
    *const i32,
    *mut f64,
    *mut f64,
    *const i32,
    *mut i32,
    *const i32,
    *mut i32,
);
type SygvdFn = unsafe extern "C" fn(
    *const i32,
    *const c_char,
    *const c_char,
    *const i32,
    *mut f64,
    *const i32,
    *mut f64,
    *const i32,
    *mut f64,
    *mut f64,
    *const i32,
    *mut i32,
    *const i32,
    *mut i32,
);
type GeevFn = unsafe extern "C" fn(
    *const c_char,
    *const c_char,
    *const i32,
    *mut f64,
    *const i32,
    *mut f64,
    *mut f64,
    *mut f64,
    *const i32,
    *mut f64,
    *const i32,
    *mut f64,
    *const i32,
    *mut i32,
);

struct Api {
    _lib: Library,
    dgemm: GemmFn,
    dpotrf: PotrfFn,
    dpotrs: PotrsFn,
    dtrsm: TrsmFn,
    dsygst: SygstFn,
    dsyevd: SyevdFn,
    dsyevd_2stage: SyevdFn,
    dsygvd: SygvdFn,
    dgeev: GeevFn,
}

fn tune_core_type() {
    if std::env::var_os("OPENBLAS_CORETYPE").is_some() {
        return;
    }
    #[cfg(target_arch = "x86_64")]
    {
        let core = if std::arch::is_x86_feature_detected!("avx512f")
            && std::arch::is_x86_feature_detected!("avx512dq")
        {
            Some("SKYLAKEX")
        } else if std::arch::is_x86_feature_detected!("avx2")
            && std::arch::is_x86_feature_detected!("fma")
        {
            Some("HASWELL")
        } else {
            None
        };
        if let Some(core) = core {
            std::env::set_var("OPENBLAS_CORETYPE", core);
        }
    }
}

fn api() -> &'static Api {
    static API: OnceLock<Api> = OnceLock::new();
    API.get_or_init(|| {
        tune_core_type();
        let lib = ["libopenblas.so.0", "libopenblas.so", "libopenblas.so.3"]
            .iter()
            .find_map(|name| unsafe { Library::new(name) }.ok())
            .expect("no loadable OpenBLAS shared library");
        unsafe {
            let dgemm: GemmFn = *lib.get(b"dgemm_\0").expect("dgemm_");
            let dpotrf: PotrfFn = *lib.get(b"dpotrf_\0").expect("dpotrf_");
            let dpotrs: PotrsFn = *lib.get(b"dpotrs_\0").expect("dpotrs_");
            let dtrsm: TrsmFn = *lib.get(b"dtrsm_\0").expect("dtrsm_");
            let dsygst: SygstFn = *lib.get(b"dsygst_\0").expect("dsygst_");
            let dsyevd: SyevdFn = *lib.get(b"dsyevd_\0").expect("dsyevd_");
            // older builds lack the 2-stage solver; the classic one is a
            // drop-in (slower) replacement with the same signature
            let dsyevd_2stage: SyevdFn =
                lib.get(b"dsyevd_2stage_\0").map(|s| *s).unwrap_or(dsyevd);
            let dsygvd: SygvdFn = *lib.get(b"dsygvd_\0").expect("dsygvd_");
            let dgeev: GeevFn = *lib.get(b"dgeev_\0").expect("dgeev_");
            Api {
                _lib: lib,
                dgemm,
                dpotrf,
                dpotrs,
                dtrsm,
                dsygst,
                dsyevd,
                dsyevd_2stage,
                dsygvd,
                dgeev,
            }
        }
    })
}

const LOWER: c_char = b'L' as c_char;
const NO: c_char = b'N' as c_char;
const VECTORS: c_char = b'V' as c_char;

fn dim(n: usize) -> i32 {
    i32::try_from(n).expect("matrix dimension exceeds i32")
}

pub enum Trans {
    No,
    Yes,
}

impl Trans {
    fn flag(&self) -> c_char {
        match self {
            Trans::No => b'N' as c_char,
            Trans::Yes => b'T' as c_char,
        }
    }
}

/// c <- alpha * op(a) op(b) + beta * c.
pub fn gemm(ta: Trans, tb: Trans, alpha: f64, a: &Dense, b: &Dense, beta: f64, c: &mut Dense) {
    let (m, ka) = match ta {
        Trans::No => (a.nrows, a.ncols),
        Trans::Yes => (a.ncols, a.nrows),
    };
    let (kb, n) = match tb {
        Trans::No => (b.nrows, b.ncols),
        Trans::Yes => (b.ncols, b.nrows),
    };
    assert_eq!(ka, kb, "gemm inner dimensions");
    assert_eq!((c.nrows, c.ncols), (m, n), "gemm output shape");
    unsafe {
        (api().dgemm)(
            &ta.flag(),
            &tb.flag(),
            &dim(m),
            &dim(n),
            &dim(ka),
            &alpha,
            a.a.as_ptr(),
            &dim(a.nrows),
            b.a.as_ptr(),
            &dim(b.nrows),
            &beta,
            c.a.as_mut_ptr(),
            &dim(m),
        );
    }
}

pub fn matmul(ta: Trans, tb: Trans, a: &Dense, b: &Dense) -> Dense {
    let m = match ta {
        Trans::No => a.nrows,
        Trans::Yes => a.ncols,
    };
    let n = match tb {
        Trans::No => b.ncols,
        Trans::Yes => b.nrows,
    };
    let mut c = Dense::zeros(m, n);
    gemm(ta, tb, 1.0, a, b, 0.0, &mut c);
    c
}

/// In-place lower Cholesky of an SPD matrix.
pub fn potrf(a: &mut Dense) -> Result<()> {
    assert_eq!(a.nrows, a.ncols);
    let mut info = 0i32;
    unsafe {
        (api().dpotrf)(&LOWER, &dim(a.nrows), a.a.as_mut_ptr(), &dim(a.nrows), &mut info);
    }
    if info != 0 {
        return Err(Error::Factorization(format!(
            "dpotrf leading minor {info} not positive definite"
        )));
    }
    Ok(())
}

/// Solve with a [`potrf`] factor; b is overwritten by the solution.
pub fn potrs(chol: &Dense, b: &mut Dense) {
    assert_eq!(chol.nrows, b.nrows);
    let mut info = 0i32;
    unsafe {
        (api().dpotrs)(
            &LOWER,
            &dim(chol.nrows),
            &dim(b.ncols),
            chol.a.as_ptr(),
            &dim(chol.nrows),
            b.a.as_mut_ptr(),
            &dim(b.nrows),
            &mut info,
        );
    }
    assert_eq!(info, 0, "dpotrs invalid argument {info}");
}

pub fn potrs_vec(chol: &Dense, b: &[f64]) -> Vec<f64> {
    let mut rhs = Dense {
        nrows: b.len(),
        ncols: 1,
        a: b.to_vec(),
    };
    potrs(chol, &mut rhs);
    rhs.a
}

/// b <- L^{-1} b (`Trans::No`) or L^{-T} b (`Trans::Yes`) for lower-triangular L.
pub fn trsm_left_lower(trans: Trans, l: &Dense, b: &mut Dense) {
    assert_eq!(l.nrows, l.ncols);
    assert_eq!(l.nrows, b.nrows);
    let side = b'L' as c_char;
    let diag = b'N' as c_char;
    let one = 1.0f64;
    unsafe {
        (api().dtrsm)(
            &side,
            &LOWER,
            &trans.flag(),
            &diag,
            &dim(b.nrows),
            &dim(b.ncols),
            &one,
            l.a.as_ptr(),
            &dim(l.nrows),
            b.a.as_mut_ptr(),
            &dim(b.nrows),
        );
    }
}

/// b <- b L^{-T} (`Trans::Yes`) or b L^{-1} (`Trans::No`) for lower-triangular L.
pub fn trsm_right_lower(trans: Trans, l: &Dense, b: &mut Dense) {
    assert_eq!(l.nrows, l.ncols);
    assert_eq!(l.nrows, b.ncols);
    let side = b'R' as c_char;
    let diag = b'N' as c_char;
    let one = 1.0f64;
    unsafe {
        (api().dtrsm)(
            &side,
            &LOWER,
            &trans.flag(),
            &diag,
            &dim(b.nrows),
            &dim(b.ncols),
            &one,
            l.a.as_ptr(),
            &dim(l.nrows),
            b.a.as_mut_ptr(),
            &dim(b.nrows),
        );
    }
}

/// Eigenvalues (ascending) of the s.p.d. pencil A x = lambda B x.
///
/// With `vectors`, A is overwritten by B-orthonormal eigenvectors
/// (dsygvd); otherwise the reduction dpotrf + dsygst + dsyevd_2stage is
/// used, which is much faster when only eigenvalues are wanted.
pub fn sygv(a: &mut Dense, b: &mut Dense, vectors: bool) -> Result<Vec<f64>> {
    assert_eq!(a.nrows, a.ncols);
    assert_eq!(b.nrows, b.ncols);
    assert_eq!(a.nrows, b.nrows);
    let n = a.nrows;
    let mut w = vec![0.0f64; n];
    let itype = 1i32;
    let mut info = 0i32;

    if vectors {
        let mut lwork_q = [0.0f64];
        let mut liwork_q = [0i32];
        unsafe {
            (api().dsygvd)(
                &itype,
                &VECTORS,
                &LOWER,
                &dim(n),
                a.a.as_mut_ptr(),
                &dim(n),
                b.a.as_mut_ptr(),
                &dim(n),
                w.as_mut_ptr(),
                lwork_q.as_mut_ptr(),
                &(-1i32),
                liwork_q.as_mut_ptr(),
                &(-1i32),
                &mut info,
            );
        }
        let lwork = lwork_q[0] as i32;
        let liwork = liwork_q[0];
        let mut work = vec![0.0f64; lwork as usize];
        let mut iwork = vec![0i32; liwork as usize];
        unsafe {
            (api().dsygvd)(
                &itype,
                &VECTORS,
                &LOWER,
                &dim(n),
                a.a.as_mut_ptr(),
                &dim(n),
                b.a.as_mut_ptr(),
                &dim(n),
                w.as_mut_ptr(),
                work.as_mut_ptr(),
                &lwork,
                iwork.as_mut_ptr(),
                &liwork,
                &mut info,
            );
        }
        if info != 0 {
            return Err(Error::Eigen(format!("dsygvd info {info}")));
        }
        return Ok(w);
    }

    potrf(b)?;
    unsafe {
        (api().dsygst)(
            &itype,
            &LOWER,
            &dim(n),
            a.a.as_mut_ptr(),
            &dim(n),
            b.a.as_ptr(),
            &dim(n),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Eigen(format!("dsygst info {info}")));
    }
    syev_2stage_values(a, &mut w)?;
    Ok(w)
}

fn syev_2stage_values(a: &mut Dense, w: &mut [f64]) -> Result<()> {
    let n = a.nrows;
    let mut info = 0i32;
    let mut lwork_q = [0.0f64];
    let mut liwork_q = [0i32];
    unsafe {
        (api().dsyevd_2stage)(
            &NO,
            &LOWER,
            &dim(n),
            a.a.as_mut_ptr(),
            &dim(n),
            w.as_mut_ptr(),
            lwork_q.as_mut_ptr(),
            &(-1i32),
            liwork_q.as_mut_ptr(),
            &(-1i32),
            &mut info,
        );
    }
    let lwork = lwork_q[0] as i32;
    let liwork = liwork_q[0];
    let mut work = vec![0.0f64; lwork as usize];
    let mut iwork = vec![0i32; liwork.max(1) as usize];
    unsafe {
        (api().dsyevd_2stage)(
            &NO,
            &LOWER,
            &dim(n),
            a.a.as_mut_ptr(),
            &dim(n),
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Eigen(format!("dsyevd_2stage info {info}")));
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix (ascending); a is destroyed.
/// With `vectors`, a is overwritten by orthonormal eigenvectors.
pub fn syev(a: &mut Dense, vectors: bool) -> Result<Vec<f64>> {
    assert_eq!(a.nrows, a.ncols);
    let n = a.nrows;
    let mut w = vec![0.0f64; n];
    let jobz = if vectors { VECTORS } else { NO };
    let mut info = 0i32;
    let mut lwork_q = [0.0f64];
    let mut liwork_q = [0i32];
    unsafe {
        (api().dsyevd)(
            &jobz,
            &LOWER,
            &dim(n),
            a.a.as_mut_ptr(),
            &dim(n),
            w.as_mut_ptr(),
            lwork_q.as_mut_ptr(),
            &(-1i32),
            liwork_q.as_mut_ptr(),
            &(-1i32),
            &mut info,
        );
    }
    let lwork = lwork_q[0] as i32;
    let liwork = liwork_q[0];
    let mut work = vec![0.0f64; lwork as usize];
    let mut iwork = vec![0i32; liwork.max(1) as usize];
    unsafe {
        (api().dsyevd)(
            &jobz,
            &LOWER,
            &dim(n),
            a.a.as_mut_ptr(),
            &dim(n),
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Eigen(format!("dsyevd info {info}")));
    }
    Ok(w)
}

/// Spectral radius of a general square matrix; a is destroyed.
pub fn spectral_radius(a: &mut Dense) -> Result<f64> {
    assert_eq!(a.nrows, a.ncols);
    let n = a.nrows;
    let mut wr = vec![0.0f64; n];
    let mut wi = vec![0.0f64; n];
    let mut info = 0i32;
    let mut lwork_q = [0.0f64];
    unsafe {
        (api().dgeev)(
            &NO,
            &NO,
            &dim(n),
            a.a.as_mut_ptr(),
            &dim(n),
            wr.as_mut_ptr(),
            wi.as_mut_ptr(),
            std::ptr::null_mut(),
            &1i32,
            std::ptr::null_mut(),
            &1i32,
            lwork_q.as_mut_ptr(),
            &(-1i32),
            &mut info,
        );
    }
    let lwork = lwork_q[0] as i32;
    let mut work = vec![0.0f64; lwork as usize];
    unsafe {
        (api().dgeev)(
            &NO,
            &NO,
            &dim(n),
            a.a.as_mut_ptr(),
            &dim(n),
            wr.as_mut_ptr(),
            wi.as_mut_ptr(),
            std::ptr::null_mut(),
            &1i32,
            std::ptr::null_mut(),
            &1i32,
            work.as_mut_ptr(),
            &lwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Eigen(format!("dgeev info {info}")));
    }
    Ok(wr
        .iter()
        .zip(&wi)
        .map(|(re, im)| re.hypot(*im))
        .fold(0.0f64, f64::max))
}
