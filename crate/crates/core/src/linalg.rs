//! Dense real-matrix primitives: rank decisions, orthonormal bases,
//! pseudo-inverses, eigenvalues and unit-circle invariant-subspace splits.
//!
//! All operations are pure functions of their inputs and reject non-finite
//! entries. Zero-width and zero-height matrices are accepted everywhere and
//! produce the natural degenerate results, because downstream per-node
//! decompositions routinely hit empty subspaces.
//!
//! Every rank, basis and eigenvalue decision is delegated to LAPACK
//! (`dgesvd` / `dgees`): the pure-Rust factorizations shipped with the
//! matrix library mis-factorize some near-rank-deficient inputs (orthogonal
//! projectors among them), which is fatal for code whose whole job is
//! deciding subspace memberships.

use std::cell::Cell;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Dense column-major matrix of `f64`, the working type of the whole crate.
pub type Matrix = DMatrix<f64>;
/// Dense column vector of `f64`.
pub type Vector = DVector<f64>;

/// Numerical thresholds shared by every rank / stability decision.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    /// Relative singular-value threshold: singular values below
    /// `rank_tol * sigma_max` count as zero.
    pub rank_tol: f64,
    /// Radius offset for the unit-circle split: eigenvalues with
    /// `|lambda| >= 1 - stability_margin` are classified as nonstable.
    pub stability_margin: f64,
    /// Absolute residual threshold for "this matrix product is zero" checks.
    pub zero_tol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rank_tol: 1e-9,
            stability_margin: 1e-6,
            zero_tol: 1e-8,
        }
    }
}

impl Tolerance {
    /// Validates that every threshold is strictly positive.
    pub fn validate(&self) -> Result<(), LinalgError> {
        if self.rank_tol > 0.0 && self.stability_margin > 0.0 && self.zero_tol > 0.0 {
            Ok(())
        } else {
            Err(LinalgError::InvalidMatrix(
                "tolerances must be strictly positive".into(),
            ))
        }
    }
}

/// Errors produced by the matrix primitives.
#[derive(Debug, Error)]
pub enum LinalgError {
    /// Input violates a structural precondition (non-finite entries,
    /// wrong shape, invalid tolerances).
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    /// A pseudo-inverse was requested for a rank-deficient matrix.
    #[error("matrix does not have full column rank")]
    RankDeficient,
    /// The Schur factorization backing the unit-circle split failed.
    #[error("Schur factorization failed (LAPACK info = {0})")]
    SchurFailed(i32),
    /// The singular value decomposition did not converge.
    #[error("singular value decomposition failed (LAPACK info = {0})")]
    SvdFailed(i32),
}

fn check_finite(m: &Matrix) -> Result<(), LinalgError> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::InvalidMatrix(
            "non-finite entry encountered".into(),
        ))
    }
}

fn check_square(m: &Matrix) -> Result<(), LinalgError> {
    if m.nrows() == m.ncols() {
        Ok(())
    } else {
        Err(LinalgError::InvalidMatrix(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Number of singular values above the relative threshold
/// `rank_tol * sigma_max`.
pub fn rank_with_tolerance(m: &Matrix, tol: &Tolerance) -> Result<usize, LinalgError> {
    check_finite(m)?;
    tol.validate()?;
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0);
    }
    let (_, sv, _) = lapack_svd(m, false, false)?;
    Ok(count_above_threshold(&sv, tol))
}

/// Shared rank rule on descending singular values: the head sets the scale.
fn count_above_threshold(sv: &[f64], tol: &Tolerance) -> usize {
    let sigma_max = sv[0];
    if sigma_max <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol.rank_tol * sigma_max).count()
}

/// Orthonormal basis `Q` of the column span of `m`: `Q^T Q = I`, column
/// count equals the numerical rank. A zero (or empty) input yields an
/// `nrows x 0` result.
pub fn orthonormal_image_basis(m: &Matrix, tol: &Tolerance) -> Result<Matrix, LinalgError> {
    check_finite(m)?;
    tol.validate()?;
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Matrix::zeros(m.nrows(), 0));
    }
    let (u, sv, _) = lapack_svd(m, true, false)?;
    let u = u.expect("factor was requested");
    let rank = count_above_threshold(&sv, tol);
    Ok(u.columns(0, rank).into_owned())
}

/// Orthonormal basis of the null space of `m`; satisfies `m * K ≈ 0`.
/// A matrix with no rows constrains nothing, so its kernel is the full
/// identity basis.
pub fn kernel_basis(m: &Matrix, tol: &Tolerance) -> Result<Matrix, LinalgError> {
    check_finite(m)?;
    tol.validate()?;
    if m.ncols() == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    if m.nrows() == 0 {
        return Ok(Matrix::identity(m.ncols(), m.ncols()));
    }
    // The full `V^T` makes the kernel a plain row slice: rows past the rank
    // pair with zero singular values, explicit or implicit.
    let (_, sv, vt) = lapack_svd(m, false, true)?;
    let vt = vt.expect("factor was requested");
    let rank = count_above_threshold(&sv, tol);
    let n = m.ncols();
    Ok(vt.rows(rank, n - rank).transpose())
}

/// Left pseudo-inverse `(M^T M)^{-1} M^T` of a full-column-rank matrix;
/// satisfies `result * M = I`.
pub fn left_pseudoinverse(m: &Matrix, tol: &Tolerance) -> Result<Matrix, LinalgError> {
    check_finite(m)?;
    if m.ncols() == 0 {
        return Ok(Matrix::zeros(0, m.nrows()));
    }
    if rank_with_tolerance(m, tol)? != m.ncols() {
        return Err(LinalgError::RankDeficient);
    }
    let gram = m.transpose() * m;
    let inv = gram.try_inverse().ok_or(LinalgError::RankDeficient)?;
    Ok(inv * m.transpose())
}

/// Outcome of [`unit_circle_split`]: orthonormal bases of the invariant
/// subspaces on either side of the circle `|lambda| = 1 - stability_margin`.
#[derive(Debug, Clone)]
pub struct UnitCircleSplit {
    /// Basis of the generalized eigenspace with `|lambda| < 1 - margin`.
    pub stable: Matrix,
    /// Basis of the generalized eigenspace with `|lambda| >= 1 - margin`.
    pub nonstable: Matrix,
    /// True when some eigenvalue sits within `stability_margin` of the
    /// split boundary, so its classification is numerically ambiguous.
    /// The split is still returned; the caller decides what to do.
    pub boundary_ambiguous: bool,
}

// The LAPACK eigenvalue-selection callback cannot capture state, so the
// margin and selection side travel through thread-locals set immediately
// before each dgees call. Thread-local storage keeps concurrent splits on
// different threads independent.
thread_local! {
    static SPLIT_MARGIN: Cell<f64> = const { Cell::new(1e-6) };
    static SELECT_STABLE: Cell<bool> = const { Cell::new(true) };
}

extern "C" fn select_unit_circle(wr: *const f64, wi: *const f64) -> i32 {
    let (re, im) = unsafe { (*wr, *wi) };
    let modulus = re.hypot(im);
    let stable = modulus < 1.0 - SPLIT_MARGIN.with(|m| m.get());
    let want_stable = SELECT_STABLE.with(|s| s.get());
    (stable == want_stable) as i32
}

extern "C" {
    // LAPACK real Schur factorization with eigenvalue reordering. Linked
    // from the system OpenBLAS; see the crate root for the link anchor.
    fn dgees_(
        jobvs: *const u8,
        sort: *const u8,
        select: Option<extern "C" fn(*const f64, *const f64) -> i32>,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        sdim: *mut i32,
        wr: *mut f64,
        wi: *mut f64,
        vs: *mut f64,
        ldvs: *const i32,
        work: *mut f64,
        lwork: *const i32,
        bwork: *mut i32,
        info: *mut i32,
    );

    // LAPACK real singular value decomposition, same library.
    fn dgesvd_(
        jobu: *const u8,
        jobvt: *const u8,
        m: *const i32,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        s: *mut f64,
        u: *mut f64,
        ldu: *const i32,
        vt: *mut f64,
        ldvt: *const i32,
        work: *mut f64,
        lwork: *const i32,
        info: *mut i32,
    );
}

/// Descending singular values plus the requested factors via `dgesvd`:
/// a thin `U` (`nrows x min`) and the full `V^T` (`ncols x ncols`).
/// Callers guard against empty inputs.
pub(crate) fn lapack_svd(
    m: &Matrix,
    want_u: bool,
    want_vt: bool,
) -> Result<(Option<Matrix>, Vec<f64>, Option<Matrix>), LinalgError> {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    debug_assert!(k > 0, "callers guard empty inputs");
    let mi = rows as i32;
    let ni = cols as i32;
    let mut a = m.clone();
    let jobu = if want_u { b'S' } else { b'N' };
    let jobvt = if want_vt { b'A' } else { b'N' };
    let mut s = vec![0.0f64; k];
    let mut u = if want_u {
        Matrix::zeros(rows, k)
    } else {
        Matrix::zeros(1, 1)
    };
    let ldu: i32 = if want_u { mi } else { 1 };
    let mut vt = if want_vt {
        Matrix::zeros(cols, cols)
    } else {
        Matrix::zeros(1, 1)
    };
    let ldvt: i32 = if want_vt { ni } else { 1 };
    let mut info: i32 = 0;

    // Workspace query, then the actual factorization.
    let mut work_query = [0.0f64; 1];
    let neg_one: i32 = -1;
    unsafe {
        dgesvd_(
            &jobu,
            &jobvt,
            &mi,
            &ni,
            a.as_mut_slice().as_mut_ptr(),
            &mi,
            s.as_mut_ptr(),
            u.as_mut_slice().as_mut_ptr(),
            &ldu,
            vt.as_mut_slice().as_mut_ptr(),
            &ldvt,
            work_query.as_mut_ptr(),
            &neg_one,
            &mut info,
        );
    }
    if info != 0 {
        return Err(LinalgError::SvdFailed(info));
    }
    let lwork = work_query[0] as i32;
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    unsafe {
        dgesvd_(
            &jobu,
            &jobvt,
            &mi,
            &ni,
            a.as_mut_slice().as_mut_ptr(),
            &mi,
            s.as_mut_ptr(),
            u.as_mut_slice().as_mut_ptr(),
            &ldu,
            vt.as_mut_slice().as_mut_ptr(),
            &ldvt,
            work.as_mut_ptr(),
            &lwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(LinalgError::SvdFailed(info));
    }
    Ok((want_u.then_some(u), s, want_vt.then_some(vt)))
}

/// All eigenvalues of a square matrix as `(re, im)` pairs, computed from
/// the unordered LAPACK real Schur form. An empty matrix has none.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<(f64, f64)>, LinalgError> {
    check_finite(m)?;
    check_square(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let ni = n as i32;
    let mut a = m.clone();
    let mut wr = vec![0.0f64; n];
    let mut wi = vec![0.0f64; n];
    let mut sdim: i32 = 0;
    let mut info: i32 = 0;
    let mut bwork = vec![0i32; n];
    let mut vs = [0.0f64; 1];
    let ldvs: i32 = 1;

    let mut work_query = [0.0f64; 1];
    let neg_one: i32 = -1;
    unsafe {
        dgees_(
            &b'N',
            &b'N',
            None,
            &ni,
            a.as_mut_slice().as_mut_ptr(),
            &ni,
            &mut sdim,
            wr.as_mut_ptr(),
            wi.as_mut_ptr(),
            vs.as_mut_ptr(),
            &ldvs,
            work_query.as_mut_ptr(),
            &neg_one,
            bwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(LinalgError::SchurFailed(info));
    }
    let lwork = work_query[0] as i32;
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    unsafe {
        dgees_(
            &b'N',
            &b'N',
            None,
            &ni,
            a.as_mut_slice().as_mut_ptr(),
            &ni,
            &mut sdim,
            wr.as_mut_ptr(),
            wi.as_mut_ptr(),
            vs.as_mut_ptr(),
            &ldvs,
            work.as_mut_ptr(),
            &lwork,
            bwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(LinalgError::SchurFailed(info));
    }
    Ok(wr.into_iter().zip(wi).collect())
}

/// Ordered real Schur factorization: returns the orthogonal factor, the
/// number of leading columns spanning the selected invariant subspace, and
/// all eigenvalues as `(re, im)` pairs. When `stable_first` is true the
/// selected set is `|lambda| < 1 - margin`, otherwise its complement.
fn schur_sorted(
    m: &Matrix,
    margin: f64,
    stable_first: bool,
) -> Result<(Matrix, usize, Vec<(f64, f64)>), LinalgError> {
    let n = m.nrows();
    let ni = n as i32;
    let mut a = m.clone();
    let mut vs = Matrix::zeros(n, n);
    let mut wr = vec![0.0f64; n];
    let mut wi = vec![0.0f64; n];
    let mut sdim: i32 = 0;
    let mut info: i32 = 0;
    let mut bwork = vec![0i32; n];

    SPLIT_MARGIN.with(|c| c.set(margin));
    SELECT_STABLE.with(|c| c.set(stable_first));

    // Workspace query, then the actual factorization.
    let mut work_query = [0.0f64; 1];
    let neg_one: i32 = -1;
    unsafe {
        dgees_(
            &b'V',
            &b'S',
            Some(select_unit_circle),
            &ni,
            a.as_mut_slice().as_mut_ptr(),
            &ni,
            &mut sdim,
            wr.as_mut_ptr(),
            wi.as_mut_ptr(),
            vs.as_mut_slice().as_mut_ptr(),
            &ni,
            work_query.as_mut_ptr(),
            &neg_one,
            bwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(LinalgError::SchurFailed(info));
    }
    let lwork = work_query[0] as i32;
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    unsafe {
        dgees_(
            &b'V',
            &b'S',
            Some(select_unit_circle),
            &ni,
            a.as_mut_slice().as_mut_ptr(),
            &ni,
            &mut sdim,
            wr.as_mut_ptr(),
            wi.as_mut_ptr(),
            vs.as_mut_slice().as_mut_ptr(),
            &ni,
            work.as_mut_ptr(),
            &lwork,
            bwork.as_mut_ptr(),
            &mut info,
        );
    }
    // info = n+2 flags a benign reordering round-off warning; the computed
    // factorization and sdim remain usable. Anything else is a hard failure.
    if info != 0 && info != ni + 2 {
        return Err(LinalgError::SchurFailed(info));
    }
    let eigs = wr.into_iter().zip(wi).collect();
    Ok((vs, sdim as usize, eigs))
}

/// Splits the space into the `m`-invariant subspaces of strictly stable
/// (`|lambda| < 1 - stability_margin`) and nonstable eigenvalues. Both
/// bases are orthonormal and their dimensions sum to `n`.
pub fn unit_circle_split(m: &Matrix, tol: &Tolerance) -> Result<UnitCircleSplit, LinalgError> {
    check_finite(m)?;
    check_square(m)?;
    tol.validate()?;
    let n = m.nrows();
    if n == 0 {
        return Ok(UnitCircleSplit {
            stable: Matrix::zeros(0, 0),
            nonstable: Matrix::zeros(0, 0),
            boundary_ambiguous: false,
        });
    }
    let margin = tol.stability_margin;
    let (vs_stable, n_stable, eigs) = schur_sorted(m, margin, true)?;
    let (vs_nonstable, n_nonstable, _) = schur_sorted(m, margin, false)?;
    if n_stable + n_nonstable != n {
        return Err(LinalgError::SchurFailed(0));
    }
    let boundary_ambiguous = eigs
        .iter()
        .any(|&(re, im)| (re.hypot(im) - (1.0 - margin)).abs() < margin);
    Ok(UnitCircleSplit {
        stable: vs_stable.columns(0, n_stable).into_owned(),
        nonstable: vs_nonstable.columns(0, n_nonstable).into_owned(),
        boundary_ambiguous,
    })
}

/// Maximum eigenvalue modulus of a square matrix (0 for the empty matrix).
pub fn spectral_radius(m: &Matrix) -> Result<f64, LinalgError> {
    Ok(eigenvalues(m)?
        .into_iter()
        .map(|(re, im)| re.hypot(im))
        .fold(0.0, f64::max))
}

/// Stacked observability matrix `[C; CA; ...; CA^{n-1}]` of the pair `(a, c)`.
pub fn observability_matrix(a: &Matrix, c: &Matrix) -> Matrix {
    let n = a.nrows();
    let ny = c.nrows();
    let mut obs = Matrix::zeros(ny * n, n);
    let mut block = c.clone();
    for i in 0..n {
        obs.view_mut((i * ny, 0), (ny, n)).copy_from(&block);
        block = &block * a;
    }
    obs
}
