//! Dense complex linear algebra and subspace algebra.
//!
//! Every subspace in the crate is carried as a [`Basis`]: an ambient-space
//! matrix whose columns are orthonormal. Comparisons between subspaces are
//! made through projectors or dimensions, never through raw columns, because
//! bases are only defined up to a unitary change of coordinates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Numerical thresholds shared by every subspace and solver routine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative singular-value threshold (scaled by the largest singular value).
    pub rank_tol: f64,
    /// Bound on `‖B†B − I‖_F` for an accepted orthonormal basis.
    pub ortho_tol: f64,
    /// Relative residual bound for linear solves and method cross-checks.
    pub solve_tol: f64,
    /// Threshold on `1 − cos θ` below which a principal angle counts as zero.
    pub angle_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_tol: 1e-10,
            ortho_tol: 1e-10,
            solve_tol: 1e-9,
            angle_tol: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [self.rank_tol, self.ortho_tol, self.solve_tol, self.angle_tol];
        if all.iter().all(|t| t.is_finite() && *t > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "tolerances must be finite and strictly positive: {self:?}"
            )))
        }
    }

    /// Same thresholds with the intersection tolerance scaled by `factor`.
    pub fn relax_angle(&self, factor: f64) -> Self {
        Self {
            angle_tol: self.angle_tol * factor,
            ..*self
        }
    }
}

/// Orthonormal column family spanning a subspace of `C^ambient_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    vectors: CMatrix,
}

impl Basis {
    /// Wraps `vectors` after checking `‖V†V − I‖_F ≤ tol.ortho_tol`.
    pub fn new(vectors: CMatrix, tol: &Tolerances) -> Result<Self> {
        ensure_finite(&vectors)?;
        let b = Self { vectors };
        let r = b.orthonormality_residual();
        if r > tol.ortho_tol {
            return Err(Error::NotOrthonormal { residual: r });
        }
        Ok(b)
    }

    /// Wraps `vectors` without checking orthonormality.
    ///
    /// Used when reading files whose validity is reported later by
    /// `collections::validate` rather than rejected at load time.
    pub fn from_columns_unchecked(vectors: CMatrix) -> Self {
        Self { vectors }
    }

    /// The zero-dimensional subspace of `C^ambient_dim`.
    pub fn empty(ambient_dim: usize) -> Self {
        Self {
            vectors: CMatrix::zeros(ambient_dim, 0),
        }
    }

    pub fn identity(ambient_dim: usize) -> Self {
        Self {
            vectors: CMatrix::identity(ambient_dim, ambient_dim),
        }
    }

    /// Span of the standard basis vectors with the given indices.
    pub fn coordinate(ambient_dim: usize, indices: &[usize]) -> Self {
        let mut m = CMatrix::zeros(ambient_dim, indices.len());
        for (col, &i) in indices.iter().enumerate() {
            m[(i, col)] = ONE;
        }
        Self { vectors: m }
    }

    pub fn ambient_dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.dim() == 0
    }

    pub fn vectors(&self) -> &CMatrix {
        &self.vectors
    }

    pub fn into_vectors(self) -> CMatrix {
        self.vectors
    }

    pub fn orthonormality_residual(&self) -> f64 {
        let g = ad_mul(&self.vectors, &self.vectors);
        (g - CMatrix::identity(self.dim(), self.dim())).norm()
    }

    pub fn projector(&self) -> CMatrix {
        projector(self)
    }

    /// Coordinates of `v` (ambient vectors) in this basis: `B† v`.
    pub fn coords(&self, v: &CMatrix) -> CMatrix {
        ad_mul(&self.vectors, v)
    }

    /// Ambient vectors from coordinates in this basis: `B c`.
    pub fn embed(&self, c: &CMatrix) -> CMatrix {
        mul(&self.vectors, c)
    }

    /// Expresses `self` (a subspace of `frame`) in the coordinates of `frame`.
    pub fn restrict_to(&self, frame: &Basis) -> Basis {
        Basis::from_columns_unchecked(frame.coords(&self.vectors))
    }

    /// Maps a subspace given in `frame` coordinates back to ambient vectors.
    pub fn lift_from(&self, frame: &Basis) -> Basis {
        Basis::from_columns_unchecked(frame.embed(&self.vectors))
    }

    /// Direct sum of mutually orthogonal bases by column concatenation.
    pub fn direct_sum(parts: &[&Basis]) -> Result<Basis> {
        let n = parts.first().map(|b| b.ambient_dim()).unwrap_or(0);
        for p in parts {
            if p.ambient_dim() != n {
                return Err(Error::AmbientMismatch {
                    left: n,
                    right: p.ambient_dim(),
                });
            }
        }
        let cols: usize = parts.iter().map(|b| b.dim()).sum();
        let mut m = CMatrix::zeros(n, cols);
        let mut at = 0;
        for p in parts {
            m.columns_mut(at, p.dim()).copy_from(&p.vectors);
            at += p.dim();
        }
        Ok(Basis { vectors: m })
    }
}

/// Rejects NaN or infinite entries.
pub fn ensure_finite(m: &CMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

const SPLIT_THRESHOLD: usize = 48 * 48 * 48;

fn split(m: &CMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    (m.map(|z| z.re), m.map(|z| z.im))
}

fn join(re: DMatrix<f64>, im: DMatrix<f64>) -> CMatrix {
    re.zip_map(&im, C64::new)
}

/// Matrix product `a · b`.
///
/// Large products are evaluated as four real GEMMs, which reach the
/// optimized f64 kernel instead of the generic complex loop.
pub fn mul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.ncols(), b.nrows(), "mul: inner dimensions differ");
    if a.nrows() * a.ncols() * b.ncols() < SPLIT_THRESHOLD {
        return a * b;
    }
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    join(re, im)
}

/// Product `a† · b`.
pub fn ad_mul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.nrows(), b.nrows(), "ad_mul: row counts differ");
    if a.nrows() * a.ncols() * b.ncols() < SPLIT_THRESHOLD {
        return a.ad_mul(b);
    }
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let art = ar.transpose();
    let ait = ai.transpose();
    let re = &art * &br + &ait * &bi;
    let im = &art * &bi - &ait * &br;
    join(re, im)
}

/// Product `a · b†`.
pub fn mul_ad(a: &CMatrix, b: &CMatrix) -> CMatrix {
    mul(a, &b.adjoint())
}

/// Hermitian part `(T + T†)/2`.
pub fn re_part(t: &CMatrix) -> CMatrix {
    (t + t.adjoint()).scale(0.5)
}

/// Anti-Hermitian part divided by `i`: `(T − T†)/(2i)`, a Hermitian matrix.
pub fn im_part(t: &CMatrix) -> CMatrix {
    (t - t.adjoint()) * C64::new(0.0, -0.5)
}

fn to_faer(m: &CMatrix) -> faer::Mat<C64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, C64>) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    if h.nrows() == 0 {
        return Vec::new();
    }
    to_faer(&re_part(h))
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .expect("eigensolver converges on finite input")
}

/// Smallest eigenvalue of a Hermitian matrix; `+∞` for a 0×0 matrix.
pub fn min_eigenvalue(h: &CMatrix) -> f64 {
    hermitian_eigenvalues(h)
        .first()
        .copied()
        .unwrap_or(f64::INFINITY)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    if h.nrows() == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let eig = to_faer(&re_part(h))
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("eigensolver converges on finite input");
    let values = eig.S().column_vector().iter().map(|z| z.re).collect();
    (values, from_faer(eig.U()))
}

/// Thin singular value decomposition `m = U diag(s) V†`, `s` descending.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

pub fn thin_svd(m: &CMatrix) -> ThinSvd {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return ThinSvd {
            u: CMatrix::zeros(r, 0),
            s: Vec::new(),
            v: CMatrix::zeros(c, 0),
        };
    }
    let svd = to_faer(m)
        .thin_svd()
        .expect("SVD converges on finite input");
    ThinSvd {
        u: from_faer(svd.U()),
        s: svd.S().column_vector().iter().map(|z| z.re).collect(),
        v: from_faer(svd.V()),
    }
}

/// Minimum-norm least-squares solution of `a x = b`, discarding singular
/// values at or below `cutoff`.
pub fn lstsq(a: &CMatrix, b: &CVector, cutoff: f64) -> CVector {
    let svd = thin_svd(a);
    let mut coef = ad_mul(&svd.u, &CMatrix::from_column_slice(b.len(), 1, b.as_slice()));
    for (i, &s) in svd.s.iter().enumerate() {
        let f = if s > cutoff { 1.0 / s } else { 0.0 };
        coef.row_mut(i).scale_mut(f);
    }
    let x = &svd.v * coef;
    CVector::from_column_slice(x.as_slice())
}

/// Singular values in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    to_faer(m)
        .singular_values()
        .expect("SVD converges on finite input")
}

fn rank_from_singular_values(s: &[f64], scale: f64, tol: &Tolerances) -> usize {
    let reference = s.first().copied().unwrap_or(0.0).max(scale);
    if reference > 0.0 {
        s.iter().filter(|&&x| x > tol.rank_tol * reference).count()
    } else {
        0
    }
}

/// Numerical rank: count of singular values above `rank_tol · σ_max`.
pub fn rank_of(m: &CMatrix, tol: &Tolerances) -> usize {
    rank_from_singular_values(&singular_values(m), 0.0, tol)
}

/// Rank measured against `max(σ_max, scale)`, so a matrix that is small
/// compared with the operator it came from counts as rank deficient.
pub fn rank_scaled(m: &CMatrix, scale: f64, tol: &Tolerances) -> usize {
    rank_from_singular_values(&singular_values(m), scale, tol)
}

/// Spectral condition number `σ_max/σ_min`; `1` for empty, `∞` if singular.
pub fn condition_number(m: &CMatrix) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Rank and conditioning information for a square matrix about to be inverted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareCheck {
    pub rank: usize,
    pub dim_ker: usize,
    pub condition: f64,
}

pub fn check_square(m: &CMatrix, tol: &Tolerances) -> SquareCheck {
    check_square_scaled(m, 0.0, tol)
}

/// [`check_square`] with rank measured against `max(σ_max, scale)`.
pub fn check_square_scaled(m: &CMatrix, scale: f64, tol: &Tolerances) -> SquareCheck {
    let s = singular_values(m);
    let rank = rank_from_singular_values(&s, scale, tol);
    let condition = match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    };
    SquareCheck {
        rank,
        dim_ker: m.ncols() - rank,
        condition,
    }
}

/// Solves `a x = b` for square nonsingular `a` by LU.
///
/// Callers check rank with [`check_square`] first; this only fails when the
/// factorization itself breaks down.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    use faer::linalg::solvers::Solve;
    if a.nrows() == 0 {
        return Some(CMatrix::zeros(0, b.ncols()));
    }
    let x = from_faer(to_faer(a).partial_piv_lu().solve(to_faer(b)).as_ref());
    x.iter().all(|z| z.is_finite()).then_some(x)
}

pub fn inverse(a: &CMatrix) -> Option<CMatrix> {
    use faer::linalg::solvers::DenseSolveCore;
    if a.nrows() == 0 {
        return Some(CMatrix::zeros(0, 0));
    }
    let x = from_faer(to_faer(a).partial_piv_lu().inverse().as_ref());
    x.iter().all(|z| z.is_finite()).then_some(x)
}

/// Returns `B·B†`, the orthogonal projector onto the span of `b`.
pub fn projector(b: &Basis) -> CMatrix {
    mul_ad(b.vectors(), b.vectors())
}

/// Orthonormal basis for the column space of `m`.
///
/// Columns of `U` from the SVD whose singular values exceed
/// `rank_tol · σ_max` are kept.
pub fn orthonormalize(m: &CMatrix, tol: &Tolerances) -> Result<Basis> {
    ensure_finite(m)?;
    let n = m.nrows();
    if m.ncols() == 0 || n == 0 {
        return Ok(Basis::empty(n));
    }
    let svd = thin_svd(m);
    let (u, s) = (&svd.u, &svd.s);
    let smax = s.iter().copied().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return Ok(Basis::empty(n));
    }
    let keep: Vec<usize> = (0..s.len())
        .filter(|&i| s[i] > tol.rank_tol * smax)
        .collect();
    let mut out = CMatrix::zeros(n, keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        out.set_column(dst, &u.column(src));
    }
    Ok(Basis::from_columns_unchecked(out))
}

/// Orthonormal basis of the span of all columns of the given bases.
pub fn span_sum(parts: &[&Basis], tol: &Tolerances) -> Result<Basis> {
    let n = parts.first().map(|b| b.ambient_dim()).unwrap_or(0);
    let mut cols = 0;
    for p in parts {
        if p.ambient_dim() != n {
            return Err(Error::AmbientMismatch {
                left: n,
                right: p.ambient_dim(),
            });
        }
        cols += p.dim();
    }
    let mut m = CMatrix::zeros(n, cols);
    let mut at = 0;
    for p in parts {
        m.columns_mut(at, p.dim()).copy_from(p.vectors());
        at += p.dim();
    }
    orthonormalize(&m, tol)
}

/// Cosines of the principal angles between two subspaces, descending,
/// together with the left singular vectors (coordinates in `a`).
fn principal_cosines(a: &Basis, b: &Basis) -> (Vec<f64>, CMatrix) {
    let cross = ad_mul(a.vectors(), b.vectors());
    let svd = thin_svd(&cross);
    (svd.s, svd.u)
}

/// Basis of `A ∩ B` from principal vectors with `1 − cos θ ≤ angle_tol`.
pub fn intersect(a: &Basis, b: &Basis, tol: &Tolerances) -> Result<Basis> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(Error::AmbientMismatch {
            left: a.ambient_dim(),
            right: b.ambient_dim(),
        });
    }
    let n = a.ambient_dim();
    if a.is_empty() || b.is_empty() {
        return Ok(Basis::empty(n));
    }
    let (cos, u) = principal_cosines(a, b);
    let k = cos.iter().take_while(|&&c| 1.0 - c <= tol.angle_tol).count();
    if k == 0 {
        return Ok(Basis::empty(n));
    }
    let coords = u.columns(0, k).into_owned();
    Ok(Basis::from_columns_unchecked(a.embed(&coords)))
}

/// Basis of `A ∩ W⊥`, with the same angle criterion as [`intersect`].
///
/// Cheaper than intersecting with an explicit complement when `W` is small:
/// a unit vector `a` of `A` makes angle θ with `W⊥` where
/// `cos θ = (1 − ‖W†a‖²)^{1/2}`.
pub fn intersect_complement(a: &Basis, w: &Basis, tol: &Tolerances) -> Result<Basis> {
    if a.ambient_dim() != w.ambient_dim() {
        return Err(Error::AmbientMismatch {
            left: a.ambient_dim(),
            right: w.ambient_dim(),
        });
    }
    if a.is_empty() || w.is_empty() {
        return Ok(a.clone());
    }
    let wa = ad_mul(w.vectors(), a.vectors());
    let (vals, vecs) = hermitian_eigen(&ad_mul(&wa, &wa));
    let k = vals
        .iter()
        .take_while(|&&s2| 1.0 - (1.0 - s2.clamp(0.0, 1.0)).sqrt() <= tol.angle_tol)
        .count();
    let coords = vecs.columns(0, k).into_owned();
    Ok(Basis::from_columns_unchecked(a.embed(&coords)))
}

/// Largest `1 − cos θ` between `a` and its projection onto `p`; zero when
/// `a ⊆ p` exactly.
pub fn containment_defect(a: &Basis, p: &Basis) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    if p.is_empty() {
        return 1.0;
    }
    let s = singular_values(&ad_mul(p.vectors(), a.vectors()));
    if s.len() < a.dim() {
        return 1.0;
    }
    1.0 - s.last().copied().unwrap_or(0.0)
}

/// Orthogonal complement of `a` inside `p` (requires `a ⊆ p`).
///
/// The result has exactly `dim p − dim a` columns: it is read off the
/// eigenvectors of `I − cc†` in `p`-coordinates, where `c = P†A`.
pub fn complement_within(a: &Basis, p: &Basis, tol: &Tolerances) -> Result<Basis> {
    if a.ambient_dim() != p.ambient_dim() {
        return Err(Error::AmbientMismatch {
            left: a.ambient_dim(),
            right: p.ambient_dim(),
        });
    }
    let defect = containment_defect(a, p);
    if defect > tol.angle_tol || a.dim() > p.dim() {
        return Err(Error::NotContained { defect });
    }
    let n = p.ambient_dim();
    let want = p.dim() - a.dim();
    if want == 0 {
        return Ok(Basis::empty(n));
    }
    if a.is_empty() {
        return Ok(p.clone());
    }
    let c = p.coords(a.vectors());
    let inside = mul_ad(&c, &c);
    // Smallest eigenvalues of c c† (≈ 0) belong to the complement.
    let (_, vecs) = hermitian_eigen(&inside);
    let coords = vecs.columns(0, want).into_owned();
    Ok(Basis::from_columns_unchecked(p.embed(&coords)))
}

/// Orthonormal basis of the kernel of `m` (dimension `cols − rank`).
pub fn null_space(m: &CMatrix, tol: &Tolerances) -> CMatrix {
    null_space_scaled(m, 0.0, tol)
}

pub fn null_space_scaled(m: &CMatrix, scale: f64, tol: &Tolerances) -> CMatrix {
    let cols = m.ncols();
    let rank = rank_scaled(m, scale, tol);
    let dim = cols - rank;
    if dim == 0 {
        return CMatrix::zeros(cols, 0);
    }
    if rank == 0 {
        return CMatrix::identity(cols, cols);
    }
    let gram = ad_mul(m, m);
    let (_, vecs) = hermitian_eigen(&gram);
    vecs.columns(0, dim).into_owned()
}

/// Frobenius distance between the projectors of two subspaces.
pub fn projector_distance(a: &Basis, b: &Basis) -> f64 {
    (projector(a) - projector(b)).norm()
}

/// `‖A† B‖_F`, zero exactly when the subspaces are orthogonal.
pub fn cross_gram_norm(a: &Basis, b: &Basis) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    ad_mul(a.vectors(), b.vectors()).norm()
}

/// Builds a column vector from a slice.
pub fn cvec(values: &[C64]) -> CVector {
    CVector::from_column_slice(values)
}

/// Builds a matrix from row slices.
pub fn cmat(rows: &[&[C64]]) -> CMatrix {
    let r = rows.len();
    let c = rows.first().map(|x| x.len()).unwrap_or(0);
    CMatrix::from_fn(r, c, |i, j| rows[i][j])
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}
