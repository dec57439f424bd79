//! The Z-problem `j + J = L(e + E)` and the effective operator `L*`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::collections::{matrix_to_json, BlockOperator, ModuliPair, Z2Collection};
use crate::error::{Error, Result};
use crate::numlin::{
    self, check_square_scaled, min_eigenvalue, null_space_scaled, rank_scaled, CMatrix, CVector, Tolerances, C64,
};

/// How an effective operator was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Schur,
    InverseFormula,
    Direct,
    Spectral,
    FractionalRelation,
    ContinuedFraction,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Schur => "schur",
            Method::InverseFormula => "inverse_formula",
            Method::Direct => "direct",
            Method::Spectral => "spectral",
            Method::FractionalRelation => "fractional_relation",
            Method::ContinuedFraction => "continued_fraction",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveResult {
    /// Square matrix in the coordinates of the effective subspace.
    pub matrix: CMatrix,
    pub method: Method,
    pub condition_estimate: f64,
}

impl EffectiveResult {
    pub fn to_json(&self) -> Value {
        json!({
            "matrix": matrix_to_json(&self.matrix),
            "method": self.method.tag(),
            "condition_estimate": finite_or_null(self.condition_estimate),
        })
    }

    /// Smallest eigenvalue of `Im L*`; `+∞` when the matrix is empty.
    pub fn lambda_min_im(&self) -> f64 {
        min_eigenvalue(&numlin::im_part(&self.matrix))
    }
}

pub(crate) fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// Kernel and cokernel dimensions of a finite matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexDiagnostics {
    pub dim_ker: usize,
    pub dim_coker: usize,
    pub index: i64,
    pub invertible: bool,
}

/// Rank is measured against `max(σ_max, scale)`.
pub fn fredholm_diagnostics(m: &CMatrix, scale: f64, tol: &Tolerances) -> IndexDiagnostics {
    let rank = rank_scaled(m, scale, tol);
    let dim_ker = m.ncols() - rank;
    let dim_coker = m.nrows() - rank;
    IndexDiagnostics {
        dim_ker,
        dim_coker,
        index: dim_ker as i64 - dim_coker as i64,
        invertible: m.nrows() == m.ncols() && dim_ker == 0,
    }
}

/// Solution of the Z-problem for one applied field.
#[derive(Debug, Clone, PartialEq)]
pub struct ZSolution {
    /// `j` in U-coordinates.
    pub j: CVector,
    /// `E` in E-coordinates.
    pub e_field: CVector,
    /// `J` in J-coordinates.
    pub j_field: CVector,
    /// `‖(j + J) − L(e + E)‖` in the ambient space.
    pub residual: f64,
}

/// Cached block structure of one collection for repeated evaluation.
#[derive(Debug, Clone)]
pub struct ZSolver<'a> {
    c: &'a Z2Collection,
    blocks: BlockOperator,
}

const U: usize = 0;
const E: usize = 1;
const J: usize = 2;

impl<'a> ZSolver<'a> {
    pub fn new(c: &'a Z2Collection) -> Self {
        Self {
            c,
            blocks: BlockOperator::new(&c.p1, &[&c.u, &c.e, &c.j]),
        }
    }

    pub fn collection(&self) -> &Z2Collection {
        self.c
    }

    /// `L_ab = X_a† L X_b` for `X0 = U`, `X1 = E`, `X2 = J`.
    pub fn block(&self, a: usize, b: usize, m: &ModuliPair) -> CMatrix {
        self.blocks.l_block(a, b, m)
    }

    pub fn l11(&self, m: &ModuliPair) -> CMatrix {
        self.block(E, E, m)
    }

    /// Fails with `SingularL11` unless `L11` is invertible at `rank_tol`.
    fn checked_l11(&self, m: &ModuliPair) -> Result<(CMatrix, f64)> {
        let l11 = self.l11(m);
        let chk = check_square_scaled(&l11, m.magnitude(), &self.c.tol);
        if chk.dim_ker > 0 {
            let ker = null_space_scaled(&l11, m.magnitude(), &self.c.tol);
            let witness = ker
                .column(0)
                .iter()
                .map(|z| [z.re, z.im])
                .collect::<Vec<_>>();
            return Err(Error::SingularL11 {
                dim_ker: chk.dim_ker,
                witness,
            });
        }
        Ok((l11, chk.condition))
    }

    pub fn schur(&self, m: &ModuliPair) -> Result<EffectiveResult> {
        m.require_finite()?;
        let (l11, condition) = self.checked_l11(m)?;
        let l00 = self.block(U, U, m);
        let l01 = self.block(U, E, m);
        let l10 = self.block(E, U, m);
        let x = numlin::solve(&l11, &l10).ok_or(Error::SingularL11 {
            dim_ker: 0,
            witness: Vec::new(),
        })?;
        Ok(EffectiveResult {
            matrix: l00 - numlin::mul(&l01, &x),
            method: Method::Schur,
            condition_estimate: condition,
        })
    }

    /// `X† L⁻¹ X` on `X = [U J]`.
    pub fn b_matrix(&self, m: &ModuliPair) -> Result<CMatrix> {
        m.require_invertible()?;
        let (du, dj) = (self.c.u.dim(), self.c.j.dim());
        let mut b = CMatrix::zeros(du + dj, du + dj);
        for (a, oa, da) in [(U, 0, du), (J, du, dj)] {
            for (bb, ob, db) in [(U, 0, du), (J, du, dj)] {
                b.view_mut((oa, ob), (da, db))
                    .copy_from(&self.blocks.l_inv_block(a, bb, m));
            }
        }
        Ok(b)
    }

    pub fn inverse_formula(&self, m: &ModuliPair) -> Result<EffectiveResult> {
        let b = self.b_matrix(m)?;
        let chk = check_square_scaled(&b, m.inverse_magnitude(), &self.c.tol);
        if chk.dim_ker > 0 {
            return Err(Error::SingularB { dim_ker: chk.dim_ker });
        }
        let binv = numlin::inverse(&b).ok_or(Error::SingularB { dim_ker: 0 })?;
        let du = self.c.u.dim();
        Ok(EffectiveResult {
            matrix: binv.view((0, 0), (du, du)).into_owned(),
            method: Method::InverseFormula,
            condition_estimate: chk.condition,
        })
    }

    /// Dense ambient solve of `U j + J y − L E x = L U e`.
    pub fn solve_direct(&self, m: &ModuliPair, e: &CVector) -> Result<ZSolution> {
        m.require_finite()?;
        let c = self.c;
        let (du, de, dj) = (c.u.dim(), c.e.dim(), c.j.dim());
        if e.len() != du {
            return Err(Error::InconsistentDimensions(format!(
                "applied field has {} coordinates, dim U = {du}",
                e.len()
            )));
        }
        self.checked_l11(m)?;
        let n = c.ambient_dim();
        if du + de + dj != n {
            return Err(Error::InconsistentDimensions(format!(
                "dim U + dim E + dim J = {} but ambient_dim = {n}",
                du + de + dj
            )));
        }
        let l = crate::collections::build_l(c, m);
        let le = numlin::mul(&l, c.e.vectors());
        let mut sys = CMatrix::zeros(n, n);
        sys.columns_mut(0, du).copy_from(c.u.vectors());
        sys.columns_mut(du, de).copy_from(&(-le));
        sys.columns_mut(du + de, dj).copy_from(c.j.vectors());
        let ue = c.u.vectors() * e;
        let rhs = &l * &ue;
        let x = numlin::solve(&sys, &CMatrix::from_column_slice(n, 1, rhs.as_slice()))
            .ok_or(Error::SingularL11 {
                dim_ker: 0,
                witness: Vec::new(),
            })?;
        let j = CVector::from_iterator(du, x.rows(0, du).iter().copied());
        let e_field = CVector::from_iterator(de, x.rows(du, de).iter().copied());
        let j_field = CVector::from_iterator(dj, x.rows(du + de, dj).iter().copied());
        let lhs = c.u.vectors() * &j + c.j.vectors() * &j_field;
        let rhs = &l * (ue + c.e.vectors() * &e_field);
        Ok(ZSolution {
            residual: (lhs - rhs).norm(),
            j,
            e_field,
            j_field,
        })
    }

    /// Assembles `L*` column by column from [`ZSolver::solve_direct`].
    pub fn direct(&self, m: &ModuliPair) -> Result<EffectiveResult> {
        let du = self.c.u.dim();
        let mut out = CMatrix::zeros(du, du);
        for k in 0..du {
            let mut e = CVector::zeros(du);
            e[k] = C64::new(1.0, 0.0);
            let sol = self.solve_direct(m, &e)?;
            out.set_column(k, &sol.j);
        }
        let condition = numlin::condition_number(&self.l11(m));
        Ok(EffectiveResult {
            matrix: out,
            method: Method::Direct,
            condition_estimate: condition,
        })
    }
}

pub fn solve_z_direct(c: &Z2Collection, m: &ModuliPair, e: &CVector) -> Result<ZSolution> {
    ZSolver::new(c).solve_direct(m, e)
}

/// `L* = L00 − L01 L11⁻¹ L10` in U-coordinates.
pub fn effective_schur(c: &Z2Collection, m: &ModuliPair) -> Result<EffectiveResult> {
    ZSolver::new(c).schur(m)
}

/// `L*` as the U-block of `(X† L⁻¹ X)⁻¹` with `X = [U J]`.
pub fn effective_inverse_formula(c: &Z2Collection, m: &ModuliPair) -> Result<EffectiveResult> {
    ZSolver::new(c).inverse_formula(m)
}

pub fn effective_direct(c: &Z2Collection, m: &ModuliPair) -> Result<EffectiveResult> {
    ZSolver::new(c).direct(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledInverseReport {
    /// Relative error of the explicit `A⁻¹` expression; `None` unless both
    /// `A` and `B` are invertible.
    pub a_inv_residual: Option<f64>,
    pub b_inv_residual: Option<f64>,
    pub a_diag: IndexDiagnostics,
    pub b_diag: IndexDiagnostics,
    pub kernels_match: bool,
}

fn relative_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    let scale = b.norm().max(f64::MIN_POSITIVE);
    (a - b).norm() / scale
}

/// Compares the explicit inverses of the coupled pair `A = E†LE`,
/// `B = X†L⁻¹X` against direct inverses.
pub fn coupled_inverse_check(c: &Z2Collection, m: &ModuliPair) -> Result<CoupledInverseReport> {
    m.require_invertible()?;
    let x = c.uj_frame();
    let ops = BlockOperator::new(&c.p1, &[&c.e, &x]);
    let (xe, xx) = (0, 1);
    let a = ops.l_block(xe, xe, m);
    let b = ops.l_inv_block(xx, xx, m);
    let a_diag = fredholm_diagnostics(&a, m.magnitude(), &c.tol);
    let b_diag = fredholm_diagnostics(&b, m.inverse_magnitude(), &c.tol);
    let mut report = CoupledInverseReport {
        a_inv_residual: None,
        b_inv_residual: None,
        a_diag,
        b_diag,
        kernels_match: a_diag.dim_ker == b_diag.dim_ker,
    };
    if !(a_diag.invertible && b_diag.invertible) {
        return Ok(report);
    }
    let (Some(a_inv), Some(b_inv)) = (numlin::inverse(&a), numlin::inverse(&b)) else {
        return Ok(report);
    };
    // T = L and S = L⁻¹ written in blocks over E ⊕ (U ⊕ J).
    let s_ee = ops.l_inv_block(xe, xe, m);
    let s_ex = ops.l_inv_block(xe, xx, m);
    let s_xe = ops.l_inv_block(xx, xe, m);
    let t_xx = ops.l_block(xx, xx, m);
    let t_xe = ops.l_block(xx, xe, m);
    let t_ex = ops.l_block(xe, xx, m);
    let a_formula = s_ee - numlin::mul(&s_ex, &numlin::mul(&b_inv, &s_xe));
    let b_formula = t_xx - numlin::mul(&t_xe, &numlin::mul(&a_inv, &t_ex));
    report.a_inv_residual = Some(relative_diff(&a_formula, &a_inv));
    report.b_inv_residual = Some(relative_diff(&b_formula, &b_inv));
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleProperties {
    pub moduli: ModuliPair,
    pub scale: C64,
    /// `‖L*(m) − L*(c·m)/c‖_F / ‖L*(m)‖_F`.
    pub homogeneity_residual: Option<f64>,
    pub lambda_min_im: Option<f64>,
    /// `min(Im l1, Im l2)`; present only for upper-half-plane samples.
    pub herglotz_bound: Option<f64>,
    pub herglotz_holds: Option<bool>,
    pub error: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub normalization_residual: f64,
    pub samples: Vec<SampleProperties>,
}

pub const HERGLOTZ_SLACK: f64 = 1e-9;

fn sample_properties(solver: &ZSolver<'_>, m: ModuliPair, scale: C64) -> SampleProperties {
    let mut out = SampleProperties {
        moduli: m,
        scale,
        homogeneity_residual: None,
        lambda_min_im: None,
        herglotz_bound: None,
        herglotz_holds: None,
        error: None,
    };
    let base = match solver.schur(&m) {
        Ok(r) => r,
        Err(e) => {
            out.error = Some(e.to_json());
            return out;
        }
    };
    match solver.schur(&m.scaled(scale)) {
        Ok(r) => {
            let back = r.matrix / scale;
            let denom = base.matrix.norm().max(f64::MIN_POSITIVE);
            out.homogeneity_residual = Some((back - &base.matrix).norm() / denom);
        }
        Err(e) => out.error = Some(e.to_json()),
    }
    let lam = base.lambda_min_im();
    out.lambda_min_im = Some(lam);
    if m.in_upper_half_plane() {
        out.herglotz_bound = Some(m.min_im());
        out.herglotz_holds = Some(lam >= m.min_im() - HERGLOTZ_SLACK);
    }
    out
}

/// Homogeneity, normalization and Herglotz diagnostics over a sample set.
pub fn property_report(c: &Z2Collection, samples: &[(ModuliPair, C64)]) -> Result<PropertyReport> {
    let solver = ZSolver::new(c);
    let one = solver.schur(&ModuliPair::real(1.0, 1.0))?;
    let du = c.u.dim();
    let normalization_residual = (one.matrix - CMatrix::identity(du, du)).norm();
    let samples = samples
        .par_iter()
        .map(|&(m, s)| sample_properties(&solver, m, s))
        .collect();
    Ok(PropertyReport {
        normalization_residual,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collections::{parallel_model, random_collection, series_model};
    use crate::numlin::{c, r};
    use proptest::prelude::*;

    fn scalar(res: &EffectiveResult) -> C64 {
        assert_eq!(res.matrix.shape(), (1, 1));
        res.matrix[(0, 0)]
    }

    #[test]
    fn series_model_schur_is_harmonic_mean() {
        let col = series_model();
        let res = effective_schur(&col, &ModuliPair::real(1.0, 3.0)).unwrap();
        assert!((scalar(&res) - r(1.5)).norm() < 1e-14);
        assert_eq!(res.method, Method::Schur);
    }

    #[test]
    fn series_model_direct_fields() {
        let col = series_model();
        let e = CVector::from_element(1, r(1.0));
        let sol = solve_z_direct(&col, &ModuliPair::real(1.0, 3.0), &e).unwrap();
        assert!((sol.j[0] - r(1.5)).norm() < 1e-14);
        // The E-coordinate sign depends on the basis orientation of E.
        assert!((sol.e_field[0].norm() - 0.5).abs() < 1e-14);
        assert_eq!(sol.j_field.len(), 0);
        assert!(sol.residual < 1e-14);
    }

    #[test]
    fn parallel_model_is_arithmetic_mean() {
        let col = parallel_model();
        let e = CVector::from_element(1, r(1.0));
        let sol = solve_z_direct(&col, &ModuliPair::real(1.0, 3.0), &e).unwrap();
        assert!((sol.j[0] - r(2.0)).norm() < 1e-14);
        assert_eq!(sol.e_field.len(), 0);
    }

    #[test]
    fn normalization_gives_identity_fields() {
        let col = random_collection(8, 2, 3, 3, 4, 7).unwrap();
        let e = CVector::from_vec(vec![c(0.3, -1.0), c(2.0, 0.5)]);
        let sol = solve_z_direct(&col, &ModuliPair::real(1.0, 1.0), &e).unwrap();
        assert!((&sol.j - &e).norm() < 1e-12);
        assert!(sol.e_field.norm() < 1e-12);
        assert!(sol.j_field.norm() < 1e-12);
    }

    #[test]
    fn series_model_degenerate_moduli() {
        let col = series_model();
        let m = ModuliPair::real(1.0, -1.0);
        match effective_schur(&col, &m) {
            Err(Error::SingularL11 { dim_ker, witness }) => {
                assert_eq!(dim_ker, 1);
                assert_eq!(witness.len(), 1);
            }
            other => panic!("expected SingularL11, got {other:?}"),
        }
        let rep = coupled_inverse_check(&col, &m).unwrap();
        assert_eq!(rep.a_diag.dim_ker, 1);
        assert_eq!(rep.b_diag.dim_ker, 1);
        assert!(!rep.a_diag.invertible && !rep.b_diag.invertible);
        assert!(rep.kernels_match);
        assert!(rep.a_inv_residual.is_none());
    }

    #[test]
    fn inverse_formula_examples() {
        let col = series_model();
        let res = effective_inverse_formula(&col, &ModuliPair::real(1.0, 3.0)).unwrap();
        assert!((scalar(&res) - r(1.5)).norm() < 1e-14);
        let col = random_collection(8, 2, 3, 3, 4, 7).unwrap();
        let one = effective_inverse_formula(&col, &ModuliPair::real(1.0, 1.0)).unwrap();
        assert!((one.matrix - CMatrix::identity(2, 2)).norm() < 1e-12);
        let m = ModuliPair::new(c(2.0, 1.0), r(1.0));
        let a = effective_schur(&col, &m).unwrap().matrix;
        let b = effective_inverse_formula(&col, &m).unwrap().matrix;
        assert!((a - b).norm() <= 1e-9);
        assert!(matches!(
            effective_inverse_formula(&col, &ModuliPair::real(0.0, 1.0)),
            Err(Error::ZeroModulus)
        ));
    }

    #[test]
    fn coupled_inverses_series_and_identity() {
        let col = series_model();
        let rep = coupled_inverse_check(&col, &ModuliPair::real(1.0, 3.0)).unwrap();
        assert!(rep.a_inv_residual.unwrap() <= 1e-12);
        assert!(rep.b_inv_residual.unwrap() <= 1e-12);
        let col = random_collection(7, 2, 2, 3, 3, 4).unwrap();
        let rep = coupled_inverse_check(&col, &ModuliPair::real(1.0, 1.0)).unwrap();
        assert_eq!(rep.a_inv_residual, Some(0.0));
        assert_eq!(rep.b_inv_residual, Some(0.0));
    }

    #[test]
    fn empty_u_gives_empty_operator() {
        let col = random_collection(4, 0, 2, 2, 2, 3).unwrap();
        let res = effective_schur(&col, &ModuliPair::real(1.0, 2.0)).unwrap();
        assert_eq!(res.matrix.shape(), (0, 0));
    }

    #[test]
    fn property_report_series_examples() {
        let col = series_model();
        let rep = property_report(
            &col,
            &[
                (ModuliPair::real(1.0, 2.0), r(5.0)),
                (ModuliPair::new(c(0.0, 1.0), c(0.0, 2.0)), c(0.5, 2.0)),
            ],
        )
        .unwrap();
        assert_eq!(rep.normalization_residual, 0.0);
        assert!(rep.samples[0].homogeneity_residual.unwrap() <= 1e-12);
        assert!(rep.samples[0].herglotz_holds.is_none());
        let s = &rep.samples[1];
        assert!((s.lambda_min_im.unwrap() - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.herglotz_holds, Some(true));
    }

    #[test]
    fn fredholm_examples() {
        let tol = Tolerances::default();
        let d = fredholm_diagnostics(&CMatrix::identity(3, 3), 0.0, &tol);
        assert_eq!((d.dim_ker, d.dim_coker, d.index, d.invertible), (0, 0, 0, true));
        let d = fredholm_diagnostics(&CMatrix::zeros(2, 2), 0.0, &tol);
        assert_eq!((d.dim_ker, d.dim_coker, d.index, d.invertible), (2, 2, 0, false));
        let m = numlin::cmat(&[&[r(1.0), r(0.0)], &[r(0.0), r(0.0)]]);
        let d = fredholm_diagnostics(&m, 0.0, &tol);
        assert_eq!((d.dim_ker, d.dim_coker, d.index, d.invertible), (1, 1, 0, false));
        let d = fredholm_diagnostics(&CMatrix::zeros(2, 3), 0.0, &tol);
        assert_eq!((d.dim_ker, d.dim_coker, d.index), (3, 2, 1));
    }

    fn upper_moduli() -> impl Strategy<Value = ModuliPair> {
        (-3.0f64..3.0, 0.05f64..3.0, -3.0f64..3.0, 0.05f64..3.0)
            .prop_map(|(a, b, x, y)| ModuliPair::new(c(a, b), c(x, y)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn schur_matches_direct_columns(seed in 0u64..500, m in upper_moduli()) {
            let col = random_collection(9, 2, 3, 4, 4, seed).unwrap();
            let schur = effective_schur(&col, &m).unwrap().matrix;
            let direct = effective_direct(&col, &m).unwrap().matrix;
            prop_assert!((schur - direct).norm() <= 1e-9);
        }

        #[test]
        fn herglotz_lower_bound(seed in 0u64..500, m in upper_moduli()) {
            let col = random_collection(10, 3, 4, 3, 5, seed).unwrap();
            let lam = effective_schur(&col, &m).unwrap().lambda_min_im();
            prop_assert!(lam >= m.min_im() - HERGLOTZ_SLACK);
        }

        #[test]
        fn a_and_b_singular_together(seed in 0u64..500, m in upper_moduli()) {
            let col = random_collection(8, 2, 3, 3, 4, seed).unwrap();
            let rep = coupled_inverse_check(&col, &m).unwrap();
            prop_assert!(rep.kernels_match);
            prop_assert_eq!(rep.a_diag.invertible, rep.b_diag.invertible);
        }
    }
}
