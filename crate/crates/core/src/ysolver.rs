//! The Y(2) collection on `K = E ⊕ J`, the Y-operator, and the fractional
//! relation between `L*` and `Y*`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::collections::{ModuliPair, Z2Collection};
use crate::error::{Error, Result};
use crate::numlin::{
    self, ad_mul, check_square_scaled, complement_within, intersect, intersect_complement, mul, Basis,
    CMatrix, CVector, Tolerances, C64,
};
use crate::zsolver::{fredholm_diagnostics, EffectiveResult, IndexDiagnostics, Method, ZSolver};

/// Angle tolerance growth from one hierarchy level to the next.
pub const LEVEL_ANGLE_RELAX: f64 = 10.0;

/// Derived spaces of one Z(2) collection, all in its ambient coordinates.
#[derive(Debug, Clone)]
pub struct Y2Collection {
    pub parent: Z2Collection,
    pub k: Basis,
    pub v: Basis,
    pub p1_1: Basis,
    pub p2_1: Basis,
    pub h1: Basis,
    pub e1: Basis,
    pub j1: Basis,
    pub u1: Basis,
    pub v_cap_e: Basis,
    pub v_cap_j: Basis,
    /// `λ_min(J† Π2 J)`; zero when `V ∩ J ≠ {0}`, one when `J = {0}`.
    pub beta: f64,
}

/// The next-level Z(2) collection in the coordinates of `H^(1)`.
#[derive(Debug, Clone)]
pub struct Level1Z {
    pub z: Z2Collection,
    /// Orthonormal frame `[P1^(1) P2^(1)]` of `H^(1)` in parent coordinates.
    pub frame: Basis,
}

impl Y2Collection {
    pub fn dim_v(&self) -> usize {
        self.v.dim()
    }

    pub fn dim_vj(&self) -> usize {
        self.v_cap_j.dim()
    }

    pub fn dim_ve(&self) -> usize {
        self.v_cap_e.dim()
    }

    /// `Π1 = V V†` (ambient).
    pub fn pi1(&self) -> CMatrix {
        self.v.projector()
    }

    /// `Π2 = H1 H1†` (ambient).
    pub fn pi2(&self) -> CMatrix {
        self.h1.projector()
    }

    pub fn dims(&self) -> BTreeMap<String, usize> {
        BTreeMap::from([
            ("k".to_string(), self.k.dim()),
            ("v".to_string(), self.v.dim()),
            ("p1_1".to_string(), self.p1_1.dim()),
            ("p2_1".to_string(), self.p2_1.dim()),
            ("h1".to_string(), self.h1.dim()),
            ("e1".to_string(), self.e1.dim()),
            ("j1".to_string(), self.j1.dim()),
            ("u1".to_string(), self.u1.dim()),
            ("v_cap_e".to_string(), self.v_cap_e.dim()),
            ("v_cap_j".to_string(), self.v_cap_j.dim()),
        ])
    }

    /// `V† J`, the coupling of `V` to the `J` coordinates.
    fn vj(&self) -> CMatrix {
        ad_mul(self.v.vectors(), self.parent.j.vectors())
    }

    /// `F = J† Π2 L⁻¹ Π2 J` on J-coordinates.
    pub fn f_matrix(&self, m: &ModuliPair) -> Result<CMatrix> {
        m.require_invertible()?;
        let c1 = ad_mul(self.p1_1.vectors(), self.parent.j.vectors());
        let c2 = ad_mul(self.p2_1.vectors(), self.parent.j.vectors());
        Ok(ad_mul(&c1, &c1) / m.l1 + ad_mul(&c2, &c2) / m.l2)
    }

    /// `G = X† L⁻¹ X` on `X = [U J]`.
    pub fn g_matrix(&self, m: &ModuliPair) -> Result<CMatrix> {
        ZSolver::new(&self.parent).b_matrix(m)
    }

    /// `H1† L H1`, which is diagonal in the frame `[P1^(1) P2^(1)]`.
    fn l_on_h1(&self, m: &ModuliPair) -> CMatrix {
        let (a, b) = (self.p1_1.dim(), self.p2_1.dim());
        let mut d = CMatrix::zeros(a + b, a + b);
        for i in 0..a {
            d[(i, i)] = m.l1;
        }
        for i in a..a + b {
            d[(i, i)] = m.l2;
        }
        d
    }
}

/// Builds the Y(2) collection and the level-1 Z(2) collection.
pub fn derive_y(c: &Z2Collection) -> Result<(Y2Collection, Level1Z)> {
    let tol = c.tol;
    let k = Basis::direct_sum(&[&c.e, &c.j])?;
    // P_a ∩ K = P_a ∩ U⊥, since K = H ⊖ U.
    let p1_1 = intersect_complement(&c.p1, &c.u, &tol)?;
    let p2_1 = intersect_complement(&c.p2, &c.u, &tol)?;
    let h1 = Basis::direct_sum(&[&p1_1, &p2_1])?;
    let v = complement_within(&h1, &k, &tol)?;
    let e1 = intersect(&c.e, &h1, &tol)?;
    let j1 = intersect(&c.j, &h1, &tol)?;
    let ej1 = Basis::direct_sum(&[&e1, &j1])?;
    let u1 = complement_within(&ej1, &h1, &tol)?;
    let v_cap_e = intersect(&v, &c.e, &tol)?;
    let v_cap_j = intersect(&v, &c.j, &tol)?;

    let beta = if c.j.is_empty() {
        1.0
    } else if !v_cap_j.is_empty() {
        0.0
    } else {
        let hj = ad_mul(h1.vectors(), c.j.vectors());
        numlin::min_eigenvalue(&ad_mul(&hj, &hj)).max(0.0)
    };

    let dh = h1.dim();
    let dp11 = p1_1.dim();
    let z = Z2Collection::new(
        u1.restrict_to(&h1),
        e1.restrict_to(&h1),
        j1.restrict_to(&h1),
        Basis::coordinate(dh, &(0..dp11).collect::<Vec<_>>()),
        Basis::coordinate(dh, &(dp11..dh).collect::<Vec<_>>()),
        tol.relax_angle(LEVEL_ANGLE_RELAX),
    )?;
    let y = Y2Collection {
        parent: c.clone(),
        k,
        v,
        p1_1,
        p2_1,
        h1: h1.clone(),
        e1,
        j1,
        u1,
        v_cap_e,
        v_cap_j,
        beta,
    };
    Ok((y, Level1Z { z, frame: h1 }))
}

/// Solvability of the Y-problem at one pair of moduli.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YSolvability {
    pub dim_vj: usize,
    pub dim_ve: usize,
    pub f_diag: IndexDiagnostics,
    pub g_diag: IndexDiagnostics,
    pub assumption_holds: bool,
    pub beta: f64,
}

pub fn check_solvability(y: &Y2Collection, m: &ModuliPair) -> Result<YSolvability> {
    let f = y.f_matrix(m)?;
    let g = y.g_matrix(m)?;
    let tol = &y.parent.tol;
    Ok(YSolvability {
        dim_vj: y.dim_vj(),
        dim_ve: y.dim_ve(),
        f_diag: fredholm_diagnostics(&f, m.inverse_magnitude(), tol),
        g_diag: fredholm_diagnostics(&g, m.inverse_magnitude(), tol),
        assumption_holds: y.dim_vj() == 0,
        beta: y.beta,
    })
}

/// `Y* = (V†J) F⁻¹ (J†V)` on V-coordinates.
pub fn y_operator(y: &Y2Collection, m: &ModuliPair) -> Result<EffectiveResult> {
    m.require_invertible()?;
    let dv = y.dim_v();
    if y.parent.j.is_empty() {
        return Ok(EffectiveResult {
            matrix: CMatrix::zeros(dv, dv),
            method: Method::Schur,
            condition_estimate: 1.0,
        });
    }
    let f = y.f_matrix(m)?;
    let chk = check_square_scaled(&f, m.inverse_magnitude(), &y.parent.tol);
    if chk.dim_ker > 0 {
        return Err(Error::SingularF {
            dim_ker: chk.dim_ker,
            dim_coker: chk.dim_ker,
        });
    }
    let c = y.vj();
    let x = numlin::solve(&f, &c.adjoint()).ok_or(Error::SingularF {
        dim_ker: 0,
        dim_coker: 0,
    })?;
    Ok(EffectiveResult {
        matrix: mul(&c, &x),
        method: Method::Schur,
        condition_estimate: chk.condition,
    })
}

/// Direct solution of the Y-problem for one applied field.
#[derive(Debug, Clone, PartialEq)]
pub struct YSolution {
    /// `E` in E-coordinates.
    pub e_field: CVector,
    /// `J` in J-coordinates.
    pub j_field: CVector,
    /// `Π1 J` in V-coordinates.
    pub j1: CVector,
    /// Residual of the stacked constraint system.
    pub residual: f64,
    /// Dimension of the null space of the constraint system.
    pub null_dim: usize,
    /// `‖j1 + Y* e1‖`.
    pub y_residual: f64,
}

/// Least-squares solve of the Y-problem constraints
/// `V†E = e1`, `H1†J = (H1†LH1) H1†E`, with `E ∈ E`, `J ∈ J`.
pub fn solve_y_direct(y: &Y2Collection, m: &ModuliPair, e1: &CVector) -> Result<YSolution> {
    let ystar = y_operator(y, m)?;
    let c = &y.parent;
    let (dv, dh, de, dj) = (y.dim_v(), y.h1.dim(), c.e.dim(), c.j.dim());
    if e1.len() != dv {
        return Err(Error::InconsistentDimensions(format!(
            "applied field has {} coordinates, dim V = {dv}",
            e1.len()
        )));
    }
    let ve = ad_mul(y.v.vectors(), c.e.vectors());
    let he = ad_mul(y.h1.vectors(), c.e.vectors());
    let hj = ad_mul(y.h1.vectors(), c.j.vectors());
    let mh = y.l_on_h1(m);
    let mut sys = CMatrix::zeros(dv + dh, de + dj);
    sys.view_mut((0, 0), (dv, de)).copy_from(&ve);
    sys.view_mut((dv, 0), (dh, de)).copy_from(&(-(mh * he)));
    sys.view_mut((dv, de), (dh, dj)).copy_from(&hj);
    let mut rhs = CVector::zeros(dv + dh);
    rhs.rows_mut(0, dv).copy_from(e1);

    let (x, null_dim) = if sys.nrows() == 0 || sys.ncols() == 0 {
        (CVector::zeros(de + dj), de + dj)
    } else {
        let scale = m.magnitude().max(1.0);
        let rank = numlin::rank_scaled(&sys, scale, &c.tol);
        let smax = numlin::singular_values(&sys)[0].max(scale);
        let x = numlin::lstsq(&sys, &rhs, c.tol.rank_tol * smax);
        (x, de + dj - rank)
    };
    let residual = (&sys * &x - &rhs).norm();
    let e_field = x.rows(0, de).into_owned();
    let j_field = x.rows(de, dj).into_owned();
    let j1 = y.vj() * &j_field;
    let y_residual = (&j1 + &ystar.matrix * e1).norm();
    Ok(YSolution {
        e_field,
        j_field,
        j1,
        residual,
        null_dim,
        y_residual,
    })
}

/// `L* = U†LU − (U†LV)(V†LV + Y*)⁻¹(V†LU)`.
pub fn fractional_relation(
    c: &Z2Collection,
    y: &Y2Collection,
    m: &ModuliPair,
) -> Result<EffectiveResult> {
    let ystar = y_operator(y, m)?;
    fraction_with(c, &y.v, m, &ystar.matrix, Method::FractionalRelation)
}

/// The fractional relation with a given `Y*` on V-coordinates.
pub(crate) fn fraction_with(
    c: &Z2Collection,
    v: &Basis,
    m: &ModuliPair,
    ystar: &CMatrix,
    method: Method,
) -> Result<EffectiveResult> {
    m.require_finite()?;
    let ops = crate::collections::BlockOperator::new(&c.p1, &[&c.u, v]);
    let l00 = ops.l_block(0, 0, m);
    if v.is_empty() {
        return Ok(EffectiveResult {
            matrix: l00,
            method,
            condition_estimate: 1.0,
        });
    }
    let shifted = ops.l_block(1, 1, m) + ystar;
    let chk = check_square_scaled(&shifted, m.magnitude().max(ystar.norm()), &c.tol);
    if chk.dim_ker > 0 {
        return Err(Error::SingularShiftedY { dim_ker: chk.dim_ker });
    }
    let x = numlin::solve(&shifted, &ops.l_block(1, 0, m))
        .ok_or(Error::SingularShiftedY { dim_ker: 0 })?;
    Ok(EffectiveResult {
        matrix: l00 - mul(&ops.l_block(0, 1, m), &x),
        method,
        condition_estimate: chk.condition,
    })
}

/// Largest of `‖Π2LΠ2 − Π2L‖` and `‖Π2L − LΠ2‖` on K-coordinates.
pub fn pi2_commutation_residual(y: &Y2Collection, m: &ModuliPair) -> f64 {
    let kk = &y.k;
    let kh = ad_mul(kk.vectors(), y.h1.vectors());
    let pi2 = &kh * kh.adjoint();
    let ops = crate::collections::BlockOperator::new(&y.parent.p1, &[kk]);
    let l = ops.l_block(0, 0, m);
    let a = (&pi2 * &l * &pi2 - &pi2 * &l).norm();
    let b = (&pi2 * &l - &l * &pi2).norm();
    a.max(b)
}

/// Tolerances of the level-1 collection relative to its parent.
pub fn level_tolerances(parent: &Tolerances) -> Tolerances {
    parent.relax_angle(LEVEL_ANGLE_RELAX)
}

/// `Y*` for the moduli `(c·l1, c·l2)` divided by `c`.
pub fn y_homogeneity_residual(y: &Y2Collection, m: &ModuliPair, scale: C64) -> Result<f64> {
    let a = y_operator(y, m)?.matrix;
    let b = y_operator(y, &m.scaled(scale))?.matrix / scale;
    Ok((b - &a).norm() / a.norm().max(f64::MIN_POSITIVE))
}
