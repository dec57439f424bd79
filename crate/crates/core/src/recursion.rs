//! The subspace hierarchy, its congruence maps, and the continued-fraction
//! evaluation of `L*`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::collections::{matrix_to_json, ModuliPair, Z2Collection};
use crate::error::{Error, Intersection, Result};
use crate::numlin::{
    self, ad_mul, complement_within, intersect, mul, mul_ad, orthonormalize, projector_distance,
    rank_of, span_sum, Basis, CMatrix, Tolerances, C64,
};
use crate::ysolver::{derive_y, fraction_with, y_operator, Level1Z, Y2Collection};
use crate::zsolver::{finite_or_null, EffectiveResult, Method, ZSolver};

/// Outcome of the generic separation `M ⊕ N2 = Q1M ⊕ Q2M`.
#[derive(Debug, Clone)]
pub struct Separation {
    pub n1: Basis,
    pub n2: Basis,
    pub dim_q1m: usize,
    pub dim_q2m: usize,
    /// `‖proj(M) + proj(N2) − proj(Q1M + Q2M)‖_F`.
    pub projector_residual: f64,
    /// `dim N2 = dim Q1M + dim Q2M − dim M`.
    pub dim_identity_holds: bool,
}

fn is_projector(q: &CMatrix, n: usize) -> bool {
    q.shape() == (n, n)
        && (q - q.adjoint()).norm() <= 1e-10 * (1.0 + q.norm())
        && (q * q - q).norm() <= 1e-10 * (1.0 + q.norm())
}

/// Splits `N` into the parts `N1 = (Q1L ∩ N) ⊕ (Q2L ∩ N)` and `N2 = N ⊖ N1`,
/// where `Q_iL` is the range of `Q_i` on `M ⊕ N`.
pub fn separate(
    m: &Basis,
    n: &Basis,
    q1: &CMatrix,
    q2: &CMatrix,
    tol: &Tolerances,
) -> Result<Separation> {
    let amb = m.ambient_dim();
    if n.ambient_dim() != amb {
        return Err(Error::AmbientMismatch {
            left: amb,
            right: n.ambient_dim(),
        });
    }
    if !is_projector(q1, amb) || !is_projector(q2, amb) {
        return Err(Error::PreconditionViolated(
            "Q1 and Q2 must be orthogonal projections on the ambient space".into(),
        ));
    }
    if numlin::cross_gram_norm(m, n) > tol.ortho_tol.max(1e-10) {
        return Err(Error::PreconditionViolated("M and N must be orthogonal".into()));
    }
    let mn = Basis::direct_sum(&[m, n])?;
    let sum_on = (q1 + q2) * mn.vectors() - mn.vectors();
    if sum_on.norm() > 1e-10 * (1.0 + mn.dim() as f64).sqrt() {
        return Err(Error::PreconditionViolated("Q1 + Q2 must act as the identity on M ⊕ N".into()));
    }
    let q1l = orthonormalize(&mul(q1, mn.vectors()), tol)?;
    let q2l = orthonormalize(&mul(q2, mn.vectors()), tol)?;
    let a = intersect(&q1l, n, tol)?;
    let b = intersect(&q2l, n, tol)?;
    let n1 = Basis::direct_sum(&[&a, &b])?;
    let n2 = complement_within(&n1, n, tol)?;

    let q1m = mul(q1, m.vectors());
    let q2m = mul(q2, m.vectors());
    let dim_q1m = rank_of(&q1m, tol);
    let dim_q2m = rank_of(&q2m, tol);
    let both = orthonormalize(&CMatrix::from_fn(amb, 2 * m.dim(), |i, j| {
        if j < m.dim() {
            q1m[(i, j)]
        } else {
            q2m[(i, j - m.dim())]
        }
    }), tol)?;
    let projector_residual = (m.projector() + n2.projector() - both.projector()).norm();
    let dim_identity_holds = n2.dim() + m.dim() == dim_q1m + dim_q2m;
    Ok(Separation {
        n1,
        n2,
        dim_q1m,
        dim_q2m,
        projector_residual,
        dim_identity_holds,
    })
}

/// Congruence maps `K: U^(1) → V` and `K′` of one level, as coordinate
/// matrices of shape `dim V × dim U^(1)`.
#[derive(Debug, Clone)]
pub struct KMaps {
    pub k_map: CMatrix,
    pub k_prime: CMatrix,
    /// `‖K′K† + I_V‖_F`.
    pub identity_residual: f64,
}

/// `K = −(V†Γ1V)⁻¹ V†Γ1 U1` and `K′ = −(V†Γ2V)⁻¹ V†Γ2 U1`.
pub fn k_maps(y: &Y2Collection) -> Result<KMaps> {
    if y.dim_vj() > 0 {
        return Err(Error::DegenerateIntersection {
            which: Intersection::VJ,
            dim: y.dim_vj(),
        });
    }
    if y.dim_ve() > 0 {
        return Err(Error::DegenerateIntersection {
            which: Intersection::VE,
            dim: y.dim_ve(),
        });
    }
    let one = |x: &Basis| -> Result<CMatrix> {
        let vx = ad_mul(y.v.vectors(), x.vectors());
        let xu = ad_mul(x.vectors(), y.u1.vectors());
        let gram = mul_ad(&vx, &vx);
        let rhs = mul(&vx, &xu);
        numlin::solve(&gram, &rhs)
            .map(|s| -s)
            .ok_or(Error::PreconditionViolated("V†Γ V is singular".into()))
    };
    let k_map = one(&y.parent.e)?;
    let k_prime = one(&y.parent.j)?;
    let dv = y.dim_v();
    let identity_residual = if k_map.ncols() == dv {
        (mul_ad(&k_prime, &k_map) + CMatrix::identity(dv, dv)).norm()
    } else {
        f64::INFINITY
    };
    Ok(KMaps {
        k_map,
        k_prime,
        identity_residual,
    })
}

/// Dimension ledger of one level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelDims {
    pub u: usize,
    pub e: usize,
    pub j: usize,
    pub v: usize,
    pub u_next: usize,
    pub e_next: usize,
    /// `dim E^(k) − dim E^(k+1)`.
    pub w_next: usize,
    pub lambda1_u: usize,
    pub lambda2_u: usize,
    pub gamma1_v: usize,
    pub gamma2_v: usize,
    pub p1_cap_u: usize,
    pub p2_cap_u: usize,
    pub v_cap_e: usize,
    pub v_cap_j: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelFlags {
    pub p_cap_u_trivial: bool,
    pub e_cap_v_trivial: bool,
    pub j_cap_v_trivial: bool,
}

impl LevelFlags {
    pub fn all(&self) -> bool {
        self.p_cap_u_trivial && self.e_cap_v_trivial && self.j_cap_v_trivial
    }
}

/// Moduli-independent matrices from which `L*` blocks are assembled:
/// `M0a = U†Λ_aU`, `M1a = U†Λ_aV`, `MVa = V†Λ_aV` for `a = 1, 2`.
#[derive(Debug, Clone)]
pub struct LevelStructure {
    pub m0: [CMatrix; 2],
    pub m1: [CMatrix; 2],
    pub mv: [CMatrix; 2],
}

/// Residuals of the two separation checks at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationChecks {
    /// Distance between `V` from the construction and from separating `K`.
    pub v_residual: f64,
    /// Distance between `U^(1)` from the construction and from separating `H^(1)`.
    pub u_next_residual: f64,
    pub v_projector_residual: f64,
    pub u_next_projector_residual: f64,
    pub v_dim_identity: bool,
    pub u_next_dim_identity: bool,
}

#[derive(Debug, Clone)]
pub struct RecursionLevel {
    pub k: usize,
    pub z: Z2Collection,
    pub y: Y2Collection,
    pub next: Level1Z,
    /// `None` when `V ∩ J` or `V ∩ E` is nontrivial.
    pub k_map: Option<CMatrix>,
    pub k_prime: Option<CMatrix>,
    pub k_identity_residual: Option<f64>,
    pub dims: LevelDims,
    pub flags: LevelFlags,
    pub separation: SeparationChecks,
    pub structure: LevelStructure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    DepthReached,
    DimZero,
    Degenerate { flags: Vec<Intersection> },
}

/// Eigendecomposition of `E†Λ1E` at level 0 with its couplings to `U`.
#[derive(Debug, Clone)]
pub struct SpectralStructure {
    /// `U†Λ1U`.
    pub m01: CMatrix,
    /// Eigenvalues of `E†Λ1E`, clamped into `[0, 1]`.
    pub eigenvalues: Vec<f64>,
    /// Columns `w_j = U†Λ1E q_j` for the eigenvectors `q_j`.
    pub couplings: CMatrix,
    /// Raw eigenvalues lay within `[−1e−10, 1 + 1e−10]` before clamping.
    pub eigenvalues_in_range: bool,
    pub tol: Tolerances,
}

impl SpectralStructure {
    /// `‖w_j‖²` per eigenvalue.
    pub fn weights(&self) -> Vec<f64> {
        self.couplings
            .column_iter()
            .map(|c| c.norm_squared())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct RecursionHierarchy {
    pub root: Z2Collection,
    pub levels: Vec<RecursionLevel>,
    pub termination: Termination,
    pub structure: SpectralStructure,
}

fn level_structure(z: &Z2Collection, v: &Basis) -> LevelStructure {
    let pu = [z.p1.coords(z.u.vectors()), z.p2.coords(z.u.vectors())];
    let pv = [z.p1.coords(v.vectors()), z.p2.coords(v.vectors())];
    LevelStructure {
        m0: [ad_mul(&pu[0], &pu[0]), ad_mul(&pu[1], &pu[1])],
        m1: [ad_mul(&pu[0], &pv[0]), ad_mul(&pu[1], &pv[1])],
        mv: [ad_mul(&pv[0], &pv[0]), ad_mul(&pv[1], &pv[1])],
    }
}

fn build_level(k: usize, z: Z2Collection) -> Result<RecursionLevel> {
    let tol = z.tol;
    let (y, next) = derive_y(&z)?;

    let sep_v = separate(&z.u, &y.k, &z.p1.projector(), &z.p2.projector(), &tol)?;
    let sep_u = separate(&y.v, &y.h1, &z.e.projector(), &z.j.projector(), &tol)?;

    let p1_cap_u = intersect(&z.p1, &z.u, &tol)?.dim();
    let p2_cap_u = intersect(&z.p2, &z.u, &tol)?.dim();
    let flags = LevelFlags {
        p_cap_u_trivial: p1_cap_u == 0 && p2_cap_u == 0,
        e_cap_v_trivial: y.dim_ve() == 0,
        j_cap_v_trivial: y.dim_vj() == 0,
    };
    let e_next = next.z.e.dim();
    let dims = LevelDims {
        u: z.u.dim(),
        e: z.e.dim(),
        j: z.j.dim(),
        v: y.dim_v(),
        u_next: next.z.u.dim(),
        e_next,
        w_next: z.e.dim().saturating_sub(e_next),
        lambda1_u: sep_v.dim_q1m,
        lambda2_u: sep_v.dim_q2m,
        gamma1_v: sep_u.dim_q1m,
        gamma2_v: sep_u.dim_q2m,
        p1_cap_u,
        p2_cap_u,
        v_cap_e: y.dim_ve(),
        v_cap_j: y.dim_vj(),
    };
    let separation = SeparationChecks {
        v_residual: projector_distance(&sep_v.n2, &y.v),
        u_next_residual: projector_distance(&sep_u.n2, &y.u1),
        v_projector_residual: sep_v.projector_residual,
        u_next_projector_residual: sep_u.projector_residual,
        v_dim_identity: sep_v.dim_identity_holds,
        u_next_dim_identity: sep_u.dim_identity_holds,
    };
    let (k_map, k_prime, k_identity_residual) = match k_maps(&y) {
        Ok(km) => (Some(km.k_map), Some(km.k_prime), Some(km.identity_residual)),
        Err(Error::DegenerateIntersection { .. }) => (None, None, None),
        Err(e) => return Err(e),
    };
    let structure = level_structure(&z, &y.v);
    Ok(RecursionLevel {
        k,
        z,
        y,
        next,
        k_map,
        k_prime,
        k_identity_residual,
        dims,
        flags,
        separation,
        structure,
    })
}

/// Builds levels until `max_depth` levels exist, the next `U` is empty, or
/// a degeneracy flag trips.
///
/// A nontrivial `V ∩ J` stops first because the next Y-operator is then
/// undefined; an empty next `U` is reported before the remaining flags.
pub fn build_hierarchy(c: &Z2Collection, max_depth: usize) -> Result<RecursionHierarchy> {
    let structure = spectral_precompute(c);
    let mut levels: Vec<RecursionLevel> = Vec::new();
    let mut z = c.clone();
    let termination = loop {
        if levels.len() >= max_depth {
            break Termination::DepthReached;
        }
        let level = build_level(levels.len(), z)?;
        let flags = level.flags;
        let next = level.next.z.clone();
        let u_next = level.dims.u_next;
        levels.push(level);

        let mut tripped = Vec::new();
        if !flags.j_cap_v_trivial {
            tripped.push(Intersection::VJ);
        }
        if !flags.e_cap_v_trivial {
            tripped.push(Intersection::VE);
        }
        let last = levels.last().expect("just pushed");
        if last.dims.p1_cap_u > 0 {
            tripped.push(Intersection::P1U);
        }
        if last.dims.p2_cap_u > 0 {
            tripped.push(Intersection::P2U);
        }
        if !flags.j_cap_v_trivial {
            break Termination::Degenerate { flags: tripped };
        }
        if u_next == 0 {
            break Termination::DimZero;
        }
        if !tripped.is_empty() {
            break Termination::Degenerate { flags: tripped };
        }
        z = next;
    };
    Ok(RecursionHierarchy {
        root: c.clone(),
        levels,
        termination,
        structure,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CongruenceReport {
    /// `‖Y*^(k) − K L*^(k+1) K†‖_F`.
    pub residual: f64,
    pub relative: f64,
    /// `‖K′K† + I‖_F` at level `k`.
    pub identity_residual: f64,
}

/// Compares `Y*^(k)` with `K^(k) L*^(k+1) (K^(k))†` at the given moduli.
pub fn congruence_check(h: &RecursionHierarchy, k: usize, m: &ModuliPair) -> Result<CongruenceReport> {
    let level = h.levels.get(k).ok_or_else(|| {
        Error::PreconditionViolated(format!("hierarchy has {} levels, asked for level {k}", h.levels.len()))
    })?;
    let km = level.k_map.as_ref().ok_or(Error::DegenerateIntersection {
        which: if level.flags.j_cap_v_trivial {
            Intersection::VE
        } else {
            Intersection::VJ
        },
        dim: level.dims.v_cap_e.max(level.dims.v_cap_j),
    })?;
    let ystar = y_operator(&level.y, m)?.matrix;
    let lnext = ZSolver::new(&level.next.z).schur(m)?.matrix;
    let rhs = mul_ad(&mul(km, &lnext), km);
    let residual = (&ystar - &rhs).norm();
    Ok(CongruenceReport {
        residual,
        relative: residual / ystar.norm().max(f64::MIN_POSITIVE),
        identity_residual: level.k_identity_residual.unwrap_or(f64::INFINITY),
    })
}

/// How the deepest operator of a continued fraction is supplied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Terminal {
    /// `L*^(depth)` by Schur complement at the deepest level.
    Exact,
    /// `L*^(depth) := v·I`.
    Substitute(C64),
}

/// Folds `L*^(depth)` upward through `Y*^(k) = K L*^(k+1) K†` and the
/// fractional relation at each level.
pub fn continued_fraction_eval(
    h: &RecursionHierarchy,
    m: &ModuliPair,
    depth: usize,
    terminal: Terminal,
) -> Result<EffectiveResult> {
    m.require_finite()?;
    if depth > h.levels.len() {
        return Err(Error::PreconditionViolated(format!(
            "hierarchy has {} levels, depth {depth} requested",
            h.levels.len()
        )));
    }
    if depth == 0 {
        let mut r = match terminal {
            Terminal::Exact => ZSolver::new(&h.root).schur(m)?,
            Terminal::Substitute(v) => {
                let du = h.root.u.dim();
                EffectiveResult {
                    matrix: CMatrix::identity(du, du) * v,
                    method: Method::ContinuedFraction,
                    condition_estimate: 1.0,
                }
            }
        };
        r.method = Method::ContinuedFraction;
        return Ok(r);
    }
    let deepest = &h.levels[depth - 1].next.z;
    let (mut x, mut condition) = match terminal {
        Terminal::Exact => {
            let r = ZSolver::new(deepest).schur(m)?;
            (r.matrix, r.condition_estimate)
        }
        Terminal::Substitute(v) => {
            let d = deepest.u.dim();
            (CMatrix::identity(d, d) * v, 1.0)
        }
    };
    for level in h.levels[..depth].iter().rev() {
        let ystar = match level.k_map.as_ref() {
            Some(km) => mul_ad(&mul(km, &x), km),
            // Nothing is carried up from an empty next level; use Y* itself.
            None if level.dims.u_next == 0 => y_operator(&level.y, m)?.matrix,
            None => {
                return Err(Error::DegenerateIntersection {
                    which: if level.flags.j_cap_v_trivial {
                        Intersection::VE
                    } else {
                        Intersection::VJ
                    },
                    dim: level.dims.v_cap_e.max(level.dims.v_cap_j),
                })
            }
        };
        let r = fraction_with(&level.z, &level.y.v, m, &ystar, Method::ContinuedFraction)?;
        condition = condition.max(r.condition_estimate);
        x = r.matrix;
    }
    Ok(EffectiveResult {
        matrix: x,
        method: Method::ContinuedFraction,
        condition_estimate: condition,
    })
}

/// Eigendecomposition of `E†Λ1E` and couplings, independent of the moduli.
pub fn spectral_precompute(c: &Z2Collection) -> SpectralStructure {
    let pu = c.p1.coords(c.u.vectors());
    let pe = c.p1.coords(c.e.vectors());
    let g = ad_mul(&pe, &pe);
    let (raw, q) = numlin::hermitian_eigen(&g);
    let eigenvalues_in_range = raw.iter().all(|&l| (-1e-10..=1.0 + 1e-10).contains(&l));
    let eigenvalues = raw.iter().map(|l| l.clamp(0.0, 1.0)).collect();
    let couplings = mul(&ad_mul(&pu, &pe), &q);
    SpectralStructure {
        m01: ad_mul(&pu, &pu),
        eigenvalues,
        couplings,
        eigenvalues_in_range,
        tol: c.tol,
    }
}

/// `L* = l2 I + δ M01 − δ² Σ_j w_j w_j† / (l2 + δ λ_j)` with `δ = l1 − l2`.
pub fn effective_spectral(s: &SpectralStructure, m: &ModuliPair) -> Result<EffectiveResult> {
    m.require_finite()?;
    let delta = m.l1 - m.l2;
    let dens: Vec<C64> = s.eigenvalues.iter().map(|&l| m.l2 + delta * l).collect();
    let scale = dens.iter().map(|d| d.norm()).fold(m.magnitude(), f64::max);
    let mut smallest = f64::INFINITY;
    for (index, d) in dens.iter().enumerate() {
        let a = d.norm();
        if a <= s.tol.rank_tol * scale || a == 0.0 {
            return Err(Error::PoleHit {
                index,
                denominator: a,
            });
        }
        smallest = smallest.min(a);
    }
    let du = s.m01.nrows();
    let mut out = &s.m01 * delta;
    for i in 0..du {
        out[(i, i)] += m.l2;
    }
    let d2 = delta * delta;
    let mut scaled = s.couplings.clone();
    for (j, d) in dens.iter().enumerate() {
        let f = d2 / d;
        for i in 0..du {
            scaled[(i, j)] *= f;
        }
    }
    out -= mul_ad(&scaled, &s.couplings);
    Ok(EffectiveResult {
        matrix: out,
        method: Method::Spectral,
        condition_estimate: if dens.is_empty() { 1.0 } else { scale / smallest },
    })
}

impl RecursionHierarchy {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn to_json(&self) -> Value {
        let levels: Vec<Value> = self
            .levels
            .iter()
            .map(|l| {
                json!({
                    "k": l.k,
                    "angle_tol": l.z.tol.angle_tol,
                    "dims": l.dims,
                    "flags": l.flags,
                    "separation": l.separation,
                    "k_map": l.k_map.as_ref().map(matrix_to_json),
                    "k_prime": l.k_prime.as_ref().map(matrix_to_json),
                    "k_identity_residual": l.k_identity_residual.map(finite_or_null),
                    "structure": {
                        "m0": l.structure.m0.iter().map(matrix_to_json).collect::<Vec<_>>(),
                        "m1": l.structure.m1.iter().map(matrix_to_json).collect::<Vec<_>>(),
                        "mv": l.structure.mv.iter().map(matrix_to_json).collect::<Vec<_>>(),
                    },
                })
            })
            .collect();
        json!({
            "depth": self.depth(),
            "termination": self.termination,
            "levels": levels,
            "spectral": {
                "eigenvalues": self.structure.eigenvalues,
                "weights": self.structure.weights(),
                "eigenvalues_in_range": self.structure.eigenvalues_in_range,
            },
        })
    }

    /// Compact dimension ledger keyed by level.
    pub fn ledger(&self) -> BTreeMap<usize, LevelDims> {
        self.levels.iter().map(|l| (l.k, l.dims.clone())).collect()
    }
}

/// `(Γ1V ⊕ Γ2V) ⊖ V` at one level, for comparison with `U^(1)`.
pub fn remark_u_next(level: &RecursionLevel) -> Result<Basis> {
    let tol = level.z.tol;
    let g1v = orthonormalize(&mul(&level.z.e.projector(), level.y.v.vectors()), &tol)?;
    let g2v = orthonormalize(&mul(&level.z.j.projector(), level.y.v.vectors()), &tol)?;
    let sum = span_sum(&[&g1v, &g2v], &tol)?;
    complement_within(&level.y.v, &sum, &tol)
}
