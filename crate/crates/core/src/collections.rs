//! Orthogonal Z(2) subspace collections and the operator family `L(l1, l2)`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numlin::{self, ad_mul, mul, Basis, CMatrix, Tolerances, C64};

/// A space with the two decompositions `H = U ⊕ E ⊕ J = P1 ⊕ P2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Z2Collection {
    pub u: Basis,
    pub e: Basis,
    pub j: Basis,
    pub p1: Basis,
    pub p2: Basis,
    pub tol: Tolerances,
}

/// The pair of phase moduli `(l1, l2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuliPair {
    pub l1: C64,
    pub l2: C64,
}

impl ModuliPair {
    pub fn new(l1: C64, l2: C64) -> Self {
        Self { l1, l2 }
    }

    pub fn real(l1: f64, l2: f64) -> Self {
        Self::new(C64::new(l1, 0.0), C64::new(l2, 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.l1.is_finite() && self.l2.is_finite()
    }

    pub fn is_invertible(&self) -> bool {
        self.l1 != C64::new(0.0, 0.0) && self.l2 != C64::new(0.0, 0.0)
    }

    pub fn in_upper_half_plane(&self) -> bool {
        self.l1.im > 0.0 && self.l2.im > 0.0
    }

    /// `min(Im l1, Im l2)`, the Herglotz lower bound.
    pub fn min_im(&self) -> f64 {
        self.l1.im.min(self.l2.im)
    }

    /// `max(|l1|, |l2|)`, the norm of `L`.
    pub fn magnitude(&self) -> f64 {
        self.l1.norm().max(self.l2.norm())
    }

    /// `max(1/|l1|, 1/|l2|)`, the norm of `L⁻¹`.
    pub fn inverse_magnitude(&self) -> f64 {
        (1.0 / self.l1.norm()).max(1.0 / self.l2.norm())
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self::new(self.l1 * c, self.l2 * c)
    }

    pub fn conj(&self) -> Self {
        Self::new(self.l1.conj(), self.l2.conj())
    }

    pub fn swapped(&self) -> Self {
        Self::new(self.l2, self.l1)
    }

    pub(crate) fn require_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite)
        }
    }

    pub(crate) fn require_invertible(&self) -> Result<()> {
        self.require_finite()?;
        if self.is_invertible() {
            Ok(())
        } else {
            Err(Error::ZeroModulus)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<Check>,
    pub dims: BTreeMap<String, usize>,
}

impl ValidationReport {
    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl Z2Collection {
    /// Assembles a collection, rejecting only bases of the wrong ambient size.
    ///
    /// Mathematical validity is reported by [`validate`].
    pub fn new(
        u: Basis,
        e: Basis,
        j: Basis,
        p1: Basis,
        p2: Basis,
        tol: Tolerances,
    ) -> Result<Self> {
        tol.validate()?;
        let n = u.ambient_dim();
        for b in [&e, &j, &p1, &p2] {
            if b.ambient_dim() != n {
                return Err(Error::AmbientMismatch {
                    left: n,
                    right: b.ambient_dim(),
                });
            }
        }
        for b in [&u, &e, &j, &p1, &p2] {
            numlin::ensure_finite(b.vectors())?;
        }
        Ok(Self { u, e, j, p1, p2, tol })
    }

    pub fn ambient_dim(&self) -> usize {
        self.u.ambient_dim()
    }

    pub fn dims(&self) -> [usize; 5] {
        [
            self.u.dim(),
            self.e.dim(),
            self.j.dim(),
            self.p1.dim(),
            self.p2.dim(),
        ]
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    /// `[U J]`, the frame of `U ⊕ J` used by the inverse representation.
    pub fn uj_frame(&self) -> Basis {
        Basis::direct_sum(&[&self.u, &self.j]).expect("same ambient")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: CollectionFile = serde_json::from_str(s)?;
        file.into_collection()
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(CollectionFile::from_collection(self)).expect("plain data")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&CollectionFile::from_collection(self)).expect("plain data")
    }
}

/// Checks every structural invariant of a collection and reports residuals.
pub fn validate(c: &Z2Collection) -> ValidationReport {
    let n = c.ambient_dim();
    let thr = c.tol.ortho_tol;
    let mut checks = Vec::new();
    let mut push = |name: &str, value: f64, threshold: f64| {
        checks.push(Check {
            name: name.to_string(),
            value,
            threshold,
            passed: value.is_finite() && value <= threshold,
        });
    };

    let [du, de, dj, dp1, dp2] = c.dims();
    push("dim_sum_uej", (du + de + dj).abs_diff(n) as f64, 0.0);
    push("dim_sum_p", (dp1 + dp2).abs_diff(n) as f64, 0.0);
    push("p1_nonzero", if dp1 >= 1 { 0.0 } else { 1.0 }, 0.0);
    push("p2_nonzero", if dp2 >= 1 { 0.0 } else { 1.0 }, 0.0);

    for (label, parts) in [("uej", [&c.u, &c.e, &c.j].to_vec()), ("p", [&c.p1, &c.p2].to_vec())] {
        let names: &[&str] = if label == "uej" { &["u", "e", "j"] } else { &["p1", "p2"] };
        let frame = Basis::direct_sum(&parts).expect("same ambient");
        let gram = ad_mul(frame.vectors(), frame.vectors());
        let offsets: Vec<usize> = parts
            .iter()
            .scan(0, |at, b| {
                let o = *at;
                *at += b.dim();
                Some(o)
            })
            .collect();
        for (a, pa) in parts.iter().enumerate() {
            let block = gram.view((offsets[a], offsets[a]), (pa.dim(), pa.dim()));
            let r = (block - CMatrix::identity(pa.dim(), pa.dim())).norm();
            push(&format!("orthonormal_{}", names[a]), r, thr);
        }
        for a in 0..parts.len() {
            for b in a + 1..parts.len() {
                let block = gram.view((offsets[a], offsets[b]), (parts[a].dim(), parts[b].dim()));
                push(&format!("orthogonal_{}_{}", names[a], names[b]), block.norm(), thr);
            }
        }
        let res = (mul(frame.vectors(), &frame.vectors().adjoint()) - CMatrix::identity(n, n)).norm();
        push(&format!("resolution_{label}"), res, thr);
    }

    let dims = BTreeMap::from([
        ("ambient".to_string(), n),
        ("u".to_string(), du),
        ("e".to_string(), de),
        ("j".to_string(), dj),
        ("p1".to_string(), dp1),
        ("p2".to_string(), dp2),
    ]);
    let passed = checks.iter().all(|c| c.passed);
    ValidationReport { passed, checks, dims }
}

/// Matrix of independent standard complex Gaussian entries.
pub fn complex_gaussian<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-distributed unitary: QR of a Gaussian matrix with the diagonal
/// phases of `R` moved into `Q`.
pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    let qr = complex_gaussian(n, n, rng).qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..n {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, k)] *= phase;
        }
    }
    q
}

fn split_frame(q: &CMatrix, sizes: &[usize]) -> Vec<Basis> {
    let mut at = 0;
    sizes
        .iter()
        .map(|&s| {
            let b = Basis::from_columns_unchecked(q.columns(at, s).into_owned());
            at += s;
            b
        })
        .collect()
}

/// Seeded random collection built from two independent random unitary frames.
pub fn random_collection(
    ambient_dim: usize,
    dim_u: usize,
    dim_e: usize,
    dim_j: usize,
    dim_p1: usize,
    seed: u64,
) -> Result<Z2Collection> {
    if dim_u + dim_e + dim_j != ambient_dim {
        return Err(Error::InconsistentDimensions(format!(
            "dim U + dim E + dim J = {} but ambient_dim = {ambient_dim}",
            dim_u + dim_e + dim_j
        )));
    }
    if dim_p1 == 0 || dim_p1 >= ambient_dim {
        return Err(Error::InconsistentDimensions(format!(
            "dim P1 = {dim_p1} must lie in [1, {}]",
            ambient_dim.saturating_sub(1)
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f1 = random_unitary(ambient_dim, &mut rng);
    let f2 = random_unitary(ambient_dim, &mut rng);
    let mut uej = split_frame(&f1, &[dim_u, dim_e, dim_j]).into_iter();
    let mut pp = split_frame(&f2, &[dim_p1, ambient_dim - dim_p1]).into_iter();
    Z2Collection::new(
        uej.next().unwrap(),
        uej.next().unwrap(),
        uej.next().unwrap(),
        pp.next().unwrap(),
        pp.next().unwrap(),
        Tolerances::default(),
    )
}

fn series_or_parallel(parallel: bool) -> Z2Collection {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let u = Basis::from_columns_unchecked(numlin::cmat(&[&[numlin::r(s)], &[numlin::r(s)]]));
    let d = Basis::from_columns_unchecked(numlin::cmat(&[&[numlin::r(s)], &[numlin::r(-s)]]));
    let (e, j) = if parallel {
        (Basis::empty(2), d)
    } else {
        (d, Basis::empty(2))
    };
    Z2Collection::new(
        u,
        e,
        j,
        Basis::coordinate(2, &[0]),
        Basis::coordinate(2, &[1]),
        Tolerances::default(),
    )
    .expect("well-formed")
}

/// Two-dimensional series model: `U = span{(1,1)/√2}`, `E = span{(1,−1)/√2}`,
/// `J = {0}`, `P1`, `P2` the coordinate axes. Its effective operator is the
/// harmonic mean of the moduli.
pub fn series_model() -> Z2Collection {
    series_or_parallel(false)
}

/// The series model with `E` and `J` swapped; effective operator is the
/// arithmetic mean.
pub fn parallel_model() -> Z2Collection {
    series_or_parallel(true)
}

/// `L = l1 Λ1 + l2 Λ2` as an ambient matrix.
pub fn build_l(c: &Z2Collection, m: &ModuliPair) -> CMatrix {
    c.p1.projector() * m.l1 + c.p2.projector() * m.l2
}

/// `L⁻¹ = Λ1/l1 + Λ2/l2`.
pub fn inverse_l(c: &Z2Collection, m: &ModuliPair) -> Result<CMatrix> {
    m.require_invertible()?;
    Ok(c.p1.projector() / m.l1 + c.p2.projector() / m.l2)
}

/// Computes restricted blocks `X† L X'` without forming ambient matrices.
///
/// Uses `L = l2 I + (l1 − l2) Λ1` together with orthogonality of the
/// decompositions, so only the `P1`-coordinates of each frame are needed.
#[derive(Debug, Clone)]
pub struct BlockOperator {
    p1_coords: Vec<CMatrix>,
    dims: Vec<usize>,
}

impl BlockOperator {
    pub fn new(p1: &Basis, frames: &[&Basis]) -> Self {
        Self {
            p1_coords: frames.iter().map(|f| p1.coords(f.vectors())).collect(),
            dims: frames.iter().map(|f| f.dim()).collect(),
        }
    }

    /// `X_a† Λ1 X_b`.
    pub fn lambda1(&self, a: usize, b: usize) -> CMatrix {
        ad_mul(&self.p1_coords[a], &self.p1_coords[b])
    }

    /// `X_a† (α I + β Λ1) X_b` for mutually orthonormal frames.
    pub fn affine(&self, a: usize, b: usize, alpha: C64, beta: C64) -> CMatrix {
        let mut m = self.lambda1(a, b) * beta;
        if a == b {
            for i in 0..self.dims[a] {
                m[(i, i)] += alpha;
            }
        }
        m
    }

    /// `X_a† L X_b`.
    pub fn l_block(&self, a: usize, b: usize, m: &ModuliPair) -> CMatrix {
        self.affine(a, b, m.l2, m.l1 - m.l2)
    }

    /// `X_a† L⁻¹ X_b`; moduli must be nonzero.
    pub fn l_inv_block(&self, a: usize, b: usize, m: &ModuliPair) -> CMatrix {
        let i2 = m.l2.inv();
        self.affine(a, b, i2, m.l1.inv() - i2)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BasesFile {
    #[serde(rename = "U")]
    u: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "E")]
    e: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "J")]
    j: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "P1")]
    p1: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "P2")]
    p2: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CollectionFile {
    ambient_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tol: Option<Tolerances>,
    bases: BasesFile,
}

pub(crate) fn columns_to_json(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    m.column_iter()
        .map(|col| col.iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

pub fn matrix_to_json(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    m.row_iter()
        .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

/// Inverse of the row-major `[re, im]` layout used in JSON output.
pub fn matrix_from_json(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    let r = rows.len();
    let c = rows.first().map(|x| x.len()).unwrap_or(0);
    if rows.iter().any(|x| x.len() != c) {
        return Err(Error::Parse("ragged matrix rows".into()));
    }
    Ok(CMatrix::from_fn(r, c, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

fn columns_from_json(name: &str, cols: &[Vec<[f64; 2]>], n: usize) -> Result<Basis> {
    let mut m = CMatrix::zeros(n, cols.len());
    for (k, col) in cols.iter().enumerate() {
        if col.len() != n {
            return Err(Error::InconsistentDimensions(format!(
                "basis {name} vector {k} has length {} but ambient_dim = {n}",
                col.len()
            )));
        }
        for (i, z) in col.iter().enumerate() {
            m[(i, k)] = C64::new(z[0], z[1]);
        }
    }
    Ok(Basis::from_columns_unchecked(m))
}

impl CollectionFile {
    fn from_collection(c: &Z2Collection) -> Self {
        Self {
            ambient_dim: c.ambient_dim(),
            tol: Some(c.tol),
            bases: BasesFile {
                u: columns_to_json(c.u.vectors()),
                e: columns_to_json(c.e.vectors()),
                j: columns_to_json(c.j.vectors()),
                p1: columns_to_json(c.p1.vectors()),
                p2: columns_to_json(c.p2.vectors()),
            },
        }
    }

    fn into_collection(self) -> Result<Z2Collection> {
        let n = self.ambient_dim;
        let b = &self.bases;
        Z2Collection::new(
            columns_from_json("U", &b.u, n)?,
            columns_from_json("E", &b.e, n)?,
            columns_from_json("J", &b.j, n)?,
            columns_from_json("P1", &b.p1, n)?,
            columns_from_json("P2", &b.p2, n)?,
            self.tol.unwrap_or_default(),
        )
    }
}
