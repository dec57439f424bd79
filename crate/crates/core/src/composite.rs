//! Two-phase periodic conductivity on pixel grids as an exact Z(2) collection.
//!
//! Fields live in `C^(d·N)` with pixel-major layout: entry `pixel·d + c` is
//! component `c` at `pixel`. Pixels are numbered row-major, last axis
//! fastest. `U` holds the constant fields; each nonzero frequency
//! contributes its longitudinal plane wave to `E` and the transverse ones
//! to `J`.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::collections::{columns_to_json, matrix_to_json, ModuliPair, Z2Collection};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalMethod};
use crate::numlin::{Basis, CMatrix, Tolerances, C64};
use crate::ysolver::derive_y;
use crate::zsolver::EffectiveResult;

/// A periodic two-phase pixel geometry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeometryGrid {
    pub dims: Vec<usize>,
    /// Phase label (1 or 2) per pixel, row-major.
    pub phase: Vec<u8>,
}

impl GeometryGrid {
    pub fn new(dims: Vec<usize>, phase: Vec<u8>) -> Result<Self> {
        let g = Self { dims, phase };
        g.check()?;
        Ok(g)
    }

    fn check(&self) -> Result<()> {
        let d = self.dims.len();
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidGeometry(format!("spatial dimension {d} not in 1..=3")));
        }
        if self.dims.iter().any(|&n| n == 0) {
            return Err(Error::InvalidGeometry("every axis needs at least one pixel".into()));
        }
        if self.phase.len() != self.n_pixels() {
            return Err(Error::InvalidGeometry(format!(
                "{} phase labels for {} pixels",
                self.phase.len(),
                self.n_pixels()
            )));
        }
        if let Some(bad) = self.phase.iter().find(|&&p| p != 1 && p != 2) {
            return Err(Error::InvalidGeometry(format!("phase label {bad} is not 1 or 2")));
        }
        if !self.phase.contains(&1) || !self.phase.contains(&2) {
            return Err(Error::InvalidGeometry("both phases must be present".into()));
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.dims.len()
    }

    pub fn n_pixels(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn volume_fraction(&self) -> f64 {
        self.phase.iter().filter(|&&p| p == 1).count() as f64 / self.n_pixels() as f64
    }

    /// Multi-index of a pixel.
    pub fn coords(&self, pixel: usize) -> Vec<usize> {
        let mut out = vec![0; self.d()];
        let mut rest = pixel;
        for axis in (0..self.d()).rev() {
            out[axis] = rest % self.dims[axis];
            rest /= self.dims[axis];
        }
        out
    }

    /// The same geometry with phases 1 and 2 exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            dims: self.dims.clone(),
            phase: self.phase.iter().map(|&p| 3 - p).collect(),
        }
    }

    /// Axis along which the phase alone varies, if the grid is a laminate.
    pub fn laminate_axis(&self) -> Option<usize> {
        (0..self.d()).find(|&axis| {
            let mut seen: Vec<Option<u8>> = vec![None; self.dims[axis]];
            for (p, &ph) in self.phase.iter().enumerate() {
                let x = self.coords(p)[axis];
                match seen[x] {
                    None => seen[x] = Some(ph),
                    Some(prev) if prev != ph => return false,
                    _ => {}
                }
            }
            true
        })
    }

    /// Parses either the ASCII form (rows of `1`/`2`) or the JSON form.
    pub fn parse(s: &str) -> Result<Self> {
        if s.trim_start().starts_with('{') {
            let g: GeometryGrid = serde_json::from_str(s)?;
            g.check()?;
            return Ok(g);
        }
        let rows: Vec<&str> = s.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        if rows.is_empty() {
            return Err(Error::Parse("empty geometry".into()));
        }
        let width = rows[0].chars().count();
        let mut phase = Vec::with_capacity(rows.len() * width);
        for (i, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(Error::Parse(format!("geometry row {i} has a different width")));
            }
            for ch in row.chars() {
                match ch {
                    '1' => phase.push(1),
                    '2' => phase.push(2),
                    other => return Err(Error::Parse(format!("unexpected character {other:?} in geometry"))),
                }
            }
        }
        let dims = if rows.len() == 1 { vec![width] } else { vec![rows.len(), width] };
        Self::new(dims, phase)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// ASCII form for one- and two-dimensional grids.
    pub fn to_ascii(&self) -> Option<String> {
        let width = *self.dims.last()?;
        if self.d() > 2 {
            return None;
        }
        let mut s = String::new();
        for row in self.phase.chunks(width) {
            s.extend(row.iter().map(|&p| if p == 1 { '1' } else { '2' }));
            s.push('\n');
        }
        Some(s)
    }
}

/// Slab geometry in two dimensions: the first `f1·n_along` layers normal to
/// `axis` are phase 1.
pub fn laminate(n_along: usize, n_across: usize, f1: f64, axis: usize) -> Result<GeometryGrid> {
    if axis > 1 {
        return Err(Error::InvalidGeometry(format!("axis {axis} not in 0..=1")));
    }
    let layers = f1 * n_along as f64;
    let n1 = layers.round();
    if !f1.is_finite() || (layers - n1).abs() > 1e-9 {
        return Err(Error::InvalidGeometry(format!(
            "f1·N_along = {layers} is not an integer"
        )));
    }
    let n1 = n1 as usize;
    if n1 == 0 || n1 >= n_along {
        return Err(Error::InvalidGeometry(format!(
            "{n1} of {n_along} layers in phase 1 leaves a phase empty"
        )));
    }
    let dims = if axis == 0 { vec![n_along, n_across] } else { vec![n_across, n_along] };
    let mut phase = Vec::with_capacity(n_along * n_across);
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            let layer = if axis == 0 { i } else { j };
            phase.push(if layer < n1 { 1 } else { 2 });
        }
    }
    GeometryGrid::new(dims, phase)
}

/// `N × N` board of four quadrants, phase 1 on the diagonal quadrants.
pub fn checkerboard(n: usize) -> Result<GeometryGrid> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::InvalidGeometry(format!("checkerboard size {n} must be even")));
    }
    let h = n / 2;
    let phase = (0..n * n)
        .map(|p| {
            let (i, j) = (p / n, p % n);
            if (i < h) == (j < h) { 1 } else { 2 }
        })
        .collect();
    GeometryGrid::new(vec![n, n], phase)
}

/// Independent pixel phases with probability `f1` of phase 1.
pub fn random_grid(dims: Vec<usize>, f1: f64, seed: u64) -> Result<GeometryGrid> {
    let n: usize = dims.iter().product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phase: Vec<u8> = (0..n).map(|_| if rng.random::<f64>() < f1 { 1 } else { 2 }).collect();
    if n >= 2 {
        // Keep both phases present regardless of the draw.
        if !phase.contains(&1) {
            phase[0] = 1;
        }
        if !phase.contains(&2) {
            phase[n - 1] = 2;
        }
    }
    GeometryGrid::new(dims, phase)
}

/// A grid geometry together with its exact Z(2) collection.
#[derive(Debug, Clone)]
pub struct GridCollection {
    pub geometry: GeometryGrid,
    pub base: Z2Collection,
}

fn signed_frequency(a: usize, n: usize) -> i64 {
    // Representative in (−n/2, n/2].
    let a = a as i64;
    let n = n as i64;
    if 2 * a <= n { a } else { a - n }
}

/// Orthonormal real basis of the complement of the unit vector `k` in `R^d`.
fn transverse(k: &[f64]) -> Vec<Vec<f64>> {
    match k.len() {
        1 => Vec::new(),
        2 => vec![vec![-k[1], k[0]]],
        _ => {
            let i = (0..3)
                .min_by(|&a, &b| k[a].abs().total_cmp(&k[b].abs()))
                .expect("three components");
            let mut t = vec![0.0; 3];
            t[i] = 1.0;
            let dot = k[i];
            for c in 0..3 {
                t[c] -= dot * k[c];
            }
            let nt = t.iter().map(|x| x * x).sum::<f64>().sqrt();
            t.iter_mut().for_each(|x| *x /= nt);
            let s = vec![
                k[1] * t[2] - k[2] * t[1],
                k[2] * t[0] - k[0] * t[2],
                k[0] * t[1] - k[1] * t[0],
            ];
            vec![t, s]
        }
    }
}

/// Builds the discrete Fourier realization of `U ⊕ E ⊕ J = P1 ⊕ P2`.
///
/// The direction of each plane wave is the wavevector `(a_i / N_i)` of its
/// integer frequency `a`, taken in `(−N_i/2, N_i/2]`.
pub fn build_grid_collection(g: &GeometryGrid) -> Result<GridCollection> {
    g.check()?;
    let d = g.d();
    let n = g.n_pixels();
    let amb = d * n;
    let norm = (n as f64).sqrt().recip();

    let mut u = CMatrix::zeros(amb, d);
    for c in 0..d {
        for p in 0..n {
            u[(p * d + c, c)] = C64::new(norm, 0.0);
        }
    }
    let pixel_coords: Vec<Vec<usize>> = (0..n).map(|p| g.coords(p)).collect();
    let mut e = CMatrix::zeros(amb, n - 1);
    let mut j = CMatrix::zeros(amb, (d - 1) * (n - 1));
    let mut col = 0;
    for f in 1..n {
        let a = g.coords(f);
        let k: Vec<f64> = a
            .iter()
            .zip(&g.dims)
            .map(|(&ai, &ni)| signed_frequency(ai, ni) as f64 / ni as f64)
            .collect();
        let kn = k.iter().map(|x| x * x).sum::<f64>().sqrt();
        let khat: Vec<f64> = k.iter().map(|x| x / kn).collect();
        let trans = transverse(&khat);
        for (p, x) in pixel_coords.iter().enumerate() {
            let theta: f64 = x
                .iter()
                .zip(&a)
                .zip(&g.dims)
                .map(|((&xi, &ai), &ni)| 2.0 * PI * ((xi * ai) % ni) as f64 / ni as f64)
                .sum();
            let phi = C64::from_polar(norm, theta);
            for c in 0..d {
                e[(p * d + c, col)] = phi * khat[c];
                for (t, tv) in trans.iter().enumerate() {
                    j[(p * d + c, col * (d - 1) + t)] = phi * tv[c];
                }
            }
        }
        col += 1;
    }
    let idx = |ph: u8| -> Vec<usize> {
        (0..n)
            .filter(|&p| g.phase[p] == ph)
            .flat_map(|p| (0..d).map(move |c| p * d + c))
            .collect()
    };
    let base = Z2Collection::new(
        Basis::from_columns_unchecked(u),
        Basis::from_columns_unchecked(e),
        Basis::from_columns_unchecked(j),
        Basis::coordinate(amb, &idx(1)),
        Basis::coordinate(amb, &idx(2)),
        Tolerances::default(),
    )?;
    Ok(GridCollection {
        geometry: g.clone(),
        base,
    })
}

/// Effective conductivity tensor `σ*` on `U ≅ C^d`.
pub fn effective_conductivity(
    g: &GeometryGrid,
    sigma1: C64,
    sigma2: C64,
    method: EvalMethod,
) -> Result<EffectiveResult> {
    let gc = build_grid_collection(g)?;
    evaluate(&gc.base, &ModuliPair::new(sigma1, sigma2), method)
}

/// Effective-tensor document `{"sigma_star", "method", "diagnostics"}`.
pub fn effective_tensor_json(g: &GeometryGrid, m: &ModuliPair, r: &EffectiveResult) -> Value {
    json!({
        "sigma_star": matrix_to_json(&r.matrix),
        "method": r.method.tag(),
        "diagnostics": {
            "condition_estimate": crate::zsolver::finite_or_null(r.condition_estimate),
            "lambda_min_im": crate::zsolver::finite_or_null(r.lambda_min_im()),
            "dims": g.dims,
            "volume_fraction": g.volume_fraction(),
            "sigma1": [m.l1.re, m.l1.im],
            "sigma2": [m.l2.re, m.l2.im],
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyReport {
    pub dim_ve: usize,
    pub dim_vj: usize,
    /// Orthonormal basis of `V ∩ E`, one ambient vector per entry.
    pub witnesses_ve: Vec<Vec<[f64; 2]>>,
    pub witnesses_vj: Vec<Vec<[f64; 2]>>,
    /// For laminates, `‖(I − proj(V∩E)) w‖/‖w‖` for `w = [f2χ1 − f1χ2] n`.
    pub laminate_residual_ve: Option<f64>,
    /// Same for `w = [f2χ1 − f1χ2] v` with `v ⊥ n`, against `V ∩ J`.
    pub laminate_residual_vj: Option<f64>,
}

/// The laminate field `[f2χ1 − f1χ2] dir` as an ambient vector.
pub fn laminate_field(g: &GeometryGrid, dir: &[f64]) -> CMatrix {
    let d = g.d();
    let f1 = g.volume_fraction();
    let f2 = 1.0 - f1;
    CMatrix::from_fn(d * g.n_pixels(), 1, |i, _| {
        let (p, c) = (i / d, i % d);
        let s = if g.phase[p] == 1 { f2 } else { -f1 };
        C64::new(s * dir[c], 0.0)
    })
}

fn membership_residual(w: &CMatrix, b: &Basis) -> f64 {
    let proj = b.embed(&b.coords(w));
    (w - proj).norm() / w.norm()
}

/// Dimensions and witnesses of `V ∩ E` and `V ∩ J` for a grid.
pub fn degeneracy_report(g: &GeometryGrid) -> Result<DegeneracyReport> {
    let gc = build_grid_collection(g)?;
    let (y, _) = derive_y(&gc.base)?;
    let (mut res_e, mut res_j) = (None, None);
    if let Some(axis) = g.laminate_axis() {
        let d = g.d();
        let mut n = vec![0.0; d];
        n[axis] = 1.0;
        res_e = Some(membership_residual(&laminate_field(g, &n), &y.v_cap_e));
        if d > 1 {
            let mut v = vec![0.0; d];
            v[(axis + 1) % d] = 1.0;
            res_j = Some(membership_residual(&laminate_field(g, &v), &y.v_cap_j));
        }
    }
    Ok(DegeneracyReport {
        dim_ve: y.dim_ve(),
        dim_vj: y.dim_vj(),
        witnesses_ve: columns_to_json(y.v_cap_e.vectors()),
        witnesses_vj: columns_to_json(y.v_cap_j.vectors()),
        laminate_residual_ve: res_e,
        laminate_residual_vj: res_j,
    })
}
