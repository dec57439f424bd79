//! The full property suite run by `fieldrec verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::collections::{random_collection, validate, ModuliPair, Z2Collection};
use crate::error::Result;
use crate::numlin::{CMatrix, C64};
use crate::recursion::{build_hierarchy, congruence_check, continued_fraction_eval, effective_spectral, spectral_precompute, Terminal};
use crate::ysolver::{check_solvability, derive_y, fractional_relation, y_operator};
use crate::zsolver::{coupled_inverse_check, ZSolver, HERGLOTZ_SLACK};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub label: String,
    pub passed: bool,
    pub checks: Vec<PropertyCheck>,
}

impl VerifyReport {
    pub fn first_failure(&self) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| !c.passed)
    }
}

struct Ledger(Vec<PropertyCheck>);

impl Ledger {
    /// Records `value ≤ threshold`.
    fn at_most(&mut self, name: &str, value: f64, threshold: f64) {
        self.0.push(PropertyCheck {
            name: name.to_string(),
            value,
            threshold,
            passed: value.is_finite() && value <= threshold,
        });
    }

    fn holds(&mut self, name: &str, ok: bool) {
        self.at_most(name, if ok { 0.0 } else { 1.0 }, 0.0);
    }

    fn fails_with(&mut self, name: &str) {
        self.holds(name, false);
    }
}

fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn upper_moduli<R: Rng>(rng: &mut R) -> ModuliPair {
    ModuliPair::new(
        C64::new(rng.random_range(-3.0..3.0), rng.random_range(0.05..3.0)),
        C64::new(rng.random_range(-3.0..3.0), rng.random_range(0.05..3.0)),
    )
}

/// Runs every module invariant against one collection.
pub fn verify_collection(c: &Z2Collection, label: &str, seed: u64) -> VerifyReport {
    let mut led = Ledger(Vec::new());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);

    let rep = validate(c);
    for chk in &rep.checks {
        led.at_most(&format!("validate.{}", chk.name), chk.value, chk.threshold);
    }
    if !rep.passed {
        return finish(label, led);
    }

    let z = ZSolver::new(c);
    let du = c.u.dim();
    match z.schur(&ModuliPair::real(1.0, 1.0)) {
        Ok(r) => led.at_most("normalization", (r.matrix - CMatrix::identity(du, du)).norm(), 1e-10),
        Err(_) => led.fails_with("normalization"),
    }

    let samples: Vec<ModuliPair> = (0..5).map(|_| upper_moduli(&mut rng)).collect();
    for (i, m) in samples.iter().enumerate() {
        let Ok(base) = z.schur(m) else {
            led.fails_with(&format!("schur[{i}]"));
            continue;
        };
        let s = C64::new(rng.random_range(0.2..3.0), rng.random_range(-2.0..2.0));
        if let Ok(scaled) = z.schur(&m.scaled(s)) {
            led.at_most(&format!("homogeneity[{i}]"), rel(&(scaled.matrix / s), &base.matrix), 1e-10);
        }
        led.at_most(
            &format!("herglotz[{i}]"),
            m.min_im() - base.lambda_min_im(),
            HERGLOTZ_SLACK,
        );
        match z.inverse_formula(m) {
            Ok(r) => led.at_most(&format!("inverse_formula[{i}]"), rel(&r.matrix, &base.matrix), 1e-8),
            Err(_) => led.fails_with(&format!("inverse_formula[{i}]")),
        }
        match z.direct(m) {
            Ok(r) => led.at_most(&format!("direct[{i}]"), rel(&r.matrix, &base.matrix), 1e-9),
            Err(_) => led.fails_with(&format!("direct[{i}]")),
        }
        match coupled_inverse_check(c, m) {
            Ok(ci) => {
                led.holds(&format!("coupled.kernels_match[{i}]"), ci.kernels_match);
                if let (Some(a), Some(b)) = (ci.a_inv_residual, ci.b_inv_residual) {
                    led.at_most(&format!("coupled.a_inverse[{i}]"), a, 1e-10);
                    led.at_most(&format!("coupled.b_inverse[{i}]"), b, 1e-10);
                }
            }
            Err(_) => led.fails_with(&format!("coupled[{i}]")),
        }
    }

    let spectral = spectral_precompute(c);
    led.holds("spectral.eigenvalues_in_range", spectral.eigenvalues_in_range);
    for (i, m) in samples.iter().enumerate().take(2) {
        if let (Ok(a), Ok(b)) = (effective_spectral(&spectral, m), z.schur(m)) {
            led.at_most(&format!("spectral[{i}]"), rel(&a.matrix, &b.matrix), 1e-8);
        }
    }

    let y = match derive_y(c) {
        Ok((y, _)) => y,
        Err(e) => {
            led.fails_with(&format!("derive_y: {e}"));
            return finish(label, led);
        }
    };
    let kproj = y.v.projector() + y.p1_1.projector() + y.p2_1.projector();
    led.at_most("y.k_decomposition", (kproj - y.k.projector()).norm(), 1e-10);
    led.at_most(
        "y.k_is_e_plus_j",
        (y.k.projector() - c.e.projector() - c.j.projector()).norm(),
        1e-10,
    );
    for (i, m) in samples.iter().enumerate().take(2) {
        if let Ok(s) = check_solvability(&y, m) {
            if s.assumption_holds {
                led.at_most(&format!("y.beta_positive[{i}]"), -s.beta, -1e-10);
                led.holds(&format!("y.f_invertible[{i}]"), s.f_diag.invertible);
            }
        }
        if y.dim_vj() == 0 {
            match fractional_relation(c, &y, m) {
                Ok(r) => {
                    if let Ok(b) = z.schur(m) {
                        led.at_most(&format!("fraction[{i}]"), rel(&r.matrix, &b.matrix), 1e-8);
                    }
                }
                Err(_) => led.fails_with(&format!("fraction[{i}]")),
            }
            if y.dim_ve() == 0 && y.dim_v() > 0 {
                if let Ok(ys) = y_operator(&y, m) {
                    led.at_most(&format!("y.herglotz[{i}]"), -ys.lambda_min_im(), -f64::MIN_POSITIVE);
                }
            }
        }
    }

    let h = match build_hierarchy(c, 2) {
        Ok(h) => h,
        Err(e) => {
            led.fails_with(&format!("build_hierarchy: {e}"));
            return finish(label, led);
        }
    };
    for l in &h.levels {
        let k = l.k;
        led.holds(&format!("level{k}.dim_v_identity"), l.separation.v_dim_identity);
        led.holds(&format!("level{k}.dim_u_next_identity"), l.separation.u_next_dim_identity);
        led.at_most(&format!("level{k}.v_separation"), l.separation.v_residual, 1e-10);
        led.at_most(&format!("level{k}.u_next_separation"), l.separation.u_next_residual, 1e-10);
        led.holds(
            &format!("level{k}.flag_equivalence_i"),
            (l.dims.v == l.dims.u) == l.flags.p_cap_u_trivial,
        );
        led.holds(
            &format!("level{k}.flag_equivalence_ii"),
            (l.dims.u_next == l.dims.v) == (l.flags.e_cap_v_trivial && l.flags.j_cap_v_trivial),
        );
        led.holds(&format!("level{k}.w_bound"), l.dims.w_next <= l.dims.v + l.dims.u_next);
        if let Some(r) = l.k_identity_residual {
            led.at_most(&format!("level{k}.k_identity"), r, 1e-10);
            if let Ok(cg) = congruence_check(&h, k, &samples[0]) {
                led.at_most(&format!("level{k}.congruence"), cg.relative, 1e-8);
            }
        }
    }
    let usable = h.levels.iter().take_while(|l| l.k_map.is_some()).count();
    if usable > 0 {
        let m = samples[0];
        if let (Ok(cf), Ok(b)) = (continued_fraction_eval(&h, &m, usable, Terminal::Exact), z.schur(&m)) {
            led.at_most("continued_fraction", rel(&cf.matrix, &b.matrix), 1e-7);
        }
    }
    finish(label, led)
}

fn finish(label: &str, led: Ledger) -> VerifyReport {
    VerifyReport {
        label: label.to_string(),
        passed: led.0.iter().all(|c| c.passed),
        checks: led.0,
    }
}

/// Deterministic dimensions for a seeded collection of ambient size `n`.
pub fn seeded_dims(n: usize, seed: u64) -> (usize, usize, usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let du = rng.random_range(1..=(n / 4).max(1));
    let rest = n - du;
    let de = rng.random_range(0..=rest);
    let dj = rest - de;
    let dp1 = rng.random_range(1..n);
    (du, de, dj, dp1)
}

pub fn verify_seed(n: usize, seed: u64) -> Result<VerifyReport> {
    let (du, de, dj, dp1) = seeded_dims(n, seed);
    let c = random_collection(n, du, de, dj, dp1, seed)?;
    Ok(verify_collection(
        &c,
        &format!("seed {seed} (n={n}, U={du}, E={de}, J={dj}, P1={dp1})"),
        seed,
    ))
}
