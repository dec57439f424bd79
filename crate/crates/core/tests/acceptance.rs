//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use fieldrec::cli::{sweep_csv, Fixed, SweepMethod};
use fieldrec::collections::{
    build_l, parallel_model, random_collection, random_unitary, series_model,
    ModuliPair, Z2Collection,
};
use fieldrec::composite::{build_grid_collection, checkerboard, degeneracy_report, laminate, random_grid};
use fieldrec::error::Intersection;
use fieldrec::eval::EvalMethod;
use fieldrec::numlin::{ad_mul, inverse, mul, singular_values, Basis, CMatrix, CVector, C64};
use fieldrec::recursion::{
    build_hierarchy, continued_fraction_eval, effective_spectral, spectral_precompute, Terminal, Termination,
};
use fieldrec::ysolver::{check_solvability, derive_y, fractional_relation, y_operator};
use fieldrec::zsolver::{coupled_inverse_check, ZSolver};
use fieldrec::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg()) }
}

fn upper<R: Rng>(rng: &mut R) -> ModuliPair {
    ModuliPair::new(
        C64::new(rng.random_range(-3.0..3.0), rng.random_range(0.05..3.0)),
        C64::new(rng.random_range(-3.0..3.0), rng.random_range(0.05..3.0)),
    )
}

fn nonzero<R: Rng>(rng: &mut R) -> ModuliPair {
    let mut z = || loop {
        let v = C64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        if v.norm() > 0.05 {
            return v;
        }
    };
    ModuliPair::new(z(), z())
}

/// Rank with an absolute cutoff; the inputs here have unit-scale entries.
fn rank(m: &CMatrix) -> usize {
    singular_values(m).iter().filter(|&&s| s > 1e-8).count()
}

struct Corpus {
    items: Vec<(String, Z2Collection)>,
}

/// 200 seeded collections with ambient dimension at most 48.
fn corpus() -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let items = (0..200u64)
        .map(|seed| {
            let n = rng.random_range(4..=48);
            let du = rng.random_range(1..=(n / 4).max(1));
            let de = rng.random_range(0..=n - du);
            let dj = n - du - de;
            let dp1 = rng.random_range(1..n);
            let label = format!("seed {seed} ({n}; {du},{de},{dj}; {dp1})");
            (label, random_collection(n, du, de, dj, dp1, seed).unwrap())
        })
        .collect();
    Corpus { items }
}

fn normalization(c: &Corpus) -> Outcome {
    let t = Instant::now();
    let mut worst = 0.0_f64;
    for (label, col) in &c.items {
        let r = ZSolver::new(col).schur(&ModuliPair::real(1.0, 1.0)).map_err(|e| format!("{label}: {e}"))?;
        let du = col.u.dim();
        let res = (r.matrix - CMatrix::identity(du, du)).norm();
        ensure(res <= 1e-10, || format!("{label}: residual {res:e}"))?;
        worst = worst.max(res);
    }
    let secs = t.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!("{} collections, max ‖L*(1,1) − I‖ = {worst:.1e}, {secs:.2} s", c.items.len()))
}

fn homogeneity(c: &Corpus) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0_f64;
    for (label, col) in &c.items {
        let z = ZSolver::new(col);
        for _ in 0..5 {
            let m = upper(&mut rng);
            let s = C64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let base = z.schur(&m).map_err(|e| format!("{label}: {e}"))?.matrix;
            let scaled = z.schur(&m.scaled(s)).map_err(|e| format!("{label}: {e}"))?.matrix;
            let res = rel(&scaled, &(base * s));
            ensure(res <= 1e-10, || format!("{label}: c = {s}, residual {res:e}"))?;
            worst = worst.max(res);
        }
    }
    Ok(format!("{} scalings, max relative residual {worst:.1e}", 5 * c.items.len()))
}

fn herglotz(c: &Corpus) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut margin = f64::INFINITY;
    let mut energy = 0.0_f64;
    for (label, col) in &c.items {
        let z = ZSolver::new(col);
        for k in 0..50 {
            let m = upper(&mut rng);
            let r = z.schur(&m).map_err(|e| format!("{label}: {e}"))?;
            let gap = r.lambda_min_im() - m.min_im();
            ensure(gap >= -1e-9, || format!("{label}: λmin(Im L*) below bound by {:e}", -gap))?;
            margin = margin.min(gap);
            if k == 0 {
                // Energy identity: ⟨e, L* e⟩ = ⟨ε, L ε⟩ for the solved field ε = e + E.
                let du = col.u.dim();
                let e = CVector::from_fn(du, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
                let sol = z.solve_direct(&m, &e).map_err(|err| format!("{label}: {err}"))?;
                let eps = col.u.vectors() * &e + col.e.vectors() * &sol.e_field;
                let lhs = e.dotc(&(&r.matrix * &e));
                let rhs = eps.dotc(&(build_l(col, &m) * &eps));
                let res = (lhs - rhs).norm() / rhs.norm();
                ensure(res <= 1e-9, || format!("{label}: energy identity residual {res:e}"))?;
                ensure(rhs.im >= m.min_im() * eps.norm_squared() * (1.0 - 1e-12), || {
                    format!("{label}: Im ⟨ε, Lε⟩ below min Im l · ‖ε‖²")
                })?;
                energy = energy.max(res);
            }
        }
    }
    Ok(format!(
        "{} moduli pairs, min λmin(Im L*) − min Im l = {margin:.3e}, energy identity max residual {energy:.1e}",
        50 * c.items.len()
    ))
}

/// Dense `A = E†LE` and `B = X†L⁻¹X` with `X = [U J]`, built from the ambient `L`.
fn dense_ab(col: &Z2Collection, m: &ModuliPair) -> (CMatrix, CMatrix, CMatrix, CMatrix) {
    let l = build_l(col, m);
    let linv = col.p1.projector() / m.l1 + col.p2.projector() / m.l2;
    let x = col.uj_frame().vectors().clone();
    let e = col.e.vectors();
    let a = ad_mul(e, &mul(&l, e));
    let b = ad_mul(&x, &mul(&linv, &x));
    (a, b, l, linv)
}

fn representation_equivalence(c: &Corpus) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0_f64;
    for (label, col) in &c.items {
        let z = ZSolver::new(col);
        for _ in 0..3 {
            let m = upper(&mut rng);
            let (Ok(s), Ok(i)) = (z.schur(&m), z.inverse_formula(&m)) else {
                continue;
            };
            let res = rel(&i.matrix, &s.matrix);
            ensure(res <= 1e-8, || format!("{label}: Schur vs inverse formula {res:e}"))?;
            worst = worst.max(res);
        }
    }

    // Degenerate moduli l1 = 1, l2 = −λ/(1 − λ) for an eigenvalue λ ∈ (0, 1)
    // of E†Λ1E make E†LE singular.
    let mut degenerate = 0;
    for (label, col) in &c.items {
        if col.e.dim() == 0 {
            continue;
        }
        let pe = ad_mul(col.p1.vectors(), col.e.vectors());
        let g = ad_mul(&pe, &pe);
        let vals = fieldrec::numlin::hermitian_eigenvalues(&g);
        let Some(&lam) = vals.iter().find(|&&v| v > 0.05 && v < 0.95) else {
            continue;
        };
        let m = ModuliPair::real(1.0, -lam / (1.0 - lam));
        let (a, b, _, _) = dense_ab(col, &m);
        let sa = singular_values(&a);
        let sb = singular_values(&b);
        let ker_a = sa.iter().filter(|&&s| s <= 1e-9 * sa[0].max(1.0)).count();
        let ker_b = sb.iter().filter(|&&s| s <= 1e-9 * sb[0].max(1.0)).count();
        ensure(ker_a >= 1 && ker_a == ker_b, || format!("{label}: dim ker A = {ker_a}, dim ker B = {ker_b}"))?;
        let z = ZSolver::new(col);
        ensure(matches!(z.schur(&m), Err(Error::SingularL11 { .. })), || {
            format!("{label}: Schur did not report SingularL11")
        })?;
        ensure(matches!(z.inverse_formula(&m), Err(Error::SingularB { .. })), || {
            format!("{label}: inverse formula did not report SingularB")
        })?;
        let rep = coupled_inverse_check(col, &m).map_err(|e| e.to_string())?;
        ensure(rep.kernels_match && rep.a_diag.dim_ker == ker_a, || format!("{label}: {rep:?}"))?;
        degenerate += 1;
        if degenerate == 40 {
            break;
        }
    }
    ensure(degenerate >= 20, || format!("only {degenerate} degenerate cases constructed"))?;
    Ok(format!(
        "max relative difference {worst:.1e}; {degenerate} degenerate moduli with simultaneous singularity"
    ))
}

fn coupled_inverses(c: &Corpus) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_lib, mut worst_dense) = (0.0_f64, 0.0_f64);
    let mut n = 0;
    for (label, col) in &c.items {
        let m = upper(&mut rng);
        let rep = coupled_inverse_check(col, &m).map_err(|e| format!("{label}: {e}"))?;
        let (Some(ra), Some(rb)) = (rep.a_inv_residual, rep.b_inv_residual) else {
            return Err(format!("{label}: A or B not invertible at {m:?}"));
        };
        ensure(ra <= 1e-10 && rb <= 1e-10, || format!("{label}: residuals {ra:e}, {rb:e}"))?;
        worst_lib = worst_lib.max(ra).max(rb);

        // Same formulas from dense ambient blocks.
        let (a, b, l, linv) = dense_ab(col, &m);
        let x = col.uj_frame().vectors().clone();
        let e = col.e.vectors().clone_owned();
        let blk = |op: &CMatrix, p: &CMatrix, q: &CMatrix| ad_mul(p, &mul(op, q));
        let a_inv = inverse(&a).ok_or("A singular")?;
        let b_inv = inverse(&b).ok_or("B singular")?;
        let a_formula = blk(&linv, &e, &e) - blk(&linv, &e, &x) * &b_inv * blk(&linv, &x, &e);
        let b_formula = blk(&l, &x, &x) - blk(&l, &x, &e) * &a_inv * blk(&l, &e, &x);
        let (da, db) = (rel(&a_formula, &a_inv), rel(&b_formula, &b_inv));
        if col.e.dim() > 0 {
            ensure(da <= 1e-10, || format!("{label}: dense A⁻¹ residual {da:e}"))?;
            worst_dense = worst_dense.max(da);
        }
        ensure(db <= 1e-10, || format!("{label}: dense B⁻¹ residual {db:e}"))?;
        worst_dense = worst_dense.max(db);
        n += 1;
    }
    Ok(format!("{n} collections, max residual {worst_lib:.1e} (dense recomputation {worst_dense:.1e})"))
}

/// A collection with prescribed degeneracies: `k_pu` vectors of `U` inside
/// `P1`, and `k_ve`, `k_vj` pairs `(u, e)`, `(u, j)` split as
/// `(u ± e)/√2` between `P1` and `P2`. The rest is generic.
struct Plan {
    du: usize,
    de: usize,
    dj: usize,
    k_pu: usize,
    k_ve: usize,
    k_vj: usize,
    dp1_rest: usize,
}

fn structured(p: &Plan, seed: u64) -> Z2Collection {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = p.du + p.de + p.dj;
    let q = random_unitary(n, &mut rng);
    let col = |i: usize| q.column(i).into_owned();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let (mut u, mut e, mut j, mut p1, mut p2) = (vec![], vec![], vec![], vec![], vec![]);
    let mut at = 0;
    for _ in 0..p.k_pu {
        u.push(col(at));
        p1.push(col(at));
        at += 1;
    }
    for (count, is_e) in [(p.k_ve, true), (p.k_vj, false)] {
        for _ in 0..count {
            let (a, b) = (col(at), col(at + 1));
            u.push(a.clone());
            if is_e { e.push(b.clone()) } else { j.push(b.clone()) }
            p1.push((&a + &b) * C64::new(s, 0.0));
            p2.push((&a - &b) * C64::new(s, 0.0));
            at += 2;
        }
    }
    let w0 = at;
    let w = n - w0;
    let du_rest = p.du - u.len();
    let de_rest = p.de - e.len();
    for _ in 0..du_rest {
        u.push(col(at));
        at += 1;
    }
    for _ in 0..de_rest {
        e.push(col(at));
        at += 1;
    }
    while at < n {
        j.push(col(at));
        at += 1;
    }
    let wbasis = q.columns(w0, w).into_owned();
    let r = wbasis * random_unitary(w, &mut rng);
    for i in 0..w {
        let v = r.column(i).into_owned();
        if i < p.dp1_rest { p1.push(v) } else { p2.push(v) }
    }
    let basis = |vs: Vec<CVector>| {
        let mut m = CMatrix::zeros(n, vs.len());
        for (k, v) in vs.iter().enumerate() {
            m.set_column(k, v);
        }
        Basis::from_columns_unchecked(m)
    };
    Z2Collection::new(basis(u), basis(e), basis(j), basis(p1), basis(p2), Default::default()).unwrap()
}

fn dimension_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut cases: Vec<(String, Z2Collection, Option<(usize, usize, bool, bool)>)> = Vec::new();
    for seed in 0..50u64 {
        // Random dimensions, including regimes where P_a ∩ U is forced to be nonzero.
        let n = rng.random_range(4..=24);
        let du = rng.random_range(1..=n / 2);
        let de = rng.random_range(0..=n - du);
        let dj = n - du - de;
        let dp1 = rng.random_range(1..n);
        cases.push((
            format!("random seed {seed} ({n}; {du},{de},{dj}; {dp1})"),
            random_collection(n, du, de, dj, dp1, 600 + seed).unwrap(),
            None,
        ));
    }
    for seed in 0..50u64 {
        let k_pu = rng.random_range(0..=1);
        let k_ve = rng.random_range(0..=2);
        let k_vj = rng.random_range(0..=2);
        let du_rest = rng.random_range(1..=3);
        let de_rest = du_rest + rng.random_range(0..=3);
        let dj_rest = du_rest + rng.random_range(0..=3);
        let w = du_rest + de_rest + dj_rest;
        let dp1_rest = rng.random_range(du_rest..=w - du_rest);
        let p = Plan {
            du: k_pu + k_ve + k_vj + du_rest,
            de: k_ve + de_rest,
            dj: k_vj + dj_rest,
            k_pu,
            k_ve,
            k_vj,
            dp1_rest,
        };
        // Closed forms for this construction.
        let v = p.du - k_pu;
        let u_next = p.du - k_pu - k_ve - k_vj;
        cases.push((
            format!("structured seed {seed} (pu {k_pu}, ve {k_ve}, vj {k_vj})"),
            structured(&p, 700 + seed),
            Some((v, u_next, k_pu == 0, k_ve == 0 && k_vj == 0)),
        ));
    }

    let (mut pos_i, mut neg_i, mut pos_ii, mut neg_ii) = (0, 0, 0, 0);
    for (label, col, truth) in &cases {
        let (y, _) = derive_y(col).map_err(|e| format!("{label}: {e}"))?;
        let du = col.u.dim();
        let dv = y.dim_v();
        let want_v = rank(&ad_mul(col.p1.vectors(), col.u.vectors())) + rank(&ad_mul(col.p2.vectors(), col.u.vectors()));
        ensure(dv + du == want_v, || format!("{label}: dim V = {dv}, dim Λ1U + dim Λ2U − dim U = {}", want_v as i64 - du as i64))?;
        let du1 = y.u1.dim();
        let want_u1 = rank(&ad_mul(col.e.vectors(), y.v.vectors())) + rank(&ad_mul(col.j.vectors(), y.v.vectors()));
        ensure(du1 + dv == want_u1, || format!("{label}: dim U1 = {du1}, dim Γ1V + dim Γ2V − dim V = {}", want_u1 as i64 - dv as i64))?;

        let h = build_hierarchy(col, 1).map_err(|e| format!("{label}: {e}"))?;
        let l = &h.levels[0];
        ensure(l.dims.v == dv && l.dims.u_next == du1, || format!("{label}: ledger dims {:?}", l.dims))?;
        ensure(l.separation.v_dim_identity && l.separation.u_next_dim_identity, || {
            format!("{label}: separation identities {:?}", l.separation)
        })?;
        let eq_i = l.dims.v == l.dims.u;
        let eq_ii = l.dims.u_next == l.dims.v;
        ensure(eq_i == l.flags.p_cap_u_trivial, || format!("{label}: equivalence (i) fails, {:?}", l.flags))?;
        ensure(eq_ii == (l.flags.e_cap_v_trivial && l.flags.j_cap_v_trivial), || {
            format!("{label}: equivalence (ii) fails, {:?}", l.flags)
        })?;
        if let Some((v, u_next, flag_i, flag_ii)) = truth {
            ensure(dv == *v && du1 == *u_next, || format!("{label}: dims ({dv}, {du1}), constructed ({v}, {u_next})"))?;
            ensure(l.flags.p_cap_u_trivial == *flag_i, || format!("{label}: flag (i) {:?}", l.flags))?;
            ensure((l.flags.e_cap_v_trivial && l.flags.j_cap_v_trivial) == *flag_ii, || {
                format!("{label}: flag (ii) {:?}", l.flags)
            })?;
        }
        if l.flags.p_cap_u_trivial { pos_i += 1 } else { neg_i += 1 }
        if l.flags.e_cap_v_trivial && l.flags.j_cap_v_trivial { pos_ii += 1 } else { neg_ii += 1 }
    }
    ensure(pos_i > 0 && neg_i > 0 && pos_ii > 0 && neg_ii > 0, || {
        format!("instances (i) +{pos_i}/−{neg_i}, (ii) +{pos_ii}/−{neg_ii}")
    })?;
    Ok(format!(
        "{} collections; equivalence (i) on {pos_i} positive / {neg_i} negative, (ii) on {pos_ii} / {neg_ii}",
        cases.len()
    ))
}

/// Collections whose first two levels have all flags true.
fn all_flags_corpus() -> Vec<(String, Z2Collection)> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut out = Vec::new();
    let mut seed = 0u64;
    while out.len() < 50 {
        seed += 1;
        let du = rng.random_range(1..=3);
        let half = rng.random_range(3 * du..=3 * du + 4);
        let n = du + 2 * half;
        let dp1 = n / 2;
        let col = random_collection(n, du, half, half, dp1, 900 + seed).unwrap();
        out.push((format!("seed {} ({n}; {du},{half},{half}; {dp1})", 900 + seed), col));
    }
    out
}

fn congruence(all: &[(String, Z2Collection)]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst_id, mut worst_y, mut deep) = (0.0_f64, 0.0_f64, 0);
    for (label, col) in all {
        let h = build_hierarchy(col, 3).map_err(|e| format!("{label}: {e}"))?;
        ensure(h.levels.len() >= 2 && h.levels[0].flags.all(), || format!("{label}: flags not all true"))?;
        for level in &h.levels {
            let (Some(k), Some(kp)) = (&level.k_map, &level.k_prime) else {
                continue;
            };
            if level.k >= 1 {
                deep += 1;
            }
            let dv = level.dims.v;
            let id = (mul(kp, &k.adjoint()) + CMatrix::identity(dv, dv)).norm();
            ensure(id <= 1e-10, || format!("{label} level {}: ‖K′K† + I‖ = {id:e}", level.k))?;
            worst_id = worst_id.max(id);
            for _ in 0..10 {
                let m = upper(&mut rng);
                let ystar = y_operator(&level.y, &m).map_err(|e| format!("{label}: {e}"))?.matrix;
                let below = ZSolver::new(&level.next.z).schur(&m).map_err(|e| format!("{label}: {e}"))?.matrix;
                let res = rel(&(k * below * k.adjoint()), &ystar);
                ensure(res <= 1e-8, || format!("{label} level {}: ‖Y* − K L* K†‖ rel {res:e}", level.k))?;
                worst_y = worst_y.max(res);
            }
        }
    }
    ensure(deep >= 1, || "no level at depth ≥ 1 had K maps".into())?;
    Ok(format!(
        "{} collections × 10 moduli, {deep} levels at depth ≥ 1; max ‖K′K† + I‖ = {worst_id:.1e}, max congruence residual {worst_y:.1e}",
        all.len()
    ))
}

fn fraction_and_cf(c: &Corpus, all: &[(String, Z2Collection)]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut worst_f, mut nf) = (0.0_f64, 0);
    for (label, col) in c.items.iter().chain(all) {
        let (y, _) = derive_y(col).map_err(|e| format!("{label}: {e}"))?;
        if y.dim_vj() > 0 {
            continue;
        }
        let m = upper(&mut rng);
        let f = fractional_relation(col, &y, &m).map_err(|e| format!("{label}: {e}"))?;
        let s = ZSolver::new(col).schur(&m).map_err(|e| format!("{label}: {e}"))?;
        let res = rel(&f.matrix, &s.matrix);
        ensure(res <= 1e-8, || format!("{label}: fraction vs Schur {res:e}"))?;
        worst_f = worst_f.max(res);
        nf += 1;
    }
    let mut worst_cf = 0.0_f64;
    for (label, col) in all {
        let h = build_hierarchy(col, 2).map_err(|e| format!("{label}: {e}"))?;
        let m = upper(&mut rng);
        let s = ZSolver::new(col).schur(&m).map_err(|e| format!("{label}: {e}"))?;
        for depth in [1, 2] {
            let cf = continued_fraction_eval(&h, &m, depth, Terminal::Exact).map_err(|e| format!("{label}: {e}"))?;
            let res = rel(&cf.matrix, &s.matrix);
            ensure(res <= 1e-7, || format!("{label}: continued fraction depth {depth} {res:e}"))?;
            worst_cf = worst_cf.max(res);
        }
    }
    Ok(format!(
        "fraction on {nf} collections, max {worst_f:.1e}; continued fraction depths 1, 2 on {}, max {worst_cf:.1e}",
        all.len()
    ))
}

fn series_and_parallel() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (series, parallel) = (series_model(), parallel_model());
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let m = upper(&mut rng);
        let harmonic = m.l1 * m.l2 * 2.0 / (m.l1 + m.l2);
        let arithmetic = (m.l1 + m.l2) / 2.0;
        for (col, want) in [(&series, harmonic), (&parallel, arithmetic)] {
            let z = ZSolver::new(col);
            let direct = z.direct(&m).map_err(|e| e.to_string())?.matrix[(0, 0)];
            let schur = z.schur(&m).map_err(|e| e.to_string())?.matrix[(0, 0)];
            for got in [direct, schur] {
                let res = (got - want).norm() / want.norm();
                ensure(res <= 1e-12, || format!("{m:?}: got {got}, closed form {want}"))?;
                worst = worst.max(res);
            }
        }
    }
    Ok(format!("100 moduli pairs, max relative error {worst:.1e}"))
}

fn laminate_tensor() -> Outcome {
    let g = laminate(16, 4, 0.5, 0).map_err(|e| e.to_string())?;
    let gc = build_grid_collection(&g).map_err(|e| e.to_string())?;
    let m = ModuliPair::real(1.0, 4.0);
    let mut report = Vec::new();
    for method in [EvalMethod::Schur, EvalMethod::Direct] {
        let t = fieldrec::eval::evaluate(&gc.base, &m, method).map_err(|e| e.to_string())?.matrix;
        let (d0, d1) = (t[(0, 0)], t[(1, 1)]);
        ensure((d0 - C64::new(1.6, 0.0)).norm() <= 1e-8, || format!("{method}: normal entry {d0}"))?;
        ensure((d1 - C64::new(2.5, 0.0)).norm() <= 1e-8, || format!("{method}: transverse entry {d1}"))?;
        let off = t[(0, 1)].norm().max(t[(1, 0)].norm());
        ensure(off <= 1e-10, || format!("{method}: off-diagonal {off:e}"))?;
        report.push(format!("{method}: ({:.12}, {:.12}), off {off:.1e}", d0.re, d1.re));
    }
    Ok(report.join("; "))
}

fn laminate_degeneracy() -> Outcome {
    let g = laminate(16, 4, 0.5, 0).map_err(|e| e.to_string())?;
    let rep = degeneracy_report(&g).map_err(|e| e.to_string())?;
    ensure(rep.dim_ve >= 1 && rep.dim_vj >= 1, || format!("dim V∩E = {}, dim V∩J = {}", rep.dim_ve, rep.dim_vj))?;

    // [f2χ1 − f1χ2] n with n the layer normal, and the same along v ⊥ n.
    let (f1, f2) = (0.5, 0.5);
    let field = |dir: [f64; 2]| {
        let mut w = CMatrix::zeros(2 * g.n_pixels(), 1);
        for p in 0..g.n_pixels() {
            let s = if g.phase[p] == 1 { f2 } else { -f1 };
            for c in 0..2 {
                w[(2 * p + c, 0)] = C64::new(s * dir[c], 0.0);
            }
        }
        w
    };
    let witness_basis = |ws: &Vec<Vec<[f64; 2]>>| {
        let n = 2 * g.n_pixels();
        CMatrix::from_fn(n, ws.len(), |i, k| C64::new(ws[k][i][0], ws[k][i][1]))
    };
    let membership = |w: &CMatrix, b: &CMatrix| (w - b * ad_mul(b, w)).norm() / w.norm();
    let re = membership(&field([1.0, 0.0]), &witness_basis(&rep.witnesses_ve));
    let rj = membership(&field([0.0, 1.0]), &witness_basis(&rep.witnesses_vj));
    ensure(re <= 1e-8 && rj <= 1e-8, || format!("membership residuals {re:e}, {rj:e}"))?;

    let gc = build_grid_collection(&g).map_err(|e| e.to_string())?;
    let (y, _) = derive_y(&gc.base).map_err(|e| e.to_string())?;
    let m = ModuliPair::real(1.0, 4.0);
    let ys = y_operator(&y, &m);
    ensure(matches!(ys, Err(Error::SingularF { .. })), || format!("Y* construction gave {:?}", ys.map(|r| r.matrix)))?;
    let h = build_hierarchy(&gc.base, 4).map_err(|e| e.to_string())?;
    let Termination::Degenerate { flags } = &h.termination else {
        return Err(format!("hierarchy terminated with {:?}", h.termination));
    };
    ensure(flags.first() == Some(&Intersection::VJ), || format!("flags {flags:?}"))?;
    Ok(format!(
        "dim V∩E = {}, dim V∩J = {}, membership residuals {re:.1e} / {rj:.1e}, SingularF, terminated degenerate {flags:?}",
        rep.dim_ve, rep.dim_vj
    ))
}

fn checkerboard_convergence() -> Outcome {
    let m = ModuliPair::real(1.0, 4.0);
    let target = 2.0;
    let mut devs = Vec::new();
    let mut detail = Vec::new();
    for n in [8, 16, 32] {
        let g = checkerboard(n).map_err(|e| e.to_string())?;
        let gc = build_grid_collection(&g).map_err(|e| e.to_string())?;
        let z = ZSolver::new(&gc.base);
        let t = z.schur(&m).map_err(|e| e.to_string())?.matrix;
        if n == 16 {
            let swapped = z.schur(&m.swapped()).map_err(|e| e.to_string())?.matrix;
            let sym = (&swapped - &t).norm();
            ensure(sym <= 1e-8, || format!("phase swap changes σ* by {sym:e}"))?;
            let diag = (t[(0, 0)] - t[(1, 1)]).norm();
            ensure(diag <= 1e-8, || format!("diagonal entries differ by {diag:e}"))?;
            detail.push(format!("swap residual {sym:.1e}"));
        }
        let dev = (0..2).map(|i| (t[(i, i)].re - target).abs() / target).fold(0.0, f64::max);
        detail.push(format!("N={n}: {dev:.3e}"));
        devs.push(dev);
    }
    ensure(devs.windows(2).all(|w| w[1] < w[0]), || format!("deviations not decreasing: {devs:?}"))?;
    ensure(devs[2] <= 0.10, || format!("deviation at N=32 is {:.3}", devs[2]))?;
    Ok(detail.join(", "))
}

fn spectral_sweep() -> Outcome {
    let g = random_grid(vec![32, 32], 0.5, 13).map_err(|e| e.to_string())?;
    let gc = build_grid_collection(&g).map_err(|e| e.to_string())?;
    let col = &gc.base;

    let t = Instant::now();
    let s = spectral_precompute(col);
    let pre = t.elapsed().as_secs_f64();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let z = ZSolver::new(col);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let m = ModuliPair::new(
            C64::new(rng.random_range(-4.0..4.0), rng.random_range(0.05..4.0)),
            C64::new(1.0, 0.0),
        );
        let a = effective_spectral(&s, &m).map_err(|e| e.to_string())?.matrix;
        let b = z.schur(&m).map_err(|e| e.to_string())?.matrix;
        let res = rel(&a, &b);
        ensure(res <= 1e-8, || format!("{m:?}: spectral vs Schur {res:e}"))?;
        worst = worst.max(res);
    }

    let re: Vec<f64> = (0..100).map(|i| -4.0 + 8.0 * i as f64 / 99.0).collect();
    let im: Vec<f64> = (0..100).map(|i| 4.0 * i as f64 / 99.0).collect();
    let t = Instant::now();
    let csv = sweep_csv(col, Fixed::L2, C64::new(1.0, 0.0), &re, &im, SweepMethod::Spectral);
    let secs = t.elapsed().as_secs_f64();
    let rows = csv.lines().count() - 1;
    let poles = csv.lines().filter(|l| l.ends_with("pole_hit")).count();
    ensure(rows == 10_000, || format!("{rows} rows"))?;
    ensure(secs < 300.0, || format!("sweep took {secs:.1} s"))?;
    Ok(format!(
        "ambient {}, 20 spot checks max {worst:.1e}; precompute {pre:.1} s; 10,000-point sweep (with its own precompute) {secs:.1} s, {poles} pole rows",
        col.ambient_dim()
    ))
}

fn solvability() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let (mut checked, mut smallest) = (0, f64::INFINITY);
    let mut seed = 0u64;
    let mut collections = 0;
    while collections < 50 {
        seed += 1;
        let n = rng.random_range(6..=30);
        let du = rng.random_range(1..=(n / 4).max(1));
        let dj = rng.random_range(1..=n - du);
        let de = n - du - dj;
        let dp1 = rng.random_range(1..n);
        let col = random_collection(n, du, de, dj, dp1, 1500 + seed).unwrap();
        let label = format!("seed {} ({n}; {du},{de},{dj}; {dp1})", 1500 + seed);
        let (y, _) = derive_y(&col).map_err(|e| format!("{label}: {e}"))?;
        if y.dim_vj() != 0 || y.dim_v() == 0 {
            continue;
        }
        collections += 1;
        for _ in 0..10 {
            let m = nonzero(&mut rng);
            let sv = check_solvability(&y, &m).map_err(|e| format!("{label}: {e}"))?;
            ensure(sv.assumption_holds, || format!("{label}: assumption flag false"))?;
            ensure(sv.f_diag.dim_ker == 0 && sv.f_diag.dim_coker == 0, || format!("{label}: {m:?}: {:?}", sv.f_diag))?;
            let f = y.f_matrix(&m).map_err(|e| format!("{label}: {e}"))?;
            let s = singular_values(&f);
            let sa = singular_values(&f.adjoint());
            let scale = m.inverse_magnitude();
            let lo = s.last().copied().unwrap_or(f64::INFINITY).min(sa.last().copied().unwrap_or(f64::INFINITY)) / scale;
            ensure(lo > 1e-10, || format!("{label}: {m:?}: σ_min(F)/‖L⁻¹‖ = {lo:e}"))?;
            smallest = smallest.min(lo);
            checked += 1;
        }
    }
    Ok(format!("{collections} collections × 10 moduli ({checked} checks), min σ_min(F)/‖L⁻¹‖ = {smallest:.2e}"))
}

fn run(index: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let secs = t.elapsed().as_secs_f64();
    match outcome {
        Ok(detail) => {
            println!("PASS {index:>2} {name} [{secs:.1} s]: {detail}");
            true
        }
        Err(reason) => {
            println!("FAIL {index:>2} {name} [{secs:.1} s]: {reason}");
            false
        }
    }
}

fn main() -> ExitCode {
    let c = corpus();
    let all = all_flags_corpus();
    let results = [
        run(1, "normalization", || normalization(&c)),
        run(2, "homogeneity", || homogeneity(&c)),
        run(3, "herglotz lower bound", || herglotz(&c)),
        run(4, "representation equivalence", || representation_equivalence(&c)),
        run(5, "coupled inverse formulas", || coupled_inverses(&c)),
        run(6, "dimension identities and flag equivalences", dimension_identities),
        run(7, "congruence", || congruence(&all)),
        run(8, "fractional relation and continued fraction", || fraction_and_cf(&c, &all)),
        run(9, "series and parallel models", series_and_parallel),
        run(10, "laminate tensor", laminate_tensor),
        run(11, "laminate degeneracy", laminate_degeneracy),
        run(12, "checkerboard", checkerboard_convergence),
        run(13, "spectral path and sweep", spectral_sweep),
        run(14, "F solvability", solvability),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("{passed}/{} acceptance criteria passed", results.len());
    if passed == results.len() { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
