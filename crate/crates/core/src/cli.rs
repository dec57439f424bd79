//! Command-line front end. Every command prints JSON (or CSV for sweeps)
//! and exits 0 on success, 1 on a mathematical failure, 2 on bad input.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::collections::{random_collection, validate, ModuliPair, Z2Collection};
use crate::composite::{build_grid_collection, effective_tensor_json, GeometryGrid};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalMethod};
use crate::numlin::{self, C64};
use crate::recursion::{build_hierarchy, effective_spectral, spectral_precompute, SpectralStructure};
use crate::verify::{verify_collection, verify_seed};
use crate::zsolver::{EffectiveResult, ZSolver};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Parses a complex literal such as `3`, `-0.5`, `2+1i`, `-0.5-2i` or `2i`.
pub fn parse_complex(s: &str) -> Result<C64> {
    let bad = || Error::Parse(format!("invalid complex literal {s:?}"));
    let t = s.trim();
    if t.is_empty() || t.contains(char::is_whitespace) {
        return Err(bad());
    }
    let num = |x: &str| -> Result<f64> {
        let v: f64 = x.parse().map_err(|_| bad())?;
        if v.is_finite() { Ok(v) } else { Err(bad()) }
    };
    let Some(body) = t.strip_suffix('i') else {
        return Ok(C64::new(num(t)?, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |x: &str| -> Result<f64> {
        match x {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => num(x),
        }
    };
    match split {
        Some(k) => Ok(C64::new(num(&body[..k])?, imag(&body[k..])?)),
        None => Ok(C64::new(0.0, imag(body)?)),
    }
}

fn complex_arg(s: &str) -> std::result::Result<C64, String> {
    parse_complex(s).map_err(|e| e.to_string())
}

fn method_arg(s: &str) -> std::result::Result<EvalMethod, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "fieldrec", version, about = "Effective operators and subspace recursion for two-phase composites")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fixed {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepMethod {
    Spectral,
    Schur,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a collection file and print its validation report.
    Validate { path: PathBuf },
    /// Compute the effective operator at one pair of moduli.
    Effective {
        path: PathBuf,
        #[arg(long, value_parser = complex_arg, allow_hyphen_values = true)]
        l1: C64,
        #[arg(long, value_parser = complex_arg, allow_hyphen_values = true)]
        l2: C64,
        /// schur, inverse, direct, fraction, spectral or cf:<depth>
        #[arg(long, default_value = "schur", value_parser = method_arg)]
        method: EvalMethod,
    },
    /// Build the subspace hierarchy and print its ledger.
    Recurse {
        path: PathBuf,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// Include K matrices, structure matrices and spectral weights.
        #[arg(long)]
        report: bool,
    },
    /// Evaluate the effective operator over a grid of one modulus.
    Sweep {
        path: PathBuf,
        /// Which modulus stays fixed.
        #[arg(long, value_enum, default_value = "l2")]
        fixed: Fixed,
        #[arg(long, value_parser = complex_arg, allow_hyphen_values = true, default_value = "1")]
        value: C64,
        #[arg(long, allow_hyphen_values = true)]
        re_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        re_max: f64,
        #[arg(long)]
        n_re: usize,
        #[arg(long, allow_hyphen_values = true)]
        im_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        im_max: f64,
        #[arg(long)]
        n_im: usize,
        #[arg(long, value_enum, default_value = "spectral")]
        method: SweepMethod,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Emit a seeded random collection.
    Random {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        du: usize,
        #[arg(long)]
        de: usize,
        #[arg(long)]
        dj: usize,
        #[arg(long)]
        dp1: usize,
        #[arg(long)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Build the grid collection of a geometry and optionally its effective tensor.
    Grid {
        #[arg(long)]
        geometry: PathBuf,
        #[arg(long, value_parser = complex_arg, allow_hyphen_values = true, requires = "sigma2")]
        sigma1: Option<C64>,
        #[arg(long, value_parser = complex_arg, allow_hyphen_values = true, requires = "sigma1")]
        sigma2: Option<C64>,
        #[arg(long, default_value = "schur", value_parser = method_arg)]
        method: EvalMethod,
        /// Write the collection file here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the full property suite on a file or a range of seeds.
    Verify {
        path: Option<PathBuf>,
        /// Seeds as `a..b` (end exclusive).
        #[arg(long, conflicts_with = "path")]
        seed_range: Option<String>,
        #[arg(long, default_value_t = 16)]
        dim: usize,
    },
}

fn print_json(out: &mut dyn Write, v: &Value) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn load(path: &Path) -> Result<Z2Collection> {
    let s = std::fs::read_to_string(path)?;
    Z2Collection::from_json_str(&s)
}

fn write_or_print(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => writeln!(out, "{text}")?,
    }
    Ok(())
}

fn effective_json(r: &EffectiveResult) -> Value {
    let mut v = r.to_json();
    v["lambda_min_im"] = crate::zsolver::finite_or_null(r.lambda_min_im());
    v
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

enum SweepEngine<'a> {
    Spectral(SpectralStructure),
    Schur(ZSolver<'a>),
}

impl SweepEngine<'_> {
    fn eval(&self, m: &ModuliPair) -> Result<EffectiveResult> {
        match self {
            SweepEngine::Spectral(s) => effective_spectral(s, m),
            SweepEngine::Schur(z) => z.schur(m),
        }
    }
}

fn csv_float(x: f64) -> String {
    if x.is_finite() { format!("{x:e}") } else { "nan".into() }
}

/// One CSV row per grid point, ordered by real part then imaginary part.
pub fn sweep_csv(
    c: &Z2Collection,
    fixed: Fixed,
    value: C64,
    re: &[f64],
    im: &[f64],
    method: SweepMethod,
) -> String {
    let engine = match method {
        SweepMethod::Spectral => SweepEngine::Spectral(spectral_precompute(c)),
        SweepMethod::Schur => SweepEngine::Schur(ZSolver::new(c)),
    };
    let du = c.u.dim();
    let mut header = vec!["re".to_string(), "im".to_string()];
    for r in 0..du {
        for s in 0..du {
            header.push(format!("l{r}{s}_re"));
            header.push(format!("l{r}{s}_im"));
        }
    }
    header.push("lambda_min_im".into());
    header.push("status".into());

    let points: Vec<(f64, f64)> = re.iter().flat_map(|&a| im.iter().map(move |&b| (a, b))).collect();
    let rows: Vec<String> = points
        .par_iter()
        .map(|&(a, b)| {
            let z = C64::new(a, b);
            let m = match fixed {
                Fixed::L2 => ModuliPair::new(z, value),
                Fixed::L1 => ModuliPair::new(value, z),
            };
            let mut cells = vec![csv_float(a), csv_float(b)];
            match engine.eval(&m) {
                Ok(r) => {
                    for i in 0..du {
                        for j in 0..du {
                            cells.push(csv_float(r.matrix[(i, j)].re));
                            cells.push(csv_float(r.matrix[(i, j)].im));
                        }
                    }
                    cells.push(csv_float(numlin::min_eigenvalue(&numlin::im_part(&r.matrix))));
                    cells.push("ok".into());
                }
                Err(e) => {
                    cells.extend(std::iter::repeat_n("nan".to_string(), 2 * du * du + 1));
                    cells.push(match e {
                        Error::PoleHit { .. } => "pole_hit".into(),
                        other => other.name().to_string(),
                    });
                }
            }
            cells.join(",")
        })
        .collect();
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

fn parse_seed_range(s: &str) -> Result<std::ops::Range<u64>> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| Error::Parse(format!("seed range {s:?} is not a..b")))?;
    let a: u64 = a.trim().parse().map_err(|_| Error::Parse(format!("bad seed {a:?}")))?;
    let b: u64 = b.trim().parse().map_err(|_| Error::Parse(format!("bad seed {b:?}")))?;
    if a >= b {
        return Err(Error::Parse(format!("empty seed range {s:?}")));
    }
    Ok(a..b)
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Validate { path } => {
            let c = load(&path)?;
            let rep = validate(&c);
            print_json(out, &serde_json::to_value(&rep)?)?;
            Ok(if rep.passed { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Effective { path, l1, l2, method } => {
            let c = load(&path)?;
            let r = evaluate(&c, &ModuliPair::new(l1, l2), method)?;
            print_json(out, &effective_json(&r))?;
            Ok(EXIT_OK)
        }
        Command::Recurse { path, depth, report } => {
            let c = load(&path)?;
            let h = build_hierarchy(&c, depth)?;
            let v = if report {
                h.to_json()
            } else {
                json!({
                    "depth": h.depth(),
                    "termination": h.termination,
                    "ledger": h.levels.iter().map(|l| json!({
                        "k": l.k,
                        "dims": l.dims,
                        "flags": l.flags,
                    })).collect::<Vec<_>>(),
                })
            };
            print_json(out, &v)?;
            Ok(EXIT_OK)
        }
        Command::Sweep {
            path,
            fixed,
            value,
            re_min,
            re_max,
            n_re,
            im_min,
            im_max,
            n_im,
            method,
            output,
        } => {
            if n_re == 0 || n_im == 0 {
                return Err(Error::InvalidInput("grid counts must be at least 1".into()));
            }
            if ![re_min, re_max, im_min, im_max].iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidInput("grid bounds must be finite".into()));
            }
            let c = load(&path)?;
            let csv = sweep_csv(
                &c,
                fixed,
                value,
                &linspace(re_min, re_max, n_re),
                &linspace(im_min, im_max, n_im),
                method,
            );
            match output {
                Some(p) => std::fs::write(p, csv)?,
                None => write!(out, "{csv}")?,
            }
            Ok(EXIT_OK)
        }
        Command::Random {
            dim,
            du,
            de,
            dj,
            dp1,
            seed,
            output,
        } => {
            let c = random_collection(dim, du, de, dj, dp1, seed)?;
            write_or_print(out, output.as_deref(), &c.to_json_string())?;
            Ok(EXIT_OK)
        }
        Command::Grid {
            geometry,
            sigma1,
            sigma2,
            method,
            output,
        } => {
            let g = GeometryGrid::from_file(&geometry)?;
            let gc = build_grid_collection(&g)?;
            if let Some(p) = output.as_deref() {
                std::fs::write(p, gc.base.to_json_string())?;
            }
            match (sigma1, sigma2) {
                (Some(s1), Some(s2)) => {
                    let m = ModuliPair::new(s1, s2);
                    let r = evaluate(&gc.base, &m, method)?;
                    print_json(out, &effective_tensor_json(&g, &m, &r))?;
                }
                _ if output.is_none() => writeln!(out, "{}", gc.base.to_json_string())?,
                _ => {}
            }
            Ok(EXIT_OK)
        }
        Command::Verify { path, seed_range, dim } => {
            let reports = match (path, seed_range) {
                (Some(p), _) => vec![verify_collection(&load(&p)?, &p.display().to_string(), 0)],
                (None, Some(r)) => {
                    let range = parse_seed_range(&r)?;
                    range.map(|s| verify_seed(dim, s)).collect::<Result<Vec<_>>>()?
                }
                (None, None) => {
                    return Err(Error::InvalidInput("give a collection file or --seed-range".into()))
                }
            };
            let passed = reports.iter().all(|r| r.passed);
            let first = reports.iter().find_map(|r| {
                r.first_failure().map(|c| json!({ "collection": r.label, "check": c }))
            });
            print_json(
                out,
                &json!({
                    "passed": passed,
                    "first_failure": first,
                    "collections": reports,
                }),
            )?;
            Ok(if passed { EXIT_OK } else { EXIT_FAILURE })
        }
    }
}

/// Parses arguments, runs the command, and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = write!(err, "{e}");
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = print_json(out, &e.to_json());
            let _ = writeln!(err, "fieldrec: {e}");
            if e.is_input_error() { EXIT_INPUT } else { EXIT_FAILURE }
        }
    }
}
