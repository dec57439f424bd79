//! Dispatch over the ways of computing `L*`.

use std::fmt;
use std::str::FromStr;

use crate::collections::{ModuliPair, Z2Collection};
use crate::error::{Error, Result};
use crate::recursion::{build_hierarchy, continued_fraction_eval, effective_spectral, spectral_precompute, Terminal};
use crate::ysolver::{derive_y, fractional_relation};
use crate::zsolver::{EffectiveResult, ZSolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMethod {
    Schur,
    Inverse,
    Direct,
    Fraction,
    Spectral,
    /// Continued fraction folded from the given depth with an exact terminal.
    ContinuedFraction(usize),
}

impl FromStr for EvalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "schur" => EvalMethod::Schur,
            "inverse" | "inverse_formula" => EvalMethod::Inverse,
            "direct" => EvalMethod::Direct,
            "fraction" | "fractional_relation" => EvalMethod::Fraction,
            "spectral" => EvalMethod::Spectral,
            _ => {
                let depth = s
                    .strip_prefix("cf:")
                    .and_then(|d| d.parse::<usize>().ok())
                    .ok_or_else(|| Error::Parse(format!("unknown method {s:?}")))?;
                EvalMethod::ContinuedFraction(depth)
            }
        })
    }
}

impl fmt::Display for EvalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalMethod::Schur => f.write_str("schur"),
            EvalMethod::Inverse => f.write_str("inverse"),
            EvalMethod::Direct => f.write_str("direct"),
            EvalMethod::Fraction => f.write_str("fraction"),
            EvalMethod::Spectral => f.write_str("spectral"),
            EvalMethod::ContinuedFraction(d) => write!(f, "cf:{d}"),
        }
    }
}

/// Computes `L*(m)` for one collection by the chosen method.
pub fn evaluate(c: &Z2Collection, m: &ModuliPair, method: EvalMethod) -> Result<EffectiveResult> {
    match method {
        EvalMethod::Schur => ZSolver::new(c).schur(m),
        EvalMethod::Inverse => ZSolver::new(c).inverse_formula(m),
        EvalMethod::Direct => ZSolver::new(c).direct(m),
        EvalMethod::Fraction => {
            let (y, _) = derive_y(c)?;
            fractional_relation(c, &y, m)
        }
        EvalMethod::Spectral => effective_spectral(&spectral_precompute(c), m),
        EvalMethod::ContinuedFraction(depth) => {
            let h = build_hierarchy(c, depth)?;
            continued_fraction_eval(&h, m, depth, Terminal::Exact)
        }
    }
}
