use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Which intersection made a recursion step degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Intersection {
    /// `V ∩ J`
    VJ,
    /// `V ∩ E`
    VE,
    /// `P1 ∩ U`
    P1U,
    /// `P2 ∩ U`
    P2U,
}

impl std::fmt::Display for Intersection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Intersection::VJ => "VJ",
            Intersection::VE => "VE",
            Intersection::P1U => "P1U",
            Intersection::P2U => "P2U",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("non-finite value in input")]
    NonFinite,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("columns are not orthonormal (residual {residual:e})")]
    NotOrthonormal { residual: f64 },
    #[error("ambient dimensions differ: {left} vs {right}")]
    AmbientMismatch { left: usize, right: usize },
    #[error("inconsistent dimensions: {0}")]
    InconsistentDimensions(String),
    #[error("subspace is not contained in its parent (defect {defect:e})")]
    NotContained { defect: f64 },
    #[error("a phase modulus is zero")]
    ZeroModulus,
    #[error("L11 is singular (dim ker = {dim_ker})")]
    SingularL11 { dim_ker: usize, witness: Vec<[f64; 2]> },
    #[error("B is singular (dim ker = {dim_ker})")]
    SingularB { dim_ker: usize },
    #[error("F is singular (dim ker = {dim_ker}, dim coker = {dim_coker})")]
    SingularF { dim_ker: usize, dim_coker: usize },
    #[error("Π1LΠ1 + Y* is singular (dim ker = {dim_ker})")]
    SingularShiftedY { dim_ker: usize },
    #[error("degenerate intersection {which} (dim {dim})")]
    DegenerateIntersection { which: Intersection, dim: usize },
    #[error("pole hit at eigenvalue index {index} (|denominator| = {denominator:e})")]
    PoleHit { index: usize, denominator: f64 },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short variant name used as the `"error"` field of the JSON form.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NonFinite => "NonFinite",
            Error::InvalidInput(_) => "InvalidInput",
            Error::NotOrthonormal { .. } => "NotOrthonormal",
            Error::AmbientMismatch { .. } => "AmbientMismatch",
            Error::InconsistentDimensions(_) => "InconsistentDimensions",
            Error::NotContained { .. } => "NotContained",
            Error::ZeroModulus => "ZeroModulus",
            Error::SingularL11 { .. } => "SingularL11",
            Error::SingularB { .. } => "SingularB",
            Error::SingularF { .. } => "SingularF",
            Error::SingularShiftedY { .. } => "SingularShiftedY",
            Error::DegenerateIntersection { .. } => "DegenerateIntersection",
            Error::PoleHit { .. } => "PoleHit",
            Error::PreconditionViolated(_) => "PreconditionViolated",
            Error::InvalidGeometry(_) => "InvalidGeometry",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }

    /// Machine-readable form, e.g. `{"error": "SingularL11", "dim_ker": 1}`.
    pub fn to_json(&self) -> Value {
        let mut v = match self {
            Error::NotOrthonormal { residual } => json!({ "residual": residual }),
            Error::AmbientMismatch { left, right } => json!({ "left": left, "right": right }),
            Error::NotContained { defect } => json!({ "defect": defect }),
            Error::SingularL11 { dim_ker, witness } => {
                json!({ "dim_ker": dim_ker, "witness": witness })
            }
            Error::SingularB { dim_ker } | Error::SingularShiftedY { dim_ker } => {
                json!({ "dim_ker": dim_ker })
            }
            Error::SingularF { dim_ker, dim_coker } => {
                json!({ "dim_ker": dim_ker, "dim_coker": dim_coker })
            }
            Error::DegenerateIntersection { which, dim } => {
                json!({ "which": which.to_string(), "dim": dim })
            }
            Error::PoleHit { index, denominator } => {
                json!({ "index": index, "denominator": denominator })
            }
            _ => json!({}),
        };
        v["error"] = json!(self.name());
        v["message"] = json!(self.to_string());
        v
    }

    /// True for errors caused by malformed input rather than by the mathematics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::NonFinite
                | Error::InvalidInput(_)
                | Error::AmbientMismatch { .. }
                | Error::InconsistentDimensions(_)
                | Error::InvalidGeometry(_)
                | Error::Parse(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}
