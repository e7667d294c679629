//! Critical loci of chart potentials over the Novikov field.
//!
//! Univariate potentials go through the Newton polygon of `dW` and Hensel
//! lifting; monomial potentials have coordinate-subspace components; other
//! multivariate potentials use tropical leading solutions on the torus.

mod hensel;
mod locus;
mod newton;
pub mod poly;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

pub use hensel::{hensel_lift, HenselResult};
pub use locus::{critical_locus, CritConfig, CriticalLocus, PotentialShape, UnliftedPoint};
pub use newton::{newton_leading, LeadingRoot, NewtonLeading, SymbolicRoot};

use crate::multiseries::SeriesError;
use crate::novikov::{ExtRational, Novikov};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CritError {
    #[error("the Newton polygon is a single vertex; no roots")]
    NoRoots,
    #[error("unsupported potential: {0}")]
    UnsupportedPotential(String),
    #[error("singular Jacobian: {0}")]
    SingularJacobian(String),
    #[error("Newton iteration did not converge in {iterations} steps")]
    NoConvergence { iterations: usize },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub coordinates: BTreeMap<String, Novikov>,
    pub value: Novikov,
    /// Cutoff of the coordinates; `inf` when the point is exact.
    pub lifted_to: ExtRational,
    /// Smallest valuation of a gradient component, re-evaluated at the point.
    pub residual: ExtRational,
    pub iterations: usize,
}

/// `{pinned = 0}` with the remaining chart variables free.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalComponent {
    pub pinned: Vec<String>,
    pub free: Vec<String>,
    /// A point of the component inside the chart domain.
    pub sample: BTreeMap<String, Novikov>,
}

impl fmt::Display for CriticalComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pinned.is_empty() {
            write!(f, "{{all of {}}}", self.free.join(", "))
        } else {
            write!(f, "{{{}=0}}", self.pinned.join("="))
        }
    }
}
