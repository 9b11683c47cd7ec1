//! Reduced-basis machinery: spaces with supremizer enrichment, operator
//! projection, the online Newton solver, residual dual norms, and the greedy
//! loop.

pub mod greedy;
pub mod online;
pub mod project;
pub mod riesz;
pub mod space;

use serde::{Deserialize, Serialize};

use crate::certification::{CertificationConstants, RbfSurrogate};
use crate::eim::{EimApproximation, MagicPointSampler};
use crate::params::{ParameterBox, ParameterPoint};

pub use online::ReducedSolution;
pub use project::ReducedOperatorSet;
pub use space::ReducedBasisSpace;

/// Everything the online stage needs; the offline artifact serializes this.
#[derive(Clone, Serialize, Deserialize)]
pub struct ReducedModel {
    pub parameter_box: ParameterBox,
    pub n_h: usize,
    pub pr: f64,
    pub c_s: f64,
    pub eps_eim: f64,
    pub eps_rb: f64,
    pub space: ReducedBasisSpace,
    pub ops: ReducedOperatorSet,
    pub eim: EimApproximation,
    pub sampler: MagicPointSampler,
    pub riesz: riesz::RieszLibrary,
    pub constants: CertificationConstants,
    pub beta_surrogate: RbfSurrogate,
    /// reduced coefficients of each greedy snapshot in the final basis,
    /// used as Newton initial guesses and for reproduction checks
    pub snapshot_coeffs: Vec<SnapshotCoeffs>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotCoeffs {
    pub parameter: ParameterPoint,
    pub velocity: Vec<f64>,
    pub temperature: Vec<f64>,
    pub pressure: Vec<f64>,
}

impl ReducedModel {
    pub fn n(&self) -> usize {
        self.space.pressure.len()
    }

    /// Nearest stored snapshot in the scaled parameter metric.
    pub fn nearest_snapshot(&self, mu: &ParameterPoint) -> Option<&SnapshotCoeffs> {
        let target = self.parameter_box.scale(mu);
        self.snapshot_coeffs.iter().min_by(|a, b| {
            let da = dist2(self.parameter_box.scale(&a.parameter), target);
            let db = dist2(self.parameter_box.scale(&b.parameter), target);
            da.partial_cmp(&db).unwrap()
        })
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}
