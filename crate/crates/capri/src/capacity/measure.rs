//! Probability measures on point clouds and their potentials.

use crate::error::{Error, Result};
use crate::geometry::CompactSample;
use crate::vec3::Vec3;

/// A probability measure supported on a compact sample.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    pub support: CompactSample,
    /// Nonnegative weights summing to one.
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Uniform measure on the sample.
    pub fn uniform(support: CompactSample) -> DiscreteMeasure {
        let n = support.len();
        DiscreteMeasure { support, weights: vec![1.0 / n as f64; n] }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.support.len() {
            return Err(Error::Precondition("weight/support length mismatch".into()));
        }
        if self.weights.iter().any(|&w| w < 0.0) {
            return Err(Error::Precondition("negative weight".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Precondition(format!("weights sum to {sum}")));
        }
        Ok(())
    }
}

/// Outcome of an equilibrium-measure solve.
#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    pub measure: DiscreteMeasure,
    /// Minimized discrete Coulomb energy `I(mu)`.
    pub energy: f64,
    /// `1 / I(mu)`, or zero when the support is empty.
    pub capacity: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the sampled region held no nonpolar mass: the capacity is
    /// reported as exactly zero.
    pub zero_support: bool,
    /// Per-iteration diagnostics, recorded on request.
    pub trace: Option<Vec<IterRecord>>,
}

/// One solver iteration, for feasibility and monotonicity checks.
#[derive(Debug, Clone, Copy)]
pub struct IterRecord {
    pub energy: f64,
    pub weight_sum: f64,
    pub min_weight: f64,
}

impl EquilibriumResult {
    /// Marker result for a region with no nonpolar mass.
    pub fn zero(source: &str) -> EquilibriumResult {
        EquilibriumResult {
            measure: DiscreteMeasure {
                support: CompactSample {
                    points: Vec::new(),
                    patch_radius: Vec::new(),
                    source: source.to_string(),
                },
                weights: Vec::new(),
            },
            energy: f64::INFINITY,
            capacity: 0.0,
            iterations: 0,
            converged: true,
            zero_support: true,
            trace: None,
        }
    }
}

/// A potential field `x -> scale * sum_i w_i |x - x_i|^(2-n)` with the kernel
/// regularized inside each patch.
#[derive(Debug, Clone)]
pub struct PotentialField {
    pub source: DiscreteMeasure,
    pub n: u32,
    /// Multiplies the raw potential; `1` for `p_mu`, `1/I(mu)` for the
    /// normalized field.
    pub scale: f64,
}

impl PotentialField {
    pub fn eval(&self, x: Vec3) -> f64 {
        self.scale * super::potential(&self.source, x, self.n)
    }

    /// Gradient of the field (away from the support patches).
    pub fn gradient(&self, x: Vec3) -> Vec3 {
        super::potential_gradient(&self.source, x, self.n) * self.scale
    }
}
