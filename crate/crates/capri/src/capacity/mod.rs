//! Newtonian capacity: the Riesz kernel, discrete Coulomb energy, equilibrium
//! measures over the probability simplex, potentials, and capacity law checks.
//!
//! The continuum energy of a probability measure has no diagonal; the
//! discrete quadrature needs a self-energy. Each point carries a patch radius
//! `a_i` and contributes the self-energy `a_i^(2-n)` of the uniform measure on
//! a radius-`a_i` sphere, so a single isolated patch reproduces the capacity
//! of its own little sphere exactly.

mod measure;
mod solver;

pub use measure::{DiscreteMeasure, EquilibriumResult, IterRecord, PotentialField};
pub use solver::{project_simplex, Optimizer, SolveOptions};

use crate::error::{Error, Result};
use crate::geometry::{sample_compact, CompactSample, SceneNode};
use crate::vec3::{Aabb, Vec3};
use solver::KernelMatrix;

/// Newtonian kernel `|x - y|^(2 - n)` for `n >= 3`.
pub fn kernel(x: Vec3, y: Vec3, n: u32) -> Result<f64> {
    let d = x.dist(y);
    if d == 0.0 {
        return Err(Error::SingularKernel);
    }
    Ok(d.powf(2.0 - n as f64))
}

/// Kernel with the singularity replaced by the uniform-sphere value inside a
/// patch of radius `a`: `max(|x - y|, a)^(2 - n)`.
pub fn regularized_kernel(x: Vec3, y: Vec3, a: f64, n: u32) -> f64 {
    x.dist(y).max(a).powf(2.0 - n as f64)
}

/// Discrete Coulomb energy of a measure: pairwise kernel terms plus the
/// per-patch self-energies.
pub fn energy(m: &DiscreteMeasure, n: u32) -> Result<f64> {
    if m.is_empty() {
        return Err(Error::EmptyCompactSet);
    }
    if m.support.patch_radius.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::InvalidPatchRadius);
    }
    let exp = 2.0 - n as f64;
    let pts = &m.support.points;
    let w = &m.weights;
    use rayon::prelude::*;
    let total: f64 = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = w[i] * w[i] * m.support.patch_radius[i].powf(exp);
            for j in 0..pts.len() {
                if j != i {
                    acc += w[i] * w[j] * pts[i].dist(pts[j]).powf(exp);
                }
            }
            acc
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum();
    Ok(total)
}

/// Minimize the discrete energy over the probability simplex.
///
/// Stops once the relative energy decrease stays below `opts.tol` for five
/// consecutive iterations; `converged` is false if the iteration cap is hit
/// first.
pub fn equilibrium(
    sample: &CompactSample,
    n: u32,
    opts: &SolveOptions,
) -> Result<EquilibriumResult> {
    if sample.is_empty() {
        return Ok(EquilibriumResult::zero(&sample.source));
    }
    if sample.patch_radius.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::InvalidPatchRadius);
    }
    let kernel = KernelMatrix::assemble(sample, n);
    Ok(solver::minimize(&kernel, sample, opts))
}

/// Equilibrium solve with default options.
pub fn equilibrium_default(sample: &CompactSample, n: u32) -> Result<EquilibriumResult> {
    equilibrium(sample, n, &SolveOptions::default())
}

/// Newtonian potential of a measure at `x`, regularized inside patches.
pub fn potential(m: &DiscreteMeasure, x: Vec3, n: u32) -> f64 {
    let mut acc = 0.0;
    for (i, p) in m.support.points.iter().enumerate() {
        acc += m.weights[i] * regularized_kernel(x, *p, m.support.patch_radius[i], n);
    }
    acc
}

/// Gradient of the potential at `x`; valid away from the support patches
/// (inside a patch the regularized kernel is constant, gradient zero).
pub fn potential_gradient(m: &DiscreteMeasure, x: Vec3, n: u32) -> Vec3 {
    let mut acc = crate::vec3::ZERO;
    let exp = 2.0 - n as f64;
    for (i, p) in m.support.points.iter().enumerate() {
        let dv = x - *p;
        let d = dv.norm();
        if d > m.support.patch_radius[i] {
            // grad |x-y|^(2-n) = (2-n) |x-y|^(-n) (x-y)
            acc += dv * (m.weights[i] * exp * d.powf(exp - 2.0));
        }
    }
    acc
}

/// The normalized potential `g = p_mu / I(mu)` of the equilibrium measure:
/// close to one on the sampled set, positive and harmonic off it, and
/// vanishing at infinity.
pub fn normalized_potential(
    sample: &CompactSample,
    n: u32,
    opts: &SolveOptions,
) -> Result<PotentialField> {
    let eq = equilibrium(sample, n, opts)?;
    if !eq.converged {
        return Err(Error::Numerical("equilibrium solve did not converge".into()));
    }
    let scale = 1.0 / eq.energy;
    Ok(PotentialField { source: eq.measure, n, scale })
}

/// Outcome of the subadditivity comparison on a list of parts.
#[derive(Debug, Clone)]
pub struct SubadditivityReport {
    pub cap_union: f64,
    pub cap_parts: Vec<f64>,
    pub sum_parts: f64,
    /// `cap(union) <= sum + 2 percent slack`.
    pub pass: bool,
}

/// Compare the capacity of a union of samples against the sum of part
/// capacities (subadditivity, with quadrature slack).
pub fn capacity_subadditivity_check(
    parts: &[&CompactSample],
    n: u32,
    opts: &SolveOptions,
) -> Result<SubadditivityReport> {
    if parts.len() < 2 {
        return Err(Error::Precondition("need at least two parts".into()));
    }
    let mut cap_parts = Vec::with_capacity(parts.len());
    for part in parts {
        cap_parts.push(equilibrium(part, n, opts)?.capacity);
    }
    let union = CompactSample::merged(parts)?;
    let cap_union = equilibrium(&union, n, opts)?.capacity;
    let sum_parts: f64 = cap_parts.iter().sum();
    Ok(SubadditivityReport {
        cap_union,
        sum_parts,
        pass: cap_union <= sum_parts * 1.02,
        cap_parts,
    })
}

/// Capacity of a region with a refinement trend: solves at the stated budget
/// and at four times the budget. A region whose capacity collapses by more
/// than a factor of four under refinement is flagged as a polar candidate;
/// an empty region is polar outright.
#[derive(Debug, Clone)]
pub struct CapacityTrend {
    pub cap_coarse: f64,
    pub cap_fine: f64,
    pub polar_candidate: bool,
}

pub fn capacity_with_refinement(
    region: &SceneNode,
    clamp: &Aabb,
    n: u32,
    budget: usize,
    seed: u64,
    opts: &SolveOptions,
) -> Result<CapacityTrend> {
    let coarse = match sample_compact(region, clamp, budget, seed) {
        Ok(s) => equilibrium(&s, n, opts)?.capacity,
        Err(Error::EmptyCompactSet) => {
            return Ok(CapacityTrend { cap_coarse: 0.0, cap_fine: 0.0, polar_candidate: true })
        }
        Err(e) => return Err(e),
    };
    let fine = match sample_compact(region, clamp, 4 * budget, seed) {
        Ok(s) => equilibrium(&s, n, opts)?.capacity,
        Err(Error::EmptyCompactSet) => 0.0,
        Err(e) => return Err(e),
    };
    let polar = fine == 0.0 || coarse > 4.0 * fine;
    Ok(CapacityTrend { cap_coarse: coarse, cap_fine: fine, polar_candidate: polar })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec3::ZERO;

    #[test]
    fn kernel_values() {
        let o = ZERO;
        assert!((kernel(o, Vec3::new(2.0, 0.0, 0.0), 3).unwrap() - 0.5).abs() < 1e-15);
        assert!((kernel(o, Vec3::new(0.0, 1.0, 0.0), 3).unwrap() - 1.0).abs() < 1e-15);
        assert!((kernel(o, Vec3::new(0.0, 0.0, 2.0), 4).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(kernel(o, o, 3), Err(Error::SingularKernel)));
    }

    #[test]
    fn kernel_symmetric_and_decreasing() {
        let a = Vec3::new(0.3, -0.2, 0.9);
        let b = Vec3::new(-1.0, 0.4, 0.0);
        assert_eq!(kernel(a, b, 3).unwrap(), kernel(b, a, 3).unwrap());
        let mut prev = f64::INFINITY;
        for k in 1..10 {
            let v = kernel(ZERO, Vec3::new(0.3 * k as f64, 0.0, 0.0), 3).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn energy_of_two_point_measure() {
        // Two points at distance 2, equal weights, patch radii 0.1:
        // I = 2 (1/4 * 10) + 2 (1/4 * 1/2) = 5.25.
        let support = CompactSample {
            points: vec![ZERO, Vec3::new(2.0, 0.0, 0.0)],
            patch_radius: vec![0.1, 0.1],
            source: "pair".into(),
        };
        let m = DiscreteMeasure { support, weights: vec![0.5, 0.5] };
        assert!((energy(&m, 3).unwrap() - 5.25).abs() < 1e-12);
    }

    #[test]
    fn energy_of_single_patch_is_inverse_radius() {
        let support = CompactSample {
            points: vec![ZERO],
            patch_radius: vec![0.25],
            source: "dot".into(),
        };
        let m = DiscreteMeasure { support, weights: vec![1.0] };
        assert!((energy(&m, 3).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_patch_radius_rejected() {
        let support = CompactSample {
            points: vec![ZERO, Vec3::new(1.0, 0.0, 0.0)],
            patch_radius: vec![0.1, 0.0],
            source: "bad".into(),
        };
        let m = DiscreteMeasure { support, weights: vec![0.5, 0.5] };
        assert!(matches!(energy(&m, 3), Err(Error::InvalidPatchRadius)));
    }

    #[test]
    fn uniform_sphere_energy_approaches_one() {
        // The equilibrium potential of the uniform unit-sphere measure is
        // identically 1 on the sphere, so its energy is 1.
        let m = DiscreteMeasure::uniform(CompactSample::sphere_surface(ZERO, 1.0, 2000));
        let e = energy(&m, 3).unwrap();
        assert!((e - 1.0).abs() < 0.02, "I = {e}");
        let coarse = DiscreteMeasure::uniform(CompactSample::sphere_surface(ZERO, 1.0, 500));
        let e_coarse = energy(&coarse, 3).unwrap();
        assert!((e - 1.0).abs() < (e_coarse - 1.0).abs() + 5e-3, "no refinement trend");
    }

    #[test]
    fn equilibrium_energy_beats_uniform() {
        let sample = CompactSample::sphere_surface(ZERO, 1.0, 300);
        let uniform_energy = energy(&DiscreteMeasure::uniform(sample.clone()), 3).unwrap();
        let eq = equilibrium_default(&sample, 3).unwrap();
        assert!(eq.converged);
        assert!(eq.energy <= uniform_energy + 1e-12);
        eq.measure.validate().unwrap();
        assert!((eq.capacity - 1.0 / eq.energy).abs() < 1e-15);
    }

    #[test]
    fn solver_trace_feasible_and_monotone() {
        let sample = CompactSample::sphere_surface(ZERO, 1.0, 200);
        let opts = SolveOptions { trace: true, ..Default::default() };
        let eq = equilibrium(&sample, 3, &opts).unwrap();
        let trace = eq.trace.as_ref().unwrap();
        assert!(!trace.is_empty());
        let mut prev = f64::INFINITY;
        for rec in trace {
            assert!(rec.energy <= prev + 1e-15, "energy increased");
            assert!((rec.weight_sum - 1.0).abs() < 1e-12);
            assert!(rec.min_weight >= 0.0);
            prev = rec.energy;
        }
    }

    #[test]
    fn frank_wolfe_agrees_with_projected_gradient() {
        let sample = CompactSample::sphere_surface(ZERO, 1.0, 150);
        let pg = equilibrium_default(&sample, 3).unwrap();
        let fw = equilibrium(
            &sample,
            3,
            &SolveOptions {
                optimizer: Optimizer::FrankWolfe,
                tol: 1e-10,
                max_iter: 200_000,
                trace: false,
            },
        )
        .unwrap();
        assert!(
            (pg.energy - fw.energy).abs() / pg.energy < 5e-3,
            "pg {} vs fw {}",
            pg.energy,
            fw.energy
        );
    }

    #[test]
    fn empty_sample_reports_zero_capacity() {
        let empty = CompactSample {
            points: Vec::new(),
            patch_radius: Vec::new(),
            source: "empty".into(),
        };
        let eq = equilibrium_default(&empty, 3).unwrap();
        assert!(eq.zero_support);
        assert_eq!(eq.capacity, 0.0);
    }

    #[test]
    fn potential_of_sphere_measure() {
        let sample = CompactSample::sphere_surface(ZERO, 1.0, 1000);
        let eq = equilibrium_default(&sample, 3).unwrap();
        // Outside: p = 1/|x|; inside: constant 1 (unit sphere, n = 3).
        let outside = potential(&eq.measure, Vec3::new(2.0, 0.0, 0.0), 3);
        assert!((outside - 0.5).abs() < 0.01, "p(2e1) = {outside}");
        let inside = potential(&eq.measure, Vec3::new(0.25, 0.3, -0.1), 3);
        assert!((inside - 1.0).abs() < 0.02, "p(inside) = {inside}");
    }

    #[test]
    fn duplicated_part_union_capacity_unchanged() {
        let part = CompactSample::sphere_surface(ZERO, 1.0, 200);
        let report = capacity_subadditivity_check(&[&part, &part], 3, &Default::default())
            .unwrap();
        assert!(report.pass);
        assert!(
            (report.cap_union - report.cap_parts[0]).abs() < 1e-12,
            "duplicate union changed capacity"
        );
    }
}
