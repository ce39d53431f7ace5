//! Energy minimization over the probability simplex.
//!
//! The primary route is projected gradient descent with Armijo backtracking;
//! a Frank-Wolfe iteration is available behind a flag for cross-checking.

use super::measure::{DiscreteMeasure, EquilibriumResult, IterRecord};
use crate::geometry::CompactSample;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Optimizer {
    #[default]
    ProjectedGradient,
    FrankWolfe,
}

impl std::str::FromStr for Optimizer {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pg" => Ok(Optimizer::ProjectedGradient),
            "fw" => Ok(Optimizer::FrankWolfe),
            other => Err(format!("unknown optimizer '{other}' (expected pg or fw)")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Relative energy-decrease tolerance; the solve stops after five
    /// consecutive iterations below it.
    pub tol: f64,
    pub max_iter: usize,
    pub optimizer: Optimizer,
    /// Record per-iteration feasibility diagnostics.
    pub trace: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-8,
            max_iter: 100_000,
            optimizer: Optimizer::ProjectedGradient,
            trace: false,
        }
    }
}

/// Dense symmetric kernel matrix with the self-energy diagonal.
pub(super) struct KernelMatrix {
    pub n: usize,
    pub data: Vec<f64>,
    /// Matrix one-norm (maximum column sum).
    pub norm1: f64,
}

impl KernelMatrix {
    pub fn assemble(sample: &CompactSample, dim: u32) -> KernelMatrix {
        let n = sample.len();
        let pts = &sample.points;
        let exp = 2.0 - dim as f64;
        let data: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let pi = pts[i];
                let ai = sample.patch_radius[i];
                (0..n).map(move |j| {
                    if i == j {
                        ai.powf(exp)
                    } else {
                        pi.dist(pts[j]).powf(exp)
                    }
                })
            })
            .collect();
        let norm1 = (0..n)
            .map(|j| (0..n).map(|i| data[i * n + j].abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        KernelMatrix { n, data, norm1 }
    }

    /// y = K x. Rows are computed independently, so the result is
    /// deterministic regardless of thread scheduling.
    pub fn matvec(&self, x: &[f64], y: &mut Vec<f64>) {
        let n = self.n;
        let data = &self.data;
        *y = (0..n)
            .into_par_iter()
            .map(|i| {
                let row = &data[i * n..(i + 1) * n];
                let mut acc = 0.0;
                for (a, b) in row.iter().zip(x.iter()) {
                    acc += a * b;
                }
                acc
            })
            .collect();
    }

}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean projection onto the probability simplex by the sorted-threshold
/// method. The stable sort breaks ties toward lower point index.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite weights"));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    let mut rho = 0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            rho = i + 1;
            theta = t;
        }
    }
    if rho == 0 {
        // All mass on the largest entry (lowest index on ties).
        let mut out = vec![0.0; v.len()];
        let mut best = 0;
        for (i, &x) in v.iter().enumerate() {
            if x > v[best] {
                best = i;
            }
        }
        out[best] = 1.0;
        return out;
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Minimize `w' K w` over the simplex.
pub(super) fn minimize(
    kernel: &KernelMatrix,
    sample: &CompactSample,
    opts: &SolveOptions,
) -> EquilibriumResult {
    match opts.optimizer {
        Optimizer::ProjectedGradient => projected_gradient(kernel, sample, opts),
        Optimizer::FrankWolfe => frank_wolfe(kernel, sample, opts),
    }
}

fn projected_gradient(
    kernel: &KernelMatrix,
    sample: &CompactSample,
    opts: &SolveOptions,
) -> EquilibriumResult {
    let n = kernel.n;
    let mut w = vec![1.0 / n as f64; n];
    let mut kw = Vec::new();
    kernel.matvec(&w, &mut kw);
    let mut energy = dot(&w, &kw);
    let mut step = 1.0 / kernel.norm1;
    let step_floor = 1e-18 / kernel.norm1;
    let mut quiet_iters = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;
    let mut trace = opts.trace.then(Vec::new);

    while iterations < opts.max_iter {
        iterations += 1;
        // grad = 2 K w
        let grad: Vec<f64> = kw.iter().map(|&g| 2.0 * g).collect();
        // Armijo backtracking on the projected step.
        let mut accepted = false;
        let mut w_next = Vec::new();
        let mut kw_next = Vec::new();
        let mut e_next = energy;
        while step > step_floor {
            let trial: Vec<f64> =
                w.iter().zip(&grad).map(|(&wi, &gi)| wi - step * gi).collect();
            let projected = project_simplex(&trial);
            kernel.matvec(&projected, &mut kw_next);
            let e_trial = dot(&projected, &kw_next);
            let linear: f64 = grad
                .iter()
                .zip(projected.iter().zip(&w))
                .map(|(&g, (&p, &wi))| g * (p - wi))
                .sum();
            if e_trial <= energy + 1e-4 * linear {
                w_next = projected;
                e_next = e_trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // Step collapsed: the iterate is a stationary point to machine
            // precision.
            converged = true;
            break;
        }
        let decrease = (energy - e_next) / energy.max(f64::MIN_POSITIVE);
        w = w_next;
        kw = kw_next.clone();
        energy = e_next;
        if let Some(t) = trace.as_mut() {
            t.push(IterRecord {
                energy,
                weight_sum: w.iter().sum(),
                min_weight: w.iter().cloned().fold(f64::INFINITY, f64::min),
            });
        }
        if decrease < opts.tol {
            quiet_iters += 1;
            if quiet_iters >= 5 {
                converged = true;
                break;
            }
        } else {
            quiet_iters = 0;
        }
        step = (step * 2.0).min(1e6 / kernel.norm1);
    }

    let measure = DiscreteMeasure { support: sample.clone(), weights: w };
    EquilibriumResult {
        energy,
        capacity: if energy > 0.0 { 1.0 / energy } else { 0.0 },
        iterations,
        converged,
        zero_support: false,
        trace,
        measure,
    }
}

fn frank_wolfe(
    kernel: &KernelMatrix,
    sample: &CompactSample,
    opts: &SolveOptions,
) -> EquilibriumResult {
    let n = kernel.n;
    let mut w = vec![1.0 / n as f64; n];
    let mut kw = Vec::new();
    kernel.matvec(&w, &mut kw);
    let mut energy = dot(&w, &kw);
    let mut quiet_iters = 0usize;
    let mut iterations = 0usize;
    let mut converged = false;
    let mut trace = opts.trace.then(Vec::new);

    while iterations < opts.max_iter {
        iterations += 1;
        // Linear minimization oracle over the simplex: a vertex.
        let mut j = 0;
        for (i, &g) in kw.iter().enumerate() {
            if g < kw[j] {
                j = i;
            }
        }
        // Exact line search for the quadratic along w + gamma (e_j - w):
        // gamma* = -(d' K w) / (d' K d) with d = e_j - w.
        let dkw = kw[j] - energy;
        let mut d: Vec<f64> = w.iter().map(|&wi| -wi).collect();
        d[j] += 1.0;
        let mut kd = Vec::new();
        kernel.matvec(&d, &mut kd);
        let dkd = dot(&d, &kd);
        let gamma = if dkd > 0.0 { (-dkw / dkd).clamp(0.0, 1.0) } else { 0.0 };
        if gamma == 0.0 {
            converged = true;
            break;
        }
        for (wi, di) in w.iter_mut().zip(&d) {
            *wi += gamma * di;
        }
        for (ki, di) in kw.iter_mut().zip(&kd) {
            *ki += gamma * di;
        }
        let e_next = dot(&w, &kw);
        let decrease = (energy - e_next) / energy.max(f64::MIN_POSITIVE);
        energy = e_next;
        if let Some(t) = trace.as_mut() {
            t.push(IterRecord {
                energy,
                weight_sum: w.iter().sum(),
                min_weight: w.iter().cloned().fold(f64::INFINITY, f64::min),
            });
        }
        if decrease.abs() < opts.tol {
            quiet_iters += 1;
            if quiet_iters >= 5 {
                converged = true;
                break;
            }
        } else {
            quiet_iters = 0;
        }
    }

    let measure = DiscreteMeasure { support: sample.clone(), weights: w };
    EquilibriumResult {
        energy,
        capacity: if energy > 0.0 { 1.0 / energy } else { 0.0 },
        iterations,
        converged,
        zero_support: false,
        trace,
        measure,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_hits_simplex() {
        let cases: Vec<Vec<f64>> = vec![
            vec![0.3, 0.3, 0.4],
            vec![1.0, 1.0],
            vec![-5.0, 0.2, 0.4],
            vec![10.0, -3.0, 0.0, 2.0],
            vec![0.0; 6],
        ];
        for v in cases {
            let p = project_simplex(&v);
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "{v:?} -> {p:?}");
            assert!(p.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn projection_is_identity_on_simplex_points() {
        let v = vec![0.2, 0.5, 0.3];
        let p = project_simplex(&v);
        for (a, b) in v.iter().zip(&p) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_ties_break_toward_lower_index() {
        let p = project_simplex(&[f64::MAX, f64::MAX, 0.0]);
        // Degenerate fallback: all mass on the first of the tied entries.
        assert_eq!(p[0], 1.0);
    }
}
