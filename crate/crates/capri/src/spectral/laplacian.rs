//! Seven-point Dirichlet Laplacian on interior grid nodes, a conjugate
//! gradient solver, and shifted inverse power iteration for the smallest
//! eigenpair.

use crate::error::{Error, Result};
use crate::geometry::Grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// The negative Laplacian `(6 v_i - sum of neighbors) / h^2` with Dirichlet
/// conditions imposed by node removal; symmetric positive definite.
pub struct DirichletLaplacian {
    pub n: usize,
    pub h: f64,
    /// Compact index of each lattice neighbor, `-1` where the neighbor is a
    /// removed (boundary) node.
    neighbors: Vec<[i32; 6]>,
    /// Lattice linear index of each interior node, for mapping back to grid
    /// functions.
    pub grid_indices: Vec<usize>,
}

impl DirichletLaplacian {
    pub fn assemble(grid: &Grid) -> DirichletLaplacian {
        let dims = grid.dims;
        let mut compact = vec![-1i32; grid.total_nodes()];
        let mut grid_indices = Vec::new();
        for idx in grid.interior_indices() {
            compact[idx] = grid_indices.len() as i32;
            grid_indices.push(idx);
        }
        let n = grid_indices.len();
        let stride = [dims[1] * dims[2], dims[2], 1usize];
        let neighbors: Vec<[i32; 6]> = grid_indices
            .par_iter()
            .map(|&idx| {
                let (i, j, k) = grid.unravel(idx);
                let coord = [i, j, k];
                let mut nbr = [-1i32; 6];
                for axis in 0..3 {
                    if coord[axis] > 0 {
                        nbr[2 * axis] = compact[idx - stride[axis]];
                    }
                    if coord[axis] + 1 < dims[axis] {
                        nbr[2 * axis + 1] = compact[idx + stride[axis]];
                    }
                }
                nbr
            })
            .collect();
        DirichletLaplacian { n, h: grid.h, neighbors, grid_indices }
    }

    /// y = (A - shift) x.
    pub fn apply(&self, x: &[f64], shift: f64, y: &mut Vec<f64>) {
        let inv_h2 = 1.0 / (self.h * self.h);
        *y = self
            .neighbors
            .par_iter()
            .enumerate()
            .map(|(i, nbr)| {
                let mut acc = 6.0 * x[i];
                for &j in nbr {
                    if j >= 0 {
                        acc -= x[j as usize];
                    }
                }
                acc * inv_h2 - shift * x[i]
            })
            .collect();
    }

    pub fn rayleigh_quotient(&self, v: &[f64]) -> f64 {
        let mut av = Vec::new();
        self.apply(v, 0.0, &mut av);
        dot(v, &av) / dot(v, v)
    }

    /// Gershgorin upper bound on the spectrum.
    pub fn lambda_max_bound(&self) -> f64 {
        12.0 / (self.h * self.h)
    }

    /// The assembled matrix is symmetric: every neighbor link is mutual.
    pub fn is_symmetric(&self) -> bool {
        for (i, nbr) in self.neighbors.iter().enumerate() {
            for (slot, &j) in nbr.iter().enumerate() {
                if j >= 0 {
                    // The reverse slot flips the direction bit.
                    let back = self.neighbors[j as usize][slot ^ 1];
                    if back != i as i32 {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Dense copy of the operator, for small-grid cross-checks.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let inv_h2 = 1.0 / (self.h * self.h);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 6.0 * inv_h2;
            for &j in &self.neighbors[i] {
                if j >= 0 {
                    a[i * n + j as usize] = -inv_h2;
                }
            }
        }
        a
    }

    /// Connected components of the interior adjacency graph.
    pub fn components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.n];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if comp[start] != usize::MAX {
                continue;
            }
            stack.push(start);
            comp[start] = next;
            while let Some(i) = stack.pop() {
                for &j in &self.neighbors[i] {
                    if j >= 0 && comp[j as usize] == usize::MAX {
                        comp[j as usize] = next;
                        stack.push(j as usize);
                    }
                }
            }
            next += 1;
        }
        comp
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Conjugate gradients for `(A - shift) z = b`. Returns the achieved relative
/// residual; bails out early if the shifted operator loses positive
/// definiteness.
fn conjugate_gradient(
    op: &DirichletLaplacian,
    b: &[f64],
    shift: f64,
    z: &mut Vec<f64>,
    rel_tol: f64,
    max_iter: usize,
) -> std::result::Result<f64, ()> {
    let nb = norm(b);
    if nb == 0.0 {
        z.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0.0);
    }
    let mut az = Vec::new();
    op.apply(z, shift, &mut az);
    let mut r: Vec<f64> = b.iter().zip(&az).map(|(x, y)| x - y).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut ap = Vec::new();
    for _ in 0..max_iter {
        if rr.sqrt() <= rel_tol * nb {
            break;
        }
        op.apply(&p, shift, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            // Shift at or above the smallest eigenvalue.
            return Err(());
        }
        let alpha = rr / pap;
        for i in 0..z.len() {
            z[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..p.len() {
            p[i] = r[i] + beta * p[i];
        }
    }
    Ok(rr.sqrt() / nb)
}

/// Smallest eigenpair by inverse power iteration with conjugate-gradient
/// solves. A fixed shift at 80% of the Rayleigh quotient is engaged once the
/// quotient plateaus, which brings the per-step contraction from roughly
/// `lambda1/lambda2` down to a small fraction.
pub fn smallest_eigenpair(
    op: &DirichletLaplacian,
    seed: u64,
    rel_residual_tol: f64,
) -> Result<(f64, Vec<f64>)> {
    if op.n == 0 {
        return Err(Error::GridTooCoarse);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..op.n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut lambda = op.rayleigh_quotient(&v);
    let mut prev_lambda = f64::INFINITY;
    let mut shift = 0.0;
    let mut shift_scale = 0.8;
    let mut rel_res = 1.0f64;
    let mut z = v.clone();
    let max_outer = 10_000;
    let cg_cap = 50_000;

    for _outer in 0..max_outer {
        // Engage the shift once the quotient has settled.
        if shift == 0.0 && (prev_lambda - lambda).abs() < 0.05 * lambda {
            shift = shift_scale * lambda;
        }
        prev_lambda = lambda;

        // Warm start: the previous eigenvector estimate, rescaled by the
        // expected amplification.
        for (zi, vi) in z.iter_mut().zip(&v) {
            *zi = vi / (lambda - shift);
        }
        let cg_tol = (0.05 * rel_res).clamp(1e-13, 1e-2);
        match conjugate_gradient(op, &v, shift, &mut z, cg_tol, cg_cap) {
            Ok(_) => {}
            Err(()) => {
                // Shift was too aggressive; back off and retry unshifted.
                shift_scale *= 0.5;
                shift = if shift_scale < 0.05 { 0.0 } else { shift_scale * lambda };
                continue;
            }
        }
        let nz = norm(&z);
        if !nz.is_finite() || nz == 0.0 {
            return Err(Error::Numerical("inverse iteration produced a zero vector".into()));
        }
        v = z.iter().map(|x| x / nz).collect();

        let mut av = Vec::new();
        op.apply(&v, 0.0, &mut av);
        lambda = dot(&v, &av);
        let res: f64 = av
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - lambda * b) * (a - lambda * b))
            .sum::<f64>()
            .sqrt();
        rel_res = res / lambda;
        if rel_res <= rel_residual_tol {
            // Fix the overall sign: the ground state is taken nonnegative.
            if v.iter().sum::<f64>() < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            return Ok((lambda, v));
        }
    }
    Err(Error::Numerical(format!(
        "inverse iteration stalled at relative residual {rel_res:.3e}"
    )))
}
