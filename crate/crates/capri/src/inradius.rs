//! Three inradius notions for an open set `D`:
//!
//! * the classical inradius (largest inscribed ball), from a grid distance
//!   transform;
//! * the capacity inradius: the largest `R` such that some ball of radius `R`
//!   meets the complement in a capacity-zero set, operationalized with a
//!   polar-candidate refinement test;
//! * the strict capacity inradius: the largest `R` such that balls of radius
//!   `R` meet the complement in arbitrarily small capacity. Its universal
//!   quantifier over tolerances is operationalized as the monotone curve
//!   `R*(eps)` over a decreasing tolerance ladder; for bounded sets the curve
//!   settles onto the capacity inradius.
//!
//! The sharp eigenvalue upper bound `lambda1(D) <= lambda1(B) / rho^2` is
//! checked with the smallest-tolerance rung standing in for `rho`.
//!
//! Center search is a coarse lattice sweep plus coordinate descent and is a
//! heuristic lower bound for the true supremum over centers; witnesses are
//! reported so results can be audited.

use crate::capacity::{equilibrium, SolveOptions};
use crate::error::{Error, Result};
use crate::geometry::{build_grid, sample_compact, Grid, Scene, SceneNode};
use crate::spectral;
use crate::vec3::{Aabb, Vec3};

/// Tuning knobs for the inradius search.
#[derive(Debug, Clone)]
pub struct InradiusOptions {
    /// Sampling budget for the final capacity evaluation at a witness.
    pub budget: usize,
    /// Cheaper budget used while scanning candidate centers.
    pub scan_budget: usize,
    pub seed: u64,
    /// Bisection resolution as a fraction of the search radius bound.
    pub resolution_frac: f64,
    /// Spacing for the classical distance transform, as a fraction of the
    /// smallest box extent.
    pub grid_frac: f64,
}

impl Default for InradiusOptions {
    fn default() -> Self {
        InradiusOptions {
            budget: 300,
            scan_budget: 120,
            seed: 0xcab1e,
            resolution_frac: 1.0 / 512.0,
            grid_frac: 1.0 / 48.0,
        }
    }
}

/// The three estimators on one scene.
#[derive(Debug, Clone)]
pub struct InradiusReport {
    /// Largest inscribed-ball radius from the distance transform, +- h.
    pub classical: f64,
    /// Capacity inradius estimate and the polar threshold used.
    pub frak_r: f64,
    pub frak_r_eps: f64,
    /// The monotone curve (eps, R*(eps)), decreasing eps.
    pub rho: Vec<(f64, f64)>,
    /// Witness center and its intersection capacity per rung.
    pub witnesses: Vec<RhoWitness>,
    /// Set when the complement is empty inside the box and the search hit its
    /// radius bound.
    pub unbounded_candidate: bool,
}

#[derive(Debug, Clone)]
pub struct RhoWitness {
    pub eps: f64,
    pub radius: f64,
    pub center: Vec3,
    pub cap: f64,
}

/// Classical inradius: maximum over interior nodes of the distance to the
/// complement, via an exact Euclidean distance transform. Punctured nodes
/// count as interior (a point is polar). Returns the maximizing node too.
pub fn classical_inradius(grid: &Grid) -> (f64, Vec3) {
    let dims = grid.dims;
    let total = grid.total_nodes();
    if total == 0 {
        return (0.0, crate::vec3::ZERO);
    }
    // Interior-for-distance mask: interior or punctured.
    let mut mask = grid.interior.clone();
    for &idx in &grid.punctured_nodes {
        mask[idx] = true;
    }
    if !mask.iter().any(|&b| b) {
        return (0.0, crate::vec3::ZERO);
    }
    // Squared distance in node units; complement nodes are seeds.
    let inf = 1e30;
    let mut d2: Vec<f64> = mask.iter().map(|&b| if b { inf } else { 0.0 }).collect();
    if !d2.iter().any(|&x| x == 0.0) {
        // No complement inside the box: the bound is the distance to the box
        // itself.
        let mut best = (0.0, crate::vec3::ZERO);
        for idx in grid.interior_indices() {
            let p = grid.node_point_linear(idx);
            let dx = (p.x - grid.origin.x).min(grid.origin.x + (dims[0] - 1) as f64 * grid.h - p.x);
            let dy = (p.y - grid.origin.y).min(grid.origin.y + (dims[1] - 1) as f64 * grid.h - p.y);
            let dz = (p.z - grid.origin.z).min(grid.origin.z + (dims[2] - 1) as f64 * grid.h - p.z);
            let d = dx.min(dy).min(dz) + grid.h;
            if d > best.0 {
                best = (d, p);
            }
        }
        return best;
    }

    // Three-pass separable transform: exact squared Euclidean distances.
    let stride = [dims[1] * dims[2], dims[2], 1usize];
    for axis in 0..3 {
        let len = dims[axis];
        if len < 2 {
            continue;
        }
        let plane_axes: [usize; 2] = match axis {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        };
        let mut scratch_f = vec![0.0; len];
        let mut scratch_d = vec![0.0; len];
        for a in 0..dims[plane_axes[0]] {
            for b in 0..dims[plane_axes[1]] {
                let base = a * stride[plane_axes[0]] + b * stride[plane_axes[1]];
                for t in 0..len {
                    scratch_f[t] = d2[base + t * stride[axis]];
                }
                dt_1d(&scratch_f, &mut scratch_d);
                for t in 0..len {
                    d2[base + t * stride[axis]] = scratch_d[t];
                }
            }
        }
    }

    let mut best = (0.0f64, crate::vec3::ZERO);
    for (idx, &inside) in mask.iter().enumerate() {
        if inside {
            let d = d2[idx].sqrt() * grid.h;
            if d > best.0 {
                best = (d, grid.node_point_linear(idx));
            }
        }
    }
    best
}

/// One-dimensional squared distance transform (lower envelope of parabolas).
fn dt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64))
                / (2.0 * (q - p) as f64);
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // q's parabola dominates everything so far.
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
            }
            break;
        }
    }
    let mut k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        out[q] = d * d + f[p];
    }
}

/// Capacity of `B(x, R) ∩ D^c` from the sampled intersection; empty
/// intersections report zero.
fn intersection_capacity(
    scene: &Scene,
    x: Vec3,
    radius: f64,
    budget: usize,
    seed: u64,
) -> Result<f64> {
    let ball = SceneNode::ball(x, radius);
    let clamp = ball.bbox();
    let region =
        SceneNode::intersection(vec![ball, SceneNode::complement(scene.root.clone())]);
    match sample_compact(&region, &clamp, budget, seed) {
        Ok(s) => Ok(equilibrium(&s, scene.dimension, &SolveOptions::default())?.capacity),
        Err(Error::EmptyCompactSet) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Cheap surrogate for ranking candidate centers: the fraction of probe
/// points of `B(x, R)` that land in the complement.
fn complement_fraction(scene: &Scene, x: Vec3, radius: f64, dirs: &[Vec3]) -> f64 {
    let mut hits = 0usize;
    let mut count = 0usize;
    for d in dirs {
        for frac in [0.35, 0.7, 0.95] {
            let p = x + *d * (radius * frac);
            count += 1;
            if !scene.root.contains(p) {
                hits += 1;
            }
        }
    }
    hits as f64 / count as f64
}

fn probe_directions(n: usize) -> Vec<Vec3> {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    (0..n)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = 2.0 * std::f64::consts::PI * (k as f64 / golden).fract();
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

struct CenterSearch<'a> {
    scene: &'a Scene,
    opts: &'a InradiusOptions,
    dirs: Vec<Vec3>,
    /// Peaks of the distance transform, always worth trying.
    hints: Vec<Vec3>,
    /// Best witness seen so far, reused across bisection steps.
    warm: Option<Vec3>,
    /// Capacity cache keyed by (center, radius, budget) bits; the search
    /// revisits the same probes across bisection steps.
    cache: std::collections::HashMap<(u64, u64, u64, u64, usize), f64>,
}

impl<'a> CenterSearch<'a> {
    fn new(scene: &'a Scene, opts: &'a InradiusOptions, hints: Vec<Vec3>) -> Self {
        CenterSearch {
            scene,
            opts,
            dirs: probe_directions(16),
            hints,
            warm: None,
            cache: std::collections::HashMap::new(),
        }
    }

    fn cap_at(&mut self, c: Vec3, radius: f64, budget: usize) -> Result<f64> {
        let key = (c.x.to_bits(), c.y.to_bits(), c.z.to_bits(), radius.to_bits(), budget);
        if let Some(&v) = self.cache.get(&key) {
            return Ok(v);
        }
        let v = intersection_capacity(self.scene, c, radius, budget, self.opts.seed)?;
        self.cache.insert(key, v);
        Ok(v)
    }

    /// Find the center minimizing the intersection capacity at radius
    /// `radius`; returns the best (center, capacity at scan budget).
    fn best_center(&mut self, radius: f64) -> Result<(Vec3, f64)> {
        let bb = self.scene.bounding_box;
        let step = (radius / 4.0).max(bb.extent().min_component() / 12.0);
        let mut candidates: Vec<Vec3> = Vec::new();
        if let Some(w) = self.warm {
            candidates.push(w);
        }
        candidates.extend_from_slice(&self.hints);
        let mut x = bb.lo.x + step / 2.0;
        while x < bb.hi.x {
            let mut y = bb.lo.y + step / 2.0;
            while y < bb.hi.y {
                let mut z = bb.lo.z + step / 2.0;
                while z < bb.hi.z {
                    candidates.push(Vec3::new(x, y, z));
                    z += step;
                }
                y += step;
            }
            x += step;
        }

        // Rank by the geometric surrogate, then solve only the few best.
        let mut ranked: Vec<(f64, usize)> = candidates
            .iter()
            .enumerate()
            .map(|(i, &c)| (complement_fraction(self.scene, c, radius, &self.dirs), i))
            .collect();
        ranked.sort_by(|a, b| a.partial_cmp(b).expect("finite fractions"));
        let shortlist: Vec<Vec3> =
            ranked.iter().take(8).map(|&(_, i)| candidates[i]).collect();

        let mut best = (Vec3::splat(f64::NAN), f64::INFINITY);
        let scan = self.opts.scan_budget;
        for c in shortlist {
            let cap = self.cap_at(c, radius, scan)?;
            if cap < best.1 {
                best = (c, cap);
            }
            if best.1 == 0.0 {
                break;
            }
        }

        // Coordinate descent around the winner.
        let mut center = best.0;
        let mut cap = best.1;
        let mut step = radius / 8.0;
        for _ in 0..4 {
            if cap == 0.0 {
                break;
            }
            let mut improved = false;
            for axis in 0..3 {
                for sign in [-1.0, 1.0] {
                    let mut c = center;
                    c.set(axis, c.get(axis) + sign * step);
                    if !bb.contains(c) {
                        continue;
                    }
                    let v = self.cap_at(c, radius, scan)?;
                    if v < cap {
                        center = c;
                        cap = v;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        self.warm = Some(center);
        Ok((center, cap))
    }
}

/// The curve `R*(eps)` over a decreasing tolerance ladder, with the classical
/// and capacity inradii for context.
pub fn strict_capacity_inradius(
    scene: &Scene,
    eps_ladder: &[f64],
    opts: &InradiusOptions,
) -> Result<InradiusReport> {
    if eps_ladder.is_empty()
        || eps_ladder.iter().any(|&e| !(e > 0.0))
        || eps_ladder.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::Precondition(
            "tolerance ladder must be positive and decreasing".into(),
        ));
    }
    let bb = scene.bounding_box;
    let r_max = 0.5 * bb.extent().min_component();
    let resolution = r_max * opts.resolution_frac;

    // Distance-transform peak seeds the center search.
    let h = bb.extent().min_component() * opts.grid_frac;
    let (classical, classical_witness) = match build_grid(scene, h) {
        Ok(grid) => classical_inradius(&grid),
        Err(Error::GridTooCoarse) => (0.0, bb.center()),
        Err(e) => return Err(e),
    };
    let hints = vec![classical_witness, bb.center()];

    let mut search = CenterSearch::new(scene, opts, hints);

    // Empty complement in the box: every radius qualifies.
    let whole_cap = intersection_capacity(
        scene,
        bb.center(),
        0.5 * bb.diagonal(),
        opts.scan_budget,
        opts.seed,
    )?;
    if whole_cap == 0.0 {
        let rho: Vec<(f64, f64)> = eps_ladder.iter().map(|&e| (e, r_max)).collect();
        let witnesses = eps_ladder
            .iter()
            .map(|&e| RhoWitness { eps: e, radius: r_max, center: bb.center(), cap: 0.0 })
            .collect();
        return Ok(InradiusReport {
            classical,
            frak_r: r_max,
            frak_r_eps: *eps_ladder.last().expect("nonempty"),
            rho,
            witnesses,
            unbounded_candidate: true,
        });
    }

    let mut rho = Vec::new();
    let mut witnesses = Vec::new();
    let mut upper_start = r_max;
    for &eps in eps_ladder {
        let (radius, center, cap) =
            bisect_radius(&mut search, scene, eps, upper_start, resolution, opts)?;
        rho.push((eps, radius));
        witnesses.push(RhoWitness { eps, radius, center, cap });
        // The curve is monotone in eps: reuse the rung as the next bound.
        upper_start = (radius + 4.0 * resolution).min(r_max);
    }

    // Capacity inradius: the strictest rung re-tested with the polar trend.
    let eps_polar = *eps_ladder.last().expect("nonempty");
    let frak = capacity_inradius(scene, eps_polar, opts)?;

    Ok(InradiusReport {
        classical,
        frak_r: frak,
        frak_r_eps: eps_polar,
        rho,
        witnesses,
        unbounded_candidate: false,
    })
}

fn bisect_radius(
    search: &mut CenterSearch,
    scene: &Scene,
    eps: f64,
    upper_start: f64,
    resolution: f64,
    opts: &InradiusOptions,
) -> Result<(f64, Vec3, f64)> {
    let mut lo = 0.0f64;
    let mut hi = upper_start;
    let mut witness = (scene.bounding_box.center(), 0.0);
    // The upper end may already be feasible (curve carried over from the
    // previous rung, or a tiny scene).
    let (c, cap_scan) = search.best_center(hi)?;
    if cap_scan < eps {
        let cap = search.cap_at(c, hi, opts.budget)?;
        if cap < eps {
            return Ok((hi, c, cap));
        }
    }
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        let (c, cap_scan) = search.best_center(mid)?;
        let feasible = if cap_scan < eps {
            // Verify at the full budget before accepting.
            let cap = search.cap_at(c, mid, opts.budget)?;
            if cap < eps {
                witness = (c, cap);
                true
            } else {
                false
            }
        } else {
            false
        };
        if feasible {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, witness.0, witness.1))
}

/// Largest radius for which some ball meets the complement in a set that is
/// numerically polar: capacity below `eps_polar` and collapsing (by more than
/// a factor of four) under a fourfold sample refinement.
pub fn capacity_inradius(
    scene: &Scene,
    eps_polar: f64,
    opts: &InradiusOptions,
) -> Result<f64> {
    if !(eps_polar > 0.0) {
        return Err(Error::Precondition("polar threshold must be positive".into()));
    }
    let bb = scene.bounding_box;
    let r_max = 0.5 * bb.extent().min_component();
    let resolution = r_max * opts.resolution_frac;
    let h = bb.extent().min_component() * opts.grid_frac;
    let hints = match build_grid(scene, h) {
        Ok(grid) => vec![classical_inradius(&grid).1, bb.center()],
        Err(_) => vec![bb.center()],
    };
    let mut search = CenterSearch::new(scene, opts, hints);

    let mut polar_at = |search: &mut CenterSearch, radius: f64| -> Result<bool> {
        let (c, cap_scan) = search.best_center(radius)?;
        if cap_scan >= eps_polar {
            return Ok(false);
        }
        let coarse = search.cap_at(c, radius, opts.budget)?;
        if coarse == 0.0 {
            return Ok(true);
        }
        if coarse >= eps_polar {
            return Ok(false);
        }
        let fine = search.cap_at(c, radius, 4 * opts.budget)?;
        Ok(fine < eps_polar && (fine == 0.0 || coarse > 4.0 * fine))
    };

    if polar_at(&mut search, r_max)? {
        return Ok(r_max);
    }
    let mut lo = 0.0f64;
    let mut hi = r_max;
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        if polar_at(&mut search, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Sharp-bound check: `lambda1(D) <= lambda1(B) / R*(eps_min)^2` with 5%
/// slack, using the analytic `lambda1(B) = pi^2`.
#[derive(Debug, Clone)]
pub struct UpperBoundReport {
    pub lambda1: f64,
    pub rho_estimate: f64,
    pub bound: f64,
    pub pass: bool,
    /// `lambda1 * rho^2 / pi^2`, equal to one when the bound is tight.
    pub sharpness: f64,
}

pub fn verify_upper_bound(
    scene: &Scene,
    eps_ladder: &[f64],
    h: f64,
    opts: &InradiusOptions,
) -> Result<UpperBoundReport> {
    let report = strict_capacity_inradius(scene, eps_ladder, opts)?;
    let rho = report.rho.last().expect("nonempty ladder").1;
    let lambda = spectral::dirichlet_lambda1(scene, h)?.extrapolated;
    let pi2 = std::f64::consts::PI.powi(2);
    let bound = pi2 / (rho * rho) * 1.05;
    Ok(UpperBoundReport {
        lambda1: lambda,
        rho_estimate: rho,
        bound,
        pass: lambda <= bound,
        sharpness: lambda * rho * rho / pi2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LatticeRadiusMode;
    use crate::vec3::ZERO;

    #[test]
    fn classical_inradius_of_ball_and_box() {
        let h = 1.0 / 32.0;
        let ball = build_grid(&Scene::unit_ball(), h).unwrap();
        let (r, w) = classical_inradius(&ball);
        assert!((r - 1.0).abs() <= 2.0 * h, "ball inradius {r}");
        assert!(w.norm() <= 2.0 * h);

        let cube = Scene::with_root(
            SceneNode::cuboid(Vec3::splat(-1.0), Vec3::splat(1.0)),
            Aabb::new(Vec3::splat(-1.3), Vec3::splat(1.3)),
        );
        let grid = build_grid(&cube, h).unwrap();
        let (r, _) = classical_inradius(&grid);
        assert!((r - 1.0).abs() <= 2.0 * h, "box inradius {r}");
    }

    #[test]
    fn classical_inradius_ignores_punctures() {
        let h = 1.0 / 16.0;
        let plain = build_grid(&Scene::unit_ball(), h).unwrap();
        let punctured =
            build_grid(&Scene::unit_ball().punctured(vec![ZERO]), h).unwrap();
        let (r0, _) = classical_inradius(&plain);
        let (r1, _) = classical_inradius(&punctured);
        assert_eq!(r0, r1);
    }

    #[test]
    fn classical_inradius_all_interior_falls_back_to_box() {
        let everything = Scene::with_root(
            SceneNode::intersection(vec![]),
            Aabb::new(Vec3::splat(-1.0), Vec3::splat(1.0)),
        );
        let grid = build_grid(&everything, 0.25).unwrap();
        let (r, _) = classical_inradius(&grid);
        assert!(r >= 0.75 && r <= 1.01, "box-bounded inradius {r}");
    }

    #[test]
    fn distance_transform_matches_brute_force() {
        let scene = Scene::with_root(
            SceneNode::union(vec![
                SceneNode::ball(Vec3::new(-0.4, 0.1, 0.0), 0.5),
                SceneNode::cuboid(Vec3::new(0.0, -0.6, -0.4), Vec3::new(0.9, 0.5, 0.4)),
            ]),
            Aabb::new(Vec3::splat(-1.2), Vec3::splat(1.2)),
        );
        let grid = build_grid(&scene, 0.1).unwrap();
        let (r, _) = classical_inradius(&grid);
        let interior: Vec<Vec3> = grid.interior_points();
        let complement: Vec<Vec3> = (0..grid.total_nodes())
            .filter(|&i| !grid.interior[i])
            .map(|i| grid.node_point_linear(i))
            .collect();
        let mut brute: f64 = 0.0;
        for p in &interior {
            let d = complement.iter().map(|q| p.dist(*q)).fold(f64::INFINITY, f64::min);
            brute = brute.max(d);
        }
        assert!((r - brute).abs() < 1e-9, "transform {r} vs brute {brute}");
    }

    #[test]
    fn lattice_complement_empty_ball_oracle() {
        // Complement of a lattice of balls: the capacity inradius search must
        // agree with the geometric largest-empty-ball oracle.
        let scene = Scene::with_root(
            SceneNode::complement(SceneNode::LatticeBalls {
                spacing: 2.0,
                radius: 0.25,
                truncation: 5,
                origin: None,
                radius_mode: LatticeRadiusMode::Constant,
            }),
            Aabb::new(Vec3::splat(-2.5), Vec3::splat(2.5)),
        );
        // Oracle: the largest empty ball avoids every obstacle; its radius is
        // the maximum over centers of (distance to nearest obstacle).
        let mut oracle: f64 = 0.0;
        let n = 20;
        for i in 0..=n {
            for j in 0..=n {
                for k in 0..=n {
                    let c = Vec3::new(
                        -2.5 + 5.0 * i as f64 / n as f64,
                        -2.5 + 5.0 * j as f64 / n as f64,
                        -2.5 + 5.0 * k as f64 / n as f64,
                    );
                    oracle = oracle.max(-scene.root.sdf(c));
                }
            }
        }
        let exact = 3f64.sqrt() - 0.25;
        assert!((oracle - exact).abs() < 0.05, "oracle sanity {oracle} vs {exact}");

        let opts = InradiusOptions {
            budget: 160,
            scan_budget: 80,
            resolution_frac: 1.0 / 64.0,
            grid_frac: 1.0 / 24.0,
            ..Default::default()
        };
        let frak = capacity_inradius(&scene, 1e-3, &opts).unwrap();
        assert!(
            (frak - exact).abs() < 0.12 * exact,
            "capacity inradius {frak} vs oracle {exact}"
        );
    }
}
