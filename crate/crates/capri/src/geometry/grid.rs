//! Cartesian grids over a scene's region of interest.
//!
//! Nodes live on the absolute lattice `h * Z^3`, independent of the bounding
//! box, so that halving `h` exactly nests node sets and translating a scene by
//! a multiple of `h` reproduces the same stencil.

use crate::error::{Error, Result};
use crate::geometry::Scene;
use crate::vec3::Vec3;

/// A grid over a scene: lattice geometry plus the interior mask.
#[derive(Debug, Clone)]
pub struct Grid {
    /// Position of the lattice node with index (0, 0, 0).
    pub origin: Vec3,
    /// Lattice spacing.
    pub h: f64,
    /// Node counts per axis.
    pub dims: [usize; 3],
    /// Interior flag per node (row-major over z, y, x): the node lies in the
    /// open set, strictly inside the bounding box, and is not punctured.
    pub interior: Vec<bool>,
    /// Nodes that are in the open set but removed from the interior mask
    /// solely because they coincide with a puncture point.
    pub punctured_nodes: Vec<usize>,
    /// Integer lattice coordinates of `origin` (origin = h * base).
    pub base: [i64; 3],
}

impl Grid {
    #[inline]
    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn node_point(&self, i: usize, j: usize, k: usize) -> Vec3 {
        // Recompute from the absolute lattice so that refined grids agree
        // bit-for-bit on shared nodes.
        Vec3::new(
            self.h * (self.base[0] + i as i64) as f64,
            self.h * (self.base[1] + j as i64) as f64,
            self.h * (self.base[2] + k as i64) as f64,
        )
    }

    pub fn node_point_linear(&self, idx: usize) -> Vec3 {
        let (i, j, k) = self.unravel(idx);
        self.node_point(i, j, k)
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let k = idx % self.dims[2];
        let j = (idx / self.dims[2]) % self.dims[1];
        let i = idx / (self.dims[1] * self.dims[2]);
        (i, j, k)
    }

    pub fn total_nodes(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn interior_count(&self) -> usize {
        self.interior.iter().filter(|&&b| b).count()
    }

    /// Iterator over interior node linear indices.
    pub fn interior_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.interior.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn interior_points(&self) -> Vec<Vec3> {
        self.interior_indices().map(|i| self.node_point_linear(i)).collect()
    }
}

/// Build the interior mask of `scene` at spacing `h`.
///
/// Errors with `GridTooCoarse` when fewer than 8 interior nodes survive.
pub fn build_grid(scene: &Scene, h: f64) -> Result<Grid> {
    if !(h > 0.0) {
        return Err(Error::Precondition("grid spacing must be positive".into()));
    }
    let bb = scene.bounding_box;
    if bb.is_empty() || !bb.is_finite() {
        return Err(Error::Precondition("bounding box must be finite and nonempty".into()));
    }
    // Smallest lattice index strictly inside the box per axis, then the count.
    let mut base = [0i64; 3];
    let mut dims = [0usize; 3];
    for a in 0..3 {
        let lo = bb.lo.get(a);
        let hi = bb.hi.get(a);
        let mut first = (lo / h).ceil() as i64;
        if (first as f64) * h <= lo {
            first += 1;
        }
        let mut last = (hi / h).floor() as i64;
        if (last as f64) * h >= hi {
            last -= 1;
        }
        if last < first {
            return Err(Error::GridTooCoarse);
        }
        base[a] = first;
        dims[a] = (last - first + 1) as usize;
    }

    let punctures = scene.root.puncture_points();
    let mut grid = Grid {
        origin: Vec3::new(
            h * base[0] as f64,
            h * base[1] as f64,
            h * base[2] as f64,
        ),
        h,
        dims,
        interior: vec![false; dims[0] * dims[1] * dims[2]],
        punctured_nodes: Vec::new(),
        base,
    };

    use rayon::prelude::*;
    let slabs: Vec<(Vec<bool>, Vec<usize>)> = (0..dims[0])
        .into_par_iter()
        .map(|i| {
            let mut mask = vec![false; dims[1] * dims[2]];
            let mut punct = Vec::new();
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let p = grid.node_point(i, j, k);
                    if !bb.contains_strict(p) {
                        continue;
                    }
                    let inside = scene.root.contains(p);
                    if inside {
                        mask[j * dims[2] + k] = true;
                    } else if !punctures.is_empty() {
                        // A punctured node: in the set except for the puncture.
                        let unpunctured = strip_punctures(&scene.root).contains(p);
                        if unpunctured {
                            punct.push(grid.node_index(i, j, k));
                        }
                    }
                }
            }
            (mask, punct)
        })
        .collect();
    for (i, (mask, punct)) in slabs.into_iter().enumerate() {
        let off = i * dims[1] * dims[2];
        grid.interior[off..off + mask.len()].copy_from_slice(&mask);
        grid.punctured_nodes.extend(punct);
    }
    grid.punctured_nodes.sort_unstable();

    if grid.interior_count() < 8 {
        return Err(Error::GridTooCoarse);
    }
    Ok(grid)
}

/// The same tree with all puncture combinators removed.
fn strip_punctures(node: &crate::geometry::SceneNode) -> crate::geometry::SceneNode {
    use crate::geometry::SceneNode;
    match node {
        SceneNode::Union { children } => {
            SceneNode::Union { children: children.iter().map(strip_punctures).collect() }
        }
        SceneNode::Intersection { children } => {
            SceneNode::Intersection { children: children.iter().map(strip_punctures).collect() }
        }
        SceneNode::Complement { child } => SceneNode::complement(strip_punctures(child)),
        SceneNode::Punctures { child, .. } => strip_punctures(child),
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SceneNode;
    use crate::vec3::Aabb;

    /// Independent enumeration of lattice nodes inside the unit ball.
    fn enumerate_ball_nodes(h: f64, radius: f64) -> Vec<Vec3> {
        let bound = (radius / h).ceil() as i64 + 1;
        let mut out = Vec::new();
        for i in -bound..=bound {
            for j in -bound..=bound {
                for k in -bound..=bound {
                    let p = Vec3::new(h * i as f64, h * j as f64, h * k as f64);
                    if p.norm() < radius {
                        out.push(p);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn ball_grid_matches_enumeration() {
        let scene = Scene::unit_ball();
        for h in [0.5, 0.4, 0.3] {
            let grid = build_grid(&scene, h).unwrap();
            let expect = enumerate_ball_nodes(h, 1.0);
            assert_eq!(grid.interior_count(), expect.len(), "h = {h}");
        }
        // At h = 0.75 only the origin and its six axis neighbors fit, which
        // is below the 8-node minimum.
        assert_eq!(enumerate_ball_nodes(0.75, 1.0).len(), 7);
        assert!(matches!(build_grid(&scene, 0.75), Err(Error::GridTooCoarse)));
    }

    #[test]
    fn puncture_removes_exactly_one_node() {
        let scene = Scene::unit_ball();
        let punctured = scene.punctured(vec![crate::vec3::ZERO]);
        let plain = build_grid(&scene, 0.5).unwrap();
        let punct = build_grid(&punctured, 0.5).unwrap();
        assert_eq!(punct.interior_count(), plain.interior_count() - 1);
        assert_eq!(punct.punctured_nodes.len(), 1);
    }

    #[test]
    fn empty_scene_is_too_coarse() {
        let scene = Scene::with_root(
            SceneNode::union(vec![]),
            Aabb::new(Vec3::splat(-1.0), Vec3::splat(1.0)),
        );
        assert!(matches!(build_grid(&scene, 0.25), Err(Error::GridTooCoarse)));
    }

    #[test]
    fn refinement_nests_node_sets() {
        let scene = Scene::unit_ball();
        let coarse = build_grid(&scene, 0.25).unwrap();
        let fine = build_grid(&scene, 0.125).unwrap();
        let fine_pts: std::collections::HashSet<[u64; 3]> = fine
            .interior_points()
            .into_iter()
            .map(|p| [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()])
            .collect();
        for p in coarse.interior_points() {
            assert!(
                fine_pts.contains(&[p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]),
                "coarse node {p:?} missing from fine grid"
            );
        }
    }

    #[test]
    fn interior_nodes_strictly_inside_box() {
        let scene = Scene::unit_cube();
        let grid = build_grid(&scene, 0.125).unwrap();
        for p in grid.interior_points() {
            assert!(scene.bounding_box.contains_strict(p));
            assert!(scene.contains(p));
        }
    }
}
