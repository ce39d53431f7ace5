//! Constructive scene descriptions of open sets in R^3.
//!
//! A scene is a tree of primitives (balls, boxes, halfspaces, lattices of
//! balls) and combinators (union, intersection, complement, punctures),
//! together with a bounding box marking the region of interest. The tree
//! evaluates to a signed distance and an indicator. Signed distances are
//! exact for single primitives and conservative min/max compositions for
//! booleans.
//!
//! Punctures remove a finite point list from a set. Finite point sets are
//! polar: they carry no capacity and no Lebesgue volume, so punctures affect
//! only the indicator at the punctured points themselves, never the signed
//! distance and never any sampled compact set.

use crate::error::{Error, Result};
use crate::vec3::{Aabb, Vec3};
use serde::{Deserialize, Serialize};

/// How `LatticeBalls` assigns a radius to the ball at lattice index `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LatticeRadiusMode {
    /// Every ball has the same radius; the ball at `m = 0` is included.
    #[default]
    Constant,
    /// The ball at `m` has radius `radius / |m|` (Euclidean norm); the ball
    /// at `m = 0` is omitted.
    InverseNorm,
}

/// One node of a scene tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SceneNode {
    /// Open ball of the given radius.
    Ball { center: Vec3, radius: f64 },
    /// Open axis-aligned box.
    Box { lo: Vec3, hi: Vec3 },
    /// Open halfspace `{ x : normal . x < offset }`.
    Halfspace { normal: Vec3, offset: f64 },
    Union { children: Vec<SceneNode> },
    Intersection { children: Vec<SceneNode> },
    Complement { child: Box<SceneNode> },
    /// Union of balls at `origin + spacing * m` over integer triples `m` with
    /// `max_i |m_i| <= truncation`.
    LatticeBalls {
        spacing: f64,
        radius: f64,
        truncation: i64,
        #[serde(default)]
        origin: Option<Vec3>,
        #[serde(default)]
        radius_mode: LatticeRadiusMode,
    },
    /// The child set minus a finite list of points.
    Punctures { child: Box<SceneNode>, points: Vec<Vec3> },
}

/// Match tolerance used when testing whether a probe coincides with a
/// puncture point.
const PUNCTURE_TOL: f64 = 1e-9;

impl SceneNode {
    pub fn ball(center: Vec3, radius: f64) -> Self {
        SceneNode::Ball { center, radius }
    }

    pub fn cuboid(lo: Vec3, hi: Vec3) -> Self {
        SceneNode::Box { lo, hi }
    }

    pub fn union(children: Vec<SceneNode>) -> Self {
        SceneNode::Union { children }
    }

    pub fn intersection(children: Vec<SceneNode>) -> Self {
        SceneNode::Intersection { children }
    }

    pub fn complement(child: SceneNode) -> Self {
        SceneNode::Complement { child: Box::new(child) }
    }

    pub fn punctures(child: SceneNode, points: Vec<Vec3>) -> Self {
        SceneNode::Punctures { child: Box::new(child), points }
    }

    /// Signed distance to the set: negative inside, positive outside.
    ///
    /// Exact for primitives; a conservative min/max bound for booleans.
    /// Punctures are ignored (a point is polar).
    pub fn sdf(&self, p: Vec3) -> f64 {
        match self {
            SceneNode::Ball { center, radius } => p.dist(*center) - radius,
            SceneNode::Box { lo, hi } => {
                let c = (*lo + *hi) * 0.5;
                let half = (*hi - *lo) * 0.5;
                let q = (p - c).abs() - half;
                let outside = q.max(crate::vec3::ZERO).norm();
                let inside = q.max_component().min(0.0);
                outside + inside
            }
            SceneNode::Halfspace { normal, offset } => {
                let n = normal.norm();
                (p.dot(*normal) - offset) / n
            }
            // Empty union is the empty set; empty intersection is all of R^3.
            SceneNode::Union { children } => children
                .iter()
                .map(|c| c.sdf(p))
                .fold(f64::INFINITY, f64::min),
            SceneNode::Intersection { children } => children
                .iter()
                .map(|c| c.sdf(p))
                .fold(f64::NEG_INFINITY, f64::max),
            SceneNode::Complement { child } => -child.sdf(p),
            SceneNode::LatticeBalls { spacing, radius, truncation, origin, radius_mode } => {
                lattice_sdf(p, *spacing, *radius, *truncation, origin.unwrap_or(crate::vec3::ZERO), *radius_mode)
            }
            SceneNode::Punctures { child, .. } => child.sdf(p),
        }
    }

    /// Open-set membership. Follows boolean structure where possible and the
    /// sign of the conservative distance elsewhere; punctured points are
    /// excluded.
    pub fn contains(&self, p: Vec3) -> bool {
        match self {
            SceneNode::Union { children } => children.iter().any(|c| c.contains(p)),
            SceneNode::Intersection { children } => children.iter().all(|c| c.contains(p)),
            SceneNode::Complement { child } => child.sdf(p) > 0.0,
            SceneNode::Punctures { child, points } => {
                child.contains(p) && !points.iter().any(|q| near(p, *q))
            }
            _ => self.sdf(p) < 0.0,
        }
    }

    /// Conservative bounding box of the set. Unbounded nodes report an
    /// infinite box; callers clamp it to the scene's region of interest.
    pub fn bbox(&self) -> Aabb {
        match self {
            SceneNode::Ball { center, radius } => {
                Aabb::new(*center - Vec3::splat(*radius), *center + Vec3::splat(*radius))
            }
            SceneNode::Box { lo, hi } => Aabb::new(*lo, *hi),
            SceneNode::Halfspace { .. } => Aabb::everything(),
            SceneNode::Union { children } => {
                let mut b = Aabb::new(Vec3::splat(f64::INFINITY), Vec3::splat(f64::NEG_INFINITY));
                for c in children {
                    b = b.union(&c.bbox());
                }
                b
            }
            SceneNode::Intersection { children } => {
                let mut b = Aabb::everything();
                for c in children {
                    b = b.intersect(&c.bbox());
                }
                b
            }
            SceneNode::Complement { .. } => Aabb::everything(),
            SceneNode::LatticeBalls { spacing, radius, truncation, origin, .. } => {
                let o = origin.unwrap_or(crate::vec3::ZERO);
                let span = *spacing * *truncation as f64 + *radius;
                Aabb::new(o - Vec3::splat(span), o + Vec3::splat(span))
            }
            SceneNode::Punctures { child, .. } => child.bbox(),
        }
    }

    /// All puncture points declared anywhere in the tree.
    pub fn puncture_points(&self) -> Vec<Vec3> {
        let mut out = Vec::new();
        self.collect_punctures(&mut out);
        out
    }

    fn collect_punctures(&self, out: &mut Vec<Vec3>) {
        match self {
            SceneNode::Union { children } | SceneNode::Intersection { children } => {
                for c in children {
                    c.collect_punctures(out);
                }
            }
            SceneNode::Complement { child } => child.collect_punctures(out),
            SceneNode::Punctures { child, points } => {
                out.extend_from_slice(points);
                child.collect_punctures(out);
            }
            _ => {}
        }
    }

    /// The same set scaled by `r` about the origin.
    pub fn scaled(&self, r: f64) -> SceneNode {
        match self {
            SceneNode::Ball { center, radius } => {
                SceneNode::Ball { center: *center * r, radius: radius * r }
            }
            SceneNode::Box { lo, hi } => SceneNode::Box { lo: *lo * r, hi: *hi * r },
            SceneNode::Halfspace { normal, offset } => {
                SceneNode::Halfspace { normal: *normal, offset: offset * r }
            }
            SceneNode::Union { children } => {
                SceneNode::Union { children: children.iter().map(|c| c.scaled(r)).collect() }
            }
            SceneNode::Intersection { children } => {
                SceneNode::Intersection { children: children.iter().map(|c| c.scaled(r)).collect() }
            }
            SceneNode::Complement { child } => SceneNode::complement(child.scaled(r)),
            SceneNode::LatticeBalls { spacing, radius, truncation, origin, radius_mode } => {
                SceneNode::LatticeBalls {
                    spacing: spacing * r,
                    radius: radius * r,
                    truncation: *truncation,
                    origin: Some(origin.unwrap_or(crate::vec3::ZERO) * r),
                    radius_mode: *radius_mode,
                }
            }
            SceneNode::Punctures { child, points } => {
                SceneNode::punctures(child.scaled(r), points.iter().map(|p| *p * r).collect())
            }
        }
    }

    /// The same set translated by `t`.
    pub fn translated(&self, t: Vec3) -> SceneNode {
        match self {
            SceneNode::Ball { center, radius } => {
                SceneNode::Ball { center: *center + t, radius: *radius }
            }
            SceneNode::Box { lo, hi } => SceneNode::Box { lo: *lo + t, hi: *hi + t },
            SceneNode::Halfspace { normal, offset } => {
                SceneNode::Halfspace { normal: *normal, offset: offset + normal.dot(t) }
            }
            SceneNode::Union { children } => {
                SceneNode::Union { children: children.iter().map(|c| c.translated(t)).collect() }
            }
            SceneNode::Intersection { children } => {
                SceneNode::Intersection { children: children.iter().map(|c| c.translated(t)).collect() }
            }
            SceneNode::Complement { child } => SceneNode::complement(child.translated(t)),
            SceneNode::LatticeBalls { spacing, radius, truncation, origin, radius_mode } => {
                SceneNode::LatticeBalls {
                    spacing: *spacing,
                    radius: *radius,
                    truncation: *truncation,
                    origin: Some(origin.unwrap_or(crate::vec3::ZERO) + t),
                    radius_mode: *radius_mode,
                }
            }
            SceneNode::Punctures { child, points } => {
                SceneNode::punctures(child.translated(t), points.iter().map(|p| *p + t).collect())
            }
        }
    }

    /// Validate size parameters: every primitive must have strictly positive
    /// extent.
    pub fn validate(&self) -> Result<()> {
        match self {
            SceneNode::Ball { radius, .. } => {
                if *radius <= 0.0 {
                    return Err(Error::SceneParse("ball radius must be positive".into()));
                }
            }
            SceneNode::Box { lo, hi } => {
                if !(lo.x < hi.x && lo.y < hi.y && lo.z < hi.z) {
                    return Err(Error::SceneParse("box must have positive extent".into()));
                }
            }
            SceneNode::Halfspace { normal, .. } => {
                if normal.norm() == 0.0 {
                    return Err(Error::SceneParse("halfspace normal must be nonzero".into()));
                }
            }
            SceneNode::Union { children } | SceneNode::Intersection { children } => {
                for c in children {
                    c.validate()?;
                }
            }
            SceneNode::Complement { child } => child.validate()?,
            SceneNode::LatticeBalls { spacing, radius, truncation, .. } => {
                if *spacing <= 0.0 || *radius <= 0.0 || *truncation < 0 {
                    return Err(Error::SceneParse(
                        "lattice_balls needs positive spacing and radius".into(),
                    ));
                }
            }
            SceneNode::Punctures { child, .. } => child.validate()?,
        }
        Ok(())
    }
}

fn near(p: Vec3, q: Vec3) -> bool {
    let scale = 1.0f64.max(q.norm());
    (p - q).abs().max_component() <= PUNCTURE_TOL * scale
}

/// Distance to the nearest lattice ball, searching a window of lattice cells
/// around the rounded (and truncation-clamped) cell index of `p`. The window
/// is wide enough to cover any ball whose radius is at most the base radius.
fn lattice_sdf(
    p: Vec3,
    spacing: f64,
    radius: f64,
    truncation: i64,
    origin: Vec3,
    mode: LatticeRadiusMode,
) -> f64 {
    let u = (p - origin) * (1.0 / spacing);
    let w = (radius / spacing).ceil() as i64 + 2;
    let clamp = |v: f64| -> i64 { (v.round() as i64).clamp(-truncation, truncation) };
    let (ci, cj, ck) = (clamp(u.x), clamp(u.y), clamp(u.z));
    let mut best = f64::INFINITY;
    for i in (ci - w).max(-truncation)..=(ci + w).min(truncation) {
        for j in (cj - w).max(-truncation)..=(cj + w).min(truncation) {
            for k in (ck - w).max(-truncation)..=(ck + w).min(truncation) {
                let m_norm_sq = (i * i + j * j + k * k) as f64;
                let r = match mode {
                    LatticeRadiusMode::Constant => radius,
                    LatticeRadiusMode::InverseNorm => {
                        if m_norm_sq == 0.0 {
                            continue;
                        }
                        radius / m_norm_sq.sqrt()
                    }
                };
                let c = origin + Vec3::new(i as f64, j as f64, k as f64) * spacing;
                best = best.min(p.dist(c) - r);
            }
        }
    }
    best
}

/// A scene: an open set in R^3 plus its region of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    /// Scene document schema version.
    #[serde(default = "default_schema")]
    pub schema: u32,
    /// Ambient dimension used as the kernel exponent; geometry itself is
    /// evaluated in R^3.
    pub dimension: u32,
    pub bounding_box: Aabb,
    pub root: SceneNode,
}

fn default_schema() -> u32 {
    1
}

impl Scene {
    pub fn new(dimension: u32, bounding_box: Aabb, root: SceneNode) -> Self {
        Scene { schema: 1, dimension, bounding_box, root }
    }

    /// Convenience constructor for the common n = 3 case.
    pub fn with_root(root: SceneNode, bounding_box: Aabb) -> Self {
        Scene::new(3, bounding_box, root)
    }

    pub fn sdf(&self, p: Vec3) -> f64 {
        self.root.sdf(p)
    }

    pub fn contains(&self, p: Vec3) -> bool {
        self.root.contains(p)
    }

    pub fn from_json(s: &str) -> Result<Scene> {
        let scene: Scene =
            serde_json::from_str(s).map_err(|e| Error::SceneParse(e.to_string()))?;
        if scene.schema != 1 {
            return Err(Error::SceneParse(format!("unsupported schema {}", scene.schema)));
        }
        if scene.dimension < 3 {
            return Err(Error::SceneParse("dimension must be at least 3".into()));
        }
        if scene.bounding_box.is_empty() || !scene.bounding_box.is_finite() {
            return Err(Error::SceneParse("bounding box must be finite and nonempty".into()));
        }
        scene.root.validate()?;
        Ok(scene)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serialization cannot fail")
    }

    pub fn load(path: &std::path::Path) -> Result<Scene> {
        Scene::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn scaled(&self, r: f64) -> Scene {
        Scene {
            schema: self.schema,
            dimension: self.dimension,
            bounding_box: self.bounding_box.scaled(r),
            root: self.root.scaled(r),
        }
    }

    pub fn translated(&self, t: Vec3) -> Scene {
        Scene {
            schema: self.schema,
            dimension: self.dimension,
            bounding_box: self.bounding_box.translated(t),
            root: self.root.translated(t),
        }
    }

    /// The same scene with extra punctures added at `points`.
    pub fn punctured(&self, points: Vec<Vec3>) -> Scene {
        Scene {
            schema: self.schema,
            dimension: self.dimension,
            bounding_box: self.bounding_box,
            root: SceneNode::punctures(self.root.clone(), points),
        }
    }

    /// Unit-ball scene with a slightly padded region of interest.
    pub fn unit_ball() -> Scene {
        Scene::with_root(
            SceneNode::ball(crate::vec3::ZERO, 1.0),
            Aabb::new(Vec3::splat(-1.25), Vec3::splat(1.25)),
        )
    }

    /// Open unit cube (0,1)^3.
    pub fn unit_cube() -> Scene {
        Scene::with_root(
            SceneNode::cuboid(crate::vec3::ZERO, Vec3::splat(1.0)),
            Aabb::new(Vec3::splat(-0.25), Vec3::splat(1.25)),
        )
    }
}
