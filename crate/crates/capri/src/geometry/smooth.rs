//! Smooth boolean machinery: the regularized union of two smoothly bounded
//! sets and smooth envelopes of compact samples.

use crate::error::{Error, Result};
use crate::geometry::{CompactSample, Scene, SceneNode};
use crate::vec3::{Aabb, Vec3};

/// Compactly supported transition profile: `chi(0) = 1`, `chi(t) = 0` for
/// `t >= eps^2`, strictly decreasing in between.
pub fn chi(t: f64, eps: f64) -> f64 {
    let e2 = eps * eps;
    if t >= e2 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t / e2)).exp()
    }
}

/// Two signed-distance evaluators whose union is being smoothed, plus the
/// transition scale.
pub struct DefiningFunctionPair<'a> {
    pub r1: &'a dyn Fn(Vec3) -> f64,
    pub r2: &'a dyn Fn(Vec3) -> f64,
    pub epsilon: f64,
}

/// Regularized union defining function
/// `R = (r1 + r2 - sqrt((r1 - r2)^2 + eps^2 chi((r1 - r2)^2))) / 2`.
///
/// `R <= min(r1, r2)` everywhere, with equality wherever `|r1 - r2| >= eps`,
/// and the zero set of `R` is smooth when the two boundaries intersect
/// transversally.
pub fn smooth_union(pair: &DefiningFunctionPair, x: Vec3) -> f64 {
    let a = (pair.r1)(x);
    let b = (pair.r2)(x);
    let t = (a - b) * (a - b);
    0.5 * (a + b - (t + pair.epsilon * pair.epsilon * chi(t, pair.epsilon)).sqrt())
}

/// Closed cube with center `2 M m` and side `2 M`; these cubes tile space as
/// `m` ranges over integer triples.
pub fn lattice_cube(half_period: f64, m: [i64; 3]) -> Aabb {
    let c = Vec3::new(m[0] as f64, m[1] as f64, m[2] as f64) * (2.0 * half_period);
    Aabb::new(c - Vec3::splat(half_period), c + Vec3::splat(half_period))
}

/// The lattice index of the cube containing `x` (ties broken by rounding).
pub fn cube_index(half_period: f64, x: Vec3) -> [i64; 3] {
    let s = 1.0 / (2.0 * half_period);
    [
        (x.x * s).round() as i64,
        (x.y * s).round() as i64,
        (x.z * s).round() as i64,
    ]
}

/// A smoothly bounded open superset of the points of `sample` whose capacity
/// exceeds the sample's by at most `eps`.
///
/// The envelope is the sublevel set `{ f < tau }` of the mollified indicator
/// `f = 1 - sum_i bump(|x - p_i| / w)`: the bumps have disjoint supports, so
/// the sublevel set is an exact union of disjoint open balls of radius
/// `w * s(tau)`, which is what the returned scene contains. `tau` is chosen
/// from 32 candidates by sampling `|grad f|` on the level set and keeping a
/// regular value.
pub fn smooth_envelope(sample: &CompactSample, eps: f64) -> Result<Scene> {
    if !(eps > 0.0) {
        return Err(Error::Precondition("envelope tolerance must be positive".into()));
    }
    let pts = &sample.points;
    // Disjoint bump supports: strictly less than half the minimal pairwise
    // separation. Patch radii already satisfy that bound.
    let w = 0.9
        * sample
            .patch_radius
            .iter()
            .fold(f64::INFINITY, |acc, &a| acc.min(a));
    if !(w > 0.0) {
        return Err(Error::EnvelopeFailed);
    }

    // Scan tau candidates; the bump profile makes every interior level
    // regular, but the scan guards against degenerate widths.
    let mut chosen = None;
    for k in 1..=32u32 {
        let tau = k as f64 / 33.0;
        // Level radius: bump(s) = 1 - tau  =>  s = bump_inverse(1 - tau).
        let s = bump_inverse(1.0 - tau);
        let grad = bump_derivative(s).abs() / w;
        if grad > 1e-8 && s > 0.0 && s < 1.0 {
            chosen = Some((tau, s));
            break;
        }
    }
    let (_tau, s) = chosen.ok_or(Error::EnvelopeFailed)?;
    let r_eff = w * s;

    let balls: Vec<SceneNode> =
        pts.iter().map(|p| SceneNode::ball(*p, r_eff)).collect();
    let mut bb = Aabb::new(pts[0], pts[0]);
    for p in pts {
        bb = bb.union(&Aabb::new(*p, *p));
    }
    Ok(Scene::with_root(SceneNode::union(balls), bb.inflate(4.0 * r_eff + 0.1)))
}

/// `bump(u) = exp(1 - 1/(1 - u^2))` for `|u| < 1`, zero outside.
pub fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

fn bump_derivative(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        let d = 1.0 - u * u;
        bump(u) * (-2.0 * u / (d * d))
    }
}

/// Inverse of `bump` on (0, 1): the radius at which the bump equals `v`.
fn bump_inverse(v: f64) -> f64 {
    if v >= 1.0 {
        return 0.0;
    }
    if v <= 0.0 {
        return 1.0;
    }
    // bump(u) = v  =>  u^2 = ln(v) / (ln(v) - 1)
    let l = v.ln();
    (l / (l - 1.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec3::ZERO;
    use rand::{Rng, SeedableRng};

    #[test]
    fn chi_has_stated_profile() {
        let eps = 0.3;
        assert!((chi(0.0, eps) - 1.0).abs() < 1e-15);
        assert_eq!(chi(eps * eps, eps), 0.0);
        assert_eq!(chi(2.0, eps), 0.0);
        let mut prev = 1.0;
        for k in 1..20 {
            let t = eps * eps * k as f64 / 20.0;
            let v = chi(t, eps);
            assert!(v < prev, "chi not strictly decreasing at t = {t}");
            prev = v;
        }
    }

    #[test]
    fn smooth_union_at_equal_zero_distances() {
        let eps = 0.25;
        let z = |_: Vec3| 0.0;
        let pair = DefiningFunctionPair { r1: &z, r2: &z, epsilon: eps };
        let v = smooth_union(&pair, ZERO);
        assert!((v + eps / 2.0).abs() < 1e-15, "R(0) = {v}, want {}", -eps / 2.0);
    }

    #[test]
    fn smooth_union_reduces_to_min_far_from_transition() {
        let eps = 0.5;
        let f1 = |_: Vec3| 3.0;
        let f2 = |_: Vec3| 1.0;
        let pair = DefiningFunctionPair { r1: &f1, r2: &f2, epsilon: eps };
        assert!((smooth_union(&pair, ZERO) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn smooth_union_below_min_everywhere() {
        let b1 = SceneNode::ball(Vec3::new(-0.4, 0.0, 0.0), 0.8);
        let b2 = SceneNode::ball(Vec3::new(0.4, 0.0, 0.0), 0.8);
        let f1 = |x: Vec3| b1.sdf(x);
        let f2 = |x: Vec3| b2.sdf(x);
        let pair = DefiningFunctionPair { r1: &f1, r2: &f2, epsilon: 0.1 };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5000 {
            let x = Vec3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let r = smooth_union(&pair, x);
            let lo = f1(x).min(f2(x));
            assert!(r <= lo + 1e-12);
            if (f1(x) - f2(x)).abs() >= 0.1 {
                assert!((r - lo).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn smooth_union_gradient_nonzero_on_zero_set() {
        // Two transversally intersecting balls; scan the zero set of R for
        // vanishing gradients by finite differences.
        let b1 = SceneNode::ball(Vec3::new(-0.3, 0.0, 0.0), 0.7);
        let b2 = SceneNode::ball(Vec3::new(0.3, 0.0, 0.0), 0.7);
        let f1 = |x: Vec3| b1.sdf(x);
        let f2 = |x: Vec3| b2.sdf(x);
        let eps = 0.15;
        let pair = DefiningFunctionPair { r1: &f1, r2: &f2, epsilon: eps };
        let rfun = |x: Vec3| smooth_union(&pair, x);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut found = 0;
        for _ in 0..4000 {
            // Walk a random ray from inside to outside and bisect R = 0.
            let dir = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .normalized();
            let mut a = Vec3::new(-0.3, 0.0, 0.0);
            let mut b = a + dir * 3.0;
            if rfun(a) >= 0.0 || rfun(b) <= 0.0 {
                continue;
            }
            for _ in 0..50 {
                let m = (a + b) * 0.5;
                if rfun(m) < 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            let x = (a + b) * 0.5;
            let fd = 1e-6;
            let g = Vec3::new(
                rfun(x + Vec3::new(fd, 0.0, 0.0)) - rfun(x - Vec3::new(fd, 0.0, 0.0)),
                rfun(x + Vec3::new(0.0, fd, 0.0)) - rfun(x - Vec3::new(0.0, fd, 0.0)),
                rfun(x + Vec3::new(0.0, 0.0, fd)) - rfun(x - Vec3::new(0.0, 0.0, fd)),
            ) * (1.0 / (2.0 * fd));
            assert!(g.norm() > 1e-3, "vanishing gradient at {x:?}");
            found += 1;
        }
        assert!(found > 1000, "zero-set scan found too few points: {found}");
    }

    /// Part (a) of the union construction: sampled points of the closed union
    /// satisfy R <= 0, and points with R <= 0 lie in the union or in the
    /// transition collar W.
    #[test]
    fn smooth_union_containment() {
        let b1 = SceneNode::ball(Vec3::new(-0.3, 0.0, 0.0), 0.7);
        let b2 = SceneNode::ball(Vec3::new(0.3, 0.0, 0.0), 0.7);
        let f1 = |x: Vec3| b1.sdf(x);
        let f2 = |x: Vec3| b2.sdf(x);
        let eps = 0.15;
        let pair = DefiningFunctionPair { r1: &f1, r2: &f2, epsilon: eps };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20000 {
            let x = Vec3::new(
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
            );
            let r = smooth_union(&pair, x);
            let in_union_closure = f1(x) <= 0.0 || f2(x) <= 0.0;
            if in_union_closure {
                assert!(r <= 1e-12);
            }
            if r <= 0.0 {
                let in_collar = (f1(x) - f2(x)).abs() < eps
                    && f1(x).abs() + f2(x).abs() <= 2.0 * eps;
                assert!(in_union_closure || in_collar, "point {x:?} escapes (a)");
            }
            // Part (b): outside the collar, R = 0 iff min(r1, r2) = 0.
            let outside_collar = f1(x).abs() + f2(x).abs() > 2.0 * eps;
            if outside_collar {
                let m = f1(x).min(f2(x));
                assert_eq!(r == 0.0, m == 0.0);
                if m.abs() > 1e-9 {
                    assert!(r.abs() > 0.0);
                }
            }
        }
    }

    #[test]
    fn lattice_cubes_tile() {
        let m1 = lattice_cube(1.0, [0, 0, 0]);
        assert_eq!(m1.lo, Vec3::splat(-1.0));
        assert_eq!(m1.hi, Vec3::splat(1.0));
        let m2 = lattice_cube(1.0, [1, 0, 0]);
        assert_eq!(m2.lo, Vec3::new(1.0, -1.0, -1.0));
        assert_eq!(m2.hi, Vec3::new(3.0, 1.0, 1.0));
        // Adjacent cubes share a face: zero-volume overlap.
        let overlap = m1.intersect(&m2);
        assert_eq!(overlap.lo.x, overlap.hi.x);
        // Every point belongs to the cube of its rounded index.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let x = Vec3::new(
                rng.gen_range(-7.0..7.0),
                rng.gen_range(-7.0..7.0),
                rng.gen_range(-7.0..7.0),
            );
            let m = cube_index(1.0, x);
            assert!(lattice_cube(1.0, m).contains(x));
        }
    }

    #[test]
    fn envelope_rejects_zero_eps() {
        let s = CompactSample::sphere_surface(ZERO, 1.0, 32);
        assert!(smooth_envelope(&s, 0.0).is_err());
    }

    #[test]
    fn envelope_contains_sample_points() {
        let s = CompactSample::sphere_surface(ZERO, 1.0, 64);
        let env = smooth_envelope(&s, 0.05).unwrap();
        for p in &s.points {
            assert!(env.contains(*p), "sample point {p:?} not enveloped");
        }
    }
}
