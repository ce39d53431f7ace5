// Development probe; will be replaced by the real examples.
use capri::capacity::{equilibrium_default, potential};
use capri::geometry::{sample_compact, CompactSample, SceneNode};
use capri::vec3::{Aabb, Vec3};
use std::time::Instant;

fn main() {
    let ball = SceneNode::ball(capri::vec3::ZERO, 1.0);
    let clamp = Aabb::new(Vec3::splat(-1.25), Vec3::splat(1.25));

    for budget in [300, 500, 2000] {
        let t0 = Instant::now();
        let s = sample_compact(&ball, &clamp, budget, 12345).unwrap();
        let t_sample = t0.elapsed().as_secs_f64();
        let t0 = Instant::now();
        let eq = equilibrium_default(&s, 3).unwrap();
        let t_solve = t0.elapsed().as_secs_f64();
        println!(
            "generic budget {budget}: cap = {:.6} iters = {} conv = {} sample {:.2}s solve {:.2}s",
            eq.capacity, eq.iterations, eq.converged, t_sample, t_solve
        );
        // far-field potential error vs analytic 1/r
        for r in [0.5f64, 1.0, 1.73, 3.0] {
            let x = Vec3::new(1.0 + r, 0.0, 0.0);
            let p = potential(&eq.measure, x, 3);
            let exact = 1.0 / x.norm();
            println!(
                "   r/a-ish dist {:.2}: p = {:.9}, exact = {:.9}, relerr = {:.3e}",
                r,
                p,
                exact,
                (p - exact).abs() / exact
            );
        }
    }

    // Fibonacci sphere with solved weights: the quadrature quality target.
    for budget in [300, 2000] {
        let s = CompactSample::sphere_surface(capri::vec3::ZERO, 0.25, budget);
        let eq = equilibrium_default(&s, 3).unwrap();
        println!(
            "fib sphere r=0.25 n={budget}: cap = {:.8} (exact 0.25), iters = {}",
            eq.capacity, eq.iterations
        );
        for dist in [0.5f64, 1.0, 1.7320508, 3.0] {
            let x = Vec3::new(dist, 0.0, 0.0);
            let p = potential(&eq.measure, x, 3);
            let exact = 0.25 / (0.25 * dist); // = 1/dist
            let exact = 1.0 / dist;
            let _ = exact;
            println!(
                "   dist {:.3} (ratio {:.1}): relerr = {:.3e}",
                dist,
                dist / 0.25,
                (p - 1.0 / dist).abs() * dist
            );
        }
    }

    // Generic sampler on the ball(0, 0.25) region, as select_obstacles will see it.
    let small = SceneNode::ball(capri::vec3::ZERO, 0.25);
    let clamp = Aabb::new(Vec3::splat(-1.0), Vec3::splat(1.0));
    let s = sample_compact(&small, &clamp, 300, 7).unwrap();
    let eq = equilibrium_default(&s, 3).unwrap();
    println!("generic ball r=0.25 n=300: cap = {:.8}", eq.capacity);
    for dist in [0.5f64, 1.0, 1.7320508, 3.0] {
        let x = Vec3::new(dist, 0.0, 0.0);
        let p = potential(&eq.measure, x, 3);
        println!(
            "   dist {:.3} (ratio {:.1}): relerr = {:.3e}",
            dist,
            dist / 0.25,
            (p - 1.0 / dist).abs() * dist
        );
    }
}
