// Development probe; will be replaced by the real examples.
use capri::geometry::{LatticeRadiusMode, Scene, SceneNode};
use capri::subharmonic::{build_certificate, lambda1_lower_bounds, CertificateConfig};
use capri::vec3::{Aabb, Vec3};
use rand::{Rng, SeedableRng};
use std::time::Instant;

fn main() {
    let scene = Scene::with_root(
        SceneNode::complement(SceneNode::LatticeBalls {
            spacing: 2.0,
            radius: 0.25,
            truncation: 5,
            origin: None,
            radius_mode: LatticeRadiusMode::Constant,
        }),
        Aabb::new(Vec3::splat(-4.0), Vec3::splat(4.0)),
    );
    let config = CertificateConfig::default();
    let t0 = Instant::now();
    let cert = build_certificate(&scene, &config).unwrap();
    println!("certificate in {:.1}s", t0.elapsed().as_secs_f64());
    println!("delta = {:.6} (0.125 exact: {:+.3}%)", cert.delta, (cert.delta / 0.125 - 1.0) * 100.0);
    println!("m = {:.3e}  M_phi = {:.3e}  c = {:.3e}  tail = {:.3e}",
        cert.lower_bound_m, cert.upper_bound_m_phi, cert.laplacian_floor_c, cert.truncation_tail);
    let (h, l) = lambda1_lower_bounds(&cert).unwrap();
    println!("hormander = {:.3e}  lee = {:.3e}  (lee >= hormander: {})", h, l, l >= h);

    // phi vs the closed-form sphere-potential reference at 100 deep probes.
    let a = 0.25;
    let s = config.exponent_scale;
    let delta = cert.delta;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let mut max_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    let mut placed = 0;
    while placed < 100 {
        let x = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        // keep probes at distance >= 4a from every lattice center
        let mut mind = f64::INFINITY;
        for i in -2i64..=2 {
            for j in -2i64..=2 {
                for k in -2i64..=2 {
                    let c = Vec3::new(i as f64, j as f64, k as f64) * 2.0;
                    mind = mind.min(x.dist(c));
                }
            }
        }
        if mind < 4.0 * a {
            continue;
        }
        placed += 1;
        let impl_phi = cert.phi(x);
        // analytic reference: p_m = 1 / max(|x - 2m|, a), shells <= 4 over
        // the same obstacle cube set
        let mut ref_phi = 0.0;
        let home = capri::geometry::cube_index(1.0, x);
        for i in -2i64..=2 {
            for j in -2i64..=2 {
                for k in -2i64..=2 {
                    let lam = (i - home[0]).abs().max((j - home[1]).abs()).max((k - home[2]).abs());
                    if lam > config.shells as i64 {
                        continue;
                    }
                    let c = Vec3::new(i as f64, j as f64, k as f64) * 2.0;
                    let p = 1.0 / x.dist(c).max(a);
                    ref_phi += (-s / (delta * p)).exp();
                }
            }
        }
        max_abs = max_abs.max((impl_phi - ref_phi).abs());
        if ref_phi > 0.0 {
            max_rel = max_rel.max((impl_phi - ref_phi).abs() / ref_phi);
        }
    }
    println!("phi vs closed form at 100 deep probes: max abs err {:.3e}, max rel err {:.3e}", max_abs, max_rel);
}
