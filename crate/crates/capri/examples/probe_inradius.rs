// Development probe; will be replaced by the real examples.
use capri::geometry::Scene;
use capri::inradius::{strict_capacity_inradius, InradiusOptions};
use std::time::Instant;

fn main() {
    let opts = InradiusOptions::default();
    let ladder = [1e-1, 1e-2, 1e-3, 1e-4];
    let t0 = Instant::now();
    let rep = strict_capacity_inradius(&Scene::unit_ball(), &ladder, &opts).unwrap();
    println!("unit ball in {:.1}s", t0.elapsed().as_secs_f64());
    println!("classical = {:.4}", rep.classical);
    for w in &rep.witnesses {
        println!(
            "eps {:.0e}: R* = {:.4} center ({:+.3},{:+.3},{:+.3}) cap {:.2e}",
            w.eps, w.radius, w.center.x, w.center.y, w.center.z, w.cap
        );
    }
    println!("frak_r = {:.4} at eps {:.0e}", rep.frak_r, rep.frak_r_eps);
}
