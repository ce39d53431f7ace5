// Development probe; will be replaced by the real examples.
use capri::geometry::Scene;
use capri::spectral::dirichlet_lambda1;
use std::time::Instant;

fn main() {
    let pi2 = std::f64::consts::PI.powi(2);
    for h in [1.0 / 12.0, 1.0 / 24.0] {
        let t0 = Instant::now();
        let est = dirichlet_lambda1(&Scene::unit_ball(), h).unwrap();
        println!(
            "ball h={h:.4}: levels {:?} extrap {:.5} err_est {:.2e} | vs pi^2 {:.5}: rel {:+.3e} | {:.1}s",
            est.lambda_by_h,
            est.extrapolated,
            est.error_estimate,
            pi2,
            (est.extrapolated - pi2) / pi2,
            t0.elapsed().as_secs_f64()
        );
    }
    let t0 = Instant::now();
    let est = dirichlet_lambda1(&Scene::unit_cube(), 1.0 / 24.0).unwrap();
    let exact = 3.0 * pi2;
    println!(
        "cube h=1/24: extrap {:.5} vs 3pi^2 {:.5}: rel {:+.3e} | {:.1}s",
        est.extrapolated,
        exact,
        (est.extrapolated - exact) / exact,
        t0.elapsed().as_secs_f64()
    );
}
