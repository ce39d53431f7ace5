//! Subcommand dispatch: scene ingestion, the five commands (`cap`,
//! `lambda1`, `inradius`, `certify`, `verify`), and report emission.
//!
//! Every stochastic knob is seeded through `RunConfig`, so a fixed
//! configuration produces byte-identical output. Exit codes: 0 all checks
//! pass, 1 a verification check failed, 2 the scene or configuration did not
//! parse, 3 a numerical failure.

use crate::capacity::{
    self, equilibrium, normalized_potential, Optimizer, SolveOptions,
};
use crate::error::{Error, Result};
use crate::geometry::{build_grid, sample_compact, Scene, SceneNode};
use crate::inradius::{self, InradiusOptions};
use crate::report::*;
use crate::spectral;
use crate::subharmonic::{self, BumpKind, CertificateConfig};
use crate::vec3::{Aabb, Vec3};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Cap,
    Lambda1,
    Inradius,
    Certify,
    Verify,
}

/// A fully resolved run: scene path, command, and every numeric knob.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scene_path: PathBuf,
    pub command: Command,
    /// Grid spacing for eigenvalue runs.
    pub h: f64,
    /// Extra refinement levels beyond the two-grid pair.
    pub refine: usize,
    /// Sampling budget for capacity runs.
    pub budget: usize,
    /// Relative energy tolerance of the equilibrium solver.
    pub tol: f64,
    /// Decreasing capacity tolerances for the inradius ladder.
    pub eps_ladder: Vec<f64>,
    /// Cube half-period for the certificate.
    pub half_period: f64,
    pub shells: usize,
    pub exponent_scale: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Write the equilibrium measure of a capacity run here.
    pub emit_measure: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scene_path: PathBuf::new(),
            command: Command::Verify,
            h: 1.0 / 16.0,
            refine: 1,
            budget: 1000,
            tol: 1e-8,
            eps_ladder: vec![1e-1, 1e-2, 1e-3, 1e-4],
            half_period: 1.0,
            shells: 4,
            exponent_scale: 4.0,
            seed: 7,
            optimizer: Optimizer::ProjectedGradient,
            emit_measure: None,
            output: None,
            format: Format::Csv,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("h", self.h),
            ("tol", self.tol),
            ("M", self.half_period),
            ("exponent-scale", self.exponent_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Precondition(format!("{name} must be positive")));
            }
        }
        if self.budget < 2 {
            return Err(Error::Precondition("budget must be at least 2".into()));
        }
        if self.eps_ladder.is_empty()
            || self.eps_ladder.iter().any(|&e| !(e > 0.0))
            || self.eps_ladder.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::Precondition(
                "eps ladder must be positive and strictly decreasing".into(),
            ));
        }
        Ok(())
    }
}

/// Execute the configured command. The boolean is the overall pass flag
/// (meaningful for `verify`; true elsewhere).
pub fn run(config: &RunConfig) -> Result<(Report, bool)> {
    config.validate()?;
    let scene = Scene::load(&config.scene_path)?;
    let report = match config.command {
        Command::Cap => run_cap(config, &scene)?,
        Command::Lambda1 => run_lambda1(config, &scene)?,
        Command::Inradius => run_inradius(config, &scene)?,
        Command::Certify => run_certify(config, &scene)?,
        Command::Verify => run_verify(config, &scene)?,
    };
    let pass = match &report {
        Report::Verify(v) => v.pass,
        _ => true,
    };
    if let Some(path) = &config.output {
        std::fs::write(path, report.emit(config.format))?;
    }
    Ok((report, pass))
}

fn solve_options(config: &RunConfig) -> SolveOptions {
    SolveOptions {
        tol: config.tol,
        optimizer: config.optimizer,
        ..Default::default()
    }
}

/// Capacity of the scene root, treated as a compact region (its closure).
fn run_cap(config: &RunConfig, scene: &Scene) -> Result<Report> {
    let sample = match sample_compact(
        &scene.root,
        &scene.bounding_box,
        config.budget,
        config.seed,
    ) {
        Ok(s) => s,
        Err(Error::EmptyCompactSet) => {
            return Ok(Report::Capacity {
                rows: vec![CapacityRow {
                    budget: config.budget,
                    points: 0,
                    energy: f64::INFINITY,
                    capacity: 0.0,
                    iterations: 0,
                    converged: true,
                }],
            })
        }
        Err(e) => return Err(e),
    };
    let eq = equilibrium(&sample, scene.dimension, &solve_options(config))?;
    if let Some(path) = &config.emit_measure {
        let rows: Vec<MeasureRow> = eq
            .measure
            .support
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| MeasureRow {
                x: p.x,
                y: p.y,
                z: p.z,
                weight: eq.measure.weights[i],
                patch_radius: eq.measure.support.patch_radius[i],
            })
            .collect();
        std::fs::write(path, Report::Measure { rows }.emit(Format::Csv))?;
    }
    Ok(Report::Capacity {
        rows: vec![CapacityRow {
            budget: config.budget,
            points: sample.len(),
            energy: eq.energy,
            capacity: eq.capacity,
            iterations: eq.iterations,
            converged: eq.converged,
        }],
    })
}

fn run_lambda1(config: &RunConfig, scene: &Scene) -> Result<Report> {
    let est = spectral::dirichlet_lambda1_refined(scene, config.h, config.refine.max(1))?;
    let mut rows = Vec::new();
    for (k, &(h, lambda)) in est.lambda_by_h.iter().enumerate() {
        let (extrapolated, error_estimate) = if k == 0 {
            (None, None)
        } else {
            let prev = est.lambda_by_h[k - 1].1;
            (Some(lambda + (lambda - prev) / 3.0), Some((lambda - prev).abs() / 3.0))
        };
        rows.push(LambdaRow { h, lambda, extrapolated, error_estimate });
    }
    Ok(Report::Lambda { rows })
}

fn run_inradius(config: &RunConfig, scene: &Scene) -> Result<Report> {
    let opts = InradiusOptions { budget: config.budget.min(600), seed: config.seed, ..Default::default() };
    let rep = inradius::strict_capacity_inradius(scene, &config.eps_ladder, &opts)?;
    let rows = rep
        .witnesses
        .iter()
        .map(|w| InradiusRow {
            epsilon: w.eps,
            radius: w.radius,
            center_x: w.center.x,
            center_y: w.center.y,
            center_z: w.center.z,
            cap_at_witness: w.cap,
        })
        .collect();
    Ok(Report::Inradius { rows, unbounded_candidate: rep.unbounded_candidate })
}

fn run_certify(config: &RunConfig, scene: &Scene) -> Result<Report> {
    let cert_config = CertificateConfig {
        half_period: config.half_period,
        shells: config.shells,
        exponent_scale: config.exponent_scale,
        budget: config.budget.min(500),
        seed: config.seed,
    };
    let cert = subharmonic::build_certificate(scene, &cert_config)?;
    let (hormander, lee) = subharmonic::lambda1_lower_bounds(&cert)?;
    // Context: the inradius module's estimate, so the report shows whether
    // the chosen cube half-period exceeds it.
    let rho_reference = inradius::strict_capacity_inradius(
        scene,
        &[1e-1, 1e-2],
        &InradiusOptions {
            budget: 160,
            scan_budget: 80,
            resolution_frac: 1.0 / 64.0,
            grid_frac: 1.0 / 24.0,
            seed: config.seed,
        },
    )
    .ok()
    .map(|r| r.rho.last().expect("nonempty ladder").1);
    Ok(Report::Certify(CertifyReport {
        delta: cert.delta,
        c: cert.laplacian_floor_c,
        m: cert.lower_bound_m,
        m_phi: cert.upper_bound_m_phi,
        tail: cert.truncation_tail,
        lower_bound_hormander: hormander,
        lower_bound_lee: lee,
        rho_reference,
    }))
}

struct Checks {
    records: Vec<VerifyRecord>,
}

impl Checks {
    fn push(&mut self, name: &str, anchor: &str, lhs: f64, rhs: f64, tol: f64, pass: bool) {
        self.records.push(VerifyRecord {
            name: name.to_string(),
            anchor: anchor.to_string(),
            lhs,
            rhs,
            tolerance: tol,
            pass,
        });
    }
}

/// The full verification suite: capacity laws, potential laws, eigenvalue
/// laws, the sharp upper bound, eigenvalue continuity, and the certificate
/// chain. Anchors name the laws as listed in `docs/LAWS.md`.
fn run_verify(config: &RunConfig, scene: &Scene) -> Result<Report> {
    let mut checks = Checks { records: Vec::new() };
    let n = scene.dimension;
    let opts = solve_options(config);

    // --- capacity laws on a sample of the scene's complement-free root ---
    let budget = config.budget.clamp(200, 600);
    let sample = sample_compact(&scene.root, &scene.bounding_box, budget, config.seed)?;
    let base = equilibrium(&sample, n, &opts)?;

    let scaled = equilibrium(&sample.scaled(2.0), n, &opts)?;
    let expect = 2f64.powi(n as i32 - 2) * base.capacity;
    checks.push(
        "capacity scaling",
        "cap(rE) = r^(n-2) cap(E)",
        scaled.capacity,
        expect,
        0.01 * expect,
        (scaled.capacity - expect).abs() <= 0.01 * expect,
    );

    let translated = equilibrium(&sample.translated(Vec3::new(0.5, -0.25, 2.0)), n, &opts)?;
    checks.push(
        "capacity translation",
        "cap(E + x) = cap(E)",
        translated.capacity,
        base.capacity,
        1e-12 * base.capacity,
        (translated.capacity - base.capacity).abs() <= 1e-12 * base.capacity,
    );

    // Monotonicity: a nested sub-sample has no larger capacity.
    let keep = sample.points.len() / 2;
    let sub = crate::geometry::CompactSample::from_points(
        sample.points.iter().copied().take(keep).collect(),
        "nested half",
    )?;
    let sub_eq = equilibrium(&sub, n, &opts)?;
    checks.push(
        "capacity monotonicity",
        "E' in E implies cap(E') <= cap(E)",
        sub_eq.capacity,
        base.capacity,
        0.02 * base.capacity,
        sub_eq.capacity <= base.capacity * 1.02,
    );

    // Subadditivity: two disjoint translates of the sample.
    let part_a = sample.translated(Vec3::new(-0.5 * scene.bounding_box.diagonal(), 0.0, 0.0));
    let part_b = sample.translated(Vec3::new(0.5 * scene.bounding_box.diagonal(), 0.0, 0.0));
    let sub_report = capacity::capacity_subadditivity_check(&[&part_a, &part_b], n, &opts)?;
    checks.push(
        "capacity subadditivity",
        "cap(E1 union E2) <= cap(E1) + cap(E2)",
        sub_report.cap_union,
        sub_report.sum_parts,
        0.02 * sub_report.sum_parts,
        sub_report.pass,
    );

    // Maximum principle over a probe grid.
    let mut max_pot: f64 = 0.0;
    let probe_box = scene.bounding_box.inflate(0.25 * scene.bounding_box.diagonal());
    for i in 0..32 {
        for j in 0..32 {
            for k in 0..32 {
                let u = Vec3::new(
                    (i as f64 + 0.5) / 32.0,
                    (j as f64 + 0.5) / 32.0,
                    (k as f64 + 0.5) / 32.0,
                );
                let p = capacity::potential(&base.measure, probe_box.lerp(u), n);
                max_pot = max_pot.max(p);
            }
        }
    }
    checks.push(
        "potential maximum principle",
        "p_mu <= I(mu) everywhere",
        max_pot,
        base.energy,
        0.02 * base.energy,
        max_pot <= 1.02 * base.energy,
    );

    // Normalized potential mass bound on a small obstacle in the unit ball.
    {
        let k_sample = crate::geometry::CompactSample::sphere_surface(
            crate::vec3::ZERO,
            0.1,
            budget.min(400),
        );
        let field = normalized_potential(&k_sample, 3, &opts)?;
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(
            config.seed ^ 0x60,
        );
        let mut acc = 0.0;
        let samples = 200_000;
        let mut count = 0usize;
        while count < samples {
            let p = Vec3::new(
                rand::Rng::gen_range(&mut rng, -1.0..1.0),
                rand::Rng::gen_range(&mut rng, -1.0..1.0),
                rand::Rng::gen_range(&mut rng, -1.0..1.0),
            );
            if p.norm() < 1.0 {
                acc += field.eval(p);
                count += 1;
            }
        }
        let ball_volume = 4.0 / 3.0 * std::f64::consts::PI;
        let integral = acc / samples as f64 * ball_volume;
        let bound = 8.0 * std::f64::consts::PI / (1.0 / 0.1);
        checks.push(
            "normalized potential mass",
            "integral of g over B <= 2 c_n / I(nu)",
            integral,
            bound,
            0.05 * bound,
            integral <= bound * 1.05,
        );
    }

    // --- eigenvalue laws ---
    let bounded = spectral_ready(scene);
    let eig_scene = if bounded { scene.clone() } else { Scene::unit_ball() };
    let law = spectral::law_checks(&eig_scene, 2.0, Vec3::new(0.3, 0.1, -0.2), config.h)?;
    for rec in &law.records {
        let anchor = match rec.name {
            "scaling r^2 lambda1(rD) = lambda1(D)" => "r^2 lambda1(rD) = lambda1(D)",
            "monotonicity lambda1(D) <= lambda1(D') for D' in D" => {
                "D' in D implies lambda1(D) <= lambda1(D')"
            }
            "translation lambda1(D + x) = lambda1(D)" => "lambda1(D + x) = lambda1(D)",
            _ => "polar sets leave lambda1 unchanged",
        };
        checks.push(rec.name, anchor, rec.lhs, rec.rhs, rec.tolerance, rec.pass);
    }

    // Sharp upper bound via the strict inradius.
    let ub = inradius::verify_upper_bound(
        &eig_scene,
        &config.eps_ladder,
        config.h,
        &InradiusOptions { seed: config.seed, ..Default::default() },
    )?;
    checks.push(
        "sharp upper bound",
        "lambda1(D) <= lambda1(B) / rho^2",
        ub.lambda1,
        ub.bound,
        0.05 * ub.bound,
        ub.pass,
    );

    // Eigenvalue continuity under vanishing obstacles.
    let cont = spectral::eigenvalue_continuity_experiment(
        &[0.2, 0.1],
        crate::vec3::ZERO,
        config.h,
        config.seed,
    )?;
    let last = cont.steps.last().expect("nonempty radii");
    checks.push(
        "eigenvalue continuity",
        "cap(K_j) -> 0 implies lambda1(B minus K_j) -> lambda1(B)",
        last.gap,
        0.05 * cont.lambda_ball,
        0.0,
        cont.pass(),
    );

    // --- certificate chain on the canonical periodic scene ---
    {
        let lattice = Scene::with_root(
            SceneNode::complement(SceneNode::LatticeBalls {
                spacing: 2.0,
                radius: 0.25,
                truncation: 5,
                origin: None,
                radius_mode: crate::geometry::LatticeRadiusMode::Constant,
            }),
            Aabb::new(Vec3::splat(-3.0), Vec3::splat(3.0)),
        );
        let cert_config = CertificateConfig {
            half_period: 1.0,
            shells: 3,
            exponent_scale: 4.0,
            budget: 200,
            seed: config.seed,
        };
        let cert = subharmonic::build_certificate(&lattice, &cert_config)?;
        let (hormander, lee) = subharmonic::lambda1_lower_bounds(&cert)?;
        checks.push(
            "certificate floor",
            "lap(phi) >= c > 0 on D",
            cert.laplacian_floor_c,
            0.0,
            0.0,
            cert.laplacian_floor_c > 0.0,
        );
        checks.push(
            "ratio bound dominates",
            "c / (M~ - m) >= c e^(m - M_phi)",
            lee,
            hormander,
            0.0,
            lee >= hormander,
        );
        // The bounds must sit below the eigenvalue of a bounded truncation.
        let trunc = Scene::with_root(
            SceneNode::intersection(vec![
                lattice.root.clone(),
                SceneNode::cuboid(Vec3::splat(-3.0), Vec3::splat(3.0)),
            ]),
            Aabb::new(Vec3::splat(-3.2), Vec3::splat(3.2)),
        );
        let lambda_trunc = spectral::lambda1_at(&trunc, 1.0 / 6.0)?;
        checks.push(
            "lower bounds below truncation",
            "lambda1(D) <= lambda1(D_trunc) for D_trunc in D",
            lee.max(hormander),
            lambda_trunc,
            0.0,
            lee.max(hormander) <= lambda_trunc,
        );

        // Quadrature identities on the certificate field.
        let grid_scene = Scene::with_root(lattice.root.clone(), Aabb::new(Vec3::splat(-1.0), Vec3::splat(1.0)));
        let grid = build_grid(&grid_scene, 1.0 / 12.0)?;
        let field = subharmonic::FieldOnGrid::from_certificate(grid, &cert);
        let bumps = subharmonic::random_bumps(&field, 20, config.seed ^ 0xb0b, BumpKind::Smooth);
        if bumps.len() < 20 {
            return Err(Error::Numerical("could not place twenty test bumps".into()));
        }
        let ineq = subharmonic::verify_twisted_inequality(
            &field,
            cert.upper_bound_m_phi,
            &bumps,
            0.02,
        )?;
        let worst_ratio = ineq
            .records
            .iter()
            .map(|r| r.lhs / r.rhs.max(1e-300))
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(
            "weighted inequality",
            "integral of lap(phi) w^2 e^(phi - M) <= integral of |grad w|^2",
            worst_ratio,
            1.0,
            0.02,
            ineq.pass(),
        );
        let lee_rep = subharmonic::verify_lee_identity(&field, &bumps, 0.02)?;
        let worst = lee_rep
            .records
            .iter()
            .map(|r| r.relative_mismatch)
            .fold(0.0f64, f64::max);
        checks.push(
            "ratio identity",
            "integral of (w^2 lap(phi)/phi + |grad w|^2) = norm(phi grad(w/phi))^2",
            worst,
            0.02,
            0.0,
            lee_rep.pass(),
        );
    }

    let pass = checks.records.iter().all(|r| r.pass);
    Ok(Report::Verify(VerifyReport { records: checks.records, pass }))
}

/// Scenes whose interior fits the box are eigenvalue-ready; complements of
/// lattices are handled through their truncations.
fn spectral_ready(scene: &Scene) -> bool {
    let bbox = scene.root.bbox();
    bbox.is_finite() && !bbox.is_empty()
}
