//! Potential-theoretic numerics for open sets in R^n, n >= 3 (geometry in
//! R^3): Newtonian capacities and equilibrium measures, smallest Dirichlet
//! eigenvalues, capacity inradii, and bounded strictly-subharmonic
//! certificate functions with the eigenvalue bounds they witness.
//!
//! The pieces fit together like this:
//!
//! * [`geometry`] describes open sets constructively (balls, boxes,
//!   halfspaces, lattices, booleans, punctures), builds grids, and
//!   discretizes compact sets into quadrature point clouds.
//! * [`capacity`] minimizes the discrete Coulomb energy over the probability
//!   simplex to obtain equilibrium measures, capacities, and potentials.
//! * [`spectral`] computes the smallest Dirichlet eigenvalue on a grid with
//!   Richardson extrapolation and checks the eigenvalue laws.
//! * [`inradius`] estimates the classical inradius, the capacity inradius,
//!   and the strict capacity inradius curve, and verifies the sharp
//!   eigenvalue upper bound.
//! * [`subharmonic`] builds the bounded strictly-subharmonic certificate from
//!   per-cube equilibrium potentials and derives eigenvalue lower bounds.
//! * [`cli`] dispatches the command-line subcommands and serializes reports.
//!
//! Every stochastic step is seeded; identical configurations produce
//! byte-identical outputs.

pub mod capacity;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod inradius;
pub mod report;
pub mod spectral;
pub mod subharmonic;
pub mod vec3;

pub use error::{Error, Result};
pub use geometry::{Scene, SceneNode};
pub use vec3::{Aabb, Vec3};
