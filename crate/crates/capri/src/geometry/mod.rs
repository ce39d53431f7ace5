//! Constructive geometry: scenes, grids, compact-set sampling, and the
//! smooth-union and smooth-envelope constructions.
//!
//! Everything here is pure and reentrant; evaluations over many points are
//! data-parallel with no shared mutable state.

mod grid;
mod sample;
mod scene;
mod smooth;

pub use grid::{build_grid, Grid};
pub use sample::{sample_compact, CompactSample};
pub use scene::{LatticeRadiusMode, Scene, SceneNode};
pub use smooth::{
    bump, chi, cube_index, lattice_cube, smooth_envelope, smooth_union,
    DefiningFunctionPair,
};
