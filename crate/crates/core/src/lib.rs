//! Left-atrium shape synthesis, catheter-path synthesis and reconstruction of
//! the full atrium occupancy volume from a sparse path with a tied-weight
//! dense encoder-decoder.
//!
//! The crate is organized bottom-up:
//!
//! * [`grid`] and [`volume`]: occupancy volumes, scalar fields, distance
//!   transforms, marching cubes.
//! * [`mesh`]: triangle meshes, landmark sliding and rigid registration.
//! * [`shapegen`]: the parametric atrium generator and dataset writer.
//! * [`pathgen`]: catheter path synthesis on a distance-weighted voxel graph.
//! * [`ded`]: the dense encoder-decoder, its losses and training loop.
//! * [`eval`]: DICE, boundary distances and the mean-shape comparison.
//! * [`pipeline`]: the reproducible end-to-end commands behind the `atrium` binary.

pub mod ded;
pub mod error;
pub mod eval;
pub mod grid;
pub mod io;
pub mod mesh;
pub mod pathgen;
pub mod pipeline;
pub mod shapegen;
pub mod volume;

pub use error::{Error, Result};
pub use grid::{GridSpec, OccupancyVolume, ScalarField, Voxel, VoxelSet};
pub use mesh::{Landmarks, RigidTransform, TriMesh};
