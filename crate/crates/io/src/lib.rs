//! File formats around the trisplat core: NeRF-synthetic datasets, PLY point
//! clouds, scene snapshots, GLB meshes, PNG images and run configuration.

pub mod config;
pub mod error;
pub mod glb;
pub mod metrics_log;
pub mod nerf;
pub mod png;
pub mod point_cloud;
pub mod snapshot;

pub use error::{IoError, Result};
