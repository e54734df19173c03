//! Tile-based splatting rasterizer and its analytic backward pass.

mod backward;
mod forward;
pub mod reference;

pub use backward::{render_backward, ParamGrads, PixelGrads};
pub use forward::{
    compute_barycentric, eccentricity, eccentricity_opacity, fragment_opacity, level_set_bound, level_set_extent,
    project_scene, render, Aabb, OpacityMode, RenderOutput, RenderRecords, RenderSettings,
    TileBinning, MAX_FRAGMENT_ALPHA, MIN_FRAGMENT_ALPHA, NORMAL_EPS, TILE_SIZE, TRANSMITTANCE_EPS,
};
