//! Differentiable 2D triangle splatting.
//!
//! Triangle facelets with a generalized-exponential opacity falloff are
//! projected to screen space, alpha blended by a tile-based software
//! rasterizer, and optimized with analytic gradients. Annealing the
//! compactness parameter turns the soft splats into a solid triangle mesh
//! that can be exported directly.

pub mod camera;
pub mod dataset;
pub mod error;
pub mod gradcheck;
pub mod image;
pub mod losses;
pub mod mesh;
pub mod metrics;
pub mod projection;
pub mod raster;
pub mod scene;
pub mod sh;
pub mod synthetic;
pub mod train;

pub use camera::Camera;
pub use error::{Error, Result};
pub use image::Image;
pub use raster::{render, render_backward, ParamGrads, PixelGrads, RenderOutput, RenderSettings};
pub use scene::{SceneModel, TrianglePrimitive};

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
