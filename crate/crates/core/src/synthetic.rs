//! Procedural ground-truth scenes and their rendered datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::camera::Camera;
use crate::dataset::{PosedImage, PosedImageDataset};
use crate::error::{Error, Result};
use crate::raster::{render, RenderSettings};
use crate::scene::{SceneModel, TrianglePrimitive, SATURATED_OPACITY};
use crate::sh::rgb_to_dc;
use crate::train::TrainConfig;
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticKind {
    /// Textured square plate in the XZ plane, seen from the upper hemisphere.
    Plate,
    /// Small facets tangent to a unit sphere, seen from all around.
    Sphere,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub primitives: usize,
    pub cameras: usize,
    pub width: usize,
    pub height: usize,
    /// Horizontal field of view in degrees.
    pub fov_x_deg: f64,
    pub camera_distance: f64,
    /// Every n-th camera goes to the test split (0 keeps all for training).
    pub holdout_every: usize,
    pub gamma: f64,
    pub background: [f64; 3],
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            kind: SyntheticKind::Plate,
            primitives: 200,
            cameras: 30,
            width: 128,
            height: 128,
            fov_x_deg: 50.0,
            camera_distance: 4.0,
            holdout_every: 8,
            gamma: 50.0,
            background: [0.0; 3],
            seed: 0,
        }
    }
}

/// Independent random face colors, so that every shared edge is visible.
fn random_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    std::array::from_fn(|_| rng.random_range(0.05..0.95))
}

fn plate_primitives(count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<TrianglePrimitive>> {
    let g = ((count as f64 / 2.0).sqrt().round() as usize).max(1);
    if 2 * g * g != count {
        return Err(Error::InvalidInput(format!("plate needs 2·g² primitives, got {count}")));
    }
    let cell = 2.0 / g as f64;
    let mut prims = Vec::with_capacity(count);
    for j in 0..g {
        for i in 0..g {
            let (x0, z0) = (-1.0 + i as f64 * cell, -1.0 + j as f64 * cell);
            let (x1, z1) = (x0 + cell, z0 + cell);
            let p = |x: f64, z: f64| Vec3::new(x, 0.0, z);
            // both windings give normals along −y
            for tri in [[p(x0, z0), p(x1, z0), p(x0, z1)], [p(x1, z0), p(x1, z1), p(x0, z1)]] {
                prims.push(TrianglePrimitive::new(tri, SATURATED_OPACITY, random_color(rng), 0));
            }
        }
    }
    Ok(prims)
}

fn sphere_primitives(count: usize, rng: &mut ChaCha8Rng) -> Vec<TrianglePrimitive> {
    let radius = (4.0 * std::f64::consts::PI / count as f64).sqrt() * 0.9;
    (0..count)
        .map(|_| {
            let n = Vec3::from(UnitSphere.sample(rng));
            let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
            let u = n.cross(&helper).normalize();
            let v = n.cross(&u);
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let vert = |k: usize| {
                let a = theta + k as f64 * std::f64::consts::TAU / 3.0;
                n + (u * a.cos() + v * a.sin()) * radius
            };
            let rgb = [0.5 + 0.4 * n.x, 0.5 + 0.4 * n.y, 0.5 + 0.4 * n.z];
            TrianglePrimitive::new([vert(0), vert(1), vert(2)], SATURATED_OPACITY, rgb, 0)
        })
        .collect()
}

fn camera_positions(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<(Vec3, Vec3)> {
    (0..spec.cameras)
        .map(|i| {
            let azimuth = (i as f64 + rng.random::<f64>() * 0.5) * std::f64::consts::TAU * 0.618_034;
            let (dir, up) = match spec.kind {
                SyntheticKind::Plate => {
                    let elev = (25.0 + 50.0 * rng.random::<f64>()).to_radians();
                    (Vec3::new(elev.cos() * azimuth.cos(), elev.sin(), elev.cos() * azimuth.sin()), Vec3::y())
                }
                SyntheticKind::Sphere => {
                    let d = Vec3::from(UnitSphere.sample(rng));
                    let up = if d.y.abs() < 0.95 { Vec3::y() } else { Vec3::x() };
                    (d, up)
                }
            };
            (dir * spec.camera_distance, up)
        })
        .collect()
}

/// Builds the ground-truth scene and renders every camera of the spec.
pub fn make_synthetic_scene(spec: &SyntheticSpec) -> Result<(SceneModel, PosedImageDataset)> {
    if spec.primitives == 0 || spec.cameras == 0 {
        return Err(Error::InvalidInput("synthetic spec needs primitives and cameras".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let prims = match spec.kind {
        SyntheticKind::Plate => plate_primitives(spec.primitives, &mut rng)?,
        SyntheticKind::Sphere => sphere_primitives(spec.primitives, &mut rng),
    };
    let extent = SceneModel::extent_of(prims.iter().flat_map(|p| p.vertices));
    let scene = SceneModel::new(prims, spec.gamma, 0, extent)?;
    let settings = RenderSettings { background: spec.background, sh_degree: 0, ..Default::default() };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, (eye, up)) in camera_positions(spec, &mut rng).into_iter().enumerate() {
        let camera = Camera::look_at(eye, Vec3::zeros(), up, spec.width, spec.height, spec.fov_x_deg.to_radians())?;
        let image = render(&scene, &camera, &settings).color;
        let view = PosedImage { name: format!("view_{i:03}"), image, camera };
        if spec.holdout_every > 0 && i % spec.holdout_every == 0 {
            test.push(view);
        } else {
            train.push(view);
        }
    }
    Ok((scene, PosedImageDataset { train, test, background: spec.background }))
}

/// Jitter used for the self-reconstruction run, as a fraction of the extent.
pub const FIXTURE_JITTER: f64 = 0.05;
pub const FIXTURE_INIT_OPACITY: f64 = 0.9;

/// Training schedule for reconstructing a plate fixture from a jittered copy.
///
/// Differs from the defaults where a 6k-step budget on an exactly tessellated
/// plate needs it: a short soft phase starting at γ = 5 (at γ = 1 the blobs
/// overlap so much that facets get stranded), a faster color rate because the
/// jittered copy starts from random colors, and a larger vertex step.
pub fn fixture_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        stage_iters: [500, 2500, 3000],
        gamma_start: 5.0,
        lr_vertices: 1e-3,
        lr_vertices_final: 1e-5,
        lr_sh_dc: 1e-2,
        sh_degree: 0,
        init_opacity: FIXTURE_INIT_OPACITY,
        log_interval: 500,
        test_interval: 1000,
        seed,
        ..TrainConfig::default()
    }
}

/// Copy of `scene` with every vertex moved by `fraction · extent` in a random
/// direction, random base colors and a uniform opacity.
pub fn perturbed_scene(scene: &SceneModel, fraction: f64, opacity: f64, gamma: f64, seed: u64) -> Result<SceneModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = fraction * scene.scene_extent;
    let prims = scene
        .primitives
        .iter()
        .map(|p| {
            let vertices = p.vertices.map(|v| v + Vec3::from(UnitSphere.sample(&mut rng)) * step);
            let rgb = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            let mut out = TrianglePrimitive::new(vertices, opacity, rgb, scene.sh_degree);
            out.sh_coeffs[0] = rgb_to_dc(rgb);
            out
        })
        .collect();
    SceneModel::new(prims, gamma, scene.sh_degree, scene.scene_extent)
}
