//! Finite-difference verification of the analytic backward pass.
//!
//! The renderer is only piecewise smooth (the min in the eccentricity, the
//! opacity clamp and cutoff, depth-order flips). A central difference whose
//! stencil straddles a kink does not estimate the derivative, so each
//! coordinate is refined by halving the step until two successive estimates
//! agree. Coordinates that never settle are reported as unresolved.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, UnitSphere};
use rayon::prelude::*;
use serde::Serialize;

use crate::camera::Camera;
use crate::error::Result;
use crate::image::Image;
use crate::raster::{render, render_backward, ParamGrads, PixelGrads, RenderOutput, RenderSettings};
use crate::scene::{unsquash_opacity, SceneModel, TrianglePrimitive};
use crate::sh::num_coeffs;
use crate::Vec3;

/// Default relative tolerance between analytic and FD gradients.
pub const GRADCHECK_REL_TOL: f64 = 1e-3;
/// Coordinates with an absolute error below this pass regardless.
pub const GRADCHECK_ABS_TOL: f64 = 1e-7;
/// Base step for non-vertex parameters; vertices use this times the scene extent.
pub const FD_STEP: f64 = 1e-4;
const MAX_HALVINGS: usize = 12;
const AGREE_REL: f64 = 1e-4;
const AGREE_ABS: f64 = 1e-8;

/// Number of scalar parameters of a primitive.
pub fn param_count(prim: &TrianglePrimitive) -> usize {
    10 + 3 * prim.sh_coeffs.len()
}

/// Flattened parameters, in the same order as [`ParamGrads::flatten`].
pub fn flatten_params(scene: &SceneModel) -> Vec<f64> {
    let mut out = Vec::new();
    for p in &scene.primitives {
        for v in &p.vertices {
            out.extend_from_slice(v.as_slice());
        }
        out.push(p.opacity_param);
        for c in &p.sh_coeffs {
            out.extend_from_slice(c);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    Vertex,
    Opacity,
    Sh,
}

/// Mutable access to the `index`-th flattened parameter.
pub fn param_mut(scene: &mut SceneModel, mut index: usize) -> (&mut f64, ParamKind) {
    for p in &mut scene.primitives {
        let n = param_count(p);
        if index < n {
            return if index < 9 {
                (&mut p.vertices[index / 3][index % 3], ParamKind::Vertex)
            } else if index == 9 {
                (&mut p.opacity_param, ParamKind::Opacity)
            } else {
                let k = index - 10;
                (&mut p.sh_coeffs[k / 3][k % 3], ParamKind::Sh)
            };
        }
        index -= n;
    }
    panic!("parameter index out of range");
}

/// Central difference of each component of `f` along parameter `index`.
pub fn central_difference<const N: usize>(
    scene: &SceneModel,
    f: &(impl Fn(&SceneModel) -> [f64; N] + Sync),
    index: usize,
    h: f64,
) -> [f64; N] {
    let mut plus = scene.clone();
    *param_mut(&mut plus, index).0 += h;
    let mut minus = scene.clone();
    *param_mut(&mut minus, index).0 -= h;
    let (fp, fm) = (f(&plus), f(&minus));
    std::array::from_fn(|k| (fp[k] - fm[k]) / (2.0 * h))
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdGradient {
    pub values: Vec<f64>,
    /// True where refinement never produced two agreeing estimates.
    pub unresolved: Vec<bool>,
}

fn agree(a: f64, b: f64) -> bool {
    (a - b).abs() <= AGREE_REL * a.abs().max(b.abs()) + AGREE_ABS
}

/// Step-refined central differences of every component of `f`. Never looks at
/// the analytic gradient.
pub fn finite_difference_oracle<const N: usize>(
    scene: &SceneModel,
    f: impl Fn(&SceneModel) -> [f64; N] + Sync,
) -> [FdGradient; N] {
    let total = flatten_params(scene).len();
    let vertex_h = FD_STEP * scene.scene_extent.max(1e-12);
    let per_coord: Vec<([f64; N], [bool; N])> = (0..total)
        .into_par_iter()
        .map(|j| {
            let kind = param_mut(&mut scene.clone(), j).1;
            let mut h = if kind == ParamKind::Vertex { vertex_h } else { FD_STEP };
            let mut prev = central_difference(scene, &f, j, h);
            let mut out = prev;
            let mut done = [false; N];
            for _ in 0..MAX_HALVINGS {
                h *= 0.5;
                let next = central_difference(scene, &f, j, h);
                for k in 0..N {
                    if !done[k] {
                        if agree(prev[k], next[k]) {
                            out[k] = prev[k];
                            done[k] = true;
                        } else {
                            out[k] = next[k];
                        }
                    }
                }
                if done.iter().all(|d| *d) {
                    break;
                }
                prev = next;
            }
            (out, done.map(|d| !d))
        })
        .collect();
    std::array::from_fn(|k| FdGradient {
        values: per_coord.iter().map(|c| c.0[k]).collect(),
        unresolved: per_coord.iter().map(|c| c.1[k]).collect(),
    })
}

/// A random scene small enough for exhaustive finite differences.
#[derive(Clone, Debug)]
pub struct GradcheckScene {
    pub scene: SceneModel,
    pub camera: Camera,
    pub settings: RenderSettings,
    pub target: Image,
    pub depth_weights: Image,
    pub normal_weights: Image,
}

pub const GRADCHECK_GAMMAS: [f64; 3] = [1.0, 3.0, 10.0];

pub fn random_gradcheck_scene(seed: u64) -> Result<GradcheckScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = 32;
    let eye = Vec3::from(UnitSphere.sample(&mut rng)) * 4.0;
    let up = if eye.normalize().y.abs() < 0.9 { Vec3::y() } else { Vec3::x() };
    let camera = Camera::look_at(eye, Vec3::zeros(), up, size, size, 60f64.to_radians())?;
    let sh_degree = (seed % 4) as usize;
    let gamma = GRADCHECK_GAMMAS[(seed % 3) as usize];
    let count = 1 + rng.random_range(0..10);

    let mut depths: Vec<f64> = Vec::new();
    let mut prims = Vec::new();
    let mut attempts = 0;
    while prims.len() < count && attempts < 1000 {
        attempts += 1;
        let center = Vec3::new(rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8));
        let z = camera.to_view(&center).z;
        if depths.iter().any(|d| (d - z).abs() < 0.05) {
            continue;
        }
        let vertices: [Vec3; 3] = std::array::from_fn(|_| {
            let dir = Vec3::from(UnitSphere.sample(&mut rng));
            center + dir * rng.random_range(0.3..0.8)
        });
        let c = crate::scene::barycenter(&vertices);
        let vertices = vertices.map(|v| v - c + center);
        let opacity = rng.random_range(0.2..0.995);
        let rgb = [rng.random(), rng.random(), rng.random()];
        let mut prim = TrianglePrimitive::new(vertices, opacity, rgb, sh_degree);
        for coeff in prim.sh_coeffs.iter_mut().skip(1) {
            for v in coeff.iter_mut() {
                let n: f64 = StandardNormal.sample(&mut rng);
                *v = 0.15 * n;
            }
        }
        prim.opacity_param = unsquash_opacity(opacity);
        depths.push(z);
        prims.push(prim);
    }
    let extent = SceneModel::extent_of(prims.iter().flat_map(|p| p.vertices));
    let scene = SceneModel::new(prims, gamma, sh_degree, extent)?;
    let background = [rng.random(), rng.random(), rng.random()];
    let settings = RenderSettings { background, sh_degree, ..Default::default() };
    let mut random_image = |channels: usize, lo: f64, hi: f64| {
        let data = (0..size * size * channels).map(|_| rng.random_range(lo..hi)).collect();
        Image::from_vec(size, size, channels, data)
    };
    let target = random_image(3, 0.0, 1.0)?;
    let depth_weights = random_image(1, -1.0, 1.0)?;
    let normal_weights = random_image(3, -1.0, 1.0)?;
    debug_assert!(num_coeffs(sh_degree) == scene.primitives.first().map_or(num_coeffs(sh_degree), |p| p.sh_coeffs.len()));
    Ok(GradcheckScene { scene, camera, settings, target, depth_weights, normal_weights })
}

pub const LOSS_NAMES: [&str; 3] = ["l1-color", "depth-sum", "normal-sum"];

impl GradcheckScene {
    /// `[summed L1 color, weighted depth sum, weighted normal sum]` of one render.
    pub fn losses_of(&self, out: &RenderOutput) -> [f64; 3] {
        let l1 = out.color.data.iter().zip(&self.target.data).map(|(a, b)| (a - b).abs()).sum::<f64>();
        let dot = |a: &Image, b: &Image| a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum::<f64>();
        [l1, dot(&out.depth, &self.depth_weights), dot(&out.normal, &self.normal_weights)]
    }

    pub fn losses(&self, scene: &SceneModel) -> [f64; 3] {
        self.losses_of(&render(scene, &self.camera, &self.settings))
    }

    /// Analytic gradients of the three losses.
    pub fn analytic(&self) -> Result<[ParamGrads; 3]> {
        let settings = RenderSettings { training: true, ..self.settings.clone() };
        let out = render(&self.scene, &self.camera, &settings);
        let records = out.records.as_ref().expect("training render keeps records");
        let (w, h) = (self.camera.width, self.camera.height);

        let mut g_color = PixelGrads::zeros(w, h);
        for ((g, a), b) in g_color.color.data.iter_mut().zip(&out.color.data).zip(&self.target.data) {
            *g = if a > b {
                1.0
            } else if a < b {
                -1.0
            } else {
                0.0
            };
        }
        let mut g_depth = PixelGrads::zeros(w, h);
        g_depth.depth = self.depth_weights.clone();
        let mut g_normal = PixelGrads::zeros(w, h);
        g_normal.normal = self.normal_weights.clone();
        Ok([
            render_backward(&self.scene, &self.camera, &g_color, records)?,
            render_backward(&self.scene, &self.camera, &g_depth, records)?,
            render_backward(&self.scene, &self.camera, &g_normal, records)?,
        ])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossCheck {
    pub loss: &'static str,
    pub coordinates: usize,
    /// Coordinates outside both tolerances.
    pub failures: usize,
    pub unresolved: usize,
    /// Largest relative error among coordinates above the absolute tolerance.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub seed: u64,
    pub gamma: f64,
    pub sh_degree: usize,
    pub primitives: usize,
    pub checks: Vec<LossCheck>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.failures == 0)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max)
    }

    pub fn unresolved(&self) -> usize {
        self.checks.iter().map(|c| c.unresolved).sum()
    }
}

pub fn compare(
    loss: &'static str,
    analytic: &[f64],
    fd: &FdGradient,
    rel_tol: f64,
    abs_tol: f64,
) -> LossCheck {
    let mut check =
        LossCheck { loss, coordinates: analytic.len(), failures: 0, unresolved: 0, max_rel_error: 0.0, max_abs_error: 0.0 };
    for ((a, f), unresolved) in analytic.iter().zip(&fd.values).zip(&fd.unresolved) {
        if *unresolved {
            check.unresolved += 1;
            continue;
        }
        let abs = (a - f).abs();
        check.max_abs_error = check.max_abs_error.max(abs);
        if abs < abs_tol {
            continue;
        }
        let rel = abs / a.abs().max(f.abs());
        check.max_rel_error = check.max_rel_error.max(rel);
        if rel >= rel_tol {
            check.failures += 1;
        }
    }
    check
}

/// Analytic vs finite-difference gradients on the random scene for `seed`.
pub fn run_gradcheck(seed: u64) -> Result<GradcheckReport> {
    let gc = random_gradcheck_scene(seed)?;
    let analytic = gc.analytic()?;
    let fd = finite_difference_oracle(&gc.scene, |s| gc.losses(s));
    let checks = (0..3)
        .map(|k| compare(LOSS_NAMES[k], &analytic[k].flatten(), &fd[k], GRADCHECK_REL_TOL, GRADCHECK_ABS_TOL))
        .collect();
    Ok(GradcheckReport {
        seed,
        gamma: gc.scene.gamma(),
        sh_degree: gc.scene.sh_degree,
        primitives: gc.scene.len(),
        checks,
    })
}
