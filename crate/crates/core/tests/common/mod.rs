#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trisplat_core::{Camera, SceneModel, TrianglePrimitive, Vec3};

pub fn orbit_camera(seed: u64, width: usize, height: usize) -> Camera {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xca3e);
    let az: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let el: f64 = rng.random_range(-0.8..0.8);
    let eye = Vec3::new(el.cos() * az.cos(), el.sin(), el.cos() * az.sin()) * 4.0;
    Camera::look_at(eye, Vec3::zeros(), Vec3::y(), width, height, 55f64.to_radians()).unwrap()
}

/// Random triangles around the origin with random opacity, color and SH.
pub fn random_scene(seed: u64, count: usize, gamma: f64, sh_degree: usize) -> SceneModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prims = (0..count)
        .map(|_| {
            let c = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let v: [Vec3; 3] = std::array::from_fn(|_| {
                c + Vec3::new(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6))
            });
            let rgb = [rng.random(), rng.random(), rng.random()];
            let mut p = TrianglePrimitive::new(v, rng.random_range(0.05..0.99), rgb, sh_degree);
            for coeff in p.sh_coeffs.iter_mut().skip(1) {
                for x in coeff.iter_mut() {
                    *x = rng.random_range(-0.2..0.2);
                }
            }
            p
        })
        .collect::<Vec<_>>();
    let extent = SceneModel::extent_of(prims.iter().flat_map(|p| p.vertices));
    SceneModel::new(prims, gamma, sh_degree, extent).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
