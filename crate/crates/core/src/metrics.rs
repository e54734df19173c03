//! Image and geometry quality metrics.

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::mesh::MeshAsset;
use crate::Vec3;

/// Reported for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    a.check_same_shape(b)?;
    if a.data.is_empty() {
        return Ok(PSNR_CAP_DB);
    }
    let mse = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.data.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((-10.0 * mse.log10()).min(PSNR_CAP_DB))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChamferReport {
    /// Average of the two directional means.
    pub mean: f64,
    pub a_to_b: f64,
    pub b_to_a: f64,
    pub samples_a: usize,
    pub samples_b: usize,
}

/// Area-uniform random points on the mesh surface.
pub fn sample_surface(mesh: &MeshAsset, count: usize, seed: u64) -> Result<Vec<[f64; 3]>> {
    if mesh.is_empty() {
        return Err(Error::InvalidInput("cannot sample an empty mesh".into()));
    }
    let areas: Vec<f64> = mesh.faces.iter().map(|f| f.area()).collect();
    let pick = WeightedIndex::new(&areas)
        .map_err(|e| Error::InvalidInput(format!("mesh has no sampleable area: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let [a, b, c] = &mesh.faces[pick.sample(&mut rng)].vertices;
            let r1: f64 = rng.random::<f64>().sqrt();
            let r2: f64 = rng.random();
            let p: Vec3 = a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2);
            [p.x, p.y, p.z]
        })
        .collect())
}

fn mean_nearest(from: &[[f64; 3]], to: &[[f64; 3]]) -> f64 {
    let tree: ImmutableKdTree<f64, 3> = ImmutableKdTree::new_from_slice(to);
    let dists: Vec<f64> =
        from.par_iter().map(|q| tree.nearest_one::<SquaredEuclidean>(q).distance.sqrt()).collect();
    dists.iter().sum::<f64>() / dists.len() as f64
}

/// Symmetric sample-to-sample Chamfer distance. Both meshes are sampled with
/// the same seed, so the result is symmetric in its arguments.
pub fn chamfer_distance(a: &MeshAsset, b: &MeshAsset, samples_per_mesh: usize, seed: u64) -> Result<ChamferReport> {
    if samples_per_mesh == 0 {
        return Err(Error::InvalidInput("chamfer needs at least one sample".into()));
    }
    let pa = sample_surface(a, samples_per_mesh, seed)?;
    let pb = sample_surface(b, samples_per_mesh, seed)?;
    let a_to_b = mean_nearest(&pa, &pb);
    let b_to_a = mean_nearest(&pb, &pa);
    Ok(ChamferReport {
        mean: 0.5 * (a_to_b + b_to_a),
        a_to_b,
        b_to_a,
        samples_a: pa.len(),
        samples_b: pb.len(),
    })
}

/// Symmetric Chamfer distance between explicit point sets (same convention).
pub fn chamfer_points(pa: &[[f64; 3]], pb: &[[f64; 3]]) -> Result<f64> {
    if pa.is_empty() || pb.is_empty() {
        return Err(Error::InvalidInput("chamfer of an empty point set".into()));
    }
    Ok(0.5 * (mean_nearest(pa, pb) + mean_nearest(pb, pa)))
}
