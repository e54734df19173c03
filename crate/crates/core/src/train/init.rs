use kiddo::{ImmutableKdTree, SquaredEuclidean};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};

use crate::error::{Error, Result};
use crate::scene::{SceneModel, TrianglePrimitive};
use crate::Vec3;

/// Smallest barycenter-to-vertex distance, relative to the scene extent,
/// used when two points coincide.
const MIN_INIT_RADIUS: f64 = 1e-4;

/// One equilateral triangle per point, centered on it, with a random normal
/// and in-plane rotation. The circumradius is `scale` times the distance to the
/// nearest other point.
pub fn init_from_point_cloud(
    points: &[Vec3],
    colors: &[[f64; 3]],
    opacity: f64,
    scale: f64,
    sh_degree: usize,
    seed: u64,
) -> Result<SceneModel> {
    if points.len() < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 points, got {}", points.len())));
    }
    if colors.len() != points.len() {
        return Err(Error::ShapeMismatch(format!("{} points but {} colors", points.len(), colors.len())));
    }
    let extent = SceneModel::extent_of(points.iter().copied());
    let coords: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
    let tree: ImmutableKdTree<f64, 3> = ImmutableKdTree::new_from_slice(&coords);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut primitives = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let nn = tree
            .nearest_n::<SquaredEuclidean>(&coords[i], std::num::NonZero::new(2).unwrap())
            .into_iter()
            .find(|n| n.item as usize != i)
            .map(|n| n.distance.sqrt())
            .unwrap_or(0.0);
        let radius = scale * nn.max(MIN_INIT_RADIUS * extent.max(f64::MIN_POSITIVE));

        let n: [f64; 3] = UnitSphere.sample(&mut rng);
        let n = Vec3::from(n);
        let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let u = n.cross(&helper).normalize();
        let v = n.cross(&u);
        let theta: f64 = rng.random::<f64>() * std::f64::consts::TAU;
        let offset = |k: usize| {
            let a = theta + k as f64 * std::f64::consts::TAU / 3.0;
            (u * a.cos() + v * a.sin()) * radius
        };
        let (o0, o1) = (offset(0), offset(1));
        let o2 = -(o0 + o1);
        primitives.push(TrianglePrimitive::new([p + o0, p + o1, p + o2], opacity, colors[i], sh_degree));
    }
    SceneModel::new(primitives, 1.0, sh_degree, extent)
}
