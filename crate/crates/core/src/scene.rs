//! The primitive soup: triangle facelets plus the global compactness.

use crate::error::{Error, Result};
use crate::sh::{num_coeffs, MAX_SH_DEGREE};
use crate::Vec3;

/// Opacity used to represent "fully opaque" under the sigmoid squash.
pub const SATURATED_OPACITY: f64 = 0.9999;

#[inline]
pub fn squash_opacity(param: f64) -> f64 {
    1.0 / (1.0 + (-param).exp())
}

/// Inverse of [`squash_opacity`] for `o` in (0, 1).
#[inline]
pub fn unsquash_opacity(o: f64) -> f64 {
    (o / (1.0 - o)).ln()
}

/// One optimizable triangle facelet.
///
/// The stored vertices describe the solid (γ → ∞) triangle. Barycenter and
/// offsets are derived on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct TrianglePrimitive {
    pub vertices: [Vec3; 3],
    pub opacity_param: f64,
    /// One RGB triple per SH basis function, `(D + 1)²` entries.
    pub sh_coeffs: Vec<[f64; 3]>,
}

impl TrianglePrimitive {
    pub fn new(vertices: [Vec3; 3], opacity: f64, rgb: [f64; 3], sh_degree: usize) -> Self {
        let mut sh_coeffs = vec![[0.0; 3]; num_coeffs(sh_degree)];
        sh_coeffs[0] = crate::sh::rgb_to_dc(rgb);
        Self { vertices, opacity_param: unsquash_opacity(opacity), sh_coeffs }
    }

    #[inline]
    pub fn barycenter(&self) -> Vec3 {
        barycenter(&self.vertices)
    }

    #[inline]
    pub fn opacity(&self) -> f64 {
        squash_opacity(self.opacity_param)
    }

    pub fn area(&self) -> f64 {
        let [a, b, c] = &self.vertices;
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Base color with view dependence dropped (DC term only).
    pub fn base_color(&self) -> [f64; 3] {
        crate::sh::eval_sh_color(&self.sh_coeffs[..1], &Vec3::z(), 0)
    }
}

#[inline]
pub fn barycenter(v: &[Vec3; 3]) -> Vec3 {
    (v[0] + v[1] + v[2]) / 3.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneModel {
    pub primitives: Vec<TrianglePrimitive>,
    gamma: f64,
    pub sh_degree: usize,
    pub scene_extent: f64,
}

impl SceneModel {
    pub fn new(
        primitives: Vec<TrianglePrimitive>,
        gamma: f64,
        sh_degree: usize,
        scene_extent: f64,
    ) -> Result<Self> {
        let mut scene = Self { primitives, gamma: 1.0, sh_degree, scene_extent };
        scene.set_gamma(gamma)?;
        scene.validate()?;
        Ok(scene)
    }

    #[inline]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn set_gamma(&mut self, gamma: f64) -> Result<()> {
        if !(gamma >= 1.0) || !gamma.is_finite() {
            return Err(Error::InvalidScene(format!("compactness must be >= 1, got {gamma}")));
        }
        self.gamma = gamma;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sh_degree > MAX_SH_DEGREE {
            return Err(Error::InvalidScene(format!("sh degree {} > 3", self.sh_degree)));
        }
        let n = num_coeffs(self.sh_degree);
        for (i, p) in self.primitives.iter().enumerate() {
            if p.sh_coeffs.len() != n {
                return Err(Error::InvalidScene(format!(
                    "primitive {i} has {} SH coefficients, expected {n}",
                    p.sh_coeffs.len()
                )));
            }
        }
        Ok(())
    }

    pub fn opacities(&self) -> Vec<f64> {
        self.primitives.iter().map(|p| p.opacity()).collect()
    }

    /// Radius of the bounding sphere (about the centroid) of the given points.
    pub fn extent_of(points: impl IntoIterator<Item = Vec3> + Clone) -> f64 {
        let mut n = 0usize;
        let mut sum = Vec3::zeros();
        for p in points.clone() {
            sum += p;
            n += 1;
        }
        if n == 0 {
            return 0.0;
        }
        let c = sum / n as f64;
        points.into_iter().map(|p| (p - c).norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn barycenter_examples() {
        let v = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(3.0, 0.0, 0.0), Vec3::new(0.0, 3.0, 0.0)];
        assert_eq!(barycenter(&v), Vec3::new(1.0, 1.0, 0.0));
        let p = Vec3::new(0.25, -7.5, 3.0);
        assert_eq!(barycenter(&[p, p, p]), p);
        let v = [Vec3::new(1.0, 2.0, 3.0), Vec3::new(4.0, 5.0, 6.0), Vec3::new(7.0, 8.0, 9.0)];
        assert_eq!(barycenter(&v), Vec3::new(4.0, 5.0, 6.0));
    }

    #[test]
    fn barycenter_tracks_vertex_updates() {
        let mut prim = TrianglePrimitive::new([Vec3::zeros(), Vec3::x(), Vec3::y()], 0.5, [0.5; 3], 0);
        prim.vertices[1] = Vec3::new(6.0, 0.0, 3.0);
        assert_eq!(prim.barycenter(), Vec3::new(2.0, 1.0 / 3.0, 1.0));
    }

    #[test]
    fn opacity_saturates() {
        assert!(squash_opacity(20.0) > 0.999999);
        assert!(squash_opacity(20.0) < 1.0);
        assert!((squash_opacity(unsquash_opacity(0.1)) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn gamma_below_one_rejected() {
        assert!(SceneModel::new(vec![], 0.5, 0, 1.0).is_err());
        let mut s = SceneModel::new(vec![], 1.0, 0, 1.0).unwrap();
        assert!(s.set_gamma(0.99).is_err());
        assert!(s.set_gamma(f64::NAN).is_err());
        s.set_gamma(50.0).unwrap();
        assert_eq!(s.gamma(), 50.0);
    }

    #[test]
    fn sh_length_checked() {
        let p = TrianglePrimitive::new([Vec3::zeros(), Vec3::x(), Vec3::y()], 0.5, [0.5; 3], 1);
        assert_eq!(p.sh_coeffs.len(), 4);
        assert!(SceneModel::new(vec![p.clone()], 1.0, 1, 1.0).is_ok());
        assert!(SceneModel::new(vec![p], 1.0, 2, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn squash_in_open_unit_interval(param in -30.0f64..30.0) {
            let o = squash_opacity(param);
            prop_assert!(o > 0.0 && o < 1.0);
        }
    }
}
