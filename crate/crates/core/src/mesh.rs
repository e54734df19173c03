//! Triangle soup with one color per face.

use crate::scene::SceneModel;
use crate::Vec3;

#[derive(Clone, Debug, PartialEq)]
pub struct MeshFace {
    pub vertices: [Vec3; 3],
    pub color: [f64; 3],
}

impl MeshFace {
    pub fn area(&self) -> f64 {
        let [a, b, c] = &self.vertices;
        0.5 * (b - a).cross(&(c - a)).norm()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeshAsset {
    pub faces: Vec<MeshFace>,
}

impl MeshAsset {
    /// One face per primitive, at the stored (solid) vertex positions, colored
    /// by the DC term alone and clamped to `[0, 1]`.
    pub fn from_scene(scene: &SceneModel) -> Self {
        let faces = scene
            .primitives
            .iter()
            .map(|p| MeshFace { vertices: p.vertices, color: p.base_color().map(|c| c.clamp(0.0, 1.0)) })
            .collect();
        Self { faces }
    }

    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.faces.iter().map(MeshFace::area).sum()
    }

    pub fn transformed(&self, f: impl Fn(&Vec3) -> Vec3) -> Self {
        let faces = self
            .faces
            .iter()
            .map(|face| MeshFace { vertices: face.vertices.map(|v| f(&v)), color: face.color })
            .collect();
        Self { faces }
    }
}
