//! Pinhole camera with a rigid world-to-view transform.
//!
//! View space is +x right, +y down, +z forward. Pixel `(i, j)` has its
//! center at `(i + 0.5, j + 0.5)` and the principal point sits at the image
//! center.

use crate::error::{Error, Result};
use crate::{Mat3, Vec3};

/// Rotation followed by translation: `p_view = rotation * p_world + translation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { rotation: Mat3::identity(), translation: Vec3::zeros() }
    }

    #[inline]
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -(rt * self.translation) }
    }

    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Frobenius norm of `RᵀR − I`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Mat3::identity()).norm()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub width: usize,
    pub height: usize,
    pub fov_x: f64,
    pub fov_y: f64,
    pub world_to_view: RigidTransform,
    pub near_clip: f64,
}

pub const DEFAULT_NEAR_CLIP: f64 = 0.01;

impl Camera {
    pub fn new(
        width: usize,
        height: usize,
        fov_x: f64,
        fov_y: f64,
        world_to_view: RigidTransform,
    ) -> Result<Self> {
        let cam = Self { width, height, fov_x, fov_y, world_to_view, near_clip: DEFAULT_NEAR_CLIP };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera at `eye` looking at `target`. `fov_y` follows from the aspect ratio.
    pub fn look_at(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        width: usize,
        height: usize,
        fov_x: f64,
    ) -> Result<Self> {
        let forward = target - eye;
        if forward.norm() < 1e-12 {
            return Err(Error::InvalidCamera("eye and target coincide".into()));
        }
        let forward = forward.normalize();
        let right = forward.cross(&up);
        if right.norm() < 1e-9 {
            return Err(Error::InvalidCamera("up vector parallel to view direction".into()));
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let rotation = Mat3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye);
        let fov_y = fov_y_from_aspect(fov_x, width, height);
        Self::new(width, height, fov_x, fov_y, RigidTransform { rotation, translation })
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCamera(format!(
                "resolution must be at least 1x1, got {}x{}",
                self.width, self.height
            )));
        }
        for (name, fov) in [("fov_x", self.fov_x), ("fov_y", self.fov_y)] {
            if !(fov > 0.0 && fov < std::f64::consts::PI) {
                return Err(Error::InvalidCamera(format!("{name} = {fov} outside (0, pi)")));
            }
        }
        let err = self.world_to_view.orthonormality_error();
        if !(err < 1e-6) {
            return Err(Error::InvalidCamera(format!("rotation not orthonormal (error {err:e})")));
        }
        if !(self.near_clip > 0.0) {
            return Err(Error::InvalidCamera("near clip must be positive".into()));
        }
        Ok(())
    }

    /// `F_x = tan(fov_x / 2)`.
    #[inline]
    pub fn tan_half_fov_x(&self) -> f64 {
        (0.5 * self.fov_x).tan()
    }

    #[inline]
    pub fn tan_half_fov_y(&self) -> f64 {
        (0.5 * self.fov_y).tan()
    }

    /// Focal lengths in pixels, `f = W / (2 F)`.
    #[inline]
    pub fn focal(&self) -> (f64, f64) {
        (
            self.width as f64 / (2.0 * self.tan_half_fov_x()),
            self.height as f64 / (2.0 * self.tan_half_fov_y()),
        )
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3 {
        -(self.world_to_view.rotation.transpose() * self.world_to_view.translation)
    }

    #[inline]
    pub fn to_view(&self, p: &Vec3) -> Vec3 {
        self.world_to_view.apply(p)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Same pose and field of view at a different resolution.
    pub fn with_resolution(&self, width: usize, height: usize) -> Result<Self> {
        let mut cam = self.clone();
        cam.width = width;
        cam.height = height;
        cam.validate()?;
        Ok(cam)
    }
}

pub fn fov_y_from_aspect(fov_x: f64, width: usize, height: usize) -> f64 {
    2.0 * ((0.5 * fov_x).tan() * height as f64 / width as f64).atan()
}
