//! Posed images used for training and evaluation.

use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Clone, Debug, PartialEq)]
pub struct PosedImage {
    pub name: String,
    /// `H × W × 3` RGB in `[0, 1]`.
    pub image: Image,
    pub camera: Camera,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosedImageDataset {
    pub train: Vec<PosedImage>,
    pub test: Vec<PosedImage>,
    pub background: [f64; 3],
}

impl PosedImageDataset {
    pub fn validate(&self) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::InvalidInput("dataset has no training images".into()));
        }
        for view in self.train.iter().chain(&self.test) {
            view.camera.validate()?;
            let img = &view.image;
            if img.width != view.camera.width || img.height != view.camera.height || img.channels != 3 {
                return Err(Error::ShapeMismatch(format!(
                    "image {} is {}x{}x{}, camera expects {}x{}x3",
                    view.name, img.width, img.height, img.channels, view.camera.width, view.camera.height
                )));
            }
        }
        Ok(())
    }
}
