//! NeRF-synthetic layout: `transforms_{train,test}.json` plus RGBA PNGs.

use std::path::{Path, PathBuf};

use image::imageops::{resize, FilterType};
use image::{ImageBuffer, Rgb};
use nalgebra::Matrix4;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use trisplat_core::camera::{fov_y_from_aspect, RigidTransform};
use trisplat_core::dataset::{PosedImage, PosedImageDataset};
use trisplat_core::{Camera, Image, Mat3, Vec3};

use crate::error::{write_atomic, IoError, Result};
use crate::png::{load_png, save_png, srgb_to_linear};

#[derive(Debug, Serialize, Deserialize)]
pub struct TransformsFile {
    pub camera_angle_x: f64,
    pub frames: Vec<Frame>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Frame {
    pub file_path: String,
    /// Camera-to-world, OpenGL axes (x right, y up, z backward).
    pub transform_matrix: [[f64; 4]; 4],
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadOptions {
    pub background: [f64; 3],
    /// Integer downsampling factor (2 = half resolution).
    pub downscale: usize,
    pub linearize: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { background: [1.0; 3], downscale: 1, linearize: false }
    }
}

/// World-to-view transform from an OpenGL camera-to-world matrix. The y and z
/// camera axes are flipped to get x right, y down, z forward.
pub fn world_to_view_from_gl(c2w: &Matrix4<f64>) -> RigidTransform {
    let r = c2w.fixed_view::<3, 3>(0, 0).into_owned();
    let t: Vec3 = c2w.fixed_view::<3, 1>(0, 3).into_owned();
    let flip = Mat3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0));
    let r_cv = r * flip;
    let rotation = r_cv.transpose();
    RigidTransform { rotation, translation: -(rotation * t) }
}

/// Inverse of [`world_to_view_from_gl`].
pub fn gl_from_world_to_view(w2v: &RigidTransform) -> Matrix4<f64> {
    let c2w = w2v.inverse();
    let flip = Mat3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0));
    let r = c2w.rotation * flip;
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&c2w.translation);
    m
}

fn frame_image_path(dir: &Path, file_path: &str) -> PathBuf {
    let p = dir.join(file_path);
    if p.extension().is_some() {
        p
    } else {
        p.with_extension("png")
    }
}

fn downsample(img: &Image, factor: usize) -> Image {
    if factor <= 1 {
        return img.clone();
    }
    let buf: ImageBuffer<Rgb<f32>, Vec<f32>> =
        ImageBuffer::from_fn(img.width as u32, img.height as u32, |x, y| {
            let p = img.pixel(x as usize, y as usize);
            Rgb([p[0] as f32, p[1] as f32, p[2] as f32])
        });
    let (w, h) = ((img.width / factor).max(1), (img.height / factor).max(1));
    let small = resize(&buf, w as u32, h as u32, FilterType::Triangle);
    let data = small.pixels().flat_map(|p| p.0.map(f64::from)).collect();
    Image::from_vec(w, h, 3, data).expect("resize keeps the requested shape")
}

fn load_split(dir: &Path, split: &str, opts: &LoadOptions) -> Result<Vec<PosedImage>> {
    let path = dir.join(format!("transforms_{split}.json"));
    let text = std::fs::read_to_string(&path).map_err(|e| IoError::io(&path, e))?;
    let tf: TransformsFile = serde_json::from_str(&text).map_err(|e| IoError::format(&path, e))?;
    tf.frames
        .par_iter()
        .map(|frame| {
            let img_path = frame_image_path(dir, &frame.file_path);
            let mut image = downsample(&load_png(&img_path, opts.background)?, opts.downscale);
            if opts.linearize {
                image = image.map(srgb_to_linear);
            }
            let c2w = Matrix4::from_fn(|r, c| frame.transform_matrix[r][c]);
            let (w, h) = (image.width, image.height);
            let camera = Camera::new(
                w,
                h,
                tf.camera_angle_x,
                fov_y_from_aspect(tf.camera_angle_x, w, h),
                world_to_view_from_gl(&c2w),
            )
            .map_err(|e| IoError::format(&path, e))?;
            let name = Path::new(&frame.file_path)
                .file_stem()
                .map_or_else(|| frame.file_path.clone(), |s| s.to_string_lossy().into_owned());
            Ok(PosedImage { name, image, camera })
        })
        .collect()
}

pub fn load_nerf_synthetic(dir: &Path, opts: &LoadOptions) -> Result<PosedImageDataset> {
    let train = load_split(dir, "train", opts)?;
    if train.is_empty() {
        return Err(IoError::format(&dir.join("transforms_train.json"), "no training frames"));
    }
    let test_path = dir.join("transforms_test.json");
    let test = if test_path.exists() { load_split(dir, "test", opts)? } else { Vec::new() };
    Ok(PosedImageDataset { train, test, background: opts.background })
}

/// Writes a dataset in the same layout (PNG images, OpenGL poses).
pub fn save_nerf_synthetic(dataset: &PosedImageDataset, dir: &Path) -> Result<()> {
    for (split, views) in [("train", &dataset.train), ("test", &dataset.test)] {
        let sub = dir.join(split);
        std::fs::create_dir_all(&sub).map_err(|e| IoError::io(&sub, e))?;
        let fov_x = views.first().map_or(0.0, |v| v.camera.fov_x);
        let mut frames = Vec::new();
        for view in views {
            save_png(&view.image, &sub.join(format!("{}.png", view.name)))?;
            let m = gl_from_world_to_view(&view.camera.world_to_view);
            frames.push(Frame {
                file_path: format!("./{split}/{}", view.name),
                transform_matrix: std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)])),
            });
        }
        let tf = TransformsFile { camera_angle_x: fov_x, frames };
        let path = dir.join(format!("transforms_{split}.json"));
        let json = serde_json::to_vec_pretty(&tf).map_err(|e| IoError::format(&path, e))?;
        write_atomic(&path, &json)?;
    }
    Ok(())
}
