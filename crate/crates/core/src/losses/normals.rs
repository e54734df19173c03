//! Normals inferred from a rendered depth map, and the consistency loss
//! between them and the blended primitive normals.

use crate::camera::Camera;
use crate::error::Result;
use crate::image::Image;
use crate::Vec3;

/// Depths at or below this are treated as invalid.
pub const MIN_VALID_DEPTH: f64 = 1e-6;
/// Pixels with accumulated alpha below this are excluded from the loss.
pub const NORMAL_MASK_ALPHA: f64 = 0.5;

const SCHARR_SMOOTH: [f64; 3] = [3.0 / 32.0, 10.0 / 32.0, 3.0 / 32.0];

#[inline]
fn clamp_index(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Scharr derivatives `(∂d/∂x, ∂d/∂y)` per pixel, borders replicated.
pub fn scharr_gradients(depth: &Image) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (depth.width, depth.height);
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    let d = |x: isize, y: isize| depth.data[clamp_index(y, h) * w + clamp_index(x, w)];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut sx = 0.0;
            let mut sy = 0.0;
            for k in 0..3 {
                let o = k as isize - 1;
                sx += SCHARR_SMOOTH[k] * (d(x + 1, y + o) - d(x - 1, y + o));
                sy += SCHARR_SMOOTH[k] * (d(x + o, y + 1) - d(x + o, y - 1));
            }
            gx[y as usize * w + x as usize] = sx;
            gy[y as usize * w + x as usize] = sy;
        }
    }
    (gx, gy)
}

fn scharr_adjoint(g_gx: &[f64], g_gy: &[f64], w: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    let mut add = |x: isize, y: isize, v: f64| out[clamp_index(y, h) * w + clamp_index(x, w)] += v;
    for y in 0..h as isize {
        for x in 0..w as isize {
            let ax = g_gx[y as usize * w + x as usize];
            let ay = g_gy[y as usize * w + x as usize];
            for k in 0..3 {
                let o = k as isize - 1;
                add(x + 1, y + o, SCHARR_SMOOTH[k] * ax);
                add(x - 1, y + o, -SCHARR_SMOOTH[k] * ax);
                add(x + o, y + 1, SCHARR_SMOOTH[k] * ay);
                add(x + o, y - 1, -SCHARR_SMOOTH[k] * ay);
            }
        }
    }
    out
}

/// Unnormalized normal from log-depth gradients at pixel `(x, y)`.
#[inline]
fn raw_normal(dx: f64, dy: f64, x: usize, y: usize, camera: &Camera) -> Vec3 {
    let (fx, fy) = camera.focal();
    let u = x as f64 + 0.5 - 0.5 * camera.width as f64;
    let v = y as f64 + 0.5 - 0.5 * camera.height as f64;
    Vec3::new(-fx * dx, -fy * dy, 1.0 + dx * u + dy * v)
}

/// Per-pixel unit normals (view space) of the surface described by `depth`.
/// Pixels with depth at or below [`MIN_VALID_DEPTH`] get a zero normal.
pub fn normal_from_depth(depth: &Image, camera: &Camera) -> Image {
    let (w, h) = (depth.width, depth.height);
    let (gx, gy) = scharr_gradients(depth);
    let mut out = Image::new(w, h, 3);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let d = depth.data[i];
            if d <= MIN_VALID_DEPTH {
                continue;
            }
            let n = raw_normal(gx[i] / d, gy[i] / d, x, y, camera).normalize();
            out.pixel_mut(x, y).copy_from_slice(n.as_slice());
        }
    }
    out
}

/// Gradient with respect to `depth` of `Σ g ⊙ normal_from_depth(depth)`.
pub fn normal_from_depth_backward(depth: &Image, camera: &Camera, g_normal: &Image) -> Image {
    let (w, h) = (depth.width, depth.height);
    let (fx, fy) = camera.focal();
    let (gx, gy) = scharr_gradients(depth);
    let mut g_gx = vec![0.0; w * h];
    let mut g_gy = vec![0.0; w * h];
    let mut g_depth = Image::new(w, h, 1);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let d = depth.data[i];
            if d <= MIN_VALID_DEPTH {
                continue;
            }
            let (dx, dy) = (gx[i] / d, gy[i] / d);
            let v = raw_normal(dx, dy, x, y, camera);
            let len = v.norm();
            let n = v / len;
            let g = Vec3::from_column_slice(g_normal.pixel(x, y));
            let gv = (g - n * n.dot(&g)) / len;
            let u = x as f64 + 0.5 - 0.5 * camera.width as f64;
            let vv = y as f64 + 0.5 - 0.5 * camera.height as f64;
            let g_dx = -fx * gv.x + u * gv.z;
            let g_dy = -fy * gv.y + vv * gv.z;
            g_gx[i] = g_dx / d;
            g_gy[i] = g_dy / d;
            g_depth.data[i] -= (g_dx * dx + g_dy * dy) / d;
        }
    }
    let from_filter = scharr_adjoint(&g_gx, &g_gy, w, h);
    for (a, b) in g_depth.data.iter_mut().zip(from_filter) {
        *a += b;
    }
    g_depth
}

/// Mean of `1 − n·n'` over masked pixels; zero for an empty mask.
pub fn normal_consistency_loss(rendered: &Image, inferred: &Image, mask: &[bool]) -> Result<f64> {
    rendered.check_same_shape(inferred)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, &m) in mask.iter().enumerate().take(rendered.pixel_count()) {
        if m {
            let a = &rendered.data[3 * i..3 * i + 3];
            let b = &inferred.data[3 * i..3 * i + 3];
            sum += 1.0 - (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]);
            count += 1;
        }
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// Normal consistency evaluated on a render, with gradients for the rendered
/// normal and depth images (the latter through the inferred normals).
pub struct NormalLoss {
    pub value: f64,
    pub d_normal: Image,
    pub d_depth: Image,
}

pub fn normal_loss_with_grad(normal: &Image, depth: &Image, alpha: &Image, camera: &Camera) -> Result<NormalLoss> {
    let inferred = normal_from_depth(depth, camera);
    let mask: Vec<bool> = alpha.data.iter().map(|&a| a >= NORMAL_MASK_ALPHA).collect();
    let value = normal_consistency_loss(normal, &inferred, &mask)?;
    let count = mask.iter().filter(|&&m| m).count();
    let mut d_normal = Image::new(normal.width, normal.height, 3);
    let mut d_inferred = Image::new(normal.width, normal.height, 3);
    if count > 0 {
        let s = -1.0 / count as f64;
        for (i, &m) in mask.iter().enumerate() {
            if m {
                for c in 0..3 {
                    d_normal.data[3 * i + c] = s * inferred.data[3 * i + c];
                    d_inferred.data[3 * i + c] = s * normal.data[3 * i + c];
                }
            }
        }
    }
    let d_depth = normal_from_depth_backward(depth, camera, &d_inferred);
    Ok(NormalLoss { value, d_normal, d_depth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::RigidTransform;

    fn cam(w: usize, h: usize) -> Camera {
        Camera::new(w, h, 1.0, 0.8, RigidTransform::identity()).unwrap()
    }

    #[test]
    fn constant_depth_faces_camera() {
        let c = cam(12, 9);
        let depth = Image::filled(12, 9, &[3.0]);
        let n = normal_from_depth(&depth, &c);
        for y in 1..8 {
            for x in 1..11 {
                assert_eq!(n.pixel(x, y), &[0.0, 0.0, 1.0]);
            }
        }
    }

    #[test]
    fn invalid_depth_gives_zero_normal() {
        let c = cam(4, 4);
        let n = normal_from_depth(&Image::new(4, 4, 1), &c);
        assert!(n.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn consistency_loss_examples() {
        let a = Image::filled(2, 1, &[0.0, 0.0, 1.0]);
        let b = Image::filled(2, 1, &[0.0, 0.0, -1.0]);
        assert_eq!(normal_consistency_loss(&a, &a, &[true, true]).unwrap(), 0.0);
        assert_eq!(normal_consistency_loss(&a, &b, &[true, true]).unwrap(), 2.0);
        let c = Image::from_vec(2, 1, 3, vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(normal_consistency_loss(&a, &c, &[true, true]).unwrap(), 0.5);
        assert_eq!(normal_consistency_loss(&a, &b, &[false, false]).unwrap(), 0.0);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let (w, h) = (7, 6);
        let c = cam(w, h);
        let depth = Image::from_vec(
            w,
            h,
            1,
            (0..w * h).map(|i| 2.0 + 0.3 * ((i as f64) * 0.7).sin() + 0.01 * (i % w) as f64).collect(),
        )
        .unwrap();
        let g = Image::from_vec(w, h, 3, (0..w * h * 3).map(|i| ((i * 17 % 13) as f64 - 6.0) / 6.0).collect())
            .unwrap();
        let f = |d: &Image| -> f64 {
            normal_from_depth(d, &c).data.iter().zip(&g.data).map(|(a, b)| a * b).sum()
        };
        let analytic = normal_from_depth_backward(&depth, &c, &g);
        for i in 0..w * h {
            let hstep = 1e-6;
            let mut p = depth.clone();
            p.data[i] += hstep;
            let mut m = depth.clone();
            m.data[i] -= hstep;
            let fd = (f(&p) - f(&m)) / (2.0 * hstep);
            assert!((fd - analytic.data[i]).abs() < 1e-6 * (1.0 + fd.abs()), "pixel {i}: {fd} vs {}", analytic.data[i]);
        }
    }
}
