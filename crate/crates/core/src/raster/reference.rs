//! Untiled renderer that blends every projected primitive at every pixel.
//! Slow; used to check the tiled path.

use super::forward::{
    compute_barycentric, eccentricity, fragment_opacity, project_scene, RenderSettings, MAX_FRAGMENT_ALPHA,
    MIN_FRAGMENT_ALPHA, NORMAL_EPS, TRANSMITTANCE_EPS,
};
use crate::camera::Camera;
use crate::image::Image;
use crate::scene::SceneModel;
use crate::{Vec2, Vec3};

pub struct ReferenceOutput {
    pub color: Image,
    pub depth: Image,
    pub normal: Image,
    pub alpha: Image,
}

pub fn render_reference(scene: &SceneModel, camera: &Camera, settings: &RenderSettings) -> ReferenceOutput {
    let (w, h) = (camera.width, camera.height);
    let gamma = scene.gamma();
    let mut screen = project_scene(scene, camera, settings);
    screen.sort_by(|a, b| a.sort_depth.total_cmp(&b.sort_depth).then(a.primitive_index.cmp(&b.primitive_index)));

    let mut out = ReferenceOutput {
        color: Image::new(w, h, 3),
        depth: Image::new(w, h, 1),
        normal: Image::new(w, h, 3),
        alpha: Image::new(w, h, 1),
    };
    for y in 0..h {
        for x in 0..w {
            let p = Vec2::new(x as f64 + 0.5, y as f64 + 0.5);
            let mut t = 1.0;
            let mut color = [0.0; 3];
            let mut depth = 0.0;
            let mut normal = Vec3::zeros();
            for st in &screen {
                let Some(a) = compute_barycentric(st, &p) else { continue };
                let o = fragment_opacity(eccentricity(&a).0, st.opacity, gamma);
                if o < MIN_FRAGMENT_ALPHA {
                    continue;
                }
                let o = o.min(MAX_FRAGMENT_ALPHA);
                let wgt = o * t;
                for c in 0..3 {
                    color[c] += st.color[c] * wgt;
                }
                depth += (0..3).map(|k| a[k] * st.vertex_depths[k]).sum::<f64>() * wgt;
                normal += st.view_normal * wgt;
                t *= 1.0 - o;
                if t < TRANSMITTANCE_EPS {
                    break;
                }
            }
            for c in 0..3 {
                color[c] += t * settings.background[c];
            }
            let len = normal.norm();
            let n = if len >= NORMAL_EPS { normal / len } else { Vec3::zeros() };
            out.color.pixel_mut(x, y).copy_from_slice(&color);
            out.depth.pixel_mut(x, y)[0] = depth;
            out.normal.pixel_mut(x, y).copy_from_slice(n.as_slice());
            out.alpha.pixel_mut(x, y)[0] = 1.0 - t;
        }
    }
    out
}
