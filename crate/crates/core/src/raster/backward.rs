use rayon::prelude::*;

use super::forward::{
    compute_barycentric, eccentricity, fingerprint, RenderRecords, MAX_FRAGMENT_ALPHA, NORMAL_EPS,
};
use crate::camera::Camera;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::projection::{project_triangle_backward, ScreenTriangleGrad};
use crate::scene::{squash_opacity, SceneModel};
use crate::{Vec2, Vec3};

/// Upstream gradient with respect to every output image.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelGrads {
    pub color: Image,
    pub depth: Image,
    pub normal: Image,
    pub alpha: Image,
}

impl PixelGrads {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            color: Image::new(width, height, 3),
            depth: Image::new(width, height, 1),
            normal: Image::new(width, height, 3),
            alpha: Image::new(width, height, 1),
        }
    }

    fn check(&self, width: usize, height: usize) -> Result<()> {
        let ok = |img: &Image, c: usize| img.width == width && img.height == height && img.channels == c;
        if ok(&self.color, 3) && ok(&self.depth, 1) && ok(&self.normal, 3) && ok(&self.alpha, 1) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!("pixel gradients do not match a {width}x{height} render")))
        }
    }
}

/// Gradient of a scalar loss with respect to every primitive parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads {
    pub d_vertices: Vec<[Vec3; 3]>,
    pub d_opacity_param: Vec<f64>,
    pub d_sh: Vec<Vec<[f64; 3]>>,
}

impl ParamGrads {
    pub fn zeros_like(scene: &SceneModel) -> Self {
        Self {
            d_vertices: vec![[Vec3::zeros(); 3]; scene.len()],
            d_opacity_param: vec![0.0; scene.len()],
            d_sh: scene.primitives.iter().map(|p| vec![[0.0; 3]; p.sh_coeffs.len()]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.d_opacity_param.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d_opacity_param.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.d_vertices.iter().flatten().all(|v| v.iter().all(|x| x.is_finite()))
            && self.d_opacity_param.iter().all(|x| x.is_finite())
            && self.d_sh.iter().flatten().flatten().all(|x| x.is_finite())
    }

    /// `self += s · other`.
    pub fn add_scaled(&mut self, other: &ParamGrads, s: f64) {
        for (a, b) in self.d_vertices.iter_mut().zip(&other.d_vertices) {
            for k in 0..3 {
                a[k] += b[k] * s;
            }
        }
        for (a, b) in self.d_opacity_param.iter_mut().zip(&other.d_opacity_param) {
            *a += b * s;
        }
        for (a, b) in self.d_sh.iter_mut().zip(&other.d_sh) {
            for (x, y) in a.iter_mut().zip(b) {
                for c in 0..3 {
                    x[c] += y[c] * s;
                }
            }
        }
    }

    /// All entries in a fixed order: vertices, opacity, SH per primitive.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..self.len() {
            for v in &self.d_vertices[i] {
                out.extend_from_slice(v.as_slice());
            }
            out.push(self.d_opacity_param[i]);
            for c in &self.d_sh[i] {
                out.extend_from_slice(c);
            }
        }
        out
    }
}

/// Accumulates the gradient of one pixel into per-list-position slots.
#[allow(clippy::too_many_arguments)]
fn pixel_backward(
    p: Vec2,
    contributors: &[(u32, f64)],
    raw_normal: Vec3,
    list: &[u32],
    records: &RenderRecords,
    gamma: f64,
    g_color: [f64; 3],
    g_depth: f64,
    g_normal: Vec3,
    g_alpha: f64,
    prefix: &mut Vec<f64>,
    local: &mut [ScreenTriangleGrad],
) {
    let bg = records.settings.background;
    let len = raw_normal.norm();
    let g_raw = if len >= NORMAL_EPS {
        let n = raw_normal / len;
        (g_normal - n * n.dot(&g_normal)) / len
    } else {
        Vec3::zeros()
    };

    prefix.clear();
    let mut t = 1.0;
    for &(_, o) in contributors {
        prefix.push(t);
        t *= 1.0 - o;
    }

    // suffix blends; the color suffix starts from the background
    let mut r_color = bg;
    let mut r_depth = 0.0;
    let mut r_normal = Vec3::zeros();
    let mut r_alpha = 0.0;
    for (k, &(pos, o)) in contributors.iter().enumerate().rev() {
        let st = &records.screen[list[pos as usize] as usize];
        let t_i = prefix[k];
        let w = o * t_i;
        let Some(a) = compute_barycentric(st, &p) else { continue };
        let depth = a[0] * st.vertex_depths[0] + a[1] * st.vertex_depths[1] + a[2] * st.vertex_depths[2];

        let mut g_o = 0.0;
        for ch in 0..3 {
            g_o += g_color[ch] * t_i * (st.color[ch] - r_color[ch]);
        }
        g_o += g_depth * t_i * (depth - r_depth);
        g_o += g_raw.dot(&(st.view_normal - r_normal)) * t_i;
        g_o += g_alpha * t_i * (1.0 - r_alpha);

        let slot = &mut local[pos as usize];
        for ch in 0..3 {
            slot.d_color[ch] += g_color[ch] * w;
        }
        slot.d_view_normal += g_raw * w;
        let g_d = g_depth * w;
        let mut g_a = [g_d * st.vertex_depths[0], g_d * st.vertex_depths[1], g_d * st.vertex_depths[2]];
        for k in 0..3 {
            slot.d_vertex_depths[k] += g_d * a[k];
        }

        let (e, argmin) = eccentricity(&a);
        let falloff = (-0.5 * e.powf(2.0 * gamma)).exp();
        let unclamped = st.opacity * falloff;
        if unclamped < MAX_FRAGMENT_ALPHA {
            slot.d_opacity += g_o * falloff;
            let g_e = -g_o * unclamped * gamma * e.powf(2.0 * gamma - 1.0);
            g_a[argmin] -= 3.0 * g_e;
        }

        // [a1, a2] = M⁻¹ (p − V3), a3 = 1 − a1 − a2
        let g_u = Vec2::new(g_a[0] - g_a[2], g_a[1] - g_a[2]);
        let q = st.bary_inv.transpose() * g_u;
        for k in 0..3 {
            slot.d_vertices2d[k] -= q * a[k];
        }

        for ch in 0..3 {
            r_color[ch] = st.color[ch] * o + (1.0 - o) * r_color[ch];
        }
        r_depth = depth * o + (1.0 - o) * r_depth;
        r_normal = st.view_normal * o + r_normal * (1.0 - o);
        r_alpha = o + (1.0 - o) * r_alpha;
    }
}

/// Gradient of `Σ pixel_grads ⊙ output` with respect to every primitive parameter.
///
/// The depth order is treated as constant. Per-tile partial sums are merged in
/// tile order, so the result does not depend on the number of worker threads.
pub fn render_backward(
    scene: &SceneModel,
    camera: &Camera,
    pixel_grads: &PixelGrads,
    records: &RenderRecords,
) -> Result<ParamGrads> {
    if records.num_primitives != scene.len() || records.fingerprint != fingerprint(scene, camera, &records.settings) {
        return Err(Error::RecordMismatch("records were produced for a different scene or camera".into()));
    }
    let (w, h) = (camera.width, camera.height);
    pixel_grads.check(w, h)?;
    let gamma = scene.gamma();
    let binning = &records.binning;

    let tile_grads: Vec<Vec<ScreenTriangleGrad>> = (0..binning.num_tiles())
        .into_par_iter()
        .map(|tile| {
            let list = binning.tile_list(tile);
            let mut local = vec![ScreenTriangleGrad::default(); list.len()];
            if list.is_empty() {
                return local;
            }
            let rec = &records.tiles[tile];
            let (x0, y0, x1, y1) = binning.tile_rect(tile, w, h);
            let mut prefix = Vec::new();
            let mut k = 0;
            for y in y0..y1 {
                for x in x0..x1 {
                    let (s, e) = (rec.offsets[k] as usize, rec.offsets[k + 1] as usize);
                    let gc = pixel_grads.color.pixel(x, y);
                    let gn = pixel_grads.normal.pixel(x, y);
                    pixel_backward(
                        Vec2::new(x as f64 + 0.5, y as f64 + 0.5),
                        &rec.contributors[s..e],
                        rec.raw_normal[k],
                        list,
                        records,
                        gamma,
                        [gc[0], gc[1], gc[2]],
                        pixel_grads.depth.get(x, y, 0),
                        Vec3::new(gn[0], gn[1], gn[2]),
                        pixel_grads.alpha.get(x, y, 0),
                        &mut prefix,
                        &mut local,
                    );
                    k += 1;
                }
            }
            local
        })
        .collect();

    let mut screen_grads = vec![ScreenTriangleGrad::default(); records.screen.len()];
    for (tile, local) in tile_grads.iter().enumerate() {
        for (g, &slot) in local.iter().zip(binning.tile_list(tile)) {
            screen_grads[slot as usize].accumulate(g);
        }
    }

    let opts = records.settings.projection_options();
    let per_slot: Vec<(usize, [Vec3; 3], f64, Vec<[f64; 3]>)> = records
        .screen
        .par_iter()
        .zip(screen_grads.par_iter())
        .map(|(st, g)| {
            let prim = &scene.primitives[st.primitive_index];
            let mut d_sh = vec![[0.0; 3]; prim.sh_coeffs.len()];
            let d_v = project_triangle_backward(prim, st, camera, &opts, g, &mut d_sh);
            // the straight-through map passes the gradient to sigmoid(param) unchanged
            let s = squash_opacity(prim.opacity_param);
            (st.primitive_index, d_v, g.d_opacity * s * (1.0 - s), d_sh)
        })
        .collect();

    let mut grads = ParamGrads::zeros_like(scene);
    for (i, d_v, d_o, d_sh) in per_slot {
        grads.d_vertices[i] = d_v;
        grads.d_opacity_param[i] = d_o;
        grads.d_sh[i] = d_sh;
    }
    Ok(grads)
}
