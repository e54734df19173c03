//! World-space triangles to screen-space splats.
//!
//! The barycenter is projected exactly; the offsets from the barycenter to the
//! vertices go through the local affine approximation (the projection Jacobian
//! evaluated at a view-clipped barycenter). Offsets are shrunk by the scale
//! compensation factor in 3D, then each projected offset is stretched by half a
//! pixel.

use nalgebra::{Matrix2, Matrix2x3};

use crate::camera::Camera;
use crate::scene::TrianglePrimitive;
use crate::sh::{eval_sh_color, eval_sh_color_backward};
use crate::{Vec2, Vec3};

/// Offsets are clipped to `±CLIP_LIMIT · F` before the Jacobian is evaluated.
pub const CLIP_LIMIT: f64 = 1.3;
/// Pre-dilation projected area (px²) below which a triangle is culled.
pub const MIN_PROJECTED_AREA: f64 = 1e-12;
/// Smallest |det| accepted by the barycentric solve.
pub const MIN_BARY_DET: f64 = 1e-10;
pub const DILATION_PX: f64 = 0.5;

/// Pixel coordinates of a view-space point (which must satisfy `z > 0`).
#[inline]
pub fn view_to_pixel(view: &Vec3, camera: &Camera) -> Vec2 {
    let (fx, fy) = camera.focal();
    Vec2::new(
        0.5 * camera.width as f64 + fx * view.x / view.z,
        0.5 * camera.height as f64 + fy * view.y / view.z,
    )
}

/// Projects a world point. `None` when the point is not in front of the near plane.
pub fn project_point(world: &Vec3, camera: &Camera) -> Option<(Vec2, f64)> {
    let v = camera.to_view(world);
    if v.z <= camera.near_clip {
        return None;
    }
    Some((view_to_pixel(&v, camera), v.z))
}

/// Jacobian of the perspective projection evaluated at the clipped point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClippedJacobian {
    pub matrix: Matrix2x3<f64>,
    /// Clipped `x/z` and `y/z` ratios.
    pub ratio: Vec2,
    /// Whether the ratio lies inside the clamp (and so carries gradient).
    pub active: [bool; 2],
}

pub fn projection_jacobian(view: &Vec3, camera: &Camera) -> ClippedJacobian {
    let (fx, fy) = camera.focal();
    let lim = [CLIP_LIMIT * camera.tan_half_fov_x(), CLIP_LIMIT * camera.tan_half_fov_y()];
    let raw = [view.x / view.z, view.y / view.z];
    let mut ratio = [0.0; 2];
    let mut active = [true; 2];
    for a in 0..2 {
        if raw[a] < -lim[a] {
            ratio[a] = -lim[a];
            active[a] = false;
        } else if raw[a] > lim[a] {
            ratio[a] = lim[a];
            active[a] = false;
        } else {
            ratio[a] = raw[a];
        }
    }
    let z = view.z;
    #[rustfmt::skip]
    let matrix = Matrix2x3::new(
        fx / z, 0.0, -fx * ratio[0] / z,
        0.0, fy / z, -fy * ratio[1] / z,
    );
    ClippedJacobian { matrix, ratio: Vec2::new(ratio[0], ratio[1]), active }
}

/// Linear factor applied to vertex offsets so the integrated opacity does not
/// depend on γ: `k(γ) = sqrt(γ / (2^{1/γ} Γ(1/γ)))`.
pub fn scale_compensation_factor(gamma: f64) -> f64 {
    let inv = 1.0 / gamma;
    let log_area = gamma.ln() - inv * std::f64::consts::LN_2 - statrs::function::gamma::ln_gamma(inv);
    (0.5 * log_area).exp()
}

/// Per-view screen-space quantities of one primitive.
#[derive(Clone, Debug, PartialEq)]
pub struct ScreenTriangle {
    pub primitive_index: usize,
    pub c2d: Vec2,
    /// Dilated offsets; the screen vertices are `c2d + r2d[i]`.
    pub r2d: [Vec2; 3],
    pub r2d_undilated: [Vec2; 3],
    pub vertex_depths: [f64; 3],
    /// Camera-space normal from the cross product of the edges (area weighted).
    pub view_normal: Vec3,
    pub sort_depth: f64,
    pub color: [f64; 3],
    /// Effective opacity `O` used for blending.
    pub opacity: f64,
    pub(crate) center_view: Vec3,
    pub(crate) offsets_view: [Vec3; 3],
    pub(crate) scale: f64,
    pub(crate) jacobian: ClippedJacobian,
    pub(crate) view_dir: Vec3,
    pub(crate) view_dir_len: f64,
    /// Inverse of `[V1 - V3, V2 - V3]`.
    pub(crate) bary_inv: Matrix2<f64>,
    pub(crate) bary_det: f64,
}

impl ScreenTriangle {
    #[inline]
    pub fn vertices(&self) -> [Vec2; 3] {
        [self.c2d + self.r2d[0], self.c2d + self.r2d[1], self.c2d + self.r2d[2]]
    }

    /// Centroid of the dilated screen triangle.
    #[inline]
    pub fn centroid(&self) -> Vec2 {
        self.c2d + (self.r2d[0] + self.r2d[1] + self.r2d[2]) / 3.0
    }

    #[inline]
    pub fn bary_det(&self) -> f64 {
        self.bary_det
    }
}

/// Options shared by projection and rasterization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionOptions {
    pub scale_compensation: bool,
    pub sh_degree: usize,
}

/// Projects one primitive; `None` means culled (behind the near plane or degenerate).
pub fn project_triangle(
    prim: &TrianglePrimitive,
    primitive_index: usize,
    camera: &Camera,
    gamma: f64,
    opacity: f64,
    opts: &ProjectionOptions,
) -> Option<ScreenTriangle> {
    let center = prim.barycenter();
    let center_view = camera.to_view(&center);
    if center_view.z <= camera.near_clip {
        return None;
    }
    let scale = if opts.scale_compensation { scale_compensation_factor(gamma) } else { 1.0 };
    let rot = &camera.world_to_view.rotation;
    let offsets_view: [Vec3; 3] = std::array::from_fn(|i| rot * ((prim.vertices[i] - center) * scale));

    let c2d = view_to_pixel(&center_view, camera);
    let jacobian = projection_jacobian(&center_view, camera);
    let r2d_undilated: [Vec2; 3] = std::array::from_fn(|i| jacobian.matrix * offsets_view[i]);

    let e1 = r2d_undilated[1] - r2d_undilated[0];
    let e2 = r2d_undilated[2] - r2d_undilated[0];
    let area = 0.5 * (e1.x * e2.y - e1.y * e2.x).abs();
    if !(area >= MIN_PROJECTED_AREA) {
        return None;
    }
    let r2d: [Vec2; 3] = std::array::from_fn(|i| {
        let r = r2d_undilated[i];
        r * (1.0 + DILATION_PX / r.norm())
    });

    let verts = [c2d + r2d[0], c2d + r2d[1], c2d + r2d[2]];
    let a = verts[0] - verts[2];
    let b = verts[1] - verts[2];
    let bary_det = a.x * b.y - b.x * a.y;
    if !(bary_det.abs() >= MIN_BARY_DET) {
        return None;
    }
    let bary_inv = Matrix2::new(b.y, -b.x, -a.y, a.x) / bary_det;

    let vertex_depths: [f64; 3] = std::array::from_fn(|i| center_view.z + offsets_view[i].z);
    let view_normal =
        (offsets_view[1] - offsets_view[0]).cross(&(offsets_view[2] - offsets_view[0]));

    let to_center = center - camera.center();
    let view_dir_len = to_center.norm();
    let view_dir = if view_dir_len > 0.0 { to_center / view_dir_len } else { Vec3::z() };
    let color = eval_sh_color(&prim.sh_coeffs, &view_dir, opts.sh_degree.min(prim_degree(prim)));

    Some(ScreenTriangle {
        primitive_index,
        c2d,
        r2d,
        r2d_undilated,
        vertex_depths,
        view_normal,
        sort_depth: center_view.z,
        color,
        opacity,
        center_view,
        offsets_view,
        scale,
        jacobian,
        view_dir,
        view_dir_len,
        bary_inv,
        bary_det,
    })
}

#[inline]
fn prim_degree(prim: &TrianglePrimitive) -> usize {
    match prim.sh_coeffs.len() {
        0..=1 => 0,
        2..=4 => 1,
        5..=9 => 2,
        _ => 3,
    }
}

/// Upstream gradient with respect to the screen-space quantities of one primitive.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ScreenTriangleGrad {
    pub d_vertices2d: [Vec2; 3],
    pub d_vertex_depths: [f64; 3],
    pub d_view_normal: Vec3,
    pub d_color: [f64; 3],
    pub d_opacity: f64,
}

impl ScreenTriangleGrad {
    pub fn accumulate(&mut self, o: &ScreenTriangleGrad) {
        for i in 0..3 {
            self.d_vertices2d[i] += o.d_vertices2d[i];
            self.d_vertex_depths[i] += o.d_vertex_depths[i];
            self.d_color[i] += o.d_color[i];
        }
        self.d_view_normal += o.d_view_normal;
        self.d_opacity += o.d_opacity;
    }
}

/// Backward of [`project_triangle`]: returns the vertex gradient and accumulates
/// the SH gradient into `d_sh`.
pub fn project_triangle_backward(
    prim: &TrianglePrimitive,
    st: &ScreenTriangle,
    camera: &Camera,
    opts: &ProjectionOptions,
    g: &ScreenTriangleGrad,
    d_sh: &mut [[f64; 3]],
) -> [Vec3; 3] {
    let (fx, fy) = camera.focal();
    let cv = st.center_view;
    let z = cv.z;
    let jm = &st.jacobian.matrix;

    let mut d_c2d = Vec2::zeros();
    let mut d_offsets_view = [Vec3::zeros(); 3];
    let mut d_jac = Matrix2x3::<f64>::zeros();
    let mut d_center_view = Vec3::zeros();

    for i in 0..3 {
        let gd = g.d_vertices2d[i];
        d_c2d += gd;
        // dilation: r' = r + 0.5 r / |r|
        let r = st.r2d_undilated[i];
        let len = r.norm();
        let rhat = r / len;
        let d_r = gd + (gd - rhat * rhat.dot(&gd)) * (DILATION_PX / len);
        d_offsets_view[i] += jm.transpose() * d_r;
        d_jac += d_r * st.offsets_view[i].transpose();
        d_offsets_view[i].z += g.d_vertex_depths[i];
        d_center_view.z += g.d_vertex_depths[i];
    }

    let e1 = st.offsets_view[1] - st.offsets_view[0];
    let e2 = st.offsets_view[2] - st.offsets_view[0];
    let d_e1 = e2.cross(&g.d_view_normal);
    let d_e2 = g.d_view_normal.cross(&e1);
    d_offsets_view[1] += d_e1;
    d_offsets_view[2] += d_e2;
    d_offsets_view[0] -= d_e1 + d_e2;

    // C_2D = (W/2 + fx x/z, H/2 + fy y/z)
    d_center_view.x += d_c2d.x * fx / z;
    d_center_view.y += d_c2d.y * fy / z;
    d_center_view.z -= (d_c2d.x * fx * cv.x + d_c2d.y * fy * cv.y) / (z * z);

    // J = [[fx/z, 0, -fx tx/z], [0, fy/z, -fy ty/z]] with clipped ratios t
    let t = st.jacobian.ratio;
    d_center_view.z += d_jac[(0, 0)] * (-fx / (z * z))
        + d_jac[(1, 1)] * (-fy / (z * z))
        + d_jac[(0, 2)] * (fx * t.x / (z * z))
        + d_jac[(1, 2)] * (fy * t.y / (z * z));
    let d_ratio = [d_jac[(0, 2)] * (-fx / z), d_jac[(1, 2)] * (-fy / z)];
    if st.jacobian.active[0] {
        d_center_view.x += d_ratio[0] / z;
        d_center_view.z -= d_ratio[0] * cv.x / (z * z);
    }
    if st.jacobian.active[1] {
        d_center_view.y += d_ratio[1] / z;
        d_center_view.z -= d_ratio[1] * cv.y / (z * z);
    }

    let rot_t = camera.world_to_view.rotation.transpose();
    let mut d_center = rot_t * d_center_view;
    let d_offsets: [Vec3; 3] = std::array::from_fn(|i| rot_t * d_offsets_view[i] * st.scale);

    let degree = opts.sh_degree.min(prim_degree(prim));
    let d_dir = eval_sh_color_backward(&prim.sh_coeffs, &st.view_dir, degree, &g.d_color, d_sh);
    if st.view_dir_len > 0.0 {
        let dir = st.view_dir;
        d_center += (d_dir - dir * dir.dot(&d_dir)) / st.view_dir_len;
    }

    let sum_offsets = d_offsets[0] + d_offsets[1] + d_offsets[2];
    let shared = (d_center - sum_offsets) / 3.0;
    [d_offsets[0] + shared, d_offsets[1] + shared, d_offsets[2] + shared]
}
