use std::hash::{Hash, Hasher};

use rayon::prelude::*;

use crate::camera::Camera;
use crate::image::Image;
use crate::projection::{project_triangle, ProjectionOptions, ScreenTriangle, MIN_BARY_DET};
use crate::scene::{squash_opacity, SceneModel};
use crate::{Vec2, Vec3};

pub const TILE_SIZE: usize = 16;
/// Per-fragment opacity cap; keeps transmittance strictly positive.
pub const MAX_FRAGMENT_ALPHA: f64 = 0.99;
/// Fragments below this opacity are skipped.
pub const MIN_FRAGMENT_ALPHA: f64 = 1.0 / 255.0;
/// Blending stops once transmittance drops below this.
pub const TRANSMITTANCE_EPS: f64 = 1e-4;
/// Blended normals shorter than this are reported as zero.
pub const NORMAL_EPS: f64 = 1e-8;

/// How the per-primitive opacity parameter turns into the blended opacity `O`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OpacityMode {
    /// `O = sigmoid(param)`.
    Squashed,
    /// Straight-through binarization: `O = step(sigmoid(param) - threshold)`,
    /// gradients pass to `sigmoid(param)` unchanged.
    Binarized { threshold: f64 },
}

impl OpacityMode {
    #[inline]
    pub fn effective(&self, param: f64) -> f64 {
        let o = squash_opacity(param);
        match *self {
            OpacityMode::Squashed => o,
            OpacityMode::Binarized { threshold } => crate::losses::ste_opacity(o, threshold),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderSettings {
    pub background: [f64; 3],
    /// Retain per-pixel records for the backward pass.
    pub training: bool,
    /// Highest SH degree evaluated.
    pub sh_degree: usize,
    pub scale_compensation: bool,
    pub opacity_mode: OpacityMode,
    pub tile_size: usize,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            background: [0.0; 3],
            training: false,
            sh_degree: 3,
            scale_compensation: true,
            opacity_mode: OpacityMode::Squashed,
            tile_size: TILE_SIZE,
        }
    }
}

impl RenderSettings {
    pub(crate) fn projection_options(&self) -> ProjectionOptions {
        ProjectionOptions { scale_compensation: self.scale_compensation, sh_degree: self.sh_degree }
    }
}

/// Solves `Σ a_i V_i = p, Σ a_i = 1`. `None` for a (near-)singular triangle.
#[inline]
pub fn compute_barycentric(st: &ScreenTriangle, p: &Vec2) -> Option<[f64; 3]> {
    if !(st.bary_det().abs() >= MIN_BARY_DET) {
        return None;
    }
    let d = p - (st.c2d + st.r2d[2]);
    let a = st.bary_inv * d;
    Some([a.x, a.y, 1.0 - a.x - a.y])
}

/// `e = 1 − 3 min(a)` and the index of the minimum (lowest index on ties).
#[inline]
pub fn eccentricity(bary: &[f64; 3]) -> (f64, usize) {
    let mut k = 0;
    if bary[1] < bary[k] {
        k = 1;
    }
    if bary[2] < bary[k] {
        k = 2;
    }
    (1.0 - 3.0 * bary[k], k)
}

/// Unclamped `O · exp(−½ e^{2γ})`.
#[inline]
pub fn fragment_opacity(e: f64, opacity: f64, gamma: f64) -> f64 {
    opacity * (-0.5 * e.powf(2.0 * gamma)).exp()
}

/// Fragment opacity from barycentric coordinates, capped at [`MAX_FRAGMENT_ALPHA`].
pub fn eccentricity_opacity(bary: &[f64; 3], opacity: f64, gamma: f64) -> f64 {
    let (e, _) = eccentricity(bary);
    fragment_opacity(e, opacity, gamma).min(MAX_FRAGMENT_ALPHA)
}

/// Axis-aligned box in continuous pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn is_empty(&self) -> bool {
        !(self.min.x <= self.max.x && self.min.y <= self.max.y)
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Inclusive range of pixel indices whose centers fall inside, if any.
    fn pixel_range(&self, width: usize, height: usize) -> Option<(usize, usize, usize, usize)> {
        let x0 = (self.min.x - 0.5).ceil().max(0.0);
        let y0 = (self.min.y - 0.5).ceil().max(0.0);
        let x1 = (self.max.x - 0.5).floor().min(width as f64 - 1.0);
        let y1 = (self.max.y - 0.5).floor().min(height as f64 - 1.0);
        if x0 > x1 || y0 > y1 {
            return None;
        }
        Some((x0 as usize, y0 as usize, x1 as usize, y1 as usize))
    }
}

/// Region where the fragment opacity can reach [`MIN_FRAGMENT_ALPHA`].
///
/// `{e ≤ t}` is the screen triangle scaled by `t` about its centroid, so the
/// box of the triangle scaled by `e_max = (2 ln(255 O))^{1/(2γ)}` bounds every
/// visible fragment. Returns `None` when `O ≤ 1/255` or the box misses the image.
pub fn level_set_bound(st: &ScreenTriangle, opacity: f64, gamma: f64, width: usize, height: usize) -> Option<Aabb> {
    if !(opacity > MIN_FRAGMENT_ALPHA) {
        return None;
    }
    let e_max = level_set_extent(opacity, gamma);
    let g = st.centroid();
    let mut min = Vec2::repeat(f64::INFINITY);
    let mut max = Vec2::repeat(f64::NEG_INFINITY);
    for v in st.vertices() {
        let p = g + (v - g) * e_max;
        min = min.inf(&p);
        max = max.sup(&p);
    }
    // slack for rounding in the barycentric solve
    let pad = 1e-6 * (1.0 + max.abs().max().max(min.abs().max()));
    let bx = Aabb {
        min: (min - Vec2::repeat(pad)).sup(&Vec2::zeros()),
        max: (max + Vec2::repeat(pad)).inf(&Vec2::new(width as f64, height as f64)),
    };
    if bx.is_empty() {
        None
    } else {
        Some(bx)
    }
}

#[inline]
pub fn level_set_extent(opacity: f64, gamma: f64) -> f64 {
    (2.0 * (opacity / MIN_FRAGMENT_ALPHA).ln()).powf(1.0 / (2.0 * gamma))
}

/// Screen triangles of every visible primitive, in primitive order.
pub fn project_scene(scene: &SceneModel, camera: &Camera, settings: &RenderSettings) -> Vec<ScreenTriangle> {
    let opts = settings.projection_options();
    let gamma = scene.gamma();
    scene
        .primitives
        .par_iter()
        .enumerate()
        .filter_map(|(i, prim)| {
            let o = settings.opacity_mode.effective(prim.opacity_param);
            project_triangle(prim, i, camera, gamma, o, &opts)
        })
        .collect()
}

/// Depth-sorted primitive lists per tile.
#[derive(Clone, Debug, PartialEq)]
pub struct TileBinning {
    pub tile_size: usize,
    pub tiles_x: usize,
    pub tiles_y: usize,
    /// `[start, end)` into `entries` for each tile.
    pub ranges: Vec<(usize, usize)>,
    /// Indices into the screen-triangle list.
    pub entries: Vec<u32>,
}

impl TileBinning {
    pub fn build(screen: &[ScreenTriangle], gamma: f64, width: usize, height: usize, tile_size: usize) -> Self {
        let tiles_x = width.div_ceil(tile_size);
        let tiles_y = height.div_ceil(tile_size);
        let mut keys: Vec<(u32, f64, u32, u32)> = screen
            .par_iter()
            .enumerate()
            .flat_map_iter(|(slot, st)| {
                let range = level_set_bound(st, st.opacity, gamma, width, height)
                    .and_then(|b| b.pixel_range(width, height));
                let tiles = range.map(|(x0, y0, x1, y1)| {
                    (x0 / tile_size, y0 / tile_size, x1 / tile_size, y1 / tile_size)
                });
                tiles
                    .into_iter()
                    .flat_map(move |(tx0, ty0, tx1, ty1)| {
                        (ty0..=ty1).flat_map(move |ty| (tx0..=tx1).map(move |tx| ty * tiles_x + tx))
                    })
                    .map(move |tile| (tile as u32, st.sort_depth, st.primitive_index as u32, slot as u32))
            })
            .collect();
        keys.par_sort_unstable_by(|a, b| {
            a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2))
        });
        let mut ranges = vec![(0usize, 0usize); tiles_x * tiles_y];
        let mut start = 0;
        while start < keys.len() {
            let tile = keys[start].0;
            let mut end = start;
            while end < keys.len() && keys[end].0 == tile {
                end += 1;
            }
            ranges[tile as usize] = (start, end);
            start = end;
        }
        let entries = keys.into_iter().map(|k| k.3).collect();
        Self { tile_size, tiles_x, tiles_y, ranges, entries }
    }

    #[inline]
    pub fn tile_list(&self, tile: usize) -> &[u32] {
        let (s, e) = self.ranges[tile];
        &self.entries[s..e]
    }

    /// Pixel rectangle `[x0, x1) × [y0, y1)` of a tile.
    #[inline]
    pub fn tile_rect(&self, tile: usize, width: usize, height: usize) -> (usize, usize, usize, usize) {
        let tx = tile % self.tiles_x;
        let ty = tile / self.tiles_x;
        let x0 = tx * self.tile_size;
        let y0 = ty * self.tile_size;
        (x0, y0, (x0 + self.tile_size).min(width), (y0 + self.tile_size).min(height))
    }

    pub fn num_tiles(&self) -> usize {
        self.tiles_x * self.tiles_y
    }
}

/// Per-tile shading records consumed by the backward pass.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TileRecord {
    /// Contributors per pixel (tile-local raster order), as positions in the
    /// tile list plus the blended opacity.
    pub(crate) contributors: Vec<(u32, f64)>,
    /// `len = pixels + 1` prefix offsets into `contributors`.
    pub(crate) offsets: Vec<u32>,
    pub(crate) final_transmittance: Vec<f64>,
    /// Blended normal before normalization.
    pub(crate) raw_normal: Vec<Vec3>,
}

/// Everything the backward pass needs from a forward render.
#[derive(Clone, Debug)]
pub struct RenderRecords {
    pub screen: Vec<ScreenTriangle>,
    pub binning: TileBinning,
    pub(crate) tiles: Vec<TileRecord>,
    pub(crate) fingerprint: u64,
    pub(crate) num_primitives: usize,
    pub(crate) settings: RenderSettings,
}

impl RenderRecords {
    /// Transmittance before each contributor is nonincreasing along the blend order.
    pub fn pixel_contributors(&self, x: usize, y: usize, width: usize) -> Vec<(usize, f64)> {
        let ts = self.binning.tile_size;
        let tile = (y / ts) * self.binning.tiles_x + x / ts;
        let (x0, y0, x1, _) = self.binning.tile_rect(tile, width, usize::MAX);
        let local = (y - y0) * (x1 - x0) + (x - x0);
        let rec = &self.tiles[tile];
        let list = self.binning.tile_list(tile);
        let (s, e) = (rec.offsets[local] as usize, rec.offsets[local + 1] as usize);
        rec.contributors[s..e]
            .iter()
            .map(|&(pos, o)| (self.screen[list[pos as usize] as usize].primitive_index, o))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct RenderOutput {
    pub width: usize,
    pub height: usize,
    pub color: Image,
    /// Alpha-weighted depth, not divided by alpha.
    pub depth: Image,
    pub normal: Image,
    pub alpha: Image,
    pub contrib_count: Vec<u32>,
    pub records: Option<RenderRecords>,
}

pub(crate) fn fingerprint(scene: &SceneModel, camera: &Camera, settings: &RenderSettings) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    scene.gamma().to_bits().hash(&mut h);
    scene.primitives.len().hash(&mut h);
    for p in &scene.primitives {
        for v in &p.vertices {
            for c in v.iter() {
                c.to_bits().hash(&mut h);
            }
        }
        p.opacity_param.to_bits().hash(&mut h);
        for c in &p.sh_coeffs {
            for v in c {
                v.to_bits().hash(&mut h);
            }
        }
    }
    camera.width.hash(&mut h);
    camera.height.hash(&mut h);
    for v in camera.world_to_view.rotation.iter().chain(camera.world_to_view.translation.iter()) {
        v.to_bits().hash(&mut h);
    }
    camera.fov_x.to_bits().hash(&mut h);
    camera.fov_y.to_bits().hash(&mut h);
    settings.scale_compensation.hash(&mut h);
    settings.sh_degree.hash(&mut h);
    settings.tile_size.hash(&mut h);
    match settings.opacity_mode {
        OpacityMode::Squashed => 0u64.hash(&mut h),
        OpacityMode::Binarized { threshold } => threshold.to_bits().hash(&mut h),
    }
    for c in settings.background {
        c.to_bits().hash(&mut h);
    }
    h.finish()
}

struct TileOutput {
    color: Vec<[f64; 3]>,
    depth: Vec<f64>,
    normal: Vec<Vec3>,
    alpha: Vec<f64>,
    count: Vec<u32>,
    record: TileRecord,
}

fn render_tile(
    tile: usize,
    binning: &TileBinning,
    screen: &[ScreenTriangle],
    camera: &Camera,
    gamma: f64,
    settings: &RenderSettings,
) -> TileOutput {
    let (x0, y0, x1, y1) = binning.tile_rect(tile, camera.width, camera.height);
    let n = (x1 - x0) * (y1 - y0);
    let list = binning.tile_list(tile);
    let mut out = TileOutput {
        color: Vec::with_capacity(n),
        depth: Vec::with_capacity(n),
        normal: Vec::with_capacity(n),
        alpha: Vec::with_capacity(n),
        count: Vec::with_capacity(n),
        record: TileRecord::default(),
    };
    if settings.training {
        out.record.offsets.reserve(n + 1);
        out.record.offsets.push(0);
        out.record.final_transmittance.reserve(n);
        out.record.raw_normal.reserve(n);
    }
    for y in y0..y1 {
        for x in x0..x1 {
            let p = Vec2::new(x as f64 + 0.5, y as f64 + 0.5);
            let mut t = 1.0;
            let mut color = [0.0; 3];
            let mut depth = 0.0;
            let mut normal = Vec3::zeros();
            let mut count = 0u32;
            for (pos, &slot) in list.iter().enumerate() {
                let st = &screen[slot as usize];
                let Some(a) = compute_barycentric(st, &p) else { continue };
                let (e, _) = eccentricity(&a);
                let o = fragment_opacity(e, st.opacity, gamma);
                if o < MIN_FRAGMENT_ALPHA {
                    continue;
                }
                let o = o.min(MAX_FRAGMENT_ALPHA);
                let w = o * t;
                for ch in 0..3 {
                    color[ch] += st.color[ch] * w;
                }
                depth += (a[0] * st.vertex_depths[0] + a[1] * st.vertex_depths[1] + a[2] * st.vertex_depths[2]) * w;
                normal += st.view_normal * w;
                t *= 1.0 - o;
                count += 1;
                if settings.training {
                    out.record.contributors.push((pos as u32, o));
                }
                if t < TRANSMITTANCE_EPS {
                    break;
                }
            }
            for ch in 0..3 {
                color[ch] += t * settings.background[ch];
            }
            let len = normal.norm();
            let unit = if len >= NORMAL_EPS { normal / len } else { Vec3::zeros() };
            out.color.push(color);
            out.depth.push(depth);
            out.normal.push(unit);
            out.alpha.push(1.0 - t);
            out.count.push(count);
            if settings.training {
                out.record.offsets.push(out.record.contributors.len() as u32);
                out.record.final_transmittance.push(t);
                out.record.raw_normal.push(normal);
            }
        }
    }
    out
}

/// Renders color, depth, normal and alpha. Records for the backward pass are
/// kept when `settings.training` is set.
pub fn render(scene: &SceneModel, camera: &Camera, settings: &RenderSettings) -> RenderOutput {
    let (w, h) = (camera.width, camera.height);
    let gamma = scene.gamma();
    let screen = project_scene(scene, camera, settings);
    let binning = TileBinning::build(&screen, gamma, w, h, settings.tile_size.max(1));
    let tiles: Vec<TileOutput> = (0..binning.num_tiles())
        .into_par_iter()
        .map(|t| render_tile(t, &binning, &screen, camera, gamma, settings))
        .collect();

    let mut color = Image::new(w, h, 3);
    let mut depth = Image::new(w, h, 1);
    let mut normal = Image::new(w, h, 3);
    let mut alpha = Image::new(w, h, 1);
    let mut contrib_count = vec![0u32; w * h];
    for (tile, out) in tiles.iter().enumerate() {
        let (x0, y0, x1, y1) = binning.tile_rect(tile, w, h);
        let mut k = 0;
        for y in y0..y1 {
            for x in x0..x1 {
                color.pixel_mut(x, y).copy_from_slice(&out.color[k]);
                depth.pixel_mut(x, y)[0] = out.depth[k];
                normal.pixel_mut(x, y).copy_from_slice(out.normal[k].as_slice());
                alpha.pixel_mut(x, y)[0] = out.alpha[k];
                contrib_count[y * w + x] = out.count[k];
                k += 1;
            }
        }
    }
    let records = settings.training.then(|| RenderRecords {
        fingerprint: fingerprint(scene, camera, settings),
        num_primitives: scene.len(),
        settings: settings.clone(),
        tiles: tiles.into_iter().map(|t| t.record).collect(),
        screen,
        binning,
    });
    RenderOutput { width: w, height: h, color, depth, normal, alpha, contrib_count, records }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::RigidTransform;
    use crate::scene::TrianglePrimitive;

    fn camera(size: usize) -> Camera {
        Camera::new(size, size, 1.0, 1.0, RigidTransform::identity()).unwrap()
    }

    fn screen_with_vertices(v: [Vec2; 3]) -> ScreenTriangle {
        // Build any projected triangle, then overwrite the 2D geometry.
        let prim = TrianglePrimitive::new(
            [Vec3::new(-0.1, 0.0, 2.0), Vec3::new(0.1, 0.0, 2.0), Vec3::new(0.0, 0.1, 2.0)],
            0.5,
            [0.5; 3],
            0,
        );
        let opts = ProjectionOptions { scale_compensation: true, sh_degree: 0 };
        let mut st = project_triangle(&prim, 0, &camera(32), 1.0, 0.5, &opts).unwrap();
        let c = (v[0] + v[1] + v[2]) / 3.0;
        st.c2d = c;
        st.r2d = [v[0] - c, v[1] - c, v[2] - c];
        let a = v[0] - v[2];
        let b = v[1] - v[2];
        st.bary_det = a.x * b.y - b.x * a.y;
        st.bary_inv = nalgebra::Matrix2::new(b.y, -b.x, -a.y, a.x) / st.bary_det;
        st
    }

    #[test]
    fn barycentric_examples() {
        let st = screen_with_vertices([Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]);
        let a = compute_barycentric(&st, &Vec2::new(0.25, 0.25)).unwrap();
        // solved by hand: P = a1 V1 + a2 V2 + a3 V3 → a2 = 0.25, a3 = 0.25, a1 = 0.5
        assert!((a[0] - 0.5).abs() < 1e-15 && (a[1] - 0.25).abs() < 1e-15 && (a[2] - 0.25).abs() < 1e-15);

        let st = screen_with_vertices([Vec2::new(3.0, 1.0), Vec2::new(7.5, 2.0), Vec2::new(4.0, 6.0)]);
        let a = compute_barycentric(&st, &st.centroid()).unwrap();
        for ai in a {
            assert!((ai - 1.0 / 3.0).abs() < 1e-12);
        }
        let a = compute_barycentric(&st, &Vec2::new(3.0, 1.0)).unwrap();
        assert!((a[0] - 1.0).abs() < 1e-12 && a[1].abs() < 1e-12 && a[2].abs() < 1e-12);
        assert_eq!(a[0] + a[1] + a[2], 1.0);
    }

    #[test]
    fn singular_triangle_skipped() {
        let mut st = screen_with_vertices([Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]);
        st.bary_det = 1e-12;
        assert!(compute_barycentric(&st, &Vec2::new(0.1, 0.1)).is_none());
    }

    #[test]
    fn opacity_examples() {
        let third = 1.0 / 3.0;
        assert_eq!(eccentricity_opacity(&[third, third, third], 1.0, 7.0), 0.99);
        let o = eccentricity_opacity(&[0.5, 0.5, 0.0], 0.8, 1.0);
        assert!((o - 0.8 * (-0.5f64).exp()).abs() < 1e-15);
        assert!((o - 0.48522).abs() < 1e-5);
        // 1.1^100 = exp(100 ln 1.1) ≈ 1.378e4
        let big = (100.0 * 1.1f64.ln()).exp();
        assert!((big - 1.378e4).abs() < 1.0);
        assert!(fragment_opacity(1.1, 1.0, 50.0) < 1e-300);
    }

    #[test]
    fn eccentricity_ties_route_to_lowest_index() {
        assert_eq!(eccentricity(&[0.2, 0.2, 0.6]).1, 0);
        assert_eq!(eccentricity(&[0.5, 0.25, 0.25]).1, 1);
    }

    #[test]
    fn level_set_extent_values() {
        let e = level_set_extent(1.0, 1.0);
        assert!((e - (2.0 * 255f64.ln()).sqrt()).abs() < 1e-12);
        assert!((e - 3.32904).abs() < 1e-5);
        let e = level_set_extent(1.0, 1000.0);
        assert!(e > 1.0 && e < 1.01);
    }

    #[test]
    fn level_set_bound_invisible_primitive() {
        let st = screen_with_vertices([Vec2::new(2.0, 2.0), Vec2::new(9.0, 2.0), Vec2::new(2.0, 9.0)]);
        assert!(level_set_bound(&st, 1.0 / 255.0, 1.0, 32, 32).is_none());
        assert!(level_set_bound(&st, 0.5, 1.0, 32, 32).is_some());
    }

    /// Points on the boundary of the triangle scaled by t about its centroid have e = t.
    #[test]
    fn scaled_boundary_has_constant_eccentricity() {
        let st = screen_with_vertices([Vec2::new(1.0, 2.0), Vec2::new(13.0, 4.5), Vec2::new(5.0, 11.0)]);
        let g = st.centroid();
        let v = st.vertices();
        for ti in 0..=30 {
            let t = ti as f64 * 0.1;
            for edge in 0..3 {
                for s in 0..=20 {
                    let u = s as f64 / 20.0;
                    let q = v[edge] * (1.0 - u) + v[(edge + 1) % 3] * u;
                    let p = g + (q - g) * t;
                    let (e, _) = eccentricity(&compute_barycentric(&st, &p).unwrap());
                    assert!((e - t).abs() < 1e-6, "t={t} e={e}");
                }
            }
        }
    }

    fn facing(z: f64, half: f64, opacity: f64, rgb: [f64; 3]) -> TrianglePrimitive {
        TrianglePrimitive::new(
            [Vec3::new(-half, -half, z), Vec3::new(3.0 * half, -half, z), Vec3::new(-half, 3.0 * half, z)],
            opacity,
            rgb,
            0,
        )
    }

    #[test]
    fn empty_scene_is_background() {
        let scene = SceneModel::new(vec![], 1.0, 0, 1.0).unwrap();
        let settings = RenderSettings { background: [1.0; 3], ..Default::default() };
        let out = render(&scene, &camera(20), &settings);
        assert!(out.color.data.iter().all(|&v| v == 1.0));
        assert!(out.alpha.data.iter().all(|&v| v == 0.0));
        assert!(out.normal.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_solid_triangle_depth() {
        let mut scene = SceneModel::new(vec![facing(5.0, 2.0, 0.9999, [1.0, 1.0, 1.0])], 50.0, 0, 1.0).unwrap();
        scene.set_gamma(50.0).unwrap();
        let out = render(&scene, &camera(16), &RenderSettings::default());
        // center pixel sits well inside the triangle
        let d = out.depth.get(8, 8, 0);
        assert!((d - 0.99 * 5.0).abs() < 1e-12, "{d}");
        assert!((out.alpha.get(8, 8, 0) - 0.99).abs() < 1e-15);
    }

    #[test]
    fn training_records_match_contributions() {
        let scene = SceneModel::new(
            vec![facing(3.0, 0.5, 0.7, [1.0, 0.0, 0.0]), facing(4.0, 0.6, 0.6, [0.0, 1.0, 0.0])],
            2.0,
            0,
            1.0,
        )
        .unwrap();
        let settings = RenderSettings { training: true, ..Default::default() };
        let out = render(&scene, &camera(24), &settings);
        let rec = out.records.as_ref().unwrap();
        for y in 0..24 {
            for x in 0..24 {
                let c = rec.pixel_contributors(x, y, 24);
                assert_eq!(c.len() as u32, out.contrib_count[y * 24 + x]);
                let mut t = 1.0;
                for (_, o) in &c {
                    let next = t * (1.0 - o);
                    assert!(next <= t);
                    t = next;
                }
                assert!((1.0 - t - out.alpha.get(x, y, 0)).abs() < 1e-15);
            }
        }
    }
}
