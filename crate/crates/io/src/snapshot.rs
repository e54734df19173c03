//! Versioned little-endian binary container for a [`SceneModel`].
//!
//! Layout: magic, version (u32), gamma (f64), sh degree (u32), scene extent
//! (f64), primitive count (u64), then per primitive 9 vertex coordinates, the
//! opacity parameter and `(D + 1)² × 3` SH coefficients, all f64.

use std::path::Path;

use trisplat_core::sh::num_coeffs;
use trisplat_core::{SceneModel, TrianglePrimitive, Vec3};

use crate::error::{write_atomic, IoError, Result};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"TRISNAP\0";
pub const SNAPSHOT_VERSION: u32 = 1;

pub fn encode_snapshot(scene: &SceneModel) -> Vec<u8> {
    let per = 10 + 3 * num_coeffs(scene.sh_degree);
    let mut out = Vec::with_capacity(36 + 8 * per * scene.len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&scene.gamma().to_le_bytes());
    out.extend_from_slice(&(scene.sh_degree as u32).to_le_bytes());
    out.extend_from_slice(&scene.scene_extent.to_le_bytes());
    out.extend_from_slice(&(scene.len() as u64).to_le_bytes());
    for p in &scene.primitives {
        for v in &p.vertices {
            for c in v.iter() {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        out.extend_from_slice(&p.opacity_param.to_le_bytes());
        for c in p.sh_coeffs.iter().flatten() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Option<[u8; N]> {
        let s = self.bytes.get(self.pos..self.pos + N)?;
        self.pos += N;
        s.try_into().ok()
    }
    fn f64(&mut self) -> Option<f64> {
        self.take::<8>().map(f64::from_le_bytes)
    }
    fn u32(&mut self) -> Option<u32> {
        self.take::<4>().map(u32::from_le_bytes)
    }
    fn u64(&mut self) -> Option<u64> {
        self.take::<8>().map(u64::from_le_bytes)
    }
}

pub fn decode_snapshot(bytes: &[u8], path: &Path) -> Result<SceneModel> {
    let truncated = || IoError::format(path, "truncated snapshot");
    let mut r = Reader { bytes, pos: 0 };
    if r.take::<8>().as_ref() != Some(SNAPSHOT_MAGIC) {
        return Err(IoError::format(path, "not a trisplat snapshot"));
    }
    let version = r.u32().ok_or_else(truncated)?;
    if version != SNAPSHOT_VERSION {
        return Err(IoError::format(path, format!("snapshot version {version}, expected {SNAPSHOT_VERSION}")));
    }
    let gamma = r.f64().ok_or_else(truncated)?;
    let sh_degree = r.u32().ok_or_else(truncated)? as usize;
    if sh_degree > trisplat_core::sh::MAX_SH_DEGREE {
        return Err(IoError::format(path, format!("invalid SH degree {sh_degree}")));
    }
    let extent = r.f64().ok_or_else(truncated)?;
    let count = r.u64().ok_or_else(truncated)? as usize;
    let nc = num_coeffs(sh_degree);
    let expected = 8 * (10 + 3 * nc) as u128 * count as u128;
    if (bytes.len() - r.pos) as u128 != expected {
        return Err(IoError::format(path, format!("expected {expected} payload bytes, found {}", bytes.len() - r.pos)));
    }
    let mut primitives = Vec::with_capacity(count);
    for _ in 0..count {
        let mut v = [0.0; 9];
        for x in &mut v {
            *x = r.f64().ok_or_else(truncated)?;
        }
        let opacity_param = r.f64().ok_or_else(truncated)?;
        let mut sh_coeffs = vec![[0.0; 3]; nc];
        for c in sh_coeffs.iter_mut().flatten() {
            *c = r.f64().ok_or_else(truncated)?;
        }
        primitives.push(TrianglePrimitive {
            vertices: [Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5]), Vec3::new(v[6], v[7], v[8])],
            opacity_param,
            sh_coeffs,
        });
    }
    Ok(SceneModel::new(primitives, gamma, sh_degree, extent)?)
}

pub fn save_snapshot(scene: &SceneModel, path: &Path) -> Result<()> {
    write_atomic(path, &encode_snapshot(scene))
}

pub fn load_snapshot(path: &Path) -> Result<SceneModel> {
    let bytes = std::fs::read(path).map_err(|e| IoError::io(path, e))?;
    decode_snapshot(&bytes, path)
}
