//! Binary glTF 2.0 export of the solid triangle soup.
//!
//! Each face gets its own three vertices so the per-vertex `COLOR_0` can carry
//! a flat face color. Positions are float32, colors normalized RGBA8.

use std::path::Path;

use serde_json::json;
use trisplat_core::mesh::{MeshAsset, MeshFace};
use trisplat_core::{SceneModel, Vec3};

use crate::error::{write_atomic, IoError, Result};

const GLB_MAGIC: u32 = 0x4654_6C67;
const CHUNK_JSON: u32 = 0x4E4F_534A;
const CHUNK_BIN: u32 = 0x004E_4942;
const ARRAY_BUFFER: u32 = 34962;
const FLOAT: u32 = 5126;
const UNSIGNED_BYTE: u32 = 5121;

fn pad_to_4(buf: &mut Vec<u8>, fill: u8) {
    while !buf.len().is_multiple_of(4) {
        buf.push(fill);
    }
}

pub fn encode_glb(mesh: &MeshAsset) -> std::result::Result<Vec<u8>, String> {
    if mesh.is_empty() {
        return Err("cannot export an empty mesh".into());
    }
    let n = 3 * mesh.len();
    let mut bin = Vec::with_capacity(n * 16);
    let mut min = [f32::INFINITY; 3];
    let mut max = [f32::NEG_INFINITY; 3];
    for face in &mesh.faces {
        for v in &face.vertices {
            for k in 0..3 {
                let x = v[k] as f32;
                if !x.is_finite() {
                    return Err("non-finite vertex position".into());
                }
                min[k] = min[k].min(x);
                max[k] = max[k].max(x);
                bin.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    let color_offset = bin.len();
    for face in &mesh.faces {
        let rgba = [
            (face.color[0].clamp(0.0, 1.0) * 255.0).round() as u8,
            (face.color[1].clamp(0.0, 1.0) * 255.0).round() as u8,
            (face.color[2].clamp(0.0, 1.0) * 255.0).round() as u8,
            255,
        ];
        for _ in 0..3 {
            bin.extend_from_slice(&rgba);
        }
    }
    let total = bin.len();
    let doc = json!({
        "asset": { "version": "2.0", "generator": "trisplat" },
        "scene": 0,
        "scenes": [{ "nodes": [0] }],
        "nodes": [{ "mesh": 0 }],
        "meshes": [{
            "primitives": [{
                "attributes": { "POSITION": 0, "COLOR_0": 1 },
                "material": 0,
                "mode": 4
            }]
        }],
        "materials": [{
            "pbrMetallicRoughness": { "baseColorFactor": [1.0, 1.0, 1.0, 1.0], "metallicFactor": 0.0, "roughnessFactor": 1.0 },
            "doubleSided": true
        }],
        "buffers": [{ "byteLength": total }],
        "bufferViews": [
            { "buffer": 0, "byteOffset": 0, "byteLength": color_offset, "target": ARRAY_BUFFER },
            { "buffer": 0, "byteOffset": color_offset, "byteLength": total - color_offset, "target": ARRAY_BUFFER }
        ],
        "accessors": [
            { "bufferView": 0, "componentType": FLOAT, "count": n, "type": "VEC3", "min": min, "max": max },
            { "bufferView": 1, "componentType": UNSIGNED_BYTE, "normalized": true, "count": n, "type": "VEC4" }
        ]
    });
    let mut json_bytes = serde_json::to_vec(&doc).map_err(|e| e.to_string())?;
    pad_to_4(&mut json_bytes, b' ');
    pad_to_4(&mut bin, 0);

    let length = 12 + 8 + json_bytes.len() + 8 + bin.len();
    let mut out = Vec::with_capacity(length);
    out.extend_from_slice(&GLB_MAGIC.to_le_bytes());
    out.extend_from_slice(&2u32.to_le_bytes());
    out.extend_from_slice(&(length as u32).to_le_bytes());
    out.extend_from_slice(&(json_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&CHUNK_JSON.to_le_bytes());
    out.extend_from_slice(&json_bytes);
    out.extend_from_slice(&(bin.len() as u32).to_le_bytes());
    out.extend_from_slice(&CHUNK_BIN.to_le_bytes());
    out.extend_from_slice(&bin);
    Ok(out)
}

/// Writes one face per primitive of `scene`.
pub fn export_glb(scene: &SceneModel, path: &Path) -> Result<MeshAsset> {
    let mesh = MeshAsset::from_scene(scene);
    let bytes = encode_glb(&mesh).map_err(|e| IoError::format(path, e))?;
    write_atomic(path, &bytes)?;
    Ok(mesh)
}

/// Reads every triangle-list primitive of a glTF/GLB file into a triangle soup.
pub fn import_mesh(path: &Path) -> Result<MeshAsset> {
    let (doc, buffers, _) = gltf::import(path).map_err(|e| IoError::format(path, e))?;
    mesh_from_document(&doc, &buffers, path)
}

pub fn import_mesh_slice(bytes: &[u8]) -> Result<MeshAsset> {
    let path = Path::new("<memory>");
    let (doc, buffers, _) = gltf::import_slice(bytes).map_err(|e| IoError::format(path, e))?;
    mesh_from_document(&doc, &buffers, path)
}

fn mesh_from_document(doc: &gltf::Document, buffers: &[gltf::buffer::Data], path: &Path) -> Result<MeshAsset> {
    let mut faces = Vec::new();
    for mesh in doc.meshes() {
        for prim in mesh.primitives() {
            if prim.mode() != gltf::mesh::Mode::Triangles {
                continue;
            }
            let reader = prim.reader(|b| buffers.get(b.index()).map(|d| &d.0[..]));
            let positions: Vec<[f32; 3]> =
                reader.read_positions().ok_or_else(|| IoError::format(path, "primitive without POSITION"))?.collect();
            let colors: Vec<[f32; 4]> = match reader.read_colors(0) {
                Some(c) => c.into_rgba_f32().collect(),
                None => vec![[1.0; 4]; positions.len()],
            };
            let order: Vec<usize> = match reader.read_indices() {
                Some(idx) => idx.into_u32().map(|i| i as usize).collect(),
                None => (0..positions.len()).collect(),
            };
            for tri in order.chunks_exact(3) {
                let v = |i: usize| {
                    let p = positions[tri[i]];
                    Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64)
                };
                let c = colors[tri[0]];
                faces.push(MeshFace { vertices: [v(0), v(1), v(2)], color: [c[0] as f64, c[1] as f64, c[2] as f64] });
            }
        }
    }
    Ok(MeshAsset { faces })
}
