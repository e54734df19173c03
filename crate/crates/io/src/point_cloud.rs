//! PLY point clouds with optional per-vertex color.

use std::io::BufReader;
use std::path::Path;

use ply_rs::parser::Parser;
use ply_rs::ply::{
    Addable, DefaultElement, ElementDef, Encoding, Ply, Property, PropertyDef, PropertyType, ScalarType,
};
use ply_rs::writer::Writer;
use trisplat_core::Vec3;

use crate::error::{write_atomic, IoError, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    /// RGB in `[0, 1]`, one per point.
    pub colors: Vec<[f64; 3]>,
}

fn scalar(p: &Property) -> Option<f64> {
    Some(match *p {
        Property::Char(v) => v as f64,
        Property::UChar(v) => v as f64,
        Property::Short(v) => v as f64,
        Property::UShort(v) => v as f64,
        Property::Int(v) => v as f64,
        Property::UInt(v) => v as f64,
        Property::Float(v) => v as f64,
        Property::Double(v) => v,
        _ => return None,
    })
}

/// Colors stored as integers are scaled from `[0, 255]`; float colors are kept.
fn color_channel(p: &Property) -> Option<f64> {
    match p {
        Property::Float(_) | Property::Double(_) => scalar(p),
        _ => scalar(p).map(|v| v / 255.0),
    }
}

/// Reads `x, y, z` and, when present, `red, green, blue`. Missing colors
/// default to mid gray.
pub fn load_point_cloud_ply(path: &Path) -> Result<PointCloud> {
    let file = std::fs::File::open(path).map_err(|e| IoError::io(path, e))?;
    let mut reader = BufReader::new(file);
    let ply = Parser::<DefaultElement>::new().read_ply(&mut reader).map_err(|e| IoError::format(path, e))?;
    let vertices = ply.payload.get("vertex").ok_or_else(|| IoError::format(path, "no vertex element"))?;
    let mut cloud = PointCloud::default();
    for (i, v) in vertices.iter().enumerate() {
        let coord = |k: &str| {
            v.get(k).and_then(scalar).ok_or_else(|| IoError::format(path, format!("vertex {i} lacks numeric {k}")))
        };
        cloud.points.push(Vec3::new(coord("x")?, coord("y")?, coord("z")?));
        let rgb = ["red", "green", "blue"].map(|k| v.get(k).and_then(color_channel));
        cloud.colors.push(match rgb {
            [Some(r), Some(g), Some(b)] => [r, g, b],
            _ => [0.5; 3],
        });
    }
    Ok(cloud)
}

pub fn save_point_cloud_ply(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut ply = Ply::<DefaultElement>::new();
    ply.header.encoding = Encoding::BinaryLittleEndian;
    let mut element = ElementDef::new("vertex".to_string());
    for k in ["x", "y", "z"] {
        element.properties.add(PropertyDef::new(k.to_string(), PropertyType::Scalar(ScalarType::Float)));
    }
    for k in ["red", "green", "blue"] {
        element.properties.add(PropertyDef::new(k.to_string(), PropertyType::Scalar(ScalarType::UChar)));
    }
    ply.header.elements.add(element);
    let rows = cloud
        .points
        .iter()
        .zip(&cloud.colors)
        .map(|(p, c)| {
            let mut e = DefaultElement::new();
            e.insert("x".into(), Property::Float(p.x as f32));
            e.insert("y".into(), Property::Float(p.y as f32));
            e.insert("z".into(), Property::Float(p.z as f32));
            for (k, v) in ["red", "green", "blue"].iter().zip(c) {
                e.insert(k.to_string(), Property::UChar((v.clamp(0.0, 1.0) * 255.0).round() as u8));
            }
            e
        })
        .collect();
    ply.payload.insert("vertex".to_string(), rows);
    let mut buf = Vec::new();
    Writer::new().write_ply(&mut buf, &mut ply).map_err(|e| IoError::format(path, e))?;
    write_atomic(path, &buf)
}
