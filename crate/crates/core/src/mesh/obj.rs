//! ASCII Wavefront OBJ (`v` / `f` records, 1-based indices).

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::Point3;

use super::TriMesh;
use crate::error::{Error, Result};

pub fn to_obj_string(mesh: &TriMesh) -> String {
    let mut out = String::with_capacity(mesh.vertices().len() * 40 + mesh.faces().len() * 20);
    for v in mesh.vertices() {
        out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for f in mesh.faces() {
        out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    out
}

pub fn write_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(to_obj_string(mesh).as_bytes())?;
    Ok(())
}

pub fn parse_obj(text: &str) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let c: Vec<f64> = parts
                    .take(3)
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
                if c.len() != 3 {
                    return Err(Error::Format(format!("line {}: vertex needs 3 coordinates", lineno + 1)));
                }
                vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = parts
                    .map(|s| {
                        // Accept `i`, `i/t` and `i/t/n` forms.
                        s.split('/')
                            .next()
                            .unwrap_or("")
                            .parse::<usize>()
                            .ok()
                            .filter(|&i| i >= 1)
                            .map(|i| i - 1)
                            .ok_or_else(|| Error::Format(format!("line {}: bad face index `{s}`", lineno + 1)))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(Error::Format(format!("line {}: face needs 3 indices", lineno + 1)));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, faces)
}

pub fn read_obj(path: impl AsRef<Path>) -> Result<TriMesh> {
    parse_obj(&fs::read_to_string(path)?)
}
