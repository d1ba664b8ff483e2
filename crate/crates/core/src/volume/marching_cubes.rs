//! Marching cubes with face-consistent ambiguity resolution.
//!
//! Each cell's polygon is assembled from per-face segments: a face with two
//! crossings yields one segment, a face with four crossings is resolved with
//! the asymptotic decider (bilinear saddle value compared to the iso value,
//! ties joining the above-iso corners). Since the decision depends on the
//! four shared face values only, neighboring cells always agree and the
//! surface is closed wherever the above-iso region stays off the grid faces.

use std::collections::HashMap;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::mesh::TriMesh;

/// Corner `i` sits at offset `(i & 1, (i >> 1) & 1, (i >> 2) & 1)`.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [0, 1, 1],
    [1, 1, 1],
];

/// Cell faces as corner cycles, counter-clockwise seen from outside the cell.
const FACES: [[usize; 4]; 6] = [
    [0, 2, 3, 1],
    [4, 5, 7, 6],
    [0, 1, 5, 4],
    [2, 6, 7, 3],
    [0, 4, 6, 2],
    [1, 3, 7, 5],
];

/// Triangulated iso-surface of `field` at `iso`. Normals (from winding)
/// point away from the region where the field exceeds `iso`.
pub fn marching_cubes(field: &ScalarField, iso: f64) -> Result<TriMesh> {
    if !iso.is_finite() {
        return Err(Error::DomainError(format!("iso value {iso}")));
    }
    let grid = *field.grid();
    let [nx, ny, nz] = grid.dims;
    let values = field.data();

    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut edge_vertex: HashMap<usize, usize> = HashMap::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();

    let mut next = [usize::MAX; 12];
    let mut seen = [false; 12];

    for z in 0..nz - 1 {
        for y in 0..ny - 1 {
            for x in 0..nx - 1 {
                let mut val = [0.0; 8];
                let mut inside = [false; 8];
                let mut mask = 0u8;
                for (c, off) in CORNERS.iter().enumerate() {
                    val[c] = values[grid.index([x + off[0], y + off[1], z + off[2]])];
                    inside[c] = val[c] > iso;
                    mask |= (inside[c] as u8) << c;
                }
                if mask == 0 || mask == 0xff {
                    continue;
                }

                // Directed segments between cell edges, keyed by local edge id.
                next.fill(usize::MAX);
                let mut ambiguous = false;
                for face in FACES.iter() {
                    let mut exits = [0usize; 2];
                    let mut entries = [0usize; 2];
                    let (mut n_exit, mut n_entry) = (0, 0);
                    let mut exit_pos = [0usize; 2];
                    for i in 0..4 {
                        let (a, b) = (face[i], face[(i + 1) % 4]);
                        if inside[a] && !inside[b] {
                            exits[n_exit] = local_edge(a, b);
                            exit_pos[n_exit] = i;
                            n_exit += 1;
                        } else if !inside[a] && inside[b] {
                            entries[n_entry] = local_edge(a, b);
                            n_entry += 1;
                        }
                    }
                    match n_exit {
                        0 => {}
                        1 => next[exits[0]] = entries[0],
                        _ => {
                            ambiguous = true;
                            let [q0, q1, q2, q3] = face.map(|c| val[c]);
                            let saddle = (q0 * q2 - q1 * q3) / (q0 + q2 - q1 - q3);
                            let joined = saddle >= iso;
                            for k in 0..2 {
                                let i = exit_pos[k];
                                let partner_pos = if joined { (i + 1) % 4 } else { (i + 3) % 4 };
                                let (a, b) = (face[partner_pos], face[(partner_pos + 1) % 4]);
                                next[exits[k]] = local_edge(a, b);
                            }
                        }
                    }
                }

                seen.fill(false);
                for start in 0..12 {
                    if next[start] == usize::MAX || seen[start] {
                        continue;
                    }
                    let mut ring = Vec::with_capacity(12);
                    let mut e = start;
                    while !seen[e] {
                        seen[e] = true;
                        let (a, b) = EDGES[e];
                        let key = global_edge_key(&grid.dims, [x, y, z], a, b);
                        let id = *edge_vertex.entry(key).or_insert_with(|| {
                            let t = (iso - val[a]) / (val[b] - val[a]);
                            let pa = grid.world_of(add(&[x, y, z], a));
                            let pb = grid.world_of(add(&[x, y, z], b));
                            vertices.push(pa + (pb - pa) * t);
                            vertices.len() - 1
                        });
                        ring.push(id);
                        e = next[e];
                    }
                    emit_ring(&ring, ambiguous, &mut vertices, &mut faces);
                }
            }
        }
    }

    if faces.is_empty() {
        return Err(Error::NoSurface(iso));
    }
    TriMesh::new(vertices, faces)
}

/// Cell edges as corner pairs (lower corner first).
const EDGES: [(usize, usize); 12] = [
    (0, 1),
    (2, 3),
    (4, 5),
    (6, 7),
    (0, 2),
    (1, 3),
    (4, 6),
    (5, 7),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

fn local_edge(a: usize, b: usize) -> usize {
    let (a, b) = (a.min(b), a.max(b));
    EDGES.iter().position(|&e| e == (a, b)).expect("corners share an edge")
}

fn add(base: &[usize; 3], corner: usize) -> [usize; 3] {
    let o = CORNERS[corner];
    [base[0] + o[0], base[1] + o[1], base[2] + o[2]]
}

fn global_edge_key(dims: &[usize; 3], base: [usize; 3], a: usize, b: usize) -> usize {
    let p = add(&base, a);
    let axis = (a ^ b).trailing_zeros() as usize;
    (p[0] + dims[0] * (p[1] + dims[1] * p[2])) * 3 + axis
}

fn emit_ring(ring: &[usize], ambiguous: bool, vertices: &mut Vec<Point3<f64>>, faces: &mut Vec<[usize; 3]>) {
    // Ring order keeps the above-iso side on the left of each face segment
    // seen from outside the cell, so triangles are emitted reversed to face
    // away from it. Rings in cells with an ambiguous face may pair up vertices that another
    // cell also pairs, so they get a private center vertex instead of a fan.
    if ring.len() == 3 {
        faces.push([ring[0], ring[2], ring[1]]);
    } else if !ambiguous {
        for k in 1..ring.len() - 1 {
            faces.push([ring[0], ring[k + 1], ring[k]]);
        }
    } else {
        let c = ring
            .iter()
            .fold(nalgebra::Vector3::zeros(), |acc, &i| acc + vertices[i].coords)
            / ring.len() as f64;
        vertices.push(Point3::from(c));
        let center = vertices.len() - 1;
        for k in 0..ring.len() {
            faces.push([center, ring[(k + 1) % ring.len()], ring[k]]);
        }
    }
}
