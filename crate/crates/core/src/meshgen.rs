//! Procedural test meshes: subdivided icospheres and jittered planar grids.
//!
//! Both generators are fully deterministic, so fixtures built from them can
//! be regenerated bit-for-bit on any run.

use std::collections::HashMap;

use crate::meshops::TriMesh;

/// Unit icosahedron vertices and faces (outward orientation).
fn icosahedron() -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let vertices = raw.iter().map(|&v| normalize(v)).collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (vertices, faces)
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Unit sphere from `subdivisions` rounds of 4-to-1 triangle splitting of an
/// icosahedron: 12, 42, 162, 642, ... vertices.
pub fn icosphere(subdivisions: usize) -> TriMesh {
    let (mut vertices, mut faces) = icosahedron();
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint_index(&mut vertices, &mut midpoint, a, b);
            let bc = midpoint_index(&mut vertices, &mut midpoint, b, c);
            let ca = midpoint_index(&mut vertices, &mut midpoint, c, a);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    TriMesh::new(vertices, faces).expect("icosphere construction")
}

fn midpoint_index(
    vertices: &mut Vec<[f64; 3]>,
    cache: &mut HashMap<(usize, usize), usize>,
    a: usize,
    b: usize,
) -> usize {
    let key = (a.min(b), a.max(b));
    if let Some(&idx) = cache.get(&key) {
        return idx;
    }
    let (pa, pb) = (vertices[a], vertices[b]);
    let mid = normalize([
        0.5 * (pa[0] + pb[0]),
        0.5 * (pa[1] + pb[1]),
        0.5 * (pa[2] + pb[2]),
    ]);
    vertices.push(mid);
    let idx = vertices.len() - 1;
    cache.insert(key, idx);
    idx
}

/// splitmix64 step; the standard 64-bit mixing constants.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Uniform draw in [-1, 1).
fn unit_jitter(state: &mut u64) -> f64 {
    (splitmix64(state) >> 11) as f64 / (1u64 << 52) as f64 - 1.0
}

/// Planar `rows x cols` vertex grid, each cell split into two triangles,
/// with deterministic interior jitter in the plane and a mild height field.
/// The irregularity breaks mesh symmetries, which keeps Laplacian spectra
/// simple; boundary vertices stay in place so the patch remains embedded.
pub fn jittered_grid(rows: usize, cols: usize, seed: u64) -> TriMesh {
    assert!(rows >= 2 && cols >= 2, "grid needs at least 2x2 vertices");
    let mut state = seed ^ 0x5eed_0fda_7aca_fe01;
    let mut vertices = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let interior = r > 0 && r + 1 < rows && c > 0 && c + 1 < cols;
            let (mut x, mut y) = (c as f64, r as f64);
            if interior {
                x += 0.25 * unit_jitter(&mut state);
                y += 0.25 * unit_jitter(&mut state);
            }
            let z = 0.1 * unit_jitter(&mut state);
            vertices.push([x, y, z]);
        }
    }
    let at = |r: usize, c: usize| r * cols + c;
    let mut faces = Vec::with_capacity(2 * (rows - 1) * (cols - 1));
    for r in 0..rows - 1 {
        for c in 0..cols - 1 {
            faces.push([at(r, c), at(r, c + 1), at(r + 1, c + 1)]);
            faces.push([at(r, c), at(r + 1, c + 1), at(r + 1, c)]);
        }
    }
    TriMesh::new(vertices, faces).expect("grid construction")
}
