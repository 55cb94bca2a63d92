//! Triangle mesh operators: OBJ loading, cotangent Laplacian, lumped mass,
//! mesh normalization, farthest-point sampling, and cluster assignment.
//!
//! Together these produce the ingredients of a coarsening run: the fine
//! operator pair (L, M), a subset of vertices acting as coarse degrees of
//! freedom, the cluster map that aggregates mass, and the coarse sparsity
//! pattern derived from cluster adjacency.

use std::collections::{BTreeSet, BinaryHeap};
use std::path::Path;

use nalgebra::DMatrix;

use crate::sparsemat::{SymPattern, SymSparse};

/// Faces whose area falls below this fraction of the squared bounding-box
/// diagonal are treated as degenerate.
pub const DEGENERATE_AREA_FRACTION: f64 = 1e-14;

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("face {face} references vertex {index} outside 1..={n}")]
    FaceIndex { face: usize, index: isize, n: usize },
    #[error("face {face} is degenerate (area {area:e})")]
    DegenerateFace { face: usize, area: f64 },
    #[error("vertex {v} has no incident face")]
    IsolatedVertex { v: usize },
    #[error("cannot place {m} samples on a mesh with {components} connected components")]
    Disconnected { m: usize, components: usize },
    #[error("vertex {v} is unreachable from every sample")]
    Unreachable { v: usize },
    #[error("sample count {m} out of range 1..={n}")]
    SampleCount { m: usize, n: usize },
    #[error("seed vertex {seed} out of range for {n} vertices")]
    SeedOutOfRange { seed: usize, n: usize },
    #[error(transparent)]
    Sparse(#[from] crate::sparsemat::SparseError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Triangle mesh with positions and 0-based corner indices.
#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let n = vertices.len();
        for (f, face) in faces.iter().enumerate() {
            for &v in face {
                if v >= n {
                    return Err(MeshError::FaceIndex {
                        face: f,
                        index: v as isize + 1,
                        n,
                    });
                }
            }
        }
        Ok(TriMesh { vertices, faces })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Squared diagonal of the axis-aligned bounding box.
    pub fn bbox_diag_sq(&self) -> f64 {
        if self.vertices.is_empty() {
            return 0.0;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for d in 0..3 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (0..3).map(|d| (hi[d] - lo[d]).powi(2)).sum()
    }

    /// Undirected edges, each as `(min, max)`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut set = BTreeSet::new();
        for face in &self.faces {
            for k in 0..3 {
                let (a, b) = (face[k], face[(k + 1) % 3]);
                if a != b {
                    set.insert((a.min(b), a.max(b)));
                }
            }
        }
        set.into_iter().collect()
    }

    /// Vertex-adjacency pattern (edges plus diagonal).
    pub fn edge_pattern(&self) -> SymPattern {
        SymPattern::from_edges(self.n_vertices(), self.edges()).expect("edge pattern")
    }

    /// Adjacency with Euclidean edge lengths, for geodesic searches.
    fn length_adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n_vertices()];
        for (a, b) in self.edges() {
            let len = dist3(self.vertices[a], self.vertices[b]);
            adj[a].push((b, len));
            adj[b].push((a, len));
        }
        adj
    }

    fn face_area(&self, face: [usize; 3]) -> f64 {
        let [a, b, c] = face.map(|v| self.vertices[v]);
        0.5 * norm3(cross3(sub3(b, a), sub3(c, a)))
    }

    fn component_count(&self) -> usize {
        let n = self.n_vertices();
        let mut rep: Vec<usize> = (0..n).collect();
        fn find(rep: &mut [usize], mut v: usize) -> usize {
            while rep[v] != v {
                rep[v] = rep[rep[v]];
                v = rep[v];
            }
            v
        }
        for (a, b) in self.edges() {
            let (ra, rb) = (find(&mut rep, a), find(&mut rep, b));
            if ra != rb {
                rep[ra.max(rb)] = ra.min(rb);
            }
        }
        (0..n).filter(|&v| find(&mut rep, v) == v).count()
    }
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm3(sub3(a, b))
}

/// Loads a Wavefront OBJ file: `v` and `f` records only, polygons fan
/// triangulated, texture/normal slots ignored.  Degenerate faces (area below
/// [`DEGENERATE_AREA_FRACTION`] of the squared bbox diagonal) are dropped;
/// the second return value counts them.
pub fn load_obj(path: impl AsRef<Path>) -> Result<(TriMesh, usize), MeshError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_obj(&text, &path.display().to_string())
}

fn parse_obj(text: &str, path: &str) -> Result<(TriMesh, usize), MeshError> {
    let parse_err = |line: usize, msg: String| MeshError::Parse {
        path: path.to_string(),
        line,
        msg,
    };
    let mut vertices: Vec<[f64; 3]> = Vec::new();
    let mut corners: Vec<Vec<usize>> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let lineno = k + 1;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut pos = [0.0; 3];
                for p in &mut pos {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| parse_err(lineno, "vertex needs 3 coordinates".into()))?;
                    *p = tok
                        .parse()
                        .map_err(|_| parse_err(lineno, format!("bad coordinate '{tok}'")))?;
                }
                vertices.push(pos);
            }
            Some("f") => {
                let mut face = Vec::new();
                for tok in tokens {
                    let first = tok.split('/').next().unwrap_or("");
                    let idx: isize = first
                        .parse()
                        .map_err(|_| parse_err(lineno, format!("bad face index '{tok}'")))?;
                    if idx < 1 || idx as usize > vertices.len() {
                        return Err(MeshError::FaceIndex {
                            face: corners.len(),
                            index: idx,
                            n: vertices.len(),
                        });
                    }
                    face.push(idx as usize - 1);
                }
                if face.len() < 3 {
                    return Err(parse_err(lineno, "face needs at least 3 vertices".into()));
                }
                corners.push(face);
            }
            _ => {}
        }
    }
    let mut faces = Vec::new();
    for poly in &corners {
        for k in 1..poly.len() - 1 {
            faces.push([poly[0], poly[k], poly[k + 1]]);
        }
    }
    let mesh = TriMesh::new(vertices, faces)?;
    let threshold = DEGENERATE_AREA_FRACTION * mesh.bbox_diag_sq();
    let kept: Vec<[usize; 3]> = mesh
        .faces
        .iter()
        .copied()
        .filter(|&f| !(mesh.face_area(f) < threshold))
        .collect();
    let dropped = mesh.faces.len() - kept.len();
    Ok((
        TriMesh {
            vertices: mesh.vertices,
            faces: kept,
        },
        dropped,
    ))
}

/// Writes the mesh as OBJ with bit-exact coordinates.
pub fn save_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<(), MeshError> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for v in &mesh.vertices {
        writeln!(
            out,
            "v {} {} {}",
            crate::numfmt::format_g17(v[0]),
            crate::numfmt::format_g17(v[1]),
            crate::numfmt::format_g17(v[2])
        )?;
    }
    for f in &mesh.faces {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    out.flush()?;
    Ok(())
}

/// Cotangent Laplacian, positive semidefinite sign convention: off-diagonals
/// are minus half the cotangent sum of the opposing angles, and each diagonal
/// is minus its row's off-diagonal sum, accumulated in canonical entry order
/// so constructed row sums vanish.
pub fn cotan_laplacian(mesh: &TriMesh) -> Result<SymSparse, MeshError> {
    let pattern = mesh.edge_pattern();
    let mut values = vec![0.0; pattern.len()];
    let area_floor = DEGENERATE_AREA_FRACTION * mesh.bbox_diag_sq();
    for (f, face) in mesh.faces.iter().enumerate() {
        let pos = face.map(|v| mesh.vertices[v]);
        for k in 0..3 {
            let (o, a, b) = (pos[k], pos[(k + 1) % 3], pos[(k + 2) % 3]);
            let (ea, eb) = (sub3(a, o), sub3(b, o));
            let cross_norm = norm3(cross3(ea, eb));
            let area = 0.5 * cross_norm;
            if !(area >= area_floor) || area == 0.0 {
                return Err(MeshError::DegenerateFace { face: f, area });
            }
            let w = 0.5 * dot3(ea, eb) / cross_norm;
            // Edge opposite the corner at `o`.
            let entry = pattern
                .position(face[(k + 1) % 3], face[(k + 2) % 3])
                .expect("edge in pattern");
            values[entry] -= w;
        }
    }
    let mut diag = vec![0.0; mesh.n_vertices()];
    for (entry, &(i, j)) in pattern.entries().iter().enumerate() {
        if i != j {
            diag[i] -= values[entry];
            diag[j] -= values[entry];
        }
    }
    for (v, &d) in diag.iter().enumerate() {
        let entry = pattern.position(v, v).expect("diagonal in pattern");
        values[entry] = d;
    }
    Ok(SymSparse::new(pattern, values)?)
}

/// Barycentric lumped mass: each vertex collects a third of every incident
/// face area.  Errors on vertices with no incident face.
pub fn lumped_mass(mesh: &TriMesh) -> Result<Vec<f64>, MeshError> {
    let mut mass = vec![0.0; mesh.n_vertices()];
    for face in &mesh.faces {
        let share = mesh.face_area(*face) / 3.0;
        for &v in face {
            mass[v] += share;
        }
    }
    if let Some(v) = mass.iter().position(|&m| m <= 0.0) {
        return Err(MeshError::IsolatedVertex { v });
    }
    Ok(mass)
}

/// Uniformly scales the mesh so the total lumped mass equals the vertex
/// count.  Returns the scaled mesh and the applied factor.
pub fn normalize_mesh(mesh: &TriMesh) -> Result<(TriMesh, f64), MeshError> {
    let total: f64 = lumped_mass(mesh)?.iter().sum();
    let scale = (mesh.n_vertices() as f64 / total).sqrt();
    let vertices = mesh
        .vertices
        .iter()
        .map(|v| [v[0] * scale, v[1] * scale, v[2] * scale])
        .collect();
    Ok((
        TriMesh {
            vertices,
            faces: mesh.faces.clone(),
        },
        scale,
    ))
}

/// Binary heap key for geodesic searches: nonnegative distances compare
/// correctly through their bit patterns, and the owner index breaks ties
/// deterministically.
type HeapItem = std::cmp::Reverse<(u64, usize, usize)>;

fn dist_bits(d: f64) -> u64 {
    debug_assert!(d >= 0.0);
    d.to_bits()
}

/// Farthest-point sampling under graph geodesics.  The seed vertex is always
/// the first sample; each subsequent sample is the vertex farthest from the
/// current set (ties to the smallest index).  Returns the samples sorted
/// ascending.
pub fn farthest_point_sample(
    mesh: &TriMesh,
    m: usize,
    seed: usize,
) -> Result<Vec<usize>, MeshError> {
    let n = mesh.n_vertices();
    if m < 1 || m > n {
        return Err(MeshError::SampleCount { m, n });
    }
    if seed >= n {
        return Err(MeshError::SeedOutOfRange { seed, n });
    }
    let components = mesh.component_count();
    if m < components {
        return Err(MeshError::Disconnected { m, components });
    }
    let adj = mesh.length_adjacency();
    let mut dist = vec![f64::INFINITY; n];
    let mut taken = vec![false; n];
    let mut samples = Vec::with_capacity(m);
    let mut next = seed;
    for _ in 0..m {
        samples.push(next);
        taken[next] = true;
        // Relax distances from the newly added sample.
        let mut heap: BinaryHeap<HeapItem> = BinaryHeap::new();
        dist[next] = 0.0;
        heap.push(std::cmp::Reverse((dist_bits(0.0), 0, next)));
        while let Some(std::cmp::Reverse((dbits, _, v))) = heap.pop() {
            let d = f64::from_bits(dbits);
            if d > dist[v] {
                continue;
            }
            for &(w, len) in &adj[v] {
                let cand = d + len;
                if cand < dist[w] {
                    dist[w] = cand;
                    heap.push(std::cmp::Reverse((dist_bits(cand), 0, w)));
                }
            }
        }
        if samples.len() == m {
            break;
        }
        let mut best = usize::MAX;
        for v in 0..n {
            if !taken[v] && (best == usize::MAX || dist[v] > dist[best]) {
                best = v;
            }
        }
        next = best;
    }
    samples.sort_unstable();
    Ok(samples)
}

/// Assigns every vertex to its geodesically nearest sample; distance ties go
/// to the smaller sample index.  Errors if any vertex is unreachable.
pub fn cluster_assign(mesh: &TriMesh, samples: &[usize]) -> Result<Vec<usize>, MeshError> {
    let n = mesh.n_vertices();
    if samples.is_empty() || samples.len() > n {
        return Err(MeshError::SampleCount {
            m: samples.len(),
            n,
        });
    }
    for &s in samples {
        if s >= n {
            return Err(MeshError::SeedOutOfRange { seed: s, n });
        }
    }
    let adj = mesh.length_adjacency();
    let mut dist = vec![f64::INFINITY; n];
    let mut owner = vec![usize::MAX; n];
    let mut heap: BinaryHeap<HeapItem> = BinaryHeap::new();
    for (k, &s) in samples.iter().enumerate() {
        dist[s] = 0.0;
        owner[s] = k;
        heap.push(std::cmp::Reverse((dist_bits(0.0), k, s)));
    }
    while let Some(std::cmp::Reverse((dbits, k, v))) = heap.pop() {
        let d = f64::from_bits(dbits);
        if d > dist[v] || k > owner[v] {
            continue;
        }
        for &(w, len) in &adj[v] {
            let cand = d + len;
            if cand < dist[w] || (cand == dist[w] && k < owner[w]) {
                dist[w] = cand;
                owner[w] = k;
                heap.push(std::cmp::Reverse((dist_bits(cand), k, w)));
            }
        }
    }
    if let Some(v) = owner.iter().position(|&o| o == usize::MAX) {
        return Err(MeshError::Unreachable { v });
    }
    Ok(owner)
}

/// Sums fine masses per cluster, in ascending fine-vertex order.
pub fn coarse_mass(assignment: &[usize], fine_mass: &[f64], m: usize) -> Vec<f64> {
    assert_eq!(assignment.len(), fine_mass.len());
    let mut mass = vec![0.0; m];
    for (v, &k) in assignment.iter().enumerate() {
        mass[k] += fine_mass[v];
    }
    mass
}

/// Coarse sparsity pattern: cluster adjacency induced by the fine pattern,
/// expanded to `rings` graph rings.
pub fn coarse_pattern(
    fine_pattern: &SymPattern,
    assignment: &[usize],
    m: usize,
    rings: usize,
) -> SymPattern {
    assert_eq!(assignment.len(), fine_pattern.n());
    let edges = fine_pattern.entries().iter().filter_map(|&(i, j)| {
        let (a, b) = (assignment[i], assignment[j]);
        (a != b).then_some((a, b))
    });
    let adjacency = SymPattern::from_edges(m, edges).expect("cluster adjacency");
    adjacency.power(rings.max(1))
}

/// Row-selection operator that restricts fine vertex data to the samples.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Restriction {
    pub samples: Vec<usize>,
    pub n_fine: usize,
}

impl Restriction {
    pub fn new(samples: Vec<usize>, n_fine: usize) -> Self {
        debug_assert!(samples.iter().all(|&s| s < n_fine));
        Restriction { samples, n_fine }
    }

    pub fn m(&self) -> usize {
        self.samples.len()
    }

    /// Picks the sample rows out of a fine-row matrix.
    pub fn select_rows(&self, fine: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(fine.nrows(), self.n_fine, "fine row count mismatch");
        DMatrix::from_fn(self.samples.len(), fine.ncols(), |r, c| {
            fine[(self.samples[r], c)]
        })
    }

    /// Dense selection matrix, one unit entry per row.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut r = DMatrix::zeros(self.samples.len(), self.n_fine);
        for (k, &s) in self.samples.iter().enumerate() {
            r[(k, s)] = 1.0;
        }
        r
    }
}

/// Everything the solver needs to know about the fine-to-coarse reduction.
#[derive(Clone, Debug)]
pub struct CoarseningSetup {
    /// Coarse degrees of freedom: fine vertex indices, ascending.
    pub samples: Vec<usize>,
    /// Cluster index of every fine vertex.
    pub assignment: Vec<usize>,
    /// Diagonal of the coarse mass matrix.
    pub coarse_mass: Vec<f64>,
    /// Target sparsity pattern of the coarse operator.
    pub pattern: SymPattern,
    /// Null-space vector the coarse operator must annihilate.
    pub nullspace: Vec<f64>,
    /// Required value of (coarse operator) * nullspace.
    pub rhs: Vec<f64>,
}

impl CoarseningSetup {
    /// Samples, clusters, aggregated mass, and pattern for a mesh coarsening.
    pub fn build(
        mesh: &TriMesh,
        fine_pattern: &SymPattern,
        fine_mass: &[f64],
        m: usize,
        rings: usize,
        seed: usize,
    ) -> Result<Self, MeshError> {
        let samples = farthest_point_sample(mesh, m, seed)?;
        let assignment = cluster_assign(mesh, &samples)?;
        let coarse = coarse_mass(&assignment, fine_mass, m);
        let pattern = coarse_pattern(fine_pattern, &assignment, m, rings);
        Ok(CoarseningSetup {
            samples,
            assignment,
            coarse_mass: coarse,
            pattern,
            nullspace: vec![1.0; m],
            rhs: vec![0.0; m],
        })
    }

    /// Trivial setup that keeps every vertex: restriction is the identity and
    /// the coarse quantities are the fine ones.
    pub fn identity(fine_pattern: &SymPattern, fine_mass: &[f64]) -> Self {
        let n = fine_pattern.n();
        CoarseningSetup {
            samples: (0..n).collect(),
            assignment: (0..n).collect(),
            coarse_mass: fine_mass.to_vec(),
            pattern: fine_pattern.clone(),
            nullspace: vec![1.0; n],
            rhs: vec![0.0; n],
        }
    }

    pub fn m(&self) -> usize {
        self.samples.len()
    }

    pub fn restriction(&self) -> Restriction {
        Restriction::new(self.samples.clone(), self.assignment.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn equilateral() -> TriMesh {
        TriMesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.5, 3f64.sqrt() / 2.0, 0.0],
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    fn path_strip(n: usize) -> TriMesh {
        // Vertices along the x axis, zigzag offsets in y give nonzero areas.
        let vertices = (0..n)
            .map(|i| [i as f64, if i % 2 == 0 { 0.0 } else { 0.4 }, 0.0])
            .collect();
        let faces = (0..n.saturating_sub(2))
            .map(|i| [i, i + 1, i + 2])
            .collect();
        TriMesh::new(vertices, faces).unwrap()
    }

    #[test]
    fn obj_parsing_with_fans_and_slashes() {
        let text = "\
# comment
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
vn 0 0 1
f 1/1/1 2/2/1 3/3/1 4/4/1
";
        let (mesh, dropped) = parse_obj(text, "test").unwrap();
        assert_eq!(mesh.n_vertices(), 4);
        assert_eq!(mesh.faces, vec![[0, 1, 2], [0, 2, 3]]);
        assert_eq!(dropped, 0);
    }

    #[test]
    fn obj_drops_degenerate_faces() {
        let text = "\
v 0 0 0
v 1 0 0
v 0 1 0
f 1 2 3
f 1 1 2
";
        let (mesh, dropped) = parse_obj(text, "test").unwrap();
        assert_eq!(mesh.faces.len(), 1);
        assert_eq!(dropped, 1);
    }

    #[test]
    fn obj_rejects_zero_index() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n";
        assert!(matches!(
            parse_obj(text, "test"),
            Err(MeshError::FaceIndex { index: 0, .. })
        ));
    }

    #[test]
    fn obj_round_trip_preserves_bits() {
        let mesh = equilateral();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.obj");
        save_obj(&mesh, &path).unwrap();
        let (back, dropped) = load_obj(&path).unwrap();
        assert_eq!(dropped, 0);
        assert_eq!(back, mesh);
    }

    #[test]
    fn cotan_on_equilateral_triangle() {
        let l = cotan_laplacian(&equilateral()).unwrap();
        let w = 1.0 / (2.0 * 3f64.sqrt());
        for (i, j) in [(1, 0), (2, 0), (2, 1)] {
            assert!((l.get(i, j) + w).abs() < 1e-12, "off-diagonal");
        }
        for d in 0..3 {
            assert!((l.get(d, d) - 2.0 * w).abs() < 1e-12, "diagonal");
        }
    }

    #[test]
    fn cotan_row_sums_vanish_at_assembly() {
        let mesh = path_strip(6);
        let l = cotan_laplacian(&mesh).unwrap();
        // Re-summing each row in the assembly order (off-diagonals in
        // canonical entry order, diagonal last) gives exactly zero.
        let n = mesh.n_vertices();
        let mut sums = vec![0.0; n];
        for (a, &(i, j)) in l.pattern().entries().iter().enumerate() {
            if i != j {
                sums[i] += l.values()[a];
                sums[j] += l.values()[a];
            }
        }
        for v in 0..n {
            assert_eq!(sums[v] + l.get(v, v), 0.0);
        }
    }

    #[test]
    fn cotan_rejects_degenerate_face() {
        let mesh = TriMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(
            cotan_laplacian(&mesh),
            Err(MeshError::DegenerateFace { .. })
        ));
    }

    #[test]
    fn lumped_mass_of_equilateral() {
        let mass = lumped_mass(&equilateral()).unwrap();
        let share = 3f64.sqrt() / 4.0 / 3.0;
        for &m in &mass {
            assert!((m - share).abs() < 1e-12);
        }
    }

    #[test]
    fn lumped_mass_rejects_isolated_vertex() {
        let mesh = TriMesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [5.0, 5.0, 5.0],
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(
            lumped_mass(&mesh),
            Err(MeshError::IsolatedVertex { v: 3 })
        ));
    }

    #[test]
    fn normalization_reaches_unit_average_mass() {
        let mesh = equilateral();
        let (scaled, factor) = normalize_mesh(&mesh).unwrap();
        let expected = (3.0 / (3f64.sqrt() / 4.0)).sqrt();
        assert!((factor - expected).abs() < 1e-12);
        let total: f64 = lumped_mass(&scaled).unwrap().iter().sum();
        assert!((total - 3.0).abs() < 1e-9);
    }

    #[test]
    fn fps_on_path_picks_far_end() {
        let mesh = path_strip(5);
        let samples = farthest_point_sample(&mesh, 2, 0).unwrap();
        assert_eq!(samples, vec![0, 4]);
    }

    #[test]
    fn fps_seed_is_always_kept() {
        let mesh = path_strip(5);
        let samples = farthest_point_sample(&mesh, 3, 2).unwrap();
        assert!(samples.contains(&2));
    }

    #[test]
    fn fps_rejects_undercovered_disconnection() {
        let mut mesh = path_strip(5);
        // Second component far away.
        let base = mesh.vertices.len();
        mesh.vertices
            .extend([[100.0, 0.0, 0.0], [101.0, 0.0, 0.0], [100.5, 1.0, 0.0]]);
        mesh.faces.push([base, base + 1, base + 2]);
        assert!(matches!(
            farthest_point_sample(&mesh, 1, 0),
            Err(MeshError::Disconnected { .. })
        ));
        let samples = farthest_point_sample(&mesh, 2, 0).unwrap();
        assert!(samples.iter().any(|&s| s >= base));
    }

    #[test]
    fn cluster_ties_prefer_smaller_sample() {
        // Strip whose bottom row is the path 0-1-2 with unit edges; vertex 1
        // ties between both samples and must go to sample index 0.
        let mesh = TriMesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [2.0, 0.0, 0.0],
                [0.5, 1.0, 0.0],
                [1.5, 1.0, 0.0],
            ],
            vec![[0, 1, 3], [1, 4, 3], [1, 2, 4]],
        )
        .unwrap();
        let assignment = cluster_assign(&mesh, &[0, 2]).unwrap();
        assert_eq!(assignment[0], 0);
        assert_eq!(assignment[2], 1);
        assert_eq!(assignment[1], 0, "tie must go to the smaller sample index");
    }

    #[test]
    fn coarse_mass_conserves_total() {
        let mesh = path_strip(7);
        let fine = lumped_mass(&mesh).unwrap();
        let samples = farthest_point_sample(&mesh, 3, 0).unwrap();
        let assignment = cluster_assign(&mesh, &samples).unwrap();
        let coarse = coarse_mass(&assignment, &fine, samples.len());
        let fine_total: f64 = fine.iter().sum();
        let coarse_total: f64 = coarse.iter().sum();
        assert!((fine_total - coarse_total).abs() <= 1e-12 * fine_total);
    }

    #[test]
    fn identity_assignment_keeps_pattern() {
        let mesh = path_strip(5);
        let pattern = mesh.edge_pattern();
        let assignment: Vec<usize> = (0..5).collect();
        let coarse = coarse_pattern(&pattern, &assignment, 5, 1);
        assert_eq!(coarse, pattern);
    }

    #[test]
    fn rings_grow_the_coarse_pattern() {
        let mesh = path_strip(7);
        let pattern = mesh.edge_pattern();
        let assignment: Vec<usize> = (0..7).collect();
        let r1 = coarse_pattern(&pattern, &assignment, 7, 1);
        let r2 = coarse_pattern(&pattern, &assignment, 7, 2);
        assert!(r1.is_subset_of(&r2));
        assert!(r2.len() > r1.len());
    }

    #[test]
    fn restriction_selects_sample_rows() {
        let r = Restriction::new(vec![1, 3], 4);
        let fine = DMatrix::from_row_slice(4, 2, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let coarse = r.select_rows(&fine);
        assert_eq!(coarse, DMatrix::from_row_slice(2, 2, &[2.0, 3.0, 6.0, 7.0]));
        assert_eq!(r.to_dense() * fine, coarse);
    }

    #[test]
    fn setup_aggregates_every_vertex() {
        let mesh = path_strip(9);
        let mass = lumped_mass(&mesh).unwrap();
        let setup = CoarseningSetup::build(&mesh, &mesh.edge_pattern(), &mass, 3, 1, 0).unwrap();
        assert_eq!(setup.m(), 3);
        assert_eq!(setup.assignment.len(), 9);
        for k in 0..3 {
            assert!(setup.assignment.contains(&k));
            assert!(setup.coarse_mass[k] > 0.0);
        }
        assert_eq!(setup.assignment[setup.samples[1]], 1);
    }
}
